"""Latent factor models for next-term student grade prediction."""

__version__ = "0.1.0"

from .data import (
    Dataset,
    GradeRecord,
    parse_csv,
    split_train_test,
    student_history,
    validation_split,
)
from .errors import (
    ConfigError,
    IngestionError,
    ProtocolError,
    TrainingDivergedError,
    UnknownGradeError,
    UnknownStudentError,
)
from .grades import letter_to_numeric, numeric_to_letter, tick_distance
from .models import (
    HyperParams,
    ModelParams,
    ModelSpec,
    cumulative_knowledge,
    decompose_contributions,
    init_params,
    load_params,
    predict,
    save_params,
)
from .synth import SynthConfig, generate_synthetic
from .training import TrainConfig, epoch_scaling_probe, grid_search, train
from .evaluation import (
    ablation_suite,
    evaluate,
    evaluate_partitioned,
    importance_report,
    mae,
    pta,
    score_dataset,
)
