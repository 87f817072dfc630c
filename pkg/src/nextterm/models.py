"""Model variants, parameter tables, and prediction formulas.

Seven variants share one parameter container:

  mf      p_s . q_c
  mf-b    p_s . q_c + b_s + b_c
  mf-d    p_s . q_c + group-keyed student/course biases
  ack     avg time-decayed knowledge(p_ck) . q_c
  ack-b   ack + b_s + b_c
  ale     (p_ck + p_al) . (q_c + q_in) + p_g . q_c
  ale-b   ale + b_s + b_c

where p_ck is the time-decayed, grade-weighted sum of the provided-knowledge
vectors of every course in the student's history, p_al is a shared factor for
the student's academic level (terms since start, clamped to 0..12), q_in is
the offering instructor's factor, and p_g a term-agnostic per-student factor.
The three ale effects can be disabled independently for ablation runs.
"""

from dataclasses import dataclass, replace
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np

from .errors import ConfigError
from .seeding import substream

VARIANTS = ("mf", "mf-b", "mf-d", "ack", "ack-b", "ale", "ale-b")
STUDENT_GROUPS = ("none", "major", "academic_level")
COURSE_GROUPS = ("none", "subject", "course_level")
CK_NORMALIZATIONS = ("count", "none")

MAX_LEVEL = 12
N_LEVELS = MAX_LEVEL + 1
COURSE_LEVEL_LABELS = ("100", "200", "300", "400")


@dataclass(frozen=True)
class ModelSpec:
    """Which variant to run, plus ablation switches and grouping keys."""

    variant: str = "ale"
    use_academic_level: bool = True
    use_instructor: bool = True
    use_global: bool = True
    student_group: str = "none"
    course_group: str = "none"
    ck_normalization: str = "count"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}")
        if self.student_group not in STUDENT_GROUPS:
            raise ConfigError(f"unknown student group {self.student_group!r}")
        if self.course_group not in COURSE_GROUPS:
            raise ConfigError(f"unknown course group {self.course_group!r}")
        if self.ck_normalization not in CK_NORMALIZATIONS:
            raise ConfigError(
                f"unknown ck normalization {self.ck_normalization!r}"
            )

    @property
    def mf_family(self):
        return self.variant in ("mf", "mf-b", "mf-d")

    @property
    def ck_family(self):
        return self.variant in ("ack", "ack-b", "ale", "ale-b")

    @property
    def ale_family(self):
        return self.variant in ("ale", "ale-b")

    @property
    def has_bias(self):
        return self.variant in ("mf-b", "ack-b", "ale-b")

    @property
    def has_group_bias(self):
        return self.variant == "mf-d"

    @property
    def normalize_ck(self):
        return self.ck_normalization == "count"


@dataclass(frozen=True)
class HyperParams:
    """Grid-search axes: latent dimension, regularizers, decay, step size."""

    k: int = 5
    decay: float = 0.01
    gamma: float = 0.001
    alpha1: float = 0.01
    alpha2: float = 0.1
    eta: float = 0.01
    max_iter: int = 200

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if min(self.decay, self.gamma, self.alpha1, self.alpha2) < 0:
            raise ConfigError("regularization and decay weights must be >= 0")
        if self.eta < 0:
            raise ConfigError(f"learning rate must be >= 0, got {self.eta}")
        if self.max_iter < 1:
            raise ConfigError(f"max_iter must be >= 1, got {self.max_iter}")


@dataclass
class ModelParams:
    """Every factor/bias table one trained model can own.

    Only the tables the chosen variant needs are allocated; the rest stay
    None.
    Entity id tuples pin the dense row indexing so a snapshot can score any
    CSV later, and ``decay``/``global_mean`` make scoring self-contained.
    """

    spec: ModelSpec
    k: int
    seed: int = 0
    decay: float = 0.0
    global_mean: float = 0.0

    student_factors: Optional[np.ndarray] = None
    course_required: Optional[np.ndarray] = None
    course_provided: Optional[np.ndarray] = None
    level_factors: Optional[np.ndarray] = None
    instructor_factors: Optional[np.ndarray] = None
    global_factors: Optional[np.ndarray] = None
    student_bias: Optional[np.ndarray] = None
    course_bias: Optional[np.ndarray] = None
    student_group_bias: Optional[np.ndarray] = None
    course_group_bias: Optional[np.ndarray] = None

    students: tuple = ()
    courses: tuple = ()
    instructors: tuple = ()
    student_groups: tuple = ("all",)
    course_groups: tuple = ("all",)

    def arrays(self):
        """(name, array) pairs for every allocated table."""
        for name in PARAM_FAMILIES:
            arr = getattr(self, name)
            if arr is not None:
                yield name, arr

    def all_finite(self):
        return all(np.isfinite(arr).all() for _, arr in self.arrays())

    def copy(self):
        clone = replace(self)
        for name, arr in self.arrays():
            setattr(clone, name, arr.copy())
        return clone


PARAM_FAMILIES = (
    "student_factors",
    "course_required",
    "course_provided",
    "level_factors",
    "instructor_factors",
    "global_factors",
    "student_bias",
    "course_bias",
    "student_group_bias",
    "course_group_bias",
)


def init_params(
    spec,
    k,
    seed,
    *,
    n_students,
    n_courses,
    n_instructors=0,
    n_student_groups=1,
    n_course_groups=1,
):
    """Allocate the tables ``spec`` needs; factors uniform on (0,1), biases 0."""
    if min(n_students, n_courses) < 1:
        raise ConfigError("entity counts must be positive")
    rng = substream(seed, "init")
    params = ModelParams(spec=spec, k=k, seed=seed)
    params.course_required = rng.random((n_courses, k))
    if spec.mf_family:
        params.student_factors = rng.random((n_students, k))
    if spec.ck_family:
        params.course_provided = rng.random((n_courses, k))
    if spec.ale_family:
        if spec.use_academic_level:
            params.level_factors = rng.random((N_LEVELS, k))
        if spec.use_instructor:
            params.instructor_factors = rng.random((max(n_instructors, 1), k))
        if spec.use_global:
            params.global_factors = rng.random((n_students, k))
    if spec.has_bias:
        params.student_bias = np.zeros(n_students)
        params.course_bias = np.zeros(n_courses)
    if spec.has_group_bias:
        params.student_group_bias = np.zeros((n_students, n_course_groups))
        params.course_group_bias = np.zeros((n_courses, n_student_groups))
    return params


def group_labels(spec, dataset):
    """Group label tuples (student side, course side) for an mf-d run."""
    if spec.student_group == "major":
        sgroups = dataset.major_ids
    elif spec.student_group == "academic_level":
        sgroups = tuple(str(i) for i in range(N_LEVELS))
    else:
        sgroups = ("all",)
    if spec.course_group == "subject":
        cgroups = dataset.subject_ids
    elif spec.course_group == "course_level":
        cgroups = COURSE_LEVEL_LABELS
    else:
        cgroups = ("all",)
    return sgroups, cgroups


def academic_level(term, start_term):
    """Terms since the student started, clamped to the 0..12 table."""
    return min(max(term - start_term, 0), MAX_LEVEL)


def cumulative_knowledge(course_provided, history, term, decay, normalize):
    """Time-decayed, grade-weighted sum of provided-knowledge vectors.

    ``history`` holds (course_index, numeric_grade, term) triples strictly
    before ``term``; with ``normalize`` the sum is divided by the history
    length. Empty history yields the zero vector.
    """
    k = course_provided.shape[1]
    acc = np.zeros(k)
    for c_idx, g, t_prev in history:
        if t_prev >= term:
            raise ValueError(
                f"history term {t_prev} is not before target term {term}"
            )
        if c_idx < 0:
            continue
        acc += np.exp(-decay * (term - t_prev)) * course_provided[c_idx] * g
    if normalize and len(history) > 0:
        acc /= len(history)
    return acc


class Contributions(NamedTuple):
    """Additive pieces of one ale-family prediction."""

    ck: float
    al: float
    g: float
    bias: float

    def total(self):
        return self.ck + self.al + self.g + self.bias


def _course_vectors(params, course, instructor):
    spec = params.spec
    q = params.course_required[course]
    if spec.ale_family and spec.use_instructor and instructor is not None:
        q_sum = q + params.instructor_factors[instructor]
    else:
        q_sum = q
    return q, q_sum


def predict(
    params,
    student,
    course,
    term,
    *,
    instructor=None,
    start_term=0,
    history=(),
    student_group=None,
    course_group=None,
):
    """Unclamped numeric grade for one (student, course, term).

    Entity arguments are dense row indices; None marks an entity unseen at
    training time. Unknown students/courses fall back to the training mean
    grade; an unknown instructor just drops the instructor factor.
    """
    spec = params.spec
    if student is None or course is None:
        return params.global_mean

    if spec.mf_family:
        pred = float(params.student_factors[student] @ params.course_required[course])
        if spec.has_bias:
            pred += params.student_bias[student] + params.course_bias[course]
        if spec.has_group_bias:
            if course_group is not None:
                pred += params.student_group_bias[student, course_group]
            if student_group is not None:
                pred += params.course_group_bias[course, student_group]
        return pred

    p_ck = cumulative_knowledge(
        params.course_provided, history, term, params.decay, spec.normalize_ck
    )
    q, q_sum = _course_vectors(params, course, instructor)
    if spec.ale_family:
        p = p_ck
        if spec.use_academic_level:
            p = p + params.level_factors[academic_level(term, start_term)]
        pred = float(p @ q_sum)
        if spec.use_global:
            pred += float(params.global_factors[student] @ q)
    else:
        pred = float(p_ck @ q)
    if spec.has_bias:
        pred += params.student_bias[student] + params.course_bias[course]
    return pred


def decompose_contributions(
    params,
    student,
    course,
    term,
    *,
    instructor=None,
    start_term=0,
    history=(),
):
    """Split an ale-family prediction into its additive effects.

    Returns (knowledge, academic-level, global, bias) scalars whose sum is
    exactly the prediction.
    """
    spec = params.spec
    if not spec.ale_family:
        raise ValueError(f"contribution decomposition needs an ale-family model, got {spec.variant}")
    p_ck = cumulative_knowledge(
        params.course_provided, history, term, params.decay, spec.normalize_ck
    )
    q, q_sum = _course_vectors(params, course, instructor)
    c_ck = float(p_ck @ q_sum)
    c_al = 0.0
    if spec.use_academic_level:
        c_al = float(params.level_factors[academic_level(term, start_term)] @ q_sum)
    c_g = 0.0
    if spec.use_global:
        c_g = float(params.global_factors[student] @ q)
    c_bias = 0.0
    if spec.has_bias:
        c_bias = float(params.student_bias[student] + params.course_bias[course])
    return Contributions(c_ck, c_al, c_g, c_bias)


# --- flat-text snapshot ----------------------------------------------------

_MAGIC = "nextterm-params 1"
_BOOL_KEYS = ("use_academic_level", "use_instructor", "use_global")
_ID_FAMILIES = {
    "student_id": "students",
    "course_id": "courses",
    "instructor_id": "instructors",
    "student_group_id": "student_groups",
    "course_group_id": "course_groups",
}


def save_params(params, path):
    """Write a snapshot: header lines, id tables, one line per table row."""
    spec = params.spec
    lines = [_MAGIC]
    lines.append(f"variant {spec.variant}")
    for key in _BOOL_KEYS:
        lines.append(f"{key} {int(getattr(spec, key))}")
    lines.append(f"student_group {spec.student_group}")
    lines.append(f"course_group {spec.course_group}")
    lines.append(f"ck_normalization {spec.ck_normalization}")
    lines.append(f"k {params.k}")
    lines.append(f"seed {params.seed}")
    lines.append(f"decay {params.decay!r}")
    lines.append(f"global_mean {params.global_mean!r}")
    shapes = {
        name: " ".join(str(d) for d in arr.shape) for name, arr in params.arrays()
    }
    for name, shape in shapes.items():
        lines.append(f"shape {name} {shape}")
    for family, attr in _ID_FAMILIES.items():
        for i, raw in enumerate(getattr(params, attr)):
            lines.append(f"{family} {i} {raw}")
    for name, arr in params.arrays():
        rows = arr if arr.ndim == 2 else arr[:, None]
        for i in range(rows.shape[0]):
            vals = " ".join(repr(float(v)) for v in rows[i])
            lines.append(f"{name} {i} {vals}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_params(path):
    """Inverse of save_params; bit-exact for every float."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines or lines[0] != _MAGIC:
        raise ConfigError(f"not a parameter snapshot: {path}")
    try:
        return _parse_snapshot(lines)
    except (KeyError, ValueError, IndexError) as exc:
        raise ConfigError(f"malformed parameter snapshot {path}: {exc}") from exc


def _parse_snapshot(lines):
    header = {}
    shapes = {}
    ids = {attr: [] for attr in _ID_FAMILIES.values()}
    rows = {}
    for line in lines[1:]:
        if not line:
            continue
        token, rest = line.split(" ", 1)
        if token == "shape":
            name, dims = rest.split(" ", 1)
            shapes[name] = tuple(int(d) for d in dims.split())
        elif token in _ID_FAMILIES:
            idx_s, raw = rest.split(" ", 1)
            ids[_ID_FAMILIES[token]].append((int(idx_s), raw))
        elif token in PARAM_FAMILIES:
            parts = rest.split()
            rows.setdefault(token, []).append(
                (int(parts[0]), [float(v) for v in parts[1:]])
            )
        else:
            header[token] = rest

    spec = ModelSpec(
        variant=header["variant"],
        use_academic_level=bool(int(header["use_academic_level"])),
        use_instructor=bool(int(header["use_instructor"])),
        use_global=bool(int(header["use_global"])),
        student_group=header["student_group"],
        course_group=header["course_group"],
        ck_normalization=header["ck_normalization"],
    )
    params = ModelParams(
        spec=spec,
        k=int(header["k"]),
        seed=int(header["seed"]),
        decay=float(header["decay"]),
        global_mean=float(header["global_mean"]),
    )
    for attr, entries in ids.items():
        entries.sort()
        setattr(params, attr, tuple(raw for _, raw in entries))
    if not params.student_groups:
        params.student_groups = ("all",)
    if not params.course_groups:
        params.course_groups = ("all",)
    for name, shape in shapes.items():
        arr = np.zeros(shape)
        for idx, vals in rows.get(name, []):
            if arr.ndim == 2:
                arr[idx, :] = vals
            else:
                arr[idx] = vals[0]
        setattr(params, name, arr)
    return params
