"""Scoring, MAE/tick-accuracy metrics, ablation sweeps, effect importance.

Test records are scored with histories drawn from the training data, numeric
predictions are clamped to [0,4], and the clamped value is snapped to its
nearest letter. MAE uses the clamped numbers; tick accuracy (the fraction of
predictions whose letter lands within 0, 1, or 2 ladder steps of the truth)
uses the snapped letters.
"""

import csv
from dataclasses import dataclass
from typing import Optional

from . import grades
from .data import student_history
from .errors import ProtocolError
from .models import (
    ModelSpec,
    academic_level,
    decompose_contributions,
    predict,
)
from .training import TrainConfig, train

PARTITIONS = ("cohort", "start-term", "major", "all")
ALL_LABEL = "ALL"

# Ablated ale variants, in reporting order.
ABLATIONS = (
    ("ale", {}),
    ("ale-noal", {"use_academic_level": False}),
    ("ale-noin", {"use_instructor": False}),
    ("ale-nog", {"use_global": False}),
)


@dataclass(frozen=True)
class PredictionRow:
    student_id: str
    course_id: str
    term: int
    true_grade: str
    pred_numeric: float
    pred_grade: str


@dataclass(frozen=True)
class MetricsReport:
    mae: float
    pta0: float
    pta1: float
    pta2: float
    n: int
    partition: Optional[str] = None

    def to_dict(self):
        return {
            "mae": self.mae,
            "pta0": self.pta0,
            "pta1": self.pta1,
            "pta2": self.pta2,
            "n": self.n,
        }


@dataclass(frozen=True)
class ImportanceReport:
    i_ck: float
    i_al: float
    i_g: float
    n_used: int
    n_excluded: int
    partition: Optional[str] = None

    def to_dict(self):
        return {
            "i_ck": self.i_ck,
            "i_al": self.i_al,
            "i_g": self.i_g,
            "n_used": self.n_used,
            "n_excluded": self.n_excluded,
        }


def _index_maps(params):
    return (
        {x: i for i, x in enumerate(params.students)},
        {x: i for i, x in enumerate(params.courses)},
        {x: i for i, x in enumerate(params.instructors)},
        {x: i for i, x in enumerate(params.student_groups)},
        {x: i for i, x in enumerate(params.course_groups)},
    )


def _record_inputs(params, rec, dataset, history_source, maps):
    """Resolve one record's dense indices and history against the params."""
    smap, cmap, imap, sgmap, cgmap = maps
    spec = params.spec
    prof = dataset.students[rec.student_id]
    cprof = dataset.courses[rec.course_id]
    if rec.student_id in history_source.students:
        hist_records = student_history(history_source, rec.student_id, rec.term)
    else:
        hist_records = []
    history = [(cmap.get(h.course_id, -1), h.numeric, h.term) for h in hist_records]

    student_group = course_group = None
    if spec.has_group_bias:
        if spec.student_group == "major":
            student_group = sgmap.get(prof.major)
        elif spec.student_group == "academic_level":
            student_group = academic_level(rec.term, prof.start_term)
        else:
            student_group = 0
        if spec.course_group == "subject":
            course_group = cgmap.get(cprof.subject)
        elif spec.course_group == "course_level":
            course_group = cprof.level // 100 - 1
        else:
            course_group = 0
    return dict(
        student=smap.get(rec.student_id),
        course=cmap.get(rec.course_id),
        term=rec.term,
        instructor=imap.get(rec.instructor_id),
        start_term=prof.start_term,
        history=history,
        student_group=student_group,
        course_group=course_group,
    )


def score_dataset(params, dataset, history_source):
    """Predict every record; unseen entities follow the cold-start policy."""
    maps = _index_maps(params)
    rows = []
    for rec in dataset.records:
        inp = _record_inputs(params, rec, dataset, history_source, maps)
        pred = predict(
            params,
            inp["student"],
            inp["course"],
            inp["term"],
            instructor=inp["instructor"],
            start_term=inp["start_term"],
            history=inp["history"],
            student_group=inp["student_group"],
            course_group=inp["course_group"],
        )
        rows.append(
            PredictionRow(
                rec.student_id,
                rec.course_id,
                rec.term,
                rec.grade,
                pred,
                grades.numeric_to_letter(grades.clamp(pred)),
            )
        )
    return rows


def mae(rows):
    """Mean absolute error of clamped numeric predictions."""
    if not rows:
        raise ProtocolError("cannot compute MAE of an empty prediction set")
    total = 0.0
    for r in rows:
        total += abs(grades.clamp(r.pred_numeric) - grades.letter_to_numeric(r.true_grade))
    return total / len(rows)


def pta(rows, ticks):
    """Fraction of predictions within ``ticks`` ladder steps of the truth."""
    if not rows:
        raise ProtocolError("cannot compute tick accuracy of an empty prediction set")
    if ticks not in (0, 1, 2):
        raise ProtocolError(f"tick radius must be 0, 1 or 2, got {ticks}")
    hits = sum(
        1 for r in rows if grades.tick_distance(r.true_grade, r.pred_grade) <= ticks
    )
    return hits / len(rows)


def metrics(rows, partition=None):
    return MetricsReport(
        mae(rows), pta(rows, 0), pta(rows, 1), pta(rows, 2), len(rows), partition
    )


def _check_single_term(test):
    if not test.records:
        raise ProtocolError("empty test dataset")
    terms = {r.term for r in test.records}
    if len(terms) != 1:
        raise ProtocolError(f"test data must cover a single term, got {sorted(terms)}")


def evaluate(params, test, history_source):
    """Score one test term and compute MAE plus tick accuracies."""
    _check_single_term(test)
    return metrics(score_dataset(params, test, history_source))


def partition_label(partition, profile):
    if partition == "cohort":
        return profile.cohort
    if partition == "start-term":
        return f"start={profile.start_term}"
    if partition == "major":
        return profile.major
    return ALL_LABEL


def split_rows(rows, test, partition):
    """Group prediction rows by partition label; ALL comes first."""
    groups = {ALL_LABEL: list(rows)}
    if partition != "all":
        for r in rows:
            label = partition_label(partition, test.students[r.student_id])
            groups.setdefault(label, []).append(r)
    ordered = {ALL_LABEL: groups.pop(ALL_LABEL)}
    for label in sorted(groups):
        ordered[label] = groups[label]
    return ordered


def evaluate_partitioned(params, test, history_source, partition="all"):
    """Per-partition metrics (always including the ALL group)."""
    if partition not in PARTITIONS:
        raise ProtocolError(f"unknown partition {partition!r}")
    _check_single_term(test)
    rows = score_dataset(params, test, history_source)
    return {
        label: metrics(subset, label)
        for label, subset in split_rows(rows, test, partition).items()
    }


@dataclass(frozen=True)
class AblationRow:
    partition: str
    variant: str
    pta0: float
    n: int


def _ablation_worker(args):
    train_data, test, cfg, ck_normalization, switches = args
    spec = ModelSpec(variant="ale", ck_normalization=ck_normalization, **switches)
    params, _ = train(spec, train_data, cfg)
    return score_dataset(params, test, train_data)


def ablation_suite(
    train_data,
    test,
    hyper,
    *,
    seed=0,
    l1_mode="sign_aware",
    shuffle=True,
    ck_normalization="count",
    partition="all",
    jobs=1,
):
    """Train ale and its three single-effect ablations, report per-group PTA0.

    All four runs share the same seed and hyperparameters, so differences
    come from the removed effect alone. With ``jobs`` > 1 the variants train
    in parallel; results do not depend on the worker count.
    """
    if partition not in PARTITIONS:
        raise ProtocolError(f"unknown partition {partition!r}")
    _check_single_term(test)
    cfg = TrainConfig(hyper=hyper, l1_mode=l1_mode, shuffle=shuffle, seed=seed)
    tasks = [
        (train_data, test, cfg, ck_normalization, switches)
        for _, switches in ABLATIONS
    ]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_ablation_worker, tasks))
    else:
        results = [_ablation_worker(t) for t in tasks]
    scored = {name: rows for (name, _), rows in zip(ABLATIONS, results)}

    labels = list(split_rows(scored["ale"], test, partition))
    out = []
    for label in labels:
        for name, _ in ABLATIONS:
            subset = split_rows(scored[name], test, partition)[label]
            out.append(AblationRow(label, name, pta(subset, 0), len(subset)))
    return out


def _importance_fractions(params, test, history_source):
    """Per-record (ck, al, g) contribution fractions with partition labels."""
    if not params.spec.ale_family:
        raise ProtocolError("importance analysis needs an ale-family model")
    _check_single_term(test)
    maps = _index_maps(params)
    fractions = []
    excluded = []
    for rec in test.records:
        inp = _record_inputs(params, rec, test, history_source, maps)
        if inp["student"] is None or inp["course"] is None:
            excluded.append(rec)
            continue
        parts = decompose_contributions(
            params,
            inp["student"],
            inp["course"],
            inp["term"],
            instructor=inp["instructor"],
            start_term=inp["start_term"],
            history=inp["history"],
        )
        pred = parts.total()
        if abs(pred) < 1e-6:
            excluded.append(rec)
            continue
        fractions.append((rec, (parts.ck / pred, parts.al / pred, parts.g / pred)))
    return fractions, excluded


def _summarize_importance(fractions, n_excluded, label):
    if not fractions:
        raise ProtocolError(
            f"all records excluded from importance analysis for {label!r}"
        )
    n = len(fractions)
    return ImportanceReport(
        sum(f[0] for f in fractions) / n,
        sum(f[1] for f in fractions) / n,
        sum(f[2] for f in fractions) / n,
        n,
        n_excluded,
        label,
    )


def importance_report(params, test, history_source):
    """Mean per-record contribution fractions of the three ale effects.

    Each record's prediction splits into knowledge, academic-level, and
    global contributions; fractions are contribution over prediction.
    Records with |prediction| < 1e-6 are excluded and counted.
    """
    fractions, excluded = _importance_fractions(params, test, history_source)
    return _summarize_importance(
        [f for _, f in fractions], len(excluded), ALL_LABEL
    )


def importance_by_partition(params, test, history_source, partition="all"):
    """Importance reports per partition label, ALL group included."""
    if partition not in PARTITIONS:
        raise ProtocolError(f"unknown partition {partition!r}")
    fractions, excluded = _importance_fractions(params, test, history_source)
    out = {
        ALL_LABEL: _summarize_importance(
            [f for _, f in fractions], len(excluded), ALL_LABEL
        )
    }
    if partition == "all":
        return out
    by_label = {}
    excl_by_label = {}
    for rec, f in fractions:
        label = partition_label(partition, test.students[rec.student_id])
        by_label.setdefault(label, []).append(f)
        excl_by_label.setdefault(label, 0)
    for rec in excluded:
        label = partition_label(partition, test.students[rec.student_id])
        excl_by_label[label] = excl_by_label.get(label, 0) + 1
        by_label.setdefault(label, [])
    for label in sorted(by_label):
        out[label] = _summarize_importance(
            by_label[label], excl_by_label.get(label, 0), label
        )
    return out


def export_predictions(rows, path):
    """CSV export with 6-decimal numeric predictions."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["student_id", "course_id", "term", "true_grade", "pred_numeric", "pred_grade"]
        )
        for r in rows:
            writer.writerow(
                [r.student_id, r.course_id, r.term, r.true_grade,
                 f"{r.pred_numeric:.6f}", r.pred_grade]
            )


def load_predictions(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        return [
            PredictionRow(
                row["student_id"],
                row["course_id"],
                int(row["term"]),
                row["true_grade"],
                float(row["pred_numeric"]),
                row["pred_grade"],
            )
            for row in reader
        ]
