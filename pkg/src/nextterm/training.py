"""Per-record SGD training, validation-driven grid search, scaling probe.

One epoch walks every training record: compute the time-decayed knowledge
vector from the student's prior records, form the prediction error once, then
update the touched parameter rows in a fixed line order (provided-knowledge
rows, academic-level factor, course factor, instructor factor, global factor,
biases), each later update seeing the earlier ones. MF-family variants update
both factors simultaneously from pre-update values. L2 pulls apply to every
updated row; L1 subgradient terms apply to the academic-level, instructor,
and global factors only.

The sweep and the trainer-internal prediction pass are JIT-compiled with
numba when available; without it the same functions run as plain Python.
"""

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from time import perf_counter

import numpy as np

from . import data as data_mod
from .errors import ConfigError, ProtocolError, TrainingDivergedError
from .models import (
    HyperParams,
    academic_level,
    cumulative_knowledge,
    group_labels,
    init_params,
    predict,
)
from .seeding import substream

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def deco(fn):
            return fn

        return deco


L1_MODES = ("sign_aware", "paper_literal")
STOP_METRICS = ("train_mae", "validation_mae")

_VARIANT_CODE = {
    "mf": 0,
    "mf-b": 1,
    "mf-d": 2,
    "ack": 3,
    "ack-b": 4,
    "ale": 5,
    "ale-b": 6,
}


@dataclass(frozen=True)
class TrainConfig:
    hyper: HyperParams = field(default_factory=HyperParams)
    l1_mode: str = "sign_aware"
    shuffle: bool = True
    seed: int = 0
    stop_metric: str = "train_mae"

    def __post_init__(self):
        if self.l1_mode not in L1_MODES:
            raise ConfigError(f"unknown l1 mode {self.l1_mode!r}")
        if self.stop_metric not in STOP_METRICS:
            raise ConfigError(f"unknown stop metric {self.stop_metric!r}")


@dataclass
class TrainReport:
    epochs_run: int
    loss: list
    train_mae: list
    val_mae: list
    epoch_seconds: list
    params: object

    def to_dict(self):
        return {
            "epochs_run": self.epochs_run,
            "loss": list(self.loss),
            "train_mae": list(self.train_mae),
            "val_mae": list(self.val_mae),
        }


@dataclass
class RecordArrays:
    """Flat per-record arrays plus CSR-packed histories for the kernels."""

    s_idx: np.ndarray
    c_idx: np.ndarray
    i_idx: np.ndarray
    al_idx: np.ndarray
    sg_idx: np.ndarray
    cg_idx: np.ndarray
    grade: np.ndarray
    hist_ptr: np.ndarray
    hist_course: np.ndarray
    hist_grade: np.ndarray
    hist_dt: np.ndarray

    def __len__(self):
        return self.s_idx.shape[0]


def build_arrays(source, params, history_source=None):
    """Pack a dataset's records (indexed against ``params``) for the kernels.

    Histories come from ``history_source`` (default: the records' own
    dataset): for every record, all of that student's earlier records there.
    Entities unknown to ``params`` get index -1 (cold start).
    """
    spec = params.spec
    hist_src = source if history_source is None else history_source
    smap = {x: i for i, x in enumerate(params.students)}
    cmap = {x: i for i, x in enumerate(params.courses)}
    imap = {x: i for i, x in enumerate(params.instructors)}
    sgmap = {x: i for i, x in enumerate(params.student_groups)}
    cgmap = {x: i for i, x in enumerate(params.course_groups)}

    n = len(source.records)
    s_idx = np.empty(n, np.int64)
    c_idx = np.empty(n, np.int64)
    i_idx = np.empty(n, np.int64)
    al_idx = np.empty(n, np.int64)
    sg_idx = np.zeros(n, np.int64)
    cg_idx = np.zeros(n, np.int64)
    grade = np.empty(n, np.float64)
    hist_ptr = np.zeros(n + 1, np.int64)
    hist_course = []
    hist_grade = []
    hist_dt = []

    # Per-student chronological entries in the history source, walked with a
    # pointer as the term-sorted records stream by.
    entries = {}
    cursor = {}
    for r_i, rec in enumerate(source.records):
        sid = rec.student_id
        if sid not in entries:
            hist = hist_src._history.get(sid, ()) if sid in hist_src.students else ()
            entries[sid] = [
                (cmap.get(h.course_id, -1), h.numeric, h.term) for h in hist
            ]
            cursor[sid] = 0
        ent = entries[sid]
        p = cursor[sid]
        while p < len(ent) and ent[p][2] < rec.term:
            p += 1
        cursor[sid] = p

        s_idx[r_i] = smap.get(sid, -1)
        c_idx[r_i] = cmap.get(rec.course_id, -1)
        i_idx[r_i] = imap.get(rec.instructor_id, -1)
        prof = source.students[sid]
        al = academic_level(rec.term, prof.start_term)
        al_idx[r_i] = al
        if spec.has_group_bias:
            if spec.student_group == "major":
                sg_idx[r_i] = sgmap.get(prof.major, -1)
            elif spec.student_group == "academic_level":
                sg_idx[r_i] = al
            if spec.course_group == "subject":
                cg_idx[r_i] = cgmap.get(source.courses[rec.course_id].subject, -1)
            elif spec.course_group == "course_level":
                cg_idx[r_i] = source.courses[rec.course_id].level // 100 - 1
        grade[r_i] = rec.numeric
        for cj, g, t_prev in ent[:p]:
            hist_course.append(cj)
            hist_grade.append(g)
            hist_dt.append(float(rec.term - t_prev))
        hist_ptr[r_i + 1] = len(hist_course)

    return RecordArrays(
        s_idx,
        c_idx,
        i_idx,
        al_idx,
        sg_idx,
        cg_idx,
        grade,
        hist_ptr,
        np.asarray(hist_course, np.int64),
        np.asarray(hist_grade, np.float64),
        np.asarray(hist_dt, np.float64),
    )


def _kernel_tables(params):
    k = params.k

    def t2(a):
        return a if a is not None else np.zeros((0, k))

    def t1(a):
        return a if a is not None else np.zeros(0)

    def tg(a):
        return a if a is not None else np.zeros((0, 1))

    return (
        t2(params.student_factors),
        params.course_required,
        t2(params.course_provided),
        t2(params.level_factors),
        t2(params.instructor_factors),
        t2(params.global_factors),
        t1(params.student_bias),
        t1(params.course_bias),
        tg(params.student_group_bias),
        tg(params.course_group_bias),
    )


def _spec_flags(spec):
    return (
        _VARIANT_CODE[spec.variant],
        1 if (spec.ale_family and spec.use_academic_level) else 0,
        1 if (spec.ale_family and spec.use_instructor) else 0,
        1 if (spec.ale_family and spec.use_global) else 0,
        1 if spec.normalize_ck else 0,
    )


@njit(cache=True)
def _sweep_kernel(
    order,
    s_idx,
    c_idx,
    i_idx,
    al_idx,
    sg_idx,
    cg_idx,
    grade,
    hist_ptr,
    hist_course,
    hist_grade,
    hist_dt,
    P,
    Q,
    K,
    P_al,
    Q_in,
    P_g,
    b_s,
    b_c,
    B_sg,
    B_cg,
    variant,
    use_al,
    use_in,
    use_g,
    normalize_ck,
    l1_sign,
    decay,
    gamma,
    alpha1,
    alpha2,
    eta,
):
    k = Q.shape[1]
    for oi in range(order.shape[0]):
        r = order[oi]
        s = s_idx[r]
        c = c_idx[r]
        if s < 0 or c < 0:
            continue
        g = grade[r]

        if variant <= 2:
            pred = 0.0
            for d in range(k):
                pred += P[s, d] * Q[c, d]
            if variant == 1:
                pred += b_s[s] + b_c[c]
            if variant == 2:
                if cg_idx[r] >= 0:
                    pred += B_sg[s, cg_idx[r]]
                if sg_idx[r] >= 0:
                    pred += B_cg[c, sg_idx[r]]
            e = g - pred
            if not np.isfinite(e):
                return r
            for d in range(k):
                ps = P[s, d]
                qc = Q[c, d]
                P[s, d] = ps + eta * (qc * e - gamma * ps)
                Q[c, d] = qc + eta * (ps * e - gamma * qc)
            if variant == 1:
                b_s[s] += eta * (e - gamma * b_s[s])
                b_c[c] += eta * (e - gamma * b_c[c])
            if variant == 2:
                if cg_idx[r] >= 0:
                    B_sg[s, cg_idx[r]] += eta * (e - gamma * B_sg[s, cg_idx[r]])
                if sg_idx[r] >= 0:
                    B_cg[c, sg_idx[r]] += eta * (e - gamma * B_cg[c, sg_idx[r]])
            continue

        h0 = hist_ptr[r]
        h1 = hist_ptr[r + 1]
        inv_h = 1.0
        if normalize_ck == 1 and h1 > h0:
            inv_h = 1.0 / (h1 - h0)
        p_ck = np.zeros(k)
        for h in range(h0, h1):
            cj = hist_course[h]
            if cj < 0:
                continue
            w = np.exp(-decay * hist_dt[h]) * hist_grade[h] * inv_h
            for d in range(k):
                p_ck[d] += w * K[cj, d]

        ale = variant >= 5
        i = i_idx[r]
        has_in = ale and use_in == 1 and i >= 0
        al = al_idx[r]

        pred = 0.0
        if ale:
            for d in range(k):
                p = p_ck[d]
                if use_al == 1:
                    p += P_al[al, d]
                q = Q[c, d]
                if has_in:
                    q += Q_in[i, d]
                pred += p * q
            if use_g == 1:
                for d in range(k):
                    pred += P_g[s, d] * Q[c, d]
        else:
            for d in range(k):
                pred += p_ck[d] * Q[c, d]
        if variant == 4 or variant == 6:
            pred += b_s[s] + b_c[c]
        e = g - pred
        if not np.isfinite(e):
            return r

        # Provided-knowledge rows, one sequential step per history entry.
        for h in range(h0, h1):
            cj = hist_course[h]
            if cj < 0:
                continue
            w = np.exp(-decay * hist_dt[h]) * hist_grade[h] * inv_h
            for d in range(k):
                q = Q[c, d]
                if has_in:
                    q += Q_in[i, d]
                K[cj, d] += eta * (q * w * e - gamma * K[cj, d])
        if ale and use_al == 1:
            for d in range(k):
                q = Q[c, d]
                if has_in:
                    q += Q_in[i, d]
                l1 = alpha1
                if l1_sign == 1:
                    l1 = alpha1 * np.sign(P_al[al, d])
                P_al[al, d] += eta * (q * e - gamma * P_al[al, d] - l1)
        for d in range(k):
            grad = p_ck[d]
            if ale and use_al == 1:
                grad += P_al[al, d]
            if ale and use_g == 1:
                grad += P_g[s, d]
            Q[c, d] += eta * (grad * e - gamma * Q[c, d])
        if has_in:
            for d in range(k):
                grad = p_ck[d]
                if use_al == 1:
                    grad += P_al[al, d]
                l1 = alpha1
                if l1_sign == 1:
                    l1 = alpha1 * np.sign(Q_in[i, d])
                Q_in[i, d] += eta * (grad * e - gamma * Q_in[i, d] - l1)
        if ale and use_g == 1:
            for d in range(k):
                l1 = alpha2
                if l1_sign == 1:
                    l1 = alpha2 * np.sign(P_g[s, d])
                P_g[s, d] += eta * (Q[c, d] * e - gamma * P_g[s, d] - l1)
        if variant == 4 or variant == 6:
            b_s[s] += eta * (e - gamma * b_s[s])
            b_c[c] += eta * (e - gamma * b_c[c])
    return -1


@njit(cache=True)
def _predict_kernel(
    s_idx,
    c_idx,
    i_idx,
    al_idx,
    sg_idx,
    cg_idx,
    hist_ptr,
    hist_course,
    hist_grade,
    hist_dt,
    P,
    Q,
    K,
    P_al,
    Q_in,
    P_g,
    b_s,
    b_c,
    B_sg,
    B_cg,
    variant,
    use_al,
    use_in,
    use_g,
    normalize_ck,
    decay,
    global_mean,
):
    n = s_idx.shape[0]
    k = Q.shape[1]
    out = np.empty(n)
    for r in range(n):
        s = s_idx[r]
        c = c_idx[r]
        if s < 0 or c < 0:
            out[r] = global_mean
            continue
        if variant <= 2:
            pred = 0.0
            for d in range(k):
                pred += P[s, d] * Q[c, d]
            if variant == 1:
                pred += b_s[s] + b_c[c]
            if variant == 2:
                if cg_idx[r] >= 0:
                    pred += B_sg[s, cg_idx[r]]
                if sg_idx[r] >= 0:
                    pred += B_cg[c, sg_idx[r]]
            out[r] = pred
            continue
        h0 = hist_ptr[r]
        h1 = hist_ptr[r + 1]
        inv_h = 1.0
        if normalize_ck == 1 and h1 > h0:
            inv_h = 1.0 / (h1 - h0)
        p_ck = np.zeros(k)
        for h in range(h0, h1):
            cj = hist_course[h]
            if cj < 0:
                continue
            w = np.exp(-decay * hist_dt[h]) * hist_grade[h] * inv_h
            for d in range(k):
                p_ck[d] += w * K[cj, d]
        ale = variant >= 5
        i = i_idx[r]
        has_in = ale and use_in == 1 and i >= 0
        al = al_idx[r]
        pred = 0.0
        if ale:
            for d in range(k):
                p = p_ck[d]
                if use_al == 1:
                    p += P_al[al, d]
                q = Q[c, d]
                if has_in:
                    q += Q_in[i, d]
                pred += p * q
            if use_g == 1:
                for d in range(k):
                    pred += P_g[s, d] * Q[c, d]
        else:
            for d in range(k):
                pred += p_ck[d] * Q[c, d]
        if variant == 4 or variant == 6:
            pred += b_s[s] + b_c[c]
        out[r] = pred
    return out


def _sweep(arrays, params, hyper, l1_mode, order):
    flags = _spec_flags(params.spec)
    return _sweep_kernel(
        order,
        arrays.s_idx,
        arrays.c_idx,
        arrays.i_idx,
        arrays.al_idx,
        arrays.sg_idx,
        arrays.cg_idx,
        arrays.grade,
        arrays.hist_ptr,
        arrays.hist_course,
        arrays.hist_grade,
        arrays.hist_dt,
        *_kernel_tables(params),
        *flags,
        1 if l1_mode == "sign_aware" else 0,
        hyper.decay,
        hyper.gamma,
        hyper.alpha1,
        hyper.alpha2,
        hyper.eta,
    )


def kernel_predictions(arrays, params):
    """Unclamped predictions for packed records (trainer's internal path)."""
    flags = _spec_flags(params.spec)
    return _predict_kernel(
        arrays.s_idx,
        arrays.c_idx,
        arrays.i_idx,
        arrays.al_idx,
        arrays.sg_idx,
        arrays.cg_idx,
        arrays.hist_ptr,
        arrays.hist_course,
        arrays.hist_grade,
        arrays.hist_dt,
        *_kernel_tables(params),
        *flags,
        params.decay,
        params.global_mean,
    )


def _mae_of(preds, grade):
    return float(np.mean(np.abs(np.clip(preds, 0.0, 4.0) - grade)))


def train(spec, train_data, cfg, validation=None):
    """Fit one model; returns (params, report).

    Runs epochs until the stop metric fails to decrease or ``max_iter`` is
    reached. With ``stop_metric='validation_mae'`` a validation dataset must
    be supplied; its histories are drawn from the training data.
    """
    if not train_data.records:
        raise ProtocolError("cannot train on an empty dataset")
    if cfg.stop_metric == "validation_mae" and validation is None:
        raise ConfigError("validation_mae stopping needs a validation dataset")
    hyper = cfg.hyper

    sgroups, cgroups = group_labels(spec, train_data)
    params = init_params(
        spec,
        hyper.k,
        cfg.seed,
        n_students=len(train_data.student_ids),
        n_courses=len(train_data.course_ids),
        n_instructors=len(train_data.instructor_ids),
        n_student_groups=len(sgroups),
        n_course_groups=len(cgroups),
    )
    params.decay = hyper.decay
    params.global_mean = train_data.mean_grade()
    params.students = train_data.student_ids
    params.courses = train_data.course_ids
    params.instructors = train_data.instructor_ids
    params.student_groups = sgroups
    params.course_groups = cgroups

    arrays = build_arrays(train_data, params)
    val_arrays = None
    if validation is not None:
        val_arrays = build_arrays(validation, params, history_source=train_data)

    shuffle_rng = substream(cfg.seed, "shuffle")
    n = len(arrays)
    losses = []
    train_maes = []
    val_maes = []
    wall = []
    best = np.inf
    epochs_run = 0

    for epoch in range(1, hyper.max_iter + 1):
        t0 = perf_counter()
        if cfg.shuffle:
            order = shuffle_rng.permutation(n)
        else:
            order = np.arange(n)
        bad = _sweep(arrays, params, hyper, cfg.l1_mode, order.astype(np.int64))
        if bad >= 0:
            raise TrainingDivergedError(epoch, int(bad))
        preds = kernel_predictions(arrays, params)
        if not np.isfinite(preds).all():
            raise TrainingDivergedError(epoch, int(np.flatnonzero(~np.isfinite(preds))[0]))
        losses.append(float(np.mean((arrays.grade - preds) ** 2)))
        train_maes.append(_mae_of(preds, arrays.grade))
        if val_arrays is not None:
            val_maes.append(
                _mae_of(kernel_predictions(val_arrays, params), val_arrays.grade)
            )
        wall.append(perf_counter() - t0)
        epochs_run = epoch

        metric = train_maes[-1] if cfg.stop_metric == "train_mae" else val_maes[-1]
        if metric >= best:
            break
        best = metric

    _fill_unseen_levels(params, arrays)
    report = TrainReport(epochs_run, losses, train_maes, val_maes, wall, params)
    return params, report


def _fill_unseen_levels(params, arrays):
    """Copy each untrained academic-level row from its nearest trained level.

    The test term's top level is always one past anything in the training
    data, so its row would otherwise keep pure initialization noise. Levels
    are ordinal; the nearest trained level is the best available stand-in.
    """
    if params.level_factors is None:
        return
    n_levels = params.level_factors.shape[0]
    seen = np.unique(arrays.al_idx)
    for lvl in range(n_levels):
        if lvl not in seen:
            nearest = seen[np.argmin(np.abs(seen - lvl))]
            params.level_factors[lvl] = params.level_factors[nearest]


def smooth_step_directions(
    params,
    gamma,
    grade,
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
    """Per-row step directions for the smooth objective at one record.

    Returns {(family, row): vector} equal to the negative gradient of
    0.5*err^2 + (gamma/2)*||row||^2 per touched row, all evaluated at the
    current parameter values. L1 subgradient terms are excluded. Duplicate
    history courses sum their error terms into one row (the sweep itself
    steps such rows once per attempt, per the literal update loop).
    """
    spec = params.spec
    pred = predict(
        params,
        student,
        course,
        term,
        instructor=instructor,
        start_term=start_term,
        history=history,
        student_group=student_group,
        course_group=course_group,
    )
    e = grade - pred
    out = {}

    if spec.mf_family:
        p_s = params.student_factors[student]
        q_c = params.course_required[course]
        out[("student_factors", student)] = e * q_c - gamma * p_s
        out[("course_required", course)] = e * p_s - gamma * q_c
        if spec.has_bias:
            out[("student_bias", student)] = np.array(
                [e - gamma * params.student_bias[student]]
            )
            out[("course_bias", course)] = np.array(
                [e - gamma * params.course_bias[course]]
            )
        if spec.has_group_bias:
            if course_group is not None:
                out[("student_group_bias", (student, course_group))] = np.array(
                    [e - gamma * params.student_group_bias[student, course_group]]
                )
            if student_group is not None:
                out[("course_group_bias", (course, student_group))] = np.array(
                    [e - gamma * params.course_group_bias[course, student_group]]
                )
        return out

    p_ck = cumulative_knowledge(
        params.course_provided, history, term, params.decay, spec.normalize_ck
    )
    q_c = params.course_required[course]
    use_in = spec.ale_family and spec.use_instructor and instructor is not None
    q_sum = q_c + (params.instructor_factors[instructor] if use_in else 0.0)
    al = academic_level(term, start_term)
    p_al = (
        params.level_factors[al]
        if spec.ale_family and spec.use_academic_level
        else np.zeros(params.k)
    )

    inv_h = 1.0 / len(history) if (spec.normalize_ck and history) else 1.0
    weights = {}
    for c_idx, g, t_prev in history:
        if c_idx < 0:
            continue
        w = np.exp(-params.decay * (term - t_prev)) * g * inv_h
        weights[c_idx] = weights.get(c_idx, 0.0) + w
    for c_idx, w in weights.items():
        out[("course_provided", c_idx)] = (
            e * w * q_sum - gamma * params.course_provided[c_idx]
        )

    if spec.ale_family:
        if spec.use_academic_level:
            out[("level_factors", al)] = e * q_sum - gamma * params.level_factors[al]
        q_grad = p_ck + p_al
        if spec.use_global:
            q_grad = q_grad + params.global_factors[student]
        out[("course_required", course)] = e * q_grad - gamma * q_c
        if use_in:
            out[("instructor_factors", instructor)] = (
                e * (p_ck + p_al) - gamma * params.instructor_factors[instructor]
            )
        if spec.use_global:
            out[("global_factors", student)] = (
                e * q_c - gamma * params.global_factors[student]
            )
    else:
        out[("course_required", course)] = e * p_ck - gamma * q_c
    if spec.has_bias:
        out[("student_bias", student)] = np.array(
            [e - gamma * params.student_bias[student]]
        )
        out[("course_bias", course)] = np.array(
            [e - gamma * params.course_bias[course]]
        )
    return out


@dataclass
class GridPoint:
    values: dict
    hyper: HyperParams
    val_mae: float


@dataclass
class GridSearchResult:
    best: HyperParams
    table: list
    params: object
    report: TrainReport


def _search_point(args):
    spec, inner_train, val, cfg, values = args
    from .evaluation import evaluate

    hyper = replace(cfg.hyper, **values)
    point_cfg = replace(cfg, hyper=hyper)
    params, _ = train(spec, inner_train, point_cfg)
    report = evaluate(params, val, inner_train)
    return GridPoint(values, hyper, report.mae)


def grid_search(spec, train_data, test_term, grids, cfg, jobs=1):
    """Try every grid point on the validation term, then retrain the winner.

    ``grids`` maps hyperparameter field names to value lists; points are
    enumerated in the given key order and ties keep the earliest point.
    The winning settings are retrained on the full training data.
    """
    if not grids or any(len(v) == 0 for v in grids.values()):
        raise ConfigError("grid must list at least one value per parameter")
    unknown = set(grids) - set(HyperParams.__dataclass_fields__)
    if unknown:
        raise ConfigError(f"unknown grid parameter(s) {sorted(unknown)}")

    inner_train, val = validation_split_checked(train_data, test_term)
    keys = list(grids)
    points = [
        dict(zip(keys, combo))
        for combo in itertools.product(*(grids[k] for k in keys))
    ]
    tasks = [(spec, inner_train, val, cfg, values) for values in points]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            table = list(pool.map(_search_point, tasks))
    else:
        table = [_search_point(t) for t in tasks]

    best_point = min(table, key=lambda p: p.val_mae)
    final_cfg = replace(cfg, hyper=best_point.hyper)
    params, report = train(spec, train_data, final_cfg)
    return GridSearchResult(best_point.hyper, table, params, report)


def validation_split_checked(train_data, test_term):
    inner_train, val = data_mod.validation_split(train_data, test_term)
    if not inner_train.records:
        raise ProtocolError(
            f"no records before term {test_term - 1} to train on"
        )
    return inner_train, val


@dataclass
class ProbeResult:
    n_students: int
    n_records: int
    seconds_per_epoch: float


def epoch_scaling_probe(spec, student_counts, hyper=None, base_cfg=None, seed=0, repeats=3):
    """Average per-epoch sweep time across synthetic datasets of given sizes.

    Doubling the student count doubles the record count while the per-student
    course load (and so the history length distribution) stays fixed, which
    is the regime where per-epoch cost should scale linearly.
    """
    from .synth import SynthConfig, generate_synthetic

    hyper = hyper or HyperParams(k=3, decay=0.1, eta=0.01)
    results = []
    for n_students in student_counts:
        cfg = replace(base_cfg or SynthConfig(), n_students=n_students)
        ds, _ = generate_synthetic(cfg, seed)
        tcfg = TrainConfig(hyper=hyper, seed=seed)
        sgroups, cgroups = group_labels(spec, ds)
        params = init_params(
            spec,
            hyper.k,
            seed,
            n_students=len(ds.student_ids),
            n_courses=len(ds.course_ids),
            n_instructors=len(ds.instructor_ids),
            n_student_groups=len(sgroups),
            n_course_groups=len(cgroups),
        )
        params.decay = hyper.decay
        params.students = ds.student_ids
        params.courses = ds.course_ids
        params.instructors = ds.instructor_ids
        arrays = build_arrays(ds, params)
        order = np.arange(len(arrays), dtype=np.int64)
        for _ in range(2):  # JIT + cache warmup, not timed
            _sweep(arrays, params, hyper, tcfg.l1_mode, order)
        times = []
        for _ in range(repeats):
            t0 = perf_counter()
            _sweep(arrays, params, hyper, tcfg.l1_mode, order)
            times.append(perf_counter() - t0)
        results.append(
            ProbeResult(n_students, len(arrays), float(np.median(times)))
        )
    return results
