import numpy as np
import pytest

from nextterm import grades
from nextterm.data import split_train_test
from nextterm.errors import ProtocolError
from nextterm.evaluation import (
    PredictionRow,
    ablation_suite,
    evaluate,
    evaluate_partitioned,
    export_predictions,
    importance_by_partition,
    importance_report,
    load_predictions,
    mae,
    metrics,
    pta,
    score_dataset,
)
from nextterm.models import HyperParams, ModelSpec

from conftest import make_dataset, random_params


def _row(true_grade, pred_numeric, student="s1", course="c1", term=5):
    return PredictionRow(
        student, course, term, true_grade, pred_numeric,
        grades.numeric_to_letter(grades.clamp(pred_numeric)),
    )


def test_mae_examples():
    perfect = [_row("B", 3.0), _row("A-", 3.67)]
    assert mae(perfect) == 0.0
    rows = [_row("A", 3.5), _row("B", 3.5)]
    assert mae(rows) == pytest.approx(0.5, abs=1e-15)


def test_mae_clamps_before_scoring():
    rows = [_row("A", 6.0)]
    assert mae(rows) == 0.0
    rows = [_row("F", -2.0)]
    assert mae(rows) == 0.0


def test_mae_and_pta_match_bruteforce_oracles():
    rng = np.random.default_rng(0)
    letters = [sym for sym in grades.LETTERS]
    rows = [
        _row(letters[rng.integers(0, len(letters))], float(rng.uniform(-0.5, 4.5)))
        for _ in range(1000)
    ]
    # independent oracles, plain python
    clamp = lambda v: min(max(v, 0.0), 4.0)
    exp_mae = sum(
        abs(clamp(r.pred_numeric) - grades.GRADE_POINTS[r.true_grade]) for r in rows
    ) / len(rows)
    assert abs(mae(rows) - exp_mae) <= 1e-12
    pos = {"A+": 0}
    pos.update({s: i for i, s in enumerate(grades.LETTERS[1:])})
    for ticks in (0, 1, 2):
        hits = sum(
            1 for r in rows if abs(pos[r.true_grade] - pos[r.pred_grade]) <= ticks
        )
        assert abs(pta(rows, ticks) - hits / len(rows)) <= 1e-12
    assert pta(rows, 0) <= pta(rows, 1) <= pta(rows, 2)


def test_pta_examples():
    exact = [_row("B", 3.0), _row("C+", 2.33)]
    assert pta(exact, 0) == 1.0
    one_tick = [_row("A", 3.67)]
    assert pta(one_tick, 0) == 0.0
    assert pta(one_tick, 1) == 1.0
    assert pta(one_tick, 2) == 1.0


def test_metrics_reject_empty_and_bad_ticks():
    with pytest.raises(ProtocolError):
        mae([])
    with pytest.raises(ProtocolError):
        pta([], 0)
    with pytest.raises(ProtocolError):
        pta([_row("B", 3.0)], 3)


def test_predicted_letters_never_out_of_range():
    rng = np.random.default_rng(1)
    for _ in range(200):
        row = _row("B", float(rng.uniform(-3, 8)))
        implied = grades.GRADE_POINTS[row.pred_grade]
        assert 0.0 <= implied <= 4.0


def test_planted_scoring_is_exact(small_synth_clean):
    ds, planted = small_synth_clean
    tr, te = split_train_test(ds, 7)
    report = evaluate(planted, te, tr)
    assert report.pta0 == 1.0
    assert report.pta1 == 1.0


def test_single_term_enforced(small_synth):
    ds, planted = small_synth
    tr, _ = split_train_test(ds, 7)
    with pytest.raises(ProtocolError):
        evaluate(planted, ds, tr)  # spans many terms


def test_export_round_trip(tmp_path, small_synth):
    ds, planted = small_synth
    tr, te = split_train_test(ds, 7)
    rows = score_dataset(planted, te, tr)
    path = tmp_path / "predictions.csv"
    export_predictions(rows, path)
    loaded = load_predictions(path)
    assert len(loaded) == len(rows)
    before = metrics(rows)
    after = metrics(loaded)
    assert after.mae == pytest.approx(before.mae, abs=1e-6)
    assert after.pta0 == before.pta0
    assert after.pta1 == before.pta1
    assert after.pta2 == before.pta2


def test_partition_additivity(small_synth):
    ds, planted = small_synth
    tr, te = split_train_test(ds, 7)
    by_cohort = evaluate_partitioned(planted, te, tr, "cohort")
    total = by_cohort["ALL"]
    parts = [rep for label, rep in by_cohort.items() if label != "ALL"]
    assert sum(p.n for p in parts) == total.n
    weighted = sum(p.mae * p.n for p in parts) / total.n
    assert weighted == pytest.approx(total.mae, abs=1e-12)
    by_start = evaluate_partitioned(planted, te, tr, "start-term")
    assert sum(p.n for lbl, p in by_start.items() if lbl != "ALL") == total.n


def test_cold_start_unknown_student(small_synth):
    ds, planted = small_synth
    tr, te = split_train_test(ds, 7)
    ghost = te.records[0]
    ghost_ds = make_dataset(
        [f"zz_new,{ghost.course_id},zz_inst,7,B,7,NEW,XX,100,TR"]
    )
    rows = score_dataset(planted, ghost_ds, tr)
    assert rows[0].pred_numeric == planted.global_mean


def test_importance_all_knowledge():
    params = random_params(ModelSpec("ale"), np.random.default_rng(2), k=2)
    params.level_factors[:] = 0.0
    params.global_factors[:] = 0.0
    ds = make_dataset(
        [
            "s0,c0,i0,0,B,0,CS,CS,100,FTF",
            "s0,c1,i0,1,A,0,CS,CS,100,FTF",
        ]
    )
    params.students = ("s0",)
    params.courses = ("c0", "c1")
    params.instructors = ("i0",)
    tr, te = split_train_test(ds, 1)
    rep = importance_report(params, te, tr)
    assert rep.i_ck == pytest.approx(1.0, abs=1e-9)
    assert rep.i_al == 0.0
    assert rep.i_g == 0.0


def test_importance_worked_fractions():
    from nextterm.models import decompose_contributions

    params = random_params(ModelSpec("ale"), np.random.default_rng(0), k=1)
    params.decay = 0.0
    params.course_required[0] = [2.0]
    params.course_provided[1] = [1.0]
    params.level_factors[:] = 0.1
    params.instructor_factors[0] = [0.2]
    params.global_factors[0] = [0.3]
    history = [(1, 0.5, 0)]
    parts = decompose_contributions(
        params, 0, 0, 1, instructor=0, start_term=0, history=history
    )
    pred = parts.total()
    fractions = (parts.ck / pred, parts.al / pred, parts.g / pred)
    assert fractions[0] == pytest.approx(1.10 / 1.92, abs=1e-12)
    assert fractions[1] == pytest.approx(0.22 / 1.92, abs=1e-12)
    assert fractions[2] == pytest.approx(0.60 / 1.92, abs=1e-12)
    assert sum(fractions) == pytest.approx(1.0, abs=1e-9)


def test_importance_fracs_sum_to_one(small_synth_clean):
    ds, planted = small_synth_clean
    tr, te = split_train_test(ds, 7)
    rep = importance_report(planted, te, tr)
    assert rep.n_used == len(te.records)
    assert rep.n_excluded == 0
    by_major = importance_by_partition(planted, te, tr, "major")
    assert sum(r.n_used for lbl, r in by_major.items() if lbl != "ALL") == rep.n_used


def test_importance_excludes_near_zero_predictions():
    params = random_params(ModelSpec("ale"), np.random.default_rng(3), k=1)
    params.course_required[:] = 0.0
    params.level_factors[:] = 0.0
    params.instructor_factors[:] = 0.0
    params.global_factors[:] = 0.0
    params.students = ("s0",)
    params.courses = ("c0", "c1")
    params.instructors = ("i0",)
    ds = make_dataset(
        [
            "s0,c0,i0,0,B,0,CS,CS,100,FTF",
            "s0,c1,i0,1,A,0,CS,CS,100,FTF",
        ]
    )
    tr, te = split_train_test(ds, 1)
    with pytest.raises(ProtocolError):
        importance_report(params, te, tr)


def test_importance_requires_ale_family(small_synth):
    ds, _ = small_synth
    tr, te = split_train_test(ds, 7)
    params = random_params(ModelSpec("mf"), np.random.default_rng(0))
    with pytest.raises(ProtocolError):
        importance_report(params, te, tr)


def test_group_bias_skipped_for_unseen_group():
    spec = ModelSpec("mf-d", student_group="major", course_group="subject")
    params = random_params(
        ModelSpec("mf-d", student_group="major", course_group="subject"),
        np.random.default_rng(4), n_students=1, n_courses=1,
        n_student_groups=1, n_course_groups=1,
    )
    params.students = ("s0",)
    params.courses = ("c0",)
    params.instructors = ("i0",)
    params.student_groups = ("CS",)
    params.course_groups = ("CS",)
    base = float(params.student_factors[0] @ params.course_required[0])

    seen = make_dataset(["s0,c0,i0,1,B,0,CS,CS,100,FTF"])
    rows = score_dataset(params, seen, seen)
    expected = (
        base
        + params.student_group_bias[0, 0]
        + params.course_group_bias[0, 0]
    )
    assert rows[0].pred_numeric == pytest.approx(expected, abs=1e-12)

    # same entities, but major/subject unknown to the trained group tables
    unseen = make_dataset(["s0,c0,i0,1,B,0,ART,MUS,100,FTF"])
    rows = score_dataset(params, unseen, unseen)
    assert rows[0].pred_numeric == pytest.approx(base, abs=1e-12)


def test_ablation_suite_shape(small_synth):
    ds, _ = small_synth
    tr, te = split_train_test(ds, 7)
    hyper = HyperParams(k=2, decay=0.1, eta=0.02, max_iter=2)
    rows = ablation_suite(tr, te, hyper, seed=0, partition="cohort")
    partitions = {r.partition for r in rows}
    assert "ALL" in partitions
    for label in partitions:
        variants = [r.variant for r in rows if r.partition == label]
        assert variants == ["ale", "ale-noal", "ale-noin", "ale-nog"]
    all_rows = {r.variant: r for r in rows if r.partition == "ALL"}
    assert all(0.0 <= r.pta0 <= 1.0 for r in all_rows.values())
    assert all(r.n == len(te.records) for r in all_rows.values())
