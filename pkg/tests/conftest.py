import pytest

from nextterm.data import parse_csv
from nextterm.models import ModelParams, N_LEVELS
from nextterm.synth import SynthConfig, generate_synthetic

HEADER = (
    "student_id,course_id,instructor_id,term,grade,student_start_term,"
    "student_major,course_subject,course_level,cohort"
)


def csv_text(rows):
    return HEADER + "\n" + "\n".join(rows) + "\n"


def make_dataset(rows):
    return parse_csv(csv_text(rows))


@pytest.fixture(scope="session")
def small_synth():
    """Shared 8-term synthetic dataset, noisy."""
    cfg = SynthConfig(
        n_students=60, n_courses=20, n_instructors=8, n_terms=8, sigma=0.1
    )
    return generate_synthetic(cfg, 11)


@pytest.fixture(scope="session")
def small_synth_clean():
    """Shared 8-term synthetic dataset, noise-free."""
    cfg = SynthConfig(
        n_students=60, n_courses=20, n_instructors=8, n_terms=8, sigma=0.0
    )
    return generate_synthetic(cfg, 11)


def random_params(spec, rng, n_students=4, n_courses=5, n_instructors=3, k=2,
                  n_student_groups=1, n_course_groups=1, decay=0.0):
    """Hand-rolled random parameter tables for formula-level tests."""
    params = ModelParams(spec=spec, k=k, seed=0, decay=decay)
    params.course_required = rng.random((n_courses, k))
    if spec.mf_family:
        params.student_factors = rng.random((n_students, k))
    if spec.ck_family:
        params.course_provided = rng.random((n_courses, k))
    if spec.ale_family:
        if spec.use_academic_level:
            params.level_factors = rng.random((N_LEVELS, k))
        if spec.use_instructor:
            params.instructor_factors = rng.random((n_instructors, k))
        if spec.use_global:
            params.global_factors = rng.random((n_students, k))
    if spec.has_bias:
        params.student_bias = rng.random(n_students) - 0.5
        params.course_bias = rng.random(n_courses) - 0.5
    if spec.has_group_bias:
        params.student_group_bias = rng.random((n_students, n_course_groups)) - 0.5
        params.course_group_bias = rng.random((n_courses, n_student_groups)) - 0.5
    params.students = tuple(f"s{i}" for i in range(n_students))
    params.courses = tuple(f"c{i}" for i in range(n_courses))
    params.instructors = tuple(f"i{i}" for i in range(n_instructors))
    params.student_groups = tuple(f"sg{i}" for i in range(n_student_groups))
    params.course_groups = tuple(f"cg{i}" for i in range(n_course_groups))
    return params


def random_history(rng, n_courses, term, max_len=4, allow_retake=True):
    length = int(rng.integers(0, max_len + 1))
    hist = []
    for _ in range(length):
        c = int(rng.integers(0, n_courses))
        g = float(rng.uniform(0.0, 4.0))
        t_prev = int(rng.integers(0, term))
        hist.append((c, g, t_prev))
    if allow_retake and length >= 2 and rng.random() < 0.3:
        c, g, t_prev = hist[0]
        hist.append((c, float(rng.uniform(0.0, 4.0)), t_prev))
    return hist
