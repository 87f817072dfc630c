"""Synthetic transcript generator with planted model parameters.

Grades are produced by a planted ale model: factor tables are drawn uniform
on (0,1) (optionally rescaled per effect family), enrollment sequences are
sampled term by term, and each grade is the planted prediction plus Gaussian
noise, clamped to [0,4] and snapped to the letter ladder. Snapped grades feed
back into later terms' histories, exactly as recorded transcripts would. The
planted parameters are returned so experiments can test recovery.
"""

from dataclasses import dataclass

import numpy as np

from . import grades
from .data import COURSE_LEVELS, CourseProfile, Dataset, GradeRecord, StudentProfile
from .errors import ConfigError
from .models import ModelParams, ModelSpec, N_LEVELS, predict
from .seeding import substream


@dataclass(frozen=True)
class SynthConfig:
    n_students: int = 300
    n_courses: int = 60
    n_instructors: int = 25
    n_terms: int = 10
    k: int = 3
    courses_min: int = 2
    courses_max: int = 6
    sigma: float = 0.15
    ftf_fraction: float = 0.6
    n_majors: int = 5
    n_subjects: int = 8
    decay: float = 0.1
    ck_normalization: str = "count"
    # Multipliers on the uniform(0,1) planted draws, per effect family.
    # Defaults keep predictions mid-ladder instead of saturating at 4.0.
    scale_knowledge: float = 0.5
    scale_required: float = 1.0
    scale_academic_level: float = 0.8
    scale_instructor: float = 0.5
    scale_global: float = 0.8

    def validate(self):
        if min(self.n_students, self.n_courses, self.n_instructors) < 1:
            raise ConfigError("entity counts must be >= 1")
        if self.n_terms < 2:
            raise ConfigError("need at least 2 terms (train + test)")
        if self.k < 1:
            raise ConfigError("latent dimension must be >= 1")
        if not 1 <= self.courses_min <= self.courses_max:
            raise ConfigError(
                f"bad courses-per-term range [{self.courses_min}, {self.courses_max}]"
            )
        if self.courses_max > self.n_courses:
            raise ConfigError(
                f"courses per term {self.courses_max} exceeds course count {self.n_courses}"
            )
        if self.sigma < 0:
            raise ConfigError("noise sigma must be >= 0")
        if not 0 <= self.ftf_fraction <= 1:
            raise ConfigError("ftf fraction must be in [0, 1]")
        if min(self.n_majors, self.n_subjects) < 1:
            raise ConfigError("majors/subjects counts must be >= 1")
        if min(
            self.scale_knowledge,
            self.scale_required,
            self.scale_academic_level,
            self.scale_instructor,
            self.scale_global,
        ) < 0:
            raise ConfigError("effect scales must be >= 0")


def _ids(prefix, n):
    width = len(str(n - 1)) if n > 1 else 1
    return tuple(f"{prefix}{i:0{width}d}" for i in range(n))


def _plant(cfg, seed, rng, student_ids, course_ids, instructor_ids):
    spec = ModelSpec(variant="ale", ck_normalization=cfg.ck_normalization)
    params = ModelParams(spec=spec, k=cfg.k, seed=seed, decay=cfg.decay)
    params.course_required = rng.random((cfg.n_courses, cfg.k)) * cfg.scale_required
    params.course_provided = rng.random((cfg.n_courses, cfg.k)) * cfg.scale_knowledge
    # Academic levels are ordinal, so the planted level effect is a smooth
    # curve: each dimension interpolates between two uniform endpoints.
    lo = rng.random(cfg.k)
    hi = rng.random(cfg.k)
    x = np.linspace(0.0, 1.0, N_LEVELS)[:, None]
    params.level_factors = ((1.0 - x) * lo + x * hi) * cfg.scale_academic_level
    params.instructor_factors = (
        rng.random((cfg.n_instructors, cfg.k)) * cfg.scale_instructor
    )
    params.global_factors = rng.random((cfg.n_students, cfg.k)) * cfg.scale_global
    params.students = student_ids
    params.courses = course_ids
    params.instructors = instructor_ids
    return params


def generate_synthetic(cfg, seed, planted=None):
    """Build a dataset (and its planted parameters) for a config and seed.

    Deterministic for a fixed (cfg, seed); ``planted`` overrides the sampled
    parameter tables when an experiment needs exact, hand-chosen values.
    """
    cfg.validate()
    rng = substream(seed, "synth")

    student_ids = _ids("s", cfg.n_students)
    course_ids = _ids("c", cfg.n_courses)
    instructor_ids = _ids("i", cfg.n_instructors)
    majors = _ids("MAJ", cfg.n_majors)
    subjects = _ids("SUBJ", cfg.n_subjects)

    if planted is None:
        planted = _plant(cfg, seed, rng, student_ids, course_ids, instructor_ids)

    courses = {}
    for cid in course_ids:
        subject = subjects[rng.integers(0, cfg.n_subjects)]
        level = COURSE_LEVELS[rng.integers(0, len(COURSE_LEVELS))]
        courses[cid] = CourseProfile(cid, subject, level)

    students = {}
    start_terms = {}
    for i, sid in enumerate(student_ids):
        start = int(rng.integers(0, cfg.n_terms - 1))
        major = majors[rng.integers(0, cfg.n_majors)]
        cohort = "FTF" if rng.random() < cfg.ftf_fraction else "TR"
        students[sid] = StudentProfile(sid, start, major, cohort)
        start_terms[sid] = start

    # One instructor per (course, term) offering, fixed up front.
    offering = rng.integers(0, cfg.n_instructors, size=(cfg.n_courses, cfg.n_terms))

    records = []
    history = {i: [] for i in range(cfg.n_students)}
    for t in range(cfg.n_terms):
        for i, sid in enumerate(student_ids):
            if start_terms[sid] > t:
                continue
            n_take = int(rng.integers(cfg.courses_min, cfg.courses_max + 1))
            chosen = np.sort(rng.choice(cfg.n_courses, size=n_take, replace=False))
            this_term = []
            for c in chosen:
                pred = predict(
                    planted,
                    i,
                    int(c),
                    t,
                    instructor=int(offering[c, t]),
                    start_term=start_terms[sid],
                    history=history[i],
                )
                noise = rng.standard_normal()
                letter = grades.numeric_to_letter(
                    grades.clamp(pred + cfg.sigma * noise)
                )
                records.append(
                    GradeRecord.make(
                        sid, course_ids[c], instructor_ids[offering[c, t]], t, letter
                    )
                )
                this_term.append((int(c), grades.letter_to_numeric(letter), t))
            # Same-term grades only enter the history for later terms.
            history[i].extend(this_term)

    dataset = Dataset(records, students, courses)
    planted.global_mean = dataset.mean_grade()
    return dataset, planted
