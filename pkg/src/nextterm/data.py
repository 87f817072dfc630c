"""Term-structured grade data: CSV ingestion, indexing, and protocol splits.

A dataset is an immutable collection of (student, course, instructor, term,
grade) records grouped by term, with profile tables and dense id indexes.
The temporal protocol trains on everything before a test term T and predicts
term T itself; the validation split applies the same rule one term earlier.
"""

import csv
import io
from dataclasses import dataclass
from pathlib import Path

from . import grades
from .errors import IngestionError, ProtocolError, UnknownStudentError

CSV_COLUMNS = (
    "student_id",
    "course_id",
    "instructor_id",
    "term",
    "grade",
    "student_start_term",
    "student_major",
    "course_subject",
    "course_level",
    "cohort",
)

COHORTS = ("FTF", "TR")
COURSE_LEVELS = (100, 200, 300, 400)


@dataclass(frozen=True)
class StudentProfile:
    student_id: str
    start_term: int
    major: str
    cohort: str


@dataclass(frozen=True)
class CourseProfile:
    course_id: str
    subject: str
    level: int


@dataclass(frozen=True)
class GradeRecord:
    student_id: str
    course_id: str
    instructor_id: str
    term: int
    grade: str
    numeric: float

    @classmethod
    def make(cls, student_id, course_id, instructor_id, term, grade):
        return cls(
            student_id,
            course_id,
            instructor_id,
            term,
            grade,
            grades.letter_to_numeric(grade),
        )


class Dataset:
    """Immutable record collection with term groups and entity indexes."""

    def __init__(self, records, students, courses):
        # Stable term-major order so downstream iteration is deterministic.
        self.records = tuple(sorted(records, key=lambda r: r.term))
        self.students = dict(students)
        self.courses = dict(courses)

        by_term = {}
        history = {}
        for rec in self.records:
            by_term.setdefault(rec.term, []).append(rec)
            history.setdefault(rec.student_id, []).append(rec)
        self.by_term = {t: tuple(rs) for t, rs in by_term.items()}
        self._history = {s: tuple(rs) for s, rs in history.items()}

        self.student_ids = tuple(sorted({r.student_id for r in self.records}))
        self.course_ids = tuple(sorted({r.course_id for r in self.records}))
        self.instructor_ids = tuple(sorted({r.instructor_id for r in self.records}))
        self.major_ids = tuple(
            sorted({self.students[s].major for s in self.student_ids})
        )
        self.subject_ids = tuple(
            sorted({self.courses[c].subject for c in self.course_ids})
        )
        self.student_index = {s: i for i, s in enumerate(self.student_ids)}
        self.course_index = {c: i for i, c in enumerate(self.course_ids)}
        self.instructor_index = {x: i for i, x in enumerate(self.instructor_ids)}

    def __len__(self):
        return len(self.records)

    def terms(self):
        return sorted(self.by_term)

    def subset(self, keep):
        """New dataset with the records for which ``keep(record)`` is true.

        Profile tables are inherited wholesale so splits can still resolve
        students that only appear on the other side of the split.
        """
        return Dataset(
            [r for r in self.records if keep(r)], self.students, self.courses
        )

    def mean_grade(self):
        if not self.records:
            return 0.0
        return sum(r.numeric for r in self.records) / len(self.records)


def split_train_test(dataset, test_term):
    """Partition into (records before ``test_term``, records of ``test_term``)."""
    if test_term < 1:
        raise ProtocolError(f"test term must be >= 1, got {test_term}")
    test = dataset.subset(lambda r: r.term == test_term)
    if not test.records:
        raise ProtocolError(f"no records in test term {test_term}")
    train = dataset.subset(lambda r: r.term < test_term)
    return train, test


def validation_split(train, test_term):
    """Split a training set into (records before T-1, records of term T-1)."""
    if test_term < 2:
        raise ProtocolError(
            f"validation split needs test term >= 2, got {test_term}"
        )
    return split_train_test(train, test_term - 1)


def student_history(dataset, student_id, term):
    """Chronological records of a student strictly before ``term``."""
    if student_id not in dataset.students:
        raise UnknownStudentError(f"unknown student {student_id!r}")
    prior = dataset._history.get(student_id, ())
    return [r for r in prior if r.term < term]


def _parse_int(row_no, field, raw):
    try:
        return int(raw)
    except ValueError:
        raise IngestionError(row_no, f"{field} must be an integer, got {raw!r}")


def parse_csv(source):
    """Ingest a grade CSV (path, text, or file object) into a Dataset."""
    if isinstance(source, (str, Path)) and "\n" not in str(source):
        with open(source, newline="", encoding="utf-8") as fh:
            return _parse_rows(csv.reader(fh))
    if isinstance(source, str):
        return _parse_rows(csv.reader(io.StringIO(source)))
    if isinstance(source, bytes):
        return _parse_rows(csv.reader(io.StringIO(source.decode("utf-8"))))
    return _parse_rows(csv.reader(source))


def _parse_rows(reader):
    try:
        header = next(reader)
    except StopIteration:
        raise IngestionError(1, "empty file, header required")
    header = [h.strip() for h in header]
    if tuple(header) != CSV_COLUMNS:
        missing = [c for c in CSV_COLUMNS if c not in header]
        if missing:
            raise IngestionError(1, f"missing column(s) {missing}")
        raise IngestionError(
            1, f"columns must be exactly {','.join(CSV_COLUMNS)}, got {header}"
        )

    records = []
    students = {}
    courses = {}
    seen = set()
    for row_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(CSV_COLUMNS):
            raise IngestionError(
                row_no, f"expected {len(CSV_COLUMNS)} fields, got {len(row)}"
            )
        (sid, cid, iid, term_s, grade, start_s, major, subject, level_s, cohort) = [
            f.strip() for f in row
        ]
        term = _parse_int(row_no, "term", term_s)
        start = _parse_int(row_no, "student_start_term", start_s)
        level = _parse_int(row_no, "course_level", level_s)

        if grade not in grades.GRADE_POINTS:
            raise IngestionError(row_no, f"unknown grade symbol {grade!r}")
        if start < 0:
            raise IngestionError(row_no, f"start term must be >= 0, got {start}")
        if term < start:
            raise IngestionError(
                row_no, f"term {term} precedes student start term {start}"
            )
        if level not in COURSE_LEVELS:
            raise IngestionError(
                row_no, f"course level must be one of {COURSE_LEVELS}, got {level}"
            )
        if cohort not in COHORTS:
            raise IngestionError(
                row_no, f"cohort must be one of {COHORTS}, got {cohort!r}"
            )
        if not major:
            raise IngestionError(row_no, "student major must be non-empty")

        key = (sid, cid, term)
        if key in seen:
            raise IngestionError(
                row_no, f"duplicate (student, course, term) triple {key}"
            )
        seen.add(key)

        profile = StudentProfile(sid, start, major, cohort)
        if sid in students and students[sid] != profile:
            raise IngestionError(
                row_no, f"conflicting profile for student {sid!r}"
            )
        students[sid] = profile
        cprofile = CourseProfile(cid, subject, level)
        if cid in courses and courses[cid] != cprofile:
            raise IngestionError(row_no, f"conflicting profile for course {cid!r}")
        courses[cid] = cprofile

        records.append(GradeRecord.make(sid, cid, iid, term, grade))

    return Dataset(records, students, courses)


def write_csv(dataset, path):
    """Write a dataset back out in the canonical CSV layout."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in dataset.records:
            sp = dataset.students[r.student_id]
            cp = dataset.courses[r.course_id]
            writer.writerow(
                [
                    r.student_id,
                    r.course_id,
                    r.instructor_id,
                    r.term,
                    r.grade,
                    sp.start_term,
                    sp.major,
                    cp.subject,
                    cp.level,
                    sp.cohort,
                ]
            )
