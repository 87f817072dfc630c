"""Letter-grade scale: symbol/number conversion and tick distance.

The twelve-symbol ladder uses the standard US 4.0 scale. A+ and A share the
value 4.0 and therefore occupy the same tick position; A is the canonical
symbol for 4.0 (conversions never return A+).
"""

import math

from .errors import UnknownGradeError

# Ladder order, highest first.
LETTERS = ("A+", "A", "A-", "B+", "B", "B-", "C+", "C", "C-", "D+", "D", "F")

GRADE_POINTS = {
    "A+": 4.00,
    "A": 4.00,
    "A-": 3.67,
    "B+": 3.33,
    "B": 3.00,
    "B-": 2.67,
    "C+": 2.33,
    "C": 2.00,
    "C-": 1.67,
    "D+": 1.33,
    "D": 1.00,
    "F": 0.00,
}

# Tick position on the ladder; A+ and A collapse to one position.
TICK_POSITION = {"A+": 0}
TICK_POSITION.update({sym: i for i, sym in enumerate(LETTERS[1:])})

# Snapping targets, highest first so ties resolve toward the higher grade.
CANONICAL_LETTERS = LETTERS[1:]

GRADE_MIN = 0.0
GRADE_MAX = 4.0


def letter_to_numeric(letter):
    """Return the 4.0-scale value of a ladder symbol."""
    try:
        return GRADE_POINTS[letter]
    except KeyError:
        raise UnknownGradeError(f"unknown grade symbol {letter!r}") from None


def clamp(value):
    """Clamp a numeric grade into [0, 4]."""
    return min(max(value, GRADE_MIN), GRADE_MAX)


def numeric_to_letter(value):
    """Return the letter whose value is nearest to ``value``.

    Out-of-range inputs are clamped first; ties break toward the higher
    grade; the 4.0 slot always yields A (never A+).
    """
    if not math.isfinite(value):
        raise ValueError(f"grade value must be finite, got {value!r}")
    v = clamp(value)
    best = None
    best_gap = math.inf
    for sym in CANONICAL_LETTERS:
        gap = abs(v - GRADE_POINTS[sym])
        if gap < best_gap:
            best = sym
            best_gap = gap
    return best


def tick_distance(a, b):
    """Number of ladder positions between two letters (A+ and A count as one)."""
    if a not in TICK_POSITION:
        raise UnknownGradeError(f"unknown grade symbol {a!r}")
    if b not in TICK_POSITION:
        raise UnknownGradeError(f"unknown grade symbol {b!r}")
    return abs(TICK_POSITION[a] - TICK_POSITION[b])
