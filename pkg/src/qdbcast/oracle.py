"""Classical source of the correlated trits and the six outcome classes.

Measuring the antisymmetric triplet in a common basis gives each player a
different digit, every permutation equally likely. Sampling that directly is
what the protocol sessions use by default.
"""

from __future__ import annotations

import enum
from itertools import permutations
from typing import NamedTuple

import numpy as np
from scipy import stats

PERMUTATIONS = np.array(list(permutations(range(3))), dtype=np.int8)


class CorrelatedTriplet(NamedTuple):
    s: int
    r0: int
    r1: int

    @classmethod
    def checked(cls, s, r0, r1) -> "CorrelatedTriplet":
        if sorted((s, r0, r1)) != [0, 1, 2]:
            raise ValueError(f"({s}, {r0}, {r1}) is not a permutation of 0, 1, 2")
        return cls(int(s), int(r0), int(r1))


class OutcomeClass(str, enum.Enum):
    I = "I"
    II = "II"
    III = "III"
    IV = "IV"
    V = "V"
    VI = "VI"


# (S, R0, R1) digits for each class.
CLASS_TABLE = {
    OutcomeClass.I: (0, 1, 2),
    OutcomeClass.II: (0, 2, 1),
    OutcomeClass.III: (1, 2, 0),
    OutcomeClass.IV: (1, 0, 2),
    OutcomeClass.V: (2, 0, 1),
    OutcomeClass.VI: (2, 1, 0),
}
_CLASS_OF = {v: k for k, v in CLASS_TABLE.items()}
CLASS_ORDER = list(OutcomeClass)


def sample_triplet(rng: np.random.Generator) -> CorrelatedTriplet:
    row = PERMUTATIONS[rng.integers(6)]
    return CorrelatedTriplet(int(row[0]), int(row[1]), int(row[2]))


def sample_triplets(rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` independent uniform permutations as an ``(n, 3)`` int array."""
    return PERMUTATIONS[rng.integers(6, size=n)]


def class_of(t) -> OutcomeClass:
    key = tuple(int(x) for x in t)
    try:
        return _CLASS_OF[key]
    except KeyError:
        raise ValueError(f"{key} is not a permutation of 0, 1, 2") from None


def class_codes(rows: np.ndarray) -> np.ndarray:
    """Vectorised ``class_of``: index into ``CLASS_ORDER`` for each row."""
    rows = np.asarray(rows)
    key = rows[:, 0] * 9 + rows[:, 1] * 3 + rows[:, 2]
    lookup = np.full(27, -1, dtype=np.int64)
    for i, c in enumerate(CLASS_ORDER):
        a, b, d = CLASS_TABLE[c]
        lookup[9 * a + 3 * b + d] = i
    codes = lookup[key]
    if (codes < 0).any():
        raise ValueError("rows contain a non-permutation")
    return codes


def class_histogram(rows: np.ndarray) -> np.ndarray:
    return np.bincount(class_codes(rows), minlength=6)


def uniformity_pvalue(counts) -> float:
    """Chi-square goodness of fit of ``counts`` against the uniform distribution."""
    return float(stats.chisquare(np.asarray(counts, dtype=float)).pvalue)


def two_sample_pvalue(counts_a, counts_b) -> float:
    """Chi-square homogeneity test of two histograms over the same categories."""
    table = np.vstack([counts_a, counts_b]).astype(float)
    table = table[:, table.sum(axis=0) > 0]
    return float(stats.chi2_contingency(table, correction=False).pvalue)
