"""Combinatorial structures of the DINA model.

The model couples three binary matrices: a Q-matrix assigning attributes
to items, a response matrix, and the lattice of all 2^K attribute
mastery profiles. Everything downstream (variational fits, the row
pattern search, data generation) is built on the ideal-response algebra
defined here.

Bit-ordering convention: a profile or row pattern is read as a binary
number with attribute 1 in the most significant position. The lattice
row with index ``l`` (0-based) therefore holds the binary expansion of
``l``, and the nonzero patterns carry decimal codes 1..2^K-1 equal to
their row position in the pattern table.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

# 2^K x N responsibility matrices dominate memory; refuse to enumerate
# lattices past this point instead of thrashing.
K_MAX = 15

# Probabilities are clamped into [PROB_EPS, 1 - PROB_EPS] wherever logs
# are taken, so log(0) is unreachable.
PROB_EPS = 1e-6


class CapacityError(ValueError):
    """An operation would enumerate too many latent classes (2^K blowup)."""


def clamp_probability(p):
    """Clamp probabilities into the open unit interval used for logs."""
    return np.clip(p, PROB_EPS, 1.0 - PROB_EPS)


def _as_binary_matrix(arr, name: str) -> np.ndarray:
    a = np.asarray(arr)
    if a.ndim != 2:
        raise ValueError(f"{name} must be a 2-D matrix, got ndim={a.ndim}")
    if a.size and not np.isin(a, (0, 1)).all():
        raise ValueError(f"{name} entries must all be 0 or 1")
    a = np.ascontiguousarray(a, dtype=np.uint8)
    a.setflags(write=False)
    return a


def _check_k(k: int) -> None:
    if not 1 <= k <= K_MAX:
        raise CapacityError(
            f"attribute count K={k} outside [1, {K_MAX}]; the profile "
            "lattice has 2^K rows and grows past available memory"
        )


@dataclass(frozen=True)
class QMatrix:
    """J x K binary item-attribute incidence matrix.

    All-zero rows are legal: an averaged estimate may contain items that
    measure none of the attributes (interpreted as residual items).
    """

    entries: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "entries", _as_binary_matrix(self.entries, "Q-matrix"))
        if self.entries.shape[0] < 1 or self.entries.shape[1] < 1:
            raise ValueError("Q-matrix needs at least one item and one attribute")

    @property
    def n_items(self) -> int:
        return self.entries.shape[0]

    @property
    def n_attributes(self) -> int:
        return self.entries.shape[1]


@dataclass(frozen=True)
class ResponseMatrix:
    """N x J binary response matrix with no missing values."""

    entries: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "entries", _as_binary_matrix(self.entries, "response matrix"))
        if self.entries.shape[1] < 1:
            raise ValueError("response matrix needs at least one item column")

    @property
    def n_respondents(self) -> int:
        return self.entries.shape[0]

    @property
    def n_items(self) -> int:
        return self.entries.shape[1]


@dataclass(frozen=True)
class ProfileLattice:
    """All 2^K attribute mastery profiles in binary-counting order.

    Row 0 is the all-zero profile and row 2^K - 1 the all-one profile;
    latent class indices refer to rows of this matrix.
    """

    profiles: np.ndarray

    @property
    def n_classes(self) -> int:
        return self.profiles.shape[0]

    @property
    def n_attributes(self) -> int:
        return self.profiles.shape[1]


@dataclass(frozen=True)
class PatternTable:
    """The 2^K - 1 nonzero candidate rows for a single Q-matrix item.

    ``codes[h]`` is the decimal value of ``patterns[h]`` under the shared
    bit ordering; the table is sorted so that ``codes == [1, ..., H]``.
    One instance serves every item.
    """

    patterns: np.ndarray
    codes: np.ndarray

    @property
    def n_patterns(self) -> int:
        return self.patterns.shape[0]

    @property
    def n_attributes(self) -> int:
        return self.patterns.shape[1]


def _binary_rows(k: int) -> np.ndarray:
    values = np.arange(2**k, dtype=np.int64)[:, None]
    shifts = np.arange(k - 1, -1, -1, dtype=np.int64)
    bits = ((values >> shifts) & 1).astype(np.uint8)
    bits.setflags(write=False)
    return bits


@lru_cache(maxsize=None)
def enumerate_profiles(k: int) -> ProfileLattice:
    """Enumerate all 2^k mastery profiles in binary-counting order."""
    _check_k(k)
    return ProfileLattice(profiles=_binary_rows(k))


@lru_cache(maxsize=None)
def pattern_table(k: int) -> PatternTable:
    """Enumerate the 2^k - 1 nonzero row patterns sorted by decimal code."""
    _check_k(k)
    bits = _binary_rows(k)[1:]
    codes = np.arange(1, 2**k, dtype=np.int64)
    codes.setflags(write=False)
    return PatternTable(patterns=bits, codes=codes)


def pattern_code(bits) -> int:
    """Decimal code of a row pattern (attribute 1 = most significant bit)."""
    bits = np.asarray(bits)
    weights = 2 ** np.arange(len(bits) - 1, -1, -1, dtype=np.int64)
    return int(bits @ weights)


def ideal_response(alpha, q) -> int:
    """Noise-free response of profile ``alpha`` to an item with row ``q``.

    Returns 1 iff every attribute the item requires is mastered; an item
    requiring nothing (all-zero row) is answered ideally by everyone.
    """
    alpha = np.asarray(alpha)
    q = np.asarray(q)
    if alpha.shape != q.shape:
        raise ValueError(
            f"profile length {alpha.shape} and Q-row length {q.shape} differ"
        )
    return int(np.all(alpha >= q))

def ideal_table(profile_rows: np.ndarray, q_entries: np.ndarray) -> np.ndarray:
    """Ideal responses for every (profile row, item) pair.

    ``profile_rows`` may be lattice profiles or per-respondent attribute
    rows; the result has one row per profile and one column per item.
    """
    profiles = np.asarray(profile_rows, dtype=np.int64)
    q = np.asarray(q_entries, dtype=np.int64)
    if profiles.shape[1] != q.shape[1]:
        raise ValueError(
            f"profiles have {profiles.shape[1]} attributes but Q-matrix has {q.shape[1]}"
        )
    return (profiles @ q.T == q.sum(axis=1)).astype(np.uint8)


def ideal_response_matrix(q: QMatrix, lattice: ProfileLattice) -> np.ndarray:
    """L x J matrix of ideal responses for every latent class and item."""
    if lattice.n_attributes != q.n_attributes:
        raise ValueError(
            f"lattice has {lattice.n_attributes} attributes but Q-matrix has "
            f"{q.n_attributes}"
        )
    return ideal_table(lattice.profiles, q.entries)


@dataclass(frozen=True)
class ItemParams:
    """Per-item slip and guessing probabilities, clamped into (0, 1)."""

    slip: np.ndarray
    guess: np.ndarray

    def __post_init__(self):
        slip = np.atleast_1d(np.asarray(self.slip, dtype=np.float64))
        guess = np.atleast_1d(np.asarray(self.guess, dtype=np.float64))
        if slip.shape != guess.shape or slip.ndim != 1:
            raise ValueError("slip and guess must be 1-D arrays of equal length")
        if not (np.isfinite(slip).all() and np.isfinite(guess).all()):
            raise ValueError("slip and guess must be finite")
        slip = clamp_probability(slip)
        guess = clamp_probability(guess)
        slip.setflags(write=False)
        guess.setflags(write=False)
        object.__setattr__(self, "slip", slip)
        object.__setattr__(self, "guess", guess)

    @property
    def n_items(self) -> int:
        return self.slip.shape[0]
