"""Scoring estimated Q-matrices against a reference.

A Q-matrix is identified from data only up to a permutation of its
attribute columns, so recovery is scored after aligning the estimate to
the reference over all K! column orders (exhaustive up to K=10, with a
clearly-approximate assignment fallback beyond that).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .model import CapacityError, QMatrix, ResponseMatrix
from .vb import DEFAULT_MAX_SWEEPS, DEFAULT_TOL, VBPriors, fit

K_PERM_MAX = 10


@dataclass(frozen=True)
class RecoveryReport:
    """Per-dataset recovery rates and their mean."""

    rates: np.ndarray
    mrr: float
    permutations: list[tuple[int, ...]]


def recovery_rate(q_hat: QMatrix, q_true: QMatrix) -> float:
    """Fraction of matching entries: 1 - Hamming distance / (J*K)."""
    if q_hat.entries.shape != q_true.entries.shape:
        raise ValueError(
            f"shape mismatch: {q_hat.entries.shape} vs {q_true.entries.shape}"
        )
    diff = np.abs(q_hat.entries.astype(np.int64) - q_true.entries.astype(np.int64))
    return 1.0 - diff.sum() / q_hat.entries.size


def align_columns(q_hat: QMatrix, reference: QMatrix,
                  k_perm_max: int = K_PERM_MAX) -> tuple[QMatrix, tuple[int, ...]]:
    """Best column permutation of ``q_hat`` against ``reference``.

    Evaluates all K! permutations and returns the permuted matrix with
    the highest recovery rate; ties go to the lexicographically smallest
    permutation. Column ``i`` of the result is column ``perm[i]`` of the
    input.
    """
    if q_hat.entries.shape != reference.entries.shape:
        raise ValueError(
            f"shape mismatch: {q_hat.entries.shape} vs {reference.entries.shape}"
        )
    k = q_hat.n_attributes
    if k > k_perm_max:
        raise CapacityError(
            f"exhaustive alignment over {k}! column permutations is infeasible "
            f"for K={k} > {k_perm_max}; score against a provisional reference "
            "ordering or use align_columns_greedy"
        )
    ref = reference.entries.astype(np.int64)
    entries = q_hat.entries.astype(np.int64)
    best_perm = None
    best_agree = -1
    for perm in itertools.permutations(range(k)):
        agree = int((entries[:, perm] == ref).sum())
        if agree > best_agree:
            best_agree = agree
            best_perm = perm
    return QMatrix(q_hat.entries[:, best_perm]), best_perm


def align_columns_greedy(q_hat: QMatrix, reference: QMatrix) -> tuple[QMatrix, tuple[int, ...]]:
    """Approximate alignment for large K via optimal column assignment.

    Maximizes the total per-column agreement with the reference; unlike
    the exhaustive search this only optimizes column-wise agreement, but
    that objective coincides with the recovery rate, so the result is
    exact whenever a single assignment maximizes it.
    """
    if q_hat.entries.shape != reference.entries.shape:
        raise ValueError(
            f"shape mismatch: {q_hat.entries.shape} vs {reference.entries.shape}"
        )
    est = q_hat.entries.astype(np.int64)
    ref = reference.entries.astype(np.int64)
    # agreement[i, j] = matches when estimate column j is placed at position i
    agreement = (ref.T[:, None, :] == est.T[None, :, :]).sum(axis=2)
    rows, cols = linear_sum_assignment(agreement, maximize=True)
    perm = tuple(int(cols[i]) for i in np.argsort(rows))
    return QMatrix(q_hat.entries[:, perm]), perm


def mean_recovery(estimates: list[QMatrix], q_true: QMatrix,
                  align: bool = True) -> RecoveryReport:
    """Average recovery rate over datasets, aligning each estimate first."""
    rates = np.empty(len(estimates))
    permutations = []
    identity = tuple(range(q_true.n_attributes))
    for i, q_hat in enumerate(estimates):
        if align:
            q_hat, perm = align_columns(q_hat, q_true)
        else:
            perm = identity
        rates[i] = recovery_rate(q_hat, q_true)
        permutations.append(perm)
    return RecoveryReport(rates=rates, mrr=float(rates.mean()),
                          permutations=permutations)


def negative_elbo_fit(x: ResponseMatrix, q: QMatrix,
                      priors: VBPriors | None = None, restarts: int = 1,
                      seed: int = 0, tol: float = DEFAULT_TOL,
                      max_sweeps: int = DEFAULT_MAX_SWEEPS) -> float:
    """Negative maximized full-data ELBO; lower means better fit.

    Runs ``restarts`` independently seeded fits and keeps the best, so
    candidate Q-matrices can be compared on equal footing.
    """
    if restarts < 1:
        raise ValueError("restarts must be at least 1")
    best = -np.inf
    for child in np.random.SeedSequence(seed).spawn(restarts):
        _, elbo = fit(x, q, priors, np.random.default_rng(child), tol=tol,
                      max_sweeps=max_sweeps)
        best = max(best, elbo)
    return -best
