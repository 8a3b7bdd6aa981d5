"""Stochastic search for the Q-matrix with the maximum marginal likelihood.

Each iteration draws a fresh respondent subsample, fits the variational
posterior under the current Q-matrix, and replaces every item's row with
the candidate pattern of highest posterior probability given the fitted
slip/guess estimates and MAP profiles. The subsampling is what makes the
search stochastic; the row selection itself is deterministic, so iterates
can be averaged entrywise (with rounding) without any column relabeling.
A run keeps the averaged Q-matrix of its post-burn-in iterates, and the
run with the largest mean subset ELBO supplies the final estimate.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .model import (
    PatternTable,
    QMatrix,
    ResponseMatrix,
    _check_k,
    clamp_probability,
    enumerate_profiles,
    ideal_table,
    pattern_table,
)
from .vb import (
    DEFAULT_JITTER,
    DEFAULT_MAX_SWEEPS,
    DEFAULT_TOL,
    PointEstimates,
    VBPriors,
    fit,
    point_estimates,
)

logger = logging.getLogger(__name__)

DEFAULT_RUNS = 10
DEFAULT_ITERS = 550
DEFAULT_DISCARD = 50


@dataclass(frozen=True)
class SearchConfig:
    """Hyperparameters of the search.

    ``subset_size`` respondents are drawn per iteration (with replacement
    by default), ``iters`` iterations form one run, the first ``discard``
    iterates are dropped from averaging, and ``runs`` independent runs
    compete on mean subset ELBO.
    """

    n_attributes: int
    subset_size: int
    runs: int = DEFAULT_RUNS
    iters: int = DEFAULT_ITERS
    discard: int = DEFAULT_DISCARD
    seed: int = 0
    priors: VBPriors = field(default_factory=VBPriors)
    vb_tol: float = DEFAULT_TOL
    vb_max_sweeps: int = DEFAULT_MAX_SWEEPS
    jitter: float = DEFAULT_JITTER
    initial_q: QMatrix | None = None
    with_replacement: bool = True

    def __post_init__(self):
        _check_k(self.n_attributes)
        if self.runs < 1:
            raise ValueError("runs must be at least 1")
        if self.iters < 1:
            raise ValueError("iters must be at least 1")
        if not 0 <= self.discard < self.iters:
            raise ValueError("discard must satisfy 0 <= discard < iters")
        if self.subset_size < 1:
            raise ValueError("subset_size must be at least 1")
        if self.initial_q is not None and self.initial_q.n_attributes != self.n_attributes:
            raise ValueError("initial Q-matrix does not match n_attributes")


@dataclass(frozen=True)
class IterationRecord:
    """One iteration: the updated Q-matrix, the fit's ELBO, the sample."""

    t: int
    q: np.ndarray
    elbo: float
    sample_indices: np.ndarray


@dataclass(frozen=True)
class RunResult:
    """All iterates of one run plus its averaged estimate."""

    run_index: int
    records: list[IterationRecord]
    averaged_q: QMatrix
    mean_elbo: float


def subsample(n: int, size: int, rng: np.random.Generator,
              with_replacement: bool = True) -> np.ndarray:
    """Uniform respondent indices, drawn with replacement by default.

    With replacement the draw count may exceed the population; without
    replacement the sorted subset is returned, so drawing everyone yields
    the full dataset in natural order.
    """
    if size < 1:
        raise ValueError(f"subset size {size} must be at least 1")
    if with_replacement:
        if n < 1:
            raise ValueError("population must be nonempty")
        return rng.integers(0, n, size=size)
    if size > n:
        raise ValueError(f"subset size {size} exceeds population {n}")
    return np.sort(rng.choice(n, size=size, replace=False))


def random_qmatrix(n_items: int, n_attributes: int, rng: np.random.Generator) -> QMatrix:
    """Random start: iid Bernoulli(1/2) entries conditioned on nonzero rows,
    i.e. each row uniform over the 2^K - 1 nonzero patterns."""
    codes = rng.integers(1, 2**n_attributes, size=n_items)
    shifts = np.arange(n_attributes - 1, -1, -1)
    return QMatrix(((codes[:, None] >> shifts) & 1).astype(np.uint8))


def row_pattern_log_prior(q_prev_row: np.ndarray, table: PatternTable) -> np.ndarray:
    """Log prior mass of each candidate pattern given the previous row.

    Each entry's inclusion probability is the posterior mean
    (1 + q) / 3 of its Beta(1 + q, 2 - q) conditional, so both keeping
    and flipping an entry always retain positive mass. Unnormalized over
    the table's patterns.
    """
    q_prev_row = np.asarray(q_prev_row, dtype=np.float64)
    gamma = (1.0 + q_prev_row) / 3.0
    patterns = table.patterns.astype(np.float64)
    return patterns @ np.log(gamma) + (1.0 - patterns) @ np.log1p(-gamma)


def row_pattern_log_likelihood(x_col: np.ndarray, profiles: np.ndarray,
                               slip_j: float, guess_j: float,
                               table: PatternTable) -> np.ndarray:
    """Log likelihood of one item's subset responses under each pattern.

    The ideal response of respondent i under pattern h is recomputed from
    the MAP profiles; slip and guess enter as plug-in point estimates.
    """
    x_col = np.asarray(x_col, dtype=np.float64)
    slip_j = float(clamp_probability(slip_j))
    guess_j = float(clamp_probability(guess_j))
    eta_pat = ideal_table(profiles, table.patterns).astype(np.float64)
    m1 = x_col @ eta_pat                  # correct responses by ideal responders
    total = eta_pat.sum(axis=0)           # ideal responders per pattern
    n1 = x_col.sum()
    size = x_col.shape[0]
    return (np.log1p(-slip_j) * m1
            + np.log(slip_j) * (total - m1)
            + np.log(guess_j) * (n1 - m1)
            + np.log1p(-guess_j) * (size - n1 - total + m1))


def _pattern_scores(q_prev: QMatrix, estimates: PointEstimates,
                    x_sub: ResponseMatrix, table: PatternTable) -> np.ndarray:
    """J x H log-posterior scores for all items at once."""
    patterns = table.patterns.astype(np.float64)
    gamma = (1.0 + q_prev.entries.astype(np.float64)) / 3.0
    log_prior = np.log(gamma) @ patterns.T + np.log1p(-gamma) @ (1.0 - patterns).T

    eta_pat = ideal_table(estimates.profiles, table.patterns).astype(np.float64)
    x = x_sub.entries.astype(np.float64)
    slip = clamp_probability(estimates.item.slip)[:, None]
    guess = clamp_probability(estimates.item.guess)[:, None]
    m1 = x.T @ eta_pat
    total = eta_pat.sum(axis=0)[None, :]
    n1 = x.sum(axis=0)[:, None]
    size = x.shape[0]
    log_lik = (np.log1p(-slip) * m1
               + np.log(slip) * (total - m1)
               + np.log(guess) * (n1 - m1)
               + np.log1p(-guess) * (size - n1 - total + m1))
    return log_prior + log_lik


def update_qmatrix(q_prev: QMatrix, estimates: PointEstimates,
                   x_sub: ResponseMatrix, table: PatternTable) -> QMatrix:
    """Replace every row with its maximum-posterior pattern.

    Items are scored independently; ties go to the lowest decimal code.
    The map is a deterministic function of its inputs, which is what
    rules out label switching across iterations.
    """
    scores = _pattern_scores(q_prev, estimates, x_sub, table)
    best = np.argmax(scores, axis=1)
    return QMatrix(table.patterns[best])


def iterate_average(records: list[IterationRecord], discard: int) -> QMatrix:
    """Entrywise average of the retained iterates, rounded to bits.

    A mean of exactly 0.5 rounds to 1; the comparison is done on integer
    counts so the rule is exact. All-zero rows may result and are kept.
    """
    retained = records[discard:]
    if not retained:
        raise ValueError("discard leaves no iterates to average")
    counts = np.zeros(retained[0].q.shape, dtype=np.int64)
    for rec in retained:
        counts += rec.q
    return QMatrix((2 * counts >= len(retained)).astype(np.uint8))


def run_once(x: ResponseMatrix, config: SearchConfig, run_seed) -> RunResult:
    """One run: ``iters`` subsample/fit/update iterations plus averaging.

    ``run_seed`` is anything accepted by ``np.random.default_rng``;
    identical seeds reproduce the run bit for bit.
    """
    rng = np.random.default_rng(run_seed)
    n = x.n_respondents
    if config.subset_size > n:
        raise ValueError(
            f"subset size {config.subset_size} exceeds sample size {n}"
        )
    lattice = enumerate_profiles(config.n_attributes)
    table = pattern_table(config.n_attributes)
    q = config.initial_q if config.initial_q is not None else random_qmatrix(
        x.n_items, config.n_attributes, rng)

    records: list[IterationRecord] = []
    for t in range(1, config.iters + 1):
        idx = subsample(n, config.subset_size, rng, config.with_replacement)
        x_sub = ResponseMatrix(x.entries[idx])
        state, elbo = fit(x_sub, q, config.priors, rng, tol=config.vb_tol,
                          max_sweeps=config.vb_max_sweeps, jitter=config.jitter)
        estimates = point_estimates(state, lattice)
        q = update_qmatrix(q, estimates, x_sub, table)
        records.append(IterationRecord(t=t, q=q.entries, elbo=elbo,
                                       sample_indices=idx))

    averaged = iterate_average(records, config.discard)
    mean_elbo = float(np.mean([rec.elbo for rec in records[config.discard:]]))
    return RunResult(run_index=-1, records=records, averaged_q=averaged,
                     mean_elbo=mean_elbo)


def _run_worker(args):
    x_entries, config, run_index, seed = args
    result = run_once(ResponseMatrix(x_entries), config, seed)
    return RunResult(run_index=run_index, records=result.records,
                     averaged_q=result.averaged_q, mean_elbo=result.mean_elbo)


def derive_run_seeds(seed: int, runs: int) -> list[np.random.SeedSequence]:
    """Independent child seeds, one per run, derived from the config seed."""
    return np.random.SeedSequence(seed).spawn(runs)


def estimate(x: ResponseMatrix, config: SearchConfig,
             n_jobs: int = 1) -> tuple[QMatrix, list[RunResult]]:
    """Run ``config.runs`` independent runs and select the best.

    The winner is the run with the largest mean of its retained subset
    ELBOs (ties to the lowest run index). Runs execute in parallel when
    ``n_jobs`` exceeds one; results do not depend on ``n_jobs``.
    """
    seeds = derive_run_seeds(config.seed, config.runs)
    jobs = [(x.entries, config, r, seeds[r]) for r in range(config.runs)]

    results: list[RunResult] = []
    failures: list[tuple[int, Exception]] = []
    if n_jobs > 1 and config.runs > 1:
        with ProcessPoolExecutor(max_workers=min(n_jobs, config.runs)) as pool:
            futures = [pool.submit(_run_worker, job) for job in jobs]
            for r, future in enumerate(futures):
                exc = future.exception()
                if exc is None:
                    results.append(future.result())
                else:
                    failures.append((r, exc))
    else:
        for job in jobs:
            try:
                results.append(_run_worker(job))
            except Exception as exc:  # noqa: BLE001 - aggregated below
                failures.append((job[2], exc))

    if not results:
        details = "; ".join(f"run {r}: {exc}" for r, exc in failures)
        raise RuntimeError(f"all {config.runs} runs failed: {details}")
    for r, exc in failures:
        logger.warning("run %d failed and was skipped: %s", r, exc)

    best = int(np.argmax([res.mean_elbo for res in results]))
    return results[best].averaged_q, results


def full_elbo_trace(x: ResponseMatrix, records: list[IterationRecord],
                    priors: VBPriors | None = None, tol: float = DEFAULT_TOL,
                    max_sweeps: int = DEFAULT_MAX_SWEEPS,
                    jitter: float = DEFAULT_JITTER, seed: int = 0) -> np.ndarray:
    """Full-data maximized ELBO for every recorded Q-matrix.

    Refits the variational posterior on all respondents for each iterate
    of a (typically best) run; this is the trace used to inspect how the
    search progressed relative to a reference Q-matrix.
    """
    rng = np.random.default_rng(seed)
    priors = priors or VBPriors()
    trace = np.empty(len(records))
    for i, rec in enumerate(records):
        _, trace[i] = fit(x, QMatrix(rec.q), priors, rng, tol=tol,
                          max_sweeps=max_sweeps, jitter=jitter)
    return trace
