"""Mean-field variational Bayes for the DINA model with a fixed Q-matrix.

The posterior over latent class memberships, slip/guess parameters and
class mixing weights is approximated by a fully factorized distribution
and optimized by coordinate ascent. Each update below is the exact
mean-field optimum for its block, so the ELBO is non-decreasing across
sweeps; that monotonicity is the correctness certificate the test suite
enforces.

``fit`` delegates the sweep loop to the selected kernel backend
(:mod:`dinaq._kernel`); the update functions here are the readable
one-step equivalents used by callers and tests.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.special import xlogy

from ._kernel import vb_sweep_loop
from ._kernel.pure import (
    beta_expect_logs,
    beta_kl,
    data_logit_matrix,
    dirichlet_expect_log,
    dirichlet_kl,
    normalize_rows,
)
from .model import (
    ItemParams,
    ProfileLattice,
    QMatrix,
    ResponseMatrix,
    clamp_probability,
    enumerate_profiles,
    ideal_response_matrix,
)

# Coordinate ascent leaves the symmetric start through a long shallow
# plateau; a loose tolerance would stop inside it, so the default is
# deliberately tight.
DEFAULT_TOL = 1e-7
DEFAULT_MAX_SWEEPS = 500
DEFAULT_JITTER = 0.05


@dataclass(frozen=True)
class VBPriors:
    """Hyperparameters of the conjugate priors.

    ``slip`` and ``guess`` are Beta(a, b) pairs; ``class_conc`` is the
    Dirichlet concentration over latent classes, a scalar broadcast to
    all 2^K classes or a full vector.
    """

    slip: tuple[float, float] = (1.0, 1.0)
    guess: tuple[float, float] = (1.0, 1.0)
    class_conc: float | np.ndarray = 1.0

    def __post_init__(self):
        for name, (a, b) in (("slip", self.slip), ("guess", self.guess)):
            if not (a > 0 and b > 0):
                raise ValueError(f"{name} prior hyperparameters must be positive")
        if np.any(np.asarray(self.class_conc) <= 0):
            raise ValueError("class concentration must be positive")

    def class_concentration(self, n_classes: int) -> np.ndarray:
        conc = np.asarray(self.class_conc, dtype=np.float64)
        if conc.ndim == 0:
            return np.full(n_classes, float(conc))
        if conc.shape != (n_classes,):
            raise ValueError(
                f"class concentration has length {conc.shape[0]}, expected {n_classes}"
            )
        return conc.copy()


@dataclass(frozen=True)
class VariationalState:
    """All variational-posterior parameters for one fit.

    ``resp[i, l]`` is the posterior probability that respondent i sits in
    latent class l; the Beta and Dirichlet parameters follow the usual
    (a, b) / concentration conventions. ``elbo_trace`` holds one value
    per completed sweep.
    """

    resp: np.ndarray
    slip_a: np.ndarray
    slip_b: np.ndarray
    guess_a: np.ndarray
    guess_b: np.ndarray
    class_conc: np.ndarray
    elbo_trace: np.ndarray
    converged: bool = True

    @property
    def n_respondents(self) -> int:
        return self.resp.shape[0]

    @property
    def n_classes(self) -> int:
        return self.resp.shape[1]

    @property
    def n_items(self) -> int:
        return self.slip_a.shape[0]


@dataclass(frozen=True)
class PointEstimates:
    """EAP item parameters and MAP mastery profiles extracted from a fit."""

    item: ItemParams
    profiles: np.ndarray


def init_state(x: ResponseMatrix, lattice: ProfileLattice, priors: VBPriors,
               rng: np.random.Generator, jitter: float = DEFAULT_JITTER) -> VariationalState:
    """Initial state: near-uniform responsibilities, posteriors at the priors.

    Responsibilities start at 1/L scaled by a multiplicative jitter of
    amplitude ``jitter`` drawn from ``rng``, then renormalized; with
    ``jitter=0`` the rows are exactly uniform.
    """
    n, n_classes = x.n_respondents, lattice.n_classes
    weights = np.full((n, n_classes), 1.0 / n_classes)
    if jitter:
        weights = weights * (1.0 + jitter * rng.random((n, n_classes)))
        weights /= weights.sum(axis=1, keepdims=True)
    n_items = x.n_items
    return VariationalState(
        resp=weights,
        slip_a=np.full(n_items, priors.slip[0]),
        slip_b=np.full(n_items, priors.slip[1]),
        guess_a=np.full(n_items, priors.guess[0]),
        guess_b=np.full(n_items, priors.guess[1]),
        class_conc=priors.class_concentration(n_classes),
        elbo_trace=np.empty(0),
        converged=True,
    )


def expected_logs(state: VariationalState):
    """Digamma expectations of all log-parameters under the current posteriors."""
    elog_s, elog_1ms = beta_expect_logs(state.slip_a, state.slip_b)
    elog_g, elog_1mg = beta_expect_logs(state.guess_a, state.guess_b)
    elog_pi = dirichlet_expect_log(state.class_conc)
    return elog_pi, elog_s, elog_1ms, elog_g, elog_1mg


def responsibility_logits(x: np.ndarray, eta: np.ndarray, elog_pi, elog_s,
                          elog_1ms, elog_g, elog_1mg) -> np.ndarray:
    """Unnormalized log-responsibilities for explicit log-parameter values.

    Exposed separately so exactness against the plain Bayes-rule posterior
    can be checked with point-mass parameters.
    """
    x = np.asarray(x, dtype=np.float64)
    eta = np.asarray(eta, dtype=np.float64)
    return data_logit_matrix(x, eta, elog_s, elog_1ms, elog_g, elog_1mg) + elog_pi


def update_responsibilities(state: VariationalState, x: ResponseMatrix,
                            eta: np.ndarray) -> VariationalState:
    """Mean-field update of the class responsibilities."""
    logits = responsibility_logits(x.entries, eta, *expected_logs(state))
    resp = normalize_rows(logits)
    if not np.isfinite(resp).all():
        raise FloatingPointError("non-finite responsibilities")
    return replace(state, resp=resp)


def update_item_posteriors(state: VariationalState, x: ResponseMatrix,
                           eta: np.ndarray, priors: VBPriors) -> VariationalState:
    """Mean-field update of the per-item slip/guess Beta posteriors."""
    xf = x.entries.astype(np.float64)
    rbar = state.resp @ np.asarray(eta, dtype=np.float64)
    return replace(
        state,
        slip_a=priors.slip[0] + (rbar * (1.0 - xf)).sum(axis=0),
        slip_b=priors.slip[1] + (rbar * xf).sum(axis=0),
        guess_a=priors.guess[0] + ((1.0 - rbar) * xf).sum(axis=0),
        guess_b=priors.guess[1] + ((1.0 - rbar) * (1.0 - xf)).sum(axis=0),
    )


def update_class_weights(state: VariationalState, priors: VBPriors) -> VariationalState:
    """Mean-field update of the Dirichlet class-weight posterior."""
    conc0 = priors.class_concentration(state.n_classes)
    return replace(state, class_conc=conc0 + state.resp.sum(axis=0))


def compute_elbo(state: VariationalState, x: ResponseMatrix, eta: np.ndarray,
                 priors: VBPriors) -> float:
    """Evidence lower bound of the current state."""
    xf = x.entries.astype(np.float64)
    etaf = np.asarray(eta, dtype=np.float64)
    elog_pi, elog_s, elog_1ms, elog_g, elog_1mg = expected_logs(state)
    data_logits = data_logit_matrix(xf, etaf, elog_s, elog_1ms, elog_g, elog_1mg)
    conc0 = priors.class_concentration(state.n_classes)
    elbo = (
        float((state.resp * data_logits).sum())
        + float((state.resp * elog_pi).sum())
        - float(xlogy(state.resp, state.resp).sum())
        - float(beta_kl(state.slip_a, state.slip_b, *priors.slip).sum())
        - float(beta_kl(state.guess_a, state.guess_b, *priors.guess).sum())
        - float(dirichlet_kl(state.class_conc, conc0))
    )
    if not np.isfinite(elbo):
        raise FloatingPointError("non-finite ELBO")
    return elbo


def fit(x: ResponseMatrix, q: QMatrix, priors: VBPriors | None = None,
        rng: np.random.Generator | None = None, tol: float = DEFAULT_TOL,
        max_sweeps: int = DEFAULT_MAX_SWEEPS,
        jitter: float = DEFAULT_JITTER) -> tuple[VariationalState, float]:
    """Fit the variational posterior for a fixed Q-matrix.

    Sweeps responsibilities, item posteriors and class weights until the
    relative ELBO change falls below ``tol`` or ``max_sweeps`` is
    reached (the latter is recorded on the state, not an error). Returns
    the final state together with the last ELBO, the maximized lower
    bound on the log marginal likelihood of ``x`` given ``q``.
    """
    if x.n_items != q.n_items:
        raise ValueError(
            f"response matrix has {x.n_items} items but Q-matrix has {q.n_items}"
        )
    if max_sweeps < 1:
        raise ValueError("max_sweeps must be at least 1")
    priors = priors or VBPriors()
    rng = rng if rng is not None else np.random.default_rng()
    lattice = enumerate_profiles(q.n_attributes)
    eta = ideal_response_matrix(q, lattice)

    state0 = init_state(x, lattice, priors, rng, jitter=jitter)
    resp, slip_a, slip_b, guess_a, guess_b, conc, trace, converged = vb_sweep_loop(
        x.entries, eta, priors.slip[0], priors.slip[1], priors.guess[0],
        priors.guess[1], priors.class_concentration(lattice.n_classes),
        state0.resp, tol, max_sweeps,
    )
    if not np.isfinite(trace).all():
        raise FloatingPointError("non-finite ELBO during fit")
    state = VariationalState(
        resp=resp, slip_a=slip_a, slip_b=slip_b, guess_a=guess_a,
        guess_b=guess_b, class_conc=conc, elbo_trace=trace, converged=converged,
    )
    return state, float(trace[-1])


def point_estimates(state: VariationalState, lattice: ProfileLattice) -> PointEstimates:
    """EAP slip/guess estimates and MAP profiles (ties to the lowest class)."""
    slip = clamp_probability(state.slip_a / (state.slip_a + state.slip_b))
    guess = clamp_probability(state.guess_a / (state.guess_a + state.guess_b))
    map_class = np.argmax(state.resp, axis=1)
    return PointEstimates(
        item=ItemParams(slip=slip, guess=guess),
        profiles=lattice.profiles[map_class],
    )
