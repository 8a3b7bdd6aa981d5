"""Backend agreement: compiled kernel vs pure numpy vs the public ops."""

import numpy as np
import pytest

import dinaq
from dinaq._kernel import pure
from dinaq.model import QMatrix, ResponseMatrix, enumerate_profiles, ideal_response_matrix
from dinaq.vb import (
    VBPriors,
    compute_elbo,
    fit,
    init_state,
    update_class_weights,
    update_item_posteriors,
    update_responsibilities,
)

try:
    from dinaq._kernel import _core as compiled
except ImportError:
    compiled = None

needs_compiled = pytest.mark.skipif(compiled is None,
                                    reason="compiled kernel not built")


def make_args(seed, n=30, n_items=5, k=2, tol=1e-9, max_sweeps=300):
    rng = np.random.default_rng(seed)
    x = rng.integers(0, 2, (n, n_items)).astype(np.float64)
    q = rng.integers(0, 2, (n_items, k)).astype(np.uint8)
    q[np.arange(n_items), rng.integers(0, k, n_items)] = 1
    lattice = enumerate_profiles(k)
    eta = ideal_response_matrix(QMatrix(q), lattice).astype(np.float64)
    resp0 = np.full((n, lattice.n_classes), 1.0 / lattice.n_classes)
    conc0 = np.ones(lattice.n_classes)
    return (x, eta, 1.0, 1.0, 1.0, 1.0, conc0, resp0, tol, max_sweeps)


@needs_compiled
class TestBackendAgreement:
    @pytest.mark.parametrize("seed", range(8))
    def test_matching_traces_and_states(self, seed):
        args = make_args(seed)
        r_p = pure.vb_sweep_loop(*args)
        r_c = compiled.vb_sweep_loop(*args)
        assert len(r_p[6]) == len(r_c[6])          # same sweep counts
        assert r_p[7] == r_c[7]                    # same convergence verdict
        np.testing.assert_allclose(r_c[6], r_p[6], rtol=1e-9)
        np.testing.assert_allclose(r_c[0], r_p[0], rtol=1e-7, atol=1e-12)
        for a, b in zip(r_c[1:6], r_p[1:6]):
            np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-9)

    def test_larger_lattice(self):
        args = make_args(99, n=60, n_items=12, k=4)
        r_p = pure.vb_sweep_loop(*args)
        r_c = compiled.vb_sweep_loop(*args)
        assert len(r_p[6]) == len(r_c[6])
        np.testing.assert_allclose(r_c[6], r_p[6], rtol=1e-9)

    def test_empty_data(self):
        args = make_args(1, n=0)
        r_p = pure.vb_sweep_loop(*args)
        r_c = compiled.vb_sweep_loop(*args)
        assert r_p[6][-1] == pytest.approx(0.0, abs=1e-12)
        assert r_c[6][-1] == pytest.approx(0.0, abs=1e-12)


class TestKernelMatchesPublicOps:
    """The sweep loop must equal applying the one-step ops in order."""

    def test_fit_equals_manual_sweeps(self):
        rng = np.random.default_rng(21)
        x = ResponseMatrix(rng.integers(0, 2, (25, 4)).astype(np.uint8))
        q = QMatrix([[1, 0], [0, 1], [1, 1], [0, 1]])
        priors = VBPriors()
        lattice = enumerate_profiles(2)
        eta = ideal_response_matrix(q, lattice)
        sweeps = 7

        state = init_state(x, lattice, priors, np.random.default_rng(0), jitter=0.0)
        manual_trace = []
        for _ in range(sweeps):
            state = update_responsibilities(state, x, eta)
            manual_trace.append(compute_elbo(state, x, eta, priors))
            state = update_item_posteriors(state, x, eta, priors)
            state = update_class_weights(state, priors)

        fitted, _ = fit(x, q, priors, np.random.default_rng(0), tol=0.0,
                        max_sweeps=sweeps, jitter=0.0)
        assert not fitted.converged
        np.testing.assert_allclose(fitted.elbo_trace, manual_trace,
                                   rtol=1e-9, atol=1e-9)
        np.testing.assert_allclose(fitted.resp, state.resp, rtol=1e-7, atol=1e-12)
        np.testing.assert_allclose(fitted.slip_a, state.slip_a, rtol=1e-9)
        np.testing.assert_allclose(fitted.guess_b, state.guess_b, rtol=1e-9)
        np.testing.assert_allclose(fitted.class_conc, state.class_conc, rtol=1e-9)


def test_backend_name_exposed():
    assert dinaq.kernel_backend in ("compiled", "pure")
