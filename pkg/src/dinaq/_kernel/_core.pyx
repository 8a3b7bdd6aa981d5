# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twin of ``_kernel.pure.vb_sweep_loop``.

Same update order and stopping rule as the pure backend; the sweeps run
without the GIL, with the two inner matrix products dispatched to BLAS.
"""

import numpy as np

from libc.math cimport exp, fabs, log
from scipy.linalg.cython_blas cimport dgemm
from scipy.special.cython_special cimport gammaln as c_gammaln, psi as c_psi

BACKEND_NAME = "compiled"


cdef inline void _matmul_nt(double[:, ::1] a, double[:, ::1] b,
                            double[:, ::1] out) noexcept nogil:
    # out (n x m) = a (n x k) @ b.T, with b (m x k); all row-major.
    cdef int m = <int> b.shape[0]
    cdef int n = <int> a.shape[0]
    cdef int k = <int> a.shape[1]
    cdef double one = 1.0, zero = 0.0
    if m == 0 or n == 0 or k == 0:
        return
    dgemm("T", "N", &m, &n, &k, &one, &b[0, 0], &k, &a[0, 0], &k,
          &zero, &out[0, 0], &m)


cdef inline void _matmul_nn(double[:, ::1] a, double[:, ::1] b,
                            double[:, ::1] out) noexcept nogil:
    # out (n x m) = a (n x k) @ b (k x m); all row-major.
    cdef int m = <int> b.shape[1]
    cdef int n = <int> a.shape[0]
    cdef int k = <int> a.shape[1]
    cdef double one = 1.0, zero = 0.0
    if m == 0 or n == 0 or k == 0:
        return
    dgemm("N", "N", &m, &n, &k, &one, &b[0, 0], &m, &a[0, 0], &k,
          &zero, &out[0, 0], &m)


cdef inline void _beta_expectations(double[::1] a, double[::1] b,
                                    double[::1] elog, double[::1] elog1m) noexcept nogil:
    cdef Py_ssize_t j
    cdef double norm
    for j in range(a.shape[0]):
        norm = c_psi(a[j] + b[j])
        elog[j] = c_psi(a[j]) - norm
        elog1m[j] = c_psi(b[j]) - norm


cdef inline void _dirichlet_expectation(double[::1] conc, double[::1] out) noexcept nogil:
    cdef Py_ssize_t l
    cdef double total = 0.0
    for l in range(conc.shape[0]):
        total += conc[l]
    total = c_psi(total)
    for l in range(conc.shape[0]):
        out[l] = c_psi(conc[l]) - total


cdef inline void _build_coefficients(double[:, ::1] eta,
                                     double[::1] elog_s, double[::1] elog_1ms,
                                     double[::1] elog_g, double[::1] elog_1mg,
                                     double[::1] elog_pi,
                                     double[:, ::1] w, double[::1] shift) noexcept nogil:
    # w = on - off and shift[l] = sum_j off[l, j] + elog_pi[l], where
    # on/off are the expected log-Bernoulli coefficients for x = 1 / 0.
    cdef Py_ssize_t l, j
    cdef double e, on, off, acc
    for l in range(eta.shape[0]):
        acc = 0.0
        for j in range(eta.shape[1]):
            e = eta[l, j]
            on = e * elog_1ms[j] + (1.0 - e) * elog_g[j]
            off = e * elog_s[j] + (1.0 - e) * elog_1mg[j]
            w[l, j] = on - off
            acc += off
        shift[l] = acc + elog_pi[l]


cdef inline double _beta_kl_sum(double[::1] a, double[::1] b,
                                double a0, double b0) noexcept nogil:
    cdef Py_ssize_t j
    cdef double acc = 0.0
    cdef double norm0 = c_gammaln(a0 + b0) - c_gammaln(a0) - c_gammaln(b0)
    for j in range(a.shape[0]):
        acc += (c_gammaln(a[j] + b[j]) - c_gammaln(a[j]) - c_gammaln(b[j])
                - norm0
                + (a[j] - a0) * c_psi(a[j])
                + (b[j] - b0) * c_psi(b[j])
                - (a[j] + b[j] - a0 - b0) * c_psi(a[j] + b[j]))
    return acc


cdef inline double _dirichlet_kl(double[::1] conc, double[::1] conc0) noexcept nogil:
    cdef Py_ssize_t l
    cdef double total = 0.0, total0 = 0.0, acc, psi_total
    for l in range(conc.shape[0]):
        total += conc[l]
        total0 += conc0[l]
    acc = c_gammaln(total) - c_gammaln(total0)
    psi_total = c_psi(total)
    for l in range(conc.shape[0]):
        acc -= c_gammaln(conc[l]) - c_gammaln(conc0[l])
        acc += (conc[l] - conc0[l]) * (c_psi(conc[l]) - psi_total)
    return acc


def vb_sweep_loop(x_in, eta_in, double slip_a0, double slip_b0,
                  double guess_a0, double guess_b0, class_conc0_in,
                  resp0, double tol, int max_sweeps):
    """Coordinate-ascent sweeps until the ELBO stabilizes.

    Mirrors the pure backend: per sweep the responsibilities are
    recomputed, the ELBO is taken at that point via the log-sum-exp
    identity, and the item/class posteriors are refreshed; the loop
    stops when the absolute ELBO change drops below
    ``tol * (1 + |ELBO|)``.
    """
    x_arr = np.ascontiguousarray(x_in, dtype=np.float64)
    eta_arr = np.ascontiguousarray(eta_in, dtype=np.float64)
    conc0_arr = np.ascontiguousarray(class_conc0_in, dtype=np.float64)
    resp_arr = np.array(resp0, dtype=np.float64, order="C", copy=True)

    cdef Py_ssize_t n = x_arr.shape[0]
    cdef Py_ssize_t nj = x_arr.shape[1]
    cdef Py_ssize_t nl = eta_arr.shape[0]

    slip_a_arr = np.empty(nj)
    slip_b_arr = np.empty(nj)
    guess_a_arr = np.empty(nj)
    guess_b_arr = np.empty(nj)
    conc_arr = np.empty(nl)
    trace_arr = np.empty(max_sweeps if max_sweeps > 0 else 1)

    logits_arr = np.empty((n, nl))
    rbar_arr = np.empty((n, nj))
    w_arr = np.empty((nl, nj))

    cdef double[:, ::1] X = x_arr
    cdef double[:, ::1] ETA = eta_arr
    cdef double[:, ::1] RESP = resp_arr
    cdef double[:, ::1] LG = logits_arr
    cdef double[:, ::1] RBAR = rbar_arr
    cdef double[:, ::1] W = w_arr
    cdef double[::1] CONC0 = conc0_arr
    cdef double[::1] CONC = conc_arr
    cdef double[::1] SA = slip_a_arr
    cdef double[::1] SB = slip_b_arr
    cdef double[::1] GA = guess_a_arr
    cdef double[::1] GB = guess_b_arr
    cdef double[::1] TRACE = trace_arr

    cdef double[::1] elog_s = np.empty(nj)
    cdef double[::1] elog_1ms = np.empty(nj)
    cdef double[::1] elog_g = np.empty(nj)
    cdef double[::1] elog_1mg = np.empty(nj)
    cdef double[::1] elog_pi = np.empty(nl)
    cdef double[::1] shift = np.empty(nl)
    cdef double[::1] n_correct = np.empty(nj)
    cdef double[::1] rbar_total = np.empty(nj)
    cdef double[::1] rbar_correct = np.empty(nj)

    cdef Py_ssize_t i, j, l, sweep
    cdef Py_ssize_t sweeps_done = 0
    cdef int converged = 0, have_prev = 0
    cdef double prev_elbo = 0.0, elbo, lse_total, row_max, row_sum, v, r

    with nogil:
        for j in range(nj):
            n_correct[j] = 0.0
            SA[j] = slip_a0
            SB[j] = slip_b0
            GA[j] = guess_a0
            GB[j] = guess_b0
        for i in range(n):
            for j in range(nj):
                n_correct[j] += X[i, j]
        for l in range(nl):
            CONC[l] = CONC0[l]

        _beta_expectations(SA, SB, elog_s, elog_1ms)
        _beta_expectations(GA, GB, elog_g, elog_1mg)
        _dirichlet_expectation(CONC, elog_pi)
        _build_coefficients(ETA, elog_s, elog_1ms, elog_g, elog_1mg, elog_pi, W, shift)
        _matmul_nt(X, W, LG)

        for sweep in range(max_sweeps):
            # responsibilities via row-wise log-sum-exp; the ELBO's data,
            # mixing and entropy terms collapse to the row LSE totals.
            # exp() is skipped where it would vanish below double rounding.
            lse_total = 0.0
            for i in range(n):
                row_max = LG[i, 0] + shift[0]
                for l in range(1, nl):
                    v = LG[i, l] + shift[l]
                    if v > row_max:
                        row_max = v
                row_sum = 0.0
                for l in range(nl):
                    v = LG[i, l] + shift[l] - row_max
                    if v > -45.0:
                        v = exp(v)
                        RESP[i, l] = v
                        row_sum += v
                    else:
                        RESP[i, l] = 0.0
                for l in range(nl):
                    RESP[i, l] /= row_sum
                lse_total += row_max + log(row_sum)

            elbo = lse_total
            elbo -= _beta_kl_sum(SA, SB, slip_a0, slip_b0)
            elbo -= _beta_kl_sum(GA, GB, guess_a0, guess_b0)
            elbo -= _dirichlet_kl(CONC, CONC0)

            TRACE[sweep] = elbo
            sweeps_done = sweep + 1
            if have_prev and fabs(elbo - prev_elbo) < tol * (1.0 + fabs(elbo)):
                converged = 1
                break
            prev_elbo = elbo
            have_prev = 1

            # per-item Beta posteriors from the expected ideal responses
            _matmul_nn(RESP, ETA, RBAR)
            for j in range(nj):
                rbar_total[j] = 0.0
                rbar_correct[j] = 0.0
            for i in range(n):
                for j in range(nj):
                    r = RBAR[i, j]
                    rbar_total[j] += r
                    rbar_correct[j] += X[i, j] * r
            for j in range(nj):
                SA[j] = slip_a0 + rbar_total[j] - rbar_correct[j]
                SB[j] = slip_b0 + rbar_correct[j]
                GA[j] = guess_a0 + n_correct[j] - rbar_correct[j]
                GB[j] = guess_b0 + (n - n_correct[j]) - (rbar_total[j] - rbar_correct[j])

            # Dirichlet class weights
            for l in range(nl):
                CONC[l] = CONC0[l]
            for i in range(n):
                for l in range(nl):
                    CONC[l] += RESP[i, l]

            # refreshed logits feed the next sweep's responsibilities
            _beta_expectations(SA, SB, elog_s, elog_1ms)
            _beta_expectations(GA, GB, elog_g, elog_1mg)
            _dirichlet_expectation(CONC, elog_pi)
            _build_coefficients(ETA, elog_s, elog_1ms, elog_g, elog_1mg, elog_pi, W, shift)
            _matmul_nt(X, W, LG)

    return (resp_arr, slip_a_arr, slip_b_arr, guess_a_arr, guess_b_arr,
            conc_arr, trace_arr[:sweeps_done].copy(), bool(converged))
