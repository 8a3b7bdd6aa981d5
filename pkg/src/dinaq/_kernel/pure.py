"""Pure numpy backend for the variational sweep loop.

This is the reference implementation of the hot kernel: one call runs
the full coordinate-ascent loop for a single fit. A Cython twin lives in
``_core.pyx``; both must implement the identical update order so that a
fit is reproducible on either backend.
"""

from __future__ import annotations

import numpy as np
from scipy.special import digamma, gammaln

BACKEND_NAME = "pure"


def beta_expect_logs(a, b):
    """E[log x] and E[log(1-x)] under Beta(a, b)."""
    norm = digamma(a + b)
    return digamma(a) - norm, digamma(b) - norm


def dirichlet_expect_log(conc):
    """E[log pi] under Dirichlet(conc)."""
    return digamma(conc) - digamma(conc.sum())


def beta_kl(a, b, a0, b0):
    """KL(Beta(a,b) || Beta(a0,b0)), elementwise."""
    return (
        gammaln(a + b) - gammaln(a) - gammaln(b)
        - (gammaln(a0 + b0) - gammaln(a0) - gammaln(b0))
        + (a - a0) * digamma(a)
        + (b - b0) * digamma(b)
        - (a + b - a0 - b0) * digamma(a + b)
    )


def dirichlet_kl(conc, conc0):
    """KL(Dirichlet(conc) || Dirichlet(conc0))."""
    total = conc.sum()
    return (
        gammaln(total) - gammaln(conc0.sum())
        - (gammaln(conc) - gammaln(conc0)).sum()
        + ((conc - conc0) * (digamma(conc) - digamma(total))).sum()
    )


def data_logit_matrix(x, eta, elog_s, elog_1ms, elog_g, elog_1mg):
    """Per-(respondent, class) log-likelihood contributions.

    Entry (i, l) is the sum over items of the expected Bernoulli
    log-probability of response x_ij under class l.
    """
    on = eta * elog_1ms + (1.0 - eta) * elog_g     # coefficient when x = 1
    off = eta * elog_s + (1.0 - eta) * elog_1mg    # coefficient when x = 0
    return x @ (on - off).T + off.sum(axis=1)


def normalize_rows(logits):
    """Log-sum-exp normalization of row logits into responsibilities."""
    if logits.shape[0] == 0:
        return logits.copy()
    shifted = logits - logits.max(axis=1, keepdims=True)
    np.exp(shifted, out=shifted)
    shifted /= shifted.sum(axis=1, keepdims=True)
    return shifted


def vb_sweep_loop(x, eta, slip_a0, slip_b0, guess_a0, guess_b0,
                  class_conc0, resp0, tol, max_sweeps):
    """Run coordinate-ascent sweeps until the ELBO stabilizes.

    One sweep updates the responsibilities, evaluates the ELBO, and then
    refreshes the item and class posteriors. Because the responsibilities
    are an exact softmax of the logits, the ELBO at that point collapses
    to sum(logsumexp) minus the prior KL terms, which avoids an extra
    pass of logs per sweep; the trace is still non-decreasing and the
    loop stops when the absolute change drops below ``tol * (1 + |ELBO|)``.

    Returns ``(resp, slip_a, slip_b, guess_a, guess_b, class_conc,
    elbo_trace, converged)``.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    eta = np.ascontiguousarray(eta, dtype=np.float64)
    class_conc0 = np.ascontiguousarray(class_conc0, dtype=np.float64)
    n, n_items = x.shape

    slip_a = np.full(n_items, slip_a0)
    slip_b = np.full(n_items, slip_b0)
    guess_a = np.full(n_items, guess_a0)
    guess_b = np.full(n_items, guess_b0)
    class_conc = class_conc0.copy()
    resp = np.ascontiguousarray(resp0, dtype=np.float64)

    n_correct = x.sum(axis=0)

    def logit_matrix():
        elog_s, elog_1ms = beta_expect_logs(slip_a, slip_b)
        elog_g, elog_1mg = beta_expect_logs(guess_a, guess_b)
        elog_pi = dirichlet_expect_log(class_conc)
        return data_logit_matrix(x, eta, elog_s, elog_1ms, elog_g, elog_1mg) + elog_pi

    logits = logit_matrix()
    trace = []
    converged = False
    prev_elbo = None

    for _ in range(max_sweeps):
        if n:
            top = logits.max(axis=1, keepdims=True)
            resp = np.exp(logits - top)
            row_sums = resp.sum(axis=1, keepdims=True)
            resp /= row_sums
            lse_total = float((top + np.log(row_sums)).sum())
        else:
            lse_total = 0.0

        elbo = (
            lse_total
            - float(beta_kl(slip_a, slip_b, slip_a0, slip_b0).sum())
            - float(beta_kl(guess_a, guess_b, guess_a0, guess_b0).sum())
            - float(dirichlet_kl(class_conc, class_conc0))
        )
        trace.append(elbo)
        if prev_elbo is not None and abs(elbo - prev_elbo) < tol * (1.0 + abs(elbo)):
            converged = True
            break
        prev_elbo = elbo

        rbar = resp @ eta
        rbar_total = rbar.sum(axis=0)
        rbar_correct = np.einsum("ij,ij->j", x, rbar)
        slip_a = slip_a0 + rbar_total - rbar_correct
        slip_b = slip_b0 + rbar_correct
        guess_a = guess_a0 + n_correct - rbar_correct
        guess_b = guess_b0 + (n - n_correct) - (rbar_total - rbar_correct)
        class_conc = class_conc0 + resp.sum(axis=0)

        logits = logit_matrix()

    return (resp, slip_a, slip_b, guess_a, guess_b, class_conc,
            np.asarray(trace), converged)
