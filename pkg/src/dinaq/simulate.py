"""Synthetic DINA datasets with correlated attributes.

Attributes come from a Gaussian copula: latent normals with a common
pairwise correlation are thresholded at per-attribute quantiles, so
attribute k is mastered with marginal probability 1 - k/(K+1). Responses
follow the DINA response function via inverse-transform sampling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .model import QMatrix, ResponseMatrix, ideal_table


def _parse_bits(block: str) -> np.ndarray:
    return np.array([[int(c) for c in line] for line in block.split()], dtype=np.uint8)


# Benchmark matrices used by the recovery experiments. The first is
# complete (every single-attribute row present); the second is
# incomplete and complex; the third stacks the 8x8 identity twice on top
# of 22 two-attribute and 22 three-attribute rows.
_BUILTIN_Q = {
    "table2-k4": _parse_bits("""
        1000 0100 0010 0001
        1100 1010 1001 0110 0101 0011
        1110 1101 1011 0111 1111
    """),
    "table2-k5": _parse_bits("""
        01010 01001 00110 00101 00011
        11100 11010 11001 10110 10101 10011
        01110 01101 01011 00111
    """),
    "appendix-a1": _parse_bits("""
        10000000 01000000 00100000 00010000 00001000 00000100 00000010 00000001
        10000000 01000000 00100000 00010000 00001000 00000100 00000010 00000001
        00100010 00100001 01000001 00110000 10000010 10100000 00000011 00010100
        01010000 01100000 00000110 00010010 01000010 00100100 01001000 00010001
        10000001 01000100 00011000 00000101 10010000 00101000 01001001 11000001
        00101010 00011100 10100010 10011000 10010100 01000011 11000010 01100001
        00001011 01100010 00010011 01001100 01001010 00001101 10001001 00101100
        10000011 00011010 10000101 01100100
    """),
}


def builtin_true_q(name: str) -> QMatrix:
    """Return a built-in benchmark Q-matrix by identifier."""
    try:
        entries = _BUILTIN_Q[name]
    except KeyError:
        known = ", ".join(sorted(_BUILTIN_Q))
        raise ValueError(f"unknown built-in Q-matrix {name!r} (known: {known})") from None
    return QMatrix(entries)


def builtin_names() -> list[str]:
    return sorted(_BUILTIN_Q)


@dataclass(frozen=True)
class SimConfig:
    """Settings for one synthetic dataset.

    ``rho`` is the common correlation of the latent attribute normals
    (the binary attributes themselves are attenuated). ``slip`` and
    ``guess`` may be scalars or per-item vectors.
    """

    true_q: QMatrix
    n_respondents: int
    rho: float = 0.1
    slip: float | np.ndarray = 0.2
    guess: float | np.ndarray = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.n_respondents < 1:
            raise ValueError("n_respondents must be positive")
        if not 0.0 <= self.rho < 1.0:
            raise ValueError(f"rho={self.rho} outside [0, 1)")
        for name, value in (("slip", self.slip), ("guess", self.guess)):
            arr = np.atleast_1d(np.asarray(value, dtype=np.float64))
            if arr.ndim != 1 or arr.shape[0] not in (1, self.true_q.n_items):
                raise ValueError(f"{name} must be scalar or length-J vector")
            if not ((arr > 0) & (arr < 1)).all():
                raise ValueError(f"{name} probabilities must lie strictly in (0, 1)")


@dataclass(frozen=True)
class SimDataset:
    """Responses plus the ground truth that generated them."""

    responses: ResponseMatrix
    attributes: np.ndarray
    latent: np.ndarray


def mastery_thresholds(n_attributes: int) -> np.ndarray:
    """Latent-normal cutoffs giving attribute k marginal rate 1 - k/(K+1)."""
    k = np.arange(1, n_attributes + 1)
    return ndtri(k / (n_attributes + 1))


def gen_attributes(n: int, n_attributes: int, rho: float,
                   rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Draw correlated binary attributes; returns (attributes, latent).

    Latent rows are standard normals transformed by the upper-triangular
    Cholesky factor of the equicorrelation matrix, then thresholded at
    the per-attribute cutoffs.
    """
    sigma = np.full((n_attributes, n_attributes), float(rho))
    np.fill_diagonal(sigma, 1.0)
    try:
        chol_upper = np.linalg.cholesky(sigma).T
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"correlation matrix with rho={rho} is not positive definite") from exc
    normals = rng.standard_normal((n, n_attributes))
    latent = normals @ chol_upper
    alpha = (latent >= mastery_thresholds(n_attributes)).astype(np.uint8)
    return alpha, latent


def gen_responses(attributes: np.ndarray, true_q: QMatrix, slip, guess,
                  rng: np.random.Generator) -> ResponseMatrix:
    """Inverse-transform Bernoulli sampling of the response matrix."""
    eta = ideal_table(attributes, true_q.entries)
    slip = np.broadcast_to(np.asarray(slip, dtype=np.float64), (true_q.n_items,))
    guess = np.broadcast_to(np.asarray(guess, dtype=np.float64), (true_q.n_items,))
    p_correct = np.where(eta == 1, 1.0 - slip, guess)
    cutoffs = rng.random(p_correct.shape)
    return ResponseMatrix((p_correct >= cutoffs).astype(np.uint8))


def generate(config: SimConfig) -> SimDataset:
    """Generate one dataset.

    Stream splitting: the seed spawns one child stream per random matrix
    drawn, in order (latent attribute normals, response cutoffs), so a
    dataset is reproducible from its seed alone.
    """
    attr_seed, resp_seed = np.random.SeedSequence(config.seed).spawn(2)
    attributes, latent = gen_attributes(
        config.n_respondents, config.true_q.n_attributes, config.rho,
        np.random.default_rng(attr_seed))
    responses = gen_responses(attributes, config.true_q, config.slip,
                              config.guess, np.random.default_rng(resp_seed))
    return SimDataset(responses=responses, attributes=attributes, latent=latent)
