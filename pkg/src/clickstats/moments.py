"""Nonclassicality certification from click statistics via moment matrices.

Normally ordered moments of the no-click operator are linear in the
click distribution, so they can be estimated directly from observed
frequencies.  Arranged into a Hankel matrix they must be positive
semidefinite for every classical state; a negative minimal eigenvalue
with enough statistical significance certifies nonclassicality.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .states import ClickDistribution
from .sampling import ClickHistogram

__all__ = [
    "SIGNIFICANCE_THRESHOLD",
    "MomentVector",
    "MomentsTestResult",
    "moment_weights",
    "estimate_moments",
    "moment_matrix",
    "min_eigenvalue",
    "moments_test",
]

#: a negative eigenvalue this many bootstrap deviations below zero is a flag
SIGNIFICANCE_THRESHOLD = 3.0


@dataclass(frozen=True)
class MomentVector:
    """Estimated no-click moments mu_0, ..., mu_order."""

    mu: np.ndarray
    order: int

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        if mu.shape != (self.order + 1,):
            raise ValueError(f"expected {self.order + 1} moments, got shape {mu.shape}")
        mu.setflags(write=False)
        object.__setattr__(self, "mu", mu)


@dataclass(frozen=True)
class MomentsTestResult:
    """Outcome of the bootstrapped minimal-eigenvalue test.

    significance is -min_eigenvalue / error; with a degenerate zero
    error it is +inf for a negative eigenvalue and 0 otherwise.
    """

    min_eigenvalue: float
    error: float
    significance: float
    order: int
    bootstrap_replicates: int

    def flagged(self, threshold=SIGNIFICANCE_THRESHOLD):
        """Whether the state is certified nonclassical at this threshold."""
        return self.significance > threshold


def _check_order(order, n_detectors):
    if not isinstance(order, int) or order < 2 or order % 2 != 0:
        raise ValueError(f"order must be an even integer >= 2, got {order}")
    if order > n_detectors:
        raise ValueError(f"order {order} exceeds the detector count {n_detectors}")
    if n_detectors % 2 != 0:
        raise ValueError(
            f"the moment test needs an even number of detectors, got {n_detectors}"
        )


@lru_cache(maxsize=32)
def _weight_matrix(n_detectors, order):
    W = np.empty((order + 1, n_detectors + 1))
    for ell in range(order + 1):
        denom = math.comb(n_detectors, ell)
        for k in range(n_detectors + 1):
            W[ell, k] = math.comb(n_detectors - k, ell) / denom
    W.setflags(write=False)
    return W


def moment_weights(config, order):
    """Estimator weights W[l, k] = C(N-k, l) / C(N, l).

    mu_l is the weighted sum over the click distribution, so the same
    matrix maps exact probabilities and observed frequencies alike.
    """
    _check_order(order, config.n_detectors)
    return _weight_matrix(config.n_detectors, order)


def estimate_moments(data, order=2):
    """No-click moments of a distribution or histogram.

    Parameters
    ----------
    data : ClickDistribution or ClickHistogram
    order : int
        Highest moment K; even, 2 <= K <= N.

    Returns
    -------
    MomentVector
        mu_0 is identically one (the weight row l = 0 is all ones), so it
        is pinned exactly rather than recomputed through float round-off.
    """
    if isinstance(data, ClickHistogram):
        values, config = data.freqs, data.config
    elif isinstance(data, ClickDistribution):
        values, config = data.probs, data.config
    else:
        raise TypeError(
            f"data must be a ClickDistribution or ClickHistogram, got {type(data).__name__}"
        )
    W = moment_weights(config, order)
    mu = W @ values
    mu[0] = 1.0
    return MomentVector(mu=mu, order=order)


def moment_matrix(moments):
    """Hankel matrix M[s, t] = mu_{s+t} of side order/2 + 1."""
    if not isinstance(moments, MomentVector):
        raise TypeError(f"moments must be a MomentVector, got {type(moments).__name__}")
    side = moments.order // 2 + 1
    idx = np.add.outer(np.arange(side), np.arange(side))
    return moments.mu[idx]


def _min_eig_2x2(a, b, c):
    """Smallest eigenvalue of [[a, b], [b, c]] in closed form, vectorized."""
    tr = a + c
    det = a * c - b * b
    disc = np.sqrt(np.maximum(tr * tr - 4.0 * det, 0.0))
    return 0.5 * (tr - disc)


def min_eigenvalue(matrix):
    """Smallest eigenvalue of a symmetric matrix.

    Uses the closed form (tr - sqrt(tr^2 - 4 det)) / 2 for the 2x2 case
    and a symmetric eigensolver otherwise.
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {matrix.shape}")
    if not np.allclose(matrix, matrix.T, rtol=1e-10, atol=1e-12):
        raise ValueError("matrix is not symmetric")
    if matrix.shape == (2, 2):
        return float(_min_eig_2x2(matrix[0, 0], matrix[0, 1], matrix[1, 1]))
    return float(np.linalg.eigvalsh(matrix).min())


def moments_test(hist, order=2, replicates=1000, *, rng):
    """Bootstrapped significance of the minimal moment-matrix eigenvalue.

    Parameters
    ----------
    hist : ClickHistogram
        Observed click frequencies from m >= 2 shots.
    order : int
        Highest moment K entering the Hankel matrix.
    replicates : int
        Number B >= 100 of bootstrap resamples of the m shots.
    rng : numpy.random.Generator
        Dedicated stream for the resampling, e.g. from derive_stream.

    Returns
    -------
    MomentsTestResult

    Notes
    -----
    Each replicate redraws the m shots from the observed frequencies
    (a multinomial resample) and recomputes moments, matrix and minimal
    eigenvalue end-to-end; the error is the ddof=1 standard deviation
    over replicates.
    """
    if not isinstance(hist, ClickHistogram):
        raise TypeError(f"hist must be a ClickHistogram, got {type(hist).__name__}")
    if hist.sample_size < 2:
        raise ValueError(f"the bootstrap needs at least 2 shots, got {hist.sample_size}")
    if not isinstance(replicates, int) or replicates < 100:
        raise ValueError(f"replicates must be an integer >= 100, got {replicates}")
    if not isinstance(rng, np.random.Generator):
        raise TypeError("rng must be a numpy.random.Generator")

    x_bar = min_eigenvalue(moment_matrix(estimate_moments(hist, order)))

    pvals = hist.counts / hist.sample_size
    pvals = pvals / pvals.sum()  # guard the multinomial sum check against round-off
    counts = rng.multinomial(hist.sample_size, pvals, size=replicates)
    freqs = counts / hist.sample_size
    W = moment_weights(hist.config, order)
    mu = freqs @ W.T
    mu[:, 0] = 1.0
    if order == 2:
        eigs = _min_eig_2x2(mu[:, 0], mu[:, 1], mu[:, 2])
    else:
        side = order // 2 + 1
        idx = np.add.outer(np.arange(side), np.arange(side))
        eigs = np.linalg.eigvalsh(mu[:, idx]).min(axis=-1)
    error = float(np.std(eigs, ddof=1))

    if error > 0.0:
        significance = -x_bar / error
    else:
        significance = math.inf if x_bar < 0.0 else 0.0
    return MomentsTestResult(
        min_eigenvalue=float(x_bar),
        error=error,
        significance=float(significance),
        order=order,
        bootstrap_replicates=replicates,
    )
