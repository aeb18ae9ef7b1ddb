"""Finite-sample click histograms with reproducible, parallel-safe seeding.

All randomness flows through numpy's PCG64 generator.  A stream is
addressed by a (master_seed, stream_id) pair hashed through
numpy.random.SeedSequence([master_seed, stream_id]), so workers can draw
from disjoint streams without coordination and every histogram is
reproducible from its two integers.
"""

from dataclasses import dataclass

import numpy as np

from .states import PROB_SUM_TOL, ClickDistribution, DetectorConfig

__all__ = [
    "SampleSpec",
    "ClickHistogram",
    "derive_stream",
    "derive_seed",
    "sample_counts",
    "sample_histogram",
    "histogram_header",
    "histogram_row",
]

_SEED_LIMIT = 2**64


def _check_seed(name, value):
    if not isinstance(value, int) or not 0 <= value < _SEED_LIMIT:
        raise ValueError(f"{name} must be an unsigned 64-bit integer, got {value!r}")


@dataclass(frozen=True)
class SampleSpec:
    """How many shots to draw and which random stream to draw them from."""

    sample_size: int
    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        if not isinstance(self.sample_size, int) or self.sample_size < 1:
            raise ValueError(f"sample_size must be an integer >= 1, got {self.sample_size}")
        _check_seed("master_seed", self.master_seed)
        _check_seed("stream_id", self.stream_id)


@dataclass(frozen=True)
class ClickHistogram:
    """Observed click counts from m shots on an N-detector array.

    The integer counts are the ground truth: they sum to exactly
    sample_size, so every relative frequency is an exact multiple of
    1/sample_size.
    """

    counts: np.ndarray
    sample_size: int
    config: DetectorConfig

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.shape != (self.config.n_detectors + 1,):
            raise ValueError(
                f"expected {self.config.n_detectors + 1} click counts, got shape {counts.shape}"
            )
        if not np.issubdtype(counts.dtype, np.integer):
            raise ValueError("click counts must be integers")
        counts = counts.astype(np.int64)
        if counts.min() < 0:
            raise ValueError("click counts must be non-negative")
        if counts.sum() != self.sample_size:
            raise ValueError(
                f"click counts sum to {counts.sum()}, expected sample_size={self.sample_size}"
            )
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def freqs(self):
        """Relative frequencies counts / sample_size."""
        return self.counts / self.sample_size

    @classmethod
    def from_freqs(cls, freqs, sample_size, config):
        """Rebuild a histogram from stored frequencies.

        Each frequency must be an integer multiple of 1/sample_size up to
        round-off, and the multiples must sum back to sample_size.
        """
        freqs = np.asarray(freqs, dtype=float)
        counts = np.rint(freqs * sample_size)
        if np.max(np.abs(freqs * sample_size - counts)) > 1e-6:
            raise ValueError("frequencies are not integer multiples of 1/sample_size")
        return cls(counts=counts.astype(np.int64), sample_size=sample_size, config=config)


def derive_stream(master_seed, stream_id):
    """Independent PCG64 generator for the given (master_seed, stream_id)."""
    _check_seed("master_seed", master_seed)
    _check_seed("stream_id", stream_id)
    return np.random.default_rng(np.random.SeedSequence([master_seed, stream_id]))


def derive_seed(master_seed, stream_id):
    """Fresh 63-bit master seed hashed from (master_seed, stream_id).

    Used to give nested consumers (training data, per-family sweeps,
    bootstrap replicas) independent seed spaces of their own.
    """
    return int(derive_stream(master_seed, stream_id).integers(0, 2**63))


def sample_counts(probs, sample_size, rng):
    """Multinomial click counts via sample_size inverse-CDF draws.

    Parameters
    ----------
    probs : array_like
        Click probabilities summing to one within 1e-9.
    sample_size : int
        Number of shots m.
    rng : numpy.random.Generator

    Returns
    -------
    numpy.ndarray
        Integer counts per click number, summing to exactly m.
    """
    probs = np.asarray(probs, dtype=float)
    cdf = np.cumsum(probs)
    if abs(cdf[-1] - 1.0) > PROB_SUM_TOL:
        raise ValueError(f"probabilities sum to {cdf[-1]}, expected 1")
    cdf[-1] = 1.0  # guard the searchsorted upper edge against round-off
    clicks = np.searchsorted(cdf, rng.random(sample_size), side="right")
    return np.bincount(clicks, minlength=probs.size)


def sample_histogram(dist, spec):
    """Draw a click histogram from an exact distribution.

    Parameters
    ----------
    dist : ClickDistribution
    spec : SampleSpec

    Returns
    -------
    ClickHistogram
    """
    if not isinstance(dist, ClickDistribution):
        raise TypeError(f"dist must be a ClickDistribution, got {type(dist).__name__}")
    rng = derive_stream(spec.master_seed, spec.stream_id)
    counts = sample_counts(dist.probs, spec.sample_size, rng)
    return ClickHistogram(counts=counts, sample_size=spec.sample_size, config=dist.config)


def histogram_header(n_detectors):
    """Column names of the histogram CSV row format."""
    return [
        "stream_id",
        "sample_size",
        "n_detectors",
        "eta",
        "family",
        "nbar",
    ] + [f"f_{k}" for k in range(n_detectors + 1)]


def histogram_row(hist, stream_id, family, nbar):
    """Serialize a histogram with its provenance to CSV field strings.

    Frequencies are written with repr precision so they survive a
    round trip exactly.
    """
    return [
        str(stream_id),
        str(hist.sample_size),
        str(hist.config.n_detectors),
        repr(hist.config.efficiency),
        family,
        repr(float(nbar)),
    ] + [repr(float(f)) for f in hist.freqs]
