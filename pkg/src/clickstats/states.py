"""Exact click statistics of multiplexed on-off photodetection.

A uniform multiplexing array splits the input light onto N on-off
detectors of quantum efficiency eta and reports the number k of
coincident clicks.  For each supported family of states this module
evaluates the full click distribution (p_0, ..., p_N) either in closed
form or through a truncated photon-number expansion with a certified
tail bound.

Supported families: coherent, thermal, Fock, squeezed vacuum,
n-photon-added thermal (NPATS), even coherent states, and binary
mixtures of the above.
"""

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import ClassVar, Union

import numpy as np

__all__ = [
    "PROB_SUM_TOL",
    "NEGATIVE_TOL",
    "TAIL_TOL",
    "MAX_TERMS",
    "ConvergenceError",
    "DetectorConfig",
    "Coherent",
    "Thermal",
    "Fock",
    "Squeezed",
    "Npats",
    "EvenCoherent",
    "Mixture",
    "StateSpec",
    "ClickDistribution",
    "d_symbol",
    "g_function",
    "click_distribution",
    "mean_photon_number",
    "params_for_mean",
    "state_to_dict",
    "state_from_dict",
    "state_to_json",
    "state_from_json",
]

#: allowed deviation of sum(p_k) from one
PROB_SUM_TOL = 1e-9
#: probabilities may undershoot zero by at most this before it is an error
NEGATIVE_TOL = 1e-12
#: target bound on the total neglected weight of a truncated photon-number sum
TAIL_TOL = 1e-12
#: hard cap on the number of terms kept in a photon-number sum
MAX_TERMS = 10_000


class ConvergenceError(RuntimeError):
    """A truncated series or root search failed to reach its tolerance.

    Attributes
    ----------
    residual : float
        The tolerance actually achieved when the iteration stopped.
    """

    def __init__(self, message, residual=math.nan):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class DetectorConfig:
    """Geometry of the detection array: N on-off detectors of efficiency eta."""

    n_detectors: int
    efficiency: float = 1.0

    def __post_init__(self):
        if not isinstance(self.n_detectors, int) or self.n_detectors < 2:
            raise ValueError(f"n_detectors must be an integer >= 2, got {self.n_detectors}")
        if not (0.0 < self.efficiency <= 1.0) or not math.isfinite(self.efficiency):
            raise ValueError(f"efficiency must lie in (0, 1], got {self.efficiency}")


def _require_finite_nonneg(name, value):
    if not math.isfinite(value) or value < 0:
        raise ValueError(f"{name} must be finite and >= 0, got {value}")


@dataclass(frozen=True)
class Coherent:
    """Coherent state with intensity alpha_sq = |alpha|^2."""

    alpha_sq: float
    family: ClassVar[str] = "coherent"

    def __post_init__(self):
        _require_finite_nonneg("alpha_sq", self.alpha_sq)


@dataclass(frozen=True)
class Thermal:
    """Thermal state with mean occupation n_th."""

    n_th: float
    family: ClassVar[str] = "thermal"

    def __post_init__(self):
        _require_finite_nonneg("n_th", self.n_th)


@dataclass(frozen=True)
class Fock:
    """Photon-number state with exactly n photons."""

    n: int
    family: ClassVar[str] = "fock"

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 0:
            raise ValueError(f"n must be an integer >= 0, got {self.n}")


@dataclass(frozen=True)
class Squeezed:
    """Squeezed vacuum with squeezing magnitude xi_abs = |xi|."""

    xi_abs: float
    family: ClassVar[str] = "squeezed"

    def __post_init__(self):
        _require_finite_nonneg("xi_abs", self.xi_abs)


@dataclass(frozen=True)
class Npats:
    """n-photon-added thermal state: n photons added to a thermal state n_th."""

    n_th: float
    n: int = 1
    family: ClassVar[str] = "npats"

    def __post_init__(self):
        _require_finite_nonneg("n_th", self.n_th)
        if not isinstance(self.n, int) or self.n < 1:
            raise ValueError(f"n must be an integer >= 1, got {self.n}")


@dataclass(frozen=True)
class EvenCoherent:
    """Even superposition of |alpha> and |-alpha>, parametrised by alpha_sq."""

    alpha_sq: float
    family: ClassVar[str] = "even_coherent"

    def __post_init__(self):
        _require_finite_nonneg("alpha_sq", self.alpha_sq)


@dataclass(frozen=True)
class Mixture:
    """Convex mixture weight * a + (1 - weight) * b of two pure families.

    Components must not themselves be mixtures (nesting depth 1).
    """

    weight: float
    component_a: "StateSpec"
    component_b: "StateSpec"
    family: ClassVar[str] = "mixture"

    def __post_init__(self):
        if not (0.0 <= self.weight <= 1.0):
            raise ValueError(f"weight must lie in [0, 1], got {self.weight}")
        for comp in (self.component_a, self.component_b):
            if isinstance(comp, Mixture):
                raise ValueError("mixture components must not be mixtures themselves")


StateSpec = Union[Coherent, Thermal, Fock, Squeezed, Npats, EvenCoherent, Mixture]

_FAMILY_CLASSES = {
    "coherent": Coherent,
    "thermal": Thermal,
    "fock": Fock,
    "squeezed": Squeezed,
    "npats": Npats,
    "even_coherent": EvenCoherent,
    "mixture": Mixture,
}


@dataclass(frozen=True)
class ClickDistribution:
    """Exact click distribution (p_0, ..., p_N) for a given detector array.

    Validates length, non-negativity (entries below -1e-12 are an error,
    larger round-off undershoots are clamped to zero) and normalization
    to within 1e-9.
    """

    probs: np.ndarray
    config: DetectorConfig

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.shape != (self.config.n_detectors + 1,):
            raise ValueError(
                f"expected {self.config.n_detectors + 1} probabilities, got shape {probs.shape}"
            )
        if not np.all(np.isfinite(probs)):
            raise ValueError("click probabilities must be finite")
        if probs.min() < -NEGATIVE_TOL:
            raise ValueError(f"negative click probability {probs.min()}")
        probs = np.where(probs < 0.0, 0.0, probs)
        total = probs.sum()
        if abs(total - 1.0) > PROB_SUM_TOL:
            raise ValueError(f"click probabilities sum to {total}, expected 1")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)


def d_symbol(k, n, config):
    """Probability of k clicks for an n-photon input.

    Parameters
    ----------
    k : int
        Number of clicks, 0 <= k <= N.
    n : int
        Number of input photons.
    config : DetectorConfig

    Returns
    -------
    float
        The alternating finite sum
        C(N, k) * sum_j C(k, j) (-1)^(k-j) (1 - eta (N - j) / N)^n,
        accumulated in ascending j in plain double precision.  All bases
        lie in [0, 1], so no compensated summation is required; the
        normalization check on assembled distributions guards the result.
    """
    N = config.n_detectors
    if not isinstance(k, int) or not 0 <= k <= N:
        raise ValueError(f"k must be an integer in [0, {N}], got {k}")
    if not isinstance(n, int) or n < 0:
        raise ValueError(f"n must be an integer >= 0, got {n}")
    eta = config.efficiency
    total = 0.0
    for j in range(k + 1):
        base = 1.0 - eta * (N - j) / N
        total += math.comb(k, j) * (-1.0) ** (k - j) * base**n
    return math.comb(N, k) * total


def g_function(lam, alpha_sq, n_detectors):
    """No-click moment of an even coherent state.

    Parameters
    ----------
    lam : float
        Exponent weight, arises as N - k + j in [0, N].
    alpha_sq : float
        Intensity |alpha|^2 of the superposed coherent amplitudes.
    n_detectors : int
        Number N of detectors in the multiplexing array.

    Returns
    -------
    float
        (exp(-lam * alpha_sq / N) + exp((lam / N - 2) * alpha_sq))
        / (1 + exp(-2 * alpha_sq)).
    """
    if not (math.isfinite(lam) and math.isfinite(alpha_sq)) or alpha_sq < 0:
        raise ValueError("lam must be finite and alpha_sq finite and >= 0")
    s = lam / n_detectors
    return (math.exp(-s * alpha_sq) + math.exp((s - 2.0) * alpha_sq)) / (
        1.0 + math.exp(-2.0 * alpha_sq)
    )


def _crude_d_bound(n_detectors):
    # Coarse bound on |D_{k,n}| used to turn the 1e-12 tail target into a
    # weight-mass threshold: C(N, N//2) * 2^N.
    return math.comb(n_detectors, n_detectors // 2) * 2.0**n_detectors


@lru_cache(maxsize=16)
def _d_table(n_detectors, efficiency, n_columns):
    """Matrix of click probabilities for Fock inputs, entry [k, n].

    The alternating sum behind d_symbol is the k-th finite difference of
    x^n over the equally spaced nodes u_j = 1 - eta (N - j) / N, which
    equals C(N, k) k! (eta/N)^k h_{n-k}(u_0, ..., u_k) with h the
    complete homogeneous symmetric polynomial.  All of its terms are
    positive, so small probabilities keep full relative precision (the
    plain alternating sum loses up to ~1e-10 absolute to cancellation at
    eta < 1) and k > n yields exact zeros.
    """
    N = n_detectors
    u = 1.0 - efficiency * (N - np.arange(N + 1)) / N
    table = np.zeros((N + 1, n_columns))
    # Row recurrence: H_k[n] = H_{k-1}[n-1] + u_k H_k[n-1], H_k[k] = 1.
    row = u[0] ** np.arange(n_columns)
    table[0] = row
    factor = 1.0  # C(N, k) k! (eta/N)^k
    for k in range(1, N + 1):
        prev = row
        row = np.zeros(n_columns)
        if k < n_columns:
            row[k] = 1.0
            uk = u[k]
            for n in range(k + 1, n_columns):
                row[n] = prev[n - 1] + uk * row[n - 1]
        factor *= (N - k + 1) * efficiency / N
        table[k] = factor * row
    table.setflags(write=False)
    return table


def _d_columns(config, max_n):
    # Round the column count up to a power of two so the cache is reused
    # across nearby truncation lengths.
    cols = 256
    while cols < max_n + 1:
        cols *= 2
    return _d_table(config.n_detectors, config.efficiency, cols)


def _binom_vector(n_detectors):
    return np.array([math.comb(n_detectors, k) for k in range(n_detectors + 1)], dtype=float)


def _coherent_probs(alpha_sq, config):
    N, eta = config.n_detectors, config.efficiency
    q0 = math.exp(-eta * alpha_sq / N)
    k = np.arange(N + 1)
    return _binom_vector(N) * q0 ** (N - k) * (1.0 - q0) ** k


def _fock_probs(n, config):
    # The table form gives exact zeros for k > n: more clicks than
    # photons cannot occur, whatever the efficiency.
    return _d_columns(config, n)[:, n].copy()


def _check_truncated(probs, n_terms):
    residual = abs(probs.sum() - 1.0)
    if residual > PROB_SUM_TOL:
        raise ConvergenceError(
            f"truncated photon-number sum left a normalization residual of {residual} "
            f"after {n_terms} terms",
            residual=residual,
        )


def _thermal_probs(n_th, config):
    N = config.n_detectors
    if n_th == 0.0:
        probs = np.zeros(N + 1)
        probs[0] = 1.0
        return probs
    q = n_th / (n_th + 1.0)
    tol = TAIL_TOL / _crude_d_bound(N)
    weights = [1.0 / (n_th + 1.0)]
    while True:
        # Remaining geometric mass after the last kept term is w * q/(1-q).
        tail = weights[-1] * n_th
        if tail <= tol:
            break
        if len(weights) >= MAX_TERMS:
            raise ConvergenceError(
                f"thermal expansion did not reach the tail target within {MAX_TERMS} terms",
                residual=tail,
            )
        weights.append(weights[-1] * q)
    w = np.asarray(weights)
    table = _d_columns(config, len(weights) - 1)
    probs = table[:, : len(weights)] @ w
    _check_truncated(probs, len(weights))
    return probs


def _squeezed_probs(xi_abs, config):
    N = config.n_detectors
    if xi_abs == 0.0:
        probs = np.zeros(N + 1)
        probs[0] = 1.0
        return probs
    t2 = math.tanh(xi_abs) ** 2
    tol = TAIL_TOL / _crude_d_bound(N)
    weights = [1.0 / math.cosh(xi_abs)]
    photon_numbers = [0]
    while True:
        # Successive weight ratios are t2 * (2t+1)/(2t+2) < t2, so the
        # remaining mass is below w * t2/(1-t2).
        tail = weights[-1] * t2 / (1.0 - t2)
        if tail <= tol:
            break
        if len(weights) >= MAX_TERMS:
            raise ConvergenceError(
                f"squeezed expansion did not reach the tail target within {MAX_TERMS} terms",
                residual=tail,
            )
        t = len(weights) - 1
        weights.append(weights[-1] * t2 * (2 * t + 1) / (2 * t + 2))
        photon_numbers.append(2 * (t + 1))
    w = np.asarray(weights)
    table = _d_columns(config, photon_numbers[-1])
    probs = table[:, photon_numbers] @ w
    _check_truncated(probs, len(weights))
    return probs


def _npats_probs(n_th, n, config):
    N = config.n_detectors
    q = n_th / (n_th + 1.0)
    tol = TAIL_TOL / _crude_d_bound(N)
    # Photon-number weights C(j, n) n_th^(j-n) / (n_th+1)^(j+1) for j >= n,
    # written so that n_th = 0 cleanly degenerates to the Fock state.
    weights = [1.0 / (n_th + 1.0) ** (n + 1)]
    j = n
    while True:
        ratio = q * (j + 1) / (j + 1 - n)
        # Ratios decrease toward q, so once below one they bound the tail.
        if ratio < 1.0:
            tail = weights[-1] * ratio / (1.0 - ratio)
            if tail <= tol:
                break
        if len(weights) >= MAX_TERMS:
            raise ConvergenceError(
                f"photon-added thermal expansion did not reach the tail target "
                f"within {MAX_TERMS} terms",
                residual=weights[-1],
            )
        weights.append(weights[-1] * ratio)
        j += 1
    w = np.asarray(weights)
    table = _d_columns(config, j)
    probs = table[:, n : j + 1] @ w
    _check_truncated(probs, len(weights))
    return probs


def _even_coherent_probs(alpha_sq, config):
    # Photon-number weights 2 e^{-a} a^{2t} / ((2t)! (1 + e^{-2a})) on the
    # even Fock states.  This positive expansion is numerically kinder
    # than the alternating sum over g_function moments (the two agree
    # analytically) and shares the certified truncation machinery.
    N = config.n_detectors
    a = alpha_sq
    if a == 0.0:
        probs = np.zeros(N + 1)
        probs[0] = 1.0
        return probs
    tol = TAIL_TOL / _crude_d_bound(N)
    weights = [2.0 * math.exp(-a) / (1.0 + math.exp(-2.0 * a))]
    photon_numbers = [0]
    while True:
        t = len(weights) - 1
        ratio = a * a / ((2 * t + 1.0) * (2 * t + 2.0))
        # Ratios decrease monotonically in t, so once below one the
        # remaining mass is below w * ratio/(1 - ratio).
        if ratio < 1.0:
            tail = weights[-1] * ratio / (1.0 - ratio)
            if tail <= tol:
                break
        if len(weights) >= MAX_TERMS:
            raise ConvergenceError(
                f"even-coherent expansion did not reach the tail target "
                f"within {MAX_TERMS} terms",
                residual=weights[-1],
            )
        weights.append(weights[-1] * ratio)
        photon_numbers.append(2 * (t + 1))
    w = np.asarray(weights)
    table = _d_columns(config, photon_numbers[-1])
    probs = table[:, photon_numbers] @ w
    _check_truncated(probs, len(weights))
    return probs


def click_distribution(state, config):
    """Exact click distribution of a state under a detector configuration.

    Parameters
    ----------
    state : StateSpec
        One of Coherent, Thermal, Fock, Squeezed, Npats, EvenCoherent or
        Mixture.
    config : DetectorConfig

    Returns
    -------
    ClickDistribution

    Raises
    ------
    ConvergenceError
        If a truncated photon-number expansion cannot reach its tail
        target within the term cap, or leaves a normalization residual
        above 1e-9.
    """
    if isinstance(state, Coherent):
        probs = _coherent_probs(state.alpha_sq, config)
    elif isinstance(state, Thermal):
        probs = _thermal_probs(state.n_th, config)
    elif isinstance(state, Fock):
        probs = _fock_probs(state.n, config)
    elif isinstance(state, Squeezed):
        probs = _squeezed_probs(state.xi_abs, config)
    elif isinstance(state, Npats):
        probs = _npats_probs(state.n_th, state.n, config)
    elif isinstance(state, EvenCoherent):
        probs = _even_coherent_probs(state.alpha_sq, config)
    elif isinstance(state, Mixture):
        part_a = click_distribution(state.component_a, config).probs
        part_b = click_distribution(state.component_b, config).probs
        probs = state.weight * part_a + (1.0 - state.weight) * part_b
    else:
        raise TypeError(f"unsupported state specification: {state!r}")
    return ClickDistribution(probs=probs, config=config)


def mean_photon_number(state):
    """Mean photon number of a state specification."""
    if isinstance(state, Coherent):
        return state.alpha_sq
    if isinstance(state, Thermal):
        return state.n_th
    if isinstance(state, Fock):
        return float(state.n)
    if isinstance(state, Squeezed):
        return math.sinh(state.xi_abs) ** 2
    if isinstance(state, Npats):
        return state.n_th * (state.n + 1) + state.n
    if isinstance(state, EvenCoherent):
        # alpha_sq * (1 - e^{-2 alpha_sq}) / (1 + e^{-2 alpha_sq})
        return state.alpha_sq * math.tanh(state.alpha_sq)
    if isinstance(state, Mixture):
        return state.weight * mean_photon_number(state.component_a) + (
            1.0 - state.weight
        ) * mean_photon_number(state.component_b)
    raise TypeError(f"unsupported state specification: {state!r}")


_BISECTION_XTOL = 1e-10


def _invert_even_coherent_mean(nbar):
    # Solve x * tanh(x) = nbar by bisection on [nbar, nbar + 2]; the mean
    # grows monotonically and x tanh(x) <= x brackets the root from below.
    if nbar == 0.0:
        return 0.0
    lo, hi = nbar, nbar + 2.0
    if hi * math.tanh(hi) - nbar < 0.0:
        raise ConvergenceError(
            f"even-coherent mean inversion bracket failed for nbar={nbar}",
            residual=hi * math.tanh(hi) - nbar,
        )
    while hi - lo > _BISECTION_XTOL:
        mid = 0.5 * (lo + hi)
        if mid * math.tanh(mid) - nbar < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def params_for_mean(family, nbar, n=None):
    """Construct the state of a family with a prescribed mean photon number.

    Parameters
    ----------
    family : str
        One of "coherent", "thermal", "fock", "squeezed", "npats",
        "even_coherent".
    nbar : float
        Target mean photon number.
    n : int, optional
        Number of added photons; only meaningful for "npats" (default 1).

    Returns
    -------
    StateSpec

    Notes
    -----
    The Fock family uses floor(nbar), so integer targets are fixed
    points.  "npats" requires nbar >= n.  "even_coherent" inverts its
    mean by bisection to an interval width of 1e-10.
    """
    if not math.isfinite(nbar) or nbar < 0:
        raise ValueError(f"nbar must be finite and >= 0, got {nbar}")
    if n is not None and family != "npats":
        raise ValueError(f"parameter n applies only to the npats family, not {family!r}")
    if family == "coherent":
        return Coherent(alpha_sq=nbar)
    if family == "thermal":
        return Thermal(n_th=nbar)
    if family == "fock":
        return Fock(n=int(math.floor(nbar)))
    if family == "squeezed":
        return Squeezed(xi_abs=math.asinh(math.sqrt(nbar)))
    if family == "npats":
        added = 1 if n is None else n
        if not isinstance(added, int) or added < 1:
            raise ValueError(f"n must be an integer >= 1, got {added}")
        if nbar < added:
            raise ValueError(
                f"npats with {added} added photons needs nbar >= {added}, got {nbar}"
            )
        return Npats(n_th=(nbar - added) / (added + 1), n=added)
    if family == "even_coherent":
        return EvenCoherent(alpha_sq=_invert_even_coherent_mean(nbar))
    raise ValueError(f"unknown state family {family!r}")


def state_to_dict(state):
    """Canonical structured form: a family tag plus named numeric fields."""
    if isinstance(state, Mixture):
        return {
            "family": "mixture",
            "weight": state.weight,
            "component_a": state_to_dict(state.component_a),
            "component_b": state_to_dict(state.component_b),
        }
    if not isinstance(state, (Coherent, Thermal, Fock, Squeezed, Npats, EvenCoherent)):
        raise TypeError(f"unsupported state specification: {state!r}")
    doc = {"family": state.family}
    for name in state.__dataclass_fields__:
        doc[name] = getattr(state, name)
    return doc


def state_from_dict(doc):
    """Inverse of :func:`state_to_dict`; unknown tags or fields are errors."""
    if not isinstance(doc, dict) or "family" not in doc:
        raise ValueError(f"state document needs a 'family' tag, got {doc!r}")
    family = doc["family"]
    cls = _FAMILY_CLASSES.get(family)
    if cls is None:
        raise ValueError(f"unknown state family {family!r}")
    fields = {k: v for k, v in doc.items() if k != "family"}
    if cls is Mixture:
        for key in ("component_a", "component_b"):
            if key not in fields:
                raise ValueError(f"mixture document is missing {key!r}")
            fields[key] = state_from_dict(fields[key])
    unknown = set(fields) - set(cls.__dataclass_fields__)
    if unknown:
        raise ValueError(f"unknown fields {sorted(unknown)} for family {family!r}")
    try:
        return cls(**fields)
    except TypeError as err:
        raise ValueError(f"bad fields for family {family!r}: {err}") from err


def state_to_json(state):
    return json.dumps(state_to_dict(state), sort_keys=True)


def state_from_json(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ValueError(f"invalid state document: {err}") from err
    return state_from_dict(doc)
