"""Statistical verification harness: empirical CDFs, KS tests, jump analysis."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptySample, NonpositiveScale
from .flow import FlowTrajectory
from .limit import SampledPath
from .randomness import derive_seed


@dataclass
class KSResult:
    statistic: float
    n_effective: float
    p_value: float

    def to_dict(self, test: str = "", passed: bool | None = None) -> dict:
        d = {
            "test": test,
            "D": self.statistic,
            "n": self.n_effective,
            "p": self.p_value,
        }
        if passed is not None:
            d["pass"] = bool(passed)
        return d


def kolmogorov_sf(t: float, terms: int = 100) -> float:
    """Asymptotic Kolmogorov survival function Q(t) = 2 sum (-1)^{k-1} e^{-2 k^2 t^2}.

    For small t the alternating series loses accuracy, so the
    theta-transformed CDF series is used there instead.
    """
    if t <= 0.0:
        return 1.0
    if t < 1.0:
        # Q(t) = 1 - sqrt(2 pi)/t * sum e^{-(2k-1)^2 pi^2 / (8 t^2)}
        s = 0.0
        for k in range(1, terms + 1):
            term = math.exp(-((2 * k - 1) ** 2) * math.pi**2 / (8.0 * t * t))
            s += term
            if term < 1e-16:
                break
        return min(max(1.0 - math.sqrt(2.0 * math.pi) / t * s, 0.0), 1.0)
    s = 0.0
    for k in range(1, terms + 1):
        term = math.exp(-2.0 * k * k * t * t)
        s += term if k % 2 == 1 else -term
        if term < 1e-16:
            break
    return min(max(2.0 * s, 0.0), 1.0)


def ks_one_sample(sample, cdf) -> KSResult:
    """Exact sup-distance of the empirical CDF against a reference CDF."""
    values = np.sort(np.asarray(sample, dtype=float))
    n = values.size
    if n == 0:
        raise EmptySample("one-sample KS needs a nonempty sample")
    f = np.asarray(cdf(values), dtype=float)
    if f.shape != values.shape:
        f = np.array([cdf(v) for v in values], dtype=float)
    i = np.arange(1, n + 1)
    d_plus = np.max(i / n - f)
    d_minus = np.max(f - (i - 1) / n)
    d = float(max(d_plus, d_minus))
    return KSResult(statistic=d, n_effective=float(n), p_value=kolmogorov_sf(math.sqrt(n) * d))


def ks_two_sample(a, b) -> KSResult:
    """Two-sample KS with effective n = n_a n_b / (n_a + n_b)."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    na, nb = a.size, b.size
    if na == 0 or nb == 0:
        raise EmptySample("two-sample KS needs nonempty samples")
    allv = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, allv, side="right") / na
    cdf_b = np.searchsorted(b, allv, side="right") / nb
    d = float(np.max(np.abs(cdf_a - cdf_b)))
    n_eff = na * nb / (na + nb)
    return KSResult(statistic=d, n_effective=n_eff, p_value=kolmogorov_sf(math.sqrt(n_eff) * d))


def half_normal_cdf(c, scale: float):
    """CDF of |Normal(0, scale^2)|: 2 Phi(c / scale) - 1 for c >= 0, else 0."""
    if scale <= 0:
        raise NonpositiveScale(f"scale must be positive: {scale}")
    c = np.asarray(c, dtype=float)
    out = np.where(c >= 0, np.vectorize(math.erf)(np.maximum(c, 0.0) / (scale * math.sqrt(2.0))), 0.0)
    return out if out.ndim else float(out)


@dataclass
class JumpSummary:
    """Jumps of a nondecreasing staircase: locations, sizes, clustering."""

    locations: np.ndarray
    sizes: np.ndarray

    @property
    def count(self) -> int:
        return int(self.sizes.size)

    def total(self) -> float:
        return float(self.sizes.sum())

    def mean_size(self) -> float:
        return float(self.sizes.mean()) if self.count else 0.0

    def max_in_window(self, delta: float) -> int:
        """Largest number of jumps falling in any half-open window of width delta."""
        if self.count == 0:
            return 0
        locs = np.sort(self.locations)
        best = 0
        j = 0
        for i in range(locs.size):
            while locs[i] - locs[j] >= delta:
                j += 1
            best = max(best, i - j + 1)
        return best


def extract_jumps(path, gamma: float = 0.0) -> JumpSummary:
    """Increments larger than gamma of a step path or a flow trajectory."""
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    if isinstance(path, FlowTrajectory):
        locs = np.arange(1, len(path.values), dtype=float)
        sizes = np.diff(path.values).astype(float)
    elif isinstance(path, SampledPath):
        locs = path.grid[1:].astype(float)
        sizes = np.diff(path.values)
    else:
        xs, vs = path
        locs = np.asarray(xs, dtype=float)[1:]
        sizes = np.diff(np.asarray(vs, dtype=float))
    keep = sizes > gamma
    return JumpSummary(locations=locs[keep], sizes=sizes[keep])


def self_similarity_check(sampler, x: float, c: float, replicas: int, seed: int,
                          exponent: float = 0.5) -> KSResult:
    """Two-sample KS between samples of C_{c x} and c^exponent * C_x.

    ``sampler(x, replicas, seed)`` must return i.i.d. marginal samples.
    The diffusive exponent is 1/2; other exponents serve as negative
    controls.
    """
    if c <= 0:
        raise ValueError("c must be positive")
    a = np.asarray(sampler(c * x, replicas, derive_seed(seed, "scaled")))
    b = (c**exponent) * np.asarray(sampler(x, replicas, derive_seed(seed, "base")))
    return ks_two_sample(a, b)
