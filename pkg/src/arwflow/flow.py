"""The flow process: reflected-walk marginals, joint trajectories, oracle.

Three routes to the same law:

* :func:`flow_marginal` -- the O(L) forward recursion
  N(y) = max(N(y-1) + eta(y) - Y(y), 0) for a single release count.
* :func:`flow_trajectory` -- the joint trajectory (C_0, ..., C_n) from the
  graphical construction: red paths on a shared lazy arrow field, reflected
  on the black cumulative profile, coalescing on contact.
* :func:`flow_oracle` -- direct progressive stabilization with the exact
  discrete model (slow; the independent reference for the other two).
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import engine
from .errors import DomainMismatch, SeedCollision
from .model import Configuration, EtaDistribution, InstructionField, ModelParams, stabilize
from .randomness import bernoulli_array, derive_seed, make_generator, threshold_u64


@dataclass
class SleepIndicatorStream:
    """Per-site Bernoulli(zeta) sleep indicators Y(y).

    Backed by the counter-based hash, so Y(y) is a pure function of
    (seed, y): one draw per site, consumed even when irrelevant, which
    keeps parallel runs aligned.  ``values``/``left`` inject explicit
    draws for hand-traced tests.
    """

    zeta: float
    seed: int = 0
    values: np.ndarray | None = None
    left: int | None = None

    def array(self, lo: int, hi: int) -> np.ndarray:
        if self.values is not None:
            if self.left is None or lo < self.left or hi >= self.left + len(self.values):
                raise DomainMismatch(f"explicit Y values do not cover [{lo}, {hi}]")
            off = lo - self.left
            return np.asarray(self.values[off : off + (hi - lo + 1)], dtype=np.int64)
        sites = np.arange(lo, hi + 1, dtype=np.int64)
        bits = bernoulli_array(self.seed, sites, 1, threshold_u64(self.zeta))
        return bits.astype(np.int64)


@dataclass
class BlackPath:
    """Cumulative particle-count profile B(x) = sum_{y=x}^{0} eta(y)."""

    eta: np.ndarray  # counts at sites left..0
    left: int

    def __post_init__(self):
        self.eta = np.asarray(self.eta, dtype=np.int64)
        # cumulative[i] = B(left + i); B(1) = 0 by convention
        self.cumulative = self.eta[::-1].cumsum()[::-1]

    def value(self, x: int) -> int:
        if x > 0:
            return 0
        if x < self.left:
            raise DomainMismatch(f"site {x} left of black-path domain {self.left}")
        return int(self.cumulative[x - self.left])


class ArrowField:
    """Lazy i.i.d. red arrows at lattice points (site, height).

    Down with probability zeta.  Pure hash of (seed, site, height):
    zero storage, replay-stable, and bit-identical to the numba
    trajectory engine.
    """

    def __init__(self, zeta: float, seed: int):
        self.zeta = float(zeta)
        self.seed = int(seed)
        self._thresh = threshold_u64(self.zeta)

    def is_down(self, site: int, height: int) -> bool:
        from .randomness import hash_u64

        return hash_u64(self.seed, site, height) < self._thresh


@dataclass
class RedPath:
    """Forward lattice path reflected above the black path."""

    start: int
    heights: np.ndarray  # heights entering columns start..1 (terminal past site 0)

    def terminal(self) -> int:
        return int(self.heights[-1])


def red_path(black: BlackPath, arrows: ArrowField, start: int) -> RedPath:
    """Evolve one red path from (start, B(start)) through column 0."""
    if start > 0 or start < black.left:
        raise DomainMismatch(f"start {start} outside [{black.left}, 0]")
    h = black.value(start)
    heights = [h]
    for x in range(start, 1):
        down = 1 if arrows.is_down(x, h) else 0
        h = max(h - down, black.value(x + 1))
        heights.append(h)
    return RedPath(start=start, heights=np.asarray(heights, dtype=np.int64))


@dataclass
class BluePath:
    """Dual backward path; label b means height b + 1/2."""

    level: int
    labels: np.ndarray  # labels at columns 1, 0, -1, ..., down to the hit (or left edge)
    hit_site: int | None  # first x with black >= label + 1, None if it ran off the edge


def blue_paths(arrows: ArrowField, black: BlackPath, levels) -> list[BluePath]:
    """Blue dual paths started at (1, y + 1/2) for each level y >= 1.

    Read right to left, a blue path moving into column x steps up exactly
    when the red arrow at (x, label + 1) points down, so it never crosses a
    red path from the same field; paths at equal labels read equal arrows
    and so coalesce.  A path dies at the first column where its height
    drops below the black path (label + 1/2 < B, i.e. B >= label + 1); the
    hit site equals -min{k : C_k >= level + 1} by red/blue duality.
    """
    out = []
    for y in sorted(int(v) for v in levels):
        if y < 1:
            raise ValueError(f"blue levels start at 1, got {y}")
        b = y
        labels = [b]  # at column 1, above the terminal black height 0
        hit = None
        x = 0
        while hit is None and x >= black.left:
            if arrows.is_down(x, b + 1):
                b += 1
            labels.append(b)
            if black.value(x) >= b + 1:
                hit = x
            x -= 1
        out.append(BluePath(level=y, labels=np.asarray(labels, dtype=np.int64), hit_site=hit))
    return out


@dataclass
class FlowTrajectory:
    """The sequence (C_0, ..., C_n) plus bookkeeping."""

    values: np.ndarray
    zeta: float
    eta_label: str
    seed: int
    met: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.values) - 1

    def jumps(self):
        """Jump list [(k, C_k-after-jump)] including the initial value."""
        v = self.values
        out = [(0, int(v[0]))]
        for k in range(1, len(v)):
            if v[k] != v[k - 1]:
                out.append((k, int(v[k])))
        return out

    def increments(self) -> np.ndarray:
        return np.diff(self.values)

    def write_csv(self, path, dense: bool = False):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "C"])
            if dense:
                for k, c in enumerate(self.values):
                    w.writerow([k, int(c)])
            else:
                for k, c in self.jumps():
                    w.writerow([k, c])


def _eta_array(eta, lo: int, hi: int) -> np.ndarray:
    if isinstance(eta, Configuration):
        if eta.support is not None and (eta.support[0] < lo or eta.support[1] > hi):
            raise DomainMismatch(
                f"eta support {eta.support} exceeds [{lo}, {hi}]"
            )
        return eta.to_array(lo, hi)
    arr = np.asarray(eta, dtype=np.int64)
    if len(arr) != hi - lo + 1:
        raise DomainMismatch(f"eta length {len(arr)} != domain size {hi - lo + 1}")
    return arr


def flow_marginal(L: int, eta, ystream: SleepIndicatorStream, return_profile: bool = False):
    """Single release-count marginal C_L via the reflected-walk recursion.

    Evaluates N(y) = max(N(y-1) + eta(y) - Y(y), 0) over y = -L..0 in
    vectorized form: N = T - min(0, running min of T) with
    T(x) = sum (eta - Y).
    """
    eta_arr = _eta_array(eta, -L, 0)
    if return_profile:
        y_arr = ystream.array(-L, 0)
        t = np.cumsum(eta_arr - y_arr)
        runmin = np.minimum(np.minimum.accumulate(t), 0)
        profile = t - runmin
        return int(profile[-1]), profile
    # constant extra space: accumulate T and its running minimum in blocks
    block = 1 << 16
    offset = 0
    tmin = 0
    for lo in range(-L, 1, block):
        hi = min(lo + block - 1, 0)
        y_arr = ystream.array(lo, hi)
        t = np.cumsum(eta_arr[lo + L : hi + L + 1] - y_arr) + offset
        tmin = min(tmin, int(t.min()))
        offset = int(t[-1])
    return offset - tmin


_seed_registry: dict[int, str] = {}


def _check_seed(seed: int, fingerprint: str):
    prev = _seed_registry.get(seed)
    if prev is not None and prev != fingerprint:
        warnings.warn(
            f"seed {seed} reused with different parameters ({prev} vs {fingerprint})",
            SeedCollision,
            stacklevel=3,
        )
    _seed_registry[seed] = fingerprint


def reset_seed_registry():
    _seed_registry.clear()


def flow_trajectory(n: int, params: ModelParams, eta_dist: EtaDistribution, seed: int) -> FlowTrajectory:
    """Sample the joint trajectory (C_0, ..., C_n) with the exact joint law.

    Samples eta(-n..0) once, then evolves one red path per release on a
    shared lazy arrow field; each new path is run only until it coalesces
    with the previous one.  Pathwise nondecreasing.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    _check_seed(seed, f"traj:{params.zeta}:{eta_dist.label()}:{n}")
    rng = make_generator(seed, "eta")
    eta = eta_dist.sample_array(n + 1, rng)
    aseed = np.uint64(derive_seed(seed, "arrows"))
    thresh = np.uint64(threshold_u64(params.zeta))
    values, met = engine.trajectory_engine(eta, thresh, aseed)
    return FlowTrajectory(
        values=values,
        zeta=params.zeta,
        eta_label=eta_dist.label(),
        seed=seed,
        met=met,
        meta={"eta": eta},
    )


def flow_oracle(
    n: int,
    params: ModelParams,
    eta_dist: EtaDistribution,
    seed: int,
    policy="sweep",
) -> FlowTrajectory:
    """Literal progressive-release definition of the flow process.

    Adds eta(-k) at site -k to the previous stable configuration,
    stabilizes [-k, 0] with the site-wise model, and reads C_k as the
    accumulated particle count past site 0.  O(n^2)-ish topplings; use for
    small n as the reference law.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    rng = make_generator(seed, "eta")
    eta = eta_dist.sample_array(n + 1, rng)  # eta[j] at site j - n
    fld = InstructionField(params.zeta, derive_seed(seed, "instructions"))
    config = Configuration({}, support=(-n, 1))
    values = np.empty(n + 1, dtype=np.int64)
    from .model import SLEEPING

    for k in range(n + 1):
        add = int(eta[n - k])
        if add:
            states = dict(config.states)
            cur = states.get(-k, 0)
            # releasing onto a sleeper wakes it: s + m = m + 1
            states[-k] = add + 1 if cur is SLEEPING else cur + add
            config = Configuration(states, support=config.support)
        config, _ = stabilize(config, fld, (-k, 0), policy=policy)
        values[k] = int(config.state(1))
    return FlowTrajectory(
        values=values,
        zeta=params.zeta,
        eta_label=eta_dist.label(),
        seed=seed,
        meta={"eta": eta, "oracle": True},
    )
