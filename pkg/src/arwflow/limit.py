"""Samplers for the limiting avalanche process.

Two independent constructions of the same law:

* :func:`sample_fidi` -- finite-dimensional joint marginals from coalescing
  reflected Brownian motions built over a shared backward Brownian path.
* :func:`sample_limit_path` -- the full step-function path from a black
  backward Brownian motion and a coalescing family of blue level paths,
  with the hitting profile T_y and C_x = inf{y : T_y > x}.

Internal computation uses normalized units (backward path diffusivity 1,
level paths diffusivity rho^2); raw (sigma_s, sigma_p) convert at the
boundary via C = B+ / sigma_p, which is exactly the normalized simulation.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import engine
from .errors import (
    EmptyPath,
    GridTooCoarse,
    RefinementBudgetExceeded,
    UnorderedStarts,
)
from .randomness import derive_seed, make_generator


@dataclass
class DiffusionParams:
    """Diffusion coefficients of the limit construction.

    sigma_s^2 = zeta - zeta^2 drives the sleep streams, sigma_p^2 the
    initial-configuration profile; r^2 = sigma_s^2 + sigma_p^2 and
    rho = sigma_s / sigma_p in (0, 1].
    """

    sigma_s: float
    sigma_p: float

    def __post_init__(self):
        if self.sigma_p <= 0 or self.sigma_s < 0:
            raise ValueError("need sigma_p > 0 and sigma_s >= 0")
        if self.sigma_s > self.sigma_p * (1 + 1e-12):
            raise ValueError(f"sigma_s={self.sigma_s} exceeds sigma_p={self.sigma_p}")

    @property
    def r(self) -> float:
        return math.hypot(self.sigma_s, self.sigma_p)

    @property
    def rho(self) -> float:
        return self.sigma_s / self.sigma_p

    @classmethod
    def from_rho(cls, rho: float) -> "DiffusionParams":
        """Normalized convention: sigma_p = 1, sigma_s = rho."""
        if not 0.0 < rho <= 1.0:
            raise ValueError(f"rho must lie in (0, 1]: {rho}")
        return cls(sigma_s=rho, sigma_p=1.0)

    @classmethod
    def from_zeta(cls, zeta: float, sigma_p2: float) -> "DiffusionParams":
        return cls(sigma_s=math.sqrt(zeta - zeta * zeta), sigma_p=math.sqrt(sigma_p2))


@dataclass
class SampledPath:
    """A function on a 1-D grid.

    ``interpolation`` is "linear" for diffusion paths and "step" for the
    cadlag limit process (piecewise constant, right-continuous).
    """

    grid: np.ndarray
    values: np.ndarray
    interpolation: str = "linear"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.grid.size != self.values.size:
            raise ValueError("grid/values size mismatch")
        if self.grid.size and np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be strictly increasing")

    def __len__(self):
        return self.grid.size

    def start(self) -> float:
        return float(self.grid[0])

    def value_at(self, x: float) -> float:
        if self.interpolation == "step":
            idx = int(np.searchsorted(self.grid, x, side="right")) - 1
            idx = max(idx, 0)
            return float(self.values[idx])
        return float(np.interp(x, self.grid, self.values))

    def jump_list(self):
        """(x, value) pairs where a step function changes value."""
        out = [(float(self.grid[0]), float(self.values[0]))]
        for i in range(1, len(self.values)):
            if self.values[i] != self.values[i - 1]:
                out.append((float(self.grid[i]), float(self.values[i])))
        return out

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "value"])
            rows = self.jump_list() if self.interpolation == "step" else zip(self.grid, self.values)
            for x, v in rows:
                w.writerow([repr(float(x)), repr(float(v))])


def reflect(path: SampledPath) -> SampledPath:
    """Skorohod reflection at 0: output = path - running min; exact at grid points."""
    if len(path) == 0:
        raise EmptyPath("cannot reflect an empty path")
    if path.values[0] != 0.0:
        raise ValueError("reflect expects a path started at 0")
    out = path.values - np.minimum.accumulate(path.values)
    return SampledPath(grid=path.grid.copy(), values=out, interpolation=path.interpolation)


def coalesce(paths: list[SampledPath]) -> list[SampledPath]:
    """Merge reflected paths into earlier-started ones on first touch/cross.

    ``paths`` must be ordered by start time (earliest first) on one common
    grid alignment ending at the same point.  Path i >= 1 follows its own
    values until the first grid point where it meets or exceeds the merged
    path i - 1, and equals it afterwards.
    """
    starts = [p.start() for p in paths]
    if any(starts[i] > starts[i + 1] for i in range(len(starts) - 1)):
        raise UnorderedStarts(f"starts not nondecreasing: {starts}")
    if not paths:
        return []
    merged = [paths[0]]
    for p in paths[1:]:
        prev = merged[-1]
        off = len(prev) - len(p)
        if off < 0:
            raise UnorderedStarts("later path extends beyond earlier one")
        prev_vals = prev.values[off:]
        mask = p.values >= prev_vals
        if mask.any():
            tau = int(np.argmax(mask))
            vals = np.concatenate([p.values[:tau], prev_vals[tau:]])
        else:
            vals = p.values.copy()
        merged.append(SampledPath(grid=p.grid.copy(), values=vals, interpolation=p.interpolation))
    return merged


@dataclass
class FidiRequest:
    """Joint-marginal query 0 <= x_0 <= ... <= x_k."""

    xs: list
    dx: float
    replicas: int
    seed: int

    def __post_init__(self):
        xs = [float(x) for x in self.xs]
        if not xs:
            raise ValueError("need at least one query time")
        if any(x < 0 for x in xs) or any(a > b for a, b in zip(xs, xs[1:])):
            raise ValueError(f"query times must be sorted nonnegative: {xs}")
        if self.dx <= 0:
            raise ValueError("dx must be positive")
        self.xs = xs


def sample_fidi(req: FidiRequest, params: DiffusionParams, guard: bool = True) -> np.ndarray:
    """Joint samples (C_{x_0}, ..., C_{x_k}); shape (replicas, k + 1).

    Per replica: a backward unit-diffusivity path P, independent forward
    rho-diffusivity streams S^i, reflected differences, coalescence on
    first grid touch/cross, values read at x = 0.  Coordinatewise
    nondecreasing by construction.
    """
    xs = np.asarray(req.xs)
    positive = xs[xs > 0]
    if guard and positive.size and req.dx > positive.min() / 50:
        raise GridTooCoarse(
            f"dx={req.dx} too coarse for smallest query time {positive.min()}"
        )
    rho = params.rho
    dx = req.dx
    k = len(xs) - 1
    J = max(int(math.ceil(xs[-1] / dx)), 1)
    s_idx = np.clip(J - np.round(xs / dx).astype(int), 0, J)

    rng = make_generator(req.seed, "fidi")
    out = np.empty((req.replicas, k + 1))
    sqdx = math.sqrt(dx)
    batch = max(1, min(req.replicas, int(4e6 // max(J, 1)) or 1))
    done = 0
    while done < req.replicas:
        nb = min(batch, req.replicas - done)
        dP = rng.standard_normal((nb, J)) * sqdx
        # P[:, j] = value at grid index j (x = (j - J) dx), P at x=0 is 0
        P = np.zeros((nb, J + 1))
        P[:, :-1] = dP[:, ::-1].cumsum(axis=1)[:, ::-1]
        prev = None
        prev_s = None
        for i in range(k, -1, -1):
            si = int(s_idx[i])
            li = J - si
            S = np.zeros((nb, li + 1))
            if li:
                S[:, 1:] = (rho * sqdx) * rng.standard_normal((nb, li)).cumsum(axis=1)
            btil = P[:, si:] - P[:, si : si + 1] - S
            bplus = btil - np.minimum.accumulate(btil, axis=1)
            if prev is not None:
                prev_seg = prev[:, si - prev_s :]
                mask = bplus >= prev_seg
                has = mask.any(axis=1)
                tau = np.argmax(mask, axis=1)
                cols = np.arange(li + 1)
                take_prev = has[:, None] & (cols[None, :] >= tau[:, None])
                bplus = np.where(take_prev, prev_seg, bplus)
            out[done : done + nb, i] = bplus[:, -1]
            prev = bplus
            prev_s = si
        done += nb
    return out


@dataclass
class HittingProfile:
    """Sampled levels y and their first black-path meeting times T_y."""

    levels: np.ndarray
    times: np.ndarray  # x values; np.inf when the meeting lies beyond the grid

    def __post_init__(self):
        self.levels = np.asarray(self.levels, dtype=float)
        self.times = np.asarray(self.times, dtype=float)

    def jump_count(self, a: float, b: float) -> int:
        """Number of distinct jump times of C in (a, b]."""
        t = self.times[np.isfinite(self.times)]
        t = t[(t > a) & (t <= b)]
        return len(np.unique(t))

    def distinct_values(self, a: float, b: float) -> int:
        """Number of distinct values the step function takes on [a, b]."""
        return self.jump_count(a, b) + 1

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["y", "T_y"])
            for y, t in zip(self.levels, self.times):
                w.writerow([repr(float(y)), "inf" if not np.isfinite(t) else repr(float(t))])


def _black_path(seed: int, J: int, dx: float, substeps: int) -> np.ndarray:
    rng = make_generator(seed, "black")
    fine = rng.standard_normal(J * substeps) * math.sqrt(dx / substeps)
    inc = fine.reshape(J, substeps).sum(axis=1)
    w = np.empty(J + 1)
    w[0] = 0.0
    np.cumsum(inc, out=w[1:])
    return w


def _level_seed(seed: int, y: float) -> int:
    return derive_seed(seed, "level", np.float64(y).tobytes().hex()) & 0x7FFFFFFF


_EMPTY = np.empty(0)


def _evolve(seed, y, rho, dx, substeps, J, black, lower, upper):
    lv = lower if lower is not None else _EMPTY
    uv = upper if upper is not None else _EMPTY
    v = engine.evolve_level(
        float(y), float(rho), float(dx), int(substeps), int(J), black,
        lv, uv, lower is not None, upper is not None, _level_seed(seed, y),
    )
    t = int(engine.first_meeting(v, black))
    return v, t


class _LevelSet:
    """Sorted coalescing level paths over one black path."""

    def __init__(self, seed, rho, dx, substeps, J, black):
        self.seed = seed
        self.rho = rho
        self.dx = dx
        self.substeps = substeps
        self.J = J
        self.black = black
        self.ys: list[float] = []
        self.vals: list[np.ndarray] = []
        self.tidx: list[int] = []

    def insert(self, y: float) -> int:
        import bisect

        i = bisect.bisect_left(self.ys, y)
        lower = self.vals[i - 1] if i > 0 else None
        upper = self.vals[i] if i < len(self.ys) else None
        v, t = _evolve(self.seed, y, self.rho, self.dx, self.substeps, self.J,
                       self.black, lower, upper)
        self.ys.insert(i, y)
        self.vals.insert(i, v)
        self.tidx.insert(i, t)
        return i

    def times(self) -> np.ndarray:
        return np.array([np.inf if t < 0 else t * self.dx for t in self.tidx])


def sample_limit_path(
    rho: float,
    xmax: float,
    dx: float,
    seed: int,
    level_resolution: float | None = None,
    max_levels: int = 4000,
    substeps: int = 1,
    n_initial: int = 48,
):
    """Full-path sampler: step function C on [0, xmax] plus hitting profile.

    Evolves a black backward path with diffusivity 1 and an adaptive
    coalescing family of level paths with diffusivity rho^2 on the same
    grid; records T_y per level; refines levels by bisection between
    neighbors with distinct hitting times until gaps fall below
    ``level_resolution`` or the budget is hit (then the output is flagged
    as under-resolved via a RefinementBudgetExceeded warning).
    """
    if not 0.0 < rho <= 1.0:
        raise ValueError(f"rho must lie in (0, 1] here: {rho}")
    if xmax <= 0 or dx <= 0:
        raise ValueError("xmax and dx must be positive")
    J = max(int(round(xmax / dx)), 1)
    black = _black_path(seed, J, dx, substeps)
    scale = math.sqrt((1.0 + rho * rho) * xmax)
    if level_resolution is None:
        level_resolution = scale / 512.0

    lv = _LevelSet(seed, rho, dx, substeps, J, black)

    ymax = 4.0 * scale
    lv.insert(ymax)
    tries = 0
    while lv.tidx[-1] >= 0 and tries < 16:
        ymax *= 2.0
        lv.insert(ymax)
        tries += 1

    y_lo = max(level_resolution / 4.0, scale * 1e-4)
    for y in np.geomspace(y_lo, ymax * 0.999, n_initial):
        lv.insert(float(y))

    under_resolved = False
    while True:
        if len(lv.ys) >= max_levels:
            under_resolved = True
            break
        to_add = []
        for i in range(len(lv.ys) - 1):
            if lv.tidx[i] != lv.tidx[i + 1] and (lv.ys[i + 1] - lv.ys[i]) > level_resolution:
                to_add.append(0.5 * (lv.ys[i] + lv.ys[i + 1]))
        if not to_add:
            break
        for y in to_add:
            if len(lv.ys) >= max_levels:
                under_resolved = True
                break
            lv.insert(y)
        if under_resolved:
            break

    if under_resolved:
        warnings.warn(
            f"level refinement budget {max_levels} hit; path under-resolved",
            RefinementBudgetExceeded,
            stacklevel=2,
        )

    levels = np.array(lv.ys)
    times = lv.times()
    profile = HittingProfile(levels=levels, times=times)

    # step function: value on [t, next t) is the smallest level with T_y > t
    finite = times[np.isfinite(times)]
    jump_xs = np.unique(finite[finite <= xmax])
    grid = [0.0]
    vals = [_inf_level(levels, times, 0.0)]
    for t in jump_xs:
        v = _inf_level(levels, times, t)
        if v != vals[-1]:
            if t == grid[-1]:
                vals[-1] = v
            else:
                grid.append(float(t))
                vals.append(v)
    gaps = [
        lv.ys[i + 1] - lv.ys[i]
        for i in range(len(lv.ys) - 1)
        if lv.tidx[i] != lv.tidx[i + 1]
    ]
    meta = {
        "dx": dx,
        "substeps": substeps,
        "seed": seed,
        "rho": rho,
        "n_levels": len(levels),
        "level_resolution": level_resolution,
        "achieved_level_resolution": max(gaps) if gaps else 0.0,
        "under_resolved": under_resolved,
    }
    path = SampledPath(grid=np.array(grid), values=np.array(vals),
                       interpolation="step", meta=meta)
    return path, profile, meta


def _inf_level(levels: np.ndarray, times: np.ndarray, x: float) -> float:
    """inf over the sampled level set of {y : T_y > x}."""
    mask = times > x
    return float(levels[mask][0]) if mask.any() else float("inf")


def limit_marginal(
    rho: float,
    x: float,
    replicas: int,
    dx: float,
    seed: int,
    tol: float | None = None,
    substeps: int = 1,
) -> np.ndarray:
    """Marginal C_x samples from the hitting-time construction.

    Per replica, binary-searches the level whose black-meeting time
    crosses x; levels below the answer meet before x, levels above after,
    so the bracket is exact up to ``tol``.
    """
    if not 0.0 < rho <= 1.0:
        raise ValueError(f"rho must lie in (0, 1] here: {rho}")
    scale = math.sqrt((1.0 + rho * rho) * x)
    if tol is None:
        tol = scale * 2e-3
    J = max(int(round(x / dx)), 1)
    out = np.empty(replicas)
    for r in range(replicas):
        rseed = derive_seed(seed, "replica", r)
        black = _black_path(rseed, J, dx, substeps)
        yu = 4.0 * scale
        pu, tu = _evolve(rseed, yu, rho, dx, substeps, J, black, None, None)
        tries = 0
        while tu >= 0 and tries < 16:
            lower = pu
            yu *= 2.0
            pu, tu = _evolve(rseed, yu, rho, dx, substeps, J, black, lower, None)
            tries += 1
        yl = tol / 4.0
        pl, tl = _evolve(rseed, yl, rho, dx, substeps, J, black, None, pu)
        while tl < 0 and yl > 1e-12:
            yl *= 0.25
            pl, tl = _evolve(rseed, yl, rho, dx, substeps, J, black, None, pl)
        while yu - yl > tol:
            ym = 0.5 * (yl + yu)
            pm, tm = _evolve(rseed, ym, rho, dx, substeps, J, black, pl, pu)
            if tm < 0:
                yu, pu = ym, pm
            else:
                yl, pl = ym, pm
        out[r] = yu
    return out


def running_max_bm(xmax: float, dx: float, seed: int) -> SampledPath:
    """rho = 0 regime: running maximum of a standard Brownian motion."""
    if xmax <= 0 or dx <= 0:
        raise ValueError("xmax and dx must be positive")
    J = max(int(round(xmax / dx)), 1)
    rng = make_generator(seed, "runmax")
    w = np.empty(J + 1)
    w[0] = 0.0
    np.cumsum(rng.standard_normal(J) * math.sqrt(dx), out=w[1:])
    m = np.maximum.accumulate(w)
    m = np.maximum(m, 0.0)
    grid = np.arange(J + 1) * dx
    return SampledPath(grid=grid, values=m, interpolation="linear")
