"""Numba kernels for the hot loops.

The lattice Bernoulli hash here must stay bit-identical to
:func:`arwflow.randomness.hash_u64`; tests compare the two directly.
"""

from __future__ import annotations

import numpy as np
from numba import njit, uint64

U64 = np.uint64

_GOLDEN = U64(0x9E3779B97F4A7C15)
_MIX1 = U64(0xBF58476D1CE4E5B9)
_MIX2 = U64(0x94D049BB133111EB)
_KEY2 = U64(0xD1B54A32D192ED03)


@njit(uint64(uint64), cache=True, inline="always")
def _mix64(z):
    z = (z ^ (z >> U64(30))) * _MIX1
    z = (z ^ (z >> U64(27))) * _MIX2
    return z ^ (z >> U64(31))


@njit(uint64(uint64, uint64, uint64), cache=True, inline="always")
def hash_u64(seed, a, b):
    z = _mix64(seed ^ (a * _GOLDEN))
    return _mix64(z ^ (b * _KEY2))


@njit(cache=True)
def trajectory_engine(eta, thresh, seed):
    """Joint flow trajectory via the shared-arrow-field construction.

    ``eta[j]`` is the particle count at site x = j - n, j = 0..n.  The red
    path released at -k enters column j at absolute height pos[j]; the
    arrow at lattice point (site, height) sends it down with probability
    zeta, and the path is reflected on the black cumulative-count profile.
    Paths at equal height in equal columns read the same arrow, so they
    coalesce exactly; the engine stops evolving a path at its first meeting
    with the previously stored one.

    Returns (C, met) where C[k] is the terminal height above the black
    path (the flow count) and met[k] flags coalescence with path k-1.
    """
    n = eta.shape[0] - 1
    black = np.empty(n + 2, np.int64)
    black[n + 1] = 0
    for j in range(n, -1, -1):
        black[j] = black[j + 1] + eta[j]

    pos = np.zeros(n + 2, np.int64)  # stored heights of the current path
    c_out = np.empty(n + 1, np.int64)
    met = np.zeros(n + 1, np.bool_)
    useed = U64(seed)

    for k in range(n + 1):
        j0 = n - k
        h = black[j0]
        finished = False
        for j in range(j0, n + 1):
            if k > 0 and j > j0 and h == pos[j]:
                c_out[k] = c_out[k - 1]
                met[k] = True
                finished = True
                break
            pos[j] = h
            site = U64(np.int64(j - n))
            down = hash_u64(useed, site, U64(np.int64(h))) < thresh
            h = h - (1 if down else 0)
            if h < black[j + 1]:
                h = black[j + 1]
        if not finished:
            if k > 0 and h == pos[n + 1]:
                met[k] = True
            pos[n + 1] = h
            c_out[k] = h
    return c_out, met


@njit(cache=True)
def evolve_level(y0, rho, dx, substeps, nsteps, black, lower, upper,
                 has_lower, has_upper, seed):
    """One blue level path on the backward grid, coalescing with neighbors.

    The path starts at ``y0`` at x = 0 and diffuses backward with
    diffusivity rho^2, merging into the stored lower/upper neighbor path at
    the first grid point where it touches or crosses it (the merged tail is
    copied, so every returned array is fully materialized).  Paths are not
    killed at the black path; the first-meeting index with ``black`` is
    computed separately.

    Increments are drawn in ``substeps`` sub-draws per grid step so that
    runs at dx and dx/2 with the same per-level seed share one underlying
    fine random stream (common-random-number coupling for refinement
    tests).
    """
    np.random.seed(seed)
    v = np.empty(nsteps + 1)
    v[0] = y0
    sd = rho * np.sqrt(dx / substeps)
    h = y0
    for j in range(1, nsteps + 1):
        inc = 0.0
        for _ in range(substeps):
            inc += np.random.normal()
        h = h + sd * inc
        if has_lower and h <= lower[j]:
            v[j:] = lower[j:]
            return v
        if has_upper and h >= upper[j]:
            v[j:] = upper[j:]
            return v
        v[j] = h
    return v


@njit(cache=True)
def first_meeting(values, black):
    """First grid index where a level path is at or below the black path."""
    for j in range(values.shape[0]):
        if values[j] <= black[j]:
            return j
    return -1
