"""Discrete activated-random-walk state, instructions and stabilization.

Sites hold either a nonnegative particle count or a single sleeping
particle, stored as the distinguished :data:`SLEEPING` mark.  Toppling a
site consumes the next unused instruction there: a move sends one particle
to the right (waking a sleeper, s+1 = 2), a sleep instruction puts a lone
particle to sleep and is a no-op at counts >= 2.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DomainMismatch,
    InvalidDistributionParams,
    SiteOutsideSupport,
    ToppleBudgetExceeded,
    ToppleIllegal,
)
from .randomness import bernoulli, derive_seed, make_generator, threshold_u64


class _Sleeping:
    """Singleton marker for a site occupied by one sleeping particle."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "s"


SLEEPING = _Sleeping()

#: A site state: a count in N, or the sleeping mark.
SiteState = "int | _Sleeping"


def state_mass(state) -> int:
    """|s| = 1, |n| = n."""
    return 1 if state is SLEEPING else int(state)


def is_unstable(state) -> bool:
    """A site is unstable iff it holds a count >= 1 (a lone sleeper is stable)."""
    return state is not SLEEPING and state >= 1


class Instruction(enum.Enum):
    MOVE = "move"
    SLEEP = "sleep"


@dataclass
class ModelParams:
    """Sleep rate and particle density, pinned to criticality.

    Exactly the relation zeta = lambda / (1 + lambda) is enforced (within
    ``criticality_tolerance``); lambda = inf pairs with zeta = 1.
    """

    lam: float
    zeta: float
    criticality_tolerance: float = 1e-12

    def __post_init__(self):
        if not (0.0 < self.zeta <= 1.0):
            raise ValueError(f"zeta must lie in (0, 1]: {self.zeta}")
        if self.lam <= 0:
            raise ValueError(f"lambda must be positive: {self.lam}")
        implied = 1.0 if math.isinf(self.lam) else self.lam / (1.0 + self.lam)
        if abs(self.zeta - implied) > self.criticality_tolerance:
            raise ValueError(
                f"criticality violated: zeta={self.zeta} but lambda/(1+lambda)={implied}"
            )

    @classmethod
    def from_zeta(cls, zeta: float, tol: float = 1e-12) -> "ModelParams":
        lam = math.inf if zeta >= 1.0 else zeta / (1.0 - zeta)
        return cls(lam=lam, zeta=zeta, criticality_tolerance=tol)

    @classmethod
    def from_lambda(cls, lam: float, tol: float = 1e-12) -> "ModelParams":
        zeta = 1.0 if math.isinf(lam) else lam / (1.0 + lam)
        return cls(lam=lam, zeta=zeta, criticality_tolerance=tol)


class InstructionField:
    """Per-site lazy i.i.d. instruction streams.

    Instruction (x, j), j >= 1, is a pure hash of (seed, x, j), so it never
    changes once observed and does not depend on the order of queries.  A
    per-site cursor tracks how many instructions have been consumed.

    ``overrides`` maps a site to an explicit instruction list (tests use it
    to pin hand-traced streams).
    """

    def __init__(self, zeta: float, seed: int, overrides=None):
        if not (0.0 < zeta <= 1.0):
            raise ValueError(f"zeta must lie in (0, 1]: {zeta}")
        self.zeta = float(zeta)
        self.seed = int(seed)
        self._thresh = threshold_u64(self.zeta)
        self._cursor: dict[int, int] = {}
        self._overrides = dict(overrides) if overrides else {}

    def instruction(self, site: int, j: int) -> Instruction:
        """Instruction j (1-based) at a site, without consuming it."""
        if j < 1:
            raise ValueError("instruction index is 1-based")
        if site in self._overrides:
            seq = self._overrides[site]
            if j > len(seq):
                raise IndexError(f"override stream at site {site} exhausted")
            return seq[j - 1]
        sleep = bernoulli(self.seed, site, j, self._thresh)
        return Instruction.SLEEP if sleep else Instruction.MOVE

    def consumed(self, site: int) -> int:
        return self._cursor.get(site, 0)

    def next_instruction(self, site: int) -> Instruction:
        """Consume and return the first unused instruction at a site."""
        j = self._cursor.get(site, 0) + 1
        self._cursor[site] = j
        return self.instruction(site, j)

    def reset_cursors(self):
        self._cursor.clear()


@dataclass
class Odometer:
    """Per-site toppling and emission counts for one stabilization domain."""

    counts: dict = field(default_factory=dict)
    emissions: dict = field(default_factory=dict)

    def add_toppling(self, site: int, moved: bool):
        self.counts[site] = self.counts.get(site, 0) + 1
        if moved:
            self.emissions[site] = self.emissions.get(site, 0) + 1

    def total_topplings(self) -> int:
        return sum(self.counts.values())

    def to_json(self) -> str:
        return json.dumps(
            {
                "counts": {str(k): v for k, v in sorted(self.counts.items())},
                "emissions": {str(k): v for k, v in sorted(self.emissions.items())},
            }
        )

    def __eq__(self, other):
        return (
            isinstance(other, Odometer)
            and self.counts == other.counts
            and self.emissions == other.emissions
        )


class Configuration:
    """Finite-support particle configuration; sites not stored hold 0."""

    def __init__(self, states=None, support=None):
        self.states = {}
        if states:
            for x, s in states.items():
                if s is SLEEPING or s != 0:
                    self.states[int(x)] = s
        if support is not None:
            lo, hi = support
            self.support = (int(lo), int(hi))
        elif self.states:
            self.support = (min(self.states), max(self.states))
        else:
            self.support = None

    @classmethod
    def from_array(cls, values, left: int) -> "Configuration":
        values = np.asarray(values)
        states = {left + i: int(v) for i, v in enumerate(values) if v != 0}
        return cls(states, support=(left, left + len(values) - 1))

    def to_array(self, lo: int, hi: int) -> np.ndarray:
        out = np.zeros(hi - lo + 1, dtype=np.int64)
        for x, s in self.states.items():
            if lo <= x <= hi:
                out[x - lo] = state_mass(s)
        return out

    def state(self, site: int):
        return self.states.get(site, 0)

    def mass(self) -> int:
        return sum(state_mass(s) for s in self.states.values())

    def unstable_sites(self, lo: int, hi: int):
        return sorted(x for x, s in self.states.items() if lo <= x <= hi and is_unstable(s))

    def is_stable_on(self, lo: int, hi: int) -> bool:
        return not any(
            lo <= x <= hi and is_unstable(s) for x, s in self.states.items()
        )

    def copy(self) -> "Configuration":
        return Configuration(dict(self.states), support=self.support)

    def to_json(self) -> str:
        enc = {str(x): ("s" if s is SLEEPING else int(s)) for x, s in sorted(self.states.items())}
        return json.dumps(enc)

    @classmethod
    def from_json(cls, text: str) -> "Configuration":
        raw = json.loads(text)
        states = {int(x): (SLEEPING if s == "s" else int(s)) for x, s in raw.items()}
        return cls(states)

    def __eq__(self, other):
        return isinstance(other, Configuration) and self.states == other.states

    def __repr__(self):
        return f"Configuration({self.states!r})"


def _add_particle(states: dict, site: int):
    cur = states.get(site, 0)
    if cur is SLEEPING:
        states[site] = 2  # s + 1 = 2: an arriving particle wakes the sleeper
    else:
        states[site] = cur + 1


def _apply_instruction(states: dict, site: int, instr: Instruction) -> bool:
    """Apply one instruction at an unstable site in place; True if a move."""
    cur = states[site]
    if instr is Instruction.MOVE:
        if cur == 1:
            del states[site]
        else:
            states[site] = cur - 1
        _add_particle(states, site + 1)
        return True
    # sleep: n -> s if n == 1, no-op otherwise
    if cur == 1:
        states[site] = SLEEPING
    return False


def topple(config: Configuration, fld: InstructionField, site: int) -> Configuration:
    """Apply the first unused instruction at a site; returns a new configuration."""
    if config.support is not None:
        lo, hi = config.support
        if not lo <= site <= hi:
            raise SiteOutsideSupport(f"site {site} outside support [{lo}, {hi}]")
    if not is_unstable(config.state(site)):
        raise ToppleIllegal(f"site {site} is stable (state {config.state(site)!r})")
    states = dict(config.states)
    _apply_instruction(states, site, fld.next_instruction(site))
    support = config.support
    if support is not None and site == support[1]:
        support = (support[0], support[1] + 1)
    return Configuration(states, support=support)


def stabilize(
    config: Configuration,
    fld: InstructionField,
    domain,
    policy="sweep",
    max_topplings: int = 10**9,
    policy_seed: int = 0,
):
    """Topple inside ``domain`` until no site there holds an active particle.

    ``policy`` selects which unstable site topples next: "sweep"
    (left-to-right), "rightmost", "random", or a callable
    ``policy(unstable_sites_sorted, rng) -> site``.  By the Abelian
    property the result does not depend on this choice; tests exercise that
    exactly.  Particles emitted past the right edge pile up at the first
    site to the right of the domain.
    """
    lo, hi = int(domain[0]), int(domain[1])
    if lo > hi:
        raise ValueError(f"empty domain [{lo}, {hi}]")
    states = dict(config.states)
    odo = Odometer()
    budget = int(max_topplings)
    done = 0

    def _topple_at(x):
        nonlocal done
        done += 1
        if done > budget:
            raise ToppleBudgetExceeded(
                f"toppling cap {budget} hit while stabilizing [{lo}, {hi}]"
            )
        moved = _apply_instruction(states, x, fld.next_instruction(x))
        odo.add_toppling(x, moved)

    if policy == "sweep":
        # Jumps only go right, so one left-to-right pass stabilizes the domain.
        for x in range(lo, hi + 1):
            while is_unstable(states.get(x, 0)):
                _topple_at(x)
    else:
        rng = make_generator(policy_seed, "policy")
        unstable = {x for x in range(lo, hi + 1) if is_unstable(states.get(x, 0))}
        while unstable:
            ordered = sorted(unstable)
            if policy == "rightmost":
                x = ordered[-1]
            elif policy == "random":
                x = ordered[rng.integers(len(ordered))]
            elif callable(policy):
                x = policy(ordered, rng)
                if x not in unstable:
                    raise ToppleIllegal(f"policy chose stable/outside site {x}")
            else:
                raise ValueError(f"unknown policy {policy!r}")
            _topple_at(x)
            for y in (x, x + 1):
                if lo <= y <= hi:
                    if is_unstable(states.get(y, 0)):
                        unstable.add(y)
                    else:
                        unstable.discard(y)

    support = config.support
    if support is not None:
        support = (min(support[0], lo), max(support[1], hi + 1))
    return Configuration(states, support=support), odo


_DIST_KINDS = ("bernoulli", "poisson", "twopoint", "geometric")


@dataclass
class EtaDistribution:
    """Initial-configuration law: i.i.d. per site with mean zeta.

    Exposes the variance pair (sigma_p^2, rho = sigma_s/sigma_p) with
    sigma_s^2 = zeta - zeta^2.
    """

    kind: str
    zeta: float
    m: int | None = None

    def __post_init__(self):
        if self.kind not in _DIST_KINDS:
            raise InvalidDistributionParams(f"unknown kind {self.kind!r}")
        if not (0.0 < self.zeta <= 1.0):
            raise InvalidDistributionParams(f"zeta out of (0, 1]: {self.zeta}")
        if self.kind == "twopoint":
            if self.m is None or int(self.m) != self.m or self.m < 1:
                raise InvalidDistributionParams(f"twopoint needs integer m >= 1, got {self.m}")
            if self.m < self.zeta:
                raise InvalidDistributionParams(f"twopoint needs m >= zeta, got m={self.m}")
            self.m = int(self.m)
        elif self.kind == "bernoulli" and self.zeta > 1.0:
            raise InvalidDistributionParams("bernoulli needs zeta <= 1")

    @property
    def sigma_s2(self) -> float:
        return self.zeta - self.zeta**2

    @property
    def sigma_p2(self) -> float:
        z = self.zeta
        if self.kind == "bernoulli":
            return z - z * z
        if self.kind == "poisson":
            return z
        if self.kind == "twopoint":
            return z * self.m - z * z
        return z * (1.0 + z)  # geometric with mean z

    @property
    def rho(self) -> float:
        if self.sigma_p2 == 0.0:
            return 1.0
        return math.sqrt(self.sigma_s2 / self.sigma_p2)

    def sample_array(self, n: int, rng: np.random.Generator) -> np.ndarray:
        z = self.zeta
        if self.kind == "bernoulli":
            return (rng.random(n) < z).astype(np.int64)
        if self.kind == "poisson":
            return rng.poisson(z, n).astype(np.int64)
        if self.kind == "twopoint":
            return np.where(rng.random(n) < z / self.m, self.m, 0).astype(np.int64)
        p = z / (1.0 + z)
        # numpy's geometric counts trials >= 1; shift to support {0, 1, ...}
        return (rng.geometric(1.0 - p, n) - 1).astype(np.int64)

    def sample(self, sites, seed: int) -> Configuration:
        sites = list(sites)
        rng = make_generator(seed, "eta")
        vals = self.sample_array(len(sites), rng)
        return Configuration(
            {x: int(v) for x, v in zip(sites, vals)},
            support=(min(sites), max(sites)) if sites else None,
        )

    def label(self) -> str:
        if self.kind == "twopoint":
            return f"twopoint:{self.m}"
        return self.kind

    @classmethod
    def parse(cls, text: str, zeta: float) -> "EtaDistribution":
        kind, _, arg = text.partition(":")
        m = int(arg) if arg else None
        return cls(kind=kind, zeta=zeta, m=m)


def sample_eta(dist: EtaDistribution, sites, seed: int) -> Configuration:
    """Draw an i.i.d. initial configuration on the given sites."""
    return dist.sample(sites, seed)


def twopoint_zeta_for_rho(rho: float, m: int) -> float:
    """Critical density making TwoPoint(m) achieve a target rho.

    Solves rho^2 = (zeta - zeta^2) / (zeta m - zeta^2) for zeta.
    """
    if not (0.0 < rho < 1.0):
        raise InvalidDistributionParams("need rho in (0, 1) for a twopoint law")
    zeta = (1.0 - m * rho * rho) / (1.0 - rho * rho)
    if not (0.0 < zeta < 1.0):
        raise InvalidDistributionParams(f"m={m} cannot achieve rho={rho}")
    return zeta
