"""Discrete model: toppling rules, Abelian stabilization, initial laws."""

import math

import numpy as np
import pytest

from arwflow import (
    SLEEPING,
    Configuration,
    EtaDistribution,
    Instruction,
    InstructionField,
    ModelParams,
    stabilize,
    topple,
    twopoint_zeta_for_rho,
)
from arwflow.errors import (
    InvalidDistributionParams,
    SiteOutsideSupport,
    ToppleBudgetExceeded,
    ToppleIllegal,
)
from arwflow.randomness import derive_seed, make_generator

M = Instruction.MOVE
S = Instruction.SLEEP


def field_with(overrides, zeta=0.5, seed=0):
    return InstructionField(zeta, seed, overrides=overrides)


class TestTopple:
    def test_move_wakes_sleeper(self):
        # {0: 1, 1: s}, Move at 0 -> {1: 2} (s + 1 = 2)
        cfg = Configuration({0: 1, 1: SLEEPING})
        out = topple(cfg, field_with({0: [M]}), 0)
        assert out.state(0) == 0
        assert out.state(1) == 2

    def test_sleep_noop_at_count_two(self):
        cfg = Configuration({0: 2})
        fld = field_with({0: [S, S]})
        out = topple(cfg, fld, 0)
        assert out.state(0) == 2  # n * s = n for n >= 2
        assert fld.consumed(0) == 1  # instruction consumed anyway

    def test_sleep_at_count_one(self):
        cfg = Configuration({0: 1})
        out = topple(cfg, field_with({0: [S]}), 0)
        assert out.state(0) is SLEEPING

    def test_illegal_topplings(self):
        fld = field_with({0: [M]})
        with pytest.raises(ToppleIllegal):
            topple(Configuration({0: SLEEPING}), fld, 0)
        with pytest.raises(ToppleIllegal):
            topple(Configuration({0: 0}, support=(0, 0)), fld, 0)
        with pytest.raises(SiteOutsideSupport):
            topple(Configuration({0: 1}, support=(0, 0)), fld, 5)


class TestStabilize:
    def test_already_stable(self):
        cfg = Configuration({0: 0}, support=(0, 0))
        out, odo = stabilize(cfg, field_with({}), (0, 0))
        assert out.state(0) == 0
        assert odo.total_topplings() == 0

    def test_hand_trace_sleep_move_sleep(self):
        # {0: 2} with stream (Sleep, Move, Sleep): sleep is a no-op at 2,
        # move emits one particle to 1, sleep puts the survivor to sleep.
        cfg = Configuration({0: 2}, support=(0, 0))
        out, odo = stabilize(cfg, field_with({0: [S, M, S]}), (0, 0))
        assert out.state(0) is SLEEPING
        assert out.state(1) == 1  # emitted past the right edge
        assert odo.counts == {0: 3}
        assert odo.emissions == {0: 1}

    def test_abelian_exact(self):
        rng = np.random.default_rng(17)
        for inst in range(30):
            vals = rng.integers(0, 4, size=11)
            cfg = Configuration.from_array(vals, -10)
            fseed = derive_seed(40, "field", inst)
            results = []
            for p in range(20):
                fld = InstructionField(0.5, fseed)
                policy = ["sweep", "rightmost"][p] if p < 2 else "random"
                results.append(
                    stabilize(cfg, fld, (-10, 0), policy=policy,
                              policy_seed=derive_seed(40, "pol", inst, p))
                )
            ref_cfg, ref_odo = results[0]
            for got_cfg, got_odo in results[1:]:
                assert got_cfg == ref_cfg
                assert got_odo == ref_odo

    def test_callable_policy(self):
        cfg = Configuration({-1: 2, 0: 1}, support=(-1, 0))
        fld1 = InstructionField(0.5, 3)
        fld2 = InstructionField(0.5, 3)
        ref = stabilize(cfg, fld1, (-1, 0))
        got = stabilize(cfg, fld2, (-1, 0), policy=lambda sites, rng: sites[0])
        assert got[0] == ref[0] and got[1] == ref[1]

    def test_conservation_and_emission_identity(self):
        rng = np.random.default_rng(5)
        for inst in range(20):
            vals = rng.integers(0, 3, size=8)
            cfg = Configuration.from_array(vals, -7)
            out, odo = stabilize(cfg, InstructionField(0.5, 1000 + inst), (-7, 0))
            assert out.mass() == cfg.mass()
            # particles at the sink equal emissions from the right edge
            assert out.state(1) == odo.emissions.get(0, 0)
            # arrivals at x equal emissions(x-1): mass balance per site
            for x in range(-7, 1):
                before = int(vals[x + 7])
                after = 1 if out.state(x) is SLEEPING else int(out.state(x))
                arrived = odo.emissions.get(x - 1, 0)
                left = odo.emissions.get(x, 0)
                assert after == before + arrived - left

    def test_replay_determinism(self):
        cfg = Configuration({-2: 3, -1: 0, 0: 2}, support=(-2, 0))
        a = stabilize(cfg, InstructionField(0.5, 77), (-2, 0), policy="random", policy_seed=4)
        b = stabilize(cfg, InstructionField(0.5, 77), (-2, 0), policy="random", policy_seed=4)
        assert a[0] == b[0]
        assert a[1] == b[1]
        assert a[0].to_json() == b[0].to_json()

    def test_budget_cap(self):
        cfg = Configuration({0: 5}, support=(0, 0))
        with pytest.raises(ToppleBudgetExceeded):
            stabilize(cfg, InstructionField(0.5, 1), (0, 0), max_topplings=1)


class TestInstructionField:
    def test_replay_stable_under_query_order(self):
        fld = InstructionField(0.5, 9)
        forward = [fld.instruction(3, j) for j in range(1, 20)]
        backward = [fld.instruction(3, j) for j in range(19, 0, -1)][::-1]
        assert forward == backward

    def test_cursor(self):
        fld = InstructionField(0.5, 9)
        first = fld.next_instruction(0)
        assert fld.consumed(0) == 1
        assert fld.instruction(0, 1) == first
        fld.reset_cursors()
        assert fld.consumed(0) == 0

    def test_sleep_frequency(self):
        fld = InstructionField(0.25, 11)
        draws = [fld.instruction(0, j) for j in range(1, 4001)]
        frac = sum(1 for d in draws if d is Instruction.SLEEP) / len(draws)
        assert abs(frac - 0.25) < 0.03


class TestModelParams:
    def test_criticality_enforced(self):
        p = ModelParams.from_zeta(0.5)
        assert p.lam == pytest.approx(1.0)
        p = ModelParams.from_lambda(1.0)
        assert p.zeta == pytest.approx(0.5)
        with pytest.raises(ValueError):
            ModelParams(lam=1.0, zeta=0.9)

    def test_infinite_lambda_pairs_with_one(self):
        p = ModelParams.from_zeta(1.0)
        assert math.isinf(p.lam)
        p = ModelParams.from_lambda(math.inf)
        assert p.zeta == 1.0


class TestEtaDistribution:
    def test_bernoulli_rho_one(self):
        d = EtaDistribution("bernoulli", 0.3)
        assert d.sigma_p2 == pytest.approx(d.sigma_s2)
        assert d.rho == pytest.approx(1.0)

    def test_poisson_rho(self):
        d = EtaDistribution("poisson", 0.36)
        assert d.rho == pytest.approx(math.sqrt(1 - 0.36))

    def test_twopoint_headline_regime(self):
        d = EtaDistribution("twopoint", 0.808, 20)
        assert d.sigma_p2 == pytest.approx(15.51, abs=0.01)
        assert d.rho == pytest.approx(0.100, abs=0.001)

    def test_twopoint_zeta_for_rho(self):
        z = twopoint_zeta_for_rho(0.1, 20)
        assert EtaDistribution("twopoint", z, 20).rho == pytest.approx(0.1)

    def test_invalid_params(self):
        with pytest.raises(InvalidDistributionParams):
            EtaDistribution("twopoint", 0.5, None)
        with pytest.raises(InvalidDistributionParams):
            EtaDistribution("nope", 0.5)
        with pytest.raises(InvalidDistributionParams):
            EtaDistribution("bernoulli", 1.5)

    def test_sample_moments(self):
        rng = make_generator(1, "moments")
        for d in (EtaDistribution("bernoulli", 0.5),
                  EtaDistribution("poisson", 0.7),
                  EtaDistribution("twopoint", 0.808, 20),
                  EtaDistribution("geometric", 0.4)):
            x = d.sample_array(200_000, rng)
            assert abs(x.mean() - d.zeta) < 0.05
            assert abs(x.var() - d.sigma_p2) < max(0.2, 0.05 * d.sigma_p2)

    def test_parse(self):
        d = EtaDistribution.parse("twopoint:20", 0.808)
        assert d.kind == "twopoint" and d.m == 20
        assert EtaDistribution.parse("poisson", 0.3).kind == "poisson"


class TestConfigurationSerialization:
    def test_json_round_trip_with_sleeper(self):
        cfg = Configuration({-2: 3, 0: SLEEPING, 4: 1})
        text = cfg.to_json()
        assert '"s"' in text
        back = Configuration.from_json(text)
        assert back == cfg
        assert back.state(0) is SLEEPING

    def test_zeros_dropped(self):
        cfg = Configuration({0: 0, 1: 2})
        assert 0 not in cfg.states
        assert cfg.mass() == 2
