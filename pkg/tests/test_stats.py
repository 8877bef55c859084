"""Statistical harness: KS tests, half-normal law, jump extraction."""

import math

import numpy as np
import pytest

from arwflow import (
    EtaDistribution,
    ModelParams,
    extract_jumps,
    flow_trajectory,
    half_normal_cdf,
    kolmogorov_sf,
    ks_one_sample,
    ks_two_sample,
    self_similarity_check,
)
from arwflow.errors import EmptySample, NonpositiveScale
from arwflow.limit import SampledPath
from arwflow.randomness import derive_seed, make_generator


class TestKolmogorovSf:
    def test_known_value(self):
        # Q(1.0) = 2(e^-2 - e^-8 + ...) ~ 0.27000
        assert kolmogorov_sf(1.0) == pytest.approx(0.26999967, abs=1e-6)

    def test_limits_and_monotone(self):
        assert kolmogorov_sf(0.0) == 1.0
        assert kolmogorov_sf(10.0) < 1e-12
        ts = np.linspace(0.1, 3.0, 50)
        vals = [kolmogorov_sf(t) for t in ts]
        assert all(a >= b for a, b in zip(vals, vals[1:]))


class TestKsOneSample:
    def test_degenerate_sample(self):
        res = ks_one_sample(np.zeros(100), lambda x: np.clip(x, 0, 1))
        assert res.statistic == 1.0

    def test_empty(self):
        with pytest.raises(EmptySample):
            ks_one_sample([], lambda x: x)

    def test_calibration(self):
        # under the null, p <= alpha with frequency <= alpha + 0.02
        alpha = 0.05
        hits = 0
        meta = 500
        for i in range(meta):
            rng = make_generator(900, "cal", i)
            s = rng.random(200)
            res = ks_one_sample(s, lambda x: np.clip(x, 0.0, 1.0))
            if res.p_value <= alpha:
                hits += 1
        assert hits / meta <= alpha + 0.02

    def test_monotone_transform_invariance(self):
        rng = make_generator(1, "inv")
        s = rng.random(300)
        d1 = ks_one_sample(s, lambda x: np.clip(x, 0, 1)).statistic
        # apply x -> x^3 (strictly increasing) to sample and reference
        d2 = ks_one_sample(s**3, lambda x: np.clip(np.cbrt(x), 0, 1)).statistic
        assert d1 == pytest.approx(d2, abs=1e-12)


class TestKsTwoSample:
    def test_equal_samples(self):
        a = np.arange(10.0)
        assert ks_two_sample(a, a.copy()).statistic == 0.0

    def test_disjoint_supports(self):
        res = ks_two_sample(np.arange(10.0), np.arange(10.0) + 100)
        assert res.statistic == 1.0

    def test_effective_n(self):
        res = ks_two_sample(np.arange(100.0), np.arange(50.0) + 0.5)
        assert res.n_effective == pytest.approx(100 * 50 / 150)

    def test_empty(self):
        with pytest.raises(EmptySample):
            ks_two_sample([], [1.0])


class TestHalfNormal:
    def test_edges(self):
        assert half_normal_cdf(0.0, 1.0) == 0.0
        assert half_normal_cdf(-1.0, 1.0) == 0.0
        assert half_normal_cdf(50.0, 1.0) == pytest.approx(1.0)

    def test_median(self):
        s = 2.5
        assert half_normal_cdf(0.674489750196 * s, s) == pytest.approx(0.5, abs=1e-9)

    def test_scale_errors(self):
        with pytest.raises(NonpositiveScale):
            half_normal_cdf(1.0, 0.0)

    def test_vectorized(self):
        out = half_normal_cdf(np.array([-1.0, 0.0, 1.0]), 1.0)
        assert out.shape == (3,)
        assert out[0] == 0.0


class TestExtractJumps:
    def test_constant_path(self):
        p = SampledPath(grid=np.arange(4.0), values=np.ones(4), interpolation="step")
        js = extract_jumps(p)
        assert js.count == 0
        assert js.total() == 0.0
        assert js.max_in_window(1.0) == 0

    def test_single_step_with_threshold(self):
        p = SampledPath(grid=np.array([0.0, 1.0]), values=np.array([0.0, 2.0]),
                        interpolation="step")
        js = extract_jumps(p, gamma=1.0)
        assert js.count == 1
        assert js.locations[0] == 1.0
        assert js.sizes[0] == 2.0
        assert extract_jumps(p, gamma=2.5).count == 0

    def test_total_variation_identity(self):
        # gamma = 0 on a nondecreasing step path: total = final - initial
        vals = np.array([0.0, 0.0, 1.5, 1.5, 4.0])
        p = SampledPath(grid=np.arange(5.0), values=vals, interpolation="step")
        js = extract_jumps(p, gamma=0.0)
        assert js.total() == pytest.approx(vals[-1] - vals[0])

    def test_flow_trajectory_input(self):
        t = flow_trajectory(300, ModelParams.from_zeta(0.5),
                            EtaDistribution("bernoulli", 0.5), 31337)
        js = extract_jumps(t)
        assert js.total() == t.values[-1] - t.values[0]
        assert np.all(js.sizes > 0)

    def test_window_clustering(self):
        p = SampledPath(grid=np.array([0.0, 1.0, 1.1, 1.2, 5.0]),
                        values=np.array([0.0, 1.0, 2.0, 3.0, 4.0]),
                        interpolation="step")
        js = extract_jumps(p)
        assert js.max_in_window(0.5) == 3  # the cluster at x ~ 1
        assert js.max_in_window(10.0) == 4

    def test_gamma_validation(self):
        with pytest.raises(ValueError):
            extract_jumps(([0.0, 1.0], [0.0, 1.0]), gamma=-1.0)


class TestSelfSimilarity:
    @staticmethod
    def _half_normal_sampler(x, replicas, seed):
        rng = make_generator(seed, "hn")
        return np.abs(rng.standard_normal(replicas)) * math.sqrt(x)

    def test_c_one_accepts(self):
        res = self_similarity_check(self._half_normal_sampler, 1.0, 1.0, 1500,
                                    derive_seed(2, "c1"))
        assert res.p_value > 0.001, res

    def test_diffusive_scaling_accepts(self):
        res = self_similarity_check(self._half_normal_sampler, 1.0, 4.0, 1500,
                                    derive_seed(2, "c4"))
        assert res.p_value > 0.001, res

    def test_linear_scaling_rejects(self):
        res = self_similarity_check(self._half_normal_sampler, 1.0, 4.0, 5000,
                                    derive_seed(2, "neg"), exponent=1.0)
        assert res.p_value < 1e-6, res
        assert res.statistic > 0.3

    def test_c_validation(self):
        with pytest.raises(ValueError):
            self_similarity_check(self._half_normal_sampler, 1.0, -1.0, 10, 0)
