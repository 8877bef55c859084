"""Registered verification checks with pinned seeds.

Each check returns a JSON-ready dict with at least {"test", "pass"} and,
for distributional checks, {"D", "n", "p"}.  The CLI ``verify`` verb and
the acceptance test suite both run these.
"""

from __future__ import annotations

import math
import time

import numpy as np

from .errors import UnknownCheck
from .flow import (
    SleepIndicatorStream,
    flow_marginal,
    flow_oracle,
    flow_trajectory,
)
from .limit import DiffusionParams, FidiRequest, limit_marginal, running_max_bm, sample_fidi, sample_limit_path
from .model import (
    Configuration,
    EtaDistribution,
    InstructionField,
    ModelParams,
    stabilize,
    twopoint_zeta_for_rho,
)
from .randomness import derive_seed, make_generator


def _fidi_marginal_sampler(rho: float):
    params = DiffusionParams.from_rho(rho)

    def sampler(x, replicas, seed):
        req = FidiRequest(xs=[x], dx=x / 2000.0, replicas=replicas, seed=seed)
        return sample_fidi(req, params)[:, 0]

    return sampler


def check_marginal_ks(seed: int = 20260801, n: int = 10_000, replicas: int = 2000,
                      threshold: float = 0.05) -> dict:
    """eps * C_n for Bernoulli(1/2) against the half-normal 2 Phi(c / sqrt(1/2)) - 1."""
    from .stats import half_normal_cdf, ks_one_sample

    t0 = time.perf_counter()
    zeta = 0.5
    dist = EtaDistribution("bernoulli", zeta)
    eps = 1.0 / math.sqrt(n)
    samples = np.empty(replicas)
    for i in range(replicas):
        rng = make_generator(seed, "rep", i, "eta")
        eta = dist.sample_array(n + 1, rng)
        ys = SleepIndicatorStream(zeta, derive_seed(seed, "rep", i, "y"))
        samples[i] = eps * flow_marginal(n, eta, ys)
    r = math.sqrt(0.5)
    res = ks_one_sample(samples, lambda c: half_normal_cdf(c, r))
    out = res.to_dict("marginal-ks", res.statistic < threshold)
    out["threshold"] = threshold
    out["wall_time"] = time.perf_counter() - t0
    out["samples"] = samples
    out["reference_scale"] = r
    return out


def check_oracle_equivalence(seed: int = 20260802, L: int = 20, replicas: int = 5000,
                             threshold: float = 0.04) -> dict:
    """Direct-stabilization C_L against the reflected-walk recursion C_L."""
    from .stats import ks_two_sample

    t0 = time.perf_counter()
    zeta = 0.5
    params = ModelParams.from_zeta(zeta)
    dist = EtaDistribution("bernoulli", zeta)
    oracle = np.empty(replicas)
    for i in range(replicas):
        traj = flow_oracle(L, params, dist, derive_seed(seed, "oracle", i))
        oracle[i] = traj.values[-1]
    recursion = np.empty(replicas)
    for i in range(replicas):
        rng = make_generator(seed, "rec", i, "eta")
        eta = dist.sample_array(L + 1, rng)
        ys = SleepIndicatorStream(zeta, derive_seed(seed, "rec", i, "y"))
        recursion[i] = flow_marginal(L, eta, ys)
    res = ks_two_sample(oracle, recursion)
    out = res.to_dict("oracle-equivalence", res.statistic < threshold)
    out["threshold"] = threshold
    out["wall_time"] = time.perf_counter() - t0
    out["samples"] = oracle
    out["other_samples"] = recursion
    return out


def check_abelian(seed: int = 20260803, instances: int = 200, policies: int = 20) -> dict:
    """Stable configuration and odometer identical across toppling policies."""
    t0 = time.perf_counter()
    rng = make_generator(seed, "configs")
    failures = 0
    for i in range(instances):
        vals = rng.integers(0, 4, size=11)
        config = Configuration.from_array(vals, -10)
        fseed = derive_seed(seed, "field", i)
        ref = None
        for p in range(policies):
            fld = InstructionField(0.5, fseed)
            policy = ["sweep", "rightmost"][p] if p < 2 else "random"
            got = stabilize(config, fld, (-10, 0), policy=policy,
                            policy_seed=derive_seed(seed, "policy", i, p))
            if ref is None:
                ref = got
            elif got[0] != ref[0] or got[1] != ref[1]:
                failures += 1
                break
    return {
        "test": "abelian",
        "instances": instances,
        "policies": policies,
        "failures": failures,
        "pass": failures == 0,
        "wall_time": time.perf_counter() - t0,
    }


def check_cross_sampler(seed: int = 20260804, rho: float = 0.5, x: float = 1.0,
                        replicas: int = 2000, dx_path: float = 1e-4,
                        threshold: float = 0.06) -> dict:
    """Finite-dimensional sampler against the hitting-time path sampler at one x."""
    from .stats import ks_two_sample

    t0 = time.perf_counter()
    fidi = _fidi_marginal_sampler(rho)(x, replicas, derive_seed(seed, "fidi"))
    path = limit_marginal(rho, x, replicas, dx_path, derive_seed(seed, "path"))
    res = ks_two_sample(fidi, path)
    out = res.to_dict("cross-sampler", res.statistic < threshold)
    out["threshold"] = threshold
    out["wall_time"] = time.perf_counter() - t0
    out["samples"] = fidi
    out["other_samples"] = path
    return out


def check_runmax_marginal(seed: int = 20260805, replicas: int = 2000, dx: float = 1e-4,
                          threshold: float = 0.05) -> dict:
    """rho = 0 special case: running max of BM at x = 1 against |Normal(0, 1)|."""
    from .stats import half_normal_cdf, ks_one_sample

    t0 = time.perf_counter()
    samples = np.empty(replicas)
    for i in range(replicas):
        p = running_max_bm(1.0, dx, derive_seed(seed, "rep", i))
        samples[i] = p.values[-1]
    res = ks_one_sample(samples, lambda c: half_normal_cdf(c, 1.0))
    out = res.to_dict("runmax-marginal", res.statistic < threshold)
    out["threshold"] = threshold
    out["wall_time"] = time.perf_counter() - t0
    out["samples"] = samples
    out["reference_scale"] = 1.0
    return out


def check_pure_jump(seed: int = 20260806, rho: float = 0.5, n_paths: int = 50,
                    dx: float = 1e-4, change_threshold: float = 0.05) -> dict:
    """Distinct-value count on [0.5, 2] stable under dx halving; jumps accumulate at 0.

    The dx and dx/2 runs share one fine random stream per level (substeps
    2 vs 1), so the comparison isolates discretization effects.
    """
    t0 = time.perf_counter()
    windows = [0.5, 0.1, 0.02]
    coarse_counts = np.empty(n_paths)
    fine_counts = np.empty(n_paths)
    window_counts = np.zeros((n_paths, len(windows)))
    for i in range(n_paths):
        s = derive_seed(seed, "path", i)
        _, prof_c, _ = sample_limit_path(rho, 2.0, dx, s, substeps=2)
        _, prof_f, _ = sample_limit_path(rho, 2.0, dx / 2.0, s, substeps=1)
        coarse_counts[i] = prof_c.distinct_values(0.5, 2.0)
        fine_counts[i] = prof_f.distinct_values(0.5, 2.0)
        for j, a in enumerate(windows):
            window_counts[i, j] = prof_c.jump_count(a, 2.0)
    mean_c = float(coarse_counts.mean())
    mean_f = float(fine_counts.mean())
    rel_change = abs(mean_f - mean_c) / mean_c
    mean_windows = window_counts.mean(axis=0)
    monotone = bool(np.all(np.diff(mean_windows) > 0))
    return {
        "test": "pure-jump",
        "mean_distinct_coarse": mean_c,
        "mean_distinct_fine": mean_f,
        "relative_change": rel_change,
        "windows": windows,
        "mean_jump_counts": mean_windows.tolist(),
        "monotone_accumulation": monotone,
        "pass": rel_change < change_threshold and monotone,
        "wall_time": time.perf_counter() - t0,
    }


def check_self_similar(seed: int = 20260807, rho: float = 0.5, replicas: int = 2000,
                       threshold: float = 0.06, reject_threshold: float = 0.3) -> dict:
    """C_4 vs 2 C_1 accepts; linear-scaling negative control 4 C_1 rejects."""
    from .stats import self_similarity_check

    t0 = time.perf_counter()
    sampler = _fidi_marginal_sampler(rho)
    good = self_similarity_check(sampler, 1.0, 4.0, replicas, derive_seed(seed, "good"))
    bad = self_similarity_check(sampler, 1.0, 4.0, replicas, derive_seed(seed, "bad"),
                                exponent=1.0)
    passed = good.statistic < threshold and bad.statistic > reject_threshold
    return {
        "test": "self-similar",
        "D": good.statistic,
        "n": good.n_effective,
        "p": good.p_value,
        "negative_control_D": bad.statistic,
        "threshold": threshold,
        "reject_threshold": reject_threshold,
        "pass": bool(passed),
        "wall_time": time.perf_counter() - t0,
    }


def rho_sweep_distributions():
    """(rho, EtaDistribution) pairs matching the published simulation regimes."""
    out = [(1.0, EtaDistribution("bernoulli", 0.5))]
    for rho, m in ((0.5, 3), (0.3, 4), (0.1, 20), (0.051, 200)):
        zeta = twopoint_zeta_for_rho(rho, m)
        out.append((rho, EtaDistribution("twopoint", zeta, m)))
    return out


def check_figures(seed: int = 20260808, n_sweep: int = 20_000, sweep_replicas: int = 100,
                  gamma: float = 0.05) -> dict:
    """Staircase regime and the monotone mean-jump-size trend across rho."""
    from .stats import extract_jumps

    t0 = time.perf_counter()
    # headline regime: zeta = 0.808, twopoint m = 20, rho ~ 0.1, n = 1e5
    zeta = twopoint_zeta_for_rho(0.1, 20)
    dist = EtaDistribution("twopoint", zeta, 20)
    params = ModelParams.from_zeta(zeta)
    n_head = 100_000
    traj = flow_trajectory(n_head, params, dist, derive_seed(seed, "headline"))
    incs = traj.increments()
    eps = 1.0 / math.sqrt(n_head)
    sigma_p = math.sqrt(dist.sigma_p2)
    norm_jumps = eps * incs[incs > 0] / sigma_p
    staircase = bool(
        np.all(incs >= 0)
        and norm_jumps.size < n_head / 10  # mostly flat
        and norm_jumps.max() > 0.1  # macroscopic avalanches
    )

    mean_sizes = []
    for rho, d in rho_sweep_distributions():
        p = ModelParams.from_zeta(d.zeta)
        sp = math.sqrt(d.sigma_p2)
        sizes = []
        for rep in range(sweep_replicas):
            t = flow_trajectory(n_sweep, p, d, derive_seed(seed, "sweep", rho, rep))
            js = extract_jumps(t, gamma=0.0)
            scaled = js.sizes / (math.sqrt(n_sweep) * sp)
            sizes.append(scaled[scaled > gamma])
        allsizes = np.concatenate(sizes)
        mean_sizes.append(float(allsizes.mean()) if allsizes.size else 0.0)
    monotone = bool(np.all(np.diff(mean_sizes) < 0))
    return {
        "test": "figures",
        "staircase": staircase,
        "rhos": [r for r, _ in rho_sweep_distributions()],
        "mean_jump_sizes": mean_sizes,
        "monotone_trend": monotone,
        "pass": staircase and monotone,
        "wall_time": time.perf_counter() - t0,
        "headline_trajectory": traj,
    }


def check_performance(seed: int = 20260809) -> dict:
    """flow_marginal at L = 1e6 under 1 s; flow_trajectory at n = 1e5 under 10 s."""
    zeta = 0.5
    dist = EtaDistribution("bernoulli", zeta)
    params = ModelParams.from_zeta(zeta)
    # warm the jit before timing
    flow_trajectory(10, params, dist, derive_seed(seed, "warmup"))

    L = 1_000_000
    eta = dist.sample_array(L + 1, make_generator(seed, "perf-eta"))
    ys = SleepIndicatorStream(zeta, derive_seed(seed, "perf-y"))
    t0 = time.perf_counter()
    flow_marginal(L, eta, ys)
    t_marginal = time.perf_counter() - t0

    t0 = time.perf_counter()
    flow_trajectory(100_000, params, dist, derive_seed(seed, "perf-traj"))
    t_traj = time.perf_counter() - t0
    return {
        "test": "performance",
        "marginal_seconds": t_marginal,
        "trajectory_seconds": t_traj,
        "pass": t_marginal < 1.0 and t_traj < 10.0,
    }


REGISTERED = {
    "marginal-ks": check_marginal_ks,
    "abelian": check_abelian,
    "oracle-equivalence": check_oracle_equivalence,
    "cross-sampler": check_cross_sampler,
    "self-similar": check_self_similar,
    "pure-jump": check_pure_jump,
}


def run_check(name: str, **kwargs) -> dict:
    try:
        fn = REGISTERED[name]
    except KeyError:
        raise UnknownCheck(
            f"unknown check {name!r}; registered: {sorted(REGISTERED)}"
        ) from None
    return fn(**kwargs)
