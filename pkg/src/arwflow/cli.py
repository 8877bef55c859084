"""Command-line experiment runner.

Verbs: ``simulate-flow``, ``sample-limit``, ``verify``, ``plot``.  Every
run writes a manifest (config echo, derived diffusion parameters, seed,
version, wall time) atomically next to its artifacts; figures are rendered
alongside the delimited output.

Exit codes: 0 success / check pass, 1 check failure, 2 configuration
error, 3 I/O error.  Env var ``ARW_LOG`` sets the log level.
"""

from __future__ import annotations

import argparse
import inspect
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__, checks
from .errors import ArwError, ConfigError, MalformedInput, UnknownCheck
from .flow import flow_trajectory
from .limit import DiffusionParams, FidiRequest, running_max_bm, sample_fidi, sample_limit_path
from .model import EtaDistribution, ModelParams
from .randomness import derive_seed

log = logging.getLogger("arwflow")

EXIT_OK = 0
EXIT_CHECK_FAIL = 1
EXIT_CONFIG = 2
EXIT_IO = 3


def _atomic_write_text(path, text: str):
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_manifest(outdir, config: dict, derived: dict, seed: int, wall_time: float,
                   warnings_flags=None):
    manifest = {
        "config": _jsonable(config),
        "derived": _jsonable(derived),
        "seed": int(seed),
        "version": __version__,
        "wall_time": wall_time,
    }
    if warnings_flags:
        manifest["warnings"] = _jsonable(warnings_flags)
    _atomic_write_text(os.path.join(outdir, "manifest.json"),
                       json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def _resolve_params(args) -> ModelParams:
    zeta = getattr(args, "zeta", None)
    lam = getattr(args, "lam", None)
    if zeta is None and lam is None:
        raise ConfigError("one of --zeta / --lambda is required")
    try:
        if zeta is not None and lam is not None:
            return ModelParams(lam=lam, zeta=zeta)
        if zeta is not None:
            return ModelParams.from_zeta(zeta)
        return ModelParams.from_lambda(lam)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _ensure_outdir(out) -> str:
    outdir = out or "."
    os.makedirs(outdir, exist_ok=True)
    return outdir


def _run_replicas(fn, replicas: int, threads: int):
    if threads > 1 and replicas > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, range(replicas)))
    return [fn(i) for i in range(replicas)]


def cmd_simulate_flow(args) -> int:
    from .plotting import save_figure, staircase_figure

    t0 = time.perf_counter()
    params = _resolve_params(args)
    try:
        dist = EtaDistribution.parse(args.eta, params.zeta)
    except ArwError as exc:
        raise ConfigError(str(exc)) from exc
    if args.steps < 0:
        raise ConfigError("--steps must be >= 0")
    outdir = _ensure_outdir(args.out)

    def one(i: int):
        traj = flow_trajectory(args.steps, params, dist, derive_seed(args.seed, "replica", i))
        base = os.path.join(outdir, f"trajectory_{i:03d}")
        if args.format == "json":
            _atomic_write_text(base + ".json", json.dumps({
                "seed": traj.seed, "zeta": traj.zeta, "eta": traj.eta_label,
                "jumps": traj.jumps(),
            }) + "\n")
        else:
            traj.write_csv(base + ".csv")
        return traj

    trajs = _run_replicas(one, args.replicas, args.threads)
    lead = trajs[0]
    xs = np.arange(len(lead.values))
    save_figure(staircase_figure(xs, lead.values, ylabel="C_k", xlabel="k"),
                os.path.join(outdir, "trajectory_000.svg"))
    write_manifest(
        outdir,
        config={"command": "simulate-flow", "zeta": params.zeta, "lambda": params.lam,
                "eta": dist.label(), "steps": args.steps, "replicas": args.replicas,
                "format": args.format},
        derived={"sigma_s": math.sqrt(dist.sigma_s2), "sigma_p": math.sqrt(dist.sigma_p2),
                 "r": math.hypot(math.sqrt(dist.sigma_s2), math.sqrt(dist.sigma_p2)),
                 "rho": dist.rho},
        seed=args.seed,
        wall_time=time.perf_counter() - t0,
    )
    log.info("simulate-flow: %d replica(s) written to %s", args.replicas, outdir)
    return EXIT_OK


def cmd_sample_limit(args) -> int:
    from .plotting import line_figure, save_figure, staircase_figure

    t0 = time.perf_counter()
    if args.rho is None:
        raise ConfigError("--rho is required")
    if args.mode == "path" and args.rho == 0.0:
        raise ConfigError("--mode path needs rho in (0, 1]; for rho = 0 use --mode runmax")
    if args.mode != "runmax" and not (0.0 < args.rho <= 1.0) and args.rho != 0.0:
        raise ConfigError(f"rho must lie in [0, 1]: {args.rho}")
    outdir = _ensure_outdir(args.out)
    flags = {}

    if args.mode == "fidi":
        xs = args.xs or [args.xmax]
        try:
            req = FidiRequest(xs=xs, dx=args.dx, replicas=args.replicas, seed=args.seed)
            samples = sample_fidi(req, DiffusionParams.from_rho(args.rho))
        except (ValueError, ArwError) as exc:
            raise ConfigError(str(exc)) from exc
        path = os.path.join(outdir, "fidi.csv")
        header = ",".join(f"C_{x:g}" for x in xs)
        np.savetxt(path, samples, delimiter=",", header=header, comments="")
        fig_vals = np.sort(samples[:, -1])
        save_figure(
            line_figure(fig_vals, np.arange(1, fig_vals.size + 1) / fig_vals.size,
                        xlabel=f"C_{xs[-1]:g}", ylabel="empirical CDF"),
            os.path.join(outdir, "fidi.svg"))
    elif args.mode == "path":
        def one(i: int):
            import warnings as _w

            with _w.catch_warnings(record=True) as caught:
                _w.simplefilter("always")
                path, profile, meta = sample_limit_path(
                    args.rho, args.xmax, args.dx, derive_seed(args.seed, "replica", i),
                    substeps=args.substeps)
            base = os.path.join(outdir, f"limit_path_{i:03d}")
            path.write_csv(base + ".csv")
            profile.write_csv(base + "_profile.csv")
            if meta["under_resolved"]:
                flags[f"replica_{i}"] = "under_resolved"
            return path

        paths = _run_replicas(one, args.replicas, args.threads)
        lead = paths[0]
        js = lead.jump_list()
        save_figure(staircase_figure([x for x, _ in js] + [args.xmax],
                                     [v for _, v in js] + [js[-1][1]],
                                     ylabel="C_x"),
                    os.path.join(outdir, "limit_path_000.svg"))
    else:  # runmax
        def one(i: int):
            p = running_max_bm(args.xmax, args.dx, derive_seed(args.seed, "replica", i))
            p.write_csv(os.path.join(outdir, f"runmax_{i:03d}.csv"))
            return p

        paths = _run_replicas(one, args.replicas, args.threads)
        lead = paths[0]
        save_figure(line_figure(lead.grid, lead.values, ylabel="running max"),
                    os.path.join(outdir, "runmax_000.svg"))

    dp = DiffusionParams.from_rho(args.rho) if args.rho > 0 else None
    write_manifest(
        outdir,
        config={"command": "sample-limit", "mode": args.mode, "rho": args.rho,
                "xmax": args.xmax, "dx": args.dx, "xs": args.xs,
                "replicas": args.replicas, "format": args.format},
        derived={"sigma_s": args.rho, "sigma_p": 1.0,
                 "r": dp.r if dp else 1.0, "rho": args.rho},
        seed=args.seed,
        wall_time=time.perf_counter() - t0,
        warnings_flags=flags,
    )
    log.info("sample-limit(%s): artifacts written to %s", args.mode, outdir)
    return EXIT_OK


def cmd_verify(args) -> int:
    t0 = time.perf_counter()
    try:
        fn = checks.REGISTERED[args.check]
    except KeyError:
        raise UnknownCheck(
            f"unknown check {args.check!r}; registered: {sorted(checks.REGISTERED)}"
        ) from None
    sig = inspect.signature(fn)
    kwargs = {}
    for name in ("seed", "rho", "replicas"):
        val = getattr(args, name, None)
        if val is not None and name in sig.parameters:
            kwargs[name] = val
    result = fn(**kwargs)

    report = {k: v for k, v in result.items()
              if not isinstance(v, np.ndarray) and k not in ("headline_trajectory",)}
    outdir = _ensure_outdir(args.out)
    _atomic_write_text(os.path.join(outdir, f"verify_{args.check}.json"),
                       json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n")
    if isinstance(result.get("samples"), np.ndarray):
        from .plotting import ecdf_figure, save_figure
        from .stats import half_normal_cdf

        ref = None
        if "reference_scale" in result:
            scale = result["reference_scale"]
            ref = lambda c: half_normal_cdf(c, scale)  # noqa: E731
        fig = ecdf_figure(result["samples"], reference_cdf=ref,
                          other_sample=result.get("other_samples"),
                          title=args.check)
        save_figure(fig, os.path.join(outdir, f"verify_{args.check}.svg"))
    write_manifest(outdir,
                   config={"command": "verify", "check": args.check, **_jsonable(kwargs)},
                   derived={}, seed=kwargs.get("seed", -1),
                   wall_time=time.perf_counter() - t0)
    print(json.dumps(_jsonable(report), sort_keys=True))
    return EXIT_OK if report.get("pass") else EXIT_CHECK_FAIL


def _read_plot_csv(path):
    import csv as _csv

    try:
        with open(path, newline="") as fh:
            rows = list(_csv.reader(fh))
    except OSError:
        raise
    if not rows or len(rows[0]) < 2:
        raise MalformedInput(f"{path}: expected a two-column CSV with a header")
    header = [h.strip() for h in rows[0][:2]]
    xs, vs = [], []
    for r in rows[1:]:
        if not r:
            continue
        try:
            xs.append(float(r[0]))
            vs.append(float(r[1]))
        except ValueError as exc:
            raise MalformedInput(f"{path}: bad row {r!r}") from exc
    return header, np.asarray(xs), np.asarray(vs)


def cmd_plot(args) -> int:
    from .plotting import line_figure, save_figure, staircase_figure

    header, xs, vs = _read_plot_csv(args.input)
    style = args.style
    if style == "auto":
        if header == ["k", "C"] or header == ["x", "value"] and xs.size < 3:
            style = "step"
        elif xs.size >= 3 and np.allclose(np.diff(xs), xs[1] - xs[0]):
            style = "line"  # dense uniform grid: a diffusion path
        else:
            style = "step"
    if xs.size == 0:
        xs, vs = np.array([0.0]), np.array([0.0])
    if style == "step":
        fig = staircase_figure(xs, vs, xlabel=header[0], ylabel=header[1])
    else:
        fig = line_figure(xs, vs, xlabel=header[0], ylabel=header[1])
    save_figure(fig, args.output)
    log.info("plot: %s -> %s (%s)", args.input, args.output, style)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="arwflow", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"arwflow {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--replicas", type=int, default=1)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("simulate-flow", help="sample flow-process trajectories")
    p.add_argument("--zeta", type=float, default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--eta", default="bernoulli",
                   help="initial law: bernoulli | poisson | geometric | twopoint:M")
    p.add_argument("--steps", type=int, required=True)
    common(p)
    p.set_defaults(func=cmd_simulate_flow)

    p = sub.add_parser("sample-limit", help="sample the limiting avalanche process")
    p.add_argument("--mode", choices=("fidi", "path", "runmax"), default="path")
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--xmax", type=float, default=1.0)
    p.add_argument("--dx", type=float, default=1e-3)
    p.add_argument("--xs", type=float, nargs="+", default=None,
                   help="query times for --mode fidi")
    p.add_argument("--substeps", type=int, default=1)
    common(p)
    p.set_defaults(func=cmd_sample_limit)

    p = sub.add_parser("verify", help="run a registered verification check")
    p.add_argument("check", help=f"one of: {', '.join(sorted(checks.REGISTERED))}")
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--replicas", type=int, default=None)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("csv", "json"), default="json")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("plot", help="render a CSV artifact to SVG")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--style", choices=("auto", "step", "line"), default="auto")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("ARW_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors, which matches the config exit code
        return int(exc.code) if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (ConfigError, UnknownCheck) as exc:
        log.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MalformedInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ArwError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
