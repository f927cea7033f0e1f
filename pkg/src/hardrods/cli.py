"""Command line: ``python -m hardrods {simulate,analytic,verify,tagged}``.

Outputs go to ``--out``, else to ``$HARDRODS_OUT``, else ``./hardrods-out``.
"""
from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from pathlib import Path

import numpy as np

from .acceptance import SUITES, verify
from .analytics import (
    DiffusionParams,
    green_function,
    invert_y_model_a,
    invert_y_model_c,
    model_c_total_mass,
    predicted_density_model_a,
    predicted_density_model_c,
    predicted_gap,
    solve_v0,
    stationary_density,
    stationary_rate,
)
from .config import ConfigError, add_config_arguments, config_from_args
from .experiments import collect_tracks, run_experiment
from .measurement import increment_scaling, write_summary_json

ENV_OUT = "HARDRODS_OUT"


def default_out() -> str:
    return os.environ.get(ENV_OUT, "hardrods-out")


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def cmd_simulate(args) -> int:
    cfg = config_from_args(args, default_out=default_out()).validate()
    res = run_experiment(cfg, out=cfg.out)
    print(f"replicas={cfg.replicas} snapshots={res.summary['snapshot_count']} "
          f"mean_alive={res.summary['mean_alive']:.3f}")
    for w in res.summary["windows"]:
        print(f"window {w['window'][0]}:{w['window'][1]} density={w['mean_density']:.6f} "
              f"gap={w['mean_gap']}")
    for name, path in res.paths.items():
        print(f"{name}: {path}")
    return 0


ANALYTIC_FUNCTIONS = ("stationary", "green", "invert-a", "invert-c", "density-a", "density-c", "gap")


def _analytic_curve(args) -> tuple[np.ndarray, np.ndarray, dict]:
    p = DiffusionParams(a=args.a, sigma2=args.sigma2, epsilon=args.epsilon)
    lam = args.lam if args.lam is not None else stationary_rate(p)
    v1 = args.v1 if args.v1 is not None else solve_v0(p)
    fn = args.function
    default_to = {"stationary": 5.0 / lam, "green": v1, "invert-a": args.b + 5.0 / lam,
                  "density-a": args.b + 5.0 / lam}.get(fn, 1.0)
    lo = 0.0 if args.x_from is None else args.x_from
    hi = default_to if args.x_to is None else args.x_to
    if fn == "gap" and args.x_to is None:
        hi = 1.0 - 1.0 / args.points
    x = np.linspace(lo, hi, args.points)
    if fn == "stationary":
        y = stationary_density(DiffusionParams(a=lam / 2.0, sigma2=1.0), x)
    elif fn == "green":
        y = green_function(p, v1, x)
    elif fn == "invert-a":
        y = np.array([invert_y_model_a(v, args.b, lam) for v in x])
    elif fn == "invert-c":
        y = np.array([invert_y_model_c(v, p) for v in x])
    elif fn == "density-a":
        y = predicted_density_model_a(x, args.b, lam)
    elif fn == "density-c":
        y = predicted_density_model_c(x, p)
    else:
        y = predicted_gap(x, p)
    info = {"function": fn, "a": p.a, "sigma2": p.sigma2, "epsilon": p.epsilon, "b": args.b,
            "lambda": lam, "v1": v1, "v0": solve_v0(p), "model_c_total_mass": model_c_total_mass(p.kappa)}
    return x, np.asarray(y, dtype=float), info


def cmd_analytic(args) -> int:
    try:
        x, y, info = _analytic_curve(args)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "value"])
    w.writerows((repr(float(a)), repr(float(b))) for a, b in zip(x, y))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"analytic_{args.function}.csv").write_text(buf.getvalue())
        write_summary_json(out / f"analytic_{args.function}.json", info)
    sys.stdout.write(buf.getvalue())
    print(f"v0 = {info['v0']:.6f}  lambda = {info['lambda']:.6g}", file=sys.stderr)
    return 0


def cmd_verify(args) -> int:
    out = args.out or default_out()
    status, reports = verify(args.suite, out=out)
    gating = [r for r in reports if r.gating]
    print(f"{sum(r.passed for r in gating)}/{len(gating)} gating checks passed; report in "
          f"{Path(out) / f'verify_{args.suite}.json'}")
    return status


def cmd_tagged(args) -> int:
    cfg = config_from_args(args, default_out=default_out()).validate()
    lags = _float_list(args.lags)
    lo, hi = (float(v) for v in args.window.split(":"))
    t_start = cfg.burn_in if args.t_start is None else args.t_start
    t_stop = cfg.t_end if args.t_stop is None else args.t_stop
    min_len = 10 * max(lags)
    tracks = []
    for r in range(cfg.replicas):
        tracks += [t for t in collect_tracks(cfg, r, args.sample_every, (lo, hi), t_start, t_stop)
                   if t.duration >= min_len]
    if not tracks:
        print(f"no track stays in the window for {min_len} time units", file=sys.stderr)
        return 2
    slope, var = increment_scaling(tracks, lags)
    report = {"config": cfg.to_dict(), "lags": lags, "variance": var, "slope": slope, "tracks": len(tracks),
              "window": [lo, hi], "t_start": t_start, "t_stop": t_stop}
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_summary_json(out / "tagged.json", report)
    print(f"tracks={len(tracks)} slope={slope:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hardrods", description="Hard Brownian rods in one dimension")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run replicas and write profile, summary, snapshots, checkpoints")
    add_config_arguments(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analytic", help="tabulate a closed-form function as x,value CSV on stdout")
    p.add_argument("function", choices=ANALYTIC_FUNCTIONS)
    p.add_argument("--a", type=float, default=0.5, help="drift (also the barrier speed)")
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--b", type=float, default=1.0, help="mass budget for the barrier-pushed model")
    p.add_argument("--lambda", dest="lam", type=float, default=None, help="stationary rate; default 2a/sigma2")
    p.add_argument("--v1", type=float, default=None, help="killing level for green; default v0")
    p.add_argument("--from", dest="x_from", type=float, default=None)
    p.add_argument("--to", dest="x_to", type=float, default=None)
    p.add_argument("--points", type=int, default=101)
    p.add_argument("--out", default=None, help="also write analytic_<function>.csv and .json here")
    p.set_defaults(func=cmd_analytic)

    p = sub.add_parser("verify", help="run an acceptance suite; exit 0 iff all gating checks pass")
    p.add_argument("--suite", choices=sorted(SUITES), default="unit")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("tagged", help="increment scaling of tagged rods")
    add_config_arguments(p)
    p.add_argument("--lags", default="0.001,0.002,0.004,0.008", help="comma-separated time lags")
    p.add_argument("--window", default="0.3:0.7", help="track rods while their centre is in lo:hi")
    p.add_argument("--sample-every", type=int, default=5, help="steps between track samples")
    p.add_argument("--t-start", type=float, default=None)
    p.add_argument("--t-stop", type=float, default=None)
    p.set_defaults(func=cmd_tagged)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
