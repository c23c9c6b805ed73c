"""Command-line front end.

Every setting can come from a JSON config file (same keys as the long flags,
dashes or underscores) and is overridden by flags given on the command line.
The resolved settings are echoed to stderr as JSON; feeding that echo back
with ``--config`` reproduces the run.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional

import numpy as np

from . import __version__
from . import dynamics as dyn
from . import harness as hs
from . import percolation as pc
from .model import MODES, ModelParams, verify_cone_disjointness

COMMANDS = ("survival", "phase", "lambda-det", "lemma", "percolation", "cone-check", "dump")

DEFAULTS = dict(
    command=None, lam=0.1, speed=1.0, dim=2, model="lattice", strategy="percolation_follower",
    depth=20, horizon=None, trials=100, seed=None, lambda_grid=None, speed_grid=None,
    coupled=False, output=None, format="csv", step_dt=0.01, threads=None, lookahead=1.0,
    drift_speed=None, threshold=0.5, lambda_range="0.001:2", tolerance=1e-3, k="1,5",
    chi_samples=20000, c_hat=None, xmax=20, jmax=40, t_samples=16, fields=None,
)


class UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="evade",
        description="Simulate a finite-speed target among mobile Poisson particles.")
    a = p.add_argument
    a("command", nargs="?", choices=COMMANDS, help="what to run")
    a("--config", metavar="PATH", help="JSON file with settings (flags win)")
    a("--lambda", dest="lam", type=float, help="particle intensity (default 0.1)")
    a("--speed", type=float, help="target speed bound S (default 1)")
    a("--dim", type=int, help="space dimension d >= 2 (default 2)")
    a("--model", choices=MODES, help="lattice walks or Brownian continuum")
    a("--strategy", choices=hs.ev.STRATEGIES + ("percolation",),
      help="evasion strategy (default percolation_follower)")
    a("--depth", type=int, help="number of cell levels (default 20)")
    a("--horizon", type=float, help="survival horizon (default (depth+1)/S)")
    a("--trials", type=int, help="Monte Carlo trials per grid point (default 100)")
    a("--seed", type=int, help="master seed (default $EVADE_SEED or 0)")
    a("--lambda-grid", metavar="A:B:N", help="geometric intensity grid")
    a("--speed-grid", metavar="A:B:N", help="geometric speed grid")
    a("--coupled", action="store_const", const=True,
      help="reuse one realization per trial across the grid (thinning)")
    a("--output", metavar="PATH", help="result file (default stdout)")
    a("--format", choices=("csv", "json"), help="result format (default csv)")
    a("--step-dt", type=float, help="time step of Brownian paths (default 0.01)")
    a("--threads", type=int, help="worker processes (default: all cores)")
    a("--lookahead", type=float, help="greedy lookahead window (default 1)")
    a("--drift-speed", type=float, help="drift strategy velocity (default S)")
    a("--threshold", type=float, help="survival level for lambda-det (default 0.5)")
    a("--lambda-range", metavar="LO:HI", help="lambda-det search range (default 0.001:2)")
    a("--tolerance", type=float, help="lambda-det bracket width (default 1e-3)")
    a("--k", metavar="K1,K2", help="levels for the lemma oracles (default 1,5)")
    a("--chi-samples", type=int, help="chi draws in the lemma suite (default 20000)")
    a("--c-hat", type=float, help="entry-count constant for blocked fields")
    a("--xmax", type=int, help="cone-check: largest launch level (default 20)")
    a("--jmax", type=int, help="cone-check: largest target level (default 40)")
    a("--t-samples", type=int, help="cone-check: launch times per cell (default 16)")
    a("--fields", metavar="PATH", help="dump: also write the E/Y fields as CSV")
    a("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def _geometric(text: str, name: str) -> tuple:
    try:
        a, b, n = text.split(":")
        a, b, n = float(a), float(b), int(n)
    except ValueError:
        raise UsageError(f"{name} must look like A:B:N, got {text!r}")
    if n < 1 or a <= 0 or b <= 0:
        raise UsageError(f"{name} needs A, B > 0 and N >= 1")
    if n == 1:
        return (a,)
    return tuple(float(v) for v in np.geomspace(a, b, n))


def _range(text: str) -> tuple:
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise UsageError(f"--lambda-range must look like LO:HI, got {text!r}")
    return lo, hi


def resolve(args: argparse.Namespace) -> dict:
    """Defaults, then the config file, then explicit flags."""
    settings = dict(DEFAULTS)
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}")
        for key, value in cfg.items():
            k = key.replace("-", "_")
            k = "lam" if k == "lambda" else k
            if k not in settings:
                raise UsageError(f"unknown config key {key!r}")
            settings[k] = value
    for key, value in vars(args).items():
        if key != "config" and value is not None:
            settings[key] = value
    if settings["seed"] is None:
        env = os.environ.get("EVADE_SEED")
        try:
            settings["seed"] = int(env) if env else 0
        except ValueError:
            raise UsageError(f"EVADE_SEED must be an integer, got {env!r}")
    if settings["threads"] is None:
        settings["threads"] = hs.default_threads()
    if settings["command"] is None:
        raise UsageError("no command given")
    if settings["command"] == "phase" and settings["lambda_grid"] is None:
        settings["lambda_grid"] = "0.01:1:5"
    return settings


def _params(s: dict) -> ModelParams:
    return ModelParams(float(s["lam"]), float(s["speed"]), int(s["dim"]), s["model"])


def _config(s: dict) -> hs.ExperimentConfig:
    lg = _geometric(s["lambda_grid"], "--lambda-grid") if s["lambda_grid"] else None
    sg = _geometric(s["speed_grid"], "--speed-grid") if s["speed_grid"] else None
    coupled = bool(s["coupled"]) or s["command"] == "phase"
    return hs.ExperimentConfig(
        _params(s), s["strategy"], int(s["depth"]), s["horizon"], int(s["trials"]), int(s["seed"]),
        lg, sg, coupled, s["output"], s["format"], float(s["step_dt"]), float(s["lookahead"]),
        s["drift_speed"], int(s["threads"]), threshold=float(s["threshold"]),
        lambda_range=_range(s["lambda_range"]), tolerance=float(s["tolerance"]),
        c_hat=s["c_hat"])


def _emit(text: str, path: Optional[str]):
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _run(s: dict) -> int:
    cmd = s["command"]
    if cmd == "cone-check":
        rep = verify_cone_disjointness(_params(s), int(s["xmax"]), int(s["jmax"]), int(s["t_samples"]))
        print(str(rep))
        return 0 if rep.passed else 1
    cfg = _config(s)
    if cmd in ("survival", "phase"):
        res = hs.run_survival(cfg)
        _emit(res.to_csv() if cfg.fmt == "csv" else res.to_json(), cfg.output)
        return 0
    if cmd == "percolation":
        pp = pc.estimate_path_probability(cfg.params, cfg.depth, cfg.trials, cfg.master_seed,
                                          list(cfg.grid), step_dt=cfg.step_dt)
        rows = [hs.GridRow(lam, est, lo, hi, cfg.trials, 0, cfg.master_seed,
                           cfg.params.mode != "lattice")
                for lam, est, (lo, hi) in zip(pp.lambdas, pp.estimates, pp.intervals)]
        res = hs.ExperimentResult(rows, cfg, monotonicity_violations=pp.monotonicity_violations)
        _emit(res.to_csv() if cfg.fmt == "csv" else res.to_json(), cfg.output)
        return 0
    if cmd == "lambda-det":
        try:
            br = hs.estimate_lambda_det(cfg.params.speed, cfg)
        except hs.NoCrossing as exc:
            print(f"no crossing: {exc}", file=sys.stderr)
            return 1
        out = dict(speed=br.speed, depth=br.depth, threshold=br.threshold, lambda_lo=br.lo,
                   lambda_hi=br.hi, evaluations=br.evaluations, trials=cfg.trials,
                   seed=cfg.master_seed, format_version=hs.FORMAT_VERSION, label=br.label)
        if cfg.fmt == "json":
            text = json.dumps(out, indent=2)
        else:
            text = ",".join(out) + "\n" + ",".join(
                f'"{v}"' if isinstance(v, str) else repr(v) for v in out.values()) + "\n"
        _emit(text, cfg.output)
        return 0
    if cmd == "lemma":
        ks = tuple(int(v) for v in str(s["k"]).split(","))
        rep = hs.run_lemma_suite(cfg, psi_ks=ks, n_ks=ks, chi_samples=int(s["chi_samples"]))
        summary = dict(rep.summary(), format_version=hs.FORMAT_VERSION)
        _emit(json.dumps(summary, indent=2), cfg.output)
        return 0
    if cmd == "dump":
        if not cfg.output:
            raise UsageError("dump needs --output for the realization archive")
        window = dyn.make_window(cfg.params, cfg.depth)
        real = dyn.sample_realization(cfg.params, window, cfg.master_seed, step_dt=cfg.step_dt)
        dyn.save_realization(real, cfg.output)
        if s["fields"]:
            pc.export_fields_csv(s["fields"], pc.compute_vacancy_field(real, cfg.depth),
                                 pc.compute_blocked_field(real, cfg.depth, cfg.c_hat))
        print(json.dumps(dict(particles=real.n_particles, horizon=window.horizon,
                              region_radius=window.region_radius,
                              buffer_radius=window.buffer_radius)))
        return 0
    raise UsageError(f"unknown command {cmd!r}")  # pragma: no cover


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        settings = resolve(args)
        print(json.dumps(settings, sort_keys=True), file=sys.stderr)
        _config(settings)  # validation only
    except (UsageError, ValueError, TypeError) as exc:
        parser.print_usage(sys.stderr)
        print(f"evade: error: {exc}", file=sys.stderr)
        return 2
    try:
        return _run(settings)
    except UsageError as exc:
        print(f"evade: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - any runtime failure maps to exit 1
        print(f"evade: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
