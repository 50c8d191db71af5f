"""Command-line entry point: ``dpdsa <subcommand> [flags]``.

Exit status is 0 on success, 1 on a configuration error and 2 when a
statistical acceptance check fails.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import harness
from ._accel import backend_name
from .asymptotics import build_model
from .config import ExperimentConfig, load_config, sensor_config, validate
from .engine import run
from .errors import ConfigError, DPDSAError

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_STATS = 2

EFFICIENCY_TOLERANCE = 0.35

log = logging.getLogger("dpdsa")


def ks_required(total: int) -> int:
    """Passes needed out of ``total`` KS tests (8 of 9 for the 3x3 study)."""
    return math.ceil(8 * total / 9)


def _config(args, mode=None) -> ExperimentConfig:
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = sensor_config(steps=1000, replications=1000, seed=0)
    over = dict(seed=args.seed, replications=args.reps, steps=args.steps)
    if getattr(args, "fit", False):
        over["fit"] = True
    if getattr(args, "record_every", None) is not None:
        over["record_every"] = args.record_every
    if mode is not None:
        over["mode"] = mode
    return cfg.with_overrides(**over)


def _out(args, default):
    out = Path(args.out or default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _timing(out: Path, start: float) -> None:
    harness.write_json(out / "timing.json", {"seconds": time.perf_counter() - start, "backend": backend_name()})


def cmd_run(args) -> int:
    cfg = _config(args)
    start = time.perf_counter()
    traj = run(cfg.problem, cfg.graph, cfg.noise, cfg.schedule, cfg.initial_state(), cfg.steps,
               record_every=cfg.record_every or None, rng=harness.replication_rng(cfg.seed, 0))
    elapsed = time.perf_counter() - start
    out = _out(args, "out/run")
    xs = cfg.problem.known_optimum
    harness.write_trajectory_csv(out / "trajectory.csv", traj, xs)
    last = traj.records[-1]
    harness.write_json(out / "summary.json", {
        "final": harness.state_json(traj.final, cfg.problem.n),
        "consensus_err": last.diagnostics.consensus_error,
        "dist_opt": last.diagnostics.dist_to_optimum,
        "runtime_seconds": elapsed,
        "backend": backend_name(),
        "config": cfg.to_dict(),
    })
    print(f"wrote {out / 'trajectory.csv'} ({len(traj.records)} records)")
    return EXIT_OK


def cmd_montecarlo(args) -> int:
    cfg = _config(args, "montecarlo")
    start = time.perf_counter()
    mc = harness.run_monte_carlo(cfg, args.parallel)
    out = _out(args, "out/montecarlo")
    harness.write_montecarlo(out, cfg, mc)
    _timing(out, start)
    print(json.dumps(mc.summary(), indent=2))
    return EXIT_OK


def cmd_asymptotics(args) -> int:
    cfg = _config(args)
    model = build_model(cfg.problem, cfg.graph, cfg.noise)
    payload = {
        "spectral_abscissa": model.abscissa,
        "lyapunov_residual": model.residual(),
        "Sigma": model.Sigma.tolist(),
        "SigmaAvg": model.SigmaAvg.tolist(),
        "agent_blocks": model.agent_blocks().tolist(),
        "agent_blocks_averaged": model.agent_blocks(model.SigmaAvg).tolist(),
        "dual_optimum": model.dual_optimum.tolist(),
    }
    if args.out:
        out = _out(args, args.out)
        harness.write_json(out / "asymptotics.json", payload)
    print(json.dumps(payload, indent=2))
    return EXIT_OK


def cmd_normality(args) -> int:
    cfg = _config(args, "normality")
    start = time.perf_counter()
    rep = harness.normality_study(cfg, args.parallel)
    out = _out(args, "out/normality")
    harness.write_normality(out, cfg, rep)
    _timing(out, start)
    need = ks_required(len(rep.ks_used))
    proto = "fitted" if rep.fit else "theoretical"
    print(f"KS ({proto}): {rep.passes}/{len(rep.ks_used)} pass (need {need})")
    print(f"KS (theoretical): {sum(r.passed for r in rep.ks_theoretical)}/{len(rep.ks_theoretical)}")
    print(f"KS (fitted): {sum(r.passed for r in rep.ks_fitted)}/{len(rep.ks_fitted)}")
    print(f"relative Frobenius error vs Sigma: {rep.relative_error:.4f}")
    return EXIT_OK if rep.passes >= need else EXIT_STATS


def cmd_efficiency(args) -> int:
    cfg = _config(args, "efficiency")
    start = time.perf_counter()
    rep = harness.efficiency_study(cfg, args.parallel)
    out = _out(args, "out/efficiency")
    harness.write_json(out / "efficiency.json", {"report": rep.to_dict(), "config": cfg.to_dict()})
    harness.write_samples_csv(out / "averaged_errors.csv", rep.avg_samples, cfg.problem.n, cfg.problem.m)
    _timing(out, start)
    print(f"relative Frobenius error vs averaged covariance: {rep.relative_error:.4f}")
    print(f"trace averaged {rep.avg_trace:.4f} vs last iterate (sqrt K) {rep.last_trace_common_scale:.4f}")
    ok = rep.relative_error <= EFFICIENCY_TOLERANCE and rep.averaging_helps
    return EXIT_OK if ok else EXIT_STATS


def cmd_replicate(args) -> int:
    reps = args.reps if args.reps is not None else 1000
    steps = args.steps if args.steps is not None else 1000
    seed = args.seed if args.seed is not None else 0
    out = _out(args, "out/replication")
    start = time.perf_counter()
    res = harness.replicate_paper(out, seed=seed, replications=reps, steps=steps,
                                  parallel=args.parallel, fit=True)
    _timing(out, start)
    d = res.to_dict()
    print(json.dumps(d, indent=2))
    need = ks_required(len(res.report.ks_fitted))
    ok = d["ks_passes_fitted"] >= need and res.agent1_consistent and res.consensus_shrinks
    return EXIT_OK if ok else EXIT_STATS


def cmd_validate(args) -> int:
    if not args.config:
        raise ConfigError("--config", "validate-config needs a config file")
    cfg = load_config(args.config)
    validate(cfg)
    print(f"ok: n={cfg.problem.n} m={cfg.problem.m} mode={cfg.mode}")
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "montecarlo": cmd_montecarlo,
    "asymptotics": cmd_asymptotics,
    "normality": cmd_normality,
    "efficiency": cmd_efficiency,
    "replicate-paper": cmd_replicate,
    "validate-config": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dpdsa", description="Distributed primal-dual stochastic approximation")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="YAML/JSON experiment config (default: builtin sensor study)")
        s.add_argument("--seed", type=int)
        s.add_argument("--reps", type=int)
        s.add_argument("--steps", type=int)
        s.add_argument("--out")
        s.add_argument("--fit", action="store_true", help="KS against the fitted normal law")
        s.add_argument("--parallel", type=int, default=1)
        s.add_argument("--record-every", type=int, dest="record_every")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("config error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DPDSAError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
