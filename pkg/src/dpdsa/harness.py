"""Monte-Carlo orchestration and the normality/efficiency studies."""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .asymptotics import AsymptoticModel, build_model, reduce_state
from .config import ExperimentConfig, sensor_config
from .engine import Trajectory, consensus_error, distance_to_optimum, run, schedule
from .errors import DegenerateVariance
from .stats import (
    covariance_standard_error,
    ks_fitted_normal_test,
    ks_normal_test,
    mean_standard_error,
    relative_frobenius,
    sample_covariance,
)

log = logging.getLogger(__name__)


def replication_rng(seed: int, rep: int) -> np.random.Generator:
    """Independent stream for replication ``rep``, keyed by ``(seed, rep)``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(rep,)))


def fmt(x) -> str:
    return format(float(x), ".17g")


# ------------------------------------------------------------- monte carlo

@dataclass(eq=False)
class MonteCarloResult:
    """Per-replication outputs, rows ordered by replication index."""

    steps: int
    final_X: np.ndarray
    final_Lambda: np.ndarray
    mean_X: np.ndarray
    mean_Lambda: np.ndarray
    consensus: np.ndarray
    dist_opt: Optional[np.ndarray]
    marks: tuple = ()
    consensus_at: Optional[np.ndarray] = None

    @property
    def replications(self) -> int:
        return self.final_X.shape[0]

    def summary(self) -> dict:
        out = {
            "replications": self.replications,
            "steps": self.steps,
            "consensus_error_median": float(np.median(self.consensus)),
            "consensus_error_mean": float(np.mean(self.consensus)),
        }
        if self.dist_opt is not None:
            out["dist_opt_median"] = float(np.median(self.dist_opt))
            out["dist_opt_mean"] = float(np.mean(self.dist_opt))
        if self.consensus_at is not None:
            out["consensus_error_median_at"] = {
                str(k): float(np.median(self.consensus_at[:, i])) for i, k in enumerate(self.marks)
            }
        return out


def _one_replication(cfg: ExperimentConfig, rep: int, marks: tuple):
    traj = run(cfg.problem, cfg.graph, cfg.noise, cfg.schedule, cfg.initial_state(), cfg.steps,
               rng=replication_rng(cfg.seed, rep), record_at=marks)
    n = cfg.problem.n
    at = {r.updates: r.diagnostics.consensus_error for r in traj.records}
    return rep, traj.final.X, traj.final.Lambda, traj.mean_X, traj.mean_Lambda, [at[k] for k in marks]


def _replication_batch(cfg, reps, marks):
    return [_one_replication(cfg, r, marks) for r in reps]


def run_monte_carlo(cfg: ExperimentConfig, parallel: int = 1, marks: Sequence[int] = ()) -> MonteCarloResult:
    """``cfg.replications`` independent runs; output independent of ``parallel``."""
    marks = tuple(sorted(set(int(k) for k in marks if 1 <= k <= cfg.steps)))
    reps = list(range(cfg.replications))
    if parallel > 1 and len(reps) > 1:
        chunks = [reps[i::parallel] for i in range(parallel)]
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            parts = pool.map(_replication_batch, [cfg] * len(chunks), chunks, [marks] * len(chunks))
            rows = [row for part in parts for row in part]
    else:
        rows = _replication_batch(cfg, reps, marks)
    rows.sort(key=lambda r: r[0])
    n = cfg.problem.n
    fX = np.stack([r[1] for r in rows])
    xs = cfg.problem.known_optimum
    return MonteCarloResult(
        steps=cfg.steps,
        final_X=fX,
        final_Lambda=np.stack([r[2] for r in rows]),
        mean_X=np.stack([r[3] for r in rows]),
        mean_Lambda=np.stack([r[4] for r in rows]),
        consensus=np.array([consensus_error(x, n) for x in fX]),
        dist_opt=None if xs is None else np.array([distance_to_optimum(x, n, xs) for x in fX]),
        marks=marks,
        consensus_at=np.array([r[5] for r in rows]) if marks else None,
    )


# ---------------------------------------------------------------- studies

def _component_labels(n, m):
    return [(i + 1, q + 1) for i in range(n) for q in range(m)]


def _ks_table(samples, variances, alpha, fit):
    rows = []
    for c in range(samples.shape[1]):
        col = samples[:, c]
        if fit:
            res = ks_fitted_normal_test(col, alpha)
        else:
            res = ks_normal_test(col, 0.0, float(variances[c]), alpha)
        rows.append(res)
    return rows


def _ks_rows_json(results, labels):
    return [
        {"agent": a, "component": q, "statistic": r.statistic, "critical": r.critical,
         "passed": bool(r.passed), "mean": r.mean, "variance": r.variance, "n": r.n}
        for (a, q), r in zip(labels, results)
    ]


def _check_nondegenerate(model: AsymptoticModel):
    d = np.diag(model.primal_block())
    if not np.all(d > 1e-14):
        raise DegenerateVariance("limit covariance has zero diagonal entries (no noise in the model)")


@dataclass(eq=False)
class NormalityReport:
    n: int
    m: int
    steps: int
    gamma: float
    samples: np.ndarray
    ks_theoretical: list
    ks_fitted: list
    fit: bool
    empirical_cov: np.ndarray
    theoretical_cov: np.ndarray
    relative_error: float
    cov_standard_error: np.ndarray
    mean: np.ndarray
    mean_standard_error: np.ndarray
    model: AsymptoticModel = field(repr=False)
    mc: MonteCarloResult = field(repr=False)

    @property
    def ks_used(self):
        return self.ks_fitted if self.fit else self.ks_theoretical

    @property
    def passes(self) -> int:
        return sum(r.passed for r in self.ks_used)

    def to_dict(self) -> dict:
        labels = _component_labels(self.n, self.m)
        return {
            "steps": self.steps,
            "gamma_K": self.gamma,
            "replications": int(self.samples.shape[0]),
            "protocol": "fitted" if self.fit else "theoretical",
            "ks_passes": self.passes,
            "ks_total": len(self.ks_used),
            "ks_theoretical": _ks_rows_json(self.ks_theoretical, labels),
            "ks_fitted": _ks_rows_json(self.ks_fitted, labels),
            "relative_frobenius_error": self.relative_error,
            "empirical_covariance": self.empirical_cov.tolist(),
            "theoretical_covariance": self.theoretical_cov.tolist(),
            "empirical_covariance_standard_error": self.cov_standard_error.tolist(),
            "sample_mean": self.mean.tolist(),
            "sample_mean_standard_error": self.mean_standard_error.tolist(),
            "spectral_abscissa": self.model.abscissa,
            "monte_carlo": self.mc.summary(),
        }


def normality_study(cfg: ExperimentConfig, parallel: int = 1, fit: Optional[bool] = None,
                    marks: Sequence[int] = (), model: Optional[AsymptoticModel] = None) -> NormalityReport:
    """Last-iterate errors ``(x_i,K - x*)/sqrt(gamma_K)`` against ``N(0, Sigma)``.

    KS tests are run both against the theoretical variances and against the
    fitted normal law; ``fit`` selects which one decides pass/fail.
    """
    fit = cfg.fit if fit is None else fit
    model = model or build_model(cfg.problem, cfg.graph, cfg.noise)
    _check_nondegenerate(model)
    mc = run_monte_carlo(cfg, parallel, marks)
    gamma = schedule(cfg.schedule, cfg.steps)
    xs = cfg.problem.stacked_optimum()
    samples = (mc.final_X - xs) / np.sqrt(gamma)
    theo = model.primal_block()
    emp = sample_covariance(samples)
    return NormalityReport(
        n=cfg.problem.n, m=cfg.problem.m, steps=cfg.steps, gamma=gamma, samples=samples,
        ks_theoretical=_ks_table(samples, np.diag(theo), cfg.alpha, False),
        ks_fitted=_ks_table(samples, None, cfg.alpha, True),
        fit=fit, empirical_cov=emp, theoretical_cov=theo,
        relative_error=relative_frobenius(emp, theo),
        cov_standard_error=covariance_standard_error(samples),
        mean=samples.mean(axis=0), mean_standard_error=mean_standard_error(samples),
        model=model, mc=mc,
    )


@dataclass(eq=False)
class EfficiencyReport:
    steps: int
    avg_samples: np.ndarray
    last_samples: np.ndarray
    avg_cov: np.ndarray
    theoretical_cov: np.ndarray
    relative_error: float
    avg_trace: float
    last_trace_common_scale: float
    last_trace_gamma_scale: float
    theoretical_last_trace: float
    model: AsymptoticModel = field(repr=False)

    @property
    def averaging_helps(self) -> bool:
        return self.avg_trace < self.last_trace_common_scale

    def to_dict(self) -> dict:
        return {
            "steps": self.steps,
            "replications": int(self.avg_samples.shape[0]),
            "relative_frobenius_error": self.relative_error,
            "averaged_trace": self.avg_trace,
            "last_iterate_trace_sqrtK_scale": self.last_trace_common_scale,
            "last_iterate_trace_gamma_scale": self.last_trace_gamma_scale,
            "theoretical_averaged_trace": float(np.trace(self.theoretical_cov)),
            "theoretical_last_iterate_trace_gamma_scale": self.theoretical_last_trace,
            "averaging_reduces_error": bool(self.averaging_helps),
            "empirical_covariance": self.avg_cov.tolist(),
            "theoretical_covariance": self.theoretical_cov.tolist(),
            "empirical_covariance_standard_error": covariance_standard_error(self.avg_samples).tolist(),
            "sample_mean": self.avg_samples.mean(axis=0).tolist(),
        }


def efficiency_study(cfg: ExperimentConfig, parallel: int = 1,
                     model: Optional[AsymptoticModel] = None) -> EfficiencyReport:
    """Polyak averages ``sqrt(K) * mean_k(x_k - x*)`` against ``F^-1 Sigma1 F^-T``.

    The last iterate is reported at the same ``sqrt(K)`` scale (the error
    comparison averaging is meant to win) and at the ``1/sqrt(gamma_K)``
    scale of the normality study.
    """
    model = model or build_model(cfg.problem, cfg.graph, cfg.noise)
    _check_nondegenerate(model)
    mc = run_monte_carlo(cfg, parallel)
    K = cfg.steps
    xs = cfg.problem.stacked_optimum()
    avg = np.sqrt(K) * (mc.mean_X - xs)
    last = np.sqrt(K) * (mc.final_X - xs)
    gamma = schedule(cfg.schedule, K)
    theo = model.primal_block(model.SigmaAvg)
    emp = sample_covariance(avg)
    return EfficiencyReport(
        steps=K, avg_samples=avg, last_samples=last, avg_cov=emp, theoretical_cov=theo,
        relative_error=relative_frobenius(emp, theo),
        avg_trace=float(np.trace(emp)),
        last_trace_common_scale=float(np.trace(sample_covariance(last))),
        last_trace_gamma_scale=float(np.trace(sample_covariance((mc.final_X - xs) / np.sqrt(gamma)))),
        theoretical_last_trace=float(np.trace(model.primal_block())),
        model=model,
    )


# ----------------------------------------------------------------- output

def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_trajectory_csv(path, traj: Trajectory, xstar=None) -> None:
    n, m = traj.n, traj.m
    header = ["k", "gamma", "agent"] + [f"x{q}" for q in range(m)] + [f"lambda{q}" for q in range(m)]
    header += ["consensus_err", "dist_opt"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for rec in traj.records:
            X = rec.state.X.reshape(n, m)
            L = rec.state.Lambda.reshape(n, m)
            cons = consensus_error(rec.state.X, n)
            dist = "" if xstar is None else fmt(distance_to_optimum(rec.state.X, n, xstar))
            for i in range(n):
                w.writerow([rec.updates, fmt(rec.gamma), i + 1] + [fmt(v) for v in X[i]]
                           + [fmt(v) for v in L[i]] + [fmt(cons), dist])


def state_json(state, n) -> dict:
    return {"k": state.k, "updates": state.updates,
            "x": state.X.reshape(n, -1).tolist(), "lambda": state.Lambda.reshape(n, -1).tolist()}


def write_samples_csv(path, samples, n, m, prefix="err") -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rep"] + [f"{prefix}_a{i + 1}_c{q + 1}" for i in range(n) for q in range(m)])
        for r, row in enumerate(samples):
            w.writerow([r] + [fmt(v) for v in row])


def write_ks_csv(path, report: NormalityReport) -> None:
    labels = _component_labels(report.n, report.m)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["agent", "component", "protocol", "statistic", "critical", "passed", "mean", "variance"])
        for name, res in (("theoretical", report.ks_theoretical), ("fitted", report.ks_fitted)):
            for (a, q), r in zip(labels, res):
                w.writerow([a, q, name, fmt(r.statistic), fmt(r.critical), int(r.passed), fmt(r.mean), fmt(r.variance)])


def write_montecarlo(out: Path, cfg: ExperimentConfig, mc: MonteCarloResult) -> None:
    out.mkdir(parents=True, exist_ok=True)
    n, m = cfg.problem.n, cfg.problem.m
    write_samples_csv(out / "final_x.csv", mc.final_X, n, m, "x")
    write_samples_csv(out / "final_lambda.csv", mc.final_Lambda, n, m, "lambda")
    write_json(out / "montecarlo.json", {"summary": mc.summary(), "config": cfg.to_dict()})


def write_normality(out: Path, cfg: ExperimentConfig, rep: NormalityReport) -> None:
    out.mkdir(parents=True, exist_ok=True)
    write_samples_csv(out / "scaled_errors.csv", rep.samples, rep.n, rep.m)
    write_ks_csv(out / "ks.csv", rep)
    write_json(out / "normality.json", {"report": rep.to_dict(), "config": cfg.to_dict()})


# ------------------------------------------------------------- replication

@dataclass(eq=False)
class ReplicationResult:
    report: NormalityReport
    agent1_mean: np.ndarray
    agent1_standard_error: np.ndarray
    consensus_median_early: float
    consensus_median_final: float

    @property
    def agent1_consistent(self) -> bool:
        return bool(np.all(np.abs(self.agent1_mean - np.array([1.0, 2.0, 3.0])) <= 3 * self.agent1_standard_error))

    @property
    def consensus_shrinks(self) -> bool:
        return self.consensus_median_final < self.consensus_median_early

    def to_dict(self) -> dict:
        return {
            "agent1_mean": self.agent1_mean.tolist(),
            "agent1_standard_error": self.agent1_standard_error.tolist(),
            "agent1_within_3se": self.agent1_consistent,
            "consensus_median_k10": self.consensus_median_early,
            "consensus_median_final": self.consensus_median_final,
            "consensus_shrinks": self.consensus_shrinks,
            "ks_passes_fitted": sum(r.passed for r in self.report.ks_fitted),
            "ks_passes_theoretical": sum(r.passed for r in self.report.ks_theoretical),
        }


def replicate_paper(out_dir=None, seed: int = 0, replications: int = 1000, steps: int = 1000,
                    parallel: int = 1, fit: bool = True) -> ReplicationResult:
    """Full parameter-estimation study with per-agent estimate files."""
    cfg = sensor_config(steps=steps, replications=replications, seed=seed, mode="normality", fit=fit)
    early = min(10, steps)
    rep = normality_study(cfg, parallel=parallel, fit=fit, marks=(early, steps))
    mc = rep.mc
    a1 = mc.final_X[:, :3]
    res = ReplicationResult(
        report=rep,
        agent1_mean=a1.mean(axis=0),
        agent1_standard_error=mean_standard_error(a1),
        consensus_median_early=float(np.median(mc.consensus_at[:, 0])),
        consensus_median_final=float(np.median(mc.consensus_at[:, -1])),
    )
    if out_dir is not None:
        out = Path(out_dir)
        write_normality(out, cfg, rep)
        n, m = cfg.problem.n, cfg.problem.m
        for i in range(n):
            write_samples_csv(out / f"agent{i + 1}_estimates.csv", mc.final_X[:, i * m:(i + 1) * m], 1, m, "x")
        model = rep.model
        write_json(out / "sigma_comparison.json", {
            "empirical": rep.empirical_cov.tolist(),
            "theoretical": rep.theoretical_cov.tolist(),
            "relative_frobenius_error": rep.relative_error,
            "agent_blocks_theoretical": model.agent_blocks().tolist(),
        })
        write_json(out / "replication.json", res.to_dict())
    return res
