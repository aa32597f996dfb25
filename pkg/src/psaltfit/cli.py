"""Batch command-line interface.

Every command reads a JSON configuration (``--config``), optionally
overridden by the global flags, computes, and writes one artifact atomically
(temporary file + rename) or prints it to stdout.  Exit codes: 0 success,
1 computational failure, 2 configuration failure.
"""

from __future__ import annotations

import csv
import io
import json
import os
import sys
import tempfile

import click
import numpy as np

from .asymptotics import (
    OutlierPoint,
    asym_covariance,
    confidence_intervals,
    influence_function,
    outlier_lattice,
)
from .config import ConfigError, RunConfig, load_config, parse_config
from .datasets import lightbulb_plan, load_lightbulbs, read_lifetimes_csv
from .design import cpso
from .divergence import ObservedCounts, TuningParams, mepde, mle
from .model import TestPlan, load_plan
from .montecarlo import EstimatorSpec, gof_test, run_simulation
from .tuning import csm_select, iwj_select, min_error_select, wj_mse

# Kullback-Leibler corner of the divergence family; used when a command
# needs weights but no tuning was configured.
KL_TUNING = TuningParams(alpha=1.0, beta=0.0, gamma=1e-6)

PARAM_NAMES = ("a", "b", "mu")


def _theta_dict(theta) -> dict:
    return dict(zip(PARAM_NAMES, (float(v) for v in theta.as_array())))


def _resolve_plan_and_data(cfg: RunConfig, need_data: bool):
    """Return (plan, counts); the bundled dataset backs ``data: "bundled"``."""
    if cfg.data_path == "bundled":
        plan, counts = load_lightbulbs()
        if cfg.plan is not None or cfg.plan_path:
            plan = _resolve_plan(cfg)
        return plan, counts
    plan = _resolve_plan(cfg)
    if not need_data:
        return plan, None
    if not cfg.data_path:
        raise ConfigError("data is required for this command")
    with open(cfg.data_path) as fh:
        times = read_lifetimes_csv(fh)
    lifetimes = [times[g] for g in sorted(times)]
    return plan, ObservedCounts.from_lifetimes(plan, lifetimes)


def _resolve_plan(cfg: RunConfig) -> TestPlan:
    if cfg.plan is not None:
        return cfg.plan
    if cfg.plan_path:
        return load_plan(cfg.plan_path)
    if cfg.data_path == "bundled":
        return lightbulb_plan()
    raise ConfigError("plan is required for this command")


def _estimator_spec(cfg: RunConfig) -> EstimatorSpec:
    if cfg.estimator == "mle":
        return EstimatorSpec("mle")
    return EstimatorSpec("mepde", tuning=cfg.tuning)


def _run_fit(cfg: RunConfig):
    plan, counts = _resolve_plan_and_data(cfg, need_data=True)
    fit = _estimator_spec(cfg).fit(counts, plan)
    payload = {"estimator": _estimator_spec(cfg).label,
               "theta": _theta_dict(fit.theta_hat)}
    payload.update({k: v for k, v in fit.to_dict().items() if k != "theta"})
    rows = [{"param": n, "estimate": float(v)}
            for n, v in zip(PARAM_NAMES, fit.theta_hat.as_array())]
    return payload, rows


def _run_simulate(cfg: RunConfig):
    plan = _resolve_plan(cfg)
    reports = run_simulation(
        cfg.theta, plan, cfg.contamination, [_estimator_spec(cfg)],
        reps=cfg.reps, seed=cfg.seed,
    )
    rows = [row for rep in reports for row in rep.rows()]
    payload = {
        "reports": [
            {
                "estimator": rep.estimator,
                "bias": dict(zip(PARAM_NAMES, map(float, rep.abs_bias))),
                "rmse": dict(zip(PARAM_NAMES, map(float, rep.rmse))),
                "rmse_plus": rep.rmse_plus,
                "n_reps": rep.n_reps,
                "n_dropped": rep.n_dropped,
                "flagged": rep.flagged,
            }
            for rep in reports
        ]
    }
    return payload, rows


def _run_tune(cfg: RunConfig):
    plan, counts = _resolve_plan_and_data(cfg, need_data=True)
    if cfg.selector == "iwj":
        result = iwj_select(counts, plan, cfg.grid)
    elif cfg.selector == "wj":
        pilot = mle(counts, plan).theta_hat
        scored = [(wj_mse(pt, pilot, counts, plan), pt)
                  for pt in cfg.grid.points()]
        score, chosen = min(scored, key=lambda s: s[0])
        fit = mepde(counts, plan, chosen, init=pilot)
        from .tuning import SelectionResult

        result = SelectionResult(tuning=chosen, fit=fit,
                                 scores=[(pt, sc) for sc, pt in scored])
    elif cfg.selector in ("amax", "mae", "amed"):
        result = min_error_select(counts, plan, cfg.grid,
                                  criterion=cfg.selector.upper())
    else:
        result = csm_select(counts, plan, cfg.grid)
    a, b, g = result.tuning.as_tuple()
    payload = {
        "selector": cfg.selector,
        "tuning": {"alpha": a, "beta": b, "gamma": g},
        "theta": _theta_dict(result.fit.theta_hat),
        "flag": result.flag,
    }
    rows = [
        {"alpha": pt.alpha, "beta": pt.beta, "gamma": pt.gamma,
         "score": float(sc) if np.isfinite(sc) else "inf",
         "chosen": int(pt == result.tuning)}
        for pt, sc in result.scores
    ]
    return payload, rows


def _run_design(cfg: RunConfig):
    tuning = cfg.tuning or KL_TUNING
    solution, trace = cpso(
        cfg.theta, tuning, cfg.cost, cfg.stress_rates, cfg.n_inspections,
        settings=cfg.swarm, seed=cfg.seed, weighting=cfg.k_weighting,
    )
    payload = solution.to_dict()
    payload["iterations"] = trace[-1][0]
    rows = [
        {"group": i + 1, "n_units": int(n),
         "inspection_times": " ".join(f"{t:.9g}" for t in times)}
        for i, (n, times) in enumerate(
            zip(solution.allocation, solution.inspection_times)
        )
    ]
    return payload, rows


def _run_gof(cfg: RunConfig):
    plan, counts = _resolve_plan_and_data(cfg, need_data=True)
    ts, p = gof_test(counts, plan, b_reps=cfg.reps, seed=cfg.seed)
    payload = {"ts": float(ts), "p_value": float(p), "b_reps": cfg.reps}
    return payload, [payload]


def _run_cov(cfg: RunConfig):
    plan = _resolve_plan(cfg)
    tuning = cfg.tuning or KL_TUNING
    mats = asym_covariance(cfg.theta, plan, tuning, weighting=cfg.k_weighting)
    payload = {
        "j": mats.j_mat.tolist(),
        "k": mats.k_mat.tolist(),
        "cov": mats.cov.tolist(),
        "trace": float(np.trace(mats.cov)),
        "intervals": {
            name: [float(lo), float(hi)]
            for name, (lo, hi) in zip(
                PARAM_NAMES,
                confidence_intervals(_FixedFit(cfg.theta), mats.cov),
            )
        },
    }
    rows = [
        {"matrix": name, "row": i, "col": j, "value": float(m[i, j])}
        for name, m in (("j", mats.j_mat), ("k", mats.k_mat),
                        ("cov", mats.cov))
        for i in range(3)
        for j in range(3)
    ]
    return payload, rows


class _FixedFit:
    """Adapter: Wald intervals around externally supplied parameters."""

    def __init__(self, theta):
        self.theta_hat = theta


def _run_influence(cfg: RunConfig):
    plan = _resolve_plan(cfg)
    tuning = cfg.tuning or KL_TUNING
    if cfg.outlier_cells is not None:
        if len(cfg.outlier_cells) != len(plan):
            raise ConfigError("outlier_cells needs one cell index per group")
        combos = [
            tuple(
                OutlierPoint(np.eye(g.n_cells)[j])
                for g, j in zip(plan, cfg.outlier_cells)
            )
        ]
    else:
        combos = list(outlier_lattice(plan))
    rows = []
    for points in combos:
        cells = [int(np.argmax(pt.indicator)) for pt in points]
        inf = influence_function(points, cfg.theta, plan, tuning)
        rows.append(
            {"cells": " ".join(map(str, cells)),
             **dict(zip(("if_a", "if_b", "if_mu"), map(float, inf)))}
        )
    return {"influence": rows}, rows


RUNNERS = {
    "fit": _run_fit,
    "simulate": _run_simulate,
    "tune": _run_tune,
    "design": _run_design,
    "gof": _run_gof,
    "cov": _run_cov,
    "influence": _run_influence,
}


def _render(payload, rows, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()))
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def _write_atomic(path: str, text: str):
    """Write via a sibling temp file and rename; readers never see partials."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def run(cfg: RunConfig) -> int:
    """Execute a validated configuration; returns the process exit code."""
    try:
        payload, rows = RUNNERS[cfg.command](cfg)
        text = _render(payload, rows, cfg.format)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        click.echo(f"error: {exc}", err=True)
        return 1
    if cfg.output_path:
        _write_atomic(cfg.output_path, text)
    else:
        click.echo(text, nl=False)
    return 0


def _apply_overrides(cfg: RunConfig, seed, out, fmt, threads, reps,
                     k_weighting):
    if seed is not None:
        cfg.seed = seed
    if out is not None:
        cfg.output_path = out
    if fmt is not None:
        cfg.format = fmt
    if threads is not None:
        cfg.threads = threads
    if reps is not None:
        if reps < 1:
            raise ConfigError("reps must be at least 1")
        cfg.reps = reps
    if k_weighting is not None:
        cfg.k_weighting = k_weighting
    return cfg


def _make_command(name: str):
    @click.command(name=name, help=f"Run the {name} pipeline from a config.")
    @click.option("--config", "config_path", type=click.Path(exists=True),
                  required=True, help="JSON configuration document.")
    @click.option("--seed", type=int, default=None, help="Root RNG seed.")
    @click.option("--out", type=click.Path(), default=None,
                  help="Output artifact path (stdout when omitted).")
    @click.option("--format", "fmt", type=click.Choice(["csv", "json"]),
                  default=None, help="Artifact format.")
    @click.option("--threads", type=int, default=None,
                  help="Worker processes for replicate loops.")
    @click.option("--reps", type=int, default=None,
                  help="Replicate/bootstrap count override.")
    @click.option("--k-weighting", type=click.Choice(["literal",
                                                      "proportional"]),
                  default=None, help="Meat-matrix group weighting.")
    def command(config_path, seed, out, fmt, threads, reps, k_weighting):
        try:
            cfg = load_config(config_path)
            if cfg.command != name:
                raise ConfigError(
                    f"config declares command {cfg.command!r}, "
                    f"but {name!r} was invoked"
                )
            _apply_overrides(cfg, seed, out, fmt, threads, reps, k_weighting)
        except ConfigError as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(2)
        except OSError as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(2)
        sys.exit(run(cfg))

    return command


@click.group()
def main():
    """Reliability inference and test planning for one-shot devices."""


for _name in RUNNERS:
    main.add_command(_make_command(_name))


if __name__ == "__main__":
    main()
