"""Run configuration: JSON ingestion, validation and defaults.

A configuration document selects a command and provides its inputs.  Every
validation error carries the dotted path of the offending key so batch users
can fix documents without reading tracebacks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields

from .design import CostParams, SwarmSettings
from .divergence import TuningParams
from .model import ModelParams, TestPlan, plan_from_dict
from .montecarlo import ContaminationSpec
from .tuning import TuningGrid, default_grid

__all__ = ["ConfigError", "RunConfig", "parse_config", "load_config"]

COMMANDS = ("fit", "simulate", "tune", "design", "gof", "cov", "influence")


class ConfigError(ValueError):
    """Invalid configuration document; message names the offending path."""


@dataclass
class RunConfig:
    command: str
    plan: TestPlan | None = None
    plan_path: str | None = None
    data_path: str | None = None
    theta: ModelParams | None = None
    tuning: TuningParams | None = None
    grid: TuningGrid = field(default_factory=default_grid)
    contamination: ContaminationSpec = field(default_factory=ContaminationSpec)
    cost: CostParams | None = None
    swarm: SwarmSettings = field(default_factory=SwarmSettings)
    stress_rates: tuple | None = None
    n_inspections: tuple | None = None
    outlier_cells: tuple | None = None
    selector: str = "csm"
    estimator: str = "mle"
    reps: int = 1000
    seed: int = 0
    output_path: str | None = None
    format: str = "json"
    k_weighting: str = "literal"
    threads: int = 1

    def to_dict(self) -> dict:
        """Semantic round-trip companion of ``parse_config``."""
        doc: dict = {"command": self.command, "seed": self.seed,
                     "format": self.format, "k_weighting": self.k_weighting,
                     "threads": self.threads, "reps": self.reps,
                     "selector": self.selector, "estimator": self.estimator}
        if self.plan_path:
            doc["plan"] = self.plan_path
        if self.data_path:
            doc["data"] = self.data_path
        if self.theta:
            doc["theta"] = {"a": self.theta.a, "b": self.theta.b,
                            "mu": self.theta.mu}
        if self.tuning:
            doc["tuning"] = {"alpha": self.tuning.alpha,
                             "beta": self.tuning.beta,
                             "gamma": self.tuning.gamma}
        doc["grid"] = {"alphas": list(self.grid.alphas),
                       "betas": list(self.grid.betas),
                       "gammas": list(self.grid.gammas)}
        doc["contamination"] = {
            "epsilon": self.contamination.epsilon,
            "contaminant_params": list(self.contamination.contaminant_params),
            "plain_weibull": self.contamination.plain_weibull,
        }
        if self.cost:
            doc["cost"] = {"c_a": self.cost.c_a, "c_u": self.cost.c_u,
                           "c_0": self.cost.c_0, "c_s": self.cost.c_s,
                           "c_v": self.cost.c_v, "budget": self.cost.budget,
                           "tau_max": self.cost.tau_max}
        doc["swarm"] = {f.name: getattr(self.swarm, f.name)
                        for f in fields(SwarmSettings)}
        if self.stress_rates is not None:
            doc["stress_rates"] = list(self.stress_rates)
        if self.n_inspections is not None:
            doc["n_inspections"] = list(self.n_inspections)
        if self.outlier_cells is not None:
            doc["outlier_cells"] = list(self.outlier_cells)
        if self.output_path:
            doc["out"] = self.output_path
        return doc


def _require(doc: dict, key: str, path: str):
    if key not in doc:
        raise ConfigError(f"missing required key {path}{key}")
    return doc[key]


def _as_mapping(value, path: str) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(f"{path} must be an object")
    return value


def _reject_unknown(doc: dict, allowed, path: str):
    unknown = set(doc) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key {path}{sorted(unknown)[0]}")


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path} must be a number")
    return float(value)


def _integer(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path} must be an integer")
    return value


def _parse_theta(doc, path: str) -> ModelParams:
    doc = _as_mapping(doc, path)
    _reject_unknown(doc, ("a", "b", "mu"), path + ".")
    try:
        return ModelParams(
            _number(_require(doc, "a", path + "."), path + ".a"),
            _number(_require(doc, "b", path + "."), path + ".b"),
            _number(_require(doc, "mu", path + "."), path + ".mu"),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _parse_tuning(doc, path: str) -> TuningParams:
    doc = _as_mapping(doc, path)
    _reject_unknown(doc, ("alpha", "beta", "gamma"), path + ".")
    alpha = _number(_require(doc, "alpha", path + "."), path + ".alpha")
    beta = _number(_require(doc, "beta", path + "."), path + ".beta")
    gamma = _number(_require(doc, "gamma", path + "."), path + ".gamma")
    try:
        return TuningParams(alpha, beta, gamma)
    except ValueError as exc:
        msg = str(exc)
        for name, value in (("beta", beta), ("gamma", gamma), ("alpha", alpha)):
            if name in msg:
                raise ConfigError(f"{path}.{name}: {msg}") from exc
        raise ConfigError(f"{path}: {msg}") from exc


def _parse_grid(doc, path: str) -> TuningGrid:
    doc = _as_mapping(doc, path)
    _reject_unknown(doc, ("alphas", "betas", "gammas"), path + ".")
    axes = {}
    for key in ("alphas", "betas", "gammas"):
        vals = _require(doc, key, path + ".")
        if not isinstance(vals, list) or not vals:
            raise ConfigError(f"{path}.{key} must be a nonempty array")
        axes[key] = tuple(_number(v, f"{path}.{key}[{i}]")
                          for i, v in enumerate(vals))
    try:
        return TuningGrid(**axes)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _parse_contamination(doc, path: str) -> ContaminationSpec:
    doc = _as_mapping(doc, path)
    allowed = ("epsilon", "contaminant_params", "plain_weibull")
    _reject_unknown(doc, allowed, path + ".")
    kwargs = {}
    if "epsilon" in doc:
        kwargs["epsilon"] = _number(doc["epsilon"], path + ".epsilon")
    if "contaminant_params" in doc:
        vals = doc["contaminant_params"]
        if not isinstance(vals, list) or len(vals) != 3:
            raise ConfigError(f"{path}.contaminant_params must have 3 entries")
        kwargs["contaminant_params"] = tuple(
            _number(v, f"{path}.contaminant_params[{i}]")
            for i, v in enumerate(vals)
        )
    if "plain_weibull" in doc:
        if not isinstance(doc["plain_weibull"], bool):
            raise ConfigError(f"{path}.plain_weibull must be a boolean")
        kwargs["plain_weibull"] = doc["plain_weibull"]
    try:
        return ContaminationSpec(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{path}.epsilon: {exc}") from exc


def _parse_cost(doc, path: str) -> CostParams:
    doc = _as_mapping(doc, path)
    keys = ("c_a", "c_u", "c_0", "c_s", "c_v", "budget", "tau_max")
    _reject_unknown(doc, keys, path + ".")
    vals = {k: _number(_require(doc, k, path + "."), f"{path}.{k}") for k in keys}
    try:
        return CostParams(**vals)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _parse_swarm(doc, path: str) -> SwarmSettings:
    doc = _as_mapping(doc, path)
    names = [f.name for f in fields(SwarmSettings)]
    _reject_unknown(doc, names, path + ".")
    kwargs = {}
    for f in fields(SwarmSettings):
        if f.name not in doc:
            continue
        if f.type == "int" or isinstance(f.default, int):
            kwargs[f.name] = _integer(doc[f.name], f"{path}.{f.name}")
        else:
            kwargs[f.name] = _number(doc[f.name], f"{path}.{f.name}")
    return SwarmSettings(**kwargs)


def _parse_plan(doc, path: str) -> TestPlan:
    doc = _as_mapping(doc, path)
    _reject_unknown(doc, ("groups",), path + ".")
    groups = _require(doc, "groups", path + ".")
    if not isinstance(groups, list) or not groups:
        raise ConfigError(f"{path}.groups must be a nonempty array")
    for i, g in enumerate(groups):
        g = _as_mapping(g, f"{path}.groups[{i}]")
        _reject_unknown(g, ("n", "nu", "tau"), f"{path}.groups[{i}].")
        for key in ("n", "nu", "tau"):
            _require(g, key, f"{path}.groups[{i}].")
    try:
        return plan_from_dict(doc)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


TOP_KEYS = (
    "command", "plan", "data", "theta", "tuning", "grid", "contamination",
    "cost", "swarm", "stress_rates", "n_inspections", "outlier_cells",
    "selector", "estimator", "reps", "seed", "out", "format", "k_weighting",
    "threads",
)

# inputs each command requires beyond the always-optional ones
REQUIRED = {
    "fit": ("data",),
    "simulate": ("theta", "plan"),
    "tune": ("data",),
    "design": ("theta", "cost", "stress_rates", "n_inspections"),
    "gof": ("data",),
    "cov": ("theta",),
    "influence": ("theta",),
}


def parse_config(doc: dict) -> RunConfig:
    """Validate a configuration mapping and apply defaults."""
    doc = _as_mapping(doc, "config")
    _reject_unknown(doc, TOP_KEYS, "")
    command = _require(doc, "command", "")
    if command not in COMMANDS:
        raise ConfigError(
            f"command must be one of {list(COMMANDS)}, got {command!r}"
        )
    cfg = RunConfig(command=command)

    for key in REQUIRED[command]:
        if key not in doc:
            raise ConfigError(f"missing required key {key} for command {command}")

    if "plan" in doc:
        if isinstance(doc["plan"], str):
            cfg.plan_path = doc["plan"]
        else:
            cfg.plan = _parse_plan(doc["plan"], "plan")
    if "data" in doc:
        if not isinstance(doc["data"], str):
            raise ConfigError("data must be a file path string")
        cfg.data_path = doc["data"]
    if "theta" in doc:
        cfg.theta = _parse_theta(doc["theta"], "theta")
    if "tuning" in doc:
        cfg.tuning = _parse_tuning(doc["tuning"], "tuning")
    if "grid" in doc:
        cfg.grid = _parse_grid(doc["grid"], "grid")
    if "contamination" in doc:
        cfg.contamination = _parse_contamination(doc["contamination"],
                                                 "contamination")
    if "cost" in doc:
        cfg.cost = _parse_cost(doc["cost"], "cost")
    if "swarm" in doc:
        cfg.swarm = _parse_swarm(doc["swarm"], "swarm")
    if "stress_rates" in doc:
        vals = doc["stress_rates"]
        if not isinstance(vals, list) or not vals:
            raise ConfigError("stress_rates must be a nonempty array")
        cfg.stress_rates = tuple(_number(v, f"stress_rates[{i}]")
                                 for i, v in enumerate(vals))
    if "n_inspections" in doc:
        vals = doc["n_inspections"]
        if not isinstance(vals, list) or not vals:
            raise ConfigError("n_inspections must be a nonempty array")
        cfg.n_inspections = tuple(_integer(v, f"n_inspections[{i}]")
                                  for i, v in enumerate(vals))
    if "outlier_cells" in doc:
        vals = doc["outlier_cells"]
        if not isinstance(vals, list) or not vals:
            raise ConfigError("outlier_cells must be a nonempty array")
        cfg.outlier_cells = tuple(_integer(v, f"outlier_cells[{i}]")
                                  for i, v in enumerate(vals))
    if "selector" in doc:
        if doc["selector"] not in ("wj", "iwj", "amax", "mae", "amed", "csm"):
            raise ConfigError(
                "selector must be one of ['wj', 'iwj', 'amax', 'mae', "
                "'amed', 'csm']"
            )
        cfg.selector = doc["selector"]
    if "estimator" in doc:
        if doc["estimator"] not in ("mle", "mepde"):
            raise ConfigError("estimator must be 'mle' or 'mepde'")
        cfg.estimator = doc["estimator"]
    if "reps" in doc:
        cfg.reps = _integer(doc["reps"], "reps")
        if cfg.reps < 1:
            raise ConfigError("reps must be at least 1")
    if "seed" in doc:
        cfg.seed = _integer(doc["seed"], "seed")
    if "out" in doc:
        if not isinstance(doc["out"], str):
            raise ConfigError("out must be a file path string")
        cfg.output_path = doc["out"]
    if "format" in doc:
        if doc["format"] not in ("csv", "json"):
            raise ConfigError("format must be 'csv' or 'json'")
        cfg.format = doc["format"]
    if "k_weighting" in doc:
        if doc["k_weighting"] not in ("literal", "proportional"):
            raise ConfigError("k_weighting must be 'literal' or 'proportional'")
        cfg.k_weighting = doc["k_weighting"]
    if "threads" in doc:
        cfg.threads = _integer(doc["threads"], "threads")
        if cfg.threads < 1:
            raise ConfigError("threads must be at least 1")

    if cfg.estimator == "mepde" and cfg.tuning is None:
        raise ConfigError("tuning is required when estimator is 'mepde'")
    if command == "design" and len(cfg.stress_rates) != len(cfg.n_inspections):
        raise ConfigError(
            "stress_rates and n_inspections must have equal length"
        )
    return cfg


def load_config(path) -> RunConfig:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return parse_config(doc)
