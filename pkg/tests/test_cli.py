"""Configuration validation and the command-line frontend."""

import json

import numpy as np
import pytest
from click.testing import CliRunner

from psaltfit.cli import main
from psaltfit.config import ConfigError, load_config, parse_config

PLAN_DOC = {"groups": [{"n": 20, "nu": 3.0, "tau": [0.4, 0.5, 0.7]},
                       {"n": 25, "nu": 8.0, "tau": [0.2, 0.4, 0.8]},
                       {"n": 30, "nu": 10.0, "tau": [0.2, 0.3, 0.5]}]}
THETA_DOC = {"a": 1.6, "b": 1.1, "mu": 2.7}
COST_DOC = {"c_a": 850, "c_u": 120, "c_0": 55, "c_s": 15, "c_v": 50,
            "budget": 10000, "tau_max": 1.0}


def run_cli(args):
    return CliRunner().invoke(main, args)


def write_config(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


class TestParseConfig:
    def test_minimal_fit_config_with_defaults(self):
        cfg = parse_config({"command": "fit", "data": "bundled"})
        assert cfg.command == "fit"
        assert cfg.seed == 0
        assert cfg.format == "json"
        assert cfg.k_weighting == "literal"
        assert len(cfg.grid.alphas) == 12
        assert cfg.swarm.size == 20 and cfg.swarm.w == 0.3

    def test_beta_out_of_range_names_path(self):
        with pytest.raises(ConfigError, match="tuning.beta"):
            parse_config({"command": "fit", "data": "bundled",
                          "tuning": {"alpha": 1.0, "beta": 1.5,
                                     "gamma": 0.3}})

    def test_unknown_top_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown key bogus"):
            parse_config({"command": "fit", "data": "bundled", "bogus": 1})

    def test_unknown_nested_key_rejected(self):
        with pytest.raises(ConfigError, match="tuning.delta"):
            parse_config({"command": "fit", "data": "bundled",
                          "tuning": {"alpha": 1.0, "beta": 0.1,
                                     "gamma": 0.3, "delta": 2}})

    def test_missing_required_key(self):
        with pytest.raises(ConfigError, match="theta"):
            parse_config({"command": "simulate", "plan": PLAN_DOC})

    def test_bad_command(self):
        with pytest.raises(ConfigError, match="command"):
            parse_config({"command": "train"})

    def test_round_trip_is_semantically_idempotent(self):
        doc = {"command": "simulate", "theta": THETA_DOC, "plan": PLAN_DOC,
               "tuning": {"alpha": -6, "beta": 0.1, "gamma": 0.16},
               "estimator": "mepde", "reps": 10, "seed": 4,
               "contamination": {"epsilon": 0.16}}
        cfg = parse_config(doc)
        again = parse_config({**cfg.to_dict(), "plan": PLAN_DOC})
        assert again.tuning == cfg.tuning
        assert again.reps == cfg.reps
        assert again.seed == cfg.seed
        assert again.contamination == cfg.contamination
        assert parse_config({**again.to_dict(), "plan": PLAN_DOC}).to_dict() \
            == {**again.to_dict()}

    def test_mepde_requires_tuning(self):
        with pytest.raises(ConfigError, match="tuning"):
            parse_config({"command": "fit", "data": "bundled",
                          "estimator": "mepde"})

    def test_design_axis_lengths_checked(self):
        with pytest.raises(ConfigError, match="equal length"):
            parse_config({"command": "design", "theta": THETA_DOC,
                          "cost": COST_DOC, "stress_rates": [3, 8],
                          "n_inspections": [3, 3, 3]})

    def test_invalid_json_document(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError, match="JSON"):
            load_config(path)


class TestCliExitCodes:
    def test_success_is_zero(self, tmp_path):
        cfg = write_config(tmp_path, {"command": "fit", "data": "bundled"})
        result = run_cli(["fit", "--config", cfg])
        assert result.exit_code == 0

    def test_config_error_is_two(self, tmp_path):
        cfg = write_config(tmp_path, {"command": "fit", "data": "bundled",
                                      "tuning": {"alpha": 1, "beta": 1.5,
                                                 "gamma": 0.3}})
        result = run_cli(["fit", "--config", cfg])
        assert result.exit_code == 2
        assert "tuning.beta" in result.output

    def test_command_mismatch_is_two(self, tmp_path):
        cfg = write_config(tmp_path, {"command": "fit", "data": "bundled"})
        result = run_cli(["gof", "--config", cfg])
        assert result.exit_code == 2

    def test_compute_failure_is_one(self, tmp_path):
        # a one-inspection plan makes the covariance singular
        cfg = write_config(tmp_path, {
            "command": "cov", "theta": THETA_DOC,
            "plan": {"groups": [{"n": 10, "nu": 3.0, "tau": [0.5]}]},
        })
        result = run_cli(["cov", "--config", cfg])
        assert result.exit_code == 1

    def test_reps_override_validated(self, tmp_path):
        cfg = write_config(tmp_path, {"command": "gof", "data": "bundled"})
        result = run_cli(["gof", "--config", cfg, "--reps", "0"])
        assert result.exit_code == 2


class TestCliOutputs:
    def test_fit_emits_estimate_shaped_json(self, tmp_path):
        cfg = write_config(tmp_path, {"command": "fit", "data": "bundled"})
        result = run_cli(["fit", "--config", cfg])
        doc = json.loads(result.output)
        assert set(doc["theta"]) == {"a", "b", "mu"}
        assert {"estimator", "objective", "converged"} <= set(doc)

    def test_gof_prints_ts_and_p(self, tmp_path):
        cfg = write_config(tmp_path, {"command": "gof", "data": "bundled"})
        result = run_cli(["gof", "--config", cfg, "--reps", "5"])
        doc = json.loads(result.output)
        assert doc["ts"] > 0
        assert 0.0 <= doc["p_value"] <= 1.0

    def test_csv_format(self, tmp_path):
        cfg = write_config(tmp_path, {"command": "fit", "data": "bundled"})
        result = run_cli(["fit", "--config", cfg, "--format", "csv"])
        lines = result.output.strip().splitlines()
        assert lines[0] == "param,estimate"
        assert len(lines) == 4

    def test_influence_lattice(self, tmp_path):
        cfg = write_config(tmp_path, {
            "command": "influence", "theta": THETA_DOC,
            "plan": {"groups": [{"n": 10, "nu": 3.0, "tau": [0.3, 0.6]},
                                {"n": 10, "nu": 8.0, "tau": [0.2, 0.5]}]},
            "tuning": {"alpha": -6, "beta": 0.1, "gamma": 0.16},
        })
        result = run_cli(["influence", "--config", cfg])
        doc = json.loads(result.output)
        assert len(doc["influence"]) == 9

    def test_design_runs_small(self, tmp_path):
        cfg = write_config(tmp_path, {
            "command": "design", "theta": THETA_DOC, "cost": COST_DOC,
            "stress_rates": [3, 8, 10], "n_inspections": [3, 3, 3],
            "swarm": {"size": 8, "max_iter": 10},
        })
        result = run_cli(["design", "--config", cfg, "--seed", "3"])
        assert result.exit_code == 0
        doc = json.loads(result.output)
        assert len(doc["allocation"]) == 3

    def test_tune_small_grid(self, tmp_path):
        cfg = write_config(tmp_path, {
            "command": "tune", "data": "bundled", "selector": "mae",
            "grid": {"alphas": [-1], "betas": [0.0, 0.5], "gammas": [0.3]},
        })
        result = run_cli(["tune", "--config", cfg])
        assert result.exit_code == 0
        doc = json.loads(result.output)
        assert set(doc["tuning"]) == {"alpha", "beta", "gamma"}

    def test_simulate_small(self, tmp_path):
        cfg = write_config(tmp_path, {
            "command": "simulate", "theta": THETA_DOC, "plan": PLAN_DOC,
            "reps": 2,
        })
        result = run_cli(["simulate", "--config", cfg])
        assert result.exit_code == 0
        doc = json.loads(result.output)
        assert doc["reports"][0]["n_reps"] == 2


class TestArtifacts:
    def test_output_written_atomically(self, tmp_path):
        cfg = write_config(tmp_path, {"command": "fit", "data": "bundled"})
        out = tmp_path / "fit.json"
        result = run_cli(["fit", "--config", cfg, "--out", str(out)])
        assert result.exit_code == 0
        assert json.loads(out.read_text())["theta"]
        leftovers = [p for p in tmp_path.iterdir() if p.suffix == ".tmp"]
        assert leftovers == []

    def test_no_partial_file_on_failure(self, tmp_path):
        cfg = write_config(tmp_path, {
            "command": "cov", "theta": THETA_DOC,
            "plan": {"groups": [{"n": 10, "nu": 3.0, "tau": [0.5]}]},
        })
        out = tmp_path / "cov.json"
        result = run_cli(["cov", "--config", cfg, "--out", str(out)])
        assert result.exit_code == 1
        assert not out.exists()

    def test_byte_identical_reruns(self, tmp_path):
        cfg = write_config(tmp_path, {
            "command": "simulate", "theta": THETA_DOC, "plan": PLAN_DOC,
            "reps": 3,
        })
        outs = []
        for name in ("a.json", "b.json"):
            out = tmp_path / name
            result = run_cli(["simulate", "--config", cfg, "--seed", "9",
                              "--out", str(out)])
            assert result.exit_code == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_custom_data_file(self, tmp_path, theta0, bench_plan):
        from psaltfit import sample_lifetime

        rng = np.random.default_rng(0)
        rows = ["group,failure_time"]
        for i, g in enumerate(bench_plan, start=1):
            t = sample_lifetime(theta0, g.stress_rate,
                                rng.uniform(size=g.n_units))
            rows += [f"{i},{v}" for v in t]
        data = tmp_path / "data.csv"
        data.write_text("\n".join(rows) + "\n")
        cfg = write_config(tmp_path, {"command": "fit", "data": str(data),
                                      "plan": PLAN_DOC})
        result = run_cli(["fit", "--config", cfg])
        assert result.exit_code == 0
        doc = json.loads(result.output)
        assert doc["theta"]["a"] > 0
