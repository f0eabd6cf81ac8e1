"""CLI: config parsing and round-trips, exit-code partition, report shape,
determinism under a fixed seed."""

import json
import os
from pathlib import Path

import numpy as np
import pytest

from ehrhard_lab.cli import (EXIT_OK, EXIT_PRECISION, EXIT_USAGE, EXIT_VIOLATION,
                             main, parse_config, run, surface_implied_weights)
from ehrhard_lab.errors import ConfigError


def read_report(out_dir) -> dict:
    with open(Path(out_dir) / "report.json") as fh:
        return json.load(fh)


class TestParseConfig:
    def test_minimal_defaults(self):
        config = parse_config({"command": "check-pdi", "surface": "ehrhard:a=0.5,b=0.5"})
        assert config["seed"] == 0
        assert config["command"] == "check-pdi"

    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigError, match="unknown config keys"):
            parse_config({"command": "catalog", "frobnicate": 1})

    def test_type_validation(self):
        with pytest.raises(ConfigError, match="seed"):
            parse_config({"command": "catalog", "seed": "three"})

    def test_missing_command(self):
        with pytest.raises(ConfigError, match="command"):
            parse_config({})

    def test_json_file_roundtrip(self, tmp_path):
        config = {"command": "check-pdi", "surface": "pl:a=0.3", "resolution": 50,
                  "seed": 7, "out": str(tmp_path)}
        path = tmp_path / "config.json"
        path.write_text(json.dumps(config))
        parsed = parse_config(path)
        assert run(parsed) == EXIT_OK
        # the emitted config parses back to the same resolved mapping
        emitted = read_report(tmp_path)["config"]
        assert parse_config(emitted) == parse_config(emitted)
        assert emitted["surface"] == "pl:a=0.3"

    def test_threads_env_fallback(self, monkeypatch):
        monkeypatch.setenv("EHRHARD_LAB_THREADS", "4")
        assert parse_config({"command": "catalog"})["threads"] == 4
        monkeypatch.setenv("EHRHARD_LAB_THREADS", "lots")
        with pytest.raises(ConfigError):
            parse_config({"command": "catalog"})

    def test_implied_weights(self):
        assert surface_implied_weights("ehrhard:a=0.3,b=0.7") == (0.3, 0.7)
        assert surface_implied_weights("pl:a=0.3") == (0.3, 0.7)
        assert surface_implied_weights("pl_a_minus_b:a=2") == (2.0, 1.0)
        assert surface_implied_weights("power:alpha=0.3") is None

    def test_conflicting_weights_rejected(self, tmp_path):
        code = main(["check-pdi", "--surface", "ehrhard:a=0.5,b=0.5",
                     "--weights", "0.3,0.7", "--out", str(tmp_path)])
        assert code == EXIT_USAGE
        with pytest.raises(ConfigError, match="conflict"):
            run({"command": "check-pdi", "surface": "ehrhard:a=0.5,b=0.5",
                 "weights": "0.3,0.7", "out": str(tmp_path)})


class TestExitCodes:
    def test_check_pdi_feasible(self, tmp_path):
        code = main(["check-pdi", "--surface", "ehrhard:a=0.5,b=0.5",
                     "--resolution", "80", "--out", str(tmp_path)])
        assert code == EXIT_OK
        report = read_report(tmp_path)
        assert report["schema"] == "v1"
        assert report["result"]["feasible"] is True

    def test_check_pdi_violation(self, tmp_path):
        code = main(["check-pdi", "--surface", "power:alpha=0.3,beta=0.3",
                     "--weights", "0.5,0.5", "--resolution", "50", "--out", str(tmp_path)])
        assert code == EXIT_VIOLATION

    def test_usage_error(self, tmp_path):
        assert main(["check-pdi", "--surface", "nonsense:a=1",
                     "--out", str(tmp_path)]) == EXIT_USAGE
        assert main(["verify-ineq", "--out", str(tmp_path)]) == EXIT_USAGE

    def test_find_counterexample_hit_writes_witnesses(self, tmp_path):
        code = main(["find-counterexample", "--surface", "power:alpha=0.3,beta=0.3",
                     "--weights", "0.5,0.5", "--budget", "100000",
                     "--seed", "1", "--out", str(tmp_path)])
        assert code == EXIT_VIOLATION
        report = read_report(tmp_path)
        assert report["result"]["found"] is True
        for name in report["result"]["witnesses"]:
            assert (tmp_path / name).exists()
        arr = np.loadtxt(tmp_path / "counterexample_f.csv", delimiter=",", skiprows=1)
        assert arr.shape[1] == 2

    def test_find_counterexample_clean_surface(self, tmp_path):
        code = main(["find-counterexample", "--surface", "pl:a=0.5",
                     "--budget", "200", "--seed", "3", "--out", str(tmp_path)])
        assert code == EXIT_OK

    def test_verify_ineq(self, tmp_path):
        code = main(["verify-ineq", "--surface", "pl:a=0.5",
                     "--f", "bump:height=5,width=1.2", "--g", "bump:height=4,width=0.8",
                     "--out", str(tmp_path)])
        assert code == EXIT_OK

    def test_smooth_lhs(self, tmp_path):
        code = main(["smooth-lhs", "--surface", "young:p=2,q=2", "--weights", "0.5,0.5",
                     "--f", "bump:height=1,width=1", "--g", "bump:height=1,width=1",
                     "--R", "1000", "--out", str(tmp_path)])
        assert code == EXIT_OK
        report = read_report(tmp_path)
        assert report["result"]["relative_mismatch"] <= 0.02

    def test_audit_measure(self, tmp_path):
        assert main(["audit-measure", "--potential", "gaussian",
                     "--out", str(tmp_path)]) == EXIT_OK
        assert main(["audit-measure", "--potential", "quartic",
                     "--out", str(tmp_path)]) == EXIT_VIOLATION

    def test_catalog(self, tmp_path):
        assert main(["catalog", "--out", str(tmp_path)]) == EXIT_OK
        report = read_report(tmp_path)
        assert "ehrhard:a=0.5,b=0.5" in report["result"]["surfaces"]

    def test_solve_obstacle_small(self, tmp_path):
        code = main(["solve-obstacle", "--weights", "0.5,0.5", "--resolution", "21",
                     "--max-sweeps", "120", "--out", str(tmp_path)])
        assert code == EXIT_OK
        assert (tmp_path / "surface.csv").exists()
        lines = (tmp_path / "convergence.jsonl").read_text().splitlines()
        assert json.loads(lines[0])["sweep"] == 0


class TestDeterminism:
    def test_reports_byte_identical_under_fixed_seed(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        for out in (out1, out2):
            args = ["verify-ineq", "--surface", "pl:a=0.4", "--f", "random",
                    "--g", "random", "--seed", "11", "--out", str(out)]
            assert main(args) == EXIT_OK
        r1 = (out1 / "report.json").read_text()
        r2 = (out2 / "report.json").read_text()
        # the config embeds the out path; compare everything else
        p1, p2 = json.loads(r1), json.loads(r2)
        p1["config"].pop("out"), p2["config"].pop("out")
        assert json.dumps(p1, sort_keys=True) == json.dumps(p2, sort_keys=True)
