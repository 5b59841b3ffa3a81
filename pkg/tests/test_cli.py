import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from ambitsim import cli
from ambitsim import suites as suites_mod


def write_config(tmp_path, cfg, name="config.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(cfg))
    return path


def trawl_config(tmp_path, replicates=200, master_seed=4321, outdir="out"):
    return write_config(tmp_path, {
        "model": {
            "kind": "trawl",
            "seed": {"type": "gaussian", "a": 0.0, "b": 1.0},
            "trawl": {"type": "exponential", "lambda": 0.7},
            "method": "grid",
        },
        "grid": {"dx": 0.05, "dt": 0.05, "t_start": 0.0, "t_end": 2.0, "n_times": 5},
        "mc": {"replicates": replicates, "master_seed": master_seed},
        "report": {"lags": [0.5, 1.0]},
        "outputs": {"directory": str(tmp_path / outdir)},
    })


class TestSimulateTrawl:
    def test_outputs_and_analytic_rows(self, tmp_path):
        cfg = trawl_config(tmp_path)
        assert cli.main(["simulate", str(cfg)]) == 0
        out = tmp_path / "out"
        csv = (out / "paths.csv").read_text().splitlines()
        assert csv[0] == "# ambitsim-csv v1"
        assert csv[1] == "replicate,t,Y"
        assert len(csv) == 2 + 200 * 5
        summary = json.loads((out / "summary.json").read_text())
        rows = {r["quantity"]: r for r in summary["rows"]}
        assert rows["leb"]["analytic"] == pytest.approx(10 / 7)
        assert rows["variance"]["analytic"] == pytest.approx(10 / 7)
        assert rows["acf_0.5"]["analytic"] == pytest.approx(np.exp(-0.35))
        assert "z" in rows["variance"]
        assert abs(rows["variance"]["z"]) < 4

    def test_zero_replicates_analytic_only(self, tmp_path):
        cfg = trawl_config(tmp_path, replicates=0)
        assert cli.main(["simulate", str(cfg)]) == 0
        out = tmp_path / "out"
        csv = (out / "paths.csv").read_text().splitlines()
        assert len(csv) == 2  # header only, no sampling
        summary = json.loads((out / "summary.json").read_text())
        assert all("empirical" not in r for r in summary["rows"])

    def test_rerun_is_byte_identical(self, tmp_path):
        cfg_a = trawl_config(tmp_path, outdir="a")
        cli.main(["simulate", str(cfg_a)])
        cfg_b = trawl_config(tmp_path, outdir="b", master_seed=4321)
        cli.main(["simulate", str(cfg_b)])
        for name in ("paths.csv", "summary.json"):
            assert (tmp_path / "a" / name).read_bytes() == \
                (tmp_path / "b" / name).read_bytes()

    def test_different_seed_changes_output(self, tmp_path):
        cfg_a = trawl_config(tmp_path, outdir="a")
        cfg_b = trawl_config(tmp_path, outdir="b", master_seed=9999)
        cli.main(["simulate", str(cfg_a)])
        cli.main(["simulate", str(cfg_b)])
        assert (tmp_path / "a" / "paths.csv").read_bytes() != \
            (tmp_path / "b" / "paths.csv").read_bytes()

    def test_exact_cp_method(self, tmp_path):
        cfg = write_config(tmp_path, {
            "model": {"kind": "trawl",
                      "seed": {"type": "poisson", "intensity": 2.0},
                      "trawl": {"type": "exponential", "lambda": 1.0},
                      "method": "exact_cp"},
            "grid": {"t_end": 1.0, "n_times": 2},
            "mc": {"replicates": 50, "master_seed": 1},
            "outputs": {"directory": str(tmp_path / "out")},
        })
        assert cli.main(["simulate", str(cfg)]) == 0
        assert (tmp_path / "out" / "paths.csv").exists()


class TestSimulateOtherKinds:
    def test_lss(self, tmp_path):
        cfg = write_config(tmp_path, {
            "model": {"kind": "lss",
                      "seed": {"type": "gaussian", "b": 1.0},
                      "kernel": {"type": "exp_time", "rate": 1.0}},
            "grid": {"t_end": 1.0, "n_times": 3, "dt": 0.05},
            "mc": {"replicates": 100, "master_seed": 5},
            "outputs": {"directory": str(tmp_path / "out")},
        })
        assert cli.main(["simulate", str(cfg)]) == 0
        summary = json.loads((tmp_path / "out" / "summary.json").read_text())
        rows = {r["quantity"]: r for r in summary["rows"]}
        assert rows["variance"]["analytic"] == pytest.approx(0.5)

    def test_ambit_field_with_vol_dump(self, tmp_path):
        cfg = write_config(tmp_path, {
            "model": {"kind": "ambit_field",
                      "seed": {"type": "gaussian", "b": 1.0},
                      "ambit": {"type": "product", "box": [0.0, 1.0], "t_back": 1.0},
                      "kernel": {"type": "exp_time", "rate": 1.0},
                      "vol": {"type": "constant", "value": 2.0}},
            "grid": {"t_end": 0.0, "n_times": 1, "dx": 0.1, "dt": 0.1, "xs": [0.0]},
            "mc": {"replicates": 60, "master_seed": 6},
            "outputs": {"directory": str(tmp_path / "out"), "vol_csv": "vol.csv"},
        })
        assert cli.main(["simulate", str(cfg)]) == 0
        field = (tmp_path / "out" / "field.csv").read_text().splitlines()
        assert field[1] == "replicate,t,x,Y"
        volcsv = (tmp_path / "out" / "vol.csv").read_text().splitlines()
        assert volcsv[1] == "replicate,t,x,sigma2"
        assert volcsv[2].endswith(",2.0")


class TestCheckIntegrability:
    def test_report_written(self, tmp_path):
        cfg = write_config(tmp_path, {
            "model": {"kind": "ambit_field",
                      "seed": {"type": "gaussian", "a": 0.5, "b": 1.0},
                      "ambit": {"type": "product", "box": [0.0, 1.0], "t_back": 1.0},
                      "kernel": {"type": "exp_time", "rate": 1.0}},
            "grid": {"t_end": 0.0, "n_times": 1, "dx": 0.05, "dt": 0.05},
            "mc": {"master_seed": 1},
            "outputs": {"directory": str(tmp_path / "out")},
        })
        assert cli.main(["check-integrability", str(cfg)]) == 0
        report = json.loads((tmp_path / "out" / "integrability.json").read_text())
        assert report["verdicts"] == {"drift": "finite", "gaussian": "finite",
                                      "jump": "finite"}


class TestValidate:
    def test_pass_exit_code_and_report(self, tmp_path):
        report = tmp_path / "report.json"
        assert cli.main(["validate", "integrability", "--report", str(report)]) == 0
        payload = json.loads(report.read_text())
        assert payload["suite"] == "integrability"
        assert payload["passed"] is True
        assert all("tolerance" in c for c in payload["criteria"])

    def test_unknown_suite_lists_options(self, capsys):
        assert cli.main(["validate", "no-such-suite"]) == 2
        err = capsys.readouterr().err
        assert "trawl-acf" in err

    def test_fail_exit_code(self, monkeypatch):
        def failing(master_seed=0, replicates=0):
            return [suites_mod.CriterionResult(name="x", passed=False, measured=1.0,
                                               target=0.0, tolerance=0.1)]

        monkeypatch.setitem(suites_mod.SUITES, "always-fails", failing)
        assert cli.main(["validate", "always-fails"]) == 1

    def test_list_suites(self, capsys):
        assert cli.main(["list-suites"]) == 0
        out = capsys.readouterr().out.split()
        assert set(suites_mod.SUITES) == set(out)

    def test_suite_rerun_byte_identical(self):
        a = suites_mod.run_suite("increment-cumulant", master_seed=77).to_json()
        b = suites_mod.run_suite("increment-cumulant", master_seed=77).to_json()
        assert a == b


class TestConfigErrors:
    def test_missing_field(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"model": {"kind": "trawl"},
                                      "mc": {"master_seed": 1}})
        assert cli.main(["simulate", str(cfg)]) == 2
        assert "model.trawl" in capsys.readouterr().err

    def test_unknown_kind(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"model": {"kind": "warp"},
                                      "mc": {"master_seed": 1}})
        assert cli.main(["simulate", str(cfg)]) == 2
        assert "model.kind" in capsys.readouterr().err

    def test_unknown_seed_type(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {
            "model": {"kind": "trawl", "seed": {"type": "cauchy"},
                      "trawl": {"type": "exponential", "lambda": 1.0}},
            "grid": {"t_end": 1.0, "n_times": 2, "dx": 0.1, "dt": 0.1},
            "mc": {"replicates": 1, "master_seed": 1}})
        assert cli.main(["simulate", str(cfg)]) == 2
        assert "model.seed" in capsys.readouterr().err

    def test_missing_master_seed(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"model": {"kind": "trawl"}})
        assert cli.main(["simulate", str(cfg)]) == 2
        assert "mc.master_seed" in capsys.readouterr().err
