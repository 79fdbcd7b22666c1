"""
Tests for the command-line entry point, run in-process through main().
"""

import json

import numpy as np
import pandas as pd
import pytest

from crossfit.cli import EXIT_INPUT_ERROR, EXIT_NOT_CONVERGED, EXIT_OK, main, parse_grid
from crossfit.data import read_design_csv
from crossfit.io import dumps
from crossfit.solver import irls_logistic


@pytest.fixture
def simulated_csv(tmp_path):
    out = tmp_path / "sim.csv"
    assert main(["simulate", "--s", "2000", "--preset", "b", "--seed", "3", "--out", str(out)]) == EXIT_OK
    return out


# =============================================================================
# fit
# =============================================================================


class TestFitCommand:
    """crossfit fit"""

    def test_writes_result(self, tiny_csv, tmp_path):
        out = tmp_path / "fit.json"
        code = main(["fit", str(tiny_csv), "--intercept", "--threads", "1", "--out", str(out)])
        assert code in (EXIT_OK, EXIT_NOT_CONVERGED)
        result = json.loads(out.read_text())
        assert [c["name"] for c in result["coefficients"]] == ["intercept", "x1"]
        assert result["converged"] == (code == EXIT_OK)
        assert abs(result["diagnostics"]["sum_a"]) < 1e-6
        assert result["diagnostics"]["n_obs"] == 12

    def test_stdout_is_pure_json_without_out(self, tiny_csv, capsys):
        main(["fit", str(tiny_csv), "--intercept", "--threads", "1"])
        result = json.loads(capsys.readouterr().out)
        assert "coefficients" in result

    def test_rewrite_is_byte_identical(self, tiny_csv, tmp_path):
        out = tmp_path / "fit.json"
        main(["fit", str(tiny_csv), "--intercept", "--threads", "1", "--random-effects", "--out", str(out)])
        text = out.read_text()
        assert dumps(json.loads(text)) == text

    def test_compare_naive(self, simulated_csv, tmp_path):
        out = tmp_path / "fit.json"
        code = main(["fit", str(simulated_csv), "--threads", "1", "--compare-naive", "--full-cov", "--out", str(out)])
        assert code in (EXIT_OK, EXIT_NOT_CONVERGED)
        result = json.loads(out.read_text())
        design, _ = read_design_csv(simulated_csv)
        lr = irls_logistic(design)
        estimates = [c["estimate"] for c in result["naive"]["coefficients"]]
        np.testing.assert_allclose(estimates, lr.beta, rtol=1e-12)
        assert set(result["naive"]["naivete"]) == set(design.feature_names)
        assert len(result["covariance"]) == design.n_features

    def test_stage_cap_exits_two_and_still_writes(self, tiny_csv, tmp_path):
        out = tmp_path / "fit.json"
        code = main(["fit", str(tiny_csv), "--intercept", "--threads", "1", "--max-outer", "1", "--out", str(out)])
        assert code == EXIT_NOT_CONVERGED
        assert json.loads(out.read_text())["converged"] is False

    def test_missing_file(self, tmp_path, capsys):
        assert main(["fit", str(tmp_path / "absent.csv")]) == EXIT_INPUT_ERROR
        assert "Error" in capsys.readouterr().err

    def test_non_binary_response(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("row,col,y,x1\nu1,i1,2,0.5\nu2,i2,0,0.1\n")
        assert main(["fit", str(path), "--intercept"]) == EXIT_INPUT_ERROR

    def test_unknown_config_key(self, tiny_csv, tmp_path):
        config = tmp_path / "fit_config.json"
        config.write_text('{"epsilon": 1e-6, "tolerance": 3}')
        assert main(["fit", str(tiny_csv), "--intercept", "--config", str(config)]) == EXIT_INPUT_ERROR


# =============================================================================
# simulate
# =============================================================================


class TestSimulateCommand:
    """crossfit simulate"""

    def test_deterministic(self, tmp_path):
        first, second = tmp_path / "one.csv", tmp_path / "two.csv"
        for out in (first, second):
            assert main(["simulate", "--s", "2000", "--seed", "5", "--out", str(out)]) == EXIT_OK
        assert first.read_text() == second.read_text()

    def test_truth_file(self, simulated_csv):
        truth = json.loads(simulated_csv.with_suffix(".truth.json").read_text())
        assert truth["beta"][0] == -2.0
        assert truth["beta"][7] == 1.5
        assert truth["config"]["s"] == 2000.0
        frame = pd.read_csv(simulated_csv)
        assert list(frame.columns[:4]) == ["row", "col", "y", "intercept"]
        assert len(truth["a"]) == frame["row"].nunique()

    def test_infeasible_preset(self, tmp_path):
        args = ["simulate", "--s", "10000", "--rho", "0.4", "--kappa", "0.4", "--out", str(tmp_path / "x.csv")]
        assert main(args) == EXIT_INPUT_ERROR

    def test_unknown_preset(self, tmp_path):
        args = ["simulate", "--s", "1000", "--preset", "z", "--out", str(tmp_path / "x.csv")]
        assert main(args) == EXIT_INPUT_ERROR
        assert not (tmp_path / "x.csv").exists()


# =============================================================================
# bench / verify / validate
# =============================================================================


class TestBenchCommand:
    """crossfit bench"""

    def test_mse_table(self, tmp_path, capsys):
        out = tmp_path / "bench.csv"
        args = ["bench", "--grid", "1000,2000", "--replicates", "2", "--fitters", "backfit,naive", "--threads", "1"]
        assert main(args + ["--out", str(out)]) == EXIT_OK
        table = pd.read_csv(out)
        assert list(table.columns) == ["fitter", "S", "N", "metric", "value", "replicate"]
        assert set(table["fitter"]) == {"backfit", "naive"}
        assert set(table["S"]) == {1000.0, 2000.0}
        assert (tmp_path / "bench.summary.csv").exists()
        assert "slope vs N" in capsys.readouterr().out

    def test_unknown_fitter(self, tmp_path):
        args = ["bench", "--grid", "1000,2000", "--fitters", "glmer", "--out", str(tmp_path / "b.csv")]
        assert main(args) == EXIT_INPUT_ERROR

    def test_parse_grid(self):
        assert parse_grid("1000, 3e3,10000") == [1000.0, 3000.0, 10000.0]


class TestVerifyCommand:
    """crossfit verify"""

    def test_all_checks_pass(self, tmp_path):
        out = tmp_path / "verify.json"
        assert main(["verify", "--s", "1000", "--out", str(out)]) == EXIT_OK
        payload = json.loads(out.read_text())
        assert payload["checks"]
        assert all(payload["checks"].values())
        assert payload["report"]["metadata"]["mode"] == "true"


class TestValidateCommand:
    """crossfit validate"""

    def test_valid_file(self, tiny_csv):
        assert main(["validate", str(tiny_csv), "--intercept"]) == EXIT_OK

    def test_invalid_file(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("row,col,y\nu1,i1,yes\n")
        assert main(["validate", str(path)]) == EXIT_INPUT_ERROR


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
