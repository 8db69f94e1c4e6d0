import io
import math
from contextlib import redirect_stderr, redirect_stdout

import pytest

from freeze_lab.cli import main
from freeze_lab.model import EXAMPLE_PARAMS, params_to_text

Z3_TEXT = params_to_text(EXAMPLE_PARAMS).replace("alpha_u = 0.3", "alpha_u = 0.25")


@pytest.fixture
def cfg_file(tmp_path):
    path = tmp_path / "model.cfg"
    path.write_text(params_to_text(EXAMPLE_PARAMS))
    return str(path)


def run_cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = main(list(argv))
    return code, out.getvalue(), err.getvalue()


def parse_csv(text):
    lines = [line for line in text.splitlines() if line]
    header = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    return header, rows


class TestGamma:
    def test_example_row(self, cfg_file):
        code, out, err = run_cli("gamma", "--params", cfg_file)
        assert code == 0 and not err
        header, rows = parse_csv(out)
        assert header == ["alpha_u", "alpha_p1", "gamma", "zone", "branch"]
        row = dict(zip(header, rows[0]))
        assert float(row["gamma"]) == 1.25
        assert row["zone"] == "Z1" and row["branch"] == "average"

    def test_byte_identical_reruns(self, cfg_file):
        first = run_cli("gamma", "--params", cfg_file)
        second = run_cli("gamma", "--params", cfg_file)
        assert first == second

    def test_exact_tie_detected_at_zero_tolerance(self, tmp_path):
        # 0.25 and 1.25 are exact dyadics, so the branch tie is exact
        path = tmp_path / "z3.cfg"
        path.write_text(Z3_TEXT)
        _, out, _ = run_cli("gamma", "--params", str(path))
        assert "Z3only" in out

    def test_tie_tol_flag_propagates(self, tmp_path):
        path = tmp_path / "near.cfg"
        path.write_text(Z3_TEXT.replace("alpha_u = 0.25", "alpha_u = 0.2500000001"))
        _, out, _ = run_cli("gamma", "--params", str(path))
        assert "Z1" in out  # 1e-10 off the boundary exceeds the default tol
        _, out, _ = run_cli("gamma", "--params", str(path), "--tie-tol", "1e-9")
        assert "Z3only" in out


class TestZones:
    def test_grid_rows(self, cfg_file):
        code, out, err = run_cli(
            "zones", "--params", cfg_file,
            "--grid", "alpha_u=0.1:0.9:5", "alpha_p1=1.2:2.0:3")
        assert code == 0
        header, rows = parse_csv(out)
        assert len(rows) == 15
        zones = {row[3] for row in rows}
        assert "Z1" in zones and "Z2" in zones

    def test_invalid_grid_points_skipped(self, cfg_file):
        code, out, err = run_cli(
            "zones", "--params", cfg_file,
            "--grid", "alpha_u=0.3:0.3:1", "alpha_p1=0.5:1.5:3")
        assert code == 0
        assert "skipping invalid grid point" in err
        _, rows = parse_csv(out)
        # alpha_p1 in {0.5, 1.0} violates the strict cross ordering
        assert len(rows) == 1

    def test_bad_axis_name(self, cfg_file):
        code, _, err = run_cli("zones", "--params", cfg_file,
                               "--grid", "alpha_u=0.1:1:2", "theta=0.1:1:2")
        assert code == 1 and "grid axis" in err


class TestPressure:
    def test_single_row(self, cfg_file):
        code, out, _ = run_cli("pressure", "--params", cfg_file, "--beta", "10")
        assert code == 0
        header, rows = parse_csv(out)
        assert header == ["beta", "P", "P_minus_logp", "g", "gamma", "zone",
                          "residual", "terms_used"]
        row = dict(zip(header, rows[0]))
        assert float(row["P"]) == pytest.approx(
            math.log(2) + float(row["P_minus_logp"]), rel=1e-15)
        assert abs(float(row["residual"])) < 1e-12

    def test_missing_beta(self, cfg_file):
        code, _, err = run_cli("pressure", "--params", cfg_file)
        assert code == 1 and "beta" in err

    def test_beta_from_config_and_override(self, tmp_path):
        path = tmp_path / "with_beta.cfg"
        path.write_text(params_to_text(EXAMPLE_PARAMS) + "beta = 4\n")
        _, out_file, _ = run_cli("pressure", "--params", str(path))
        assert out_file.splitlines()[1].startswith("4,")
        _, out_flag, _ = run_cli("pressure", "--params", str(path),
                                 "--beta", "12.5")
        assert out_flag.splitlines()[1].startswith("12.5,")

    def test_numerical_failure_exit_code(self, cfg_file):
        code, _, err = run_cli("pressure", "--params", cfg_file, "--beta", "1e6")
        assert code == 2 and "numerical failure" in err


class TestSweep:
    def test_row_count_and_order(self, cfg_file):
        code, out, _ = run_cli("sweep", "--params", cfg_file, "--beta", "0:40:81")
        assert code == 0
        _, rows = parse_csv(out)
        assert len(rows) == 81
        betas = [float(r[0]) for r in rows]
        assert betas == sorted(betas) and betas[0] == 0.0 and betas[-1] == 40.0

    def test_thread_cap_env(self, cfg_file, monkeypatch):
        monkeypatch.setenv("FREEZE_LAB_THREADS", "2")
        code, out, _ = run_cli("sweep", "--params", cfg_file, "--beta", "0:5:6")
        assert code == 0 and len(parse_csv(out)[1]) == 6

    def test_malformed_range(self, cfg_file):
        code, _, err = run_cli("sweep", "--params", cfg_file, "--beta", "0:40")
        assert code == 1 and "lo:hi:steps" in err


class TestMeasures:
    def test_columns_and_mass(self, cfg_file):
        code, out, _ = run_cli("measures", "--params", cfg_file, "--beta", "8")
        assert code == 0
        header, rows = parse_csv(out)
        assert header == ["beta", "nu_O1", "nu_O2", "nu_u", "mu_O1", "mu_O2",
                          "mu_u", "ratio_12", "zone", "predicted_w1",
                          "predicted_w2"]
        row = dict(zip(header, rows[0]))
        nu_mass = float(row["nu_O1"]) + float(row["nu_O2"]) + float(row["nu_u"])
        mu_mass = float(row["mu_O1"]) + float(row["mu_O2"]) + float(row["mu_u"])
        assert nu_mass == pytest.approx(1.0, abs=1e-9)
        assert mu_mass == pytest.approx(1.0, abs=1e-9)
        for key in ("nu_O1", "nu_O2", "nu_u", "mu_O1", "mu_O2", "mu_u"):
            assert 0.0 <= float(row[key]) <= 1.0

    def test_cylinder_table(self, cfg_file):
        code, out, _ = run_cli("measures", "--params", cfg_file, "--beta", "8",
                               "--cylinders", "2")
        assert code == 0
        blocks = out.split("\n\n")
        assert len(blocks) == 2
        header, rows = parse_csv(blocks[1])
        assert header == ["beta", "block", "word", "nu"]
        assert len(rows) == 2 * (2 + 4)
        assert {r[2] for r in rows} == {"1", "2", "11", "12", "21", "22"}


class TestSubaction:
    def test_rows_and_consistency(self, cfg_file):
        code, out, _ = run_cli("subaction", "--params", cfg_file,
                               "--beta", "100", "--nmax", "3")
        assert code == 0
        header, rows = parse_csv(out)
        assert header == ["beta", "state", "V", "logH_over_beta", "abs_diff"]
        assert len(rows) == 2 + 6 + 1
        by_state = {r[1]: r for r in rows}
        assert float(by_state["sigma_1"][2]) == 0.0
        assert all(float(r[4]) <= 0.05 for r in rows)


class TestOracle:
    def test_columns(self, cfg_file):
        code, out, _ = run_cli("oracle", "--params", cfg_file,
                               "--beta", "5", "--depth", "40")
        assert code == 0
        header, rows = parse_csv(out)
        assert header[-2:] == ["lambda", "bound"]
        row = dict(zip(header, rows[0]))
        assert float(row["lambda"]) > 2.0
        assert float(row["bound"]) == pytest.approx(5 * 3 * 0.5 ** 40)

    def test_depth_defaults_to_sixty(self, cfg_file):
        code, out, _ = run_cli("oracle", "--params", cfg_file, "--beta", "5")
        assert code == 0
        header, rows = parse_csv(out)
        bound = float(dict(zip(header, rows[0]))["bound"])
        assert bound == pytest.approx(5 * 3 * 0.5 ** 60)


class TestConfigErrors:
    def test_unknown_key(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text(params_to_text(EXAMPLE_PARAMS) + "zeta = 1\n")
        code, _, err = run_cli("gamma", "--params", str(path))
        assert code == 1 and "zeta" in err

    def test_invalid_model_value(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text(params_to_text(EXAMPLE_PARAMS).replace(
            "alpha.1.1 = 1.0", "alpha.1.1 = -1"))
        code, _, err = run_cli("gamma", "--params", str(path))
        assert code == 1 and "positive" in err

    def test_missing_file(self):
        code, _, err = run_cli("gamma", "--params", "/nonexistent/x.cfg")
        assert code == 1 and "cannot read" in err

    def test_output_file(self, cfg_file, tmp_path):
        target = tmp_path / "out.csv"
        code, out, _ = run_cli("gamma", "--params", cfg_file,
                               "--output", str(target))
        assert code == 0 and out == ""
        assert target.read_text().startswith("alpha_u,")


class TestVerifySubcommand:
    def test_single_criterion(self):
        code, out, _ = run_cli("verify", "--only", "A1")
        assert code == 0
        assert out.startswith("A1 PASS")
        assert "1/1 criteria passed" in out

    def test_unknown_criterion(self):
        code, _, err = run_cli("verify", "--only", "A99")
        assert code == 1 and "A99" in err


class TestThreeBlockModel:
    def test_measures_columns_scale_with_n(self, tmp_path):
        from freeze_lab.model import make_params
        p3 = make_params(3, 2, 0.5, ((1.0, 2.0), (1.5, 3.0), (2.0, 4.0)), 0.3)
        path = tmp_path / "n3.cfg"
        path.write_text(params_to_text(p3))
        code, out, _ = run_cli("measures", "--params", str(path), "--beta", "5")
        assert code == 0
        header, rows = parse_csv(out)
        assert header[1:4] == ["nu_O1", "nu_O2", "nu_O3"]
        masses = [float(v) for v in rows[0][1:5]]
        assert sum(masses) == pytest.approx(1.0, abs=1e-9)

    def test_subaction_at_zero_beta_is_numerical_failure(self, cfg_file):
        code, _, err = run_cli("subaction", "--params", cfg_file, "--beta", "0")
        assert code == 2 and "numerical failure" in err
