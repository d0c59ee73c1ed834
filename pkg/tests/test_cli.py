import json

import numpy as np
import pytest

from cluster_boundary import __version__
from cluster_boundary import cli, oracle
from cluster_boundary.cli import SCAN_COLUMNS, ConfigError, main, parse_theta


def data_rows(path):
    lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    header = lines[0].split(",")
    return header, [dict(zip(header, l.split(","))) for l in lines[1:]]


def test_parse_theta():
    assert parse_theta("0:0.2:0.05") == pytest.approx([0.0, 0.05, 0.1, 0.15, 0.2])
    assert parse_theta("1.2, 1.45") == [1.2, 1.45]
    assert parse_theta([1, 2]) == [1.0, 2.0]
    assert parse_theta(0.3) == [0.3]
    with pytest.raises(ConfigError):
        parse_theta("1:0:0.1")
    with pytest.raises(ConfigError):
        parse_theta("a,b")


def test_scan_single_point(tmp_path):
    assert main(["scan", "--theta", "0", "--chi", "8", "--out", str(tmp_path)]) == 0
    text = (tmp_path / "scan.csv").read_text()
    assert text.startswith(f"# cluster_boundary {__version__}\n")
    assert '"seed": 0' in text
    header, rows = data_rows(tmp_path / "scan.csv")
    assert tuple(header) == SCAN_COLUMNS
    assert len(rows) == 1
    assert float(rows[0]["ee"]) == 0.0
    point = json.loads(next((tmp_path / "points").glob("*.json")).read_text())
    assert point["version"] == __version__ and point["config"]["chi"] == [8]
    assert point["point"]["schmidt_values"] == [1.0]
    assert (tmp_path / "scan_plot.csv").exists() and (tmp_path / "plot_template.py").exists()


def test_scan_is_deterministic(tmp_path):
    args = ["scan", "--theta", "0.6,1.0", "--chi", "4", "--solver", "both", "--no-timing"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "scan.csv").read_bytes() == (tmp_path / "b" / "scan.csv").read_bytes()
    _, rows = data_rows(tmp_path / "a" / "scan.csv")
    assert {(r["theta"], r["solver"]) for r in rows} == {(t, s) for t in ("0.6", "1.0") for s in ("power", "vumps")}


def test_resume_skips_completed_points(tmp_path, monkeypatch):
    out = str(tmp_path)
    assert main(["scan", "--theta", "0.5", "--chi", "4", "--out", out]) == 0
    calls = []
    real = cli.compute_point
    monkeypatch.setattr(cli, "compute_point", lambda *a: calls.append(a[0]) or real(*a))
    assert main(["scan", "--theta", "0.5,0.7", "--chi", "4", "--out", out, "--resume"]) == 0
    assert calls == [0.7]
    _, rows = data_rows(tmp_path / "scan.csv")
    assert [r["theta"] for r in rows] == ["0.5", "0.7"]


def test_unknown_config_key_reports_path(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("chi: [4]\nvumps:\n  tolerance: 1e-8\n")
    assert main(["scan", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "vumps.tolerance" in capsys.readouterr().err


@pytest.mark.parametrize(
    "text",
    ["chi: []\n", "solver: dmrg\n", "theta: [2.0]\n", "finite_bc: twisted\n", "- 1\n- 2\n", "chi: [\n",
     "finite_method: exact\n", "finite_method: uniform\nfinite_bc: open\n"],
)
def test_invalid_configs(tmp_path, text):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(text)
    assert main(["scan", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_empty_chi_list_is_config_error(tmp_path):
    assert main(["critical", "--chi", "", "--out", str(tmp_path)]) == 2


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("theta: 0:0.1:0.1\nchi: [2]\nseed: 5\n")
    assert main(["scan", "--config", str(cfg), "--chi", "3", "--out", str(tmp_path)]) == 0
    _, rows = data_rows(tmp_path / "scan.csv")
    assert [(r["theta"], r["chi"], r["seed"]) for r in rows] == [("0.0", "3", "5"), ("0.1", "3", "5")]


def test_strict_non_convergence_exit_code(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("power_max_layers: 5\n")
    base = ["fixed-point", "--config", str(cfg), "--theta", "1.5707963267948966", "--chi", "4",
            "--solver", "power", "--out", str(tmp_path)]
    assert main(base) == 0
    assert main(base + ["--strict"]) == 3


def test_degenerate_critical_bracket(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("critical_bracket: [0.5, 1.0]\n")
    assert main(["critical", "--config", str(cfg), "--chi", "4", "--out", str(tmp_path)]) == 2


def test_finite_and_noise_commands(tmp_path):
    assert main(["finite", "--theta", "1.2", "--n", "6", "--bc", "open", "--chi", "8", "--out", str(tmp_path)]) == 0
    _, rows = data_rows(tmp_path / "finite.csv")
    assert rows[0]["branch0"] == "trivial"
    assert main(["noise", "--theta", "1.3", "--chi", "4", "--layers", "3", "--epsilon", "0.01",
                 "--seed", "2", "--out", str(tmp_path)]) == 0
    _, rows = data_rows(tmp_path / "noise_seed=2.csv")
    assert len(rows) == 3


def test_finite_uniform_method(tmp_path):
    assert main(["finite", "--theta", "1.2", "--n", "40", "--method", "uniform", "--chi", "4",
                 "--out", str(tmp_path)]) == 0
    _, rows = data_rows(tmp_path / "finite.csv")
    assert rows[0]["branch0"] == "trivial" and float(rows[0]["ee0"]) > 0


def test_validate_passes(tmp_path):
    assert main(["validate", "--out", str(tmp_path)]) == 0
    lines = [l for l in (tmp_path / "validate.txt").read_text().splitlines() if not l.startswith("#")]
    assert lines and all(l.startswith("PASS") and "residual=" in l for l in lines)


def test_validate_detects_corrupted_site_tensor(tmp_path, monkeypatch):
    good = oracle.build_site_tensor

    def corrupted():
        st = good()
        t = st.tensor.copy()
        t[0, 1, 1, 1, 1] *= -1
        return type(st)(st.role, t)

    monkeypatch.setattr(oracle, "build_site_tensor", corrupted)
    assert main(["validate", "--out", str(tmp_path)]) == 1
    report = (tmp_path / "validate.txt").read_text()
    assert "FAIL  peps" in report
