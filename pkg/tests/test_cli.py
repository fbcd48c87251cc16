import csv
import json

import numpy as np
import pytest

from fftresolvent.cli import main, parse_function, InvalidInput
from fftresolvent.grid import GridGeometry, write_field, random_field
from fftresolvent.media import make_random, write_indicator


def write_config(path, **overrides):
    config = {
        "geometry": [8, 8],
        "microstructure": {"type": "random", "f1": 0.5, "seed": 3},
        "z1": [1, 0],
        "z2": [2, 0],
        "scheme": "eyre_milton",
        "tolerance": 1e-11,
        "max_iter": 500,
        "source": {"type": "random"},
    }
    config.update(overrides)
    path.write_text(json.dumps(config))
    return str(path)


def run(*argv):
    return main([str(a) for a in argv])


def test_solve_two_cell_laminate(tmp_path):
    cfg = write_config(
        tmp_path / "c.json",
        geometry=[2],
        microstructure={"type": "laminate", "normal_axis": 0, "f1": 0.5},
        source={"type": "uniform", "axis": 0},
    )
    out, res = tmp_path / "r.json", tmp_path / "r.csv"
    assert run("solve", "--config", cfg, "--out", out, "--residuals", res) == 0
    report = json.loads(out.read_text())
    assert report["converged"] is True
    assert report["solution_norm"] == pytest.approx(2 / 3 * report["source_norm"], rel=1e-10)
    assert list(report)[:3] == ["scheme", "parameters", "iterations"]
    assert report["config"]["geometry"] == [2]
    rows = list(csv.reader(res.open()))
    assert rows[0] == ["iter", "residual", "contraction_estimate"]
    assert len(rows) == report["iterations"] + 2


def test_solve_homogeneous(tmp_path):
    cfg = write_config(tmp_path / "c.json", z1=[3, 0], z2=[3, 0])
    out = tmp_path / "r.json"
    assert run("solve", "--config", cfg, "--out", out) == 0
    report = json.loads(out.read_text())
    assert report["iterations"] in (0, 1) and report["converged"]


def test_solve_field_output(tmp_path):
    cfg = write_config(tmp_path / "c.json")
    assert run("solve", "--config", cfg, "--out", tmp_path / "r.json", "--field", tmp_path / "x.txt") == 0
    assert (tmp_path / "x.txt").read_text().startswith("2 2 8 8\n")


def test_non_convergence_exit_code(tmp_path):
    cfg = write_config(tmp_path / "c.json", scheme="neumann", z1=[4, 0], z2=[1, 0], max_iter=20)
    out = tmp_path / "r.json"
    assert run("solve", "--config", cfg, "--out", out) == 2
    assert json.loads(out.read_text())["converged"] is False


def test_divergence_exit_code(tmp_path):
    cfg = write_config(tmp_path / "c.json", scheme="neumann", z1=[4, 0], z2=[1, 0], max_iter=5000)
    out = tmp_path / "r.json"
    assert run("solve", "--config", cfg, "--out", out) == 2
    assert json.loads(out.read_text())["diverged"] is True


def test_missing_key_rejected_without_outputs(tmp_path, capsys):
    path = tmp_path / "c.json"
    write_config(path)
    config = json.loads(path.read_text())
    del config["z2"]
    path.write_text(json.dumps(config))
    out, res = tmp_path / "r.json", tmp_path / "r.csv"
    assert run("solve", "--config", path, "--out", out, "--residuals", res) == 1
    assert not out.exists() and not res.exists()
    assert "z2" in capsys.readouterr().err


def test_unknown_and_nested_keys_reported_with_paths(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", colour="red", bounds={"mode": "sometimes"})
    assert run("solve", "--config", cfg, "--out", tmp_path / "r.json") == 1
    err = capsys.readouterr().err
    assert "colour" in err and "bounds/mode" in err


def test_bad_parameter_values_exit_one(tmp_path):
    cfg = write_config(tmp_path / "c.json", microstructure={"type": "disk", "radius_fraction": 0.9})
    assert run("solve", "--config", cfg, "--out", tmp_path / "r.json") == 1
    assert not (tmp_path / "r.json").exists()
    assert run("solve", "--config", tmp_path / "missing.json", "--out", tmp_path / "r.json") == 1


def test_spectral_scheme_with_each_bounds_mode(tmp_path):
    for mode in ({"mode": "exact"}, {"mode": "power", "iterations": 50}, {"mode": "manual", "a_minus": 0, "a_plus": 1}):
        cfg = write_config(tmp_path / "c.json", scheme="spectral", bounds=mode)
        out = tmp_path / "r.json"
        assert run("solve", "--config", cfg, "--out", out) == 0
        assert json.loads(out.read_text())["parameters"]["bounds"]["a_plus"] <= 1


def test_file_inputs(tmp_path):
    medium = make_random(GridGeometry((4, 4)), 0.5, seed=1)
    write_indicator(tmp_path / "chi.txt", medium)
    write_field(tmp_path / "s.txt", random_field(medium.geometry, 2, np.random.default_rng(0)))
    cfg = write_config(
        tmp_path / "c.json",
        geometry=[4, 4],
        microstructure={"type": "file", "path": "chi.txt"},
        source={"type": "file", "path": "s.txt"},
    )
    assert run("solve", "--config", cfg, "--out", tmp_path / "r.json") == 0


def test_rates_sizing_and_determinism(tmp_path):
    out = tmp_path / "a.csv"
    assert run("rates", "--alpha", 0.5, "--beta", 2, "--window=-4,4,-4,4", "--resolution", 2, "--out", out) == 0
    assert len(out.read_text().splitlines()) == 5
    first = tmp_path / "x.csv"
    second = tmp_path / "y.csv"
    for target in (first, second):
        assert run("rates", "--alpha", 0.35, "--beta", 0.8, "--resolution", 9, "--out", target) == 0
    assert first.read_bytes() == second.read_bytes()
    assert run("rates", "--alpha", 0, "--beta", "inf", "--resolution", 3, "--out", out) == 0
    assert run("rates", "--alpha", 0.5, "--beta", 2, "--window", "1,2", "--out", out) == 1
    assert run("rates", "--alpha", 0.5, "--beta", 2, "--estimated", "0.1,0.1", "--resolution", 3, "--out", out) == 0


def test_rates_fig_configurations_spot_values(tmp_path):
    for alpha, beta in ((0.5, 2), (0.35, 0.8)):
        out = tmp_path / "a.csv"
        assert run("rates", "--alpha", alpha, "--beta", beta, "--resolution", 81, "--out", out) == 0
        rows = list(csv.DictReader(out.open()))
        centre = min(rows, key=lambda r: (float(r["re_t"]) - 1) ** 2 + float(r["im_t"]) ** 2)
        assert float(centre["abs_v"]) < 1e-6


def test_bounds_command(tmp_path):
    cfg = write_config(tmp_path / "c.json", microstructure={"type": "homogeneous", "phase": 1})
    out, eig = tmp_path / "b.json", tmp_path / "e.csv"
    assert run("bounds", "--config", cfg, "--out", out, "--eigenvalues", eig) == 0
    doc = json.loads(out.read_text())
    assert doc["power_method"]["a_plus"] == pytest.approx(1)
    assert doc["exact_dense"]["a_minus"] == pytest.approx(1)
    assert len(eig.read_text().splitlines()) == 64


def test_oracle_command(tmp_path):
    cfg = write_config(tmp_path / "c.json")
    out = tmp_path / "o.json"
    assert run("oracle", "--config", cfg, "--out", out) == 0
    assert json.loads(out.read_text())["max_relative_deviation"] <= 1e-8
    big = write_config(tmp_path / "big.json", geometry=[64, 64])
    assert run("oracle", "--config", big, "--out", tmp_path / "o2.json") == 1
    assert not (tmp_path / "o2.json").exists()


def test_funcalc_command(tmp_path):
    cfg = write_config(tmp_path / "c.json")
    out = tmp_path / "f.json"
    assert run("funcalc", "--config", cfg, "--function", "poly:0,0,1", "--out", out) == 0
    assert json.loads(out.read_text())["relative_deviation"] <= 1e-6
    assert run("funcalc", "--config", cfg, "--function", "exp", "--out", out) == 1


def test_seed_flag_and_deterministic_outputs(tmp_path):
    cfg = write_config(tmp_path / "c.json")
    outputs = []
    for name in ("a", "b"):
        res = tmp_path / f"{name}.csv"
        run("solve", "--config", cfg, "--out", tmp_path / f"{name}.json", "--residuals", res, "--seed", 7)
        outputs.append(res.read_bytes())
    assert outputs[0] == outputs[1]
    assert json.loads((tmp_path / "a.json").read_text())["config"]["seed"] == 7


def test_parse_function():
    assert parse_function("poly:1,-2.5,3j") == [1, -2.5, 3j]
    with pytest.raises(InvalidInput):
        parse_function("poly:")
