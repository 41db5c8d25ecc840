"""Tests for serialization, plotting, and the command line front end."""

import json
import os

import numpy as np
import pytest

from freqlab.cli import main
from freqlab.experiments import default_config, run_scenario
from freqlab.io import (
    ConfigError,
    canonical_json,
    config_hash,
    load_config,
    read_grid,
    write_csv,
    write_grid,
    write_json,
)
from freqlab.solver import PolarGrid, solve_dirichlet
from freqlab.svg import render_line_plot, render_margin_plot

LOW = {"n_r": 33, "n_theta": 64}


def write_config(path, doc):
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(doc, handle)
    return str(path)


@pytest.fixture(scope="module")
def stability_report():
    return run_scenario(default_config("stability", **LOW))


# -- json and csv ----------------------------------------------------------


def test_canonical_json_is_sorted_and_newline_terminated():
    a = canonical_json({"b": 1, "a": [2, 3]})
    b = canonical_json({"a": [2, 3], "b": 1})
    assert a == b
    assert a.endswith("\n")
    assert a.index('"a"') < a.index('"b"')


def test_config_hash_tracks_content():
    base = {"schema": 1, "x": 0.25}
    assert config_hash(base) == config_hash({"x": 0.25, "schema": 1})
    assert config_hash(base) != config_hash({"schema": 1, "x": 0.26})


def test_load_config_roundtrip(tmp_path):
    path = tmp_path / "cfg.json"
    write_json(str(path), {"schema": 1, "value": 0.5})
    doc = load_config(str(path))
    assert doc == {"schema": 1, "value": 0.5}


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="No such file"):
        load_config(str(tmp_path / "nope.json"))


def test_load_config_reports_parse_position(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"schema": 1,\n  "x": }\n')
    with pytest.raises(ConfigError, match=r"bad\.json:2:8"):
        load_config(str(path))


@pytest.mark.parametrize("doc", [
    {"value": 1},
    {"schema": 99},
    [1, 2, 3],
])
def test_load_config_rejects_bad_schema(tmp_path, doc):
    path = write_config(tmp_path / "cfg.json", doc)
    with pytest.raises(ConfigError):
        load_config(path)


def test_write_csv_crlf_and_roundtrip_floats(tmp_path):
    path = str(tmp_path / "table.csv")
    values = [1.0 / 3.0, 2.0 ** -40, 12345.6789]
    write_csv(path, ["i", "x"], [(i, v) for i, v in enumerate(values)])
    raw = open(path, "rb").read()
    assert raw.count(b"\r\n") == 4
    lines = raw.decode("ascii").splitlines()
    assert lines[0] == "i,x"
    for line, expect in zip(lines[1:], values):
        assert float(line.split(",")[1]) == expect


def test_write_json_is_atomic(tmp_path):
    path = str(tmp_path / "out.json")
    write_json(path, {"schema": 1})
    assert [p.name for p in tmp_path.iterdir()] == ["out.json"]


# -- grid files ------------------------------------------------------------


@pytest.mark.parametrize("grid", [
    PolarGrid.disk(9, 16),
    PolarGrid.annulus(0.25, 1.0, 9, 16),
])
def test_grid_file_roundtrip(tmp_path, grid):
    rng = np.random.default_rng(3)
    values = rng.standard_normal(grid.node_count)
    path = str(tmp_path / "u.grid")

    class Holder:
        pass

    holder = Holder()
    holder.grid = grid
    holder.values = values
    write_grid(path, holder)
    grid2, values2 = read_grid(path)
    assert grid2.kind == grid.kind
    assert grid2.n_theta == grid.n_theta
    np.testing.assert_array_equal(grid2.radii, grid.radii)
    np.testing.assert_array_equal(values2, values)


def test_read_grid_rejects_corrupt_header(tmp_path):
    path = tmp_path / "u.grid"
    path.write_bytes(b"NOPE" + bytes(32))
    with pytest.raises(ConfigError, match="magic"):
        read_grid(str(path))


# -- svg rendering ---------------------------------------------------------


def test_line_plot_structure():
    x = np.linspace(0.0, 1.0, 17)
    svg = render_line_plot(
        [("first", x, np.sin(x)), ("a<b", x, np.cos(x))],
        title="demo", x_label="t", y_label="value")
    assert svg.startswith("<svg ")
    assert svg.rstrip().endswith("</svg>")
    assert svg.count("<polyline") == 2
    assert "demo" in svg and "a&lt;b" in svg
    assert render_line_plot(
        [("first", x, np.sin(x)), ("a<b", x, np.cos(x))],
        title="demo", x_label="t", y_label="value") == svg


def test_line_plot_zero_line_and_nan_filtering():
    x = np.arange(5.0)
    y = np.array([-1.0, np.nan, 1.0, 2.0, -0.5])
    svg = render_line_plot([("s", x, y)], zero_line=True)
    assert "stroke-dasharray" in svg
    assert "nan" not in svg
    svg_pos = render_line_plot([("s", x, np.abs(x) + 1.0)], zero_line=True)
    assert "stroke-dasharray" not in svg_pos


def test_margin_plot_from_report(stability_report):
    svg = render_margin_plot(stability_report)
    assert svg.startswith("<svg ")
    assert "stability" in svg
    assert stability_report.verdict.value in svg


# -- cli: modulus ----------------------------------------------------------


def test_cli_modulus_osgood(tmp_path, capsys):
    cfg = write_config(tmp_path / "m.json",
                       {"schema": 1, "modulus": {"kind": "log_power",
                                                 "p": 1.0}})
    out = str(tmp_path / "out")
    assert main(["modulus", "--config", cfg, "--out", out]) == 0
    assert "Osgood" in capsys.readouterr().out
    report = json.load(open(os.path.join(out, "modulus_report.json")))
    assert report["verdict"] == "Osgood"
    assert report["phi_integrable"]["finite"] is True
    assert report["psi_submultiplicative"]["holds"] is True
    for name in ("modulus_table.csv", "modulus.svg", "manifest.json"):
        assert os.path.exists(os.path.join(out, name))


def test_cli_modulus_non_osgood(tmp_path):
    cfg = write_config(tmp_path / "m.json",
                       {"schema": 1, "modulus": {"kind": "power",
                                                 "alpha": 0.7}})
    out = str(tmp_path / "out")
    assert main(["modulus", "--config", cfg, "--out", out]) == 0
    report = json.load(open(os.path.join(out, "modulus_report.json")))
    assert report["verdict"] == "NonOsgood"
    assert report["phi_integrable"]["finite"] is True


def test_cli_modulus_missing_block(tmp_path, capsys):
    cfg = write_config(tmp_path / "m.json", {"schema": 1})
    assert main(["modulus", "--config", cfg,
                 "--out", str(tmp_path / "out")]) == 2
    assert "modulus" in capsys.readouterr().err


def test_cli_rejects_malformed_json(tmp_path, capsys):
    path = tmp_path / "m.json"
    path.write_text("{broken")
    assert main(["modulus", "--config", str(path),
                 "--out", str(tmp_path / "out")]) == 2
    assert ":1:" in capsys.readouterr().err


# -- cli: solve ------------------------------------------------------------


def test_cli_solve_harmonic_profile(tmp_path):
    cfg = write_config(tmp_path / "s.json", {
        "schema": 1,
        "grid": {"n_r": 33, "n_theta": 64},
        "boundary": {"kind": "harmonic", "degree": 1},
    })
    out = str(tmp_path / "out")
    assert main(["solve", "--config", cfg, "--out", out]) == 0
    rows = open(os.path.join(out, "profile.csv")).read().splitlines()
    assert rows[0] == "r,D,H,N"
    freqs = np.array([float(line.split(",")[3]) for line in rows[1:]])
    assert freqs.size > 10
    np.testing.assert_allclose(freqs, 1.0, atol=0.01)
    report = json.load(open(os.path.join(out, "solve_report.json")))
    assert report["residual_norm"] < 1e-10
    grid, values = read_grid(os.path.join(out, "solution.grid"))
    assert values.size == grid.node_count


def test_cli_solve_missing_grid_block(tmp_path, capsys):
    cfg = write_config(tmp_path / "s.json", {
        "schema": 1, "boundary": {"kind": "harmonic", "degree": 1}})
    assert main(["solve", "--config", cfg,
                 "--out", str(tmp_path / "out")]) == 2
    assert "grid" in capsys.readouterr().err


def test_cli_solve_resolution_override(tmp_path):
    cfg = write_config(tmp_path / "s.json", {
        "schema": 1,
        "grid": {"n_r": 33, "n_theta": 64},
        "boundary": {"kind": "harmonic", "degree": 2},
    })
    out = str(tmp_path / "out")
    assert main(["solve", "--config", cfg, "--out", out,
                 "--resolution", "17,32"]) == 0
    report = json.load(open(os.path.join(out, "solve_report.json")))
    assert report["grid"] == {"n_r": 17, "n_theta": 32}


def test_cli_solve_outputs_are_reproducible(tmp_path):
    cfg = write_config(tmp_path / "s.json", {
        "schema": 1,
        "grid": {"n_r": 33, "n_theta": 64},
        "boundary": {"kind": "fourier", "modes": 4},
        "field": {"kind": "holder", "alpha": 0.75, "amplitude": 0.05},
        "seed": 11,
    })
    out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
    assert main(["solve", "--config", cfg, "--out", out1, "--refine"]) == 0
    assert main(["solve", "--config", cfg, "--out", out2, "--refine"]) == 0
    names = sorted(os.listdir(out1))
    assert names == sorted(os.listdir(out2))
    assert "profile_refined.csv" in names
    for name in names:
        if name == "manifest.json":
            continue
        a = open(os.path.join(out1, name), "rb").read()
        b = open(os.path.join(out2, name), "rb").read()
        assert a == b, name
    manifest = json.load(open(os.path.join(out1, "manifest.json")))
    assert set(manifest["outputs"]) == set(names) - {"manifest.json"}
    assert manifest["seed"] == 11


# -- cli: experiment -------------------------------------------------------


def test_cli_experiment_single_scenario(tmp_path, capsys):
    out = str(tmp_path / "out")
    assert main(["experiment", "stability", "--resolution", "33,64",
                 "--out", out]) == 0
    assert "Consistent" in capsys.readouterr().out
    summary = json.load(open(os.path.join(out, "sweep_summary.json")))
    entry = summary["scenarios"][0]
    assert entry["scenario"] == "stability"
    assert entry["verdict"] == "Consistent"
    report = json.load(open(os.path.join(out, "stability.report.json")))
    assert report["config"]["n_r"] == 33
    rows = open(os.path.join(out, "stability.margins.csv"), "rb").read()
    assert rows.startswith(b"name,radius,lhs,rhs,margin,refined_margin\r\n")
    assert os.path.exists(os.path.join(out, "stability.margins.svg"))


def test_cli_experiment_unknown_scenario(tmp_path, capsys):
    assert main(["experiment", "no_such_thing",
                 "--out", str(tmp_path / "out")]) == 2
    assert "unknown scenario" in capsys.readouterr().err


def test_cli_experiment_rejects_names_plus_config(tmp_path, capsys):
    cfg = write_config(tmp_path / "e.json",
                       {"schema": 1, "scenario": "stability"})
    assert main(["experiment", "stability", "--config", cfg,
                 "--out", str(tmp_path / "out")]) == 2
    assert "not both" in capsys.readouterr().err


def test_cli_experiment_sweep_manifest(tmp_path):
    cfg = write_config(tmp_path / "e.json", {
        "schema": 1,
        "sweep": [
            {"scenario": "stability", "n_r": 33, "n_theta": 64},
            {"scenario": "stability", "n_r": 33, "n_theta": 64, "seed": 7},
        ],
    })
    out = str(tmp_path / "out")
    assert main(["experiment", "--config", cfg, "--jobs", "2",
                 "--out", out]) == 0
    names = os.listdir(out)
    assert "stability.report.json" in names
    assert "stability-2.report.json" in names
    summary = json.load(open(os.path.join(out, "sweep_summary.json")))
    assert [e["verdict"] for e in summary["scenarios"]] == ["Consistent"] * 2


def test_cli_experiment_regime_error_exit(tmp_path, capsys):
    cfg = write_config(tmp_path / "e.json", {
        "schema": 1, "scenario": "schroedinger",
        "n_r": 33, "n_theta": 64, "radii": [0.9],
        "field_spec": {"kind": "constant", "value": 1.0},
        "potential_spec": {"kind": "constant", "value": -12.0},
    })
    out = str(tmp_path / "out")
    assert main(["experiment", "--config", cfg, "--out", out]) == 1
    assert "regime" in capsys.readouterr().err
    error = json.load(open(os.path.join(out, "schroedinger.error.json")))
    assert error["status"] == "regime_error"
    assert error["max_radius"] == pytest.approx(2.404826 / np.sqrt(12.0),
                                                abs=0.05)


def test_cli_usage_errors():
    assert main([]) == 2
    assert main(["--version"]) == 0
    assert main(["solve"]) == 2


# -- frequency profile consistency across interfaces -----------------------


def test_cli_profile_matches_direct_solve(tmp_path):
    cfg_doc = {
        "schema": 1,
        "grid": {"n_r": 33, "n_theta": 64},
        "boundary": {"kind": "harmonic", "degree": 3},
    }
    cfg = write_config(tmp_path / "s.json", cfg_doc)
    out = str(tmp_path / "out")
    assert main(["solve", "--config", cfg, "--out", out]) == 0
    grid_file, values = read_grid(os.path.join(out, "solution.grid"))

    grid = PolarGrid.disk(33, 64)
    from freqlab.coefficients import CoefficientField
    f = CoefficientField.identity(2)

    def g(pts):
        pts = np.asarray(pts, dtype=float)
        z = pts[..., 0] + 1j * pts[..., 1]
        return np.real(z ** 3)

    u = solve_dirichlet(f, 1.0, g, grid)
    np.testing.assert_allclose(values, u.values, rtol=1e-12, atol=1e-12)
