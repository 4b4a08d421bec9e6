import json
import math
import os

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gridfree.cli import main
from gridfree.errors import DomainError, ParseError
from gridfree.figures import FIG3_THETA, FIGURE_SCHEMA, reproduce_figure
from gridfree.harness import (REPORT_SCHEMA, degree_grid, dumps_json, estimate, run_scenario,
                              scenario_data)
from gridfree.model import ArrayGeometry, Snapshot, SourceScene, synthesize_snapshots
from gridfree.scenario import load_scenario, parse_scenario, shipped_scenarios
from gridfree.snapfile import format_snapshots, parse_snapshots, write_snapshots

GOLDEN = os.path.join(os.path.dirname(__file__), "golden", "fig3_report.json")

FIG3_YAML = """\
schema: gridfree.scenario/1
name: small
geometry: {slots: 9, spacing_over_lambda: 0.5, active: all}
sources:
  - {theta_deg: -20, amplitude: 1.0}
  - {theta_deg: 25, amplitude: [0.0, 0.5]}
data: {snapshots: 1, snr_db: none}
estimators:
  - {method: gridfree, epsilon: 0}
expect:
  - {method: gridfree, theta_deg: [-20, 25], tolerance_deg: %s}
"""


# snapshot files

@settings(max_examples=30)
@given(st.integers(2, 9), st.integers(1, 5), st.integers(0, 2 ** 32 - 1),
       st.sampled_from([0.25, 0.5, 1.0 / 3.0]))
def test_snapshot_file_round_trip_is_exact(M, L, seed, d):
    rng = np.random.default_rng(seed)
    g = ArrayGeometry.ula(M, d)
    snaps = [Snapshot(rng.standard_normal(M) * 10.0 ** rng.integers(-8, 8)
                      + 1j * rng.standard_normal(M), g) for _ in range(L)]
    back, label = parse_snapshots(format_snapshots(snaps, "1.5 kHz"))
    assert label == "1.5 kHz" and len(back) == L
    assert back[0].geometry.spacing_over_lambda == d
    for a, b in zip(snaps, back):
        np.testing.assert_array_equal(a.y, b.y)


@pytest.mark.parametrize("text,line", [
    ("", 1),
    ("M,L\n", 1),
    ("M,L,spacing_over_lambda,frequency\n2,1,0.5\n", 2),
    ("M,L,spacing_over_lambda,frequency\n2,x,0.5,\n", 2),
    ("M,L,spacing_over_lambda,frequency\n2,1,-0.5,\n", 2),
    ("M,L,spacing_over_lambda,frequency\n2,2,0.5,\n1,0,1,0\n", 4),
    ("M,L,spacing_over_lambda,frequency\n2,1,0.5,\n1,0,1\n", 3),
    ("M,L,spacing_over_lambda,frequency\n2,1,0.5,\n1,0,oops,0\n", 3),
    ("M,L,spacing_over_lambda,frequency\n2,1,0.5,\n1,0,nan,0\n", 3),
])
def test_snapshot_parse_errors_name_the_line(text, line):
    with pytest.raises(ParseError) as exc:
        parse_snapshots(text, "f.csv")
    assert exc.value.location == f"f.csv:{line}"


# scenario files

@pytest.mark.parametrize("patch,needle", [
    (("schema: gridfree.scenario/1", "schema: other/2"), "schema"),
    (("slots: 9", "slots: 1"), "geometry"),
    (("theta_deg: -20", "theta_deg: 120"), "sources[0]"),
    (("{method: gridfree, epsilon: 0}", "{method: gridfree}"), "estimators[0]"),
    (("{method: gridfree, epsilon: 0}", "{method: magic}"), "estimators[0].method"),
    (("snr_db: none", "snr_db: loud"), "data.snr_db"),
])
def test_scenario_errors_report_field_and_line(patch, needle):
    text = (FIG3_YAML % "0.01").replace(*patch)
    with pytest.raises(ParseError) as exc:
        parse_scenario(text, "s.yaml")
    msg = str(exc.value)
    assert needle in msg and "s.yaml:" in msg


def test_scenario_yaml_syntax_error_has_line():
    with pytest.raises(ParseError, match=r"s.yaml:4: invalid YAML"):
        parse_scenario("schema: gridfree.scenario/1\nname: x\ngeometry: [\n", "s.yaml")


def test_random_active_spec():
    text = (FIG3_YAML % "0.01").replace("active: all", "active: 'random(6, 3)'")
    s = parse_scenario(text)
    assert s.geometry.M == 6 and s.geometry.slots == 9


# estimator harness

def test_degree_grid_endpoints():
    g = degree_grid(0.5)
    assert g[0] == -90 and g[-1] == 90 and g.shape[0] == 361
    with pytest.raises(DomainError):
        degree_grid(0)


def test_estimate_validation():
    g = ArrayGeometry.ula(6)
    snaps = [Snapshot(np.ones(6), g)]
    with pytest.raises(DomainError):
        estimate("nope", snaps, {})
    with pytest.raises(DomainError):
        estimate("music", snaps, {"grid_step_deg": 1})
    with pytest.raises(DomainError):
        estimate("cbf", snaps, {"grid_step_deg": 1, "snapshot": 3})
    with pytest.raises(DomainError):
        estimate("gridfree", snaps, {"epsilon": "noise"})


@pytest.mark.parametrize("name", sorted(shipped_scenarios()))
def test_shipped_scenarios_run_and_pass(name):
    run = run_scenario(load_scenario(shipped_scenarios()[name]))
    assert run.report["schema"] == REPORT_SCHEMA
    assert run.report["passed"], run.report["checks"]
    if name == "empty":
        for e in run.report["estimates"]:
            assert e["support_deg"] == []
            spec = e.get("spectrum")
            assert spec is None or spec["points"] > 0


def test_report_bytes_are_deterministic(tmp_path):
    s = load_scenario(shipped_scenarios()["fig5"])
    for sub in ("a", "b"):
        run_scenario(s, str(tmp_path / sub), ("json", "csv", "svg"))
    for f in sorted(os.listdir(tmp_path / "a")):
        if f == "timing.json":
            continue
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes(), f


def _close(a, b, path="", skip=("solver_iterations",)):
    if isinstance(a, dict):
        assert sorted(a) == sorted(b), path
        for k in a:
            if k not in skip:
                _close(a[k], b[k], f"{path}/{k}")
    elif isinstance(a, list):
        assert len(a) == len(b), path
        for i, (x, y) in enumerate(zip(a, b)):
            _close(x, y, f"{path}/{i}")
    elif isinstance(a, float) and not isinstance(b, bool):
        assert math.isclose(a, b, rel_tol=1e-5, abs_tol=1e-6), (path, a, b)
    else:
        assert a == b, path


def test_report_matches_golden():
    run = run_scenario(load_scenario(shipped_scenarios()["fig3"]))
    with open(GOLDEN) as fh:
        golden = json.load(fh)
    _close(json.loads(dumps_json(run.report)), golden)


def test_ingested_stationary_file_pipeline(tmp_path):
    g = ArrayGeometry.ula(16, 0.5)
    snaps = synthesize_snapshots(g, SourceScene.from_degrees([-30.0, 20.0], [1.0, 0.7]), 100,
                                 20.0, 4, random_phase=True)
    path = tmp_path / "stationary.csv"
    write_snapshots(str(path), snaps, "4 kHz")
    text = FIG3_YAML.replace("slots: 9", "slots: 16") % "0.5"
    text = text.replace("theta_deg: [-20, 25]", "theta_deg: [-30, 20]")
    text = text.replace("data: {snapshots: 1, snr_db: none}",
                        "data: {snapshots: 100, file: stationary.csv}")
    text = text.replace("{method: gridfree, epsilon: 0}", "{method: root-music, sources: 2}")
    text = text.replace("method: gridfree, theta_deg", "method: root-music, theta_deg")
    (tmp_path / "s.yaml").write_text(text)
    s = load_scenario(str(tmp_path / "s.yaml"))
    data, noise = scenario_data(s)
    assert len(data) == 100 and noise == [None] * 100
    run = run_scenario(s)
    assert run.report["data"]["source"] == "file" and run.report["passed"]


# command line

def test_cli_exit_codes(tmp_path, capsys):
    good = tmp_path / "good.yaml"
    good.write_text(FIG3_YAML % "0.01")
    bad = tmp_path / "bad.yaml"
    bad.write_text((FIG3_YAML % "0.01").replace("theta_deg: [-20, 25]", "theta_deg: [-21, 25]"))
    assert main(["simulate", str(good), "--out-dir", str(tmp_path / "o")]) == 0
    assert os.path.exists(tmp_path / "o" / "report.json")
    assert main(["simulate", str(bad)]) == 1
    assert main(["simulate", str(tmp_path / "missing.yaml")]) == 2
    assert main(["simulate", "fig3", "--format", "pdf"]) == 2
    # M = 4 at quarter-wavelength spacing has too few visible root pairs for K = 3
    rng = np.random.default_rng(0)
    g = ArrayGeometry.ula(4, 0.25)
    csv_path = tmp_path / "x.csv"
    write_snapshots(str(csv_path), [Snapshot(rng.standard_normal(4) + 1j * rng.standard_normal(4), g)
                                    for _ in range(20)])
    assert main(["estimate", str(csv_path), "--method", "root-music", "--sources", "3"]) == 3
    assert main(["estimate", str(csv_path), "--method", "gridfree"]) == 2
    assert main(["estimate", str(csv_path), "--method", "bogus"]) == 2
    capsys.readouterr()
    assert main(["estimate", str(csv_path), "--method", "cbf", "--grid-step", "1"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["estimates"][0]["method"] == "cbf"
    assert main(["ingest", str(csv_path)]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["M"] == 4 and info["L"] == 20


@pytest.mark.parametrize("fig_id", [1, 2, 3, 4, 5, 6])
def test_reproduce_figure(fig_id, tmp_path):
    doc = reproduce_figure(fig_id, str(tmp_path))
    assert doc["schema"] == FIGURE_SCHEMA
    on_disk = json.loads((tmp_path / "figure.json").read_text())
    assert on_disk == json.loads(dumps_json(doc))
    for f in doc["files"]:
        assert (tmp_path / f).stat().st_size > 0
    if fig_id == 2:
        truth = np.sin(np.deg2rad(FIG3_THETA))
        np.testing.assert_allclose(sorted(doc["accepted_t"]), truth, atol=1e-5)
    if fig_id == 5:
        assert doc["max_masked_dual_coefficient"] < 1e-8


def test_cli_reproduce_figure_bad_id(tmp_path):
    assert main(["reproduce-figure", "9", "--out-dir", str(tmp_path)]) == 2
