import csv
import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from u1scramble.cli import main
from u1scramble.experiments import ConfigError, ExperimentConfig, ResourceError, run_experiment, verify_manifest
from u1scramble.lattice import ChargeSector
from u1scramble.observables import otoc_profile
from u1scramble.svg import PlotSpec, SchemaError, emit_plot

SVG = "{http://www.w3.org/2000/svg}"

SMALL_OTOC = """\
kind = otoc
n_sites = 1500
k = 3
nbar = 0.1, 0.2, 0.3
n_samples = 30
seed = 5
"""


def test_unknown_key_is_named():
    with pytest.raises(ConfigError, match="colour"):
        ExperimentConfig.from_text("kind = otoc\ncolour = blue\n")
    with pytest.raises(ConfigError, match="duplicate"):
        ExperimentConfig.from_text("kind = otoc\nk = 3\nk = 5\n")
    with pytest.raises(ConfigError, match="kind"):
        ExperimentConfig.from_text("k = 3\n")


def test_config_round_trip():
    cfg = ExperimentConfig.from_text(SMALL_OTOC + "# comment\nmu = 0.25, -1.5\nblocks = 1:3, 3:5\n")
    again = ExperimentConfig.from_text(cfg.to_text())
    assert again == cfg
    assert again.to_text() == cfg.to_text()
    assert cfg["nbar"] == [0.1, 0.2, 0.3] and cfg["blocks"] == [(1, 3), (3, 5)]


@pytest.mark.parametrize("line", ["q = 5", "k = 4", "nbar = 0.2, 1.0", "nbar = 0", "f = 1.5",
                                  "geometry = torus", "theta = 1", "variant = sparse"])
def test_validation_rejects(line):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_text(f"kind = otoc\n{line}\n")


def test_exact_resource_caps():
    with pytest.raises(ResourceError, match="N <= 8"):
        ExperimentConfig.from_text("kind = exact-bound\nn_sites = 9\nallow_large = true\n")
    with pytest.raises(ResourceError, match="allow_large"):
        ExperimentConfig.from_text("kind = exact-bound\nn_sites = 7\n")
    assert ExperimentConfig.from_text("kind = exact-bound\nn_sites = 7\nallow_large = true\n")


def test_rerun_is_byte_identical_across_workers(tmp_path):
    cfg = ExperimentConfig.from_text(SMALL_OTOC)
    a = run_experiment(cfg, tmp_path / "a", workers=1)
    b = run_experiment(cfg, tmp_path / "b", workers=1)
    c = run_experiment(cfg, tmp_path / "c", workers=3)
    assert a["outputs"] == b["outputs"] == c["outputs"]
    assert {"scaling.csv", "fits.json", "scaling.svg", "otoc.svg", "config.txt"} <= set(a["outputs"])
    assert verify_manifest(tmp_path / "a") == []
    (tmp_path / "a" / "fits.json").write_text("{}")
    assert verify_manifest(tmp_path / "a") == ["fits.json"]


def test_manifest_regenerates_outputs(tmp_path):
    cfg = ExperimentConfig.from_text(SMALL_OTOC.replace("kind = otoc", "kind = autocorr")
                                     .replace("n_sites = 1500", "n_sites = 300"))
    first = run_experiment(cfg, tmp_path / "a")
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    again = run_experiment(ExperimentConfig.from_text(manifest["config_text"]), tmp_path / "b")
    assert again["outputs"] == first["outputs"]
    assert manifest["seeds"] and manifest["version"]


def test_syk_theory_via_cli(tmp_path, capsys):
    cfg = tmp_path / "theory.cfg"
    cfg.write_text("kind = syk-theory\nvariant = brownian\nq = 4\nmu = 0\nJ = 1\n")
    assert main(["syk-theory", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    data = json.loads((tmp_path / "o" / "syk_theory.json").read_text())
    assert data["results"][0]["lambda"] == 0.5
    assert "outputs" in json.loads(capsys.readouterr().out)


def test_exact_bound_via_cli(tmp_path):
    cfg = tmp_path / "exact.cfg"
    cfg.write_text("kind = exact-bound\nn_sites = 4\nn_hamiltonians = 2\nmu = 0, 2\nblocks = 1:3\n")
    assert main(["exact-bound", "--config", str(cfg), "--out", str(tmp_path / "o"), "--seed", "3"]) == 0
    rep = json.loads((tmp_path / "o" / "exact_bound.json").read_text())
    assert rep["violations"] == 0 and rep["min_slack"] >= -1e-10
    assert (tmp_path / "o" / "sizes.svg").exists()


def test_butterfly_via_cli(tmp_path):
    cfg = tmp_path / "bf.cfg"
    cfg.write_text("kind = butterfly\ngeometry = chain\nn_sites = 120\nk = 3\nnbar = 0.2\n"
                   "n_samples = 20\nt_max = 120\n")
    assert main(["butterfly", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    fronts = json.loads((tmp_path / "o" / "fits.json").read_text())["fronts"]
    assert len(fronts) == 1


def test_exit_codes(tmp_path, capsys):
    assert main([]) == 1
    assert main(["otoc", "--bogus"]) == 1
    assert main(["otoc", "--config", str(tmp_path / "missing.cfg")]) == 1
    bad = tmp_path / "bad.cfg"
    bad.write_text("kind = otoc\nk = 4\n")
    assert main(["otoc", "--config", str(bad)]) == 2
    other = tmp_path / "other.cfg"
    other.write_text("kind = autocorr\n")
    assert main(["otoc", "--config", str(other)]) == 2
    assert main(["otoc", "--workers", "0"]) == 2
    ok = tmp_path / "ok.cfg"
    ok.write_text(SMALL_OTOC)
    blocker = tmp_path / "blocker"
    blocker.write_text("not a directory")
    assert main(["otoc", "--config", str(ok), "--out", str(blocker)]) == 3
    capsys.readouterr()


def _polylines(path):
    return ET.parse(path).getroot().findall(f"{SVG}polyline")


def test_two_point_curve_gives_one_polyline(tmp_path):
    (tmp_path / "c.csv").write_text("t,value,stderr,n_samples\n0,0.1,0.0,5\n1,0.2,0.0,5\n")
    emit_plot(tmp_path / "c.csv", tmp_path / "c.svg", PlotSpec("curve"))
    lines = _polylines(tmp_path / "c.svg")
    assert len(lines) == 1
    assert len(lines[0].get("points").split()) == 2


def test_log_axis_error_names_row(tmp_path):
    (tmp_path / "c.csv").write_text("t,value,stderr,n_samples\n0,0.1,0,5\n1,0.0,0,5\n2,0.3,0,5\n")
    with pytest.raises(ValueError, match="row 2"):
        emit_plot(tmp_path / "c.csv", tmp_path / "c.svg", PlotSpec("curve", y_log=True))
    (tmp_path / "x.csv").write_text("a,b\n1,2\n")
    with pytest.raises(SchemaError):
        emit_plot(tmp_path / "x.csv", tmp_path / "x.svg")
    with pytest.raises(SchemaError):
        emit_plot(tmp_path / "c.csv", tmp_path / "c.svg", PlotSpec("scaling"))


def test_collapse_coordinates_recomputed(tmp_path):
    prof = otoc_profile(ChargeSector(80, 16, "down"), 3, 0.5, 30, 10, 1)
    prof.to_csv(tmp_path / "p.csv")
    v = 0.37
    emit_plot(tmp_path / "p.csv", tmp_path / "p.svg", PlotSpec("collapse", velocity=v))
    expected = {}
    with open(tmp_path / "p.csv") as fh:
        for row in csv.DictReader(fh):
            t = float(row["t"])
            expected.setdefault(t, []).append((float(row["r"]) - v * t, float(row["value"])))
    lines = _polylines(tmp_path / "p.svg")
    assert len(lines) == len(expected)
    for line in lines:
        pts = [tuple(map(float, p.split(","))) for p in line.get("data-xy").split()]
        assert np.allclose(pts, expected[float(line.get("data-t"))], rtol=0, atol=1e-12)
