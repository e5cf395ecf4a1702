import json
from pathlib import Path

import numpy as np
import pytest

from elevleak.cli import main
from elevleak.evaluation import LabeledDataset
from elevleak.geodata import Rect, Route, TrackPoint, write_gpx
from elevleak.miner import SegmentPath, ServiceClient, record_fixtures

ROOT = Path(__file__).resolve().parents[1]
DATA = Path(__file__).parent / "data"


def _gpx(path, lat, lon, n=6):
    pts = [TrackPoint(lat + 0.001 * i, lon + 0.001 * i, 100.0 + 3 * i) for i in range(n)]
    path.write_bytes(write_gpx(Route(path.stem, pts)))


# --- ingest ---

def test_ingest_empty_dir(tmp_path, capsys):
    assert main(["ingest", str(tmp_path)]) == 2
    assert "no samples" in capsys.readouterr().err


def test_ingest_two_regions_and_rerun_identical(tmp_path, capsys):
    gpx = tmp_path / "gpx"
    gpx.mkdir()
    _gpx(gpx / "a.gpx", 48.10, 11.50)
    _gpx(gpx / "b.gpx", 48.11, 11.51)
    _gpx(gpx / "c.gpx", 52.50, 13.40)
    (gpx / "broken.gpx").write_text("<gpx><trk>")
    out1, out2 = tmp_path / "r1.jsonl", tmp_path / "r2.jsonl"
    assert main(["ingest", str(gpx), "-o", str(out1)]) == 0
    stdout = capsys.readouterr().out
    assert "3 samples in 2 regions" in stdout
    d = LabeledDataset.read(out1)
    assert d.labels("region") == ["R0", "R0", "R1"]
    assert main(["ingest", str(gpx), "-o", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()


# --- synth / render ---

def test_synth_and_render_golden(tmp_path):
    args = ["synth", "--n-cities", "2", "--count", "3", "--n-points", "50", "--seed", "7"]
    assert main(args + ["-o", str(tmp_path / "a.jsonl")]) == 0
    assert main(args + ["-o", str(tmp_path / "b.jsonl")]) == 0
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
    assert LabeledDataset.read(tmp_path / "a.jsonl").class_counts("city") == {"C0": 3, "C1": 3}
    png = tmp_path / "x.png"
    assert main(["render", str(DATA / "golden_dataset.jsonl"), "C1/00001", "-o", str(png)]) == 0
    assert png.read_bytes() == (DATA / "golden_C1_00001.png").read_bytes()


def test_render_constant_and_missing(tmp_path, capsys):
    ds = tmp_path / "c.jsonl"
    ds.write_text(json.dumps({"id": "flat", "elevations": [50.0] * 30, "labels": {"city": "X"},
                              "provenance": "synthetic"}) + "\n")
    assert main(["render", str(ds), "flat", "--scale", "1", "--out-dir", str(tmp_path)]) == 0
    from PIL import Image
    img = np.asarray(Image.open(tmp_path / "flat.png"))
    ink = np.argwhere((img != 255).any(axis=2))
    assert set(ink[:, 0]) == {16}
    assert main(["render", str(ds), "nope"]) == 2
    assert "nope" in capsys.readouterr().err


# --- run ---

def test_run_shipped_config(tmp_path, capsys):
    cfg = ROOT / "configs" / "tm3_synthetic.json"
    assert main(["run", str(cfg), "--out-dir", str(tmp_path / "a")]) == 0
    assert "accuracy" in capsys.readouterr().out
    doc = json.loads((tmp_path / "a" / "tm3_synthetic.json").read_text())
    assert 0.2 < doc["aggregate"]["accuracy"] <= 1.0
    assert doc["config"]["model"]["family"] == "mlp" and len(doc["config_hash"]) == 64
    assert main(["run", "--config", str(cfg), "--out-dir", str(tmp_path / "b")]) == 0
    for ext in ("csv", "json", "svg"):
        assert (tmp_path / "a" / f"tm3_synthetic.{ext}").read_bytes() == \
               (tmp_path / "b" / f"tm3_synthetic.{ext}").read_bytes()
    assert main(["report", str(tmp_path / "a" / "tm3_synthetic.json")]) == 0
    assert "TM3" in capsys.readouterr().out


def _write_cfg(tmp_path, **changes):
    doc = json.loads((ROOT / "configs" / "tm3_synthetic.json").read_text())
    for key, value in changes.items():
        target = doc
        parts = key.split("__")
        for p in parts[:-1]:
            target = target[p]
        target[parts[-1]] = value
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(doc))
    return path


@pytest.mark.parametrize("change, field", [
    ({"model__family": "xgboost"}, "model.family"),
    ({"model__params": {"epochs": -1}}, "model.params.epochs"),
    ({"model__params": {"depth": 3}}, "model.params.depth"),
    ({"protocol__k": 1}, "protocol.k"),
    ({"protocol__overlap_ratio": 1.5}, "protocol.overlap_ratio"),
    ({"text__mode": "coarse"}, "text.mode"),
    ({"threat_model": "TM9"}, "threat_model"),
    ({"representation": "image"}, "model.family"),
    ({"dataset": {"path": "missing.jsonl"}}, "dataset.path"),
    ({"dataset__synthetic__count": 0}, "dataset.synthetic.count"),
])
def test_run_invalid_config(tmp_path, capsys, change, field):
    path = _write_cfg(tmp_path, **change)
    assert main(["run", str(path), "--out-dir", str(tmp_path)]) == 1
    assert field in capsys.readouterr().err


def test_run_bad_json_and_missing_arg(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["run", str(bad)]) == 1
    assert main(["run"]) == 1
    assert main(["frobnicate"]) == 1


# --- preprocess / train / eval ---

@pytest.fixture
def small_dataset(tmp_path):
    out = tmp_path / "s.jsonl"
    assert main(["synth", "--n-cities", "3", "--count", "15", "--n-points", "60", "-o", str(out)]) == 0
    return out


def test_preprocess_text_and_image(tmp_path, small_dataset):
    assert main(["preprocess", str(small_dataset), "--max-features", "64", "--out-dir", str(tmp_path / "t")]) == 0
    f = np.load(tmp_path / "t" / "features.npz")
    assert f["X"].shape[1] <= 64 and all(np.isclose(t, 1.0) or t == 0.0 for t in f["X"].sum(axis=1))
    assert (tmp_path / "t" / "pipeline.json").exists()
    assert main(["preprocess", str(small_dataset), "--representation", "image",
                 "--out-dir", str(tmp_path / "i")]) == 0
    assert np.load(tmp_path / "i" / "features.npz")["X"].shape == (45, 3, 32, 32)


@pytest.mark.parametrize("model, params", [("svm", {"epochs": 20}), ("rfc", {"trees": 5}),
                                           ("mlp", {"epochs": 30}), ("cnn", {"epochs": 2, "c1": 4, "c2": 8})])
def test_train_then_eval(tmp_path, small_dataset, capsys, model, params):
    mdir = tmp_path / "m"
    assert main(["train", str(small_dataset), "--model", model, "--params", json.dumps(params),
                 "--max-features", "128", "--out-dir", str(mdir)]) == 0
    assert main(["eval", str(small_dataset), str(mdir), "-o", str(tmp_path / "e.json")]) == 0
    doc = json.loads((tmp_path / "e.json").read_text())
    assert doc["classes"] == ["C0", "C1", "C2"] and 0.0 <= doc["accuracy"] <= 1.0
    assert doc["n"] + doc["dropped"] == 45


def test_train_bad_params(tmp_path, small_dataset):
    assert main(["train", str(small_dataset), "--model", "svm", "--params", "{bad"]) != 0


# --- mine ---

class _Live(ServiceClient):
    def explore(self, boundary):
        lat, lon = boundary.center
        return [SegmentPath(f"s{round(lat * 1e4)}_{round(lon * 1e4)}", [(lat, lon), (lat + 1e-3, lon + 1e-3), (lat + 2e-3, lon)])]

    def elevations(self, path):
        return [10.0 + i for i in range(len(path))]


def test_mine_from_fixtures(tmp_path, capsys):
    fixtures = tmp_path / "fx"
    city = Rect.from_bounds(45.0, 7.0, 45.1, 7.1)
    record_fixtures(_Live(), city, 2, 2, fixtures)
    out = tmp_path / "m.jsonl"
    assert main(["mine", "--fixtures", str(fixtures), "--bounds", "45.0", "7.0", "45.1", "7.1",
                 "--rows", "2", "--cols", "2", "--label", "Turin", "-o", str(out)]) == 0
    d = LabeledDataset.read(out)
    assert len(d) == 4 and set(d.labels("city")) == {"Turin"}
    assert "4 segments mined" in capsys.readouterr().out
