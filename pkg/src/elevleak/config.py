"""Experiment configuration files (JSON).

A config names a threat model, a representation, one model family with its
hyperparameters, the evaluation protocol and a dataset, given either as a
JSONL path or as an inline synthetic-city spec::

    {
      "threat_model": "TM3",
      "representation": "text",
      "model": {"family": "mlp", "params": {"epochs": 100}},
      "text": {"ngram_order": 8, "max_features": 2048},
      "protocol": {"kind": "kfold", "k": 10},
      "dataset": {"synthetic": {"n_cities": 5, "gap": 300, "count": 200}},
      "seed": 0
    }

Every validation failure raises ``ConfigError`` naming the offending field
with a dotted path such as ``model.params.epochs``.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .evaluation.experiment import FAMILIES, PROTOCOLS, REPRESENTATIONS, THREAT_MODELS, ModelSpec, ProtocolConfig
from .imagerep import Palette
from .textrep import MODES, TextConfig

MODEL_PARAMS = {
    "svm": {"epochs": int, "lr": float, "regularization": float, "batch_size": int, "standardize": bool},
    "rfc": {"trees": int, "max_features": (int, str), "min_samples_leaf": int},
    "mlp": {"hidden": int, "epochs": int, "lr": float, "beta1": float, "beta2": float, "eps": float,
            "alpha": float, "batch_size": int, "standardize": bool},
    "cnn": {"epochs": int, "lr": float, "batch_size": int, "c1": int, "c2": int, "dtype": str,
            "beta1": float, "beta2": float, "eps": float},
}

SYNTHETIC_KEYS = {"n_cities": int, "gap": float, "amplitude": float, "base": float, "n_bumps": int,
                  "count": int, "n_points": int, "boroughs_per_city": int, "seed": int}
SYNTHETIC_DEFAULTS = {"n_cities": 5, "gap": 300.0, "amplitude": 150.0, "base": 0.0, "n_bumps": 12,
                      "count": 200, "n_points": 150, "boroughs_per_city": 0, "seed": 0}


@dataclass
class DatasetSource:
    path: Path | None = None
    synthetic: dict | None = None

    def load(self):
        from .evaluation.dataset import LabeledDataset
        from .synth import default_cities, gen_city_dataset

        if self.path is not None:
            if not self.path.exists():
                raise ConfigError("dataset.path", f"{self.path} does not exist")
            return LabeledDataset.read(self.path)
        s = {**SYNTHETIC_DEFAULTS, **self.synthetic}
        cities = default_cities(s["n_cities"], s["gap"], s["amplitude"], s["base"], s["n_bumps"],
                                s["seed"], s["count"], s["boroughs_per_city"])
        return gen_city_dataset(cities, s["n_points"], s["seed"])


@dataclass
class ExperimentConfig:
    threat_model: str
    representation: str
    model: ModelSpec
    dataset: DatasetSource
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)
    text: TextConfig = field(default_factory=TextConfig)
    palette: Palette = field(default_factory=Palette)
    seed: int = 0
    svg: bool = True
    raw: dict = field(default_factory=dict, repr=False)  # the document as given, for report embedding


def _check_type(path: str, value, expected):
    types = expected if isinstance(expected, tuple) else (expected,)
    # bool is an int subclass; keep them apart
    if isinstance(value, bool) and bool not in types:
        raise ConfigError(path, f"expected {_names(types)}, got bool")
    if float in types and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if not isinstance(value, types):
        raise ConfigError(path, f"expected {_names(types)}, got {type(value).__name__}")
    return value


def _names(types) -> str:
    return " or ".join(t.__name__ for t in types)


def _section(doc: dict, key: str, allowed: dict, prefix: str) -> dict:
    sec = doc.get(key, {})
    if sec is None:
        return {}
    if not isinstance(sec, dict):
        raise ConfigError(prefix, "expected an object")
    out = {}
    for name, value in sec.items():
        path = f"{prefix}.{name}"
        if name not in allowed:
            raise ConfigError(path, f"unknown field; expected one of {sorted(allowed)}")
        out[name] = value if allowed[name] is None else _check_type(path, value, allowed[name])
    return out


def _positive(path: str, value, allow_zero: bool = False):
    if value < 0 or (value == 0 and not allow_zero):
        raise ConfigError(path, f"must be {'non-negative' if allow_zero else 'positive'}, got {value}")


TOP_LEVEL = {"threat_model", "representation", "model", "text", "palette", "protocol", "dataset", "seed", "output"}


def parse_config(doc: dict, base_dir=".") -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "expected a JSON object")
    for key in doc:
        if key not in TOP_LEVEL:
            raise ConfigError(key, f"unknown field; expected one of {sorted(TOP_LEVEL)}")

    tm = doc.get("threat_model")
    if tm not in THREAT_MODELS:
        raise ConfigError("threat_model", f"expected one of {sorted(THREAT_MODELS)}, got {tm!r}")
    rep = doc.get("representation")
    if rep not in REPRESENTATIONS:
        raise ConfigError("representation", f"expected one of {list(REPRESENTATIONS)}, got {rep!r}")

    model = doc.get("model")
    if not isinstance(model, dict):
        raise ConfigError("model", "expected an object with 'family' and optional 'params'")
    family = model.get("family")
    if family not in FAMILIES:
        raise ConfigError("model.family", f"unknown model {family!r}; expected one of {list(FAMILIES)}")
    for key in model:
        if key not in ("family", "params"):
            raise ConfigError(f"model.{key}", "unknown field; expected 'family' or 'params'")
    params = _section(model, "params", MODEL_PARAMS[family], "model.params")
    for name, value in params.items():
        if isinstance(value, (int, float)) and not isinstance(value, bool) and name not in ("beta1", "beta2"):
            _positive(f"model.params.{name}", value)
    if family != "cnn" and rep == "image":
        raise ConfigError("model.family", f"{family} works on text features; image needs cnn")
    if family == "cnn" and rep == "text":
        raise ConfigError("representation", "cnn needs the image representation")

    text_fields = {f.name: None for f in dataclasses.fields(TextConfig)}
    text = _section(doc, "text", text_fields, "text")
    if "mode" in text and text["mode"] not in MODES:
        raise ConfigError("text.mode", f"expected one of {list(MODES)}")
    for name in ("ngram_order", "min_term_frequency"):
        if name in text:
            _check_type(f"text.{name}", text[name], int)
            _positive(f"text.{name}", text[name], allow_zero=name == "min_term_frequency")
    if text.get("max_features") is not None:
        _check_type("text.max_features", text["max_features"], int)
        _positive("text.max_features", text["max_features"])

    palette_doc = _section(doc, "palette", {"low": float, "high": float, "colors": list}, "palette")
    try:
        palette = Palette(**{k: (tuple(tuple(c) for c in v) if k == "colors" else v) for k, v in palette_doc.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError("palette", str(exc)) from None

    proto_types = {"kind": str, "k": int, "per_class": (int, type(None)), "classes": (list, type(None)),
                   "overlap_ratio": float, "test_fraction": float, "class_weighting": bool,
                   "drops": list, "rounds": list}
    proto = _section(doc, "protocol", proto_types, "protocol")
    if "kind" in proto and proto["kind"] not in PROTOCOLS:
        raise ConfigError("protocol.kind", f"expected one of {list(PROTOCOLS)}, got {proto['kind']!r}")
    if proto.get("k", 2) < 2:
        raise ConfigError("protocol.k", "must be at least 2")
    if not 0.0 <= proto.get("overlap_ratio", 0.0) < 1.0:
        raise ConfigError("protocol.overlap_ratio", "must lie in [0, 1)")
    if not 0.0 < proto.get("test_fraction", 0.2) < 1.0:
        raise ConfigError("protocol.test_fraction", "must lie strictly between 0 and 1")
    if proto.get("per_class") is not None:
        _positive("protocol.per_class", proto["per_class"])
    if proto.get("kind") == "finetune" and family != "cnn":
        raise ConfigError("protocol.kind", "finetune requires the cnn model")
    for i, r in enumerate(proto.get("rounds", [])):
        if not isinstance(r, dict) or set(r) - {"epochs", "lr", "batch_size"}:
            raise ConfigError(f"protocol.rounds.{i}", "expected an object with epochs / lr / batch_size")

    ds = doc.get("dataset")
    if not isinstance(ds, dict) or len(ds) != 1 or next(iter(ds)) not in ("path", "synthetic"):
        raise ConfigError("dataset", "expected exactly one of 'path' or 'synthetic'")
    if "path" in ds:
        if not isinstance(ds["path"], str):
            raise ConfigError("dataset.path", "expected a string")
        path = Path(base_dir) / ds["path"]
        if not path.exists():
            raise ConfigError("dataset.path", f"{path} does not exist")
        source = DatasetSource(path=path)
    else:
        synth = _section(ds, "synthetic", SYNTHETIC_KEYS, "dataset.synthetic")
        for name in ("n_cities", "count", "n_points"):
            if name in synth:
                _positive(f"dataset.synthetic.{name}", synth[name])
        source = DatasetSource(synthetic=synth)

    seed = doc.get("seed", 0)
    _check_type("seed", seed, int)
    output = _section(doc, "output", {"svg": bool}, "output")

    return ExperimentConfig(tm, rep, ModelSpec(family, params), source, ProtocolConfig(**proto),
                            TextConfig(**text), palette, seed, output.get("svg", True), doc)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("<root>", f"invalid JSON: {exc}") from None
    return parse_config(doc, path.parent)
