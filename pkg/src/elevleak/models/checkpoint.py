"""Versioned ``.npz`` checkpoints for every model family.

The archive holds the parameter arrays plus a ``__meta__`` JSON string with
the format tag, version, model kind and the shape of every array.
"""

from __future__ import annotations

import io
import json
from pathlib import Path

import numpy as np

FORMAT = "elevleak-model"
VERSION = 1


def _arrays_and_meta(model):
    from .cnn import CnnModel
    from .forest import Forest
    from .mlp import MlpModel
    from .svm import LinearModel

    extra = {}
    if isinstance(model, CnnModel):
        kind = "cnn"
        arrays = dict(model.params)
        extra["classes"] = [c.item() if hasattr(c, "item") else c for c in model.classes]
    elif isinstance(model, MlpModel):
        kind = "mlp"
        arrays = dict(model.params)
    elif isinstance(model, LinearModel):
        kind = "svm"
        arrays = {"weights": model.weights, "biases": model.biases}
    elif isinstance(model, Forest):
        kind = "rfc"
        arrays = {}
        for name in ("feature", "threshold", "left", "right", "counts"):
            arrays[name] = np.concatenate([getattr(t, name) for t in model.trees])
        arrays["offsets"] = np.cumsum([0] + [len(t.feature) for t in model.trees])
        extra["n_classes"] = model.n_classes
    else:
        raise TypeError(f"cannot checkpoint {type(model).__name__}")
    for attr in ("mean", "scale"):
        if getattr(model, attr, None) is not None:
            arrays[f"_{attr}"] = getattr(model, attr)
    return kind, arrays, extra


def save_model(model, path) -> None:
    kind, arrays, extra = _arrays_and_meta(model)
    meta = {"format": FORMAT, "version": VERSION, "kind": kind,
            "shapes": {k: list(np.shape(v)) for k, v in arrays.items()},
            "dtypes": {k: str(np.asarray(v).dtype) for k, v in arrays.items()}, **extra}
    buf = io.BytesIO()
    np.savez(buf, __meta__=np.array(json.dumps(meta, sort_keys=True)), **arrays)
    Path(path).write_bytes(buf.getvalue())


def load_model(path):
    from .cnn import CnnModel
    from .forest import Forest, Tree
    from .mlp import MlpModel
    from .svm import LinearModel

    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["__meta__"]))
        if meta.get("format") != FORMAT:
            raise ValueError(f"{path} is not an {FORMAT} checkpoint")
        if meta.get("version") != VERSION:
            raise ValueError(f"unsupported checkpoint version {meta.get('version')}")
        arrays = {k: data[k] for k in data.files if k != "__meta__"}
    for name, shape in meta["shapes"].items():
        if list(arrays[name].shape) != shape:
            raise ValueError(f"array {name} has shape {arrays[name].shape}, metadata says {shape}")

    kind = meta["kind"]
    mean, scale = arrays.pop("_mean", None), arrays.pop("_scale", None)
    if kind == "cnn":
        return CnnModel(arrays, meta["classes"])
    if kind == "mlp":
        return MlpModel(arrays, mean, scale)
    if kind == "svm":
        return LinearModel(arrays["weights"], arrays["biases"], mean, scale)
    if kind == "rfc":
        off = arrays["offsets"]
        trees = [Tree(*(arrays[n][off[i]:off[i + 1]] for n in ("feature", "threshold", "left", "right", "counts")))
                 for i in range(len(off) - 1)]
        return Forest(trees, meta["n_classes"])
    raise ValueError(f"unknown model kind {kind!r}")
