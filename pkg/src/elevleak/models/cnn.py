"""Two-block convolutional classifier for 3x32x32 line-graph images.

CONV(5x5, stride 1, pad 2) -> ReLU -> MAXPOOL(2) -> CONV -> ReLU -> MAXPOOL(2)
-> flatten -> fully connected logits. Forward and backward passes are plain
numpy (im2col for the convolutions).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DivergedLoss, ShapeMismatch
from ._common import argmax_first, check_labels, log_softmax, softmax
from .adam import AdamState

KERNEL = 5
PAD = 2
INPUT_SHAPE = (3, 32, 32)


@dataclass
class CnnModel:
    params: dict  # W1 (C1,3,5,5) b1 | W2 (C2,C1,5,5) b2 | Wf (K, C2*8*8) bf (K)
    classes: list = field(default_factory=list)  # label carried by each logit row

    @property
    def n_classes(self) -> int:
        return self.params["bf"].shape[0]

    @property
    def dtype(self):
        return self.params["W1"].dtype

    def copy(self) -> "CnnModel":
        return CnnModel({k: v.copy() for k, v in self.params.items()}, list(self.classes))

    def logits(self, images, batch_size: int = 256) -> np.ndarray:
        images = np.asarray(images, dtype=self.dtype)
        out = [cnn_forward(self, images[i:i + batch_size]) for i in range(0, len(images), batch_size)]
        return np.concatenate(out) if out else np.zeros((0, self.n_classes), dtype=self.dtype)

    def predict_proba(self, images) -> np.ndarray:
        return softmax(self.logits(images))

    def predict(self, images) -> np.ndarray:
        """Predicted labels (mapped through ``classes``)."""
        rows = argmax_first(self.logits(images))
        return np.asarray(self.classes)[rows] if self.classes else rows


def init_cnn(n_classes: int, c1: int = 16, c2: int = 32, seed=0, dtype=np.float32) -> CnnModel:
    """He-uniform convolution kernels, Glorot-uniform head, zero biases."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    fan1, fan2 = 3 * KERNEL * KERNEL, c1 * KERNEL * KERNEL
    flat = c2 * 8 * 8
    params = {
        "W1": rng.uniform(-1, 1, (c1, 3, KERNEL, KERNEL)) * np.sqrt(6.0 / fan1),
        "b1": np.zeros(c1),
        "W2": rng.uniform(-1, 1, (c2, c1, KERNEL, KERNEL)) * np.sqrt(6.0 / fan2),
        "b2": np.zeros(c2),
        "Wf": _head_rows(rng, n_classes, flat),
        "bf": np.zeros(n_classes),
    }
    return CnnModel({k: v.astype(dtype) for k, v in params.items()}, list(range(n_classes)))


def _head_rows(rng, rows: int, flat: int) -> np.ndarray:
    lim = np.sqrt(6.0 / (flat + rows))
    return rng.uniform(-lim, lim, (rows, flat))


# ---------------------------------------------------------------------------
# Layers. Activations are kept channel-major, (C, N, H, W), so that every
# convolution is a single GEMM against a (C*25, N*H*W) patch matrix.


def _im2col(x: np.ndarray) -> np.ndarray:
    """(c, n, h, w) -> (c*25, n*h*w) patch matrix, rows ordered (c, ki, kj)."""
    c, n, h, w = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (PAD, PAD), (PAD, PAD)))
    cols = np.empty((c, KERNEL * KERNEL, n, h, w), dtype=x.dtype)
    for i in range(KERNEL):
        for j in range(KERNEL):
            cols[:, i * KERNEL + j] = xp[:, :, i:i + h, j:j + w]
    return cols.reshape(c * KERNEL * KERNEL, n * h * w)


def conv_forward(x, W, b):
    """Same-size 5x5 convolution of a (C, N, H, W) batch; returns (out, patches)."""
    _, n, h, w = x.shape
    cols = _im2col(x)
    out = W.reshape(W.shape[0], -1) @ cols
    out += np.reshape(b, (-1, 1))
    return out.reshape(-1, n, h, w), cols


def _col2im(dcols, shape):
    c, n, h, w = shape
    dcols = dcols.reshape(c, KERNEL * KERNEL, n, h, w)
    dxp = np.zeros((c, n, h + 2 * PAD, w + 2 * PAD), dtype=dcols.dtype)
    for i in range(KERNEL):
        for j in range(KERNEL):
            dxp[:, :, i:i + h, j:j + w] += dcols[:, i * KERNEL + j]
    return dxp[:, :, PAD:PAD + h, PAD:PAD + w]


def conv_backward(dout, cols, W, need_input_grad=True):
    f, n, h, w = dout.shape
    d2 = dout.reshape(f, -1)
    dW = (d2 @ cols.T).reshape(W.shape)
    db = d2.sum(axis=1)
    dx = None
    if need_input_grad:
        dcols = W.reshape(f, -1).T @ d2
        dx = _col2im(dcols, (W.shape[1], n, h, w))
    return dx, dW, db


def _quadrants(x):
    return (x[..., 0::2, 0::2], x[..., 0::2, 1::2], x[..., 1::2, 0::2], x[..., 1::2, 1::2])


def maxpool_forward(x):
    """2x2/2 max pooling; ``arg`` holds the first maximal position (0..3) per block."""
    q = _quadrants(x)
    out = np.maximum(np.maximum(q[0], q[1]), np.maximum(q[2], q[3]))
    arg = np.full(out.shape, 3, dtype=np.int8)
    for k in (2, 1, 0):
        arg[q[k] == out] = k
    return out, arg


def maxpool_backward(dout, arg):
    grad = np.zeros(dout.shape[:-2] + (2 * dout.shape[-2], 2 * dout.shape[-1]), dtype=dout.dtype)
    for k, view in enumerate(_quadrants(grad)):
        view[...] = np.where(arg == k, dout, 0)
    return grad


def _check_input(images):
    if images.ndim != 4 or images.shape[1:] != INPUT_SHAPE:
        raise ShapeMismatch(f"expected (N, 3, 32, 32) images, got {images.shape}")


def _forward(params, x):
    """Logits for an (N, 3, 32, 32) batch plus the cache needed by backward."""
    n = len(x)
    x = np.ascontiguousarray(x.transpose(1, 0, 2, 3))
    # max pooling commutes with ReLU, so pool first and rectify the smaller map
    z1, cols1 = conv_forward(x, params["W1"], params["b1"])
    m1, arg1 = maxpool_forward(z1)
    p1 = np.maximum(m1, 0)
    z2, cols2 = conv_forward(p1, params["W2"], params["b2"])
    m2, arg2 = maxpool_forward(z2)
    p2 = np.maximum(m2, 0)
    flat = p2.transpose(1, 0, 2, 3).reshape(n, -1)
    logits = flat @ params["Wf"].T + params["bf"]
    cache = (cols1, m1, arg1, cols2, m2, arg2, flat)
    return logits, cache


def cnn_forward(model: CnnModel, image: np.ndarray) -> np.ndarray:
    """Logits for one (3,32,32) image or a (N,3,32,32) batch."""
    image = np.asarray(image)
    single = image.ndim == 3
    batch = image[None] if single else image
    _check_input(batch)
    logits, _ = _forward(model.params, batch.astype(model.dtype, copy=False))
    return logits[0] if single else logits


def forward_trace(model: CnnModel, image: np.ndarray) -> list[tuple[str, tuple]]:
    """Per-layer activation shapes, as (channels, height, width), for one image."""
    x = np.asarray(image, dtype=model.dtype)[None]
    _check_input(x)
    p = model.params
    x = x.transpose(1, 0, 2, 3)

    def chw(a):
        return (a.shape[0],) + a.shape[2:]

    trace = [("input", chw(x))]
    z1, _ = conv_forward(x, p["W1"], p["b1"])
    trace.append(("conv1", chw(z1)))
    p1 = np.maximum(maxpool_forward(z1)[0], 0)
    trace.append(("pool1", chw(p1)))
    z2, _ = conv_forward(p1, p["W2"], p["b2"])
    trace.append(("conv2", chw(z2)))
    p2 = np.maximum(maxpool_forward(z2)[0], 0)
    trace.append(("pool2", chw(p2)))
    flat = p2.transpose(1, 0, 2, 3).reshape(1, -1)
    trace.append(("flatten", flat.shape[1:]))
    trace.append(("logits", (flat @ p["Wf"].T).shape[1:]))
    return trace


def loss_and_grads(params: dict, x: np.ndarray, y: np.ndarray, sample_weights=None):
    """Mean (optionally per-sample weighted) cross-entropy and its gradients."""
    n = len(y)
    logits, (cols1, m1, arg1, cols2, m2, arg2, flat) = _forward(params, x)
    logp = log_softmax(logits)
    ce = -logp[np.arange(n), y]
    dlogits = np.exp(logp)
    dlogits[np.arange(n), y] -= 1
    if sample_weights is not None:
        ce = ce * sample_weights
        dlogits *= sample_weights[:, None]
    loss = ce.mean()
    dlogits /= n

    grads = {"Wf": dlogits.T @ flat, "bf": dlogits.sum(axis=0)}
    c2, _, h2, w2 = m2.shape
    dp2 = (dlogits @ params["Wf"]).reshape(n, c2, h2, w2).transpose(1, 0, 2, 3)
    dp2[m2 <= 0] = 0
    dz2 = maxpool_backward(dp2, arg2)
    dp1, grads["W2"], grads["b2"] = conv_backward(dz2, cols2, params["W2"])
    dp1[m1 <= 0] = 0
    dz1 = maxpool_backward(dp1, arg1)
    _, grads["W1"], grads["b1"] = conv_backward(dz1, cols1, params["W1"], need_input_grad=False)
    return float(loss), grads


def cnn_train(images, y, class_weights=None, epochs: int = 1000, lr: float = 1e-3,
              batch_size: int = 32, seed: int = 0, model: CnnModel | None = None,
              n_classes: int | None = None, c1: int = 16, c2: int = 32, dtype=np.float32,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
              min_classes: int = 2, history: list | None = None) -> CnnModel:
    """Train (or continue training) a CNN with Adam on head-row labels ``y``.

    ``class_weights`` scales each sample's cross-entropy by the weight of its
    class. A fresh model is initialised from ``seed``; batches are shuffled by
    a generator drawn from the same seed. Per-epoch mean losses are appended
    to ``history`` when given.
    """
    images = np.asarray(images)
    _check_input(images)
    if min_classes >= 2:
        y, k = check_labels(y, n_classes)
    else:
        y = np.asarray(y, dtype=np.int64)
        k = n_classes or int(y.max()) + 1
    rng = np.random.default_rng(seed)
    if model is None:
        model = init_cnn(k, c1, c2, rng, dtype)
    elif model.n_classes != k:
        raise ShapeMismatch(f"model has {model.n_classes} outputs, labels need {k}")
    params = model.params
    x = images.astype(params["W1"].dtype, copy=False)
    weights = None
    if class_weights is not None:
        class_weights = np.asarray(class_weights, dtype=x.dtype)
        if len(class_weights) != k or np.any(class_weights <= 0):
            raise ValueError("need one positive class weight per class")
        weights = class_weights[y]

    opt = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
    n = len(y)
    batch_size = min(batch_size, n)
    for _ in range(epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            loss, grads = loss_and_grads(params, x[idx], y[idx],
                                         None if weights is None else weights[idx])
            if not np.isfinite(loss):
                raise DivergedLoss(f"loss became {loss}")
            opt.update(params, grads)
            total += loss * len(idx)
        if history is not None:
            history.append(total / n)
    return model


def rehead(model: CnnModel, classes, rng) -> CnnModel:
    """Copy of ``model`` whose output layer covers ``classes``.

    Rows of classes the model already predicts are copied; other rows are
    freshly initialised. Convolution parameters are carried over untouched.
    """
    classes = list(classes)
    new = model.copy()
    wf, bf = model.params["Wf"], model.params["bf"]
    fresh = _head_rows(rng, len(classes), wf.shape[1]).astype(wf.dtype)
    new_bf = np.zeros(len(classes), dtype=bf.dtype)
    old_rows = {c: i for i, c in enumerate(model.classes)}
    for i, c in enumerate(classes):
        if c in old_rows:
            fresh[i] = wf[old_rows[c]]
            new_bf[i] = bf[old_rows[c]]
    new.params["Wf"] = fresh
    new.params["bf"] = new_bf
    new.classes = classes
    return new
