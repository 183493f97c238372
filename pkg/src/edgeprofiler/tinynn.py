"""Minimal dense/conv neural-network training engine on float64 numpy.

Executes the profiled workloads and backs the MLP cost regressor.  The
layer set is fixed (dense, same-padded conv, ReLU, 2x2 max-pool, flatten)
with two loss heads: softmax cross-entropy for classification and mean
squared error for regression.  Everything is deterministic given seeds:
He-uniform initialization from a seeded generator, and per-epoch batch
shuffles drawn from ``(shuffle_seed, epoch_index)`` so a training run can
be split across calls without changing the batch order.

Convolutions run as im2col gathers plus BLAS matmuls; the input gradient
is the correlation of the output gradient with the spatially flipped,
channel-transposed kernel, so the backward pass reuses the same machinery.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .workload import (
    DatasetSpec,
    Family,
    ModelArch,
    Optimizer,
    ShapeError,
    synthesize_dataset,
)


class DivergedError(RuntimeError):
    """Training produced a non-finite loss."""


# -- layers ----------------------------------------------------------------

def _im2col(x: np.ndarray, k: int) -> np.ndarray:
    """Same-padded k x k patches of x (B,H,W,C) as rows (B*H*W, k*k*C)."""
    p = (k - 1) // 2
    xp = np.pad(x, ((0, 0), (p, p), (p, p), (0, 0)))
    win = sliding_window_view(xp, (k, k), axis=(1, 2))  # (B,H,W,C,k,k)
    b, h, w = x.shape[0], x.shape[1], x.shape[2]
    return win.transpose(0, 1, 2, 4, 5, 3).reshape(b * h * w, -1)


class Dense:
    kind = "dense"

    def __init__(self, w: np.ndarray, b: np.ndarray):
        self.w = w
        self.b = b
        self._x: np.ndarray | None = None

    @staticmethod
    def init(n_in: int, n_out: int, rng: np.random.Generator) -> "Dense":
        limit = np.sqrt(6.0 / n_in)
        w = rng.uniform(-limit, limit, size=(n_in, n_out))
        return Dense(w, np.zeros(n_out))

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._x = x
        return x @ self.w + self.b

    def backward(self, dout: np.ndarray, need_dx: bool) -> np.ndarray | None:
        self.dw = self._x.T @ dout
        self.db = dout.sum(axis=0)
        return dout @ self.w.T if need_dx else None

    def params(self):
        return [self.w, self.b]

    def grads(self):
        return [self.dw, self.db]


class Conv2D:
    """Stride-1 same-padded convolution; kernel stored as (k, k, C_in, C_out)."""

    kind = "conv"

    def __init__(self, w: np.ndarray, b: np.ndarray):
        self.w = w
        self.b = b
        self._cols: np.ndarray | None = None
        self._x_shape: tuple | None = None

    @staticmethod
    def init(k: int, c_in: int, c_out: int, rng: np.random.Generator) -> "Conv2D":
        fan_in = k * k * c_in
        limit = np.sqrt(6.0 / fan_in)
        w = rng.uniform(-limit, limit, size=(k, k, c_in, c_out))
        return Conv2D(w, np.zeros(c_out))

    def forward(self, x: np.ndarray) -> np.ndarray:
        k = self.w.shape[0]
        if x.shape[1] < k or x.shape[2] < k:
            raise ShapeError(f"conv kernel {k} exceeds input {x.shape[1]}x{x.shape[2]}")
        self._x_shape = x.shape
        self._cols = _im2col(x, k)
        b, h, w = x.shape[:3]
        c_out = self.w.shape[3]
        out = self._cols @ self.w.reshape(-1, c_out) + self.b
        return out.reshape(b, h, w, c_out)

    def backward(self, dout: np.ndarray, need_dx: bool) -> np.ndarray | None:
        b, h, w, c_out = dout.shape
        dflat = dout.reshape(b * h * w, c_out)
        self.dw = (self._cols.T @ dflat).reshape(self.w.shape)
        self.db = dflat.sum(axis=0)
        if not need_dx:
            return None
        # dx = correlate(dout, kernel flipped spatially with channels swapped)
        w_hat = self.w[::-1, ::-1].transpose(0, 1, 3, 2)  # (k,k,C_out,C_in)
        cols = _im2col(dout, self.w.shape[0])
        c_in = self.w.shape[2]
        dx = cols @ w_hat.reshape(-1, c_in)
        return dx.reshape(self._x_shape)

    def params(self):
        return [self.w, self.b]

    def grads(self):
        return [self.dw, self.db]


class ReLU:
    kind = "relu"

    def forward(self, x: np.ndarray) -> np.ndarray:
        out = np.maximum(x, 0.0)
        self._out = out  # out > 0 iff x > 0, so the output doubles as the mask
        return out

    def backward(self, dout: np.ndarray, need_dx: bool) -> np.ndarray:
        return np.where(self._out > 0, dout, 0.0)

    def params(self):
        return []

    def grads(self):
        return []


class MaxPool2:
    """2x2 max-pool, stride 2; odd trailing rows/columns are dropped.

    Backward routes the gradient by equality with the window maximum, so
    exactly tied entries each receive the full gradient.  Real ties only
    occur between ReLU-clamped zeros here (the pool always follows a
    ReLU), and those paths are cut by the ReLU gradient anyway.
    """

    kind = "maxpool"

    def forward(self, x: np.ndarray) -> np.ndarray:
        b, h, w, c = x.shape
        if h < 2 or w < 2:
            raise ShapeError(f"2x2 pool on degenerate input {h}x{w}")
        ho, wo = h // 2, w // 2
        self._x_shape = x.shape
        win = x[:, : 2 * ho, : 2 * wo, :].reshape(b, ho, 2, wo, 2, c)
        self._win = win
        out = np.maximum(win[:, :, 0], win[:, :, 1]).max(axis=3)
        self._out = out
        return out

    def backward(self, dout: np.ndarray, need_dx: bool) -> np.ndarray:
        b, ho, wo, c = dout.shape
        is_max = self._win == self._out[:, :, None, :, None, :]
        dwin = np.where(is_max, dout[:, :, None, :, None, :], 0.0)
        dx = np.zeros(self._x_shape)
        dx[:, : 2 * ho, : 2 * wo, :] = dwin.reshape(b, 2 * ho, 2 * wo, c)
        return dx

    def params(self):
        return []

    def grads(self):
        return []


class Flatten:
    kind = "flatten"

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._x_shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dout: np.ndarray, need_dx: bool) -> np.ndarray:
        return dout.reshape(self._x_shape)

    def params(self):
        return []

    def grads(self):
        return []


# -- network ---------------------------------------------------------------

class Network:
    def __init__(self, layers: list, rng_seed: int):
        self.layers = layers
        self.rng_seed = rng_seed

    def forward(self, x: np.ndarray) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, dout: np.ndarray) -> list[np.ndarray]:
        """Backprop from the loss gradient; returns grads aligned with parameters()."""
        for i in range(len(self.layers) - 1, -1, -1):
            dout = self.layers[i].backward(dout, need_dx=i > 0)
        grads: list[np.ndarray] = []
        for layer in self.layers:
            grads.extend(layer.grads())
        return grads

    def parameters(self) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    @property
    def param_count(self) -> int:
        return sum(p.size for p in self.parameters())

    def get_weights(self) -> list[np.ndarray]:
        return [p.copy() for p in self.parameters()]

    def set_weights(self, weights: list[np.ndarray]) -> None:
        params = self.parameters()
        if len(params) != len(weights):
            raise ValueError("weight list does not match network layout")
        for p, w in zip(params, weights):
            p[...] = np.asarray(w).reshape(p.shape)

    def to_dict(self) -> dict:
        layers = []
        for layer in self.layers:
            entry: dict = {"kind": layer.kind}
            if layer.params():
                entry["w_shape"] = list(layer.w.shape)
                entry["w"] = layer.w.ravel().tolist()
                entry["b"] = layer.b.tolist()
            layers.append(entry)
        return {"rng_seed": self.rng_seed, "layers": layers}

    @staticmethod
    def from_dict(d: dict) -> "Network":
        layers: list = []
        for entry in d["layers"]:
            kind = entry["kind"]
            if kind in ("dense", "conv"):
                w = np.array(entry["w"], dtype=np.float64).reshape(entry["w_shape"])
                b = np.array(entry["b"], dtype=np.float64)
                layers.append(Dense(w, b) if kind == "dense" else Conv2D(w, b))
            elif kind == "relu":
                layers.append(ReLU())
            elif kind == "maxpool":
                layers.append(MaxPool2())
            elif kind == "flatten":
                layers.append(Flatten())
            else:
                raise ValueError(f"unknown layer kind {kind!r}")
        return Network(layers, d["rng_seed"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @staticmethod
    def from_json(text: str) -> "Network":
        return Network.from_dict(json.loads(text))


def build_network(arch: ModelArch, data: DatasetSpec, seed: int) -> Network:
    """Deterministically initialized network for an architecture.

    He-uniform weights, zero biases.  Raises ShapeError when the conv
    geometry does not fit the input.
    """
    rng = np.random.default_rng(seed)
    layers: list = []
    if arch.family is Family.MLP:
        layers.append(Flatten())
        prev = data.flat_size
        for width in arch.mlp_hidden:
            layers.append(Dense.init(prev, width, rng))
            layers.append(ReLU())
            prev = width
        layers.append(Dense.init(prev, data.num_classes, rng))
        return Network(layers, seed)

    h, w, c = data.input_height, data.input_width, data.input_channels
    for spec in arch.conv_layers:
        if h < spec.kernel_size or w < spec.kernel_size:
            raise ShapeError(f"conv kernel {spec.kernel_size} exceeds input {h}x{w}")
        layers.append(Conv2D.init(spec.kernel_size, c, spec.out_channels, rng))
        layers.append(ReLU())
        c = spec.out_channels
        if spec.pool:
            if h < 2 or w < 2:
                raise ShapeError(f"2x2 pool on degenerate input {h}x{w}")
            layers.append(MaxPool2())
            h, w = h // 2, w // 2
    layers.append(Flatten())
    layers.append(Dense.init(h * w * c, data.num_classes, rng))
    return Network(layers, seed)


def build_regressor_network(n_features: int, hidden: tuple[int, ...], seed: int) -> Network:
    """Dense network with a single identity output unit (regression head)."""
    rng = np.random.default_rng(seed)
    layers: list = []
    prev = n_features
    for width in hidden:
        layers.append(Dense.init(prev, width, rng))
        layers.append(ReLU())
        prev = width
    layers.append(Dense.init(prev, 1, rng))
    return Network(layers, seed)


# -- losses ----------------------------------------------------------------

def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy and its gradient wrt logits; numerically stable."""
    z = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    n = logits.shape[0]
    loss = float(np.mean(lse - z[np.arange(n), labels]))
    probs = np.exp(z - lse[:, None])
    probs[np.arange(n), labels] -= 1.0
    return loss, probs / n


def mse_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared error over every output element, and its gradient."""
    diff = pred - target
    loss = float(np.mean(diff * diff))
    return loss, (2.0 / diff.size) * diff


# -- optimizers ------------------------------------------------------------

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
RMSPROP_RHO = 0.9
EPSILON = 1e-8


class OptimizerState:
    """One of SGD / Adam / RMSprop / Adagrad with per-parameter accumulators.

    Update rules (g = gradient, a = learning rate, eps = 1e-8):

      sgd      p -= a*g
      adam     m = b1*m+(1-b1)*g; v = b2*v+(1-b2)*g^2
               p -= a * (m/(1-b1^t)) / (sqrt(v/(1-b2^t)) + eps)
      rmsprop  s = rho*s+(1-rho)*g^2;  p -= a * g / (sqrt(s) + eps)
      adagrad  s += g^2;               p -= a * g / sqrt(s + eps)
    """

    def __init__(self, kind: Optimizer, learning_rate: float):
        self.kind = Optimizer(kind)
        self.learning_rate = learning_rate
        self.step_count = 0
        self._slots: dict[int, list[np.ndarray]] = {}

    def _buffers(self, slot: int, shape: tuple) -> list[np.ndarray]:
        if slot not in self._slots:
            n = 2 if self.kind is Optimizer.ADAM else 1
            self._slots[slot] = [np.zeros(shape) for _ in range(n)]
        return self._slots[slot]

    def update(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        """Apply one update step in place across all parameter tensors."""
        self.step_count += 1
        a = self.learning_rate
        t = self.step_count
        for slot, (p, g) in enumerate(zip(params, grads)):
            if self.kind is Optimizer.SGD:
                p -= a * g
            elif self.kind is Optimizer.ADAM:
                m, v = self._buffers(slot, p.shape)
                m *= ADAM_BETA1
                m += (1 - ADAM_BETA1) * g
                v *= ADAM_BETA2
                v += (1 - ADAM_BETA2) * (g * g)
                m_hat = m / (1 - ADAM_BETA1**t)
                v_hat = v / (1 - ADAM_BETA2**t)
                p -= a * m_hat / (np.sqrt(v_hat) + EPSILON)
            elif self.kind is Optimizer.RMSPROP:
                (s,) = self._buffers(slot, p.shape)
                s *= RMSPROP_RHO
                s += (1 - RMSPROP_RHO) * (g * g)
                p -= a * g / (np.sqrt(s) + EPSILON)
            else:  # adagrad
                (s,) = self._buffers(slot, p.shape)
                s += g * g
                p -= a * g / np.sqrt(s + EPSILON)


def optimizer_step(opt: OptimizerState, param: float | np.ndarray,
                   grad: float | np.ndarray) -> np.ndarray:
    """Single-tensor update (spec-level convenience); returns the new value."""
    p = np.array(param, dtype=np.float64, ndmin=1)
    g = np.array(grad, dtype=np.float64, ndmin=1)
    if not np.all(np.isfinite(g)):
        raise ValueError("gradient must be finite")
    opt.update([p], [g])
    return p if np.ndim(param) else float(p[0])


# -- training --------------------------------------------------------------

@dataclass
class TrainResult:
    network: Network
    final_loss: float
    final_accuracy: float | None


def _resolve_data(data) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(data, DatasetSpec):
        return synthesize_dataset(data)
    x, y = data
    return np.asarray(x), np.asarray(y)


def train_epochs(net: Network, opt: OptimizerState, x: np.ndarray, y: np.ndarray,
                 epochs: int, batch_size: int, *, shuffle_seed: int = 0,
                 epoch_offset: int = 0, loss: str = "softmax_ce") -> None:
    """Run full training passes in place; raises DivergedError on non-finite loss.

    Batch order for epoch e is a permutation seeded by
    (shuffle_seed, epoch_offset + e); the last partial batch is kept.
    """
    n = x.shape[0]
    if batch_size > n:
        raise ValueError(f"batch_size {batch_size} exceeds {n} samples")
    loss_fn = softmax_cross_entropy if loss == "softmax_ce" else mse_loss
    for e in range(epochs):
        order = np.random.default_rng([shuffle_seed, epoch_offset + e]).permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            # divergence is an expected, reported outcome; keep it quiet
            with np.errstate(over="ignore", invalid="ignore"):
                out = net.forward(x[idx])
                loss_val, dout = loss_fn(out, y[idx])
            if not np.isfinite(loss_val):
                raise DivergedError(f"non-finite loss at epoch {e}")
            opt.update(net.parameters(), net.backward(dout))


def evaluate(net: Network, x: np.ndarray, y: np.ndarray, *,
             loss: str = "softmax_ce", chunk: int = 256) -> tuple[float, float | None]:
    """Loss (and accuracy for classification) over a full dataset, chunked."""
    loss_fn = softmax_cross_entropy if loss == "softmax_ce" else mse_loss
    n = x.shape[0]
    total = 0.0
    correct = 0
    for start in range(0, n, chunk):
        xb, yb = x[start : start + chunk], y[start : start + chunk]
        with np.errstate(over="ignore", invalid="ignore"):
            out = net.forward(xb)
            val, _ = loss_fn(out, yb)
        total += val * xb.shape[0]
        if loss == "softmax_ce":
            correct += int((out.argmax(axis=1) == yb).sum())
    mean_loss = total / n
    return mean_loss, (correct / n if loss == "softmax_ce" else None)


def train(net: Network, opt: OptimizerState, data, epochs: int, batch_size: int,
          *, shuffle_seed: int = 0, loss: str = "softmax_ce") -> TrainResult:
    """Train then evaluate; data is a DatasetSpec or an (x, y) pair.

    A non-finite final evaluation also counts as divergence (the last
    update of the last epoch is otherwise unchecked).
    """
    x, y = _resolve_data(data)
    train_epochs(net, opt, x, y, epochs, batch_size,
                 shuffle_seed=shuffle_seed, loss=loss)
    final_loss, acc = evaluate(net, x, y, loss=loss)
    if not np.isfinite(final_loss):
        raise DivergedError("non-finite loss after final epoch")
    return TrainResult(net, final_loss, acc)


def gradient_check(net: Network, x: np.ndarray, y: np.ndarray, *,
                   loss: str = "softmax_ce", num_checks: int = 40,
                   h: float = 1e-5, seed: int = 0) -> float:
    """Worst relative error between analytic and central-difference gradients.

    Samples up to num_checks parameter coordinates across all tensors.
    The relative error denominator is floored at 1e-5 so near-zero
    gradients compare absolutely instead of amplifying rounding noise.
    """
    if x.shape[0] == 0:
        raise ValueError("gradient check needs a non-empty batch")
    loss_fn = softmax_cross_entropy if loss == "softmax_ce" else mse_loss
    out = net.forward(x)
    _, dout = loss_fn(out, y)
    grads = net.backward(dout)
    params = net.parameters()

    rng = np.random.default_rng(seed)
    coords = [(s, i) for s, p in enumerate(params) for i in (
        rng.integers(0, p.size, size=min(max(num_checks // len(params), 1), p.size))
    )]
    rng.shuffle(coords)
    coords = coords[:num_checks]

    worst = 0.0
    for slot, i in coords:
        flat = params[slot].ravel()
        saved = flat[i]
        flat[i] = saved + h
        up, _ = loss_fn(net.forward(x), y)
        flat[i] = saved - h
        down, _ = loss_fn(net.forward(x), y)
        flat[i] = saved
        numeric = (up - down) / (2 * h)
        analytic = grads[slot].ravel()[i]
        rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-5)
        worst = max(worst, rel)
    return worst
