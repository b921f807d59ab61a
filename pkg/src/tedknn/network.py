"""Dense feed-forward networks with hand-written backprop.

A :class:`Network` is a shared trunk (whose output is the embedding) plus one
or more named heads, e.g. ``{"y": [...]}`` for a single-task model or
``{"y": [...], "e": [...]}`` for the multi-task model. Losses are callables
``loss(embedding, outputs) -> (value, d_embedding, d_outputs)``; backward
chains their output gradients through the layers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Mapping

import numpy as np

ACTIVATIONS = ("identity", "relu")
EMBEDDING_DIM = 64


class TrainingError(FloatingPointError):
    pass


@dataclass(frozen=True)
class DenseLayer:
    weights: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: str = "identity"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ValueError(
                f"inconsistent layer shapes: weights {self.weights.shape}, bias {self.bias.shape}"
            )

    @property
    def n_in(self) -> int:
        return self.weights.shape[1]

    @property
    def n_out(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class Network:
    trunk: tuple[DenseLayer, ...]
    heads: Mapping[str, tuple[DenseLayer, ...]] = field(default_factory=dict)
    history: tuple[float, ...] = ()

    def __post_init__(self):
        if not self.trunk:
            raise ValueError("network needs at least one trunk layer")
        for a, b in zip(self.trunk, self.trunk[1:]):
            if a.n_out != b.n_in:
                raise ValueError("trunk layer widths do not chain")
        for name, head in self.heads.items():
            if not head or head[0].n_in != self.embedding_dim:
                raise ValueError(f"head {name!r} input width must equal embedding width")
            for a, b in zip(head, head[1:]):
                if a.n_out != b.n_in:
                    raise ValueError(f"head {name!r} layer widths do not chain")

    @property
    def n_inputs(self) -> int:
        return self.trunk[0].n_in

    @property
    def embedding_dim(self) -> int:
        return self.trunk[-1].n_out

    def named_layers(self) -> list[tuple[str, DenseLayer]]:
        out = [(f"trunk.{i}", layer) for i, layer in enumerate(self.trunk)]
        for name in sorted(self.heads):
            out += [(f"{name}.{i}", layer) for i, layer in enumerate(self.heads[name])]
        return out

    def n_parameters(self) -> int:
        return sum(l.weights.size + l.bias.size for _, l in self.named_layers())

    def with_layers(self, layers: Mapping[str, DenseLayer], history=None) -> "Network":
        trunk = tuple(layers.get(f"trunk.{i}", l) for i, l in enumerate(self.trunk))
        heads = {
            name: tuple(layers.get(f"{name}.{i}", l) for i, l in enumerate(head))
            for name, head in self.heads.items()
        }
        return Network(trunk, heads, self.history if history is None else tuple(history))


def init_layer(rng: np.random.Generator, n_in: int, n_out: int, activation="identity"):
    limit = math.sqrt(6.0 / (n_in + n_out))
    w = rng.uniform(-limit, limit, size=(n_out, n_in))
    return DenseLayer(w, np.zeros(n_out), activation)


def build_network(
    n_inputs: int,
    head_sizes: Mapping[str, int],
    embedding_dim: int = EMBEDDING_DIM,
    hidden: Iterable[int] = (),
    hidden_activation: str = "relu",
    embedding_activation: str = "identity",
    seed: int = 0,
) -> Network:
    """Trunk ``n_inputs -> hidden... -> embedding_dim`` plus one linear layer per head."""
    rng = np.random.default_rng(seed)
    widths = [n_inputs, *hidden, embedding_dim]
    trunk = []
    for i, (a, b) in enumerate(zip(widths, widths[1:])):
        act = embedding_activation if i == len(widths) - 2 else hidden_activation
        trunk.append(init_layer(rng, a, b, act))
    heads = {name: (init_layer(rng, embedding_dim, size),) for name, size in sorted(head_sizes.items())}
    return Network(tuple(trunk), heads)


# -- forward -----------------------------------------------------------------


def _check_input(net: Network, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != net.n_inputs:
        raise ValueError(f"expected input of shape (n, {net.n_inputs}), got {x.shape}")
    return x


def _apply(layers, a, cache=None):
    for layer in layers:
        z = a @ layer.weights.T + layer.bias
        if cache is not None:
            cache.append((a, z))
        a = np.maximum(z, 0.0) if layer.activation == "relu" else z
    return a


def embed(net: Network, x: np.ndarray) -> np.ndarray:
    return _apply(net.trunk, _check_input(net, x))


def heads_forward(net: Network, embedding: np.ndarray) -> dict[str, np.ndarray]:
    return {name: _apply(head, embedding) for name, head in net.heads.items()}


def forward(net: Network, x: np.ndarray) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    emb = embed(net, x)
    return emb, heads_forward(net, emb)


# -- losses ------------------------------------------------------------------


def _same_shape(pred, target):
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")


def loss_mse(pred: np.ndarray, target: np.ndarray) -> float:
    pred, target = np.asarray(pred, float), np.asarray(target, float)
    _same_shape(pred, target)
    return float(np.mean((pred - target) ** 2))


def mse_grad(pred, target):
    return 2.0 * (pred - target) / pred.size


def _log_softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _check_classes(logits, classes):
    classes = np.asarray(classes)
    if logits.ndim != 2 or classes.shape != (logits.shape[0],):
        raise ValueError("need (n, n_classes) logits and n class targets")
    if classes.size and (classes.min() < 0 or classes.max() >= logits.shape[1]):
        raise ValueError(f"class target out of range [0, {logits.shape[1]})")
    return classes.astype(np.int64)


def loss_cross_entropy(logits: np.ndarray, classes: np.ndarray) -> float:
    logits = np.asarray(logits, float)
    classes = _check_classes(logits, classes)
    return float(-_log_softmax(logits)[np.arange(len(classes)), classes].mean())


def cross_entropy_grad(logits, classes):
    n = logits.shape[0]
    g = np.exp(_log_softmax(logits))
    g[np.arange(n), classes] -= 1.0
    return g / n


def _head_loss(kind, pred, target):
    if kind == "mse":
        target = np.asarray(target, float).reshape(pred.shape)
        return loss_mse(pred, target), mse_grad(pred, target)
    if kind == "ce":
        classes = _check_classes(pred, target)
        return loss_cross_entropy(pred, classes), cross_entropy_grad(pred, classes)
    raise ValueError(f"unknown head loss kind {kind!r}")


def loss_multitask(out_y, target_y, out_e, target_e, lam: float, kinds=("mse", "mse")) -> float:
    ly, _ = _head_loss(kinds[0], np.asarray(out_y, float), target_y)
    le, _ = _head_loss(kinds[1], np.asarray(out_e, float), target_e)
    return ly + lam * le


@dataclass
class SupervisedLoss:
    """Weighted sum of per-head losses, ``sum_h weight_h * loss_h``.

    ``terms`` maps head name to ``(kind, target, weight)`` where kind is
    ``"mse"`` or ``"ce"``. A single-task model has one term; the multi-task
    loss is ``{"y": (..., 1.0), "e": (..., lam)}``.
    """

    terms: Mapping[str, tuple[str, np.ndarray, float]]

    def subset(self, idx: np.ndarray) -> "SupervisedLoss":
        return SupervisedLoss({h: (k, t[idx], w) for h, (k, t, w) in self.terms.items()})

    def __call__(self, emb, outputs):
        total = 0.0
        grads = {}
        for head, (kind, target, weight) in self.terms.items():
            value, g = _head_loss(kind, outputs[head], target)
            total += weight * value
            grads[head] = weight * g
        return total, None, grads


def multitask_loss(target_y, target_e, lam: float, kinds=("mse", "mse")) -> SupervisedLoss:
    return SupervisedLoss({"y": (kinds[0], target_y, 1.0), "e": (kinds[1], target_e, lam)})


# -- backward ----------------------------------------------------------------


@dataclass(frozen=True)
class Gradients:
    layers: dict[str, tuple[np.ndarray, np.ndarray]]  # name -> (dW, db)

    def flat(self) -> np.ndarray:
        return np.concatenate(
            [np.concatenate([dw.ravel(), db]) for dw, db in self.layers.values()]
        )


def _backprop(layers, cache, grad, out):
    """Push ``grad`` (w.r.t. the stack output) back through ``layers``."""
    for (name, layer), (a_in, z) in zip(reversed(layers), reversed(cache)):
        if layer.activation == "relu":
            grad = grad * (z > 0)
        dw, db = grad.T @ a_in, grad.sum(axis=0)
        if name in out:
            out[name] = (out[name][0] + dw, out[name][1] + db)
        else:
            out[name] = (dw, db)
        grad = grad @ layer.weights
    return grad


def backward(net: Network, x: np.ndarray, loss: Callable) -> tuple[float, Gradients]:
    """Loss value and exact gradients for every weight and bias."""
    x = _check_input(net, x)
    trunk_cache: list = []
    emb = _apply(net.trunk, x, trunk_cache)
    head_caches = {}
    outputs = {}
    for name, head in net.heads.items():
        head_caches[name] = []
        outputs[name] = _apply(head, emb, head_caches[name])

    value, d_emb, d_out = loss(emb, outputs)
    d_emb = np.zeros_like(emb) if d_emb is None else np.array(d_emb, dtype=float)
    grads: dict = {}
    for name, head in net.heads.items():
        labelled = [(f"{name}.{i}", l) for i, l in enumerate(head)]
        if name in d_out:
            d_emb = d_emb + _backprop(labelled, head_caches[name], d_out[name], grads)
        else:
            for lname, l in labelled:
                grads[lname] = (np.zeros_like(l.weights), np.zeros_like(l.bias))
    _backprop(
        [(f"trunk.{i}", l) for i, l in enumerate(net.trunk)], trunk_cache, d_emb, grads
    )
    ordered = {name: grads[name] for name, _ in net.named_layers()}
    return float(value), Gradients(ordered)


def flatten_params(net: Network) -> np.ndarray:
    return np.concatenate(
        [np.concatenate([l.weights.ravel(), l.bias]) for _, l in net.named_layers()]
    )


def unflatten_params(net: Network, flat: np.ndarray) -> Network:
    layers, pos = {}, 0
    for name, l in net.named_layers():
        nw, nb = l.weights.size, l.bias.size
        w = flat[pos : pos + nw].reshape(l.weights.shape)
        b = flat[pos + nw : pos + nw + nb]
        layers[name] = DenseLayer(w.copy(), b.copy(), l.activation)
        pos += nw + nb
    if pos != flat.size:
        raise ValueError("parameter vector length does not match network")
    return net.with_layers(layers)


# -- training ----------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 64
    learning_rate: float = 1e-3
    # layer name -> learning rate; "embedding" is shorthand for the last trunk layer
    layer_learning_rates: Mapping[str, float] = field(default_factory=dict)
    lam: float = 1.0
    seed: int = 0
    dropout: float = 0.0

    def validate(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        rates = [self.learning_rate, *self.layer_learning_rates.values()]
        # 0 is accepted as a "frozen" setting
        if any(r < 0 for r in rates):
            raise ValueError("learning rates must be non-negative")
        if self.lam < 0:
            raise ValueError("multi-task weight must be >= 0")
        if self.dropout:
            raise ValueError("dropout is not supported by the dense networks in this package")


def _layer_rates(net: Network, config: TrainConfig) -> dict[str, float]:
    rates = {}
    last = f"trunk.{len(net.trunk) - 1}"
    for name, _ in net.named_layers():
        lr = config.learning_rate
        if name == last and "embedding" in config.layer_learning_rates:
            lr = config.layer_learning_rates["embedding"]
        rates[name] = config.layer_learning_rates.get(name, lr)
    return rates


def optimize(
    net: Network,
    n_items: int,
    batch_loss: Callable[[np.ndarray], tuple[np.ndarray, Callable]],
    config: TrainConfig,
    trainable: Callable[[str], bool] = lambda name: True,
) -> Network:
    """Mini-batch gradient descent over ``n_items`` training items.

    ``batch_loss(indices)`` returns the network input rows and loss callable
    for one batch. Each epoch visits the items in a fresh seeded permutation;
    the last partial batch is kept.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    rates = _layer_rates(net, config)
    params = {
        name: [l.weights.copy(), l.bias.copy()] for name, l in net.named_layers()
    }
    history = list(net.history)
    current = net
    bs = min(config.batch_size, n_items)
    for epoch in range(config.epochs):
        order = rng.permutation(n_items)
        total, seen = 0.0, 0
        for start in range(0, n_items, bs):
            idx = order[start : start + bs]
            x, loss = batch_loss(idx)
            value, grads = backward(current, x, loss)
            if not math.isfinite(value):
                raise TrainingError(
                    f"non-finite loss {value} at epoch {epoch}, batch starting {start}"
                )
            for name, (dw, db) in grads.layers.items():
                lr = rates[name]
                if lr == 0 or not trainable(name):
                    continue
                params[name][0] -= lr * dw
                params[name][1] -= lr * db
            current = current.with_layers(
                {
                    name: DenseLayer(params[name][0].copy(), params[name][1].copy(), l.activation)
                    for name, l in net.named_layers()
                }
            )
            total += value * len(idx)
            seen += len(idx)
        history.append(total / seen)
    return current.with_layers({}, history=history)


def train(
    net: Network,
    x: np.ndarray,
    loss: SupervisedLoss,
    config: TrainConfig,
) -> Network:
    """Fit ``net`` to ``x`` under a supervised (single- or multi-task) loss."""
    x = _check_input(net, x)
    return optimize(net, x.shape[0], lambda idx: (x[idx], loss.subset(idx)), config)


# -- checkpoints -------------------------------------------------------------


def save_checkpoint(net: Network, path: str | Path) -> None:
    """Store layer shapes, activation tags and raw float64 parameters."""
    meta = []
    arrays = {}
    for name, l in net.named_layers():
        meta.append({"name": name, "shape": list(l.weights.shape), "activation": l.activation})
        arrays[f"{name}.weights"] = l.weights
        arrays[f"{name}.bias"] = l.bias
    arrays["__meta__"] = np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)
    arrays["__history__"] = np.asarray(net.history, dtype=float)
    with Path(path).open("wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path: str | Path) -> Network:
    with np.load(Path(path)) as data:
        meta = json.loads(bytes(data["__meta__"]).decode())
        trunk, heads = [], {}
        for entry in meta:
            name = entry["name"]
            layer = DenseLayer(
                data[f"{name}.weights"].copy(), data[f"{name}.bias"].copy(), entry["activation"]
            )
            group, _ = name.rsplit(".", 1)
            (trunk if group == "trunk" else heads.setdefault(group, [])).append(layer)
        history = tuple(data["__history__"].tolist())
    return Network(tuple(trunk), {k: tuple(v) for k, v in heads.items()}, history)
