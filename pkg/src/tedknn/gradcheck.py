"""Finite-difference check of every loss routed through a small dense net."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import (
    DenseLayer,
    Network,
    SupervisedLoss,
    backward,
    flatten_params,
    init_layer,
    multitask_loss,
    unflatten_params,
)
from .oracle import OracleTolerance, finite_difference_grad, relative_error
from .pairloss import LossParams, PairwiseLoss, Relation

LOSSES = ("mse", "cross_entropy", "multitask", "pair_y", "pair_e", "pair_ye")

N_IN, N_HIDDEN, N_EMB, N_E, N_CLASSES = 5, 7, 6, 3, 4
# keep test points this far from rectifier kinks and margin clamps
KINK_GAP = 1e-3


@dataclass(frozen=True)
class CheckResult:
    loss: str
    seed: int
    n_params: int
    max_rel_error: float
    passed: bool


def _two_layer_net(rng) -> Network:
    trunk = (
        init_layer(rng, N_IN, N_HIDDEN, "relu"),
        init_layer(rng, N_HIDDEN, N_EMB, "identity"),
    )
    trunk = tuple(
        DenseLayer(l.weights, rng.normal(scale=0.3, size=l.bias.shape), l.activation) for l in trunk
    )
    heads = {
        "y": (init_layer(rng, N_EMB, N_CLASSES),),
        "e": (init_layer(rng, N_EMB, N_E),),
    }
    return Network(trunk, heads)


def _instance(loss_name: str, seed: int):
    """Seeded (net, inputs, loss) away from non-differentiable points."""
    rng = np.random.default_rng(seed)
    for _ in range(1000):
        net = _two_layer_net(rng)
        n = 6
        x = rng.standard_normal((2 * n if loss_name.startswith("pair") else n, N_IN))
        z = x @ net.trunk[0].weights.T + net.trunk[0].bias
        if np.abs(z).min() < KINK_GAP:
            continue
        if loss_name == "mse":
            loss = SupervisedLoss({"e": ("mse", rng.standard_normal((n, N_E)), 1.0)})
        elif loss_name == "cross_entropy":
            loss = SupervisedLoss({"y": ("ce", rng.integers(0, N_CLASSES, n), 1.0)})
        elif loss_name == "multitask":
            lam = float(rng.uniform(0.1, 5.0))
            loss = multitask_loss(
                rng.integers(0, N_CLASSES, n), rng.standard_normal((n, N_E)), lam, ("ce", "mse")
            )
        else:
            mode = {"pair_y": "Y", "pair_e": "E", "pair_ye": "YE"}[loss_name]
            params = LossParams(
                m1=float(rng.uniform(0, 0.5)), m2=float(rng.uniform(0, 0.5)), w=float(rng.uniform(0, 1))
            )
            rels = [int(Relation.NEIGHBOR), int(Relation.NON_NEIGHBOR), int(Relation.EXCLUDED)]
            rel_y = rng.choice(rels, n)
            rel_e = rng.choice(rels, n)
            loss = PairwiseLoss(rel_y, rel_e, params, mode)
            emb = np.maximum(z, 0) @ net.trunk[1].weights.T + net.trunk[1].bias
            fa, fb = emb[:n], emb[n:]
            cos = (fa * fb).sum(1) / (np.linalg.norm(fa, axis=1) * np.linalg.norm(fb, axis=1))
            if min(np.abs(cos - params.m1).min(), np.abs(cos - params.m2).min()) < KINK_GAP:
                continue
        return net, x, loss
    raise RuntimeError("could not draw a smooth test instance")


def check_loss(loss_name: str, seed: int, tol: OracleTolerance = OracleTolerance()) -> CheckResult:
    net, x, loss = _instance(loss_name, seed)
    _, grads = backward(net, x, loss)
    analytic = grads.flat()

    def f(flat):
        value, _ = backward(unflatten_params(net, flat), x, loss)
        return value

    numeric = finite_difference_grad(f, flatten_params(net), tol.fd_step)
    err = float(relative_error(analytic, numeric).max())
    return CheckResult(loss_name, seed, analytic.size, err, err < tol.rel_grad)


def run_suite(n_instances: int = 20, seed: int = 0, losses=LOSSES) -> list[CheckResult]:
    return [
        check_loss(name, seed * 1_000_003 + i)
        for name in losses
        for i in range(n_instances)
    ]
