"""Preference encoder: decoupled GCN over the review graph plus knowledge fusion."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numcore as nc
from .errors import ShapeError
from .numcore import SparseAdjacency, Tensor

BCE_EPS = 1e-7


@dataclass
class Stage1Params:
    embedding: Tensor  # initial behavior table, (n, d_b)
    weights: list[Tensor]  # one (d_b, d_b) matrix per layer

    @property
    def dim(self) -> int:
        return self.embedding.shape[1]

    def named(self) -> dict[str, Tensor]:
        out = {"stage1.embedding": self.embedding}
        out.update({f"stage1.w{i + 1}": w for i, w in enumerate(self.weights)})
        return out


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_stage1(n: int, d_b: int, n_layers: int, rng: np.random.Generator,
                std: float = 0.1) -> Stage1Params:
    embedding = Tensor(rng.normal(0.0, std, size=(n, d_b)), requires_grad=True)
    weights = [Tensor(glorot(rng, d_b, d_b), requires_grad=True) for _ in range(n_layers)]
    return Stage1Params(embedding, weights)


def encode_behavior(adj: SparseAdjacency, params: Stage1Params) -> tuple[list[Tensor], Tensor]:
    """Propagate ``h <- A h W`` per layer with no activation.

    Returns the per-layer outputs (layer 0 excluded) and their sum.
    """
    if adj.n != params.embedding.shape[0]:
        raise ShapeError(f"adjacency over {adj.n} nodes, embedding has {params.embedding.shape[0]} rows")
    h = params.embedding
    layers = []
    for w in params.weights:
        h = nc.matmul(nc.spmm(adj, h), w)
        layers.append(h)
    total = layers[0]
    for layer in layers[1:]:
        total = total + layer
    return layers, total


def behavior_score(hu, hv) -> Tensor:
    """``relu(<hu, hv>)``; row-wise for matrices, a 1-element tensor for vectors."""
    hu, hv = nc.as_tensor(hu), nc.as_tensor(hv)
    if hu.shape != hv.shape:
        raise ShapeError(f"behavior_score: shapes {hu.shape} and {hv.shape} differ")
    if hu.ndim == 1:
        return nc.relu(nc.tsum(hu * hv, axis=0, keepdims=True))
    return nc.relu(nc.tsum(hu * hv, axis=1))


def bce_loss(labels, scores, eps: float = BCE_EPS) -> Tensor:
    """Mean binary cross-entropy with scores clamped into [eps, 1 - eps]."""
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    s = nc.reshape(nc.as_tensor(scores), (-1,))
    if s.shape[0] != y.shape[0]:
        raise ShapeError(f"bce_loss: {y.shape[0]} labels for {s.shape[0]} scores")
    s = nc.clip(s, eps, 1.0 - eps)
    ll = nc.mul(nc.log(s), y) + nc.mul(nc.log(1.0 - s), 1.0 - y)
    return -nc.mean(ll)


def fuse(h_b, h_k) -> Tensor:
    """Row-wise concatenation ``[behavior | knowledge]``."""
    h_b, h_k = nc.as_tensor(h_b), nc.as_tensor(h_k)
    if h_b.shape[0] != h_k.shape[0]:
        raise ShapeError(f"fuse: {h_b.shape[0]} behavior rows, {h_k.shape[0]} knowledge rows")
    return nc.concat([h_b, h_k], axis=1)
