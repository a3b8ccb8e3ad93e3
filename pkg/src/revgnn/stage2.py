"""Contrastive encoder with cluster-constrained ("Pseudo Neg-Label") negatives.

One shared GCN layer produces a clean view and a node-masked positive view.
Nodes are softly assigned to learnable centers with a Student-t kernel,
sharpened into a fixed target, and negatives for an anchor are drawn only
from nodes whose hard cluster differs from the anchor's.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.cluster.vq import kmeans2

from . import numcore as nc
from .errors import InputError, ShapeError
from .numcore import SparseAdjacency, Tensor
from .stage1 import glorot

log = logging.getLogger(__name__)

Q_FLOOR = 1e-12


@dataclass
class Stage2Params:
    weight: Tensor  # shared (d, d) for both views
    centers: Tensor  # (C, d)

    @property
    def n_clusters(self) -> int:
        return self.centers.shape[0]

    def named(self) -> dict[str, Tensor]:
        return {"stage2.weight": self.weight, "stage2.centers": self.centers}


def init_stage2(d: int, n_clusters: int, rng: np.random.Generator, std: float = 0.1) -> Stage2Params:
    if n_clusters < 1:
        raise InputError("cluster count must be at least 1")
    weight = Tensor(glorot(rng, d, d), requires_grad=True)
    centers = Tensor(rng.normal(0.0, std, size=(n_clusters, d)), requires_grad=True)
    return Stage2Params(weight, centers)


@dataclass
class ClusterState:
    q: np.ndarray  # soft assignments, (n, C)
    p: np.ndarray  # sharpened targets, (n, C)
    hard: np.ndarray  # argmax of q, lowest index on ties

    @classmethod
    def from_q(cls, q: np.ndarray, p: np.ndarray | None = None) -> ClusterState:
        return cls(q, target_distribution(q) if p is None else p, hard_ids(q))

    def export(self, path, node_ids):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for node_id, c, row in zip(node_ids, self.hard, self.q):
                fh.write(f"{node_id}\t{int(c)}\t{','.join(repr(float(x)) for x in row)}\n")


def hard_ids(q: np.ndarray) -> np.ndarray:
    return np.argmax(q, axis=1)


def mask_features(h, rate: float, rng: np.random.Generator) -> Tensor:
    """Zero each node's whole row independently with probability ``rate``."""
    if not 0.0 <= rate <= 1.0:
        raise InputError(f"masking rate {rate} outside [0, 1]")
    h = nc.as_tensor(h)
    keep = (rng.random(h.shape[0]) >= rate).astype(np.float64)
    return nc.mul(h, keep[:, None])


def contrastive_views(adj: SparseAdjacency, h1, params: Stage2Params, rate: float,
                      rng: np.random.Generator) -> tuple[Tensor, Tensor]:
    """Return ``(positive view, clean view)``, both ``relu(A X W)`` with the same ``W``."""
    h1 = nc.as_tensor(h1)
    if h1.ndim != 2 or h1.shape[1] != params.weight.shape[0]:
        raise ShapeError(f"stage-2 input {h1.shape} for weight {params.weight.shape}")
    masked = mask_features(h1, rate, rng)
    h_pos = nc.relu(nc.matmul(nc.spmm(adj, masked), params.weight))
    h2 = nc.relu(nc.matmul(nc.spmm(adj, h1), params.weight))
    return h_pos, h2


def soft_assign(h, centers) -> Tensor:
    """Student-t (one degree of freedom) similarity to each center, normalized per node."""
    h, centers = nc.as_tensor(h), nc.as_tensor(centers)
    if h.shape[1] != centers.shape[1]:
        raise ShapeError(f"embeddings of width {h.shape[1]}, centers of width {centers.shape[1]}")
    n, d = h.shape
    diff = nc.sub(nc.reshape(h, (n, 1, d)), nc.reshape(centers, (1, centers.shape[0], d)))
    sq = nc.tsum(diff * diff, axis=2)
    kernel = 1.0 / (1.0 + sq)
    return kernel / nc.rowsum(kernel)


def target_distribution(q: np.ndarray) -> np.ndarray:
    """Square, divide by cluster frequency, renormalize; empty clusters get 0."""
    q = np.asarray(q, dtype=np.float64)
    freq = q.sum(axis=0)
    weight = np.divide(q * q, freq, out=np.zeros_like(q), where=freq > 0)
    return weight / weight.sum(axis=1, keepdims=True)


def cluster_loss(p: np.ndarray, q) -> Tensor:
    """``sum_u sum_i p log(p / q)`` with ``p`` held constant and ``0 log 0 = 0``."""
    q = nc.as_tensor(q)
    p = np.asarray(p, dtype=np.float64)
    if p.shape != q.shape:
        raise ShapeError(f"cluster_loss: target {p.shape} vs assignments {q.shape}")
    support = p > 0
    if np.any(support & (q.data < Q_FLOOR)):
        log.warning("soft assignment below %g where the target is positive; clamping", Q_FLOOR)
    p_log_p = float(np.sum(p[support] * np.log(p[support])))
    cross = nc.tsum(nc.mul(nc.log(nc.clip(q, Q_FLOOR, 1.0)), p))
    return p_log_p - cross


def pseudo_neg_sample(u: int, hard: np.ndarray, m: int, rng: np.random.Generator,
                      mode: str = "pseudo") -> np.ndarray:
    """Up to ``m`` distinct negatives for ``u`` from other clusters, without replacement.

    ``mode="uniform"`` drops the cluster constraint (any node but ``u``).
    """
    if mode == "pseudo":
        candidates = np.flatnonzero(hard != hard[u])
    elif mode == "uniform":
        candidates = np.delete(np.arange(len(hard)), u)
    else:
        raise InputError(f"unknown negative sampling mode {mode!r}")
    k = min(m, len(candidates))
    return rng.choice(candidates, size=k, replace=False) if k else candidates[:0]


def sample_negatives(anchors, hard: np.ndarray, m: int, rng: np.random.Generator,
                     mode: str = "pseudo") -> tuple[np.ndarray, np.ndarray]:
    """Padded negatives for many anchors: (index, validity mask), both (len(anchors), m)."""
    anchors = np.asarray(anchors, dtype=np.int64)
    index = np.zeros((len(anchors), m), dtype=np.int64)
    valid = np.zeros((len(anchors), m), dtype=bool)
    for row, u in enumerate(anchors):
        neg = pseudo_neg_sample(int(u), hard, m, rng, mode)
        index[row, :len(neg)] = neg
        valid[row, :len(neg)] = True
    return index, valid


def contrastive_loss(h2, h_pos, anchors, neg_index, neg_valid, temperature: float = 1.0) -> Tensor:
    """InfoNCE-style loss summed over ``anchors``.

    Positive logit is ``<h2[u], h_pos[u]>``; negative logits are
    ``<h2[u], h2[v]>`` for the valid entries of ``neg_index[row]``.  Logits
    are shifted by their per-anchor maximum before exponentiation.
    """
    h2, h_pos = nc.as_tensor(h2), nc.as_tensor(h_pos)
    anchors = np.asarray(anchors, dtype=np.int64)
    valid = np.asarray(neg_valid, dtype=np.float64)
    ha = nc.take_rows(h2, anchors)
    s_pos = nc.rowsum(ha * nc.take_rows(h_pos, anchors)) / temperature
    s_all = nc.matmul(ha, nc.transpose(h2)) / temperature
    s_neg = nc.take_along_rows(s_all, neg_index)
    shift = np.maximum(s_pos.data[:, 0], np.max(np.where(valid > 0, s_neg.data, -np.inf), axis=1,
                                                  initial=-np.inf))[:, None]
    pos_term = s_pos - shift
    neg_exp = nc.exp((s_neg - shift) * valid) * valid
    denom = nc.exp(pos_term) + nc.rowsum(neg_exp)
    return nc.tsum(nc.log(denom) - pos_term)


def kmeans_centers(h: np.ndarray, n_clusters: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ centers for an optional warm start."""
    centers, _ = kmeans2(np.asarray(h, dtype=np.float64), n_clusters, minit="++", seed=rng)
    return centers
