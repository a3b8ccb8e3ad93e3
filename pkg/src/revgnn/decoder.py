"""Interaction-attention decoder.

Each submission a scholar has already reviewed is weighted by a small
activation unit fed with its outer product against the candidate
submission; the weighted history is concatenated with the scholar and
candidate embeddings and passed through a PReLU MLP ending in a sigmoid.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from . import numcore as nc
from .errors import ShapeError
from .numcore import Tensor
from .stage1 import bce_loss, glorot

PRELU_INIT = 0.25


@dataclass
class DecoderParams:
    att_w1: Tensor  # (d*d, eta)
    att_b1: Tensor  # (eta,)
    att_slope: Tensor  # (1,)
    att_w2: Tensor  # (eta, 1)
    att_b2: Tensor  # (1,)
    mlp_w1: Tensor  # (3d, hidden1)
    mlp_b1: Tensor
    mlp_slope1: Tensor
    mlp_w2: Tensor  # (hidden1, hidden2)
    mlp_b2: Tensor
    mlp_slope2: Tensor
    out_w: Tensor  # (hidden2, 1)
    out_b: Tensor

    @property
    def dim(self) -> int:
        return self.mlp_w1.shape[0] // 3

    def named(self) -> dict[str, Tensor]:
        return {f"decoder.{k}": v for k, v in vars(self).items()}


def init_decoder(d: int, eta: int, hidden: tuple[int, int], rng: np.random.Generator) -> DecoderParams:
    h1, h2 = hidden

    def param(x):
        return Tensor(x, requires_grad=True)

    return DecoderParams(
        att_w1=param(glorot(rng, d * d, eta)),
        att_b1=param(np.zeros(eta)),
        att_slope=param(np.full(1, PRELU_INIT)),
        att_w2=param(glorot(rng, eta, 1)),
        att_b2=param(np.zeros(1)),
        mlp_w1=param(glorot(rng, 3 * d, h1)),
        mlp_b1=param(np.zeros(h1)),
        mlp_slope1=param(np.full(1, PRELU_INIT)),
        mlp_w2=param(glorot(rng, h1, h2)),
        mlp_b2=param(np.zeros(h2)),
        mlp_slope2=param(np.full(1, PRELU_INIT)),
        out_w=param(glorot(rng, h2, 1)),
        out_b=param(np.zeros(1)),
    )


@dataclass
class HistoryBundle:
    scholar: np.ndarray  # h_u, (d,)
    candidate: np.ndarray  # h_v, (d,)
    history: np.ndarray  # (k, d), may have k = 0


def attention_weights(hp, hv, params: DecoderParams) -> Tensor:
    """Activation-unit output for every history item: (B, K, d) x (B, d) -> (B, K)."""
    hp, hv = nc.as_tensor(hp), nc.as_tensor(hv)
    b, k, _ = hp.shape
    z = nc.reshape(nc.outer_linear(hp, hv, params.att_w1), (b * k, -1))
    z = nc.prelu(nc.add_bias(z, params.att_b1), params.att_slope)
    a = nc.add_bias(nc.matmul(z, params.att_w2), params.att_b2)
    return nc.reshape(a, (b, k))


def attention_weight(hp, hv, params: DecoderParams) -> Tensor:
    """Single history item against a single candidate."""
    hp, hv = nc.as_tensor(hp), nc.as_tensor(hv)
    if hp.shape != hv.shape or hp.ndim != 1:
        raise ShapeError(f"attention_weight: vectors of shape {hp.shape} and {hv.shape}")
    d = hp.shape[0]
    return nc.reshape(attention_weights(nc.reshape(hp, (1, 1, d)), nc.reshape(hv, (1, d)), params), (1,))


def predict_batch(hu, hv, hp, mask, params: DecoderParams) -> Tensor:
    """Probabilities for B pairs; ``hp`` is (B, K, d) with a (B, K) validity mask."""
    hu, hv, hp = nc.as_tensor(hu), nc.as_tensor(hv), nc.as_tensor(hp)
    if hu.shape != hv.shape or hp.shape[0] != hu.shape[0] or hp.shape[2] != hu.shape[1]:
        raise ShapeError(f"predict: scholar {hu.shape}, candidate {hv.shape}, history {hp.shape}")
    if hu.shape[1] != params.dim:
        raise ShapeError(f"predict: embeddings of width {hu.shape[1]}, decoder built for {params.dim}")
    mask = np.asarray(mask, dtype=np.float64)
    a = attention_weights(hp, hv, params) * mask
    s = nc.weighted_sum(a, hp)
    x = nc.concat([hu, s, hv], axis=1)
    h = nc.prelu(nc.add_bias(nc.matmul(x, params.mlp_w1), params.mlp_b1), params.mlp_slope1)
    h = nc.prelu(nc.add_bias(nc.matmul(h, params.mlp_w2), params.mlp_b2), params.mlp_slope2)
    logit = nc.add_bias(nc.matmul(h, params.out_w), params.out_b)
    return nc.reshape(nc.sigmoid(logit), (-1,))


def predict(bundle: HistoryBundle, params: DecoderParams) -> Tensor:
    d = len(bundle.scholar)
    history = np.asarray(bundle.history, dtype=np.float64).reshape(-1, d)
    k = len(history)
    hp = history if k else np.zeros((1, d))
    mask = np.ones((1, k)) if k else np.zeros((1, 1))
    return predict_batch(np.reshape(bundle.scholar, (1, d)), np.reshape(bundle.candidate, (1, d)),
                         hp[None], mask, params)


def sup_loss(labels, predictions) -> Tensor:
    return bce_loss(labels, predictions)


# -- histories -------------------------------------------------------------

def history_lists(neighbors: list[list[int]]) -> list[np.ndarray]:
    return [np.asarray(items, dtype=np.int64) for items in neighbors]


def gather_histories(lists: list[np.ndarray], scholars, exclude, limit: int) -> tuple[np.ndarray, np.ndarray]:
    """Padded history index matrix and mask for each (scholar, excluded submission).

    Indices are whatever the lists hold; the most recent ``limit`` entries
    (last in ingestion order) are kept after dropping the excluded one.
    """
    rows = []
    for u, v in zip(scholars, exclude):
        items = lists[int(u)]
        if len(items) and v is not None:
            items = items[items != v]
        rows.append(items[-limit:] if limit > 0 else items[:0])
    width = max(1, max((len(r) for r in rows), default=0))
    index = np.zeros((len(rows), width), dtype=np.int64)
    mask = np.zeros((len(rows), width))
    for i, r in enumerate(rows):
        index[i, :len(r)] = r
        mask[i, :len(r)] = 1.0
    return index, mask


class Scorer:
    """Tape-free batched scoring of many scholars against one submission.

    Rows of ``embeddings`` are nodes (scholars first).  History indices are
    submission indices.  The first MLP layer is split by input block so the
    per-node parts are computed once.
    """

    def __init__(self, embeddings: np.ndarray, params: DecoderParams, n_scholars: int):
        e = np.asarray(embeddings, dtype=np.float64)
        d = params.dim
        if e.shape[1] != d:
            raise ShapeError(f"embeddings of width {e.shape[1]}, decoder built for {d}")
        self.params = params
        self.n_scholars = n_scholars
        self.sub = e[n_scholars:]
        w1 = params.mlp_w1.data
        self.scholar_part = e[:n_scholars] @ w1[:d]
        self.history_part = self.sub @ w1[d:2 * d]
        self.candidate_part = self.sub @ w1[2 * d:]
        self.att_w3 = params.att_w1.data.reshape(d, d, -1)

    @staticmethod
    def _prelu(x, slope):
        return np.where(x > 0, x, slope.data.reshape(()) * x)

    def score(self, submission: int, scholars, hist_index, hist_mask) -> np.ndarray:
        p = self.params
        hv = self.sub[submission]
        # bilinear slice for this candidate, then every history row at once
        m = np.einsum("l,jlh->jh", hv, self.att_w3)
        used = np.unique(hist_index)
        z_used = self.sub[used] @ m
        z = z_used[np.searchsorted(used, hist_index)] + p.att_b1.data
        a = (self._prelu(z, p.att_slope) @ p.att_w2.data)[..., 0] + p.att_b2.data[0]
        a = a * hist_mask
        pre = (self.scholar_part[np.asarray(scholars)]
               + np.einsum("sk,skh->sh", a, self.history_part[hist_index])
               + self.candidate_part[submission] + p.mlp_b1.data)
        h = self._prelu(pre, p.mlp_slope1)
        h = self._prelu(h @ p.mlp_w2.data + p.mlp_b2.data, p.mlp_slope2)
        logit = (h @ p.out_w.data)[:, 0] + p.out_b.data[0]
        return expit(logit)
