"""Joint training loop: behavior, cluster, contrastive and supervised losses.

Every optimizer step evaluates all enabled loss terms on one mini-batch of
train edges, sums them without weights and applies one Adam update per
parameter group (stage 1, stage 2, decoder) with the group's own rate.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import numcore as nc
from .checkpoint import read_checkpoint, write_checkpoint
from .config import TrainConfig
from .decoder import DecoderParams, Scorer, gather_histories, history_lists, init_decoder, predict_batch, sup_loss
from .errors import ArtifactMismatch, InputError, NumericalError
from .graphstore import PreparedData
from .numcore import AdamState, Tensor, adam_step
from .rng import STREAMS, streams
from .stage1 import Stage1Params, bce_loss, behavior_score, encode_behavior, fuse, init_stage1
from .stage2 import (ClusterState, Stage2Params, cluster_loss, contrastive_loss, contrastive_views,
                     hard_ids, init_stage2, kmeans_centers, sample_negatives, soft_assign,
                     target_distribution)

log = logging.getLogger(__name__)

TERMS = ("beh", "clus", "cl", "sup")
LOG_HEADER = "epoch,l_beh,l_clus,l_cl,l_sup,total,seconds"


@dataclass
class LossBreakdown:
    beh: float = 0.0
    clus: float = 0.0
    cl: float = 0.0
    sup: float = 0.0
    total: float = 0.0

    def as_tuple(self):
        return (self.beh, self.clus, self.cl, self.sup, self.total)


def joint_loss(terms: dict) -> Tensor | None:
    """Unweighted sum of the enabled terms, in fixed ``TERMS`` order."""
    total = None
    for name in TERMS:
        if name in terms:
            total = nc.as_tensor(terms[name]) if total is None else total + terms[name]
    return total


class RevGNN:
    """All learnable tensors plus the forward passes that use them."""

    def __init__(self, config: TrainConfig, data: PreparedData, rng: np.random.Generator):
        self.config = config
        self.data = data
        g = data.graph
        if config.use_knowledge and config.d_k != data.features.dim:
            raise InputError(f"config d_k = {config.d_k} but the features have dimension {data.features.dim}")
        self.knowledge = Tensor(data.features.knowledge_matrix()) if config.use_knowledge else None
        self.stage1: Stage1Params | None = None
        self.stage2: Stage2Params | None = None
        if config.use_behavior:
            self.stage1 = init_stage1(g.n_nodes, config.d_b, config.n_layers, rng, config.init_std)
        d = config.fused_dim
        if config.use_stage2:
            self.stage2 = init_stage2(d, config.n_clusters, rng, config.init_std)
        self.decoder: DecoderParams = init_decoder(d, config.eta, (config.hidden1, config.hidden2), rng)

    def groups(self) -> dict[str, dict[str, Tensor]]:
        return {
            "stage1": self.stage1.named() if self.stage1 else {},
            "stage2": self.stage2.named() if self.stage2 else {},
            "decoder": self.decoder.named(),
        }

    def named_params(self) -> dict[str, Tensor]:
        out = {}
        for group in self.groups().values():
            out.update(group)
        return out

    def behavior(self) -> Tensor | None:
        if self.stage1 is None:
            return None
        return encode_behavior(self.data.adjacency, self.stage1)[1]

    def fused(self, hb: Tensor | None) -> Tensor:
        if hb is None:
            return self.knowledge
        if self.knowledge is None:
            return hb
        return fuse(hb, self.knowledge)

    def embeddings(self) -> np.ndarray:
        """Final node embeddings fed to the decoder, without masking."""
        with nc.no_grad():
            h1 = self.fused(self.behavior())
            if self.stage2 is None:
                return h1.data
            h = nc.relu(nc.matmul(nc.spmm(self.data.adjacency, h1), self.stage2.weight))
            return h.data

    def cluster_state(self) -> ClusterState | None:
        if self.stage2 is None:
            return None
        with nc.no_grad():
            q = soft_assign(self.embeddings(), self.stage2.centers).data
        return ClusterState.from_q(q)

    def scorer(self) -> Scorer:
        return Scorer(self.embeddings(), self.decoder, self.data.graph.n_scholars)


class Trainer:
    def __init__(self, config: TrainConfig, data: PreparedData):
        self.config = config
        self.data = data
        self.rngs = streams(config.seed)
        self.model = RevGNN(config, data, self.rngs["init"])
        self.optim = {
            "stage1": AdamState(config.lr_stage1),
            "stage2": AdamState(config.lr_stage2),
            "decoder": AdamState(config.lr_decoder),
        }
        g = data.graph
        self.n_scholars = g.n_scholars
        self.train_edges = g.train_edges
        self.linked = g.reviewers("train")
        self.histories = history_lists(g.neighbors("train"))
        self.step = 0
        self.epoch = 0
        self.batch_pos = 0
        self.perm: np.ndarray | None = None
        self.epoch_sums = np.zeros(5)
        self.epoch_steps = 0
        self.target: np.ndarray | None = None
        self.kmeans_done = False
        self.cluster: ClusterState | None = None
        # (anchors, index, valid) and (positives, negatives) from the latest step
        self.last_negatives = None
        self.last_decoder_negatives = None
        self.last_breakdown: LossBreakdown | None = None
        self._stage = ""
        self.history: list[tuple] = []

    # -- sampling helpers ----------------------------------------------------

    def _unlinked(self, submission: int, pool: np.ndarray, rng) -> int:
        linked = self.linked[submission]
        for _ in range(64):
            u = int(pool[rng.integers(len(pool))])
            if u not in linked:
                return u
        return u

    def _behavior_negatives(self, batch, rng) -> np.ndarray:
        pool = np.arange(self.n_scholars)
        return np.array([self._unlinked(int(s), pool, rng) for s in batch[:, 0]], dtype=np.int64)

    def _decoder_negatives(self, batch, rng) -> np.ndarray:
        everyone = np.arange(self.n_scholars)
        if self.cluster is None or self.config.negative_sampling == "uniform":
            return self._behavior_negatives(batch, rng)
        hard = self.cluster.hard[:self.n_scholars]
        pools = {c: np.flatnonzero(hard != c) for c in np.unique(hard[batch[:, 1]])}
        out = []
        for s, u in batch:
            pool = pools[hard[u]]
            out.append(self._unlinked(int(s), pool if len(pool) else everyone, rng))
        return np.array(out, dtype=np.int64)

    # -- one optimizer step --------------------------------------------------

    def losses(self, batch: np.ndarray) -> dict[str, Tensor]:
        """Forward pass for one batch of (submission, scholar) train edges."""
        cfg, model = self.config, self.model
        rng = self.rngs["sampling"]
        nsch = self.n_scholars
        batch = np.asarray(batch, dtype=np.int64).reshape(-1, 2)
        subs, schs = batch[:, 0], batch[:, 1]
        terms: dict[str, Tensor] = {}

        self._stage = "beh"
        hb = model.behavior()
        if hb is not None and cfg.loss_beh:
            neg = self._behavior_negatives(batch, rng)
            u = np.concatenate([schs, neg])
            v = nsch + np.concatenate([subs, subs])
            scores = behavior_score(nc.take_rows(hb, u), nc.take_rows(hb, v))
            labels = np.r_[np.ones(len(batch)), np.zeros(len(batch))]
            terms["beh"] = bce_loss(labels, scores)

        h1 = model.fused(hb)
        emb = h1
        self.cluster = None
        if model.stage2 is not None:
            self._stage = "cl"
            h_pos, h2 = contrastive_views(self.data.adjacency, h1, model.stage2, cfg.mask_rate,
                                          self.rngs["masking"])
            self._stage = "clus"
            q = soft_assign(h2, model.stage2.centers)
            if self.target is None or self.step % cfg.target_every == 0:
                self.target = target_distribution(q.data)
            self.cluster = ClusterState(q.data, self.target, hard_ids(q.data))
            if cfg.loss_clus:
                terms["clus"] = cluster_loss(self.target, q)
            if cfg.loss_cl:
                self._stage = "cl"
                anchors = np.unique(np.concatenate([schs, nsch + subs]))
                index, valid = sample_negatives(anchors, self.cluster.hard, cfg.n_negatives, rng,
                                                cfg.negative_sampling)
                self.last_negatives = (anchors, index, valid)
                terms["cl"] = contrastive_loss(h2, h_pos, anchors, index, valid, cfg.temperature)
            emb = h2

        if cfg.loss_sup:
            self._stage = "sup"
            neg = self._decoder_negatives(batch, rng)
            self.last_decoder_negatives = (schs, neg)
            u = np.concatenate([schs, neg])
            v = np.concatenate([subs, subs])
            hist, mask = gather_histories(self.histories, u, v, cfg.history_len)
            d = emb.shape[1]
            hp = nc.reshape(nc.take_rows(emb, nsch + hist.reshape(-1)), hist.shape + (d,))
            preds = predict_batch(nc.take_rows(emb, u), nc.take_rows(emb, nsch + v), hp, mask,
                                  model.decoder)
            labels = np.r_[np.ones(len(batch)), np.zeros(len(batch))]
            terms["sup"] = sup_loss(labels, preds)
        return terms

    def train_step(self, batch: np.ndarray) -> LossBreakdown:
        try:
            terms = self.losses(batch)
        except NumericalError as exc:
            raise NumericalError(f"step {self.step}: while computing l_{self._stage}: {exc}") from None
        values = {}
        for name, t in terms.items():
            values[name] = t.item()
            if not np.isfinite(values[name]):
                raise NumericalError(f"step {self.step}: loss term l_{name} is non-finite")
        total = joint_loss(terms)
        groups = self.model.groups()
        if total is not None:
            params = [p for group in groups.values() for p in group.values()]
            nc.backward(total, params)
            for name, group in groups.items():
                if group:
                    adam_step(self.optim[name], group, {k: p.grad for k, p in group.items()})
        self.step += 1
        self.last_breakdown = LossBreakdown(*(values.get(n, 0.0) for n in TERMS),
                                            total=0.0 if total is None else total.item())
        return self.last_breakdown

    # -- epochs --------------------------------------------------------------

    def _maybe_warm_start(self):
        cfg = self.config
        if (cfg.kmeans_init and not self.kmeans_done and self.model.stage2 is not None
                and self.epoch >= cfg.warmup_epochs):
            self.model.stage2.centers.data[...] = kmeans_centers(
                self.model.embeddings(), cfg.n_clusters, self.rngs["init"])
            self.target = None
            self.kmeans_done = True

    def run_steps(self, n_steps: int | None = None) -> bool:
        """Advance through the current epoch; True once the epoch is complete."""
        cfg = self.config
        if self.perm is None:
            self._maybe_warm_start()
            self.perm = self.rngs["shuffle"].permutation(len(self.train_edges))
        taken = 0
        while self.batch_pos < len(self.perm):
            if n_steps is not None and taken >= n_steps:
                return False
            idx = self.perm[self.batch_pos:self.batch_pos + cfg.batch_size]
            self.batch_pos += len(idx)
            self.epoch_sums += self.train_step(self.train_edges[idx]).as_tuple()
            self.epoch_steps += 1
            taken += 1
        return True

    def finish_epoch(self, seconds: float) -> tuple:
        means = self.epoch_sums / max(self.epoch_steps, 1)
        self.epoch += 1
        row = (self.epoch, *means.tolist(), seconds if self.config.timing else 0.0)
        self.history.append(row)
        self.perm = None
        self.batch_pos = 0
        self.epoch_sums = np.zeros(5)
        self.epoch_steps = 0
        return row

    def run_epoch(self) -> tuple:
        start = time.perf_counter()
        self.run_steps()
        return self.finish_epoch(time.perf_counter() - start)

    def converged(self) -> bool:
        cfg = self.config
        w = cfg.early_stop_window
        if not cfg.early_stop or len(self.history) <= w:
            return False
        before, now = self.history[-w - 1][5], self.history[-1][5]
        return (before - now) < cfg.early_stop_tol * abs(before)

    # -- persistence ---------------------------------------------------------

    def state_tensors(self) -> dict[str, np.ndarray]:
        out = {name: p.data for name, p in self.model.named_params().items()}
        for group, state in self.optim.items():
            for name in sorted(state.m):
                out[f"adam.{group}.m.{name}"] = state.m[name]
                out[f"adam.{group}.v.{name}"] = state.v[name]
        if self.target is not None:
            out["cluster.target"] = self.target
        return out

    def state_meta(self) -> dict:
        return {
            "format": 1,
            "config": self.config.to_text(),
            "config_hash": self.config.hash,
            "data_hash": self.data.data_hash,
            "step": self.step,
            "epoch": self.epoch,
            "batch_pos": self.batch_pos,
            "perm": None if self.perm is None else self.perm.tolist(),
            "epoch_sums": self.epoch_sums.tolist(),
            "epoch_steps": self.epoch_steps,
            "kmeans_done": self.kmeans_done,
            "adam_steps": {g: s.step for g, s in self.optim.items()},
            "rng": {name: self.rngs[name].bit_generator.state for name in STREAMS},
            "history": [list(row) for row in self.history],
        }

    def save(self, path):
        try:
            write_checkpoint(path, self.state_tensors(), self.state_meta())
        except OSError as exc:
            raise InputError(f"cannot write checkpoint {path}: {exc.strerror or exc}") from None

    @classmethod
    def load(cls, path, data: PreparedData) -> Trainer:
        tensors, meta = read_checkpoint(path)
        if meta.get("data_hash") != data.data_hash:
            raise ArtifactMismatch(f"{path} was trained on data {meta.get('data_hash')}, "
                                   f"prepared data is {data.data_hash}")
        config = TrainConfig.from_text(meta["config"], str(path))
        if config.hash != meta.get("config_hash"):
            raise ArtifactMismatch(f"{path}: stored config does not match its hash")
        trainer = cls(config, data)
        for name, p in trainer.model.named_params().items():
            if name not in tensors or tensors[name].shape != p.data.shape:
                raise ArtifactMismatch(f"{path}: tensor {name} missing or mis-shaped")
            p.data[...] = tensors[name]
        for group, state in trainer.optim.items():
            state.step = meta["adam_steps"][group]
            for name in trainer.model.groups()[group]:
                if f"adam.{group}.m.{name}" in tensors:
                    state.m[name] = tensors[f"adam.{group}.m.{name}"]
                    state.v[name] = tensors[f"adam.{group}.v.{name}"]
        trainer.target = tensors.get("cluster.target")
        trainer.step = meta["step"]
        trainer.epoch = meta["epoch"]
        trainer.batch_pos = meta["batch_pos"]
        trainer.perm = None if meta["perm"] is None else np.array(meta["perm"], dtype=np.int64)
        trainer.epoch_sums = np.array(meta["epoch_sums"])
        trainer.epoch_steps = meta["epoch_steps"]
        trainer.kmeans_done = meta["kmeans_done"]
        trainer.history = [tuple(row) for row in meta["history"]]
        for name in STREAMS:
            trainer.rngs[name].bit_generator.state = meta["rng"][name]
        return trainer


def write_log(rows, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(LOG_HEADER + "\n")
        for epoch, *values in rows:
            fh.write(f"{epoch}," + ",".join(repr(float(v)) for v in values) + "\n")


def fit(config: TrainConfig, data, out=None, log_path=None, callback=None) -> Trainer:
    """Train for ``config.epochs`` epochs (or until the loss plateaus).

    ``data`` is a :class:`PreparedData` or a prepared directory.  ``callback``
    receives ``(trainer, row)`` after each epoch.
    """
    if not isinstance(data, PreparedData):
        from .graphstore import load_prepared
        data = load_prepared(data)
    trainer = Trainer(config, data)
    while trainer.epoch < config.epochs:
        row = trainer.run_epoch()
        log.info("epoch %d: beh=%.4f clus=%.4f cl=%.4f sup=%.4f total=%.4f", *row[:6])
        if callback is not None:
            callback(trainer, row)
        if trainer.converged():
            log.info("loss plateaued after %d epochs", trainer.epoch)
            break
    if out is not None:
        trainer.save(out)
    if log_path is not None:
        try:
            write_log(trainer.history, log_path)
        except OSError as exc:
            raise InputError(f"cannot write log {log_path}: {exc.strerror or exc}") from None
    return trainer


def load_model(path, data: PreparedData) -> RevGNN:
    return Trainer.load(path, data).model


def default_log_path(checkpoint) -> Path:
    return Path(str(checkpoint) + ".log.csv")
