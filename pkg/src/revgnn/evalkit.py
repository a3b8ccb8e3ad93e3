"""Top-K ranking protocol, metrics, significance testing and report files."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.stats import norm, rankdata

from .decoder import gather_histories, history_lists
from .errors import InputError
from .graphstore import PreparedData

METRICS = ("recall", "ndcg", "hit_ratio", "precision")
_COLUMN = {"recall": "R", "ndcg": "N", "hit_ratio": "HR", "precision": "P"}


# -- metrics -----------------------------------------------------------------

def _check(truths, ranked, k):
    if k < 1:
        raise InputError("K must be >= 1")
    if len(truths) != len(ranked):
        raise InputError(f"{len(truths)} truth sets for {len(ranked)} ranked lists")
    if not len(truths):
        raise InputError("empty evaluation set")


def _hits(truth, ranked, k) -> int:
    return len(set(ranked[:k]) & set(truth))


def recall_at_k(truths: Sequence, ranked: Sequence, k: int) -> float:
    _check(truths, ranked, k)
    return float(np.mean([_hits(t, r, k) / len(t) for t, r in zip(truths, ranked)]))


def precision_at_k(truths: Sequence, ranked: Sequence, k: int) -> float:
    """Hits over K, even when fewer than K candidates were available."""
    _check(truths, ranked, k)
    return float(np.mean([_hits(t, r, k) / k for t, r in zip(truths, ranked)]))


def _discount(k: int) -> np.ndarray:
    # ranks counted from 1 with a log2(2 + rank) discount
    return 1.0 / np.log2(2.0 + np.arange(1, k + 1))


def ndcg_at_k(truths: Sequence, ranked: Sequence, k: int) -> float:
    _check(truths, ranked, k)
    disc = _discount(k)
    scores = []
    for truth, r in zip(truths, ranked):
        truth = set(truth)
        rel = np.array([item in truth for item in r[:k]], dtype=np.float64)
        dcg = float(np.sum((2.0 ** rel - 1.0) * disc[:len(rel)]))
        idcg = float(np.sum(disc[:min(len(truth), k)]))
        scores.append(dcg / idcg if idcg > 0 else 0.0)
    return float(np.mean(scores))


def hit_ratio_at_k(truths: Sequence, ranked: Sequence, k: int) -> float:
    _check(truths, ranked, k)
    hits = sum(_hits(t, r, k) for t, r in zip(truths, ranked))
    return hits / sum(len(t) for t in truths)


def all_metrics(truths, ranked, k) -> dict[str, float]:
    return {
        "recall": recall_at_k(truths, ranked, k),
        "ndcg": ndcg_at_k(truths, ranked, k),
        "hit_ratio": hit_ratio_at_k(truths, ranked, k),
        "precision": precision_at_k(truths, ranked, k),
    }


# -- significance ------------------------------------------------------------

@dataclass(frozen=True)
class MannWhitneyResult:
    u: float
    p: float


def mann_whitney_u(sample_a, sample_b, method: str = "asymptotic") -> MannWhitneyResult:
    """Two-sided Mann-Whitney U test; ``u`` is the statistic of ``sample_a``.

    ``asymptotic`` uses the tie-corrected normal approximation with a
    continuity correction.  ``exact`` enumerates every assignment of the
    pooled ranks (at most 8 values per side).
    """
    a = np.asarray(sample_a, dtype=np.float64)
    b = np.asarray(sample_b, dtype=np.float64)
    if not len(a) or not len(b):
        raise InputError("Mann-Whitney U needs two non-empty samples")
    n1, n2 = len(a), len(b)
    pooled = np.concatenate([a, b])
    ranks = rankdata(pooled)
    u = float(ranks[:n1].sum() - n1 * (n1 + 1) / 2.0)
    if np.all(pooled == pooled[0]):
        return MannWhitneyResult(n1 * n2 / 2.0, 1.0)
    if method == "exact":
        if n1 > 8 or n2 > 8:
            raise InputError("exact Mann-Whitney is limited to 8 values per side")
        offset = n1 * (n1 + 1) / 2.0
        dist = np.array([ranks[list(c)].sum() - offset
                         for c in itertools.combinations(range(n1 + n2), n1)])
        lower = np.mean(dist <= u + 1e-9)
        upper = np.mean(dist >= u - 1e-9)
        return MannWhitneyResult(u, float(min(1.0, 2.0 * min(lower, upper))))
    if method != "asymptotic":
        raise InputError(f"unknown method {method!r}")
    n = n1 + n2
    _, counts = np.unique(pooled, return_counts=True)
    tie = float(np.sum(counts ** 3 - counts)) / (n * (n - 1))
    sigma = math.sqrt(n1 * n2 / 12.0 * ((n + 1) - tie))
    z = (abs(u - n1 * n2 / 2.0) - 0.5) / sigma
    return MannWhitneyResult(u, float(min(1.0, 2.0 * norm.sf(max(z, 0.0)))))


# -- ranking -----------------------------------------------------------------

ScoreFn = Callable[[int, np.ndarray], np.ndarray]


class RankingContext:
    """Scores candidate scholars for one submission at a time.

    ``score_fn(submission, scholars)`` returns one score per scholar index.
    """

    def __init__(self, data: PreparedData, score_fn: ScoreFn):
        self.data = data
        self.score_fn = score_fn
        self.linked = data.graph.reviewers("train")
        self._index = {sid: j for j, sid in enumerate(data.graph.submissions)}

    @classmethod
    def for_model(cls, model, chunk: int = 2048) -> RankingContext:
        data = model.data
        scorer = model.scorer()
        lists = history_lists(data.graph.neighbors("train"))
        limit = model.config.history_len

        def score(submission, scholars):
            out = np.empty(len(scholars))
            for start in range(0, len(scholars), chunk):
                part = scholars[start:start + chunk]
                hist, mask = gather_histories(lists, part, [submission] * len(part), limit)
                out[start:start + chunk] = scorer.score(submission, part, hist, mask)
            return out

        return cls(data, score)

    @classmethod
    def popularity(cls, data: PreparedData) -> RankingContext:
        """Baseline scoring every scholar by its number of train reviews."""
        degree = np.bincount(data.graph.train_edges[:, 1], minlength=data.graph.n_scholars)
        return cls(data, lambda submission, scholars: degree[scholars].astype(np.float64))

    def resolve(self, submission) -> int:
        if isinstance(submission, (int, np.integer)):
            if not 0 <= submission < self.data.graph.n_submissions:
                raise InputError(f"unknown submission index {submission}")
            return int(submission)
        if submission not in self._index:
            raise InputError(f"unknown submission {submission!r}")
        return self._index[submission]

    def rank_candidates(self, submission, k: int, exclude_train: bool = True) -> list[tuple[int, float]]:
        """Top-``k`` (scholar, score), descending; ties go to the lower scholar index."""
        j = self.resolve(submission)
        scholars = np.arange(self.data.graph.n_scholars)
        if exclude_train and self.linked[j]:
            scholars = np.setdiff1d(scholars, np.fromiter(self.linked[j], dtype=np.int64))
        scores = np.asarray(self.score_fn(j, scholars), dtype=np.float64)
        order = np.lexsort((scholars, -scores))[:k]
        return [(int(scholars[i]), float(scores[i])) for i in order]


@dataclass
class RankingReport:
    k: int
    lists: dict[int, list[tuple[int, float]]]
    truths: dict[int, set[int]]
    metrics: dict[str, float]
    meta: dict = field(default_factory=dict)

    def header(self) -> list[str]:
        return [f"{_COLUMN[m]}@{self.k}" for m in METRICS]

    def row(self) -> list[float]:
        return [self.metrics[m] for m in METRICS]


def evaluate(ctx: RankingContext, k: int, scope: str = "test", exclude_train: bool = True,
             meta: dict | None = None) -> RankingReport:
    """Rank every submission that has ``scope`` edges and score against them."""
    truths_all = ctx.data.graph.reviewers(scope)
    subs = [j for j, t in enumerate(truths_all) if t]
    if not subs:
        raise InputError(f"no submissions with {scope} edges to evaluate")
    lists = {j: ctx.rank_candidates(j, k, exclude_train) for j in subs}
    truths = {j: truths_all[j] for j in subs}
    ranked = [[s for s, _ in lists[j]] for j in subs]
    metrics = all_metrics([truths[j] for j in subs], ranked, k)
    return RankingReport(k, lists, truths, metrics, dict(meta or {}))


def _fmt(x: float) -> str:
    return format(x, ".10g")


def emit_report(report: RankingReport, path, detail_path=None, catalogs=None):
    """Aggregate CSV plus, optionally, one detail row per ranked candidate.

    ``catalogs`` is ``(scholar_ids, submission_ids)`` for external IDs in
    the detail file; internal indices are written otherwise.
    """
    try:
        Path(path).write_text(",".join(report.header()) + "\n"
                              + ",".join(_fmt(v) for v in report.row()) + "\n", encoding="utf-8")
        if detail_path is not None:
            with open(detail_path, "w", encoding="utf-8", newline="\n") as fh:
                for j in sorted(report.lists):
                    truth = report.truths[j]
                    sub_id = catalogs[1][j] if catalogs else j
                    for rank, (s, score) in enumerate(report.lists[j], start=1):
                        sch_id = catalogs[0][s] if catalogs else s
                        fh.write(f"{sub_id}\t{rank}\t{sch_id}\t{_fmt(score)}\t{int(s in truth)}\n")
    except OSError as exc:
        raise InputError(f"cannot write report: {exc.strerror or exc}") from None
