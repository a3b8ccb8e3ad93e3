"""Variant x seed sweeps with rank-sum comparisons between variants."""
from __future__ import annotations

import itertools
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .config import TrainConfig
from .errors import InputError
from .evalkit import METRICS, RankingContext, evaluate, mann_whitney_u
from .graphstore import PreparedData

_FIXED = {
    "full": {},
    "-Knowl.": {"use_knowledge": False},
    "-Behav.": {"use_behavior": False},
    "-Stage-2": {"use_stage2": False},
    "uniform-neg": {"negative_sampling": "uniform"},
}
_CLUSTERS = re.compile(r"C=(\d+)$")


def variant_overrides(name: str) -> dict:
    """Config changes for a variant label (``full``, ``-Knowl.``, ``C=5``, ...)."""
    if name in _FIXED:
        return dict(_FIXED[name])
    m = _CLUSTERS.match(name)
    if m and int(m.group(1)) >= 1:
        return {"n_clusters": int(m.group(1))}
    raise InputError(f"unknown variant {name!r}; expected one of "
                     f"{', '.join(_FIXED)} or C=<n>")


@dataclass(frozen=True)
class RunResult:
    variant: str
    seed: int
    metrics: dict


def _run_one(args) -> RunResult:
    from .trainer import fit
    config, data, variant, seed, k = args
    cfg = config.replace(seed=seed, **variant_overrides(variant))
    cfg.validate()
    trainer = fit(cfg, data)
    report = evaluate(RankingContext.for_model(trainer.model), k)
    return RunResult(variant, seed, report.metrics)


def worker_count() -> int:
    raw = os.environ.get("REVGNN_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise InputError(f"REVGNN_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


def run_ablation(config: TrainConfig, data: PreparedData, variants, seeds, k: int = 20,
                 workers: int | None = None) -> list[RunResult]:
    """Train and evaluate every variant under every seed.

    Results come back in (variant, seed) order whatever the worker count.
    """
    variants = list(variants)
    for v in variants:
        variant_overrides(v)
    jobs = [(config, data, v, int(s), k) for v in variants for s in seeds]
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(jobs) <= 1:
        return [_run_one(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(_run_one, jobs))


@dataclass(frozen=True)
class Comparison:
    variant_a: str
    variant_b: str
    metric: str
    u: float
    p: float


def compare(results: list[RunResult]) -> list[Comparison]:
    """Mann-Whitney U for every unordered variant pair and every metric."""
    by_variant: dict[str, list[RunResult]] = {}
    for r in results:
        by_variant.setdefault(r.variant, []).append(r)
    out = []
    for a, b in itertools.combinations(by_variant, 2):
        for metric in METRICS:
            res = mann_whitney_u([r.metrics[metric] for r in by_variant[a]],
                                 [r.metrics[metric] for r in by_variant[b]])
            out.append(Comparison(a, b, metric, res.u, res.p))
    return out


def _fmt(x: float) -> str:
    return format(x, ".10g")


def write_results(results: list[RunResult], path, k: int):
    cols = ["R", "N", "HR", "P"]
    lines = ["variant,seed," + ",".join(f"{c}@{k}" for c in cols)]
    for r in results:
        lines.append(f"{r.variant},{r.seed}," + ",".join(_fmt(r.metrics[m]) for m in METRICS))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_comparisons(comparisons: list[Comparison], path):
    lines = ["variant_a,variant_b,metric,U,p"]
    for c in comparisons:
        lines.append(f"{c.variant_a},{c.variant_b},{c.metric},{_fmt(c.u)},{_fmt(c.p)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
