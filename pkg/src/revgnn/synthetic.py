"""Planted-structure review graphs for sanity checks and ablations."""
from __future__ import annotations

import numpy as np

from .errors import InputError
from .graphstore import BipartiteGraph, FeatureStore, PreparedData, make_split, write_features


def _block_features(blocks: np.ndarray, n_blocks: int, dim: int, noise: float,
                    rng: np.random.Generator) -> np.ndarray:
    if dim < n_blocks:
        raise InputError(f"{n_blocks} blocks need at least {n_blocks} block dimensions, got {dim}")
    width = dim // n_blocks
    feats = rng.normal(0.0, noise, size=(len(blocks), dim))
    for i, b in enumerate(blocks):
        feats[i, b * width:(b + 1) * width] += 1.0
    return feats


def planted_blocks(n_scholars: int = 200, n_submissions: int = 100, n_blocks: int = 4,
                   reviews: int = 2, dim: int = 8, noise: float = 0.1, seed: int = 0) -> PreparedData:
    """Block-diagonal review graph with every edge in train.

    Scholars and submissions are dealt round-robin into blocks; each
    submission is reviewed by ``reviews`` distinct scholars of its block and
    carries a block-aligned feature vector plus Gaussian noise.
    """
    rng = np.random.default_rng(seed)
    sch_block = np.arange(n_scholars) % n_blocks
    sub_block = np.arange(n_submissions) % n_blocks
    edges = []
    for j in range(n_submissions):
        members = np.flatnonzero(sch_block == sub_block[j])
        for u in rng.choice(members, size=reviews, replace=False):
            edges.append((j, int(u)))
    graph = BipartiteGraph([f"r{i}" for i in range(n_scholars)],
                           [f"s{j}" for j in range(n_submissions)], np.array(edges))
    features = FeatureStore(dim, _block_features(sub_block, n_blocks, dim, noise, rng))
    return PreparedData(graph, features)


def exposure_benchmark(n_scholars: int = 120, n_submissions: int = 240, n_blocks: int = 6,
                       reviews: int = 3, dim: int = 10, latent: int = 4, sharpness: float = 3.0,
                       noise: float = 0.3, seed: int = 0, split_seed: int | None = None) -> PreparedData:
    """Review graph where each observed edge is one draw from a larger relevant set.

    Within a block, scholar ``u`` is exposed to submission ``s`` with
    probability proportional to ``exp(sharpness * <x_u, x_s>)`` for latent
    unit vectors; only ``reviews`` exposures per submission are observed.
    One observed review per submission is then held out for testing, so the
    training graph lacks many true positives.  Submission features are a
    ``dim - latent`` wide block indicator and a noisy copy of the latent
    vector.
    """
    rng = np.random.default_rng(seed)
    sch_block = np.arange(n_scholars) % n_blocks
    sub_block = np.arange(n_submissions) % n_blocks
    xu = rng.normal(size=(n_scholars, latent))
    xu /= np.linalg.norm(xu, axis=1, keepdims=True)
    xs = rng.normal(size=(n_submissions, latent))
    xs /= np.linalg.norm(xs, axis=1, keepdims=True)
    edges = []
    for j in range(n_submissions):
        members = np.flatnonzero(sch_block == sub_block[j])
        logits = sharpness * xu[members] @ xs[j]
        prob = np.exp(logits - logits.max())
        prob /= prob.sum()
        for u in rng.choice(members, size=reviews, replace=False, p=prob):
            edges.append((j, int(u)))
    block = _block_features(sub_block, n_blocks, dim - latent, noise, rng)
    feats = np.hstack([block, xs + rng.normal(0.0, noise, size=xs.shape)])
    graph = BipartiteGraph([f"r{i}" for i in range(n_scholars)],
                           [f"s{j}" for j in range(n_submissions)], np.array(edges))
    graph = make_split(graph, seed if split_seed is None else split_seed)
    return PreparedData(graph, FeatureStore(dim, feats))


def write_raw(data: PreparedData, edges_path, features_path):
    """Write ``data`` as an edge file plus a submission feature file.

    The split is dropped; ``revgnn prepare`` draws a fresh one.
    """
    g = data.graph
    with open(edges_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# submission_id\tscholar_id\n")
        for sub, sch in g.edges:
            fh.write(f"{g.submissions[sub]}\t{g.scholars[sch]}\n")
    write_features(features_path, g.submissions, data.features.submission)
