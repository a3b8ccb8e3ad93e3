import numpy as np
import pytest

from revgnn.graphstore import BipartiteGraph, FeatureStore, PreparedData
from revgnn.config import TrainConfig


def toy_data(d_k: int = 3, seed: int = 0) -> PreparedData:
    """Three scholars, three submissions; one edge of s1 is held out."""
    rng = np.random.default_rng(seed)
    edges = np.array([[0, 0], [0, 1], [1, 1], [1, 2], [2, 0], [2, 2]])
    split = np.array([0, 0, 0, 1, 0, 0], dtype=np.int8)
    g = BipartiteGraph(["a", "b", "c"], ["s0", "s1", "s2"], edges, split)
    return PreparedData(g, FeatureStore(d_k, rng.normal(size=(3, d_k))))


def toy_config(**changes) -> TrainConfig:
    base = dict(d_b=2, d_k=3, n_layers=2, n_clusters=2, n_negatives=3, eta=3, hidden1=4,
                hidden2=3, batch_size=2, epochs=1, history_len=4, timing=False, early_stop=False)
    base.update(changes)
    return TrainConfig(**base)


@pytest.fixture
def toy():
    return toy_data()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
