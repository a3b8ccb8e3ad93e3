"""Symmetric-normalized adjacency with self-loops, stored as CSR."""
from __future__ import annotations

from functools import cached_property

import numpy as np
import scipy.sparse as sp

from ..errors import InputError


class SparseAdjacency:
    """Compressed-sparse-row adjacency over ``n`` nodes.

    Products go through ``scipy.sparse``; the arrays here are the source of
    truth and are never mutated after construction.
    """

    def __init__(self, n: int, indptr, indices, data):
        self.n = int(n)
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.data = np.asarray(data, dtype=np.float64)
        for arr in (self.indptr, self.indices, self.data):
            arr.flags.writeable = False

    @cached_property
    def matrix(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.data, self.indices, self.indptr), shape=(self.n, self.n))

    @property
    def nnz(self) -> int:
        return int(self.data.size)

    def todense(self) -> np.ndarray:
        return self.matrix.toarray()

    def is_symmetric(self) -> bool:
        diff = self.matrix - self.matrix.T
        return diff.count_nonzero() == 0

    def __eq__(self, other):
        if not isinstance(other, SparseAdjacency):
            return NotImplemented
        return (self.n == other.n and np.array_equal(self.indptr, other.indptr)
                and np.array_equal(self.indices, other.indices)
                and np.array_equal(self.data, other.data))

    def __repr__(self):
        return f"SparseAdjacency(n={self.n}, nnz={self.nnz})"


def normalize_adjacency(edges, n: int) -> SparseAdjacency:
    """Return ``D^-1/2 (A + I) D^-1/2`` for an undirected edge list.

    Duplicate pairs (in either orientation) are collapsed and explicit
    self-pairs are ignored, since every node receives a unit self-loop.
    """
    n = int(n)
    pairs = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
    bad = (pairs < 0) | (pairs >= n)
    if bad.any():
        i, j = pairs[np.argmax(bad.any(axis=1))]
        raise InputError(f"edge ({i}, {j}) has a node index outside [0, {n})")
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    pairs = np.unique(np.sort(pairs, axis=1), axis=0)
    loops = np.arange(n, dtype=np.int64)
    rows = np.concatenate([pairs[:, 0], pairs[:, 1], loops])
    cols = np.concatenate([pairs[:, 1], pairs[:, 0], loops])
    degree = np.bincount(rows, minlength=n).astype(np.float64)
    weights = 1.0 / np.sqrt(degree[rows] * degree[cols])
    m = sp.csr_matrix((weights, (rows, cols)), shape=(n, n))
    m.sort_indices()
    return SparseAdjacency(n, m.indptr, m.indices, m.data)
