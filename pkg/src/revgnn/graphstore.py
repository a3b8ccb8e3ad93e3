"""Review-graph ingestion, splitting, adjacency and knowledge features.

Node ordering everywhere is scholars first, then submissions: scholar ``i``
is node ``i`` and submission ``j`` is node ``n_scholars + j``.
"""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import InputError
from .numcore import SparseAdjacency, normalize_adjacency
from .rng import stream

log = logging.getLogger(__name__)

TRAIN, TEST = 0, 1
_TAG_NAMES = {TRAIN: "train", TEST: "test"}


@dataclass
class BipartiteGraph:
    scholars: list[str]
    submissions: list[str]
    edges: np.ndarray  # (E, 2) rows of (submission index, scholar index)
    split: np.ndarray = None  # (E,) TRAIN/TEST tags; all train when omitted
    duplicates: int = 0

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if self.split is None:
            self.split = np.zeros(len(self.edges), dtype=np.int8)
        self.split = np.asarray(self.split, dtype=np.int8)
        if len(self.split) != len(self.edges):
            raise InputError("split tags and edges differ in length")
        if len(self.edges):
            if self.edges[:, 0].min() < 0 or self.edges[:, 0].max() >= len(self.submissions):
                raise InputError("submission index out of range")
            if self.edges[:, 1].min() < 0 or self.edges[:, 1].max() >= len(self.scholars):
                raise InputError("scholar index out of range")

    @property
    def n_scholars(self) -> int:
        return len(self.scholars)

    @property
    def n_submissions(self) -> int:
        return len(self.submissions)

    @property
    def n_nodes(self) -> int:
        return self.n_scholars + self.n_submissions

    def submission_node(self, j):
        return self.n_scholars + np.asarray(j)

    @property
    def train_edges(self) -> np.ndarray:
        return self.edges[self.split == TRAIN]

    @property
    def test_edges(self) -> np.ndarray:
        return self.edges[self.split == TEST]

    def with_split(self, split) -> BipartiteGraph:
        return replace(self, split=np.asarray(split, dtype=np.int8))

    def neighbors(self, scope: str = "train") -> list[list[int]]:
        """Per-scholar submission indices in edge (ingestion) order."""
        edges = {"train": self.train_edges, "test": self.test_edges, "all": self.edges}[scope]
        out: list[list[int]] = [[] for _ in range(self.n_scholars)]
        for sub, sch in edges:
            out[sch].append(int(sub))
        return out

    def reviewers(self, scope: str = "train") -> list[set[int]]:
        """Per-submission scholar index sets."""
        edges = {"train": self.train_edges, "test": self.test_edges, "all": self.edges}[scope]
        out: list[set[int]] = [set() for _ in range(self.n_submissions)]
        for sub, sch in edges:
            out[sub].add(int(sch))
        return out


@dataclass(frozen=True)
class DatasetStats:
    scholars: int
    submissions: int
    reviews: int
    density: float

    @classmethod
    def from_counts(cls, scholars: int, submissions: int, reviews: int) -> DatasetStats:
        if scholars <= 0 or submissions <= 0:
            raise InputError("dataset statistics need non-empty scholar and submission catalogs")
        return cls(scholars, submissions, reviews, reviews / (scholars * submissions))


@dataclass
class FeatureStore:
    dim: int
    submission: np.ndarray  # (n_submissions, dim)
    scholar: np.ndarray | None = field(default=None)  # pooled, (n_scholars, dim)

    def knowledge_matrix(self) -> np.ndarray:
        """Knowledge rows in node order; needs pooled scholar vectors."""
        if self.scholar is None:
            raise InputError("scholar features have not been pooled")
        return np.vstack([self.scholar, self.submission])


def _read_lines(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.rstrip("\r")
        if not line.strip() or line.startswith("#"):
            continue
        yield lineno, line


def _intern(edges_iter, path="<edges>") -> BipartiteGraph:
    scholars: dict[str, int] = {}
    submissions: dict[str, int] = {}
    seen: set[tuple[int, int]] = set()
    edges = []
    duplicates = 0
    for lineno, line in edges_iter:
        fields = line.split("\t")
        if len(fields) != 2 or not fields[0].strip() or not fields[1].strip():
            raise InputError(f"{path}:{lineno}: expected 'submission_id<TAB>scholar_id'")
        sub = submissions.setdefault(fields[0].strip(), len(submissions))
        sch = scholars.setdefault(fields[1].strip(), len(scholars))
        if (sub, sch) in seen:
            duplicates += 1
            continue
        seen.add((sub, sch))
        edges.append((sub, sch))
    if not edges:
        raise InputError(f"{path}: no edges")
    if duplicates:
        log.warning("%s: collapsed %d duplicate edge(s)", path, duplicates)
    return BipartiteGraph(list(scholars), list(submissions), np.array(edges), duplicates=duplicates)


def load_edges(path) -> BipartiteGraph:
    """Read a ``submission_id<TAB>scholar_id`` file, interning IDs by first appearance."""
    return _intern(_read_lines(path), path)


def compute_stats(g: BipartiteGraph) -> DatasetStats:
    return DatasetStats.from_counts(g.n_scholars, g.n_submissions, len(g.edges))


def make_split(g: BipartiteGraph, seed: int) -> BipartiteGraph:
    """Hold out one uniformly chosen review per submission that has at least two."""
    rng = stream(seed, "split")
    split = np.full(len(g.edges), TRAIN, dtype=np.int8)
    order = np.argsort(g.edges[:, 0], kind="stable")
    starts = np.searchsorted(g.edges[order, 0], np.arange(g.n_submissions + 1))
    for j in range(g.n_submissions):
        rows = order[starts[j]:starts[j + 1]]
        if len(rows) >= 2:
            split[rows[rng.integers(len(rows))]] = TEST
    return g.with_split(split)


def build_adjacency(g: BipartiteGraph) -> SparseAdjacency:
    """Normalized adjacency over train edges only, with self-loops."""
    train = g.train_edges
    pairs = np.column_stack([train[:, 1], g.submission_node(train[:, 0])])
    return normalize_adjacency(pairs, g.n_nodes)


def load_features(path, g: BipartiteGraph) -> FeatureStore:
    """Read ``dim=<d>`` then ``node_id<TAB>f1,...,fd`` lines for the submissions of ``g``."""
    lines = _read_lines(path)
    try:
        lineno, header = next(lines)
    except StopIteration:
        raise InputError(f"{path}: empty feature file") from None
    if not header.startswith("dim="):
        raise InputError(f"{path}:{lineno}: expected header 'dim=<d>'")
    try:
        dim = int(header[4:])
    except ValueError:
        raise InputError(f"{path}:{lineno}: bad dimension {header[4:]!r}") from None
    if dim <= 0:
        raise InputError(f"{path}:{lineno}: dimension must be positive")
    index = {sid: j for j, sid in enumerate(g.submissions)}
    matrix = np.zeros((g.n_submissions, dim))
    found = np.zeros(g.n_submissions, dtype=bool)
    extra = 0
    for lineno, line in lines:
        node_id, sep, values = line.partition("\t")
        if not sep:
            raise InputError(f"{path}:{lineno}: expected 'node_id<TAB>f1,...,f{dim}'")
        j = index.get(node_id.strip())
        if j is None:
            extra += 1
            continue
        try:
            vec = np.array([float(v) for v in values.split(",")])
        except ValueError:
            raise InputError(f"{path}:{lineno}: non-numeric feature value") from None
        if vec.size != dim:
            raise InputError(f"{path}:{lineno}: {vec.size} values, expected {dim}")
        if not np.isfinite(vec).all():
            raise InputError(f"{path}:{lineno}: non-finite feature value")
        if found[j]:
            raise InputError(f"{path}:{lineno}: duplicate vector for {node_id.strip()}")
        matrix[j] = vec
        found[j] = True
    if not found.all():
        missing = g.submissions[int(np.argmin(found))]
        raise InputError(f"{path}: no feature vector for submission {missing}")
    if extra:
        log.warning("%s: ignored %d vector(s) for unknown nodes", path, extra)
    return FeatureStore(dim, matrix)


def pool_scholar_features(g: BipartiteGraph, store: FeatureStore) -> FeatureStore:
    """Scholar vector = mean of its train-edge submissions' vectors (zero if none)."""
    if store.submission.shape[0] != g.n_submissions:
        raise InputError(f"feature store covers {store.submission.shape[0]} submissions, "
                         f"graph has {g.n_submissions}")
    train = g.train_edges
    totals = np.zeros((g.n_scholars, store.dim))
    np.add.at(totals, train[:, 1], store.submission[train[:, 0]])
    counts = np.bincount(train[:, 1], minlength=g.n_scholars).astype(np.float64)
    pooled = np.divide(totals, counts[:, None], out=np.zeros_like(totals),
                       where=counts[:, None] > 0)
    return FeatureStore(store.dim, store.submission, pooled)


# -- prepared data directories ---------------------------------------------

def _format_vector(vec) -> str:
    return ",".join(repr(float(x)) for x in vec)


def write_features(path, ids, matrix):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"dim={matrix.shape[1]}\n")
        for node_id, vec in zip(ids, matrix):
            fh.write(f"{node_id}\t{_format_vector(vec)}\n")


def write_split(g: BipartiteGraph, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for (sub, sch), tag in zip(g.edges, g.split):
            fh.write(f"{g.submissions[sub]}\t{g.scholars[sch]}\t{_TAG_NAMES[int(tag)]}\n")


def read_split(path, scholars: list[str], submissions: list[str]) -> BipartiteGraph:
    sch_index = {s: i for i, s in enumerate(scholars)}
    sub_index = {s: j for j, s in enumerate(submissions)}
    tags = {"train": TRAIN, "test": TEST}
    edges, split = [], []
    for lineno, line in _read_lines(path):
        fields = line.split("\t")
        if len(fields) != 3 or fields[2] not in tags:
            raise InputError(f"{path}:{lineno}: expected 'submission_id<TAB>scholar_id<TAB>train|test'")
        if fields[0] not in sub_index or fields[1] not in sch_index:
            raise InputError(f"{path}:{lineno}: node not in the prepared catalogs")
        edges.append((sub_index[fields[0]], sch_index[fields[1]]))
        split.append(tags[fields[2]])
    if not edges:
        raise InputError(f"{path}: no edges")
    return BipartiteGraph(scholars, submissions, np.array(edges), np.array(split))


@dataclass
class PreparedData:
    """Everything training and evaluation need, derived from one split graph."""

    graph: BipartiteGraph
    features: FeatureStore

    def __post_init__(self):
        if self.features.scholar is None:
            self.features = pool_scholar_features(self.graph, self.features)
        self.adjacency = build_adjacency(self.graph)

    @property
    def stats(self) -> DatasetStats:
        return compute_stats(self.graph)

    @property
    def data_hash(self) -> str:
        h = hashlib.sha256()
        h.update("\n".join(self.graph.scholars).encode())
        h.update(b"\x00")
        h.update("\n".join(self.graph.submissions).encode())
        h.update(b"\x00")
        h.update(self.graph.edges.astype("<i8").tobytes())
        h.update(self.graph.split.astype("i1").tobytes())
        h.update(self.features.submission.astype("<f8").tobytes())
        return h.hexdigest()[:16]


def prepare(edges_path, features_path, seed: int, out_dir) -> PreparedData:
    """Load, split and pool; write catalogs, split, features and stats to ``out_dir``."""
    graph = make_split(load_edges(edges_path), seed)
    data = PreparedData(graph, load_features(features_path, graph))
    save_prepared(data, out_dir)
    return data


def save_prepared(data: PreparedData, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    g = data.graph
    (out / "scholars.txt").write_text("".join(f"{s}\n" for s in g.scholars), encoding="utf-8")
    (out / "submissions.txt").write_text("".join(f"{s}\n" for s in g.submissions), encoding="utf-8")
    write_split(g, out / "split.tsv")
    write_features(out / "features.tsv", g.submissions, data.features.submission)
    write_features(out / "scholar_features.tsv", g.scholars, data.features.scholar)
    st = data.stats
    n_test = int((g.split == TEST).sum())
    (out / "stats.tsv").write_text(
        "scholars\tsubmissions\treviews\tdensity\ttrain\ttest\tduplicates\n"
        f"{st.scholars}\t{st.submissions}\t{st.reviews}\t{st.density:.6e}\t"
        f"{len(g.edges) - n_test}\t{n_test}\t{g.duplicates}\n", encoding="utf-8")


def load_prepared(data_dir) -> PreparedData:
    d = Path(data_dir)
    if not d.is_dir():
        raise InputError(f"{d}: prepared data directory not found")
    scholars = [s for _, s in _read_lines(d / "scholars.txt")]
    submissions = [s for _, s in _read_lines(d / "submissions.txt")]
    graph = read_split(d / "split.tsv", scholars, submissions)
    return PreparedData(graph, load_features(d / "features.tsv", graph))
