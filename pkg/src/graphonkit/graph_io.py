"""Graphs, corpora, file parsers, synthetic generators and degree measures."""
import logging
import os
import re
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)

# below this many nodes adjacency is kept dense
DENSE_LIMIT = 2000

_NODES_DIRECTIVE = re.compile(r"^#\s*nodes\s*:\s*(\d+)\s*$", re.IGNORECASE)
_LABEL_DIRECTIVE = re.compile(r"^#\s*label\s*:\s*(-?\d+)\s*$", re.IGNORECASE)


class ParseError(ValueError):
    """Raised when an input file does not follow the expected format."""


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Graph:
    """
    A finite simple undirected graph.

    :param adjacency: symmetric 0/1 matrix with zero diagonal, dense ndarray or scipy sparse
    :param label: optional integer class label
    """
    adjacency: Union[np.ndarray, sp.csr_matrix]
    label: Optional[int] = None

    def __post_init__(self):
        adj = self.adjacency
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ValueError(f"adjacency must be square, got shape {adj.shape}")
        if adj.shape[0] < 1:
            raise ValueError("a graph needs at least one node")
        if sp.issparse(adj):
            adj = sp.csr_matrix(adj, dtype=np.int8)
            adj.eliminate_zeros()
            if (adj != adj.T).nnz or adj.diagonal().any():
                raise ValueError("adjacency must be symmetric with a zero diagonal")
            if adj.nnz and (adj.data != 1).any():
                raise ValueError("adjacency entries must be 0 or 1")
        else:
            adj = np.array(adj, dtype=np.int8)
            if not np.array_equal(adj, adj.T) or np.diag(adj).any():
                raise ValueError("adjacency must be symmetric with a zero diagonal")
            if ((adj != 0) & (adj != 1)).any():
                raise ValueError("adjacency entries must be 0 or 1")
            _readonly(adj)
        object.__setattr__(self, "adjacency", adj)

    @classmethod
    def from_edges(cls, n: int, edges, label: Optional[int] = None) -> "Graph":
        """Build a graph on ``n`` nodes; duplicate edges collapse, self-loops must be absent."""
        edges = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        if len(edges) and (edges.min() < 0 or edges.max() >= n):
            raise ValueError("edge endpoint out of range")
        if (edges[:, 0] == edges[:, 1]).any():
            raise ValueError("self-loops are not allowed")
        rows = np.concatenate([edges[:, 0], edges[:, 1]])
        cols = np.concatenate([edges[:, 1], edges[:, 0]])
        if n < DENSE_LIMIT:
            adj = np.zeros((n, n), dtype=np.int8)
            adj[rows, cols] = 1
        else:
            adj = sp.csr_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(n, n))
            adj.data[:] = 1
        return cls(adj, label)

    @property
    def node_count(self) -> int:
        return self.adjacency.shape[0]

    @property
    def edge_count(self) -> int:
        if sp.issparse(self.adjacency):
            return int(self.adjacency.nnz // 2)
        return int(self.adjacency.sum() // 2)

    def degrees(self) -> np.ndarray:
        return np.asarray(self.adjacency.sum(axis=1), dtype=np.float64).ravel()

    def dense(self) -> np.ndarray:
        """Adjacency as a float64 dense matrix."""
        if sp.issparse(self.adjacency):
            return self.adjacency.toarray().astype(np.float64)
        return self.adjacency.astype(np.float64)

    def edges(self) -> np.ndarray:
        """(E, 2) array of edges with u < v, in lexicographic order."""
        if sp.issparse(self.adjacency):
            upper = sp.triu(self.adjacency, k=1).tocoo()
            pairs = np.stack([upper.row, upper.col], axis=1)
            return pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]
        u, v = np.nonzero(np.triu(self.adjacency, k=1))
        return np.stack([u, v], axis=1)

    def permute(self, order: Sequence[int]) -> "Graph":
        """Relabel so that new node i is old node ``order[i]``."""
        order = np.asarray(order)
        if sp.issparse(self.adjacency):
            adj = self.adjacency[order][:, order]
        else:
            adj = self.adjacency[np.ix_(order, order)]
        return Graph(adj, self.label)


@dataclass(frozen=True)
class GraphCorpus:
    graphs: List[Graph]
    name: str = "corpus"

    def __post_init__(self):
        if len(self.graphs) == 0:
            raise ValueError("a corpus must contain at least one graph")
        object.__setattr__(self, "graphs", list(self.graphs))

    def __len__(self) -> int:
        return len(self.graphs)

    def __iter__(self):
        return iter(self.graphs)

    def __getitem__(self, i):
        return self.graphs[i]

    @property
    def labels(self) -> List[Optional[int]]:
        return [g.label for g in self.graphs]


@dataclass(frozen=True, eq=False)
class NodeMeasure:
    """A probability vector over nodes (or graphon blocks)."""
    weights: np.ndarray = field()

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64).ravel()
        if w.size == 0:
            raise ValueError("a measure needs at least one atom")
        if not np.all(np.isfinite(w)) or (w < 0).any():
            raise ValueError("measure weights must be finite and nonnegative")
        if abs(w.sum() - 1.0) > 1e-9:
            raise ValueError(f"measure weights must sum to 1, got {w.sum():.12g}")
        object.__setattr__(self, "weights", _readonly(w))

    @classmethod
    def uniform(cls, n: int) -> "NodeMeasure":
        return cls(np.full(n, 1.0 / n))

    @classmethod
    def normalized(cls, values) -> "NodeMeasure":
        values = np.asarray(values, dtype=np.float64)
        return cls(values / values.sum())

    def __len__(self) -> int:
        return self.weights.size


def parse_edge_list(text: str) -> Graph:
    """
    Parse whitespace separated ``u v`` pairs (0-based ids).

    Lines starting with ``#`` are comments; ``# nodes: N`` additionally fixes a minimum node count
    so trailing isolated nodes survive a round trip, and ``# label: k`` attaches a class label.
    Duplicate edges and self-loops are dropped.
    """
    edges = set()
    dropped = 0
    max_id = -1
    declared = 0
    label = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            m = _NODES_DIRECTIVE.match(line)
            if m:
                declared = int(m.group(1))
            m = _LABEL_DIRECTIVE.match(line)
            if m:
                label = int(m.group(1))
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"line {lineno}: expected 'u v', got {raw!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(f"line {lineno}: node ids must be integers, got {raw!r}") from None
        if u < 0 or v < 0:
            raise ParseError(f"line {lineno}: node ids must be nonnegative")
        max_id = max(max_id, u, v)
        key = (min(u, v), max(u, v))
        if u == v or key in edges:
            dropped += 1
            continue
        edges.add(key)
    n = max(max_id + 1, declared)
    if n == 0:
        raise ParseError("edge list is empty")
    if dropped:
        logger.warning("dropped %d duplicate edge(s) or self-loop(s)", dropped)
    return Graph.from_edges(n, sorted(edges), label)


def to_edge_list(g: Graph) -> str:
    lines = [f"# nodes: {g.node_count}"]
    if g.label is not None:
        lines.append(f"# label: {g.label}")
    lines.extend(f"{u} {v}" for u, v in g.edges())
    return "\n".join(lines) + "\n"


def load_edge_list(path: str) -> Graph:
    with open(path, encoding="utf-8") as fh:
        return parse_edge_list(fh.read())


def _find_prefix(directory: str) -> str:
    hits = sorted(f[:-len("_A.txt")] for f in os.listdir(directory) if f.endswith("_A.txt"))
    if not hits:
        raise FileNotFoundError(f"no *_A.txt file in {directory}")
    if len(hits) > 1:
        raise ParseError(f"several datasets in {directory}: {hits}")
    return hits[0]


def _read_int_column(path: str) -> np.ndarray:
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with open(path, encoding="utf-8") as fh:
        rows = [line.strip() for line in fh if line.strip()]
    try:
        return np.array([int(r) for r in rows], dtype=np.int64)
    except ValueError as err:
        raise ParseError(f"{path}: {err}") from None


def parse_tudataset(directory: str) -> GraphCorpus:
    """
    Read a dataset in the TUDataset text layout.

    :param directory: folder holding DS_A.txt, DS_graph_indicator.txt and DS_graph_labels.txt
    :return: one graph per graph id, in id order, with labels attached
    """
    prefix = _find_prefix(directory)
    base = os.path.join(directory, prefix)
    indicator = _read_int_column(base + "_graph_indicator.txt")
    labels = _read_int_column(base + "_graph_labels.txt")
    a_path = base + "_A.txt"
    with open(a_path, encoding="utf-8") as fh:
        pairs = []
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.replace(",", " ").split()
            if len(parts) != 2:
                raise ParseError(f"{a_path}:{lineno}: expected 'row, col'")
            pairs.append((int(parts[0]), int(parts[1])))
    pairs = np.array(pairs, dtype=np.int64).reshape(-1, 2)

    n_total = len(indicator)
    bad = (pairs < 1) | (pairs > n_total)
    if bad.any():
        row = int(np.argwhere(bad.any(axis=1))[0, 0])
        raise ParseError(f"{a_path}:{row + 1}: node id {pairs[row].tolist()} not in graph indicator")

    graph_ids = np.unique(indicator)
    if len(labels) != len(graph_ids):
        raise ParseError(f"{len(labels)} labels for {len(graph_ids)} graphs")
    # local index of each global node inside its graph
    order = np.argsort(indicator, kind="stable")
    local = np.empty(n_total, dtype=np.int64)
    starts = np.searchsorted(indicator[order], graph_ids)
    counts = np.diff(np.append(starts, n_total))
    for gid_pos, (s, c) in enumerate(zip(starts, counts)):
        local[order[s:s + c]] = np.arange(c)

    src, dst = pairs[:, 0] - 1, pairs[:, 1] - 1
    owner = indicator[src]
    if (owner != indicator[dst]).any():
        row = int(np.argwhere(owner != indicator[dst])[0, 0])
        raise ParseError(f"{a_path}:{row + 1}: edge joins two different graphs")
    keep = src != dst
    if (~keep).any():
        logger.warning("dropped %d self-loop(s) in %s", int((~keep).sum()), a_path)
    src, dst, owner = src[keep], dst[keep], owner[keep]

    by_graph = np.argsort(owner, kind="stable")
    edge_starts = np.searchsorted(owner[by_graph], graph_ids)
    edge_ends = np.searchsorted(owner[by_graph], graph_ids, side="right")
    graphs = []
    for k, gid in enumerate(graph_ids):
        sel = by_graph[edge_starts[k]:edge_ends[k]]
        edges = np.stack([local[src[sel]], local[dst[sel]]], axis=1)
        edges = np.sort(edges, axis=1)
        graphs.append(Graph.from_edges(int(counts[k]), np.unique(edges, axis=0), int(labels[k])))
    return GraphCorpus(graphs, name=prefix)


def load_corpus(path: str, fmt: str = "tudataset") -> GraphCorpus:
    """Load a corpus from a TUDataset folder or from a folder of ``*.txt`` / ``*.edges`` edge lists."""
    if fmt == "tudataset":
        return parse_tudataset(path)
    if fmt == "edgelist":
        if os.path.isfile(path):
            return GraphCorpus([load_edge_list(path)], name=os.path.basename(path))
        files = sorted(f for f in os.listdir(path) if f.endswith((".txt", ".edges")))
        if not files:
            raise FileNotFoundError(f"no edge-list files in {path}")
        graphs = [load_edge_list(os.path.join(path, f)) for f in files]
        return GraphCorpus(graphs, name=os.path.basename(os.path.normpath(path)))
    raise ValueError(f"unknown corpus format {fmt!r}")


def degree_measure(g: Graph) -> NodeMeasure:
    """Normalized degrees deg_i / (2|E|); edgeless graphs get the uniform measure."""
    deg = g.degrees()
    total = deg.sum()
    if total == 0:
        logger.warning("graph without edges: using the uniform node measure")
        return NodeMeasure.uniform(g.node_count)
    return NodeMeasure(deg / total)


def generate_er(n: int, p: float, seed: int) -> Graph:
    """Erdos-Renyi G(n, p), deterministic for a given seed."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    rng = np.random.default_rng(seed)
    iu = np.triu_indices(n, k=1)
    hit = rng.random(len(iu[0])) < p
    return Graph.from_edges(n, np.stack([iu[0][hit], iu[1][hit]], axis=1))


def complete_graph(n: int, label: Optional[int] = None) -> Graph:
    adj = np.ones((n, n), dtype=np.int8)
    np.fill_diagonal(adj, 0)
    return Graph(adj, label)


def empty_graph(n: int, label: Optional[int] = None) -> Graph:
    return Graph(np.zeros((n, n), dtype=np.int8), label)


def path_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def cycle_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def star_graph(leaves: int, center: int = 0) -> Graph:
    """Star with ``leaves`` leaves; the hub sits at index ``center``."""
    n = leaves + 1
    return Graph.from_edges(n, [(center, v) for v in range(n) if v != center])


def encode_labels(corpus: GraphCorpus) -> GraphCorpus:
    """Map arbitrary integer labels onto 0..K-1 in sorted order."""
    if any(g.label is None for g in corpus):
        raise ValueError("every graph needs a label")
    classes = sorted(set(corpus.labels))
    index = {c: i for i, c in enumerate(classes)}
    return GraphCorpus([Graph(g.adjacency, index[g.label]) for g in corpus], corpus.name)
