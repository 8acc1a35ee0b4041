"""Homomorphism densities, exact cut norm, counting-lemma checks and corpus statistics."""
import string
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import networkx as nx
import numpy as np

from .graph_io import Graph, GraphCorpus, complete_graph, cycle_graph, path_graph
from .graphon import StepGraphon, resample

MAX_MOTIF_NODES = 6
MAX_TERMS = 10 ** 9
MAX_CUT_SIZE = 25
# default common grid for density-gap reports; exact cut norms at 25 blocks take seconds
REPORT_SIZE = 16


@dataclass(frozen=True, eq=False)
class Motif:
    """A small connected simple graph used as the pattern F in t(F, .)."""
    graph: Graph
    name: str = ""

    def __post_init__(self):
        n = self.graph.node_count
        if n > MAX_MOTIF_NODES:
            raise ValueError(f"motifs are limited to {MAX_MOTIF_NODES} nodes, got {n}")
        if not _connected(self.graph):
            raise ValueError("motif must be connected")

    @property
    def nodes(self) -> int:
        return self.graph.node_count

    @property
    def edges(self) -> np.ndarray:
        return self.graph.edges()

    @property
    def edge_count(self) -> int:
        return self.graph.edge_count


def _connected(g: Graph) -> bool:
    n = g.node_count
    adj = g.dense() > 0
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    stack = [0]
    while stack:
        u = stack.pop()
        for v in np.flatnonzero(adj[u] & ~seen):
            seen[v] = True
            stack.append(int(v))
    return bool(seen.all())


def standard_motifs() -> List[Motif]:
    return [
        Motif(complete_graph(2), "K2"),
        Motif(path_graph(3), "P3"),
        Motif(complete_graph(3), "K3"),
        Motif(cycle_graph(4), "C4"),
        Motif(complete_graph(4), "K4"),
    ]


def _hom_sum(f: Motif, mat: np.ndarray, weights: Optional[np.ndarray]) -> float:
    # sum over all maps V(F) -> blocks of prod_edges mat[map(u), map(v)] (times node weights)
    letters = string.ascii_lowercase[:f.nodes]
    terms = [f"{letters[u]}{letters[v]}" for u, v in f.edges]
    operands = [mat] * len(terms)
    if weights is not None:
        terms += list(letters)
        operands += [weights] * f.nodes
    expr = ",".join(terms) + "->"
    return float(np.einsum(expr, *operands, optimize=True))


def hom_density_graph(f: Motif, g: Graph) -> float:
    """
    t(F, G) = hom(F, G) / |V_G|^|V_F|, the sum over every vertex map of the product of
    adjacency indicators along motif edges.
    """
    n = g.node_count
    if n ** f.nodes > MAX_TERMS:
        raise ValueError(f"{n}^{f.nodes} vertex maps exceed {MAX_TERMS}; use a sampling estimator instead")
    if f.edge_count == 0:
        return 1.0
    return _hom_sum(f, g.dense(), None) / float(n) ** f.nodes


def hom_density_graphon(f: Motif, w: StepGraphon) -> float:
    """Exact integral of prod_edges W(x_u, x_v) for a step graphon: block sums weighted by the measure."""
    d = w.size
    if d ** f.nodes > MAX_TERMS:
        raise ValueError(f"{d}^{f.nodes} block assignments exceed {MAX_TERMS}")
    return _hom_sum(f, w.values, w.measure.weights)


def cut_norm(delta: np.ndarray, row_measure: Optional[np.ndarray] = None,
             col_measure: Optional[np.ndarray] = None, chunk: int = 1 << 15) -> float:
    """
    Exact cut norm of a signed step function: max over block subsets S, T of |sum_{S x T} delta_ij mu_i nu_j|.

    For each S the best T keeps exactly the columns whose S-restricted sums share a sign, so only
    the 2^D choices of S are enumerated.
    """
    delta = np.asarray(delta, dtype=np.float64)
    n, d = delta.shape
    if max(n, d) > MAX_CUT_SIZE:
        raise ValueError(f"exact cut norm is limited to {MAX_CUT_SIZE} blocks per side")
    mu = np.full(n, 1.0 / n) if row_measure is None else np.asarray(row_measure, dtype=np.float64)
    nu = np.full(d, 1.0 / d) if col_measure is None else np.asarray(col_measure, dtype=np.float64)
    weighted = delta * mu[:, None] * nu[None, :]
    bits = 1 << np.arange(n)
    best = 0.0
    for start in range(0, 1 << n, chunk):
        ids = np.arange(start, min(start + chunk, 1 << n))
        subsets = ((ids[:, None] & bits[None, :]) > 0).astype(np.float64)
        cols = subsets @ weighted
        pos = np.maximum(cols, 0.0).sum(axis=1)
        neg = np.maximum(-cols, 0.0).sum(axis=1)
        best = max(best, float(pos.max()), float(neg.max()))
    return best


def _same_grid(w1: StepGraphon, w2: StepGraphon) -> None:
    if w1.size != w2.size:
        raise ValueError(f"graphon sizes differ: {w1.size} vs {w2.size}")
    if not np.allclose(w1.measure.weights, w2.measure.weights, rtol=0, atol=1e-12):
        raise ValueError("graphons must share the same block measure")


def counting_lemma_check(f: Motif, w1: StepGraphon, w2: StepGraphon, use_node_count: bool = False) -> Dict:
    """
    lhs = |t(F, w1) - t(F, w2)|, rhs = e(F) * cut_norm(w1 - w2).

    :param use_node_count: scale by the motif's node count instead of its edge count
    """
    _same_grid(w1, w2)
    lhs = abs(hom_density_graphon(f, w1) - hom_density_graphon(f, w2))
    m = w1.measure.weights
    cn = cut_norm(w1.values - w2.values, m, m)
    scale = f.nodes if use_node_count else f.edge_count
    rhs = scale * cn
    return {"lhs": lhs, "rhs": rhs, "holds": bool(lhs <= rhs + 1e-9)}


def motif_gap_report(oracle: StepGraphon, predicted: StepGraphon, motifs: Optional[Sequence[Motif]] = None,
                 size: Optional[int] = None) -> List[Dict]:
    """
    Density gaps between the oracle and a reconstruction for each motif, with the computable bound
    e(F) * cut norm next to them.

    Graphons on different grids (or with different measures) are both resampled to ``size`` blocks,
    by default the larger size capped at REPORT_SIZE.
    """
    motifs = list(motifs) if motifs is not None else standard_motifs()
    same = oracle.size == predicted.size and np.allclose(
        oracle.measure.weights, predicted.measure.weights, rtol=0, atol=1e-12)
    if size is None:
        size = min(max(oracle.size, predicted.size), REPORT_SIZE)
    if not same or size != oracle.size:
        oracle, predicted = resample(oracle, size), resample(predicted, size)
    m = oracle.measure.weights
    cn = cut_norm(oracle.values - predicted.values, m, m)
    report = []
    for f in motifs:
        lhs = abs(hom_density_graphon(f, oracle) - hom_density_graphon(f, predicted))
        report.append({
            "motif": f.name,
            "lhs": lhs,
            "rhs": f.edge_count * cn,
            "rhs_nodes": f.nodes * cn,
            "holds": bool(lhs <= f.edge_count * cn + 1e-9),
        })
    return report


def _to_nx(g: Graph) -> nx.Graph:
    h = nx.Graph()
    h.add_nodes_from(range(g.node_count))
    h.add_edges_from(map(tuple, g.edges().tolist()))
    return h


def graph_statistics(corpus: GraphCorpus) -> Dict[str, float]:
    """Corpus means of node count, edge count, density, transitivity, average degree and clustering."""
    if len(corpus) == 0:
        raise ValueError("corpus is empty")
    rows = []
    for g in corpus:
        h = _to_nx(g)
        n = g.node_count
        rows.append((n, g.edge_count, nx.density(h), nx.transitivity(h),
                     2.0 * g.edge_count / n if n else 0.0, nx.average_clustering(h)))
    mean = np.mean(np.array(rows, dtype=np.float64), axis=0)
    keys = ("nodes", "edges", "density", "transitivity", "average_degree", "average_clustering")
    return {k: float(v) for k, v in zip(keys, mean)}
