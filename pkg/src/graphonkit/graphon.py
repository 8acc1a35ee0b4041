"""Step-function graphons: construction, resampling, empirical estimates and sampling."""
import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .graph_io import Graph, NodeMeasure

_SYM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class StepGraphon:
    """
    A symmetric D x D grid of edge probabilities with a block measure.

    :param values: (D, D) array with entries in [0, 1], exactly symmetric
    :param measure: block widths; uniform when omitted
    """
    values: np.ndarray
    measure: Optional[NodeMeasure] = None

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != v.shape[1] or v.shape[0] < 1:
            raise ValueError(f"graphon values must be a nonempty square matrix, got {v.shape}")
        if not np.array_equal(v, v.T):
            raise ValueError("graphon values must be exactly symmetric")
        if not np.all(np.isfinite(v)) or v.min() < 0 or v.max() > 1:
            raise ValueError("graphon values must lie in [0, 1]")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        m = self.measure if self.measure is not None else NodeMeasure.uniform(v.shape[0])
        if len(m) != v.shape[0]:
            raise ValueError("measure length does not match graphon size")
        object.__setattr__(self, "measure", m)

    @property
    def size(self) -> int:
        return self.values.shape[0]

    def to_dict(self) -> dict:
        return {
            "size": self.size,
            "measure": self.measure.weights.tolist(),
            "values": self.values.ravel().tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "StepGraphon":
        d = int(data["size"])
        values = np.asarray(data["values"], dtype=np.float64).reshape(d, d)
        return cls(values, NodeMeasure(data["measure"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "StepGraphon":
        return cls.from_dict(json.loads(text))

    def to_csv(self) -> str:
        return "\n".join(",".join(repr(float(x)) for x in row) for row in self.values) + "\n"


def uniform_step_graphon(values, size: Optional[int] = None) -> StepGraphon:
    """
    Build a graphon with uniform block measure from a value matrix.

    Matrices asymmetric by more than 1e-12 are replaced by (V + V^T) / 2.
    """
    v = np.array(values, dtype=np.float64)
    if v.ndim == 0:
        v = v.reshape(1, 1)
    if size is not None and v.shape != (size, size):
        raise ValueError(f"expected a {size}x{size} matrix, got {v.shape}")
    bad = np.argwhere(~((v >= 0) & (v <= 1)))
    if len(bad):
        i, j = bad[0]
        raise ValueError(f"value at index ({i}, {j}) is {v[i, j]!r}, outside [0, 1]")
    if np.abs(v - v.T).max() > _SYM_TOL:
        v = (v + v.T) / 2
    else:
        v = np.triu(v) + np.triu(v, 1).T
    return StepGraphon(v)


def constant_graphon(p: float, size: int = 1) -> StepGraphon:
    return uniform_step_graphon(np.full((size, size), p))


def _interp_matrix(src: int, dst: int) -> np.ndarray:
    # (dst, src) weights evaluating a piecewise-linear signal at dst cell centers
    pos = (np.arange(dst) + 0.5) * src / dst - 0.5
    pos = np.clip(pos, 0.0, src - 1)
    lo = np.floor(pos).astype(int)
    hi = np.minimum(lo + 1, src - 1)
    frac = pos - lo
    out = np.zeros((dst, src))
    rows = np.arange(dst)
    np.add.at(out, (rows, lo), 1.0 - frac)
    np.add.at(out, (rows, hi), frac)
    return out


def resample_matrix(values: np.ndarray, target: int) -> np.ndarray:
    """Bilinear resampling of a square grid at ``target`` uniform cell centers per axis."""
    values = np.asarray(values, dtype=np.float64)
    if target < 1:
        raise ValueError("target size must be positive")
    if values.shape[0] == target:
        return values.copy()
    m = _interp_matrix(values.shape[0], target)
    return m @ values @ m.T


def resample(w: StepGraphon, target: int) -> StepGraphon:
    out = np.clip(resample_matrix(w.values, target), 0.0, 1.0)
    out = np.triu(out) + np.triu(out, 1).T
    return StepGraphon(out)


def sort_by_degree(g: Graph) -> Graph:
    """Relabel nodes by non-increasing degree; ties keep their original order."""
    order = np.argsort(-g.degrees(), kind="stable")
    return g.permute(order)


def empirical_graphon(g: Graph, size: int) -> StepGraphon:
    """Degree-sort ``g`` and resample its 0/1 adjacency to a ``size`` x ``size`` grid."""
    return resample(StepGraphon(sort_by_degree(g).dense()), size)


def block_of(w: StepGraphon, positions: np.ndarray) -> np.ndarray:
    """Block index of latent positions in [0, 1]; blocks are half-open, 1.0 goes to the last one."""
    edges = np.cumsum(w.measure.weights)[:-1]
    return np.searchsorted(edges, positions, side="right")


def sample_graph(w: StepGraphon, n: int, seed: int) -> Graph:
    """Draw latent positions uniformly, then each pair independently with the block probability."""
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    blocks = block_of(w, rng.random(n))
    probs = w.values[np.ix_(blocks, blocks)]
    iu = np.triu_indices(n, k=1)
    hit = rng.random(len(iu[0])) < probs[iu]
    return Graph.from_edges(n, np.stack([iu[0][hit], iu[1][hit]], axis=1))
