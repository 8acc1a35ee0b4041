"""Corpus-level graphon estimation as a structured Gromov-Wasserstein barycenter."""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .graph_io import GraphCorpus, NodeMeasure, degree_measure
from .graphon import StepGraphon
from .gw import GwConfig, solve_gw

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OracleConfig:
    """
    :param oracle_size: number of blocks D of the estimated graphon
    :param gw: solver settings for every graph-to-barycenter coupling
    :param barycenter_iters: number of alternating plan / graphon updates
    :param seed: seed of the random initial graphon
    """
    oracle_size: int = 100
    # fewer proximal steps than the solver default: sharper per-graph plans fit sampling noise
    gw: GwConfig = field(default_factory=lambda: GwConfig(outer_iters=20))
    barycenter_iters: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.oracle_size < 2:
            raise ValueError("oracle_size must be at least 2")
        if self.barycenter_iters < 1:
            raise ValueError("barycenter_iters must be positive")


def merged_measure(corpus: GraphCorpus, size: int) -> NodeMeasure:
    """Pool the normalized degrees of all graphs, sort them descending and interpolate to ``size`` cells."""
    if len(corpus) == 0:
        raise ValueError("corpus is empty")
    pooled = np.sort(np.concatenate([degree_measure(g).weights for g in corpus]))[::-1]
    n = pooled.size
    # sample the sorted profile at cell centres, clamped to the end points
    pos = np.clip((np.arange(size) + 0.5) * n / size - 0.5, 0.0, n - 1)
    vals = np.interp(pos, np.arange(n), pooled)
    return NodeMeasure.normalized(vals)


def barycenter_update(plans: List[np.ndarray], adjacencies: List[np.ndarray], mu_w: np.ndarray) -> np.ndarray:
    """Average of T^T A T over the corpus, divided by mu_W mu_W^T, symmetrized and clipped to [0, 1]."""
    if (mu_w <= 0).any():
        raise ValueError("barycenter update needs a strictly positive block measure")
    acc = np.zeros((mu_w.size, mu_w.size))
    for t, a in zip(plans, adjacencies):
        acc += t.T @ a @ t
    w = acc / len(plans) / np.outer(mu_w, mu_w)
    w = np.clip((w + w.T) / 2, 0.0, 1.0)
    return np.triu(w) + np.triu(w, 1).T


def estimate_oracle(corpus: GraphCorpus, cfg: Optional[OracleConfig] = None, workers: int = 1) -> StepGraphon:
    """
    Alternate GW couplings of every graph to the current graphon with a closed-form barycenter update.

    :param corpus: graphs to summarize
    :param cfg: estimation settings
    :param workers: thread count for the per-graph solves; results are reduced in corpus order
    :return: D x D step graphon carrying the merged degree measure
    """
    cfg = cfg or OracleConfig()
    d = cfg.oracle_size
    mu = merged_measure(corpus, d)
    if (mu.weights <= 0).any():
        logger.warning("merged degree measure has empty cells, using a uniform block measure instead")
        mu = NodeMeasure.uniform(d)
    rng = np.random.default_rng(cfg.seed)
    w = rng.random((d, d))
    w = (w + w.T) / 2
    w = np.triu(w) + np.triu(w, 1).T

    adjs = [g.dense() for g in corpus]
    measures = [degree_measure(g) for g in corpus]

    for it in range(cfg.barycenter_iters):
        def solve(i, w=w):
            return solve_gw(adjs[i], measures[i], w, mu, cfg.gw).plan.matrix

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                plans = list(pool.map(solve, range(len(adjs))))
        else:
            plans = [solve(i) for i in range(len(adjs))]
        w = barycenter_update(plans, adjs, mu.weights)
        assert np.array_equal(w, w.T) and w.min() >= 0 and w.max() <= 1
        logger.debug("barycenter sweep %d done, mean value %.4f", it, w.mean())
    return StepGraphon(w, mu)
