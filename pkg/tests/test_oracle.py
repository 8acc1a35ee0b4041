import time

import numpy as np
import pytest

from graphonkit.graph_io import Graph, GraphCorpus, complete_graph, cycle_graph, empty_graph, star_graph
from graphonkit.graphon import sample_graph, uniform_step_graphon
from graphonkit.gw import GwConfig
from graphonkit.oracle import OracleConfig, barycenter_update, estimate_oracle, merged_measure


def test_merged_measure_regular_corpus_is_uniform():
    m = merged_measure(GraphCorpus([cycle_graph(7)] * 3), 4)
    assert np.allclose(m.weights, 0.25)


def test_merged_measure_triangle():
    assert np.allclose(merged_measure(GraphCorpus([complete_graph(3)]), 3).weights, [1 / 3] * 3)


def test_merged_measure_star_by_hand():
    # sorted (.5, 1/6, 1/6, 1/6); centres of 2 cells sit at positions 0.5 and 2.5
    # -> (1/3, 1/6) -> renormalized (2/3, 1/3)
    m = merged_measure(GraphCorpus([star_graph(3)]), 2)
    assert np.allclose(m.weights, [2 / 3, 1 / 3], atol=1e-12)


def test_merged_measure_sums_to_one():
    rng = np.random.default_rng(0)
    w = uniform_step_graphon([[0.6, 0.1], [0.1, 0.4]])
    corpus = GraphCorpus([sample_graph(w, int(rng.integers(5, 30)), s) for s in range(10)])
    for d in (2, 7, 50, 400):
        weights = merged_measure(corpus, d).weights
        assert abs(weights.sum() - 1) <= 1e-9 and (weights >= 0).all()
        assert np.all(np.diff(weights) <= 1e-15)


def test_config_validation():
    with pytest.raises(ValueError):
        OracleConfig(oracle_size=1)
    with pytest.raises(ValueError):
        OracleConfig(barycenter_iters=0)


def test_barycenter_update_rejects_zero_measure():
    with pytest.raises(ValueError):
        barycenter_update([np.eye(2) / 2], [np.zeros((2, 2))], np.array([1.0, 0.0]))


def test_complete_graphs_give_dense_oracle():
    corpus = GraphCorpus([complete_graph(5)] * 4)
    w = estimate_oracle(corpus, OracleConfig(oracle_size=5, seed=1))
    off = w.values[~np.eye(5, dtype=bool)]
    assert off.mean() >= 0.8


def test_empty_graphs_give_zero_oracle():
    corpus = GraphCorpus([empty_graph(6), empty_graph(4)])
    w = estimate_oracle(corpus, OracleConfig(oracle_size=4, barycenter_iters=1))
    assert np.array_equal(w.values, np.zeros((4, 4)))


def test_zero_cells_fall_back_to_uniform(caplog):
    # isolated nodes make the tail of the pooled degree profile exactly zero
    g = Graph.from_edges(12, [(0, 1)])
    with caplog.at_level("WARNING"):
        w = estimate_oracle(GraphCorpus([g]), OracleConfig(oracle_size=6, barycenter_iters=1))
    assert np.allclose(w.measure.weights, 1 / 6)
    assert "uniform" in caplog.text


def _planted_corpus(n_graphs, seed):
    w = uniform_step_graphon([[0.8, 0.1], [0.1, 0.8]])
    return GraphCorpus([sample_graph(w, 30, 1000 * seed + i) for i in range(n_graphs)])


def test_output_is_symmetric_graphon_with_merged_measure():
    corpus = _planted_corpus(8, 0)
    cfg = OracleConfig(oracle_size=10, barycenter_iters=3)
    w = estimate_oracle(corpus, cfg)
    assert np.array_equal(w.values, w.values.T)
    assert w.values.min() >= 0 and w.values.max() <= 1
    assert np.allclose(w.measure.weights, merged_measure(corpus, 10).weights)


def test_deterministic_and_thread_independent():
    corpus = _planted_corpus(8, 1)
    cfg = OracleConfig(oracle_size=10, barycenter_iters=3, seed=4)
    w1 = estimate_oracle(corpus, cfg)
    w2 = estimate_oracle(corpus, cfg)
    w3 = estimate_oracle(corpus, cfg, workers=4)
    assert np.array_equal(w1.values, w2.values)
    assert np.array_equal(w1.values, w3.values)


def test_wall_time_at_most_quadratic_in_size():
    corpus = _planted_corpus(6, 2)
    times = {}
    for d in (20, 50, 100):
        cfg = OracleConfig(oracle_size=d, barycenter_iters=2, gw=GwConfig(outer_iters=10))
        t0 = time.perf_counter()
        estimate_oracle(corpus, cfg)
        times[d] = time.perf_counter() - t0
    for d in (50, 100):
        assert times[d] <= 3 * (d / 20) ** 2 * times[20] + 0.05
