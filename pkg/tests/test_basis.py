import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from graphonkit.basis import (BasisSet, CoefficientEncoder, FitConfig, coefficients_from_features, fit,
                              fixed_plan_grads, fixed_plan_loss, init_bases, logit, loss_and_grads, reconstruct,
                              sigmoid, softmax, structural_features, trainable_parameter_count)
from graphonkit.graph_io import GraphCorpus, complete_graph, empty_graph, generate_er
from graphonkit.graphon import StepGraphon, sample_graph, uniform_step_graphon
from graphonkit.gw import round_to_marginals, solve_gw


def random_logits(rng, c, m, scale=2.0):
    v = rng.normal(scale=scale, size=(c, m, m))
    return (v + np.swapaxes(v, 1, 2)) / 2


def random_target(rng, d):
    v = rng.random((d, d))
    return (v + v.T) / 2


def central_difference(f, x, h=1e-5):
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        old = x[idx]
        x[idx] = old + h
        up = f()
        x[idx] = old - h
        down = f()
        x[idx] = old
        g[idx] = (up - down) / (2 * h)
    return g


def rel_err(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)


def test_init_from_complete_graphs_is_clamped_high():
    bases = init_bases(GraphCorpus([complete_graph(20)] * 3), 4, 10, seed=0)
    b = bases.bases()
    off = ~np.eye(10, dtype=bool)
    assert (b[:, off] >= 0.9).all()
    assert np.allclose(b[:, off], 0.95)


def test_init_from_empty_graph_is_floor():
    b = init_bases(GraphCorpus([empty_graph(8)]), 1, 5, seed=0).bases()
    assert np.allclose(b, 0.05)


def test_init_is_seeded():
    corpus = GraphCorpus([generate_er(15, 0.3, s) for s in range(5)])
    a = init_bases(corpus, 6, 8, seed=3).logits
    b = init_bases(corpus, 6, 8, seed=3).logits
    assert np.array_equal(a, b)


def test_basis_set_rejects_asymmetric():
    with pytest.raises(ValueError):
        BasisSet(np.arange(8.0).reshape(2, 2, 2))


def test_structural_features_complete_graph():
    x = structural_features(complete_graph(5), 4)
    assert x[0] == 1.0
    assert x[1] == pytest.approx(0.2)
    assert x[2:].tolist() == [1.0, 0.0]


def test_structural_features_empty_graph():
    x = structural_features(empty_graph(4), 5)
    assert x[0] == 0.0
    assert x[1] == pytest.approx(0.25)
    assert x[2:].sum() == pytest.approx(1.0)


def test_coefficients_examples():
    enc = CoefficientEncoder.zeros(4, 6)
    assert np.allclose(coefficients_from_features(enc, np.ones(6)), 0.25)
    bias = np.zeros(4)
    bias[0] = 10
    alpha = coefficients_from_features(CoefficientEncoder(np.zeros((4, 6)), bias), np.ones(6))
    assert alpha[0] >= 0.999


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, 5, elements=st.floats(-50, 50)), arrays(np.float64, (3, 5), elements=st.floats(-5, 5)))
def test_coefficients_on_simplex(x, w):
    alpha = coefficients_from_features(CoefficientEncoder(w, np.zeros(3)), x)
    assert (alpha >= 0).all() and abs(alpha.sum() - 1) <= 1e-9


def test_reconstruct_examples():
    rng = np.random.default_rng(0)
    one = BasisSet(random_logits(rng, 1, 5))
    assert np.array_equal(reconstruct(one, np.array([1.0])).values, one.bases()[0])
    consts = BasisSet(np.stack([np.full((3, 3), logit(0.2)), np.full((3, 3), logit(0.6))]))
    assert np.allclose(reconstruct(consts, np.array([0.5, 0.5])).values, 0.4)
    with pytest.raises(ValueError):
        reconstruct(consts, np.array([0.7, 0.7]))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), st.integers(1, 7), st.integers(0, 2 ** 31))
def test_reconstruction_is_symmetric_interior_and_convex(c, m, seed):
    rng = np.random.default_rng(seed)
    bases = BasisSet(random_logits(rng, c, m))
    alpha = softmax(rng.normal(size=c))
    w = reconstruct(bases, alpha).values
    b = bases.bases()
    assert np.array_equal(w, w.T)
    assert (w > 0).all() and (w < 1).all()
    assert (w >= b.min(axis=0) - 1e-12).all() and (w <= b.max(axis=0) + 1e-12).all()


def test_parameter_count():
    rng = np.random.default_rng(0)
    c, m, f = 7, 9, 5
    bases = BasisSet(random_logits(rng, c, m))
    enc = CoefficientEncoder.zeros(c, f)
    assert trainable_parameter_count(bases, enc) == c * m * (m + 1) // 2 + c * f + c


def test_loss_at_target_is_minimal():
    rng = np.random.default_rng(1)
    target = np.clip(random_target(rng, 6), 0.06, 0.94)
    oracle = StepGraphon(target)
    bases = BasisSet(logit(target)[None])
    enc = CoefficientEncoder.zeros(1, 6)
    loss, g_logits, (g_w, g_b) = loss_and_grads(bases, enc, generate_er(10, 0.5, 0), oracle)
    assert loss <= 1e-6
    assert max(np.abs(g_logits).max(), np.abs(g_w).max(), np.abs(g_b).max()) <= 1e-4


@pytest.mark.parametrize("seed", range(5))
def test_gradients_match_central_differences(seed):
    rng = np.random.default_rng(seed)
    c, m, d, f = 2, 4, 4, 5
    logits = random_logits(rng, c, m, scale=1.0)
    weight, bias = rng.normal(size=(c, f)), rng.normal(size=c)
    x, target = rng.random(f), random_target(rng, d)
    plan = round_to_marginals(rng.random((d, m)) + 0.05, np.full(d, 1 / d), np.full(m, 1 / m))
    _, g_logits, g_w, g_b = fixed_plan_grads(logits, weight, bias, x, target, plan)

    def loss():
        return fixed_plan_loss(logits, weight, bias, x, target, plan)

    # the logits are stored symmetric: perturb both mirror entries together
    sym = np.zeros_like(logits)
    for k, i, j in np.ndindex(logits.shape):
        if i > j:
            continue
        old = logits[k, i, j]
        vals = []
        for h in (1e-5, -1e-5):
            logits[k, i, j] = logits[k, j, i] = old + h
            vals.append(loss())
        logits[k, i, j] = logits[k, j, i] = old
        sym[k, i, j] = sym[k, j, i] = (vals[0] - vals[1]) / 2e-5
    analytic_sym = g_logits + np.swapaxes(g_logits, 1, 2) - g_logits * np.eye(m)
    assert rel_err(analytic_sym, sym) <= 1e-4
    assert rel_err(g_w, central_difference(loss, weight)) <= 1e-4
    assert rel_err(g_b, central_difference(loss, bias)) <= 1e-4


def test_gradient_vanishes_for_zero_coefficient():
    rng = np.random.default_rng(2)
    logits = random_logits(rng, 2, 4)
    bias = np.array([0.0, -1000.0])
    target = random_target(rng, 4)
    plan = np.full((4, 4), 1 / 16)
    _, g_logits, _, _ = fixed_plan_grads(logits, np.zeros((2, 3)), bias, np.ones(3), target, plan)
    assert np.array_equal(g_logits[1], np.zeros((4, 4)))


def test_gradients_are_symmetric():
    rng = np.random.default_rng(3)
    logits = random_logits(rng, 3, 5)
    plan = round_to_marginals(rng.random((6, 5)), np.full(6, 1 / 6), np.full(5, 1 / 5))
    _, g_logits, _, _ = fixed_plan_grads(logits, rng.normal(size=(3, 4)), np.zeros(3), rng.random(4),
                                         random_target(rng, 6), plan)
    assert np.array_equal(g_logits, np.swapaxes(g_logits, 1, 2))


def _two_basis_problem(seed, mix=(0.5, 0.5), m=6):
    rng = np.random.default_rng(seed)
    logits = random_logits(rng, 2, m)
    bases = BasisSet(logits)
    oracle = reconstruct(bases, np.array(mix))
    corpus = GraphCorpus([sample_graph(oracle, 12, 100 * seed + i) for i in range(3)])
    return bases, oracle, corpus


def test_representable_oracle_is_fit():
    bases, oracle, corpus = _two_basis_problem(0)
    enc = CoefficientEncoder(np.zeros((2, 8)), np.array([1.0, -1.0]))
    cfg = FitConfig(epochs=100, train_bases=False, learning_rate=0.5)
    fitted, _, history = fit(corpus, oracle, 2, 6, cfg, bases=bases, encoder=enc)
    assert history[-1] <= 1e-3
    assert np.array_equal(fitted.logits, bases.logits)


def test_zero_epoch_fit_returns_initialization():
    corpus = GraphCorpus([generate_er(12, 0.4, s) for s in range(3)])
    oracle = uniform_step_graphon(np.full((4, 4), 0.4))
    cfg = FitConfig(epochs=0, seed=5)
    bases, enc, history = fit(corpus, oracle, 3, 4, cfg)
    assert history == []
    assert np.array_equal(bases.logits, init_bases(corpus, 3, 4, 5).logits)
    assert not enc.weight.any() and not enc.bias.any()


def test_fit_keeps_bases_symmetric_and_is_deterministic():
    corpus = GraphCorpus([generate_er(14, 0.2 + 0.05 * s, s) for s in range(4)])
    oracle = uniform_step_graphon(np.full((5, 5), 0.35))
    cfg = FitConfig(epochs=3, seed=1)
    b1, e1, h1 = fit(corpus, oracle, 3, 5, cfg)
    b2, e2, h2 = fit(corpus, oracle, 3, 5, cfg)
    assert np.array_equal(b1.logits, np.swapaxes(b1.logits, 1, 2))
    assert h1 == h2 and np.array_equal(b1.logits, b2.logits) and np.array_equal(e1.weight, e2.weight)


def test_small_steps_descend_with_plan_fixed():
    rng = np.random.default_rng(4)
    corpus = GraphCorpus([generate_er(14, p, s) for s, p in enumerate(rng.uniform(0.1, 0.7, 12))])
    oracle = StepGraphon(random_target(rng, 6))
    bases = init_bases(corpus, 3, 5, seed=0)
    enc = CoefficientEncoder(rng.normal(size=(3, 8)), np.zeros(3))
    lr, ok, steps = 1e-3, 0, 0
    for _ in range(2):
        for g in corpus:
            x = structural_features(g, 8)
            alpha = coefficients_from_features(enc, x)
            w_hat = reconstruct(bases, alpha)
            plan = solve_gw(oracle.values, oracle.measure, w_hat.values, w_hat.measure).plan.matrix
            before, g_l, g_w, g_b = fixed_plan_grads(bases.logits, enc.weight, enc.bias, x, oracle.values, plan)
            bases.logits = bases.logits - lr * g_l
            enc.weight -= lr * g_w
            enc.bias -= lr * g_b
            after = fixed_plan_loss(bases.logits, enc.weight, enc.bias, x, oracle.values, plan)
            ok += after <= before
            steps += 1
    assert ok >= 0.9 * steps


def test_sigmoid_logit_inverse():
    p = np.linspace(0.01, 0.99, 50)
    assert np.allclose(sigmoid(logit(p)), p, atol=1e-12)


def test_fit_config_validation():
    with pytest.raises(ValueError):
        FitConfig(learning_rate=0)
    with pytest.raises(ValueError):
        FitConfig(feature_dim=2)
    with pytest.raises(ValueError):
        fit(GraphCorpus([complete_graph(3)]), uniform_step_graphon(np.eye(2)), 2, 2,
            bases=BasisSet(np.zeros((3, 2, 2))), encoder=CoefficientEncoder.zeros(2, 8))
