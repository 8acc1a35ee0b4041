"""Learnable graphon bases mixed by graph-dependent softmax coefficients, fit by fixed-plan GW descent."""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .graph_io import Graph, GraphCorpus
from .graphon import StepGraphon, empirical_graphon
from .gw import GwConfig, gw_cost_matrix, solve_gw

logger = logging.getLogger(__name__)

CLAMP_LO, CLAMP_HI = 0.05, 0.95


def sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def logit(p: np.ndarray) -> np.ndarray:
    return np.log(p) - np.log1p(-p)


def _mirror(m: np.ndarray) -> np.ndarray:
    # rebuild exact symmetry from the upper triangle (works on stacks of matrices too)
    upper = np.triu(m)
    return upper + np.swapaxes(np.triu(m, 1), -1, -2)


class BasisSet:
    """
    C symmetric M x M logit matrices; the bases themselves are their sigmoids.

    :param logits: (C, M, M) array, each slice symmetric
    """

    def __init__(self, logits: np.ndarray):
        logits = np.array(logits, dtype=np.float64)
        if logits.ndim != 3 or logits.shape[1] != logits.shape[2] or logits.shape[0] < 1:
            raise ValueError(f"logits must have shape (C, M, M), got {logits.shape}")
        if np.abs(logits - np.swapaxes(logits, 1, 2)).max() > 1e-12:
            raise ValueError("each logits matrix must be symmetric")
        self.logits = _mirror(logits)

    @property
    def count(self) -> int:
        return self.logits.shape[0]

    @property
    def basis_size(self) -> int:
        return self.logits.shape[1]

    def bases(self) -> np.ndarray:
        return sigmoid(self.logits)

    def parameter_count(self) -> int:
        m = self.basis_size
        return self.count * m * (m + 1) // 2

    def copy(self) -> "BasisSet":
        return BasisSet(self.logits.copy())

    def to_graphons(self) -> List[StepGraphon]:
        return [StepGraphon(b) for b in self.bases()]


class CoefficientEncoder:
    """Linear map from structural features to C logits, followed by a softmax."""

    def __init__(self, weight: np.ndarray, bias: np.ndarray):
        self.weight = np.array(weight, dtype=np.float64)
        self.bias = np.array(bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ValueError("encoder weight must be (C, F) and bias (C,)")

    @classmethod
    def zeros(cls, count: int, feature_dim: int) -> "CoefficientEncoder":
        return cls(np.zeros((count, feature_dim)), np.zeros(count))

    @property
    def feature_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def count(self) -> int:
        return self.weight.shape[0]

    def parameter_count(self) -> int:
        return self.weight.size + self.bias.size

    def copy(self) -> "CoefficientEncoder":
        return CoefficientEncoder(self.weight.copy(), self.bias.copy())


@dataclass(frozen=True)
class FitConfig:
    """
    :param learning_rate: step size of plain gradient descent
    :param epochs: passes over the corpus
    :param gw: solver settings for the per-step plan
    :param seed: seed for basis initialization
    :param feature_dim: length of the structural feature vector fed to the encoder
    :param train_bases: when False only the encoder moves
    """
    learning_rate: float = 0.05
    epochs: int = 100
    gw: GwConfig = field(default_factory=GwConfig)
    seed: int = 0
    feature_dim: int = 8
    train_bases: bool = True

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")
        if self.feature_dim < 3:
            raise ValueError("feature_dim must be at least 3")


def init_bases(corpus: GraphCorpus, count: int, size: int, seed: int) -> BasisSet:
    """Each basis starts from the degree-sorted empirical graphon of a randomly chosen graph."""
    if len(corpus) == 0:
        raise ValueError("corpus is empty")
    if count < 1 or size < 1:
        raise ValueError("count and size must be positive")
    rng = np.random.default_rng(seed)
    picks = rng.integers(0, len(corpus), size=count)
    logits = np.empty((count, size, size))
    for k, i in enumerate(picks):
        v = empirical_graphon(corpus[int(i)], size).values
        logits[k] = logit(np.clip(v, CLAMP_LO, CLAMP_HI))
    return BasisSet(logits)


def structural_features(g: Graph, dim: int) -> np.ndarray:
    """
    (edge density, mean normalized degree, histogram of normalized degrees over dim - 2 bins).

    Normalized degree is deg / 2|E| with a uniform fallback for edgeless graphs; the histogram
    holds node fractions over equal-width bins of [0, 1], the last bin closed.
    """
    if dim < 3:
        raise ValueError("feature dimension must be at least 3")
    n = g.node_count
    m = g.edge_count
    density = 2.0 * m / (n * (n - 1)) if n > 1 else 0.0
    deg = g.degrees().astype(np.float64)
    norm = deg / (2.0 * m) if m > 0 else np.full(n, 1.0 / n)
    bins = dim - 2
    idx = np.minimum((norm * bins).astype(int), bins - 1)
    hist = np.bincount(idx, minlength=bins) / n
    return np.concatenate([[density, norm.mean()], hist])


def softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max())
    return e / e.sum()


def coefficients_from_features(enc: CoefficientEncoder, x: np.ndarray) -> np.ndarray:
    alpha = softmax(enc.weight @ x + enc.bias)
    assert abs(alpha.sum() - 1.0) <= 1e-9 and (alpha >= 0).all()
    return alpha


def encode_coefficients(enc: CoefficientEncoder, g: Graph) -> np.ndarray:
    return coefficients_from_features(enc, structural_features(g, enc.feature_dim))


def mix_bases(bases: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    return _mirror(np.tensordot(alpha, bases, axes=1))


def reconstruct(bases: BasisSet, alpha: np.ndarray) -> StepGraphon:
    """Convex combination sum_k alpha_k sigmoid(logits_k) on a uniform M-block grid."""
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.shape != (bases.count,):
        raise ValueError(f"expected {bases.count} coefficients, got shape {alpha.shape}")
    if (alpha < 0).any() or abs(alpha.sum() - 1.0) > 1e-9:
        raise ValueError("coefficients must be nonnegative and sum to 1")
    return StepGraphon(mix_bases(bases.bases(), alpha))


def fixed_plan_loss(logits: np.ndarray, weight: np.ndarray, bias: np.ndarray, x: np.ndarray,
                    target: np.ndarray, plan: np.ndarray) -> float:
    """Reconstruction loss as a plain function of the parameters; the plan is held fixed."""
    alpha = softmax(weight @ x + bias)
    w_hat = np.tensordot(alpha, sigmoid(logits), axes=1)
    return gw_cost_matrix(target, w_hat, plan)


def fixed_plan_grads(logits: np.ndarray, weight: np.ndarray, bias: np.ndarray, x: np.ndarray,
                     target: np.ndarray, plan: np.ndarray) -> Tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    """
    Loss and analytic gradients w.r.t. logits, encoder weight and bias for a fixed plan.

    With c the plan's column sums, dL/dW_hat = -2 (T^T A T - W_hat * c c^T).
    """
    b = sigmoid(logits)
    alpha = softmax(weight @ x + bias)
    w_hat = np.tensordot(alpha, b, axes=1)
    loss = gw_cost_matrix(target, w_hat, plan)
    c = plan.sum(axis=0)
    g_hat = -2.0 * (plan.T @ target @ plan - w_hat * np.outer(c, c))
    g_hat = 0.5 * (g_hat + g_hat.T)
    g_logits = alpha[:, None, None] * g_hat[None] * b * (1.0 - b)
    g_alpha = np.tensordot(b, g_hat, axes=([1, 2], [0, 1]))
    g_z = alpha * (g_alpha - alpha @ g_alpha)
    return loss, g_logits, np.outer(g_z, x), g_z


def loss_and_grads(bases: BasisSet, enc: CoefficientEncoder, g: Graph, oracle: StepGraphon,
                   gw: Optional[GwConfig] = None) -> Tuple[float, np.ndarray, Tuple[np.ndarray, np.ndarray]]:
    """
    Solve the plan between the oracle and the current reconstruction once, then differentiate
    the GW loss with that plan held fixed.

    :return: loss, (C, M, M) logits gradient, (weight gradient, bias gradient)
    """
    x = structural_features(g, enc.feature_dim)
    alpha = coefficients_from_features(enc, x)
    w_hat = reconstruct(bases, alpha)
    plan = solve_gw(oracle.values, oracle.measure, w_hat.values, w_hat.measure, gw).plan.matrix
    loss, g_logits, g_w, g_b = fixed_plan_grads(bases.logits, enc.weight, enc.bias, x, oracle.values, plan)
    return loss, g_logits, (g_w, g_b)


def fit(corpus: GraphCorpus, oracle: StepGraphon, count: int, size: int, cfg: Optional[FitConfig] = None,
        bases: Optional[BasisSet] = None,
        encoder: Optional[CoefficientEncoder] = None) -> Tuple[BasisSet, CoefficientEncoder, List[float]]:
    """
    Alternate plan solves and gradient steps, one step per graph per epoch.

    :param bases: starting bases; drawn with init_bases when omitted
    :param encoder: starting encoder; zeros when omitted
    :return: fitted bases, encoder and the mean loss of every epoch
    """
    cfg = cfg or FitConfig()
    if len(corpus) == 0:
        raise ValueError("corpus is empty")
    bases = bases.copy() if bases is not None else init_bases(corpus, count, size, cfg.seed)
    enc = encoder.copy() if encoder is not None else CoefficientEncoder.zeros(bases.count, cfg.feature_dim)
    if bases.count != enc.count:
        raise ValueError("encoder and basis counts differ")
    history = []
    for epoch in range(cfg.epochs):
        losses = []
        for g in corpus:
            loss, g_logits, (g_w, g_b) = loss_and_grads(bases, enc, g, oracle, cfg.gw)
            if not (np.isfinite(loss) and np.isfinite(g_logits).all() and np.isfinite(g_w).all()):
                raise FloatingPointError(f"non-finite loss or gradient at epoch {epoch} (loss={loss})")
            losses.append(loss)
            if cfg.train_bases:
                bases.logits = _mirror(bases.logits - cfg.learning_rate * g_logits)
            enc.weight -= cfg.learning_rate * g_w
            enc.bias -= cfg.learning_rate * g_b
        history.append(float(np.mean(losses)))
        logger.debug("fit epoch %d mean loss %.6g", epoch, history[-1])
    return bases, enc, history


def trainable_parameter_count(bases: BasisSet, enc: CoefficientEncoder) -> int:
    return bases.parameter_count() + enc.parameter_count()
