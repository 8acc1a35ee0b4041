"""Toy classifier trained with cross-entropy plus a weighted graphon-reconstruction term."""
import logging
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Tuple

import numpy as np

from .basis import (BasisSet, CoefficientEncoder, FitConfig, _mirror, init_bases, loss_and_grads, softmax,
                    structural_features)
from .graph_io import Graph, GraphCorpus
from .graphon import StepGraphon

logger = logging.getLogger(__name__)


class ToyClassifier:
    """Linear softmax head over structural features: K classes, F features."""

    def __init__(self, weight: np.ndarray, bias: np.ndarray):
        self.weight = np.array(weight, dtype=np.float64)
        self.bias = np.array(bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ValueError("classifier weight must be (K, F) and bias (K,)")
        if not (np.isfinite(self.weight).all() and np.isfinite(self.bias).all()):
            raise ValueError("classifier parameters must be finite")

    @classmethod
    def zeros(cls, classes: int, feature_dim: int) -> "ToyClassifier":
        return cls(np.zeros((classes, feature_dim)), np.zeros(classes))

    @property
    def classes(self) -> int:
        return self.weight.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.weight.shape[1]

    def predict(self, x: np.ndarray) -> int:
        return int(np.argmax(self.weight @ x + self.bias))


@dataclass(frozen=True)
class JointConfig:
    """
    :param lam: weight of the reconstruction loss in the total
    :param fit: basis/encoder settings; fit.epochs is the number of joint epochs
    :param classes: number of labels K
    :param bases: basis count C
    :param basis_size: basis resolution M
    :param task_learning_rate: step size for the classifier
    """
    lam: float = 1.0
    fit: FitConfig = field(default_factory=FitConfig)
    classes: int = 2
    bases: int = 32
    basis_size: int = 50
    task_learning_rate: float = 0.5

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if self.classes < 1:
            raise ValueError("classes must be positive")
        if not self.task_learning_rate > 0:
            raise ValueError("task_learning_rate must be positive")


class EpochRecord(NamedTuple):
    task_loss: float
    recon_loss: float
    total_loss: float
    train_accuracy: float


def _ce_from_features(clf: ToyClassifier, x: np.ndarray, label: int) -> Tuple[float, np.ndarray, np.ndarray]:
    z = clf.weight @ x + clf.bias
    m = z.max()
    log_norm = m + np.log(np.exp(z - m).sum())
    p = softmax(z)
    p[label] -= 1.0
    return float(log_norm - z[label]), np.outer(p, x), p


def ce_loss(clf: ToyClassifier, g: Graph) -> Tuple[float, Tuple[np.ndarray, np.ndarray]]:
    """Softmax cross-entropy of ``g``'s label and its gradients w.r.t. (weight, bias)."""
    if g.label is None:
        raise ValueError("graph has no label")
    if not 0 <= g.label < clf.classes:
        raise ValueError(f"label {g.label} outside [0, {clf.classes})")
    loss, gw, gb = _ce_from_features(clf, structural_features(g, clf.feature_dim), g.label)
    return loss, (gw, gb)


def _check_labels(corpus: GraphCorpus, classes: int) -> None:
    for i, g in enumerate(corpus):
        if g.label is None or not 0 <= g.label < classes:
            raise ValueError(f"graph {i} has label {g.label!r}, expected an integer in [0, {classes})")


def _task_step(clf: ToyClassifier, feats: np.ndarray, labels: List[int], lr: float) -> Tuple[float, float]:
    # one full-batch step; returns the mean loss and accuracy measured before the step
    gw = np.zeros_like(clf.weight)
    gb = np.zeros_like(clf.bias)
    total, correct = 0.0, 0
    for x, y in zip(feats, labels):
        loss, dw, db = _ce_from_features(clf, x, y)
        total += loss
        gw += dw
        gb += db
        correct += clf.predict(x) == y
    n = len(labels)
    clf.weight -= lr * gw / n
    clf.bias -= lr * gb / n
    return total / n, correct / n


def train_classifier(corpus: GraphCorpus, classes: int, feature_dim: int, epochs: int,
                     learning_rate: float = 0.5) -> Tuple[ToyClassifier, List[Tuple[float, float]]]:
    """Cross-entropy only, full batch, zero initialization. History holds (loss, accuracy) per epoch."""
    _check_labels(corpus, classes)
    clf = ToyClassifier.zeros(classes, feature_dim)
    feats = [structural_features(g, feature_dim) for g in corpus]
    labels = [g.label for g in corpus]
    history = [_task_step(clf, feats, labels, learning_rate) for _ in range(epochs)]
    return clf, history


def train_joint(corpus: GraphCorpus, oracle: StepGraphon,
                cfg: Optional[JointConfig] = None) -> Tuple[ToyClassifier, BasisSet, CoefficientEncoder, List[EpochRecord]]:
    """
    Full-batch descent on task_loss + lam * recon_loss.

    Cross-entropy gradients move only the classifier; reconstruction gradients move only the
    encoder and bases. Both read the same structural features.
    """
    cfg = cfg or JointConfig()
    if len(corpus) == 0:
        raise ValueError("corpus is empty")
    _check_labels(corpus, cfg.classes)
    fc = cfg.fit
    clf = ToyClassifier.zeros(cfg.classes, fc.feature_dim)
    bases = init_bases(corpus, cfg.bases, cfg.basis_size, fc.seed)
    enc = CoefficientEncoder.zeros(cfg.bases, fc.feature_dim)
    feats = [structural_features(g, fc.feature_dim) for g in corpus]
    labels = [g.label for g in corpus]
    n = len(corpus)

    history = []
    for epoch in range(fc.epochs):
        g_logits = np.zeros_like(bases.logits)
        g_w = np.zeros_like(enc.weight)
        g_b = np.zeros_like(enc.bias)
        recon = 0.0
        for g in corpus:
            loss, dl, (dw, db) = loss_and_grads(bases, enc, g, oracle, fc.gw)
            recon += loss
            g_logits += dl
            g_w += dw
            g_b += db
        recon /= n
        task, acc = _task_step(clf, feats, labels, cfg.task_learning_rate)
        total = task + cfg.lam * recon
        if not np.isfinite(total) or not np.isfinite(g_logits).all():
            raise FloatingPointError(f"non-finite loss at epoch {epoch}: task={task}, recon={recon}")
        history.append(EpochRecord(task, recon, total, acc))
        if cfg.lam > 0:
            step = fc.learning_rate * cfg.lam / n
            if fc.train_bases:
                bases.logits = _mirror(bases.logits - step * g_logits)
            enc.weight -= step * g_w
            enc.bias -= step * g_b
        logger.debug("joint epoch %d task %.5g recon %.5g acc %.3f", epoch, task, recon, acc)
    return clf, bases, enc, history
