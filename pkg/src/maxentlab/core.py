"""Linear softmax classifier, entropy functionals, and training objectives.

The model scores a raw input x through an optional linear feature map A and
a class-weight matrix W:

    phi = A x          (phi = x when no feature map is attached)
    p   = softmax(W phi)

Natural logarithms throughout, so entropies live in [0, ln C]. The training
objective is per-sample cross-entropy from the one-hot label minus gamma
times the prediction entropy, averaged over the batch; gamma = 0 is plain
cross-entropy and takes the same code path bit for bit. The label-smoothing
baseline scores the same probabilities against targets mixed with the
uniform distribution.

The analytic logit gradient of the combined objective is

    g_j = (p_j - y_j) + gamma * p_j * (ln p_j + H(p))

with H the entropy of p; parameter gradients follow by the chain rule and
are checked against central finite differences in the test suite.

Models are immutable during evaluation; every function here is pure, and
reductions use numpy's fixed pairwise summation so results do not depend on
thread count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._streams import ENTROPY_MC, derive_rng
from .datasets import LabeledDataset
from .errors import DomainError, NonFiniteError, ShapeError
from .mixtures import GaussianMixture, sample

# Probabilities are floored at this value inside logarithms; exp(-690) level
# underflow would otherwise produce -inf * 0 artifacts.
PROB_FLOOR = 1e-300


@dataclass(eq=False)
class LinearSoftmaxModel:
    """Classifier weights (C, n) plus an optional linear feature map (n, n_raw).

    ``feature_map is None`` means the identity map (raw inputs are already
    features, n_raw == n).
    """

    weights: np.ndarray
    feature_map: np.ndarray | None = None

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 2:
            raise ShapeError(f"weights must be (C, n), got shape {self.weights.shape}")
        if self.weights.shape[0] < 2:
            raise ShapeError("need at least 2 classes")
        if self.feature_map is not None:
            self.feature_map = np.asarray(self.feature_map, dtype=np.float64)
            if self.feature_map.ndim != 2 or self.feature_map.shape[0] != self.weights.shape[1]:
                raise ShapeError(
                    f"feature map must be ({self.weights.shape[1]}, n_raw), "
                    f"got {None if self.feature_map is None else self.feature_map.shape}"
                )
        if not np.isfinite(self.weights).all():
            raise NonFiniteError("model weights must be finite")
        if self.feature_map is not None and not np.isfinite(self.feature_map).all():
            raise NonFiniteError("feature map must be finite")

    @property
    def class_count(self) -> int:
        return self.weights.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def raw_dim(self) -> int:
        return self.feature_dim if self.feature_map is None else self.feature_map.shape[1]

    def w_l2(self) -> float:
        """sqrt(sum_i ||w_i||^2), the Frobenius norm of W."""
        return float(np.linalg.norm(self.weights))

    def w_inf(self) -> float:
        """max_i ||w_i||_2 over class rows."""
        return float(np.sqrt((self.weights**2).sum(axis=1).max()))

    def transform(self, raw: np.ndarray) -> np.ndarray:
        """Apply the feature map to a batch of raw rows."""
        if self.feature_map is None:
            return raw
        return raw @ self.feature_map.T

    def copy(self) -> "LinearSoftmaxModel":
        fm = None if self.feature_map is None else self.feature_map.copy()
        return LinearSoftmaxModel(self.weights.copy(), fm)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Stable softmax of a single logit vector (max subtracted before exp)."""
    z = np.asarray(logits, dtype=np.float64)
    if not np.isfinite(z).all():
        raise NonFiniteError("logits must be finite")
    shifted = z - z.max()
    e = np.exp(shifted)
    return e / e.sum()


def softmax_batch(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    if not np.isfinite(z).all():
        raise NonFiniteError("logits must be finite")
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def predict_proba(model: LinearSoftmaxModel, x: np.ndarray) -> np.ndarray:
    """Class probability vector for one raw input."""
    v = np.asarray(x, dtype=np.float64)
    if v.shape != (model.raw_dim,):
        raise ShapeError(f"input must have shape ({model.raw_dim},), got {v.shape}")
    if not np.isfinite(v).all():
        raise NonFiniteError("input contains non-finite values")
    phi = v if model.feature_map is None else model.feature_map @ v
    return softmax(model.weights @ phi)


def predict_proba_batch(model: LinearSoftmaxModel, raw: np.ndarray) -> np.ndarray:
    x = np.asarray(raw, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.raw_dim:
        raise ShapeError(f"batch must be (N, {model.raw_dim}), got {x.shape}")
    if not np.isfinite(x).all():
        raise NonFiniteError("batch contains non-finite values")
    return softmax_batch(model.transform(x) @ model.weights.T)


def entropy(p: np.ndarray) -> float:
    """Shannon entropy -sum p ln p in nats, with 0 ln 0 = 0, clamped to [0, ln C]."""
    q = np.asarray(p, dtype=np.float64)
    terms = np.where(q > 0.0, q * np.log(np.maximum(q, PROB_FLOOR)), 0.0)
    h = -float(terms.sum())
    return min(max(h, 0.0), float(np.log(q.shape[-1])))


def entropy_batch(p: np.ndarray) -> np.ndarray:
    q = np.asarray(p, dtype=np.float64)
    # q * log(max(q, floor)) is exactly 0 at q = 0, matching the convention
    h = -(q * np.log(np.maximum(q, PROB_FLOOR))).sum(axis=1)
    return np.clip(h, 0.0, float(np.log(q.shape[1])))


def empirical_mean_entropy(model: LinearSoftmaxModel, dataset: LabeledDataset) -> float:
    """(1/N) sum_i H[p(.|x_i)] over the dataset."""
    if dataset.size == 0:
        raise ShapeError("dataset is empty")
    p = predict_proba_batch(model, dataset.features)
    return float(entropy_batch(p).mean())


def expected_entropy_mc(
    model: LinearSoftmaxModel,
    mixture: GaussianMixture,
    draws: int,
    seed: int,
) -> tuple[float, float]:
    """Monte-Carlo estimate of the expected prediction entropy under the mixture.

    Returns (estimate, standard error of the mean). The draws come from a
    stream derived from ``seed`` and are independent of any dataset stream.
    This is the hot loop of bound verification, so the feature draw and the
    logit map are fused per mixture component: with spectral factor L_c and
    effective weights V = W A, logits are V mu_c + (z L_c') V' without ever
    materializing the features.
    """
    if draws < 100:
        raise DomainError(f"draws must be >= 100, got {draws}")
    from .mixtures import spectral_factor, validate

    validate(mixture)
    rng = derive_rng(seed, ENTROPY_MC)
    v = model.weights if model.feature_map is None else model.weights @ model.feature_map
    if v.shape[1] != mixture.dim:
        raise ShapeError(f"mixture dim {mixture.dim} does not match model input {v.shape[1]}")
    weights = mixture.weights / mixture.weights.sum()
    labels = rng.choice(mixture.count, size=draws, p=weights)
    z = rng.standard_normal((draws, mixture.dim))
    h = np.empty(draws, dtype=np.float64)
    for c in range(mixture.count):
        idx = np.nonzero(labels == c)[0]
        if idx.size == 0:
            continue
        logit_map = (spectral_factor(mixture.covariances[c]).T @ v.T)
        logits = z[idx] @ logit_map + v @ mixture.means[c]
        h[idx] = _entropy_from_logits(logits)
    # the mean of a sample lies in its hull; clamping removes summation round-off
    # so a constant integrand is estimated exactly with zero standard error
    low, high = float(h.min()), float(h.max())
    estimate = float(min(max(h.mean(), low), high))
    std = 0.0 if low == high else float(h.std(ddof=1))
    return estimate, std / float(np.sqrt(draws))


def _entropy_from_logits(logits: np.ndarray) -> np.ndarray:
    """H(softmax(z)) = logsumexp(z) - sum p * z, one log per row."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    total = e.sum(axis=1)
    h = np.log(total) - (e * shifted).sum(axis=1) / total
    return np.clip(h, 0.0, float(np.log(logits.shape[1])))


def _sample_with_rng(mixture: GaussianMixture, count: int, rng: np.random.Generator) -> np.ndarray:
    """Feature-only sampling on a caller-provided generator (no label bookkeeping)."""
    from .mixtures import spectral_factor, validate

    validate(mixture)
    labels = rng.choice(mixture.count, size=count, p=mixture.weights / mixture.weights.sum())
    z = rng.standard_normal((count, mixture.dim))
    x = np.empty((count, mixture.dim), dtype=np.float64)
    for c in range(mixture.count):
        idx = np.nonzero(labels == c)[0]
        if idx.size:
            x[idx] = mixture.means[c] + z[idx] @ spectral_factor(mixture.covariances[c]).T
    return x


def _check_labels(dataset: LabeledDataset, class_count: int) -> None:
    if dataset.size == 0:
        raise ShapeError("batch is empty")
    if int(dataset.labels.max(initial=0)) >= class_count:
        raise ShapeError(
            f"label {int(dataset.labels.max())} out of range for {class_count} classes"
        )


def _loss_terms(
    model: LinearSoftmaxModel, features: np.ndarray, labels: np.ndarray, gamma: float
) -> np.ndarray:
    p = predict_proba_batch(model, features)
    idx = np.arange(labels.shape[0])
    ce = -np.log(np.maximum(p[idx, labels], PROB_FLOOR))
    if gamma == 0.0:
        return ce
    return ce - gamma * entropy_batch(p)


def maxent_loss(model: LinearSoftmaxModel, batch: LabeledDataset, gamma: float) -> float:
    """Mean over the batch of [-ln p_y(x) - gamma H(p(x))]."""
    if gamma < 0:
        raise DomainError(f"gamma must be >= 0, got {gamma}")
    _check_labels(batch, model.class_count)
    value = float(_loss_terms(model, batch.features, batch.labels, gamma).mean())
    if not np.isfinite(value):
        raise NonFiniteError(f"loss is not finite: {value}")
    return value


def label_smoothing_loss(model: LinearSoftmaxModel, batch: LabeledDataset, epsilon: float) -> float:
    """Cross-entropy against targets (1 - eps) * onehot + eps / C."""
    if not 0.0 <= epsilon < 1.0:
        raise DomainError(f"epsilon must lie in [0, 1), got {epsilon}")
    _check_labels(batch, model.class_count)
    p = predict_proba_batch(model, batch.features)
    log_p = np.log(np.maximum(p, PROB_FLOOR))
    targets = smoothed_targets(batch.labels, model.class_count, epsilon)
    value = float(-(targets * log_p).sum(axis=1).mean())
    if not np.isfinite(value):
        raise NonFiniteError(f"loss is not finite: {value}")
    return value


def smoothed_targets(labels: np.ndarray, class_count: int, epsilon: float) -> np.ndarray:
    onehot = np.zeros((labels.shape[0], class_count), dtype=np.float64)
    onehot[np.arange(labels.shape[0]), labels] = 1.0
    if epsilon == 0.0:
        return onehot
    return (1.0 - epsilon) * onehot + epsilon / class_count


def logit_gradient(p: np.ndarray, labels: np.ndarray, gamma: float) -> np.ndarray:
    """Per-sample gradient of the objective with respect to the logits."""
    g = p.copy()
    g[np.arange(labels.shape[0]), labels] -= 1.0
    if gamma != 0.0:
        log_p = np.log(np.maximum(p, PROB_FLOOR))
        h = entropy_batch(p)
        g = g + gamma * p * (log_p + h[:, None])
    return g


def maxent_gradient(
    model: LinearSoftmaxModel, batch: LabeledDataset, gamma: float
) -> tuple[np.ndarray, np.ndarray | None]:
    """Batch-mean gradients (grad_W, grad_A); grad_A is None without a feature map."""
    if gamma < 0:
        raise DomainError(f"gamma must be >= 0, got {gamma}")
    _check_labels(batch, model.class_count)
    raw = batch.features
    phi = model.transform(raw)
    p = softmax_batch(phi @ model.weights.T)
    g = logit_gradient(p, batch.labels, gamma)
    scale = 1.0 / batch.size
    grad_w = scale * (g.T @ phi)
    grad_a = None
    if model.feature_map is not None:
        grad_a = scale * ((g @ model.weights).T @ raw)
    if not np.isfinite(grad_w).all() or (grad_a is not None and not np.isfinite(grad_a).all()):
        raise NonFiniteError("gradient is not finite")
    return grad_w, grad_a
