"""Mini-batch SGD for the linear softmax model, with telemetry.

Plain SGD, no momentum. Per batch the update is

    W <- W - lr * (grad_W + weight_decay * W)

and likewise for the feature map when it is being trained; both gradients
are taken at the pre-update parameters. The per-epoch batch order comes
from a stream derived from (seed, epoch), so a run is a pure function of
(datasets, config). History record k holds the state after k epochs; record
0 is the pre-training state. Train-loss telemetry for epoch k >= 1 is the
size-weighted mean of the per-batch values seen during that epoch (the last
short batch counts at its true size); validation metrics are computed on
the full validation set at the end of the epoch.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from ._streams import INIT, NOISE, SHUFFLE, derive_rng
from .core import (
    LinearSoftmaxModel,
    entropy_batch,
    logit_gradient,
    predict_proba_batch,
    smoothed_targets,
)
from .datasets import LabeledDataset
from .errors import (
    DivergenceError,
    DomainError,
    NonFiniteError,
    ShapeError,
    ValidationError,
)

OBJECTIVES = ("maxent", "ce", "lsr")
LR_KINDS = ("constant", "step", "linear")
TOP_PROB_BINS = 20


@dataclass(frozen=True)
class LrSchedule:
    """constant(base) | step(base, factor, interval_epochs) | linear(base, epochs)."""

    kind: str = "constant"
    base: float = 0.1
    factor: float = 0.5
    interval: int = 10

    def value(self, epoch: int, total_epochs: int) -> float:
        if self.kind == "constant":
            return self.base
        if self.kind == "step":
            return self.base * self.factor ** (epoch // self.interval)
        if self.kind == "linear":
            if total_epochs <= 0:
                return self.base
            return self.base * (1.0 - epoch / total_epochs)
        raise ValidationError(f"unknown lr schedule kind {self.kind!r}", field="lr")


@dataclass(frozen=True)
class TrainConfig:
    gamma: float = 1.0
    objective: str = "maxent"
    lsr_epsilon: float = 0.1
    lr: LrSchedule = field(default_factory=LrSchedule)
    weight_decay: float = 0.0
    batch_size: int = 32
    epochs: int = 100
    seed: int = 1
    train_feature_map: bool = False
    init_scale: float = 0.0

    def validated(self) -> "TrainConfig":
        if self.objective not in OBJECTIVES:
            raise ValidationError(f"unknown objective {self.objective!r}", field="objective")
        if self.lr.kind not in LR_KINDS:
            raise ValidationError(f"unknown lr kind {self.lr.kind!r}", field="lr")
        for name in ("gamma", "lsr_epsilon", "weight_decay", "init_scale"):
            v = getattr(self, name)
            if not np.isfinite(v):
                raise ValidationError(f"{name} must be finite, got {v}", field=name)
        if self.gamma < 0:
            raise ValidationError(f"gamma must be >= 0, got {self.gamma}", field="gamma")
        if not 0.0 <= self.lsr_epsilon < 1.0:
            raise ValidationError(
                f"lsr_epsilon must lie in [0, 1), got {self.lsr_epsilon}", field="lsr_epsilon"
            )
        if self.weight_decay < 0:
            raise ValidationError(
                f"weight_decay must be >= 0, got {self.weight_decay}", field="weight_decay"
            )
        if self.batch_size < 1:
            raise ValidationError(
                f"batch_size must be >= 1, got {self.batch_size}", field="batch_size"
            )
        if self.epochs < 0:
            raise ValidationError(f"epochs must be >= 0, got {self.epochs}", field="epochs")
        return self


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_ce: float
    train_entropy: float
    val_ce: float | None
    val_accuracy: float | None
    w_l2: float
    w_inf: float
    lr: float


@dataclass(eq=False)
class TrainHistory:
    records: list[EpochRecord]

    @property
    def final(self) -> EpochRecord:
        return self.records[-1]

    def csv_rows(self) -> list[tuple]:
        return [
            (r.epoch, r.train_ce, r.train_entropy, r.val_ce, r.val_accuracy, r.w_l2, r.w_inf, r.lr)
            for r in self.records
        ]


HISTORY_CSV_HEADER = "epoch,train_ce,train_entropy,val_ce,val_acc,w_l2,w_inf,lr"


@dataclass(eq=False)
class EvalReport:
    accuracy: float
    mean_ce: float
    mean_entropy: float
    top_prob_mean: float
    top_prob_histogram: np.ndarray  # 20 counts over uniform bins on [0, 1]


def init_model(
    C: int,
    n: int,
    n_raw: int,
    init_scale: float,
    seed: int,
    with_feature_map: bool = False,
) -> LinearSoftmaxModel:
    """Uniform[-init_scale, init_scale] weights; feature map starts at identity when square."""
    if C < 2 or n < 1 or n_raw < 1:
        raise ShapeError(f"invalid dimensions C={C}, n={n}, n_raw={n_raw}")
    rng = derive_rng(seed, INIT)
    w = rng.uniform(-init_scale, init_scale, size=(C, n)) if init_scale > 0 else np.zeros((C, n))
    fm = None
    if with_feature_map or n != n_raw:
        if n == n_raw:
            fm = np.eye(n)
        elif init_scale > 0:
            fm = rng.uniform(-init_scale, init_scale, size=(n, n_raw))
        else:
            fm = np.zeros((n, n_raw))
    return LinearSoftmaxModel(w, fm)


def inject_label_noise(dataset: LabeledDataset, fraction: float, seed: int) -> LabeledDataset:
    """Corrupt floor(fraction * N) labels by a cyclic shift among the chosen positions.

    The shift offset is uniform on {1, ..., k-1}, so every selected position
    receives the label of a different selected position (values may still
    coincide when labels repeat). fraction = 0, or a selection of fewer than
    two positions, leaves the dataset unchanged.
    """
    if not 0.0 <= fraction <= 1.0:
        raise DomainError(f"fraction must lie in [0, 1], got {fraction}")
    out = dataset.copy()
    k = int(np.floor(fraction * dataset.size))
    if k < 1:
        return out
    rng = derive_rng(seed, NOISE)
    selected = rng.choice(dataset.size, size=k, replace=False)
    out.noise_mask[selected] = True
    if k >= 2:
        offset = int(rng.integers(1, k))
        out.labels[selected] = dataset.labels[np.roll(selected, -offset)]
    return out


def _batch_stats(
    model: LinearSoftmaxModel, features: np.ndarray, labels: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(probabilities, per-sample CE, per-sample entropy) for telemetry and gradients."""
    p = predict_proba_batch(model, features)
    ce = -np.log(np.maximum(p[np.arange(labels.shape[0]), labels], 1e-300))
    return p, ce, entropy_batch(p)


def train(
    model: LinearSoftmaxModel,
    train_set: LabeledDataset,
    val_set: LabeledDataset | None,
    config: TrainConfig,
) -> tuple[LinearSoftmaxModel, TrainHistory]:
    """Run the configured number of epochs of mini-batch SGD.

    Returns a new model (inputs untouched) and the per-epoch history.
    Raises DivergenceError, tagged with epoch and batch, if the loss stops
    being finite.
    """
    config = config.validated()
    if train_set.size == 0:
        raise ShapeError("training set is empty")
    if int(train_set.labels.max()) >= model.class_count:
        raise ShapeError("training labels exceed the model class count")
    model = model.copy()
    gamma = config.gamma if config.objective == "maxent" else 0.0
    use_lsr = config.objective == "lsr"
    decay = config.weight_decay
    train_a = config.train_feature_map and model.feature_map is not None

    def val_metrics() -> tuple[float | None, float | None]:
        if val_set is None or val_set.size == 0:
            return None, None
        rep = evaluate(model, val_set)
        return rep.mean_ce, rep.accuracy

    def record(epoch: int, train_ce: float, train_h: float, lr: float) -> EpochRecord:
        vce, vacc = val_metrics()
        return EpochRecord(epoch, train_ce, train_h, vce, vacc, model.w_l2(), model.w_inf(), lr)

    _, ce0, h0 = _batch_stats(model, train_set.features, train_set.labels)
    records = [record(0, float(ce0.mean()), float(h0.mean()), config.lr.value(0, config.epochs))]

    n = train_set.size
    for epoch in range(config.epochs):
        lr = config.lr.value(epoch, config.epochs)
        perm = derive_rng(config.seed, SHUFFLE, epoch).permutation(n)
        ce_sum = 0.0
        h_sum = 0.0
        for batch_idx, start in enumerate(range(0, n, config.batch_size)):
            rows = perm[start : start + config.batch_size]
            x_raw = train_set.features[rows]
            y = train_set.labels[rows]
            try:
                phi = model.transform(x_raw)
                p = predict_proba_batch(model, x_raw)
            except NonFiniteError as err:
                raise DivergenceError(
                    f"non-finite parameters at epoch {epoch + 1}, batch {batch_idx}: {err}",
                    epoch=epoch + 1,
                    batch=batch_idx,
                ) from err
            ce = -np.log(np.maximum(p[np.arange(rows.size), y], 1e-300))
            h = entropy_batch(p)
            batch_loss = float(ce.mean()) - gamma * float(h.mean())
            if not np.isfinite(batch_loss):
                raise DivergenceError(
                    f"non-finite loss at epoch {epoch + 1}, batch {batch_idx}",
                    epoch=epoch + 1,
                    batch=batch_idx,
                )
            ce_sum += float(ce.sum())
            h_sum += float(h.sum())
            if use_lsr:
                g = p - smoothed_targets(y, model.class_count, config.lsr_epsilon)
            else:
                g = logit_gradient(p, y, gamma)
            scale = 1.0 / rows.size
            grad_w = scale * (g.T @ phi)
            if train_a:
                grad_a = scale * ((g @ model.weights).T @ x_raw)
                model.feature_map -= lr * (grad_a + decay * model.feature_map)
            model.weights -= lr * (grad_w + decay * model.weights)
        records.append(record(epoch + 1, ce_sum / n, h_sum / n, lr))
    return model, TrainHistory(records)


def evaluate(model: LinearSoftmaxModel, dataset: LabeledDataset) -> EvalReport:
    """Accuracy (argmax, ties to the lowest class), mean CE and entropy, top-prob stats."""
    if dataset.size == 0:
        raise ShapeError("dataset is empty")
    _, ce, h = _batch_stats(model, dataset.features, dataset.labels)
    p = predict_proba_batch(model, dataset.features)
    predicted = p.argmax(axis=1)
    top = p.max(axis=1)
    hist, _ = np.histogram(top, bins=TOP_PROB_BINS, range=(0.0, 1.0))
    return EvalReport(
        accuracy=float((predicted == dataset.labels).mean()),
        mean_ce=float(ce.mean()),
        mean_entropy=float(h.mean()),
        top_prob_mean=float(top.mean()),
        top_prob_histogram=hist,
    )


@dataclass(frozen=True)
class SweepRow:
    gamma: float
    val_accuracy: float
    val_entropy: float
    w_l2: float


SWEEP_CSV_HEADER = "gamma,val_acc,val_entropy,w_l2"


def gamma_sweep(
    train_set: LabeledDataset,
    val_set: LabeledDataset,
    base_config: TrainConfig,
    gammas: list[float],
) -> list[SweepRow]:
    """One full training run per gamma with everything else (incl. seed) fixed."""
    if not gammas:
        raise DomainError("gamma list is empty")
    rows = []
    for gamma in gammas:
        cfg = dataclasses.replace(base_config, gamma=float(gamma), objective="maxent")
        start = init_model(
            _class_count_for(train_set, val_set),
            train_set.dim,
            train_set.dim,
            cfg.init_scale,
            cfg.seed,
            with_feature_map=cfg.train_feature_map,
        )
        try:
            trained, _ = train(start, train_set, val_set, cfg)
        except DivergenceError as err:
            raise DivergenceError(
                f"gamma={gamma}: {err}", epoch=err.epoch, batch=err.batch
            ) from err
        rep = evaluate(trained, val_set)
        rows.append(SweepRow(float(gamma), rep.accuracy, rep.mean_entropy, trained.w_l2()))
    return rows


def _class_count_for(train_set: LabeledDataset, val_set: LabeledDataset | None) -> int:
    top = int(train_set.labels.max())
    if val_set is not None and val_set.size:
        top = max(top, int(val_set.labels.max()))
    return top + 1
