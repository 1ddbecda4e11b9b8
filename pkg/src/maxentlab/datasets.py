"""Labeled feature datasets and their CSV form."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError


@dataclass(eq=False)
class LabeledDataset:
    """N feature vectors with integer class labels and a corruption mask.

    ``noise_mask[i]`` is True when label i was deliberately corrupted by
    :func:`maxentlab.training.inject_label_noise`.
    """

    features: np.ndarray            # (N, d) float64
    labels: np.ndarray              # (N,) int64
    noise_mask: np.ndarray = field(default=None)  # (N,) bool

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.noise_mask is None:
            self.noise_mask = np.zeros(self.labels.shape[0], dtype=bool)
        else:
            self.noise_mask = np.asarray(self.noise_mask, dtype=bool)
        if self.features.ndim != 2:
            raise ShapeError(f"features must be 2-D, got shape {self.features.shape}")
        n = self.features.shape[0]
        if self.labels.shape != (n,) or self.noise_mask.shape != (n,):
            raise ShapeError(
                f"inconsistent dataset sizes: features {self.features.shape}, "
                f"labels {self.labels.shape}, mask {self.noise_mask.shape}"
            )
        if n and self.labels.min() < 0:
            raise ShapeError("labels must be non-negative")

    @property
    def size(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def subset(self, indices) -> "LabeledDataset":
        idx = np.asarray(indices)
        return LabeledDataset(self.features[idx], self.labels[idx], self.noise_mask[idx])

    def copy(self) -> "LabeledDataset":
        return LabeledDataset(self.features.copy(), self.labels.copy(), self.noise_mask.copy())

    def content_bytes(self) -> bytes:
        """Canonical byte serialization, used for reproducibility checks."""
        return self.features.tobytes() + self.labels.tobytes() + self.noise_mask.tobytes()


def dataset_csv_lines(dataset: LabeledDataset) -> list[str]:
    """Rows in the export format ``label,f0,f1,...,f{d-1}`` (header first)."""
    header = "label," + ",".join(f"f{j}" for j in range(dataset.dim))
    lines = [header]
    for i in range(dataset.size):
        feats = ",".join(repr(float(v)) for v in dataset.features[i])
        lines.append(f"{int(dataset.labels[i])},{feats}")
    return lines
