"""Versioned binary model checkpoints.

Layout (bit-exact round trip):

    line 1: ASCII magic  ``MAXENT-CKPT v1``
    line 2: ``C n n_raw has_feature_map``  (ASCII decimal integers)
    body:   row-major little-endian float64 for W (C x n), then the feature
            map (n x n_raw) when ``has_feature_map`` is 1

Anything that does not match, including a payload whose byte length
disagrees with the dims line, raises FormatError naming the discrepancy.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .core import LinearSoftmaxModel
from .errors import FormatError, IoError

MAGIC = b"MAXENT-CKPT v1"


def save_checkpoint(model: LinearSoftmaxModel, path) -> None:
    has_map = model.feature_map is not None
    dims = f"{model.class_count} {model.feature_dim} {model.raw_dim} {int(has_map)}"
    payload = model.weights.astype("<f8").tobytes()
    if has_map:
        payload += model.feature_map.astype("<f8").tobytes()
    try:
        with open(path, "wb") as fh:
            fh.write(MAGIC + b"\n" + dims.encode("ascii") + b"\n" + payload)
    except OSError as err:
        raise IoError(f"cannot write checkpoint {path}: {err}") from err


def load_checkpoint(path) -> LinearSoftmaxModel:
    try:
        blob = Path(path).read_bytes()
    except OSError as err:
        raise IoError(f"cannot read checkpoint {path}: {err}") from err
    first = blob.find(b"\n")
    if first < 0 or blob[:first] != MAGIC:
        raise FormatError(f"{path}: bad magic line")
    second = blob.find(b"\n", first + 1)
    if second < 0:
        raise FormatError(f"{path}: missing dims line")
    fields = blob[first + 1 : second].split()
    if len(fields) != 4:
        raise FormatError(f"{path}: dims line must have 4 integers, got {len(fields)}")
    try:
        c, n, n_raw, has_map = (int(f) for f in fields)
    except ValueError as err:
        raise FormatError(f"{path}: non-integer dims line") from err
    if c < 2 or n < 1 or n_raw < 1 or has_map not in (0, 1):
        raise FormatError(f"{path}: invalid dims {c} {n} {n_raw} {has_map}")
    payload = blob[second + 1 :]
    expected = 8 * c * n + (8 * n * n_raw if has_map else 0)
    if len(payload) != expected:
        raise FormatError(
            f"{path}: payload is {len(payload)} bytes but dims "
            f"{c}x{n}{' + map ' + str(n) + 'x' + str(n_raw) if has_map else ''} "
            f"require {expected}"
        )
    if not has_map and n != n_raw:
        raise FormatError(f"{path}: n={n} != n_raw={n_raw} requires a feature map")
    w = np.frombuffer(payload[: 8 * c * n], dtype="<f8").reshape(c, n).astype(np.float64)
    fm = None
    if has_map:
        fm = np.frombuffer(payload[8 * c * n :], dtype="<f8").reshape(n, n_raw).astype(np.float64)
    return LinearSoftmaxModel(w, fm)
