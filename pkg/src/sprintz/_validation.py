"""Input checking shared by the estimators and the CLI."""
from __future__ import annotations

import numpy as np
from sklearn.utils import check_array

SUPPORTED_BITWIDTHS = (8, 16)


def check_bitwidth(bitwidth) -> int:
    if bitwidth not in SUPPORTED_BITWIDTHS:
        raise ValueError(f"bitwidth must be 8 or 16, got {bitwidth!r}")
    return int(bitwidth)


def sample_dtype(bitwidth: int) -> np.dtype:
    return np.dtype("<u1") if bitwidth == 8 else np.dtype("<u2")


def check_series(X, bitwidth: int) -> np.ndarray:
    """Validate an integer time series and return it as ``(T, D)`` int64.

    1-D input is treated as univariate. Every value must fit in ``bitwidth``
    unsigned bits; floating point input is rejected (quantize it first).
    """
    check_bitwidth(bitwidth)
    X = np.asarray(X)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.dtype.kind not in "iu":
        raise TypeError(f"expected an integer array, got dtype {X.dtype}; "
                        "quantize floating point data first")
    X = check_array(X, dtype=None, ensure_min_samples=0, ensure_all_finite=False)
    if X.shape[1] == 0:
        raise ValueError("time series must have at least one column")
    if X.size and (X.min() < 0 or X.max() >= (1 << bitwidth)):
        raise ValueError(f"values must lie in [0, {(1 << bitwidth) - 1}] for {bitwidth}-bit data")
    return X.astype(np.int64, copy=False)


def check_real_series(X) -> np.ndarray:
    """Validate a real-valued series for quantization; returns ``(T, D)`` float64."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    return check_array(X, dtype=np.float64, ensure_min_samples=0)
