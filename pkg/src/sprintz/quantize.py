"""Turning real-valued datasets into ``w``-bit integer series.

Quantization is an affine map of the dataset's global ``[min, max]`` onto
``[0, 2**w - 1]`` followed by ``floor``; the maximum is clamped into the top
code. It is lossy by design and only meant as preprocessing in front of the
lossless codec.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_bitwidth, check_real_series, sample_dtype
from .exceptions import DataFormatError


@dataclass(frozen=True)
class QuantizationParams:
    minimum: float
    maximum: float
    bitwidth: int

    @property
    def degenerate(self) -> bool:
        return not self.maximum > self.minimum

    @property
    def step(self) -> float:
        """Width of one quantization bin."""
        if self.degenerate:
            return 0.0
        return (self.maximum - self.minimum) / ((1 << self.bitwidth) - 1)

    def to_json(self) -> str:
        return json.dumps({"min": self.minimum, "max": self.maximum, "w": self.bitwidth})

    @classmethod
    def from_json(cls, text: str) -> "QuantizationParams":
        d = json.loads(text)
        return cls(float(d["min"]), float(d["max"]), check_bitwidth(int(d["w"])))


def _check_finite(values):
    if not np.isfinite(values).all():
        raise ValueError("cannot quantize NaN or infinite values")


def quantize(values, bitwidth: int):
    """Returns ``(codes, params)``; codes are ``uint8``/``uint16`` shaped like ``values``."""
    check_bitwidth(bitwidth)
    values = np.asarray(values, dtype=np.float64)
    _check_finite(values)
    if values.size == 0:
        return np.zeros(values.shape, dtype=sample_dtype(bitwidth)), QuantizationParams(0.0, 0.0, bitwidth)
    params = QuantizationParams(float(values.min()), float(values.max()), bitwidth)
    return quantize_with(values, params), params


def quantize_with(values, params: QuantizationParams):
    values = np.asarray(values, dtype=np.float64)
    _check_finite(values)
    dtype = sample_dtype(params.bitwidth)
    if params.degenerate:
        return np.zeros(values.shape, dtype=dtype)
    top = (1 << params.bitwidth) - 1
    scaled = np.floor((values - params.minimum) * top / (params.maximum - params.minimum))
    return np.clip(scaled, 0, top).astype(dtype)


def dequantize(codes, params: QuantizationParams, midpoint: bool = False):
    """Invert the affine map.

    The plain inverse sends each code to the bottom of its bin, so the
    endpoints come back exactly. ``midpoint=True`` reconstructs at bin
    centres instead (the top code, whose bin holds only the maximum, still
    maps to the maximum); this removes the ``floor`` bias and gives the
    textbook ``step**2 / 12`` error on smooth input distributions.
    """
    codes = np.asarray(codes, dtype=np.float64)
    if params.degenerate:
        return np.full(codes.shape, params.minimum)
    out = codes * params.step + params.minimum
    if midpoint:
        top = (1 << params.bitwidth) - 1
        out = np.where(codes < top, out + params.step / 2, params.maximum)
    return out


def quantization_nmse(original, reconstructed) -> float:
    """Mean squared error divided by the (population) variance of ``original``."""
    original = np.asarray(original, dtype=np.float64)
    reconstructed = np.asarray(reconstructed, dtype=np.float64)
    mse = np.mean((original - reconstructed) ** 2)
    if mse == 0:
        return 0.0
    return float(mse / np.var(original))


def concat_with_interpolation(series, n_interp: int = 5):
    """Join series end to end, bridging each junction with ``n_interp`` linear steps.

    Each series may be 1-D or ``(T, D)``; all must share ``D``.
    """
    series = [np.asarray(s, dtype=np.float64) for s in series]
    if not series:
        return np.zeros(0)
    univariate = all(s.ndim == 1 for s in series)
    series = [s.reshape(len(s), -1) if s.ndim == 1 else s for s in series]
    if len({s.shape[1] for s in series}) > 1:
        raise ValueError("all series must have the same number of columns")
    parts = [series[0]]
    frac = (np.arange(1, n_interp + 1) / (n_interp + 1))[:, None]
    for nxt in series[1:]:
        if len(parts[-1]) and len(nxt):
            a, b = parts[-1][-1], nxt[0]
            parts.append(a + frac * (b - a))
        parts.append(nxt)
    out = np.concatenate(parts)
    return out[:, 0] if univariate else out


def load_delimited(path, delimiter=",", skip_label=False, header=False):
    """Parse a delimited text file into a ``(T, D)`` float array.

    Blank lines are skipped. ``skip_label`` drops the first column (UCR
    files keep the class label there); ``header`` skips the first line.
    """
    rows = []
    ncols = None
    with open(path, newline="") as f:
        reader = csv.reader(f, delimiter=delimiter, skipinitialspace=True)
        for lineno, fields in enumerate(reader, start=1):
            if header and lineno == 1:
                continue
            fields = [x for x in fields if x.strip() != ""] if delimiter.isspace() else fields
            if not fields or all(not x.strip() for x in fields):
                continue
            if skip_label:
                fields = fields[1:]
            if ncols is None:
                ncols = len(fields)
            elif len(fields) != ncols:
                raise DataFormatError(f"expected {ncols} fields, found {len(fields)}", lineno)
            try:
                rows.append([float(x) for x in fields])
            except ValueError:
                bad = next(x for x in fields if not _is_float(x))
                raise DataFormatError(f"non-numeric field {bad!r}", lineno) from None
    if not rows:
        return np.zeros((0, ncols or 1))
    return np.array(rows, dtype=np.float64)


def _is_float(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


def load_raw(path, dtype, n_columns: int):
    """Read a raw little-endian sample file as ``(T, n_columns)``."""
    dtype = np.dtype(dtype).newbyteorder("<")
    if n_columns < 1:
        raise DataFormatError("column count must be positive")
    data = Path(path).read_bytes()
    row = dtype.itemsize * n_columns
    if len(data) % row:
        raise DataFormatError(
            f"file is {len(data)} bytes, not a multiple of {n_columns} columns x {dtype.itemsize} bytes")
    return np.frombuffer(data, dtype=dtype).reshape(-1, n_columns)


def load_ucr_dataset(directory, n_interp: int = 5):
    """Concatenate every series of a UCR-format dataset directory into one.

    Each ``*_TRAIN*``/``*_TEST*`` file holds one series per line with the
    label first; series are joined with interpolated bridges. NaN padding
    (used for variable-length series) is dropped.
    """
    directory = Path(directory)
    files = sorted(p for p in directory.iterdir()
                   if p.is_file() and ("_TRAIN" in p.name or "_TEST" in p.name))
    series = []
    for path in files:
        delimiter = "\t" if path.suffix == ".tsv" else ","
        with open(path) as f:
            first = f.readline()
        if delimiter == "," and "," not in first:
            delimiter = " "
        for row in load_delimited(path, delimiter=delimiter, skip_label=True):
            series.append(row[~np.isnan(row)])
    return concat_with_interpolation(series, n_interp)


class Quantizer(TransformerMixin, BaseEstimator):
    """Fit a global min/max on real data and map it to ``bitwidth``-bit codes."""

    def __init__(self, bitwidth=8, midpoint=False):
        self.bitwidth = bitwidth
        self.midpoint = midpoint

    def fit(self, X, y=None):
        X = check_real_series(X)
        _check_finite(X)
        check_bitwidth(self.bitwidth)
        self.params_ = quantize(X, self.bitwidth)[1]
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self)
        return quantize_with(check_real_series(X), self.params_)

    def inverse_transform(self, X):
        check_is_fitted(self)
        return dequantize(X, self.params_, self.midpoint)

    def score(self, X, y=None):
        """Negative NMSE of a quantize/dequantize round trip (higher is better)."""
        X = check_real_series(X)
        return -quantization_nmse(X, self.inverse_transform(self.transform(X)))

    def save_sidecar(self, path):
        check_is_fitted(self)
        Path(path).write_text(self.params_.to_json())

    @classmethod
    def from_sidecar(cls, path, midpoint=False):
        params = QuantizationParams.from_json(Path(path).read_text())
        q = cls(params.bitwidth, midpoint)
        q.params_ = params
        return q


__all__ = [
    "QuantizationParams",
    "Quantizer",
    "concat_with_interpolation",
    "dequantize",
    "load_delimited",
    "load_raw",
    "load_ucr_dataset",
    "quantization_nmse",
    "quantize",
    "quantize_with",
]
