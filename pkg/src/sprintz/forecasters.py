"""Online integer forecasters: delta coding and FIRE.

Both forecasters expose the same two interfaces:

* per sample, ``predict(prev)`` then ``train(prev, x, err)``, the shape the
  block codec is described in;
* per block batch, ``encode(blocks, prev)``, ``decode(errs, prev)`` and
  ``run(n_blocks, prev)``, which the stream codec uses. The batch methods
  must leave the forecaster in exactly the state the per-sample calls would.

Samples are unsigned ``w``-bit integers held in int64 arrays; all sample
arithmetic wraps modulo ``2**w``. Errors handed to ``train`` and produced by
``encode`` are the wrapped (unsigned) differences ``x - prediction``.
"""
from __future__ import annotations

import numpy as np

from .bitpack import BLOCK_SIZE, to_signed

DEFAULT_LEARN_SHIFT = 1
MAX_LEARN_SHIFT = 15


class DeltaForecaster:
    """Predict every sample as the previous one."""

    kind = "delta"

    def __init__(self, n_columns: int, bitwidth: int = 8):
        self.n_columns = n_columns
        self.bitwidth = bitwidth
        self._mask = (1 << bitwidth) - 1

    def reset(self):
        pass

    def state(self):
        return ()

    def predict(self, prev):
        return np.asarray(prev, dtype=np.int64).copy()

    def train(self, prev, x, err):
        pass

    def encode(self, blocks, prev):
        blocks = np.asarray(blocks, dtype=np.int64)
        flat = blocks.reshape(-1, self.n_columns)
        prevs = np.concatenate([np.asarray(prev, dtype=np.int64)[None], flat[:-1]])
        return ((flat - prevs) & self._mask).reshape(blocks.shape)

    def decode(self, errs, prev):
        errs = np.asarray(errs, dtype=np.int64)
        flat = errs.reshape(-1, self.n_columns)
        x = (np.asarray(prev, dtype=np.int64) + np.cumsum(flat, axis=0)) & self._mask
        return x.reshape(errs.shape)

    def run(self, n_blocks: int, prev):
        prev = np.asarray(prev, dtype=np.int64)
        return np.broadcast_to(prev, (n_blocks * BLOCK_SIZE, self.n_columns)).copy()


class FireForecaster:
    """Fast Integer REgression: predict the next delta as ``alpha`` times the last.

    ``alpha`` is a fixed-point coefficient with step ``2**-w``, derived from a
    per-column accumulator by ``accumulator >> learn_shift`` (a learning rate
    of ``2**-learn_shift``). The coefficient is frozen for the duration of a
    block; gradients of the L1 loss are taken at block rows 1, 3, 5 and 7,
    averaged with an arithmetic shift, and applied once at the end of the
    block. Accumulators saturate so that ``alpha`` stays in
    ``[-(2**w - 1), 2**w]``, which keeps ``alpha * delta`` inside a signed
    ``2w``-bit product.

    Set ``trainable=False`` to freeze the accumulators (the forecaster then
    degenerates to delta coding while they are zero).
    """

    kind = "fire"

    def __init__(self, n_columns: int, bitwidth: int = 8,
                 learn_shift: int = DEFAULT_LEARN_SHIFT, trainable: bool = True):
        if not 0 <= learn_shift <= MAX_LEARN_SHIFT:
            raise ValueError(f"learn_shift must be in [0, {MAX_LEARN_SHIFT}], got {learn_shift}")
        self.n_columns = n_columns
        self.bitwidth = bitwidth
        self.learn_shift = learn_shift
        self.trainable = trainable
        self._mask = (1 << bitwidth) - 1
        self.acc_min = -(((1 << bitwidth) - 1) << learn_shift)
        self.acc_max = (1 << bitwidth) << learn_shift
        self.reset()

    def reset(self):
        self.accumulators = np.zeros(self.n_columns, dtype=np.int64)
        self.deltas = np.zeros(self.n_columns, dtype=np.int64)
        self._pos = 0
        self._alphas = None
        self._grad_sum = np.zeros(self.n_columns, dtype=np.int64)

    def state(self):
        return (self.accumulators.copy(), self.deltas.copy(), self._pos)

    @property
    def alphas(self):
        return self.accumulators >> self.learn_shift

    def _apply_gradient(self, grad_sum):
        if self.trainable:
            np.clip(self.accumulators + (grad_sum >> 2), self.acc_min, self.acc_max,
                    out=self.accumulators)

    # per-sample interface

    def predict(self, prev):
        if self._pos == 0:
            self._alphas = self.alphas
        prev = np.asarray(prev, dtype=np.int64)
        return (prev + ((self._alphas * self.deltas) >> self.bitwidth)) & self._mask

    def train(self, prev, x, err):
        prev = np.asarray(prev, dtype=np.int64)
        x = np.asarray(x, dtype=np.int64)
        if self._pos & 1:
            signs = np.sign(to_signed(err, self.bitwidth))
            self._grad_sum += signs * self.deltas
        self.deltas = to_signed(x - prev, self.bitwidth)
        self._pos += 1
        if self._pos == BLOCK_SIZE:
            self._apply_gradient(self._grad_sum)
            self._grad_sum = np.zeros(self.n_columns, dtype=np.int64)
            self._pos = 0

    # block interface

    def encode_block(self, x, prev):
        """Errors for one ``(8, D)`` block of known samples; trains as it goes."""
        w = self.bitwidth
        x = np.asarray(x, dtype=np.int64)
        prevs = np.concatenate([np.asarray(prev, dtype=np.int64)[None], x[:-1]])
        deltas = to_signed(x - prevs, w)
        prev_deltas = np.concatenate([self.deltas[None], deltas[:-1]])
        pred = prevs + ((self.alphas * prev_deltas) >> w)
        err = (x - pred) & self._mask
        signs = np.sign(to_signed(err[1::2], w))
        self._apply_gradient((signs * prev_deltas[1::2]).sum(axis=0))
        self.deltas = deltas[-1].copy()
        return err

    def decode_block(self, err, prev):
        w = self.bitwidth
        half = 1 << (w - 1)
        err = np.asarray(err, dtype=np.int64)
        err_biased = err + half
        alphas = self.alphas
        # row i of `deltas` is x_i - x_{i-1}; row 0 of `prev_deltas` is the carried state
        deltas = np.empty((BLOCK_SIZE + 1, self.n_columns), dtype=np.int64)
        deltas[0] = d = self.deltas
        for i in range(BLOCK_SIZE):
            d = ((((alphas * d) >> w) + err_biased[i]) & self._mask) - half
            deltas[i + 1] = d
        prev_deltas = deltas[:-1]
        signs = np.sign(to_signed(err[1::2], w))
        self._apply_gradient((signs * prev_deltas[1::2]).sum(axis=0))
        self.deltas = d
        return (np.asarray(prev, dtype=np.int64) + np.cumsum(deltas[1:], axis=0)) & self._mask

    def encode(self, blocks, prev):
        blocks = np.asarray(blocks, dtype=np.int64)
        errs = np.empty_like(blocks)
        for b in range(blocks.shape[0]):
            errs[b] = self.encode_block(blocks[b], prev)
            prev = blocks[b, -1]
        return errs

    def decode(self, errs, prev):
        errs = np.asarray(errs, dtype=np.int64)
        out = np.empty_like(errs)
        for b in range(errs.shape[0]):
            out[b] = self.decode_block(errs[b], prev)
            prev = out[b, -1]
        return out

    def run(self, n_blocks: int, prev):
        """Samples of ``n_blocks`` zero-error blocks.

        Zero errors contribute no gradient, so ``alpha`` is constant for the
        whole run. Once every column's delta reaches a fixed point the rest
        of the run is a straight line and is filled in directly.
        """
        w = self.bitwidth
        n = n_blocks * BLOCK_SIZE
        alphas = self.alphas
        deltas = self.deltas
        p = np.asarray(prev, dtype=np.int64)
        out = np.empty((n, self.n_columns), dtype=np.int64)
        i = 0
        while i < n:
            step = to_signed((alphas * deltas) >> w, w)
            p = (p + step) & self._mask
            out[i] = p
            i += 1
            if np.array_equal(step, deltas):
                k = np.arange(1, n - i + 1)[:, None]
                out[i:] = (p + k * step) & self._mask
                break
            deltas = step
        self.deltas = step if n else deltas
        return out


def make_forecaster(kind: str, n_columns: int, bitwidth: int,
                    learn_shift: int = DEFAULT_LEARN_SHIFT):
    if kind == "delta":
        return DeltaForecaster(n_columns, bitwidth)
    if kind == "fire":
        return FireForecaster(n_columns, bitwidth, learn_shift)
    raise ValueError(f"unknown forecaster {kind!r}; expected 'delta' or 'fire'")
