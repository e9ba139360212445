"""Compression-ratio and throughput experiments.

Ratios are only reported for codecs whose output decoded back to the exact
input. Timings are best-of-``reps`` wall clock (additive noise only ever
makes a run slower, so the minimum is the least noisy estimate).
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import shlex
import shutil
import subprocess
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from ._validation import sample_dtype
from .codec import compress, decompress
from .quantize import concat_with_interpolation, load_delimited, load_ucr_dataset, quantize

log = logging.getLogger(__name__)

VARIANTS = {
    "SprintzDelta": {"forecaster": "delta", "entropy": False},
    "SprintzFIRE": {"forecaster": "fire", "entropy": False},
    "SprintzFIRE+Huf": {"forecaster": "fire", "entropy": True},
}

THROUGHPUT_FIELDS = ["codec", "w", "D", "compress_MBps", "decompress_MBps", "ratio"]
RATIO_FIELDS = ["dataset", "w", "codec", "raw_bytes", "compressed_bytes", "ratio"]


class VerificationError(RuntimeError):
    """A codec's output did not decode back to its input."""


class SprintzVariant:
    def __init__(self, name, bitwidth, forecaster="delta", entropy=False, group_size=2, learn_shift=1):
        self.name = name
        self.bitwidth = bitwidth
        self.options = dict(forecaster=forecaster, entropy=entropy,
                            group_size=group_size, learn_shift=learn_shift)

    def compress(self, X) -> bytes:
        return compress(X, self.bitwidth, **self.options)

    def decompress(self, data):
        return decompress(data)


def _best_time(fn, reps):
    best = float("inf")
    result = None
    for _ in range(reps):
        t0 = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - t0)
    return best, result


def throughput_sweep(ncols=(1, 2, 4, 8, 16, 32, 64), bitwidths=(8, 16), n_values=1_000_000,
                     reps=10, seed=0, variants=None):
    """Compress/decompress speed on incompressible uniform data for each ``D``.

    Yields one row per (variant, w, D). Throughput is raw megabytes (1e6
    bytes) per second.
    """
    variants = variants or VARIANTS
    rng = np.random.default_rng(seed)
    rows = []
    for w in bitwidths:
        values = rng.integers(0, 1 << w, size=n_values).astype(sample_dtype(w))
        for d in ncols:
            X = values[:(n_values // d) * d].reshape(-1, d)
            raw_mb = X.nbytes / 1e6
            for name, opts in variants.items():
                codec = SprintzVariant(name, w, **opts)
                t_comp, blob = _best_time(lambda: codec.compress(X), reps)
                t_dec, out = _best_time(lambda: codec.decompress(blob), reps)
                if not np.array_equal(out, X):
                    raise VerificationError(f"{name} w={w} D={d} failed round trip")
                rows.append({
                    "codec": name, "w": w, "D": d,
                    "compress_MBps": raw_mb / t_comp,
                    "decompress_MBps": raw_mb / t_dec,
                    "ratio": X.nbytes / len(blob),
                })
                log.info("%s w=%d D=%d: %.1f / %.1f MB/s", name, w, d,
                         rows[-1]["compress_MBps"], rows[-1]["decompress_MBps"])
    return rows


@dataclass
class ExternalCodec:
    """Adapter around command-line compressors.

    Templates are shell-style command lines with ``{input}`` and
    ``{output}`` placeholders, e.g. ``zstd -q -9 -f {input} -o {output}``.
    """

    name: str
    compress_cmd: str
    decompress_cmd: str

    def available(self) -> bool:
        for template in (self.compress_cmd, self.decompress_cmd):
            argv = shlex.split(template)
            if not argv or shutil.which(argv[0]) is None:
                return False
        return True

    def _run(self, template, src, dst):
        argv = [a.format(input=str(src), output=str(dst)) for a in shlex.split(template)]
        subprocess.run(argv, check=True, capture_output=True)

    def compressed_size(self, raw: bytes):
        """Size of ``raw`` after compression, or ``None`` if the round trip fails."""
        with tempfile.TemporaryDirectory() as tmp:
            src, packed, back = (Path(tmp) / n for n in ("raw", "packed", "back"))
            src.write_bytes(raw)
            try:
                self._run(self.compress_cmd, src, packed)
                self._run(self.decompress_cmd, packed, back)
            except (OSError, subprocess.CalledProcessError) as exc:
                log.warning("external codec %s failed: %s", self.name, exc)
                return None
            if hashlib.sha256(back.read_bytes()).digest() != hashlib.sha256(raw).digest():
                log.warning("external codec %s did not round-trip; excluded", self.name)
                return None
            return packed.stat().st_size


def external_codec_adapter(name, compress_cmd, decompress_cmd):
    """Build an :class:`ExternalCodec`, or return ``None`` (with a warning) if unavailable."""
    codec = ExternalCodec(name, compress_cmd, decompress_cmd)
    if not codec.available():
        log.warning("external codec %s: executable not found, skipping", name)
        return None
    return codec


def load_datasets(path, ucr=False):
    """Map dataset name to a real-valued ``(T, D)`` array.

    A plain directory may hold ``.csv``/``.tsv``/``.txt`` files and ``.npy``
    arrays, one dataset each. With ``ucr=True`` every subdirectory is a
    UCR-format dataset.
    """
    path = Path(path)
    datasets = {}
    if ucr:
        for sub in sorted(p for p in path.iterdir() if p.is_dir()):
            series = load_ucr_dataset(sub)
            if series.size:
                datasets[sub.name] = series.reshape(len(series), -1)
        return datasets
    for f in sorted(path.iterdir()):
        if f.suffix == ".npy":
            arr = np.load(f)
        elif f.suffix in (".csv", ".tsv", ".txt"):
            arr = load_delimited(f, delimiter="\t" if f.suffix == ".tsv" else ",")
        else:
            continue
        arr = np.asarray(arr)
        datasets[f.stem] = arr.reshape(len(arr), -1)
    return datasets


def ratio_benchmark(datasets, bitwidths=(8, 16), variants=None, externals=()):
    """Compression ratio of every codec on every dataset at each bitwidth.

    Real-valued datasets are quantized per bitwidth; integer datasets are
    used as-is when they fit. Returns rows in ``RATIO_FIELDS`` order.
    """
    variants = variants or VARIANTS
    rows = []
    for name, data in datasets.items():
        for w in bitwidths:
            if data.dtype.kind not in "iuf":
                raise TypeError(f"dataset {name} has unsupported dtype {data.dtype}")
            if data.dtype.kind in "iu" and data.size and data.min() >= 0 and data.max() < (1 << w):
                X = data.astype(sample_dtype(w))
            else:
                X, _ = quantize(data, w)
            raw = X.tobytes()
            for vname, opts in variants.items():
                codec = SprintzVariant(vname, w, **opts)
                blob = codec.compress(X)
                if not np.array_equal(codec.decompress(blob), X):
                    log.error("%s failed to round-trip %s at w=%d; excluded", vname, name, w)
                    continue
                rows.append(_ratio_row(name, w, vname, len(raw), len(blob)))
            for ext in externals:
                size = ext.compressed_size(raw)
                if size is not None:
                    rows.append(_ratio_row(name, w, ext.name, len(raw), size))
    return rows


def _ratio_row(dataset, w, codec, raw, packed):
    return {"dataset": dataset, "w": w, "codec": codec, "raw_bytes": raw,
            "compressed_bytes": packed, "ratio": raw / packed if packed else float("inf")}


def mean_ranks(rows):
    """Mean rank per codec and bitwidth; rank 1 is the best ratio, ties averaged."""
    by_key = {}
    for r in rows:
        by_key.setdefault((r["dataset"], r["w"]), []).append(r)
    totals = {}
    for (_, w), group in by_key.items():
        ranks = rankdata([-g["ratio"] for g in group], method="average")
        for g, rank in zip(group, ranks):
            totals.setdefault(w, {}).setdefault(g["codec"], []).append(float(rank))
    return {w: {codec: float(np.mean(r)) for codec, r in sorted(codecs.items())}
            for w, codecs in sorted(totals.items())}


def pairwise_wins(rows, codec, baseline):
    """Per bitwidth, how many datasets ``codec`` compressed at least as well as ``baseline``."""
    ratios = {}
    for r in rows:
        ratios.setdefault((r["w"], r["dataset"]), {})[r["codec"]] = r["ratio"]
    out = {}
    for (w, _), by_codec in sorted(ratios.items()):
        if codec in by_codec and baseline in by_codec:
            wins, total = out.get(w, (0, 0))
            out[w] = (wins + (by_codec[codec] >= by_codec[baseline]), total + 1)
    return out


def synthetic_smooth_datasets(n_datasets=20, seed=0, n_series=40, min_len=128, max_len=512,
                              step_scale=0.5, noise_scale=0.05):
    """UCR-like synthetic datasets built from random walks with drift.

    Each dataset concatenates ``n_series`` short walks (random length,
    offset and drift sign; step noise ``step_scale * |drift|``, observation
    noise ``noise_scale * |drift|``) with 5-sample linear bridges.
    """
    rng = np.random.default_rng(seed)
    datasets = {}
    for k in range(n_datasets):
        series = []
        for _ in range(n_series):
            length = int(rng.integers(min_len, max_len))
            drift = rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 2.0)
            walk = np.cumsum(drift + step_scale * abs(drift) * rng.normal(size=length))
            walk += noise_scale * abs(drift) * rng.normal(size=length) + rng.normal(0, 20)
            series.append(walk)
        datasets[f"synthetic_{k:02d}"] = concat_with_interpolation(series).reshape(-1, 1)
    return datasets


def write_csv(rows, path, fields):
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)


def write_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
