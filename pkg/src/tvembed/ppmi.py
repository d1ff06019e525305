"""Positive PMI matrices built from per-slice co-occurrence statistics."""

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from tvembed.corpus import atomic_write_bytes

PPMI_MAGIC = b"TVPM"
PPMI_VERSION = 1


def pmi_value(count_wc, count_w, count_c, total):
    """Pointwise mutual information log(count_wc * total / (count_w * count_c)).

    Natural log. Returns -inf when count_wc is zero (callers clamp).
    """
    if count_wc > 0 and (count_w <= 0 or count_c <= 0 or total <= 0):
        raise ValueError("marginal counts must be positive when the pair count is")
    if count_wc == 0:
        return -math.inf
    return math.log(count_wc * total / (count_w * count_c))


@dataclass
class PpmiMatrix:
    """Sparse symmetric PPMI matrix of one time slice (zeros implicit)."""

    values: sp.csr_matrix
    slice_label: int

    @property
    def shape(self):
        return self.values.shape


@dataclass
class PpmiSequence:
    """Ordered PPMI matrices over all time slices, one vocabulary."""

    matrices: list
    vocab_size: int

    def __post_init__(self):
        for m in self.matrices:
            if m.shape != (self.vocab_size, self.vocab_size):
                raise ValueError("all PPMI matrices must be V x V")
        labels = self.labels
        if any(b <= a for a, b in zip(labels, labels[1:])):
            raise ValueError("slice labels must be strictly increasing")

    @property
    def labels(self):
        return [m.slice_label for m in self.matrices]

    def __len__(self):
        return len(self.matrices)


def build_ppmi(stats, slice_label=0, shift=0.0):
    """Clamp the PMI of every observed pair at zero and keep the positives.

    shift is subtracted from each PMI before clamping (default 0). Words
    with zero unigram count contribute no entries; the result is symmetric
    because the input counts are.
    """
    coo = stats.cooc.tocoo()
    if coo.nnz == 0 or stats.total_tokens == 0:
        return PpmiMatrix(
            values=sp.csr_matrix(stats.cooc.shape, dtype=np.float64),
            slice_label=slice_label,
        )
    uw = stats.unigram[coo.row].astype(np.float64)
    uc = stats.unigram[coo.col].astype(np.float64)
    vals = (
        np.log(coo.data.astype(np.float64) * float(stats.total_tokens) / (uw * uc))
        - shift
    )
    keep = vals > 0
    mat = sp.coo_matrix(
        (vals[keep], (coo.row[keep], coo.col[keep])), shape=stats.cooc.shape
    ).tocsr()
    return PpmiMatrix(values=mat, slice_label=slice_label)


# ---------------------------------------------------------------------------
# Persistence: same triplet layout as the stats format, with f64 values.
# Layout: magic "TVPM", version u32, V u64, slice_label i64, nnz u64, then
# row u32 array, col u32 array, value f64 array, little-endian, sorted by
# (row, col).


def write_ppmi(matrix, path):
    coo = matrix.values.tocoo()
    order = np.lexsort((coo.col, coo.row))
    parts = [
        PPMI_MAGIC,
        struct.pack("<IQqQ", PPMI_VERSION, coo.shape[0], matrix.slice_label, coo.nnz),
        coo.row[order].astype("<u4").tobytes(),
        coo.col[order].astype("<u4").tobytes(),
        coo.data[order].astype("<f8").tobytes(),
    ]
    atomic_write_bytes(path, b"".join(parts))


def read_ppmi(path):
    raw = Path(path).read_bytes()
    if raw[:4] != PPMI_MAGIC:
        raise ValueError(f"{path}: bad magic, not a PPMI file")
    version, V, label, nnz = struct.unpack_from("<IQqQ", raw, 4)
    if version != PPMI_VERSION:
        raise ValueError(f"{path}: unsupported PPMI version {version}")
    off = 4 + struct.calcsize("<IQqQ")
    rows = np.frombuffer(raw, dtype="<u4", count=nnz, offset=off).astype(np.int64)
    off += 4 * nnz
    cols = np.frombuffer(raw, dtype="<u4", count=nnz, offset=off).astype(np.int64)
    off += 4 * nnz
    vals = np.frombuffer(raw, dtype="<f8", count=nnz, offset=off)
    mat = sp.coo_matrix((vals, (rows, cols)), shape=(V, V)).tocsr()
    return PpmiMatrix(values=mat, slice_label=int(label))


def write_ppmi_text(matrix, path):
    """Debug export: one 'row col value' line per stored entry."""
    coo = matrix.values.tocoo()
    order = np.lexsort((coo.col, coo.row))
    lines = [
        f"{coo.row[i]} {coo.col[i]} {coo.data[i]:.17g}\n" for i in order
    ]
    atomic_write_bytes(path, "".join(lines).encode("utf-8"))
