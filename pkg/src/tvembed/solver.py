"""Joint temporal factorization of PPMI sequences by block coordinate descent.

The trained model minimizes, over factor sequences U(1..T) and W(1..T),

    1/2 sum_t ||Y(t) - U(t) W(t)^T||_F^2
  + coupling/2  sum_t ||U(t) - W(t)||_F^2
  + ridge/2    (sum_t ||U(t)||_F^2 + sum_t ||W(t)||_F^2)
  + smoothing/2 sum_{t>=2} (||U(t-1) - U(t)||_F^2 + ||W(t-1) - W(t)||_F^2)

Each factor at each slice is updated in closed form row-block-wise: the
rows of U(t) solve the d x d ridge system  rows @ A = B  with

    A = W(t)^T W(t) + (coupling + ridge + c_t * smoothing) I
    B = Y(t)[rows] @ W(t) + coupling * W(t)[rows]
        + smoothing * (U(t-1)[rows] + U(t+1)[rows])

where c_t counts the temporal neighbors of slice t (2 interior, 1 at the
ends, 0 when T = 1) and the neighbor terms are dropped at the boundaries.
The W update is symmetric (Y is symmetric).
"""

import json
import struct
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np
import scipy.linalg

from tvembed.corpus import atomic_write_bytes

EMB_MAGIC = b"TVEM"
EMB_VERSION = 1


@dataclass(frozen=True)
class SolverConfig:
    """Hyperparameters of the temporal factorization.

    Defaults follow the grid-searched setting: ridge 10, smoothing and
    coupling 50, 5 epochs. dim 50 suits a real corpus; small synthetic
    problems use less.
    """

    dim: int = 50
    ridge: float = 10.0
    smoothing: float = 50.0
    coupling: float = 50.0
    epochs: int = 5
    block_rows: int = 1024
    seed: int = 0
    init_scale: float = 1.0

    def __post_init__(self):
        if self.dim < 1 or self.epochs < 1 or self.block_rows < 1:
            raise ValueError("dim, epochs and block_rows must be >= 1")
        for name in ("ridge", "smoothing", "coupling"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0")
        if self.init_scale < 0:
            raise ValueError("init_scale must be >= 0")


@dataclass
class EmbeddingSequence:
    """Factor matrices U(t), W(t) for every slice, plus their provenance."""

    U: list
    W: list
    config: SolverConfig
    labels: list

    def __post_init__(self):
        if not (len(self.U) == len(self.W) == len(self.labels)):
            raise ValueError("U, W and labels must have equal length")
        shape = self.U[0].shape
        for m in list(self.U) + list(self.W):
            if m.shape != shape:
                raise ValueError("inconsistent factor shapes")

    @property
    def num_slices(self):
        return len(self.U)


@dataclass
class ProgressEvent:
    """Emitted after every row-block update during training."""

    epoch: int
    t: int
    factor: str  # "U" or "W"
    rows: tuple  # (start, stop)
    normal_residual: float  # ||rows @ A - B||_F / ||B||_F (0 if B == 0)
    state: "EmbeddingSequence" = None  # live view, already includes this block


def init_embeddings(V, T, config):
    """Draw both factor sequences i.i.d. uniform in +-init_scale/sqrt(dim)."""
    if V < 1 or T < 1:
        raise ValueError("V and T must be >= 1")
    rng = np.random.default_rng(config.seed)
    bound = config.init_scale / np.sqrt(config.dim)
    U = [rng.uniform(-bound, bound, size=(V, config.dim)) for _ in range(T)]
    W = [rng.uniform(-bound, bound, size=(V, config.dim)) for _ in range(T)]
    return EmbeddingSequence(U=U, W=W, config=config, labels=list(range(T)))


def _sparse_residual_sq(Y, U, W):
    # ||Y - U W^T||_F^2 without densifying:
    #   ||Y||^2 - 2 <Y, U W^T> + <U^T U, W^T W>
    ynorm2 = float(Y.power(2).sum()) if Y.nnz else 0.0
    cross = float(np.sum(U * (Y @ W)))
    gram = float(np.sum((U.T @ U) * (W.T @ W)))
    return ynorm2 - 2.0 * cross + gram


def objective(seq, Y):
    """Full objective value; cost O(nnz * d + V * d^2) per slice."""
    T = seq.num_slices
    if len(Y.matrices) != T:
        raise ValueError("embedding sequence and PPMI sequence length mismatch")
    cfg = seq.config
    total = 0.0
    for t in range(T):
        Yt = Y.matrices[t].values
        if Yt.shape[0] != seq.U[t].shape[0]:
            raise ValueError("vocabulary size mismatch between Y and factors")
        total += 0.5 * _sparse_residual_sq(Yt, seq.U[t], seq.W[t])
        total += 0.5 * cfg.coupling * float(
            np.sum((seq.U[t] - seq.W[t]) ** 2)
        )
        total += 0.5 * cfg.ridge * (
            float(np.sum(seq.U[t] ** 2)) + float(np.sum(seq.W[t] ** 2))
        )
        if t > 0:
            total += 0.5 * cfg.smoothing * (
                float(np.sum((seq.U[t - 1] - seq.U[t]) ** 2))
                + float(np.sum((seq.W[t - 1] - seq.W[t]) ** 2))
            )
    return total


def residual_gradient(U_t, Y_t):
    """Gradient of f(U) = 1/2 ||Y - U U^T||_F^2 for symmetric sparse Y.

    Equals -2 Y U + 2 U (U^T U). Verification path for the symmetric
    formulation; the BCD updates do not use it.
    """
    Y = Y_t.values
    if Y.shape[0] != U_t.shape[0]:
        raise ValueError("shape mismatch between Y and U")
    return -2.0 * (Y @ U_t) + 2.0 * (U_t @ (U_t.T @ U_t))


def _neighbor_weight(t, T):
    return (1 if t > 0 else 0) + (1 if t < T - 1 else 0)


def _form_system(rows, factor, t, state, Y, config):
    """Build (A, B) of the row-block ridge system for the given factor."""
    start, stop = rows
    cfg = config
    T = state.num_slices
    same = state.U if factor == "U" else state.W
    opp = state.W if factor == "U" else state.U
    F = opp[t]
    shrink = cfg.coupling + cfg.ridge + _neighbor_weight(t, T) * cfg.smoothing
    A = F.T @ F + shrink * np.eye(cfg.dim)
    Yt = Y.matrices[t].values
    B = Yt[start:stop] @ F + cfg.coupling * F[start:stop]
    if t > 0:
        B = B + cfg.smoothing * same[t - 1][start:stop]
    if t < T - 1:
        B = B + cfg.smoothing * same[t + 1][start:stop]
    return A, np.asarray(B)


def _solve_rows(A, B):
    try:
        cho = scipy.linalg.cho_factor(A, lower=True)
        return scipy.linalg.cho_solve(cho, B.T).T
    except scipy.linalg.LinAlgError:
        # A singular only when ridge = coupling = smoothing = 0; fall back
        # to the least-norm solution.
        import warnings

        warnings.warn("singular ridge system; using least-norm solution")
        return scipy.linalg.lstsq(A, B.T)[0].T


def ridge_update_block(rows, factor, t, state, Y, config):
    """Exactly minimize the objective over one row block of U(t) or W(t).

    Returns the updated rows without mutating state. `rows` is a
    (start, stop) pair, `factor` is "U" or "W".
    """
    if factor not in ("U", "W"):
        raise ValueError("factor must be 'U' or 'W'")
    A, B = _form_system(rows, factor, t, state, Y, config)
    return _solve_rows(A, B)


def train(Y, config, progress_sink=None):
    """Run block coordinate descent over the whole sequence.

    Sweeps slices in ascending order for the configured number of epochs,
    updating all row blocks of U(t) then of W(t). Each block update is the
    exact minimizer over its rows, so the objective is non-increasing
    after every block. Deterministic given the config.
    """
    if not Y.matrices:
        raise ValueError("empty PPMI sequence")
    V = Y.vocab_size
    T = len(Y.matrices)
    state = init_embeddings(V, T, config)
    state.labels = list(Y.labels)
    eye = np.eye(config.dim)
    for epoch in range(config.epochs):
        for t in range(T):
            Yt = Y.matrices[t].values
            shrink = (
                config.coupling
                + config.ridge
                + _neighbor_weight(t, T) * config.smoothing
            )
            for factor in ("U", "W"):
                same = state.U if factor == "U" else state.W
                opp = state.W if factor == "U" else state.U
                F = opp[t]
                # A is shared by every row block of this factor update.
                A = F.T @ F + shrink * eye
                if not np.all(np.isfinite(A)):
                    raise FloatingPointError(
                        f"non-finite ridge system for {factor}({t}) at epoch "
                        f"{epoch}; input data or factors contain NaN/inf"
                    )
                try:
                    cho = scipy.linalg.cho_factor(A, lower=True)
                except scipy.linalg.LinAlgError:
                    cho = None
                new = np.empty_like(same[t])
                for start in range(0, V, config.block_rows):
                    stop = min(start + config.block_rows, V)
                    B = Yt[start:stop] @ F + config.coupling * F[start:stop]
                    if t > 0:
                        B = B + config.smoothing * same[t - 1][start:stop]
                    if t < T - 1:
                        B = B + config.smoothing * same[t + 1][start:stop]
                    B = np.asarray(B)
                    if not np.all(np.isfinite(B)):
                        raise FloatingPointError(
                            f"non-finite right-hand side for {factor}({t}) "
                            f"rows {start}:{stop} at epoch {epoch}"
                        )
                    if cho is not None:
                        block = scipy.linalg.cho_solve(cho, B.T).T
                    else:
                        block = scipy.linalg.lstsq(A, B.T)[0].T
                    new[start:stop] = block
                    if progress_sink is not None:
                        bnorm = np.linalg.norm(B)
                        res = (
                            np.linalg.norm(block @ A - B) / bnorm
                            if bnorm > 0
                            else 0.0
                        )
                        # Expose the partially updated factor so sinks can
                        # evaluate the objective after this very block.
                        same[t][start:stop] = block
                        progress_sink(
                            ProgressEvent(
                                epoch=epoch,
                                t=t,
                                factor=factor,
                                rows=(start, stop),
                                normal_residual=res,
                                state=state,
                            )
                        )
                same[t][:] = new
                if not np.all(np.isfinite(same[t])):
                    raise FloatingPointError(
                        f"non-finite values in {factor}({t}) at epoch {epoch}"
                    )
    return state


def final_embedding(seq, mode="average"):
    """Collapse the two factors into one embedding matrix per slice."""
    if mode == "average":
        return [(u + w) / 2.0 for u, w in zip(seq.U, seq.W)]
    if mode == "U":
        return [u.copy() for u in seq.U]
    if mode == "W":
        return [w.copy() for w in seq.W]
    raise ValueError(f"unknown embedding mode {mode!r}")


# ---------------------------------------------------------------------------
# Persistence.
# Binary: magic "TVEM", version u32, V u64, T u64, d u64, T labels i64,
# then T row-major f64 V x d matrices, little-endian.
# Text: header "V T d", then one "word label v1 ... vd" line per (word,
# slice) with 9 significant digits.


def write_embeddings_binary(matrices, labels, path):
    V, d = matrices[0].shape
    T = len(matrices)
    parts = [
        EMB_MAGIC,
        struct.pack("<IQQQ", EMB_VERSION, V, T, d),
        np.asarray(labels, dtype="<i8").tobytes(),
    ]
    for m in matrices:
        if m.shape != (V, d):
            raise ValueError("inconsistent matrix shapes")
        parts.append(np.ascontiguousarray(m, dtype="<f8").tobytes())
    atomic_write_bytes(path, b"".join(parts))


def read_embeddings_binary(path):
    raw = Path(path).read_bytes()
    if raw[:4] != EMB_MAGIC:
        raise ValueError(f"{path}: bad magic, not an embedding file")
    version, V, T, d = struct.unpack_from("<IQQQ", raw, 4)
    if version != EMB_VERSION:
        raise ValueError(f"{path}: unsupported embedding version {version}")
    off = 4 + struct.calcsize("<IQQQ")
    labels = np.frombuffer(raw, dtype="<i8", count=T, offset=off).tolist()
    off += 8 * T
    matrices = []
    for _ in range(T):
        m = np.frombuffer(raw, dtype="<f8", count=V * d, offset=off)
        matrices.append(m.reshape(V, d).copy())
        off += 8 * V * d
    return matrices, labels


def write_embeddings_text(matrices, labels, words, path):
    V, d = matrices[0].shape
    lines = [f"{V} {len(matrices)} {d}\n"]
    for m, label in zip(matrices, labels):
        for i, word in enumerate(words):
            coords = " ".join(f"{x:.9g}" for x in m[i])
            lines.append(f"{word} {label} {coords}\n")
    atomic_write_bytes(path, "".join(lines).encode("utf-8"))


def save_checkpoint(seq, epoch, path):
    """Serialize a full factor sequence plus epoch counter (npz)."""
    arrays = {"labels": np.asarray(seq.labels, dtype=np.int64),
              "epoch": np.asarray(epoch)}
    for t in range(seq.num_slices):
        arrays[f"U{t}"] = seq.U[t]
        arrays[f"W{t}"] = seq.W[t]
    arrays["config_json"] = np.frombuffer(
        json.dumps(asdict(seq.config), sort_keys=True).encode(), dtype=np.uint8
    )
    np.savez(path, **arrays)


def load_checkpoint(path):
    data = np.load(path)
    labels = data["labels"].tolist()
    T = len(labels)
    cfg = SolverConfig(**json.loads(bytes(data["config_json"]).decode()))
    seq = EmbeddingSequence(
        U=[data[f"U{t}"] for t in range(T)],
        W=[data[f"W{t}"] for t in range(T)],
        config=cfg,
        labels=labels,
    )
    return seq, int(data["epoch"])
