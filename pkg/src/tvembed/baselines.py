"""Comparison systems: static pooling, Procrustes chaining, local linear maps."""

import warnings
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from tvembed.corpus import pool_stats
from tvembed.ppmi import PpmiSequence, build_ppmi
from tvembed.solver import final_embedding, train


@dataclass
class PerSliceEmbeddings:
    """Independently trained (hence unaligned) per-slice embedding matrices."""

    U: list
    labels: list


@dataclass
class OrthogonalMap:
    """Orthogonal d x d matrix mapping one embedding space onto another."""

    R: np.ndarray

    def __post_init__(self):
        d = self.R.shape[0]
        if np.linalg.norm(self.R.T @ self.R - np.eye(d)) > 1e-8:
            raise ValueError("map is not orthogonal")


def factorize_single(Y, config, mode="average"):
    """Factorize one PPMI matrix with the solver restricted to T=1.

    The smoothing weight is irrelevant for a single slice; it is zeroed so
    the config documents what actually happened.
    """
    cfg = replace(config, smoothing=0.0)
    seq = train(PpmiSequence(matrices=[Y], vocab_size=Y.shape[0]), cfg)
    return final_embedding(seq, mode=mode)[0]


def train_static(stats_list, config, mode="average"):
    """Static baseline: pool counts over all slices, then factorize once.

    Pooling happens at the count level; the PPMI of pooled counts is not
    the sum of per-slice PPMIs.
    """
    pooled = pool_stats(stats_list)
    return factorize_single(build_ppmi(pooled), config, mode=mode)


def train_per_slice(Y, config, mode="average"):
    """Train every slice independently (the unaligned two-step front end).

    Each slice gets a distinct seed so the runs are genuinely independent;
    sharing a seed would leave near-identical initializations that fake
    alignment.
    """
    mats = []
    for t, m in enumerate(Y.matrices):
        cfg = replace(config, smoothing=0.0, seed=config.seed + 1000003 * (t + 1))
        mats.append(factorize_single(m, cfg, mode=mode))
    return PerSliceEmbeddings(U=mats, labels=list(Y.labels))


def procrustes_align(source, target):
    """Best orthogonal map R minimizing ||source @ R - target||_F.

    Solved by the SVD of source^T @ target: with P S Q^T = source^T target,
    R = P Q^T. The full orthogonal group is allowed (det may be -1). On
    rank deficiency the SVD-canonical choice is kept with a warning.
    """
    if source.shape != target.shape:
        raise ValueError("source and target must have equal shapes")
    M = source.T @ target
    P, s, Qt = scipy.linalg.svd(M)
    d = source.shape[1]
    if np.linalg.matrix_rank(M) < d:
        warnings.warn("rank-deficient Procrustes system; map is not unique")
    return OrthogonalMap(R=P @ Qt)


def align_sequence(per_slice):
    """Chain Procrustes maps so every slice lives in the first slice's frame.

    Slice 1 is the anchor; slice t is mapped onto the already-aligned
    slice t-1.
    """
    aligned = [per_slice.U[0].copy()]
    for t in range(1, len(per_slice.U)):
        R = procrustes_align(per_slice.U[t], aligned[t - 1]).R
        aligned.append(per_slice.U[t] @ R)
    return PerSliceEmbeddings(U=aligned, labels=list(per_slice.labels))


def local_linear_map(query_word, source_t, target_t, k=30):
    """Map one query vector between slices via its local linear transform.

    Finds the k nearest neighbors of the query word in the source slice by
    cosine (query excluded), fits the least-squares d x d map from their
    source rows to their target rows, and applies it to the query vector.
    Neighbors must be nonzero in both slices.
    """
    q = source_t[query_word]
    qn = np.linalg.norm(q)
    if qn == 0:
        raise ValueError("query word has a zero vector in the source slice")
    src_norms = np.linalg.norm(source_t, axis=1)
    tgt_norms = np.linalg.norm(target_t, axis=1)
    valid = (src_norms > 0) & (tgt_norms > 0)
    valid[query_word] = False
    candidates = np.flatnonzero(valid)
    if len(candidates) < k:
        raise ValueError(
            f"only {len(candidates)} words are nonzero in both slices, need {k}"
        )
    sims = (source_t[candidates] @ q) / (src_norms[candidates] * qn)
    order = np.lexsort((candidates, -sims))
    nbrs = candidates[order[:k]]
    S = source_t[nbrs]
    Tm = target_t[nbrs]
    d = source_t.shape[1]
    if np.linalg.matrix_rank(S) < d:
        # Ridge fallback keeps the system well-posed on degenerate
        # neighborhoods.
        M = scipy.linalg.solve(S.T @ S + 1e-8 * np.eye(d), S.T @ Tm)
    else:
        M = scipy.linalg.lstsq(S, Tm)[0]
    return q @ M
