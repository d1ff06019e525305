"""Evaluation: clustering quality (NMI, pairwise F-beta), cross-time
alignment quality (MRR, MP@K), and per-word norm series."""

import csv
import warnings
from collections import Counter
from dataclasses import dataclass

import numpy as np

TOP_RANK_CUTOFF = 10  # reciprocal rank counts as 0 beyond this position


@dataclass
class LabeledItem:
    """A (word, slice) vector with its ground-truth category."""

    word: int
    slice_label: int
    section: str


@dataclass
class AlignmentTestset:
    """Query/answer records for cross-time equivalence scoring."""

    records: list  # (query_word, query_label, target_label, answer_word)
    name: str = ""


@dataclass
class Clustering:
    """Item index -> cluster id assignment."""

    assignment: np.ndarray
    num_clusters: int


def cosine(a, b):
    """Cosine similarity; raises on zero vectors (distinct from similarity 0)."""
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("cosine of a zero vector is undefined")
    return float(np.dot(a, b) / (na * nb))


def nearest_neighbors(query, matrix, K, exclude=frozenset()):
    """Top-K rows of `matrix` by cosine similarity with `query`.

    Zero rows and excluded word indices are skipped; ties break by
    ascending word index. Returns a list of (word_index, similarity).
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    qn = np.linalg.norm(query)
    if qn == 0:
        raise ValueError("query vector is zero")
    norms = np.linalg.norm(matrix, axis=1)
    valid = norms > 0
    for w in exclude:
        valid[w] = False
    idx = np.flatnonzero(valid)
    if len(idx) == 0:
        return []
    sims = (matrix[idx] @ query) / (norms[idx] * qn)
    order = np.lexsort((idx, -sims))[:K]
    return [(int(idx[i]), float(sims[i])) for i in order]


def _kmeans_once(X, K, rng, max_iters):
    n = X.shape[0]
    # k-means++ style seeding with cosine distance 1 - cos.
    centroids = np.empty((K, X.shape[1]))
    first = rng.integers(n)
    centroids[0] = X[first]
    dist = 1.0 - X @ centroids[0]
    for k in range(1, K):
        weights = np.maximum(dist, 0)
        total = weights.sum()
        if total <= 0:
            pick = rng.integers(n)
        else:
            pick = rng.choice(n, p=weights / total)
        centroids[k] = X[pick]
        dist = np.minimum(dist, 1.0 - X @ centroids[k])
    assign = np.full(n, -1, dtype=np.int64)
    for _ in range(max_iters):
        sims = X @ centroids.T
        new_assign = np.argmax(sims, axis=1)
        for k in range(K):
            if not np.any(new_assign == k):
                # Repair empty cluster with the point farthest from its
                # centroid.
                cur = sims[np.arange(n), new_assign]
                steal = int(np.argmin(cur))
                new_assign[steal] = k
                sims[steal, :] = -np.inf  # cannot be stolen twice
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for k in range(K):
            c = X[assign == k].sum(axis=0)
            norm = np.linalg.norm(c)
            centroids[k] = c / norm if norm > 0 else centroids[k]
    obj = float(np.mean((X @ centroids.T)[np.arange(n), assign]))
    return assign, obj


def spherical_kmeans(vectors, K, seed=0, max_iters=100, restarts=10):
    """Cluster unit-normalized vectors by cosine similarity.

    Runs `restarts` independent k-means++ seeded Lloyd iterations and keeps
    the assignment with the best mean cosine to centroid. Deterministic
    given the seed.
    """
    X = np.asarray(vectors, dtype=np.float64)
    n = X.shape[0]
    if K > n:
        raise ValueError(f"K={K} exceeds number of items {n}")
    norms = np.linalg.norm(X, axis=1)
    if np.any(norms == 0):
        raise ValueError("cannot cluster zero vectors")
    X = X / norms[:, None]
    rng = np.random.default_rng(seed)
    best_assign, best_obj = None, -np.inf
    for _ in range(restarts):
        assign, obj = _kmeans_once(X, K, rng, max_iters)
        if obj > best_obj:
            best_assign, best_obj = assign, obj
    return Clustering(assignment=best_assign, num_clusters=K)


def _entropy(counts, n):
    p = np.asarray(counts, dtype=np.float64) / n
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def nmi(labels, clusters):
    """Mutual information normalized by the mean of the two entropies.

    Natural log throughout (the ratio is base-invariant). Returns 1 with a
    warning in the degenerate single-label, single-cluster case.
    """
    labels = list(labels)
    assign = clusters.assignment
    n = len(labels)
    if n != len(assign):
        raise ValueError("labels and clustering have different lengths")
    joint = Counter(zip(labels, assign.tolist()))
    lab_counts = Counter(labels)
    clu_counts = Counter(assign.tolist())
    h_l = _entropy(list(lab_counts.values()), n)
    h_c = _entropy(list(clu_counts.values()), n)
    if h_l + h_c == 0:
        warnings.warn("single label and single cluster; NMI defined as 1")
        return 1.0
    mi = 0.0
    for (lab, clu), c in joint.items():
        p = c / n
        mi += p * np.log(p * n * n / (lab_counts[lab] * clu_counts[clu]))
    return float(mi / ((h_l + h_c) / 2.0))


def f_beta(labels, clusters, beta=5.0):
    """Pairwise-decision F measure: (beta^2+1)PR / (beta^2 P + R).

    Over all unordered item pairs: TP = same cluster and same label,
    FP = same cluster, different label, FN = different cluster, same
    label. beta defaults to 5 (recall-weighted).
    """
    labels = list(labels)
    assign = clusters.assignment
    n = len(labels)
    if n != len(assign):
        raise ValueError("labels and clustering have different lengths")
    if n < 2:
        raise ValueError("need at least 2 items")
    tp = fp = fn = 0
    for i in range(n):
        for j in range(i + 1, n):
            same_c = assign[i] == assign[j]
            same_l = labels[i] == labels[j]
            if same_c and same_l:
                tp += 1
            elif same_c:
                fp += 1
            elif same_l:
                fn += 1
    if tp + fp == 0 or tp + fn == 0:
        warnings.warn("undefined precision or recall; returning 0")
        return 0.0
    P = tp / (tp + fp)
    R = tp / (tp + fn)
    if P == 0 and R == 0:
        return 0.0
    b2 = beta * beta
    return float((b2 + 1) * P * R / (b2 * P + R))


def run_alignment_test(testset, matrices, labels, K_max=TOP_RANK_CUTOFF):
    """Rank each record's answer word in the target slice by cosine.

    For every (query_word, query_label, target_label, answer_word) record
    the query word's vector at its slice is compared against all words of
    the target slice. The query word itself is excluded only when querying
    its own slice (otherwise same-slice queries are degenerate). Ranks
    beyond K_max are recorded as None ("not found"). Records with a zero
    query vector are skipped with a warning.

    Returns (ranks, skipped_count).
    """
    by_label = {lab: m for lab, m in zip(labels, matrices)}
    ranks = []
    skipped = 0
    for query_word, query_label, target_label, answer_word in testset.records:
        src = by_label[query_label]
        tgt = by_label[target_label]
        q = src[query_word]
        if np.linalg.norm(q) == 0:
            skipped += 1
            continue
        exclude = {query_word} if query_label == target_label else set()
        top = nearest_neighbors(q, tgt, K_max, exclude=exclude)
        rank = None
        for pos, (w, _) in enumerate(top, start=1):
            if w == answer_word:
                rank = pos
                break
        ranks.append(rank)
    if skipped:
        warnings.warn(f"skipped {skipped} records with zero query vectors")
    return ranks, skipped


def mrr(ranks):
    """Mean reciprocal rank; ranks beyond the top-10 cutoff (or None) count 0."""
    if not ranks:
        raise ValueError("no ranks to average")
    total = 0.0
    for r in ranks:
        if r is not None and r <= TOP_RANK_CUTOFF:
            total += 1.0 / r
    return total / len(ranks)


def mp_at_k(ranks, K):
    """Fraction of records whose answer ranked within the top K."""
    if K < 1:
        raise ValueError("K must be >= 1")
    if not ranks:
        raise ValueError("no ranks to average")
    hits = sum(1 for r in ranks if r is not None and r <= K)
    return hits / len(ranks)


def norm_series(word, matrices, labels):
    """Euclidean norm of one word's vector per slice, in label order."""
    return [(lab, float(np.linalg.norm(m[word]))) for lab, m in zip(labels, matrices)]


# ---------------------------------------------------------------------------
# File loaders.


def load_testset(path, vocab, name=""):
    """Load an alignment testset CSV: query_word,query_label,target_label,answer_word.

    Records whose query or answer word is out of vocabulary are dropped;
    the drop count is returned alongside the testset.
    """
    records = []
    dropped = 0
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            qw, aw = row["query_word"], row["answer_word"]
            if qw not in vocab or aw not in vocab:
                dropped += 1
                continue
            records.append(
                (
                    vocab.index[qw],
                    int(row["query_label"]),
                    int(row["target_label"]),
                    vocab.index[aw],
                )
            )
    if dropped:
        warnings.warn(f"{path}: dropped {dropped} out-of-vocabulary records")
    return AlignmentTestset(records=records, name=name or str(path)), dropped


def load_labeled_triplets(path, vocab, min_strength=0.35, top_per_section=200):
    """Load word,label,section,strength rows into LabeledItems.

    Applies the ground-truth filters: for each (word, section) only the
    year of largest strength is kept, rows below the strength threshold
    are dropped, and each section keeps its top rows by strength.
    """
    rows = []
    dropped = 0
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            if row["word"] not in vocab:
                dropped += 1
                continue
            rows.append(
                (
                    vocab.index[row["word"]],
                    int(row["label"]),
                    row["section"],
                    float(row["strength"]),
                )
            )
    if dropped:
        warnings.warn(f"{path}: dropped {dropped} out-of-vocabulary rows")
    best = {}
    for word, label, section, strength in rows:
        key = (word, section)
        if key not in best or strength > best[key][3]:
            best[key] = (word, label, section, strength)
    per_section = {}
    for word, label, section, strength in best.values():
        if strength < min_strength:
            continue
        per_section.setdefault(section, []).append((word, label, section, strength))
    items = []
    for section, group in sorted(per_section.items()):
        group.sort(key=lambda r: (-r[3], r[0], r[1]))
        for word, label, sec, _ in group[:top_per_section]:
            items.append(LabeledItem(word=word, slice_label=label, section=sec))
    return items


def clustering_report(items, matrices, labels, cluster_sizes=(10, 15, 20),
                      beta=5.0, seed=0):
    """NMI and F-beta of spherical k-means over the labeled (word, slice) vectors."""
    by_label = {lab: m for lab, m in zip(labels, matrices)}
    vectors = np.stack([by_label[it.slice_label][it.word] for it in items])
    sections = [it.section for it in items]
    report = {"nmi": {}, "f_beta": {}}
    for K in cluster_sizes:
        if K > len(items):
            warnings.warn(
                f"skipping K={K}: exceeds number of labeled items {len(items)}"
            )
            continue
        clustering = spherical_kmeans(vectors, K, seed=seed)
        report["nmi"][str(K)] = nmi(sections, clustering)
        report["f_beta"][str(K)] = f_beta(sections, clustering, beta=beta)
    return report


def alignment_report(testset, matrices, labels, precisions=(1, 3, 5, 10)):
    """MRR and MP@K table for one testset against one embedding sequence."""
    ranks, skipped = run_alignment_test(testset, matrices, labels)
    if not ranks:
        raise ValueError("testset is empty after filtering")
    return {
        "mrr": mrr(ranks),
        "mp": {str(K): mp_at_k(ranks, K) for K in precisions},
        "n": len(ranks),
        "skipped": skipped,
    }
