"""Command-line entry point: build, train, query, evaluate, robustness,
export-norms.

Runs are reproducible from a single config file (key = value lines);
command-line flags override file values. A master seed fans out to the
stochastic components through name-hashed subseeds.

Exit codes: 0 success, 2 usage/config error, 3 lookup failure, 4 empty
evaluation, 1 internal error.
"""

import argparse
import difflib
import hashlib
import json
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from tvembed import baselines, evaluation
from tvembed.corpus import (
    EmptyVocabularyError,
    atomic_write_bytes,
    build_vocabulary,
    count_cooccurrences,
    load_corpus,
    load_stopwords,
    read_stats,
    subsample_counts,
    write_stats,
)
from tvembed.ppmi import PpmiSequence, build_ppmi, read_ppmi, write_ppmi
from tvembed.solver import (
    SolverConfig,
    final_embedding,
    read_embeddings_binary,
    train,
    write_embeddings_binary,
    write_embeddings_text,
)

EXIT_USAGE = 2
EXIT_LOOKUP = 3
EXIT_EMPTY_EVAL = 4

METHODS = ("dw2v", "sw2v", "tw2v", "aw2v")


class UsageError(Exception):
    pass


def derive_seed(master, component):
    """Stable per-component subseed: hash of the component name keyed by
    the master seed. Prevents accidental stream reuse across components."""
    digest = hashlib.sha256(f"{master}:{component}".encode()).digest()
    return int.from_bytes(digest[:8], "little") % (2**31)


@dataclass
class RunConfig:
    corpus: str = ""
    stopwords: str = ""
    min_count: int = 1
    window: int = 5
    dim: int = 50
    ridge: float = 10.0
    smoothing: float = 50.0
    coupling: float = 50.0
    epochs: int = 5
    block_rows: int = 1024
    init_scale: float = 1.0
    seed: int = 0
    method: str = "dw2v"
    combine: str = "average"
    out: str = "run"

    def solver_config(self, component="train"):
        return SolverConfig(
            dim=self.dim,
            ridge=self.ridge,
            smoothing=self.smoothing,
            coupling=self.coupling,
            epochs=self.epochs,
            block_rows=self.block_rows,
            seed=derive_seed(self.seed, component),
            init_scale=self.init_scale,
        )


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def parse_config_file(path):
    """Parse 'key = value' lines; '#' starts a comment; unknown keys rejected."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _FIELD_TYPES:
            raise UsageError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = val
    return values


def build_run_config(args):
    values = {}
    if getattr(args, "config", None):
        values.update(parse_config_file(args.config))
    for f in fields(RunConfig):
        flag = getattr(args, f.name, None)
        if flag is not None:
            values[f.name] = flag
    cfg = RunConfig()
    for key, val in values.items():
        typ = _FIELD_TYPES[key]
        if isinstance(typ, str):
            typ = {"int": int, "float": float, "str": str}[typ]
        try:
            val = typ(val)
        except ValueError as e:
            raise UsageError(f"config key {key!r}: {e}") from None
        cfg = replace(cfg, **{key: val})
    if cfg.method not in METHODS:
        raise UsageError(
            f"unknown method {cfg.method!r}, expected one of {'/'.join(METHODS)}"
        )
    if cfg.combine not in ("average", "U", "W"):
        raise UsageError("combine must be average, U or W")
    return cfg


# ---------------------------------------------------------------------------
# Artifact layout inside the output directory.


def _vocab_path(out):
    return Path(out) / "vocab.txt"


def _stats_path(out, label):
    return Path(out) / f"stats_{label}.tvco"


def _ppmi_path(out, label):
    return Path(out) / f"ppmi_{label}.tvpm"


def _emb_path(out, method, kind="bin", tag=""):
    suffix = {"bin": "tvem", "text": "txt"}[kind]
    name = f"embeddings_{method}{('_' + tag) if tag else ''}.{suffix}"
    return Path(out) / name


def _labels_file(out):
    return Path(out) / "labels.json"


def write_vocab(words, path):
    atomic_write_bytes(path, ("\n".join(words) + "\n").encode("utf-8"))


def read_vocab(path):
    from tvembed.corpus import Vocabulary

    words = Path(path).read_text(encoding="utf-8").splitlines()
    return Vocabulary(words)


def read_labels(out):
    return json.loads(_labels_file(out).read_text())


# ---------------------------------------------------------------------------
# Subcommands.


def cmd_build(args):
    cfg = build_run_config(args)
    if not cfg.corpus:
        raise UsageError("no corpus path configured")
    stopwords = load_stopwords(cfg.stopwords) if cfg.stopwords else frozenset()
    try:
        corpus = load_corpus(cfg.corpus, stopwords)
    except FileNotFoundError as e:
        raise UsageError(str(e)) from None
    vocab = build_vocabulary(corpus, cfg.min_count)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_vocab(vocab.words, _vocab_path(out))
    atomic_write_bytes(
        _labels_file(out),
        json.dumps(corpus.slice_labels, sort_keys=True).encode(),
    )
    total_nnz = 0
    for docs, label in zip(corpus.slices, corpus.slice_labels):
        stats = count_cooccurrences(docs, vocab, cfg.window)
        write_stats(stats, _stats_path(out, label))
        mat = build_ppmi(stats, slice_label=label)
        write_ppmi(mat, _ppmi_path(out, label))
        total_nnz += mat.values.nnz
    print(
        f"V={len(vocab)} T={corpus.num_slices} ppmi_nnz={total_nnz} "
        f"out={out}"
    )
    return 0


def _load_ppmi_sequence(cfg):
    labels = read_labels(cfg.out)
    mats = [read_ppmi(_ppmi_path(cfg.out, lab)) for lab in labels]
    return PpmiSequence(matrices=mats, vocab_size=mats[0].shape[0])


def _write_embeddings(cfg, method, matrices, labels, words, tag=""):
    write_embeddings_binary(matrices, labels, _emb_path(cfg.out, method, "bin", tag))
    write_embeddings_text(
        matrices, labels, words, _emb_path(cfg.out, method, "text", tag)
    )


def cmd_train(args):
    cfg = build_run_config(args)
    vocab = read_vocab(_vocab_path(cfg.out))
    Y = _load_ppmi_sequence(cfg)
    labels = Y.labels
    method = cfg.method
    if method == "dw2v":
        from tvembed.solver import objective as _objective

        V = len(vocab)
        T = len(labels)

        def sink(event):
            # Log the objective once per epoch, after the last block.
            last = (
                event.t == T - 1
                and event.factor == "W"
                and event.rows[1] == V
            )
            if last:
                print(
                    f"epoch {event.epoch + 1}: objective "
                    f"{_objective(event.state, Y):.6e}"
                )

        seq = train(Y, cfg.solver_config("dw2v"), progress_sink=sink)
        mats = final_embedding(seq, cfg.combine)
        _write_embeddings(cfg, method, mats, labels, vocab.words)
    elif method == "sw2v":
        stats = [read_stats(_stats_path(cfg.out, lab)) for lab in labels]
        static = baselines.train_static(
            stats, cfg.solver_config("sw2v"), mode=cfg.combine
        )
        # One static matrix reused for every slice keeps the downstream
        # query/evaluate interface uniform.
        _write_embeddings(cfg, method, [static] * len(labels), labels, vocab.words)
    elif method in ("tw2v", "aw2v"):
        per_slice = baselines.train_per_slice(
            Y, cfg.solver_config(method), mode=cfg.combine
        )
        _write_embeddings(
            cfg, method, per_slice.U, labels, vocab.words, tag="perslice"
        )
        if method == "aw2v":
            aligned = baselines.align_sequence(per_slice)
            _write_embeddings(cfg, method, aligned.U, labels, vocab.words)
    print(f"trained {method} on {len(labels)} slices, out={cfg.out}")
    return 0


def _embeddings_for(cfg, method=None):
    method = method or cfg.method
    tag = "perslice" if method == "tw2v" else ""
    path = _emb_path(cfg.out, method, "bin", tag)
    if not path.exists():
        raise UsageError(f"no embeddings found at {path}; run train first")
    return read_embeddings_binary(path)


def cmd_query(args):
    cfg = build_run_config(args)
    vocab = read_vocab(_vocab_path(cfg.out))
    mats, labels = _embeddings_for(cfg)
    if args.word not in vocab:
        close = difflib.get_close_matches(args.word, vocab.words, n=5)
        print(
            f"word {args.word!r} not in vocabulary; closest: {', '.join(close)}",
            file=sys.stderr,
        )
        return EXIT_LOOKUP
    w = vocab.index[args.word]
    by_label = {lab: m for lab, m in zip(labels, mats)}
    if args.label not in by_label:
        print(f"unknown slice label {args.label}", file=sys.stderr)
        return EXIT_LOOKUP
    targets = labels if args.all_years else [args.target_label or args.label]
    for target in targets:
        exclude = (
            {w} if (target == args.label and not args.keep_self) else set()
        )
        top = evaluation.nearest_neighbors(
            by_label[args.label][w], by_label[target], args.k, exclude=exclude
        )
        row = ", ".join(f"{vocab.words[i]}:{s:.4f}" for i, s in top)
        print(f"{args.word}@{args.label} -> {target}: {row}")
    return 0


def _evaluate_report(cfg, mats, labels, vocab, testset_path, triplet_path,
                     tw2v=False):
    report = {}
    if triplet_path:
        items = evaluation.load_labeled_triplets(triplet_path, vocab)
        if not items:
            raise EmptyEvaluation("no labeled triplets survive filtering")
        clus = evaluation.clustering_report(
            items, mats, labels, seed=derive_seed(cfg.seed, "clustering")
        )
        report.update(clus)
    if testset_path:
        ts, _ = evaluation.load_testset(testset_path, vocab)
        if not ts.records:
            raise EmptyEvaluation("testset is empty after vocabulary filtering")
        if tw2v:
            mapped = _tw2v_alignment_ranks(ts, mats, labels)
            report["mrr"] = evaluation.mrr(mapped)
            report["mp"] = {
                str(K): evaluation.mp_at_k(mapped, K) for K in (1, 3, 5, 10)
            }
        else:
            align = evaluation.alignment_report(ts, mats, labels)
            report["mrr"] = align["mrr"]
            report["mp"] = align["mp"]
    return report


def _tw2v_alignment_ranks(testset, mats, labels, k=30):
    """Alignment ranks with the query vector mapped by a local linear
    transform into the target slice before ranking."""
    by_label = {lab: m for lab, m in zip(labels, mats)}
    ranks = []
    for query_word, qlab, tlab, answer_word in testset.records:
        src, tgt = by_label[qlab], by_label[tlab]
        if np.linalg.norm(src[query_word]) == 0:
            continue
        try:
            q = baselines.local_linear_map(query_word, src, tgt, k=k)
        except ValueError:
            continue
        exclude = {query_word} if qlab == tlab else set()
        top = evaluation.nearest_neighbors(
            q, tgt, evaluation.TOP_RANK_CUTOFF, exclude=exclude
        )
        rank = None
        for pos, (w, _) in enumerate(top, start=1):
            if w == answer_word:
                rank = pos
                break
        ranks.append(rank)
    return ranks


class EmptyEvaluation(Exception):
    pass


def cmd_evaluate(args):
    cfg = build_run_config(args)
    vocab = read_vocab(_vocab_path(cfg.out))
    mats, labels = _embeddings_for(cfg)
    report = _evaluate_report(
        cfg, mats, labels, vocab, args.testset, args.triplets,
        tw2v=(cfg.method == "tw2v"),
    )
    payload = json.dumps(report, sort_keys=True, indent=2)
    if args.json_out:
        atomic_write_bytes(args.json_out, payload.encode())
    print(payload)
    for key in sorted(report):
        val = report[key]
        if isinstance(val, dict):
            cols = "  ".join(f"{k}={v:.4f}" for k, v in sorted(val.items()))
            print(f"{key:8s} {cols}")
        else:
            print(f"{key:8s} {val:.4f}")
    return 0


def cmd_robustness(args):
    cfg = build_run_config(args)
    vocab = read_vocab(_vocab_path(cfg.out))
    labels = read_labels(cfg.out)
    stats = [read_stats(_stats_path(cfg.out, lab)) for lab in labels]
    rates = [float(r) for r in args.rates.split(",")]
    if args.slices == "alternate":
        selected = set(labels[::2])
    elif args.slices == "all":
        selected = set(labels)
    else:
        selected = {int(s) for s in args.slices.split(",")}
    ts, _ = evaluation.load_testset(args.testset, vocab)
    if not ts.records:
        raise EmptyEvaluation("testset is empty after vocabulary filtering")
    rows = []
    for rate in rates:
        sub = []
        for lab, st in zip(labels, stats):
            if lab in selected and rate < 1.0:
                st = subsample_counts(
                    st, rate, derive_seed(cfg.seed, f"subsample:{lab}:{rate}")
                )
            sub.append(st)
        Y = PpmiSequence(
            matrices=[
                build_ppmi(st, slice_label=lab)
                for st, lab in zip(sub, labels)
            ],
            vocab_size=len(vocab),
        )
        seq = train(Y, cfg.solver_config("dw2v"))
        dw2v_mats = final_embedding(seq, cfg.combine)
        aligned = baselines.align_sequence(
            baselines.train_per_slice(Y, cfg.solver_config("aw2v"),
                                      mode=cfg.combine)
        )
        for method, mats in (("dw2v", dw2v_mats), ("aw2v", aligned.U)):
            rep = evaluation.alignment_report(ts, mats, labels)
            rows.append(
                {"method": method, "rate": rate, "mrr": rep["mrr"],
                 "mp": rep["mp"]}
            )
    print(json.dumps(rows, sort_keys=True, indent=2))
    print(f"{'method':6s} {'rate':>6s} {'MRR':>7s} "
          + " ".join(f"MP@{k:<2d}" for k in (1, 3, 5, 10)))
    for r in rows:
        mp = " ".join(f"{r['mp'][str(k)]:.3f}" for k in (1, 3, 5, 10))
        print(f"{r['method']:6s} {r['rate']:6.3f} {r['mrr']:7.4f} {mp}")
    return 0


def cmd_export_norms(args):
    cfg = build_run_config(args)
    vocab = read_vocab(_vocab_path(cfg.out))
    mats, labels = _embeddings_for(cfg)
    words = args.words.split(",")
    missing = [w for w in words if w not in vocab]
    if missing:
        print(f"words not in vocabulary: {', '.join(missing)}", file=sys.stderr)
        return EXIT_LOOKUP
    lines = ["word,label,norm"]
    for w in words:
        for lab, norm in evaluation.norm_series(vocab.index[w], mats, labels):
            lines.append(f"{w},{lab},{norm:.9g}")
    payload = "\n".join(lines) + "\n"
    if args.csv_out:
        atomic_write_bytes(args.csv_out, payload.encode())
    else:
        print(payload, end="")
    return 0


# ---------------------------------------------------------------------------


def _add_config_flags(p):
    p.add_argument("--config", help="config file of key = value lines")
    for f in fields(RunConfig):
        p.add_argument(f"--{f.name.replace('_', '-')}", dest=f.name,
                       default=None)


def make_parser():
    parser = argparse.ArgumentParser(
        prog="tvembed",
        description="Temporally aligned word embeddings from time-sliced corpora",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="corpus -> stats + PPMI artifacts")
    _add_config_flags(p)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("train", help="PPMI artifacts -> embeddings")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("query", help="nearest neighbors of a word-year pair")
    _add_config_flags(p)
    p.add_argument("word")
    p.add_argument("--label", type=int, required=True)
    p.add_argument("--target-label", type=int, default=None)
    p.add_argument("-k", type=int, default=10)
    p.add_argument("--all-years", action="store_true")
    p.add_argument("--keep-self", action="store_true",
                   help="do not exclude the query word in its own slice")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("evaluate", help="clustering and alignment metrics")
    _add_config_flags(p)
    p.add_argument("--testset", help="alignment testset CSV")
    p.add_argument("--triplets", help="labeled triplet CSV")
    p.add_argument("--json-out", help="write the JSON report here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("robustness", help="subsampled-rates comparison table")
    _add_config_flags(p)
    p.add_argument("--testset", required=True)
    p.add_argument("--rates", default="1,0.1,0.01,0.001")
    p.add_argument("--slices", default="alternate",
                   help="'alternate', 'all', or comma-separated labels")
    p.set_defaults(func=cmd_robustness)

    p = sub.add_parser("export-norms", help="per-word norm series CSV")
    _add_config_flags(p)
    p.add_argument("--words", required=True, help="comma-separated word list")
    p.add_argument("--csv-out")
    p.set_defaults(func=cmd_export_norms)

    return parser


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except EmptyEvaluation as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_EMPTY_EVAL
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except EmptyVocabularyError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
