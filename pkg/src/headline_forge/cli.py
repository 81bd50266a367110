"""Command-line entry points for the whole pipeline.

Each subcommand wraps one library stage: ingest clickstream logs, label
articles, prepare text artifacts, fit topic models, train and evaluate
quality models, generate synthetic data, and serve or query a trained
checkpoint. Report-producing commands write figures next to their
delimited outputs.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from collections import Counter
from pathlib import Path

from . import checkpoint as ckpt
from . import evalbench, figures, ingest, labeler, service, textprep, topics
from .models import (
    ARCHITECTURES,
    Featurizer,
    FileDocVectorProvider,
    ModelSpec,
    TrainConfig,
    load_word_vectors,
    train,
)


def _fingerprint(paths: list[Path]) -> str:
    """Short content hash over the training inputs, order-independent."""
    digest = hashlib.sha256()
    for path in sorted(paths):
        digest.update(path.name.encode("utf-8"))
        digest.update(b"\x00")
        digest.update(path.read_bytes())
        digest.update(b"\x00")
    return digest.hexdigest()[:16]


def _sibling(out: Path, suffix: str) -> Path:
    return out.parent / (out.stem + suffix)


# ---------------------------------------------------------------------------
# ingest


def _cmd_ingest(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    events = []
    reject_counts: Counter[str] = Counter()
    total_rejects = 0
    for raw in args.logs:
        parsed, rejects = ingest.parse_log_file(raw)
        events.extend(parsed)
        total_rejects += len(rejects)
        reject_counts.update(r.reason.value for r in rejects)
    kept = ingest.filter_noise(events, cap_seconds=args.cap, floor_seconds=args.floor)
    aggregates = ingest.aggregate_engagement(kept)
    ingest.write_aggregates(aggregates, args.out)
    elapsed = time.perf_counter() - started
    lines = len(events) + total_rejects
    rate = lines / elapsed if elapsed > 0 else float("inf")
    breakdown = ", ".join(f"{k}={v}" for k, v in sorted(reject_counts.items())) or "none"
    print(
        f"ingested {lines} lines from {len(args.logs)} file(s): "
        f"{len(kept)} events kept ({len(events) - len(kept)} filtered), "
        f"{total_rejects} rejected ({breakdown}), "
        f"{len(aggregates)} articles -> {args.out} "
        f"[{elapsed:.2f}s, {rate:,.0f} lines/s]"
    )
    return 0


# ---------------------------------------------------------------------------
# label


def _cmd_label(args: argparse.Namespace) -> int:
    aggregates = ingest.read_aggregates(args.aggregates)
    examples = labeler.label_corpus(aggregates, clip_percentile=args.clip)
    out = Path(args.out)
    labeler.write_labels(examples, out)
    figure = figures.render_label_map(examples, _sibling(out, ".map.png"))
    counts = Counter(ex.hard_label for ex in examples)
    dist = ", ".join(f"label {k}: {counts.get(k, 0)}" for k in (1, 2, 3, 4))
    print(f"labeled {len(examples)} articles ({dist}) -> {out}")
    print(f"engagement map -> {figure}")
    return 0


# ---------------------------------------------------------------------------
# prep


def _cmd_prep(args: argparse.Namespace) -> int:
    documents = textprep.read_corpus(args.corpus)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    token_lists = [
        textprep.tokenize(doc.headline) + textprep.tokenize(doc.body) for doc in documents
    ]
    vocab = textprep.Vocabulary.build(
        token_lists, min_count=args.min_count, max_size=args.max_vocab
    )
    tfidf = textprep.tfidf_fit(token_lists, vocab)
    split = textprep.split_corpus([doc.article_id for doc in documents], seed=args.seed)

    vocab_path = out_dir / "vocab.json"
    vocab_path.write_text(json.dumps(vocab.to_json()), encoding="utf-8")
    idf_path = out_dir / "idf.tsv"
    with idf_path.open("w", encoding="utf-8", newline="") as stream:
        writer = csv.writer(stream, delimiter="\t")
        writer.writerow(["token", "idf"])
        for token_id, token in enumerate(vocab.tokens(), start=2):
            writer.writerow([token, f"{tfidf.idf[token_id]:.10g}"])
    split_path = out_dir / "split.json"
    split_path.write_text(json.dumps(split.to_json(), indent=2), encoding="utf-8")

    print(
        f"prepared {len(documents)} documents: vocabulary {len(vocab)} ids "
        f"(hash {vocab.content_hash()}), split "
        f"{len(split.train)}/{len(split.validation)}/{len(split.test)} -> {out_dir}"
    )
    return 0


# ---------------------------------------------------------------------------
# topics


def _cmd_topics(args: argparse.Namespace) -> int:
    documents = textprep.read_corpus(args.corpus)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    headline_tokens = [textprep.tokenize(doc.headline) for doc in documents]
    body_tokens = [textprep.tokenize(doc.body) for doc in documents]
    all_tokens = [h + b for h, b in zip(headline_tokens, body_tokens)]
    vocab = textprep.Vocabulary.build(all_tokens)
    tfidf = textprep.tfidf_fit(all_tokens, vocab)

    losses = {}
    for name, token_lists, seed in (
        ("headline", headline_tokens, args.seed),
        ("body", body_tokens, args.seed + 1),
    ):
        matrix = textprep.tfidf_matrix(token_lists, tfidf)
        _, model = topics.nnmf_fit(matrix, t=args.t, iters=args.iters, seed=seed, vocab=vocab)
        losses[name] = model.loss_history
        words_path = out_dir / f"topics_{name}.tsv"
        with words_path.open("w", encoding="utf-8", newline="") as stream:
            writer = csv.writer(stream, delimiter="\t")
            writer.writerow(["topic"] + [f"word_{i + 1}" for i in range(10)])
            for topic_id, words in enumerate(model.top_words(10)):
                writer.writerow([topic_id] + words + [""] * (10 - len(words)))
        print(
            f"{name}: {args.t} topics in {len(model.loss_history) - 1} iterations, "
            f"final loss {model.loss_history[-1]:.4f} -> {words_path}"
        )

    figure = figures.render_topic_losses(losses, out_dir / "convergence.png")
    print(f"convergence curves -> {figure}")
    return 0


# ---------------------------------------------------------------------------
# train


def _cmd_train(args: argparse.Namespace) -> int:
    documents = textprep.read_corpus(args.corpus)
    examples = labeler.read_labels(args.labels)
    by_id = {doc.article_id: doc for doc in documents}
    examples = [ex for ex in examples if ex.article_id in by_id]
    if not examples:
        print("error: no labeled article ids match the corpus", file=sys.stderr)
        return 2
    docs = [by_id[ex.article_id] for ex in examples]

    word_vectors = load_word_vectors(args.word_vectors) if args.word_vectors else None
    provider = (
        FileDocVectorProvider.from_jsonl(args.doc_vectors) if args.doc_vectors else None
    )

    featurizer = Featurizer.fit(
        docs,
        provider=provider,
        topic_count=args.topics,
        nnmf_iters=args.nnmf_iters,
        seed=args.seed,
        word_vectors=word_vectors,
    )
    dataset = [(featurizer.featurize(doc), ex) for doc, ex in zip(docs, examples)]

    config = TrainConfig(
        loss=args.loss,
        lr=args.lr,
        batch_size=args.batch_size,
        epochs=args.epochs,
        patience=args.patience if args.patience > 0 else None,
        seed=args.seed,
    )
    spec = ModelSpec(
        architecture=args.arch,
        vocab_size=len(featurizer.vocab),
        seed=args.seed,
        doc_vec_dim=featurizer.provider.dimension,
        topic_dim=args.topics,
    )
    started = time.perf_counter()
    trained = train(
        spec, dataset, config, word_vectors=word_vectors, vocab=featurizer.vocab
    )
    elapsed = time.perf_counter() - started

    inputs = [Path(args.labels), Path(args.corpus)]
    if args.word_vectors:
        inputs.append(Path(args.word_vectors))
    if args.doc_vectors:
        inputs.append(Path(args.doc_vectors))
    scoring = ckpt.build_scoring_model(
        featurizer, trained, fingerprint=_fingerprint(inputs)
    )
    out = Path(args.out)
    ckpt.save_checkpoint(scoring, out)

    history_path = _sibling(out, ".history.csv")
    with history_path.open("w", encoding="utf-8", newline="") as stream:
        writer = csv.writer(stream)
        writer.writerow(["epoch", "train_loss", "val_loss"])
        for record in trained.history:
            writer.writerow(
                [
                    record.epoch,
                    f"{record.train_loss:.10g}",
                    "" if record.val_loss is None else f"{record.val_loss:.10g}",
                ]
            )
    figure = figures.render_training_curves(trained.history, _sibling(out, ".loss.png"))

    best = f", best epoch {trained.best_epoch}" if trained.best_epoch else ""
    print(
        f"trained {args.arch} on {len(dataset)} articles: "
        f"{len(trained.history)} epochs in {elapsed:.1f}s{best} -> {out}"
    )
    print(f"history -> {history_path}")
    print(f"loss curves -> {figure}")
    return 0


# ---------------------------------------------------------------------------
# eval


def _load_toml(path: Path) -> dict:
    try:
        import tomllib
    except ModuleNotFoundError:
        import tomli as tomllib
    with path.open("rb") as stream:
        return tomllib.load(stream)


def _cmd_eval(args: argparse.Namespace) -> int:
    raw = _load_toml(Path(args.config))
    exp = raw.get("experiment", {})
    architectures = exp.get("architectures", list(ARCHITECTURES))
    seed = int(exp.get("seed", 0))

    if "synthetic" in exp:
        synth = exp["synthetic"]
        data = evalbench.generate_synthetic(
            n_articles=int(synth["n_articles"]),
            events_per_article_mean=int(synth.get("events_per_article_mean", 1000)),
            seed=int(synth.get("seed", seed)),
        )
    elif "data" in exp:
        section = exp["data"]
        data = (
            textprep.read_corpus(section["corpus"]),
            labeler.read_labels(section["labels"]),
        )
    else:
        print("error: config needs [experiment.synthetic] or [experiment.data]", file=sys.stderr)
        return 2

    training = exp.get("training", {})
    patience = training.get("patience", 5)
    config = TrainConfig(
        loss=training.get("loss", "mse_soft"),
        lr=float(training.get("lr", 1e-3)),
        batch_size=int(training.get("batch_size", 32)),
        epochs=int(training.get("epochs", 100)),
        patience=None if patience in (0, "none") else int(patience),
        seed=seed,
    )
    features = exp.get("features", {})

    report = evalbench.run_experiment(
        data,
        architectures,
        seed=seed,
        config=config,
        topic_count=int(features.get("topic_count", 50)),
        nnmf_iters=int(features.get("nnmf_iters", 200)),
    )

    out = Path(args.out)
    out.write_text(json.dumps(report.to_json(), indent=2), encoding="utf-8")
    csv_path = _sibling(out, ".csv")
    with csv_path.open("w", encoding="utf-8", newline="") as stream:
        writer = csv.writer(stream)
        writer.writerow(["architecture", "mae", "rae", "best_epoch", "epochs_run"])
        for row in report.rows:
            writer.writerow(
                [
                    row.architecture,
                    f"{row.mae:.6f}",
                    f"{row.rae:.4f}",
                    "" if row.best_epoch is None else row.best_epoch,
                    row.epochs_run,
                ]
            )
    figure = figures.render_metrics(report.rows, _sibling(out, ".metrics.png"))

    print(f"split {report.split_sizes[0]}/{report.split_sizes[1]}/{report.split_sizes[2]}")
    for row in report.rows:
        print(f"  {row.architecture:<24} MAE {row.mae:.4f}  RAE {row.rae:7.2f}%")
    print(f"report -> {out}")
    print(f"table -> {csv_path}")
    print(f"metrics figure -> {figure}")
    return 0


# ---------------------------------------------------------------------------
# synth


def _cmd_synth(args: argparse.Namespace) -> int:
    world = evalbench.generate_synthetic(
        n_articles=args.n, events_per_article_mean=args.events, seed=args.seed
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    corpus_path = out_dir / "corpus.jsonl"
    textprep.write_corpus(world.documents(), corpus_path)

    logs_path = out_dir / "logs.jsonl"
    with logs_path.open("w", encoding="utf-8") as stream:
        for line in world.event_lines():
            stream.write(line + "\n")

    labels_path = out_dir / "planted_labels.jsonl"
    labeler.write_labels(world.planted_labels(), labels_path)

    print(
        f"generated {args.n} articles, {world.total_events()} events (seed {args.seed}) "
        f"-> {corpus_path}, {logs_path}, {labels_path}"
    )
    return 0


# ---------------------------------------------------------------------------
# serve / score


def _cmd_serve(args: argparse.Namespace) -> int:
    config = service.ServeConfig(checkpoint_path=args.model, host=args.host, port=args.port)
    print(f"serving {args.model} on http://{args.host}:{args.port}", flush=True)
    service.serve(config)
    return 0


def _cmd_score(args: argparse.Namespace) -> int:
    scoring = ckpt.load_checkpoint(args.model)
    body = Path(args.body_file).read_text(encoding="utf-8")
    try:
        response = service.score(scoring, body, args.headline)
    except service.ScoreRequestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(response.to_json(), indent=2))
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="headline-forge",
        description="Headline quality pipeline: clickstream to soft labels to models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse clickstream logs into engagement aggregates")
    p.add_argument("--logs", nargs="+", required=True, help="log files (.jsonl or .jsonl.gz)")
    p.add_argument("--cap", type=float, default=600.0, help="dwell cap in seconds")
    p.add_argument("--floor", type=float, default=1.0, help="dwell floor in seconds")
    p.add_argument("--out", required=True, help="aggregate output path (jsonl)")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("label", help="turn aggregates into soft quality labels")
    p.add_argument("--aggregates", required=True)
    p.add_argument("--clip", type=float, default=99.0, help="upper clip percentile")
    p.add_argument("--out", required=True, help="label output path (jsonl)")
    p.set_defaults(func=_cmd_label)

    p = sub.add_parser("prep", help="build vocabulary, idf vector, and split manifest")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--min-count", type=int, default=2)
    p.add_argument("--max-vocab", type=int, default=50_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_prep)

    p = sub.add_parser("topics", help="fit topic models over headlines and bodies")
    p.add_argument("--corpus", required=True)
    p.add_argument("--t", type=int, default=50, help="number of topics")
    p.add_argument("--iters", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_topics)

    p = sub.add_parser("train", help="train one architecture and save a checkpoint")
    p.add_argument("--arch", required=True, choices=ARCHITECTURES)
    p.add_argument("--labels", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--loss", default="mse_soft", choices=("mse_soft", "ce_hard"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--patience", type=int, default=5, help="0 disables early stopping")
    p.add_argument("--topics", type=int, default=50, dest="topics")
    p.add_argument("--nnmf-iters", type=int, default=200)
    p.add_argument("--word-vectors", default=None, help="token vector text file")
    p.add_argument("--doc-vectors", default=None, help="document vector jsonl file")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="run a multi-architecture comparison experiment")
    p.add_argument("--config", required=True, help="experiment TOML file")
    p.add_argument("--out", required=True, help="report output path (json)")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("synth", help="generate a synthetic corpus with planted labels")
    p.add_argument("--n", type=int, required=True, help="number of articles")
    p.add_argument("--events", type=int, default=1000, help="mean events per article")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("serve", help="serve a checkpoint over HTTP")
    p.add_argument("--model", required=True, help="checkpoint path")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("score", help="score candidate headlines against one body")
    p.add_argument("--model", required=True, help="checkpoint path")
    p.add_argument("--body-file", required=True, help="article body text file")
    p.add_argument(
        "--headline", action="append", required=True, help="candidate headline (repeatable)"
    )
    p.set_defaults(func=_cmd_score)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
