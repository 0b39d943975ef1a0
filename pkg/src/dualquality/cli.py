"""Batch command-line entry points.

Every file-producing run writes exactly one manifest
(`<out>.manifest.json`: command, config path, seeds, output checksums and,
unless --canonical is set, timestamps). Exit codes: 0 success, 1 runtime
failure (structured error on stderr), 2 usage or config error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import bootstrap as bt
from . import robustness as rb
from .baseline import Lexicon, classify_baseline, default_lexicon
from .classify import (FewShotClassifier, FewShotConfig, HeadConfig, binary_collapse,
                       load_snapshot)
from .corpus import SplitSizes, compute_stats, load_dataset, save_dataset, stratified_split
from .embeddings import backend_from_descriptor
from .errors import ArgumentError
from .evaluation import aggregate_runs, evaluate, sum_confusions
from .labels import Label, ProblemSubtype, parse_label_name
from .llm import HttpChatClient, LLMClientConfig, PromptVariant, classify_with_llm, load_template
from .service import ReviewService, ServiceConfig, ServiceServer, load_service_config
from .simulate import simulate_bootstrap


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_json(path: Path, payload) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    return path

def _write_jsonl(path: Path, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for row in rows:
            handle.write(json.dumps(row, ensure_ascii=False) + "\n")
    return path


def _write_manifest(args, outputs: list[Path], seeds: list[int] | None = None) -> None:
    out = getattr(args, "out", None)
    if not out:
        return
    manifest = {
        "command": args.command,
        "config": getattr(args, "config", None),
        "seeds": seeds or [],
        "outputs": [{"path": str(p), "sha256": _sha256(p)} for p in outputs],
    }
    if not args.canonical:
        manifest["created_at"] = _now()
    _write_json(Path(str(out) + ".manifest.json"), manifest)


def _load_config(loader, path: str):
    """Config problems are usage errors: report and exit 2."""
    try:
        return loader(path)
    except (ArgumentError, FileNotFoundError, OSError, json.JSONDecodeError) as exc:
        print(json.dumps({"error": {"type": "config", "message": str(exc)}}), file=sys.stderr)
        raise SystemExit(2) from exc


def _parse_seeds(seed_arg: str, runs: int | None) -> list[int]:
    """--seed takes one integer or a comma list; --runs expands a single seed."""
    seeds = [int(s) for s in str(seed_arg).split(",") if s.strip() != ""]
    if runs is None:
        return seeds
    if len(seeds) == 1:
        return [seeds[0] + i for i in range(runs)]
    if len(seeds) != runs:
        raise ArgumentError(f"--runs {runs} but --seed lists {len(seeds)} seeds")
    return seeds


def _emit(args, payload, summary: str) -> list[Path]:
    """JSON to --out (or stdout) plus a one-line human summary on stderr."""
    outputs: list[Path] = []
    if getattr(args, "out", None):
        outputs.append(_write_json(Path(args.out), payload))
    else:
        print(json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True))
    print(summary, file=sys.stderr)
    return outputs


def _trainer_from_args(args, seed: int) -> FewShotClassifier:
    backend = backend_from_descriptor(json.loads(args.backend))
    head = HeadConfig(learning_rate=args.learning_rate, batch_size=args.batch_size,
                      epochs=args.epochs, l2=args.l2, seed=seed)
    return FewShotClassifier(backend, FewShotConfig(
        contrastive_iterations=args.contrastive_iterations, seed=seed, head=head))


def _add_train_flags(parser) -> None:
    parser.add_argument("--backend", default='{"kind": "hashing", "dim": 256, "seed": 0}',
                        help="embedding backend descriptor (JSON)")
    parser.add_argument("--learning-rate", type=float, default=0.5)
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument("--epochs", type=int, default=40)
    parser.add_argument("--l2", type=float, default=1e-4)
    parser.add_argument("--contrastive-iterations", type=int, default=1)
    parser.add_argument("--mode", choices=("binary", "ternary"), default="ternary")


def _labeled_training_set(path: str, mode: str):
    dataset = load_dataset(path)
    labeled = [r for r in dataset.reviews if r.label is not None]
    if mode == "binary":
        labeled = list(binary_collapse(dataset.with_reviews(labeled), actor="cli").reviews)
    return labeled


# -- subcommand implementations ----------------------------------------------


def cmd_dataset_stats(args) -> int:
    stats = compute_stats(load_dataset(args.inp))
    outputs = _emit(args, stats.to_json(),
                    f"{stats.total} reviews, mean {stats.mean_chars:.1f} chars / {stats.mean_words:.1f} words")
    _write_manifest(args, outputs)
    return 0


def cmd_split(args) -> int:
    dataset = load_dataset(args.inp)
    sizes = SplitSizes(train=args.train_size, test=args.test_size, valid=args.valid_size)
    split = stratified_split(dataset, sizes, seed=args.seed)
    out = save_dataset(split, args.out)
    print(f"wrote {len(split)} reviews to {out}", file=sys.stderr)
    _write_manifest(args, [out], seeds=[args.seed])
    return 0


def cmd_baseline(args) -> int:
    dataset = load_dataset(args.inp)
    lexicon = Lexicon.from_file(args.lexicon) if args.lexicon else default_lexicon()
    rows = []
    for review in dataset.reviews:
        prediction = classify_baseline(review, lexicon)
        rows.append({"id": review.id} | prediction.to_json())
    out = _write_jsonl(Path(args.out), rows)
    flagged = sum(1 for r in rows if r["label"] == Label.DUAL_QUALITY.value)
    print(f"{flagged}/{len(rows)} flagged dual quality -> {out}", file=sys.stderr)
    _write_manifest(args, [out])
    return 0


def cmd_train(args) -> int:
    seeds = _parse_seeds(args.seed, None)
    if len(seeds) != 1:
        raise ArgumentError("train takes a single --seed")
    labeled = _labeled_training_set(args.train, args.mode)
    fitted = _trainer_from_args(args, seeds[0]).fit(labeled)
    out = fitted.save(args.out)
    print(f"trained {fitted.model_id} on {len(labeled)} reviews -> {out}", file=sys.stderr)
    _write_manifest(args, [out], seeds=seeds)
    return 0


def cmd_predict(args) -> int:
    fitted = load_snapshot(args.model)
    dataset = load_dataset(args.inp)
    predictions = fitted.predict([r.text for r in dataset.reviews])
    rows = [{"id": review.id} | prediction.to_json()
            for review, prediction in zip(dataset.reviews, predictions)]
    out = _write_jsonl(Path(args.out), rows)
    print(f"{len(rows)} predictions -> {out}", file=sys.stderr)
    _write_manifest(args, [out])
    return 0


def _labels_from_dataset(path: str) -> list[Label]:
    labels = []
    for review in load_dataset(path).reviews:
        if review.label is None:
            raise ArgumentError(f"{path}: review {review.id!r} is unlabeled")
        labels.append(review.label)
    return labels


def _labels_from_predictions(path: str) -> list[Label]:
    labels = []
    with Path(path).open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            labels.append(parse_label_name(record["label"]))
    return labels


def cmd_evaluate(args) -> int:
    if args.gold and args.pred:
        gold = _labels_from_dataset(args.gold)
        reports = []
        for pred_path in args.pred:
            pred = _labels_from_predictions(pred_path)
            reports.append(evaluate(gold, pred))
        seeds: list[int] = []
    elif args.train and args.test:
        seeds = _parse_seeds(args.seed, args.runs)
        test = load_dataset(args.test)
        gold = [r.label for r in test.reviews]
        if any(label is None for label in gold):
            raise ArgumentError(f"{args.test}: all reviews must be labeled")
        reports = []
        for seed in seeds:
            labeled = _labeled_training_set(args.train, args.mode)
            fitted = _trainer_from_args(args, seed).fit(labeled)
            pred = [p.label for p in fitted.predict([r.text for r in test.reviews])]
            reports.append(evaluate(gold, pred))
    else:
        raise ArgumentError("evaluate needs either --gold and --pred, or --train and --test")

    if len(reports) == 1:
        payload = reports[0].to_json()
        summary = f"accuracy {reports[0].accuracy:.3f}, macro F1 {reports[0].macro_f1:.3f}"
    else:
        aggregate = aggregate_runs(reports)
        payload = {
            "aggregate": aggregate.to_json(),
            "runs": [report.to_json() for report in reports],
            "summed_confusion_matrix": sum_confusions([r.cm for r in reports]).to_json(),
        }
        acc = aggregate.metrics["accuracy"]
        summary = f"{aggregate.n} runs: accuracy {acc.mean:.3f} ± {acc.std:.3f}"
    outputs = _emit(args, payload, summary)
    if args.cm_csv:
        cm = reports[0].cm if len(reports) == 1 else sum_confusions([r.cm for r in reports])
        outputs.append(cm.save_csv(args.cm_csv))
    _write_manifest(args, outputs, seeds=seeds)
    return 0


def cmd_llm_classify(args) -> int:
    dataset = load_dataset(args.inp)
    template = load_template(PromptVariant(args.variant), args.language)
    config = LLMClientConfig(endpoint=args.endpoint, model=args.model,
                             temperature=args.temperature,
                             max_concurrency=args.max_concurrency)
    client = HttpChatClient(config)
    results = classify_with_llm(dataset.reviews, template, client, runs=args.runs)
    payload = {"runs": [run.to_json() for run in results]}
    parsed = sum(sum(1 for p in run.predictions if p) for run in results)
    outputs = _emit(args, payload,
                    f"{args.runs} run(s), {parsed} parsed predictions, "
                    f"{sum(len(r.failures) for r in results)} failures")
    _write_manifest(args, outputs)
    return 0


def cmd_bootstrap(args) -> int:
    config = _load_config(bt.load_run_config, args.config) if args.config else bt.RunConfig(
        k=args.k, mode=args.mode, seed=args.seed,
        backend=json.loads(args.backend))
    run_dir = Path(args.run_dir)
    if (run_dir / "labeled.jsonl").exists():
        run = load_run_dir(run_dir, config)
    else:
        if not args.labeled:
            raise ArgumentError("new run: --labeled base dataset is required")
        run = bt.BootstrapRun(load_dataset(args.labeled), config=config, run_dir=run_dir)

    if args.ingest:
        decisions = _load_decisions(args.ingest)
        run.ingest_annotations(decisions)
        print(f"ingested {len(decisions)} decisions, labeled set now {len(run.labeled)}",
              file=sys.stderr)

    if args.pool:
        pool = list(load_dataset(args.pool).reviews)
        trainer = _trainer_from_args(args, config.seed)
        at = bt.EPOCH if args.canonical else None
        record = run.run_iteration(pool, trainer, k=config.k, mode=config.mode, at=at)
        print(json.dumps(record.to_json(), ensure_ascii=False, indent=2))
        print(f"iteration {record.iteration}: batch of {record.batch_size} "
              f"from pool of {record.pool_scored}", file=sys.stderr)
    return 0


def load_run_dir(run_dir: Path, config: bt.RunConfig) -> bt.BootstrapRun:
    """Resume a persisted run: labeled set, records and the last open batch."""
    labeled = load_dataset(run_dir / "labeled.jsonl")
    run = bt.BootstrapRun(labeled, config=config)
    records_path = run_dir / "records.jsonl"
    if records_path.exists():
        with records_path.open("r", encoding="utf-8") as handle:
            for line in handle:
                if not line.strip():
                    continue
                r = json.loads(line)
                run.records.append(bt.IterationRecord(
                    iteration=r["iteration"], model_id=r["model_id"],
                    pool_scored=r["pool_scored"], batch_size=r["batch_size"],
                    decisions_ingested=r["decisions_ingested"],
                    labeled_size=r["labeled_size"],
                    label_counts={Label(k): v for k, v in r["label_counts"].items()}))
    batches_path = run_dir / "batches.jsonl"
    if batches_path.exists():
        last = None
        with batches_path.open("r", encoding="utf-8") as handle:
            for line in handle:
                if line.strip():
                    last = json.loads(line)
        if last:
            run.open_batch = bt.AnnotationBatch(
                iteration=last["iteration"], created_at=last["created_at"],
                items=tuple(bt.BatchItem(i["review_id"], i["dq_probability"], i["text"])
                            for i in last["items"]))
    batch_reviews = run_dir / "batch_reviews.jsonl"
    if batch_reviews.exists():
        for review in load_dataset(batch_reviews).reviews:
            if review.id not in run.labeled:
                run.pool[review.id] = review
    run.run_dir = run_dir
    return run


def _load_decisions(path: str) -> list[bt.AnnotationDecision]:
    decisions = []
    with Path(path).open("r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            subtype = None
            if d.get("subtype"):
                subtype = ProblemSubtype.from_json(d["subtype"])
            decisions.append(bt.AnnotationDecision(
                review_id=d["review_id"], label=parse_label_name(d["label"]),
                annotator=d.get("annotator", "cli"), subtype=subtype,
                at=d.get("at", bt.EPOCH)))
    return decisions


def cmd_audit(args) -> int:
    dataset = load_dataset(args.inp)
    trainer = _trainer_from_args(args, args.seed)
    rows = bt.audit_labels(dataset, trainer, folds=args.folds, seed=args.seed)
    payload = [row.to_json() for row in rows]
    misclassified = sum(1 for row in rows if row.gold != row.predicted)
    outputs = _emit(args, payload, f"{misclassified}/{len(rows)} flagged for review")
    _write_manifest(args, outputs, seeds=[args.seed])
    return 0


def cmd_robustness(args) -> int:
    dataset = load_dataset(args.inp)
    if args.model == "baseline":
        lexicon = default_lexicon()

        def predict_fn(texts, seed):
            return [classify_baseline(text, lexicon).label for text in texts]
    else:
        fitted = load_snapshot(args.model)

        def predict_fn(texts, seed):
            return [p.label for p in fitted.predict(texts)]

    seeds = _parse_seeds(args.seed, args.runs)
    report = rb.disagreement(predict_fn, dataset.reviews, rb.PerturbationKind(args.kind),
                             runs=args.runs, seeds=seeds)
    outputs = _emit(args, report.to_json(),
                    f"{args.kind}: disagreement {report.mean:.2f}% ± {report.std:.2f}")
    _write_manifest(args, outputs, seeds=seeds)
    return 0


def cmd_serve(args) -> int:
    if args.config:
        config = _load_config(load_service_config, args.config)
    else:
        config = ServiceConfig()
    # flags mirror the config keys one-to-one and win on conflict
    overrides = {}
    for key in ("port", "host", "model", "data_dir", "auth_token_env",
                "flag_threshold", "escalation_threshold", "k"):
        value = getattr(args, key)
        if value is not None:
            overrides[key] = value
    if args.backend is not None:
        overrides["backend"] = json.loads(args.backend)
    if overrides:
        from dataclasses import replace as dc_replace
        config = dc_replace(config, **overrides)
    server = ServiceServer(ReviewService(config))
    print(f"serving on {server.address}", file=sys.stderr)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.stop()
    return 0


def cmd_simulate(args) -> int:
    seeds = _parse_seeds(args.seed, None)
    rows = []
    summaries = []
    for seed in seeds:
        result = simulate_bootstrap(pool_size=args.pool, positive_rate=args.positive_rate,
                                    k=args.k, iterations=args.iterations, seed=seed,
                                    pool_mode=args.pool_mode)
        rows.extend([record.to_json() | {"seed": seed} for record in result.records])
        summaries.append(result.to_json())
    out = _write_jsonl(Path(args.out), rows)
    print(json.dumps({"seeds": seeds, "summaries": summaries}, ensure_ascii=False, indent=2))
    enr = ", ".join(f"{s['enrichment']:.1f}x" for s in summaries)
    print(f"{len(rows)} iteration records -> {out} (enrichment {enr})", file=sys.stderr)
    _write_manifest(args, [out], seeds=seeds)
    return 0


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dualquality",
        description="Dual-quality review detection toolkit: data, models, loop, service.")
    parser.add_argument("--canonical", action="store_true",
                        help="omit timestamps from outputs for byte-identical reruns")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dataset-stats", help="label/split counts and mean lengths")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_dataset_stats)

    p = sub.add_parser("split", help="stratified train/test/valid assignment")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--train-size", type=int, required=True)
    p.add_argument("--test-size", type=int, required=True)
    p.add_argument("--valid-size", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_split)

    p = sub.add_parser("baseline", help="lexicon classifier over a dataset")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--lexicon")
    p.set_defaults(fn=cmd_baseline)

    p = sub.add_parser("train", help="fit the few-shot model, save a snapshot")
    p.add_argument("--train", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", default="0")
    _add_train_flags(p)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("predict", help="predict with a saved snapshot")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_predict)

    p = sub.add_parser("evaluate", help="metrics report; multi-seed aggregate")
    p.add_argument("--gold")
    p.add_argument("--pred", action="append", default=None,
                   help="prediction JSONL; repeat for multiple runs")
    p.add_argument("--train")
    p.add_argument("--test")
    p.add_argument("--runs", type=int, default=5)
    p.add_argument("--seed", default="0")
    p.add_argument("--out")
    p.add_argument("--cm-csv", help="also export the confusion matrix as CSV")
    _add_train_flags(p)
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("llm-classify", help="prompt a chat endpoint over a dataset")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--variant", choices=[v.value for v in PromptVariant], required=True)
    p.add_argument("--language", choices=("pl", "en"), default="pl")
    p.add_argument("--endpoint", required=True)
    p.add_argument("--model", default="local-model")
    p.add_argument("--temperature", type=float, default=0.1)
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--max-concurrency", type=int, default=4)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_llm_classify)

    p = sub.add_parser("bootstrap", help="run/resume one loop iteration; ingest decisions")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--config", help="run config file (key = value)")
    p.add_argument("--labeled", help="base dataset JSONL (new runs)")
    p.add_argument("--pool", help="unlabeled pool JSONL; triggers one iteration")
    p.add_argument("--ingest", help="decisions JSONL to apply first")
    p.add_argument("--k", type=int, default=200)
    p.add_argument("--mode", choices=("binary", "ternary"), default="binary")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--backend", default='{"kind": "hashing", "dim": 256, "seed": 0}')
    p.add_argument("--learning-rate", type=float, default=0.5)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--epochs", type=int, default=40)
    p.add_argument("--l2", type=float, default=1e-4)
    p.add_argument("--contrastive-iterations", type=int, default=1)
    p.set_defaults(fn=cmd_bootstrap)

    p = sub.add_parser("audit", help="cross-validated label audit queue")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    _add_train_flags(p)
    p.set_defaults(fn=cmd_audit)

    p = sub.add_parser("robustness", help="decision disagreement under a perturbation")
    p.add_argument("--kind", choices=[k.value for k in rb.PerturbationKind], required=True)
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--model", required=True, help="snapshot path or 'baseline'")
    p.add_argument("--runs", type=int, default=5)
    p.add_argument("--seed", default="0")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_robustness)

    p = sub.add_parser("serve", help="run the analyst HTTP service")
    p.add_argument("--config")
    p.add_argument("--port", type=int)
    p.add_argument("--host")
    p.add_argument("--model")
    p.add_argument("--data-dir")
    p.add_argument("--auth-token-env")
    p.add_argument("--flag-threshold", type=float)
    p.add_argument("--escalation-threshold", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--backend")
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("simulate", help="bootstrap mechanism simulation on synthetic pools")
    p.add_argument("--pool", type=int, default=5000)
    p.add_argument("--positive-rate", type=float, default=0.03)
    p.add_argument("--k", type=int, default=200)
    p.add_argument("--iterations", type=int, default=7)
    p.add_argument("--seed", default="0")
    p.add_argument("--pool-mode", choices=("stream", "fixed"), default="stream")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_simulate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except Exception as exc:  # structured runtime error, exit 1
        error = {"error": {"type": type(exc).__name__, "message": str(exc)}}
        print(json.dumps(error, ensure_ascii=False), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
