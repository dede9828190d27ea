"""Command-line pipeline: execute -> label -> dataset -> train -> rank -> evaluate.

All artifacts are schema-versioned JSONL (or JSON for evaluation output);
each file's header echoes the resolved configuration that produced it.
Exit codes: 0 success, 2 validation/schema error, 3 environment error
(interpreter or driver missing).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional

from . import dataset as ds
from . import harness, jsonio, metrics, ranker, taxonomy
from .features import FeatureConfig, count_encoded_lines

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_ENVIRONMENT = 3


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except harness.DriverUnavailable as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ENVIRONMENT
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ValueError as exc:
        # Covers schema, record-validation, label, domain, and join errors.
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="faultrank",
        description="Execute candidate programs, label faults, train and "
                    "evaluate fault-aware rankers.",
    )
    sub = parser.add_subparsers(required=True)

    p = sub.add_parser("execute", help="run candidates against their tasks' unit tests")
    p.add_argument("--tasks", required=True)
    p.add_argument("--candidates", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--interpreter", default=None,
                   help="candidate-language interpreter (default: "
                        "$FAULTRANK_INTERPRETER or this Python)")
    p.add_argument("--driver", default=None,
                   help="driver script path (default: $FAULTRANK_DRIVER or "
                        f"{harness.DEFAULT_DRIVER_PATH})")
    p.add_argument("--timeout", type=float, default=4.0, help="per-test seconds")
    p.add_argument("--memory-mb", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_execute)

    p = sub.add_parser("label", help="extract fault labels from execution reports")
    p.add_argument("--tasks", required=True)
    p.add_argument("--candidates", required=True)
    p.add_argument("--reports", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--source-model", default="unknown",
                   help="generator name recorded on each example")
    _add_feature_flags(p)
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("dataset", help="split or merge labeled datasets")
    dsub = p.add_subparsers(required=True)

    p_split = dsub.add_parser("split", help="task-grouped train/val/test split")
    p_split.add_argument("--labeled", required=True)
    p_split.add_argument("--out-dir", required=True)
    p_split.add_argument("--train-frac", type=float, default=0.8)
    p_split.add_argument("--val-frac", type=float, default=0.1)
    p_split.add_argument("--seed", type=int, default=0)
    p_split.add_argument("--require-solvable", action="store_true",
                         help="draw validation tasks only from tasks with a "
                              "correct candidate")
    p_split.set_defaults(func=cmd_dataset_split)

    p_merge = dsub.add_parser("merge", help="concatenate datasets, optionally subsampling tasks")
    p_merge.add_argument("--inputs", nargs="+", required=True)
    p_merge.add_argument("--out", required=True)
    p_merge.add_argument("--frac", type=float, default=1.0)
    p_merge.add_argument("--seed", type=int, default=0)
    p_merge.set_defaults(func=cmd_dataset_merge)

    p = sub.add_parser("train", help="train a fault-aware ranker")
    p.add_argument("--train", dest="train_path", required=True)
    p.add_argument("--val", dest="val_path", required=True)
    p.add_argument("--task", required=True,
                   choices=["binary", "ternary", "intent", "exec", "exec-line"])
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch", type=int, default=512)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--line-loss-weight", type=float, default=1.0)
    _add_feature_flags(p, defaults_from_header=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("rank", help="score and order candidates")
    p.add_argument("--model", default=None)
    p.add_argument("--tasks", required=True)
    p.add_argument("--candidates", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--baseline", choices=["logprob"], default=None,
                   help="rank by generation probability instead of a model")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("evaluate", help="join scores with reports and compute metrics")
    p.add_argument("--scores", required=True)
    p.add_argument("--reports", required=True)
    p.add_argument("--k", default="1,5", help="comma-separated k values")
    p.add_argument("--out", default=None, help="write the evaluation JSON here")
    p.set_defaults(func=cmd_evaluate)

    return parser


def _add_feature_flags(p: argparse.ArgumentParser, defaults_from_header: bool = False) -> None:
    # with defaults_from_header, unset flags fall back to the input file's
    # recorded feature config instead of the package defaults
    p.add_argument("--dim", type=int, default=None if defaults_from_header else 2 ** 18,
                   help="feature-hashing dimension (power of two)")
    p.add_argument("--max-tokens", type=int, default=None if defaults_from_header else 512)
    p.add_argument("--ngram", type=int, default=None if defaults_from_header else 3,
                   help="max n-gram order")


def _feature_config(args, header: Optional[dict] = None) -> FeatureConfig:
    base = FeatureConfig()
    if header and isinstance(header.get("config"), dict) \
            and isinstance(header["config"].get("features"), dict):
        base = FeatureConfig.from_record(header["config"]["features"])
    return FeatureConfig(
        dim=args.dim if args.dim is not None else base.dim,
        max_tokens=args.max_tokens if args.max_tokens is not None else base.max_tokens,
        ngram_order=args.ngram if args.ngram is not None else base.ngram_order,
    )


# ---------------------------------------------------------------------------
# record loading with per-record context


def _load_records(path: str, schema: str, build, what: str):
    header, records = jsonio.read_jsonl(path, schema)
    out = []
    for i, rec in enumerate(records):
        try:
            out.append(build(rec))
        except (KeyError, TypeError) as exc:
            raise jsonio.SchemaError(
                f"{path}: {what} record on line {i + 2} is missing field {exc}"
            ) from exc
        except harness.ValidationError as exc:
            raise harness.ValidationError(f"{path}: line {i + 2}: {exc}") from exc
    return header, out


def _load_tasks(path: str):
    return _load_records(path, "tasks", harness.task_from_record, "task")


def _load_candidates(path: str):
    return _load_records(path, "candidates", harness.candidate_from_record, "candidate")


def _load_reports(path: str):
    return _load_records(path, "reports", harness.report_from_record, "report")


def _load_examples(path: str):
    return _load_records(path, "labeled", ds.RankerExample.from_record, "labeled example")


# ---------------------------------------------------------------------------
# commands


def cmd_execute(args) -> int:
    _, tasks = _load_tasks(args.tasks)
    _, candidates = _load_candidates(args.candidates)
    limits = harness.ExecutionLimits(timeout_s=args.timeout, memory_mb=args.memory_mb)
    config = {
        "tasks": args.tasks,
        "candidates": args.candidates,
        "timeout_s": args.timeout,
        "memory_mb": args.memory_mb,
        "workers": args.workers,
        "interpreter": args.interpreter or os.environ.get(harness.INTERPRETER_ENV) or sys.executable,
        "driver": args.driver or os.environ.get(harness.DRIVER_ENV) or harness.DEFAULT_DRIVER_PATH,
    }
    with jsonio.JsonlWriter(args.out, "reports", config) as writer:
        harness.execute_corpus(
            tasks, candidates, limits,
            workers=args.workers,
            interpreter=args.interpreter,
            driver_path=args.driver,
            on_report=lambda rep: writer.write(harness.report_to_record(rep)),
        )
        written = writer.count
    print(f"wrote {written} reports to {args.out}")
    return EXIT_OK


def cmd_label(args) -> int:
    features = _feature_config(args)
    _, tasks = _load_tasks(args.tasks)
    _, candidates = _load_candidates(args.candidates)
    _, reports = _load_reports(args.reports)
    tasks_by_id = {t.task_id: t for t in tasks}
    cands_by_id = {(c.task_id, c.candidate_id): c for c in candidates}

    records = []
    for rep in sorted(reports, key=lambda r: (r.task_id, r.candidate_id)):
        task = tasks_by_id.get(rep.task_id)
        cand = cands_by_id.get((rep.task_id, rep.candidate_id))
        if task is None or cand is None:
            raise harness.ValidationError(
                f"report {rep.task_id}/{rep.candidate_id} has no matching task/candidate"
            )
        m = count_encoded_lines(task.prompt, cand.code, features)
        labels = taxonomy.label_report(rep, cand, m, test_format=task.test_format)
        example = ds.RankerExample(
            task_id=rep.task_id,
            candidate_id=rep.candidate_id,
            prompt=task.prompt,
            code=cand.code,
            labels=labels,
            source_model=args.source_model,
            gen_logprob=cand.gen_logprob,
        )
        rec = example.to_record()
        rec["outcome"] = rep.outcome.value
        rec["first_failure_index"] = rep.first_failure_index
        records.append(rec)

    config = {"source_model": args.source_model, "features": features.to_record()}
    jsonio.write_jsonl(args.out, "labeled", records, config)
    print(f"wrote {len(records)} labeled examples to {args.out}")
    return EXIT_OK


def cmd_dataset_split(args) -> int:
    header, examples = _load_examples(args.labeled)
    spec = ds.SplitSpec(train_frac=args.train_frac, val_frac=args.val_frac,
                        seed=args.seed, require_solvable=args.require_solvable)
    splits = ds.build_dataset(examples, spec)
    os.makedirs(args.out_dir, exist_ok=True)
    config = dict(header.get("config") or {})
    config.update({"train_frac": args.train_frac, "val_frac": args.val_frac,
                   "seed": args.seed, "require_solvable": args.require_solvable})
    for name, part in splits.partitions().items():
        out = os.path.join(args.out_dir, f"{name}.jsonl")
        jsonio.write_jsonl(out, "labeled", [ex.to_record() for ex in part], config)
        if name in splits.stats:
            stats = splits.stats[name].to_record()
            with open(os.path.join(args.out_dir, f"{name}.stats.json"), "w") as fh:
                json.dump(stats, fh, indent=2, sort_keys=True)
                fh.write("\n")
    train_stats = splits.stats["train"]
    ratio = train_stats.wrong_to_correct
    print(
        f"split {len(examples)} examples into train={len(splits.train)} "
        f"val={len(splits.val)} test={len(splits.test)}; "
        f"train Wrong:Correct ratio = {ratio if ratio is not None else 'inf'}"
    )
    return EXIT_OK


def cmd_dataset_merge(args) -> int:
    headers = []
    datasets = []
    for path in args.inputs:
        header, examples = _load_examples(path)
        headers.append(header)
        datasets.append(examples)
    merged = ds.merge_datasets(datasets, sample_frac=args.frac, seed=args.seed)
    config = {"inputs": list(args.inputs), "frac": args.frac, "seed": args.seed}
    feature_configs = {
        json.dumps((h.get("config") or {}).get("features"), sort_keys=True)
        for h in headers
    }
    if len(feature_configs) == 1:
        cfg = (headers[0].get("config") or {}).get("features")
        if cfg:
            config["features"] = cfg
    jsonio.write_jsonl(args.out, "labeled", [ex.to_record() for ex in merged], config)
    print(f"merged {sum(len(d) for d in datasets)} -> {len(merged)} examples into {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    train_header, train_examples = _load_examples(args.train_path)
    _, val_examples = _load_examples(args.val_path)
    features = _feature_config(args, train_header)
    config = ranker.TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch,
        lr=args.lr,
        seed=args.seed,
        line_loss_weight=args.line_loss_weight,
        features=features,
    )
    model = ranker.train(train_examples, val_examples, args.task, config)
    ranker.save_model(model, args.out)
    print(
        f"trained {args.task} ranker on {len(train_examples)} examples; "
        f"best epoch {model.meta['best_epoch']} "
        f"(val ranked pass@1 = {model.meta['best_val_ranked_pass1']:.4f}); "
        f"saved to {args.out}"
    )
    return EXIT_OK


def cmd_rank(args) -> int:
    _, tasks = _load_tasks(args.tasks)
    _, candidates = _load_candidates(args.candidates)
    tasks_by_id = {t.task_id: t for t in tasks}
    for cand in candidates:
        if cand.task_id not in tasks_by_id:
            raise harness.MissingTask(cand.task_id)

    rows = []
    if args.baseline == "logprob":
        by_task: dict[str, list] = {}
        for cand in candidates:
            by_task.setdefault(cand.task_id, []).append(cand)
        for task_id in sorted(by_task):
            for cand, logprob in ranker.rank_by_logprob(by_task[task_id]):
                rows.append({"task_id": task_id, "candidate_id": cand.candidate_id,
                             "score": logprob})
        config = {"baseline": "logprob"}
    else:
        if not args.model:
            raise harness.ValidationError("either --model or --baseline is required")
        model = ranker.load_model(args.model)
        for cand in sorted(candidates, key=lambda c: (c.task_id, c.candidate_id)):
            task = tasks_by_id[cand.task_id]
            pred = ranker.predict(model, task.prompt, cand.code)
            row = {"task_id": cand.task_id, "candidate_id": cand.candidate_id, **pred}
            rows.append(row)
        config = {"model": args.model, "task": model.task,
                  "features": model.features.to_record()}
    rows.sort(key=lambda r: (r["task_id"], r["candidate_id"]))
    jsonio.write_jsonl(args.out, "scores", rows, config)
    print(f"wrote {len(rows)} scores to {args.out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    scores_header, scores = jsonio.read_jsonl(args.scores, "scores")
    _, reports = _load_reports(args.reports)
    try:
        ks = [int(k) for k in args.k.split(",") if k.strip()]
    except ValueError:
        raise harness.ValidationError(f"--k must be comma-separated integers, got {args.k!r}")
    if not ks:
        raise harness.ValidationError("--k must name at least one value")
    model_task = (scores_header.get("config") or {}).get("task")
    result = metrics.evaluate_corpus(scores, reports, ks, model_task=model_task)
    result["config"] = {"scores": args.scores, "reports": args.reports, "k": ks,
                        "model_task": model_task}
    print(metrics.render_table(result))
    diag = result["diagnostics"]
    if "classification" in diag:
        print(f"\n{diag['classification']['task']} head accuracy: "
              f"{diag['classification']['accuracy']:.4f} "
              f"over {diag['classification']['examples']} candidates")
    if "line_consistency_rate" in diag:
        print(f"line/exec-class consistency rate: {diag['line_consistency_rate']:.4f}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(result, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"\nwrote evaluation JSON to {args.out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
