#!/usr/bin/env python3
"""Full ranking experiment on a generated corpus, library-API edition.

Generates a labeled corpus with weak lexical fault signals, splits it by
task, trains rankers on three of the five classification tasks, and
compares ranked pass@1 / ranked exec@1 on held-out tasks against the
permutation-averaged baselines.
"""

import warnings

from faultrank.dataset import SplitSpec, build_dataset, compute_stats
from faultrank.features import FeatureConfig
from faultrank.metrics import exec_at_k, pass_at_k
from faultrank.ranker import TrainConfig, predict, score, train
from faultrank.synthetic import generate_corpus

FEATURES = FeatureConfig(dim=2 ** 15, max_tokens=256, ngram_order=2)
TRAIN = TrainConfig(epochs=30, batch_size=128, lr=0.5, seed=7, features=FEATURES)


def top1_metrics(examples, model):
    by_task = {}
    for ex in examples:
        by_task.setdefault(ex.task_id, []).append(ex)
    ranked_pass = ranked_exec = base_pass = base_exec = 0.0
    for members in by_task.values():
        top = min(members, key=lambda x: (-score(model, x.prompt, x.code), x.candidate_id))
        ranked_pass += top.labels.binary == "Correct"
        ranked_exec += top.labels.ternary != "ExecutionError"
        n = len(members)
        base_pass += pass_at_k(n, sum(x.labels.binary == "Correct" for x in members), 1)
        base_exec += exec_at_k(n, sum(x.labels.ternary != "ExecutionError" for x in members), 1)
    t = len(by_task)
    return ranked_pass / t, ranked_exec / t, base_pass / t, base_exec / t


def main():
    corpus = generate_corpus(n_tasks=60, n_per_task=20, seed=7, features=FEATURES)
    splits = build_dataset(corpus.examples, SplitSpec(0.6, 0.2, seed=7))
    stats = compute_stats(splits.train)
    print(f"corpus: {len(corpus.tasks)} tasks x 20 candidates; "
          f"train/val/test = {len(splits.train)}/{len(splits.val)}/{len(splits.test)}")
    print(f"train imbalance Wrong:Correct = {stats.wrong_to_correct}")
    print(f"train ternary counts: {stats.counts['ternary']}\n")

    header = f"{'ranker':<10} {'ranked pass@1':>14} {'pass@1':>8} {'ranked exec@1':>14} {'exec@1':>8}"
    print("held-out tasks:")
    print(header)
    models = {}
    for task in ("binary", "ternary", "exec-line"):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            models[task] = train(splits.train, splits.val, task, TRAIN)
        rp, re, bp, be = top1_metrics(splits.test, models[task])
        print(f"{task:<10} {rp:>14.3f} {bp:>8.3f} {re:>14.3f} {be:>8.3f}")

    line_model = models["exec-line"]
    heldout = splits.val + splits.test
    exec_examples = [x for x in heldout if x.labels.ternary == "ExecutionError"]
    line_hits = sum(
        predict(line_model, x.prompt, x.code)["predicted_line"] == x.labels.line_class
        for x in exec_examples
    )
    print(f"\nerror-line head: {line_hits}/{len(exec_examples)} faulty lines "
          f"identified exactly on held-out execution errors")

    by_lp = {}
    for ex in splits.test:
        by_lp.setdefault(ex.task_id, []).append(ex)
    hits = 0
    for members in by_lp.values():
        top = min(members, key=lambda x: (-(x.gen_logprob or -99), x.candidate_id))
        hits += top.labels.binary == "Correct"
    print(f"generation-probability baseline ranked pass@1: {hits / len(by_lp):.3f}")


if __name__ == "__main__":
    main()
