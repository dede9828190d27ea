"""Ranker dataset assembly: task-level splits, class statistics, weights,
and dataset mixing.

Splits group by task_id so all 100 samples of a problem land in the same
partition -- a ranker must never see another split's correct solution for a
task it is scored on. Class weights follow inverse frequency,
N_total / (K_nonempty * N_class), so the weighted counts of the nonempty
classes sum back to N_total.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .harness import ValidationError
from .taxonomy import (
    BINARY_CLASSES,
    CORRECT,
    EXEC12_CLASSES,
    FaultLabelSet,
    INTENT11_CLASSES,
    TERNARY_CLASSES,
)

TASK_TYPES = ("binary", "ternary", "intent", "exec", "line")

_CLASS_SPACES = {
    "binary": BINARY_CLASSES,
    "ternary": TERNARY_CLASSES,
    "intent": INTENT11_CLASSES,
    "exec": EXEC12_CLASSES,
}


class EmptyPartition(ValueError):
    """A split fraction rounded down to zero tasks."""


@dataclass(frozen=True)
class RankerExample:
    """One labeled (task, candidate) pair ready for ranker training."""

    task_id: str
    candidate_id: str
    prompt: str
    code: str
    labels: FaultLabelSet
    source_model: str = ""
    gen_logprob: Optional[float] = None

    def label_for(self, task_type: str) -> str | int:
        if task_type == "binary":
            return self.labels.binary
        if task_type == "ternary":
            return self.labels.ternary
        if task_type == "intent":
            return self.labels.intent11
        if task_type in ("exec", "exec-line"):
            return self.labels.exec12
        if task_type == "line":
            return self.labels.line_class
        raise ValueError(f"unknown task type {task_type!r}")

    def to_record(self) -> dict:
        rec = {
            "task_id": self.task_id,
            "candidate_id": self.candidate_id,
            "prompt": self.prompt,
            "code": self.code,
            "source_model": self.source_model,
            "labels": self.labels.to_record(),
        }
        if self.gen_logprob is not None:
            rec["gen_logprob"] = self.gen_logprob
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "RankerExample":
        return cls(
            task_id=rec["task_id"],
            candidate_id=rec["candidate_id"],
            prompt=rec["prompt"],
            code=rec["code"],
            labels=FaultLabelSet.from_record(rec["labels"]),
            source_model=rec.get("source_model", ""),
            gen_logprob=rec.get("gen_logprob"),
        )


@dataclass
class ClassStats:
    """Per-task-type class counts and the derived loss weights."""

    counts: dict[str, dict[str, int]]
    weights: dict[str, dict[str, float]]
    examples: int
    tasks: int
    wrong_to_correct: Optional[float]

    def to_record(self) -> dict:
        return {
            "examples": self.examples,
            "tasks": self.tasks,
            "wrong_to_correct": self.wrong_to_correct,
            "counts": self.counts,
            "weights": self.weights,
        }


def compute_stats(examples: Iterable[RankerExample]) -> ClassStats:
    examples = list(examples)
    counts: dict[str, dict[str, int]] = {t: {} for t in TASK_TYPES}
    for ex in examples:
        for task_type in TASK_TYPES:
            label = str(ex.label_for(task_type))
            counts[task_type][label] = counts[task_type].get(label, 0) + 1
    weights = {t: compute_class_weights(counts[t]) for t in TASK_TYPES}
    n_correct = counts["binary"].get(CORRECT, 0)
    n_wrong = counts["binary"].get("Wrong", 0)
    ratio = round(n_wrong / n_correct, 3) if n_correct else None
    return ClassStats(
        counts={t: dict(sorted(c.items())) for t, c in counts.items()},
        weights={t: dict(sorted(w.items())) for t, w in weights.items()},
        examples=len(examples),
        tasks=len({ex.task_id for ex in examples}),
        wrong_to_correct=ratio,
    )


def compute_class_weights(counts: dict[str, int]) -> dict[str, float]:
    """weight_c = N_total / (K_nonempty * N_c); empty classes weigh 0."""
    total = sum(counts.values())
    nonempty = [c for c, n in counts.items() if n > 0]
    if not nonempty:
        raise ValueError("at least one class must be nonempty")
    k = len(nonempty)
    return {c: (total / (k * n) if n > 0 else 0.0) for c, n in counts.items()}


@dataclass(frozen=True)
class SplitSpec:
    train_frac: float
    val_frac: float
    seed: int
    require_solvable: bool = False

    def __post_init__(self):
        if not (0 < self.train_frac < 1 and 0 < self.val_frac < 1):
            raise ValidationError("fractions must lie in (0, 1)")
        if self.train_frac + self.val_frac > 1 + 1e-9:
            raise ValidationError("train_frac + val_frac must be <= 1")


@dataclass
class DatasetSplits:
    train: list[RankerExample]
    val: list[RankerExample]
    test: list[RankerExample]
    stats: dict[str, ClassStats] = field(default_factory=dict)

    def partitions(self) -> dict[str, list[RankerExample]]:
        return {"train": self.train, "val": self.val, "test": self.test}


def build_dataset(examples: Iterable[RankerExample], spec: SplitSpec) -> DatasetSplits:
    """Deterministic task-grouped train/val/test split with per-partition stats.

    With `require_solvable`, validation tasks are drawn only from tasks that
    have at least one Correct candidate (the remaining tasks stay eligible
    for train/test).
    """
    examples = list(examples)
    by_task: dict[str, list[RankerExample]] = {}
    for ex in examples:
        by_task.setdefault(ex.task_id, []).append(ex)
    task_ids = sorted(by_task)
    rng = random.Random(spec.seed)
    rng.shuffle(task_ids)

    n_tasks = len(task_ids)
    n_train = round(spec.train_frac * n_tasks)
    n_val = round(spec.val_frac * n_tasks)
    n_val = min(n_val, n_tasks - n_train)
    if n_train == 0:
        raise EmptyPartition(f"train_frac {spec.train_frac} rounds to zero of {n_tasks} tasks")
    if n_val == 0:
        raise EmptyPartition(f"val_frac {spec.val_frac} rounds to zero of {n_tasks} tasks")

    if spec.require_solvable:
        solvable = {
            t for t in task_ids
            if any(ex.labels.binary == CORRECT for ex in by_task[t])
        }
        val_tasks = [t for t in task_ids if t in solvable][:n_val]
        if len(val_tasks) < n_val:
            raise EmptyPartition(
                f"only {len(val_tasks)} solvable tasks for a validation set of {n_val}"
            )
        rest = [t for t in task_ids if t not in set(val_tasks)]
    else:
        val_tasks = task_ids[:n_val]
        rest = task_ids[n_val:]
    train_tasks, test_tasks = rest[:n_train], rest[n_train:]

    def collect(ids: list[str]) -> list[RankerExample]:
        picked = [ex for t in ids for ex in by_task[t]]
        return sorted(picked, key=lambda e: (e.task_id, e.candidate_id))

    splits = DatasetSplits(
        train=collect(train_tasks), val=collect(val_tasks), test=collect(test_tasks)
    )
    for name, part in splits.partitions().items():
        if part:
            splits.stats[name] = compute_stats(part)
    return splits


def merge_datasets(inputs: list[list[RankerExample]], sample_frac: float,
                   seed: int) -> list[RankerExample]:
    """Concatenate datasets, optionally subsampling each at the task level.

    sample_frac = 1 keeps everything (mixed-large); sample_frac < 1 keeps a
    uniform fraction of each input's tasks before concatenating
    (mixed-small). Provenance stays on each example's source_model.
    """
    if not (0 < sample_frac <= 1):
        raise ValidationError("sample_frac must lie in (0, 1]")
    rng = random.Random(seed)
    merged: list[RankerExample] = []
    for dataset in inputs:
        if sample_frac == 1:
            merged.extend(dataset)
            continue
        task_ids = sorted({ex.task_id for ex in dataset})
        rng.shuffle(task_ids)
        keep = set(task_ids[:round(sample_frac * len(task_ids))])
        merged.extend(ex for ex in dataset if ex.task_id in keep)
    return merged
