"""Synthetic labeled corpora with controllable lexical fault signals.

Builds desk-scale stand-ins for a real sampled-program corpus: tasks,
candidates whose code carries fault-typical token patterns, and recorded
execution reports consistent with those faults. Wrong candidates embed a
class-typical identifier (probabilistically, so the signal stays weak), and
execution-error candidates carry it on the faulty line itself, which makes
the corpus usable for line-head training. Labels are extracted from the
synthetic reports through the regular taxonomy path, never invented
directly, so report/label consistency holds by construction.

The reports are recordings, not replayable programs: the candidate code is
lexical scaffolding and is never executed.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .dataset import RankerExample
from .features import FeatureConfig, count_encoded_lines
from .harness import (
    Candidate,
    ExecutionReport,
    Status,
    Task,
    TestFormat,
    TestResult,
)
from .taxonomy import label_report

_EXEC_FAULT_LINES = {
    "NameError": "    total += missing_operand",
    "ValueError": "    scale = int('not_a_number_literal')",
    "EOFError": "    extra = consume_exhausted_stream()",
    "TypeError": "    total += measure(None) + 'mixed_units'",
    "IndexError": "    probe = window[overrun_offset]",
    "KeyError": "    entry = registry['absent_entry_key']",
    "TimeoutException": "    while spin_without_progress(): pass",
    "SyntaxError": "    return total +",
    "Misc": "    shadow = total.unknown_attribute_probe",
}

# (produced, expected, telltale code line) per intent class
_INTENT_FAULTS = {
    "NoneError": (None, 42, "    return nothing_aggregated()"),
    "EmptyError": ([], [1, 2, 3], "    return empty_fallback_payload"),
    "OutputTypeError": ("scrambled", 7, "    return stringified_molecule(total)"),
    "LengthError": ([1, 2, 3, 4], [1, 2, 3], "    return padded_overlong_window(acc)"),
    "IntSmallError": (41, 42, "    return total - tiny_offset_slip"),
    "IntLargeError": (990, 42, "    return total * runaway_multiplier"),
    "StringSmallError": ("helloworld", "hello world", "    return fused_without_spaces(acc)"),
    "StringLargeError": ("Not!!", "Jumping!!", "    return verdict_flipped_branch(total)"),
    "Misc": ({"a": 1}, {"a": 2}, "    return drifting_map_values(acc)"),
}

_CORRECT_LINE = "    return stable_reduce(acc)"

_NOISE_LINES = (
    "    acc = []",
    "    total = 0",
    "    for item in xs:",
    "        acc.append(item)",
    "    total = running_sum(acc)",
    "    acc = normalized(acc)",
    "    checkpoint = len(acc)",
)

_PROMPT_VERBS = ("aggregate", "fold", "summarize", "compress", "merge", "reduce")
_PROMPT_NOUNS = ("sequence", "window", "ledger", "stream", "batch", "series")


@dataclass
class SyntheticCorpus:
    tasks: list[Task] = field(default_factory=list)
    candidates: list[Candidate] = field(default_factory=list)
    reports: list[ExecutionReport] = field(default_factory=list)
    examples: list[RankerExample] = field(default_factory=list)


def generate_corpus(n_tasks: int = 60, n_per_task: int = 20, seed: int = 0,
                    features: FeatureConfig = FeatureConfig(),
                    intent_signal: float = 0.85,
                    correct_signal: float = 0.8) -> SyntheticCorpus:
    """Generate tasks x candidates with labeled synthetic reports.

    `intent_signal` / `correct_signal` are the probabilities that a wrong
    (resp. correct) candidate actually carries its telltale line; lowering
    them weakens the lexical signal available to a ranker.
    """
    rng = random.Random(seed)
    corpus = SyntheticCorpus()
    exec_classes = sorted(_EXEC_FAULT_LINES)
    intent_classes = sorted(_INTENT_FAULTS)

    for t in range(n_tasks):
        task_id = f"syn{t:04d}"
        verb = rng.choice(_PROMPT_VERBS)
        noun = rng.choice(_PROMPT_NOUNS)
        prompt = (
            f"Write a function named solve that will {verb} the given {noun} "
            f"and return one value. Example: solve([1, 2, 3]) == 42. "
            f"Use Call-Based format."
        )
        task = Task(
            task_id=task_id,
            prompt=prompt,
            test_format=TestFormat.CALL_BASED,
            inputs=([1, 2, 3], [4, 5], [6]),
            expected_outputs=(42, 43, 44),
            function_name="solve",
        )
        corpus.tasks.append(task)

        n_correct = rng.randint(1, 4)
        outcomes = ["correct"] * n_correct
        for _ in range(n_per_task - n_correct):
            outcomes.append(rng.choice(("intent", "exec")))
        rng.shuffle(outcomes)

        for c, kind in enumerate(outcomes):
            candidate_id = f"c{c:03d}"
            body = [rng.choice(_NOISE_LINES) for _ in range(rng.randint(1, 3))]
            fault_class = None
            fault_pair = None
            if kind == "correct":
                if rng.random() < correct_signal:
                    body.append(_CORRECT_LINE)
                else:
                    body.append("    return total")
            elif kind == "intent":
                fault_class = rng.choice(intent_classes)
                produced, expected, line = _INTENT_FAULTS[fault_class]
                fault_pair = (produced, expected)
                if rng.random() < intent_signal:
                    body.append(line)
                else:
                    body.append("    return total")
            else:
                fault_class = rng.choice(exec_classes)
                body.insert(rng.randrange(len(body) + 1), _EXEC_FAULT_LINES[fault_class])
            lines = ["def solve(xs):"] + body
            code = "\n".join(lines)
            logprob_mu = -4.0 if kind == "correct" else -5.0
            cand = Candidate(task_id, candidate_id, code,
                             gen_logprob=round(rng.gauss(logprob_mu, 1.0), 4))
            corpus.candidates.append(cand)

            if kind == "exec":
                error_line = lines.index(_EXEC_FAULT_LINES[fault_class]) + 1
                report = _exec_report(task, cand, fault_class, error_line)
            elif kind == "intent":
                report = _intent_report(task, cand, *fault_pair)
            else:
                report = _correct_report(task, cand)
            corpus.reports.append(report)

            m = count_encoded_lines(prompt, code, features)
            labels = label_report(report, cand, m, test_format=task.test_format)
            if kind == "exec":
                assert labels.exec12 == fault_class
            elif kind == "intent":
                assert labels.intent11 == fault_class
            corpus.examples.append(RankerExample(
                task_id=task_id,
                candidate_id=candidate_id,
                prompt=prompt,
                code=code,
                labels=labels,
                source_model="synthetic",
                gen_logprob=cand.gen_logprob,
            ))
    return corpus


def corpus_to_files(corpus: SyntheticCorpus, out_dir: str, seed: int | None = None) -> dict[str, str]:
    """Write the corpus as tasks/candidates/reports JSONL; returns the paths."""
    import os

    from . import harness, jsonio

    os.makedirs(out_dir, exist_ok=True)
    config = {"generator": "synthetic"} if seed is None else {"generator": "synthetic", "seed": seed}
    paths = {
        "tasks": os.path.join(out_dir, "tasks.jsonl"),
        "candidates": os.path.join(out_dir, "candidates.jsonl"),
        "reports": os.path.join(out_dir, "reports.jsonl"),
    }
    jsonio.write_jsonl(paths["tasks"], "tasks",
                       [harness.task_to_record(t) for t in corpus.tasks], config)
    jsonio.write_jsonl(paths["candidates"], "candidates",
                       [harness.candidate_to_record(c) for c in corpus.candidates], config)
    jsonio.write_jsonl(paths["reports"], "reports",
                       [harness.report_to_record(r) for r in corpus.reports], config)
    return paths


def _correct_report(task: Task, cand: Candidate) -> ExecutionReport:
    results = [
        TestResult(i, Status.PASS, expected_output=exp, produced_output=exp)
        for i, exp in enumerate(task.expected_outputs)
    ]
    return ExecutionReport.from_results(task.task_id, cand.candidate_id, results, 0)


def _intent_report(task: Task, cand: Candidate, produced, expected) -> ExecutionReport:
    results = [TestResult(0, Status.WRONG_OUTPUT, expected_output=expected,
                          produced_output=produced)]
    for i in range(1, task.num_tests):
        results.append(TestResult(i, Status.PASS,
                                  expected_output=task.expected_outputs[i],
                                  produced_output=task.expected_outputs[i]))
    return ExecutionReport.from_results(task.task_id, cand.candidate_id, results, 0)


def _exec_report(task: Task, cand: Candidate, exec_class: str,
                 error_line: int) -> ExecutionReport:
    status = Status.TIMEOUT if exec_class == "TimeoutException" else Status.EXEC_ERROR
    exc_type = {"Misc": "AttributeError"}.get(exec_class, exec_class)
    results = [
        TestResult(i, status, expected_output=exp, exception_type=exc_type,
                   exception_message=f"synthetic {exc_type}", error_line=error_line)
        for i, exp in enumerate(task.expected_outputs)
    ]
    return ExecutionReport.from_results(task.task_id, cand.candidate_id, results, 0)
