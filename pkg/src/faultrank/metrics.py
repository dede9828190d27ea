"""pass@k / exec@k estimators and their ranked variants.

pass@k uses the unbiased estimator 1 - C(n-c, k) / C(n, k), evaluated in the
product form

    1 - prod_{i = n-c+1 .. n} (1 - k / i)

so no factorial ever materializes. The terms are multiplied as exact
rationals and converted to float once at the end, which keeps the result
correctly rounded (pass@1 with c=26, n=100 is exactly 0.26, not
0.2599999...). exec@k is the same estimator with "clean execution" standing
in for "correct".

The ranked variants are deterministic per task: did any of the top-k
candidates under the ranker's ordering pass (resp. execute cleanly)?
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

from .harness import ExecutionReport, Outcome


class DomainError(ValueError):
    """pass@k / exec@k preconditions violated (need 0 <= c <= n, 1 <= k <= n)."""


class MissingRank(ValueError):
    """Ranked metric requested without a full ranking of the task's candidates."""


class JoinError(ValueError):
    """Scores and reports reference different candidate sets."""


def pass_at_k(n: int, c: int, k: int) -> float:
    """Unbiased estimate of P(any of k samples drawn from n is correct)."""
    if not (0 <= c <= n):
        raise DomainError(f"need 0 <= c <= n, got c={c}, n={n}")
    if not (1 <= k <= n):
        raise DomainError(f"need 1 <= k <= n, got k={k}, n={n}")
    prod = Fraction(1)
    for i in range(n - c + 1, n + 1):
        if i <= k:
            return 1.0
        prod *= Fraction(i - k, i)
    return float(1 - prod)


def exec_at_k(n: int, e: int, k: int) -> float:
    """Same estimator with e = count of candidates that execute cleanly."""
    return pass_at_k(n, e, k)


@dataclass
class TaskOutcomeSummary:
    """Per-task counts feeding the estimators, plus an optional ranking."""

    task_id: str
    n: int
    c: int
    e: int
    ranked_ids: Optional[list[str]] = None

    def __post_init__(self):
        if not (0 <= self.c <= self.e <= self.n):
            raise DomainError(
                f"task {self.task_id}: need 0 <= c <= e <= n, "
                f"got c={self.c}, e={self.e}, n={self.n}"
            )


def summarize_reports(reports: Iterable[ExecutionReport]) -> dict[str, TaskOutcomeSummary]:
    """Group reports by task and count correct / cleanly-executing candidates."""
    grouped: dict[str, list[ExecutionReport]] = {}
    for rep in reports:
        grouped.setdefault(rep.task_id, []).append(rep)
    out = {}
    for task_id, reps in sorted(grouped.items()):
        out[task_id] = TaskOutcomeSummary(
            task_id=task_id,
            n=len(reps),
            c=sum(r.outcome is Outcome.CORRECT for r in reps),
            e=sum(r.outcome is not Outcome.EXECUTION_ERROR for r in reps),
        )
    return out


def _ranked_hit(summary: TaskOutcomeSummary, predicate: Mapping[str, bool], k: int) -> bool:
    if summary.ranked_ids is None:
        raise MissingRank(f"task {summary.task_id}: no ranking attached")
    if len(summary.ranked_ids) != summary.n:
        raise MissingRank(
            f"task {summary.task_id}: ranking covers {len(summary.ranked_ids)} "
            f"of {summary.n} candidates"
        )
    if not (1 <= k <= summary.n):
        raise DomainError(f"need 1 <= k <= n, got k={k}, n={summary.n}")
    try:
        return any(predicate[cid] for cid in summary.ranked_ids[:k])
    except KeyError as exc:
        raise MissingRank(f"task {summary.task_id}: no outcome for candidate {exc}") from exc


def ranked_pass_at_k(summary: TaskOutcomeSummary, correctness: Mapping[str, bool], k: int) -> bool:
    """True iff any of the top-k ranked candidates is correct."""
    return _ranked_hit(summary, correctness, k)


def ranked_exec_at_k(summary: TaskOutcomeSummary, clean: Mapping[str, bool], k: int) -> bool:
    """True iff any of the top-k ranked candidates executes cleanly."""
    return _ranked_hit(summary, clean, k)


def evaluate_corpus(scores: Sequence[dict], reports: Sequence[ExecutionReport],
                    ks: Sequence[int], model_task: Optional[str] = None) -> dict:
    """Join ranker scores with ground-truth reports and aggregate per k.

    `scores` rows are {task_id, candidate_id, score, predicted_class?,
    predicted_line?}. Every scored candidate must have a report and every
    reported candidate a score. Emits corpus means of pass@k / exec@k (the
    estimator) and ranked pass@k / ranked exec@k (fraction of tasks whose
    top-k contains a hit), plus classification diagnostics when predictions
    are present.
    """
    reports_by_task: dict[str, dict[str, ExecutionReport]] = {}
    for rep in reports:
        reports_by_task.setdefault(rep.task_id, {})[rep.candidate_id] = rep
    scores_by_task: dict[str, list[dict]] = {}
    for row in scores:
        if row["task_id"] not in reports_by_task:
            raise JoinError(f"score references unknown task {row['task_id']!r}")
        scores_by_task.setdefault(row["task_id"], []).append(row)

    for task_id, rows in scores_by_task.items():
        have = {r["candidate_id"] for r in rows}
        want = set(reports_by_task[task_id])
        if have != want:
            raise JoinError(
                f"task {task_id}: scored candidates {sorted(have ^ want)} "
                "do not match reported ones"
            )
    unscored = sorted(set(reports_by_task) - set(scores_by_task))
    if unscored:
        raise JoinError(f"no scores for tasks {unscored}")

    summaries = []
    for task_id in sorted(scores_by_task):
        rows = sorted(scores_by_task[task_id],
                      key=lambda r: (-r["score"], r["candidate_id"]))
        reps = reports_by_task[task_id]
        summaries.append((
            TaskOutcomeSummary(
                task_id=task_id,
                n=len(reps),
                c=sum(r.outcome is Outcome.CORRECT for r in reps.values()),
                e=sum(r.outcome is not Outcome.EXECUTION_ERROR for r in reps.values()),
                ranked_ids=[r["candidate_id"] for r in rows],
            ),
            {cid: rep.outcome is Outcome.CORRECT for cid, rep in reps.items()},
            {cid: rep.outcome is not Outcome.EXECUTION_ERROR for cid, rep in reps.items()},
        ))

    per_k = {}
    for k in ks:
        per_k[str(k)] = {
            "pass": _mean([pass_at_k(s.n, s.c, k) for s, _, _ in summaries]),
            "exec": _mean([exec_at_k(s.n, s.e, k) for s, _, _ in summaries]),
            "ranked_pass": _mean([
                float(ranked_pass_at_k(s, correct, k)) for s, correct, _ in summaries
            ]),
            "ranked_exec": _mean([
                float(ranked_exec_at_k(s, clean, k)) for s, _, clean in summaries
            ]),
        }

    result = {
        "tasks": len(summaries),
        "candidates": sum(s.n for s, _, _ in summaries),
        "k": per_k,
        "diagnostics": _diagnostics(scores, reports_by_task, model_task),
    }
    return result


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values) if values else 0.0


def _true_class(report: ExecutionReport, model_task: str) -> Optional[str]:
    # Local import: taxonomy pulls in harness types, not the other way round.
    from . import taxonomy

    if model_task == "binary":
        return taxonomy.CORRECT if report.outcome is Outcome.CORRECT else taxonomy.WRONG
    if model_task == "ternary":
        return report.outcome.value
    rep = report.representative_result()
    if model_task == "intent":
        if report.outcome is not Outcome.INTENT_ERROR:
            return report.outcome.value
        try:
            return taxonomy.classify_intent_error(rep.produced_output, rep.expected_output)
        except taxonomy.ContractViolation:
            return "Misc"
    if model_task in ("exec", "exec-line"):
        if report.outcome is not Outcome.EXECUTION_ERROR:
            return report.outcome.value
        return taxonomy.classify_execution_error(rep.exception_type)
    return None


def _diagnostics(scores: Sequence[dict], reports_by_task: dict,
                 model_task: Optional[str]) -> dict:
    diag: dict = {}
    predicted = [row for row in scores if "predicted_class" in row]
    if predicted and model_task:
        confusion: dict[str, dict[str, int]] = {}
        hits = 0
        for row in predicted:
            rep = reports_by_task[row["task_id"]][row["candidate_id"]]
            truth = _true_class(rep, model_task)
            if truth is None:
                continue
            confusion.setdefault(truth, {})
            confusion[truth][row["predicted_class"]] = \
                confusion[truth].get(row["predicted_class"], 0) + 1
            hits += truth == row["predicted_class"]
        diag["classification"] = {
            "task": model_task,
            "examples": len(predicted),
            "accuracy": hits / len(predicted),
            "confusion": {t: dict(sorted(p.items())) for t, p in sorted(confusion.items())},
        }

    with_line = [row for row in predicted if row.get("predicted_line") is not None]
    if with_line:
        # Heads are independent; exec-class and line predictions agreeing
        # (exec error <=> line != 0) is reported, never enforced.
        from .taxonomy import EXEC_ERROR_CLASSES

        consistent = sum(
            (row["predicted_class"] in EXEC_ERROR_CLASSES) == (row["predicted_line"] != 0)
            for row in with_line
        )
        diag["line_consistency_rate"] = consistent / len(with_line)
    return diag


def render_table(result: dict) -> str:
    """Aligned text table of the per-k metric families."""
    headers = ["k", "pass@k", "ranked pass@k", "exec@k", "ranked exec@k"]
    rows = []
    for k, vals in sorted(result["k"].items(), key=lambda kv: int(kv[0])):
        rows.append([
            k,
            f"{vals['pass']:.4f}",
            f"{vals['ranked_pass']:.4f}",
            f"{vals['exec']:.4f}",
            f"{vals['ranked_exec']:.4f}",
        ])
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h)
              for i, h in enumerate(headers)]
    lines = ["  ".join(h.rjust(w) for h, w in zip(headers, widths))]
    for row in rows:
        lines.append("  ".join(v.rjust(w) for v, w in zip(row, widths)))
    return "\n".join(lines)
