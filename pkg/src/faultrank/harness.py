"""Isolated execution of candidate programs against their task's unit tests.

Each candidate gets one fresh interpreter subprocess speaking a one-shot JSON
protocol: a single request document on stdin, a single report line on stdout.
Candidate misbehavior (crashes, hangs, garbage on stdout, nonzero exit) never
raises here -- it is folded into the ExecutionReport, conservatively labeled
as an execution error when the driver's answer is unusable.

Isolation is process-level only (fresh process, scratch working directory,
wall-clock kill). It is not a security sandbox and is unsuitable for
adversarial code.
"""

from __future__ import annotations

import json
import os
import shutil
import subprocess
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Iterable, Optional

INTERPRETER_ENV = "FAULTRANK_INTERPRETER"
DRIVER_ENV = "FAULTRANK_DRIVER"
MEMORY_ENV = "FAULTRANK_MEMORY_MB"

DEFAULT_DRIVER_PATH = os.path.join("driver", "faultrank_driver.py")

#: Extra wall-clock seconds granted past the per-test timeouts before the
#: driver process is killed outright.
GRACE_S = 2.0

#: Synthetic exception type used when the driver's output is unusable
#: (killed, nonzero exit, or unparseable stdout). Classifies as Misc.
PROTOCOL_ERROR_TYPE = "ProtocolError"


class TestFormat(str, Enum):
    __test__ = False  # not a pytest class

    CALL_BASED = "call_based"
    STDIN_STDOUT = "stdin"


class Status(str, Enum):
    PASS = "Pass"
    WRONG_OUTPUT = "WrongOutput"
    EXEC_ERROR = "ExecError"
    TIMEOUT = "Timeout"


class Outcome(str, Enum):
    CORRECT = "Correct"
    INTENT_ERROR = "IntentError"
    EXECUTION_ERROR = "ExecutionError"


class ValidationError(ValueError):
    """An input record violates its schema or invariants."""


class HarnessError(Exception):
    pass


class DriverUnavailable(HarnessError):
    """Interpreter executable or driver script cannot be found."""


class MissingTask(ValidationError):
    """A candidate references a task_id absent from the task collection."""

    def __init__(self, task_id: str):
        super().__init__(f"candidate references unknown task_id {task_id!r}")
        self.task_id = task_id


@dataclass(frozen=True)
class Task:
    """One code-generation problem: prompt plus unit tests.

    CallBased tasks invoke `function_name` with each input's argument list
    and compare return values; StdinStdout tasks feed each input text blob
    to the program's standard input and compare printed output.
    """

    task_id: str
    prompt: str
    test_format: TestFormat
    inputs: tuple
    expected_outputs: tuple
    function_name: Optional[str] = None
    starter_code: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "test_format", TestFormat(self.test_format))
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "expected_outputs", tuple(self.expected_outputs))
        if not self.task_id:
            raise ValidationError("task_id must be nonempty")
        if len(self.inputs) != len(self.expected_outputs):
            raise ValidationError(
                f"task {self.task_id}: {len(self.inputs)} inputs vs "
                f"{len(self.expected_outputs)} expected_outputs"
            )
        if len(self.inputs) < 1:
            raise ValidationError(f"task {self.task_id}: needs at least one test")
        if (self.test_format is TestFormat.CALL_BASED) != (self.function_name is not None):
            raise ValidationError(
                f"task {self.task_id}: function_name required iff test_format is call_based"
            )

    @property
    def num_tests(self) -> int:
        return len(self.inputs)


@dataclass(frozen=True)
class Candidate:
    """One sampled program for a task. `code` may be empty."""

    task_id: str
    candidate_id: str
    code: str
    gen_logprob: Optional[float] = None

    def __post_init__(self):
        if not self.task_id or not self.candidate_id:
            raise ValidationError("task_id and candidate_id must be nonempty")


@dataclass
class TestResult:
    """Outcome of one candidate on one unit test."""

    __test__ = False  # keep pytest from collecting this as a test class

    test_index: int
    status: Status
    expected_output: Any
    exception_type: Optional[str] = None
    exception_message: Optional[str] = None
    error_line: Optional[int] = None
    produced_output: Any = None

    def __post_init__(self):
        self.status = Status(self.status)
        failed_execution = self.status in (Status.EXEC_ERROR, Status.TIMEOUT)
        if failed_execution and not self.exception_type:
            raise ValidationError(f"test {self.test_index}: {self.status.value} needs exception_type")
        if not failed_execution and self.exception_type is not None:
            raise ValidationError(f"test {self.test_index}: exception_type only on ExecError/Timeout")


@dataclass
class ExecutionReport:
    """One candidate's aggregate result over its task's tests."""

    task_id: str
    candidate_id: str
    outcome: Outcome
    results: list[TestResult]
    first_failure_index: Optional[int]
    wall_time_ms: int

    @classmethod
    def from_results(cls, task_id: str, candidate_id: str, results: list[TestResult],
                     wall_time_ms: int) -> "ExecutionReport":
        """Derive outcome and first_failure_index from per-test results.

        Execution errors dominate wrong outputs: a single ExecError/Timeout
        anywhere makes the whole candidate an ExecutionError.
        """
        statuses = [r.status for r in results]
        if any(s in (Status.EXEC_ERROR, Status.TIMEOUT) for s in statuses):
            outcome = Outcome.EXECUTION_ERROR
        elif all(s is Status.PASS for s in statuses):
            outcome = Outcome.CORRECT
        else:
            outcome = Outcome.INTENT_ERROR
        first_failure = next(
            (i for i, s in enumerate(statuses) if s is not Status.PASS), None
        )
        return cls(task_id, candidate_id, outcome, results, first_failure, wall_time_ms)

    def representative_result(self) -> Optional[TestResult]:
        """First failing test in the dominating status tier, None if Correct.

        For ExecutionError reports this is the first ExecError/Timeout test
        (even if an earlier test merely produced wrong output); for
        IntentError reports, the first WrongOutput test.
        """
        if self.outcome is Outcome.CORRECT:
            return None
        if self.outcome is Outcome.EXECUTION_ERROR:
            wanted = (Status.EXEC_ERROR, Status.TIMEOUT)
        else:
            wanted = (Status.WRONG_OUTPUT,)
        return next(r for r in self.results if r.status in wanted)


@dataclass(frozen=True)
class ExecutionLimits:
    timeout_s: float = 4.0
    memory_mb: Optional[int] = None

    def __post_init__(self):
        if self.timeout_s <= 0:
            raise ValidationError("timeout_s must be > 0")


# ---------------------------------------------------------------------------
# wire (de)serialization


def result_to_record(result: TestResult) -> dict:
    rec: dict[str, Any] = {
        "test_index": result.test_index,
        "status": result.status.value,
        "expected_output": result.expected_output,
    }
    if result.status in (Status.EXEC_ERROR, Status.TIMEOUT):
        rec["exception_type"] = result.exception_type
        rec["exception_message"] = result.exception_message
        if result.error_line is not None:
            rec["error_line"] = result.error_line
    else:
        rec["produced_output"] = result.produced_output
    return rec


def result_from_record(rec: dict) -> TestResult:
    return TestResult(
        test_index=rec["test_index"],
        status=Status(rec["status"]),
        expected_output=rec.get("expected_output"),
        exception_type=rec.get("exception_type"),
        exception_message=rec.get("exception_message"),
        error_line=rec.get("error_line"),
        produced_output=rec.get("produced_output"),
    )


def report_to_record(report: ExecutionReport) -> dict:
    return {
        "task_id": report.task_id,
        "candidate_id": report.candidate_id,
        "outcome": report.outcome.value,
        "first_failure_index": report.first_failure_index,
        "wall_time_ms": report.wall_time_ms,
        "results": [result_to_record(r) for r in report.results],
    }


def report_from_record(rec: dict) -> ExecutionReport:
    return ExecutionReport(
        task_id=rec["task_id"],
        candidate_id=rec["candidate_id"],
        outcome=Outcome(rec["outcome"]),
        results=[result_from_record(r) for r in rec["results"]],
        first_failure_index=rec.get("first_failure_index"),
        wall_time_ms=rec.get("wall_time_ms", 0),
    )


def task_to_record(task: Task) -> dict:
    rec: dict[str, Any] = {
        "task_id": task.task_id,
        "prompt": task.prompt,
        "test_format": task.test_format.value,
        "inputs": list(task.inputs),
        "expected_outputs": list(task.expected_outputs),
    }
    if task.function_name is not None:
        rec["function_name"] = task.function_name
    if task.starter_code is not None:
        rec["starter_code"] = task.starter_code
    return rec


def task_from_record(rec: dict) -> Task:
    return Task(
        task_id=rec["task_id"],
        prompt=rec["prompt"],
        test_format=TestFormat(rec["test_format"]),
        inputs=tuple(rec["inputs"]),
        expected_outputs=tuple(rec["expected_outputs"]),
        function_name=rec.get("function_name"),
        starter_code=rec.get("starter_code"),
    )


def candidate_to_record(cand: Candidate) -> dict:
    rec: dict[str, Any] = {
        "task_id": cand.task_id,
        "candidate_id": cand.candidate_id,
        "code": cand.code,
    }
    if cand.gen_logprob is not None:
        rec["gen_logprob"] = cand.gen_logprob
    return rec


def candidate_from_record(rec: dict) -> Candidate:
    return Candidate(
        task_id=rec["task_id"],
        candidate_id=rec["candidate_id"],
        code=rec.get("code", ""),
        gen_logprob=rec.get("gen_logprob"),
    )


# ---------------------------------------------------------------------------
# driver invocation


def resolve_interpreter(interpreter: Optional[str] = None) -> str:
    """Resolve the candidate-language interpreter executable.

    Precedence: explicit argument, FAULTRANK_INTERPRETER env var, the running
    Python. Raises DriverUnavailable if the executable cannot be found.
    """
    path = interpreter or os.environ.get(INTERPRETER_ENV) or sys.executable
    resolved = shutil.which(path) or (path if os.path.isfile(path) else None)
    if resolved is None:
        raise DriverUnavailable(f"interpreter not found: {path!r}")
    return resolved


def resolve_driver(driver_path: Optional[str] = None) -> str:
    path = driver_path or os.environ.get(DRIVER_ENV) or DEFAULT_DRIVER_PATH
    if not os.path.isfile(path):
        raise DriverUnavailable(f"driver script not found: {path!r}")
    return os.path.abspath(path)


def _driver_request(task: Task, candidate: Candidate, limits: ExecutionLimits) -> dict:
    return {
        "code": candidate.code,
        "test_format": task.test_format.value,
        "function_name": task.function_name,
        "inputs": list(task.inputs),
        "expected_outputs": list(task.expected_outputs),
        "timeout_s": limits.timeout_s,
    }


def _protocol_failure_results(task: Task, message: str) -> list[TestResult]:
    # Conservative: unusable driver output labels every test ExecError with a
    # synthetic exception type that classifies as Misc.
    return [
        TestResult(
            test_index=i,
            status=Status.EXEC_ERROR,
            expected_output=task.expected_outputs[i],
            exception_type=PROTOCOL_ERROR_TYPE,
            exception_message=message,
        )
        for i in range(task.num_tests)
    ]


def _results_from_driver(task: Task, payload: dict) -> list[TestResult]:
    per_test = payload["per_test"]
    compile_ok = payload["compile_ok"]
    if not isinstance(per_test, list) or not per_test:
        raise KeyError("per_test")
    if compile_ok and len(per_test) != task.num_tests:
        raise KeyError("per_test length")
    results = []
    for i in range(task.num_tests):
        entry = per_test[0] if not compile_ok else per_test[i]
        results.append(
            TestResult(
                test_index=i,
                status=Status(entry["status"]),
                expected_output=task.expected_outputs[i],
                exception_type=entry.get("exception_type"),
                exception_message=entry.get("exception_message"),
                error_line=entry.get("error_line"),
                produced_output=entry.get("produced_output"),
            )
        )
    return results


def execute_candidate(task: Task, candidate: Candidate,
                      limits: ExecutionLimits = ExecutionLimits(),
                      interpreter: Optional[str] = None,
                      driver_path: Optional[str] = None) -> ExecutionReport:
    """Run one candidate against its task's tests in a fresh driver process.

    The process is hard-killed `timeout_s * num_tests + GRACE_S` seconds
    after spawn; the driver's own per-test alarm is expected to fire well
    before that. Never raises on candidate misbehavior. Raises
    DriverUnavailable when the interpreter or driver script is missing.
    """
    if task.task_id != candidate.task_id:
        raise ValidationError(
            f"task_id mismatch: {task.task_id!r} vs {candidate.task_id!r}"
        )
    exe = resolve_interpreter(interpreter)
    driver = resolve_driver(driver_path)

    env = dict(os.environ)
    env["PYTHONHASHSEED"] = "0"
    if limits.memory_mb is not None:
        env[MEMORY_ENV] = str(limits.memory_mb)
    request = json.dumps(_driver_request(task, candidate, limits))
    deadline = limits.timeout_s * task.num_tests + GRACE_S

    start = time.monotonic()
    failure: Optional[str] = None
    payload: Optional[dict] = None
    with tempfile.TemporaryDirectory(prefix="faultrank_") as scratch:
        try:
            proc = subprocess.Popen(
                [exe, driver],
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                cwd=scratch,
                env=env,
                text=True,
            )
        except FileNotFoundError as exc:
            raise DriverUnavailable(f"cannot spawn {exe!r}: {exc}") from exc
        try:
            stdout, stderr = proc.communicate(request, timeout=deadline)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.communicate()
            failure = f"driver did not respond within {deadline:.1f}s and was killed"
        else:
            if proc.returncode != 0:
                failure = (
                    f"driver exited with code {proc.returncode}: "
                    f"{stderr.strip()[:300]}"
                )
            else:
                payload = _parse_driver_stdout(stdout)
                if payload is None:
                    failure = f"driver emitted unparseable output: {stdout.strip()[:120]!r}"
    wall_ms = int((time.monotonic() - start) * 1000)

    if payload is not None:
        try:
            results = _results_from_driver(task, payload)
        except (KeyError, TypeError, ValueError, ValidationError):
            results = _protocol_failure_results(task, "driver report failed validation")
    else:
        results = _protocol_failure_results(task, failure or "no driver output")
    return ExecutionReport.from_results(task.task_id, candidate.candidate_id, results, wall_ms)


def _parse_driver_stdout(stdout: str) -> Optional[dict]:
    lines = [ln for ln in stdout.splitlines() if ln.strip()]
    if not lines:
        return None
    try:
        payload = json.loads(lines[-1])
    except json.JSONDecodeError:
        return None
    if not isinstance(payload, dict) or "per_test" not in payload or "compile_ok" not in payload:
        return None
    return payload


def execute_corpus(tasks: Iterable[Task], candidates: Iterable[Candidate],
                   limits: ExecutionLimits = ExecutionLimits(),
                   workers: int = 1,
                   interpreter: Optional[str] = None,
                   driver_path: Optional[str] = None,
                   on_report: Optional[Callable[[ExecutionReport], None]] = None,
                   ) -> list[ExecutionReport]:
    """Execute every candidate once, with bounded parallelism.

    Reports come back sorted by (task_id, candidate_id) regardless of
    worker scheduling; `on_report` is invoked in that same order as each
    sorted-prefix result completes, so callers can flush incrementally.
    Validates all candidate->task references before executing anything.
    """
    if workers < 1:
        raise ValidationError("workers must be >= 1")
    by_id: dict[str, Task] = {}
    for task in tasks:
        if task.task_id in by_id:
            raise ValidationError(f"duplicate task_id {task.task_id!r}")
        by_id[task.task_id] = task
    ordered = sorted(candidates, key=lambda c: (c.task_id, c.candidate_id))
    seen = set()
    for cand in ordered:
        if cand.task_id not in by_id:
            raise MissingTask(cand.task_id)
        key = (cand.task_id, cand.candidate_id)
        if key in seen:
            raise ValidationError(f"duplicate candidate {key!r}")
        seen.add(key)

    # Fail fast on environment problems before burning through the corpus.
    resolve_interpreter(interpreter)
    resolve_driver(driver_path)

    def run(cand: Candidate) -> ExecutionReport:
        return execute_candidate(by_id[cand.task_id], cand, limits,
                                 interpreter=interpreter, driver_path=driver_path)

    reports: list[ExecutionReport] = []
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(run, cand) for cand in ordered]
        for fut in futures:
            report = fut.result()
            reports.append(report)
            if on_report is not None:
                on_report(report)
    return reports
