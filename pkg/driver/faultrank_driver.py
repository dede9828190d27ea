#!/usr/bin/env python3
"""Sandbox test driver: runs one candidate program against its unit tests.

Protocol (one-shot, one process per candidate):
  stdin   one JSON request document:
            {"code": str, "test_format": "call_based" | "stdin",
             "function_name": str | null, "inputs": [...],
             "expected_outputs": [...], "timeout_s": float}
  stdout  one JSON report line:
            {"compile_ok": bool, "per_test": [{"status", "exception_type",
             "exception_message", "error_line", "produced_output"}, ...]}
  stderr  driver diagnostics only

Exit code is 0 for any candidate behavior, including crashes, hangs caught
by the per-test alarm, and garbage code; 1 is reserved for driver-internal
failure (e.g. malformed request). If compile_ok is false the single
per_test entry applies to every test.

Candidate code is compiled under a synthetic filename so its traceback
frames are distinguishable from driver frames; error_line is the deepest
candidate frame. Each test runs under a wall-clock alarm, with stdin fed
from the test blob (call-based tests get an empty stdin, so stray input()
calls raise EOFError), stdout captured, and the visible RNG reseeded for
idempotent reports. File descriptor 1 is pointed at /dev/null during
execution so candidates cannot pollute the protocol stream.

This is process-level isolation only -- no container, no syscall filter --
and is unsuitable for adversarial code.
"""

import io
import json
import os
import random
import signal
import sys
import traceback
from contextlib import contextmanager, redirect_stderr, redirect_stdout

SYNTH_FILENAME = "<candidate>"
MESSAGE_LIMIT = 512
NUMERIC_TOL = 1e-6
PASS, WRONG_OUTPUT, EXEC_ERROR, TIMEOUT = "Pass", "WrongOutput", "ExecError", "Timeout"


class TimeoutException(BaseException):
    # BaseException so a candidate's `except Exception` cannot swallow the alarm
    pass


def _alarm(signum, frame):
    raise TimeoutException("test timed out")


@contextmanager
def time_limit(seconds: float):
    signal.signal(signal.SIGALRM, _alarm)
    signal.setitimer(signal.ITIMER_REAL, max(float(seconds), 0.01))
    try:
        yield
    finally:
        signal.setitimer(signal.ITIMER_REAL, 0)
        signal.signal(signal.SIGALRM, signal.SIG_DFL)


@contextmanager
def test_environment(stdin_text: str):
    """Fresh stdin/stdout/stderr plus a reseeded RNG for one test."""
    random.seed(0)
    captured = io.StringIO()
    old_stdin = sys.stdin
    sys.stdin = io.StringIO(stdin_text)
    try:
        with redirect_stdout(captured), redirect_stderr(io.StringIO()):
            yield captured
    finally:
        sys.stdin = old_stdin


def candidate_line(exc: BaseException):
    """Deepest traceback frame inside the candidate source, if any."""
    if isinstance(exc, SyntaxError) and exc.filename == SYNTH_FILENAME:
        return exc.lineno
    line = None
    for frame in traceback.extract_tb(exc.__traceback__):
        if frame.filename == SYNTH_FILENAME:
            line = frame.lineno
    return line


def to_jsonable(value, depth: int = 0):
    """Coerce a candidate's return value into JSON-friendly structure.

    Tuples become lists, sets become sorted lists, everything exotic
    becomes its repr. Depth-capped against cyclic structures.
    """
    if depth > 8:
        return repr(value)
    if value is None or isinstance(value, (bool, int, float, str)):
        return value
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v, depth + 1) for v in value]
    if isinstance(value, dict):
        return {str(k): to_jsonable(v, depth + 1) for k, v in value.items()}
    if isinstance(value, (set, frozenset)):
        try:
            items = sorted(value)
        except TypeError:
            items = sorted(value, key=repr)
        return [to_jsonable(v, depth + 1) for v in items]
    return repr(value)


# ---------------------------------------------------------------------------
# output comparison


def compare_outputs(produced, expected, test_format: str) -> bool:
    if test_format == "stdin":
        return _stdin_equal(str(produced), str(expected))
    return _value_equal(produced, expected)


def _value_equal(a, b) -> bool:
    if a is None or b is None:
        return a is None and b is None
    if isinstance(a, (int, float)) and isinstance(b, (int, float)):
        if isinstance(a, float) or isinstance(b, float):
            try:
                return abs(a - b) <= NUMERIC_TOL
            except OverflowError:
                return a == b
        return a == b
    if isinstance(a, str) and isinstance(b, str):
        return a == b
    if isinstance(a, (list, tuple)) and isinstance(b, (list, tuple)):
        return len(a) == len(b) and all(_value_equal(x, y) for x, y in zip(a, b))
    if isinstance(a, dict) and isinstance(b, dict):
        return a.keys() == b.keys() and all(_value_equal(a[k], b[k]) for k in a)
    return False


def _stdin_equal(a: str, b: str) -> bool:
    la, lb = _normalized_lines(a), _normalized_lines(b)
    return len(la) == len(lb) and all(_line_equal(x, y) for x, y in zip(la, lb))


def _normalized_lines(text: str):
    lines = [ln.rstrip() for ln in text.split("\n")]
    while lines and lines[-1] == "":
        lines.pop()
    return lines


def _line_equal(a: str, b: str) -> bool:
    if a == b:
        return True
    try:
        return abs(float(a) - float(b)) <= NUMERIC_TOL
    except (ValueError, OverflowError):
        return False


# ---------------------------------------------------------------------------
# per-test entries


def _entry(status, exception=None, message=None, line=None, produced=None):
    return {
        "status": status,
        "exception_type": exception,
        "exception_message": message[:MESSAGE_LIMIT] if message else message,
        "error_line": line,
        "produced_output": produced,
    }


def _error_entry(exc: BaseException):
    return _entry(EXEC_ERROR, exception=type(exc).__name__, message=str(exc),
                  line=candidate_line(exc))


def _timeout_entry(exc: TimeoutException, timeout_s: float):
    # line 1 when the alarm fired outside any candidate frame
    return _entry(TIMEOUT, exception="TimeoutException",
                  message=f"no result within {timeout_s}s",
                  line=candidate_line(exc) or 1)


def _verdict_entry(produced, expected, test_format: str):
    status = PASS if compare_outputs(produced, expected, test_format) else WRONG_OUTPUT
    return _entry(status, produced=produced)


# ---------------------------------------------------------------------------
# execution modes


def run_call_based(request: dict):
    code, fname = request["code"], request["function_name"]
    timeout_s = request["timeout_s"]
    n_tests = len(request["inputs"])
    try:
        code_obj = compile(code, SYNTH_FILENAME, "exec")
    except BaseException as exc:
        return False, [_error_entry(exc)]

    namespace = {"__name__": "__main__"}
    try:
        with test_environment(""):
            with time_limit(timeout_s):
                exec(code_obj, namespace)
    except TimeoutException as exc:
        return False, [_timeout_entry(exc, timeout_s)]
    except BaseException as exc:
        return False, [_error_entry(exc)]

    fn = namespace.get(fname)
    if not callable(fn):
        missing = _entry(EXEC_ERROR, exception="FunctionNotFound",
                         message=f"unit tests expect a function named {fname!r}")
        return True, [dict(missing) for _ in range(n_tests)]

    per_test = []
    for args, expected in zip(request["inputs"], request["expected_outputs"]):
        per_test.append(_run_one_call(fn, args, expected, timeout_s))
    return True, per_test


def _run_one_call(fn, args, expected, timeout_s: float):
    call_args = list(args) if isinstance(args, (list, tuple)) else [args]
    try:
        with test_environment("") as captured:
            with time_limit(timeout_s):
                value = fn(*call_args)
    except TimeoutException as exc:
        return _timeout_entry(exc, timeout_s)
    except BaseException as exc:
        return _error_entry(exc)
    printed = _safe_getvalue(captured)
    if value is None and printed.strip():
        # print-style solution: record the text rather than mislabeling None
        produced = printed
    else:
        produced = to_jsonable(value)
    return _verdict_entry(produced, expected, "call_based")


def run_stdin(request: dict):
    timeout_s = request["timeout_s"]
    try:
        code_obj = compile(request["code"], SYNTH_FILENAME, "exec")
    except BaseException as exc:
        return False, [_error_entry(exc)]
    per_test = []
    for blob, expected in zip(request["inputs"], request["expected_outputs"]):
        per_test.append(_run_one_stdin(code_obj, blob, expected, timeout_s))
    return True, per_test


def _run_one_stdin(code_obj, blob, expected, timeout_s: float):
    namespace = {"__name__": "__main__"}
    try:
        with test_environment(str(blob)) as captured:
            with time_limit(timeout_s):
                try:
                    exec(code_obj, namespace)
                except SystemExit as exc:
                    if exc.code not in (None, 0):
                        raise
    except TimeoutException as exc:
        return _timeout_entry(exc, timeout_s)
    except BaseException as exc:
        return _error_entry(exc)
    return _verdict_entry(_safe_getvalue(captured), expected, "stdin")


def _safe_getvalue(buffer: io.StringIO) -> str:
    try:
        return buffer.getvalue()
    except ValueError:  # candidate closed the stream
        return ""


def run_candidate(request: dict):
    if request["test_format"] == "call_based":
        return run_call_based(request)
    return run_stdin(request)


# ---------------------------------------------------------------------------
# process plumbing


def _ensure_fixed_hashseed():
    # str hashing must be stable for idempotent reports; re-exec once if the
    # parent did not pin it
    if os.environ.get("PYTHONHASHSEED") != "0":
        env = dict(os.environ, PYTHONHASHSEED="0")
        os.execve(sys.executable, [sys.executable, os.path.abspath(__file__)], env)


def _apply_memory_limit():
    raw = os.environ.get("FAULTRANK_MEMORY_MB")
    if not raw:
        return
    try:
        import resource

        limit = int(raw) * 1024 * 1024
        resource.setrlimit(resource.RLIMIT_AS, (limit, limit))
    except (ImportError, ValueError, OSError):
        pass


def main() -> int:
    _ensure_fixed_hashseed()
    _apply_memory_limit()
    raw = sys.stdin.buffer.read()

    # Reserve the protocol stream: candidates writing to fd 1 directly go to
    # /dev/null; only the final report reaches the real stdout.
    report_fd = os.dup(1)
    devnull = os.open(os.devnull, os.O_WRONLY)
    os.dup2(devnull, 1)
    os.close(devnull)

    try:
        request = json.loads(raw)
        for field in ("code", "test_format", "inputs", "expected_outputs", "timeout_s"):
            if field not in request:
                raise KeyError(field)
        if len(request["inputs"]) != len(request["expected_outputs"]):
            raise ValueError("inputs and expected_outputs length mismatch")
        sys.argv = [SYNTH_FILENAME]
        compile_ok, per_test = run_candidate(request)
        report = {"compile_ok": compile_ok, "per_test": per_test}
        payload = (json.dumps(report) + "\n").encode("utf-8")
    except Exception as exc:  # driver-internal failure, not candidate behavior
        os.write(2, f"driver failure: {exc!r}\n".encode("utf-8", "replace"))
        os._exit(1)
    os.write(report_fd, payload)
    # _exit dodges lingering non-daemon threads a candidate may have spawned
    os._exit(0)


if __name__ == "__main__":
    main()
