"""Fault taxonomy: maps execution reports to the five-task label vector.

Labels per (task, candidate) pair:
  binary    -- Correct | Wrong
  ternary   -- Correct | IntentError | ExecutionError
  intent11  -- Correct | ExecutionError | one of 9 intent-error classes
  exec12    -- Correct | IntentError   | one of 10 execution-error classes
  line_class -- 0 when there is no execution error, 1..m for the faulty
               source line (m = lines encoded by the featurizer), m+1 when
               the fault lies beyond the encoded window.
"""

from __future__ import annotations

from dataclasses import dataclass

from .harness import (
    Candidate,
    ExecutionReport,
    Outcome,
    TestFormat,
    ValidationError,
)

EXEC_ERROR_CLASSES = (
    "NameError",
    "ValueError",
    "EOFError",
    "TypeError",
    "IndexError",
    "KeyError",
    "TimeoutException",
    "SyntaxError",
    "FunctionNotFound",
    "Misc",
)

INTENT_ERROR_CLASSES = (
    "NoneError",
    "EmptyError",
    "OutputTypeError",
    "LengthError",
    "IntSmallError",
    "IntLargeError",
    "StringSmallError",
    "StringLargeError",
    "Misc",
)

CORRECT = "Correct"
WRONG = "Wrong"

BINARY_CLASSES = (CORRECT, WRONG)
TERNARY_CLASSES = (CORRECT, Outcome.INTENT_ERROR.value, Outcome.EXECUTION_ERROR.value)
INTENT11_CLASSES = (CORRECT, Outcome.EXECUTION_ERROR.value) + INTENT_ERROR_CLASSES
EXEC12_CLASSES = (CORRECT, Outcome.INTENT_ERROR.value) + EXEC_ERROR_CLASSES

# Exception names the interpreter can raise that match a taxonomy class
# verbatim. Everything else lands in Misc (AttributeError, UnboundLocalError,
# ...) except the indentation family, which the parser reports as a
# SyntaxError subclass.
_EXACT_EXEC_NAMES = frozenset(EXEC_ERROR_CLASSES) - {"Misc"}
_SYNTAX_SUBCLASSES = frozenset({"IndentationError", "TabError"})

_INT_DELTA_SMALL = 10
_STRING_DELTA_SMALL = 3
_NUMERIC_TOL = 1e-6


class ContractViolation(ValueError):
    """classify_intent_error was handed outputs that compare equal."""


class LabelInvariantError(ValueError):
    pass


def classify_execution_error(exception_type: str) -> str:
    """Total mapping from a raw exception class name to the 10-class taxonomy."""
    if not exception_type:
        raise ValueError("exception_type must be nonempty")
    if exception_type in _EXACT_EXEC_NAMES:
        return exception_type
    if exception_type in _SYNTAX_SUBCLASSES:
        return "SyntaxError"
    return "Misc"


def _category(value) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "bool"
    if isinstance(value, int):
        return "int"
    if isinstance(value, float):
        return "float"
    if isinstance(value, str):
        return "string"
    if isinstance(value, (list, tuple)):
        return "sequence"
    if isinstance(value, dict):
        return "map"
    return "other"


def _int_delta(a, b):
    """Max absolute elementwise delta between int scalars or nested
    same-shape integer sequences; None when the shapes or types don't line up."""
    if isinstance(a, int) and isinstance(b, int):  # bool included by subclassing
        return abs(int(a) - int(b))
    if isinstance(a, (list, tuple)) and isinstance(b, (list, tuple)):
        if len(a) != len(b):
            return None
        worst = 0
        for x, y in zip(a, b):
            d = _int_delta(x, y)
            if d is None:
                return None
            worst = max(worst, d)
        return worst
    return None


def classify_intent_error(produced, expected) -> str:
    """Classify a wrong output into the 9-class intent taxonomy.

    Rules fire in priority order, most specific structural evidence first.
    A produced value of None wins over the type mismatch it also implies.
    """
    if outputs_equivalent(produced, expected, TestFormat.CALL_BASED):
        raise ContractViolation("produced equals expected; nothing to classify")

    if produced is None:
        return "NoneError"

    pc, ec = _category(produced), _category(expected)
    if pc in ("sequence", "map") and len(produced) == 0 \
            and ec in ("sequence", "map") and len(expected) > 0:
        return "EmptyError"
    if pc != ec:
        return "OutputTypeError"
    if pc in ("sequence", "map") and len(produced) != len(expected):
        return "LengthError"
    if pc in ("int", "bool", "sequence"):
        delta = _int_delta(produced, expected)
        if delta is not None:
            return "IntSmallError" if delta <= _INT_DELTA_SMALL else "IntLargeError"
    if pc == "string":
        if abs(len(produced) - len(expected)) <= _STRING_DELTA_SMALL:
            return "StringSmallError"
        return "StringLargeError"
    return "Misc"


@dataclass(frozen=True)
class FaultLabelSet:
    """The five-task label vector for one (task, candidate) pair."""

    binary: str
    ternary: str
    intent11: str
    exec12: str
    line_class: int

    def __post_init__(self):
        self.check()

    def check(self):
        if self.binary not in BINARY_CLASSES:
            raise LabelInvariantError(f"bad binary label {self.binary!r}")
        if self.ternary not in TERNARY_CLASSES:
            raise LabelInvariantError(f"bad ternary label {self.ternary!r}")
        if self.intent11 not in INTENT11_CLASSES:
            raise LabelInvariantError(f"bad intent11 label {self.intent11!r}")
        if self.exec12 not in EXEC12_CLASSES:
            raise LabelInvariantError(f"bad exec12 label {self.exec12!r}")
        if (self.binary == CORRECT) != (self.ternary == CORRECT):
            raise LabelInvariantError("binary/ternary disagree on correctness")
        if (self.intent11 in INTENT_ERROR_CLASSES) != (self.ternary == "IntentError"):
            raise LabelInvariantError("intent11 disagrees with ternary")
        if (self.exec12 in EXEC_ERROR_CLASSES) != (self.ternary == "ExecutionError"):
            raise LabelInvariantError("exec12 disagrees with ternary")
        if self.intent11 == "ExecutionError" and self.ternary != "ExecutionError":
            raise LabelInvariantError("intent11 says ExecutionError, ternary does not")
        if self.exec12 == "IntentError" and self.ternary != "IntentError":
            raise LabelInvariantError("exec12 says IntentError, ternary does not")
        if (self.line_class == 0) != (self.ternary != "ExecutionError"):
            raise LabelInvariantError("line_class 0 iff no execution error")
        if self.line_class < 0:
            raise LabelInvariantError("line_class must be >= 0")

    def to_record(self) -> dict:
        return {
            "binary": self.binary,
            "ternary": self.ternary,
            "intent11": self.intent11,
            "exec12": self.exec12,
            "line_class": self.line_class,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "FaultLabelSet":
        return cls(rec["binary"], rec["ternary"], rec["intent11"],
                   rec["exec12"], rec["line_class"])

    @classmethod
    def correct(cls) -> "FaultLabelSet":
        return cls(CORRECT, CORRECT, CORRECT, CORRECT, 0)


def _parse_stdin_value(text):
    """Turn captured stdout text into a comparable value.

    Lines are right-stripped, trailing blank lines dropped, and each line
    parsed as int/float when it parses cleanly. A single line collapses to
    its scalar so `print(3)` classifies like a call-based `return 3`.
    """
    if not isinstance(text, str):
        return text
    lines = [ln.rstrip() for ln in text.split("\n")]
    while lines and lines[-1] == "":
        lines.pop()
    parsed = [_parse_scalar(ln) for ln in lines]
    if len(parsed) == 1:
        return parsed[0]
    return parsed


def _parse_scalar(line: str):
    try:
        return int(line)
    except ValueError:
        pass
    try:
        return float(line)
    except ValueError:
        return line


def label_report(report: ExecutionReport, candidate: Candidate, max_lines: int,
                 test_format: TestFormat | None = None) -> FaultLabelSet:
    """Extract the five-task label vector from one execution report.

    `max_lines` is the number of candidate source lines the downstream
    encoder keeps (m). Error lines past it collapse to the beyond-window
    sentinel m+1; unattributable errors fall back to line 1. Pass the task's
    `test_format` so stdin outputs get parsed per line before intent
    classification (multi-line numeric prints classify as integer errors,
    the way call-based returns do).
    """
    if report.task_id != candidate.task_id or report.candidate_id != candidate.candidate_id:
        raise ValidationError("report does not belong to candidate")
    if max_lines < 0:
        raise ValueError("max_lines must be >= 0")

    if report.outcome is Outcome.CORRECT:
        return FaultLabelSet.correct()

    rep = report.representative_result()
    if report.outcome is Outcome.EXECUTION_ERROR:
        exec_class = classify_execution_error(rep.exception_type)
        line = rep.error_line
        if line is None or line < 1:
            line_class = 1
        elif line > max_lines:
            line_class = max_lines + 1
        else:
            line_class = line
        return FaultLabelSet(WRONG, "ExecutionError", "ExecutionError", exec_class, line_class)

    produced, expected = rep.produced_output, rep.expected_output
    if test_format is not None and TestFormat(test_format) is TestFormat.STDIN_STDOUT:
        produced = _parse_stdin_value(produced)
        expected = _parse_stdin_value(expected)
    try:
        intent_class = classify_intent_error(produced, expected)
    except ContractViolation:
        # Driver said WrongOutput but the values compare equal under our
        # mirror of its rules; keep the driver's verdict, classify as Misc.
        intent_class = "Misc"
    return FaultLabelSet(WRONG, "IntentError", intent_class, "IntentError", 0)


# ---------------------------------------------------------------------------
# output comparison (mirror of the sandbox driver's rules, used for the
# ContractViolation check and by tests)


def outputs_equivalent(produced, expected, test_format: TestFormat) -> bool:
    """Structural output equality with the driver's coercions.

    Call-based: tuple/list interchangeable, numbers within 1e-6 when either
    side is a float, dicts by key set and value equality. Stdin: per-line
    comparison after trailing-whitespace and trailing-blank-line
    normalization, with numeric lines compared within 1e-6.
    """
    if TestFormat(test_format) is TestFormat.STDIN_STDOUT:
        return _stdin_equal(str(produced), str(expected))
    return _value_equal(produced, expected)


def _value_equal(a, b) -> bool:
    if a is None or b is None:
        return a is None and b is None
    if isinstance(a, (int, float)) and isinstance(b, (int, float)):
        if isinstance(a, float) or isinstance(b, float):
            return abs(a - b) <= _NUMERIC_TOL
        return a == b
    if isinstance(a, str) and isinstance(b, str):
        return a == b
    if isinstance(a, (list, tuple)) and isinstance(b, (list, tuple)):
        return len(a) == len(b) and all(_value_equal(x, y) for x, y in zip(a, b))
    if isinstance(a, dict) and isinstance(b, dict):
        return a.keys() == b.keys() and all(_value_equal(a[k], b[k]) for k in a)
    return False


def _stdin_equal(a: str, b: str) -> bool:
    la, lb = _norm_lines(a), _norm_lines(b)
    if len(la) != len(lb):
        return False
    return all(_line_equal(x, y) for x, y in zip(la, lb))


def _line_equal(a: str, b: str) -> bool:
    if a == b:
        return True
    try:
        return abs(float(a) - float(b)) <= _NUMERIC_TOL
    except (ValueError, OverflowError):
        return False


def _norm_lines(text: str) -> list[str]:
    lines = [ln.rstrip() for ln in text.split("\n")]
    while lines and lines[-1] == "":
        lines.pop()
    return lines
