import random

import pytest

from faultrank.harness import (
    Candidate,
    ExecutionReport,
    Outcome,
    Status,
    TestFormat,
    TestResult,
)
from helpers import random_report
from faultrank.taxonomy import (
    BINARY_CLASSES,
    ContractViolation,
    EXEC12_CLASSES,
    EXEC_ERROR_CLASSES,
    FaultLabelSet,
    INTENT11_CLASSES,
    INTENT_ERROR_CLASSES,
    TERNARY_CLASSES,
    classify_execution_error,
    classify_intent_error,
    label_report,
    outputs_equivalent,
)


def test_class_space_sizes():
    assert len(EXEC_ERROR_CLASSES) == 10
    assert len(INTENT_ERROR_CLASSES) == 9
    assert len(BINARY_CLASSES) == 2
    assert len(TERNARY_CLASSES) == 3
    assert len(INTENT11_CLASSES) == 11
    assert len(EXEC12_CLASSES) == 12


@pytest.mark.parametrize("name,expected", [
    ("TypeError", "TypeError"),
    ("NameError", "NameError"),
    ("ValueError", "ValueError"),
    ("EOFError", "EOFError"),
    ("IndexError", "IndexError"),
    ("KeyError", "KeyError"),
    ("SyntaxError", "SyntaxError"),
    ("TimeoutException", "TimeoutException"),
    ("FunctionNotFound", "FunctionNotFound"),
    ("IndentationError", "SyntaxError"),
    ("TabError", "SyntaxError"),
    ("AttributeError", "Misc"),
    ("UnboundLocalError", "Misc"),
    ("ZeroDivisionError", "Misc"),
    ("ProtocolError", "Misc"),
    ("SomeMadeUpError", "Misc"),
])
def test_classify_execution_error(name, expected):
    assert classify_execution_error(name) == expected


def test_classify_execution_error_total_on_fuzz():
    rng = random.Random(7)
    alphabet = "abcdefError <>!"
    for _ in range(500):
        name = "".join(rng.choice(alphabet) for _ in range(rng.randint(1, 20)))
        assert classify_execution_error(name) in EXEC_ERROR_CLASSES


@pytest.mark.parametrize("produced,expected,cls", [
    (None, 42, "NoneError"),
    (None, [1], "NoneError"),                       # None beats the type mismatch
    ([], ["first"], "EmptyError"),
    ({}, {"a": 1}, "EmptyError"),
    ("vole", 775, "OutputTypeError"),
    (3, [{"ruby": 3, "crystal": 2}], "OutputTypeError"),
    (['"', "l", "e", "v", "e"], '"', "OutputTypeError"),
    (3, 3.5, "OutputTypeError"),                    # int and float are distinct categories
    (False, 0.5, "OutputTypeError"),
    ([0, 1, 2, 3], ["c", "a", "b"], "LengthError"),
    ({"R": 0, "u": 2, "b": 1, "y": 2}, {"ruby": 3, "crystal": 2}, "LengthError"),
    ([[2], [3]], [[1], [2]], "IntSmallError"),
    (False, True, "IntSmallError"),                 # booleans behave as integers, delta 1
    (41, 52, "IntLargeError"),
    (300, 37, "IntLargeError"),
    (41, 51, "IntSmallError"),
    ("helloworld", "hello world", "StringSmallError"),
    ("a", "x", "StringSmallError"),
    ("Not!!", "Jumping!!", "StringLargeError"),
    ("Pippi", "P i p p i", "StringLargeError"),
    (2.5, 3.75, "Misc"),                            # float pair: no integer rule applies
    ({"a": 1}, {"a": 2}, "Misc"),
    ([1, "x"], [2, "y"], "Misc"),                   # mixed-type sequence, no clean delta
])
def test_classify_intent_error(produced, expected, cls):
    assert classify_intent_error(produced, expected) == cls


def test_classify_intent_error_contract():
    with pytest.raises(ContractViolation):
        classify_intent_error([1, 2], (1, 2))  # tuple/list coercion makes these equal


def test_intent_priority_invariance():
    a = {"x": 1, "y": 2}
    b = {"y": 2, "x": 1}
    assert classify_intent_error(a, {"z": 9}) == classify_intent_error(b, {"z": 9})
    assert classify_intent_error((1, 2), [5, 6]) == classify_intent_error([1, 2], [5, 6])


def test_classify_intent_error_total_on_fuzz():
    rng = random.Random(11)

    def value(depth=0):
        kinds = ["none", "bool", "int", "float", "str", "list", "dict"]
        kind = rng.choice(kinds if depth < 2 else kinds[:5])
        if kind == "none":
            return None
        if kind == "bool":
            return rng.random() < 0.5
        if kind == "int":
            return rng.randint(-100, 100)
        if kind == "float":
            return rng.uniform(-10, 10)
        if kind == "str":
            return "".join(rng.choice("abc ") for _ in range(rng.randint(0, 8)))
        if kind == "list":
            return [value(depth + 1) for _ in range(rng.randint(0, 4))]
        return {str(i): value(depth + 1) for i in range(rng.randint(0, 4))}

    for _ in range(2000):
        produced, expected = value(), value()
        if outputs_equivalent(produced, expected, TestFormat.CALL_BASED):
            continue
        assert classify_intent_error(produced, expected) in INTENT_ERROR_CLASSES


# ---------------------------------------------------------------------------
# label_report on the canonical printed fixtures


def _exec_report(exc_type, line, n_tests=1, cand_id="c0"):
    results = [
        TestResult(i, Status.EXEC_ERROR, expected_output=0,
                   exception_type=exc_type, exception_message="boom", error_line=line)
        for i in range(n_tests)
    ]
    return ExecutionReport.from_results("t0", cand_id, results, 5)


def _intent_report(produced, expected, cand_id="c0"):
    results = [TestResult(0, Status.WRONG_OUTPUT, expected_output=expected,
                          produced_output=produced)]
    return ExecutionReport.from_results("t0", cand_id, results, 5)


def _cand(code, cand_id="c0"):
    return Candidate("t0", cand_id, code)


def test_canonical_typeerror_line2():
    code = "def number_property(n):\n    return len(n) > 0\n"
    labels = label_report(_exec_report("TypeError", 2), _cand(code), max_lines=3)
    assert labels == FaultLabelSet("Wrong", "ExecutionError", "ExecutionError", "TypeError", 2)


def test_canonical_vole_output_type():
    labels = label_report(_intent_report("vole", 775), _cand("def gematria(s):\n    return 'vole'"),
                          max_lines=2)
    assert labels == FaultLabelSet("Wrong", "IntentError", "OutputTypeError", "IntentError", 0)


# twelve curated reference programs: six execution errors with a known
# class and line, six wrong outputs with known produced/expected values
REFERENCE_EXEC_FIXTURES = [
    # (exception raised, recorded line, expected class)
    ("NameError", 2, "NameError"),       # bird_code: name 'i' is not defined in line 2
    ("ValueError", 2, "ValueError"),     # too many values to unpack in line 2
    ("KeyError", 1, "KeyError"),         # league_standings: KeyError(-1) at Line 1
    ("TimeoutException", 2, "TimeoutException"),  # fibonacci: inefficient recursion
    ("SyntaxError", 3, "SyntaxError"),   # game_winners: syntax error at Line 3 (extra .)
    ("AttributeError", 2, "Misc"),       # duplicate_count: AttributeError at Line 2
]

REFERENCE_INTENT_FIXTURES = [
    # (produced, expected, expected class)
    ([], ["first"], "EmptyError"),                                   # grabscrab
    (3, [{"ruby": 3, "crystal": 2}], "OutputTypeError"),             # diamonds_and_toads
    ({"R": 0, "u": 2, "b": 1, "y": 2}, {"ruby": 3, "crystal": 2}, "LengthError"),
    ([[2], [3]], [[1], [2]], "IntSmallError"),                       # nested integer lists
    (300, 37, "IntLargeError"),                                      # missing_angle
    ("helloworld", "hello world", "StringSmallError"),               # smash
]


@pytest.mark.parametrize("exc_type,line,cls", REFERENCE_EXEC_FIXTURES)
def test_reference_exec_fixture(exc_type, line, cls):
    labels = label_report(_exec_report(exc_type, line), _cand("def f():\n    pass\n    pass\n"),
                          max_lines=10)
    assert labels.binary == "Wrong"
    assert labels.ternary == "ExecutionError"
    assert labels.exec12 == cls
    assert labels.line_class == line


@pytest.mark.parametrize("produced,expected,cls", REFERENCE_INTENT_FIXTURES)
def test_reference_intent_fixture(produced, expected, cls):
    labels = label_report(_intent_report(produced, expected), _cand("def f():\n    pass"),
                          max_lines=10)
    assert labels.binary == "Wrong"
    assert labels.ternary == "IntentError"
    assert labels.intent11 == cls
    assert labels.line_class == 0


def test_label_correct_report():
    results = [TestResult(i, Status.PASS, expected_output=i, produced_output=i)
               for i in range(4)]
    report = ExecutionReport.from_results("t0", "c0", results, 3)
    assert report.outcome is Outcome.CORRECT
    labels = label_report(report, _cand("def f():\n    return 1"), max_lines=2)
    assert labels == FaultLabelSet.correct()


def test_line_class_sentinels():
    # beyond the encoded window -> m+1; unattributable -> 1
    labels = label_report(_exec_report("TypeError", 9), _cand("x\n" * 9), max_lines=4)
    assert labels.line_class == 5
    labels = label_report(_exec_report("FunctionNotFound", None), _cand(""), max_lines=4)
    assert labels.line_class == 1
    assert labels.exec12 == "FunctionNotFound"


def test_execution_dominates_intent():
    results = [
        TestResult(0, Status.WRONG_OUTPUT, expected_output=2, produced_output=3),
        TestResult(1, Status.EXEC_ERROR, expected_output=2,
                   exception_type="KeyError", error_line=4),
    ]
    report = ExecutionReport.from_results("t0", "c0", results, 1)
    assert report.outcome is Outcome.EXECUTION_ERROR
    assert report.first_failure_index == 0
    labels = label_report(report, _cand("a\nb\nc\nd\ne"), max_lines=5)
    # the representative comes from the execution-error tier, not test 0
    assert labels.exec12 == "KeyError"
    assert labels.line_class == 4


def test_first_failure_supplies_representative_within_tier():
    results = [
        TestResult(0, Status.EXEC_ERROR, expected_output=2,
                   exception_type="KeyError", error_line=1),
        TestResult(1, Status.EXEC_ERROR, expected_output=2,
                   exception_type="IndexError", error_line=2),
    ]
    report = ExecutionReport.from_results("t0", "c0", results, 1)
    labels = label_report(report, _cand("a\nb"), max_lines=5)
    assert labels.exec12 == "KeyError"


def test_stdin_outputs_parsed_per_line():
    report = _intent_report("2\n3\n", "1\n2\n")
    labels = label_report(report, _cand("print(1)"), max_lines=1,
                          test_format=TestFormat.STDIN_STDOUT)
    assert labels.intent11 == "IntSmallError"


def test_label_report_rejects_foreign_candidate():
    report = _intent_report("a", "b")
    with pytest.raises(ValueError):
        label_report(report, Candidate("t0", "other", "x"), max_lines=1)


# ---------------------------------------------------------------------------
# invariant property over randomized reports


def test_labels_consistent_on_randomized_reports():
    rng = random.Random(99)
    for _ in range(2000):
        report = random_report(rng)
        labels = label_report(report, _cand("l1\nl2\nl3"), max_lines=rng.randint(0, 5))
        labels.check()  # asserts the full binary/ternary/fine/line agreement
        assert (labels.line_class == 0) == (report.outcome is not Outcome.EXECUTION_ERROR)
