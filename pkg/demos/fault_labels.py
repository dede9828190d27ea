#!/usr/bin/env python3
"""Label a handful of recorded execution reports with the fault taxonomy.

Each (task, candidate) pair gets the five-task label vector: binary,
ternary, intent class, execution class, and error-line class.
"""

from faultrank.harness import Candidate, ExecutionReport, Status, TestResult
from faultrank.taxonomy import label_report

CASES = [
    (
        "calls len() on an int at source line 2",
        "def number_property(n):\n    return len(n) > 0\n",
        [TestResult(0, Status.EXEC_ERROR, expected_output=True,
                    exception_type="TypeError",
                    exception_message="object of type 'int' has no len()",
                    error_line=2)],
    ),
    (
        "returns the string 'vole' where 775 was expected",
        "def gematria(s):\n    return 'vole'\n",
        [TestResult(0, Status.WRONG_OUTPUT, expected_output=775,
                    produced_output="vole")],
    ),
    (
        "spins forever until the per-test alarm fires",
        "def spin(n):\n    while True:\n        pass\n",
        [TestResult(0, Status.TIMEOUT, expected_output=0,
                    exception_type="TimeoutException",
                    exception_message="no result within 2.0s", error_line=3)],
    ),
    (
        "drops the space when joining words",
        "def smash(words):\n    return ''.join(words)\n",
        [TestResult(0, Status.WRONG_OUTPUT, expected_output="hello world",
                    produced_output="helloworld")],
    ),
    (
        "builds a per-character dict instead of a per-word one",
        "def tally(s):\n    return dict.fromkeys(s, 0)\n",
        [TestResult(0, Status.WRONG_OUTPUT,
                    expected_output={"ruby": 3, "crystal": 2},
                    produced_output={"R": 0, "u": 2, "b": 1, "y": 2})],
    ),
    (
        "passes all of its tests",
        "def next_perfect_square(n):\n    return n>=0 and (int(n**0.5)+1)**2\n",
        [TestResult(0, Status.PASS, expected_output=9, produced_output=9),
         TestResult(1, Status.PASS, expected_output=49, produced_output=49)],
    ),
]


def main():
    for i, (blurb, code, results) in enumerate(CASES):
        candidate = Candidate("demo", f"c{i}", code)
        report = ExecutionReport.from_results("demo", f"c{i}", results, 0)
        labels = label_report(report, candidate, max_lines=10)
        print(f"candidate that {blurb}:")
        for line in code.rstrip().split("\n"):
            print(f"    {line}")
        print(f"  binary:   {labels.binary}")
        print(f"  ternary:  {labels.ternary}")
        print(f"  intent:   {labels.intent11}")
        print(f"  exec:     {labels.exec12}")
        print(f"  line:     {labels.line_class}")
        print()


if __name__ == "__main__":
    main()
