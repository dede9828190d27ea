#!/usr/bin/env python3
"""Run real candidate programs through the harness and the live sandbox
driver (requires the driver package at driver/faultrank_driver.py)."""

import os
import sys

from faultrank.harness import (
    Candidate,
    ExecutionLimits,
    Task,
    TestFormat,
    execute_corpus,
)
from faultrank.taxonomy import label_report

DRIVER = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))),
                      "driver", "faultrank_driver.py")

CANDIDATES = {
    "correct": "def next_perfect_square(n):\n    return n>=0 and (int(n**0.5)+1)**2\n",
    "raises": "def next_perfect_square(n):\n    return len(n) > 0\n",
    "spins": "def next_perfect_square(n):\n    while True:\n        pass\n",
    "wrong": "def next_perfect_square(n):\n    return 'vole'\n",
    "empty": "",
}


def main():
    if not os.path.isfile(DRIVER):
        print("driver package not found; build driver/ first", file=sys.stderr)
        return 1
    task = Task(
        task_id="square",
        prompt="Write a function named next_perfect_square that returns the first "
               "perfect square greater than its argument. Use Call-Based format.",
        test_format=TestFormat.CALL_BASED,
        inputs=[[6], [36], [0], [-5]],
        expected_outputs=[9, 49, 1, 0],
        function_name="next_perfect_square",
    )
    candidates = [Candidate("square", name, code) for name, code in CANDIDATES.items()]
    reports = execute_corpus([task], candidates, ExecutionLimits(timeout_s=1.5),
                             workers=4, driver_path=DRIVER)
    by_id = {c.candidate_id: c for c in candidates}
    for report in reports:
        labels = label_report(report, by_id[report.candidate_id], max_lines=10)
        rep = report.representative_result()
        detail = ""
        if rep is not None and rep.exception_type:
            detail = f" [{rep.exception_type}" + \
                (f" at line {rep.error_line}]" if rep.error_line else "]")
        elif rep is not None:
            detail = f" [produced {rep.produced_output!r}]"
        print(f"{report.candidate_id:<8} {report.outcome.value:<15}{detail}")
        print(f"         labels: B={labels.binary} T={labels.ternary} "
              f"I={labels.intent11} E={labels.exec12} L={labels.line_class}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
