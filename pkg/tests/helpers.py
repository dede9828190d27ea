"""Shared fixture builders used by both the unit suites and the acceptance
gate: randomized execution reports and small random training instances for
the finite-difference gradient oracle."""

import numpy as np
from scipy import sparse

from faultrank.harness import ExecutionReport, Status, TestFormat, TestResult
from faultrank.ranker import _Prepared
from faultrank.taxonomy import EXEC_ERROR_CLASSES, outputs_equivalent


def random_report(rng, task_id="t0", cand_id="c0"):
    exc_pool = list(EXEC_ERROR_CLASSES) + ["AttributeError", "OSError", "WeirdError"]
    values = [None, True, False, 0, 7, -3, 2.5, "", "ab", [1, 2], [], {"k": 1}, {}]
    results = []
    for i in range(rng.randint(1, 3)):
        status = rng.choice(list(Status))
        if status in (Status.EXEC_ERROR, Status.TIMEOUT):
            results.append(TestResult(
                i, status, expected_output=rng.choice(values),
                exception_type=rng.choice(exc_pool),
                exception_message="m",
                error_line=rng.choice([None, 1, 2, 3, 99]),
            ))
        else:
            produced = rng.choice(values)
            expected = produced if status is Status.PASS else rng.choice(values)
            if status is Status.WRONG_OUTPUT and outputs_equivalent(
                    produced, expected, TestFormat.CALL_BASED):
                expected = [expected, "pad"]
            results.append(TestResult(i, status, expected_output=expected,
                                      produced_output=produced))
    return ExecutionReport.from_results(task_id, cand_id, results, 1)


def _to_csr(vecs, dim):
    indptr, indices, data = [0], [], []
    for vec in vecs:
        for idx, cnt in sorted(vec.items()):
            indices.append(idx)
            data.append(float(cnt))
        indptr.append(len(indices))
    return sparse.csr_matrix((data, indices, indptr), shape=(len(vecs), dim))


def random_class_instance(rng, n=5, d=64, k=3):
    vecs = []
    for _ in range(n):
        vecs.append({int(i): int(rng.integers(1, 4))
                     for i in rng.choice(d, size=6, replace=False)})
    X = _to_csr(vecs, d)
    W = rng.normal(size=(k, d)) * 0.3
    b = rng.normal(size=k) * 0.1
    y = rng.integers(0, k, size=n)
    w = rng.uniform(0.5, 2.0, size=n)
    return X, W, b, y, w


def random_line_instance(rng, n=4, d=64):
    X_vecs, rows, seg_ptr, local = [], [], [0], []
    for _ in range(n):
        X_vecs.append({int(i): 1 for i in rng.choice(d, size=4, replace=False)})
        m = int(rng.integers(1, 4))
        for _ in range(m + 2):
            rows.append({int(i): int(rng.integers(1, 3))
                         for i in rng.choice(d, size=3, replace=False)})
        seg_ptr.append(len(rows))
        local.append(int(rng.integers(0, m + 2)))
    prep = _Prepared(
        X=_to_csr(X_vecs, d), y=np.zeros(n, dtype=np.int64),
        task_ids=[f"t{i}" for i in range(n)],
        candidate_ids=["c"] * n,
        is_correct=np.zeros(n, dtype=bool),
        line_rows=_to_csr(rows, d),
        seg_ptr=np.asarray(seg_ptr, dtype=np.int64),
        line_local=np.asarray(local, dtype=np.int64),
    )
    S = rng.normal(size=d) * 0.3
    w = rng.uniform(0.5, 2.0, size=n)
    return prep, S, w
