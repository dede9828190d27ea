#!/usr/bin/env python3
"""Walk through the pass@k / exec@k estimators.

Shows the product-form estimator against brute-force subset enumeration,
the closed-form k=1 identity, and how ranked metrics relate to their
unranked baselines.
"""

import math
import random
from itertools import combinations

from faultrank.metrics import TaskOutcomeSummary, exec_at_k, pass_at_k, ranked_pass_at_k


def enumerate_pass_at_k(n, c, k):
    total = math.comb(n, k)
    hits = sum(1 for combo in combinations(range(n), k) if combo[0] < c)
    return hits / total


def main():
    print("pass@k estimator vs. brute-force enumeration")
    print(f"{'n':>4} {'c':>4} {'k':>4} {'estimator':>12} {'enumeration':>12}")
    for n, c, k in [(5, 2, 2), (10, 3, 1), (10, 3, 5), (12, 1, 6), (8, 8, 3)]:
        est, brute = pass_at_k(n, c, k), enumerate_pass_at_k(n, c, k)
        print(f"{n:>4} {c:>4} {k:>4} {est:>12.6f} {brute:>12.6f}")

    print("\nk=1 closed form: pass@1(n, c) == c/n")
    print("  pass@1 with 26 correct of 100 samples:", pass_at_k(100, 26, 1))

    print("\nexec@k uses the same estimator with 'executes cleanly' as the hit:")
    print("  n=6, e=3, k=2 ->", exec_at_k(6, 3, 2))

    print("\nA random ordering averages to the estimator; a good ranker beats it:")
    n, c, k = 20, 3, 1
    flags = [True] * c + [False] * (n - c)
    rng = random.Random(0)
    trials = 20_000
    hits = 0
    for _ in range(trials):
        rng.shuffle(flags)
        hits += any(flags[:k])
    print(f"  permutation average over {trials} shuffles: {hits / trials:.4f}")
    print(f"  pass@{k}(n={n}, c={c}):                      {pass_at_k(n, c, k):.4f}")

    ids = [f"c{i:02d}" for i in range(n)]
    correct = {cid: i < c for i, cid in enumerate(ids)}
    oracle = TaskOutcomeSummary("demo", n=n, c=c, e=n,
                                ranked_ids=sorted(ids, key=lambda x: not correct[x]))
    print(f"  oracle ranker, top-{k} hit:                 "
          f"{float(ranked_pass_at_k(oracle, correct, k)):.4f}")


if __name__ == "__main__":
    main()
