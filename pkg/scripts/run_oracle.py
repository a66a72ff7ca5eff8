"""Closed forms against Monte Carlo and quadrature; writes oracle.csv and a per-quantity summary."""

import argparse
import time
from collections import defaultdict
from pathlib import Path

from evidential import oracle


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--suite", default="all")
    p.add_argument("--n", type=int, default=oracle.DEFAULT_N)
    p.add_argument("--cases", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="results/oracle")
    args = p.parse_args()

    t0 = time.perf_counter()
    rows = oracle.run_suite(args.suite, n=args.n, seed=args.seed, n_cases=args.cases)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "oracle.csv").write_text(oracle.rows_to_csv(rows), encoding="utf-8")

    groups = defaultdict(list)
    for r in rows:
        groups[r.quantity.split(":")[0]].append(r)
    print(f"{'quantity':<20}{'cases':>6}{'failed':>8}{'max z':>8}")
    for name, rs in groups.items():
        print(f"{name:<20}{len(rs):>6}{sum(not r.passed for r in rs):>8}{max(r.z_score for r in rs):>8.2f}")
    print(f"{len(rows)} rows in {time.perf_counter() - t0:.1f}s -> {out / 'oracle.csv'}")


if __name__ == "__main__":
    main()
