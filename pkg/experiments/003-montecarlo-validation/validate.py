"""
Experiment 003: Monte Carlo Validation of the Random-Network Formulas

Simulate the two-block model and compare against:
  - the exact binomial clearance (what is actually simulated)
  - the Gaussian closed forms

Also check the neighbor-count Chernoff bound and that the answer does not
depend on the worker count.

Usage:
    python validate.py [replications] [workers]
"""

import sys
sys.path.insert(0, '../..')

import logging
import time

from core.fixtures import neighbor_model, two_block_model
from core.montecarlo import (
    SimConfig,
    config_digest,
    estimate_clearance,
    estimate_success,
    neighbor_count_check,
)

N = int(sys.argv[1]) if len(sys.argv) > 1 else 100_000
WORKERS = int(sys.argv[2]) if len(sys.argv) > 2 else 4
model = two_block_model()


def main():

    # ══════════════════════════════════════════════════════════════
    # 1. Clearance and success at x = 3
    # ══════════════════════════════════════════════════════════════

    print("=" * 60)
    print(f"TWO-BLOCK MODEL, N = {N:,}")
    print("=" * 60)

    cfg = SimConfig(model, replications=N, seed=42, x=3.0, k=1, workers=WORKERS)
    print(f"  config {config_digest(cfg)[:16]}")

    for b in range(model.R):
        print("  " + estimate_clearance(cfg, b, 3.0).summary())
    for k in (1, 2, 3):
        est = estimate_success(SimConfig(model, replications=N, seed=42, x=3.0, k=k, workers=WORKERS))
        print("  " + est.summary())

    # ══════════════════════════════════════════════════════════════
    # 2. Neighbor counts
    # ══════════════════════════════════════════════════════════════

    print("\n" + "=" * 60)
    print("NEIGHBOR COUNTS vs CHERNOFF")
    print("=" * 60)

    for chk in neighbor_count_check(SimConfig(neighbor_model(), replications=N)):
        print("  " + chk.summary())

    # ══════════════════════════════════════════════════════════════
    # 3. Worker count does not matter
    # ══════════════════════════════════════════════════════════════

    print("\n" + "=" * 60)
    print("REPRODUCIBILITY")
    print("=" * 60)

    timings = {}
    values = {}
    for w in (1, WORKERS):
        t0 = time.perf_counter()
        est = estimate_success(SimConfig(model, replications=N, seed=7, x=3.0, k=2, workers=w))
        timings[w] = time.perf_counter() - t0
        values[w] = est.estimate
        print(f"  workers={w}: p̂′ = {est.estimate:.6f}  ({timings[w]:.2f}s)")
    print(f"  identical: {len(set(values.values())) == 1}")


if __name__ == "__main__":
    # worker processes re-import this module
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    main()
