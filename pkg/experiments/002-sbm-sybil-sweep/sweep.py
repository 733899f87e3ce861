"""
Experiment 002: When Does a Sybil Split Pay on a Random Network?

Sweep the attacker stake x and identity count k on:
  1. An Erdős–Rényi background (fixtures/sbm_er.json)
  2. The two-block model with a dense and a thin block (fixtures/sbm_two_block.json)

For each x report p(x), p′(x; k) and the least beneficial k. On ER the split
should never pay past the inflection point T = α/(1−α)·μ.

Outputs:
  - Console tables
  - sweep.csv (one row per model, x, k)
"""

import sys
sys.path.insert(0, '../..')

import csv

import numpy as np

from core.randnet import (
    clearance_model,
    concavity_regime,
    expected_pnl_advantage,
    load_sbm,
    min_sybil_count,
    sweep,
)

MODELS = {
    "er": load_sbm("../../fixtures/sbm_er.json"),
    "two-block": load_sbm("../../fixtures/sbm_two_block.json"),
}
KS = range(1, 6)

rows = []

for name, model in MODELS.items():
    cm = clearance_model(model)
    print("=" * 60)
    print(f"{name.upper()}: μ={np.round(cm.mu, 3)}  σ={np.round(cm.sd, 3)}  w={np.round(cm.weights, 3)}")
    print("=" * 60)

    T = concavity_regime(model, 0).T
    xs = np.linspace(0.5, 2 * T if np.isfinite(T) else 10.0, 16)
    print(f"  inflection of block 0: T = {T:.3f}")
    print(f"\n  {'x':>7s} {'p(x)':>8s} " + " ".join(f"{'p′ k=' + str(k):>9s}" for k in KS[1:]) + "   k*")

    table = sweep(model, xs, KS)
    for x in xs:
        here = [r for r in table if r.x == float(x)]
        p = here[0].p_single
        line = f"  {x:7.3f} {p:8.5f} " + " ".join(f"{r.p_prime:9.5f}" for r in here if r.k > 1)
        print(line + f"   {here[0].k_star if here[0].k_star is not None else '-'}")
        for r in here:
            rows.append({"model": name, "x": r.x, "k": r.k, "p": r.p_single, "p_k": r.p_k,
                         "p_prime": r.p_prime, "k_star": r.k_star, "pnl": r.pnl,
                         "er_dominated": r.er_dominated})

    if name == "er":
        concave = [r for r in table if r.x > T and r.k >= 2]
        print(f"\n  past T: split dominated in {sum(r.er_dominated for r in concave)}/{len(concave)} cases")
    else:
        res = min_sybil_count(model, 3.0)
        print(f"\n{res.summary()}")
        if model.pis:
            print(f"  PNL advantage from k = {expected_pnl_advantage(model, 3.0, k_max=10)}")
    print()

with open("sweep.csv", "w", newline="") as f:
    writer = csv.DictWriter(f, fieldnames=list(rows[0]))
    writer.writeheader()
    writer.writerows(rows)
print(f"  → sweep.csv ({len(rows)} rows)")
