"""
Experiment 001: Slashing Mechanisms on the Overlap Graph

Two services share one operator (v2). Compare what each attacker loses under:
  1. Full slashing (the baseline everyone uses)
  2. Marginal slashing
  3. Multiplicative max / additive schemes
  4. Minimal slashing (factorized vs LP optimum)

Then probe both Sybil moves:
  - Type I: v2 withholds part of its stake
  - Type II: v2 splits into three attacking identities

Outputs:
  - Console summary
  - results.json with every ψ as "p/q"
"""

import sys
sys.path.insert(0, '../..')

import json
from fractions import Fraction

from core.fixtures import (
    OVERLAP_WITHHOLD_COMMIT,
    lp_gap_attack,
    lp_gap_graph,
    overlap_attack,
    overlap_graph,
    overlap_split,
)
from core.graph import full_slash
from core.marginal import marginal_slash, type1_gain_marginal, type2_gain
from core.multislash import (
    check_componentwise_minimal,
    max_scheme_type1_variant,
    minimal_slashing,
    mult_slash_additive,
    mult_slash_max,
    slash_after_split,
)
from core.numeric import exact_str

graph, attack = overlap_graph(), overlap_attack()
results = {}

# ══════════════════════════════════════════════════════════════
# 1. Mechanisms side by side
# ══════════════════════════════════════════════════════════════

print("=" * 60)
print("SLASH PER OPERATOR")
print("=" * 60)
print(graph.summary())

mechanisms = {
    "full": full_slash(graph, attack),
    "marginal": marginal_slash(graph, attack).psi,
    "max": mult_slash_max(graph, attack).psi,
    "additive": mult_slash_additive(graph, attack).psi,
    "minimal": minimal_slashing(graph, attack).psi,
}

print(f"\n  {'':8s}" + "".join(f"{m:>10s}" for m in mechanisms))
for v in attack.attacker_ids:
    print(f"  {v:8s}" + "".join(f"{float(psi[v]):10.4f}" for psi in mechanisms.values()))
print(f"  {'total':8s}" + "".join(f"{float(sum(psi.values())):10.4f}" for psi in mechanisms.values()))

results["slash"] = {m: {v: exact_str(p) if isinstance(p, Fraction) else p for v, p in psi.items()}
                    for m, psi in mechanisms.items()}

# ══════════════════════════════════════════════════════════════
# 2. Type II: three-way split of v2
# ══════════════════════════════════════════════════════════════

print("\n" + "=" * 60)
print("TYPE II: v2 → (1/2, 3/4, 1/4), all attacking")
print("=" * 60)

gain_marginal = type2_gain(graph, attack, "v2", overlap_split())
after_max = slash_after_split(graph, attack, overlap_split())
print(f"  marginal: v2 saves {exact_str(gain_marginal)}")
print(f"  max     : total {exact_str(after_max.total)} (unchanged: "
      f"{after_max.total == mult_slash_max(graph, attack).total})")
results["type2"] = {"marginal_gain": exact_str(gain_marginal), "max_total": exact_str(after_max.total)}

# ══════════════════════════════════════════════════════════════
# 3. Type I: v2 attacks with 1.4 of its 1.5
# ══════════════════════════════════════════════════════════════

print("\n" + "=" * 60)
print(f"TYPE I: v2 commits {exact_str(OVERLAP_WITHHOLD_COMMIT)}")
print("=" * 60)

gain_marginal = type1_gain_marginal(graph, attack, "v2", graph.stake("v2") - OVERLAP_WITHHOLD_COMMIT)
variant = max_scheme_type1_variant(graph, attack, "v2", OVERLAP_WITHHOLD_COMMIT)
print(f"  marginal: v2 saves {exact_str(gain_marginal)}")
print(f"  max     : v2 {float(variant['parent_before']):.4f} → {float(variant['parent_after']):.4f}, "
      f"total {float(variant['before'].total):.4f} → {float(variant['after'].total):.4f}")
results["type1"] = {
    "marginal_gain": exact_str(gain_marginal),
    "max_parent_after": exact_str(variant["parent_after"]),
    "max_total_after": exact_str(variant["after"].total),
}

# ══════════════════════════════════════════════════════════════
# 4. Minimal slashing: where the factorized form loses to the LP
# ══════════════════════════════════════════════════════════════

print("\n" + "=" * 60)
print("MINIMAL SLASHING")
print("=" * 60)

for name, (g, a) in {"overlap": (graph, attack), "lp-gap": (lp_gap_graph(), lp_gap_attack())}.items():
    out = minimal_slashing(g, a)
    print(f"  {name:8s} factorized {out.objective:.4f}   LP {out.lp_objective:.4f}   gap {out.gap:.4f}")
    results.setdefault("minimal", {})[name] = {"objective": out.objective, "lp": out.lp_objective}

print()
print(check_componentwise_minimal(graph, attack, "sum").summary())

with open("results.json", "w") as f:
    json.dump(results, f, indent=2)
print("\n  → results.json")
