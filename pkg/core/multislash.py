"""
Multiplicative slashing: every attacker of s loses the same fraction φ_s.

For an attacked service s the factor is the share of the attacking stake on s
that the threshold needs:

    φ_s = α_s σ_{∂s} / Σ_{v ∈ B ∩ ∂s} x_v

so charging φ_s · x_v to every attacker of s collects exactly α_s σ_{∂s}.
Operators attacking several services ("intersection attackers") are charged
by the largest factor they face (max-scheme), or by the capped sum of factors
(additive scheme). Each service's remaining threshold is then charged to the
attackers of that service alone, in proportion to their stake.

Splitting an operator into k identities that all attack leaves every φ_s and
therefore every charge unchanged. Withholding part of the stake (Type I) is a
different story: φ rises as x falls, see max_scheme_type1_variant.

The minimal-slashing program asks for the least total slash that brings every
attacked service back under its threshold:

    min Σ ψ_v   s.t.   Σ_{v ∈ B ∩ ∂s} (x_v − ψ_v) ≤ α_s σ_{∂s},   0 ≤ ψ_v ≤ x_v

Its factorized solutions ψ_v = max_{s ∈ A ∩ ∂v} λ_s · x_v are searched
exactly over binding sets and orderings; the plain LP optimum (scipy) is
reported alongside because it can be strictly lower.

Usage:
    from core.fixtures import overlap_graph, overlap_attack, single_service_minimal_attack
    out = mult_slash_max(overlap_graph(), overlap_attack())
    out.psi                          # → {'v1': 14/15, 'v2': 7/5, 'v3': 7/20}
    minimal_slashing(overlap_graph(), single_service_minimal_attack()).lam
                                     # → {'s2': 3/10}
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy import optimize

from core.errors import (
    AltRuleInfeasibleError,
    InfeasibleAttackError,
    InfeasibleProgramError,
    InstanceTooLargeError,
    NonBindingInputError,
    ResidualNegativeError,
    StakeOutOfRangeError,
    UnknownServiceError,
)
from core.graph import (
    AttackSpec,
    OperatorId,
    RestakingGraph,
    ServiceId,
    SybilPart,
    SybilSplit,
    apply_split,
    attack_stake_on,
    is_feasible,
    split_attack,
    validate_attack,
)
from core.numeric import DEFAULT_TOL, Number, Tolerance, display, eq, ge, gt, total, zero_like

logger = logging.getLogger(__name__)

MAX_MINIMAL_SERVICES = 7


# ═══════════════════════════════════════════════════════════════
# Factors
# ═══════════════════════════════════════════════════════════════

def service_factor(
    graph: RestakingGraph,
    attack: AttackSpec,
    service: ServiceId,
    operator: Optional[OperatorId] = None,
    x: Optional[Number] = None,
) -> Number:
    """
    φ_s(x) = α_s σ_{∂s} / (x + σ_{B′}).

    Without an override x is the attack's own commitment. With `operator` and
    `x`, the operator's commitment is replaced by x and σ_{B′} is the stake
    of the other attackers of s. Values above 1 mean the attack is infeasible.
    """
    if service not in graph.services:
        raise UnknownServiceError(f"unknown service {service!r}")
    if service not in attack.services:
        raise UnknownServiceError(f"service {service!r} is not attacked")
    if x is not None:
        if operator is None:
            raise StakeOutOfRangeError("a stake override needs the operator it applies to")
        if x < 0 or gt(x, graph.stake(operator)):
            raise StakeOutOfRangeError(f"x = {x} outside [0, σ_v = {graph.stake(operator)}]")
        attack = attack.with_commitment(operator, x)
    used = attack_stake_on(graph, attack, service)
    if used == 0:
        raise InfeasibleAttackError(f"no attacking stake on {service!r}")
    return graph.threshold(service) / used


def service_factors(graph: RestakingGraph, attack: AttackSpec) -> dict[ServiceId, Number]:
    return {s: service_factor(graph, attack, s) for s in sorted(attack.services)}


# ═══════════════════════════════════════════════════════════════
# Max / additive schemes
# ═══════════════════════════════════════════════════════════════

@dataclass
class MultSlashOutcome:
    scheme: str
    phi: dict                        # service → φ_s
    psi: dict                        # operator → ψ_v
    applied: dict                    # operator → fraction of x_v charged
    binding: dict                    # operator → service label whose factor applied
    service_totals: dict             # service → Σ ψ_v over its attackers
    residual_negative: list = field(default_factory=list)

    @property
    def total(self) -> Number:
        return total(self.psi.values())

    def rows(self) -> list[dict]:
        return [{"operator_id": v, "scheme": self.scheme, "binding_service": self.binding[v],
                 "phi": self.applied[v], "psi": self.psi[v]} for v in self.psi]

    def summary(self) -> str:
        lines = [f"Multiplicative slashing ({self.scheme}):"]
        for s, f in self.phi.items():
            flag = "  [residual < 0, clamped]" if s in self.residual_negative else ""
            lines.append(f"  φ_{s:6s} = {display(f, 4)}   charged {display(self.service_totals[s], 4)}{flag}")
        for v, p in self.psi.items():
            lines.append(f"  {v:8s} ψ={display(p, 4)}  (via {self.binding[v]})")
        lines.append(f"  total slashed: {display(self.total, 4)}")
        return "\n".join(lines)


def _binding_max(phi: dict, services) -> tuple[ServiceId, Number]:
    # ties go to the lexicographically smallest service id
    best = None
    for s in sorted(services):
        if best is None or phi[s] > phi[best]:
            best = s
    return best, phi[best]


def _slash_scheme(graph: RestakingGraph, attack: AttackSpec, scheme: str,
                  strict: bool, tol: Tolerance) -> MultSlashOutcome:
    if not is_feasible(graph, attack, tol):
        raise InfeasibleAttackError("multiplicative slashing needs a feasible attack")
    phi = service_factors(graph, attack)
    committed = attack.committed

    psi, applied, binding = {}, {}, {}
    singles: dict[ServiceId, list] = {s: [] for s in phi}
    for v, xv in attack.attackers:
        covered = graph.services_of(v) & attack.services
        if not covered:
            psi[v], applied[v], binding[v] = zero_like(xv), zero_like(xv), "-"
        elif len(covered) == 1:
            singles[next(iter(covered))].append(v)
        elif scheme == "max":
            s, f = _binding_max(phi, covered)
            psi[v], applied[v], binding[v] = f * xv, f, s
        else:
            f = min(total(phi[s] for s in covered), 1)
            psi[v], applied[v], binding[v] = f * xv, f, "+".join(sorted(covered))

    negative = []
    for s in phi:
        charged = total(psi[v] for v in graph.operators_of(s) if v in psi)
        residual = graph.threshold(s) - charged
        if residual < 0:
            if not eq(residual, 0, tol):
                if strict:
                    raise ResidualNegativeError(
                        f"charges on {s!r} already exceed its threshold by {-residual}")
                logger.warning("residual on %s is negative (%s); clamped to 0", s, residual)
                negative.append(s)
            residual = zero_like(residual)
        base = total(committed[v] for v in singles[s])
        for v in singles[s]:
            share = residual * committed[v] / base if base else zero_like(residual)
            psi[v] = share
            applied[v] = share / committed[v] if committed[v] else share
            binding[v] = s

    totals = {s: total(psi[v] for v in graph.operators_of(s) if v in psi) for s in phi}
    ordered = {v: psi[v] for v in attack.attacker_ids}
    return MultSlashOutcome(scheme, phi, ordered, {v: applied[v] for v in ordered},
                            {v: binding[v] for v in ordered}, totals, negative)


def mult_slash_max(graph: RestakingGraph, attack: AttackSpec, strict: bool = False,
                   tol: Tolerance = DEFAULT_TOL) -> MultSlashOutcome:
    """Intersection attackers pay max φ_s · x_v; single-service attackers pay the remainder."""
    return _slash_scheme(graph, attack, "max", strict, tol)


def mult_slash_additive(graph: RestakingGraph, attack: AttackSpec, strict: bool = False,
                        tol: Tolerance = DEFAULT_TOL) -> MultSlashOutcome:
    """Intersection attackers pay min(Σ φ_s, 1) · x_v."""
    return _slash_scheme(graph, attack, "additive", strict, tol)


def slash_after_split(graph: RestakingGraph, attack: AttackSpec, split: SybilSplit,
                      scheme: str = "max", tol: Tolerance = DEFAULT_TOL) -> MultSlashOutcome:
    """Slash the attack as it looks after `split` (participating parts commit fully)."""
    new_graph = apply_split(graph, split, tol)
    new_attack = split_attack(attack, split)
    if scheme == "additive":
        return mult_slash_additive(new_graph, new_attack, tol=tol)
    return mult_slash_max(new_graph, new_attack, tol=tol)


def withholding_split(graph: RestakingGraph, operator: OperatorId, committed: Number) -> SybilSplit:
    """Two identities: one attacks with `committed`, the other holds the rest passively."""
    stake = graph.stake(operator)
    if committed <= 0 or committed >= stake:
        raise StakeOutOfRangeError(f"committed {committed} must lie strictly inside (0, {stake})")
    return SybilSplit.of(operator, [
        SybilPart(f"{operator}'", committed),
        SybilPart(f"{operator}''", stake - committed, inherit_edges=True, participates=False),
    ])


def max_scheme_type1_variant(graph: RestakingGraph, attack: AttackSpec, operator: OperatorId,
                             committed: Number, tol: Tolerance = DEFAULT_TOL) -> dict:
    """
    Compare the max-scheme before and after `operator` attacks with only
    `committed` of its stake. Withholding raises every factor the operator
    faces, so the other attackers pay more and the total charge goes up.
    """
    split = withholding_split(graph, operator, committed)
    before = mult_slash_max(graph, attack, tol=tol)
    after = slash_after_split(graph, attack, split, "max", tol)
    return {
        "before": before,
        "after": after,
        "parent_before": before.psi[operator],
        "parent_after": total(after.psi[p.id] for p in split.participating),
        "total_increase": after.total - before.total,
    }


# ═══════════════════════════════════════════════════════════════
# Minimal slashing
# ═══════════════════════════════════════════════════════════════

@dataclass
class MinimalSlashOutcome:
    psi: dict                        # operator → ψ_v
    lam: dict                        # service → λ_s
    binding_order: tuple             # binding services, largest λ first
    objective: float
    lp_objective: float
    lp_psi: dict = field(default_factory=dict)

    @property
    def gap(self) -> float:
        """Factorized objective minus the LP optimum, ≥ 0."""
        return self.objective - self.lp_objective

    def summary(self) -> str:
        lines = ["Minimal slashing (factorized):"]
        for s, l in self.lam.items():
            lines.append(f"  λ_{s:6s} = {display(l, 4)}")
        for v, p in self.psi.items():
            lines.append(f"  {v:8s} ψ={display(p, 4)}")
        lines.append(f"  objective {self.objective:.6f}   LP optimum {self.lp_objective:.6f}   "
                     f"gap {self.gap:.2e}")
        return "\n".join(lines)


def _lp_minimum(graph: RestakingGraph, attack: AttackSpec) -> tuple[float, dict]:
    ids = attack.attacker_ids
    x = np.array([float(attack.x(v)) for v in ids])
    services = sorted(attack.services)
    A_ub = np.zeros((len(services), len(ids)))
    b_ub = np.zeros(len(services))
    for i, s in enumerate(services):
        nbrs = graph.operators_of(s)
        for j, v in enumerate(ids):
            if v in nbrs:
                A_ub[i, j] = -1.0
        b_ub[i] = float(graph.threshold(s)) - float(attack_stake_on(graph, attack, s))
    res = optimize.linprog(np.ones(len(ids)), A_ub=A_ub, b_ub=b_ub,
                           bounds=list(zip(np.zeros(len(ids)), x)), method="highs")
    if res.status != 0:
        raise InfeasibleProgramError(f"LP solver: {res.message}")
    return float(res.fun), {v: float(p) for v, p in zip(ids, res.x)}


def _factorized_candidates(graph: RestakingGraph, attack: AttackSpec, services: list,
                           used: dict, thr: dict, tol: Tolerance):
    """Yield (order, λ) for every consistent binding set ordering."""
    covered = {v: graph.services_of(v) & attack.services for v in attack.attacker_ids}
    x = {v: float(xv) for v, xv in attack.attackers}
    eps = max(tol.abs, 1e-9)

    for k in range(0, len(services) + 1):
        for order in itertools.permutations(services, k):
            rank = {s: i for i, s in enumerate(order)}
            # each attacker is charged by the first binding service it touches
            charge = {}
            for v, cov in covered.items():
                hits = [s for s in cov if s in rank]
                charge[v] = min(hits, key=rank.get) if hits else None

            M = np.zeros((k, k))
            rhs = np.zeros(k)
            for i, s in enumerate(order):
                rhs[i] = used[s] - thr[s]
                for v in graph.operators_of(s):
                    if v in charge and charge[v] is not None:
                        M[i, rank[charge[v]]] += x[v]
            if k:
                try:
                    lam_k = np.linalg.solve(M, rhs)
                except np.linalg.LinAlgError:
                    continue
            else:
                lam_k = np.zeros(0)

            if np.any(lam_k < -eps) or np.any(lam_k > 1 + eps):
                continue
            if np.any(np.diff(lam_k) > eps):
                continue
            lam_k = np.clip(lam_k, 0.0, 1.0)
            lam = {s: 0.0 for s in services}
            lam.update({s: float(l) for s, l in zip(order, lam_k)})

            psi = {v: (lam[charge[v]] * x[v] if charge[v] is not None else 0.0) for v in covered}
            ok = all(used[s] - sum(psi[v] for v in graph.operators_of(s) if v in psi) <= thr[s] + eps
                     for s in services)
            if ok:
                yield order, lam, psi


def minimal_slashing(graph: RestakingGraph, attack: AttackSpec,
                     tol: Tolerance = DEFAULT_TOL) -> MinimalSlashOutcome:
    """
    Least-objective factorized solution of the minimal-slashing program.

    A single attacked service has the closed form λ* = 1 − α_s σ_T / σ_B,
    kept exact for rational inputs. Services whose pre-slash attacking stake
    sits exactly at the threshold get λ_s = 0.
    """
    validate_attack(graph, attack)
    services = sorted(attack.services)
    if len(services) > MAX_MINIMAL_SERVICES:
        raise InstanceTooLargeError(f"{len(services)} services; the binding-set search stops at "
                                    f"{MAX_MINIMAL_SERVICES}")
    used = {s: attack_stake_on(graph, attack, s) for s in services}
    thr = {s: graph.threshold(s) for s in services}
    for s in services:
        if not ge(used[s], thr[s], tol):
            raise NonBindingInputError(
                f"attack on {s!r} is not successful ({used[s]} < {thr[s]}); nothing to restore")

    lp_obj, lp_psi = _lp_minimum(graph, attack)

    if len(services) == 1:
        s = services[0]
        lam = 1 - thr[s] / used[s]
        psi = {v: lam * xv for v, xv in attack.attackers
               if s in graph.services_of(v)}
        psi.update({v: zero_like(xv) for v, xv in attack.attackers if v not in psi})
        psi = {v: psi[v] for v in attack.attacker_ids}
        order = (s,) if lam > 0 else ()
        return MinimalSlashOutcome(psi, {s: lam}, order, float(total(psi.values())), lp_obj, lp_psi)

    used_f = {s: float(u) for s, u in used.items()}
    thr_f = {s: float(t) for s, t in thr.items()}
    best = None
    for order, lam, psi in _factorized_candidates(graph, attack, services, used_f, thr_f, tol):
        obj = sum(psi.values())
        if best is None or obj < best[0] - 1e-12:
            best = (obj, order, lam, psi)
    if best is None:
        raise InfeasibleProgramError("no factorized solution restores every threshold")

    obj, order, lam, psi = best
    order = tuple(s for s in order if lam[s] > 0)
    out = MinimalSlashOutcome({v: psi[v] for v in attack.attacker_ids}, lam, order, obj,
                              lp_obj, lp_psi)
    if out.gap > 1e-7:
        logger.info("factorized minimum %.6f exceeds LP optimum %.6f", obj, lp_obj)
    return out


# ═══════════════════════════════════════════════════════════════
# Componentwise comparison against other aggregations
# ═══════════════════════════════════════════════════════════════

AGGREGATIONS: dict[str, Callable] = {
    "max": max,
    "sum": lambda fs: total(fs),
    "min": min,
    "mean": lambda fs: total(fs) / len(fs),
}

Aggregation = Union[str, Callable]


@dataclass
class ComponentwiseReport:
    factors: str
    aggregation: str
    baseline: dict                   # operator → ψ_v under max
    alternative: dict                # operator → ψ̃_v
    dominates: bool                  # ψ̃_v ≥ ψ_v for every v
    witnesses: list                  # operators with ψ̃_v > ψ_v

    @property
    def total_baseline(self) -> Number:
        return total(self.baseline.values())

    @property
    def total_alternative(self) -> Number:
        return total(self.alternative.values())

    def summary(self) -> str:
        lines = [f"max vs {self.aggregation} over {self.factors} factors: "
                 f"{'max is componentwise smaller' if self.dominates else 'NOT dominated'}"]
        for v in self.baseline:
            mark = "  <" if v in self.witnesses else ""
            lines.append(f"  {v:8s} max={display(self.baseline[v], 4)}  "
                         f"alt={display(self.alternative[v], 4)}{mark}")
        return "\n".join(lines)


def check_componentwise_minimal(graph: RestakingGraph, attack: AttackSpec,
                                alt_aggregation: Aggregation = "sum",
                                factors: str = "multiplicative",
                                tol: Tolerance = DEFAULT_TOL) -> ComponentwiseReport:
    """
    Charge every attacker g(factors of its attacked services) · x_v for the
    max rule and for `alt_aggregation`, and compare componentwise.

    factors="multiplicative" uses φ_s and requires each service to collect at
    least α_s σ_{∂s}; factors="minimal" uses the λ_s of minimal_slashing and
    requires each service to end at or below its threshold. Charges are
    capped at x_v.
    """
    if isinstance(alt_aggregation, str):
        if alt_aggregation not in AGGREGATIONS:
            raise KeyError(f"Unknown aggregation '{alt_aggregation}'. "
                           f"Available: {list(AGGREGATIONS.keys())}")
        name, g = alt_aggregation, AGGREGATIONS[alt_aggregation]
    else:
        name, g = getattr(alt_aggregation, "__name__", "custom"), alt_aggregation

    if factors == "multiplicative":
        if not is_feasible(graph, attack, tol):
            raise InfeasibleAttackError("comparison needs a feasible attack")
        f = service_factors(graph, attack)
    elif factors == "minimal":
        f = minimal_slashing(graph, attack, tol).lam
    else:
        raise KeyError(f"Unknown factor family '{factors}'. Available: ['multiplicative', 'minimal']")

    def charges(agg) -> dict:
        out = {}
        for v, xv in attack.attackers:
            cov = sorted(graph.services_of(v) & attack.services)
            out[v] = min(agg([f[s] for s in cov]), 1) * xv if cov else zero_like(xv)
        return out

    base, alt = charges(max), charges(g)

    for s in sorted(attack.services):
        collected = total(alt[v] for v in graph.operators_of(s) if v in alt)
        if factors == "multiplicative":
            restored = ge(collected, graph.threshold(s), tol)
        else:
            retained = attack_stake_on(graph, attack, s) - collected
            restored = ge(graph.threshold(s), retained, Tolerance(max(tol.abs, 1e-7)))
        if not restored:
            raise AltRuleInfeasibleError(f"'{name}' aggregation does not restore service {s!r}")

    cmp_tol = tol if factors == "multiplicative" else Tolerance(max(tol.abs, 1e-7))
    witnesses = [v for v in base if gt(alt[v], base[v], cmp_tol)]
    dominates = all(ge(alt[v], base[v], cmp_tol) for v in base)
    return ComponentwiseReport(factors, name, base, alt, dominates, witnesses)
