"""
Marginal slashing: each group of attackers pays only what it adds.

Attackers are grouped by which attacked services they touch:

    B_S = {v ∈ B : A ∩ ∂v = S}         for every non-empty S ⊆ A

A group's marginal cost on service s ∈ S is the stake still missing for the
attack on s once every other group that also hits s has been counted:

    c^s_{B_S} = α_s σ_{∂s} − Σ_{S′ ≠ S, s ∈ S′} σ_{B_S′}
    c_{B_S}   = max_{s ∈ S} c^s_{B_S}

The group is slashed c_{B_S} in total. Every member carries its own stake
minus the group's slack (σ_{B_S} − c_{B_S}):

    ψ_v = [σ_v − (σ_{B_S} − c_{B_S})]₊         (a lone member pays c_{B_S})

This is cheap for honest attackers and resists withholding stake (Type I),
but each identity in a group gets the full slack, so splitting into k
participating identities saves (k − 1)(σ_{B_S} − c_{B_S}) (Type II).

Usage:
    from core.fixtures import overlap_graph, overlap_attack
    out = marginal_slash(overlap_graph(), overlap_attack())
    out.psi            # → {'v1': 5/6, 'v2': 4/3, 'v3': 1/4}
    print(out.summary())
"""

import logging
from dataclasses import dataclass, field

from core.errors import (
    FeasibilityBrokenError,
    NonType2SplitError,
    StakeOutOfRangeError,
    UnknownGroupError,
    UnstableAttackError,
)
from core.graph import (
    AttackSpec,
    OperatorId,
    RestakingGraph,
    SybilSplit,
    apply_split,
    is_feasible,
    is_stable,
    split_attack,
)
from core.numeric import DEFAULT_TOL, Number, Tolerance, display, eq, ge, positive_part, total

logger = logging.getLogger(__name__)


# ═══════════════════════════════════════════════════════════════
# Groups
# ═══════════════════════════════════════════════════════════════

@dataclass(frozen=True)
class GroupPartition:
    """B split by attacked-service fingerprint S = A ∩ ∂v. Empty groups are absent."""
    groups: dict                     # frozenset(S) → tuple of operator ids, sorted

    def fingerprint_of(self, v: OperatorId) -> frozenset:
        for S, members in self.groups.items():
            if v in members:
                return S
        raise UnknownGroupError(f"operator {v!r} is in no group")

    def members(self, S) -> tuple:
        S = frozenset(S)
        if S not in self.groups:
            raise UnknownGroupError(f"no attacker group with fingerprint {sorted(S)}")
        return self.groups[S]


def fingerprint_label(S) -> str:
    return "{" + ",".join(sorted(S)) + "}"


def partition_attackers(graph: RestakingGraph, attack: AttackSpec,
                        tol: Tolerance = DEFAULT_TOL) -> GroupPartition:
    if not is_stable(graph, attack, tol):
        raise UnstableAttackError("marginal slashing needs a stable attack")
    return _partition(graph, attack)


def _partition(graph: RestakingGraph, attack: AttackSpec) -> GroupPartition:
    groups: dict = {}
    for v in attack.attacker_ids:
        S = graph.services_of(v) & attack.services
        groups.setdefault(frozenset(S), []).append(v)
    ordered = sorted(groups.items(), key=lambda kv: (len(kv[0]), sorted(kv[0])))
    return GroupPartition({S: tuple(sorted(vs)) for S, vs in ordered})


def _group_stake(attack: AttackSpec, members) -> Number:
    committed = attack.committed
    return total(committed[v] for v in members)


def marginal_cost(graph: RestakingGraph, attack: AttackSpec, partition: GroupPartition,
                  group) -> tuple[dict, Number]:
    """Per-service costs c^s_{B_S} and their max c_{B_S} for group S."""
    S = frozenset(group)
    if not S:
        raise UnknownGroupError("group fingerprint must be non-empty")
    partition.members(S)

    per_service = {}
    for s in sorted(S):
        others = total(_group_stake(attack, members)
                       for S2, members in partition.groups.items()
                       if S2 != S and s in S2)
        per_service[s] = graph.threshold(s) - others
    return per_service, max(per_service.values())


# ═══════════════════════════════════════════════════════════════
# Slashing
# ═══════════════════════════════════════════════════════════════

@dataclass
class GroupSlash:
    fingerprint: frozenset
    members: tuple
    stake: Number                    # σ_{B_S}
    service_costs: dict              # s → c^s_{B_S}
    cost: Number                     # c_{B_S}
    group_formula: Number            # [σ_{B_S} − |B_S|(σ_{B_S} − c_{B_S})]₊
    psi_total: Number                # Σ ψ_v over members, the reported group slash
    clamped: list = field(default_factory=list)

    @property
    def slack(self) -> Number:
        return self.stake - self.cost

    @property
    def diverges(self) -> bool:
        """Member clamps broke the group-sum identity with the group formula."""
        return not eq(self.psi_total, self.group_formula)


@dataclass
class MarginalSlashOutcome:
    groups: dict                     # frozenset(S) → GroupSlash
    psi: dict                        # operator → ψ_v

    @property
    def total(self) -> Number:
        return total(self.psi.values())

    @property
    def clamp_flags(self) -> dict:
        return {v: True for g in self.groups.values() for v in g.clamped}

    def group_of(self, v: OperatorId) -> GroupSlash:
        for g in self.groups.values():
            if v in g.members:
                return g
        raise UnknownGroupError(f"operator {v!r} is in no group")

    def rows(self) -> list[dict]:
        out = []
        for g in self.groups.values():
            for v in g.members:
                out.append({
                    "operator_id": v,
                    "group_fingerprint": fingerprint_label(g.fingerprint),
                    "c_group": g.cost,
                    "psi": self.psi[v],
                })
        return out

    def summary(self) -> str:
        lines = ["Marginal slashing:"]
        for g in self.groups.values():
            lines.append(f"  B_{fingerprint_label(g.fingerprint):10s} σ={display(g.stake)}  "
                         f"c={display(g.cost)}  slack={display(g.slack)}  "
                         f"ψ_group={display(g.psi_total)}")
            for v in g.members:
                mark = "  [clamped]" if v in g.clamped else ""
                lines.append(f"    {v:8s} ψ={display(self.psi[v])}{mark}")
        lines.append(f"  total slashed: {display(self.total)}")
        return "\n".join(lines)


def marginal_slash(graph: RestakingGraph, attack: AttackSpec,
                   tol: Tolerance = DEFAULT_TOL) -> MarginalSlashOutcome:
    if not is_stable(graph, attack, tol):
        raise UnstableAttackError("marginal slashing needs a stable attack")
    return _slash(graph, attack)


def _slash(graph: RestakingGraph, attack: AttackSpec) -> MarginalSlashOutcome:
    partition = _partition(graph, attack)
    committed = attack.committed
    groups, psi = {}, {}

    for S, members in partition.groups.items():
        costs, c = marginal_cost(graph, attack, partition, S)
        stake = _group_stake(attack, members)
        slack = stake - c
        group_formula = positive_part(stake - len(members) * slack)

        clamped = []
        if len(members) == 1:
            v = members[0]
            raw = c
            psi[v] = min(positive_part(raw), committed[v])
            if psi[v] != raw:
                clamped.append(v)
        else:
            for v in members:
                raw = committed[v] - slack
                psi[v] = positive_part(raw)
                if psi[v] != raw:
                    clamped.append(v)

        g = GroupSlash(S, members, stake, costs, c, group_formula,
                       total(psi[v] for v in members), clamped)
        if clamped:
            logger.debug("group %s: clamp active for %s", fingerprint_label(S), clamped)
        if g.diverges:
            logger.warning("group %s: clamped slash %s differs from the group formula %s",
                           fingerprint_label(S), g.psi_total, group_formula)
        groups[S] = g

    return MarginalSlashOutcome(groups, psi)


# ═══════════════════════════════════════════════════════════════
# Sybil gains
# ═══════════════════════════════════════════════════════════════

def type2_gain(graph: RestakingGraph, attack: AttackSpec, operator: OperatorId,
               split: SybilSplit, tol: Tolerance = DEFAULT_TOL) -> Number:
    """
    Slash saved when `operator` attacks through every part of `split`.
    Positive means the split pays. The split attack keeps its feasibility
    (stake per service is unchanged) but need not stay stable, so it is
    slashed by the group formulas directly.
    """
    if split.parent != operator:
        raise NonType2SplitError(f"split parent {split.parent!r} is not {operator!r}")
    if not all(p.participates and p.inherit_edges for p in split.parts):
        raise NonType2SplitError("every part must participate and inherit the parent's edges")
    if not eq(attack.x(operator), graph.stake(operator), tol):
        raise NonType2SplitError("a Type II split needs the parent to commit its full stake")

    before = marginal_slash(graph, attack, tol).psi[operator]
    new_graph = apply_split(graph, split, tol)
    new_attack = split_attack(attack, split)
    after = _slash(new_graph, new_attack)
    parts = total(after.psi[p.id] for p in split.parts)
    gain = before - parts
    logger.debug("type2_gain %s k=%d: %s → %s", operator, len(split.parts), before, parts)
    return gain


def type1_gain_marginal(graph: RestakingGraph, attack: AttackSpec, operator: OperatorId,
                        withheld: Number, tol: Tolerance = DEFAULT_TOL) -> Number:
    """
    Slash saved when `operator` commits σ_v − withheld instead of σ_v.

    The marginal cost of a group does not depend on its own stake, so as long
    as the reduced commitment still covers the slash the answer is zero.
    """
    before = marginal_slash(graph, attack, tol)
    x = attack.x(operator)
    if withheld < 0 or withheld > x:
        raise StakeOutOfRangeError(f"withheld {withheld} outside [0, {x}]")
    reduced = attack.with_commitment(operator, x - withheld)
    if not is_feasible(graph, reduced, tol):
        raise FeasibilityBrokenError(f"withholding {withheld} breaks feasibility")
    if not ge(x - withheld, before.psi[operator], tol):
        raise FeasibilityBrokenError(
            f"reduced stake {x - withheld} is below the slash {before.psi[operator]}")

    after = _slash(graph, reduced)
    return before.psi[operator] - after.psi[operator]


def slack_of(outcome: MarginalSlashOutcome, operator: OperatorId) -> Number:
    """σ_{B_S} − c_{B_S} for the group of `operator`."""
    return outcome.group_of(operator).slack
