"""
Built-in worked examples: small graphs, attacks and models with known answers.

Every value here can be checked by hand, which makes them the backbone of the
test suite and of the `paper-examples` command:

    single_service_graph()   one service (π 1.1, α 2/3), v1 with σ 1
    sybil_comparison_graph() two services, v1 restaking with both (σ 1), v2 with s2
    overlap_graph()          s1, s2 sharing v2: the marginal / max-scheme example
    two_block_model()        two-block SBM where a 2-way split beats one identity

REFERENCE_CHECKS lists (id, group, expected, tolerance, compute) rows; the
expected numbers are kept at the precision they were first reported with.

Usage:
    g, a = overlap_graph(), overlap_attack()
    marginal_slash(g, a).psi                  # {'v1': 5/6, 'v2': 4/3, 'v3': 1/4}
    for check in REFERENCE_CHECKS:
        print(check.id, check.run())
"""

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional

from core.graph import (
    AttackSpec,
    Operator,
    RestakingGraph,
    Service,
    SybilPart,
    SybilSplit,
    apply_split,
    is_feasible,
    split_attack,
    type1_gain_full,
)
from core.marginal import marginal_slash, type2_gain
from core.multislash import max_scheme_type1_variant, minimal_slashing, mult_slash_max
from core.randnet import (
    SbmModel,
    clearance,
    clearance_model,
    min_sybil_count,
    success_per_identity,
    success_single,
    success_sybil,
)
from core.strategy import UtilityContext, utility

F = Fraction


# ═══════════════════════════════════════════════════════════════
# Restaking graphs
# ═══════════════════════════════════════════════════════════════

def single_service_graph() -> RestakingGraph:
    return RestakingGraph.build(
        services=[Service("s1", pi=F(11, 10), alpha=F(2, 3))],
        operators=[Operator("v1", stake=F(1))],
        edges=[("s1", "v1")],
    )


def single_service_attack(graph: Optional[RestakingGraph] = None) -> AttackSpec:
    graph = graph or single_service_graph()
    return AttackSpec.full(graph, ["s1"], ["v1"])


def withholding_pair(parent: str = "v1") -> SybilSplit:
    """parent → 2/3 attacking + 1/3 passive, both keeping the parent's edges."""
    return SybilSplit.of(parent, [
        SybilPart(f"{parent}^1", F(2, 3)),
        SybilPart(f"{parent}^2", F(1, 3), participates=False),
    ])


def sybil_comparison_graph() -> RestakingGraph:
    """
    v1 (σ 1) restakes with s1 and s2, v2 (σ 1.1) with s2 only. The attack is
    ({s1}, {v1}); s2 is there to show that the withheld identity survives.
    α₂ is not pinned down by the example; 2/3 is used.
    """
    return RestakingGraph.build(
        services=[Service("s1", F(11, 10), F(2, 3)), Service("s2", F(1), F(2, 3))],
        operators=[Operator("v1", F(1)), Operator("v2", F(11, 10))],
        edges=[("s1", "v1"), ("s2", "v1"), ("s2", "v2")],
    )


def overlap_graph(pi1=F(2), pi2=F(2)) -> RestakingGraph:
    """
    ∂s1 = {v0, v1, v2}, ∂s2 = {v2, v3, v4}; σ = 1 except σ_v2 = 3/2.
    α₁ = 2/3, α₂ = 1/2, so both thresholds are taken against σ_∂s = 7/2.
    """
    return RestakingGraph.build(
        services=[Service("s1", pi1, F(2, 3)), Service("s2", pi2, F(1, 2))],
        operators=[Operator("v0", F(1)), Operator("v1", F(1)), Operator("v2", F(3, 2)),
                   Operator("v3", F(1)), Operator("v4", F(1))],
        edges=[("s1", "v0"), ("s1", "v1"), ("s1", "v2"),
               ("s2", "v2"), ("s2", "v3"), ("s2", "v4")],
    )


def overlap_attack(graph: Optional[RestakingGraph] = None) -> AttackSpec:
    graph = graph or overlap_graph()
    return AttackSpec.full(graph, ["s1", "s2"], ["v1", "v2", "v3"])


def overlap_split() -> SybilSplit:
    """v2 → three attacking identities with 1/2, 3/4, 1/4."""
    return SybilSplit.of("v2", [
        SybilPart("v2^1", F(1, 2)),
        SybilPart("v2^2", F(3, 4)),
        SybilPart("v2^3", F(1, 4)),
    ])


OVERLAP_WITHHOLD_COMMIT = F(7, 5)          # v2 attacks with 1.4 of its 1.5


def single_service_minimal_attack(graph: Optional[RestakingGraph] = None) -> AttackSpec:
    """({s2}, {v2, v3}): σ_B = 5/2 against α σ_T = 7/4, so λ* = 3/10."""
    graph = graph or overlap_graph()
    return AttackSpec.full(graph, ["s2"], ["v2", "v3"])


def lp_gap_graph() -> RestakingGraph:
    """
    Two services where the factorized minimal slash is not the LP optimum.
    s1 must shed 1/2 of (v1 10, v2 1); s2 must shed 1 of (v2 1, v3 100).
    Charging v2 alone costs 1; any common-factor solution costs 16/11.
    """
    return RestakingGraph.build(
        services=[Service("s1", F(0), F(1, 2)), Service("s2", F(0), F(1, 2))],
        operators=[Operator("v1", F(10)), Operator("v2", F(1)), Operator("v3", F(100)),
                   Operator("w1", F(10)), Operator("w3", F(99))],
        edges=[("s1", "v1"), ("s1", "v2"), ("s1", "w1"),
               ("s2", "v2"), ("s2", "v3"), ("s2", "w3")],
    )


def lp_gap_attack(graph: Optional[RestakingGraph] = None) -> AttackSpec:
    graph = graph or lp_gap_graph()
    return AttackSpec.full(graph, ["s1", "s2"], ["v1", "v2", "v3"])


# ═══════════════════════════════════════════════════════════════
# Random-network models
# ═══════════════════════════════════════════════════════════════

def two_block_model(pis: tuple = ()) -> SbmModel:
    """
    60 background operators of stake 1; block 0 (α 2/3) is dense (p 0.30),
    block 1 (α 1/2) is thin (p 0.02). The attacker reaches both equally.
    μ = (18, 1.2), σ ≈ (3.5496, 1.0844), p(3) ≈ 0.4758, p′(3; 2) ≈ 0.5163.
    """
    return SbmModel(
        service_blocks=(200, 200),
        alphas=(2 / 3, 1 / 2),
        operator_blocks=(60,),
        P=((0.30, 0.02),),
        sigma_bar=1.0,
        attacker_p=(0.5, 0.5),
        pis=tuple(pis),
    )


def neighbor_model() -> SbmModel:
    """One block with m_b p_ab = 18: the Chernoff bound is 1 − e^{−2.25}."""
    return SbmModel.erdos_renyi(n=60, m=60, p=0.30, alpha=2 / 3, attacker_p=0.30)


# ═══════════════════════════════════════════════════════════════
# Reference checks
# ═══════════════════════════════════════════════════════════════

@dataclass(frozen=True)
class ReferenceCheck:
    id: str
    group: str
    description: str
    expected: float
    tolerance: float
    compute: Callable[[], float]

    def run(self, tolerance: Optional[float] = None) -> tuple[float, bool]:
        tol = self.tolerance if tolerance is None else tolerance
        value = float(self.compute())
        return value, abs(value - self.expected) <= tol


def _marginal(v):
    return lambda: marginal_slash(overlap_graph(), overlap_attack()).psi[v]


def _marginal_split(v):
    def run():
        g, a, split = overlap_graph(), overlap_attack(), overlap_split()
        return marginal_slash(apply_split(g, split), split_attack(a, split)).psi[v]
    return run


def _max_scheme(v):
    return lambda: mult_slash_max(overlap_graph(), overlap_attack()).psi[v]


def _withholding(key: str, v: Optional[str] = None):
    def run():
        out = max_scheme_type1_variant(overlap_graph(), overlap_attack(), "v2",
                                       OVERLAP_WITHHOLD_COMMIT)
        if key == "parent":
            return out["parent_after"]
        if key == "total":
            return out["after"].total
        if key == "ordering":
            return 1.0 if out["before"].total < out["after"].total else 0.0
        return out["after"].psi[v]
    return run


def _utility(operator: str, sharing: str):
    def run():
        g, a = overlap_graph(), overlap_attack()
        ctx = UtilityContext.from_attack(g, a, operator, sharing=sharing)
        return utility(ctx, float(g.stake(operator)))
    return run


def _single_service_gain():
    g = single_service_graph()
    return type1_gain_full(g, single_service_attack(g), "v1", withholding_pair())


def _sybil_comparison_gain():
    g = sybil_comparison_graph()
    return type1_gain_full(g, AttackSpec.full(g, ["s1"], ["v1"]), "v1", withholding_pair())


def _feasible_single():
    g = single_service_graph()
    return 1.0 if is_feasible(g, single_service_attack(g)) else 0.0


REFERENCE_CHECKS: list[ReferenceCheck] = [
    # single service, full slashing
    ReferenceCheck("simple.feasible", "simple", "({s1},{v1}) is feasible", 1.0, 0.0, _feasible_single),
    ReferenceCheck("simple.gain", "simple", "withholding 1/3 of v1 saves 1/3", 1 / 3, 1e-9,
                   _single_service_gain),
    ReferenceCheck("simple.gain-two-services", "simple", "same split with s2 present", 1 / 3, 1e-9,
                   _sybil_comparison_gain),

    # marginal mechanism on the overlap graph
    ReferenceCheck("marginal.v1", "marginal", "ψ_v1", 0.83, 0.005, _marginal("v1")),
    ReferenceCheck("marginal.v2", "marginal", "ψ_v2", 1.33, 0.005, _marginal("v2")),
    ReferenceCheck("marginal.v3", "marginal", "ψ_v3", 0.25, 0.005, _marginal("v3")),
    ReferenceCheck("marginal-split.v2^1", "marginal-split", "ψ of the 1/2 identity", 0.33, 0.005,
                   _marginal_split("v2^1")),
    ReferenceCheck("marginal-split.v2^2", "marginal-split", "ψ of the 3/4 identity", 0.58, 0.005,
                   _marginal_split("v2^2")),
    ReferenceCheck("marginal-split.v2^3", "marginal-split", "ψ of the 1/4 identity", 0.08, 0.005,
                   _marginal_split("v2^3")),
    ReferenceCheck("marginal-split.gain", "marginal-split", "saved by the 3-way split", 0.34, 0.007,
                   lambda: type2_gain(overlap_graph(), overlap_attack(), "v2", overlap_split())),

    # multiplicative max-scheme
    ReferenceCheck("max.v1", "max", "ψ_v1", 0.932, 0.005, _max_scheme("v1")),
    ReferenceCheck("max.v2", "max", "ψ_v2", 1.398, 0.005, _max_scheme("v2")),
    ReferenceCheck("max.v3", "max", "ψ_v3", 0.352, 0.005, _max_scheme("v3")),
    ReferenceCheck("max.total", "max", "total without split", 2.682, 0.005,
                   lambda: mult_slash_max(overlap_graph(), overlap_attack()).total),
    ReferenceCheck("max-withhold.v1", "max-withhold", "ψ_v1 after v2 withholds 0.1", 0.97, 0.005,
                   _withholding("psi", "v1")),
    ReferenceCheck("max-withhold.v2", "max-withhold", "ψ of v2's attacking identity", 1.36, 0.005,
                   _withholding("parent")),
    ReferenceCheck("max-withhold.v3", "max-withhold", "ψ_v3 after v2 withholds 0.1", 0.39, 0.005,
                   _withholding("psi", "v3")),
    ReferenceCheck("max-withhold.total", "max-withhold", "total with the split", 2.72, 0.005,
                   _withholding("total")),
    ReferenceCheck("max-withhold.ordering", "max-withhold", "withholding raises the total", 1.0, 0.0,
                   _withholding("ordering")),
    ReferenceCheck("minimal.single", "minimal", "λ* for σ_B 2.5 against α σ_T 1.75", 0.3, 1e-12,
                   lambda: minimal_slashing(overlap_graph(), single_service_minimal_attack()).lam["s2"]),

    # utilities with π₁ = π₂ = 2
    ReferenceCheck("utility.v2", "utility", "u_v2(1.5), proportional", 1.002, 0.005,
                   _utility("v2", "proportional")),
    ReferenceCheck("utility.v1", "utility", "u_v1(1), proportional", -0.132, 0.005,
                   _utility("v1", "proportional")),
    ReferenceCheck("utility.v1-pooled", "utility", "u_v1(1), pooled", 0.21, 0.01,
                   _utility("v1", "pooled")),

    # two-block SBM at x = 3
    ReferenceCheck("sbm.mu0", "sbm", "μ of the dense block", 18.0, 1e-9,
                   lambda: clearance_model(two_block_model()).mu[0]),
    ReferenceCheck("sbm.sd0", "sbm", "σ of the dense block", 3.54965, 1e-4,
                   lambda: clearance_model(two_block_model()).sd[0]),
    ReferenceCheck("sbm.mu1", "sbm", "μ of the thin block", 1.2, 1e-9,
                   lambda: clearance_model(two_block_model()).mu[1]),
    ReferenceCheck("sbm.sd1", "sbm", "σ of the thin block", 1.08444, 1e-4,
                   lambda: clearance_model(two_block_model()).sd[1]),
    ReferenceCheck("sbm.q0", "sbm", "q_0(3)", 1.673e-6, 5e-8,
                   lambda: clearance(two_block_model(), 0, 3.0)),
    ReferenceCheck("sbm.q1", "sbm", "q_1(3)", 0.95153, 1e-4,
                   lambda: clearance(two_block_model(), 1, 3.0)),
    ReferenceCheck("sbm.p", "sbm", "p(3)", 0.47576, 1e-4,
                   lambda: success_single(two_block_model(), 3.0)),
    ReferenceCheck("sbm.p2", "sbm", "p_2(3)", 0.30449, 1e-4,
                   lambda: success_per_identity(two_block_model(), 3.0, 2)),
    ReferenceCheck("sbm.p-prime", "sbm", "p′(3; 2)", 0.51626, 1e-4,
                   lambda: success_sybil(two_block_model(), 3.0, 2)),
    ReferenceCheck("sbm.k-star", "sbm", "least beneficial Sybil count at x = 3", 2.0, 0.0,
                   lambda: min_sybil_count(two_block_model(), 3.0).k_star or 0),
]

CHECK_GROUPS = tuple(dict.fromkeys(c.group for c in REFERENCE_CHECKS))


def select_checks(only: Optional[list] = None) -> list[ReferenceCheck]:
    """Filter by check id or group name."""
    if not only:
        return list(REFERENCE_CHECKS)
    wanted = set(only)
    known = {c.id for c in REFERENCE_CHECKS} | set(CHECK_GROUPS)
    unknown = sorted(wanted - known)
    if unknown:
        raise KeyError(f"Unknown check '{unknown[0]}'. Available groups: {list(CHECK_GROUPS)}")
    return [c for c in REFERENCE_CHECKS if c.id in wanted or c.group in wanted]
