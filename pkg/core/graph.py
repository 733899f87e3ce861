"""
Restaking graph: services, operators, who restakes with whom.

A restaking graph is bipartite: services S (profit from attack π_s, collusion
threshold α_s) on one side, operators V (stake σ_v) on the other, and an edge
(s, v) whenever v restakes its full stake with s.

An attack (A, B) is a set of attacked services and a set of attacking
operators, each committing x_v ≤ σ_v. It works when it is

    profitable:  f(π, A) > σ_B
    feasible:    Σ_{v ∈ B ∩ ∂s} x_v ≥ α_s σ_{∂s}    for every s ∈ A

Everything here is a pure function over immutable values. Splitting an
operator into Sybils builds a new graph; nothing is mutated.

Usage:
    g = RestakingGraph.build(
        services=[Service("s1", pi=Fraction(11, 10), alpha=Fraction(2, 3))],
        operators=[Operator("v1", stake=Fraction(1))],
        edges=[("s1", "v1")],
    )
    attack = AttackSpec.full(g, ["s1"], ["v1"])
    is_feasible(g, attack) and is_profitable(g, attack)    # → True
"""

import itertools
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Optional

from core.errors import (
    ConfigError,
    FeasibilityBrokenError,
    InfeasibleAttackError,
    InstanceTooLargeError,
    MalformedAttackError,
    MalformedSplitError,
    ParseError,
    ShareSumMismatchError,
    UnknownOperatorError,
    UnknownParentError,
    UnknownServiceError,
)
from core.numeric import (
    DEFAULT_TOL,
    Number,
    Tolerance,
    encode_number,
    eq,
    ge,
    gt,
    parse_number,
    total,
)

logger = logging.getLogger(__name__)

ServiceId = str
OperatorId = str

MAX_ENUMERATION = 2 ** 20


# ═══════════════════════════════════════════════════════════════
# Core data structures
# ═══════════════════════════════════════════════════════════════

@dataclass(frozen=True)
class Service:
    id: ServiceId
    pi: Number            # profit from a successful attack
    alpha: Number         # fraction of restaked stake needed to collude


@dataclass(frozen=True)
class Operator:
    id: OperatorId
    stake: Number


@dataclass(frozen=True)
class RestakingGraph:
    """
    Immutable bipartite restaking graph.

    Neighborhoods are precomputed on construction, so ∂v and ∂s lookups are
    dictionary reads. Build through RestakingGraph.build(), which validates.
    """
    services: Mapping[ServiceId, Service]
    operators: Mapping[OperatorId, Operator]
    edges: frozenset
    _svc_nbrs: Mapping[ServiceId, frozenset] = field(default=None, repr=False, compare=False)
    _op_nbrs: Mapping[OperatorId, frozenset] = field(default=None, repr=False, compare=False)

    @classmethod
    def build(
        cls,
        services: Iterable[Service],
        operators: Iterable[Operator],
        edges: Iterable[tuple[ServiceId, OperatorId]],
    ) -> "RestakingGraph":
        svc: dict[ServiceId, Service] = {}
        for s in services:
            if not s.id:
                raise ConfigError("service id must be non-empty")
            if s.id in svc:
                raise ConfigError(f"duplicate service id {s.id!r}")
            if s.pi < 0:
                raise ConfigError(f"service {s.id!r}: pi must be ≥ 0, got {s.pi}")
            if not (0 <= s.alpha <= 1):
                raise ConfigError(f"service {s.id!r}: alpha must lie in [0, 1], got {s.alpha}")
            svc[s.id] = s

        ops: dict[OperatorId, Operator] = {}
        for v in operators:
            if not v.id:
                raise ConfigError("operator id must be non-empty")
            if v.id in ops or v.id in svc:
                raise ConfigError(f"duplicate id {v.id!r}")
            if v.stake < 0:
                raise ConfigError(f"operator {v.id!r}: stake must be ≥ 0, got {v.stake}")
            ops[v.id] = v

        edge_set = set()
        for s, v in edges:
            if s not in svc:
                raise UnknownServiceError(f"edge ({s!r}, {v!r}): unknown service {s!r}")
            if v not in ops:
                raise UnknownOperatorError(f"edge ({s!r}, {v!r}): unknown operator {v!r}")
            edge_set.add((s, v))

        svc_nbrs = {s: set() for s in svc}
        op_nbrs = {v: set() for v in ops}
        for s, v in edge_set:
            svc_nbrs[s].add(v)
            op_nbrs[v].add(s)

        return cls(
            services=dict(sorted(svc.items())),
            operators=dict(sorted(ops.items())),
            edges=frozenset(edge_set),
            _svc_nbrs={s: frozenset(n) for s, n in svc_nbrs.items()},
            _op_nbrs={v: frozenset(n) for v, n in op_nbrs.items()},
        )

    # ── Lookups ──

    def service(self, s: ServiceId) -> Service:
        try:
            return self.services[s]
        except KeyError:
            raise UnknownServiceError(f"unknown service {s!r}") from None

    def operator(self, v: OperatorId) -> Operator:
        try:
            return self.operators[v]
        except KeyError:
            raise UnknownOperatorError(f"unknown operator {v!r}") from None

    def stake(self, v: OperatorId) -> Number:
        return self.operator(v).stake

    def services_of(self, v: OperatorId) -> frozenset:
        """∂v"""
        self.operator(v)
        return self._op_nbrs[v]

    def operators_of(self, s: ServiceId) -> frozenset:
        """∂s"""
        self.service(s)
        return self._svc_nbrs[s]

    def stake_of(self, vs: Iterable[OperatorId]) -> Number:
        """σ_D"""
        return total(self.stake(v) for v in vs)

    def profit_of(self, ss: Iterable[ServiceId]) -> Number:
        """π_A"""
        return total(self.service(s).pi for s in ss)

    def threshold(self, s: ServiceId) -> Number:
        """α_s σ_{∂s}, the stake an attack on s must bring."""
        return self.service(s).alpha * total_restaked_stake(self, s)

    def summary(self) -> str:
        lines = [f"RestakingGraph: {len(self.services)} services, "
                 f"{len(self.operators)} operators, {len(self.edges)} edges"]
        for s, svc in self.services.items():
            nbrs = ",".join(sorted(self._svc_nbrs[s]))
            lines.append(f"  {s:8s} π={float(svc.pi):7.3f}  α={float(svc.alpha):5.3f}  "
                         f"σ∂s={float(total_restaked_stake(self, s)):7.3f}  ∂s={{{nbrs}}}")
        return "\n".join(lines)


@dataclass(frozen=True)
class AttackSpec:
    """
    An attack (A, B): attacked services and attacking operators with the
    stake each commits. x_v defaults to the full stake σ_v.
    """
    services: frozenset
    attackers: tuple                       # ((operator_id, x_v), ...) sorted by id

    @classmethod
    def of(cls, services: Iterable[ServiceId], attackers: Mapping[OperatorId, Number]) -> "AttackSpec":
        return cls(frozenset(services), tuple(sorted(attackers.items())))

    @classmethod
    def full(cls, graph: RestakingGraph, services: Iterable[ServiceId],
             attackers: Iterable[OperatorId]) -> "AttackSpec":
        """Every attacker commits its whole stake."""
        return cls.of(services, {v: graph.stake(v) for v in attackers})

    @property
    def committed(self) -> dict[OperatorId, Number]:
        return dict(self.attackers)

    @property
    def attacker_ids(self) -> list[OperatorId]:
        return [v for v, _ in self.attackers]

    def x(self, v: OperatorId) -> Number:
        for u, xv in self.attackers:
            if u == v:
                return xv
        raise UnknownOperatorError(f"operator {v!r} is not an attacker")

    def with_commitment(self, v: OperatorId, x: Number) -> "AttackSpec":
        c = self.committed
        if v not in c:
            raise UnknownOperatorError(f"operator {v!r} is not an attacker")
        c[v] = x
        return AttackSpec.of(self.services, c)

    def without(self, v: OperatorId) -> "AttackSpec":
        c = self.committed
        c.pop(v, None)
        return AttackSpec.of(self.services, c)


@dataclass(frozen=True)
class SybilPart:
    id: OperatorId
    stake: Number
    inherit_edges: bool = True
    participates: bool = True


@dataclass(frozen=True)
class SybilSplit:
    """An operator dividing itself into ≥ 2 identities that share its stake."""
    parent: OperatorId
    parts: tuple

    @classmethod
    def of(cls, parent: OperatorId, parts: Iterable[SybilPart]) -> "SybilSplit":
        return cls(parent, tuple(parts))

    @classmethod
    def even(cls, parent: OperatorId, stake: Number, k: int, participates: bool = True) -> "SybilSplit":
        """k equal identities, all inheriting edges."""
        share = stake / k
        return cls.of(parent, [SybilPart(f"{parent}~{i + 1}", share, True, participates)
                               for i in range(k)])

    @property
    def participating(self) -> list[SybilPart]:
        return [p for p in self.parts if p.participates]


def sybil_type(split: SybilSplit) -> Optional[str]:
    """'I' if exactly one identity attacks, 'II' if several do, None if none."""
    n = len(split.participating)
    if n == 1:
        return "I"
    if n >= 2:
        return "II"
    return None


# ═══════════════════════════════════════════════════════════════
# Stake totals and attack predicates
# ═══════════════════════════════════════════════════════════════

ProfitAggregation = Callable[[RestakingGraph, frozenset], Number]


def additive_profit(graph: RestakingGraph, services: frozenset) -> Number:
    """f(π, A) = π_A"""
    return graph.profit_of(services)


def total_restaked_stake(graph: RestakingGraph, service: ServiceId) -> Number:
    """σ_{∂s} = Σ_{v ∈ ∂s} σ_v"""
    return graph.stake_of(graph.operators_of(service))


def validate_attack(graph: RestakingGraph, attack: AttackSpec) -> None:
    """Raise MalformedAttackError unless A, B are non-empty and well-formed."""
    if not attack.services:
        raise MalformedAttackError("attack has no services")
    if not attack.attackers:
        raise MalformedAttackError("attack has no attackers")
    for s in attack.services:
        if s not in graph.services:
            raise MalformedAttackError(f"attacked service {s!r} is not in the graph")
    seen = set()
    for v, xv in attack.attackers:
        if v in seen:
            raise MalformedAttackError(f"attacker {v!r} listed twice")
        seen.add(v)
        if v not in graph.operators:
            raise MalformedAttackError(f"attacker {v!r} is not in the graph")
        if xv < 0 or gt(xv, graph.stake(v)):
            raise MalformedAttackError(
                f"attacker {v!r} commits {xv}, outside [0, σ_v={graph.stake(v)}]")


def attack_stake_on(graph: RestakingGraph, attack: AttackSpec, service: ServiceId) -> Number:
    """Σ_{v ∈ B ∩ ∂s} x_v"""
    nbrs = graph.operators_of(service)
    return total(xv for v, xv in attack.attackers if v in nbrs)


def is_feasible(graph: RestakingGraph, attack: AttackSpec, tol: Tolerance = DEFAULT_TOL) -> bool:
    validate_attack(graph, attack)
    return all(ge(attack_stake_on(graph, attack, s), graph.threshold(s), tol)
               for s in attack.services)


def is_profitable(
    graph: RestakingGraph,
    attack: AttackSpec,
    profit_fn: ProfitAggregation = additive_profit,
    tol: Tolerance = DEFAULT_TOL,
) -> bool:
    """f(π, A) > σ_B, strict. σ_B counts each attacker's full stake σ_v."""
    validate_attack(graph, attack)
    return gt(profit_fn(graph, attack.services), graph.stake_of(attack.attacker_ids), tol)


def is_stable(graph: RestakingGraph, attack: AttackSpec, tol: Tolerance = DEFAULT_TOL) -> bool:
    """
    No attacker is redundant: each commits positive stake, touches at least
    one attacked service, and its removal breaks the feasibility of at least
    one attacked service it is connected to.
    """
    if not is_feasible(graph, attack, tol):
        raise InfeasibleAttackError("stability is only defined for feasible attacks")
    for v, xv in attack.attackers:
        if xv <= 0:
            return False
        covered = graph.services_of(v) & attack.services
        if not covered:
            return False
        reduced = attack.without(v)
        breaks = False
        for s in covered:
            if not ge(attack_stake_on(graph, reduced, s), graph.threshold(s), tol):
                breaks = True
                break
        if not breaks:
            return False
    return True


# ═══════════════════════════════════════════════════════════════
# Sybil splits
# ═══════════════════════════════════════════════════════════════

def _check_split(graph: RestakingGraph, split: SybilSplit, tol: Tolerance) -> None:
    if split.parent not in graph.operators:
        raise UnknownParentError(f"unknown parent operator {split.parent!r}")
    if len(split.parts) < 2:
        raise MalformedSplitError(f"a split needs at least 2 parts, got {len(split.parts)}")
    ids = [p.id for p in split.parts]
    if len(set(ids)) != len(ids):
        raise MalformedSplitError(f"duplicate part ids in {ids}")
    for pid in ids:
        if pid != split.parent and (pid in graph.operators or pid in graph.services):
            raise MalformedSplitError(f"part id {pid!r} collides with an existing node")
    if any(p.stake < 0 for p in split.parts):
        raise MalformedSplitError("part stakes must be ≥ 0")
    shares = total(p.stake for p in split.parts)
    if not eq(shares, graph.stake(split.parent), tol):
        raise ShareSumMismatchError(
            f"parts sum to {shares}, parent {split.parent!r} has {graph.stake(split.parent)}")


def apply_split(graph: RestakingGraph, split: SybilSplit, tol: Tolerance = DEFAULT_TOL) -> RestakingGraph:
    """Replace the parent by its parts; inheriting parts copy every parent edge."""
    _check_split(graph, split, tol)
    parent_edges = graph.services_of(split.parent)

    operators = [op for v, op in graph.operators.items() if v != split.parent]
    operators += [Operator(p.id, p.stake) for p in split.parts]
    edges = [(s, v) for s, v in graph.edges if v != split.parent]
    for p in split.parts:
        if p.inherit_edges:
            edges += [(s, p.id) for s in parent_edges]
    return RestakingGraph.build(graph.services.values(), operators, edges)


def split_attack(attack: AttackSpec, split: SybilSplit) -> AttackSpec:
    """
    The attack after `split`: the parent leaves B, every participating part
    joins with its full share.
    """
    c = attack.committed
    c.pop(split.parent, None)
    for p in split.participating:
        c[p.id] = p.stake
    return AttackSpec.of(attack.services, c)


# ═══════════════════════════════════════════════════════════════
# Full-slashing baseline
# ═══════════════════════════════════════════════════════════════

def full_slash(graph: RestakingGraph, attack: AttackSpec) -> dict[OperatorId, Number]:
    """Prior analysis: every attacker loses everything it committed."""
    validate_attack(graph, attack)
    return attack.committed


def type1_gain_full(graph: RestakingGraph, attack: AttackSpec, operator: OperatorId,
                    split: SybilSplit, tol: Tolerance = DEFAULT_TOL) -> Number:
    """
    Stake saved under full slashing when `operator` splits and attacks with a
    single identity. The withheld parts keep their stake.

    Single-service example: σ₁ = 1, α₁ = 2/3, split (2/3, 1/3) → saves 1/3.
    """
    if split.parent != operator:
        raise UnknownParentError(f"split parent {split.parent!r} is not {operator!r}")
    if sybil_type(split) != "I":
        raise MalformedSplitError("type1_gain_full needs exactly one participating part")
    new_graph = apply_split(graph, split, tol)
    new_attack = split_attack(attack, split)
    if not is_feasible(new_graph, new_attack, tol):
        raise FeasibilityBrokenError("the withholding split makes the attack infeasible")
    before = full_slash(graph, attack)[operator]
    after = total(new_attack.x(p.id) for p in split.participating)
    return before - after


# ═══════════════════════════════════════════════════════════════
# Brute-force enumeration (oracle for tests)
# ═══════════════════════════════════════════════════════════════

def _subsets(items: list, max_size: Optional[int]):
    top = len(items) if max_size is None else min(max_size, len(items))
    for r in range(1, top + 1):
        yield from itertools.combinations(items, r)


def enumerate_attacks(
    graph: RestakingGraph,
    max_services: Optional[int] = None,
    max_attackers: Optional[int] = None,
    profit_fn: ProfitAggregation = additive_profit,
    tol: Tolerance = DEFAULT_TOL,
) -> list[AttackSpec]:
    """
    Every full-stake attack (A, B) that is profitable and feasible, ordered by
    (|A|, A, |B|, B). Refuses instances with more than 2^20 candidate pairs.
    """
    n_s, n_v = len(graph.services), len(graph.operators)
    if 2 ** (n_s + n_v) > MAX_ENUMERATION:
        raise InstanceTooLargeError(
            f"{n_s} services × {n_v} operators gives 2^{n_s + n_v} candidates (limit 2^20)")

    service_ids = sorted(graph.services)
    operator_ids = sorted(graph.operators)
    found = []
    for A in _subsets(service_ids, max_services):
        for B in _subsets(operator_ids, max_attackers):
            attack = AttackSpec.full(graph, A, B)
            if is_profitable(graph, attack, profit_fn, tol) and is_feasible(graph, attack, tol):
                found.append(attack)
    logger.debug("enumerate_attacks: %d attacks on %d×%d graph", len(found), n_s, n_v)
    return found


# ═══════════════════════════════════════════════════════════════
# JSON files
# ═══════════════════════════════════════════════════════════════

def graph_to_dict(graph: RestakingGraph) -> dict:
    return {
        "services": [{"id": s.id, "pi": encode_number(s.pi), "alpha": encode_number(s.alpha)}
                     for s in graph.services.values()],
        "operators": [{"id": v.id, "stake": encode_number(v.stake)}
                      for v in graph.operators.values()],
        "edges": [[s, v] for s, v in sorted(graph.edges)],
    }


def graph_from_dict(doc: dict) -> RestakingGraph:
    try:
        services = [Service(str(d["id"]), parse_number(d["pi"]), parse_number(d["alpha"]))
                    for d in doc["services"]]
        operators = [Operator(str(d["id"]), parse_number(d["stake"])) for d in doc["operators"]]
        edges = [(str(s), str(v)) for s, v in doc.get("edges", [])]
    except (KeyError, TypeError, ValueError, ZeroDivisionError) as e:
        raise ParseError(f"malformed graph document: {e}") from e
    return RestakingGraph.build(services, operators, edges)


def attack_to_dict(attack: AttackSpec) -> dict:
    return {
        "services": sorted(attack.services),
        "attackers": [{"id": v, "x": encode_number(xv)} for v, xv in attack.attackers],
    }


def attack_from_dict(doc: dict, graph: RestakingGraph) -> AttackSpec:
    """Attackers without an "x" commit their full stake."""
    if not isinstance(doc, dict) or not doc.get("services") or not doc.get("attackers"):
        raise MalformedAttackError("attack document needs non-empty 'services' and 'attackers'")
    committed, seen = {}, set()
    for d in doc["attackers"]:
        try:
            v = str(d["id"]) if isinstance(d, dict) else str(d)
            x = d.get("x") if isinstance(d, dict) else None
            if v in graph.operators:
                committed[v] = graph.stake(v) if x is None else parse_number(x)
        except (KeyError, TypeError, ValueError, ZeroDivisionError) as e:
            raise ParseError(f"malformed attacker entry {d!r}: {e}") from e
        if v not in graph.operators:
            raise MalformedAttackError(f"attacker {v!r} is not in the graph")
        if v in seen:
            raise MalformedAttackError(f"attacker {v!r} listed twice")
        seen.add(v)
    attack = AttackSpec.of([str(s) for s in doc["services"]], committed)
    validate_attack(graph, attack)
    return attack


def read_json(path) -> object:
    text = Path(path).read_text(encoding="utf-8")
    if not text.strip():
        return {}
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: {e.msg}", line=e.lineno, column=e.colno) from e


def load_graph(path) -> RestakingGraph:
    return graph_from_dict(read_json(path))


def dump_graph(graph: RestakingGraph, path) -> None:
    Path(path).write_text(json.dumps(graph_to_dict(graph), indent=2) + "\n", encoding="utf-8")


def load_attack(path, graph: RestakingGraph) -> AttackSpec:
    return attack_from_dict(read_json(path), graph)


def dump_attack(attack: AttackSpec, path) -> None:
    Path(path).write_text(json.dumps(attack_to_dict(attack), indent=2) + "\n", encoding="utf-8")
