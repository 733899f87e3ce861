"""Restaking graph: construction, attack predicates, Sybil splits, enumeration, JSON."""

import itertools
import json
from fractions import Fraction as F

import numpy as np
import pytest

from conftest import random_graph
from core import fixtures
from core.errors import (
    ConfigError,
    FeasibilityBrokenError,
    InfeasibleAttackError,
    InstanceTooLargeError,
    MalformedAttackError,
    MalformedSplitError,
    ParseError,
    RestakeError,
    ShareSumMismatchError,
    UnknownOperatorError,
    UnknownParentError,
    UnknownServiceError,
)
from core.graph import (
    AttackSpec,
    Operator,
    RestakingGraph,
    Service,
    SybilPart,
    SybilSplit,
    apply_split,
    attack_from_dict,
    dump_attack,
    dump_graph,
    enumerate_attacks,
    is_feasible,
    is_profitable,
    is_stable,
    load_attack,
    load_graph,
    split_attack,
    sybil_type,
    total_restaked_stake,
    type1_gain_full,
)


class TestConstruction:
    def test_neighborhoods(self):
        g = fixtures.overlap_graph()
        assert g.operators_of("s1") == {"v0", "v1", "v2"}
        assert g.services_of("v2") == {"s1", "s2"}

    def test_total_restaked_stake(self):
        g = fixtures.overlap_graph()
        assert total_restaked_stake(g, "s1") == F(7, 2)
        assert total_restaked_stake(g, "s2") == F(7, 2)
        assert g.threshold("s1") == F(7, 3)
        assert g.threshold("s2") == F(7, 4)

    def test_service_without_operators_has_zero_stake(self):
        g = RestakingGraph.build([Service("s", F(1), F(1, 2))], [Operator("v", F(1))], [])
        assert total_restaked_stake(g, "s") == 0

    def test_edge_to_unknown_node(self):
        with pytest.raises(UnknownServiceError):
            RestakingGraph.build([Service("s", 1, F(1, 2))], [Operator("v", 1)], [("t", "v")])
        with pytest.raises(UnknownOperatorError):
            RestakingGraph.build([Service("s", 1, F(1, 2))], [Operator("v", 1)], [("s", "w")])

    def test_rejects_bad_parameters(self):
        with pytest.raises(ValueError):
            RestakingGraph.build([Service("s", 1, F(3, 2))], [], [])
        with pytest.raises(ValueError):
            RestakingGraph.build([], [Operator("v", -1)], [])

    def test_unknown_lookup(self):
        g = fixtures.overlap_graph()
        with pytest.raises(UnknownOperatorError) as exc:
            g.stake("nobody")
        assert exc.value.code == "unknown-operator"
        assert isinstance(exc.value, ValueError)


class TestAttackPredicates:
    def test_overlap_attack(self, overlap):
        g, a = overlap
        assert is_profitable(g, a)
        assert is_feasible(g, a)
        assert is_stable(g, a)

    def test_feasibility_boundary_is_inclusive(self, single):
        g, a = single
        assert is_feasible(g, a.with_commitment("v1", F(2, 3)))
        assert not is_feasible(g, a.with_commitment("v1", F(2, 3) - F(1, 10 ** 9)))

    def test_float_boundary_within_tolerance(self):
        g = RestakingGraph.build([Service("s", 1.1, 2 / 3)], [Operator("v", 1.0)], [("s", "v")])
        a = AttackSpec.of(["s"], {"v": 2 / 3 - 1e-12})
        assert is_feasible(g, a)

    def test_profitability_is_strict(self):
        g = RestakingGraph.build([Service("s", F(1), F(1, 2))], [Operator("v", F(1))], [("s", "v")])
        assert not is_profitable(g, AttackSpec.full(g, ["s"], ["v"]))

    def test_redundant_attacker_is_unstable(self, overlap):
        g, _ = overlap
        a = AttackSpec.full(g, ["s1", "s2"], ["v0", "v1", "v2", "v3"])
        assert is_feasible(g, a)
        assert not is_stable(g, a)

    def test_zero_commitment_is_unstable(self, overlap):
        g, _ = overlap
        a = AttackSpec.of(["s1", "s2"], {"v0": F(0), "v1": F(1), "v2": F(3, 2), "v3": F(1)})
        assert not is_stable(g, a)

    def test_stability_of_infeasible_attack_raises(self, overlap):
        g, _ = overlap
        a = AttackSpec.full(g, ["s1"], ["v1"])
        with pytest.raises(InfeasibleAttackError):
            is_stable(g, a)

    def test_malformed_attacks(self, overlap):
        g, _ = overlap
        with pytest.raises(MalformedAttackError):
            is_feasible(g, AttackSpec.of([], {"v1": F(1)}))
        with pytest.raises(MalformedAttackError):
            is_feasible(g, AttackSpec.of(["s1"], {}))
        with pytest.raises(MalformedAttackError):
            is_feasible(g, AttackSpec.of(["s1"], {"v1": F(2)}))


class TestSybilSplits:
    def test_parts_inherit_edges(self, overlap):
        g, _ = overlap
        g2 = apply_split(g, fixtures.overlap_split())
        assert "v2" not in g2.operators
        for pid in ("v2^1", "v2^2", "v2^3"):
            assert g2.services_of(pid) == {"s1", "s2"}
        assert total_restaked_stake(g2, "s1") == F(7, 2)

    def test_non_inheriting_part_is_isolated(self, single):
        g, _ = single
        split = SybilSplit.of("v1", [SybilPart("a", F(1, 2)), SybilPart("b", F(1, 2), inherit_edges=False)])
        g2 = apply_split(g, split)
        assert g2.services_of("b") == frozenset()
        assert total_restaked_stake(g2, "s1") == F(1, 2)

    def test_share_mismatch(self, single):
        g, _ = single
        split = SybilSplit.of("v1", [SybilPart("a", F(1, 2)), SybilPart("b", F(1, 3))])
        with pytest.raises(ShareSumMismatchError):
            apply_split(g, split)

    def test_unknown_parent(self, single):
        g, _ = single
        with pytest.raises(UnknownParentError):
            apply_split(g, SybilSplit.even("v9", F(1), 2))

    def test_split_needs_two_parts(self, single):
        g, _ = single
        with pytest.raises(MalformedSplitError):
            apply_split(g, SybilSplit.of("v1", [SybilPart("a", F(1))]))

    def test_part_id_collision(self, overlap):
        g, _ = overlap
        split = SybilSplit.of("v2", [SybilPart("v1", F(1)), SybilPart("x", F(1, 2))])
        with pytest.raises(MalformedSplitError):
            apply_split(g, split)

    def test_sybil_type(self):
        assert sybil_type(fixtures.withholding_pair()) == "I"
        assert sybil_type(fixtures.overlap_split()) == "II"
        assert sybil_type(SybilSplit.even("v", F(1), 2, participates=False)) is None

    def test_split_attack_replaces_parent(self, overlap):
        g, a = overlap
        a2 = split_attack(a, fixtures.overlap_split())
        assert set(a2.attacker_ids) == {"v1", "v3", "v2^1", "v2^2", "v2^3"}
        assert is_feasible(apply_split(g, fixtures.overlap_split()), a2)

    def test_withholding_saves_a_third_under_full_slashing(self, single):
        g, a = single
        assert type1_gain_full(g, a, "v1", fixtures.withholding_pair()) == F(1, 3)

    def test_withholding_too_much_breaks_feasibility(self, single):
        g, a = single
        split = SybilSplit.of("v1", [SybilPart("a", F(1, 2)), SybilPart("b", F(1, 2), participates=False)])
        with pytest.raises(FeasibilityBrokenError):
            type1_gain_full(g, a, "v1", split)


class TestEnumeration:
    @staticmethod
    def naive(g):
        out = []
        for r in range(1, len(g.services) + 1):
            for A in itertools.combinations(sorted(g.services), r):
                for q in range(1, len(g.operators) + 1):
                    for B in itertools.combinations(sorted(g.operators), q):
                        pi = sum(g.service(s).pi for s in A)
                        stake = sum(g.stake(v) for v in B)
                        ok = all(sum(g.stake(v) for v in B if v in g.operators_of(s)) >= g.threshold(s)
                                 for s in A)
                        if pi > stake and ok:
                            out.append((frozenset(A), frozenset(B)))
        return out

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_naive_search(self, seed):
        g = random_graph(np.random.default_rng(seed), n_services=3, n_operators=4)
        found = [(a.services, frozenset(a.attacker_ids)) for a in enumerate_attacks(g)]
        assert sorted(map(sorted_key, found)) == sorted(map(sorted_key, self.naive(g)))

    def test_overlap_contains_worked_attack(self, overlap):
        g, a = overlap
        found = enumerate_attacks(g)
        assert any(x.services == a.services and set(x.attacker_ids) == set(a.attacker_ids) for x in found)
        assert all(is_feasible(g, x) and is_profitable(g, x) for x in found)

    def test_size_limits(self, overlap):
        g, _ = overlap
        assert all(len(a.services) <= 1 and len(a.attackers) <= 2
                   for a in enumerate_attacks(g, max_services=1, max_attackers=2))

    def test_refuses_large_instances(self):
        ops = [Operator(f"v{i}", F(1)) for i in range(20)]
        g = RestakingGraph.build([Service("s", F(1), F(1, 2))], ops, [])
        with pytest.raises(InstanceTooLargeError):
            enumerate_attacks(g)


def sorted_key(pair):
    A, B = pair
    return (tuple(sorted(A)), tuple(sorted(B)))


class TestJson:
    def test_round_trip(self, overlap, tmp_path):
        g, a = overlap
        dump_graph(g, tmp_path / "g.json")
        dump_attack(a, tmp_path / "a.json")
        g2 = load_graph(tmp_path / "g.json")
        assert g2 == g
        assert load_attack(tmp_path / "a.json", g2) == a

    def test_fixture_files_match_builders(self, fixture_dir):
        g = load_graph(fixture_dir / "overlap_graph.json")
        assert g == fixtures.overlap_graph()
        assert load_attack(fixture_dir / "overlap_attack.json", g) == fixtures.overlap_attack()

    def test_decimal_strings_stay_exact(self, tmp_path):
        doc = {"services": [{"id": "s", "pi": "1.1", "alpha": "2/3"}],
               "operators": [{"id": "v", "stake": 1}], "edges": [["s", "v"]]}
        p = tmp_path / "g.json"
        p.write_text(json.dumps(doc))
        g = load_graph(p)
        assert g.service("s").pi == F(11, 10)
        assert g.service("s").alpha == F(2, 3)

    def test_parse_error_carries_position(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text('{\n  "services": [,\n}')
        with pytest.raises(ParseError) as exc:
            load_graph(p)
        assert exc.value.line == 2
        assert exc.value.column is not None
        assert exc.value.code == "parse-error"

    def test_empty_attack_file(self, overlap, tmp_path):
        g, _ = overlap
        p = tmp_path / "a.json"
        p.write_text("")
        with pytest.raises(MalformedAttackError):
            load_attack(p, g)

    def test_attacker_defaults_to_full_stake(self, overlap):
        g, _ = overlap
        a = attack_from_dict({"services": ["s1"], "attackers": ["v2", {"id": "v1", "x": "1/2"}]}, g)
        assert a.committed == {"v1": F(1, 2), "v2": F(3, 2)}

    def test_bad_parameter_in_file(self, tmp_path):
        doc = {"services": [{"id": "s", "pi": 1, "alpha": "3/2"}],
               "operators": [{"id": "v", "stake": 1}], "edges": []}
        p = tmp_path / "g.json"
        p.write_text(json.dumps(doc))
        with pytest.raises(ConfigError) as exc:
            load_graph(p)
        assert exc.value.code == "config-error"

    def test_malformed_attacker_entry(self, overlap):
        g, _ = overlap
        with pytest.raises(ParseError):
            attack_from_dict({"services": ["s1"], "attackers": [{"x": 1}]}, g)
        with pytest.raises(ParseError):
            attack_from_dict({"services": ["s1"], "attackers": [{"id": "v1", "x": "one"}]}, g)

    @pytest.mark.parametrize("attackers", [
        ["v1", "v1"],
        [{"id": "v1", "x": 1}, {"id": "v1", "x": "1/2"}],
        ["v2", {"id": "v2"}],
    ])
    def test_duplicate_attacker(self, overlap, attackers):
        g, _ = overlap
        with pytest.raises(MalformedAttackError, match="listed twice"):
            attack_from_dict({"services": ["s1", "s2"], "attackers": attackers}, g)

    def test_errors_share_a_base(self):
        assert issubclass(ParseError, RestakeError)
