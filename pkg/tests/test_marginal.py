"""Marginal slashing on the overlap graph and on random stable attacks."""

import logging
from fractions import Fraction as F

import numpy as np
import pytest

from conftest import feasible_full_attack, random_graph
from core import fixtures
from core.errors import (
    FeasibilityBrokenError,
    NonType2SplitError,
    StakeOutOfRangeError,
    UnknownGroupError,
    UnstableAttackError,
)
from core.graph import AttackSpec, SybilPart, SybilSplit, is_feasible, is_stable
from core.marginal import (
    marginal_cost,
    marginal_slash,
    partition_attackers,
    slack_of,
    type1_gain_marginal,
    type2_gain,
)


class TestPartition:
    def test_groups_by_fingerprint(self, overlap):
        g, a = overlap
        part = partition_attackers(g, a)
        assert part.groups == {
            frozenset({"s1"}): ("v1",),
            frozenset({"s2"}): ("v3",),
            frozenset({"s1", "s2"}): ("v2",),
        }
        assert part.fingerprint_of("v2") == {"s1", "s2"}

    def test_unknown_group(self, overlap):
        g, a = overlap
        part = partition_attackers(g, a)
        with pytest.raises(UnknownGroupError):
            part.members({"s3"})
        with pytest.raises(UnknownGroupError):
            marginal_cost(g, a, part, set())

    def test_costs(self, overlap):
        g, a = overlap
        part = partition_attackers(g, a)
        per_service, c = marginal_cost(g, a, part, {"s1", "s2"})
        assert per_service == {"s1": F(4, 3), "s2": F(3, 4)}
        assert c == F(4, 3)


class TestMarginalSlash:
    def test_overlap_values(self, overlap):
        g, a = overlap
        out = marginal_slash(g, a)
        assert out.psi == {"v1": F(5, 6), "v2": F(4, 3), "v3": F(1, 4)}
        assert out.total == F(29, 12)

    def test_bounded_by_commitment(self, overlap):
        g, a = overlap
        out = marginal_slash(g, a)
        assert all(0 <= out.psi[v] <= x for v, x in a.attackers)

    def test_rows(self, overlap):
        g, a = overlap
        rows = marginal_slash(g, a).rows()
        assert [r["operator_id"] for r in rows] == ["v1", "v3", "v2"]
        assert rows[2]["group_fingerprint"] == "{s1,s2}"
        assert rows[2]["c_group"] == F(4, 3)

    def test_unstable_attack_rejected(self, overlap):
        g, _ = overlap
        a = AttackSpec.full(g, ["s1", "s2"], ["v0", "v1", "v2", "v3"])
        with pytest.raises(UnstableAttackError):
            marginal_slash(g, a)

    def test_float_inputs(self):
        g = fixtures.overlap_graph(pi1=2.0, pi2=2.0)
        out = marginal_slash(g, fixtures.overlap_attack(g))
        assert float(out.psi["v1"]) == pytest.approx(5 / 6)

    @pytest.mark.parametrize("seed", range(8))
    def test_group_sum_identity_on_stable_attacks(self, seed):
        rng = np.random.default_rng(seed)
        g = random_graph(rng, n_services=2, n_operators=5, p_edge=0.7)
        services = [s for s in g.services if g.operators_of(s)]
        if not services:
            pytest.skip("no service has operators")
        a = feasible_full_attack(g, services)
        if not is_stable(g, a):
            pytest.skip("random attack has a redundant operator")
        out = marginal_slash(g, a)
        for grp in out.groups.values():
            assert not grp.clamped
            assert grp.psi_total == grp.group_formula
            assert not grp.diverges


class TestSybilGains:
    def test_three_way_split(self, overlap):
        g, a = overlap
        assert type2_gain(g, a, "v2", fixtures.overlap_split()) == F(1, 3)

    @pytest.mark.parametrize("k", [2, 3, 5])
    def test_even_split_saves_k_minus_one_slacks(self, overlap, k):
        g, a = overlap
        slack = slack_of(marginal_slash(g, a), "v2")
        assert slack == F(1, 6)
        gain = type2_gain(g, a, "v2", SybilSplit.even("v2", F(3, 2), k))
        assert gain == (k - 1) * slack

    def test_clamped_part_caps_the_gain(self, overlap):
        g, a = overlap
        split = SybilSplit.of("v2", [SybilPart("a", F(1, 10)), SybilPart("b", F(7, 5))])
        assert type2_gain(g, a, "v2", split) == F(1, 10)

    def test_diverging_group_is_logged(self, overlap, caplog):
        g, a = overlap
        split = SybilSplit.of("v2", [SybilPart("a", F(1, 10)), SybilPart("b", F(7, 5))])
        with caplog.at_level(logging.WARNING, logger="core.marginal"):
            type2_gain(g, a, "v2", split)
        warnings = [r for r in caplog.records if r.levelno == logging.WARNING]
        assert len(warnings) == 1
        assert "differs from the group formula" in warnings[0].getMessage()

    def test_stable_attack_logs_no_warning(self, overlap, caplog):
        g, a = overlap
        with caplog.at_level(logging.WARNING, logger="core.marginal"):
            marginal_slash(g, a)
        assert not caplog.records

    def test_withheld_part_is_not_type2(self, overlap):
        g, a = overlap
        split = SybilSplit.of("v2", [SybilPart("a", F(1)), SybilPart("b", F(1, 2), participates=False)])
        with pytest.raises(NonType2SplitError):
            type2_gain(g, a, "v2", split)

    def test_wrong_parent(self, overlap):
        g, a = overlap
        with pytest.raises(NonType2SplitError):
            type2_gain(g, a, "v1", fixtures.overlap_split())

    def test_withholding_gains_nothing(self, overlap):
        g, a = overlap
        assert type1_gain_marginal(g, a, "v2", F(1, 10)) == 0
        assert type1_gain_marginal(g, a, "v2", F(1, 6)) == 0

    def test_withholding_past_feasibility(self, overlap):
        g, a = overlap
        assert not is_feasible(g, a.with_commitment("v2", F(13, 10)))
        with pytest.raises(FeasibilityBrokenError):
            type1_gain_marginal(g, a, "v2", F(1, 5))

    def test_withheld_out_of_range(self, overlap):
        g, a = overlap
        with pytest.raises(StakeOutOfRangeError):
            type1_gain_marginal(g, a, "v2", F(-1, 10))
        with pytest.raises(StakeOutOfRangeError):
            type1_gain_marginal(g, a, "v2", F(2))
