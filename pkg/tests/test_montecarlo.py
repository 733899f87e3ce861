"""Seeded Monte Carlo estimators against the closed forms."""

import numpy as np
import pytest

from core import fixtures
from core.errors import ConfigError, EmptyBlockError
from core.montecarlo import (
    SimConfig,
    SimEstimate,
    block_rng,
    config_digest,
    estimate_clearance,
    estimate_success,
    neighbor_count_check,
    sample_graph,
)
from core.randnet import SbmModel, clearance, clearance_exact, clearance_model, neighbor_chernoff_bound


class TestStreams:
    def test_block_streams_are_reproducible(self):
        a = block_rng(7, 1, 3).random(5)
        b = block_rng(7, 1, 3).random(5)
        np.testing.assert_array_equal(a, b)

    def test_block_streams_differ(self):
        assert not np.array_equal(block_rng(7, 1, 3).random(5), block_rng(7, 1, 4).random(5))
        assert not np.array_equal(block_rng(7, 1, 3).random(5), block_rng(7, 2, 3).random(5))

    def test_digest_ignores_workers(self, two_block):
        base = SimConfig(two_block, replications=1000, seed=1)
        assert config_digest(base) == config_digest(SimConfig(two_block, replications=1000, seed=1, workers=4))
        assert config_digest(base) != config_digest(SimConfig(two_block, replications=1000, seed=2))

    @pytest.mark.parametrize("kwargs", [
        {"replications": 0}, {"k": 0}, {"policy": "nearest"}, {"reference": "poisson"},
        {"stake_jitter": 1.0}, {"block_size": 0},
    ])
    def test_bad_config(self, two_block, kwargs):
        with pytest.raises(ConfigError):
            SimConfig(two_block, **kwargs)


class TestClearanceEstimate:
    def test_matches_exact_binomial(self, two_block):
        est = estimate_clearance(SimConfig(two_block, replications=20_000, seed=42), 1, 3.0)
        assert est.n == 20_000
        assert abs(est.z) < 4
        assert est.gaussian == pytest.approx(0.95153, abs=1e-4)

    def test_same_seed_same_answer(self, two_block):
        cfg = SimConfig(two_block, replications=3_000, seed=5, block_size=1_000)
        assert estimate_clearance(cfg, 1, 3.0).estimate == estimate_clearance(cfg, 1, 3.0).estimate

    @pytest.mark.slow
    def test_worker_count_does_not_change_the_result(self, two_block):
        cfg = SimConfig(two_block, replications=3_000, seed=5, block_size=1_000)
        parallel = SimConfig(two_block, replications=3_000, seed=5, block_size=1_000, workers=2)
        assert estimate_clearance(cfg, 1, 3.0).estimate == estimate_clearance(parallel, 1, 3.0).estimate

    def test_gaussian_reference(self, two_block):
        est = estimate_clearance(SimConfig(two_block, replications=500, reference="gaussian"), 1, 3.0)
        assert est.analytic == est.gaussian

    def test_empty_block(self):
        model = SbmModel((0, 10), (0.5, 0.5), (10,), ((0.1, 0.1),))
        with pytest.raises(EmptyBlockError):
            estimate_clearance(SimConfig(model, replications=100), 0, 1.0)

    def test_jitter_keeps_the_mean(self, two_block):
        est = estimate_clearance(SimConfig(two_block, replications=2_000, stake_jitter=0.2), 1, 3.0)
        assert 0.8 < est.estimate <= 1.0


class TestSuccessEstimate:
    def test_two_identities(self, two_block):
        est = estimate_success(SimConfig(two_block, replications=20_000, seed=42, x=3.0, k=2))
        assert abs(est.z) < 4
        assert est.gaussian == pytest.approx(0.51626, abs=1e-4)
        assert est.failures == 0

    def test_single_identity(self, two_block):
        est = estimate_success(SimConfig(two_block, replications=20_000, seed=3, x=3.0, k=1))
        assert abs(est.z) < 4
        assert est.gaussian == pytest.approx(0.47576, abs=1e-4)

    def test_with_replacement_policy(self, two_block):
        cfg = SimConfig(two_block, replications=5_000, seed=9, x=3.0, k=2, policy="uniform-with-replacement")
        est = estimate_success(cfg)
        assert 0.4 < est.estimate < 0.6

    def test_insufficient_neighbors(self):
        model = SbmModel.erdos_renyi(n=20, m=5, p=0.3, alpha=0.5, attacker_p=0.1)
        counted = estimate_success(SimConfig(model, replications=2_000, x=4.0, k=3))
        excluded = estimate_success(SimConfig(model, replications=2_000, x=4.0, k=3,
                                              exclude_insufficient=True))
        assert counted.failures > 0
        assert counted.n == 2_000
        assert excluded.n == 2_000 - excluded.failures
        assert excluded.failures == counted.failures

    def test_identities_follow_block_weights(self):
        # tiny easy block next to a large hard one; weights are 1/2 each regardless of size
        model = SbmModel((20, 400), (0.5, 2 / 3), (60,), ((0.02, 0.3),), attacker_p=(0.5, 0.5))
        assert clearance_model(model).weights == pytest.approx((0.5, 0.5))
        est = estimate_success(SimConfig(model, replications=20_000, seed=11, x=3.0, k=1))
        assert est.analytic == pytest.approx(0.5 * clearance_exact(model, 0, 3.0)
                                             + 0.5 * clearance_exact(model, 1, 3.0))
        assert abs(est.z) < 4
        assert est.estimate > 0.4

    def test_isolated_attacker_never_wins(self):
        model = SbmModel((50, 50), (0.5, 0.5), (30,), ((0.1, 0.1),), attacker_p=(0.0, 0.0))
        est = estimate_success(SimConfig(model, replications=1_000, x=3.0, k=2))
        assert est.estimate == 0.0
        assert est.failures == 1_000
        assert est.extra["insufficient_neighbors"] == 1_000

    def test_zero_stderr_z(self):
        est = SimEstimate("x", 0.5, 0.0, 100, 0.5, 0.5)
        assert est.z == 0.0
        assert SimEstimate("x", 1.0, 0.0, 100, 0.5, 0.5).z == pytest.approx(10.0)


class TestNeighbors:
    def test_chernoff_bound_holds(self):
        model = fixtures.neighbor_model()
        checks = neighbor_count_check(SimConfig(model, replications=10_000))
        assert len(checks) == 1
        assert checks[0].bound == pytest.approx(neighbor_chernoff_bound(60, 0.30))
        assert checks[0].passes
        assert checks[0].frequency > checks[0].bound


class TestSampleGraph:
    def test_shape(self, two_block):
        g = sample_graph(two_block, np.random.default_rng(0), attacker_stake=3.0)
        assert len(g.services) == 400
        assert len(g.operators) == 61
        assert g.stake("a") == 3.0
        assert g.service("s1.0").alpha == 0.5

    def test_edge_density(self, two_block):
        g = sample_graph(two_block, np.random.default_rng(1))
        dense = np.mean([len(g.operators_of(f"s0.{i}")) for i in range(200)])
        assert dense == pytest.approx(18.0, abs=1.5)
        assert "a" not in g.operators

    def test_no_edges(self):
        model = SbmModel.erdos_renyi(n=8, m=6, p=0.0, alpha=0.5, attacker_p=0.0)
        g = sample_graph(model, np.random.default_rng(2), attacker_stake=1.0)
        assert all(not g.operators_of(s) for s in g.services)
        assert all(not g.services_of(v) for v in g.operators)

    def test_complete_bipartite(self):
        model = SbmModel((3, 4), (0.5, 0.5), (2, 5), ((1.0, 1.0), (1.0, 1.0)))
        g = sample_graph(model, np.random.default_rng(3))
        assert all(len(g.operators_of(s)) == 7 for s in g.services)
        assert all(len(g.services_of(v)) == 7 for v in g.operators)

    def test_edge_count_moments(self):
        n, m, p = 4, 3, 0.3
        model = SbmModel.erdos_renyi(n=n, m=m, p=p, alpha=0.5)
        rng = np.random.default_rng(4)
        samples = 10_000
        counts = np.array([sum(len(g.services_of(v)) for v in g.operators)
                           for g in (sample_graph(model, rng) for _ in range(samples))])
        se = np.sqrt(n * m * p * (1 - p) / samples)
        assert abs(counts.mean() - n * m * p) < 4 * se
        assert counts.var() == pytest.approx(n * m * p * (1 - p), rel=0.1)


class TestGaussianConvergence:
    N_OTHER = (60, 240, 960)

    @staticmethod
    def centered(n_other):
        # integer mean, clearance limit placed exactly on it
        return SbmModel.erdos_renyi(n=n_other, m=10, p=0.25, alpha=0.5)

    def test_analytic_gap_shrinks(self):
        y = [0.25 * n for n in self.N_OTHER]
        gaps = [abs(clearance_exact(self.centered(n), 0, yi) - clearance(self.centered(n), 0, yi))
                for n, yi in zip(self.N_OTHER, y)]
        assert gaps[0] > gaps[1] > gaps[2]
        assert gaps[2] < 0.03

    def test_empirical_gap_shrinks(self):
        gaps = []
        for n in self.N_OTHER:
            est = estimate_clearance(SimConfig(self.centered(n), replications=50_000, seed=21),
                                     0, 0.25 * n)
            assert abs(est.z) < 4
            gaps.append(abs(est.estimate - est.gaussian))
        assert gaps[0] > gaps[1] > gaps[2]


@pytest.mark.slow
class TestFullSizeAgreement:
    """The worked two-block example at 10⁵ replications."""

    def test_clearance_thin_block(self, two_block):
        est = estimate_clearance(SimConfig(two_block, replications=100_000, seed=42), 1, 3.0)
        assert est.n == 100_000
        assert abs(est.z) <= 4

    @pytest.mark.parametrize("k, gaussian", [(1, 0.47576), (2, 0.51626)])
    def test_success(self, two_block, k, gaussian):
        est = estimate_success(SimConfig(two_block, replications=100_000, seed=42, x=3.0, k=k))
        assert abs(est.z) <= 4
        assert est.gaussian == pytest.approx(gaussian, abs=1e-4)
        assert est.failures == 0

    def test_neighbor_counts(self, two_block):
        checks = neighbor_count_check(SimConfig(two_block, replications=100_000, seed=42))
        assert all(c.passes for c in checks)
