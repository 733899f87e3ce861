"""Shared fixtures: the worked-example graphs and a seeded generator of small random ones."""

import sys
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT))

from core import fixtures  # noqa: E402
from core.graph import AttackSpec, Operator, RestakingGraph, Service  # noqa: E402

FIXTURE_DIR = ROOT / "fixtures"


@pytest.fixture
def overlap():
    g = fixtures.overlap_graph()
    return g, fixtures.overlap_attack(g)


@pytest.fixture
def single():
    g = fixtures.single_service_graph()
    return g, fixtures.single_service_attack(g)


@pytest.fixture
def two_block():
    return fixtures.two_block_model()


@pytest.fixture
def fixture_dir():
    return FIXTURE_DIR


def random_graph(rng: np.random.Generator, n_services: int, n_operators: int,
                 p_edge: float = 0.6, exact: bool = True) -> RestakingGraph:
    """Small random graph; exact stakes are multiples of 1/4 in [1/4, 3]."""
    def num(lo, hi):
        q = int(rng.integers(lo, hi + 1))
        return Fraction(q, 4) if exact else q / 4

    services = [Service(f"s{i}", pi=num(0, 16), alpha=Fraction(int(rng.integers(1, 4)), 4)
                        if exact else int(rng.integers(1, 4)) / 4)
                for i in range(n_services)]
    operators = [Operator(f"v{j}", stake=num(1, 12)) for j in range(n_operators)]
    edges = [(s.id, v.id) for s in services for v in operators if rng.random() < p_edge]
    return RestakingGraph.build(services, operators, edges)


def feasible_full_attack(graph: RestakingGraph, services) -> AttackSpec:
    """Every neighbor of the chosen services attacks with full stake."""
    attackers = set()
    for s in services:
        attackers |= graph.operators_of(s)
    return AttackSpec.full(graph, services, sorted(attackers))
