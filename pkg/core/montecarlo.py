"""
Monte Carlo checks of the random-network formulas.

Each replication draws a fresh background for the services it looks at and,
for success estimates, a fresh attacker neighborhood:

    clearance   one block-b service; its background count is Σ_c Bin(n_c, p_cb)
    success     D_b ~ Bin(m_b, p_ab) neighbors per block; k distinct targets
                drawn from them; each target wins if its own background
                clears the x/k the identity brings; success = any win
    neighbors   D_b against the Chernoff bound for D_b ≥ ½ m_b p_ab

Replications run in fixed-size blocks. Block i of estimator e draws from its
own stream SeedSequence(seed, spawn_key=(e, i)), so the result is the same
whatever the worker count and scheduling.

Estimates are compared against the exact binomial clearance (the
distribution actually simulated) and, for reference, the Gaussian formulas.

Usage:
    cfg = SimConfig(model, replications=100_000, seed=42, x=3.0, k=2)
    est = estimate_success(cfg)
    est.estimate, est.stderr, est.z      # z against the exact reference
"""

import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from core.errors import ConfigError, EmptyBlockError
from core.graph import Operator, RestakingGraph, Service
from core.randnet import (
    SbmModel,
    clearance,
    clearance_exact,
    clearance_model,
    neighbor_chernoff_bound,
    success_single,
    success_sybil,
)

logger = logging.getLogger(__name__)

POLICIES = ("distinct-neighbors", "uniform-with-replacement")

STREAM_CLEARANCE = 0
STREAM_SUCCESS = 1
STREAM_NEIGHBORS = 2


# ═══════════════════════════════════════════════════════════════
# Configuration
# ═══════════════════════════════════════════════════════════════

@dataclass(frozen=True)
class SimConfig:
    model: SbmModel
    replications: int = 100_000
    seed: int = 42
    x: float = 3.0                   # attacker stake
    k: int = 1                       # identities
    policy: str = "distinct-neighbors"
    exclude_insufficient: bool = False      # drop replications with < k neighbors
    stake_jitter: float = 0.0               # background stakes σ̄ (1 ± U·jitter)
    block_size: int = 4_096
    workers: int = 1
    reference: str = "exact"                # exact | gaussian

    def __post_init__(self):
        if self.replications < 1:
            raise ConfigError(f"replications must be ≥ 1, got {self.replications}")
        if self.k < 1:
            raise ConfigError(f"k must be ≥ 1, got {self.k}")
        if self.policy not in POLICIES:
            raise ConfigError(f"Unknown policy '{self.policy}'. Available: {list(POLICIES)}")
        if self.reference not in ("exact", "gaussian"):
            raise ConfigError(f"Unknown reference '{self.reference}'. Available: ['exact', 'gaussian']")
        if not (0 <= self.stake_jitter < 1):
            raise ConfigError("stake_jitter must lie in [0, 1)")
        if self.block_size < 1 or self.workers < 1:
            raise ConfigError("block_size and workers must be ≥ 1")


def config_digest(config: SimConfig) -> str:
    """Stable sha256 over the model and every sampling setting except workers."""
    doc = asdict(replace(config, workers=1))
    doc["model"] = config.model.to_config()
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def block_rng(seed: int, stream: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream, block))))


def _blocks(config: SimConfig) -> list[tuple[int, int]]:
    n, size = config.replications, config.block_size
    return [(i, min(size, n - i * size)) for i in range(math.ceil(n / size))]


def _run(worker, config: SimConfig, *args) -> np.ndarray:
    """Sum per-block count vectors; order of completion does not matter."""
    jobs = _blocks(config)
    if config.workers == 1 or len(jobs) == 1:
        parts = [worker(config, i, n, *args) for i, n in jobs]
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            futures = [pool.submit(worker, config, i, n, *args) for i, n in jobs]
            parts = [f.result() for f in futures]
    logger.debug("%s: %d blocks on %d worker(s)", worker.__name__, len(jobs), config.workers)
    return np.sum(parts, axis=0)


# ═══════════════════════════════════════════════════════════════
# Estimates
# ═══════════════════════════════════════════════════════════════

@dataclass
class SimEstimate:
    estimator: str
    estimate: float
    stderr: float
    n: int
    analytic: float                  # value z is measured against
    gaussian: float                  # Gaussian-approximation value
    failures: int = 0                # replications with too few neighbors
    extra: dict = field(default_factory=dict)

    @property
    def abs_error(self) -> float:
        return abs(self.estimate - self.analytic)

    @property
    def z(self) -> float:
        se = self.stderr
        if se == 0:
            se = math.sqrt(self.analytic * (1 - self.analytic) / self.n) if self.n else 0.0
        if se == 0:
            return 0.0 if self.abs_error == 0 else math.inf
        return (self.estimate - self.analytic) / se

    def summary(self) -> str:
        return (f"{self.estimator:24s} p̂={self.estimate:.5f} ± {self.stderr:.5f}  "
                f"ref={self.analytic:.5f}  gauss={self.gaussian:.5f}  z={self.z:+.2f}  (N={self.n})")


def _estimate(name: str, hits: int, n: int, analytic: float, gaussian: float,
              failures: int = 0, **extra) -> SimEstimate:
    p = hits / n if n else 0.0
    se = math.sqrt(p * (1 - p) / n) if n else 0.0
    return SimEstimate(name, p, se, n, analytic, gaussian, failures, extra)


def _background(model: SbmModel, b: int, rng: np.random.Generator, shape, jitter: float) -> np.ndarray:
    """Restaked background stake on `shape` independent block-b services."""
    total = np.zeros(shape)
    for n_c, row in zip(model.operator_blocks, model.P):
        p = row[b]
        if jitter == 0:
            total += rng.binomial(n_c, p, size=shape)
        else:
            edges = rng.random(shape + (n_c,)) < p
            weights = 1 + rng.uniform(-jitter, jitter, size=shape + (n_c,))
            total += (edges * weights).sum(axis=-1)
    return model.sigma_bar * total


def _limit(model: SbmModel, b: int, y: float) -> float:
    a = model.alphas[b]
    return (1 - a) / a * y


def _clearance_block(config: SimConfig, block: int, n: int, b: int, y: float) -> np.ndarray:
    rng = block_rng(config.seed, STREAM_CLEARANCE, block)
    bg = _background(config.model, b, rng, (n,), config.stake_jitter)
    return np.array([np.count_nonzero(bg <= _limit(config.model, b, y) + 1e-12)])


def estimate_clearance(config: SimConfig, b: int, y: float) -> SimEstimate:
    """Fraction of sampled block-b services whose background the stake y clears."""
    model = config.model
    if model.service_blocks[b] == 0:
        raise EmptyBlockError(f"service block {b} is empty")
    if config.replications < 100:
        logger.warning("only %d replications; the standard error will be wide", config.replications)
    hits = int(_run(_clearance_block, config, b, y)[0])
    gauss = clearance(model, b, y)
    exact = clearance_exact(model, b, y) if config.stake_jitter == 0 else gauss
    ref = exact if config.reference == "exact" else gauss
    return _estimate(f"clearance[b={b},y={y:g}]", hits, config.replications, ref, gauss)


def _success_block(config: SimConfig, block: int, n: int) -> np.ndarray:
    """
    Each identity lands in block b with probability w_b and needs a neighbor
    there: D_b ~ Binomial(m_b, p_ab) must cover the identities sent to b.
    """
    model, k = config.model, config.k
    rng = block_rng(config.seed, STREAM_SUCCESS, block)
    R = model.R
    D = np.stack([rng.binomial(m, p, size=n) for m, p in
                  zip(model.service_blocks, model.attacker_row)], axis=1)   # (n, R)
    counts = rng.multinomial(k, np.asarray(clearance_model(model).weights), size=n)

    if config.policy == "distinct-neighbors":
        ok = np.all(D >= counts, axis=1)
    else:
        ok = np.all((counts == 0) | (D >= 1), axis=1)
    targets = np.where(ok[:, None], counts, 0)

    win = np.zeros(n, dtype=bool)
    for b in range(R):
        most = int(targets[:, b].max()) if n else 0
        if most == 0:
            continue
        bg = _background(model, b, rng, (n, most), config.stake_jitter)
        cleared = bg <= _limit(model, b, config.x / k) + 1e-12
        used = np.arange(most)[None, :] < targets[:, b][:, None]
        win |= np.any(cleared & used, axis=1)

    failures = int(np.count_nonzero(~ok))
    counted = n - failures if config.exclude_insufficient else n
    return np.array([np.count_nonzero(win & ok), failures, counted])


def _exact_success(model: SbmModel, x: float, k: int) -> float:
    cm = clearance_model(model)
    pk = sum(w * clearance_exact(model, b, x / k) for b, w in enumerate(cm.weights))
    return 1 - (1 - pk) ** k


def estimate_success(config: SimConfig) -> SimEstimate:
    """Empirical p′(x; k): at least one of k identities clears its target."""
    hits, failures, counted = (int(v) for v in _run(_success_block, config))
    model, x, k = config.model, config.x, config.k
    gauss = success_single(model, x) if k == 1 else success_sybil(model, x, k)
    exact = _exact_success(model, x, k) if config.stake_jitter == 0 else gauss
    ref = exact if config.reference == "exact" else gauss
    if failures:
        logger.debug("%d of %d replications had fewer than %d neighbors", failures,
                     config.replications, k)
    return _estimate(f"success[x={x:g},k={k}]", hits, counted, ref, gauss, failures,
                     insufficient_neighbors=failures)


# ═══════════════════════════════════════════════════════════════
# Neighbor counts
# ═══════════════════════════════════════════════════════════════

@dataclass
class NeighborCheck:
    block: int
    m_b: int
    p_ab: float
    frequency: float
    stderr: float
    bound: float

    @property
    def passes(self) -> bool:
        return self.frequency >= self.bound - 3 * self.stderr

    def summary(self) -> str:
        return (f"block {self.block}: Pr(D ≥ ½·{self.m_b}·{self.p_ab:g}) ≈ {self.frequency:.4f} "
                f"± {self.stderr:.4f}  bound {self.bound:.4f}  {'ok' if self.passes else 'VIOLATED'}")


def _neighbor_block(config: SimConfig, block: int, n: int) -> np.ndarray:
    model = config.model
    rng = block_rng(config.seed, STREAM_NEIGHBORS, block)
    counts = []
    for m, p in zip(model.service_blocks, model.attacker_row):
        D = rng.binomial(m, p, size=n)
        counts.append(np.count_nonzero(D >= 0.5 * m * p))
    return np.array(counts)


def neighbor_count_check(config: SimConfig) -> list[NeighborCheck]:
    hits = _run(_neighbor_block, config)
    n = config.replications
    out = []
    for b, (m, p) in enumerate(zip(config.model.service_blocks, config.model.attacker_row)):
        f = float(hits[b]) / n
        out.append(NeighborCheck(b, int(m), float(p), f, math.sqrt(f * (1 - f) / n),
                                 neighbor_chernoff_bound(int(m), float(p))))
    return out


# ═══════════════════════════════════════════════════════════════
# Whole graphs
# ═══════════════════════════════════════════════════════════════

def sample_graph(model: SbmModel, rng: np.random.Generator,
                 attacker_stake: Optional[float] = None) -> RestakingGraph:
    """
    One realization: services s<b>.<i>, background operators u<c>.<j> of
    stake σ̄, Bernoulli(p_cb) edges. With `attacker_stake`, an operator "a"
    joins with edges drawn from the attacker row.
    """
    services, operators, edges = [], [], []
    pis = model.pis or (0.0,) * model.R
    ids_by_block = []
    for b, m in enumerate(model.service_blocks):
        ids = [f"s{b}.{i}" for i in range(m)]
        ids_by_block.append(ids)
        services += [Service(s, float(pis[b]), float(model.alphas[b])) for s in ids]

    for c, n_c in enumerate(model.operator_blocks):
        for j in range(n_c):
            v = f"u{c}.{j}"
            operators.append(Operator(v, float(model.sigma_bar)))
            for b, ids in enumerate(ids_by_block):
                hit = rng.random(len(ids)) < model.P[c][b]
                edges += [(s, v) for s, h in zip(ids, hit) if h]

    if attacker_stake is not None:
        operators.append(Operator("a", float(attacker_stake)))
        for b, ids in enumerate(ids_by_block):
            hit = rng.random(len(ids)) < model.attacker_row[b]
            edges += [(s, "a") for s, h in zip(ids, hit) if h]

    return RestakingGraph.build(services, operators, edges)
