"""
Random restaking networks: when does splitting into Sybils pay?

Background operators and services are drawn from a stochastic block model:
operator block c has n_c operators of stake σ̄, service block b has m_b
services, and each (operator, service) edge appears independently with
probability p_{cb}. The attacker's own edges follow row p_{a·}. One block on
each side is the Erdős–Rényi case.

An attacker with stake y wins a block-b service when y ≥ α_b (y + Σ^rest),
where Σ^rest is the restaked background. Σ^rest is a sum of many Bernoulli
stakes, so it is treated as Gaussian:

    μ_b   = σ̄ Σ_c n_c p_{cb}
    σ_b²  = σ̄² Σ_c n_c p_{cb} (1 − p_{cb})
    q_b(y) = Φ( ((1 − α_b)/α_b · y − μ_b) / σ_b )          (clearance)

q_b is S-shaped with its inflection at T_b = α_b/(1 − α_b) · μ_b.

    p(x)     = Σ_b w_b q_b(x)              one identity, one random neighbor
    p_k(x)   = Σ_b w_b q_b(x / k)          each of k equal identities
    p′(x; k) = 1 − (1 − p_k(x))^k          at least one of k identities wins

In the concave region, splitting never helps on ER graphs; with blocks whose
backgrounds differ a lot (a thin block next to a dense one), it can.

Usage:
    model = SbmModel.from_config(json.load(open("fixtures/sbm_two_block.json")))
    cm = clearance_model(model)
    cm.mu, cm.sd                     # → (18.0, 1.2), (3.5496…, 1.0844…)
    success_single(model, 3.0)       # → 0.47576
    min_sybil_count(model, 3.0).k_star   # → 2
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import special, stats

from core.errors import (
    AlphaDegenerateError,
    ConfigError,
    InvalidSybilCountError,
    NotErdosRenyiError,
    ZeroCoalitionStakeError,
)
from core.graph import AttackSpec, OperatorId, RestakingGraph, attack_stake_on, read_json

logger = logging.getLogger(__name__)

DEFAULT_K_MAX = 64


# ═══════════════════════════════════════════════════════════════
# Model
# ═══════════════════════════════════════════════════════════════

@dataclass(frozen=True)
class SbmModel:
    """
    Block model of the background network plus the attacker's edge row.
    P[c][b] is the edge probability between operator block c and service block b.
    """
    service_blocks: tuple            # m_b
    alphas: tuple                    # α_b
    operator_blocks: tuple           # n_c, background only
    P: tuple                         # P[c][b]
    sigma_bar: float = 1.0
    attacker_p: tuple = ()           # p_{a b}; empty → uniform
    pis: tuple = ()                  # π_b, optional

    def __post_init__(self):
        R, C = len(self.service_blocks), len(self.operator_blocks)
        if R == 0 or C == 0:
            raise ConfigError("model needs at least one service block and one operator block")
        if len(self.alphas) != R:
            raise ConfigError(f"{len(self.alphas)} alphas for {R} service blocks")
        if len(self.P) != C or any(len(row) != R for row in self.P):
            raise ConfigError(f"P must be {C}×{R}")
        if any(not (0 <= p <= 1) for row in self.P for p in row):
            raise ConfigError("edge probabilities must lie in [0, 1]")
        if any(m < 0 for m in self.service_blocks) or any(n < 0 for n in self.operator_blocks):
            raise ConfigError("block sizes must be ≥ 0")
        if self.sigma_bar <= 0:
            raise ConfigError(f"sigma_bar must be > 0, got {self.sigma_bar}")
        if self.attacker_p and len(self.attacker_p) != R:
            raise ConfigError(f"attacker_p has {len(self.attacker_p)} entries for {R} blocks")
        if any(not (0 <= p <= 1) for p in self.attacker_p):
            raise ConfigError("attacker_p entries must lie in [0, 1]")
        if self.pis and len(self.pis) != R:
            raise ConfigError(f"{len(self.pis)} profits for {R} service blocks")

    @property
    def R(self) -> int:
        return len(self.service_blocks)

    @property
    def is_er(self) -> bool:
        return self.R == 1 and len(self.operator_blocks) == 1

    @property
    def attacker_row(self) -> np.ndarray:
        if self.attacker_p:
            return np.array(self.attacker_p, dtype=float)
        return np.ones(self.R)

    @classmethod
    def erdos_renyi(cls, n: int, m: int, p: float, alpha: float, sigma_bar: float = 1.0,
                    attacker_p: Optional[float] = None, pi: Optional[float] = None) -> "SbmModel":
        return cls((m,), (alpha,), (n,), ((p,),), sigma_bar,
                   (attacker_p if attacker_p is not None else p,),
                   (pi,) if pi is not None else ())

    @classmethod
    def from_config(cls, doc: dict) -> "SbmModel":
        """
        Config keys: `blocks` [{service_count, alpha, p_other, pi}], `n_other`,
        `sigma_bar`, `attacker_p`. `operator_blocks` [{count, p: [...]}] may
        replace `n_other` for several background operator blocks.
        """
        try:
            blocks = doc["blocks"]
            m = tuple(int(b["service_count"]) for b in blocks)
            alphas = tuple(_as_float(b["alpha"]) for b in blocks)
            pis = tuple(_as_float(b["pi"]) for b in blocks) if all("pi" in b for b in blocks) else ()
            if "operator_blocks" in doc:
                n = tuple(int(c["count"]) for c in doc["operator_blocks"])
                P = tuple(tuple(_as_float(p) for p in c["p"]) for c in doc["operator_blocks"])
            else:
                n = (int(doc["n_other"]),)
                P = (tuple(_as_float(b["p_other"]) for b in blocks),)
            attacker = tuple(_as_float(p) for p in doc.get("attacker_p", ()))
            sigma_bar = _as_float(doc.get("sigma_bar", 1.0))
        except (KeyError, TypeError, ValueError, ZeroDivisionError) as e:
            raise ConfigError(f"malformed SBM config: {e!r}") from e
        return cls(m, alphas, n, P, sigma_bar, attacker, pis)

    def to_config(self) -> dict:
        doc = {
            "blocks": [{"service_count": m, "alpha": a} for m, a in zip(self.service_blocks, self.alphas)],
            "sigma_bar": self.sigma_bar,
            "attacker_p": list(self.attacker_p),
        }
        for i, pi in enumerate(self.pis):
            doc["blocks"][i]["pi"] = pi
        if len(self.operator_blocks) == 1:
            doc["n_other"] = self.operator_blocks[0]
            for b, p in enumerate(self.P[0]):
                doc["blocks"][b]["p_other"] = p
        else:
            doc["operator_blocks"] = [{"count": n, "p": list(row)}
                                      for n, row in zip(self.operator_blocks, self.P)]
        return doc


def _as_float(v) -> float:
    if isinstance(v, str) and "/" in v:
        num, den = v.split("/", 1)
        return float(num) / float(den)
    return float(v)


def load_sbm(path) -> SbmModel:
    doc = read_json(path)
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: SBM config must be a JSON object")
    return SbmModel.from_config(doc)


@dataclass(frozen=True)
class ClearanceModel:
    mu: tuple                        # μ_b
    sd: tuple                        # σ_b
    alphas: tuple
    T: tuple                         # inflection points
    weights: tuple                   # w_b

    @property
    def gamma(self) -> float:
        """Σ_b w_b q_b(0): win probability with no stake at all. Also reported as p_min."""
        return float(sum(w * _clear(0.0, m, s, a)
                         for w, m, s, a in zip(self.weights, self.mu, self.sd, self.alphas)))

    p_min = gamma


def clearance_model(model: SbmModel) -> ClearanceModel:
    """
    Gaussian moments per service block, and the block weights
    w_b = p_{ab} / Σ_c p_{ac}. Weights fall back to uniform when the attacker
    reaches no block.
    """
    n = np.array(model.operator_blocks, dtype=float)
    P = np.array(model.P, dtype=float)
    mu = model.sigma_bar * (n @ P)
    sd = model.sigma_bar * np.sqrt(n @ (P * (1 - P)))
    alphas = np.array(model.alphas, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        T = np.where(alphas < 1, alphas / (1 - alphas) * mu, np.inf)
    row = np.asarray(model.attacker_row, dtype=float)
    if row.sum() > 0:
        w = row / row.sum()
    else:
        w = np.full(model.R, 1.0 / model.R)
    return ClearanceModel(tuple(mu), tuple(sd), tuple(alphas), tuple(T), tuple(w))


# ═══════════════════════════════════════════════════════════════
# Clearance and success probabilities
# ═══════════════════════════════════════════════════════════════

def _clear(y, mu: float, sd: float, alpha: float):
    if not (0 < alpha < 1):
        raise AlphaDegenerateError(f"alpha must lie strictly in (0, 1), got {alpha}")
    arg = (1 - alpha) / alpha * np.asarray(y, dtype=float) - mu
    if sd == 0:
        # background is deterministic
        return np.where(arg >= 0, 1.0, 0.0)
    return special.ndtr(arg / sd)


def clearance(model: SbmModel, b: int, y):
    """q_b(y); y may be a scalar or an array."""
    cm = clearance_model(model)
    out = _clear(y, cm.mu[b], cm.sd[b], cm.alphas[b])
    return float(out) if np.ndim(out) == 0 else out


def clearance_exact(model: SbmModel, b: int, y: float) -> float:
    """
    Clearance with the background counted exactly: Σ^rest = σ̄ Σ_c N_c,
    N_c ~ Binomial(n_c, p_{cb}) independent.
    """
    alpha = model.alphas[b]
    if not (0 < alpha < 1):
        raise AlphaDegenerateError(f"alpha must lie strictly in (0, 1), got {alpha}")
    limit = (1 - alpha) / alpha * y / model.sigma_bar
    k_max = math.floor(limit + 1e-12)
    if k_max < 0:
        return 0.0
    pmf = np.array([1.0])
    for n_c, row in zip(model.operator_blocks, model.P):
        pmf = np.convolve(pmf, stats.binom.pmf(np.arange(n_c + 1), n_c, row[b]))
    return float(min(pmf[:k_max + 1].sum(), 1.0))


def _mixture(model: SbmModel, y):
    cm = clearance_model(model)
    y = np.asarray(y, dtype=float)
    return sum(w * _clear(y, m, s, a) for w, m, s, a in zip(cm.weights, cm.mu, cm.sd, cm.alphas))


def success_single(model: SbmModel, x):
    """p(x) = Σ_b w_b q_b(x)"""
    out = _mixture(model, x)
    return float(out) if np.ndim(out) == 0 else out


def _check_k(k) -> int:
    if isinstance(k, bool) or int(k) != k or k < 1:
        raise InvalidSybilCountError(f"sybil count must be an integer ≥ 1, got {k}")
    return int(k)


def success_per_identity(model: SbmModel, x, k: int):
    """p_k(x) = Σ_b w_b q_b(x / k)"""
    k = _check_k(k)
    out = _mixture(model, np.asarray(x, dtype=float) / k)
    return float(out) if np.ndim(out) == 0 else out


def success_sybil(model: SbmModel, x, k: int, assume_independence: bool = True):
    """
    p′(x; k) = 1 − (1 − p_k(x))^k for independent identities. Without the
    independence assumption the identities may all face the same realized
    background and only p_k(x) is guaranteed.
    """
    pk = np.asarray(success_per_identity(model, x, k))
    out = 1 - (1 - pk) ** _check_k(k) if assume_independence else pk
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class ConcavityRegime:
    T: float

    def classify(self, y: float) -> str:
        if y < self.T:
            return "convex"
        if y > self.T:
            return "concave"
        return "inflection"


def concavity_regime(model: SbmModel, b: int) -> ConcavityRegime:
    """q_b is convex on [0, T_b) and concave on (T_b, ∞)."""
    alpha = model.alphas[b]
    if not (0 < alpha < 1):
        raise AlphaDegenerateError(f"alpha must lie strictly in (0, 1), got {alpha}")
    return ConcavityRegime(float(clearance_model(model).T[b]))


# ═══════════════════════════════════════════════════════════════
# Sybil counts
# ═══════════════════════════════════════════════════════════════

@dataclass
class SybilCountResult:
    x: float
    p_single: float
    k_star: Optional[int]
    table: list                      # [(k, p_k, p′, p′ > p)]
    sufficient_k: Optional[int]      # ⌊ln(1−p)/ln(1−p_min)⌋ + 1, None if p_min = 0
    cap_binding: bool = False

    def summary(self) -> str:
        head = f"x={self.x:g}  p(x)={self.p_single:.5f}  k*={self.k_star}"
        if self.sufficient_k is not None:
            head += f"  (sufficient k ≥ {self.sufficient_k})"
        lines = [head]
        for k, pk, pp, better in self.table[:10]:
            lines.append(f"  k={k:3d}  p_k={pk:.5f}  p′={pp:.5f}{'  >' if better else ''}")
        return "\n".join(lines)


def sufficient_sybil_count(model: SbmModel, x: float) -> Optional[int]:
    """Least k that beats p(x) whatever x/k buys: (1 − p_min)^k < 1 − p(x)."""
    p = success_single(model, x)
    p_min = clearance_model(model).p_min
    if p >= 1 or p_min <= 0:
        return None
    if p_min >= 1:
        return 1
    return math.floor(math.log1p(-p) / math.log1p(-p_min)) + 1


def min_sybil_count(model: SbmModel, x: float, k_max: int = DEFAULT_K_MAX) -> SybilCountResult:
    """Least k ∈ [2, k_max] with p′(x; k) > p(x)."""
    p = success_single(model, x)
    table, k_star = [], None
    if p < 1:
        for k in range(2, k_max + 1):
            pk = success_per_identity(model, x, k)
            pp = 1 - (1 - pk) ** k
            better = pp > p
            table.append((k, pk, pp, better))
            if better and k_star is None:
                k_star = k
                break
    bound = sufficient_sybil_count(model, x)
    cap = k_star is None and bound is not None and bound > k_max
    if cap:
        logger.warning("k search capped at %d below the sufficient count %d", k_max, bound)
    return SybilCountResult(x, p, k_star, table, bound, cap)


def jensen_background_bound(model: SbmModel, x: float, k: int, b: int = 0) -> tuple[float, float, bool]:
    """q(x/k) ≤ q(x)(1 − q(0))/k + q(0); returns (lhs, rhs, holds)."""
    k = _check_k(k)
    lhs = clearance(model, b, x / k)
    q0 = clearance(model, b, 0.0)
    rhs = clearance(model, b, x) * (1 - q0) / k + q0
    return lhs, rhs, lhs <= rhs + 1e-15


def neighbor_chernoff_bound(m_b: int, p_ab: float) -> float:
    """Lower bound on Pr(D_b ≥ ½ m_b p_ab) for D_b ~ Binomial(m_b, p_ab)."""
    return 1.0 - math.exp(-m_b * p_ab / 8.0)


# ═══════════════════════════════════════════════════════════════
# Expected profit and loss
# ═══════════════════════════════════════════════════════════════

@dataclass(frozen=True)
class PnlEstimate:
    value: float
    k: int
    lower_bound: bool                # True when k ≥ 2 in a multi-block model


def expected_pnl_er(model: SbmModel, x: float, pi: Optional[float] = None, k: int = 1) -> float:
    """
    Mean-field expected PNL under the max-scheme on an ER network:
        (π − α μ) · (x / μ) · q(x / k)
    k identities of stake x/k each, summed.
    """
    if not model.is_er:
        raise NotErdosRenyiError(f"model has {model.R} service blocks and "
                                 f"{len(model.operator_blocks)} operator blocks")
    k = _check_k(k)
    pi = model.pis[0] if pi is None else pi
    cm = clearance_model(model)
    mu, alpha = cm.mu[0], cm.alphas[0]
    if mu <= 0:
        raise ZeroCoalitionStakeError("background mean stake is zero")
    return float((pi - alpha * mu) * (x / mu) * clearance(model, 0, x / k))


def expected_pnl_sbm(model: SbmModel, x: float, pis=None, k: int = 1) -> PnlEstimate:
    """
    Σ_b w_b (π_b − α_b μ_b)(x / μ_b) q_b(x / k). Exact mean-field value for
    k = 1; for k ≥ 2 on several blocks it is a lower bound.
    """
    k = _check_k(k)
    pis = tuple(model.pis if pis is None else pis)
    if len(pis) != model.R:
        raise ConfigError(f"{len(pis)} profits for {model.R} service blocks")
    cm = clearance_model(model)
    total = 0.0
    for b in range(model.R):
        if cm.weights[b] == 0:
            continue
        if cm.mu[b] <= 0:
            raise ZeroCoalitionStakeError(f"background mean stake of block {b} is zero")
        total += cm.weights[b] * (pis[b] - cm.alphas[b] * cm.mu[b]) * (x / cm.mu[b]) \
            * clearance(model, b, x / k)
    return PnlEstimate(float(total), k, k >= 2 and model.R > 1)


def expected_pnl_advantage(model: SbmModel, x: float, pis=None,
                           k_max: int = DEFAULT_K_MAX) -> Optional[int]:
    """Least k ≥ 2 whose expected PNL beats the single identity, or None."""
    base = expected_pnl_sbm(model, x, pis, 1).value
    for k in range(2, k_max + 1):
        if expected_pnl_sbm(model, x, pis, k).value > base:
            return k
    return None


def pnl_point(graph: RestakingGraph, attack: AttackSpec, operator: OperatorId,
              x: Optional[float] = None, sharing: str = "proportional") -> float:
    """
    Realized PNL of `operator` committing x inside a concrete coalition:
        Σ_s π_s x / σ_{B_s} − x · max_s φ_s          (proportional)
        f(π, A) x / σ_B − x · max_s φ_s              (pooled)
    """
    x = float(attack.x(operator) if x is None else x)
    if x == 0:
        return 0.0
    attack = attack.with_commitment(operator, x)
    touched = sorted(graph.services_of(operator) & attack.services)
    share, phi = 0.0, 0.0
    for s in touched:
        used = float(attack_stake_on(graph, attack, s))
        if used <= 0:
            raise ZeroCoalitionStakeError(f"no coalition stake on {s!r}")
        phi = max(phi, float(graph.threshold(s)) / used)
        share += float(graph.service(s).pi) * x / used
    if sharing == "pooled":
        coalition = float(sum(xv for _, xv in attack.attackers))
        if coalition <= 0:
            raise ZeroCoalitionStakeError("coalition has no stake")
        share = float(graph.profit_of(attack.services)) * x / coalition
    return share - x * phi


# ═══════════════════════════════════════════════════════════════
# Sweeps
# ═══════════════════════════════════════════════════════════════

@dataclass
class SweepRow:
    x: float
    k: int
    p_single: float
    p_k: float
    p_prime: float
    k_star: Optional[int]
    pnl: Optional[float]
    er_dominated: Optional[bool] = None


def sweep(model: SbmModel, xs, ks, k_max: int = DEFAULT_K_MAX) -> list[SweepRow]:
    """One row per (x, k). PNL needs per-block profits in the model."""
    rows = []
    for x in xs:
        x = float(x)
        p = success_single(model, x)
        k_star = min_sybil_count(model, x, k_max).k_star
        for k in ks:
            pk = success_per_identity(model, x, k)
            pp = success_sybil(model, x, k)
            pnl = expected_pnl_sbm(model, x, k=k).value if model.pis else None
            dominated = None
            if model.is_er and k >= 2:
                dominated = pp < p
            rows.append(SweepRow(x, int(k), p, pk, pp, k_star, pnl, dominated))
    return rows
