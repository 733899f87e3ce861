"""
Attacker strategy: utilities, best responses, equilibria, deviations.

A focal attacker v commits x ∈ [0, σ_v]. For every attacked service i it
touches, the other attackers bring σ_{B_i′}. Under the max-scheme:

    u_v(x) = share(x) − x · max_i φ_i(x),     φ_i(x) = α_i σ_{T_i} / (x + σ_{B_i′})

with two sharing rules for the profit:

    proportional:  share(x) = Σ_i π_i · x / (x + σ_{B_i′})
    pooled:        share(x) = (Σ_i π_i) · x / (x + P)       P = stake of everyone else

For a single service this collapses to (π − α σ_T) · x / (x + σ_{B′}): the
sign of the margin π − α σ_T decides everything, and a positive margin means
full participation. With several services the max switches regime where two
factors cross; best_response() scores every candidate (0, σ_v, regime
boundaries, first-order points, a dense grid with a Newton polish) and keeps
the best.

find_type1_deviation() is the other side of the coin: under any rule that
charges a fixed fraction λ of committed stake, withholding pays whenever the
marginal profit is below λ.

Usage:
    ctx = UtilityContext.single(pi=2, alpha=0.7, total=2.5, others=1.5, stake=1.0)
    best_response(ctx).x_star                      # → 1.0 (margin > 0)

    ctx = UtilityContext.from_attack(graph, attack, "v2")
    utility(ctx, 1.5)                              # → 1.0
    nash_full_participation(graph, attack).profile
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import optimize

from core.errors import (
    DegenerateBoundaryError,
    NoConvergenceError,
    NoDeviationFoundError,
    StakeOutOfRangeError,
    UnknownOperatorError,
)
from core.graph import AttackSpec, OperatorId, RestakingGraph, SybilSplit, attack_stake_on
from core.multislash import mult_slash_max, service_factors, slash_after_split

logger = logging.getLogger(__name__)

SHARING_RULES = ("proportional", "pooled")
SCHEMES = ("max", "additive")


# ═══════════════════════════════════════════════════════════════
# Configuration
# ═══════════════════════════════════════════════════════════════

@dataclass(frozen=True)
class GridSpec:
    """Resolution of the candidate grid and of equilibrium verification."""
    points: int = 10_000
    verify_points: int = 2_001
    utility_tol: float = 1e-8


@dataclass(frozen=True)
class ServiceTerms:
    """What the focal attacker sees of one attacked service."""
    pi: float
    alpha: float
    total: float                     # σ_{T_i} = σ_{∂s}
    others: float                    # σ_{B_i′}

    def __post_init__(self):
        if self.others < 0:
            raise ValueError(f"other attackers' stake must be ≥ 0, got {self.others}")
        if self.total < self.others - 1e-12:
            raise ValueError(f"σ_T = {self.total} is below σ_B′ = {self.others}")
        if self.pi < 0:
            raise ValueError(f"pi must be ≥ 0, got {self.pi}")

    @property
    def threshold(self) -> float:
        return self.alpha * self.total


@dataclass(frozen=True)
class UtilityContext:
    terms: tuple                     # ServiceTerms per attacked service of v
    stake: float                     # σ_v
    sharing: str = "proportional"
    scheme: str = "max"
    pool_profit: Optional[float] = None     # pooled Π; default Σ π_i
    pool_others: Optional[float] = None     # pooled P; default max σ_{B_i′}

    def __post_init__(self):
        if self.sharing not in SHARING_RULES:
            raise KeyError(f"Unknown sharing rule '{self.sharing}'. Available: {list(SHARING_RULES)}")
        if self.scheme not in SCHEMES:
            raise KeyError(f"Unknown scheme '{self.scheme}'. Available: {list(SCHEMES)}")
        if not self.terms:
            raise ValueError("context needs at least one attacked service")
        if self.stake < 0:
            raise ValueError(f"stake must be ≥ 0, got {self.stake}")

    @classmethod
    def single(cls, pi, alpha, total, others, stake, **kw) -> "UtilityContext":
        return cls((ServiceTerms(float(pi), float(alpha), float(total), float(others)),),
                   float(stake), **kw)

    @classmethod
    def from_attack(cls, graph: RestakingGraph, attack: AttackSpec, operator: OperatorId,
                    sharing: str = "proportional", scheme: str = "max") -> "UtilityContext":
        """Context of `operator` inside `attack`, other commitments held fixed."""
        if operator not in attack.committed:
            raise UnknownOperatorError(f"operator {operator!r} is not an attacker")
        reduced = attack.with_commitment(operator, 0)
        terms = []
        for s in sorted(graph.services_of(operator) & attack.services):
            svc = graph.service(s)
            terms.append(ServiceTerms(
                pi=float(svc.pi),
                alpha=float(svc.alpha),
                total=float(graph.stake_of(graph.operators_of(s))),
                others=float(attack_stake_on(graph, reduced, s)),
            ))
        if not terms:
            raise UnknownOperatorError(f"operator {operator!r} touches no attacked service")
        pool_others = float(sum(xv for v, xv in attack.attackers if v != operator))
        return cls(tuple(terms), float(graph.stake(operator)), sharing, scheme,
                   pool_profit=float(graph.profit_of(attack.services)),
                   pool_others=pool_others)

    @property
    def n(self) -> int:
        return len(self.terms)

    @property
    def profit(self) -> float:
        return self.pool_profit if self.pool_profit is not None else sum(t.pi for t in self.terms)

    @property
    def pooled_others(self) -> float:
        return self.pool_others if self.pool_others is not None else max(t.others for t in self.terms)

    def margins(self) -> list[float]:
        """π_i − α_i σ_{T_i}, with Σ π in place of π_i under pooled sharing."""
        if self.sharing == "pooled":
            return [self.profit - t.threshold for t in self.terms]
        return [t.pi - t.threshold for t in self.terms]


# ═══════════════════════════════════════════════════════════════
# Utilities
# ═══════════════════════════════════════════════════════════════

def _arrays(ctx: UtilityContext):
    pis = np.array([t.pi for t in ctx.terms])
    thr = np.array([t.threshold for t in ctx.terms])
    oth = np.array([t.others for t in ctx.terms])
    return pis, thr, oth


def _curve(ctx: UtilityContext, xs: np.ndarray) -> np.ndarray:
    """u(x) over an array of stakes."""
    xs = np.asarray(xs, dtype=float)
    pis, thr, oth = _arrays(ctx)
    denom = xs[:, None] + oth[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(denom > 0, xs[:, None] / denom, 0.0)
        if ctx.sharing == "pooled":
            P = ctx.pooled_others
            share = ctx.profit * np.where(xs + P > 0, xs / (xs + P), 0.0)
        else:
            share = frac @ pis
        charge = frac * thr[None, :]             # x · φ_i(x)
        if ctx.scheme == "max":
            slash = charge.max(axis=1)
        else:
            phi_sum = np.where(denom > 0, thr[None, :] / denom, np.inf).sum(axis=1)
            slash = np.where(phi_sum <= 1, charge.sum(axis=1), xs)
    return share - slash


def _curve_derivative(ctx: UtilityContext, xs: np.ndarray) -> np.ndarray:
    """u′(x); one-sided (binding regime at x) where the max switches."""
    xs = np.asarray(xs, dtype=float)
    pis, thr, oth = _arrays(ctx)
    denom = xs[:, None] + oth[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        dfrac = np.where(denom > 0, oth[None, :] / denom ** 2, 0.0)
        if ctx.sharing == "pooled":
            P = ctx.pooled_others
            dshare = ctx.profit * np.where(xs + P > 0, P / (xs + P) ** 2, 0.0)
        else:
            dshare = dfrac @ pis
        dcharge = dfrac * thr[None, :]
        if ctx.scheme == "max":
            phi = np.where(denom > 0, thr[None, :] / denom, np.inf)
            j = np.argmax(phi, axis=1)
            dslash = dcharge[np.arange(len(xs)), j]
        else:
            phi_sum = np.where(denom > 0, thr[None, :] / denom, np.inf).sum(axis=1)
            dslash = np.where(phi_sum <= 1, dcharge.sum(axis=1), 1.0)
    return dshare - dslash


def _check_x(ctx: UtilityContext, x: float) -> float:
    x = float(x)
    if x < -1e-12 or x > ctx.stake + 1e-12:
        raise StakeOutOfRangeError(f"x = {x} outside [0, σ_v = {ctx.stake}]")
    return min(max(x, 0.0), ctx.stake)


def utility(ctx: UtilityContext, x) -> float:
    return float(_curve(ctx, np.array([_check_x(ctx, x)]))[0])


def utility_derivative(ctx: UtilityContext, x) -> float:
    return float(_curve_derivative(ctx, np.array([_check_x(ctx, x)]))[0])


def utility_curve(ctx: UtilityContext, xs) -> tuple[np.ndarray, np.ndarray]:
    """u and u′ over a grid of stakes in [0, σ_v]."""
    xs = np.clip(np.asarray(xs, dtype=float), 0.0, ctx.stake)
    return _curve(ctx, xs), _curve_derivative(ctx, xs)


def utility_single(ctx: UtilityContext, x) -> float:
    """
    (π − α σ_T) · x / (x + σ_{B′}); zero at x = σ_{B′} = 0.

    The closed form holds for proportional sharing under the max scheme.
    Pooled sharing (Π and P in the share) and the additive scheme go
    through `utility`.
    """
    if ctx.n != 1:
        raise ValueError(f"utility_single needs one service, context has {ctx.n}")
    if ctx.sharing == "pooled" or ctx.scheme != "max":
        return utility(ctx, x)
    x = _check_x(ctx, x)
    t = ctx.terms[0]
    if x + t.others == 0:
        return 0.0
    return (t.pi - t.threshold) * x / (x + t.others)


def utility_two_services(ctx: UtilityContext, x) -> float:
    if ctx.n != 2:
        raise ValueError(f"utility_two_services needs two services, context has {ctx.n}")
    return utility(ctx, x)


def regime_boundary(ctx: UtilityContext, i: int = 0, j: int = 1) -> float:
    """
    Stake where φ_i and φ_j cross:
        x = (α_j σ_{T_j} σ_{B_i′} − α_i σ_{T_i} σ_{B_j′}) / (α_i σ_{T_i} − α_j σ_{T_j})
    φ_i ≥ φ_j on one side. Equal thresholds leave one smooth regime.
    """
    a, b = ctx.terms[i], ctx.terms[j]
    if math.isclose(a.threshold, b.threshold, rel_tol=0.0, abs_tol=1e-15):
        raise DegenerateBoundaryError("equal thresholds α σ_T: the factors never cross")
    return (b.threshold * a.others - a.threshold * b.others) / (a.threshold - b.threshold)


def utility_attack_level(graph: RestakingGraph, attack: AttackSpec, operator: OperatorId,
                         x, scheme: str = "max") -> float:
    """
    Pooled utility: the whole f(π, A) is shared over B in proportion to stake,
    and v pays x · max φ over the services it attacks.
    """
    ctx = UtilityContext.from_attack(graph, attack, operator, sharing="pooled", scheme=scheme)
    return utility(ctx, x)


# ═══════════════════════════════════════════════════════════════
# Best responses
# ═══════════════════════════════════════════════════════════════

@dataclass
class BestResponse:
    x_star: float
    regime: str                      # full | none | interior | boundary | knife-edge
    utility: float
    margin_rule: str                 # full | none | mixed
    margin_rule_holds: bool
    candidates: dict = field(default_factory=dict)      # label → (x, u)
    flags: list = field(default_factory=list)

    def summary(self) -> str:
        lines = [f"x* = {self.x_star:.6f}  ({self.regime})  u = {self.utility:.6f}",
                 f"  margin rule: {self.margin_rule}"
                 + ("" if self.margin_rule_holds else "  (does not hold here)")]
        for label, (x, u) in sorted(self.candidates.items(), key=lambda kv: kv[1][0]):
            lines.append(f"  {label:16s} x={x:.6f}  u={u:.6f}")
        for f in self.flags:
            lines.append(f"  ! {f}")
        return "\n".join(lines)


def _margin_rule(ctx: UtilityContext) -> str:
    m = ctx.margins()
    if all(v >= 0 for v in m):
        return "full"
    if all(v < 0 for v in m):
        return "none"
    return "mixed"


def _boundaries(ctx: UtilityContext, xs: np.ndarray) -> list[float]:
    out = []
    if ctx.scheme == "max":
        for i in range(ctx.n):
            for j in range(i + 1, ctx.n):
                try:
                    xb = regime_boundary(ctx, i, j)
                except DegenerateBoundaryError:
                    continue
                if 0 < xb < ctx.stake:
                    out.append(xb)
    else:
        _, thr, oth = _arrays(ctx)

        def excess(x):
            return float(np.sum(thr / (x + oth))) - 1.0

        with np.errstate(divide="ignore"):
            vals = np.array([excess(x) if x + oth.min() > 0 else np.inf for x in xs])
        for k in np.nonzero(np.diff(np.sign(vals)) != 0)[0]:
            if np.isfinite(vals[k]) and np.isfinite(vals[k + 1]):
                out.append(optimize.brentq(excess, xs[k], xs[k + 1]))
    return out


def _first_order_two(ctx: UtilityContext) -> list[tuple[str, float]]:
    """Interior stationary points of each regime of the two-service max-scheme."""
    out = []
    if ctx.n != 2 or ctx.scheme != "max" or ctx.sharing != "proportional":
        return out
    for bind, other in ((0, 1), (1, 0)):
        a, b = ctx.terms[bind], ctx.terms[other]
        if a.threshold <= a.pi or b.pi <= 0 or a.others <= 0 or b.others <= 0:
            continue
        A = math.sqrt(((a.threshold - a.pi) / b.pi) * (a.others / b.others))
        if math.isclose(A, 1.0, rel_tol=0, abs_tol=1e-12):
            out.append((f"singular@{bind + 1}", math.nan))
            continue
        x = (a.others - b.others * A) / (A - 1)
        if not (0 <= x <= ctx.stake):
            continue
        # keep only points inside their own regime
        phi_bind = a.threshold / (x + a.others)
        phi_other = b.threshold / (x + b.others)
        if phi_bind >= phi_other - 1e-12:
            out.append((f"first-order@{bind + 1}", x))
    return out


def _newton_polish(ctx: UtilityContext, x: float) -> float:
    h = max(1e-7, 1e-7 * ctx.stake)
    lo, hi = max(x - h, 0.0), min(x + h, ctx.stake)
    if hi <= lo:
        return x
    d = float(_curve_derivative(ctx, np.array([x]))[0])
    d2 = float((_curve_derivative(ctx, np.array([hi]))[0]
                - _curve_derivative(ctx, np.array([lo]))[0]) / (hi - lo))
    if d2 >= 0:
        return x
    return min(max(x - d / d2, 0.0), ctx.stake)


def best_response(ctx: UtilityContext, grid: GridSpec = GridSpec()) -> BestResponse:
    """Argmax of u over [0, σ_v] for any number of services, scheme and sharing rule."""
    s = ctx.stake
    rule = _margin_rule(ctx)
    flags = []
    if s == 0:
        return BestResponse(0.0, "none", 0.0, rule, True, {"zero": (0.0, 0.0)})

    # every factor tracks its own share, so u′ ≥ 0 everywhere
    if ctx.scheme == "max" and rule == "full" and ctx.sharing == "proportional":
        u = utility(ctx, s)
        regime = "knife-edge" if all(m == 0 for m in ctx.margins()) else "full"
        return BestResponse(s, regime, u, rule, True, {"full": (s, u)})

    xs = np.linspace(0.0, s, grid.points)
    us = _curve(ctx, xs)
    if np.all(np.abs(us) <= 1e-14):
        return BestResponse(s, "knife-edge", 0.0, rule, rule != "none", {"full": (s, 0.0)})

    cands: dict = {"none": 0.0, "full": s}
    i = int(np.argmax(us))
    cands["grid"] = float(xs[i])
    cands["newton"] = _newton_polish(ctx, float(xs[i]))

    boundaries = _boundaries(ctx, xs)
    for k, xb in enumerate(boundaries):
        cands[f"boundary{k}"] = xb
    for label, x in _first_order_two(ctx):
        if math.isnan(x):
            flags.append(f"{label}: interior formula singular, grid argmax used")
        else:
            cands[label] = x

    def slope(x: float) -> float:
        return float(_curve_derivative(ctx, np.array([x]))[0])

    ds = _curve_derivative(ctx, xs)
    for k in np.nonzero((ds[:-1] > 0) & (ds[1:] < 0))[0]:
        try:
            cands[f"root{k}"] = optimize.brentq(slope, xs[k], xs[k + 1])
        except ValueError:
            continue

    scored = {label: (x, utility(ctx, x)) for label, x in cands.items()}
    # highest utility wins; near-ties go to the larger stake
    best_label = max(scored, key=lambda l: (round(scored[l][1], 12), scored[l][0]))
    x_star, u_star = scored[best_label]

    if x_star <= 1e-12:
        regime = "none"
    elif x_star >= s - 1e-12:
        regime = "full"
    elif any(abs(x_star - xb) <= 1e-9 for xb in boundaries):
        regime = "boundary"
    else:
        regime = "interior"

    holds = (rule == "mixed"
             or (rule == "full" and regime == "full")
             or (rule == "none" and regime == "none"))
    if not holds:
        flags.append(f"margin rule '{rule}' predicts otherwise; returning the true argmax")
        logger.debug("margin rule %s broken: x*=%.6f", rule, x_star)
    return BestResponse(x_star, regime, u_star, rule, holds, scored, flags)


def best_response_single(ctx: UtilityContext, grid: GridSpec = GridSpec()) -> BestResponse:
    """
    Full participation iff π_s > α_s σ_T under the max-scheme; knife-edge
    returns σ_v. The additive scheme slashes everything while φ > 1, so it
    takes the general search.
    """
    if ctx.n != 1:
        raise ValueError(f"best_response_single needs one service, context has {ctx.n}")
    if ctx.scheme != "max" or (ctx.sharing == "pooled" and ctx.pooled_others != ctx.terms[0].others):
        return best_response(ctx, grid)
    m = ctx.margins()[0]
    s = ctx.stake
    if m > 0:
        return BestResponse(s, "full", utility(ctx, s), "full", True, {"full": (s, utility(ctx, s))})
    if m < 0:
        return BestResponse(0.0, "none", 0.0, "none", True, {"none": (0.0, 0.0)})
    return BestResponse(s, "knife-edge", 0.0, "full", True, {"full": (s, 0.0)})


def best_response_two(ctx: UtilityContext, grid: GridSpec = GridSpec()) -> BestResponse:
    if ctx.n != 2:
        raise ValueError(f"best_response_two needs two services, context has {ctx.n}")
    return best_response(ctx, grid)


def best_response_n(ctx: UtilityContext, grid: GridSpec = GridSpec()) -> BestResponse:
    if ctx.n == 1:
        return best_response_single(ctx, grid)
    return best_response(ctx, grid)


def verify_best_response(ctx: UtilityContext, br: BestResponse,
                         grid: GridSpec = GridSpec()) -> bool:
    """No grid point beats x* by more than the utility tolerance."""
    xs = np.linspace(0.0, ctx.stake, grid.points)
    return bool(np.max(_curve(ctx, xs)) <= br.utility + grid.utility_tol)


# ═══════════════════════════════════════════════════════════════
# Equilibrium
# ═══════════════════════════════════════════════════════════════

@dataclass
class NashReport:
    profile: dict                    # operator → x_v
    utilities: dict
    iterations: int
    verified: bool
    full_participation: bool

    def summary(self) -> str:
        lines = [f"Nash profile after {self.iterations} rounds "
                 f"({'verified' if self.verified else 'NOT verified'}, "
                 f"{'full participation' if self.full_participation else 'partial'}):"]
        for v, x in self.profile.items():
            lines.append(f"  {v:8s} x={x:.6f}  u={self.utilities[v]:.6f}")
        return "\n".join(lines)


def nash_full_participation(graph: RestakingGraph, attack: AttackSpec,
                            sharing: str = "proportional", scheme: str = "max",
                            max_iter: int = 200, grid: GridSpec = GridSpec(points=2_001)) -> NashReport:
    """
    Gauss-Seidel best-response iteration from full commitment, then a grid
    check that nobody gains by moving alone.
    """
    players = [v for v in attack.attacker_ids if graph.services_of(v) & attack.services]
    profile = {v: float(graph.stake(v)) for v in players}
    current = AttackSpec.of(attack.services, {v: graph.stake(v) for v in players})

    for it in range(1, max_iter + 1):
        moved = 0.0
        for v in players:
            ctx = UtilityContext.from_attack(graph, current, v, sharing, scheme)
            x = best_response_n(ctx, grid).x_star
            moved = max(moved, abs(x - profile[v]))
            profile[v] = x
            current = current.with_commitment(v, x)
        logger.debug("nash round %d: max move %.3e", it, moved)
        if moved <= 1e-10:
            break
    else:
        logger.warning("best-response iteration did not settle in %d rounds", max_iter)
        raise NoConvergenceError(f"no fixed point within {max_iter} rounds", last_profile=dict(profile))

    utilities, verified = {}, True
    for v in players:
        ctx = UtilityContext.from_attack(graph, current, v, sharing, scheme)
        u = utility(ctx, profile[v])
        utilities[v] = u
        xs = np.linspace(0.0, ctx.stake, grid.verify_points)
        if np.max(_curve(ctx, xs)) > u + grid.utility_tol:
            verified = False
    full = all(abs(profile[v] - float(graph.stake(v))) <= 1e-9 for v in players)
    return NashReport(profile, utilities, it, verified, full)


# ═══════════════════════════════════════════════════════════════
# Withholding deviations under a fixed-fraction rule
# ═══════════════════════════════════════════════════════════════

@dataclass(frozen=True)
class DeviationEnvironment:
    """
    Two services with a rule that charges the focal attacker λ = max(λ₁, λ₂)
    of whatever it commits, and others' stake Σ′ and thresholds τ held fixed.
    """
    pi1: float
    pi2: float
    others1: float
    others2: float
    lam1: float
    lam2: float
    x: float                         # current commitment
    tau1: float = 0.0                # α₁ σ_{T₁}; the attack must stay at or above it
    tau2: float = 0.0

    def utility(self, x: float) -> float:
        share = 0.0
        if x + self.others1 > 0:
            share += self.pi1 * x / (x + self.others1)
        if x + self.others2 > 0:
            share += self.pi2 * x / (x + self.others2)
        return share - max(self.lam1, self.lam2) * x

    def derivative(self, x: float) -> float:
        d = 0.0
        if x + self.others1 > 0:
            d += self.pi1 * self.others1 / (x + self.others1) ** 2
        if x + self.others2 > 0:
            d += self.pi2 * self.others2 / (x + self.others2) ** 2
        return d - max(self.lam1, self.lam2)


@dataclass
class DeviationReport:
    x: float
    x_prime: float
    withheld: float
    gain: float
    derivative_at_x: float
    utility_before: float
    utility_after: float

    def summary(self) -> str:
        return (f"withhold {self.withheld:.6f} (x {self.x:.6f} → {self.x_prime:.6f}): "
                f"u {self.utility_before:.6f} → {self.utility_after:.6f}, gain {self.gain:.6f}")


def find_type1_deviation(env: DeviationEnvironment) -> DeviationReport:
    """
    Profitable withholding for the focal attacker, if any. u is concave, so
    the best reduced commitment is the stationary point, or the smallest
    commitment that keeps both services at their thresholds.
    """
    lam = max(env.lam1, env.lam2)
    if not (0 <= env.lam1 <= 1 and 0 <= env.lam2 <= 1):
        raise NoDeviationFoundError("multipliers must lie in [0, 1]")
    d = env.derivative(env.x)
    if d >= 0:
        raise NoDeviationFoundError(f"u′(x) = {d:.6g} ≥ 0: withholding does not pay")

    x_min = max(0.0, env.tau1 - env.others1, env.tau2 - env.others2)
    if x_min >= env.x:
        raise NoDeviationFoundError("any withholding breaks the attack")
    if env.derivative(x_min) > 0:
        x_prime = optimize.brentq(env.derivative, x_min, env.x)
    else:
        x_prime = x_min

    before, after = env.utility(env.x), env.utility(x_prime)
    gain = after - before
    feasible = (x_prime + env.others1 >= env.tau1 - 1e-12
                and x_prime + env.others2 >= env.tau2 - 1e-12)
    bounded = 0 <= lam * x_prime <= x_prime
    if gain <= 0 or not feasible or not bounded:
        raise NoDeviationFoundError("no feasible withholding increases utility")
    return DeviationReport(env.x, x_prime, env.x - x_prime, gain, d, before, after)


@dataclass
class ImpossibilityWitness:
    operator: OperatorId
    environment: DeviationEnvironment
    deviation: DeviationReport
    split_invariant: bool            # max-scheme total unchanged by a participating split

    def summary(self) -> str:
        return "\n".join([
            f"Witness at {self.operator}:",
            f"  Type I : {self.deviation.summary()}",
            f"  Type II: participating split leaves the charge unchanged = {self.split_invariant}",
        ])


def impossibility_witness(graph: RestakingGraph, attack: AttackSpec, operator: OperatorId,
                          lam: Optional[tuple] = None) -> ImpossibilityWitness:
    """
    On a concrete two-service attack: a rule that is immune to splitting
    (the max-scheme, λ_i = φ_i at full stake) still leaves a profitable
    withholding move for `operator`.
    """
    ctx = UtilityContext.from_attack(graph, attack, operator)
    if ctx.n != 2:
        raise NoDeviationFoundError(f"{operator!r} must attack exactly two services, not {ctx.n}")
    if lam is None:
        phi = service_factors(graph, attack)
        touched = sorted(graph.services_of(operator) & attack.services)
        lam = tuple(float(phi[s]) for s in touched)
    a, b = ctx.terms
    env = DeviationEnvironment(a.pi, b.pi, a.others, b.others, lam[0], lam[1],
                               x=float(attack.x(operator)), tau1=a.threshold, tau2=b.threshold)
    deviation = find_type1_deviation(env)

    base = mult_slash_max(graph, attack)
    stake = graph.stake(operator)
    after = slash_after_split(graph, attack, SybilSplit.even(operator, stake, 2))
    invariant = abs(float(after.total - base.total)) <= 1e-12
    return ImpossibilityWitness(operator, env, deviation, invariant)


def with_sharing(ctx: UtilityContext, sharing: str) -> UtilityContext:
    return replace(ctx, sharing=sharing)
