"""
restake-lab command line.

    python restake_lab.py check fixtures/overlap_graph.json fixtures/overlap_attack.json
    python restake_lab.py slash G A --mechanism marginal|max|additive|minimal
    python restake_lab.py best-response G A v2 --sharing pooled [--sweep 201]
    python restake_lab.py enumerate G [--max-services 2 --max-attackers 3]
    python restake_lab.py sbm fixtures/sbm_two_block.json --stake 3 --sybils 2 [--sweep]
    python restake_lab.py montecarlo fixtures/sbm_two_block.json --replications 100000
    python restake_lab.py paper-examples [--only sbm marginal]

Global flags (before or after the subcommand): --format csv|table|json,
--tolerance, --seed, -v. Results go to stdout, logs and errors to stderr.

Exit codes: 0 ok, 1 reference check failed, 2 precondition or input error,
3 Monte Carlo estimate off by more than 4 standard errors, 64 usage.
"""

import argparse
import logging
import os
import sys
from typing import Optional

import numpy as np

from core import fixtures
from core.errors import RestakeError
from core.graph import (
    attack_stake_on,
    enumerate_attacks,
    is_feasible,
    is_profitable,
    is_stable,
    load_attack,
    load_graph,
)
from core.marginal import marginal_slash
from core.montecarlo import (
    SimConfig,
    config_digest,
    estimate_clearance,
    estimate_success,
    neighbor_count_check,
)
from core.multislash import minimal_slashing, mult_slash_additive, mult_slash_max
from core.numeric import DEFAULT_TOL, Tolerance, ge
from core.randnet import clearance, clearance_model, load_sbm, sweep
from core.report import ScenarioReport, digest_inputs
from core.strategy import (
    SHARING_RULES,
    UtilityContext,
    best_response_n,
    utility_curve,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_PRECONDITION = 2
EXIT_STATISTICAL = 3
EXIT_USAGE = 64

SEED_ENV = "RESTAKE_LAB_SEED"
DEFAULT_SEED = 42
Z_REJECT = 4.0
MIN_Z_REPLICATIONS = 100

MECHANISMS = ("marginal", "max", "additive", "minimal")
FORMATS = ("csv", "table", "json")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ═══════════════════════════════════════════════════════════════
# Commands
# ═══════════════════════════════════════════════════════════════

def _scenario(*paths) -> str:
    return "+".join(os.path.splitext(os.path.basename(str(p)))[0] for p in paths) or "builtin"


def cmd_check(graph_path, attack_path, tol: Tolerance = DEFAULT_TOL) -> ScenarioReport:
    """Profitability, per-service feasibility, and stability of one attack."""
    graph = load_graph(graph_path)
    attack = load_attack(attack_path, graph)
    rep = ScenarioReport(_scenario(graph_path, attack_path), "check",
                         digest_inputs([graph_path, attack_path]),
                         columns=("item", "value", "lhs", "rhs"), exact=("lhs", "rhs"))

    rep.add(item="profitable", value=is_profitable(graph, attack, tol=tol),
            lhs=graph.profit_of(attack.services), rhs=graph.stake_of(attack.attacker_ids))
    for s in sorted(attack.services):
        used, thr = attack_stake_on(graph, attack, s), graph.threshold(s)
        rep.add(item=f"feasible[{s}]", value=ge(used, thr, tol), lhs=used, rhs=thr)
    feasible = is_feasible(graph, attack, tol)
    rep.add(item="feasible", value=feasible)
    rep.add(item="stable", value=is_stable(graph, attack, tol) if feasible else None)
    return rep


def cmd_slash(graph_path, attack_path, mechanism: str = "marginal",
              tol: Tolerance = DEFAULT_TOL) -> ScenarioReport:
    """Per-operator slash under one mechanism; exact rationals in the *_exact columns."""
    if mechanism not in MECHANISMS:
        raise UsageError(f"Unknown mechanism '{mechanism}'. Available: {list(MECHANISMS)}")
    graph = load_graph(graph_path)
    attack = load_attack(attack_path, graph)
    rep = ScenarioReport(_scenario(graph_path, attack_path), "slash",
                         digest_inputs([graph_path, attack_path], mechanism=mechanism),
                         columns=("operator_id", "mechanism", "binding", "factor", "psi"),
                         exact=("factor", "psi"))

    if mechanism == "marginal":
        out = marginal_slash(graph, attack, tol)
        for r in out.rows():
            rep.add(operator_id=r["operator_id"], mechanism=mechanism,
                    binding=r["group_fingerprint"], factor=r["c_group"], psi=r["psi"])
        rep.header.append(f"total={float(out.total):.6g}")
    elif mechanism in ("max", "additive"):
        fn = mult_slash_max if mechanism == "max" else mult_slash_additive
        out = fn(graph, attack, tol=tol)
        for r in out.rows():
            rep.add(operator_id=r["operator_id"], mechanism=mechanism,
                    binding=r["binding_service"], factor=r["phi"], psi=r["psi"])
        rep.header.append(f"total={float(out.total):.6g}")
        if out.residual_negative:
            rep.header.append(f"residual_negative={','.join(out.residual_negative)}")
    else:
        out = minimal_slashing(graph, attack, tol)
        for v, psi in out.psi.items():
            touched = graph.services_of(v) & attack.services
            lam = max((out.lam[s] for s in touched), default=0.0)
            rep.add(operator_id=v, mechanism=mechanism, binding=",".join(out.binding_order) or "-",
                    factor=lam, psi=psi)
        rep.header.append(f"total={float(out.objective):.6g} lp_optimum={out.lp_objective:.6g} "
                          f"gap={out.gap:.3g}")
    return rep


def cmd_best_response(graph_path, attack_path, operator: str, sharing: str = "proportional",
                      scheme: str = "max", sweep_points: Optional[int] = None) -> ScenarioReport:
    """x*, its regime and utility; with `sweep_points`, u(x) over [0, σ_v] instead."""
    graph = load_graph(graph_path)
    attack = load_attack(attack_path, graph)
    ctx = UtilityContext.from_attack(graph, attack, operator, sharing=sharing, scheme=scheme)
    br = best_response_n(ctx)
    digest = digest_inputs([graph_path, attack_path], operator=operator, sharing=sharing,
                           scheme=scheme, sweep=sweep_points)
    scenario = _scenario(graph_path, attack_path)

    if sweep_points:
        xs = np.linspace(0.0, ctx.stake, int(sweep_points))
        rep = ScenarioReport(scenario, "best-response", digest,
                             columns=("x", "utility", "derivative"))
        rep.header.append(f"operator={operator} sharing={sharing} x_star={br.x_star:.6g} "
                          f"regime={br.regime}")
        us, ds = utility_curve(ctx, xs)
        for x, u, d in zip(xs, us, ds):
            rep.add(x=float(x), utility=float(u), derivative=float(d))
        return rep

    rep = ScenarioReport(scenario, "best-response", digest,
                         columns=("operator_id", "sharing", "scheme", "x_star", "regime",
                                  "utility", "margin_rule", "margin_rule_holds"))
    rep.add(operator_id=operator, sharing=sharing, scheme=scheme, x_star=br.x_star,
            regime=br.regime, utility=br.utility, margin_rule=br.margin_rule,
            margin_rule_holds=br.margin_rule_holds)
    for f in br.flags:
        rep.header.append(f)
    return rep


def cmd_enumerate(graph_path, max_services: Optional[int] = None,
                  max_attackers: Optional[int] = None, tol: Tolerance = DEFAULT_TOL) -> ScenarioReport:
    graph = load_graph(graph_path)
    rep = ScenarioReport(_scenario(graph_path), "enumerate",
                         digest_inputs([graph_path], max_services=max_services,
                                       max_attackers=max_attackers),
                         columns=("services", "attackers", "profit", "stake", "stable"),
                         exact=("profit", "stake"))
    for a in enumerate_attacks(graph, max_services, max_attackers, tol=tol):
        rep.add(services=" ".join(sorted(a.services)), attackers=" ".join(a.attacker_ids),
                profit=graph.profit_of(a.services), stake=graph.stake_of(a.attacker_ids),
                stable=is_stable(graph, a, tol))
    return rep


def _parse_range(text: str, kind=float) -> list:
    """START:STOP:NUM for floats, START:STOP (inclusive) for ints."""
    parts = text.split(":")
    try:
        if kind is int:
            lo, hi = (int(p) for p in parts)
            return list(range(lo, hi + 1))
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
        return [float(x) for x in np.linspace(lo, hi, n)]
    except (ValueError, IndexError):
        raise UsageError(f"bad range {text!r}") from None


def cmd_sbm(config_path, stake: float = 3.0, sybils: int = 2, sweep_x: Optional[list] = None,
            sweep_k: Optional[list] = None) -> ScenarioReport:
    """Analytic clearance, success probabilities, k* and PNL for one (x, k) or a sweep."""
    model = load_sbm(config_path)
    cm = clearance_model(model)
    xs = sweep_x or [float(stake)]
    ks = sweep_k or [int(sybils)]
    q_cols = tuple(f"q{b}" for b in range(model.R))
    rep = ScenarioReport(_scenario(config_path), "sbm",
                         digest_inputs([config_path], xs=xs, ks=ks),
                         columns=("x", "k") + q_cols + ("p", "p_k", "p_prime", "k_star",
                                                         "pnl", "er_dominated"))
    for b in range(model.R):
        rep.header.append(f"block {b}: mu={cm.mu[b]:.6g} sd={cm.sd[b]:.6g} T={cm.T[b]:.6g} "
                          f"w={cm.weights[b]:.6g}")
    for row in sweep(model, xs, ks):
        qs = {f"q{b}": clearance(model, b, row.x) for b in range(model.R)}
        rep.add(x=row.x, k=row.k, p=row.p_single, p_k=row.p_k, p_prime=row.p_prime,
                k_star=row.k_star, pnl=row.pnl, er_dominated=row.er_dominated, **qs)
    return rep


def cmd_montecarlo(config_path, replications: int = 100_000, seed: int = DEFAULT_SEED,
                   stake: float = 3.0, sybils: int = 2, workers: int = 1) -> ScenarioReport:
    """
    Simulated clearance (per block, at y = x), success for k = 1 and k, and the
    neighbor-count bound. passed is False if any estimate with at least 100
    replications sits more than 4 standard errors from its reference.
    """
    model = load_sbm(config_path)
    base = SimConfig(model, replications=replications, seed=seed, x=float(stake), k=1,
                     workers=workers)
    digest = config_digest(base)
    rep = ScenarioReport(_scenario(config_path), "montecarlo", digest,
                         columns=("config_hash", "estimator", "analytic", "gaussian",
                                  "estimate", "stderr", "z", "n", "ok"))
    rep.header.append(f"seed={seed} replications={replications} x={float(stake):g} k={sybils} "
                      f"config_hash={digest}")

    estimates = [estimate_clearance(base, b, float(stake))
                 for b in range(model.R) if model.service_blocks[b] > 0]
    estimates.append(estimate_success(base))
    if sybils > 1:
        estimates.append(estimate_success(SimConfig(model, replications=replications, seed=seed,
                                                    x=float(stake), k=int(sybils), workers=workers)))

    passed = True
    for est in estimates:
        ok = bool(est.n < MIN_Z_REPLICATIONS or abs(est.z) <= Z_REJECT)
        passed &= ok
        rep.add(config_hash=digest[:16], estimator=est.estimator, analytic=est.analytic,
                gaussian=est.gaussian, estimate=est.estimate, stderr=est.stderr, z=est.z,
                n=est.n, ok=ok)
    for chk in neighbor_count_check(base):
        se = chk.stderr
        z = (chk.frequency - chk.bound) / se if se > 0 else 0.0
        ok = replications < MIN_Z_REPLICATIONS or chk.passes
        passed &= ok
        rep.add(config_hash=digest[:16], estimator=f"neighbors[b={chk.block}]", analytic=chk.bound,
                gaussian=None, estimate=chk.frequency, stderr=se, z=z, n=replications,
                ok=ok)
    rep.passed = passed
    return rep


def cmd_paper_examples(only: Optional[list] = None, tolerance: Optional[float] = None) -> ScenarioReport:
    """Every built-in reference check: computed vs expected value vs tolerance."""
    try:
        checks = fixtures.select_checks(only)
    except KeyError as e:
        raise UsageError(e.args[0]) from None
    rep = ScenarioReport("reference", "paper-examples",
                         digest_inputs(only=sorted(only or []), tolerance=tolerance),
                         columns=("check", "group", "description", "computed", "expected",
                                  "tolerance", "pass"))
    passed = True
    for c in checks:
        try:
            value, ok = c.run(tolerance)
        except RestakeError as e:
            logger.warning("check %s raised %s: %s", c.id, e.code, e)
            value, ok = float("nan"), False
        passed &= ok
        rep.add(check=c.id, group=c.group, description=c.description, computed=value,
                expected=c.expected, tolerance=c.tolerance if tolerance is None else tolerance,
                **{"pass": ok})
    rep.passed = passed
    return rep


# ═══════════════════════════════════════════════════════════════
# Parser
# ═══════════════════════════════════════════════════════════════

def _global_flags() -> argparse.ArgumentParser:
    # SUPPRESS keeps a flag given before the subcommand from being reset after it
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--format", choices=FORMATS, default=argparse.SUPPRESS)
    p.add_argument("--tolerance", type=float, default=argparse.SUPPRESS,
                   help="float comparison tolerance; overrides per-check tolerance in paper-examples")
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                   help=f"random seed (fallback: ${SEED_ENV}, then {DEFAULT_SEED})")
    p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags()
    parser = _Parser(prog="restake-lab", parents=[common],
                     description="Slashing mechanisms and Sybil analysis for restaking networks.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("check", parents=[common], help="feasibility, profitability, stability")
    p.add_argument("graph")
    p.add_argument("attack")

    p = sub.add_parser("slash", parents=[common], help="per-operator slash under a mechanism")
    p.add_argument("graph")
    p.add_argument("attack")
    p.add_argument("--mechanism", choices=MECHANISMS, default="marginal")

    p = sub.add_parser("best-response", parents=[common], help="best response of one attacker")
    p.add_argument("graph")
    p.add_argument("attack")
    p.add_argument("operator")
    p.add_argument("--sharing", choices=SHARING_RULES, default="proportional")
    p.add_argument("--scheme", choices=("max", "additive"), default="max")
    p.add_argument("--sweep", type=int, default=None, metavar="POINTS",
                   help="emit u(x) on this many grid points instead")

    p = sub.add_parser("enumerate", parents=[common], help="all profitable + feasible attacks")
    p.add_argument("graph")
    p.add_argument("--max-services", type=int, default=None)
    p.add_argument("--max-attackers", type=int, default=None)

    p = sub.add_parser("sbm", parents=[common], help="analytic random-network quantities")
    p.add_argument("config")
    p.add_argument("--stake", type=float, default=3.0)
    p.add_argument("--sybils", type=int, default=2)
    p.add_argument("--sweep", action="store_true", help="iterate --x-range × --k-range")
    p.add_argument("--x-range", default="0.5:6:12", metavar="START:STOP:NUM")
    p.add_argument("--k-range", default="1:10", metavar="K0:K1")

    p = sub.add_parser("montecarlo", parents=[common], help="simulate and compare to analytic")
    p.add_argument("config")
    p.add_argument("--replications", type=int, default=100_000)
    p.add_argument("--stake", type=float, default=3.0)
    p.add_argument("--sybils", type=int, default=2)
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("paper-examples", aliases=["reference-checks"], parents=[common],
                       help="reproduce the worked-example values")
    p.add_argument("--only", nargs="+", default=None, metavar="CHECK",
                   help="check ids or groups: " + ", ".join(fixtures.CHECK_GROUPS))
    return parser


def resolve_seed(args) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"{SEED_ENV}={env!r} is not an integer") from None
    return DEFAULT_SEED


def _dispatch(args) -> ScenarioReport:
    tol_value = getattr(args, "tolerance", None)
    tol = Tolerance(tol_value) if tol_value is not None else DEFAULT_TOL
    cmd = args.command
    if cmd == "check":
        return cmd_check(args.graph, args.attack, tol)
    if cmd == "slash":
        return cmd_slash(args.graph, args.attack, args.mechanism, tol)
    if cmd == "best-response":
        return cmd_best_response(args.graph, args.attack, args.operator, args.sharing,
                                 args.scheme, args.sweep)
    if cmd == "enumerate":
        return cmd_enumerate(args.graph, args.max_services, args.max_attackers, tol)
    if cmd == "sbm":
        if args.sweep:
            return cmd_sbm(args.config, sweep_x=_parse_range(args.x_range),
                           sweep_k=_parse_range(args.k_range, int))
        return cmd_sbm(args.config, args.stake, args.sybils)
    if cmd == "montecarlo":
        return cmd_montecarlo(args.config, args.replications, resolve_seed(args),
                              args.stake, args.sybils, args.workers)
    if cmd in ("paper-examples", "reference-checks"):
        return cmd_paper_examples(args.only, tol_value)
    raise UsageError(f"unknown command {cmd!r}")


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)

    try:
        report = _dispatch(args)
    except UsageError as e:
        print(f"{parser.prog}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except RestakeError as e:
        print(f"error[{e.code}]: {e}", file=sys.stderr)
        return EXIT_PRECONDITION
    except OSError as e:
        print(f"error[io-error]: {e}", file=sys.stderr)
        return EXIT_PRECONDITION

    sys.stdout.write(report.render(getattr(args, "format", "csv")))
    if report.passed is False:
        return EXIT_STATISTICAL if report.command == "montecarlo" else EXIT_CHECK_FAILED
    return EXIT_OK
