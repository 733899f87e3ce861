"""
Error hierarchy for restake-lab.

Every precondition failure in the library raises a subclass of RestakeError.
Each class carries a stable `code` (the name the CLI prints and tests match
on), so callers can branch on the kind of failure without parsing messages.

RestakeError subclasses ValueError: code that only knows the builtin still
catches everything.

Usage:
    try:
        outcome = marginal_slash(graph, attack)
    except UnstableAttackError as e:
        print(e.code)   # → "unstable-attack"
"""


class RestakeError(ValueError):
    """Root of all library errors."""
    code = "restake-error"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)


# ═══════════════════════════════════════════════════════════════
# Graph layer
# ═══════════════════════════════════════════════════════════════

class UnknownServiceError(RestakeError):
    code = "unknown-service"


class UnknownOperatorError(RestakeError):
    code = "unknown-operator"


class MalformedAttackError(RestakeError):
    code = "malformed-attack"


class InfeasibleAttackError(RestakeError):
    code = "infeasible-attack"


class UnstableAttackError(RestakeError):
    code = "unstable-attack"


class ShareSumMismatchError(RestakeError):
    code = "share-sum-mismatch"


class UnknownParentError(RestakeError):
    code = "unknown-parent"


class MalformedSplitError(RestakeError):
    """Fewer than two parts, duplicate ids, or negative shares."""
    code = "malformed-split"


class InstanceTooLargeError(RestakeError):
    code = "instance-too-large"


# ═══════════════════════════════════════════════════════════════
# Mechanisms
# ═══════════════════════════════════════════════════════════════

class UnknownGroupError(RestakeError):
    code = "unknown-group"


class NonType2SplitError(RestakeError):
    code = "non-type2-split"


class FeasibilityBrokenError(RestakeError):
    code = "feasibility-broken"


class StakeOutOfRangeError(RestakeError):
    code = "x-out-of-range"


class ResidualNegativeError(RestakeError):
    code = "residual-negative"


class InfeasibleProgramError(RestakeError):
    code = "infeasible-program"


class NonBindingInputError(RestakeError):
    code = "non-binding-input"


class AltRuleInfeasibleError(RestakeError):
    code = "alt-rule-infeasible"


# ═══════════════════════════════════════════════════════════════
# Strategy
# ═══════════════════════════════════════════════════════════════

class DegenerateBoundaryError(RestakeError):
    code = "degenerate-boundary"


class NoDeviationFoundError(RestakeError):
    code = "no-deviation-found"


class NoConvergenceError(RestakeError):
    code = "no-convergence"

    def __init__(self, message: str = "", last_profile=None):
        super().__init__(message)
        self.last_profile = last_profile


# ═══════════════════════════════════════════════════════════════
# Random networks
# ═══════════════════════════════════════════════════════════════

class AlphaDegenerateError(RestakeError):
    code = "alpha-degenerate"


class InvalidSybilCountError(RestakeError):
    code = "invalid-sybil-count"


class NotErdosRenyiError(RestakeError):
    code = "not-er"


class ZeroCoalitionStakeError(RestakeError):
    code = "zero-coalition-stake"


class EmptyBlockError(RestakeError):
    code = "empty-block"


# ═══════════════════════════════════════════════════════════════
# Files
# ═══════════════════════════════════════════════════════════════

class ParseError(RestakeError):
    """Input file could not be parsed. Carries 1-based line/column when known."""
    code = "parse-error"

    def __init__(self, message: str = "", line: int | None = None, column: int | None = None):
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)
        self.line = line
        self.column = column


class ConfigError(RestakeError):
    code = "config-error"
