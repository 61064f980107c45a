"""Exception types shared across the package.

Every failure mode that callers are expected to branch on gets its own
class. The CLI maps these onto exit codes, so keep the hierarchy flat.
"""


class RiskRulesError(Exception):
    """Base class for all package errors."""


class StructuralError(RiskRulesError):
    """Shape, length, or index mismatch in model data."""


class DomainError(RiskRulesError):
    """Parameter outside its admissible domain (weights, alpha, mode)."""


class SizeError(RiskRulesError):
    """Enumeration would exceed the configured cap."""


class InfeasibleError(RiskRulesError):
    """No feasible decision exists for the request."""


class DegenerateLPError(RiskRulesError):
    """Simplex pivot fell below the numerical tolerance."""


class RankDeficientError(RiskRulesError):
    """Training points do not admit exact separation (augmented rank < count)."""


class GenerationStallError(RiskRulesError):
    """Rejection sampler acceptance rate collapsed or cap exceeded."""
