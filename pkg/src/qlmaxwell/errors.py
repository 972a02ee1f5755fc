"""Exception hierarchy. Each class carries a stable ``code`` used by the CLI."""
from __future__ import annotations


class QLMaxwellError(Exception):
    code = "error"
    exit_status = 1

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.details = details


class ConfigInvalid(QLMaxwellError):
    code = "config-invalid"
    exit_status = 2


class GridTooSmall(QLMaxwellError):
    code = "grid-too-small"
    exit_status = 7


class ShapeMismatch(QLMaxwellError):
    code = "shape-mismatch"
    exit_status = 7


class ZetaDomainViolation(QLMaxwellError):
    code = "zeta-domain-violation"
    exit_status = 6


class LawInvalid(QLMaxwellError):
    code = "law-invalid"
    exit_status = 2


class DomainViolation(QLMaxwellError):
    code = "domain-violation"
    exit_status = 6


class OrderExceeded(QLMaxwellError):
    code = "order-exceeds-derivative-data"
    exit_status = 7


class SingularCoefficient(QLMaxwellError):
    code = "singular-A0"
    exit_status = 7


class NonSmoothInput(QLMaxwellError):
    code = "non-smooth-input"
    exit_status = 7


class CFLViolation(QLMaxwellError):
    code = "cfl-violation"
    exit_status = 7


class CoefficientInvariantFailure(QLMaxwellError):
    code = "coefficient-invariant-failure"
    exit_status = 7


class NaNDetected(QLMaxwellError):
    code = "nan-detected"
    exit_status = 7


class DomainExit(QLMaxwellError):
    code = "domain-exit"
    exit_status = 6


class BallExit(QLMaxwellError):
    code = "ball-exit"
    exit_status = 6


class CompatFailure(QLMaxwellError):
    code = "compat-failure"
    exit_status = 4


class NoContraction(QLMaxwellError):
    code = "no-contraction"
    exit_status = 5


class PreconditionFailure(QLMaxwellError):
    code = "precondition-failure"
    exit_status = 6


class KTooLarge(QLMaxwellError):
    code = "k-too-large-for-grid"
    exit_status = 7


class DegenerateChart(QLMaxwellError):
    code = "degenerate-chart"
    exit_status = 7


class PositivityLost(QLMaxwellError):
    code = "positivity-lost"
    exit_status = 7


class IdentityViolation(QLMaxwellError):
    code = "identity-violation"
    exit_status = 7
