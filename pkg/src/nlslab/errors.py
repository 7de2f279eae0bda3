"""Exception types shared across the package.

Every failure mode that a caller might want to catch programmatically gets
its own class; the CLI maps NumericalError subclasses to exit code 3.
"""


class NumericalError(Exception):
    """Base class for numerical failures (exit code 3 in the CLI)."""


class NoModeFound(NumericalError):
    """No gap eigenvalue found in (tol_edge, omega - tol_edge)."""


class EdgeMode(NumericalError):
    """Eigenvalue within tol_edge of the essential-spectrum edge."""


class IntegrationFailure(NumericalError):
    """ODE integration blew up or did not reach the requested endpoint."""


class EmbeddedTooCloseToEdge(NumericalError):
    """2*lambda - 1 too small: oscillatory tail unresolvable."""


class MatchingFailure(NumericalError):
    """Growing-mode extraction at the matching point is ill-conditioned."""


class NonIntegrable(NumericalError):
    """Integrability margin 2 - p - 2*sqrt(1-lambda) not negative."""


class IllConditioned(NumericalError):
    """Linear system condition number exceeds the configured threshold."""


class BadZ(NumericalError):
    """|z| outside the validity radius delta_1 of the refined profile."""


class NoConvergence(NumericalError):
    """Newton iteration failed to converge within max_iter."""


class OutsideTube(NumericalError):
    """Remainder norm exceeds the orbital-stability tube radius."""


class GramSingular(NumericalError):
    """Biorthogonal Gram matrix is numerically singular."""


class BlowupDetected(NumericalError):
    """Sup norm of the evolved field grew past the blowup guard."""


class InsufficientSignal(NumericalError):
    """Monitored quantity below noise floor; fit would be meaningless."""


class SchemaError(Exception):
    """CSV/JSON input does not match its declared schema (exit code 1)."""
