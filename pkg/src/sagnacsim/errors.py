"""Exception hierarchy.

Input problems derive from ``ValueError`` so callers can catch them the
usual way; the CLI maps them to exit code 2. Numerical failures (no root,
optimizer breakdown) map to exit code 3.
"""


class SagnacSimError(Exception):
    pass


class ValidationError(SagnacSimError, ValueError):
    """A configuration or argument failed validation."""


class DomainError(ValidationError):
    """A wavelength fell outside a dispersion table's validity window."""


class NumericalError(SagnacSimError, RuntimeError):
    pass


class BracketError(NumericalError):
    """The root-finding bracket does not contain a sign change."""


class QPMError(NumericalError):
    """Quasi-phase-matching is undefined (zero birefringent mismatch)."""


class ConvergenceError(NumericalError):
    pass
