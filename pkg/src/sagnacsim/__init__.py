"""Simulation toolkit for a pulsed Sagnac-loop polarization-entangled photon source.

Modules: ``crystal`` (KTP dispersion, GVM, QPM), ``spectral`` (joint
spectrum and purity), ``polarization`` (two-qubit source states),
``counting`` (Poisson coincidence simulation), ``tomography`` (state
reconstruction) and ``cli``.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402,F401
    ConvergenceError,
    DomainError,
    NumericalError,
    SagnacSimError,
    ValidationError,
)
