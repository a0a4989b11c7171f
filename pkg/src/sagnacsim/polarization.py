"""Two-photon polarization state of the Sagnac source and its noise models.

Basis ordering is ``{HH, HV, VH, VV}`` with the first photon (arm 1) as
the left tensor factor. Angles at the public interface are in degrees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10

TSIRELSON = 2.0 * math.sqrt(2.0)
CHSH_ANGLES = (0.0, 45.0, 22.5, 67.5)
# psi+ correlations depend on theta1 + theta2, so the b angles flip sign
CHSH_ANGLES_FOR = {"psi-": CHSH_ANGLES, "psi+": (0.0, 45.0, -22.5, -67.5)}

_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)

PSI_MINUS = np.array([0, 1, -1, 0], dtype=complex) / math.sqrt(2.0)
PSI_PLUS = np.array([0, 1, 1, 0], dtype=complex) / math.sqrt(2.0)
PHI_MINUS = np.array([1, 0, 0, -1], dtype=complex) / math.sqrt(2.0)
PHI_PLUS = np.array([1, 0, 0, 1], dtype=complex) / math.sqrt(2.0)
BELL_STATES = {"psi-": PSI_MINUS, "psi+": PSI_PLUS, "phi-": PHI_MINUS, "phi+": PHI_PLUS}


def bell_state(name: str) -> np.ndarray:
    try:
        return BELL_STATES[name.lower()].copy()
    except KeyError:
        raise ValidationError(f"unknown Bell state {name!r}; use one of {list(BELL_STATES)}")


@dataclass(frozen=True)
class TwoQubitState:
    """Validated 4x4 density matrix."""

    matrix: np.ndarray = field(repr=False)
    label: str = ""

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (4, 4):
            raise ValidationError(f"density matrix must be 4x4, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValidationError("density matrix has non-finite entries")
        if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL:
            raise ValidationError("density matrix is not Hermitian")
        if abs(np.trace(m).real - 1.0) > TRACE_TOL:
            raise ValidationError(f"density matrix trace {np.trace(m).real:.15f} != 1")
        if np.linalg.eigvalsh(m).min() < -PSD_TOL:
            raise ValidationError("density matrix is not positive semidefinite")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_ket(cls, ket, label=""):
        v = np.asarray(ket, dtype=complex)
        v = v / np.linalg.norm(v)
        return cls(np.outer(v, v.conj()), label)

    @classmethod
    def maximally_mixed(cls):
        return cls(np.eye(4) / 4.0, "I/4")

    @property
    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    @property
    def kind(self) -> str:
        return "pure" if self.purity > 1.0 - 1e-9 else "mixed"


def _hermitize(m):
    m = 0.5 * (m + m.conj().T)
    return m / np.trace(m).real


@dataclass(frozen=True)
class SagnacParams:
    """Relative phase (rad) between loop directions and pump amplitude ratio."""

    phase: float = math.pi
    ratio: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.ratio) and self.ratio >= 0):
            raise ValidationError("pump ratio must be finite and non-negative")
        if not math.isfinite(self.phase):
            raise ValidationError("phase must be finite")
        object.__setattr__(self, "phase", self.phase % (2.0 * math.pi))


@dataclass(frozen=True)
class NoiseParams:
    """Knobs degrading the ideal source state.

    ``white`` is a depolarizing weight; ``mean_pairs`` and
    ``multipair_coeff`` set the multi-pair weight; ``extinction_ratio``
    is the loop PBS extinction (200 means 200:1, ``inf`` disables it);
    ``phase_error`` (rad) is the residual uncompensated loop phase.
    """

    white: float = 0.0
    mean_pairs: float = 0.0
    multipair_coeff: float = 0.0
    extinction_ratio: float = math.inf
    phase_error: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.white <= 1.0:
            raise ValidationError("white-noise weight must lie in [0, 1]")
        if self.mean_pairs < 0 or self.multipair_coeff < 0:
            raise ValidationError("mean pair number and multipair coefficient must be >= 0")
        if not self.extinction_ratio > 1:
            raise ValidationError("extinction ratio must exceed 1")


def sagnac_state(p: SagnacParams) -> TwoQubitState:
    """Pure state proportional to |HV> + exp(i phase) ratio |VH>."""
    ket = np.zeros(4, dtype=complex)
    ket[1] = 1.0
    ket[2] = np.exp(1j * p.phase) * p.ratio
    return TwoQubitState.from_ket(ket, "sagnac")


def depolarize(rho: TwoQubitState, weight: float) -> TwoQubitState:
    """(1 - w) rho + w I/4."""
    if not 0.0 <= weight <= 1.0:
        raise ValidationError(f"depolarizing weight {weight} outside [0, 1]")
    m = (1.0 - weight) * rho.matrix + weight * np.eye(4) / 4.0
    return TwoQubitState(_hermitize(m), rho.label)


def multipair_epsilon(mean_pairs: float, coeff: float) -> float:
    """White-noise weight from multi-pair emission, linear in pairs per pulse."""
    if mean_pairs < 0:
        raise ValidationError("mean pair number must be non-negative")
    return min(1.0, coeff * mean_pairs)


def apply_kraus(rho: TwoQubitState, kraus) -> TwoQubitState:
    """sum_k K rho K^dagger; the operators must satisfy sum_k K^dagger K = I."""
    ks = [np.asarray(k, dtype=complex) for k in kraus]
    if not ks or any(k.shape != (4, 4) for k in ks):
        raise ValidationError("Kraus operators must be a non-empty list of 4x4 matrices")
    completeness = sum(k.conj().T @ k for k in ks)
    if np.max(np.abs(completeness - np.eye(4))) > 1e-9:
        raise ValidationError("Kraus operators are not trace preserving")
    m = sum(k @ rho.matrix @ k.conj().T for k in ks)
    return TwoQubitState(_hermitize(m), rho.label)


def _local_kraus(q):
    return [math.sqrt(1.0 - q) * _I2, math.sqrt(q) * _X]


def pbs_leak(rho: TwoQubitState, extinction_ratio: float) -> TwoQubitState:
    """Both photons leak into the orthogonal polarization w.p. 1/(1+r)."""
    if not extinction_ratio > 1:
        raise ValidationError("extinction ratio must exceed 1")
    if math.isinf(extinction_ratio):
        return rho
    ks = _local_kraus(1.0 / (1.0 + extinction_ratio))
    return apply_kraus(rho, [np.kron(a, b) for a in ks for b in ks])


def source_state(p: SagnacParams, noise: NoiseParams, include_multipair=True) -> TwoQubitState:
    """Sagnac output with phase error, white noise, multi-pair noise, then PBS leak."""
    rho = sagnac_state(SagnacParams(p.phase + noise.phase_error, p.ratio))
    rho = depolarize(rho, noise.white)
    if include_multipair:
        rho = depolarize(rho, multipair_epsilon(noise.mean_pairs, noise.multipair_coeff))
    return pbs_leak(rho, noise.extinction_ratio)


def polarizer_ket(theta_deg: float) -> np.ndarray:
    t = math.radians(theta_deg)
    return np.array([math.cos(t), math.sin(t)], dtype=complex)


def coincidence_prob(rho: TwoQubitState, theta1: float, theta2: float) -> float:
    """Probability both photons pass linear polarizers at theta1, theta2."""
    k = np.kron(polarizer_ket(theta1), polarizer_ket(theta2))
    p = float(np.real(k.conj() @ rho.matrix @ k))
    return min(1.0, max(0.0, p))


def fringe(rho: TwoQubitState, theta1: float, sweep) -> np.ndarray:
    sweep = list(sweep)
    if not sweep:
        raise ValidationError("fringe needs a non-empty polarizer sweep")
    return np.array([coincidence_prob(rho, theta1, t) for t in sweep])


def visibility(curve) -> float:
    curve = np.asarray(curve, dtype=float)
    if curve.size < 2:
        raise ValidationError("visibility needs at least two points")
    hi, lo = curve.max(), curve.min()
    if hi + lo <= 0:
        raise ValidationError("visibility undefined for an all-zero curve")
    return float((hi - lo) / (hi + lo))


def correlation(rho: TwoQubitState, theta1: float, theta2: float) -> float:
    """E = p(a,b) + p(a+,b+) - p(a,b+) - p(a+,b), + meaning +90 degrees."""
    p = coincidence_prob
    return (
        p(rho, theta1, theta2)
        + p(rho, theta1 + 90, theta2 + 90)
        - p(rho, theta1, theta2 + 90)
        - p(rho, theta1 + 90, theta2)
    )


def chsh_S(rho: TwoQubitState, a=0.0, a_prime=45.0, b=22.5, b_prime=67.5) -> float:
    E = correlation
    return abs(E(rho, a, b) - E(rho, a, b_prime) + E(rho, a_prime, b) + E(rho, a_prime, b_prime))
