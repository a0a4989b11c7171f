"""Joint spectral amplitude of type-II SPDC and its Schmidt decomposition.

Wavelengths here are in nm (the crystal module works in um). Angular
frequencies are in rad/ps.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .crystal import CrystalConfig, qpm_mismatch
from .errors import ValidationError

C_NM_PER_PS = 299792.458
TIME_BANDWIDTH_GAUSSIAN = 0.441

# grid half-span (nm) around degeneracy, roughly 5x the marginal FWHM
DEFAULT_HALF_SPAN_NM = {"telecom": 6.0, "800": 1.0}
DEFAULT_GRID_POINTS = 256
DEFAULT_SCAN_STEPS = 25


def angular_frequency(wavelength_nm):
    return 2.0 * np.pi * C_NM_PER_PS / np.asarray(wavelength_nm, dtype=float)


def fwhm_nm_to_ps(center_nm: float, fwhm_nm: float) -> float:
    """Transform-limited Gaussian pulse duration (FWHM, ps)."""
    if not fwhm_nm > 0:
        raise ValidationError("spectral FWHM must be positive")
    return TIME_BANDWIDTH_GAUSSIAN * center_nm**2 / (C_NM_PER_PS * fwhm_nm)


@dataclass(frozen=True)
class PumpConfig:
    center_nm: float = 775.0
    fwhm_nm: float = 0.4
    shape: str = "gaussian"

    def __post_init__(self):
        if not self.center_nm > 0:
            raise ValidationError("pump center wavelength must be positive")
        if not self.fwhm_nm > 0:
            raise ValidationError("pump FWHM must be positive")
        if self.shape != "gaussian":
            raise ValidationError(f"unsupported pump shape {self.shape!r}")

    @property
    def fwhm_rad_per_ps(self) -> float:
        return 2.0 * np.pi * C_NM_PER_PS * self.fwhm_nm / self.center_nm**2

    @property
    def sigma_rad_per_ps(self) -> float:
        # |alpha|^2 = exp(-d^2 / sigma^2) is 1/2 at d = FWHM / 2
        return self.fwhm_rad_per_ps / (2.0 * np.sqrt(np.log(2.0)))

    @property
    def duration_ps(self) -> float:
        return fwhm_nm_to_ps(self.center_nm, self.fwhm_nm)


@dataclass(frozen=True)
class SpectralGrid:
    signal_range_nm: tuple[float, float]
    n_signal: int
    idler_range_nm: tuple[float, float]
    n_idler: int

    def __post_init__(self):
        for lo, hi in (self.signal_range_nm, self.idler_range_nm):
            if not 0 < lo < hi:
                raise ValidationError(f"grid range must be positive and ordered: {(lo, hi)}")
        if self.n_signal < 2 or self.n_idler < 2:
            raise ValidationError("grid needs at least 2 points per axis")

    @classmethod
    def centered(cls, center_nm, half_span_nm, n=DEFAULT_GRID_POINTS):
        r = (center_nm - half_span_nm, center_nm + half_span_nm)
        return cls(r, n, r, n)

    @property
    def signal_nm(self):
        return np.linspace(*self.signal_range_nm, self.n_signal)

    @property
    def idler_nm(self):
        return np.linspace(*self.idler_range_nm, self.n_idler)

    @property
    def cell_area(self) -> float:
        ds = (self.signal_range_nm[1] - self.signal_range_nm[0]) / (self.n_signal - 1)
        di = (self.idler_range_nm[1] - self.idler_range_nm[0]) / (self.n_idler - 1)
        return ds * di

    def mesh(self):
        return np.meshgrid(self.signal_nm, self.idler_nm, indexing="ij")


def default_grid(crystal: CrystalConfig, pump: PumpConfig, n=DEFAULT_GRID_POINTS):
    return SpectralGrid.centered(
        2.0 * pump.center_nm, DEFAULT_HALF_SPAN_NM[crystal.regime], n
    )


@dataclass(frozen=True)
class JointSpectrum:
    """Complex JSA sampled on ``grid``; rows index signal, columns idler."""

    grid: SpectralGrid
    amplitude: np.ndarray = field(repr=False)
    normalized: bool = True

    @property
    def intensity(self):
        return np.abs(self.amplitude) ** 2

    def norm(self) -> float:
        return float(np.sum(self.intensity) * self.grid.cell_area)


@dataclass(frozen=True)
class SchmidtResult:
    coefficients: np.ndarray
    purity: float

    @property
    def schmidt_number(self) -> float:
        return 1.0 / self.purity


def pump_envelope(p: PumpConfig, signal_nm, idler_nm):
    """Gaussian pump amplitude in the sum frequency, peak 1 on the energy ridge."""
    detuning = angular_frequency(signal_nm) + angular_frequency(idler_nm) - angular_frequency(
        p.center_nm
    )
    return np.exp(-(detuning**2) / (2.0 * p.sigma_rad_per_ps**2))


def phasematching_amplitude(c: CrystalConfig, signal_nm, idler_nm):
    """sinc(dk L/2) exp(i dk L/2) for a crystal of length ``c.length_mm``."""
    dk = qpm_mismatch(c, np.asarray(signal_nm) * 1e-3, np.asarray(idler_nm) * 1e-3)
    x = np.asarray(dk) * c.length_mm * 1e3 / 2.0
    return np.sinc(x / np.pi) * np.exp(1j * x)


def compute_jsa(c: CrystalConfig, p: PumpConfig, g: SpectralGrid) -> JointSpectrum:
    s, i = g.mesh()
    f = pump_envelope(p, s, i) * phasematching_amplitude(c, s, i)
    norm = np.sum(np.abs(f) ** 2) * g.cell_area
    if not norm > 0:
        raise ValidationError("joint spectrum vanishes on the grid")
    return JointSpectrum(g, f / np.sqrt(norm), True)


def schmidt(j: JointSpectrum) -> SchmidtResult:
    """Schmidt coefficients and spectral purity from the JSA singular values."""
    sv = np.linalg.svd(j.amplitude, compute_uv=False)
    weight = sv**2
    total = weight.sum()
    if not total > 0:
        raise ValidationError("cannot decompose an all-zero joint spectrum")
    lam = weight / total
    return SchmidtResult(lam, float(np.sum(lam**2)))


@dataclass(frozen=True)
class PurityScan:
    fwhm_nm: np.ndarray
    purity: np.ndarray

    @property
    def best_index(self) -> int:
        return int(np.argmax(self.purity))

    @property
    def best_fwhm_nm(self) -> float:
        return float(self.fwhm_nm[self.best_index])

    @property
    def best_purity(self) -> float:
        return float(self.purity[self.best_index])


def purity_scan(
    c: CrystalConfig,
    p0: PumpConfig,
    fwhm_range,
    steps: int = DEFAULT_SCAN_STEPS,
    g: SpectralGrid | None = None,
    workers: int = 1,
) -> PurityScan:
    """Purity versus pump bandwidth over a log-spaced FWHM ladder."""
    lo, hi = fwhm_range
    if not 0 < lo < hi:
        raise ValidationError(f"FWHM range must be positive and ordered: {fwhm_range}")
    if steps < 3:
        raise ValidationError("purity scan needs at least 3 steps")
    g = g or default_grid(c, p0)
    ladder = np.geomspace(lo, hi, steps)

    def one(width):
        pump = PumpConfig(p0.center_nm, float(width), p0.shape)
        return schmidt(compute_jsa(c, pump, g)).purity

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            values = list(ex.map(one, ladder))
    else:
        values = [one(w) for w in ladder]
    return PurityScan(ladder, np.asarray(values))


@dataclass(frozen=True)
class Marginal:
    wavelength_nm: np.ndarray
    spectrum: np.ndarray
    fwhm_nm: float


def fwhm(x, y) -> float:
    """Full width at half maximum with linear interpolation at the crossings."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        raise ValidationError("need at least two samples for a width")
    k = int(np.argmax(y))
    half = y[k] / 2.0
    left = k
    while left > 0 and y[left - 1] > half:
        left -= 1
    right = k
    while right < y.size - 1 and y[right + 1] > half:
        right += 1
    if left == 0:
        xl = x[0]
    else:
        xl = np.interp(half, [y[left - 1], y[left]], [x[left - 1], x[left]])
    if right == y.size - 1:
        xr = x[-1]
    else:
        xr = np.interp(half, [y[right + 1], y[right]], [x[right + 1], x[right]])
    return float(xr - xl)


def marginals(j: JointSpectrum) -> tuple[Marginal, Marginal]:
    """Normalized signal and idler spectra with their FWHMs."""
    if min(j.amplitude.shape) < 2:
        raise ValidationError("marginals need a grid with at least two points per axis")
    inten = j.intensity
    sig = inten.sum(axis=1)
    idl = inten.sum(axis=0)
    sig = sig / sig.sum()
    idl = idl / idl.sum()
    return (
        Marginal(j.grid.signal_nm, sig, fwhm(j.grid.signal_nm, sig)),
        Marginal(j.grid.idler_nm, idl, fwhm(j.grid.idler_nm, idl)),
    )
