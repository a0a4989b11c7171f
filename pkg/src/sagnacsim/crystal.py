"""KTP dispersion, group velocities, group-velocity matching and QPM.

Wavelengths in this module are in micrometres. Wave numbers are in
rad/um. All functions accept scalars or numpy arrays.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from functools import lru_cache
from importlib import resources
from typing import Mapping

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT
from scipy.optimize import brentq

from .errors import BracketError, DomainError, QPMError, ValidationError

DERIVATIVE_STEP_UM = 1e-4
ROOT_XTOL_UM = 1e-12
ROOT_MAXITER = 200

# y-axis table used by each regime; z always uses the Fradkin fit
REGIME_SELLMEIER = {
    "telecom": {"y": "Konig-y", "z": "Fradkin-z"},
    "800": {"y": "Fan-y", "z": "Fradkin-z"},
}

_ALIASES = {"König-y": "Konig-y", "Koenig-y": "Konig-y"}


@dataclass(frozen=True)
class SellmeierSet:
    """Closed-form index fit for one principal axis.

    ``n^2 = A + B1/(1 - C1/l^2) + B2/(1 - C2/l^2) - D l^2`` with ``l`` in um.
    """

    name: str
    axis: str
    source: str
    window: tuple[float, float]
    A: float
    B1: float
    C1: float
    B2: float = 0.0
    C2: float = 0.0
    D: float = 0.0

    def __post_init__(self):
        if self.axis not in ("y", "z"):
            raise ValidationError(f"axis must be 'y' or 'z', got {self.axis!r}")
        lo, hi = self.window
        if not 0 < lo < hi:
            raise ValidationError(f"bad validity window {self.window}")

    def check_window(self, wavelength_um, strict=False):
        lam = np.asarray(wavelength_um, dtype=float)
        lo, hi = self.window
        if strict:
            bad = (lam <= lo) | (lam >= hi)
        else:
            bad = (lam < lo) | (lam > hi)
        if np.any(bad) or not np.all(np.isfinite(lam)):
            worst = lam[bad].flat[0] if np.any(bad) else float("nan")
            raise DomainError(
                f"{self.source}: wavelength {worst:g} um outside validity "
                f"window [{lo:g}, {hi:g}] um"
            )

    def _index(self, lam):
        l2 = lam * lam
        n2 = self.A + self.B1 / (1.0 - self.C1 / l2) - self.D * l2
        if self.B2:
            n2 = n2 + self.B2 / (1.0 - self.C2 / l2)
        return np.sqrt(n2)


@lru_cache(maxsize=None)
def _load_tables() -> dict[str, SellmeierSet]:
    parser = configparser.ConfigParser()
    text = resources.files("sagnacsim").joinpath("data/sellmeier.ini").read_text(
        encoding="utf-8"
    )
    parser.read_string(text)
    tables = {}
    for name in parser.sections():
        sec = parser[name]
        lo, hi = (float(v) for v in sec["window_um"].split(","))
        tables[name] = SellmeierSet(
            name=name,
            axis=sec["axis"].strip(),
            source=sec["source"].strip(),
            window=(lo, hi),
            **{k: sec.getfloat(k, 0.0) for k in ("A", "B1", "C1", "B2", "C2", "D")},
        )
    return tables


def sellmeier_sets() -> dict[str, SellmeierSet]:
    """All shipped coefficient sets keyed by section name."""
    return dict(_load_tables())


def get_sellmeier(name: str) -> SellmeierSet:
    tables = _load_tables()
    key = _ALIASES.get(name, name)
    if key not in tables:
        for s in tables.values():
            if s.source == name:
                return s
        raise ValidationError(f"unknown Sellmeier set {name!r}; have {sorted(tables)}")
    return tables[key]


def refractive_index(s: SellmeierSet, wavelength_um):
    """Phase index n(l); raises DomainError outside the set's window."""
    s.check_window(wavelength_um)
    n = s._index(np.asarray(wavelength_um, dtype=float))
    return float(n) if np.ndim(n) == 0 else n


def group_index(s: SellmeierSet, wavelength_um, step_um=DERIVATIVE_STEP_UM):
    """Group index n - l dn/dl.

    dn/dl uses the fourth-order central difference with step ``step_um``;
    the second-order stencil drifts by ~3e-8 under step halving near 0.4 um.
    """
    s.check_window(wavelength_um, strict=True)
    lam = np.asarray(wavelength_um, dtype=float)
    lo, hi = s.window
    if np.any(lam - 2 * step_um < lo) or np.any(lam + 2 * step_um > hi):
        raise DomainError(
            f"{s.source}: derivative stencil leaves window [{lo:g}, {hi:g}] um"
        )
    h = step_um
    dn = (
        -s._index(lam + 2 * h) + 8 * s._index(lam + h) - 8 * s._index(lam - h) + s._index(lam - 2 * h)
    ) / (12.0 * h)
    ng = s._index(lam) - lam * dn
    return float(ng) if np.ndim(ng) == 0 else ng


@dataclass(frozen=True)
class CrystalConfig:
    """Periodically poled KTP crystal in a type-II collinear geometry.

    ``axes`` maps pump/signal/idler onto crystal axes. ``grating_sign``
    orients the poling grating vector: the QPM mismatch is
    ``k_p - k_s - k_i - grating_sign * 2 pi / period``. ``None`` picks the
    orientation that cancels the birefringent mismatch at each point.
    """

    length_mm: float = 30.0
    poling_period_um: float = 46.1
    axes: Mapping[str, str] = field(
        default_factory=lambda: {"pump": "y", "signal": "y", "idler": "z"}
    )
    regime: str = "telecom"
    sellmeier: Mapping[str, str] | None = None
    temperature_c: float = 32.5
    grating_sign: int | None = None

    def __post_init__(self):
        if not self.length_mm > 0:
            raise ValidationError("crystal length must be positive")
        if not self.poling_period_um > 0:
            raise ValidationError("poling period must be positive")
        if self.regime not in REGIME_SELLMEIER:
            raise ValidationError(
                f"regime must be one of {sorted(REGIME_SELLMEIER)}, got {self.regime!r}"
            )
        if set(self.axes) != {"pump", "signal", "idler"}:
            raise ValidationError("axes must assign pump, signal and idler")
        if any(a not in ("y", "z") for a in self.axes.values()):
            raise ValidationError("axis labels must be 'y' or 'z'")
        if self.axes["signal"] == self.axes["idler"]:
            raise ValidationError("type-II needs signal and idler on different axes")
        if self.grating_sign not in (None, 1, -1):
            raise ValidationError("grating_sign must be +1, -1 or None")

    def table(self, wave: str) -> SellmeierSet:
        axis = self.axes[wave]
        names = dict(REGIME_SELLMEIER[self.regime])
        if self.sellmeier:
            names.update(self.sellmeier)
        return get_sellmeier(names[axis])

    def with_period(self, period_um: float, grating_sign: int | None = None):
        return replace(self, poling_period_um=period_um, grating_sign=grating_sign)


def telecom_crystal(**kw) -> CrystalConfig:
    return CrystalConfig(**kw)


def band800_crystal(**kw) -> CrystalConfig:
    kw.setdefault("regime", "800")
    kw.setdefault("poling_period_um", 9.27)
    return CrystalConfig(**kw)


def wavenumber(s: SellmeierSet, wavelength_um):
    lam = np.asarray(wavelength_um, dtype=float)
    return 2.0 * np.pi * refractive_index(s, lam) / lam


def inverse_group_velocity(s: SellmeierSet, wavelength_um):
    """1/V_g in s/m."""
    return group_index(s, wavelength_um) / SPEED_OF_LIGHT


def gvm_residual(c: CrystalConfig, pump_um):
    """2/V_g,p - 1/V_g,s - 1/V_g,i (s/m) for degenerate down-conversion."""
    pump_um = np.asarray(pump_um, dtype=float)
    r = (
        2.0 * inverse_group_velocity(c.table("pump"), pump_um)
        - inverse_group_velocity(c.table("signal"), 2.0 * pump_um)
        - inverse_group_velocity(c.table("idler"), 2.0 * pump_um)
    )
    return float(r) if np.ndim(r) == 0 else r


def find_gvm_pump(c: CrystalConfig, bracket=(0.75, 0.85)) -> float:
    """Pump wavelength (um) satisfying the GVM condition, by bracketing."""
    a, b = bracket
    fa, fb = gvm_residual(c, a), gvm_residual(c, b)
    if fa == 0.0:
        return float(a)
    if fb == 0.0:
        return float(b)
    if np.sign(fa) == np.sign(fb):
        raise BracketError(
            f"GVM residual has the same sign at {a:g} and {b:g} um "
            f"({fa:.3e}, {fb:.3e} s/m)"
        )
    return float(
        brentq(lambda x: gvm_residual(c, x), a, b, xtol=ROOT_XTOL_UM, rtol=1e-15,
               maxiter=ROOT_MAXITER)
    )


def pump_wavelength(signal_um, idler_um):
    """Energy conservation: 1/l_p = 1/l_s + 1/l_i."""
    s = np.asarray(signal_um, dtype=float)
    i = np.asarray(idler_um, dtype=float)
    return s * i / (s + i)


def birefringent_mismatch(c: CrystalConfig, signal_um, idler_um):
    """k_p - k_s - k_i (rad/um) without the grating term."""
    lp = pump_wavelength(signal_um, idler_um)
    return (
        wavenumber(c.table("pump"), lp)
        - wavenumber(c.table("signal"), signal_um)
        - wavenumber(c.table("idler"), idler_um)
    )


def qpm_mismatch(c: CrystalConfig, signal_um, idler_um):
    """Collinear QPM mismatch in rad/um."""
    dk = birefringent_mismatch(c, signal_um, idler_um)
    sign = np.sign(dk) if c.grating_sign is None else c.grating_sign
    out = dk - sign * 2.0 * np.pi / c.poling_period_um
    return float(out) if np.ndim(out) == 0 else out


def poling_period_for(c: CrystalConfig, signal_um, idler_um) -> float:
    """First-order poling period (um) phase-matching the given pair."""
    dk = float(birefringent_mismatch(c, signal_um, idler_um))
    if dk == 0.0:
        raise QPMError("birefringent mismatch is zero; no grating needed")
    if c.grating_sign is not None and np.sign(dk) != c.grating_sign:
        raise QPMError(
            f"grating_sign={c.grating_sign:+d} cannot cancel a mismatch of sign "
            f"{int(np.sign(dk)):+d}"
        )
    return 2.0 * np.pi / abs(dk)


def phase_matched(c: CrystalConfig, pump_um: float) -> CrystalConfig:
    """Copy of ``c`` poled for degenerate emission at 2 * pump_um."""
    return replace(c, poling_period_um=poling_period_for(c, 2 * pump_um, 2 * pump_um))
