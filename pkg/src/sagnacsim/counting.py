"""Poissonian coincidence-count simulation and count-based estimators.

Multi-pair emission is folded into the rate model: a fraction
``eps = multipair_coeff * mean_pairs`` of coincidences is uncorrelated
and, together with the flat dark/accidental rate, forms the background
that background subtraction removes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError
from .polarization import CHSH_ANGLES, TwoQubitState, coincidence_prob, multipair_epsilon


@dataclass(frozen=True)
class RateModel:
    """Source brightness and detection parameters.

    ``reference_coincidence_cps`` is the coincidence rate without
    polarizers at ``reference_power_mw``; it already includes all
    efficiencies, which are kept for diagnostics.
    """

    pump_power_mw: float = 10.0
    reference_power_mw: float = 10.0
    reference_coincidence_cps: float = 20000.0
    reference_mean_pairs: float = 0.014
    multipair_coeff: float = 0.983
    background_cps: float = 0.5
    efficiency_1: float = 0.70
    efficiency_2: float = 0.68
    overall_efficiency: float = 0.10
    dark_cps: float = 1000.0
    repetition_hz: float = 76e6
    dead_time_s: float = 40e-9
    jitter_s: float = 68e-12
    apply_dead_time: bool = False

    def __post_init__(self):
        for name in (
            "pump_power_mw",
            "reference_coincidence_cps",
            "reference_mean_pairs",
            "multipair_coeff",
            "background_cps",
            "dark_cps",
            "repetition_hz",
            "dead_time_s",
            "jitter_s",
        ):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be non-negative")
        if not self.reference_power_mw > 0:
            raise ValidationError("reference_power_mw must be positive")
        for name in ("efficiency_1", "efficiency_2", "overall_efficiency"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1]")

    def at_power(self, power_mw: float) -> "RateModel":
        return replace(self, pump_power_mw=power_mw)

    def pair_rate(self) -> float:
        """Detected coincidences per second without polarizers."""
        return self.reference_coincidence_cps * self.pump_power_mw / self.reference_power_mw

    def mean_pairs(self) -> float:
        return self.reference_mean_pairs * self.pump_power_mw / self.reference_power_mw

    def multipair_weight(self) -> float:
        return multipair_epsilon(self.mean_pairs(), self.multipair_coeff)

    def background_rate(self) -> float:
        """Rate removed by background subtraction, identical for every setting."""
        return self.background_cps + self.pair_rate() * self.multipair_weight() / 4.0

    def generated_pair_rate(self) -> float:
        """Pairs per second at the crystal, inferred from the detection efficiency."""
        eta = self.overall_efficiency**2
        return self.pair_rate() / eta if eta > 0 else math.inf


@dataclass(frozen=True)
class AngleSetting:
    """Linear polarizers at theta1, theta2 degrees."""

    theta1: float
    theta2: float

    @property
    def label(self) -> str:
        return f"{self.theta1:g}/{self.theta2:g}"

    def probability(self, rho: TwoQubitState) -> float:
        return coincidence_prob(rho, self.theta1, self.theta2)


@dataclass(frozen=True)
class CountRecord:
    setting_id: str
    theta1: float
    theta2: float
    time_s: float
    counts: float
    expected_rate: float | None = None

    def __post_init__(self):
        if not self.time_s > 0:
            raise ValidationError("accumulation time must be positive")
        if self.counts < 0:
            raise ValidationError("counts must be non-negative")


def expected_rate(rho: TwoQubitState, setting, m: RateModel) -> float:
    """Mean coincidence rate (cps) for a setting exposing ``probability(rho)``."""
    eps = m.multipair_weight()
    rate = m.pair_rate() * (1.0 - eps) * setting.probability(rho) + m.background_rate()
    if m.apply_dead_time:
        rate = rate / (1.0 + rate * m.dead_time_s)
    return rate


def substream(seed: int, index: int) -> np.random.Generator:
    """Independent generator for work unit ``index`` of run ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def _setting_angles(setting):
    return (
        float(getattr(setting, "theta1", math.nan)),
        float(getattr(setting, "theta2", math.nan)),
    )


def simulate_counts(
    rho: TwoQubitState, settings: Sequence, m: RateModel, time_s: float, seed: int
) -> list[CountRecord]:
    """One Poisson draw per setting from its own seeded substream."""
    if not time_s > 0:
        raise ValidationError("accumulation time must be positive")
    records = []
    for idx, s in enumerate(settings):
        rate = expected_rate(rho, s, m)
        n = int(substream(seed, idx).poisson(rate * time_s))
        t1, t2 = _setting_angles(s)
        records.append(CountRecord(s.label, t1, t2, time_s, n, rate))
    return records


def fringe_settings(theta1: float, sweep: Iterable[float]) -> list[AngleSetting]:
    return [AngleSetting(theta1, float(t)) for t in sweep]


def _net(record: CountRecord, background_cps: float) -> float:
    return record.counts - background_cps * record.time_s


def visibility_from_records(
    records: Sequence[CountRecord], background_cps: float = 0.0
) -> tuple[float, float]:
    """Fringe visibility from the extreme counts with first-order Poisson error.

    With ``background_cps`` > 0 the expected background is subtracted from
    each count first; the variance stays that of the raw count.
    """
    if len(records) < 2:
        raise ValidationError("visibility needs at least two records")
    net = np.array([_net(r, background_cps) for r in records])
    raw = np.array([r.counts for r in records], dtype=float)
    i_max, i_min = int(np.argmax(net)), int(np.argmin(net))
    hi, lo = net[i_max], net[i_min]
    denom = hi + lo
    if denom <= 0:
        raise ValidationError("visibility undefined: zero denominator")
    v = (hi - lo) / denom
    d_hi = 2.0 * lo / denom**2
    d_lo = -2.0 * hi / denom**2
    sigma = math.sqrt(d_hi**2 * raw[i_max] + d_lo**2 * raw[i_min])
    return float(v), float(sigma)


def chsh_settings(a=0.0, a_prime=45.0, b=22.5, b_prime=67.5) -> list[AngleSetting]:
    """The 16 polarizer pairs: 4 CHSH angle pairs x {++, --, +-, -+}."""
    out = []
    for x in (a, a_prime):
        for y in (b, b_prime):
            out += [
                AngleSetting(x, y),
                AngleSetting(x + 90, y + 90),
                AngleSetting(x, y + 90),
                AngleSetting(x + 90, y),
            ]
    return out


def _key(t1, t2):
    return (round(t1 % 360.0, 9), round(t2 % 360.0, 9))


def correlation_from_counts(npp, nmm, npm, nmp, raw=None) -> tuple[float, float]:
    """E and its Poisson error from the four coincidence numbers."""
    n = np.array([npp, nmm, npm, nmp], dtype=float)
    var = n if raw is None else np.asarray(raw, dtype=float)
    total = n.sum()
    if total <= 0:
        raise ValidationError("correlation undefined: no counts")
    signs = np.array([1.0, 1.0, -1.0, -1.0])
    e = float(signs @ n / total)
    grad = (signs - e) / total
    return e, float(math.sqrt(np.sum(grad**2 * var)))


def chsh_from_records(
    records: Sequence[CountRecord], background_cps: float = 0.0, angles=CHSH_ANGLES
) -> tuple[float, float]:
    """S = |E(a,b) - E(a,b') + E(a',b) + E(a',b')| with first-order error."""
    a, a_prime, b, b_prime = angles
    table = {}
    for r in records:
        table[_key(r.theta1, r.theta2)] = r

    def get(t1, t2):
        try:
            return table[_key(t1, t2)]
        except KeyError:
            raise ValidationError(f"missing CHSH setting ({t1:g}, {t2:g})")

    s, var = 0.0, 0.0
    for x, y, sign in ((a, b, 1), (a, b_prime, -1), (a_prime, b, 1), (a_prime, b_prime, 1)):
        recs = [get(x, y), get(x + 90, y + 90), get(x, y + 90), get(x + 90, y)]
        e, se = correlation_from_counts(
            *[_net(r, background_cps) for r in recs], raw=[r.counts for r in recs]
        )
        s += sign * e
        var += se**2
    return abs(s), math.sqrt(var)


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministic 32-bit child seed for a sub-run identified by ``keys``."""
    return int(np.random.SeedSequence(seed, spawn_key=tuple(keys)).generate_state(1)[0])
