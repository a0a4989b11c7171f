"""Run configuration: INI files with one section per model component.

A config argument is either a path to an INI file or the name of a
shipped preset (``telecom``, ``800nm``). Missing sections or keys fall
back to the telecom apparatus defaults.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from .counting import RateModel
from .crystal import CrystalConfig, phase_matched
from .errors import ValidationError
from .polarization import NoiseParams, SagnacParams
from .spectral import DEFAULT_HALF_SPAN_NM, PumpConfig, SpectralGrid

PRESETS = ("telecom", "800nm")
BELL_PHASES = {"psi-": math.pi, "psi+": 0.0}


@dataclass(frozen=True)
class RunConfig:
    crystal: CrystalConfig
    pump: PumpConfig
    grid: SpectralGrid
    scan_range_nm: tuple[float, float]
    scan_steps: int
    target: str
    sagnac: SagnacParams
    noise: NoiseParams
    rates: RateModel
    seed: int | None
    time_s: float = 1.0
    tomo_time_s: float = 10.0
    resamples: int = 50
    fringe_theta1: tuple[float, ...] = (0.0, 45.0, 90.0, 135.0)
    fringe_step_deg: float = 15.0
    powers_mw: tuple[float, ...] = (10, 20, 30, 40, 50, 60, 70, 80, 90, 100)
    sweep_theta1: float = 45.0
    fmt: str = "csv"
    source: str = ""
    raw: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.fmt not in ("csv", "json"):
            raise ValidationError(f"format must be csv or json, got {self.fmt!r}")
        if self.target not in BELL_PHASES:
            raise ValidationError(f"state must be one of {sorted(BELL_PHASES)}")
        if self.seed is not None and not 0 <= self.seed < 2**64:
            raise ValidationError("seed must be an unsigned 64-bit integer")

    def with_state(self, target: str) -> "RunConfig":
        return replace(
            self, target=target, sagnac=SagnacParams(BELL_PHASES[target], self.sagnac.ratio)
        )

    def noiseless(self) -> "RunConfig":
        return replace(
            self,
            noise=NoiseParams(),
            rates=replace(self.rates, multipair_coeff=0.0, background_cps=0.0),
        )

    def require_seed(self) -> int:
        if self.seed is None:
            raise ValidationError("a seed is required for stochastic commands (--seed)")
        return self.seed


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())


def _opt_float(sec, key, default):
    val = sec.get(key, fallback=None)
    return default if val is None else float(val)


def _auto(value: str | None):
    return value is None or value.strip().lower() in ("auto", "")


def _read_parser(source: str) -> tuple[configparser.ConfigParser, str]:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    if source in PRESETS:
        text = resources.files("sagnacsim").joinpath(f"presets/{source}.ini").read_text("utf-8")
        parser.read_string(text)
        return parser, f"preset:{source}"
    path = Path(source)
    if not path.is_file():
        raise ValidationError(f"config file not found: {source}")
    try:
        parser.read_string(path.read_text("utf-8"))
    except configparser.Error as exc:
        raise ValidationError(f"cannot parse {source}: {exc}") from exc
    return parser, str(path)


def load_config(source: str = "telecom") -> RunConfig:
    parser, source = _read_parser(source)
    try:
        return _build(parser, source)
    except (KeyError, ValueError, TypeError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"{source}: {exc}") from exc


def _build(p: configparser.ConfigParser, source: str) -> RunConfig:
    for name in ("crystal", "pump", "grid", "scan", "state", "noise", "rates", "run"):
        if not p.has_section(name):
            p.add_section(name)
    cs, ps, gs = p["crystal"], p["pump"], p["grid"]

    pump = PumpConfig(
        center_nm=ps.getfloat("center_nm", 775.0),
        fwhm_nm=ps.getfloat("fwhm_nm", 0.4),
        shape=ps.get("shape", "gaussian"),
    )
    sign = cs.get("grating_sign", "auto")
    sellmeier = {k[len("sellmeier_"):]: v for k, v in cs.items() if k.startswith("sellmeier_")}
    crystal = CrystalConfig(
        length_mm=cs.getfloat("length_mm", 30.0),
        poling_period_um=1.0 if _auto(cs.get("poling_period_um", "auto")) else cs.getfloat("poling_period_um"),
        axes={
            "pump": cs.get("pump_axis", "y"),
            "signal": cs.get("signal_axis", "y"),
            "idler": cs.get("idler_axis", "z"),
        },
        regime=cs.get("regime", "telecom"),
        sellmeier=sellmeier or None,
        temperature_c=cs.getfloat("temperature_c", 32.5),
        grating_sign=None if _auto(sign) else int(sign),
    )
    if _auto(cs.get("poling_period_um", "auto")):
        crystal = phase_matched(crystal, pump.center_nm * 1e-3)

    center = gs.getfloat("center_nm", 2.0 * pump.center_nm)
    half = gs.getfloat("half_span_nm", DEFAULT_HALF_SPAN_NM[crystal.regime])
    grid = SpectralGrid.centered(center, half, gs.getint("points", 256))

    sc = p["scan"]
    scan_range = (sc.getfloat("fwhm_min_nm", 0.1), sc.getfloat("fwhm_max_nm", 1.0))
    steps = sc.getint("steps", 25)

    st = p["state"]
    target = st.get("bell", "psi-").strip().lower()
    if target not in BELL_PHASES:
        raise ValidationError(f"[state] bell must be one of {sorted(BELL_PHASES)}")
    sagnac = SagnacParams(
        _opt_float(st, "phase_rad", BELL_PHASES[target]), st.getfloat("ratio", 1.0)
    )

    ns = p["noise"]
    noise = NoiseParams(
        white=ns.getfloat("white", 0.0),
        mean_pairs=ns.getfloat("mean_pairs", 0.0),
        multipair_coeff=ns.getfloat("multipair_coeff", 0.0),
        extinction_ratio=ns.getfloat("extinction_ratio", 250.0),
        phase_error=ns.getfloat("phase_error_rad", 0.26),
    )

    rs = p["rates"]
    defaults = RateModel()
    rates = RateModel(
        **{
            name: (rs.getboolean(name, getattr(defaults, name)) if name == "apply_dead_time"
                   else rs.getfloat(name, getattr(defaults, name)))
            for name in RateModel.__dataclass_fields__
        }
    )

    run = p["run"]
    seed = run.get("seed", fallback=None)
    return RunConfig(
        crystal=crystal,
        pump=pump,
        grid=grid,
        scan_range_nm=scan_range,
        scan_steps=steps,
        target=target,
        sagnac=sagnac,
        noise=noise,
        rates=rates,
        seed=None if _auto(seed) else int(seed),
        time_s=run.getfloat("time_s", 1.0),
        tomo_time_s=run.getfloat("tomo_time_s", 10.0),
        resamples=run.getint("resamples", 50),
        fringe_theta1=_floats(run.get("fringe_theta1_deg", "0, 45, 90, 135")),
        fringe_step_deg=run.getfloat("fringe_step_deg", 15.0),
        powers_mw=_floats(run.get("powers_mw", "10, 20, 30, 40, 50, 60, 70, 80, 90, 100")),
        sweep_theta1=run.getfloat("sweep_theta1_deg", 45.0),
        fmt=run.get("format", "csv"),
        source=source,
        raw={s: dict(p[s]) for s in p.sections()},
    )
