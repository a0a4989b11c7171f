"""Command-line front end.

Every subcommand computes all of its outputs in memory, writes them to a
temporary directory next to ``--out`` and only then moves them into
place, so a failing run leaves no partial files behind.
"""

from __future__ import annotations

import argparse
import math
import os
import shutil
import sys
import tempfile
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from . import io as sio
from .config import BELL_PHASES, RunConfig, load_config
from .counting import (
    chsh_from_records,
    chsh_settings,
    derive_seed,
    fringe_settings,
    simulate_counts,
    visibility_from_records,
)
from .crystal import find_gvm_pump, poling_period_for
from .errors import NumericalError, ValidationError
from .polarization import CHSH_ANGLES_FOR, source_state
from .spectral import compute_jsa, fwhm_nm_to_ps, marginals, purity_scan, schmidt
from .tomography import (
    bootstrap_errors,
    is_physical,
    linear_reconstruct,
    mle_reconstruct,
    subtract_background,
    tomo_settings,
)

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3

# stream keys so that commands never share random draws
_FRINGE, _CHSH, _TOMO, _BOOT, _SWEEP = 1, 2, 3, 4, 5


class Outputs(dict):
    """File name -> str or bytes, plus the summary dictionary."""

    def __init__(self, fmt: str, figures: bool):
        super().__init__()
        self.fmt = fmt
        self.figures = figures
        self.summary: dict = {}

    def table(self, stem: str, columns, rows):
        rows = [list(r) for r in rows]
        if self.fmt == "json":
            self[f"{stem}.json"] = sio.table_to_json(columns, rows)
        else:
            self[f"{stem}.csv"] = sio.table_to_csv(columns, rows)

    def records(self, stem: str, records):
        if self.fmt == "json":
            self[f"{stem}.json"] = sio.records_to_json(records)
        else:
            self[f"{stem}.csv"] = sio.records_to_csv(records)

    def figure(self, name: str, render):
        if self.figures:
            self[name] = render()


def write_outputs(out_dir: Path, files: dict) -> list[Path]:
    """Write all files to a temp directory, then move them into ``out_dir``."""
    out_dir = Path(out_dir)
    parent = out_dir.resolve().parent
    parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out_dir.name}.", dir=parent))
    try:
        for name, data in files.items():
            path = tmp / name
            if isinstance(data, bytes):
                path.write_bytes(data)
            else:
                path.write_text(data, encoding="utf-8")
        if not out_dir.exists():
            os.replace(tmp, out_dir)
        else:
            for name in files:
                os.replace(tmp / name, out_dir / name)
    finally:
        shutil.rmtree(tmp, ignore_errors=True)
    return [out_dir / n for n in sorted(files)]


def _base_summary(cmd: str, cfg: RunConfig) -> dict:
    return {
        "command": cmd,
        "version": __version__,
        "config": cfg.source,
        "seed": cfg.seed,
        "format": cfg.fmt,
    }


def _state(cfg: RunConfig):
    # multi-pair emission enters through the rate model's background
    return source_state(cfg.sagnac, cfg.noise, include_multipair=False)


def _sweep_angles(step: float) -> np.ndarray:
    if not 0 < step <= 90:
        raise ValidationError("fringe step must lie in (0, 90] degrees")
    return np.arange(0.0, 360.0, step)


# commands


def cmd_jsa(cfg: RunConfig, out: Outputs):
    j = compute_jsa(cfg.crystal, cfg.pump, cfg.grid)
    sch = schmidt(j)
    ms, mi = marginals(j)
    if out.fmt == "json":
        out["jsa.json"] = sio.jsa_to_json(j, purity=sch.purity)
    else:
        out.update(sio.jsa_to_csv(j))
    out.table(
        "marginals",
        ("signal_nm", "signal_marginal", "idler_nm", "idler_marginal"),
        zip(ms.wavelength_nm, ms.spectrum, mi.wavelength_nm, mi.spectrum),
    )
    out.table(
        "schmidt",
        ("k", "coefficient"),
        ((k, c) for k, c in enumerate(sch.coefficients[:50])),
    )
    c = cfg.crystal
    out.summary.update(
        purity=sch.purity,
        schmidt_number=sch.schmidt_number,
        signal_fwhm_nm=ms.fwhm_nm,
        idler_fwhm_nm=mi.fwhm_nm,
        pump_center_nm=cfg.pump.center_nm,
        pump_fwhm_nm=cfg.pump.fwhm_nm,
        pump_duration_ps=fwhm_nm_to_ps(cfg.pump.center_nm, cfg.pump.fwhm_nm),
        poling_period_um=c.poling_period_um,
        crystal_length_mm=c.length_mm,
        regime=c.regime,
        grid_points=[cfg.grid.n_signal, cfg.grid.n_idler],
    )

    def render():
        from .plotting import jsa_figure

        return jsa_figure(j, (ms, mi), f"{c.regime} band, purity {sch.purity:.3f}")

    out.figure("jsa.png", render)


def cmd_purity_scan(cfg: RunConfig, out: Outputs):
    scan = purity_scan(cfg.crystal, cfg.pump, cfg.scan_range_nm, cfg.scan_steps, cfg.grid)
    out.table(
        "purity_scan",
        ("pump_fwhm_nm", "pump_duration_ps", "purity"),
        (
            (f, fwhm_nm_to_ps(cfg.pump.center_nm, f), p)
            for f, p in zip(scan.fwhm_nm, scan.purity)
        ),
    )
    out.summary.update(
        best_fwhm_nm=scan.best_fwhm_nm,
        best_purity=scan.best_purity,
        best_duration_ps=fwhm_nm_to_ps(cfg.pump.center_nm, scan.best_fwhm_nm),
        fwhm_range_nm=list(cfg.scan_range_nm),
        steps=cfg.scan_steps,
        regime=cfg.crystal.regime,
        poling_period_um=cfg.crystal.poling_period_um,
    )

    def render():
        from .plotting import purity_figure

        return purity_figure(scan)

    out.figure("purity_scan.png", render)


def cmd_fringe(cfg: RunConfig, out: Outputs):
    seed = cfg.require_seed()
    rho = _state(cfg)
    bg = cfg.rates.background_rate()
    sweep = _sweep_angles(cfg.fringe_step_deg)
    all_records, rows, curves = [], [], {}
    for k, t1 in enumerate(cfg.fringe_theta1):
        recs = simulate_counts(
            rho, fringe_settings(t1, sweep), cfg.rates, cfg.time_s, derive_seed(seed, _FRINGE, k)
        )
        v_raw, s_raw = visibility_from_records(recs)
        v_sub, s_sub = visibility_from_records(recs, bg)
        rows.append((t1, v_raw, s_raw, v_sub, s_sub))
        curves[t1] = (np.array([r.theta2 for r in recs]), np.array([r.counts for r in recs]))
        all_records += recs
    out.records("counts", all_records)
    out.table(
        "visibilities",
        ("theta1_deg", "raw_visibility", "raw_sigma", "subtracted_visibility", "subtracted_sigma"),
        rows,
    )
    out.summary.update(
        state=cfg.target,
        pump_power_mw=cfg.rates.pump_power_mw,
        time_s=cfg.time_s,
        background_cps=bg,
        visibilities=[
            {"theta1_deg": r[0], "raw": r[1], "raw_sigma": r[2], "subtracted": r[3], "subtracted_sigma": r[4]}
            for r in rows
        ],
    )

    def render():
        from .plotting import fringe_figure

        return fringe_figure(curves, f"{cfg.target}, {cfg.rates.pump_power_mw:g} mW, {cfg.time_s:g} s")

    out.figure("fringe.png", render)


def cmd_chsh(cfg: RunConfig, out: Outputs, records=None):
    bg = cfg.rates.background_rate()
    angles = CHSH_ANGLES_FOR[cfg.target]
    if records is None:
        seed = cfg.require_seed()
        records = simulate_counts(
            _state(cfg), chsh_settings(*angles), cfg.rates, cfg.time_s, derive_seed(seed, _CHSH)
        )
    s_raw, sig_raw = chsh_from_records(records, 0.0, angles)
    s_sub, sig_sub = chsh_from_records(records, bg, angles)
    out.records("counts", records)
    out.table(
        "chsh",
        ("mode", "S", "sigma_S", "violation_sigmas"),
        [
            ("raw", s_raw, sig_raw, (s_raw - 2) / sig_raw if sig_raw > 0 else math.nan),
            ("subtracted", s_sub, sig_sub, (s_sub - 2) / sig_sub if sig_sub > 0 else math.nan),
        ],
    )
    out.summary.update(
        state=cfg.target,
        time_s=records[0].time_s,
        pump_power_mw=cfg.rates.pump_power_mw,
        background_cps=bg,
        angles_deg=list(angles),
        S_raw=s_raw,
        sigma_S_raw=sig_raw,
        S_subtracted=s_sub,
        sigma_S_subtracted=sig_sub,
    )


def cmd_tomo(cfg: RunConfig, out: Outputs, records=None):
    bg = cfg.rates.background_rate()
    time_s = cfg.tomo_time_s
    if records is None:
        seed = cfg.require_seed()
        records = simulate_counts(
            _state(cfg), tomo_settings(), cfg.rates, time_s, derive_seed(seed, _TOMO)
        )
    net = subtract_background(records, bg)
    lin = linear_reconstruct(net)
    res = mle_reconstruct(net, target=cfg.target)
    if not res.converged:
        raise NumericalError(f"MLE did not converge after {res.iterations} iterations")
    errs = None
    if cfg.resamples > 0:
        errs = bootstrap_errors(
            records, cfg.resamples, derive_seed(cfg.require_seed(), _BOOT),
            target=cfg.target, background_cps=bg,
        )
        res = replace(res, fidelity_err=errs.sigma_fidelity, concurrence_err=errs.sigma_concurrence)
    rho = res.state.matrix
    out.records("counts", records)
    out["state.json"] = sio.state_to_json(
        res.state, target=cfg.target, fidelity=res.fidelity, concurrence=res.concurrence
    )
    if out.fmt == "csv":
        out["rho_real.csv"] = sio.matrix_to_csv(rho.real)
        out["rho_imag.csv"] = sio.matrix_to_csv(rho.imag)
    out.summary.update(
        state=cfg.target,
        time_s=records[0].time_s,
        background_cps=bg,
        fidelity=res.fidelity,
        fidelity_err=res.fidelity_err,
        concurrence=res.concurrence,
        concurrence_err=res.concurrence_err,
        log_likelihood=res.log_likelihood,
        iterations=res.iterations,
        converged=res.converged,
        linear_inversion_physical=is_physical(lin),
        bootstrap_resamples=cfg.resamples,
        bootstrap_failures=None if errs is None else errs.failures,
    )

    def render():
        from .plotting import density_figure

        return density_figure(rho, f"F = {res.fidelity:.4f}, C = {res.concurrence:.4f}")

    out.figure("density.png", render)


def cmd_power_sweep(cfg: RunConfig, out: Outputs):
    seed = cfg.require_seed()
    if any(p < 0 for p in cfg.powers_mw):
        raise ValidationError("pump powers must be non-negative")
    rho = _state(cfg)
    sweep = _sweep_angles(cfg.fringe_step_deg)
    rows, good = [], []
    for k, p in enumerate(cfg.powers_mw):
        rates = cfg.rates.at_power(p)
        try:
            if not rates.pair_rate() > 0:
                raise ValidationError("visibility undefined without pair emission")
            recs = simulate_counts(
                rho, fringe_settings(cfg.sweep_theta1, sweep), rates, cfg.time_s,
                derive_seed(seed, _SWEEP, k),
            )
            v_raw, s_raw = visibility_from_records(recs)
            v_sub, s_sub = visibility_from_records(recs, rates.background_rate())
        except ValidationError as exc:
            rows.append((p, math.nan, math.nan, math.nan, math.nan, f"error: {exc}"))
            continue
        rows.append((p, v_raw, s_raw, v_sub, s_sub, "ok"))
        good.append((p, v_raw, v_sub))
    fit = None
    if len(good) >= 3:
        x = np.array([g[0] for g in good])
        y = np.array([g[1] for g in good])
        slope, intercept = np.polyfit(x, y, 1)
        resid = y - (slope * x + intercept)
        ss_tot = float(np.sum((y - y.mean()) ** 2))
        r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else math.nan
        fit = {"slope_per_mw": float(slope), "intercept": float(intercept), "r_squared": r2}
    raw_vals = [g[1] for g in good]
    out.table(
        "power_sweep",
        ("power_mw", "raw_visibility", "raw_sigma", "subtracted_visibility", "subtracted_sigma", "status"),
        rows,
    )
    out.summary.update(
        state=cfg.target,
        theta1_deg=cfg.sweep_theta1,
        time_s=cfg.time_s,
        powers_mw=list(cfg.powers_mw),
        raw_fit=fit,
        raw_monotone_decreasing=bool(np.all(np.diff(raw_vals) < 0)) if len(raw_vals) > 1 else None,
        subtracted_min=min((g[2] for g in good), default=None),
        subtracted_max=max((g[2] for g in good), default=None),
        error_rows=sum(1 for r in rows if r[-1] != "ok"),
    )

    def render():
        from .plotting import power_figure

        f = None if fit is None else (fit["slope_per_mw"], fit["intercept"])
        return power_figure(
            [g[0] for g in good], raw_vals, [g[2] for g in good], f,
            f"θ1 = {cfg.sweep_theta1:g}°, {cfg.time_s:g} s per setting",
        )

    out.figure("power_sweep.png", render)


def cmd_gvm(cfg: RunConfig, out: Outputs):
    c = cfg.crystal
    pump_um = find_gvm_pump(c)
    period = poling_period_for(c, 2 * pump_um, 2 * pump_um)
    out.table(
        "gvm",
        ("quantity", "value"),
        [("gvm_pump_nm", pump_um * 1e3), ("degenerate_nm", 2e3 * pump_um), ("poling_period_um", period)],
    )
    out.summary.update(gvm_pump_nm=pump_um * 1e3, degenerate_nm=2e3 * pump_um, poling_period_um=period)


# argument handling


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", default="telecom", help="INI file or preset name (telecom, 800nm)")
    p.add_argument("--seed", type=int, help="unsigned 64-bit seed (overrides config)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--format", choices=("csv", "json"), help="table format")
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")


def _add_state(p: argparse.ArgumentParser):
    p.add_argument("--state", choices=sorted(BELL_PHASES), help="target Bell state")
    p.add_argument("--power", type=float, help="pump power in mW")
    p.add_argument("--time", type=float, help="accumulation time per setting in s")
    p.add_argument("--noiseless", action="store_true", help="ideal state, no background")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sagnacsim", description="Sagnac-loop entangled photon source simulator"
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("jsa", help="joint spectral amplitude, purity and marginals")
    _add_common(p)
    p.add_argument("--points", type=int, help="grid points per axis")

    p = sub.add_parser("purity-scan", help="purity versus pump bandwidth")
    _add_common(p)
    p.add_argument("--fwhm-range", type=float, nargs=2, metavar=("MIN_NM", "MAX_NM"))
    p.add_argument("--steps", type=int)
    p.add_argument("--points", type=int, help="grid points per axis")

    p = sub.add_parser("gvm", help="group-velocity-matched pump and poling period")
    _add_common(p)

    p = sub.add_parser("fringe", help="polarization correlation fringes")
    _add_common(p)
    _add_state(p)
    p.add_argument("--theta1", type=float, nargs="+", help="fixed polarizer angles in deg")

    p = sub.add_parser("chsh", help="CHSH S from 16 settings")
    _add_common(p)
    _add_state(p)
    p.add_argument("--records", help="analyze an existing count file instead of simulating")

    p = sub.add_parser("tomo", help="two-qubit state tomography")
    _add_common(p)
    _add_state(p)
    p.add_argument("--resamples", type=int, help="bootstrap resamples (0 disables)")
    p.add_argument("--records", help="reconstruct from an existing count file")

    p = sub.add_parser("power-sweep", help="visibility versus pump power")
    _add_common(p)
    _add_state(p)
    p.add_argument("--powers", type=float, nargs="+", help="pump powers in mW")
    return parser


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.format:
        changes["fmt"] = args.format
    if getattr(args, "power", None) is not None:
        changes["rates"] = cfg.rates.at_power(args.power)
    if getattr(args, "time", None) is not None:
        if not args.time > 0:
            raise ValidationError("--time must be positive")
        changes["time_s"] = args.time
        changes["tomo_time_s"] = args.time
    if getattr(args, "resamples", None) is not None:
        if args.resamples < 0:
            raise ValidationError("--resamples must be >= 0")
        changes["resamples"] = args.resamples
    if getattr(args, "fwhm_range", None):
        lo, hi = args.fwhm_range
        if not 0 < lo < hi:
            raise ValidationError("--fwhm-range needs 0 < MIN < MAX")
        changes["scan_range_nm"] = (lo, hi)
    if getattr(args, "steps", None) is not None:
        changes["scan_steps"] = args.steps
    if getattr(args, "points", None) is not None:
        g = cfg.grid
        changes["grid"] = replace(g, n_signal=args.points, n_idler=args.points)
    if getattr(args, "theta1", None):
        changes["fringe_theta1"] = tuple(args.theta1)
    if getattr(args, "powers", None):
        changes["powers_mw"] = tuple(args.powers)
    cfg = replace(cfg, **changes)
    if getattr(args, "state", None):
        cfg = cfg.with_state(args.state)
    if getattr(args, "noiseless", False):
        cfg = cfg.noiseless()
    return cfg


COMMANDS = {
    "jsa": cmd_jsa,
    "purity-scan": cmd_purity_scan,
    "gvm": cmd_gvm,
    "fringe": cmd_fringe,
    "chsh": cmd_chsh,
    "tomo": cmd_tomo,
    "power-sweep": cmd_power_sweep,
}


def run(args) -> list[Path]:
    cfg = _apply_overrides(load_config(args.config), args)
    out = Outputs(cfg.fmt, not args.no_figures)
    out.summary.update(_base_summary(args.command, cfg))
    fn = COMMANDS[args.command]
    if getattr(args, "records", None):
        path = Path(args.records)
        if not path.is_file():
            raise ValidationError(f"records file not found: {path}")
        fn(cfg, out, records=sio.load_records(path))
        out.summary["records"] = str(path)
    else:
        fn(cfg, out)
    out["summary.json"] = sio.dumps(out.summary)
    return write_outputs(Path(args.out), out)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        paths = run(args)
    except ValidationError as exc:
        print(f"sagnacsim: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"sagnacsim: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for p in paths:
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
