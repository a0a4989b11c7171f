"""Static figures rendered to PNG bytes with the Agg backend."""

from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .spectral import JointSpectrum, Marginal, PurityScan  # noqa: E402

BASIS = ("HH", "HV", "VH", "VV")


def _png(fig) -> bytes:
    buf = io.BytesIO()
    fig.savefig(buf, format="png", dpi=110, metadata={"Software": None})
    plt.close(fig)
    return buf.getvalue()


def jsa_figure(j: JointSpectrum, marg: tuple[Marginal, Marginal] | None = None, title="") -> bytes:
    g = j.grid
    fig, axes = plt.subplots(1, 2, figsize=(10, 4.2))
    extent = (g.idler_nm[0], g.idler_nm[-1], g.signal_nm[0], g.signal_nm[-1])
    for ax, data, name in (
        (axes[0], j.amplitude.real, "JSA (real part)"),
        (axes[1], j.intensity, "JSI"),
    ):
        im = ax.imshow(data, origin="lower", extent=extent, aspect="auto", cmap="viridis")
        ax.set_xlabel("idler wavelength (nm)")
        ax.set_ylabel("signal wavelength (nm)")
        ax.set_title(name)
        fig.colorbar(im, ax=ax, shrink=0.85)
    if marg is not None:
        fig.text(
            0.5, 0.01,
            f"marginal FWHM: signal {marg[0].fwhm_nm:.3f} nm, idler {marg[1].fwhm_nm:.3f} nm",
            ha="center", fontsize=9,
        )
    if title:
        fig.suptitle(title)
    fig.tight_layout(rect=(0, 0.04, 1, 0.95))
    return _png(fig)


def purity_figure(scan: PurityScan, title="") -> bytes:
    fig, ax = plt.subplots(figsize=(5.5, 4))
    ax.plot(scan.fwhm_nm, scan.purity, "o-", ms=3)
    ax.axvline(scan.best_fwhm_nm, color="0.6", ls="--", lw=1)
    ax.set_xscale("log")
    ax.set_xlabel("pump FWHM (nm)")
    ax.set_ylabel("spectral purity")
    ax.set_title(title or f"max purity {scan.best_purity:.3f} at {scan.best_fwhm_nm:.4g} nm")
    fig.tight_layout()
    return _png(fig)


def fringe_figure(curves: dict[float, tuple[np.ndarray, np.ndarray]], title="") -> bytes:
    """``curves`` maps theta1 to (theta2 array, counts array)."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for t1, (t2, counts) in curves.items():
        ax.plot(t2, counts, "o-", ms=3, label=f"θ1 = {t1:g}°")
    ax.set_xlabel("θ2 (deg)")
    ax.set_ylabel("coincidences")
    ax.legend(fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return _png(fig)


def density_figure(rho: np.ndarray, title="") -> bytes:
    fig = plt.figure(figsize=(10, 4.5))
    x, y = np.meshgrid(np.arange(4), np.arange(4), indexing="ij")
    x, y = x.ravel(), y.ravel()
    for k, (part, name) in enumerate(((rho.real, "Re ρ"), (rho.imag, "Im ρ"))):
        ax = fig.add_subplot(1, 2, k + 1, projection="3d")
        dz = part.ravel()
        colors = ["tab:blue" if v >= 0 else "tab:red" for v in dz]
        ax.bar3d(x, y, np.zeros_like(dz), 0.6, 0.6, dz, color=colors, shade=True)
        ax.set_xticks(np.arange(4) + 0.3, BASIS)
        ax.set_yticks(np.arange(4) + 0.3, BASIS)
        ax.set_zlim(-0.5, 0.5)
        ax.set_title(name)
    if title:
        fig.suptitle(title)
    return _png(fig)


def power_figure(powers, raw, subtracted, fit=None, title="") -> bytes:
    fig, ax = plt.subplots(figsize=(5.5, 4))
    ax.plot(powers, raw, "o", label="raw")
    ax.plot(powers, subtracted, "s", label="background subtracted")
    if fit is not None:
        slope, intercept = fit
        xs = np.array([min(powers), max(powers)])
        ax.plot(xs, slope * xs + intercept, "-", color="0.5", lw=1, label="linear fit (raw)")
    ax.set_xlabel("pump power (mW)")
    ax.set_ylabel("visibility")
    ax.legend(fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return _png(fig)
