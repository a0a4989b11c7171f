"""Two-qubit polarization tomography from 16 projective measurements."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import minimize

from .counting import CountRecord, substream
from .errors import ConvergenceError, ValidationError
from .polarization import TwoQubitState, bell_state

_s2 = 1.0 / math.sqrt(2.0)
ANALYZER_KETS = {
    "H": np.array([1, 0], dtype=complex),
    "V": np.array([0, 1], dtype=complex),
    "D": np.array([_s2, _s2], dtype=complex),
    "A": np.array([_s2, -_s2], dtype=complex),
    "R": np.array([_s2, 1j * _s2], dtype=complex),
    "L": np.array([_s2, -1j * _s2], dtype=complex),
}

# standard 16-projector set, with the four H/V projectors leading as HH HV VH VV
TOMO_LABELS = (
    "HH", "HV", "VH", "VV", "RH", "RV", "DV", "DH",
    "DR", "DD", "RD", "HD", "VD", "VL", "HL", "RL",
)

MLE_TOL = 1e-10
MLE_MAXITER = 10_000
PSD_FLOOR = 1e-6
MAX_FAILURE_FRACTION = 0.10

_PAULI = [
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
]
_PAULI2 = [np.kron(a, b) for a in _PAULI for b in _PAULI]
_YY = np.kron(_PAULI[2], _PAULI[2])


@dataclass(frozen=True)
class Projector:
    label: str
    ket1: np.ndarray = field(repr=False)
    ket2: np.ndarray = field(repr=False)

    def __post_init__(self):
        for k in (self.ket1, self.ket2):
            if abs(np.linalg.norm(k) - 1.0) > 1e-12:
                raise ValidationError(f"analyzer ket for {self.label} is not normalized")

    @classmethod
    def from_label(cls, label: str) -> "Projector":
        if len(label) != 2 or any(ch not in ANALYZER_KETS for ch in label):
            raise ValidationError(f"bad projector label {label!r}")
        return cls(label, ANALYZER_KETS[label[0]], ANALYZER_KETS[label[1]])

    @property
    def ket(self) -> np.ndarray:
        return np.kron(self.ket1, self.ket2)

    @property
    def operator(self) -> np.ndarray:
        k = self.ket
        return np.outer(k, k.conj())

    def probability(self, rho: TwoQubitState) -> float:
        k = self.ket
        return float(np.real(k.conj() @ rho.matrix @ k))


def tomo_settings() -> list[Projector]:
    return [Projector.from_label(lab) for lab in TOMO_LABELS]


def _arrays(records: Sequence[CountRecord]):
    if len(records) < 16:
        raise ValidationError(f"tomography needs 16 records, got {len(records)}")
    kets = np.array([Projector.from_label(r.setting_id).ket for r in records])
    counts = np.array([r.counts for r in records], dtype=float)
    if counts.sum() <= 0:
        raise ValidationError("tomography records contain no counts")
    return kets, counts


def _design_matrix(kets):
    # p_nu = sum_k x_k <psi|Gamma_k|psi> / 4 with rho = sum_k x_k Gamma_k / 4
    return np.array(
        [[np.real(k.conj() @ g @ k) / 4.0 for g in _PAULI2] for k in kets]
    )


def linear_reconstruct(records: Sequence[CountRecord]) -> np.ndarray:
    """Linear inversion; Hermitian with unit trace but possibly not PSD."""
    kets, counts = _arrays(records)
    x, *_ = np.linalg.lstsq(_design_matrix(kets), counts, rcond=None)
    if x[0] <= 0:
        raise ValidationError("linear inversion gives non-positive total flux")
    m = sum(xk * g for xk, g in zip(x, _PAULI2)) / 4.0
    m = 0.5 * (m + m.conj().T)
    return m / np.trace(m).real


def is_physical(m: np.ndarray, tol: float = 1e-10) -> bool:
    return bool(np.linalg.eigvalsh(0.5 * (m + m.conj().T)).min() >= -tol)


def project_psd(m: np.ndarray, floor: float = PSD_FLOOR) -> np.ndarray:
    """Clip eigenvalues below ``floor`` and renormalize."""
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    w = np.maximum(w, floor)
    out = (v * w) @ v.conj().T
    return out / np.trace(out).real


_LOWER = np.tril_indices(4)
_DIAG = np.array([i == j for i, j in zip(*_LOWER)])


def _t_from_params(x):
    t = np.zeros((4, 4), dtype=complex)
    re = x[: len(_DIAG)]
    im = x[len(_DIAG):]
    vals = re.astype(complex)
    vals[~_DIAG] += 1j * im
    t[_LOWER] = vals
    return t


def _params_from_t(t):
    vals = t[_LOWER]
    return np.concatenate([vals.real, vals[~_DIAG].imag])


def _t_from_rho(rho):
    # lower-triangular T with T^dagger T = rho, via Cholesky of the reversed matrix
    j = np.eye(4)[::-1]
    low = np.linalg.cholesky(j @ rho @ j)
    return j @ low.conj().T @ j


def rho_from_t(t: np.ndarray) -> np.ndarray:
    m = t.conj().T @ t
    return m / np.trace(m).real


@dataclass(frozen=True)
class TomographyResult:
    state: TwoQubitState
    fidelity: float
    concurrence: float
    log_likelihood: float
    iterations: int
    converged: bool
    target: str = "psi-"
    fidelity_err: float | None = None
    concurrence_err: float | None = None


def mle_reconstruct(
    records: Sequence[CountRecord],
    init: np.ndarray | None = None,
    target: str = "psi-",
    tol: float = MLE_TOL,
    maxiter: int = MLE_MAXITER,
) -> TomographyResult:
    """Maximum-likelihood state under Poisson statistics.

    Expected counts are ``<psi|T^dagger T|psi>`` for lower-triangular T, so
    the overall flux is fitted along with the state.
    """
    kets, counts = _arrays(records)
    if init is None:
        init = linear_reconstruct(records)
    flux, *_ = np.linalg.lstsq(_design_matrix(kets), counts, rcond=None)
    scale = max(float(flux[0]), counts.sum() / len(counts))
    t0 = _t_from_rho(project_psd(init)) * math.sqrt(scale)
    x0 = _params_from_t(t0) / math.sqrt(scale)
    pos = counts > 0
    const = np.sum(counts[pos] * np.log(counts[pos]) - counts[pos])

    def objective(x):
        t = _t_from_params(x)
        u = (t @ kets.T).T  # rows: T |psi_nu>
        mu = np.maximum(scale * np.sum(np.abs(u) ** 2, axis=1), 1e-300)
        # half the Poisson deviance, term by term so it stays accurate near a perfect fit
        r = counts / mu - 1.0
        rp = np.where(pos, r, 0.0)
        dev = np.where(pos, mu * ((1.0 + rp) * np.log1p(rp) - rp), mu)
        # dL/dT_ab = 2 scale sum_nu r_nu conj(u_a) psi_b (real and imag parts)
        g = 2.0 * scale * np.einsum("n,na,nb->ab", r, u.conj(), kets)
        vals = g[_LOWER]
        grad = np.concatenate([vals.real, -vals[~_DIAG].imag])
        return float(np.sum(dev)), -grad

    res = minimize(
        objective,
        x0,
        jac=True,
        method="L-BFGS-B",
        options={"ftol": tol, "gtol": 1e-14, "maxiter": maxiter, "maxcor": 30},
    )
    if not np.all(np.isfinite(res.x)):
        raise ConvergenceError("MLE produced non-finite parameters")
    rho = rho_from_t(_t_from_params(res.x))
    state = TwoQubitState(rho, "mle")
    return TomographyResult(
        state=state,
        fidelity=fidelity(state, bell_state(target)),
        concurrence=concurrence(state),
        log_likelihood=float(-res.fun + const),
        iterations=int(res.nit),
        converged=bool(res.success),
        target=target,
    )


def fidelity(rho: TwoQubitState, target) -> float:
    """<psi|rho|psi> for a pure target ket."""
    psi = np.asarray(target, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    f = float(np.real(psi.conj() @ rho.matrix @ psi))
    return min(1.0, max(0.0, f))


def concurrence(rho: TwoQubitState) -> float:
    """Wootters concurrence."""
    m = rho.matrix
    r = m @ _YY @ m.conj() @ _YY
    ev = np.sort(np.abs(np.linalg.eigvals(r).real))[::-1]
    lam = np.sqrt(ev)
    return float(min(1.0, max(0.0, lam[0] - lam[1] - lam[2] - lam[3])))


def trace_distance(a, b) -> float:
    ma = a.matrix if isinstance(a, TwoQubitState) else np.asarray(a)
    mb = b.matrix if isinstance(b, TwoQubitState) else np.asarray(b)
    d = ma - mb
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(0.5 * (d + d.conj().T)))))


class BootstrapErrors(NamedTuple):
    sigma_fidelity: float
    sigma_concurrence: float
    failures: int


def poisson_resample(counts: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    return rng.poisson(counts).astype(float)


def subtract_background(records: Sequence[CountRecord], background_cps: float):
    return [
        CountRecord(
            r.setting_id, r.theta1, r.theta2, r.time_s,
            max(0.0, r.counts - background_cps * r.time_s), r.expected_rate,
        )
        for r in records
    ]


def bootstrap_errors(
    records: Sequence[CountRecord],
    n_resamples: int,
    seed: int,
    target: str = "psi-",
    background_cps: float = 0.0,
    resampler=poisson_resample,
) -> BootstrapErrors:
    """Spread of fidelity and concurrence over Poisson-resampled datasets."""
    if n_resamples < 2:
        raise ValidationError("bootstrap needs at least 2 resamples")
    raw = np.array([r.counts for r in records], dtype=float)
    fids, concs, failures = [], [], 0
    for k in range(n_resamples):
        counts = resampler(raw, substream(seed, k))
        resampled = [
            CountRecord(r.setting_id, r.theta1, r.theta2, r.time_s, float(n))
            for r, n in zip(records, counts)
        ]
        try:
            res = mle_reconstruct(subtract_background(resampled, background_cps), target=target)
        except (ValidationError, ConvergenceError, np.linalg.LinAlgError):
            failures += 1
            continue
        if not res.converged:
            failures += 1
            continue
        fids.append(res.fidelity)
        concs.append(res.concurrence)
    if failures > MAX_FAILURE_FRACTION * n_resamples or len(fids) < 2:
        raise ConvergenceError(
            f"{failures} of {n_resamples} bootstrap reconstructions failed"
        )
    return BootstrapErrors(
        float(np.std(fids, ddof=1)), float(np.std(concs, ddof=1)), failures
    )
