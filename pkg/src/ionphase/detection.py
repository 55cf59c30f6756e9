"""Emulation of the motional-state readout and covariance reconstruction.

A mode's second moments are inferred from two ingredients: its mean phonon
number, which fixes the trace of the covariance matrix, and the probability
of finding the mode in its ground state after a fast kick of size delta in
one quadrature. With M = (1/2 + C)^{-1} the latter is

    F(delta) = sqrt(det M) exp(-delta^2 M_kk / 2),

so ln F is affine in delta^2. Single-mode covariances here are in the
dimensionless quadratures Q = (a + a^dag)/sqrt(2), P = i(a^dag - a)/sqrt(2),
where the vacuum is 1/2 * identity.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import gaussian as gs
from .exceptions import InconsistentDataError, SingularMatrixError, UnphysicalStateError
from .phases import label_from_extrema, negativity_extremal, odd_mode_block, plus_block

DEFAULT_KICKS = np.round(np.arange(0.0, 2.5 + 1e-9, 0.25), 10)


class KickAxis(enum.Enum):
    MOMENTUM = "momentum"
    POSITION = "position"


def to_mode_units(cov, omega: float) -> np.ndarray:
    """Convert a 2x2 covariance of (x, p) for an oscillator of frequency
    ``omega`` (hbar = m = 1) to dimensionless (Q, P)."""
    d = np.diag([np.sqrt(omega), 1.0 / np.sqrt(omega)])
    return d @ np.asarray(cov, float) @ d


def from_mode_units(cov, omega: float) -> np.ndarray:
    d = np.diag([1.0 / np.sqrt(omega), np.sqrt(omega)])
    return d @ np.asarray(cov, float) @ d


def mean_phonon(cov) -> float:
    """<a^dag a> = (Tr C - 1)/2 for a single-mode covariance."""
    cov = np.asarray(cov, float)
    if gs.check_physicality(cov) < -gs.PHYSICALITY_TOL:
        raise UnphysicalStateError("single-mode covariance below vacuum noise")
    return float((np.trace(cov) - 1.0) / 2.0)


def _kick_matrix(cov) -> np.ndarray:
    g = 0.5 * np.eye(2) + np.asarray(cov, float)
    if abs(np.linalg.det(g)) < 1e-14:
        raise SingularMatrixError("identity/2 + C is singular")
    return np.linalg.inv(g)


def ground_fidelity(cov, delta, axis: KickAxis = KickAxis.MOMENTUM):
    """Ground-state probability after a kick ``delta`` (scalar or array)."""
    M = _kick_matrix(cov)
    k = 1 if KickAxis(axis) is KickAxis.MOMENTUM else 0
    delta = np.asarray(delta, float)
    out = np.sqrt(np.linalg.det(M)) * np.exp(-(delta**2) * M[k, k] / 2.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class FidelityScan:
    mode_id: str
    kick_values: np.ndarray
    kick_axis: KickAxis
    fidelities: np.ndarray
    mean_phonon: float
    shots: int | None = None
    seed: int | None = None

    def __post_init__(self):
        kicks = np.asarray(self.kick_values, float)
        fids = np.asarray(self.fidelities, float)
        if kicks.shape != fids.shape:
            raise ValueError("kick_values and fidelities differ in length")
        if not np.any(kicks == 0.0):
            raise ValueError("a scan must include the zero kick")
        if np.unique(np.abs(kicks[kicks != 0])).size < 5:
            raise ValueError("a scan needs at least 5 distinct nonzero kick magnitudes")
        if np.any(fids > 1.0) or np.any(fids < 0.0):
            raise ValueError("fidelities must lie in [0, 1]")
        object.__setattr__(self, "kick_values", kicks)
        object.__setattr__(self, "fidelities", fids)
        object.__setattr__(self, "kick_axis", KickAxis(self.kick_axis))


def simulate_scan(
    cov,
    kick_values=DEFAULT_KICKS,
    kick_axis: KickAxis = KickAxis.MOMENTUM,
    shots: int | None = None,
    seed: int | None = None,
    mode_id: str = "0",
) -> FidelityScan:
    """Forward model of one kick scan, optionally with binomial shot noise."""
    kicks = np.asarray(kick_values, float)
    f = ground_fidelity(cov, kicks, kick_axis)
    if shots is not None:
        if seed is None:
            seed = 0
        rng = np.random.default_rng(seed)
        f = rng.binomial(int(shots), np.clip(f, 0.0, 1.0)) / int(shots)
    return FidelityScan(
        mode_id=mode_id,
        kick_values=kicks,
        kick_axis=kick_axis,
        fidelities=np.atleast_1d(f),
        mean_phonon=mean_phonon(cov),
        shots=shots,
        seed=seed,
    )


def _line_fit(scan: FidelityScan):
    """(intercept, slope) of ln F against delta^2 and their covariance."""
    keep = scan.fidelities > 0
    x = scan.kick_values[keep] ** 2
    f = scan.fidelities[keep]
    y = np.log(f)
    X = np.column_stack([np.ones_like(x), x])
    if scan.shots is None:
        beta, *_ = np.linalg.lstsq(X, y, rcond=None)
        return beta, np.zeros((2, 2))
    n = float(scan.shots)
    # delta-method variance of ln(F_hat); floored so exact F = 1 stays finite
    var = np.maximum(1.0 - f, 0.5 / n) / (n * f)
    w = 1.0 / var
    XtW = X.T * w
    cov = np.linalg.inv(XtW @ X)
    beta = cov @ (XtW @ y)
    return beta, cov


def _solve(params, trace_c):
    """Covariance entries from (b_p, s_p, b_x, s_x) and Tr C."""
    b_p, s_p, b_x, s_x, w_p = params
    m22, m11 = -2.0 * s_p, -2.0 * s_x
    log_det_m = 2.0 * (w_p * b_p + (1.0 - w_p) * b_x)
    tr_g = trace_c + 1.0
    g11 = tr_g * m22 / (m11 + m22)
    g22 = tr_g * m11 / (m11 + m22)
    g12_sq = g11 * g22 - np.exp(-log_det_m)
    return g11 - 0.5, g22 - 0.5, g12_sq, m11, m22, log_det_m


@dataclass(frozen=True)
class Reconstruction:
    covariance: np.ndarray
    std_errors: np.ndarray = field(repr=False)
    offdiag_sign: str
    mean_phonon: float
    fitted_trace: float
    det_m: float

    @property
    def entries(self) -> np.ndarray:
        """(C11, C22, |C12|)."""
        c = self.covariance
        return np.array([c[0, 0], c[1, 1], abs(c[0, 1])])


def reconstruct(
    momentum_scan: FidelityScan, position_scan: FidelityScan, rel_tol: float = 0.05
) -> Reconstruction:
    """Recover a mode covariance, up to the off-diagonal sign, from two scans.

    Raises
    ------
    InconsistentDataError
        If the scans refer to different phonon numbers, or the trace implied
        by the fitted kick curves misses the measured one by more than
        ``rel_tol``, or the implied |C12|^2 is clearly negative.
    """
    if momentum_scan.kick_axis is not KickAxis.MOMENTUM or position_scan.kick_axis is not KickAxis.POSITION:
        raise ValueError("expected one momentum-axis and one position-axis scan")
    n_bar = momentum_scan.mean_phonon
    if not np.isclose(n_bar, position_scan.mean_phonon, rtol=1e-9, atol=1e-12):
        raise InconsistentDataError("scans report different mean phonon numbers")
    trace_c = 2.0 * n_bar + 1.0

    (b_p, s_p), cov_p = _line_fit(momentum_scan)
    (b_x, s_x), cov_x = _line_fit(position_scan)
    var_bp, var_bx = cov_p[0, 0], cov_x[0, 0]
    w_p = 0.5 if var_bp + var_bx == 0 else var_bx / (var_bp + var_bx)

    params = np.array([b_p, s_p, b_x, s_x, w_p])
    sigma = np.zeros((5, 5))
    sigma[:2, :2] = cov_p
    sigma[2:4, 2:4] = cov_x

    def derived(p):
        c11, c22, g12_sq, m11, m22, log_det_m = _solve(p, trace_c)
        fitted_trace = (m11 + m22) * np.exp(-log_det_m) - 1.0
        return np.array([c11, c22, np.sqrt(max(g12_sq, 0.0)), g12_sq, fitted_trace])

    c11, c22, g12_sq, m11, m22, log_det_m = _solve(params, trace_c)
    if m11 <= 0 or m22 <= 0:
        raise InconsistentDataError("fitted kick curves do not decay")
    values = derived(params)
    if np.any(sigma):
        J = np.zeros((5, 5))
        for k in range(4):
            h = 1e-6 * max(1.0, abs(params[k]))
            up, dn = params.copy(), params.copy()
            up[k] += h
            dn[k] -= h
            J[:, k] = (derived(up) - derived(dn)) / (2 * h)
        std = np.sqrt(np.diag(J @ sigma @ J.T))
    else:
        std = np.zeros(5)
    # sqrt has no useful derivative near zero; map the one-sigma band of
    # |C12|^2 instead, which reduces to the delta method when it is large
    std[2] = np.sqrt(values[2] ** 2 + std[3]) - values[2]

    # shot noise widens the acceptance window to 4 standard errors
    fitted_trace = values[4]
    if abs(fitted_trace - trace_c) > max(rel_tol * trace_c, 4 * std[4]):
        raise InconsistentDataError(
            f"fitted trace {fitted_trace:.6g} disagrees with measured {trace_c:.6g}"
        )
    if g12_sq < -max(rel_tol * (c11 + 0.5) * (c22 + 0.5), 4 * std[3]):
        raise InconsistentDataError("fitted determinant exceeds the diagonal product")
    c12 = values[2]
    cov = np.array([[c11, c12], [c12, c22]])

    return Reconstruction(
        covariance=cov,
        std_errors=std[:3],
        offdiag_sign="unknown",
        mean_phonon=float(n_bar),
        fitted_trace=float(fitted_trace),
        det_m=float(np.exp(log_det_m)),
    )


def scan_pair(cov, kick_values=DEFAULT_KICKS, shots=None, seeds=(None, None), mode_id="0"):
    """Momentum- and position-axis scans of the same mode."""
    return (
        simulate_scan(cov, kick_values, KickAxis.MOMENTUM, shots, seeds[0], mode_id),
        simulate_scan(cov, kick_values, KickAxis.POSITION, shots, seeds[1], mode_id),
    )


DETECT_MODES = ("e1", "e2", "odd", "odd_quarter")


def state_mode_covariances(modes, n_minus: float, r: float) -> dict:
    """Dimensionless covariances of each mode probed by the readout.

    The even modes are in their vacuum; the odd mode is read out at the two
    extremal times, t = 0 and a quarter oscillation later.
    """
    w = modes.omega_odd
    out = {"e1": 0.5 * np.eye(2), "e2": 0.5 * np.eye(2)}
    out["odd"] = to_mode_units(odd_mode_block(w, n_minus, r, 0.0), w)
    out["odd_quarter"] = to_mode_units(odd_mode_block(w, n_minus, r, np.pi / 2), w)
    return out


def _dispersions(modes, covs: dict) -> dict:
    w1, w2 = modes.even_frequencies
    even = np.zeros((4, 4))
    even[:2, :2] = from_mode_units(covs["e1"], w1)
    even[2:, 2:] = from_mode_units(covs["e2"], w2)
    p = plus_block(modes, even)
    w = modes.omega_odd
    o0 = from_mode_units(covs["odd"], w)
    o1 = from_mode_units(covs["odd_quarter"], w)
    return {
        "dx_plus": float(np.sqrt(p[0, 0])),
        "dp_plus": float(np.sqrt(p[1, 1])),
        "dx_minus": [float(np.sqrt(o0[0, 0])), float(np.sqrt(o1[0, 0]))],
        "dp_minus": [float(np.sqrt(o0[1, 1])), float(np.sqrt(o1[1, 1]))],
    }


def _phase_summary(d: dict) -> dict:
    en = [
        negativity_extremal(d["dx_plus"], d["dp_plus"], d["dx_minus"][k], d["dp_minus"][k])
        for k in range(2)
    ]
    sup_en, inf_en = max(en), min(en)
    return {"sup_en": sup_en, "inf_en": inf_en, "phase": label_from_extrema(sup_en, inf_en).value}


def detect_state(modes, n_minus: float, r: float, kick_values=DEFAULT_KICKS, shots=None, seed=None, rel_tol=0.05):
    """Simulate the full readout of an asymptotic state and reconstruct it.

    Returns the list of scans and a report comparing truth and estimate,
    including the entanglement phase inferred from the estimated dispersions.
    Per-scan seeds are derived from ``seed`` so runs are reproducible.
    """
    truth = state_mode_covariances(modes, n_minus, r)
    seeds = [None] * (2 * len(DETECT_MODES))
    if shots is not None:
        seeds = [int(s) for s in np.random.SeedSequence(seed or 0).generate_state(len(seeds))]
    scans, estimates, per_mode = [], {}, {}
    for k, mode_id in enumerate(DETECT_MODES):
        pair = scan_pair(truth[mode_id], kick_values, shots, seeds[2 * k : 2 * k + 2], mode_id)
        scans.extend(pair)
        rec = reconstruct(*pair, rel_tol=rel_tol)
        estimates[mode_id] = rec.covariance
        exact = truth[mode_id]
        exact_entries = np.array([exact[0, 0], exact[1, 1], abs(exact[0, 1])])
        per_mode[mode_id] = {
            "truth": exact.tolist(),
            "estimate": rec.covariance.tolist(),
            "offdiag_sign": rec.offdiag_sign,
            "std_errors": rec.std_errors.tolist(),
            "max_abs_error": float(np.max(np.abs(rec.entries - exact_entries))),
            "mean_phonon": rec.mean_phonon,
            "estimate_physicality_margin": gs.check_physicality(rec.covariance),
        }
    true_d, est_d = _dispersions(modes, truth), _dispersions(modes, estimates)
    report = {
        "n_minus": n_minus,
        "r": r,
        "shots": shots,
        "seed": seed,
        "modes": per_mode,
        "dispersions": {"truth": true_d, "estimate": est_d},
        "entanglement": {"truth": _phase_summary(true_d), "estimate": _phase_summary(est_d)},
    }
    return scans, report
