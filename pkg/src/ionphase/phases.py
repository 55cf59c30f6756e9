"""Asymptotic entanglement between the outer ions and its three phases.

Laser cooling of the central ion drives both even modes into their vacuum,
while the odd mode x- = (x_A - x_B)/sqrt(2) keeps its initial (thermal,
squeezed) state and rotates freely at omega_odd. Everything here works in
units hbar = m = omega_z = 1.
"""
from __future__ import annotations

import enum
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import gaussian as gs
from .chain import IonChainSpec, ModeDecomposition, normal_modes, stability_margin
from .exceptions import NonPositiveFactorError, UnphysicalStateError

#: Negativities at or below this value count as zero when labelling phases.
PHASE_TOL = 1e-9
DEFAULT_KAPPA = 0.1


class Phase(enum.Enum):
    PERSISTENT = "Persistent"
    DEATH_REVIVAL = "DeathRevival"
    SEPARABLE = "Separable"


@dataclass(frozen=True)
class AsymptoticParams:
    r: float
    r_crit: float
    S_crit: float
    S_min: float
    E_N0: float
    omega_odd: float
    dx_plus: float
    dp_plus: float


@dataclass(frozen=True)
class PhaseLabel:
    phase: Phase
    sup_EN: float
    inf_EN: float


def label_from_extrema(sup_en: float, inf_en: float, tol: float = PHASE_TOL) -> Phase:
    if inf_en > tol:
        return Phase.PERSISTENT
    if sup_en > tol:
        return Phase.DEATH_REVIVAL
    return Phase.SEPARABLE


def asymptotic_even_variances(modes: ModeDecomposition) -> tuple:
    """Dispersions (dx+, dp+) once both even modes sit in their vacuum.

    x+ = c1 Q1 + c2 Q2 in terms of the even normal coordinates, so
    <x+^2> = (c1^2/w1 + c2^2/w2)/2 and <p+^2> = (w1 c1^2 + w2 c2^2)/2. The
    symmetrized cross moment <{x+, p+}> vanishes for vacua.
    """
    c = np.asarray(modes.coupling_coeffs)
    w = modes.even_frequencies
    x2 = 0.5 * np.sum(c**2 / w)
    p2 = 0.5 * np.sum(c**2 * w)
    return float(np.sqrt(x2)), float(np.sqrt(p2))


def critical_params(modes: ModeDecomposition, n_minus: float = 0.0, r: float = 0.0) -> AsymptoticParams:
    if n_minus < 0:
        raise ValueError(f"n_minus must be non-negative, got {n_minus}")
    dx, dp = asymptotic_even_variances(modes)
    w = modes.omega_odd
    r_crit = 0.5 * abs(np.log(w * dx / dp))
    s_min = 0.5 * np.log(2.0 * dx * dp)
    # dx- dp- = (2n+1)/2 at the extremal times, whatever the squeezing
    odd_product = (2.0 * n_minus + 1.0) / 2.0
    s_crit = 0.5 * np.log(4.0 * dx * dp * odd_product)
    return AsymptoticParams(
        r=abs(r),
        r_crit=float(r_crit),
        S_crit=float(s_crit),
        S_min=float(s_min),
        E_N0=float(max(r_crit - s_min, 0.0)),
        omega_odd=w,
        dx_plus=dx,
        dp_plus=dp,
    )


@dataclass(frozen=True)
class SweepRow:
    ratio: float
    stable: bool
    E_N0: float = float("nan")
    r_crit: float = float("nan")
    S_min: float = float("nan")


def params_sweep(spec: IonChainSpec, ratios) -> list:
    """E_N0, r_crit and S_min along a grid of omega_x/omega_z.

    Unstable ratios are kept as rows flagged ``stable=False`` with NaN values.
    """
    rows = []
    for ratio in ratios:
        s = spec.with_ratio(float(ratio))
        if stability_margin(s) <= 0:
            rows.append(SweepRow(float(ratio), False))
            continue
        p = critical_params(normal_modes(s))
        rows.append(SweepRow(float(ratio), True, p.E_N0, p.r_crit, p.S_min))
    return rows


def squeeze_by_quench(expansion_factor: float) -> float:
    """Odd-mode squeezing r = ln(f)/2 after relaxing omega_x by a factor f."""
    if not expansion_factor > 0:
        raise NonPositiveFactorError(f"expansion factor must be positive, got {expansion_factor}")
    return 0.5 * float(np.log(expansion_factor))


def _checked(state: gs.CovarianceState) -> gs.CovarianceState:
    gs.require_physical(state, "asymptotic state")
    return state


def odd_mode_block(omega_odd: float, n_minus: float, r: float, theta: float = 0.0) -> np.ndarray:
    """Covariance of the thermal squeezed odd mode.

    ``theta`` is the phase of the squeezing ellipse in frequency-scaled
    quadratures; theta = 0 squeezes position, theta = pi/2 momentum.
    """
    nu = n_minus + 0.5
    base = nu * np.diag([np.exp(-2 * r) / omega_odd, omega_odd * np.exp(2 * r)])
    S = gs.free_evolution(omega_odd, theta / omega_odd)
    return S @ base @ S.T


def build_asymptotic_state(
    modes: ModeDecomposition, n_minus: float, r: float, theta: float = 0.0
) -> gs.CovarianceState:
    """Collective-basis state of ions A and B after the even modes have cooled."""
    if n_minus < 0:
        raise ValueError(f"n_minus must be non-negative, got {n_minus}")
    dx, dp = asymptotic_even_variances(modes)
    m = np.zeros((4, 4))
    m[:2, :2] = np.diag([dx**2, dp**2])
    m[2:, 2:] = odd_mode_block(modes.omega_odd, n_minus, r, theta)
    return _checked(gs.CovarianceState(m, gs.Basis.COLLECTIVE_PM))


def evolve(state: gs.CovarianceState, t: float, omega_odd: float) -> gs.CovarianceState:
    """Rotate the odd block freely for a time t; the even block is stationary."""
    if state.basis is not gs.Basis.COLLECTIVE_PM:
        raise ValueError("evolve expects a state in the collective basis")
    S = np.eye(4)
    S[2:, 2:] = gs.free_evolution(omega_odd, t)
    m = S @ state.matrix @ S.T
    return _checked(state.with_matrix(0.5 * (m + m.T), state.time_tag + t))


def negativity_extremal(dx_plus, dp_plus, dx_minus, dp_minus):
    """Closed-form negativity at times when the odd dispersions are extremal.

    Works elementwise on arrays.
    """
    a = -np.log(2.0 * dp_minus * dx_plus)
    b = -np.log(2.0 * dx_minus * dp_plus)
    out = np.maximum(0.0, np.maximum(a, b))
    return float(out) if np.ndim(out) == 0 else out


def _extremal_dispersions(omega_odd, n_minus, r):
    """(dx-, dp-) at theta = 0 and at a quarter period later."""
    nu = np.asarray(n_minus) + 0.5
    dx0 = np.sqrt(nu * np.exp(-2 * r) / omega_odd)
    dp0 = np.sqrt(nu * omega_odd * np.exp(2 * r))
    dx1 = np.sqrt(nu * np.exp(2 * r) / omega_odd)
    dp1 = np.sqrt(nu * omega_odd * np.exp(-2 * r))
    return (dx0, dp0), (dx1, dp1)


def extremal_negativities(modes: ModeDecomposition, n_minus, r):
    """Negativity at the two extremal times, elementwise in (n_minus, r)."""
    dx, dp = asymptotic_even_variances(modes)
    (dx0, dp0), (dx1, dp1) = _extremal_dispersions(modes.omega_odd, n_minus, r)
    return negativity_extremal(dx, dp, dx0, dp0), negativity_extremal(dx, dp, dx1, dp1)


def classify_phase(modes: ModeDecomposition, n_minus: float, r: float, tol: float = PHASE_TOL) -> PhaseLabel:
    if n_minus < 0 or r < 0:
        raise ValueError("n_minus and r must be non-negative")
    e0, e1 = extremal_negativities(modes, n_minus, r)
    sup_en, inf_en = max(e0, e1), min(e0, e1)
    return PhaseLabel(label_from_extrema(sup_en, inf_en, tol), sup_en, inf_en)


def phase_discriminants(modes: ModeDecomposition, n_minus, r):
    """Signed margins (persistence, revival) of the closed-form phase test.

    Entanglement persists when |r - r_crit| > S_crit and is present at some
    time when r + r_crit > S_crit; the returned values are those differences.
    """
    p = critical_params(modes)
    s_crit = p.S_min + 0.5 * np.log(2.0 * np.asarray(n_minus) + 1.0)
    return np.abs(r - p.r_crit) - s_crit, r + p.r_crit - s_crit


def negativity_period(modes: ModeDecomposition) -> float:
    return float(np.pi / modes.omega_odd)


def negativity_trace(modes: ModeDecomposition, n_minus: float, r: float, times, theta: float = 0.0):
    """E_N(t) computed from the full covariance matrix at each time."""
    times = np.asarray(times, dtype=float)
    if not np.all(np.isfinite(times)):
        raise ValueError("time grid must be finite")
    state = build_asymptotic_state(modes, n_minus, r, theta)
    values = np.array([gs.log_negativity(evolve(state, t, modes.omega_odd)) for t in times])
    return times, values


def evolved_matrices(state: gs.CovarianceState, times, omega_odd: float) -> np.ndarray:
    """Local-basis covariance matrices of ``state`` at each time, shape (k, 4, 4)."""
    times = np.asarray(times, dtype=float)
    c, s = np.cos(omega_odd * times), np.sin(omega_odd * times)
    S = np.zeros((times.size, 4, 4))
    S[:, 0, 0] = S[:, 1, 1] = 1.0
    S[:, 2, 2] = S[:, 3, 3] = c
    S[:, 2, 3] = s / omega_odd
    S[:, 3, 2] = -omega_odd * s
    m = S @ gs.to_collective(state).matrix @ np.swapaxes(S, 1, 2)
    R = gs.COLLECTIVE_TRANSFORM
    return R @ m @ R.T


def brute_force_extrema(modes: ModeDecomposition, n_minus: float, r: float, n_times: int = 401):
    """Max and min of E_N sampled uniformly over one negativity period.

    Independent of the closed form: every sample goes through the general
    symplectic log-negativity of the full two-mode covariance matrix.
    """
    times = np.linspace(0.0, negativity_period(modes), n_times)
    state = build_asymptotic_state(modes, n_minus, r)
    values = gs.log_negativity_batch(evolved_matrices(state, times, modes.omega_odd))
    return float(values.max()), float(values.min())


@dataclass(frozen=True)
class PhaseDiagram:
    n_grid: np.ndarray
    r_grid: np.ndarray
    sup_EN: np.ndarray
    inf_EN: np.ndarray
    tol: float = PHASE_TOL

    @property
    def codes(self) -> np.ndarray:
        """0 Persistent, 1 DeathRevival, 2 Separable; shape (len(n), len(r))."""
        out = np.full(self.sup_EN.shape, 2, dtype=int)
        out[self.sup_EN > self.tol] = 1
        out[self.inf_EN > self.tol] = 0
        return out

    def label(self, i: int, j: int) -> PhaseLabel:
        sup_en, inf_en = float(self.sup_EN[i, j]), float(self.inf_EN[i, j])
        return PhaseLabel(label_from_extrema(sup_en, inf_en, self.tol), sup_en, inf_en)

    def labels(self) -> list:
        return [[self.label(i, j) for j in range(len(self.r_grid))] for i in range(len(self.n_grid))]


PHASE_ORDER = (Phase.PERSISTENT, Phase.DEATH_REVIVAL, Phase.SEPARABLE)


def worker_count() -> int:
    cap = os.environ.get("IONPHASE_THREADS")
    n = os.cpu_count() or 1
    if cap:
        n = min(n, max(1, int(cap)))
    return n


def phase_diagram(modes: ModeDecomposition, n_grid, r_grid, workers: int | None = None) -> PhaseDiagram:
    """Classify every (n_minus, r) cell; rows are evaluated in parallel."""
    n_grid = np.asarray(n_grid, dtype=float)
    r_grid = np.asarray(r_grid, dtype=float)
    workers = workers or worker_count()

    def row(n):
        e0, e1 = extremal_negativities(modes, n, r_grid)
        return np.maximum(e0, e1), np.minimum(e0, e1)

    if workers > 1 and len(n_grid) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(row, n_grid))
    else:
        rows = [row(n) for n in n_grid]
    sup_en = np.array([s for s, _ in rows]).reshape(len(n_grid), len(r_grid))
    inf_en = np.array([i for _, i in rows]).reshape(len(n_grid), len(r_grid))
    return PhaseDiagram(n_grid, r_grid, sup_en, inf_en)


def death_revival_band(modes: ModeDecomposition, n_minus: float, r_grid) -> tuple:
    """(r_low, r_high) spanned by death-revival cells on a grid at fixed n_minus."""
    r_grid = np.asarray(r_grid, dtype=float)
    codes = phase_diagram(modes, [n_minus], r_grid, workers=1).codes[0]
    idx = np.flatnonzero(codes == 1)
    if idx.size == 0:
        return float("nan"), float("nan")
    return float(r_grid[idx[0]]), float(r_grid[idx[-1]])


def _even_mode_map(modes: ModeDecomposition) -> np.ndarray:
    """Rows map (Q_e1, P_e1, Q_e2, P_e2) to (x+, p+)."""
    c1, c2 = modes.coupling_coeffs
    return np.array([[c1, 0.0, c2, 0.0], [0.0, c1, 0.0, c2]])


def even_vacuum(modes: ModeDecomposition) -> np.ndarray:
    w1, w2 = modes.even_frequencies
    return np.diag([0.5 / w1, 0.5 * w1, 0.5 / w2, 0.5 * w2])


def even_thermal(modes: ModeDecomposition, n_bar: float) -> np.ndarray:
    return (2 * n_bar + 1) * even_vacuum(modes)


def plus_block(modes: ModeDecomposition, even_cov) -> np.ndarray:
    T = _even_mode_map(modes)
    return T @ np.asarray(even_cov, float) @ T.T


def relax_even_modes(modes: ModeDecomposition, even_cov, kappa: float, t: float) -> np.ndarray:
    """Even-sector covariance after cooling at rate kappa for a time t.

    Each mode rotates at its own frequency and decays toward its vacuum,
    C(t) = e^{-kappa t} S C0 S^T + (1 - e^{-kappa t}) C_vac, which keeps
    occupations decaying as n(t) = n(0) e^{-kappa t}. This is a simplified
    amplitude-damping model, not a microscopic description of the laser.
    """
    if not kappa > 0:
        raise ValueError(f"cooling rate must be positive, got {kappa}")
    w1, w2 = modes.even_frequencies
    S = np.zeros((4, 4))
    S[:2, :2] = gs.free_evolution(w1, t)
    S[2:, 2:] = gs.free_evolution(w2, t)
    eta = np.exp(-kappa * t)
    c = eta * (S @ np.asarray(even_cov, float) @ S.T) + (1.0 - eta) * even_vacuum(modes)
    return 0.5 * (c + c.T)


def cooling_relaxation(modes: ModeDecomposition, even_cov, kappa: float = DEFAULT_KAPPA, t: float = 0.0) -> np.ndarray:
    """Plus-sector (x+, p+) block while the even modes cool.

    Raises
    ------
    UnphysicalStateError
        If an intermediate covariance breaks the uncertainty relation, which
        would point to a bug since the map is a valid Gaussian channel.
    """
    c = relax_even_modes(modes, even_cov, kappa, t)
    for what, m in (("even sector", c), ("plus block", plus_block(modes, c))):
        if gs.check_physicality(m) < -gs.PHYSICALITY_TOL:
            raise UnphysicalStateError(f"cooling produced an unphysical {what}")
    return plus_block(modes, c)



__all__ = [
    "AsymptoticParams",
    "Phase",
    "PhaseDiagram",
    "PhaseLabel",
    "SweepRow",
    "asymptotic_even_variances",
    "brute_force_extrema",
    "build_asymptotic_state",
    "classify_phase",
    "cooling_relaxation",
    "critical_params",
    "death_revival_band",
    "evolve",
    "negativity_extremal",
    "negativity_trace",
    "params_sweep",
    "phase_diagram",
    "squeeze_by_quench",
]
