"""Two-mode Gaussian states described by their covariance matrix.

All states are zero-mean, hbar = 1. Quadratures are ordered pairwise,
(x_A, p_A, x_B, p_B) in the local basis and (x+, p+, x-, p-) in the
collective basis, positions in units sqrt(hbar/(m omega_z)) and momenta in
sqrt(hbar m omega_z).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .exceptions import NonFiniteInputError, UnphysicalStateError

#: Tolerance on symplectic eigenvalues below the vacuum value 1/2.
PHYSICALITY_TOL = 1e-9


class Basis(enum.Enum):
    LOCAL_AB = "local"
    COLLECTIVE_PM = "collective"


def symplectic_form(n_modes: int) -> np.ndarray:
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


# x_pm = (x_A +- x_B)/sqrt(2), same for momenta; orthogonal and involutive.
COLLECTIVE_TRANSFORM = np.array(
    [
        [1.0, 0.0, 1.0, 0.0],
        [0.0, 1.0, 0.0, 1.0],
        [1.0, 0.0, -1.0, 0.0],
        [0.0, 1.0, 0.0, -1.0],
    ]
) / np.sqrt(2.0)

_TRANSPOSE_B = np.diag([1.0, 1.0, 1.0, -1.0])


@dataclass(frozen=True)
class CovarianceState:
    matrix: np.ndarray
    basis: Basis = Basis.LOCAL_AB
    time_tag: float = 0.0

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.shape != (4, 4):
            raise ValueError(f"expected a 4x4 covariance matrix, got shape {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def block(self, mode: int) -> np.ndarray:
        """2x2 covariance of mode 0 (A or +) or mode 1 (B or -)."""
        s = slice(2 * mode, 2 * mode + 2)
        return self.matrix[s, s].copy()

    def with_matrix(self, matrix, time_tag=None) -> "CovarianceState":
        return CovarianceState(
            matrix, self.basis, self.time_tag if time_tag is None else time_tag
        )


def _rotate(state: CovarianceState, basis: Basis) -> CovarianceState:
    m = COLLECTIVE_TRANSFORM @ state.matrix @ COLLECTIVE_TRANSFORM.T
    return CovarianceState(0.5 * (m + m.T), basis, state.time_tag)


def to_collective(state: CovarianceState) -> CovarianceState:
    if state.basis is Basis.COLLECTIVE_PM:
        return state
    return _rotate(state, Basis.COLLECTIVE_PM)


def to_local(state: CovarianceState) -> CovarianceState:
    if state.basis is Basis.LOCAL_AB:
        return state
    return _rotate(state, Basis.LOCAL_AB)


def symplectic_eigenvalues(matrix) -> np.ndarray:
    """Symplectic spectrum of a 2n x 2n covariance matrix, ascending.

    Accepts a :class:`CovarianceState`, a bare array of any even size, or a
    stack of matrices with shape (..., 2n, 2n).
    """
    m = matrix.matrix if isinstance(matrix, CovarianceState) else np.asarray(matrix, float)
    if not np.all(np.isfinite(m)):
        raise NonFiniteInputError("covariance matrix contains non-finite entries")
    n = m.shape[-1] // 2
    # eigenvalues of Omega C come in pairs +-i nu
    nu = np.sort(np.abs(np.linalg.eigvals(symplectic_form(n) @ m)), axis=-1)
    return nu[..., ::2]


def check_physicality(matrix) -> float:
    """Smallest symplectic eigenvalue minus 1/2; negative means unphysical."""
    return float(symplectic_eigenvalues(matrix)[0] - 0.5)


def require_physical(matrix, what: str = "state") -> None:
    margin = check_physicality(matrix)
    if margin < -PHYSICALITY_TOL:
        raise UnphysicalStateError(f"{what} violates the uncertainty relation (margin {margin:.3e})")


def partial_transpose(state: CovarianceState) -> CovarianceState:
    """Time reversal of mode B (p_B -> -p_B) in the local basis."""
    local = to_local(state)
    return local.with_matrix(_TRANSPOSE_B @ local.matrix @ _TRANSPOSE_B)


def log_negativity(state: CovarianceState) -> float:
    """Logarithmic negativity max(0, -ln(2 nu)) of the transposed state.

    Raises
    ------
    UnphysicalStateError
        If the input state itself violates the uncertainty relation.
    """
    require_physical(state)
    nu = symplectic_eigenvalues(partial_transpose(state))[0]
    return max(0.0, -float(np.log(2.0 * nu)))


def log_negativity_batch(matrices) -> np.ndarray:
    """log_negativity for a stack of local-basis 4x4 matrices, shape (k, 4, 4)."""
    m = np.asarray(matrices, float)
    margins = symplectic_eigenvalues(m)[..., 0] - 0.5
    if np.any(margins < -PHYSICALITY_TOL):
        raise UnphysicalStateError(f"state violates the uncertainty relation (margin {margins.min():.3e})")
    nu = symplectic_eigenvalues(_TRANSPOSE_B @ m @ _TRANSPOSE_B)[..., 0]
    return np.maximum(0.0, -np.log(2.0 * nu))


def vacuum(omega_a: float = 1.0, omega_b: float = 1.0, basis=Basis.LOCAL_AB) -> CovarianceState:
    """Ground state of two oscillators with the given frequencies."""
    d = [0.5 / omega_a, 0.5 * omega_a, 0.5 / omega_b, 0.5 * omega_b]
    return CovarianceState(np.diag(d), basis)


def thermal(n_bar: float, omega: float = 1.0) -> CovarianceState:
    return CovarianceState((2 * n_bar + 1) * vacuum(omega, omega).matrix)


def two_mode_squeezed_vacuum(s: float) -> CovarianceState:
    """Two-mode squeezed vacuum of unit-frequency oscillators, E_N = 2 s."""
    c, sh = 0.5 * np.cosh(2 * s), 0.5 * np.sinh(2 * s)
    m = np.array(
        [
            [c, 0.0, sh, 0.0],
            [0.0, c, 0.0, -sh],
            [sh, 0.0, c, 0.0],
            [0.0, -sh, 0.0, c],
        ]
    )
    return CovarianceState(m)


def squeezer(r: float) -> np.ndarray:
    return np.diag([np.exp(-r), np.exp(r)])


def rotation(phi: float) -> np.ndarray:
    c, s = np.cos(phi), np.sin(phi)
    return np.array([[c, s], [-s, c]])


def free_evolution(omega: float, t: float) -> np.ndarray:
    """Phase-space map of a harmonic oscillator of frequency omega over time t."""
    c, s = np.cos(omega * t), np.sin(omega * t)
    return np.array([[c, s / omega], [-omega * s, c]])
