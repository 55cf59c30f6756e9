"""Mechanics of a symmetric three-ion chain.

Internal units: hbar = 1, outer-ion mass = 1, axial trap frequency = 1 and
lengths in units of the equilibrium spacing d_eq. With
d_eq^3 = 5 e^2 / (16 pi m omega_z^2 eps0) the Coulomb scale
e^2 / (4 pi eps0 d_eq^3) equals 4/5 m omega_z^2, so no physical constants
appear below.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from .exceptions import UnstableChainError

MASS_MG24 = 23.985
MASS_BE9 = 9.0122

#: e^2 / (4 pi eps0 d_eq^3) in units of m omega_z^2.
COULOMB_SCALE = 4.0 / 5.0
#: e^2 / (2 pi eps0 d_eq^3), the prefactor of the transverse coupling.
TRANSVERSE_PREFACTOR = 2.0 * COULOMB_SCALE


class Direction(enum.Enum):
    TRANSVERSE = "transverse"
    AXIAL = "axial"


class Parity(enum.Enum):
    EVEN = "even"
    ODD = "odd"


@dataclass(frozen=True)
class IonChainSpec:
    """Physical scenario: two equal outer ions around a central ion.

    Masses are in atomic mass units; only their ratio enters the dynamics.
    ``freq_ratio`` is omega_x / omega_z and is ignored for axial motion.
    """

    mass_outer: float = MASS_MG24
    mass_center: float = MASS_BE9
    freq_ratio: float = 1.7
    direction: Direction = Direction.TRANSVERSE

    def __post_init__(self):
        for name in ("mass_outer", "mass_center", "freq_ratio"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        if not isinstance(self.direction, Direction):
            object.__setattr__(self, "direction", Direction(self.direction))

    @property
    def masses(self) -> np.ndarray:
        """Masses in units of the outer-ion mass."""
        mc = self.mass_center / self.mass_outer
        return np.array([1.0, mc, 1.0])

    def with_ratio(self, freq_ratio: float) -> "IonChainSpec":
        return replace(self, freq_ratio=freq_ratio)


@dataclass(frozen=True)
class ModeDecomposition:
    """Normal modes sorted by frequency; eigenvectors are columns."""

    frequencies: np.ndarray
    eigenvectors: np.ndarray
    parities: tuple
    coupling_coeffs: tuple
    omega_odd: float
    spec: IonChainSpec = field(compare=False)

    @property
    def odd_index(self) -> int:
        return self.parities.index(Parity.ODD)

    @property
    def even_indices(self) -> tuple:
        return tuple(i for i, p in enumerate(self.parities) if p is Parity.EVEN)

    @property
    def even_frequencies(self) -> np.ndarray:
        return self.frequencies[list(self.even_indices)]


def equilibrium_positions(spec: IonChainSpec) -> np.ndarray:
    """Axial equilibrium coordinates in units of d_eq.

    Equal outer masses and charges make the chain mirror symmetric, so the
    positions are exactly (-1, 0, 1).
    """
    return np.array([-1.0, 0.0, 1.0])


def _inverse_cubed_distances(positions: np.ndarray) -> np.ndarray:
    diff = np.abs(positions[:, None] - positions[None, :])
    with np.errstate(divide="ignore"):
        inv = 1.0 / diff**3
    np.fill_diagonal(inv, 0.0)
    return inv


def transverse_coupling_matrix(spec: IonChainSpec) -> np.ndarray:
    """Linearized transverse potential matrix gamma (units m omega_z^2).

    gamma_ii = (m^2/m_i) omega_x^2 - sum_j P / |z_i - z_j|^3 and
    gamma_ij = P / |z_i - z_j|^3 with P = 8/5.
    """
    inv = TRANSVERSE_PREFACTOR * _inverse_cubed_distances(equilibrium_positions(spec))
    trap = spec.freq_ratio**2 / spec.masses
    return np.diag(trap - inv.sum(axis=1)) + inv


def axial_coupling_matrix(spec: IonChainSpec) -> np.ndarray:
    """Linearized axial potential matrix (units m omega_z^2).

    The axial trap curvature is mass independent. The Coulomb curvature
    along the chain axis is 2 e^2/(4 pi eps0 |z_i - z_j|^3), i.e. 8/5 for
    neighbours and 1/5 for the outer pair.
    """
    k = 2.0 * COULOMB_SCALE * _inverse_cubed_distances(equilibrium_positions(spec))
    return np.eye(3) + np.diag(k.sum(axis=1)) - k


def coupling_matrix(spec: IonChainSpec) -> np.ndarray:
    if spec.direction is Direction.AXIAL:
        return axial_coupling_matrix(spec)
    return transverse_coupling_matrix(spec)


def mass_weighted_matrix(spec: IonChainSpec) -> np.ndarray:
    """K_ij = gamma_ij / sqrt(m_i m_j); its eigenvalues are omega_n^2."""
    s = 1.0 / np.sqrt(spec.masses)
    return coupling_matrix(spec) * np.outer(s, s)


# Orthogonal change to the mirror-adapted basis: (even, center, odd).
_PARITY_BASIS = np.array(
    [
        [1 / np.sqrt(2), 0.0, 1 / np.sqrt(2)],
        [0.0, 1.0, 0.0],
        [1 / np.sqrt(2), 0.0, -1 / np.sqrt(2)],
    ]
)


def _parity_spectrum(spec: IonChainSpec):
    """Eigenpairs of K computed separately in the even and odd sectors."""
    K = mass_weighted_matrix(spec)
    B = _PARITY_BASIS.T @ K @ _PARITY_BASIS
    even_vals, even_vecs = np.linalg.eigh(B[:2, :2])
    odd_val = B[2, 2]
    vectors = []
    for j in range(2):
        u = np.array([even_vecs[0, j], even_vecs[1, j], 0.0])
        vectors.append(_PARITY_BASIS @ u)
    vectors.append(_PARITY_BASIS[:, 2].copy())
    values = np.array([even_vals[0], even_vals[1], odd_val])
    parities = (Parity.EVEN, Parity.EVEN, Parity.ODD)
    return values, np.column_stack(vectors), parities


def stability_margin(spec: IonChainSpec) -> float:
    """Smallest eigenvalue of the mass-weighted matrix (units omega_z^2).

    Positive if and only if the linear configuration is stable.
    """
    values, _, _ = _parity_spectrum(spec)
    return float(values.min())


def critical_ratio(
    mass_outer: float = MASS_MG24,
    mass_center: float = MASS_BE9,
    bracket: tuple = (0.5, 10.0),
) -> float:
    """omega_x/omega_z at which the transverse linear chain goes zig-zag."""

    def margin(ratio):
        return stability_margin(
            IonChainSpec(mass_outer, mass_center, ratio, Direction.TRANSVERSE)
        )

    lo, hi = bracket
    while margin(hi) <= 0:
        hi *= 2.0
    return brentq(margin, lo, hi, xtol=1e-14, rtol=1e-14)


def normal_modes(spec: IonChainSpec) -> ModeDecomposition:
    """Diagonalize the linearized chain and label the modes by parity.

    Raises
    ------
    UnstableChainError
        If an eigenvalue is not positive (the zig-zag transition is crossed).
    """
    values, vectors, parities = _parity_spectrum(spec)
    if values.min() <= 0:
        crit = None
        if spec.direction is Direction.TRANSVERSE:
            crit = critical_ratio(spec.mass_outer, spec.mass_center)
        raise UnstableChainError(
            f"linear chain unstable: smallest eigenvalue {values.min():.6g}",
            critical_ratio=crit,
        )

    # ascending frequency, even first on ties
    order = sorted(range(3), key=lambda i: (values[i], parities[i] is Parity.ODD))
    values = values[order]
    vectors = vectors[:, order]
    parities = tuple(parities[i] for i in order)

    for j in range(3):
        # deterministic sign: outer-ion component positive
        if vectors[0, j] < 0:
            vectors[:, j] = -vectors[:, j]

    freqs = np.sqrt(values)
    coeffs = tuple(
        float(np.sqrt(2.0) * vectors[0, j])
        for j in range(3)
        if parities[j] is Parity.EVEN
    )
    odd = parities.index(Parity.ODD)
    return ModeDecomposition(
        frequencies=freqs,
        eigenvectors=vectors,
        parities=parities,
        coupling_coeffs=coeffs,
        omega_odd=float(freqs[odd]),
        spec=spec,
    )
