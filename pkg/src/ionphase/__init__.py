"""Entanglement phases of two trapped ions coupled through a cooled central ion."""
from .chain import (
    Direction,
    IonChainSpec,
    ModeDecomposition,
    Parity,
    critical_ratio,
    normal_modes,
    stability_margin,
)
from .gaussian import Basis, CovarianceState, log_negativity, symplectic_eigenvalues
from .phases import (
    AsymptoticParams,
    Phase,
    PhaseLabel,
    build_asymptotic_state,
    classify_phase,
    critical_params,
    negativity_trace,
    phase_diagram,
)

__version__ = "0.1.0"
