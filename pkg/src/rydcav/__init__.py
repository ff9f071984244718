"""Two Rydberg atoms in two coupled cavities: two-photon blockade breaking,
normal-mode photon filtering and phase-space diagnostics."""

from .hilbert import HilbertSpace, OperatorMatrix
from .model import SystemParams, ValidityWarning, derived_couplings
from .states import QuantumState

__all__ = [
    "HilbertSpace",
    "OperatorMatrix",
    "QuantumState",
    "SystemParams",
    "ValidityWarning",
    "derived_couplings",
]

__version__ = "0.1.0"
