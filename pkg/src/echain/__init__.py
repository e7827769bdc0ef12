"""Entanglement decay along chains of noisy quantum channels."""
from .config import DimensionError, NotHermitianError, NotPositiveError, Tolerances, override_tolerances, tol
from .states import DensityMatrix, PureState
from .channels import QuantumChannel

__all__ = [
    "DensityMatrix",
    "DimensionError",
    "NotHermitianError",
    "NotPositiveError",
    "PureState",
    "QuantumChannel",
    "Tolerances",
    "override_tolerances",
    "tol",
]
__version__ = "0.1.0"
