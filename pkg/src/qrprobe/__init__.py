"""Quantum reservoir probing of 1D spin chains with exact state-vector dynamics."""

__version__ = "0.1.0"

from .analysis import (
    DipLocation,
    R2Grid,
    SubsetSpec,
    SweepResult,
    build_r2_grid,
    locate_dip,
    mean_r2,
    r_squared,
    train_readout,
)
from .engine import EngineParams, PauliOperator, apply_hamiltonian, evolve, ground_state, propagate
from .models import ModelSpec, PauliTerm, Variant, expand_terms
from .observables import ObservableGrid, entanglement_entropy, record_trajectory
from .quench import Background, Encoding, QuenchConfig, build_initial_state, sample_inputs

__all__ = [
    "__version__",
    "Background",
    "DipLocation",
    "Encoding",
    "EngineParams",
    "ModelSpec",
    "ObservableGrid",
    "PauliOperator",
    "PauliTerm",
    "QuenchConfig",
    "R2Grid",
    "SubsetSpec",
    "SweepResult",
    "Variant",
    "apply_hamiltonian",
    "build_initial_state",
    "build_r2_grid",
    "entanglement_entropy",
    "evolve",
    "expand_terms",
    "ground_state",
    "locate_dip",
    "mean_r2",
    "propagate",
    "r_squared",
    "record_trajectory",
    "sample_inputs",
    "train_readout",
]
