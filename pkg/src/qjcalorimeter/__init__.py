"""Quantum-jump simulation of a driven qubit coupled to a finite calorimeter."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    DriveProtocol,
    GaussianParams,
    GaussianTemp,
    Ideal,
    Macro,
    Micro,
    QubitState,
    SimulationConfig,
)
from .dynamics import JumpEvent, TrajectoryRecord, simulate_trajectory  # noqa: E402
from .ensemble import EnsembleConfig, EnsembleResult, run_ensemble  # noqa: E402
