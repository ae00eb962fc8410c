"""Simulation of controlled reversible inhomogeneous broadening (CRIB) quantum memories.

A linearized Maxwell-Bloch solver and an exact single-excitation model of
the same light-atom system, with the metrics and command line used to check
storage, time-reversed recall and efficiency.
"""

__version__ = "0.1.0"

from .broadening import DetuningProfile, PhysicalShiftModel, flip, make_profile, shift_from_field
from .model import (ControlEvent, ControlSchedule, PulseShape, RunRecord, SpatialGrid, SpectralGrid,
                    UnitsContract, build_grids, sample_pulse)
from .solver import MaxwellBlochSolver, run_protocol, validate_schedule

__all__ = [
    "ControlEvent", "ControlSchedule", "DetuningProfile", "MaxwellBlochSolver", "PhysicalShiftModel",
    "PulseShape", "RunRecord", "SpatialGrid", "SpectralGrid", "UnitsContract", "build_grids", "flip",
    "make_profile", "run_protocol", "sample_pulse", "shift_from_field", "validate_schedule",
]
