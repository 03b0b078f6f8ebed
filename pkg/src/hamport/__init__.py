"""Port-Hamiltonian boundary control systems with nonlinear dynamic controllers.

Modules
-------
core
    Plant, controller, boundary traces and energies.
conditions
    Checks of the structural, passivity, observability and controller hypotheses.
discretize
    Energy-consistent SBP-SAT semidiscretization of the closed loop.
signals, simulate
    Disturbance signals and implicit-midpoint integration.
diagnostics
    Stability verdicts from trajectories.
models
    Vibrating string, Timoshenko beam, controller library and presets.
cli
    Scenario runner (``hamport`` console script).
"""
from .conditions import ConditionReport, Verdict, certify
from .core import (BoundaryTrace, ClosedLoopState, Controller, EnergyDensity, Interconnection,
                   PortHamiltonianSystem, boundary_trace, closed_loop_energy, energy)
from .diagnostics import (NormEquivalence, StabilityReport, convergence_time,
                          dissipation_residual, fit_contraction, gain_curve, norm_equivalence,
                          ugs_check)
from .discretize import FiniteModel, discrete_generator_spectrum, discretize_closed_loop
from .errors import HamportError
from .models import (controller_library, preset, random_initial_state, smooth_bump_state,
                     timoshenko_beam, vibrating_string)
from .signals import make_signal
from .simulate import Trajectory, load_trajectory, simulate

__version__ = "0.1.0"

__all__ = [
    "BoundaryTrace", "ClosedLoopState", "ConditionReport", "Controller", "EnergyDensity",
    "FiniteModel", "HamportError", "Interconnection", "NormEquivalence",
    "PortHamiltonianSystem", "StabilityReport", "Trajectory", "Verdict", "boundary_trace",
    "certify", "closed_loop_energy", "controller_library", "convergence_time",
    "discrete_generator_spectrum", "discretize_closed_loop", "dissipation_residual", "energy",
    "fit_contraction", "gain_curve", "load_trajectory", "make_signal", "norm_equivalence",
    "preset", "random_initial_state", "simulate", "smooth_bump_state", "timoshenko_beam",
    "ugs_check", "vibrating_string",
]
