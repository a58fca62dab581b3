"""
chnl: finite-volume Cahn-Hilliard solvers with a composition-dependent
gradient coefficient ``a(u)``, viscosity, a sixth-order ``δΔ²u`` term,
Yosida-regularised singular potentials and a phase-field relaxation.

The modules build on each other:

``grid``         uniform tensor grids, Laplacian and transform solvers
``energetics``   potentials, Yosida/Moreau regularisation, ``a(u)``, energy
``model``        chemical potential, residuals, initial data
``stepper``      implicit Euler with Newton-Krylov, explicit RK4 oracle
``diagnostics``  energy balance, dispersion, sweeps, contraction
``config``/``cli``  batch runs from ``key = value`` files
"""

from .energetics import CoefficientSpec, PotentialSpec, energy
from .errors import StepFailure
from .grid import BC, Domain, Field
from .model import Constant, CosineMode, Mode, ModelParams, SeededNoise, SimState, TanhInterface, make_initial
from .stepper import StepperConfig, explicit_oracle, run, step

__version__ = "0.1.0"

__all__ = [
    "BC",
    "Domain",
    "Field",
    "PotentialSpec",
    "CoefficientSpec",
    "energy",
    "Mode",
    "ModelParams",
    "SimState",
    "Constant",
    "CosineMode",
    "SeededNoise",
    "TanhInterface",
    "make_initial",
    "StepperConfig",
    "StepFailure",
    "step",
    "run",
    "explicit_oracle",
]
