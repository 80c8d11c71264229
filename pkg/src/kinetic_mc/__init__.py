"""Particle Monte Carlo solvers for Boltzmann-type binary-collision equations."""

from .core import Ensemble, ModelId, Scheme, SchemeParams
from .models import ModelSpec, InitialCondition
from .solvers import nanbu_step, trmc_step, run

__version__ = "0.1.0"
