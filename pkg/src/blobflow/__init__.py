"""Lagrangian particle solver for one-dimensional diffusive Wasserstein gradient flows."""
from .core import Custom, Heat, Interval, InternalEnergy, PowerLaw, WholeLine
from .discrete import (Geometry, ParticleState, PiecewiseDensity, blob_density, continuum_energy, discrete_energy,
                       gap_total, geometry, second_moment, uniform_ratio)
from .flow import StepperConfig, Trajectory, simulate, step_explicit, step_proximal
from .subgradient import classify, local_slope, minimal_norm, psi_values, table_subgradient
from .transport import QuantileFunction, d2_atomic_atomic, d2_atomic_density, metric_derivative, pseudo_inverse

__version__ = "0.1.0"

__all__ = [
    "Custom", "Heat", "Interval", "InternalEnergy", "PowerLaw", "WholeLine",
    "Geometry", "ParticleState", "PiecewiseDensity", "blob_density", "continuum_energy", "discrete_energy",
    "gap_total", "geometry", "second_moment", "uniform_ratio",
    "StepperConfig", "Trajectory", "simulate", "step_explicit", "step_proximal",
    "classify", "local_slope", "minimal_norm", "psi_values", "table_subgradient",
    "QuantileFunction", "d2_atomic_atomic", "d2_atomic_density", "metric_derivative", "pseudo_inverse",
]
