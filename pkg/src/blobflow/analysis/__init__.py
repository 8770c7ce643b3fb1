"""Initial data, reference solutions, interpolants and convergence reports."""
from ..discrete import gap_total, uniform_ratio
from .interpolants import (continuum_slope, fisher, heat_interpolant_fisher, heat_normaliser, interpolant_general,
                           interpolant_heat, slope_epsilon)
from .profiles import SmoothProfile, mollify, quantile_sample, well_prepared
from .reference import BarenblattSolution, NeumannHeatSolution
from .report import (FlowReference, GammaStudy, SerfatyReport, continuum_energy_of_profile, gamma_study, gap_bound,
                     max_gap_bound, mollified_study, serfaty_report)

__all__ = [
    "gap_total", "uniform_ratio", "continuum_slope", "fisher", "heat_interpolant_fisher", "heat_normaliser",
    "interpolant_general", "interpolant_heat", "slope_epsilon", "SmoothProfile", "mollify", "quantile_sample", "well_prepared",
    "BarenblattSolution", "NeumannHeatSolution", "FlowReference", "GammaStudy", "SerfatyReport",
    "continuum_energy_of_profile", "gamma_study", "gap_bound", "max_gap_bound", "mollified_study", "serfaty_report",
]
