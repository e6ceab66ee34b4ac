"""Two-dimensional photo-thermal forward simulator and phaseless inverse-source laboratory."""

from .boundary import (BoundaryDensity, BoundaryOperatorSet, ConditioningError, assemble_operators,
                       jump_relation_check, lemma41_check, single_layer_eval)
from .geometry import Curve, VolumeGrid, make_curve, make_grid
from .heat import (BackgroundField, HeatMaterial, HeatSetup, MeasurementSet, background_response,
                   boundary_measurement, compute_Q, solve_heat_densities)
from .kernels import DrudeParams, drude_eps, expansion_constants, green_low_freq_expansion, helmholtz_green
from .lab import (SourcePair, SweepFit, compare_measurements, fit_frequency_coefficients, fourier_direction_test,
                  greens_identity_check, make_source, navier_vanishing_test, reconstruct_parametric,
                  recover_total_intensity, verify_moment_identity, verify_trace_identity)
from .scattering import SolverError, SourceField, asymptotic_field, solve_lippmann_schwinger
from .volume import VolumeField, volume_potential

__version__ = "0.1.0"

__all__ = [
    "BackgroundField", "BoundaryDensity", "BoundaryOperatorSet", "ConditioningError", "Curve", "DrudeParams",
    "HeatMaterial", "HeatSetup", "MeasurementSet", "SolverError", "SourceField", "SourcePair", "SweepFit",
    "VolumeField", "VolumeGrid", "assemble_operators", "asymptotic_field", "background_response",
    "boundary_measurement", "compare_measurements", "compute_Q", "drude_eps", "expansion_constants",
    "fit_frequency_coefficients", "fourier_direction_test", "green_low_freq_expansion", "greens_identity_check",
    "helmholtz_green", "jump_relation_check", "lemma41_check", "make_curve", "make_grid", "make_source",
    "navier_vanishing_test", "reconstruct_parametric", "recover_total_intensity", "single_layer_eval",
    "solve_heat_densities", "solve_lippmann_schwinger", "verify_moment_identity", "verify_trace_identity",
    "volume_potential",
]
