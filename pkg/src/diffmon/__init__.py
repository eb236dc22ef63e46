"""Toolkit for diffusive quantum measurements.

Validates and interconverts the three parameterizations of diffusive
continuous monitorings (measurement matrix, current correlations, optical
realization), simulates the conditioned and unconditioned dynamics they
generate, and exposes every defining identity as a runnable check.
"""

__version__ = "0.1.0"

from .dynamics import (
    LindbladModel,
    backaction_apply,
    check_density_matrix,
    diffusion_matrix,
    hermitian_basis,
    liouvillian_apply,
    me_integrate,
    predicted_autocorrelation,
    purity,
    regression_correlation,
    trace_distance,
    urep_current_mean,
)
from .linalg import classify, polar_decompose, positive_sqrt, pseudo_inverse
from .noise import NoiseSource, draw_wiener
from .reps import (
    BRep,
    MRep,
    OrthoMatrix,
    TRep,
    URep,
    brep_o_to_mrep,
    brep_to_mrep,
    brep_to_urep,
    custom_efficiency_mrep,
    efficient_decomposition,
    heterodyne_mrep,
    homodyne_mrep,
    mrep_to_brep_o,
    mrep_to_trep,
    mrep_to_urep,
    mrep_trep,
    trep_polar,
    trep_to_mrep,
    trep_to_urep,
    urep_assemble,
    urep_split,
    validate_brep,
    validate_mrep,
    validate_trep,
    validate_urep,
)
from .sme import (
    BrepNoiseMatrices,
    Ensemble,
    SimulationConfig,
    Trajectory,
    brep_noise_matrices,
    lindblad_covariance,
    noise_completion,
    purity_increment_predicted,
    simulate_ensemble,
    sme_step_linear,
    sme_step_nonlinear,
)
from .stats import (
    autocorrelation_estimate,
    convergence_report,
    ensemble_mean_state,
    linear_nonlinear_consistency,
)

__all__ = [
    "__version__",
    "LindbladModel",
    "BRep",
    "MRep",
    "OrthoMatrix",
    "TRep",
    "URep",
    "BrepNoiseMatrices",
    "Ensemble",
    "NoiseSource",
    "SimulationConfig",
    "Trajectory",
    "autocorrelation_estimate",
    "backaction_apply",
    "brep_noise_matrices",
    "brep_o_to_mrep",
    "brep_to_mrep",
    "brep_to_urep",
    "check_density_matrix",
    "classify",
    "convergence_report",
    "custom_efficiency_mrep",
    "diffusion_matrix",
    "draw_wiener",
    "efficient_decomposition",
    "ensemble_mean_state",
    "hermitian_basis",
    "heterodyne_mrep",
    "homodyne_mrep",
    "lindblad_covariance",
    "linear_nonlinear_consistency",
    "liouvillian_apply",
    "me_integrate",
    "mrep_to_brep_o",
    "mrep_to_trep",
    "mrep_to_urep",
    "mrep_trep",
    "noise_completion",
    "polar_decompose",
    "positive_sqrt",
    "predicted_autocorrelation",
    "pseudo_inverse",
    "purity",
    "purity_increment_predicted",
    "regression_correlation",
    "simulate_ensemble",
    "sme_step_linear",
    "sme_step_nonlinear",
    "trace_distance",
    "trep_polar",
    "trep_to_mrep",
    "trep_to_urep",
    "urep_assemble",
    "urep_current_mean",
    "urep_split",
    "validate_brep",
    "validate_mrep",
    "validate_trep",
    "validate_urep",
]
