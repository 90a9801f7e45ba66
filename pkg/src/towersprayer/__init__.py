"""Stochastic dynamics of an orchard tower sprayer on a random road.

Modules:
  model       3-DOF trailer/tower equations of motion
  road        Karhunen-Loeve random road generation
  integrator  adaptive RKF45 with dense grid output
  montecarlo  reproducible parallel ensembles
  analysis    statistics, PDFs, exceedance probability, PSD
  cli         command-line front end
  config      JSON run configuration
"""

__version__ = "0.1.0"

from .model import (PhysicalParams, State, ExcitationSample,
                    SingularMassMatrixError, assemble_matrices,
                    assemble_forcing, rhs, make_rhs, static_equilibrium,
                    tower_kinematics)
from .road import (RoadParams, KLBasis, RoadRealization, correlation_kernel,
                   solve_fredholm, truncation_order, sample_realization,
                   evaluate, evaluate_grid)
from .integrator import (IntegratorConfig, IntegrationStats, Trajectory,
                         IntegrationError, integrate, energy_audit)
from .montecarlo import (EnsembleConfig, Ensemble, realization_stream,
                         run_ensemble, conv_metric, convergence_study)
from .analysis import (BandStatistics, PdfEstimate, PsdEstimate,
                       ProbabilitySeries, ensemble_statistics, pdf_estimate,
                       time_averaged_pdf, large_vibration_probability,
                       psd_periodogram, spectral_slope)
from .config import RunConfig, ConfigError, load_config, default_config

__all__ = [
    "__version__",
    "PhysicalParams", "State", "ExcitationSample", "SingularMassMatrixError",
    "assemble_matrices", "assemble_forcing", "rhs", "make_rhs",
    "static_equilibrium", "tower_kinematics",
    "RoadParams", "KLBasis", "RoadRealization", "correlation_kernel",
    "solve_fredholm", "truncation_order", "sample_realization", "evaluate",
    "evaluate_grid",
    "IntegratorConfig", "IntegrationStats", "Trajectory", "IntegrationError",
    "integrate", "energy_audit",
    "EnsembleConfig", "Ensemble", "realization_stream", "run_ensemble",
    "conv_metric", "convergence_study",
    "BandStatistics", "PdfEstimate", "PsdEstimate", "ProbabilitySeries",
    "ensemble_statistics", "pdf_estimate", "time_averaged_pdf",
    "large_vibration_probability", "psd_periodogram", "spectral_slope",
    "RunConfig", "ConfigError", "load_config", "default_config",
]
