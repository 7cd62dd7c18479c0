"""Spectral Galerkin simulator and invariant-measure laboratory for the
averaged two-dimensional ideal flow on the torus.

The package works in vorticity coordinates: a flow state is the vector of
Fourier coefficients of the stream function's filtered Laplacian on the
half-lattice of retained wavenumbers.  Sub-modules:

``lattice``      mode bookkeeping, model parameters, fields, conserved
                 quantities, interaction coefficients, serialization;
``dynamics``     the truncated quadratic vector field, its derivatives,
                 divergence, Hilbert-Schmidt norms, support diagnostics;
``stepping``     time integration (quadratic-invariant-preserving implicit
                 midpoint, classical Runge-Kutta) and trajectory records;
``measures``     the Gaussian invariant ensemble, the energy density, and
                 fixed-energy (level-set) sampling with moment formulas;
``experiments``  end-to-end statistical experiments with reports;
``cli``          the ``avgeuler`` command-line interface.
"""

from .lattice import (
    TWO_PI,
    ConjugateSymmetryError,
    DegeneratePairError,
    ModeAbsentError,
    ModelParams,
    SpectralField,
    Truncation,
    TruncationMismatchError,
    CoeffTable,
    alpha_coeff,
    build_coeff_table,
    build_truncation,
    energy,
    energy_gradient,
    enstrophy,
    field_from_dict,
    field_from_json,
    field_to_json,
    format_float,
    is_positive,
    lookup,
    pair_coeff,
    sobolev_norm,
    sobolev_weight,
    sobolev_weights,
    to_physical,
    zero_field,
)
from .dynamics import (
    AliasingError,
    SupportSeries,
    divergence,
    energy_pairing,
    enstrophy_pairing,
    eval_vector_field,
    eval_vector_field_batch,
    eval_vector_field_fast,
    hessian_entry,
    hs_norm_grad,
    hs_norm_hess,
    jacobian,
    pairing_scale,
    series_threshold,
    support_series,
)
from .stepping import (
    SCHEMES,
    FixedPointError,
    NonFiniteError,
    StepperConfig,
    Trajectory,
    evolve,
    evolve_batch,
    reversibility_defect,
    step,
    step_batch,
)
from .measures import (
    DensityAccuracyWarning,
    GibbsSpec,
    HypoexponentialDensity,
    SamplerDiagnosticsWarning,
    SimplexSamplerConfig,
    audit_surface_constant,
    build_energy_density,
    build_gibbs_spec,
    mu_abs_moment,
    mu_theoretical_moment,
    nu_moment,
    nu_second_moment,
    rho_density,
    sample_mu,
    sample_mu_ensemble,
    sample_nu,
    sample_nu_ensemble,
)
from .experiments import (
    ConservationBreachError,
    ConvergenceTable,
    ExperimentConfig,
    InvarianceReport,
    RecurrenceResult,
    SurfaceInvarianceReport,
    build_provenance,
    canonical_json,
    load_initial_field,
    paired_drift_z,
    report_document,
    run_convergence,
    run_invariance,
    run_recurrence,
    run_surface_invariance,
    write_csv,
)
from .cli import cli

__version__ = "1.0.0"

__all__ = [
    "TWO_PI",
    "__version__",
    # lattice
    "ConjugateSymmetryError", "DegeneratePairError", "ModeAbsentError",
    "ModelParams", "SpectralField", "Truncation", "TruncationMismatchError",
    "CoeffTable", "alpha_coeff", "build_coeff_table", "build_truncation",
    "energy", "energy_gradient", "enstrophy", "field_from_dict",
    "field_from_json", "field_to_json", "format_float", "is_positive",
    "lookup", "pair_coeff", "sobolev_norm", "sobolev_weight",
    "sobolev_weights", "to_physical", "zero_field",
    # dynamics
    "AliasingError", "SupportSeries", "divergence", "energy_pairing",
    "enstrophy_pairing", "eval_vector_field", "eval_vector_field_batch",
    "eval_vector_field_fast", "hessian_entry", "hs_norm_grad",
    "hs_norm_hess", "jacobian", "pairing_scale", "series_threshold",
    "support_series",
    # stepping
    "SCHEMES", "FixedPointError", "NonFiniteError", "StepperConfig",
    "Trajectory", "evolve", "evolve_batch", "reversibility_defect", "step",
    "step_batch",
    # measures
    "DensityAccuracyWarning", "GibbsSpec", "HypoexponentialDensity",
    "SamplerDiagnosticsWarning", "SimplexSamplerConfig",
    "audit_surface_constant", "build_energy_density", "build_gibbs_spec",
    "mu_abs_moment", "mu_theoretical_moment", "nu_moment",
    "nu_second_moment", "rho_density", "sample_mu", "sample_mu_ensemble",
    "sample_nu", "sample_nu_ensemble",
    # experiments
    "ConservationBreachError", "ConvergenceTable", "ExperimentConfig",
    "InvarianceReport", "RecurrenceResult", "SurfaceInvarianceReport",
    "build_provenance", "canonical_json", "load_initial_field",
    "paired_drift_z", "report_document",
    "run_convergence", "run_invariance", "run_recurrence",
    "run_surface_invariance", "write_csv",
    # cli
    "cli",
]
