//! Registration of noisy curves by plane similarities.
//!
//! Every observed curve is modelled as a reference curve rotated about its
//! right end point, re-normalized onto `[0, 1]` and scaled vertically. The
//! crate estimates the angle and scale of each curve by least squares,
//! provides plug-in asymptotic covariances, Monte Carlo harnesses checking
//! the large-sample behaviour, and a sectioned curve-to-features pipeline
//! with sparse linear prediction of the features.

pub mod curve;
pub mod error;
pub mod io;
pub mod lab;
pub mod optim;
pub mod pipeline;
pub mod registration;
pub mod stats;
pub mod transform;

pub use curve::{
    check_admissibility, linear_interpolate, max_spacing, spacing_tail_bound, AdmissibilityReport,
    AdmissibleFunction, DesignGrid, SampledCurve, SpacingReport,
};
pub use error::{Error, Result};
pub use lab::{
    generate_toy, run_clt_check, run_consistency_sweep, run_interp_gap_check, run_spacing_check, McConfig,
    MonteCarloReport, ToyDataset, ToyReference, ToySpec,
};
pub use optim::BfgsOptions;
pub use pipeline::{
    empirical_cdf, error_rate, extract_features, oga_fit, reconstruct_curve, split_sections, train_pipeline,
    FeatureVector, PipelineConfig, PipelineReport, SectionedCurveSet, SparseLinearModel,
};
pub use registration::{
    asymptotic_covariance, contrast, estimate, estimate_interpolated, residual_variance,
    Matrix2, ReferenceMode, RegistrationProblem, RegistrationResult, SolverOptions,
};
pub use transform::{
    grad_transformed_value, inverse_transform_point, solve_design_preimage, transform_point,
    transformed_value, ParamBox, TransformParams,
};
