//! Nonlocal hydrodynamic equation, its stationary problem and the contraction constants.

mod contraction;
mod convolution;
mod solver;
mod stationary;

pub use contraction::{
    compute_constants, contraction_check, random_profile, ContractionConstants, ContractionReport,
    BETA_CRITICAL, CONTRACTION_TOLERANCE,
};
pub use convolution::{ConvolutionOperator, MIN_REFINE};
pub use solver::{chi, evolve, face_chi, face_gradient, sigma, NonlocalSolver, PdeParams, StepBalance};
pub use stationary::{
    picard, stationary_profile, PicardOutcome, StationaryOptions, StationaryReport, AGREEMENT_TOLERANCE,
    STATIONARY_TOLERANCE,
};
