//! Dynamical large-deviation rate functional: weak-form pairing, Galerkin supremum,
//! energy and comparison bounds.

mod basis;
mod bounds;
mod energy;
mod functional;

pub use basis::TestBasis;
pub use bounds::{comparison_bounds, gradient_energy, heat_path_bound, ComparisonBounds, HeatBound, BOUND_SLACK};
pub use energy::{energy_q, energy_q_var, EnergyValue, SIGMA_FLOOR};
pub use functional::{rate_from_f, sigma_norm_sq, RateEvaluator, RateReport, RIDGE};

#[cfg(test)]
mod tests;
