use serde::Serialize;

use crate::error::Result;
use crate::field::{DensityField, DensityPath};
use crate::ldp::basis::TestBasis;
use crate::ldp::functional::RateEvaluator;
use crate::pde::face_gradient;
use crate::scalar::Real;

/// Relative slack granted to every discretized inequality.
pub const BOUND_SLACK: f64 = 0.1;

/// `∫ dt ∫ (∇π)²`, left-point in time to match the mobility in the Gram matrix.
pub fn gradient_energy<T: Real>(path: &DensityPath<T>) -> T {
    let h = path.grid().h::<T>();
    let times = path.times();
    (0..path.steps())
        .map(|s| {
            let g = face_gradient(path.fields()[s].values(), h);
            (times[s + 1] - times[s]) * g.iter().map(|v| *v * *v).sum::<T>() * h
        })
        .sum()
}

/// `½ Î⁰ - (β²/16) ∫(∇π)² ≤ Î^β ≤ 2 Î⁰ + (β²/8) ∫(∇π)²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonBounds {
    pub beta: f64,
    pub rate_beta: f64,
    pub rate_zero: f64,
    pub gradient_energy: f64,
    pub lower: f64,
    pub upper: f64,
    pub lower_holds: bool,
    pub upper_holds: bool,
}

impl ComparisonBounds {
    pub fn new(beta: f64, rate_beta: f64, rate_zero: f64, gradient_energy: f64) -> Self {
        let b2 = beta * beta;
        let lower = 0.5 * rate_zero - b2 / 16.0 * gradient_energy;
        let upper = 2.0 * rate_zero + b2 / 8.0 * gradient_energy;
        Self {
            beta,
            rate_beta,
            rate_zero,
            gradient_energy,
            lower,
            upper,
            lower_holds: rate_beta >= lower - BOUND_SLACK * lower.abs(),
            upper_holds: rate_beta <= upper * (1.0 + BOUND_SLACK),
        }
    }

    pub fn holds(&self) -> bool {
        self.lower_holds && self.upper_holds
    }
}

/// `Î^β(ρ⁰) ≤ (β²/16) ∫ dt ∫ (∇ρ⁰)²` for the heat path `ρ⁰`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeatBound {
    pub beta: f64,
    pub rate: f64,
    pub bound: f64,
    pub holds: bool,
}

pub fn heat_path_bound<T: Real>(
    evaluator: &RateEvaluator<'_, T>,
    heat_path: &DensityPath<T>,
    gamma: &DensityField<T>,
    basis: &TestBasis,
) -> Result<HeatBound> {
    let beta = evaluator.beta().to_f64_lossy();
    let rate = evaluator.rate_sup(heat_path, gamma, basis)?.rate_hat;
    let bound = beta * beta / 16.0 * gradient_energy(heat_path).to_f64_lossy();
    Ok(HeatBound {
        beta,
        rate,
        bound,
        holds: rate <= bound * (1.0 + BOUND_SLACK),
    })
}

/// Comparison sandwich for one path at the evaluator's `β`.
pub fn comparison_bounds<T: Real>(
    evaluator: &RateEvaluator<'_, T>,
    path: &DensityPath<T>,
    gamma: &DensityField<T>,
    basis: &TestBasis,
) -> Result<ComparisonBounds> {
    let rate_beta = evaluator.rate_sup(path, gamma, basis)?.rate_hat;
    let rate_zero = evaluator.with_beta(T::zero()).rate_sup(path, gamma, basis)?.rate_hat;
    Ok(ComparisonBounds::new(
        evaluator.beta().to_f64_lossy(),
        rate_beta,
        rate_zero,
        gradient_energy(path).to_f64_lossy(),
    ))
}
