use rand::Rng;
use serde::Serialize;

use crate::error::{mismatch, Result};
use crate::field::{DensityField, Grid};
use crate::kernel::KernelTable;
use crate::pde::{ConvolutionOperator, NonlocalSolver};
use crate::scalar::Real;

/// Critical interaction strength of the phase transition.
pub const BETA_CRITICAL: f64 = 0.25;
/// Relative slack of the contraction bound.
pub const CONTRACTION_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractionConstants {
    /// `sup |∂_u J^neum|`.
    pub sup_grad: f64,
    pub a: f64,
    /// Poincaré constant of (-1, 1).
    pub c_lambda: f64,
    pub beta0: f64,
}

impl ContractionConstants {
    pub fn from_sup_grad(sup_grad: f64) -> Self {
        let a = 1.0 / (6.0 * sup_grad * sup_grad);
        let c_lambda = 4.0 / (std::f64::consts::PI * std::f64::consts::PI);
        let beta0 = 1.0 / (1.0 / 3.0 + c_lambda / (2.0 * a));
        Self {
            sup_grad,
            a,
            c_lambda,
            beta0,
        }
    }

    /// Decay rate `c(β) = (1 - β/3)/C_Λ - β/(2a)`; positive exactly below `beta0`.
    pub fn c_of_beta(&self, beta: f64) -> f64 {
        (1.0 - beta / 3.0) / self.c_lambda - beta / (2.0 * self.a)
    }

    pub fn below_critical(&self) -> bool {
        self.beta0 < BETA_CRITICAL
    }
}

pub fn compute_constants<T: Real>(table: &KernelTable<T>) -> ContractionConstants {
    ContractionConstants::from_sup_grad(table.sup_grad().to_f64_lossy())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionReport {
    pub beta: f64,
    pub c_of_beta: f64,
    pub times: Vec<f64>,
    /// `‖ρ_a(t) - ρ_b(t)‖_{L²}`.
    pub distance: Vec<f64>,
    /// Worst ratio `v(t) / (e^{-c t} v(0))`; absent when `c(β) ≤ 0` or `v(0) = 0`.
    pub worst_ratio: Option<f64>,
    /// `None` when the bound is not asserted.
    pub holds: Option<bool>,
}

/// Evolves both profiles with the same scheme and compares their L² distance with
/// `e^{-c(β) t} v(0)`.
pub fn contraction_check<T: Real>(
    conv: &ConvolutionOperator<T>,
    constants: &ContractionConstants,
    rho_a: &DensityField<T>,
    rho_b: &DensityField<T>,
    beta: T,
    t_end: T,
    dt: T,
) -> Result<ContractionReport> {
    if rho_a.rho_minus() != rho_b.rho_minus() || rho_a.rho_plus() != rho_b.rho_plus() {
        return mismatch("contraction pairs must share their Dirichlet data");
    }
    let solver = NonlocalSolver::with_sup_grad(conv, beta, T::from_f64(constants.sup_grad).unwrap())?;
    let pa = solver.evolve(rho_a, t_end, dt, None)?;
    let pb = solver.evolve(rho_b, t_end, dt, None)?;
    let mut distance = Vec::with_capacity(pa.fields().len());
    for (a, b) in pa.fields().iter().zip(pb.fields()) {
        distance.push(a.l2_distance(b)?.to_f64_lossy());
    }
    let times: Vec<f64> = pa.times().iter().map(|t| t.to_f64_lossy()).collect();
    let beta = beta.to_f64_lossy();
    let c = constants.c_of_beta(beta);
    let v0 = distance[0];
    let worst_ratio = (c > 0.0 && v0 > 0.0).then(|| {
        times
            .iter()
            .zip(&distance)
            .map(|(t, v)| v / ((-c * t).exp() * v0))
            .fold(0.0, f64::max)
    });
    let holds = if c > 0.0 {
        Some(worst_ratio.map_or(distance.iter().all(|v| *v == 0.0), |r| {
            r <= 1.0 + CONTRACTION_TOLERANCE
        }))
    } else {
        None
    };
    Ok(ContractionReport {
        beta,
        c_of_beta: c,
        times,
        distance,
        worst_ratio,
        holds,
    })
}

/// Linear interpolant of the reservoir densities plus a few random sine modes, scaled to
/// stay inside `[0.05, 0.95]`.
pub fn random_profile<T: Real, R: Rng + ?Sized>(
    grid: Grid,
    rho_minus: f64,
    rho_plus: f64,
    rng: &mut R,
) -> Result<DensityField<T>> {
    let amps: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let bump = |u: f64| -> f64 {
        amps.iter()
            .enumerate()
            .map(|(k, a)| a * ((k + 1) as f64 * std::f64::consts::FRAC_PI_2 * (u + 1.0)).sin())
            .sum()
    };
    let nodes: Vec<f64> = grid.nodes();
    let base: Vec<f64> = nodes.iter().map(|u| rho_minus + (rho_plus - rho_minus) * (u + 1.0) / 2.0).collect();
    let wiggle: Vec<f64> = nodes.iter().map(|u| bump(*u)).collect();
    // largest scale keeping every node inside the band
    let mut scale = f64::INFINITY;
    for (b, w) in base.iter().zip(&wiggle) {
        if *w > 0.0 {
            scale = scale.min((0.95 - b) / w);
        } else if *w < 0.0 {
            scale = scale.min((b - 0.05) / -w);
        }
    }
    let scale = scale.max(0.0) * rng.gen_range(0.3..1.0);
    let values = base
        .iter()
        .zip(&wiggle)
        .map(|(b, w)| T::from_f64(b + scale * w).unwrap())
        .collect();
    let mut field = DensityField::new(grid, values)?;
    field = field.with_boundary(T::from_f64(rho_minus).unwrap(), T::from_f64(rho_plus).unwrap())?;
    Ok(field)
}
