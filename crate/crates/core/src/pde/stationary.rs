use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::field::{check_band, DensityField};
use crate::linalg::solve_tridiagonal;
use crate::pde::{ConvolutionOperator, NonlocalSolver};
use crate::scalar::{lit, Real};

/// Residual target for the time march.
pub const STATIONARY_TOLERANCE: f64 = 1e-8;
/// Required sup-norm agreement between the time march and the Picard iteration.
pub const AGREEMENT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryOptions<T> {
    pub tolerance: T,
    pub max_steps: usize,
    pub picard_iterations: usize,
    /// Largest pseudo time step of the march; it is also capped by the stability bound.
    pub max_dt: T,
}

impl<T: Real> Default for StationaryOptions<T> {
    fn default() -> Self {
        Self {
            tolerance: lit(STATIONARY_TOLERANCE),
            max_steps: 200_000,
            picard_iterations: 2_000,
            max_dt: lit(0.05),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum PicardOutcome {
    /// Converged to within `AGREEMENT_TOLERANCE` of the time-march profile.
    Agrees { iterations: usize, sup_difference: f64 },
    /// Converged to a different fixed point.
    Distinct { iterations: usize, sup_difference: f64 },
    NotConverged { iterations: usize, residual: f64 },
}

#[derive(Debug, Clone)]
pub struct StationaryReport<T> {
    pub profile: DensityField<T>,
    pub residual: T,
    pub march_steps: usize,
    pub picard: PicardOutcome,
}

impl<T: Real> StationaryReport<T> {
    pub fn solvers_agree(&self) -> bool {
        matches!(self.picard, PicardOutcome::Agrees { .. })
    }
}

fn sup_norm<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

/// Discrete stationary profile with Dirichlet data `rho_minus`, `rho_plus`.
///
/// Marches the evolution scheme from the linear profile until the sup norm of the
/// stationary residual drops below `tolerance`, then reruns the problem as a Picard
/// iteration (Laplace solve with frozen drift) from the same seed.
pub fn stationary_profile<T: Real>(
    conv: &ConvolutionOperator<T>,
    beta: T,
    rho_minus: T,
    rho_plus: T,
    options: &StationaryOptions<T>,
) -> Result<StationaryReport<T>> {
    let solver = NonlocalSolver::new(conv, beta)?;
    let seed = DensityField::linear(conv.grid(), rho_minus, rho_plus)?;
    let (values, residual, march_steps) = march(&solver, seed.values().to_vec(), options)?;
    let picard = match picard(&solver, seed.values().to_vec(), options) {
        Ok((p, iterations)) => {
            let d = p
                .iter()
                .zip(&values)
                .fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()))
                .to_f64_lossy();
            if d <= AGREEMENT_TOLERANCE {
                PicardOutcome::Agrees { iterations, sup_difference: d }
            } else {
                PicardOutcome::Distinct { iterations, sup_difference: d }
            }
        }
        Err(Error::NoConvergence { iterations, residual }) => {
            PicardOutcome::NotConverged { iterations, residual }
        }
        Err(e) => return Err(e),
    };
    Ok(StationaryReport {
        profile: DensityField::new(conv.grid(), values)?,
        residual,
        march_steps,
        picard,
    })
}

fn march<T: Real>(
    solver: &NonlocalSolver<'_, T>,
    mut values: Vec<T>,
    options: &StationaryOptions<T>,
) -> Result<(Vec<T>, T, usize)> {
    let dt = options.max_dt.min(solver.stability_bound(None) * lit(0.9));
    if !(dt > T::zero()) {
        return invalid("pseudo time step must be positive");
    }
    let mut residual = sup_norm(&solver.stationary_residual(&values));
    let mut steps = 0;
    while residual > options.tolerance {
        if steps == options.max_steps {
            return Err(Error::NoConvergence {
                iterations: steps,
                residual: residual.to_f64_lossy(),
            });
        }
        let (next, _) = solver.step(&values, dt, None);
        check_band(&next, T::from_usize_lossy(steps + 1) * dt)?;
        values = next;
        residual = sup_norm(&solver.stationary_residual(&values));
        steps += 1;
    }
    Ok((values, residual, steps))
}

/// Fixed-point iteration `Δ_h ρ^{k+1} = div_h D(ρ^k)`; converges when the drift is weak.
pub fn picard<T: Real>(
    solver: &NonlocalSolver<'_, T>,
    mut values: Vec<T>,
    options: &StationaryOptions<T>,
) -> Result<(Vec<T>, usize)> {
    let n = solver.grid().cells();
    let h = solver.grid().h::<T>();
    let m = n - 1;
    let lower = vec![-T::one(); m];
    let upper = vec![-T::one(); m];
    let diag = vec![lit::<T>(2.0); m];
    let mut update = T::infinity();
    for it in 0..options.picard_iterations {
        let drift = solver.drift_flux(&values, None);
        // -(ρ_{j-1} - 2ρ_j + ρ_{j+1}) = -h (D_{j+1/2} - D_{j-1/2})
        let mut rhs: Vec<T> = (1..n).map(|j| -h * (drift[j] - drift[j - 1])).collect();
        rhs[0] = rhs[0] + values[0];
        rhs[m - 1] = rhs[m - 1] + values[n];
        let interior = solve_tridiagonal(&lower, &diag, &upper, &rhs);
        update = interior
            .iter()
            .zip(&values[1..n])
            .fold(T::zero(), |acc, (a, b)| acc.max((*a - *b).abs()));
        values[1..n].copy_from_slice(&interior);
        if !values.iter().all(|v| v.is_finite()) {
            break;
        }
        let residual = sup_norm(&solver.stationary_residual(&values));
        if residual <= options.tolerance {
            return Ok((values, it + 1));
        }
    }
    Err(Error::NoConvergence {
        iterations: options.picard_iterations,
        residual: update.to_f64_lossy(),
    })
}
