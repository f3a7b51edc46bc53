//! Semi-implicit finite-volume scheme for
//! `∂_t ρ = Δρ - ∇·(χ(ρ)[β ∇(J^neum ⋆ ρ)] + σ(ρ) ∇F)` with Dirichlet data.
//!
//! Diffusion is backward Euler (one tridiagonal solve per step). The drift is explicit,
//! written as differences of face fluxes so that interior mass changes only through the
//! two boundary faces.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, mismatch, Error, Result};
use crate::field::{check_band, DensityField, DensityPath, Grid, SpaceTimeField};
use crate::linalg::solve_tridiagonal;
use crate::pde::ConvolutionOperator;
use crate::scalar::{lit, Real};

/// `χ(ρ) = ρ(1 - ρ)`.
#[inline]
pub fn chi<T: Real>(rho: T) -> T {
    rho * (T::one() - rho)
}

/// `σ(ρ) = 2ρ(1 - ρ)`.
#[inline]
pub fn sigma<T: Real>(rho: T) -> T {
    lit::<T>(2.0) * chi(rho)
}

/// Face mobility `(χ(ρ_j) + χ(ρ_{j+1})) / 2` for every face.
pub fn face_chi<T: Real>(values: &[T]) -> Vec<T> {
    let half = lit::<T>(0.5);
    values
        .windows(2)
        .map(|w| (chi(w[0]) + chi(w[1])) * half)
        .collect()
}

/// Forward differences `(v_{j+1} - v_j) / h` on every face.
pub fn face_gradient<T: Real>(values: &[T], h: T) -> Vec<T> {
    values.windows(2).map(|w| (w[1] - w[0]) / h).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdeParams<T> {
    pub beta: T,
    pub t_end: T,
    pub dt: T,
}

/// Bookkeeping of one time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepBalance<T> {
    /// `Σ_interior h (ρ^{n+1} - ρ^n)`.
    pub mass_change: T,
    /// `Δt (Φ_{last face} - Φ_{first face})`.
    pub boundary_flux: T,
}

impl<T: Real> StepBalance<T> {
    pub fn defect(&self) -> T {
        (self.mass_change - self.boundary_flux).abs()
    }
}

/// One configured instance of the scheme on a fixed grid.
#[derive(Debug, Clone)]
pub struct NonlocalSolver<'a, T> {
    conv: &'a ConvolutionOperator<T>,
    beta: T,
    sup_grad: T,
}

impl<'a, T: Real> NonlocalSolver<'a, T> {
    pub fn new(conv: &'a ConvolutionOperator<T>, beta: T) -> Result<Self> {
        if !(beta >= T::zero()) {
            return invalid(format!("interaction strength must be >= 0, got {beta}"));
        }
        Ok(Self {
            conv,
            beta,
            sup_grad: conv.kernel().sup_gradient(),
        })
    }

    /// Uses a precomputed `sup |∂_u J^neum|` instead of rescanning the kernel.
    pub fn with_sup_grad(conv: &'a ConvolutionOperator<T>, beta: T, sup_grad: T) -> Result<Self> {
        let mut s = Self::new_unscanned(conv, beta)?;
        s.sup_grad = sup_grad;
        Ok(s)
    }

    fn new_unscanned(conv: &'a ConvolutionOperator<T>, beta: T) -> Result<Self> {
        if !(beta >= T::zero()) {
            return invalid(format!("interaction strength must be >= 0, got {beta}"));
        }
        Ok(Self {
            conv,
            beta,
            sup_grad: T::zero(),
        })
    }

    pub fn grid(&self) -> Grid {
        self.conv.grid()
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    pub fn convolution(&self) -> &ConvolutionOperator<T> {
        self.conv
    }

    /// Largest admissible step: `h / (2 (β S + max|∇F|))`, infinite without drift.
    pub fn stability_bound(&self, perturbation: Option<&SpaceTimeField<T>>) -> T {
        let h = self.grid().h::<T>();
        let grad_f = perturbation.map_or(T::zero(), |f| f.max_increment() / h);
        let speed = self.beta * self.sup_grad + grad_f;
        if speed <= T::zero() {
            T::infinity()
        } else {
            h / (lit::<T>(2.0) * speed)
        }
    }

    /// Explicit drift flux on each face, evaluated at the old state.
    pub fn drift_flux(&self, values: &[T], perturbation: Option<&[T]>) -> Vec<T> {
        let h = self.grid().h::<T>();
        let chi_f = face_chi(values);
        let mut flux: Vec<T> = if self.beta > T::zero() {
            let k = self.conv.apply(values);
            face_gradient(&k, h)
                .into_iter()
                .zip(&chi_f)
                .map(|(g, c)| self.beta * *c * g)
                .collect()
        } else {
            vec![T::zero(); chi_f.len()]
        };
        if let Some(f) = perturbation {
            let two = lit::<T>(2.0);
            for ((d, g), c) in flux.iter_mut().zip(face_gradient(f, h)).zip(&chi_f) {
                *d = *d + two * *c * g;
            }
        }
        flux
    }

    /// Advances `values` by `dt`; `perturbation` holds `F` at the new time level.
    pub fn step(
        &self,
        values: &[T],
        dt: T,
        perturbation: Option<&[T]>,
    ) -> (Vec<T>, StepBalance<T>) {
        let grid = self.grid();
        let n = grid.cells();
        let h = grid.h::<T>();
        let drift = self.drift_flux(values, perturbation);
        let r = dt / (h * h);
        let m = n - 1;
        let lower = vec![-r; m];
        let upper = vec![-r; m];
        let diag = vec![T::one() + lit::<T>(2.0) * r; m];
        let mut rhs: Vec<T> = (1..n)
            .map(|j| values[j] - dt / h * (drift[j] - drift[j - 1]))
            .collect();
        rhs[0] = rhs[0] + r * values[0];
        rhs[m - 1] = rhs[m - 1] + r * values[n];
        let interior = solve_tridiagonal(&lower, &diag, &upper, &rhs);
        let mut next = Vec::with_capacity(n + 1);
        next.push(values[0]);
        next.extend(interior);
        next.push(values[n]);

        let mass_change: T = (1..n).map(|j| (next[j] - values[j]) * h).sum();
        let flux_first = (next[1] - next[0]) / h - drift[0];
        let flux_last = (next[n] - next[n - 1]) / h - drift[n - 1];
        let balance = StepBalance {
            mass_change,
            boundary_flux: dt * (flux_last - flux_first),
        };
        (next, balance)
    }

    /// Runs the scheme from `gamma` to `t_end`, keeping every step.
    ///
    /// The step count is `ceil(t_end / dt)` and the step is shrunk to divide `t_end`.
    pub fn evolve(
        &self,
        gamma: &DensityField<T>,
        t_end: T,
        dt: T,
        perturbation: Option<&SpaceTimeField<T>>,
    ) -> Result<DensityPath<T>> {
        self.evolve_with(gamma, t_end, dt, perturbation, |_, _| {})
    }

    /// As [`evolve`](Self::evolve), calling `observe(step, balance)` after every step.
    pub fn evolve_with(
        &self,
        gamma: &DensityField<T>,
        t_end: T,
        dt: T,
        perturbation: Option<&SpaceTimeField<T>>,
        mut observe: impl FnMut(usize, &StepBalance<T>),
    ) -> Result<DensityPath<T>> {
        if gamma.grid() != self.grid() {
            return mismatch("initial profile and solver grids differ");
        }
        if let Some(f) = perturbation {
            if f.grid() != self.grid() {
                return mismatch("perturbation and solver grids differ");
            }
        }
        if !(t_end > T::zero() && dt > T::zero()) {
            return invalid("t_end and dt must be positive");
        }
        let steps = (t_end / dt - lit(1e-9)).ceil().to_usize().unwrap_or(1).max(1);
        let dt = t_end / T::from_usize_lossy(steps);
        let bound = self.stability_bound(perturbation);
        if dt > bound {
            return Err(Error::Stability {
                dt: dt.to_f64_lossy(),
                bound: bound.to_f64_lossy(),
            });
        }
        let mut times = Vec::with_capacity(steps + 1);
        let mut fields = Vec::with_capacity(steps + 1);
        times.push(T::zero());
        fields.push(gamma.clone());
        let mut current = gamma.values().to_vec();
        for step in 0..steps {
            let t_next = T::from_usize_lossy(step + 1) * dt;
            let f_next = perturbation.map(|f| f.at(t_next));
            let (next, balance) = self.step(&current, dt, f_next.as_deref());
            check_band(&next, t_next)?;
            observe(step, &balance);
            times.push(t_next);
            fields.push(DensityField::unchecked(self.grid(), next.clone()));
            current = next;
        }
        DensityPath::new(times, fields)
    }

    /// Interior residual `(Φ_{j+1/2} - Φ_{j-1/2}) / h` of the stationary problem.
    pub fn stationary_residual(&self, values: &[T]) -> Vec<T> {
        let h = self.grid().h::<T>();
        let drift = self.drift_flux(values, None);
        let flux: Vec<T> = face_gradient(values, h)
            .into_iter()
            .zip(&drift)
            .map(|(g, d)| g - *d)
            .collect();
        flux.windows(2).map(|w| (w[1] - w[0]) / h).collect()
    }
}

/// Solves the hydrodynamic equation from `gamma`; the Dirichlet data are the endpoint
/// values of `gamma`.
pub fn evolve<T: Real>(
    gamma: &DensityField<T>,
    params: &PdeParams<T>,
    conv: &ConvolutionOperator<T>,
) -> Result<DensityPath<T>> {
    NonlocalSolver::new(conv, params.beta)?.evolve(gamma, params.t_end, params.dt, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::BaseKernel;
    use crate::pde::MIN_REFINE;

    fn conv(cells: usize) -> ConvolutionOperator<f64> {
        ConvolutionOperator::new(Grid::new(cells).unwrap(), BaseKernel::bump(), MIN_REFINE).unwrap()
    }

    fn bumpy(grid: Grid) -> DensityField<f64> {
        DensityField::from_fn(grid, |u: f64| {
            0.5 + 0.3 * u + 0.25 * (std::f64::consts::PI * (u + 1.0)).sin()
        })
        .unwrap()
    }

    #[test]
    fn harmonic_profile_is_stationary_without_interaction() {
        let c = conv(50);
        let gamma = DensityField::linear(c.grid(), 0.2, 0.8).unwrap();
        let path = evolve(&gamma, &PdeParams { beta: 0.0, t_end: 0.5, dt: 1e-3 }, &c).unwrap();
        for f in path.fields() {
            assert!(f.sup_distance(&gamma).unwrap() < 1e-8);
        }
    }

    #[test]
    fn constants_stay_constant_for_any_beta() {
        let c = conv(40);
        let gamma = DensityField::constant(c.grid(), 0.3).unwrap();
        for beta in [0.0, 0.5, 1.0] {
            let solver = NonlocalSolver::new(&c, beta).unwrap();
            let mut current = gamma.values().to_vec();
            for _ in 0..50 {
                let (next, _) = solver.step(&current, 1e-3, None);
                for (a, b) in next.iter().zip(&current) {
                    assert!((a - b).abs() < 1e-10, "beta {beta}");
                }
                current = next;
            }
        }
    }

    #[test]
    fn mass_balance_telescopes() {
        let c = conv(80);
        let solver = NonlocalSolver::new(&c, 1.0).unwrap();
        let mut worst: f64 = 0.0;
        solver
            .evolve_with(&bumpy(c.grid()), 0.2, 1e-3, None, |_, b| worst = worst.max(b.defect()))
            .unwrap();
        assert!(worst < 1e-10, "mass balance defect {worst}");
    }

    #[test]
    fn zero_perturbation_reproduces_evolve_exactly() {
        let c = conv(40);
        let solver = NonlocalSolver::new(&c, 0.8).unwrap();
        let gamma = bumpy(c.grid());
        let plain = solver.evolve(&gamma, 0.1, 1e-3, None).unwrap();
        let zero = SpaceTimeField::zero(c.grid(), vec![0.0, 0.1]).unwrap();
        let tilted = solver.evolve(&gamma, 0.1, 1e-3, Some(&zero)).unwrap();
        assert_eq!(plain, tilted);
    }

    #[test]
    fn stability_violation_is_reported() {
        let c = conv(40);
        let solver = NonlocalSolver::new(&c, 50.0).unwrap();
        let err = solver.evolve(&bumpy(c.grid()), 0.1, 0.05, None).unwrap_err();
        assert!(matches!(err, Error::Stability { .. }));
    }

    #[test]
    fn self_convergence_under_refinement() {
        // three nested (h, dt) levels, compared on the coarse nodes
        let gamma_fn = |u: f64| 0.5 + 0.3 * u + 0.25 * (std::f64::consts::PI * (u + 1.0)).sin();
        let mut finals = Vec::new();
        for (cells, dt) in [(25usize, 4e-3), (50, 2e-3), (100, 1e-3), (200, 5e-4)] {
            let c = conv(cells);
            let gamma = DensityField::from_fn(c.grid(), gamma_fn).unwrap();
            let path = evolve(&gamma, &PdeParams { beta: 0.1, t_end: 0.2, dt }, &c).unwrap();
            finals.push(path.last().clone());
        }
        let coarse = finals[0].grid();
        let on_coarse = |f: &DensityField<f64>| {
            let stride = f.grid().cells() / coarse.cells();
            DensityField::new(coarse, f.values().iter().step_by(stride).copied().collect()).unwrap()
        };
        let diffs: Vec<f64> = finals
            .windows(2)
            .map(|w| on_coarse(&w[0]).l1_distance(&on_coarse(&w[1])).unwrap())
            .collect();
        for w in diffs.windows(2) {
            assert!(w[0] / w[1] >= 1.8, "refinement ratios {diffs:?}");
        }
    }
}
