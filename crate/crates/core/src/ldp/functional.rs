//! Weak-form pairing, the functional `J_G` and its supremum over a finite span.
//!
//! Time sums are matched to the evolution scheme: the diffusion term and the test
//! function are taken at the new time level, the mobility and the nonlocal drift at
//! the old one. On a path produced by the scheme the pairing then vanishes to rounding,
//! and on a path produced with an extra drift `F` it equals `<F, G>_A` exactly.

use serde::Serialize;

use crate::error::{mismatch, Result};
use crate::field::{DensityField, DensityPath, Grid, SpaceTimeField};
use crate::ldp::basis::TestBasis;
use crate::ldp::energy::energy_q;
use crate::ldp::bounds::ComparisonBounds;
use crate::linalg::SymMatrix;
use crate::pde::{face_gradient, sigma, ConvolutionOperator, NonlocalSolver};
use crate::scalar::{lit, Real};

/// Relative ridge added to the Gram diagonal.
pub const RIDGE: f64 = 1e-10;

/// Face mobility `(σ(ρ_j) + σ(ρ_{j+1})) / 2`.
pub(crate) fn face_sigma<T: Real>(values: &[T]) -> Vec<T> {
    let half = lit::<T>(0.5);
    values.windows(2).map(|w| (sigma(w[0]) + sigma(w[1])) * half).collect()
}

/// `Σ_interior h a_j g_j`.
fn pairing<T: Real>(a: &[T], g: &[T], h: T) -> T {
    let n = a.len() - 1;
    (1..n).map(|j| a[j] * g[j]).sum::<T>() * h
}

fn laplacian<T: Real>(g: &[T], h: T) -> Vec<T> {
    let n = g.len() - 1;
    let mut out = vec![T::zero(); n + 1];
    for j in 1..n {
        out[j] = (g[j - 1] - lit::<T>(2.0) * g[j] + g[j + 1]) / (h * h);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    /// `ℓ_G` for every basis element, in basis order.
    pub ell_values: Vec<f64>,
    pub gram: Vec<Vec<f64>>,
    pub gram_asymmetry: f64,
    pub gram_min_eigenvalue: f64,
    pub rate_hat: f64,
    pub energy_q: f64,
    pub energy_regularized: bool,
    pub bounds: Option<ComparisonBounds>,
    pub modes: usize,
    pub intervals: usize,
    pub ridge: f64,
}

/// Per-path quantities shared by all test functions.
struct PathData<T> {
    dt: Vec<T>,
    /// Face mobilities at `t_0..t_{M-1}`.
    sigma_f: Vec<Vec<T>>,
    /// `∇_h (J^neum ⋆ ρ^n)` on faces at `t_0..t_{M-1}`; empty when `β = 0`.
    grad_k: Vec<Vec<T>>,
}

/// Evaluator of the rate functional for one interaction strength.
#[derive(Debug, Clone, Copy)]
pub struct RateEvaluator<'a, T> {
    conv: &'a ConvolutionOperator<T>,
    beta: T,
}

impl<'a, T: Real> RateEvaluator<'a, T> {
    pub fn new(conv: &'a ConvolutionOperator<T>, beta: T) -> Result<Self> {
        NonlocalSolver::new(conv, beta)?;
        Ok(Self { conv, beta })
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    pub fn with_beta(&self, beta: T) -> Self {
        Self { conv: self.conv, beta }
    }

    fn check(&self, path: &DensityPath<T>, gamma: &DensityField<T>) -> Result<()> {
        let grid = self.conv.grid();
        if path.grid() != grid || gamma.grid() != grid {
            return mismatch("path, initial profile and convolution operator must share one grid");
        }
        if path.steps() == 0 {
            return mismatch("path needs at least one time step");
        }
        Ok(())
    }

    fn path_data(&self, path: &DensityPath<T>) -> PathData<T> {
        let h = self.conv.grid().h::<T>();
        let fields = path.fields();
        let steps = path.steps();
        let dt = path.times().windows(2).map(|w| w[1] - w[0]).collect();
        let sigma_f = fields[..steps].iter().map(|f| face_sigma(f.values())).collect();
        let grad_k = if self.beta > T::zero() {
            fields[..steps]
                .iter()
                .map(|f| face_gradient(&self.conv.apply(f.values()), h))
                .collect()
        } else {
            Vec::new()
        };
        PathData { dt, sigma_f, grad_k }
    }

    /// `ℓ_G` from explicit rows `G^n`, `n = 0..=M`.
    fn ell_rows(
        &self,
        path: &DensityPath<T>,
        gamma: &DensityField<T>,
        data: &PathData<T>,
        rows: &[Vec<T>],
    ) -> T {
        let h = self.conv.grid().h::<T>();
        let n = self.conv.grid().cells();
        let fields = path.fields();
        let steps = path.steps();
        let (rho_minus, rho_plus) = (gamma.rho_minus(), gamma.rho_plus());
        let half_beta = self.beta * lit(0.5);
        let mut total = pairing(fields[steps].values(), &rows[steps], h) - pairing(gamma.values(), &rows[0], h);
        for s in 0..steps {
            let g_next = &rows[s + 1];
            let diff: Vec<T> = g_next.iter().zip(&rows[s]).map(|(a, b)| *a - *b).collect();
            total = total - pairing(fields[s].values(), &diff, h);
            let dt = data.dt[s];
            let mut inner = pairing(fields[s + 1].values(), &laplacian(g_next, h), h);
            inner = inner - rho_plus * (g_next[n] - g_next[n - 1]) / h + rho_minus * (g_next[1] - g_next[0]) / h;
            if self.beta > T::zero() {
                let grad_g = face_gradient(g_next, h);
                let drift: T = grad_g
                    .iter()
                    .zip(&data.grad_k[s])
                    .zip(&data.sigma_f[s])
                    .map(|((g, k), sg)| *sg * *g * *k)
                    .sum::<T>()
                    * h;
                inner = inner + half_beta * drift;
            }
            total = total - dt * inner;
        }
        total
    }

    fn rows_of(path: &DensityPath<T>, g: &SpaceTimeField<T>) -> Result<Vec<Vec<T>>> {
        if g.grid() != path.grid() {
            return mismatch("test function and path grids differ");
        }
        Ok(path.times().iter().map(|t| g.at(*t)).collect())
    }

    /// Discrete weak-form pairing `ℓ_G^β(π, γ)`.
    pub fn linear_part(
        &self,
        path: &DensityPath<T>,
        gamma: &DensityField<T>,
        g: &SpaceTimeField<T>,
    ) -> Result<T> {
        self.check(path, gamma)?;
        let rows = Self::rows_of(path, g)?;
        let data = self.path_data(path);
        Ok(self.ell_rows(path, gamma, &data, &rows))
    }

    /// `J_G = ℓ_G - ½ ∫ dt <σ(π_t), (∇G_t)²>`.
    pub fn j_functional(
        &self,
        path: &DensityPath<T>,
        gamma: &DensityField<T>,
        g: &SpaceTimeField<T>,
    ) -> Result<T> {
        let ell = self.linear_part(path, gamma, g)?;
        Ok(ell - lit::<T>(0.5) * sigma_norm_sq(path, g)?)
    }

    /// Galerkin supremum of `J_G` over `span(basis)`: `½ bᵀ(A + λI)⁻¹ b`.
    pub fn rate_sup(
        &self,
        path: &DensityPath<T>,
        gamma: &DensityField<T>,
        basis: &TestBasis,
    ) -> Result<RateReport> {
        self.check(path, gamma)?;
        let (b, gram) = self.assemble(path, gamma, basis);
        let dim = basis.dim();
        let energy = energy_q(path, true)?;
        let mut report = RateReport {
            ell_values: b.iter().map(|v| v.to_f64_lossy()).collect(),
            gram: (0..dim)
                .map(|i| (0..dim).map(|j| gram.get(i, j).to_f64_lossy()).collect())
                .collect(),
            gram_asymmetry: gram.asymmetry().to_f64_lossy(),
            gram_min_eigenvalue: 0.0,
            rate_hat: 0.0,
            energy_q: energy.value.to_f64_lossy(),
            energy_regularized: energy.regularized,
            bounds: None,
            modes: basis.modes,
            intervals: basis.intervals,
            ridge: 0.0,
        };
        if dim == 0 {
            return Ok(report);
        }
        report.gram_min_eigenvalue = gram.min_eigenvalue().to_f64_lossy();
        let ridge = lit::<T>(RIDGE) * gram.trace() / T::from_usize_lossy(dim);
        let x = gram.solve_ridge(&b, ridge)?;
        let value: T = b.iter().zip(&x).map(|(a, c)| *a * *c).sum::<T>() * lit(0.5);
        report.ridge = ridge.to_f64_lossy();
        report.rate_hat = value.max(T::zero()).to_f64_lossy();
        Ok(report)
    }

    /// `b_i = ℓ_{G_i}` and `A_ij = Σ_n Δt Σ_f h σ_f(ρ^n) ∇G_i^{n+1} ∇G_j^{n+1}`, using the
    /// separable form of the basis.
    fn assemble(
        &self,
        path: &DensityPath<T>,
        gamma: &DensityField<T>,
        basis: &TestBasis,
    ) -> (Vec<T>, SymMatrix<T>) {
        let grid = self.conv.grid();
        let h = grid.h::<T>();
        let n = grid.cells();
        let kk = basis.modes;
        let dim = basis.dim();
        let data = self.path_data(path);
        let fields = path.fields();
        let steps = path.steps();
        let times: Vec<f64> = path.times().iter().map(|t| t.to_f64_lossy()).collect();
        let phis: Vec<Vec<T>> = (1..=kk).map(|k| basis.spatial(k, grid)).collect();
        let lap: Vec<Vec<T>> = phis.iter().map(|p| laplacian(p, h)).collect();
        let grads: Vec<Vec<T>> = phis.iter().map(|p| face_gradient(p, h)).collect();
        let (rho_minus, rho_plus) = (gamma.rho_minus(), gamma.rho_plus());
        let half_beta = self.beta * lit(0.5);
        let psi = |m: usize, s: usize| T::from_f64(basis.temporal(m, times[s])).unwrap();
        // hats that are nonzero at time index s
        let active = |s: usize| -> Vec<usize> {
            (0..=basis.intervals).filter(|&m| basis.temporal(m, times[s]) != 0.0).collect()
        };

        let mut b = vec![T::zero(); dim];
        let mut gram = SymMatrix::zeros(dim);
        let pair_at = |s: usize| -> Vec<T> { phis.iter().map(|p| pairing(fields[s].values(), p, h)).collect() };

        // time-boundary terms
        let end = pair_at(steps);
        let start: Vec<T> = phis.iter().map(|p| pairing(gamma.values(), p, h)).collect();
        for m in 0..=basis.intervals {
            for k in 1..=kk {
                b[basis.index(k, m)] = psi(m, steps) * end[k - 1] - psi(m, 0) * start[k - 1];
            }
        }
        for s in 0..steps {
            let p_s = pair_at(s);
            let dt = data.dt[s];
            let next = &fields[s + 1];
            let mut inner = vec![T::zero(); kk];
            for k in 0..kk {
                let g = &phis[k];
                let mut v = pairing(next.values(), &lap[k], h) - rho_plus * (g[n] - g[n - 1]) / h
                    + rho_minus * (g[1] - g[0]) / h;
                if self.beta > T::zero() {
                    let drift: T = grads[k]
                        .iter()
                        .zip(&data.grad_k[s])
                        .zip(&data.sigma_f[s])
                        .map(|((g, kv), sg)| *sg * *g * *kv)
                        .sum::<T>()
                        * h;
                    v = v + half_beta * drift;
                }
                inner[k] = v;
            }
            let mut stiff = vec![T::zero(); kk * kk];
            for k in 0..kk {
                for l in k..kk {
                    let v: T = grads[k]
                        .iter()
                        .zip(&grads[l])
                        .zip(&data.sigma_f[s])
                        .map(|((a, c), sg)| *sg * *a * *c)
                        .sum::<T>()
                        * h;
                    stiff[k * kk + l] = v;
                    stiff[l * kk + k] = v;
                }
            }
            let ms: Vec<usize> = active(s).into_iter().chain(active(s + 1)).collect();
            let mut seen = Vec::new();
            for m in ms {
                if seen.contains(&m) {
                    continue;
                }
                seen.push(m);
                let dpsi = psi(m, s + 1) - psi(m, s);
                let w = psi(m, s + 1);
                for k in 1..=kk {
                    let i = basis.index(k, m);
                    b[i] = b[i] - dpsi * p_s[k - 1] - dt * w * inner[k - 1];
                }
            }
            let next_active = active(s + 1);
            for &m in &next_active {
                for &m2 in &next_active {
                    if m2 < m {
                        continue;
                    }
                    let w = dt * psi(m, s + 1) * psi(m2, s + 1);
                    for k in 1..=kk {
                        for l in 1..=kk {
                            let (i, j) = (basis.index(k, m), basis.index(l, m2));
                            if m == m2 && j < i {
                                continue;
                            }
                            gram.add(i, j, w * stiff[(k - 1) * kk + (l - 1)]);
                        }
                    }
                }
            }
        }
        (b, gram)
    }

    /// Solves the perturbed hydrodynamic equation with the extra drift `σ(π)∇F`.
    pub fn perturbed_solve(
        &self,
        f: &SpaceTimeField<T>,
        gamma: &DensityField<T>,
        t_end: T,
        dt: T,
    ) -> Result<DensityPath<T>> {
        NonlocalSolver::new(self.conv, self.beta)?.evolve(gamma, t_end, dt, Some(f))
    }

    /// [`rate_sup`](Self::rate_sup) with the energy and the comparison bounds recorded.
    ///
    /// On a grid the energy is always finite, so the value is the Galerkin supremum.
    pub fn full_rate(
        &self,
        path: &DensityPath<T>,
        gamma: &DensityField<T>,
        basis: &TestBasis,
    ) -> Result<RateReport> {
        let mut report = self.rate_sup(path, gamma, basis)?;
        let zero = self.with_beta(T::zero()).rate_sup(path, gamma, basis)?;
        report.bounds = Some(ComparisonBounds::new(
            self.beta.to_f64_lossy(),
            report.rate_hat,
            zero.rate_hat,
            crate::ldp::bounds::gradient_energy(path).to_f64_lossy(),
        ));
        Ok(report)
    }
}

/// `Σ_n Δt Σ_f h σ_f(ρ^n) (∇G^{n+1})²`.
pub fn sigma_norm_sq<T: Real>(path: &DensityPath<T>, g: &SpaceTimeField<T>) -> Result<T> {
    if g.grid() != path.grid() {
        return mismatch("test function and path grids differ");
    }
    let grid: Grid = path.grid();
    let h = grid.h::<T>();
    let times = path.times();
    let mut total = T::zero();
    for s in 0..path.steps() {
        let dt = times[s + 1] - times[s];
        let sig = face_sigma(path.fields()[s].values());
        let grad = face_gradient(&g.at(times[s + 1]), h);
        let v: T = grad.iter().zip(&sig).map(|(a, sg)| *sg * *a * *a).sum::<T>() * h;
        total = total + dt * v;
    }
    Ok(total)
}

/// `½ ∫ dt <σ(π_t), (∇F_t)²>`.
pub fn rate_from_f<T: Real>(path: &DensityPath<T>, f: &SpaceTimeField<T>) -> Result<T> {
    Ok(lit::<T>(0.5) * sigma_norm_sq(path, f)?)
}
