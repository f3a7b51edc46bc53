use rand::Rng;

use crate::error::{invalid, mismatch, Result};
use crate::field::{DensityField, DensityPath, Grid};
use crate::kernel::Configuration;
use crate::microdyn::replica_rng;
use crate::scalar::{lit, Real};

/// Product Bernoulli configuration with `P(η(x) = 1) = profile(x/N)`.
pub fn sample_bernoulli<T: Real>(profile: &DensityField<T>, half_width: usize, seed: u64) -> Configuration {
    sample_bernoulli_with(profile, half_width, &mut replica_rng(seed, 0))
}

pub fn sample_bernoulli_with<T: Real, R: Rng + ?Sized>(
    profile: &DensityField<T>,
    half_width: usize,
    rng: &mut R,
) -> Configuration {
    let n = half_width as f64;
    let occupancy = (0..2 * half_width + 1)
        .map(|i| {
            let u = T::from_f64((i as f64 - n) / n).unwrap();
            let p = profile.eval(u).to_f64_lossy().clamp(0.0, 1.0);
            (rng.gen::<f64>() < p) as u8
        })
        .collect();
    Configuration::new(half_width, occupancy).expect("occupancy has the lattice length")
}

/// Cumulative integral of the piecewise-constant empirical density from `-1` to `z / N`.
///
/// Site `x` with `|x| < N` carries `η(x)` on `[x - 1/2, x + 1/2)` in lattice units;
/// the boundary sites contribute nothing.
fn cumulative(prefix: &[u32], occupancy: &[u8], half_width: usize, z: f64) -> f64 {
    let n = half_width as f64;
    let interior = 2 * half_width - 1;
    let w = (z + n - 0.5).clamp(0.0, interior as f64);
    let full = (w.floor() as usize).min(interior);
    let mut c = prefix[full] as f64;
    if full < interior {
        c += (w - full as f64) * occupancy[full + 1] as f64;
    }
    c / n
}

/// Empirical density averaged over the dual cells `[u_j - H/2, u_j + H/2] ∩ [-1, 1]` of
/// `grid`. The grid may not be finer than the lattice.
pub fn empirical_density<T: Real>(config: &Configuration, grid: Grid) -> Result<DensityField<T>> {
    let half_width = config.half_width();
    if grid.cells() > 2 * half_width {
        return mismatch(format!(
            "grid of {} cells is finer than the lattice with N = {half_width}",
            grid.cells()
        ));
    }
    let occ = config.occupancy();
    let mut prefix = Vec::with_capacity(2 * half_width);
    prefix.push(0u32);
    for &e in &occ[1..2 * half_width] {
        let last = *prefix.last().unwrap();
        prefix.push(last + e as u32);
    }
    let n = half_width as f64;
    let h = grid.h::<f64>();
    let values = (0..grid.len())
        .map(|j| {
            let u = grid.node::<f64>(j);
            let a = (u - 0.5 * h).max(-1.0);
            let b = (u + 0.5 * h).min(1.0);
            let mass = cumulative(&prefix, occ, half_width, b * n) - cumulative(&prefix, occ, half_width, a * n);
            T::from_f64((mass / (b - a)).clamp(0.0, 1.0)).unwrap()
        })
        .collect();
    DensityField::new(grid, values)
}

/// Mean occupancy over `{y : |y - x| ≤ ℓ} ∩ Λ_N`; at `x = ±N` the window is one-sided.
pub fn block_average(config: &Configuration, x: isize, ell: usize) -> Result<f64> {
    if !config.contains(x) {
        return invalid(format!("site {x} outside the lattice"));
    }
    let n = config.half_width() as isize;
    let lo = (x - ell as isize).max(-n);
    let hi = (x + ell as isize).min(n);
    let count: u32 = (lo..=hi).map(|y| config.get(y) as u32).sum();
    Ok(count as f64 / (hi - lo + 1) as f64)
}

/// `m^ε(u) = (2ε)⁻¹ ∫_{[u-ε, u+ε] ∩ [-1, 1]} m(v) dv` at every node.
pub fn mollify<T: Real>(field: &DensityField<T>, epsilon: T) -> Result<DensityField<T>> {
    if !(epsilon > T::zero() && epsilon < T::one()) {
        return invalid(format!("mollifier width must lie in (0, 1), got {epsilon}"));
    }
    let grid = field.grid();
    let scale = T::one() / (lit::<T>(2.0) * epsilon);
    let values = grid
        .nodes::<T>()
        .into_iter()
        .map(|u| field.integral(u - epsilon, u + epsilon) * scale)
        .collect();
    Ok(DensityField::unchecked(grid, values))
}

/// Pointwise replica mean and its standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaMean<T> {
    pub mean: DensityPath<T>,
    /// Per time, per node; `None` for a single replica.
    pub stderr: Option<Vec<Vec<T>>>,
    pub replicas: usize,
}

pub fn replica_mean<T: Real>(paths: &[DensityPath<T>]) -> Result<ReplicaMean<T>> {
    let first = paths.first().ok_or_else(|| crate::Error::InvalidArgument("no replicas".into()))?;
    for p in paths {
        if p.times() != first.times() || p.grid() != first.grid() {
            return mismatch("replicas differ in sample times or grid");
        }
    }
    let r = paths.len();
    let rf = T::from_usize_lossy(r);
    let mut means = Vec::with_capacity(first.times().len());
    let mut errs = Vec::with_capacity(first.times().len());
    for k in 0..first.times().len() {
        let len = first.grid().len();
        let mut m = vec![T::zero(); len];
        for p in paths {
            for (acc, v) in m.iter_mut().zip(p.fields()[k].values()) {
                *acc = *acc + *v;
            }
        }
        m.iter_mut().for_each(|v| *v = *v / rf);
        if r > 1 {
            let mut var = vec![T::zero(); len];
            for p in paths {
                for ((acc, v), mu) in var.iter_mut().zip(p.fields()[k].values()).zip(&m) {
                    *acc = *acc + (*v - *mu) * (*v - *mu);
                }
            }
            let denom = T::from_usize_lossy(r - 1) * rf;
            errs.push(var.into_iter().map(|s| (s / denom).sqrt()).collect());
        }
        means.push(DensityField::new(first.grid(), m)?);
    }
    Ok(ReplicaMean {
        mean: DensityPath::new(first.times().to_vec(), means)?,
        stderr: (r > 1).then_some(errs),
        replicas: r,
    })
}

/// Replaces the endpoint values of every field with the reservoir densities.
pub fn pin_boundary<T: Real>(path: &DensityPath<T>, rho_minus: T, rho_plus: T) -> Result<DensityPath<T>> {
    let fields = path
        .fields()
        .iter()
        .map(|f| f.clone().with_boundary(rho_minus, rho_plus))
        .collect::<Result<Vec<_>>>()?;
    DensityPath::new(path.times().to_vec(), fields)
}
