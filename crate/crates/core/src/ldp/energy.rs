use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::field::DensityPath;
use crate::ldp::functional::face_sigma;
use crate::linalg::solve_tridiagonal;
use crate::pde::{face_gradient, sigma};
use crate::scalar::{lit, trapezoid_weights, Real};

/// Mobility below which the energy density is treated as singular.
pub const SIGMA_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyValue<T> {
    pub value: T,
    /// True when some mobility was clamped to [`SIGMA_FLOOR`].
    pub regularized: bool,
}

fn time_weights<T: Real>(times: &[T]) -> Vec<T> {
    let m = times.len() - 1;
    let half = lit::<T>(0.5);
    (0..=m)
        .map(|n| {
            let left = if n > 0 { times[n] - times[n - 1] } else { T::zero() };
            let right = if n < m { times[n + 1] - times[n] } else { T::zero() };
            (left + right) * half
        })
        .collect()
}

/// `Q(π) = ½ ∫ dt ∫ (∇π)² / σ(π)`, trapezoid in time, face-centred in space.
///
/// With `regularize` a vanishing mobility is clamped and flagged, otherwise it is an error.
pub fn energy_q<T: Real>(path: &DensityPath<T>, regularize: bool) -> Result<EnergyValue<T>> {
    let h = path.grid().h::<T>();
    let floor = lit::<T>(SIGMA_FLOOR);
    let weights = time_weights(path.times());
    let mut regularized = false;
    let mut total = T::zero();
    for (n, (w, field)) in weights.iter().zip(path.fields()).enumerate() {
        let grad = face_gradient(field.values(), h);
        let sig = face_sigma(field.values());
        let mut s = T::zero();
        for (f, (g, sg)) in grad.iter().zip(&sig).enumerate() {
            if *g == T::zero() {
                continue;
            }
            let mut sg = *sg;
            if sg < floor {
                if !regularize {
                    return Err(Error::InvalidArgument(format!(
                        "mobility {sg} at face {f}, time index {n}: energy is singular"
                    )));
                }
                regularized = true;
                sg = floor;
            }
            s = s + *g * *g / sg;
        }
        total = total + *w * s * h;
    }
    Ok(EnergyValue {
        value: total * lit(0.5),
        regularized,
    })
}

/// Variational form `sup_H {<π, ∇H> - ½<σ(π), H²>}` per time node, with `H` in the span of
/// the hats at every `stride`-th interior node, integrated by the trapezoid rule in time.
pub fn energy_q_var<T: Real>(path: &DensityPath<T>, stride: usize) -> Result<T> {
    let grid = path.grid();
    let cells = grid.cells();
    if stride == 0 || cells % stride != 0 || cells / stride < 2 {
        return invalid(format!("stride {stride} incompatible with {cells} cells"));
    }
    let h = grid.h::<T>();
    let coarse = cells / stride;
    let weights = time_weights(path.times());
    let fine_w = trapezoid_weights(cells, h);
    let floor = lit::<T>(SIGMA_FLOOR);
    let half = lit::<T>(0.5);
    let mut total = T::zero();
    for (w, field) in weights.iter().zip(path.fields()) {
        let v = field.values();
        let sig: Vec<T> = v.iter().map(|r| sigma(*r)).collect();
        let hat = |i: usize, j: usize| -> T {
            let d = (j as isize - (i * stride) as isize).unsigned_abs();
            if d >= stride {
                T::zero()
            } else {
                T::one() - T::from_usize_lossy(d) / T::from_usize_lossy(stride)
            }
        };
        let dim = coarse - 1;
        let mut rhs = Vec::with_capacity(dim);
        let mut diag = Vec::with_capacity(dim);
        let mut off = Vec::with_capacity(dim.saturating_sub(1));
        let width = h * T::from_usize_lossy(stride);
        for i in 1..coarse {
            let c = i * stride;
            // ∫ π φ_i' = (∫_{left} π - ∫_{right} π) / width; π is piecewise linear
            let left: T = (c - stride..c).map(|j| (v[j] + v[j + 1]) * half * h).sum();
            let right: T = (c..c + stride).map(|j| (v[j] + v[j + 1]) * half * h).sum();
            rhs.push((left - right) / width);
            let a: T = (c - stride..=c + stride)
                .map(|j| fine_w[j] * sig[j] * hat(i, j) * hat(i, j))
                .sum();
            if a < floor * h {
                return Err(Error::InvalidArgument(format!(
                    "mobility vanishes near node {c}: energy is singular"
                )));
            }
            diag.push(a);
            if i + 1 < coarse {
                let b: T = (c..=c + stride)
                    .map(|j| fine_w[j] * sig[j] * hat(i, j) * hat(i + 1, j))
                    .sum();
                off.push(b);
            }
        }
        let mut lower = vec![T::zero()];
        lower.extend_from_slice(&off);
        off.push(T::zero());
        let x = solve_tridiagonal(&lower, &diag, &off, &rhs);
        let q: T = rhs.iter().zip(&x).map(|(b, y)| *b * *y).sum::<T>() * half;
        total = total + *w * q;
    }
    Ok(total)
}
