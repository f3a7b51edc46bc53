//! First-order expansion of the exchange rates in `1/N`.

use crate::error::{invalid, Result};
use crate::kernel::{BaseKernel, Configuration, KernelTable};
use crate::microdyn::rates::exchange_rate;
use crate::scalar::{lit, Real};

/// Deterministic configuration following `profile`: an interior site `x` is occupied
/// when the golden-ratio sequence at its index falls below `profile(x/N)`; the boundary
/// sites are occupied when the profile there is at least 1/2, so that the family is
/// consistent across `N`.
pub fn quasi_random_configuration(half_width: usize, profile: impl Fn(f64) -> f64) -> Configuration {
    let golden = 0.5 * (5f64.sqrt() - 1.0);
    let n = half_width as f64;
    let occupancy = (0..2 * half_width + 1)
        .map(|i| {
            let u = (i as f64 - n) / n;
            if i == 0 || i == 2 * half_width {
                return (profile(u) >= 0.5) as u8;
            }
            let s = ((i + 1) as f64 * golden).fract();
            (s < profile(u)) as u8
        })
        .collect();
    Configuration::new(half_width, occupancy).expect("occupancy has the lattice length")
}

/// `(J^neum ⋆ π^N(η))(x/N)` for every site, with the cell integrals of the
/// piecewise-constant empirical density done by composite Simpson on `refine` panels.
pub fn convolved_empirical_density<T: Real>(
    config: &Configuration,
    kernel: &BaseKernel<T>,
    refine: usize,
) -> Vec<T> {
    let half_width = config.half_width();
    let n = T::from_usize_lossy(half_width);
    let cell = T::one() / n;
    let panel = cell / T::from_usize_lossy(refine);
    let half = lit::<T>(0.5);
    let four = lit::<T>(4.0);
    let sixth = lit::<T>(1.0 / 6.0);
    let occupied: Vec<T> = (1..2 * half_width)
        .filter(|&i| config.occupancy()[i] == 1)
        .map(|i| (T::from_usize_lossy(i) - n - half) / n)
        .collect();
    (0..2 * half_width + 1)
        .map(|i| {
            let u = (T::from_usize_lossy(i) - n) / n;
            let mut total = T::zero();
            for &left in &occupied {
                let mut acc = T::zero();
                for p in 0..refine {
                    let a = left + T::from_usize_lossy(p) * panel;
                    let m = a + panel * half;
                    let b = a + panel;
                    acc = acc
                        + kernel.neumann_unchecked(u, a)
                        + four * kernel.neumann_unchecked(u, m)
                        + kernel.neumann_unchecked(u, b);
                }
                total = total + acc * panel * sixth;
            }
            total
        })
        .collect()
}

/// `max_x |C_N(x, x+1; η) - (1 - (β/2)(η(x+1) - η(x)) N⁻¹∇^N(J^neum ⋆ π^N(η))(x/N))|`
/// over all bonds `x = -N..N-1`.
pub fn rate_expansion_residual<T: Real>(
    config: &Configuration,
    table: &KernelTable<T>,
    beta: T,
    refine: usize,
) -> Result<T> {
    if refine < 1 {
        return invalid("refine must be positive");
    }
    let k = convolved_empirical_density(config, table.kernel(), refine);
    let n = config.half_width() as isize;
    let half = lit::<T>(0.5);
    let mut worst = T::zero();
    for x in -n..n {
        let i = config.index(x);
        let exact = exchange_rate(config, x, table, beta)?;
        let d = T::from_f64(config.get(x + 1) as f64 - config.get(x) as f64).unwrap();
        let first = T::one() - beta * half * d * (k[i + 1] - k[i]);
        worst = worst.max((exact - first).abs());
    }
    Ok(worst)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_exact_power_law() {
        let xs = [2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-1.5)).collect();
        assert!((log_log_slope(&xs, &ys) + 1.5).abs() < 1e-12);
    }

    #[test]
    fn convolution_of_full_lattice_is_close_to_one_in_the_bulk() {
        let k = convolved_empirical_density(&Configuration::full(40), &BaseKernel::<f64>::bump(), 8);
        // only the two half-cells next to ±1 are missing
        assert!((k[40] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn residual_decays_like_inverse_square() {
        let ns = [64usize, 128, 256];
        let mut rs = Vec::new();
        for &n in &ns {
            let table = KernelTable::build(n, BaseKernel::<f64>::bump()).unwrap();
            let c = quasi_random_configuration(n, |u| 0.5 + 0.3 * u);
            rs.push(rate_expansion_residual(&c, &table, 1.0, 8).unwrap());
        }
        let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
        let p = -log_log_slope(&xs, &rs);
        assert!((1.7..=2.3).contains(&p), "exponent {p}, residuals {rs:?}");
        let ks: Vec<f64> = rs.iter().zip(&xs).map(|(r, n)| r * n * n).collect();
        let (lo, hi) = ks.iter().fold((f64::MAX, 0.0f64), |(a, b), k| (a.min(*k), b.max(*k)));
        assert!(hi / lo <= 2.0, "{ks:?}");
    }
}
