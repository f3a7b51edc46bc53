use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::field::{DensityField, DensityPath, Grid};
use crate::kernel::KernelTable;
use crate::microdyn::observables::{empirical_density, sample_bernoulli_with};
use crate::microdyn::rates::TiltField;
use crate::microdyn::sim::{simulate_with, SimParams};
use crate::scalar::Real;

/// Random stream `k` of `seed`. Replica `k` always draws from stream `k`, whatever
/// worker runs it.
pub fn replica_rng(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

/// Runs `replicas` independent chains from product measures with marginals `initial`,
/// returning each run's empirical density path on `grid`. Runs on the ambient rayon pool.
pub fn run_replicas<T: Real>(
    params: &SimParams,
    table: &KernelTable<T>,
    initial: &DensityField<T>,
    grid: Grid,
    replicas: usize,
    tilt: Option<&TiltField<T>>,
) -> Result<Vec<DensityPath<T>>> {
    params.validate()?;
    (0..replicas as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = replica_rng(params.seed, k);
            let config = sample_bernoulli_with(initial, params.half_width, &mut rng);
            simulate_with(params, table, &config, tilt, &mut rng)?.density_path(grid)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationarySample<T> {
    pub mean: DensityField<T>,
    pub samples: usize,
    pub event_count: u64,
}

/// Time average of the empirical density along one long chain.
///
/// The chain starts from the product measure at density `(ρ_- + ρ_+)/2`, discards
/// `burn_in`, then records `n_samples` snapshots `thinning` apart. The endpoint values
/// of the result are the reservoir densities.
pub fn stationary_sample<T: Real>(
    params: &SimParams,
    table: &KernelTable<T>,
    grid: Grid,
    burn_in: f64,
    n_samples: usize,
    thinning: f64,
) -> Result<StationarySample<T>> {
    if !(burn_in > 0.0 && thinning > 0.0) || n_samples == 0 {
        return invalid("burn_in and thinning must be positive and n_samples nonzero");
    }
    let sample_times: Vec<f64> = (0..n_samples).map(|k| burn_in + k as f64 * thinning).collect();
    let run = SimParams {
        t_end: *sample_times.last().unwrap(),
        sample_times,
        ..params.clone()
    };
    run.validate()?;
    let mut rng = replica_rng(params.seed, 0);
    let mid = T::from_f64(0.5 * (params.rho_minus + params.rho_plus)).unwrap();
    let start = DensityField::constant(grid, mid)?;
    let config = sample_bernoulli_with(&start, params.half_width, &mut rng);
    let traj = simulate_with(&run, table, &config, None, &mut rng)?;
    let mut acc = vec![0.0f64; grid.len()];
    for c in &traj.configs {
        let f: DensityField<f64> = empirical_density(c, grid)?;
        for (a, v) in acc.iter_mut().zip(f.values()) {
            *a += v;
        }
    }
    let k = traj.configs.len() as f64;
    let values = acc.into_iter().map(|a| T::from_f64(a / k).unwrap()).collect();
    let mean = DensityField::new(grid, values)?.with_boundary(
        T::from_f64(params.rho_minus).unwrap(),
        T::from_f64(params.rho_plus).unwrap(),
    )?;
    Ok(StationarySample {
        mean,
        samples: traj.configs.len(),
        event_count: traj.event_count,
    })
}
