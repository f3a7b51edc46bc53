use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, mismatch, Result};
use crate::field::{DensityField, DensityPath, Grid};
use crate::kernel::{Configuration, KernelTable};
use crate::microdyn::observables::empirical_density;
use crate::microdyn::rates::{
    boundary_rate, check_reservoir, check_tilt, exchange_rate, tilt_factor, Event, Side, TiltField,
};
use crate::microdyn::replica_rng;
use crate::scalar::{lit, Real};

/// Parameters of one particle run. Times are macroscopic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub half_width: usize,
    pub beta: f64,
    pub rho_minus: f64,
    pub rho_plus: f64,
    pub seed: u64,
    pub t_end: f64,
    pub sample_times: Vec<f64>,
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        if self.half_width < 2 {
            return invalid(format!("N must be at least 2, got {}", self.half_width));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return invalid(format!("beta must be finite and >= 0, got {}", self.beta));
        }
        check_reservoir(self.rho_minus)?;
        check_reservoir(self.rho_plus)?;
        if self.rho_minus > self.rho_plus {
            return invalid(format!(
                "rho_minus = {} exceeds rho_plus = {}",
                self.rho_minus, self.rho_plus
            ));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return invalid(format!("t_end must be finite and >= 0, got {}", self.t_end));
        }
        if self.sample_times.is_empty() {
            return invalid("at least one sample time is required");
        }
        if self.sample_times.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("sample times must be strictly increasing");
        }
        if self.sample_times[0] < 0.0 || *self.sample_times.last().unwrap() > self.t_end {
            return invalid("sample times must lie in [0, t_end]");
        }
        Ok(())
    }

    /// Diffusive speed-up `N²`.
    pub fn speedup(&self) -> f64 {
        (self.half_width * self.half_width) as f64
    }
}

/// Configuration and macroscopic clock.
#[derive(Debug, Clone, PartialEq)]
pub struct KmcState {
    pub config: Configuration,
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub event: Event,
    pub wait: f64,
    pub total_rate: f64,
}

fn exponential<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    -(1.0 - rng.gen::<f64>()).ln() / rate
}

fn poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive finite mean").sample(rng) as u64
}

/// Event list of the current state with rates already multiplied by `N²` and the tilt.
pub fn event_rates<T: Real>(
    config: &Configuration,
    table: &KernelTable<T>,
    params: &SimParams,
    tilt: Option<&TiltField<T>>,
    t: f64,
) -> Result<Vec<(Event, f64)>> {
    let n = config.half_width() as isize;
    let beta = T::from_f64(params.beta).unwrap();
    let speed = params.speedup();
    let mut events = Vec::with_capacity(2 * n as usize + 2);
    for x in -n..n {
        if config.get(x) == config.get(x + 1) {
            continue;
        }
        let ev = Event::Exchange { x };
        let mut r = exchange_rate(config, x, table, beta)?;
        if let Some(f) = tilt {
            r = r * tilt_factor(config, ev, f, T::from_f64(t).unwrap())?;
        }
        events.push((ev, speed * r.to_f64_lossy()));
    }
    for (side, rho) in [(Side::Left, params.rho_minus), (Side::Right, params.rho_plus)] {
        let x = if side == Side::Left { -n } else { n };
        events.push((Event::Flip { side }, speed * boundary_rate(config.get(x), rho)?));
    }
    Ok(events)
}

/// One step of the chain by direct enumeration of all events (Gillespie).
///
/// The tilt is evaluated at the time of the state before the jump.
pub fn kmc_step<T: Real, R: Rng + ?Sized>(
    state: &mut KmcState,
    table: &KernelTable<T>,
    params: &SimParams,
    tilt: Option<&TiltField<T>>,
    rng: &mut R,
) -> Result<StepRecord> {
    let events = event_rates(&state.config, table, params, tilt, state.time)?;
    let total: f64 = events.iter().map(|e| e.1).sum();
    assert!(total > 0.0, "boundary rates keep the total rate positive");
    let wait = exponential(rng, total);
    let mut target = rng.gen::<f64>() * total;
    let mut chosen = events[events.len() - 1].0;
    for (ev, r) in &events {
        if target < *r {
            chosen = *ev;
            break;
        }
        target -= r;
    }
    chosen.apply(&mut state.config);
    state.time += wait;
    Ok(StepRecord {
        event: chosen,
        wait,
        total_rate: total,
    })
}

/// Configurations recorded at the requested sample times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub configs: Vec<Configuration>,
    /// Jumps executed.
    pub event_count: u64,
    /// Candidate events drawn, including rejected ones.
    pub proposals: u64,
}

impl Trajectory {
    /// Empirical densities of the recorded configurations on `grid`.
    pub fn density_path<T: Real>(&self, grid: Grid) -> Result<DensityPath<T>> {
        let fields = self
            .configs
            .iter()
            .map(|c| empirical_density(c, grid))
            .collect::<Result<Vec<DensityField<T>>>>()?;
        DensityPath::new(self.times.iter().map(|t| T::from_f64(*t).unwrap()).collect(), fields)
    }
}

fn check_inputs<T: Real>(
    params: &SimParams,
    table: &KernelTable<T>,
    initial: &Configuration,
    tilt: Option<&TiltField<T>>,
) -> Result<()> {
    params.validate()?;
    if table.half_width() != params.half_width || initial.half_width() != params.half_width {
        return mismatch(format!(
            "N differs: params {}, table {}, configuration {}",
            params.half_width,
            table.half_width(),
            initial.half_width()
        ));
    }
    if let Some(f) = tilt {
        check_tilt(f, params.half_width)?;
    }
    Ok(())
}

/// Runs the chain with the seed of `params` (stream 0).
pub fn simulate<T: Real>(
    params: &SimParams,
    table: &KernelTable<T>,
    initial: &Configuration,
    tilt: Option<&TiltField<T>>,
) -> Result<Trajectory> {
    let mut rng = replica_rng(params.seed, 0);
    simulate_with(params, table, initial, tilt, &mut rng)
}

/// Runs the chain by thinning: candidate events are drawn from a dominating process
/// with constant rates and accepted with probability `rate / bound`.
///
/// Each bond proposes at the constant rate `N² e^{(β/2) B + φ}`, where `B` bounds
/// `|ΔH|` over all bonds and configurations and `φ` bounds the tilt exponent. Most
/// acceptances are decided against the matching lower bound without evaluating `ΔH`.
pub fn simulate_with<T: Real>(
    params: &SimParams,
    table: &KernelTable<T>,
    initial: &Configuration,
    tilt: Option<&TiltField<T>>,
    rng: &mut ChaCha8Rng,
) -> Result<Trajectory> {
    check_inputs(params, table, initial, tilt)?;
    let n = params.half_width;
    let bonds = 2 * n;
    let half_beta = 0.5 * params.beta;
    let phi = tilt.map_or(0.0, |f| f.max_increment().to_f64_lossy());
    let bounds: Vec<f64> = (0..bonds)
        .map(|b| table.delta_h_bound(b, b + 1).to_f64_lossy())
        .collect();
    let hi = bounds.iter().fold(0.0f64, |m, b| m.max(*b));
    let hi = (half_beta * hi + phi).exp();
    let lo: Vec<f64> = bounds.iter().map(|b| (-half_beta * b - phi).exp()).collect();
    let weight = bonds as f64 * hi + 2.0;
    let total = params.speedup() * weight;
    let beta_t = T::from_f64(params.beta).unwrap();
    let half_t = lit::<T>(0.5);

    let mut config = initial.clone();
    let mut times = Vec::with_capacity(params.sample_times.len());
    let mut configs = Vec::with_capacity(params.sample_times.len());
    let mut event_count = 0u64;
    let mut proposals = 0u64;
    let proposer = Proposer {
        table,
        tilt,
        beta: beta_t * half_t,
        lo: &lo,
        hi,
        weight,
        bonds,
        rho: (params.rho_minus, params.rho_plus),
    };
    if tilt.is_some() {
        // time-dependent rates: proposal times are needed individually
        let mut t = 0.0;
        let mut next = 0;
        loop {
            t += exponential(rng, total);
            while next < params.sample_times.len() && params.sample_times[next] < t {
                times.push(params.sample_times[next]);
                configs.push(config.clone());
                next += 1;
            }
            if t > params.t_end {
                break;
            }
            proposals += 1;
            event_count += proposer.propose(config.occupancy_mut(), t, rng) as u64;
        }
    } else {
        // homogeneous rates: only the number of proposals per interval matters
        let mut t = 0.0;
        for &s in &params.sample_times {
            let k = poisson(rng, total * (s - t));
            let mut local = rng.clone();
            let occ = config.occupancy_mut();
            for _ in 0..k {
                event_count += proposer.propose(occ, 0.0, &mut local) as u64;
            }
            *rng = local;
            proposals += k;
            times.push(s);
            configs.push(config.clone());
            t = s;
        }
    }
    Ok(Trajectory {
        times,
        configs,
        event_count,
        proposals,
    })
}

struct Proposer<'a, T> {
    table: &'a KernelTable<T>,
    tilt: Option<&'a TiltField<T>>,
    /// `β/2`.
    beta: T,
    lo: &'a [f64],
    hi: f64,
    weight: f64,
    bonds: usize,
    rho: (f64, f64),
}

impl<T: Real> Proposer<'_, T> {
    /// Draws one candidate from the dominating process and applies it if accepted.
    #[inline(always)]
    fn propose(&self, occ: &mut [u8], t: f64, rng: &mut ChaCha8Rng) -> bool {
        let u = rng.gen::<f64>() * self.weight;
        let bond_mass = self.bonds as f64 * self.hi;
        if u < bond_mass {
            let b = ((u / self.hi) as usize).min(self.bonds - 1);
            let v = u - b as f64 * self.hi;
            if v <= self.lo[b] {
                // swapping equal occupancies is the identity, so null proposals need no test
                let moved = occ[b] != occ[b + 1];
                occ.swap(b, b + 1);
                return moved;
            }
            self.exact_exchange(occ, b, v, t)
        } else {
            self.flip(occ, u - bond_mass)
        }
    }

    #[inline(never)]
    fn exact_exchange(&self, occ: &mut [u8], b: usize, v: f64, t: f64) -> bool {
        if occ[b] == occ[b + 1] {
            return false;
        }
        let dh = self.table.delta_h_indices(occ, b, b + 1);
        let mut rate = (-self.beta * dh).exp().to_f64_lossy();
        if let Some(f) = self.tilt {
            let tt = T::from_f64(t).unwrap();
            let d = occ[b + 1] as f64 - occ[b] as f64;
            rate *= (d * (f.value_at(tt, b) - f.value_at(tt, b + 1)).to_f64_lossy()).exp();
        }
        let accept = v <= rate;
        if accept {
            occ.swap(b, b + 1);
        }
        accept
    }

    #[inline(never)]
    fn flip(&self, occ: &mut [u8], v: f64) -> bool {
        let last = occ.len() - 1;
        let (site, rho, v) = if v < 1.0 {
            (0, self.rho.0, v)
        } else {
            (last, self.rho.1, v - 1.0)
        };
        let rate = if occ[site] == 0 { rho } else { 1.0 - rho };
        let accept = v < rate;
        if accept {
            occ[site] ^= 1;
        }
        accept
    }
}

/// Reference run built from repeated [`kmc_step`] calls.
pub fn simulate_direct<T: Real>(
    params: &SimParams,
    table: &KernelTable<T>,
    initial: &Configuration,
    tilt: Option<&TiltField<T>>,
    rng: &mut ChaCha8Rng,
) -> Result<Trajectory> {
    check_inputs(params, table, initial, tilt)?;
    let mut state = KmcState {
        config: initial.clone(),
        time: 0.0,
    };
    let mut times = Vec::new();
    let mut configs = Vec::new();
    let mut next = 0;
    let mut event_count = 0u64;
    loop {
        let before = state.config.clone();
        let record = kmc_step(&mut state, table, params, tilt, rng)?;
        while next < params.sample_times.len() && params.sample_times[next] < state.time {
            times.push(params.sample_times[next]);
            configs.push(before.clone());
            next += 1;
        }
        if state.time > params.t_end {
            break;
        }
        let _ = record;
        event_count += 1;
    }
    Ok(Trajectory {
        times,
        configs,
        event_count,
        proposals: event_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::BaseKernel;
    use rand::SeedableRng;

    fn params(n: usize, beta: f64, rho: (f64, f64), t_end: f64, samples: Vec<f64>) -> SimParams {
        SimParams {
            half_width: n,
            beta,
            rho_minus: rho.0,
            rho_plus: rho.1,
            seed: 7,
            t_end,
            sample_times: samples,
        }
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        assert!(params(10, 0.1, (0.9, 0.2), 1.0, vec![0.0]).validate().is_err());
        assert!(params(10, 0.1, (0.2, 0.9), 1.0, vec![0.5, 0.5]).validate().is_err());
        assert!(params(10, 0.1, (0.2, 0.9), 1.0, vec![1.5]).validate().is_err());
        assert!(params(10, -0.1, (0.2, 0.9), 1.0, vec![0.0]).validate().is_err());
        assert!(params(10, 0.1, (0.2, 0.9), 1.0, vec![0.0, 1.0]).validate().is_ok());
    }

    #[test]
    fn degenerate_event_list_fires_the_only_event() {
        // N = 2, all occupied except that exchanges are null; right reservoir empty-ish
        let table = KernelTable::build(2, BaseKernel::<f64>::bump()).unwrap();
        let p = params(2, 0.0, (0.5, 0.5), 1.0, vec![0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut state = KmcState {
            config: Configuration::full(2),
            time: 0.0,
        };
        let events = event_rates(&state.config, &table, &p, None, 0.0).unwrap();
        assert_eq!(events.len(), 2);
        let r = kmc_step(&mut state, &table, &p, None, &mut rng).unwrap();
        assert!(matches!(r.event, Event::Flip { .. }));
        assert_eq!(state.config.particles(), 4);
    }

    #[test]
    fn waiting_times_are_exponential() {
        let n = 6;
        let table = KernelTable::build(n, BaseKernel::<f64>::bump()).unwrap();
        let p = params(n, 0.5, (0.3, 0.7), 1.0, vec![0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let config = Configuration::new(n, (0..13).map(|i| (i % 2) as u8).collect()).unwrap();
        let steps = 100_000;
        let mut sum = 0.0;
        let mut expected = 0.0;
        for _ in 0..steps {
            let mut state = KmcState { config: config.clone(), time: 0.0 };
            let r = kmc_step(&mut state, &table, &p, None, &mut rng).unwrap();
            sum += r.wait;
            expected = 1.0 / r.total_rate;
        }
        let mean = sum / steps as f64;
        let se = expected / (steps as f64).sqrt();
        assert!((mean - expected).abs() < 3.0 * se, "{mean} vs {expected}");
    }

    #[test]
    fn selection_frequencies_follow_rates() {
        let n = 4;
        let table = KernelTable::build(n, BaseKernel::<f64>::bump()).unwrap();
        let p = params(n, 0.0, (0.2, 0.9), 1.0, vec![0.0]);
        let config = Configuration::new(n, vec![1, 0, 0, 1, 1, 0, 1, 1, 0]).unwrap();
        let events = event_rates(&config, &table, &p, None, 0.0).unwrap();
        let total: f64 = events.iter().map(|e| e.1).sum();
        let mut counts = vec![0usize; events.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let steps = 100_000;
        for _ in 0..steps {
            let mut state = KmcState { config: config.clone(), time: 0.0 };
            let r = kmc_step(&mut state, &table, &p, None, &mut rng).unwrap();
            let k = events.iter().position(|e| e.0 == r.event).unwrap();
            counts[k] += 1;
        }
        for (c, (_, r)) in counts.iter().zip(&events) {
            let q = r / total;
            let sd = (steps as f64 * q * (1.0 - q)).sqrt();
            assert!((*c as f64 - steps as f64 * q).abs() < 3.0 * sd + 1.0);
        }
    }

    #[test]
    fn initial_sample_only_and_determinism() {
        let n = 20;
        let table = KernelTable::build(n, BaseKernel::<f64>::bump()).unwrap();
        let init = Configuration::new(n, (0..41).map(|i| (i % 3 == 0) as u8).collect()).unwrap();
        let p = params(n, 0.3, (0.2, 0.8), 0.0, vec![0.0]);
        let tr = simulate(&p, &table, &init, None).unwrap();
        assert_eq!(tr.configs, vec![init.clone()]);
        let p = params(n, 0.3, (0.2, 0.8), 0.2, vec![0.0, 0.1, 0.2]);
        let a = simulate(&p, &table, &init, None).unwrap();
        let b = simulate(&p, &table, &init, None).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.configs.len(), 3);
        assert!(a.event_count > 0);
    }

    #[test]
    fn equal_reservoirs_hold_the_density() {
        let n = 50;
        let table = KernelTable::build(n, BaseKernel::<f64>::bump()).unwrap();
        let samples: Vec<f64> = (0..=40).map(|k| 1.0 + k as f64 * 0.1).collect();
        let p = params(n, 0.0, (0.5, 0.5), 5.0, samples);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let half = DensityField::constant(Grid::new(10).unwrap(), 0.5).unwrap();
        let init = crate::microdyn::sample_bernoulli_with(&half, n, &mut rng);
        let tr = simulate_with(&p, &table, &init, None, &mut rng).unwrap();
        let bulk: Vec<f64> = tr
            .configs
            .iter()
            .map(|c| c.occupancy()[1..2 * n].iter().map(|&e| e as f64).sum::<f64>() / (2 * n - 1) as f64)
            .collect();
        let mean = bulk.iter().sum::<f64>() / bulk.len() as f64;
        // snapshots 0.1 apart are close to independent at this N; sd of one snapshot is 0.5/√99
        let se = 0.5 / ((2 * n - 1) as f64).sqrt() / (bulk.len() as f64).sqrt();
        assert!((mean - 0.5).abs() < 3.0 * se * 2.0, "mean {mean}");
    }

    #[test]
    fn thinned_and_direct_runs_agree_in_law() {
        // mean number of particles at t = 0.3 over independent replicas
        let n = 6;
        let table = KernelTable::build(n, BaseKernel::<f64>::bump()).unwrap();
        let p = params(n, 2.0, (0.1, 0.9), 0.3, vec![0.3]);
        let init = Configuration::empty(n);
        let reps = 3000;
        let stats = |direct: bool| {
            let mut xs = Vec::with_capacity(reps);
            for k in 0..reps {
                let mut rng = replica_rng(11 + direct as u64, k as u64);
                let tr = if direct {
                    simulate_direct(&p, &table, &init, None, &mut rng).unwrap()
                } else {
                    simulate_with(&p, &table, &init, None, &mut rng).unwrap()
                };
                xs.push(tr.configs[0].particles() as f64);
            }
            let m = xs.iter().sum::<f64>() / reps as f64;
            let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (reps - 1) as f64;
            (m, v / reps as f64)
        };
        let (ma, va) = stats(true);
        let (mb, vb) = stats(false);
        assert!((ma - mb).abs() < 4.0 * (va + vb).sqrt(), "{ma} vs {mb}");
    }

    #[test]
    fn tilted_thinned_and_direct_runs_agree_in_law() {
        // a time-independent tilt pushing particles to the right; compare the centre of mass
        let n = 5;
        let table = KernelTable::build(n, BaseKernel::<f64>::bump()).unwrap();
        let p = params(n, 1.0, (0.5, 0.5), 0.2, vec![0.2]);
        let tilt = TiltField::from_fn(Grid::lattice(n).unwrap(), vec![0.0, 1.0], |_, u: f64| {
            -2.0 * (1.0 - u * u)
        })
        .unwrap();
        let init = Configuration::new(n, vec![0, 0, 1, 1, 1, 1, 1, 0, 0, 0, 0]).unwrap();
        let reps = 3000;
        let stats = |direct: bool| {
            let mut xs = Vec::with_capacity(reps);
            for k in 0..reps {
                let mut rng = replica_rng(21 + direct as u64, k as u64);
                let tr = if direct {
                    simulate_direct(&p, &table, &init, Some(&tilt), &mut rng).unwrap()
                } else {
                    simulate_with(&p, &table, &init, Some(&tilt), &mut rng).unwrap()
                };
                let c = &tr.configs[0];
                xs.push((-(n as isize)..=n as isize).map(|x| x as f64 * c.get(x) as f64).sum::<f64>());
            }
            let m = xs.iter().sum::<f64>() / reps as f64;
            let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (reps - 1) as f64;
            (m, v / reps as f64)
        };
        let (ma, va) = stats(true);
        let (mb, vb) = stats(false);
        assert!((ma - mb).abs() < 4.0 * (va + vb).sqrt(), "{ma} vs {mb}");
    }
}
