//! Experiment pipelines. Each pipeline has a pure compute function, used by the tests,
//! and an emitting wrapper called from [`run`].

use kacgas_core::ldp::{rate_from_f, RateEvaluator, RateReport, TestBasis};
use kacgas_core::microdyn::{
    replica_mean, replica_rng, sample_bernoulli_with, simulate_with, stationary_sample, SimParams,
};
use kacgas_core::pde::{
    contraction_check, random_profile, stationary_profile, ContractionConstants, ContractionReport,
    NonlocalSolver, PicardOutcome, StationaryOptions, BETA_CRITICAL,
};
use kacgas_core::{BaseKernel, ConvolutionOperator, DensityField, DensityPath, Grid, KernelTable};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Beta, ConfigError, ExperimentConfig, Kind};
use crate::io::{path_csv, profile_csv, read_path_csv};
use crate::manifest::{Emitter, ResultManifest};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("stage '{stage}' failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: kacgas_core::Error,
    },
    #[error("stage '{stage}' failed: {message}")]
    Input { stage: &'static str, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    /// Process exit code: 2 for configuration errors, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            _ => 1,
        }
    }
}

trait Staged<T> {
    fn stage(self, stage: &'static str) -> Result<T, RunError>;
}

impl<T> Staged<T> for kacgas_core::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, RunError> {
        self.map_err(|source| RunError::Stage { stage, source })
    }
}

/// Shared numerical objects of one configuration.
pub struct Setup {
    pub kernel: BaseKernel,
    pub constants: ContractionConstants,
    pub beta: f64,
    pub grid: Grid,
}

impl Setup {
    pub fn new(config: &ExperimentConfig) -> Result<Self, RunError> {
        let kernel = BaseKernel::new(config.kernel, config.kernel_resolution).stage("kernel")?;
        let constants = ContractionConstants::from_sup_grad(kernel.sup_gradient());
        let beta = match config.beta {
            Beta::Absolute(b) => b,
            Beta::OverBeta0(f) => f * constants.beta0,
        };
        let grid = Grid::new(config.cells).stage("grid")?;
        Ok(Self {
            kernel,
            constants,
            beta,
            grid,
        })
    }

    pub fn convolution(&self, config: &ExperimentConfig) -> Result<ConvolutionOperator, RunError> {
        ConvolutionOperator::new(self.grid, self.kernel, config.refine).stage("convolution")
    }

    pub fn table(&self, config: &ExperimentConfig) -> Result<KernelTable, RunError> {
        KernelTable::build(config.half_width, self.kernel).stage("kernel table")
    }

    pub fn gamma(&self, config: &ExperimentConfig) -> Result<DensityField, RunError> {
        DensityField::from_fn(self.grid, |u| config.initial_profile(u)).stage("initial profile")
    }

    fn sim_params(&self, config: &ExperimentConfig) -> SimParams {
        SimParams {
            half_width: config.half_width,
            beta: self.beta,
            rho_minus: config.rho_minus,
            rho_plus: config.rho_plus,
            seed: config.seed,
            t_end: config.t_end,
            sample_times: config.sample_times(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationSummary {
    pub half_width: usize,
    pub beta: f64,
    pub rho_minus: f64,
    pub rho_plus: f64,
    pub seed: u64,
    pub replicas: usize,
    pub sample_times: Vec<f64>,
    /// Jumps executed by each replica.
    pub event_counts: Vec<u64>,
    pub event_count: u64,
}

/// Replica `k` starts from a product measure with marginals `γ` drawn from stream `k`
/// and evolves on the same stream.
pub fn simulate_replicas(
    config: &ExperimentConfig,
    setup: &Setup,
    table: &KernelTable,
) -> Result<(Vec<DensityPath>, SimulationSummary), RunError> {
    let params = setup.sim_params(config);
    params.validate().stage("simulate")?;
    let gamma = setup.gamma(config)?;
    let runs = (0..config.replicas as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = replica_rng(params.seed, k);
            let initial = sample_bernoulli_with(&gamma, params.half_width, &mut rng);
            let traj = simulate_with(&params, table, &initial, None, &mut rng)?;
            Ok((traj.density_path(setup.grid)?, traj.event_count))
        })
        .collect::<kacgas_core::Result<Vec<_>>>()
        .stage("simulate")?;
    let (paths, counts): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    let summary = SimulationSummary {
        half_width: params.half_width,
        beta: params.beta,
        rho_minus: params.rho_minus,
        rho_plus: params.rho_plus,
        seed: params.seed,
        replicas: config.replicas,
        sample_times: params.sample_times,
        event_count: counts.iter().sum(),
        event_counts: counts,
    };
    Ok((paths, summary))
}

/// Fields of a fine path at a subset of its times.
fn pick_times(path: &DensityPath, times: &[f64]) -> Result<DensityPath, RunError> {
    let mut fields = Vec::with_capacity(times.len());
    for &t in times {
        let k = path.times().partition_point(|&s| s < t - 1e-9);
        match path.times().get(k) {
            Some(&s) if (s - t).abs() <= 1e-9 => fields.push(path.fields()[k].clone()),
            _ => {
                return Err(RunError::Input {
                    stage: "sample times",
                    message: format!("time {t} is not a step of the PDE path"),
                })
            }
        }
    }
    DensityPath::new(times.to_vec(), fields).stage("sample times")
}

#[derive(Debug, Clone, Serialize)]
pub struct HydroComparison {
    pub half_width: usize,
    pub beta: f64,
    pub replicas: usize,
    pub times: Vec<f64>,
    /// `‖mean_t - ρ_t‖_{L¹}` at each sample time.
    pub l1: Vec<f64>,
    /// Largest pointwise standard error of the replica mean at each sample time.
    pub max_stderr: Vec<f64>,
    pub event_count: u64,
    #[serde(skip)]
    pub mean: DensityPath,
    #[serde(skip)]
    pub pde: DensityPath,
}

pub fn hydro_compare(config: &ExperimentConfig, setup: &Setup) -> Result<HydroComparison, RunError> {
    let table = setup.table(config)?;
    let (paths, summary) = simulate_replicas(config, setup, &table)?;
    let mean = replica_mean(&paths).stage("replica mean")?;
    let pinned = kacgas_core::microdyn::pin_boundary(&mean.mean, config.rho_minus, config.rho_plus)
        .stage("replica mean")?;
    let conv = setup.convolution(config)?;
    let solver = NonlocalSolver::new(&conv, setup.beta).stage("pde")?;
    let full = solver
        .evolve(&setup.gamma(config)?, config.t_end, config.dt, None)
        .stage("pde")?;
    let pde = pick_times(&full, pinned.times())?;
    let l1 = pinned
        .fields()
        .iter()
        .zip(pde.fields())
        .map(|(a, b)| a.l1_distance(b))
        .collect::<kacgas_core::Result<Vec<_>>>()
        .stage("compare")?;
    let max_stderr = match &mean.stderr {
        Some(errs) => errs.iter().map(|e| e.iter().fold(0.0, |m: f64, v| m.max(*v))).collect(),
        None => vec![f64::NAN; l1.len()],
    };
    Ok(HydroComparison {
        half_width: config.half_width,
        beta: setup.beta,
        replicas: config.replicas,
        times: pinned.times().to_vec(),
        l1,
        max_stderr,
        event_count: summary.event_count,
        mean: pinned,
        pde,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct HydrostaticComparison {
    pub half_width: usize,
    pub beta: f64,
    pub l1: f64,
    pub samples: usize,
    pub event_count: u64,
    pub stationary_residual: f64,
    pub march_steps: usize,
    pub picard: PicardOutcome,
    #[serde(skip)]
    pub sampled: DensityField,
    #[serde(skip)]
    pub profile: DensityField,
}

pub fn hydrostatic(config: &ExperimentConfig, setup: &Setup) -> Result<HydrostaticComparison, RunError> {
    let table = setup.table(config)?;
    let params = SimParams {
        t_end: 0.0,
        sample_times: vec![0.0],
        ..setup.sim_params(config)
    };
    let sample = stationary_sample(&params, &table, setup.grid, config.burn_in, config.samples, config.thinning)
        .stage("stationary sample")?;
    let conv = setup.convolution(config)?;
    let report = stationary_profile(
        &conv,
        setup.beta,
        config.rho_minus,
        config.rho_plus,
        &StationaryOptions::default(),
    )
    .stage("stationary profile")?;
    let l1 = sample.mean.l1_distance(&report.profile).stage("compare")?;
    Ok(HydrostaticComparison {
        half_width: config.half_width,
        beta: setup.beta,
        l1,
        samples: sample.samples,
        event_count: sample.event_count,
        stationary_residual: report.residual,
        march_steps: report.march_steps,
        picard: report.picard,
        sampled: sample.mean,
        profile: report.profile,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EvolveReport {
    pub beta: f64,
    pub steps: usize,
    pub dt: f64,
    pub stability_bound: f64,
    pub max_balance_defect: f64,
    pub times: Vec<f64>,
    pub mass: Vec<f64>,
}

pub fn pde_evolve(config: &ExperimentConfig, setup: &Setup) -> Result<(DensityPath, EvolveReport), RunError> {
    let conv = setup.convolution(config)?;
    let solver = NonlocalSolver::new(&conv, setup.beta).stage("pde")?;
    let mut defect = 0.0f64;
    let full = solver
        .evolve_with(&setup.gamma(config)?, config.t_end, config.dt, None, |_, b| {
            defect = defect.max(b.defect())
        })
        .stage("pde")?;
    let sampled = pick_times(&full, &config.sample_times())?;
    let report = EvolveReport {
        beta: setup.beta,
        steps: full.steps(),
        dt: full.times()[1] - full.times()[0],
        stability_bound: solver.stability_bound(None),
        max_balance_defect: defect,
        times: sampled.times().to_vec(),
        mass: sampled.fields().iter().map(|f| f.mass()).collect(),
    };
    Ok((sampled, report))
}

#[derive(Debug, Clone, Serialize)]
pub struct StationaryProfileReport {
    pub beta: f64,
    pub beta0: f64,
    pub residual: f64,
    pub march_steps: usize,
    pub picard: PicardOutcome,
    pub solvers_agree: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContractionSummary {
    pub constants: ContractionConstants,
    pub beta: f64,
    pub c_of_beta: f64,
    pub pairs: Vec<ContractionReport>,
    /// `None` when `c(β) ≤ 0` and nothing is asserted.
    pub holds: Option<bool>,
}

/// Pair `k` draws both initial profiles from stream `k` of the seed.
pub fn contraction(config: &ExperimentConfig, setup: &Setup) -> Result<ContractionSummary, RunError> {
    let conv = setup.convolution(config)?;
    let pairs = (0..config.pairs as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = replica_rng(config.seed, k);
            let a = random_profile(setup.grid, config.rho_minus, config.rho_plus, &mut rng)?;
            let b = random_profile(setup.grid, config.rho_minus, config.rho_plus, &mut rng)?;
            contraction_check(&conv, &setup.constants, &a, &b, setup.beta, config.t_end, config.dt)
        })
        .collect::<kacgas_core::Result<Vec<_>>>()
        .stage("contraction")?;
    let c = setup.constants.c_of_beta(setup.beta);
    let holds = (c > 0.0).then(|| pairs.iter().all(|p| p.holds != Some(false)));
    Ok(ContractionSummary {
        constants: setup.constants,
        beta: setup.beta,
        c_of_beta: c,
        pairs,
        holds,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PerturbReport {
    pub beta: f64,
    pub rate_from_f: f64,
    /// Galerkin supremum on the perturbed path with the basis that generated `F`.
    pub rate_hat: f64,
    pub relative_difference: f64,
}

pub fn ldp_perturb(config: &ExperimentConfig, setup: &Setup) -> Result<(DensityPath, PerturbReport), RunError> {
    let conv = setup.convolution(config)?;
    let basis = TestBasis::new(config.modes, config.intervals, config.t_end).stage("basis")?;
    let steps = (config.t_end / config.dt).round().max(1.0) as usize;
    let times: Vec<f64> = (0..=steps).map(|n| config.t_end * n as f64 / steps as f64).collect();
    let f = basis.field(&config.f_coeffs, setup.grid, &times).stage("basis")?;
    let ev = RateEvaluator::new(&conv, setup.beta).stage("ldp")?;
    let gamma = setup.gamma(config)?;
    let path = ev.perturbed_solve(&f, &gamma, config.t_end, config.dt).stage("perturbed solve")?;
    let cost = rate_from_f(&path, &f).stage("ldp")?;
    let rate = ev.rate_sup(&path, &gamma, &basis).stage("ldp")?.rate_hat;
    let report = PerturbReport {
        beta: setup.beta,
        rate_from_f: cost,
        rate_hat: rate,
        relative_difference: if cost > 0.0 { (rate - cost).abs() / cost } else { rate.abs() },
    };
    Ok((path, report))
}

pub fn ldp_eval(config: &ExperimentConfig, setup: &Setup, path: &DensityPath) -> Result<RateReport, RunError> {
    let conv = ConvolutionOperator::new(path.grid(), setup.kernel, config.refine).stage("convolution")?;
    let basis = TestBasis::new(config.modes, config.intervals, path.t_end()).stage("basis")?;
    let gamma = path.first().clone();
    RateEvaluator::new(&conv, setup.beta)
        .stage("ldp")?
        .full_rate(path, &gamma, &basis)
        .stage("ldp")
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelInfo {
    pub half_width: usize,
    pub kernel: &'static str,
    pub kernel_resolution: usize,
    pub row_sum_error: f64,
    pub sup_grad: f64,
    pub cells: usize,
    pub convolution_row_sum_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Beta0Report {
    pub sup_grad: f64,
    pub a: f64,
    pub c_lambda: f64,
    pub beta0: f64,
    pub beta_critical: f64,
    /// False flags a kernel for which `β₀ ≥ β_c`.
    pub below_critical: bool,
}

pub fn beta0_report(setup: &Setup) -> Beta0Report {
    let c = setup.constants;
    Beta0Report {
        sup_grad: c.sup_grad,
        a: c.a,
        c_lambda: c.c_lambda,
        beta0: c.beta0,
        beta_critical: BETA_CRITICAL,
        below_critical: c.below_critical(),
    }
}

/// Outcome of [`run`].
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest: ResultManifest,
    pub verdict: Option<bool>,
}

/// Validates `config`, runs its pipeline, writes the outputs and `manifest.json` into
/// `config.out_dir`.
pub fn run(config: &ExperimentConfig) -> Result<RunOutcome, RunError> {
    config.validate()?;
    let mut out = Emitter::create(&config.out_dir)?;
    let setup = out.timed("setup", || Setup::new(config))?;
    let mut seeds = Vec::new();
    let verdict = match config.kind {
        Kind::Simulate => {
            seeds.push(config.seed);
            let table = setup.table(config)?;
            let (paths, summary) = out.timed("simulate", || simulate_replicas(config, &setup, &table))?;
            let mean = replica_mean(&paths).stage("replica mean")?;
            out.write("simulate.csv", &path_csv(&mean.mean, ["t", "cell_center", "density"]))?;
            out.write_json("simulate.json", &summary)?;
            None
        }
        Kind::HydroCompare => {
            seeds.push(config.seed);
            let cmp = out.timed("hydro-compare", || hydro_compare(config, &setup))?;
            out.write("replica_mean.csv", &path_csv(&cmp.mean, ["t", "cell_center", "density"]))?;
            out.write("pde.csv", &path_csv(&cmp.pde, ["t", "u", "rho"]))?;
            out.write_json("hydro_compare.json", &cmp)?;
            None
        }
        Kind::Hydrostatic => {
            seeds.push(config.seed);
            let cmp = out.timed("hydrostatic", || hydrostatic(config, &setup))?;
            out.write("stationary_sample.csv", &profile_csv(&cmp.sampled, ["cell_center", "density"]))?;
            out.write("stationary_profile.csv", &profile_csv(&cmp.profile, ["u", "rho"]))?;
            out.write_json("hydrostatic.json", &cmp)?;
            None
        }
        Kind::PdeEvolve => {
            let (path, report) = out.timed("pde-evolve", || pde_evolve(config, &setup))?;
            out.write("pde.csv", &path_csv(&path, ["t", "u", "rho"]))?;
            out.write_json("pde_evolve.json", &report)?;
            None
        }
        Kind::PdeStationary => {
            let conv = setup.convolution(config)?;
            let report = out
                .timed("pde-stationary", || {
                    stationary_profile(&conv, setup.beta, config.rho_minus, config.rho_plus, &StationaryOptions::default())
                })
                .stage("stationary profile")?;
            out.write("stationary_profile.csv", &profile_csv(&report.profile, ["u", "rho"]))?;
            out.write_json(
                "pde_stationary.json",
                &StationaryProfileReport {
                    beta: setup.beta,
                    beta0: setup.constants.beta0,
                    residual: report.residual,
                    march_steps: report.march_steps,
                    picard: report.picard,
                    solvers_agree: report.solvers_agree(),
                },
            )?;
            None
        }
        Kind::LdpEval => {
            let file = config.path.as_deref().expect("validated");
            let bytes = std::fs::read(file)?;
            let path = read_path_csv(&bytes).map_err(|message| RunError::Input {
                stage: "read path",
                message: format!("{file}: {message}"),
            })?;
            let report = out.timed("ldp-eval", || ldp_eval(config, &setup, &path))?;
            out.write_json("rate_report.json", &report)?;
            None
        }
        Kind::LdpPerturb => {
            let (path, report) = out.timed("ldp-perturb", || ldp_perturb(config, &setup))?;
            out.write("perturbed_path.csv", &path_csv(&path, ["t", "u", "rho"]))?;
            out.write_json("ldp_perturb.json", &report)?;
            None
        }
        Kind::Beta0 => {
            let report = beta0_report(&setup);
            out.write_json("beta0.json", &report)?;
            Some(report.below_critical)
        }
        Kind::KernelInfo => {
            let table = out.timed("kernel table", || setup.table(config))?;
            let conv = setup.convolution(config)?;
            out.write_json(
                "kernel_info.json",
                &KernelInfo {
                    half_width: config.half_width,
                    kernel: config.kernel.name(),
                    kernel_resolution: config.kernel_resolution,
                    row_sum_error: table.row_sum_error(),
                    sup_grad: table.sup_grad(),
                    cells: config.cells,
                    convolution_row_sum_error: conv.row_sum_error(),
                },
            )?;
            None
        }
        Kind::Contraction => {
            seeds.push(config.seed);
            let summary = out.timed("contraction", || contraction(config, &setup))?;
            out.write_json("contraction.json", &summary)?;
            summary.holds
        }
    };
    let manifest = out.finish(config.kind.name(), config.render(), seeds, verdict)?;
    Ok(RunOutcome { manifest, verdict })
}
