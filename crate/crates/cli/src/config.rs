//! Flat `key = value` experiment files.
//!
//! Parsing is fail-closed: unknown keys, duplicates, malformed values and range
//! violations are all collected and reported together.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use kacgas_core::KernelProfile;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Simulate,
    HydroCompare,
    Hydrostatic,
    PdeEvolve,
    PdeStationary,
    LdpEval,
    LdpPerturb,
    Beta0,
    KernelInfo,
    Contraction,
}

impl Kind {
    pub const ALL: [Kind; 10] = [
        Kind::Simulate,
        Kind::HydroCompare,
        Kind::Hydrostatic,
        Kind::PdeEvolve,
        Kind::PdeStationary,
        Kind::LdpEval,
        Kind::LdpPerturb,
        Kind::Beta0,
        Kind::KernelInfo,
        Kind::Contraction,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Kind::Simulate => "simulate",
            Kind::HydroCompare => "hydro-compare",
            Kind::Hydrostatic => "hydrostatic",
            Kind::PdeEvolve => "pde-evolve",
            Kind::PdeStationary => "pde-stationary",
            Kind::LdpEval => "ldp-eval",
            Kind::LdpPerturb => "ldp-perturb",
            Kind::Beta0 => "beta0",
            Kind::KernelInfo => "kernel-info",
            Kind::Contraction => "contraction",
        }
    }

    pub fn parse(s: &str) -> Option<Kind> {
        Kind::ALL.into_iter().find(|k| k.name() == s)
    }

    fn uses_lattice(&self) -> bool {
        matches!(self, Kind::Simulate | Kind::HydroCompare | Kind::Hydrostatic)
    }

    fn uses_beta(&self) -> bool {
        !matches!(self, Kind::Beta0 | Kind::KernelInfo)
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Interaction strength, absolute or as a multiple of `β₀` of the configured kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Beta {
    Absolute(f64),
    OverBeta0(f64),
}

/// Initial profile `γ`: the linear interpolant of the reservoir densities, optionally
/// plus `amplitude · sin(π(u + 1))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialShape {
    Linear,
    Sine,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub half_width: usize,
    pub beta: Beta,
    pub rho_minus: f64,
    pub rho_plus: f64,
    pub t_end: f64,
    pub sample_dt: f64,
    pub seed: u64,
    pub replicas: usize,
    /// 0 uses every available core.
    pub workers: usize,
    pub out_dir: String,
    pub cells: usize,
    pub dt: f64,
    pub refine: usize,
    pub kernel: KernelProfile,
    pub kernel_resolution: usize,
    pub initial: InitialShape,
    pub initial_amplitude: f64,
    pub burn_in: f64,
    pub samples: usize,
    pub thinning: f64,
    pub modes: usize,
    pub intervals: usize,
    pub path: Option<String>,
    pub f_coeffs: Vec<f64>,
    pub pairs: usize,
}

pub const KEYS: [&str; 27] = [
    "kind",
    "N",
    "beta",
    "beta_over_beta0",
    "rho_minus",
    "rho_plus",
    "t_end",
    "sample_dt",
    "seed",
    "replicas",
    "workers",
    "out_dir",
    "cells",
    "dt",
    "refine",
    "kernel",
    "kernel_resolution",
    "initial",
    "initial_amplitude",
    "burn_in",
    "samples",
    "thinning",
    "modes",
    "intervals",
    "path",
    "f_coeffs",
    "pairs",
];

/// Every problem found in a configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub issues: Vec<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} configuration error(s):", self.issues.len())?;
        for issue in &self.issues {
            writeln!(f, "  - {issue}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

struct Entries {
    map: BTreeMap<String, (usize, String)>,
    issues: Vec<String>,
}

impl Entries {
    fn lex(text: &str) -> Self {
        let mut map = BTreeMap::new();
        let mut issues = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                issues.push(format!("line {line_no}: expected 'key = value', got '{line}'"));
                continue;
            };
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                issues.push(format!("line {line_no}: unknown key '{key}'"));
                continue;
            }
            if value.is_empty() {
                issues.push(format!("line {line_no}: empty value for '{key}'"));
                continue;
            }
            if let Some((first, _)) = map.get(key) {
                issues.push(format!("line {line_no}: duplicate key '{key}' (first set on line {first})"));
                continue;
            }
            map.insert(key.to_string(), (line_no, value.to_string()));
        }
        Self { map, issues }
    }

    fn has(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }

    fn raw(&self, key: &str) -> Option<String> {
        self.map.get(key).map(|(_, v)| v.clone())
    }

    fn value<T: FromStr>(&mut self, key: &str, default: T) -> T {
        match self.map.get(key) {
            None => default,
            Some((line, v)) => match v.parse() {
                Ok(x) => x,
                Err(_) => {
                    self.issues.push(format!("line {line}: cannot parse '{v}' for '{key}'"));
                    default
                }
            },
        }
    }
}

fn check(issues: &mut Vec<String>, ok: bool, msg: impl FnOnce() -> String) {
    if !ok {
        issues.push(msg());
    }
}

fn in_open(x: f64, lo: f64, hi: f64) -> bool {
    x > lo && x < hi
}

impl ExperimentConfig {
    /// Defaults for `kind`; every key not set in a file takes these values.
    pub fn defaults(kind: Kind) -> Self {
        Self {
            kind,
            half_width: 100,
            beta: Beta::Absolute(0.0),
            rho_minus: 0.2,
            rho_plus: 0.8,
            t_end: 0.5,
            sample_dt: 0.05,
            seed: 1,
            replicas: 100,
            workers: 0,
            out_dir: "out".into(),
            cells: 100,
            dt: 0.001,
            refine: 8,
            kernel: KernelProfile::Bump,
            kernel_resolution: kacgas_core::kernel::DEFAULT_NORMALIZATION_RESOLUTION,
            initial: InitialShape::Sine,
            initial_amplitude: 0.15,
            burn_in: 2.0,
            samples: 2000,
            thinning: 0.02,
            modes: 8,
            intervals: 8,
            path: None,
            f_coeffs: Vec::new(),
            pairs: 20,
        }
    }

    /// `γ(u)`.
    pub fn initial_profile(&self, u: f64) -> f64 {
        let linear = self.rho_minus + (self.rho_plus - self.rho_minus) * (u + 1.0) / 2.0;
        match self.initial {
            InitialShape::Linear => linear,
            InitialShape::Sine => linear + self.initial_amplitude * (std::f64::consts::PI * (u + 1.0)).sin(),
        }
    }

    /// Macroscopic sample times `0, sample_dt, …, t_end`.
    pub fn sample_times(&self) -> Vec<f64> {
        let n = (self.t_end / self.sample_dt + 1e-9).floor() as usize;
        let mut times: Vec<f64> = (0..=n).map(|k| k as f64 * self.sample_dt).collect();
        if self.t_end - times[n] > 1e-9 * self.t_end {
            times.push(self.t_end);
        } else {
            times[n] = self.t_end;
        }
        times
    }

    /// Range and consistency checks.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut issues = Vec::new();
        self.collect_issues(&mut issues);
        if issues.is_empty() {
            Ok(())
        } else {
            Err(ConfigError { issues })
        }
    }

    fn collect_issues(&self, issues: &mut Vec<String>) {
        let c = self;
        check(issues, (2..=100_000).contains(&c.half_width), || {
            format!("N = {} outside [2, 100000]", c.half_width)
        });
        let (name, b) = match c.beta {
            Beta::Absolute(b) => ("beta", b),
            Beta::OverBeta0(b) => ("beta_over_beta0", b),
        };
        check(issues, (0.0..=10.0).contains(&b), || format!("{name} = {b} outside [0, 10]"));
        check(issues, in_open(c.rho_minus, 0.0, 1.0), || {
            format!("rho_minus = {} outside (0, 1)", c.rho_minus)
        });
        check(issues, in_open(c.rho_plus, 0.0, 1.0), || {
            format!("rho_plus = {} outside (0, 1)", c.rho_plus)
        });
        check(issues, c.rho_minus <= c.rho_plus, || {
            format!("rho_minus <= rho_plus violated ({} > {})", c.rho_minus, c.rho_plus)
        });
        check(issues, c.t_end > 0.0 && c.t_end <= 1e4, || format!("t_end = {} outside (0, 1e4]", c.t_end));
        check(issues, c.sample_dt > 0.0 && c.sample_dt <= c.t_end, || {
            format!("sample_dt = {} outside (0, t_end]", c.sample_dt)
        });
        check(issues, (1..=1_000_000).contains(&c.replicas), || {
            format!("replicas = {} outside [1, 1000000]", c.replicas)
        });
        check(issues, c.workers <= 4096, || format!("workers = {} above 4096", c.workers));
        check(issues, !c.out_dir.trim().is_empty(), || "out_dir is empty".into());
        check(issues, (2..=100_000).contains(&c.cells), || format!("cells = {} outside [2, 100000]", c.cells));
        if c.kind.uses_lattice() {
            check(issues, c.cells <= 2 * c.half_width, || {
                format!("cells = {} exceeds the lattice resolution 2N = {}", c.cells, 2 * c.half_width)
            });
        }
        check(issues, c.dt > 0.0 && c.dt <= c.t_end, || format!("dt = {} outside (0, t_end]", c.dt));
        if matches!(c.kind, Kind::PdeEvolve | Kind::HydroCompare) && c.dt > 0.0 && c.sample_dt > 0.0 {
            let ratio = c.sample_dt / c.dt;
            check(issues, (ratio - ratio.round()).abs() < 1e-9 * ratio.max(1.0), || {
                format!("sample_dt = {} is not a multiple of dt = {}", c.sample_dt, c.dt)
            });
            let steps = c.t_end / c.dt;
            check(issues, (steps - steps.round()).abs() < 1e-9 * steps.max(1.0), || {
                format!("t_end = {} is not a multiple of dt = {}", c.t_end, c.dt)
            });
        }
        check(issues, (8..=1000).contains(&c.refine), || format!("refine = {} outside [8, 1000]", c.refine));
        check(issues, (16..=10_000_000).contains(&c.kernel_resolution), || {
            format!("kernel_resolution = {} outside [16, 1e7]", c.kernel_resolution)
        });
        check(issues, (0.0..=0.5).contains(&c.initial_amplitude), || {
            format!("initial_amplitude = {} outside [0, 0.5]", c.initial_amplitude)
        });
        if in_open(c.rho_minus, 0.0, 1.0) && in_open(c.rho_plus, 0.0, 1.0) {
            let worst = (0..=1000)
                .map(|k| c.initial_profile(-1.0 + k as f64 / 500.0))
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            check(issues, worst.0 >= 0.0 && worst.1 <= 1.0, || {
                format!("initial profile leaves [0, 1] (range {:.4}..{:.4})", worst.0, worst.1)
            });
        }
        check(issues, c.burn_in > 0.0 && c.burn_in <= 1e4, || format!("burn_in = {} outside (0, 1e4]", c.burn_in));
        check(issues, (1..=10_000_000).contains(&c.samples), || {
            format!("samples = {} outside [1, 1e7]", c.samples)
        });
        check(issues, c.thinning > 0.0 && c.thinning <= 1e3, || {
            format!("thinning = {} outside (0, 1e3]", c.thinning)
        });
        check(issues, c.modes <= 64, || format!("modes = {} above 64", c.modes));
        check(issues, (1..=256).contains(&c.intervals), || format!("intervals = {} outside [1, 256]", c.intervals));
        check(issues, (1..=10_000).contains(&c.pairs), || format!("pairs = {} outside [1, 10000]", c.pairs));
        check(issues, c.f_coeffs.iter().all(|v| v.is_finite()), || "f_coeffs must be finite".into());
        match c.kind {
            Kind::LdpEval => check(issues, c.path.is_some(), || "missing required key 'path' for ldp-eval".into()),
            Kind::LdpPerturb => {
                let dim = c.modes * (c.intervals + 1);
                check(issues, c.f_coeffs.len() == dim, || {
                    format!(
                        "f_coeffs has {} entries, the basis (modes = {}, intervals = {}) has {dim}",
                        c.f_coeffs.len(),
                        c.modes,
                        c.intervals
                    )
                });
            }
            _ => {}
        }
    }

    /// Writes every key; `parse_config(&c.render()) == Ok(c)`.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        put("kind", self.kind.name().into());
        put("N", self.half_width.to_string());
        match self.beta {
            Beta::Absolute(b) => put("beta", b.to_string()),
            Beta::OverBeta0(b) => put("beta_over_beta0", b.to_string()),
        }
        put("rho_minus", self.rho_minus.to_string());
        put("rho_plus", self.rho_plus.to_string());
        put("t_end", self.t_end.to_string());
        put("sample_dt", self.sample_dt.to_string());
        put("seed", self.seed.to_string());
        put("replicas", self.replicas.to_string());
        put("workers", self.workers.to_string());
        put("out_dir", self.out_dir.clone());
        put("cells", self.cells.to_string());
        put("dt", self.dt.to_string());
        put("refine", self.refine.to_string());
        put("kernel", self.kernel.name().into());
        put("kernel_resolution", self.kernel_resolution.to_string());
        put(
            "initial",
            match self.initial {
                InitialShape::Linear => "linear".into(),
                InitialShape::Sine => "sine".into(),
            },
        );
        put("initial_amplitude", self.initial_amplitude.to_string());
        put("burn_in", self.burn_in.to_string());
        put("samples", self.samples.to_string());
        put("thinning", self.thinning.to_string());
        put("modes", self.modes.to_string());
        put("intervals", self.intervals.to_string());
        if let Some(p) = &self.path {
            put("path", p.clone());
        }
        if !self.f_coeffs.is_empty() {
            put(
                "f_coeffs",
                self.f_coeffs.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","),
            );
        }
        put("pairs", self.pairs.to_string());
        s
    }
}

/// Parses and validates a configuration; `kind` must be set in the text.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    parse_config_for(text, None)
}

/// As [`parse_config`], with the experiment kind supplied by the caller (for instance a
/// subcommand). A `kind` key in the text must then agree with it.
pub fn parse_config_for(text: &str, kind: Option<Kind>) -> Result<ExperimentConfig, ConfigError> {
    let mut e = Entries::lex(text);
    let file_kind = match e.raw("kind") {
        None => None,
        Some(s) => match Kind::parse(&s) {
            Some(k) => Some(k),
            None => {
                e.issues.push(format!(
                    "unknown kind '{s}' (expected one of {})",
                    Kind::ALL.map(|k| k.name()).join(", ")
                ));
                None
            }
        },
    };
    let kind = match (kind, file_kind) {
        (Some(a), Some(b)) if a != b => {
            e.issues.push(format!("kind '{b}' in the file contradicts the requested '{a}'"));
            a
        }
        (Some(a), _) => a,
        (None, Some(b)) => b,
        (None, None) => {
            if !e.has("kind") {
                e.issues.push("missing required key 'kind'".into());
            }
            Kind::Simulate
        }
    };
    let d = ExperimentConfig::defaults(kind);
    if kind.uses_lattice() && !e.has("N") {
        e.issues.push(format!("missing required key 'N' for {kind}"));
    }
    let beta = match (e.has("beta"), e.has("beta_over_beta0")) {
        (true, true) => {
            e.issues.push("set either 'beta' or 'beta_over_beta0', not both".into());
            d.beta
        }
        (true, false) => Beta::Absolute(e.value("beta", 0.0)),
        (false, true) => Beta::OverBeta0(e.value("beta_over_beta0", 0.0)),
        (false, false) => {
            if kind.uses_beta() {
                e.issues.push(format!("missing required key 'beta' (or 'beta_over_beta0') for {kind}"));
            }
            d.beta
        }
    };
    let kernel = match e.raw("kernel") {
        None => d.kernel,
        Some(s) => KernelProfile::parse(&s).unwrap_or_else(|| {
            e.issues.push(format!("unknown kernel profile '{s}'"));
            d.kernel
        }),
    };
    let initial = match e.raw("initial").as_deref() {
        None => d.initial,
        Some("linear") => InitialShape::Linear,
        Some("sine") => InitialShape::Sine,
        Some(s) => {
            e.issues.push(format!("unknown initial profile '{s}' (expected linear or sine)"));
            d.initial
        }
    };
    let f_coeffs = match e.raw("f_coeffs") {
        None => Vec::new(),
        Some(s) => {
            let parsed: Result<Vec<f64>, _> = s.split(',').map(|v| v.trim().parse::<f64>()).collect();
            parsed.unwrap_or_else(|_| {
                e.issues.push(format!("cannot parse f_coeffs '{s}' as a comma-separated list"));
                Vec::new()
            })
        }
    };
    let path = e.raw("path");
    let out_dir = e.raw("out_dir").unwrap_or_else(|| d.out_dir.clone());
    let config = ExperimentConfig {
        kind,
        half_width: e.value("N", d.half_width),
        beta,
        rho_minus: e.value("rho_minus", d.rho_minus),
        rho_plus: e.value("rho_plus", d.rho_plus),
        t_end: e.value("t_end", d.t_end),
        sample_dt: e.value("sample_dt", d.sample_dt),
        seed: e.value("seed", d.seed),
        replicas: e.value("replicas", d.replicas),
        workers: e.value("workers", d.workers),
        out_dir,
        cells: e.value("cells", d.cells),
        dt: e.value("dt", d.dt),
        refine: e.value("refine", d.refine),
        kernel,
        kernel_resolution: e.value("kernel_resolution", d.kernel_resolution),
        initial,
        initial_amplitude: e.value("initial_amplitude", d.initial_amplitude),
        burn_in: e.value("burn_in", d.burn_in),
        samples: e.value("samples", d.samples),
        thinning: e.value("thinning", d.thinning),
        modes: e.value("modes", d.modes),
        intervals: e.value("intervals", d.intervals),
        path,
        f_coeffs,
        pairs: e.value("pairs", d.pairs),
    };
    let mut issues = e.issues;
    config.collect_issues(&mut issues);
    if issues.is_empty() {
        Ok(config)
    } else {
        Err(ConfigError { issues })
    }
}
