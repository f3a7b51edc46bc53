use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use kacgas::{parse_config_for, run, ConfigError, Kind};

const EXIT_CONFIG: u8 = 2;
const EXIT_VERDICT: u8 = 3;

/// Run one experiment of the Kac lattice gas.
#[derive(Debug, Parser)]
#[command(name = "kacgas", version)]
struct Cli {
    /// simulate | hydro-compare | hydrostatic | pde-evolve | pde-stationary | ldp-eval |
    /// ldp-perturb | beta0 | kernel-info | contraction
    kind: String,
    /// Flat `key = value` experiment file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out_dir: Option<String>,
}

fn config_error(err: &ConfigError) -> ExitCode {
    eprint!("{err}");
    ExitCode::from(EXIT_CONFIG)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Some(kind) = Kind::parse(&cli.kind) else {
        let issue = format!(
            "unknown experiment kind '{}' (expected one of {})",
            cli.kind,
            Kind::ALL.map(|k| k.name()).join(", ")
        );
        return config_error(&ConfigError { issues: vec![issue] });
    };
    let text = match &cli.config {
        Some(p) => match std::fs::read_to_string(p) {
            Ok(t) => t,
            Err(e) => {
                let issue = format!("cannot read {}: {e}", p.display());
                return config_error(&ConfigError { issues: vec![issue] });
            }
        },
        None => String::new(),
    };
    let mut config = match parse_config_for(&text, Some(kind)) {
        Ok(c) => c,
        Err(e) => return config_error(&e),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(w) = cli.workers {
        config.workers = w;
    }
    if let Some(dir) = cli.out_dir {
        config.out_dir = dir;
    }
    if let Err(e) = config.validate() {
        return config_error(&e);
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(config.workers).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("cannot start worker pool: {e}");
            return ExitCode::FAILURE;
        }
    };
    match pool.install(|| run(&config)) {
        Ok(outcome) => {
            let dir = std::path::Path::new(&config.out_dir);
            for o in &outcome.manifest.outputs {
                println!("{}  {}", o.sha256, dir.join(&o.file).display());
            }
            match outcome.verdict {
                Some(false) => {
                    eprintln!("{}: verdict failed", config.kind);
                    ExitCode::from(EXIT_VERDICT)
                }
                _ => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
