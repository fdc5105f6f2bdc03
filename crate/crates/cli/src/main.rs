use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lgvortex_cli::{exit, parse_config, run, ConfigError, RunConfig, RunError, Stage};
use lgvortex_core::Scheme;

/// Self-dual vortex zero modes, Witten index and SUSY QM algebra checks.
#[derive(Parser)]
#[command(name = "lgvortex", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the radial profile and sample the 2D background.
    Solve(Overrides),
    /// Smallest singular values and kernel of D.
    Spectrum(Overrides),
    /// Kernels of D and D†, Witten and Fredholm indices.
    Index(Overrides),
    /// Check the supercharge algebra and the supersymmetry verdict.
    VerifyAlgebra(Overrides),
    /// Map fermionic zero modes to bosonic fluctuations and check them.
    BosonMap(Overrides),
    /// Run the pipeline listed in the configuration (all stages by default).
    Report(Overrides),
}

/// Values taken from `--config` (if given), then overridden by flags.
#[derive(Args)]
struct Overrides {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    n: Option<i64>,
    #[arg(long)]
    e: Option<f64>,
    #[arg(long)]
    v: Option<f64>,
    #[arg(long)]
    r_max: Option<f64>,
    #[arg(long)]
    m_r: Option<usize>,
    /// Grid points per side.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    scheme: Option<Scheme>,
    #[arg(long)]
    k: Option<usize>,
    /// Zero threshold in units of e·v.
    #[arg(long)]
    tol_zero: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Overrides {
    fn into_config(self, pipeline: Option<Vec<Stage>>) -> Result<RunConfig, ConfigError> {
        let mut config = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Parse(format!("{}: {e}", path.display())))?;
                parse_config(&text)?
            }
            None => {
                let n = self.n.ok_or_else(|| ConfigError::Validation(vec!["vortex.n is required without --config".into()]))?;
                let mut c = RunConfig::new(n, self.e.unwrap_or(1.0), self.v.unwrap_or(1.0));
                c.vortex.r_max = None;
                c
            }
        };
        let v = &mut config.vortex;
        if let Some(n) = self.n {
            v.n = n;
        }
        if let Some(e) = self.e {
            v.e = e;
        }
        if let Some(x) = self.v {
            v.v = x;
        }
        if let Some(r) = self.r_max {
            v.r_max = Some(r);
        }
        if let Some(m) = self.m_r {
            v.m_r = m;
        }
        if let Some(m) = self.grid {
            config.grid.m_xy = m;
        }
        if let Some(s) = self.scheme {
            config.grid.scheme = s;
        }
        if let Some(k) = self.k {
            config.spectral.k = k;
        }
        if let Some(t) = self.tol_zero {
            config.spectral.tol_zero = t;
        }
        if let Some(s) = self.seed {
            config.spectral.seed = s;
        }
        if let Some(o) = self.out {
            config.output_dir = o;
        }
        if let Some(p) = pipeline {
            config.pipeline = p;
        }
        config.fill_defaults();
        config.validate()?;
        Ok(config)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LGVORTEX_LOG", "warn")).init();
    let cli = Cli::parse();
    let (overrides, pipeline) = match cli.command {
        Command::Solve(o) => (o, Some(vec![Stage::Profile, Stage::Background])),
        Command::Spectrum(o) => (o, Some(vec![Stage::Spectrum])),
        Command::Index(o) => (o, Some(vec![Stage::Index])),
        Command::VerifyAlgebra(o) => (o, Some(vec![Stage::Algebra])),
        Command::BosonMap(o) => (o, Some(vec![Stage::Bosonmap])),
        Command::Report(o) => (o, None),
    };
    let config = match overrides.into_config(pipeline) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(exit::USAGE as u8);
        }
    };
    match run(&config) {
        Ok(manifest) => {
            for check in &manifest.checks {
                println!("{} {}: {}", if check.passed { "PASS" } else { "FAIL" }, check.name, check.detail);
            }
            println!("outputs in {}", manifest.output_dir.display());
            ExitCode::from(if manifest.passed() { exit::PASS } else { exit::CHECK_FAILURE } as u8)
        }
        Err(e) => {
            eprintln!("{e}");
            let code = if e.is_non_convergence() {
                exit::NON_CONVERGENCE
            } else if matches!(e, RunError::Io { .. }) {
                exit::USAGE
            } else {
                exit::CHECK_FAILURE
            };
            ExitCode::from(code as u8)
        }
    }
}
