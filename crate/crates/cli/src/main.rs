//! `coopfb`: Monte Carlo experiments for cooperative-feedback precoding in the
//! two-user MIMO interference channel.
//!
//! Exit status is 0 on success, 1 when a validation check or the simulation
//! itself fails, and 2 for configuration errors.

mod checks;
mod config;

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use coopfb::channel::TauMode;
use coopfb::metrics::estimate_asymptotes;
use coopfb::quantization::Codebook;
use coopfb::report::{asymptote_csv, scan_csv, sweep_csv, AsymptoteRow};
use coopfb::simulator::{run_sweep, scan_n, Scheme, SweepSpec};
use log::info;

use crate::checks::CheckContext;
use crate::config::{split_overrides, ConfigError, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "coopfb", version, about = "Cooperative-feedback precoding experiments")]
struct Cli {
    /// Configuration file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Shorthand for --sweep.trials.
    #[arg(long, global = true)]
    trials: Option<u64>,
    /// Shorthand for --sweep.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Shorthand for --output.path; `-` is standard output.
    #[arg(long, global = true)]
    output: Option<String>,
    /// Shorthand for --sweep.workers.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Throughput, outage and transmit power over the P_max grid.
    Sweep,
    /// Run the property checks and report pass/fail per check.
    Validate {
        /// Comma-separated checks, or `all`.
        #[arg(long)]
        check: Option<String>,
        /// Random instances for the gradient and algorithm 2 checks.
        #[arg(long)]
        points: Option<usize>,
        /// `none` or `skip-quantization`.
        #[arg(long)]
        inject_fault: Option<String>,
    },
    /// Large-P_max estimates per τ next to the simulated margin scheme.
    Asymptote,
    /// Repeat the sweep for each inner width N.
    ScanN,
    /// Write the codebook of one link in text form.
    Codebook {
        #[arg(long, default_value_t = 0)]
        link: usize,
    },
}

#[derive(Debug, thiserror::Error)]
enum AppError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Run(#[from] coopfb::Error),
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
    #[error("{0} check(s) failed")]
    ChecksFailed(usize),
}

impl AppError {
    fn exit_code(&self) -> u8 {
        match self {
            AppError::Config(_) => 2,
            _ => 1,
        }
    }
}

fn resolve(cli: &Cli, overrides: &[(String, String)]) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    for (k, v) in overrides {
        cfg.set(k, v)?;
    }
    let mut shorthand = vec![];
    if let Some(t) = cli.trials {
        shorthand.push(("sweep.trials", t.to_string()));
    }
    if let Some(s) = cli.seed {
        shorthand.push(("sweep.seed", s.to_string()));
    }
    if let Some(o) = &cli.output {
        shorthand.push(("output.path", o.clone()));
    }
    if let Some(w) = cli.workers {
        shorthand.push(("sweep.workers", w.to_string()));
    }
    if let Command::Validate {
        check,
        points,
        inject_fault,
    } = &cli.command
    {
        if let Some(c) = check {
            shorthand.push(("validate.check", c.clone()));
        }
        if let Some(p) = points {
            shorthand.push(("validate.points", p.to_string()));
        }
        if let Some(f) = inject_fault {
            shorthand.push(("validate.fault", f.clone()));
        }
    }
    for (k, v) in shorthand {
        cfg.set(k, &v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_codebooks(cfg: &RunConfig) -> Result<Option<[Codebook; 2]>, AppError> {
    let read = |p: &str| -> Result<Codebook, AppError> {
        let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Read {
            path: p.to_string(),
            source,
        })?;
        Codebook::from_text(&text).map_err(|e| ConfigError::Invalid(format!("{p}: {e}")).into())
    };
    Ok(match cfg.codebooks.as_slice() {
        [] => None,
        [one] => {
            let c = read(one)?;
            Some([c.clone(), c])
        }
        [a, b] => Some([read(a)?, read(b)?]),
        _ => unreachable!("validated"),
    })
}

/// The sweep spec with imported codebooks attached and checked.
fn spec_for(cfg: &RunConfig) -> Result<SweepSpec, AppError> {
    let mut spec = cfg.sweep_spec();
    spec.codebooks = load_codebooks(cfg)?;
    spec.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
    Ok(spec)
}

fn write_atomic(path: &Path, content: &str) -> Result<(), AppError> {
    let err = |source| AppError::Write {
        path: path.display().to_string(),
        source,
    };
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, content).map_err(err)?;
    std::fs::rename(&tmp, path).map_err(err)
}

/// Writes the finished output and the resolved configuration next to it.
/// With standard output the configuration goes to standard error.
fn emit(cfg: &RunConfig, command: &str, content: &str) -> Result<(), AppError> {
    let sidecar = format!("# coopfb {} {command}\n{}", env!("CARGO_PKG_VERSION"), cfg.to_toml());
    if cfg.output_path == "-" {
        let mut out = std::io::stdout().lock();
        let _ = out.write_all(content.as_bytes());
        let _ = out.flush();
        eprint!("{sidecar}");
        return Ok(());
    }
    let path = Path::new(&cfg.output_path);
    write_atomic(path, content)?;
    let mut side = path.as_os_str().to_owned();
    side.push(".config");
    write_atomic(Path::new(&side), &sidecar)?;
    info!("wrote {} and its .config sidecar", path.display());
    Ok(())
}

fn cmd_sweep(cfg: &RunConfig) -> Result<(), AppError> {
    let spec = spec_for(cfg)?;
    info!(
        "sweep: {} points x {} schemes x {} trials",
        spec.p_max_grid_db.len(),
        spec.schemes.len(),
        spec.trials_per_point
    );
    let started = Instant::now();
    let result = run_sweep(&spec)?;
    info!("sweep finished in {:.2?}", started.elapsed());
    emit(cfg, "sweep", &sweep_csv(&result, cfg.output_throughput))
}

fn cmd_scan_n(cfg: &RunConfig) -> Result<(), AppError> {
    let spec = spec_for(cfg)?;
    let rows = scan_n(&spec, &cfg.scan_n)?;
    emit(cfg, "scan-n", &scan_csv(&rows, cfg.seed, cfg.output_throughput))
}

fn cmd_asymptote(cfg: &RunConfig) -> Result<(), AppError> {
    let base = spec_for(cfg)?;
    let top_db = cfg.top_p_max_db();
    let p_max = cfg.top_p_max();
    let codebooks = base.shared_codebooks()?;
    let mut rows = Vec::with_capacity(cfg.asymptote_tau.len());
    for mode in &cfg.asymptote_tau {
        let tau = mode.tau(p_max);
        let mut params = base.params.clone();
        params.tau_mode = *mode;
        let est = estimate_asymptotes(&params, &codebooks[0], tau, cfg.theta, cfg.asymptote_trials, cfg.seed)?;
        let scheme = match *mode {
            TauMode::Fixed(t) => Scheme::MarginFixed { tau: t },
            TauMode::Proportional(c) => Scheme::MarginProportional { coeff: c },
        };
        let spec = SweepSpec {
            p_max_grid_db: vec![top_db],
            schemes: vec![scheme],
            codebooks: Some(codebooks.clone()),
            ..base.clone()
        };
        let sim = run_sweep(&spec)?;
        info!("tau {tau}: asymptote {:.4}, simulated achievable {:.4}", est.throughput, sim.rows[0].point.mean_achievable);
        rows.push(AsymptoteRow {
            tau,
            asymptote: est.throughput,
            asymptote_stderr: est.throughput_stderr,
            outage_bound: est.outage_probability_bound(),
            p_max_db: top_db,
            simulated: sim.rows[0].point.clone(),
        });
    }
    emit(cfg, "asymptote", &asymptote_csv(&rows, cfg.seed))
}

fn cmd_validate(cfg: &RunConfig) -> Result<(), AppError> {
    let spec = spec_for(cfg)?;
    let codebooks = spec.shared_codebooks()?;
    let params = cfg.system_params();
    let ctx = CheckContext {
        params: &params,
        codebooks: &codebooks,
        seed: cfg.seed,
        trials: cfg.validate_trials,
        points: cfg.validate_points,
        fault: cfg.fault,
    };
    let mut report = String::new();
    let mut failed = 0;
    for name in &cfg.checks {
        let outcome = checks::run(name, &ctx)?;
        failed += usize::from(!outcome.passed);
        report.push_str(&outcome.to_string());
        report.push('\n');
    }
    report.push_str(&format!("{} passed, {failed} failed\n", cfg.checks.len() - failed));
    emit(cfg, "validate", &report)?;
    if failed > 0 {
        return Err(AppError::ChecksFailed(failed));
    }
    Ok(())
}

fn cmd_codebook(cfg: &RunConfig, link: usize) -> Result<(), AppError> {
    if link > 1 {
        return Err(ConfigError::Invalid(format!("--link must be 0 or 1, got {link}")).into());
    }
    let spec = spec_for(cfg)?;
    let codebooks = spec.shared_codebooks()?;
    emit(cfg, "codebook", &codebooks[link].to_text())
}

fn run(cli: &Cli, cfg: &RunConfig) -> Result<(), AppError> {
    match &cli.command {
        Command::Sweep => cmd_sweep(cfg),
        Command::Validate { .. } => cmd_validate(cfg),
        Command::Asymptote => cmd_asymptote(cfg),
        Command::ScanN => cmd_scan_n(cfg),
        Command::Codebook { link } => cmd_codebook(cfg, *link),
    }
}

fn main() -> ExitCode {
    let (args, overrides) = match split_overrides(std::env::args().collect()) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let cfg = match resolve(&cli, &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    env_logger::Builder::new().filter_level(cfg.verbosity).init();
    match run(&cli, &cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
