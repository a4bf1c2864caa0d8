mod artifacts;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use artifacts::{config_hash, Outputs};
use sfwm_core::{Error, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "sfwm", version, about = "Delayed dual-mode pump photon-pair source toolkit")]
struct Cli {
    /// TOML run configuration; defaults are used when absent.
    #[arg(long, global = true, env = "SFWM_CONFIG")]
    config: Option<PathBuf>,
    /// Output directory (default: config `output_dir`, else ./sfwm-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Base seed for stochastic steps.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Grid points per axis, overriding the configured grid.
    #[arg(long, global = true)]
    grid: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct DelayArg {
    /// Pump delay in ps.
    #[arg(long)]
    pub tau_ps: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the dispersion surrogate to the phase-matching targets.
    Calibrate,
    /// Joint spectral amplitude and intensity maps.
    Jsa(DelayArg),
    /// Schmidt purity, heralded purities and filter fraction.
    Purity(DelayArg),
    /// Purity and brightness against pump delay.
    SweepDelay {
        #[arg(long)]
        tau_min_ps: Option<f64>,
        #[arg(long)]
        tau_max_ps: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Unheralded and heralded g², squeezing estimate.
    G2 {
        /// |tanh r|² for the unheralded comparison.
        #[arg(long)]
        tanh2: Option<f64>,
    },
    /// Heralded HOM between two delayed sources.
    Hom {
        /// Ideal two-photon curve only.
        #[arg(long)]
        no_multiphoton: bool,
    },
    /// Reversed-HOM fringe against the pump phase.
    ReversedHom {
        #[arg(long)]
        visibility: Option<f64>,
    },
    /// Simulated two-qubit tomography.
    Tomography {
        #[arg(long)]
        v: Option<f64>,
        #[arg(long)]
        shots: Option<u64>,
    },
    /// Heralding-efficiency budget.
    Efficiency {
        #[arg(long)]
        measured: Option<f64>,
    },
    /// All acceptance criteria with a pass/fail table.
    ReproducePaper,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Calibrate => "calibrate",
            Command::Jsa(_) => "jsa",
            Command::Purity(_) => "purity",
            Command::SweepDelay { .. } => "sweep-delay",
            Command::G2 { .. } => "g2",
            Command::Hom { .. } => "hom",
            Command::ReversedHom { .. } => "reversed-hom",
            Command::Tomography { .. } => "tomography",
            Command::Efficiency { .. } => "efficiency",
            Command::ReproducePaper => "reproduce-paper",
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    Io(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_validation() => 1,
            CliError::Core(_) => 2,
            CliError::Io(_) => 1,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Io(_) => "io",
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Core(e) => e.to_string(),
            CliError::Io(m) => m.clone(),
        }
    }
}

/// Writes a line to stdout, ignoring a closed pipe.
pub fn say(line: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
}

fn report_error(kind: &str, message: &str, code: u8) -> ExitCode {
    let body = json!({ "error": { "kind": kind, "message": message, "exit_code": code } });
    eprintln!("{body}");
    ExitCode::from(code)
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_path(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    if let Some(n) = cli.grid {
        cfg.grid = cfg.grid.with_size(n);
    }
    match &cli.command {
        Command::Jsa(d) | Command::Purity(d) => {
            if let Some(t) = d.tau_ps {
                cfg.split.tau = t * 1e-12;
            }
        }
        Command::SweepDelay {
            tau_min_ps,
            tau_max_ps,
            steps,
        } => {
            if let Some(t) = tau_min_ps {
                cfg.sweep.tau_min = t * 1e-12;
            }
            if let Some(t) = tau_max_ps {
                cfg.sweep.tau_max = t * 1e-12;
            }
            if let Some(s) = steps {
                cfg.sweep.steps = *s;
            }
        }
        Command::G2 { tanh2: Some(t) } => cfg.oracle.tanh2 = *t,
        Command::Hom { no_multiphoton: true } => cfg.interference.multiphoton = false,
        Command::ReversedHom { visibility: Some(v) } => cfg.interference.reversed_visibility = *v,
        Command::Tomography { v, shots } => {
            if let Some(v) = v {
                cfg.tomography.v = *v;
            }
            if let Some(s) = shots {
                cfg.tomography.shots = *s;
            }
        }
        Command::Efficiency { measured: Some(m) } => cfg.efficiency.measured_detected = *m,
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = load_config(cli)?;
    if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build_global()
            .map_err(|e| CliError::Io(format!("cannot build thread pool: {e}")))?;
    }
    let out_dir = cli
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("sfwm-out"));
    let resolved = cfg.to_toml_string()?;
    let mut outputs = Outputs::new(out_dir)?;
    let start = Instant::now();
    let result = commands::dispatch(cli.command.name(), &cli.command, &cfg, &mut outputs)?;
    let wall = start.elapsed().as_secs_f64();
    let report = json!({
        "tool": "sfwm",
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": cli.command.name(),
        "config_hash": config_hash(&resolved),
        "result": result,
    });
    outputs.write_text("resolved_config.toml", &resolved)?;
    outputs.write_json("report.json", &report)?;
    outputs.timings.insert("total".into(), wall);
    let timings = json!({ "subcommand": cli.command.name(), "seconds": outputs.timings });
    outputs.write_json("timings.json", &timings)?;
    if !matches!(cli.command, Command::ReproducePaper) {
        say(&serde_json::to_string_pretty(&report).expect("report serializes"));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            return report_error("usage", e.to_string().trim_end(), 1);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report_error(e.kind(), &e.message(), e.exit_code()),
    }
}
