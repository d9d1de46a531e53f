//! `bandsplit`: analysis, optimization and simulation of the band-splitting
//! cognitive relay from the command line. Results go to CSV.

mod run;
mod spec;

use std::fs::File;
use std::io::{self, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use spec::{ExperimentSpec, Mode, Settings};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Validation error from the library, attributed to the parameter it names.
    pub fn from_core(context: &str, e: bandsplit::Error) -> Self {
        match e {
            bandsplit::Error::InvalidParameter { name, reason } => CliError::invalid(name, reason),
            other => CliError::invalid(context, other.to_string()),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid { .. } => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

/// Analyze, optimize and simulate probabilistic band splitting against
/// prioritized cognitive relaying (PCR).
///
/// Settings come from `--config` (flat `key = value` lines, `#` comments,
/// comma-separated lists, `start:end:step` ranges) and are overridden by
/// flags. Physical parameters default to unit slot and bandwidth,
/// tau = 0.1 T, P_p = 1e-10, P_s = 1e-9, N0 = 1e-11 W/Hz and unit mean gains.
#[derive(Debug, Parser)]
#[command(name = "bandsplit", version)]
struct Cli {
    /// What to run. Falls back to the config file's `mode`.
    #[arg(value_enum)]
    mode: Option<Mode>,
    /// Config file with `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Slots per replication, warmup included [default: 1000000].
    #[arg(long)]
    slots: Option<u64>,
    /// Replications [default: 10].
    #[arg(long)]
    reps: Option<u64>,
    /// Warmup slots excluded from statistics [default: 10% of slots].
    #[arg(long)]
    warmup: Option<u64>,
    /// Step of the delta search [default: 0.001].
    #[arg(long)]
    grid_step: Option<f64>,
    /// Spectral rates b/(T W), e.g. `1` or `0.5:3:0.125`.
    #[arg(long, value_name = "LIST")]
    rate: Option<String>,
    /// Primary arrival rates, e.g. `0.5,0.8`.
    #[arg(long, value_name = "LIST")]
    lambda_p: Option<String>,
    /// Secondary arrival rate.
    #[arg(long)]
    lambda_s: Option<f64>,
    /// Cap on the primary end-to-end delay in slots (optimize-delay).
    #[arg(long)]
    delay_cap: Option<f64>,
    /// proposed, pcr or both [default: both].
    #[arg(long)]
    protocol: Option<String>,
    /// Share of the band for the own queue (analyze, simulate) [default: 0.5].
    #[arg(long)]
    delta: Option<f64>,
    /// Probability the own queue gets the delta share (analyze, simulate) [default: 0.5].
    #[arg(long)]
    omega: Option<f64>,
    /// Primary SNR P_p / N0; replaces power_primary.
    #[arg(long)]
    gamma_p: Option<f64>,
    /// Secondary SNR P_s / N0; replaces power_secondary.
    #[arg(long)]
    gamma_s: Option<f64>,
    /// Any config key, e.g. `--set gain_s_pd=0.5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Cli {
    fn settings(&self) -> Result<Settings, CliError> {
        let mut s = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::invalid("config", format!("{}: {e}", path.display())))?;
                Settings::parse(&text)?
            }
            None => Settings::default(),
        };
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::invalid("set", format!("expected KEY=VALUE, got `{kv}`")))?;
            s.set(k, v)?;
        }
        let flags: [(&str, Option<String>); 16] = [
            ("mode", self.mode.map(|m| m.to_string())),
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
            ("seed", self.seed.map(|x| x.to_string())),
            ("slots", self.slots.map(|x| x.to_string())),
            ("reps", self.reps.map(|x| x.to_string())),
            ("warmup", self.warmup.map(|x| x.to_string())),
            ("grid_step", self.grid_step.map(|x| x.to_string())),
            ("rate", self.rate.clone()),
            ("lambda_p", self.lambda_p.clone()),
            ("lambda_s", self.lambda_s.map(|x| x.to_string())),
            ("delay_cap", self.delay_cap.map(|x| x.to_string())),
            ("protocol", self.protocol.clone()),
            ("delta", self.delta.map(|x| x.to_string())),
            ("omega", self.omega.map(|x| x.to_string())),
            ("gamma_p", self.gamma_p.map(|x| x.to_string())),
            ("gamma_s", self.gamma_s.map(|x| x.to_string())),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                s.set(key, &v)?;
            }
        }
        Ok(s)
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let spec = ExperimentSpec::from_settings(&cli.settings()?)?;
    let rows = run::rows(&spec)?;
    match &spec.out {
        Some(path) => {
            let file =
                File::create(path).map_err(|e| CliError::Runtime(format!("creating {}: {e}", path.display())))?;
            run::write_csv(&rows, BufWriter::new(file))
        }
        None => run::write_csv(&rows, io::stdout().lock()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
