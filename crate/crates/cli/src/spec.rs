//! Experiment description: a flat `key = value` file merged with flags.
//!
//! Lines are `key = value`; `#` starts a comment. Lists are comma
//! separated, and a list item `start:end:step` expands to an inclusive
//! range. Keys may use `-` or `_`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use bandsplit::simulate::SimConfig;
use bandsplit::{Protocol, SystemParams};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    Analyze,
    OptimizeThroughput,
    OptimizeDelay,
    Simulate,
    Sweep,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Analyze => "analyze",
            Mode::OptimizeThroughput => "optimize-throughput",
            Mode::OptimizeDelay => "optimize-delay",
            Mode::Simulate => "simulate",
            Mode::Sweep => "sweep",
        }
    }

    fn parse(s: &str) -> Option<Mode> {
        [
            Mode::Analyze,
            Mode::OptimizeThroughput,
            Mode::OptimizeDelay,
            Mode::Simulate,
            Mode::Sweep,
        ]
        .into_iter()
        .find(|m| m.as_str() == s.replace('_', "-"))
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const KEYS: &[&str] = &[
    "mode",
    "out",
    "seed",
    "slots",
    "reps",
    "warmup",
    "grid_step",
    "rate",
    "lambda_p",
    "lambda_s",
    "delay_cap",
    "protocol",
    "delta",
    "omega",
    "slot_duration",
    "sensing_duration",
    "bandwidth",
    "power_primary",
    "power_secondary",
    "noise",
    "gamma_p",
    "gamma_s",
    "gain_p_pd",
    "gain_p_s",
    "gain_s_sd",
    "gain_s_pd",
];

/// Raw settings before validation. Later inserts win.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

fn normalize_key(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('-', "_")
}

impl Settings {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut settings = Settings::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::invalid(
                    format!("line {}", i + 1),
                    format!("expected `key = value`, got `{line}`"),
                )
            })?;
            settings.set(key, value)?;
        }
        Ok(settings)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let key = normalize_key(key);
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::invalid(key.clone(), "unknown key"));
        }
        self.values.insert(key, value.trim().to_string());
        Ok(())
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn has(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    fn number(&self, key: &str) -> Result<Option<f64>, CliError> {
        self.get(key).map(|v| parse_number(key, v)).transpose()
    }

    fn integer(&self, key: &str) -> Result<Option<u64>, CliError> {
        self.get(key)
            .map(|v| {
                v.parse::<u64>()
                    .map_err(|_| CliError::invalid(key, format!("`{v}` is not a non-negative integer")))
            })
            .transpose()
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        self.get(key).map(|v| parse_list(key, v)).transpose()
    }
}

fn parse_number(key: &str, text: &str) -> Result<f64, CliError> {
    let x: f64 = text
        .trim()
        .parse()
        .map_err(|_| CliError::invalid(key, format!("`{}` is not a number", text.trim())))?;
    if !x.is_finite() {
        return Err(CliError::invalid(key, format!("`{}` is not finite", text.trim())));
    }
    Ok(x)
}

fn parse_list(key: &str, text: &str) -> Result<Vec<f64>, CliError> {
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let parts: Vec<&str> = item.split(':').collect();
        match parts.as_slice() {
            [x] => out.push(parse_number(key, x)?),
            [start, end, step] => out.extend(expand_range(
                key,
                parse_number(key, start)?,
                parse_number(key, end)?,
                parse_number(key, step)?,
            )?),
            _ => {
                return Err(CliError::invalid(
                    key,
                    format!("`{item}` is neither a number nor start:end:step"),
                ))
            }
        }
    }
    if out.is_empty() {
        return Err(CliError::invalid(key, "list is empty"));
    }
    Ok(out)
}

fn expand_range(key: &str, start: f64, end: f64, step: f64) -> Result<Vec<f64>, CliError> {
    if !(step > 0.0) || end < start {
        return Err(CliError::invalid(
            key,
            format!("range {start}:{end}:{step} needs step > 0 and end >= start"),
        ));
    }
    let n = ((end - start) / step).round();
    if (start + n * step - end).abs() > 1e-9 * step.max(end.abs()) {
        return Err(CliError::invalid(
            key,
            format!("step {step} does not divide {start}:{end}"),
        ));
    }
    if n > 1e6 {
        return Err(CliError::invalid(
            key,
            format!("range {start}:{end}:{step} is too long"),
        ));
    }
    // index-based so values do not accumulate rounding error
    Ok((0..=n as u64)
        .map(|i| if i == n as u64 { end } else { start + i as f64 * step })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocols {
    Proposed,
    Pcr,
    Both,
}

impl Protocols {
    pub fn list(self) -> Vec<Protocol> {
        match self {
            Protocols::Proposed => vec![Protocol::Proposed],
            Protocols::Pcr => vec![Protocol::Pcr],
            Protocols::Both => vec![Protocol::Proposed, Protocol::Pcr],
        }
    }
}

/// A fully resolved and validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub mode: Mode,
    /// Physical setup; the packet size is replaced per spectral rate.
    pub params: SystemParams,
    pub rates: Vec<f64>,
    pub lambda_p: Vec<f64>,
    pub lambda_s: Option<f64>,
    pub delay_cap: Option<f64>,
    pub protocols: Vec<Protocol>,
    /// Fixed `(delta, omega)` for analyze and simulate.
    pub policy: (f64, f64),
    pub grid_step: f64,
    pub sim: SimConfig,
    pub out: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn from_settings(s: &Settings) -> Result<Self, CliError> {
        let mode_text = s
            .get("mode")
            .ok_or_else(|| CliError::invalid("mode", "no mode given"))?;
        let mode =
            Mode::parse(mode_text).ok_or_else(|| CliError::invalid("mode", format!("unknown mode `{mode_text}`")))?;

        check_fields(mode, s)?;

        let mut params = SystemParams::figure_setting(1.0);
        let apply = |key: &str, field: &mut f64| -> Result<(), CliError> {
            if let Some(v) = s.number(key)? {
                *field = v;
            }
            Ok(())
        };
        apply("slot_duration", &mut params.slot_duration)?;
        apply("sensing_duration", &mut params.sensing_duration)?;
        apply("bandwidth", &mut params.bandwidth)?;
        apply("power_primary", &mut params.power_primary)?;
        apply("power_secondary", &mut params.power_secondary)?;
        apply("noise", &mut params.noise)?;
        apply("gain_p_pd", &mut params.gain_p_pd)?;
        apply("gain_p_s", &mut params.gain_p_s)?;
        apply("gain_s_sd", &mut params.gain_s_sd)?;
        apply("gain_s_pd", &mut params.gain_s_pd)?;
        for (gamma, power) in [("gamma_p", "power_primary"), ("gamma_s", "power_secondary")] {
            if let Some(g) = s.number(gamma)? {
                if s.has(power) {
                    return Err(CliError::invalid(
                        gamma,
                        format!("conflicts with {power}; give one of them"),
                    ));
                }
                if !(g > 0.0) {
                    return Err(CliError::invalid(gamma, format!("must be positive, got {g}")));
                }
                let watts = g * params.noise;
                if gamma == "gamma_p" {
                    params.power_primary = watts;
                } else {
                    params.power_secondary = watts;
                }
            }
        }

        let rates = s.list("rate")?.unwrap_or_else(|| vec![1.0]);
        for &r in &rates {
            if !(r > 0.0) {
                return Err(CliError::invalid(
                    "rate",
                    format!("spectral rate must be positive, got {r}"),
                ));
            }
            params
                .with_spectral_rate(r)
                .validate()
                .map_err(|e| CliError::from_core("params", e))?;
        }

        let lambda_p = s.list("lambda_p")?.unwrap_or_else(|| vec![0.5]);
        for &lp in &lambda_p {
            probability("lambda_p", lp)?;
        }
        let lambda_s = s.number("lambda_s")?;
        if let Some(ls) = lambda_s {
            probability("lambda_s", ls)?;
        }
        let delay_cap = s.number("delay_cap")?;
        if let Some(cap) = delay_cap {
            if !(cap > 0.0) {
                return Err(CliError::invalid("delay_cap", format!("must be positive, got {cap}")));
            }
        }

        let protocols = match s.get("protocol").map(|p| p.to_ascii_lowercase()) {
            None => Protocols::Both,
            Some(p) => match p.as_str() {
                "proposed" => Protocols::Proposed,
                "pcr" => Protocols::Pcr,
                "both" => Protocols::Both,
                other => {
                    return Err(CliError::invalid(
                        "protocol",
                        format!("`{other}` is not proposed, pcr or both"),
                    ))
                }
            },
        }
        .list();

        let delta = s.number("delta")?.unwrap_or(0.5);
        let omega = s.number("omega")?.unwrap_or(0.5);
        probability("delta", delta)?;
        probability("omega", omega)?;

        let grid_step = s.number("grid_step")?.unwrap_or(1e-3);
        if !(grid_step > 0.0 && grid_step <= 0.5) {
            return Err(CliError::invalid(
                "grid_step",
                format!("must lie in (0, 0.5], got {grid_step}"),
            ));
        }

        let slots = s.integer("slots")?.unwrap_or(1_000_000);
        let reps = s.integer("reps")?.unwrap_or(10);
        let seed = s.integer("seed")?.unwrap_or(42);
        let mut sim = SimConfig::new(slots, reps as usize, seed);
        if let Some(w) = s.integer("warmup")? {
            sim.warmup_slots = w;
        }
        if reps == 0 {
            return Err(CliError::invalid("reps", "need at least one replication"));
        }
        if sim.warmup_slots >= slots {
            return Err(CliError::invalid(
                "slots",
                format!("{slots} slots leave nothing after {} warmup slots", sim.warmup_slots),
            ));
        }

        Ok(ExperimentSpec {
            mode,
            params,
            rates,
            lambda_p,
            lambda_s,
            delay_cap,
            protocols,
            policy: (delta, omega),
            grid_step,
            sim,
            out: s.get("out").map(PathBuf::from),
        })
    }
}

fn probability(key: &str, x: f64) -> Result<(), CliError> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(CliError::invalid(key, format!("{x} not in [0, 1]")))
    }
}

/// Required and forbidden keys per mode.
fn check_fields(mode: Mode, s: &Settings) -> Result<(), CliError> {
    let required: &[&str] = match mode {
        Mode::OptimizeDelay => &["delay_cap", "lambda_s"],
        Mode::Simulate => &["lambda_s"],
        _ => &[],
    };
    for key in required {
        if !s.has(key) {
            return Err(CliError::invalid(*key, format!("required by {mode}")));
        }
    }
    let forbidden: &[(&str, &str)] = match mode {
        Mode::Analyze | Mode::Simulate => &[("delay_cap", "only used by optimize-delay")],
        Mode::OptimizeThroughput => &[
            ("delay_cap", "only used by optimize-delay"),
            ("delta", "is an output of optimize-throughput"),
            ("omega", "is an output of optimize-throughput"),
        ],
        Mode::OptimizeDelay => &[
            ("delta", "is an output of optimize-delay"),
            ("omega", "is an output of optimize-delay"),
        ],
        Mode::Sweep => &[
            ("delay_cap", "only used by optimize-delay"),
            ("delta", "is an output of sweep"),
            ("omega", "is an output of sweep"),
            ("lambda_s", "sweep saturates the secondary source"),
        ],
    };
    for (key, why) in forbidden {
        if s.has(key) {
            return Err(CliError::invalid(*key, format!("conflicts with mode {mode}: {why}")));
        }
    }
    Ok(())
}
