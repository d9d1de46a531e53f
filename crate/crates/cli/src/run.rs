//! Evaluates every grid point of an experiment and writes the CSV.

use std::io::Write;

use bandsplit::optimize::{max_secondary_throughput, min_secondary_delay, pcr_throughput};
use bandsplit::queueing::{metrics, primary_delay, secondary_delay};
use bandsplit::simulate::{simulate, Estimate, SimStats};
use bandsplit::{Arrivals, Error, Policy, Protocol, SystemParams};
use rayon::prelude::*;

use crate::spec::{ExperimentSpec, Mode};
use crate::CliError;

pub const HEADER: [&str; 16] = [
    "rate_R",
    "lambda_p",
    "lambda_s",
    "protocol",
    "delta_star",
    "omega_star",
    "mu_s_analytic",
    "mu_s_sim",
    "ci_mu_s",
    "D_s_analytic",
    "D_s_sim",
    "ci_D_s",
    "D_p_analytic",
    "D_p_sim",
    "ci_D_p",
    "status",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// The optimization problem has no feasible policy.
    Infeasible,
    /// Some queue is unstable under the given policy.
    Unstable,
}

impl Status {
    fn as_str(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Infeasible => "infeasible",
            Status::Unstable => "unstable",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub rate: f64,
    pub lambda_p: f64,
    pub lambda_s: Option<f64>,
    pub protocol: Protocol,
    pub delta: Option<f64>,
    pub omega: Option<f64>,
    pub mu_s: Option<f64>,
    pub mu_s_sim: Option<Estimate>,
    pub d_s: Option<f64>,
    pub d_s_sim: Option<Estimate>,
    pub d_p: Option<f64>,
    pub d_p_sim: Option<Estimate>,
    pub status: Status,
}

impl Row {
    fn new(rate: f64, lambda_p: f64, lambda_s: Option<f64>, protocol: Protocol) -> Self {
        Row {
            rate,
            lambda_p,
            lambda_s,
            protocol,
            delta: None,
            omega: None,
            mu_s: None,
            mu_s_sim: None,
            d_s: None,
            d_s_sim: None,
            d_p: None,
            d_p_sim: None,
            status: Status::Ok,
        }
    }

    fn record(&self) -> Vec<String> {
        let num = |x: Option<f64>| x.filter(|v| v.is_finite()).map(|v| v.to_string()).unwrap_or_default();
        let mean = |e: Option<Estimate>| num(e.map(|e| e.mean));
        let half = |e: Option<Estimate>| num(e.map(|e| e.half_width));
        vec![
            num(Some(self.rate)),
            num(Some(self.lambda_p)),
            num(self.lambda_s),
            self.protocol.to_string(),
            num(self.delta),
            num(self.omega),
            num(self.mu_s),
            mean(self.mu_s_sim),
            half(self.mu_s_sim),
            num(self.d_s),
            mean(self.d_s_sim),
            half(self.d_s_sim),
            num(self.d_p),
            mean(self.d_p_sim),
            half(self.d_p_sim),
            self.status.as_str().to_string(),
        ]
    }
}

/// Errors that describe the operating point rather than a failure.
fn is_regime(e: &Error) -> bool {
    matches!(
        e,
        Error::Unstable(_) | Error::Saturated(_) | Error::Infeasible(_) | Error::InfeasibleCap { .. }
    )
}

fn runtime(e: Error) -> CliError {
    CliError::Runtime(e.to_string())
}

struct Analytic {
    mu_s: f64,
    d_s: Option<f64>,
    d_p: Option<f64>,
    stable: bool,
}

/// Closed-form rates and delays of a fixed policy; `None` when the primary
/// queue itself is unstable. `D_s` has no closed form under PCR.
fn analytic(
    params: &SystemParams,
    policy: &Policy,
    lambda_p: f64,
    lambda_s: Option<f64>,
) -> Result<Option<Analytic>, CliError> {
    let m = match metrics(params, policy, lambda_p) {
        Ok(m) => m,
        Err(e) if is_regime(&e) => return Ok(None),
        Err(e) => return Err(runtime(e)),
    };
    let relay_ok = m.lambda_ps < m.mu_ps;
    let d_p = if relay_ok {
        primary_delay(lambda_p, m.mu_p, m.out_p_pd, m.phi_s_pd).ok()
    } else {
        None
    };
    let d_s = match (policy.protocol, lambda_s) {
        (Protocol::Proposed, Some(ls)) => secondary_delay(lambda_p, ls, m.mu_p, m.phi_s_sd).ok(),
        _ => None,
    };
    Ok(Some(Analytic {
        mu_s: m.mu_s,
        d_s,
        d_p,
        stable: relay_ok && lambda_s.is_none_or(|ls| ls < m.mu_s),
    }))
}

fn finite(e: Estimate) -> Option<Estimate> {
    e.mean.is_finite().then_some(e)
}

fn fill_sim(row: &mut Row, stats: &SimStats, saturated: bool) {
    if saturated {
        // with a backlogged source the delivered rate is the service rate
        row.mu_s_sim = finite(stats.delivered_secondary_rate);
    } else {
        row.d_s_sim = finite(stats.mean_delay_secondary);
    }
    row.d_p_sim = finite(stats.mean_delay_primary_e2e);
}

fn policy_for(protocol: Protocol, (delta, omega): (f64, f64)) -> Result<Policy, CliError> {
    match protocol {
        Protocol::Proposed => Policy::proposed(delta, omega).map_err(|e| CliError::from_core("policy", e)),
        Protocol::Pcr => Ok(Policy::pcr()),
    }
}

fn run_sim(
    spec: &ExperimentSpec,
    params: &SystemParams,
    policy: &Policy,
    lambda_p: f64,
    lambda_s: f64,
) -> Result<SimStats, CliError> {
    let arrivals = Arrivals::new(lambda_p, lambda_s).map_err(|e| CliError::from_core("arrivals", e))?;
    simulate(params, policy, &arrivals, &spec.sim).map_err(runtime)
}

fn fixed_policy(
    spec: &ExperimentSpec,
    params: &SystemParams,
    mut row: Row,
    simulate_too: bool,
) -> Result<Row, CliError> {
    let policy = policy_for(row.protocol, spec.policy)?;
    if row.protocol == Protocol::Proposed {
        (row.delta, row.omega) = (Some(spec.policy.0), Some(spec.policy.1));
    }
    match analytic(params, &policy, row.lambda_p, row.lambda_s)? {
        Some(a) => {
            row.mu_s = Some(a.mu_s);
            row.d_s = a.d_s;
            row.d_p = a.d_p;
            if !a.stable {
                row.status = Status::Unstable;
            }
        }
        None => row.status = Status::Unstable,
    }
    if simulate_too {
        let ls = row.lambda_s.expect("simulate requires lambda_s");
        let stats = run_sim(spec, params, &policy, row.lambda_p, ls)?;
        fill_sim(&mut row, &stats, ls == 1.0);
    }
    Ok(row)
}

fn max_throughput(
    spec: &ExperimentSpec,
    params: &SystemParams,
    mut row: Row,
    saturated_sim: bool,
) -> Result<Row, CliError> {
    let lp = row.lambda_p;
    let policy = match row.protocol {
        Protocol::Proposed => match max_secondary_throughput(params, lp, spec.grid_step) {
            Ok(opt) => {
                (row.delta, row.omega) = (Some(opt.delta_star), Some(opt.omega_star));
                opt.policy()
            }
            Err(e) if is_regime(&e) => {
                row.status = Status::Infeasible;
                return Ok(row);
            }
            Err(e) => return Err(runtime(e)),
        },
        Protocol::Pcr => match pcr_throughput(params, lp) {
            Ok(_) => Policy::pcr(),
            Err(e) if is_regime(&e) => {
                row.status = Status::Infeasible;
                return Ok(row);
            }
            Err(e) => return Err(runtime(e)),
        },
    };
    if let Some(a) = analytic(params, &policy, lp, row.lambda_s)? {
        row.mu_s = Some(a.mu_s);
        row.d_s = a.d_s;
        row.d_p = a.d_p;
    }
    if saturated_sim {
        let stats = run_sim(spec, params, &policy, lp, 1.0)?;
        fill_sim(&mut row, &stats, true);
        // the primary delay at a throughput optimum is only meaningful when finite analytically
        if row.d_p.is_none() {
            row.d_p_sim = None;
        }
    }
    Ok(row)
}

fn min_delay(spec: &ExperimentSpec, params: &SystemParams, mut row: Row) -> Result<Row, CliError> {
    let (lp, ls) = (row.lambda_p, row.lambda_s.expect("optimize-delay requires lambda_s"));
    let cap = spec.delay_cap.expect("optimize-delay requires delay_cap");
    let policy = match row.protocol {
        Protocol::Proposed => match min_secondary_delay(params, lp, ls, cap, spec.grid_step) {
            Ok(opt) => {
                (row.delta, row.omega) = (Some(opt.delta_star), Some(opt.omega_star));
                opt.policy()
            }
            Err(e) if is_regime(&e) => {
                row.status = Status::Infeasible;
                return Ok(row);
            }
            Err(e) => return Err(runtime(e)),
        },
        Protocol::Pcr => Policy::pcr(),
    };
    let Some(a) = analytic(params, &policy, lp, Some(ls))? else {
        row.status = Status::Infeasible;
        return Ok(row);
    };
    if !a.stable || !a.d_p.is_some_and(|d| d <= cap) {
        row.status = Status::Infeasible;
        return Ok(row);
    }
    row.mu_s = Some(a.mu_s);
    row.d_s = a.d_s;
    row.d_p = a.d_p;
    let stats = run_sim(spec, params, &policy, lp, ls)?;
    fill_sim(&mut row, &stats, false);
    Ok(row)
}

fn evaluate(spec: &ExperimentSpec, rate: f64, lambda_p: f64, protocol: Protocol) -> Result<Row, CliError> {
    let params = spec.params.with_spectral_rate(rate);
    let lambda_s = match spec.mode {
        Mode::Sweep => Some(1.0),
        _ => spec.lambda_s,
    };
    let row = Row::new(rate, lambda_p, lambda_s, protocol);
    match spec.mode {
        Mode::Analyze => fixed_policy(spec, &params, row, false),
        Mode::Simulate => fixed_policy(spec, &params, row, true),
        Mode::OptimizeThroughput => max_throughput(spec, &params, row, false),
        Mode::Sweep => max_throughput(spec, &params, row, true),
        Mode::OptimizeDelay => min_delay(spec, &params, row),
    }
}

/// All rows, in the order rate, then `lambda_p`, then protocol.
pub fn rows(spec: &ExperimentSpec) -> Result<Vec<Row>, CliError> {
    let points: Vec<(f64, f64, Protocol)> = spec
        .rates
        .iter()
        .flat_map(|&r| {
            spec.lambda_p
                .iter()
                .flat_map(move |&lp| spec.protocols.iter().map(move |&p| (r, lp, p)))
        })
        .collect();
    points
        .into_par_iter()
        .map(|(r, lp, p)| evaluate(spec, r, lp, p))
        .collect()
}

pub fn write_csv(rows: &[Row], out: impl Write) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::Runtime(format!("writing CSV: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER).map_err(io)?;
    for row in rows {
        w.write_record(row.record()).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Runtime(format!("writing CSV: {e}")))
}
