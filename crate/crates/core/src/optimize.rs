//! Policy optimization.
//!
//! For a fixed split `delta` both formulations are one-dimensional in
//! `omega`: the throughput problem is a linear program and the delay problem
//! a linear-fractional one. `delta` itself is found by grid search with one
//! level of local refinement. Because `(delta, omega)` and
//! `(1 - delta, 1 - omega)` give identical service rates, only
//! `delta in [1/2, 1]` is searched by default.

use crate::error::{Error, Result};
use crate::model::{Link, Policy, SystemParams};
use crate::num::Scalar;
use crate::queueing::{self, cap_line, primary_outages, subband_success, QueueMetrics};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptResult<S> {
    pub delta_star: S,
    pub omega_star: S,
    /// `mu_s` (packets/slot) or `D_s` (slots) depending on the problem.
    pub objective: S,
    pub metrics: QueueMetrics<S>,
}

impl<S: Scalar> OptResult<S> {
    pub fn policy(&self) -> Policy<S> {
        Policy {
            delta: self.delta_star,
            omega: self.omega_star,
            protocol: crate::model::Protocol::Proposed,
        }
    }
}

/// The throughput problem at fixed `delta`: maximize `eta * omega` subject
/// to `zeta1 <= beta * omega`, `omega in [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedLp<S> {
    pub delta: S,
    /// `lambda_ps / pi_0` minus the relay success on the `delta` share.
    pub zeta1: S,
    /// `lambda_ps / pi_0` minus the relay success on the `1 - delta` share.
    pub zeta2: S,
    pub beta: S,
    /// Gain in own-queue success from taking the `delta` share.
    pub eta: S,
    /// `pi_0` and the own-queue success on the `1 - delta` share, so that
    /// `mu_s = idle * (base_sd + eta * omega)`.
    pub idle: S,
    pub base_sd: S,
}

/// Grid-search settings for the split `delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions<S> {
    pub grid_step: S,
    /// Step of the second pass around the best grid point; `None` skips it.
    pub refine_step: Option<S>,
    /// Search all of `[0, 1]` instead of `[1/2, 1]`.
    pub full_range: bool,
}

impl<S: Scalar> SearchOptions<S> {
    pub fn with_step(grid_step: S) -> Self {
        SearchOptions {
            grid_step,
            refine_step: Some(S::lit(1e-5)),
            full_range: false,
        }
    }
}

impl<S: Scalar> Default for SearchOptions<S> {
    fn default() -> Self {
        Self::with_step(S::lit(1e-3))
    }
}

struct PrimarySide<S> {
    out_p_pd: S,
    mu_p: S,
    idle: S,
    lambda_ps: S,
    /// `lambda_ps / pi_0`.
    relay_load: S,
}

fn primary_side<S: Scalar>(params: &SystemParams<S>, lambda_p: S) -> Result<PrimarySide<S>> {
    let (out_p_pd, out_p_s) = primary_outages(params)?;
    let mu_p = queueing::primary_service_rate(out_p_pd, out_p_s)?;
    let idle = queueing::primary_idle_prob(lambda_p, mu_p)?;
    if idle == S::zero() {
        return Err(Error::Infeasible("primary queue is never empty".into()));
    }
    let lambda_ps = queueing::relay_arrival_rate(out_p_pd, out_p_s, idle)?;
    Ok(PrimarySide {
        out_p_pd,
        mu_p,
        idle,
        lambda_ps,
        relay_load: lambda_ps / idle,
    })
}

struct Subbands<S> {
    sd_wide: S,
    sd_narrow: S,
    pd_wide: S,
    pd_narrow: S,
}

/// Success probabilities on the `delta` ("wide") and `1 - delta` ("narrow")
/// shares.
fn subbands<S: Scalar>(params: &SystemParams<S>, delta: S) -> Subbands<S> {
    let rest = S::one() - delta;
    Subbands {
        sd_wide: subband_success(params, Link::SecondaryToDestination, delta),
        sd_narrow: subband_success(params, Link::SecondaryToDestination, rest),
        pd_wide: subband_success(params, Link::SecondaryToPrimaryDestination, delta),
        pd_narrow: subband_success(params, Link::SecondaryToPrimaryDestination, rest),
    }
}

fn check_delta<S: Scalar>(delta: S) -> Result<()> {
    if delta >= S::zero() && delta <= S::one() {
        Ok(())
    } else {
        Err(Error::param("delta", format!("{delta} not in [0, 1]")))
    }
}

pub fn reduced_lp<S: Scalar>(params: &SystemParams<S>, lambda_p: S, delta: S) -> Result<ReducedLp<S>> {
    check_delta(delta)?;
    let primary = primary_side(params, lambda_p)?;
    Ok(reduced_from(&primary, &subbands(params, delta), delta))
}

fn reduced_from<S: Scalar>(primary: &PrimarySide<S>, bands: &Subbands<S>, delta: S) -> ReducedLp<S> {
    let zeta1 = primary.relay_load - bands.pd_wide;
    let zeta2 = primary.relay_load - bands.pd_narrow;
    ReducedLp {
        delta,
        zeta1,
        zeta2,
        beta: zeta1 - zeta2,
        eta: bands.sd_wide - bands.sd_narrow,
        idle: primary.idle,
        base_sd: bands.sd_narrow,
    }
}

impl<S: Scalar> ReducedLp<S> {
    /// `mu_s` at assignment probability `omega`.
    pub fn throughput(&self, omega: S) -> S {
        self.idle * (self.base_sd + self.eta * omega)
    }

    /// Whether `omega` keeps the relay queue stable.
    pub fn relay_stable(&self, omega: S) -> bool {
        self.zeta1 <= self.beta * omega
    }
}

/// Optimal assignment probability for a fixed split.
///
/// * `delta > 1/2`: `beta < 0`, so `omega <= zeta1 / beta`; feasible iff
///   `zeta1 <= 0`, optimum `min(zeta1 / beta, 1)`.
/// * `delta < 1/2`: `beta > 0`, so `omega >= zeta1 / beta`; feasible iff
///   `zeta2 <= 0`, optimum `max(zeta1 / beta, 0)`.
/// * `delta = 1/2`: the objective does not depend on `omega`; feasible iff
///   `zeta1 <= 0`, and `1/2` is returned.
pub fn omega_star_throughput<S: Scalar>(delta: S, lp: &ReducedLp<S>) -> Result<S> {
    check_delta(delta)?;
    let half = S::half();
    if delta > half {
        if lp.zeta1 > S::zero() {
            return Err(Error::Infeasible(format!("relay queue unstable at delta = {delta}")));
        }
        if lp.beta == S::zero() {
            return Ok(S::one());
        }
        Ok((lp.zeta1 / lp.beta).min(S::one()))
    } else if delta < half {
        if lp.zeta2 > S::zero() {
            return Err(Error::Infeasible(format!("relay queue unstable at delta = {delta}")));
        }
        if lp.beta == S::zero() {
            return Ok(S::zero());
        }
        Ok((lp.zeta1 / lp.beta).max(S::zero()))
    } else if lp.zeta1 <= S::zero() {
        Ok(half)
    } else {
        Err(Error::Infeasible("relay queue unstable at delta = 1/2".into()))
    }
}

fn grid<S: Scalar>(lo: S, hi: S, step: S) -> Vec<S> {
    let n = ((hi - lo) / step).ceil().to_usize().unwrap_or(0);
    let mut points: Vec<S> = (0..n)
        .map(|i| lo + step * S::from_usize(i).unwrap())
        .filter(|&x| x < hi)
        .collect();
    points.push(hi);
    points
}

fn check_step<S: Scalar>(step: S) -> Result<()> {
    if step > S::zero() && step <= S::half() {
        Ok(())
    } else {
        Err(Error::param("grid_step", format!("must lie in (0, 0.5], got {step}")))
    }
}

/// Scans `delta` and keeps the best value of `score` (`better(new, old)`
/// decides; scanning upward with a non-strict comparison breaks ties toward
/// larger `delta`).
fn search_delta<S: Scalar>(
    opts: &SearchOptions<S>,
    mut score: impl FnMut(S) -> Option<(S, S)>,
    better: impl Fn(S, S) -> bool,
) -> Result<Option<(S, S, S)>> {
    check_step(opts.grid_step)?;
    let lo = if opts.full_range { S::zero() } else { S::half() };
    let mut best: Option<(S, S, S)> = None;
    let mut visit = |delta: S, best: &mut Option<(S, S, S)>| {
        if let Some((omega, value)) = score(delta) {
            if best.is_none_or(|(_, _, v)| better(value, v)) {
                *best = Some((delta, omega, value));
            }
        }
    };
    for delta in grid(lo, S::one(), opts.grid_step) {
        visit(delta, &mut best);
    }
    if let (Some(refine), Some((center, _, _))) = (opts.refine_step, best) {
        if refine > S::zero() && refine < opts.grid_step {
            let from = (center - opts.grid_step).max(lo);
            let to = (center + opts.grid_step).min(S::one());
            for delta in grid(from, to, refine) {
                visit(delta, &mut best);
            }
        }
    }
    Ok(best)
}

/// Maximum stable secondary throughput over `(delta, omega)` with default
/// refinement around the best grid point.
pub fn max_secondary_throughput<S: Scalar>(
    params: &SystemParams<S>,
    lambda_p: S,
    grid_step: S,
) -> Result<OptResult<S>> {
    max_secondary_throughput_with(params, lambda_p, &SearchOptions::with_step(grid_step))
}

pub fn max_secondary_throughput_with<S: Scalar>(
    params: &SystemParams<S>,
    lambda_p: S,
    opts: &SearchOptions<S>,
) -> Result<OptResult<S>> {
    let primary = primary_side(params, lambda_p)?;
    let best = search_delta(
        opts,
        |delta| {
            let lp = reduced_from(&primary, &subbands(params, delta), delta);
            let omega = omega_star_throughput(delta, &lp).ok()?;
            Some((omega, lp.throughput(omega)))
        },
        |new, old| new >= old,
    )?;
    let (delta, omega, _) = best.ok_or_else(|| {
        Error::Infeasible(format!(
            "no split keeps the relay queue stable at lambda_p = {lambda_p}"
        ))
    })?;
    let metrics = queueing::metrics(params, &Policy::proposed(delta, omega)?, lambda_p)?;
    Ok(OptResult {
        delta_star: delta,
        omega_star: omega,
        objective: metrics.mu_s,
        metrics,
    })
}

/// Smallest relay share `1 - delta` that keeps the relay queue stable when
/// the own queue always gets the `delta` share (`omega = 1`).
///
/// Zero when nothing is relayed; infinite when no sub-band can keep up.
pub fn kappa<S: Scalar>(params: &SystemParams<S>, lambda_p: S) -> Result<S> {
    let (out_p_pd, out_p_s) = primary_outages(params)?;
    let mu_p = queueing::primary_service_rate(out_p_pd, out_p_s)?;
    queueing::primary_idle_prob(lambda_p, mu_p)?;
    let feed = out_p_pd * (S::one() - out_p_s);
    if lambda_p == S::zero() || feed == S::zero() {
        return Ok(S::zero());
    }
    let log_ratio = ((mu_p - lambda_p) / (feed * lambda_p)).ln();
    if !(log_ratio > S::zero()) {
        return Ok(S::infinity());
    }
    let capacity = (S::one() + params.link(Link::SecondaryToPrimaryDestination).mean_snr() * log_ratio).log2();
    let spectral = params.rates().spectral;
    Ok(spectral / ((S::one() - params.sensing_fraction()) * capacity))
}

/// Optimal split with deterministic assignment (`omega = 1`): `1 - kappa`.
pub fn deterministic_delta_star<S: Scalar>(params: &SystemParams<S>, lambda_p: S) -> Result<S> {
    let k = kappa(params, lambda_p)?;
    if k > S::one() {
        return Err(Error::Infeasible(format!("kappa = {k} exceeds one")));
    }
    Ok(S::one() - k)
}

/// Largest primary load the relay queue can sustain with the full band.
pub fn lambda_p_max<S: Scalar>(params: &SystemParams<S>) -> Result<S> {
    let (out_p_pd, out_p_s) = primary_outages(params)?;
    let mu_p = queueing::primary_service_rate(out_p_pd, out_p_s)?;
    let full = subband_success(params, Link::SecondaryToPrimaryDestination, S::one());
    let feed = out_p_pd * (S::one() - out_p_s);
    if feed == S::zero() {
        return Ok(mu_p);
    }
    Ok(mu_p * full / (full + feed))
}

/// Largest spectral rate with which the relay queue stays stable when it is
/// given the whole band, for primary load `lambda_p`.
///
/// The packet size of `params` is ignored; the rate enters through the
/// outage terms on both sides of the fixed point, which is bracketed in
/// `[1e-6, 32]` and solved by bisection.
pub fn r_max<S: Scalar>(params: &SystemParams<S>, lambda_p: S) -> Result<S> {
    r_max_bracketed(params, lambda_p, S::lit(1e-6), S::lit(32.0))
}

pub fn r_max_bracketed<S: Scalar>(params: &SystemParams<S>, lambda_p: S, lower: S, upper: S) -> Result<S> {
    if !(lower > S::zero() && upper > lower) {
        return Err(Error::param("bracket", format!("need 0 < {lower} < {upper}")));
    }
    if !(lambda_p >= S::zero() && lambda_p <= S::one()) {
        return Err(Error::param("lambda_p", format!("{lambda_p} not in [0, 1]")));
    }
    let exhausted = || Error::BracketExhausted {
        upper: upper.to_f64().unwrap_or(f64::NAN),
    };
    if lambda_p == S::zero() {
        return Err(exhausted());
    }
    // relay capacity at the given spectral rate minus that rate
    let excess = |rate: S| -> Result<S> {
        let p = params.with_spectral_rate(rate);
        let (out_p_pd, out_p_s) = primary_outages(&p)?;
        let mu_p = S::one() - out_p_pd * out_p_s;
        let feed = out_p_pd * (S::one() - out_p_s);
        if mu_p <= lambda_p {
            return Ok(S::neg_infinity());
        }
        if feed == S::zero() {
            return Ok(S::infinity());
        }
        let log_ratio = ((mu_p - lambda_p) / (feed * lambda_p)).ln();
        if !(log_ratio > S::zero()) {
            return Ok(S::neg_infinity());
        }
        let snr = p.link(Link::SecondaryToPrimaryDestination).mean_snr();
        Ok((S::one() - p.sensing_fraction()) * (S::one() + snr * log_ratio).log2() - rate)
    };
    if excess(lower)? <= S::zero() {
        return Err(Error::Infeasible(format!(
            "relay queue unstable at every spectral rate for lambda_p = {lambda_p}"
        )));
    }
    if excess(upper)? > S::zero() {
        return Err(exhausted());
    }
    let (mut lo, mut hi) = (lower, upper);
    for _ in 0..400 {
        let mid = (lo + hi) * S::half();
        if mid <= lo || mid >= hi {
            break;
        }
        if excess(mid)? > S::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Maximum stable secondary throughput under prioritized cognitive
/// relaying: the own queue only gets the (full) band when the relay queue
/// is empty.
pub fn pcr_throughput<S: Scalar>(params: &SystemParams<S>, lambda_p: S) -> Result<S> {
    let m = queueing::metrics(params, &Policy::pcr(), lambda_p)?;
    if m.lambda_ps > m.mu_ps {
        return Err(Error::Infeasible(format!(
            "relay queue unstable under PCR at lambda_p = {lambda_p}"
        )));
    }
    Ok(m.mu_s)
}

/// Proposed-protocol policy that attains the PCR throughput: the whole band
/// goes to the own queue with probability equal to the PCR relay-empty
/// probability, and to the relay queue otherwise.
pub fn pcr_equivalent_policy<S: Scalar>(params: &SystemParams<S>, lambda_p: S) -> Result<Policy<S>> {
    let primary = primary_side(params, lambda_p)?;
    let full_pd = subband_success(params, Link::SecondaryToPrimaryDestination, S::one());
    let busy = queueing::relay_utilization(primary.lambda_ps, primary.idle * full_pd);
    if busy > S::one() {
        return Err(Error::Infeasible(format!(
            "relay queue unstable under PCR at lambda_p = {lambda_p}"
        )));
    }
    Policy::proposed(S::one(), S::one() - busy)
}

/// The delay problem at fixed `delta`: the feasible `omega` interval and the
/// best endpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayLfp<S> {
    pub delta: S,
    /// Feasible `omega` interval, `None` when empty.
    pub interval: Option<(S, S)>,
    /// Minimizing `omega` and `D_s` there, `None` when infeasible or the
    /// secondary queue is saturated on the whole interval.
    pub best: Option<(S, S)>,
}

struct DelaySetup<S> {
    primary: PrimarySide<S>,
    lambda_s: S,
    cap: queueing::CapLine<S>,
}

fn delay_setup<S: Scalar>(params: &SystemParams<S>, lambda_p: S, lambda_s: S, cap: S) -> Result<DelaySetup<S>> {
    if !(lambda_s >= S::zero() && lambda_s <= S::one()) {
        return Err(Error::param("lambda_s", format!("{lambda_s} not in [0, 1]")));
    }
    let primary = primary_side(params, lambda_p)?;
    let line = cap_line(lambda_p, primary.mu_p, primary.out_p_pd, cap)?;
    Ok(DelaySetup {
        primary,
        lambda_s,
        cap: line,
    })
}

/// Intersects `[lo, hi]` with `{ slope * omega >= rhs }`.
fn restrict<S: Scalar>(interval: Option<(S, S)>, slope: S, rhs: S) -> Option<(S, S)> {
    let (lo, hi) = interval?;
    let (lo, hi) = if slope > S::zero() {
        (lo.max(rhs / slope), hi)
    } else if slope < S::zero() {
        (lo, hi.min(rhs / slope))
    } else if rhs <= S::zero() {
        (lo, hi)
    } else {
        return None;
    };
    (lo <= hi).then_some((lo, hi))
}

fn solve_delay_lfp<S: Scalar>(setup: &DelaySetup<S>, lambda_p: S, bands: &Subbands<S>, delta: S) -> DelayLfp<S> {
    let p = &setup.primary;
    let lp = reduced_from(p, bands, delta);
    let mut interval = Some((S::zero(), S::one()));
    // own queue: lambda_s / pi_0 - narrow_sd <= eta * omega
    interval = restrict(interval, lp.eta, setup.lambda_s / p.idle - bands.sd_narrow);
    // relay queue: zeta1 <= beta * omega
    interval = restrict(interval, lp.beta, lp.zeta1);
    // delay cap: (pd_wide + beta * omega) * slope <= bound
    interval = restrict(
        interval,
        -lp.beta * setup.cap.slope,
        setup.cap.slope * bands.pd_wide - setup.cap.bound,
    );

    let delay_at = |omega: S| -> Option<S> {
        let phi = bands.sd_narrow + lp.eta * omega;
        let phi = phi.max(S::zero()).min(S::one());
        queueing::secondary_delay(lambda_p, setup.lambda_s, p.mu_p, phi).ok()
    };
    let best = interval.and_then(|(lo, hi)| {
        if delta == S::half() {
            let omega = S::half().max(lo).min(hi);
            return delay_at(omega).map(|d| (omega, d));
        }
        match (delay_at(lo), delay_at(hi)) {
            (Some(a), Some(b)) => Some(if a <= b { (lo, a) } else { (hi, b) }),
            (Some(a), None) => Some((lo, a)),
            (None, Some(b)) => Some((hi, b)),
            (None, None) => None,
        }
    });
    DelayLfp { delta, interval, best }
}

/// Solves the delay problem for one split `delta`.
pub fn delay_lfp<S: Scalar>(
    params: &SystemParams<S>,
    lambda_p: S,
    lambda_s: S,
    cap: S,
    delta: S,
) -> Result<DelayLfp<S>> {
    check_delta(delta)?;
    let setup = delay_setup(params, lambda_p, lambda_s, cap)?;
    Ok(solve_delay_lfp(&setup, lambda_p, &subbands(params, delta), delta))
}

/// Minimum secondary delay subject to stability of all queues and the
/// primary end-to-end delay cap `D_p <= cap`.
pub fn min_secondary_delay<S: Scalar>(
    params: &SystemParams<S>,
    lambda_p: S,
    lambda_s: S,
    cap: S,
    grid_step: S,
) -> Result<OptResult<S>> {
    min_secondary_delay_with(params, lambda_p, lambda_s, cap, &SearchOptions::with_step(grid_step))
}

pub fn min_secondary_delay_with<S: Scalar>(
    params: &SystemParams<S>,
    lambda_p: S,
    lambda_s: S,
    cap: S,
    opts: &SearchOptions<S>,
) -> Result<OptResult<S>> {
    let setup = match delay_setup(params, lambda_p, lambda_s, cap) {
        Err(Error::InfeasibleCap { cap, floor }) => {
            return Err(Error::Infeasible(format!(
                "delay cap {cap} is below the primary queue delay {floor}"
            )))
        }
        other => other?,
    };
    let best = search_delta(
        opts,
        |delta| solve_delay_lfp(&setup, lambda_p, &subbands(params, delta), delta).best,
        |new, old| new <= old,
    )?;
    let (delta, omega, delay) = best.ok_or_else(|| {
        Error::Infeasible(format!(
            "no policy meets the delay cap {cap} with stable queues at lambda_p = {lambda_p}, lambda_s = {lambda_s}"
        ))
    })?;
    let metrics = queueing::metrics(params, &Policy::proposed(delta, omega)?, lambda_p)?;
    Ok(OptResult {
        delta_star: delta,
        omega_star: omega,
        objective: delay,
        metrics,
    })
}
