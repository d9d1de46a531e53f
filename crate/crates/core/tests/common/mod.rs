//! Brute-force references shared by the integration tests.
//!
//! They only use the per-policy formulas (`queueing::metrics` and the two
//! delay functions) and never the reduced forms the optimizers work with.
#![allow(dead_code)]

use bandsplit::queueing::{self, metrics};
use bandsplit::{Policy, QueueMetrics, SystemParams};

pub const OMEGA_STEP: f64 = 1e-4;

fn lerp(t: f64, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * t
}

fn log_lerp(t: f64, lo: f64, hi: f64) -> f64 {
    lerp(t, lo.ln(), hi.ln()).exp()
}

/// Maps ten numbers in `[0, 1)` to a valid system. Spectral rate 0.2..3,
/// sensing up to 30% of the slot, SNR 1..100 (primary) and 5..500
/// (secondary), mean gains 0.3..2, slot and bandwidth away from one.
pub fn system_from(u: [f64; 10]) -> SystemParams {
    let slot = lerp(u[8], 0.5, 2.0);
    let bandwidth = log_lerp(u[9], 0.5, 4.0);
    let noise = 1e-11;
    SystemParams {
        slot_duration: slot,
        sensing_duration: lerp(u[1], 0.0, 0.3) * slot,
        bandwidth,
        packet_bits: lerp(u[0], 0.2, 3.0) * slot * bandwidth,
        power_primary: log_lerp(u[2], 1.0, 100.0) * noise,
        power_secondary: log_lerp(u[3], 5.0, 500.0) * noise,
        noise,
        gain_p_pd: lerp(u[4], 0.3, 2.0),
        gain_p_s: lerp(u[5], 0.3, 2.0),
        gain_s_sd: lerp(u[6], 0.3, 2.0),
        gain_s_pd: lerp(u[7], 0.3, 2.0),
    }
}

pub fn primary_capacity(params: &SystemParams) -> f64 {
    let (pd, ps) = queueing::primary_outages(params).unwrap();
    queueing::primary_service_rate(pd, ps).unwrap()
}

pub fn metrics_at(params: &SystemParams, lambda_p: f64, delta: f64, omega: f64) -> Option<QueueMetrics> {
    metrics(params, &Policy::proposed(delta, omega).ok()?, lambda_p).ok()
}

pub fn relay_stable(m: &QueueMetrics) -> bool {
    m.lambda_ps <= m.mu_ps
}

/// `0, step, ..., 1`.
pub fn omega_grid() -> Vec<f64> {
    let n = (1.0 / OMEGA_STEP).round() as usize;
    (0..=n).map(|i| i as f64 / n as f64).collect()
}

/// Feasible grid points plus, wherever feasibility flips between two
/// neighbours, the feasible side of the boundary found by bisection.
pub fn feasible_candidates(feasible: impl Fn(f64) -> bool) -> Vec<f64> {
    let grid = omega_grid();
    let flags: Vec<bool> = grid.iter().map(|&w| feasible(w)).collect();
    let mut out: Vec<f64> = grid.iter().zip(&flags).filter(|(_, &ok)| ok).map(|(&w, _)| w).collect();
    for i in 1..grid.len() {
        if flags[i - 1] == flags[i] {
            continue;
        }
        let (mut good, mut bad) = if flags[i] {
            (grid[i], grid[i - 1])
        } else {
            (grid[i - 1], grid[i])
        };
        loop {
            let mid = 0.5 * (good + bad);
            if mid == good || mid == bad {
                break;
            }
            if feasible(mid) {
                good = mid;
            } else {
                bad = mid;
            }
        }
        out.push(good);
    }
    out
}

/// Largest stable `mu_s` over `omega` at fixed `delta`.
pub fn throughput_reference(params: &SystemParams, lambda_p: f64, delta: f64) -> Option<f64> {
    let feasible = |w: f64| metrics_at(params, lambda_p, delta, w).is_some_and(|m| relay_stable(&m));
    feasible_candidates(feasible)
        .into_iter()
        .filter_map(|w| metrics_at(params, lambda_p, delta, w).map(|m| m.mu_s))
        .reduce(f64::max)
}

/// `D_s` at `(delta, omega)` when every queue is stable and `D_p <= cap`.
pub fn capped_secondary_delay(
    params: &SystemParams,
    lambda_p: f64,
    lambda_s: f64,
    cap: f64,
    delta: f64,
    omega: f64,
) -> Option<f64> {
    let m = metrics_at(params, lambda_p, delta, omega)?;
    if !relay_stable(&m) {
        return None;
    }
    let dp = queueing::primary_delay(lambda_p, m.mu_p, m.out_p_pd, m.phi_s_pd).ok()?;
    if !(dp <= cap) {
        return None;
    }
    let ds = queueing::secondary_delay(lambda_p, lambda_s, m.mu_p, m.phi_s_sd).ok()?;
    ds.is_finite().then_some(ds)
}

/// Smallest capped `D_s` over `omega` at fixed `delta`.
pub fn delay_reference(params: &SystemParams, lambda_p: f64, lambda_s: f64, cap: f64, delta: f64) -> Option<f64> {
    let at = |w: f64| capped_secondary_delay(params, lambda_p, lambda_s, cap, delta, w);
    feasible_candidates(|w| at(w).is_some())
        .into_iter()
        .filter_map(at)
        .reduce(f64::min)
}

/// The 21-point spectral-rate sweep `0.5, 0.625, ..., 3`.
pub fn rate_sweep() -> Vec<f64> {
    (0..21).map(|i| 0.5 + 0.125 * i as f64).collect()
}
