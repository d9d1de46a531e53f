//! Closed-form queue rates, stability and mean delays.
//!
//! Three queues: the primary queue `Q_p`, the SU's own queue `Q_s` and the
//! relay queue `Q_ps`. The PU transmits whenever `Q_p` is non-empty; the SU
//! only transmits in slots where `Q_p` is empty (probability `pi_0`).
//! Delays are in slots and count the slot of departure, so an idle server
//! that always succeeds gives a delay of one slot.

use crate::error::{Error, Result};
use crate::model::{Link, Policy, Protocol, SystemParams};
use crate::num::{is_probability, Scalar};
use crate::outage::LinkBudget;

/// Which SU queue a sub-band mixture is evaluated for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Destination {
    /// The SU's own packets towards the secondary destination. `omega`
    /// weights the `delta` share of the band.
    Secondary,
    /// Relayed primary packets towards the primary destination. `omega`
    /// weights the `1 - delta` share of the band.
    PrimaryRelay,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueMetrics<S> {
    /// Outage probability of the primary direct link.
    pub out_p_pd: S,
    /// Outage probability of the primary to SU link.
    pub out_p_s: S,
    /// Service rate of `Q_p`.
    pub mu_p: S,
    /// Probability that `Q_p` is empty.
    pub idle: S,
    /// Arrival rate of `Q_ps`.
    pub lambda_ps: S,
    /// Service rate of `Q_s`, equal to `idle * phi_s_sd`.
    pub mu_s: S,
    /// Service rate of `Q_ps`, equal to `idle * phi_s_pd`.
    pub mu_ps: S,
    /// Success probability of an own-queue transmission given the SU transmits.
    pub phi_s_sd: S,
    /// Success probability of a relay transmission given the SU transmits.
    pub phi_s_pd: S,
}

/// Per-queue stability verdict (`lambda <= mu`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stability {
    pub primary: bool,
    pub secondary: bool,
    pub relay: bool,
}

impl Stability {
    pub fn all(&self) -> bool {
        self.primary && self.secondary && self.relay
    }
}

/// Coefficients of the primary end-to-end delay and of the linear form of
/// the primary delay cap `phi_s_pd * cap_slope <= cap_bound`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayCoeffs<S> {
    /// Probability that a busy slot hands its packet to the relay queue,
    /// `mu_p - (1 - out_p_pd)`.
    pub relay_feed: S,
    pub f: S,
    pub g: S,
    pub a: S,
    pub b: S,
    pub c: S,
    /// Delay budget left for the relay queue after the primary queue's own delay.
    pub cap_slack: S,
    pub cap_slope: S,
    pub cap_bound: S,
}

fn check_prob<S: Scalar>(name: &'static str, p: S) -> Result<()> {
    if is_probability(p) {
        Ok(())
    } else {
        Err(Error::param(name, format!("{p} is not a probability")))
    }
}

/// A packet leaves `Q_p` unless both the direct link and the link to the SU
/// are in outage.
pub fn primary_service_rate<S: Scalar>(out_p_pd: S, out_p_s: S) -> Result<S> {
    check_prob("out_p_pd", out_p_pd)?;
    check_prob("out_p_s", out_p_s)?;
    Ok(S::one() - out_p_pd * out_p_s)
}

pub fn primary_idle_prob<S: Scalar>(lambda_p: S, mu_p: S) -> Result<S> {
    check_prob("lambda_p", lambda_p)?;
    check_prob("mu_p", mu_p)?;
    if lambda_p > mu_p {
        return Err(Error::Unstable("primary"));
    }
    if lambda_p == S::zero() {
        return Ok(S::one());
    }
    Ok(S::one() - lambda_p / mu_p)
}

pub fn relay_arrival_rate<S: Scalar>(out_p_pd: S, out_p_s: S, idle: S) -> Result<S> {
    check_prob("out_p_pd", out_p_pd)?;
    check_prob("out_p_s", out_p_s)?;
    check_prob("idle", idle)?;
    Ok(out_p_pd * (S::one() - out_p_s) * (S::one() - idle))
}

/// Success probability of one SU transmission at `rate` when the band of
/// width `bandwidth` is split `delta : 1 - delta` and assigned at random
/// with probability `omega`.
pub fn success_mixture<S: Scalar>(
    omega: S,
    delta: S,
    rate: S,
    bandwidth: S,
    link: LinkBudget<S>,
    destination: Destination,
) -> Result<S> {
    check_prob("omega", omega)?;
    check_prob("delta", delta)?;
    let wide = link.success_prob(rate, delta * bandwidth)?;
    let narrow = link.success_prob(rate, (S::one() - delta) * bandwidth)?;
    Ok(match destination {
        Destination::Secondary => omega * wide + (S::one() - omega) * narrow,
        Destination::PrimaryRelay => omega * narrow + (S::one() - omega) * wide,
    })
}

/// Success probability of an SU transmission on `fraction * W`.
pub fn subband_success<S: Scalar>(params: &SystemParams<S>, link: Link, fraction: S) -> S {
    let rate = params.rates().secondary;
    params
        .link(link)
        .success_prob(rate, fraction * params.bandwidth)
        .unwrap_or_else(|_| S::zero())
}

/// Outage probabilities of the two primary links at `r_p` over the full band.
pub fn primary_outages<S: Scalar>(params: &SystemParams<S>) -> Result<(S, S)> {
    let rates = params.validate()?;
    let out_pd = params
        .link(Link::PrimaryToDestination)
        .outage_prob(rates.primary, params.bandwidth)?;
    let out_ps = params
        .link(Link::PrimaryToSecondary)
        .outage_prob(rates.primary, params.bandwidth)?;
    Ok((out_pd, out_ps))
}

/// All analytic rates for `policy` at primary load `lambda_p`.
///
/// Under PCR the relay queue gets the full band whenever the SU transmits
/// and the own queue only when the relay queue is empty too, so `mu_s` is the
/// PCR stable throughput (zero once the relay queue is unstable).
pub fn metrics<S: Scalar>(params: &SystemParams<S>, policy: &Policy<S>, lambda_p: S) -> Result<QueueMetrics<S>> {
    policy.check()?;
    let rates = params.validate()?;
    let (out_p_pd, out_p_s) = primary_outages(params)?;
    let mu_p = primary_service_rate(out_p_pd, out_p_s)?;
    let idle = primary_idle_prob(lambda_p, mu_p)?;
    let lambda_ps = relay_arrival_rate(out_p_pd, out_p_s, idle)?;

    let (phi_s_sd, phi_s_pd) = match policy.protocol {
        Protocol::Proposed => {
            let sd = success_mixture(
                policy.omega,
                policy.delta,
                rates.secondary,
                params.bandwidth,
                params.link(Link::SecondaryToDestination),
                Destination::Secondary,
            )?;
            let pd = success_mixture(
                policy.omega,
                policy.delta,
                rates.secondary,
                params.bandwidth,
                params.link(Link::SecondaryToPrimaryDestination),
                Destination::PrimaryRelay,
            )?;
            (sd, pd)
        }
        Protocol::Pcr => {
            let full_sd = subband_success(params, Link::SecondaryToDestination, S::one());
            let full_pd = subband_success(params, Link::SecondaryToPrimaryDestination, S::one());
            let relay_busy = relay_utilization(lambda_ps, idle * full_pd);
            ((S::one() - relay_busy).max(S::zero()) * full_sd, full_pd)
        }
    };

    Ok(QueueMetrics {
        out_p_pd,
        out_p_s,
        mu_p,
        idle,
        lambda_ps,
        mu_s: idle * phi_s_sd,
        mu_ps: idle * phi_s_pd,
        phi_s_sd,
        phi_s_pd,
    })
}

/// `lambda / mu` with `0 / 0 = 0` and `x / 0 = inf`.
pub(crate) fn relay_utilization<S: Scalar>(lambda: S, mu: S) -> S {
    if lambda == S::zero() {
        S::zero()
    } else if mu == S::zero() {
        S::infinity()
    } else {
        lambda / mu
    }
}

pub fn is_stable<S: Scalar>(metrics: &QueueMetrics<S>, lambda_p: S, lambda_s: S) -> Stability {
    Stability {
        primary: lambda_p <= metrics.mu_p,
        secondary: lambda_s <= metrics.mu_s,
        relay: metrics.lambda_ps <= metrics.mu_ps,
    }
}

fn require_primary_strict<S: Scalar>(lambda_p: S, mu_p: S) -> Result<()> {
    if lambda_p > mu_p {
        Err(Error::Unstable("primary"))
    } else if lambda_p == mu_p {
        Err(Error::Saturated("primary"))
    } else {
        Ok(())
    }
}

/// Mean delay of `Q_s` in slots.
pub fn secondary_delay<S: Scalar>(lambda_p: S, lambda_s: S, mu_p: S, phi_s_sd: S) -> Result<S> {
    check_prob("lambda_p", lambda_p)?;
    check_prob("lambda_s", lambda_s)?;
    check_prob("mu_p", mu_p)?;
    check_prob("phi_s_sd", phi_s_sd)?;
    require_primary_strict(lambda_p, mu_p)?;
    // mu_p * (lambda_s - mu_s); must be negative
    let gap = phi_s_sd * lambda_p + mu_p * lambda_s - mu_p * phi_s_sd;
    if gap > S::zero() {
        return Err(Error::Unstable("secondary"));
    }
    if gap == S::zero() {
        return Err(Error::Saturated("secondary"));
    }
    let num = (-mu_p + phi_s_sd - mu_p * phi_s_sd) * lambda_p - mu_p * mu_p * lambda_s
        + mu_p * lambda_p * lambda_s
        + mu_p * mu_p;
    Ok(num / (gap * (lambda_p - mu_p)))
}

struct DelayPolynomial<S> {
    relay_feed: S,
    f: S,
    g: S,
    a: S,
    b: S,
    c: S,
}

fn delay_polynomial<S: Scalar>(lambda_p: S, mu_p: S, out_p_pd: S, phi_s_pd: S) -> Result<DelayPolynomial<S>> {
    check_prob("lambda_p", lambda_p)?;
    check_prob("mu_p", mu_p)?;
    check_prob("out_p_pd", out_p_pd)?;
    check_prob("phi_s_pd", phi_s_pd)?;
    let direct = S::one() - out_p_pd;
    let relay_feed = (mu_p - direct).max(S::zero());
    let a = relay_feed + phi_s_pd;
    Ok(DelayPolynomial {
        relay_feed,
        f: relay_feed * ((phi_s_pd - direct) / mu_p - a),
        g: relay_feed * mu_p,
        a,
        b: mu_p * (-a - phi_s_pd),
        c: phi_s_pd * mu_p * mu_p,
    })
}

/// Relay-queue stability margin `phi_s_pd (mu_p - lambda_p) - Y lambda_p`,
/// positive exactly when `lambda_ps < mu_ps`.
fn relay_margin<S: Scalar>(lambda_p: S, mu_p: S, relay_feed: S, phi_s_pd: S) -> S {
    phi_s_pd * (mu_p - lambda_p) - relay_feed * lambda_p
}

/// Mean end-to-end delay of primary packets (time in `Q_p` plus, for
/// relayed packets, time in `Q_ps`), in slots.
pub fn primary_delay<S: Scalar>(lambda_p: S, mu_p: S, out_p_pd: S, phi_s_pd: S) -> Result<S> {
    let poly = delay_polynomial(lambda_p, mu_p, out_p_pd, phi_s_pd)?;
    require_primary_strict(lambda_p, mu_p)?;
    let first = (S::one() - lambda_p) / (mu_p - lambda_p);
    if poly.relay_feed == S::zero() {
        return Ok(first);
    }
    let margin = relay_margin(lambda_p, mu_p, poly.relay_feed, phi_s_pd);
    if margin < S::zero() {
        return Err(Error::Unstable("relay"));
    }
    if margin == S::zero() {
        return Err(Error::Saturated("relay"));
    }
    let den = poly.a * lambda_p * lambda_p + poly.b * lambda_p + poly.c;
    Ok(first + (poly.f * lambda_p + poly.g) / den)
}

/// Linear form `phi_s_pd * slope <= bound` of the primary delay cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapLine<S> {
    /// Delay budget left for the relay queue after the primary queue's own delay.
    pub slack: S,
    pub slope: S,
    pub bound: S,
}

impl<S: Scalar> CapLine<S> {
    pub fn holds(&self, phi_s_pd: S) -> bool {
        phi_s_pd * self.slope <= self.bound
    }
}

/// The cap `D_p <= cap` as a linear constraint on `phi_s_pd`. It does not
/// depend on the policy, and is equivalent to the cap whenever the relay
/// queue is strictly stable.
pub fn cap_line<S: Scalar>(lambda_p: S, mu_p: S, out_p_pd: S, cap: S) -> Result<CapLine<S>> {
    let poly = delay_polynomial(lambda_p, mu_p, out_p_pd, S::zero())?;
    require_primary_strict(lambda_p, mu_p)?;
    let floor = (S::one() - lambda_p) / (mu_p - lambda_p);
    let slack = cap - floor;
    if !(slack >= S::zero()) {
        return Err(Error::InfeasibleCap {
            cap: cap.to_f64().unwrap_or(f64::NAN),
            floor: floor.to_f64().unwrap_or(f64::NAN),
        });
    }
    let y = poly.relay_feed;
    let gap = mu_p - lambda_p;
    Ok(CapLine {
        slack,
        slope: y * lambda_p * (S::one() / mu_p - S::one()) - slack * gap * gap,
        bound: -y * slack * lambda_p * gap + y * lambda_p * ((S::one() - out_p_pd) / mu_p + y) - poly.g,
    })
}

/// Coefficients of the primary delay together with its cap line.
pub fn delay_coeffs<S: Scalar>(lambda_p: S, mu_p: S, out_p_pd: S, phi_s_pd: S, cap: S) -> Result<DelayCoeffs<S>> {
    let poly = delay_polynomial(lambda_p, mu_p, out_p_pd, phi_s_pd)?;
    let line = cap_line(lambda_p, mu_p, out_p_pd, cap)?;
    Ok(DelayCoeffs {
        relay_feed: poly.relay_feed,
        f: poly.f,
        g: poly.g,
        a: poly.a,
        b: poly.b,
        c: poly.c,
        cap_slack: line.slack,
        cap_slope: line.slope,
        cap_bound: line.bound,
    })
}

impl<S: Scalar> DelayCoeffs<S> {
    /// Linear form of the primary delay cap.
    pub fn cap_holds(&self, phi_s_pd: S) -> bool {
        phi_s_pd * self.cap_slope <= self.cap_bound
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    // Reference values from tests/oracle/scalars.py (mpmath, 40 digits):
    // figure setting, spectral rate 1, lambda_p = 0.5, delta 0.6, omega 0.7.
    const OUT: f64 = 0.0951625819640404268;
    const MU_P: f64 = 0.990944082993937;
    const IDLE: f64 = 0.495430661950823;
    const LAMBDA_PS: f64 = 0.0434467829394691;
    const PHI_SD: f64 = 0.964899843741073;
    const PHI_PD: f64 = 0.952444643398561;
    const MU_S: f64 = 0.478040968300885;
    const MU_PS: f64 = 0.471870280150464;
    const D_S: f64 = 2.90957324211491;
    const D_P: f64 = 1.22322807096863;

    fn reference() -> (SystemParams<f64>, Policy<f64>) {
        (SystemParams::figure_setting(1.0), Policy::proposed(0.6, 0.7).unwrap())
    }

    #[test]
    fn primary_service() {
        assert_abs_diff_eq!(primary_service_rate(OUT, OUT).unwrap(), MU_P, epsilon = 1e-12);
        assert_eq!(primary_service_rate(0.0, 0.3).unwrap(), 1.0);
        assert_eq!(primary_service_rate(1.0, 1.0).unwrap(), 0.0);
        assert!(primary_service_rate(1.5, 0.0).is_err());
    }

    #[test]
    fn idle_probability() {
        assert_abs_diff_eq!(primary_idle_prob(0.5, MU_P).unwrap(), IDLE, epsilon = 1e-12);
        assert_eq!(primary_idle_prob(0.0, 0.7).unwrap(), 1.0);
        assert_eq!(primary_idle_prob(0.7, 0.7).unwrap(), 0.0);
        assert_eq!(primary_idle_prob(0.8, 0.7), Err(Error::Unstable("primary")));
    }

    #[test]
    fn relay_arrivals() {
        assert_abs_diff_eq!(relay_arrival_rate(OUT, OUT, IDLE).unwrap(), LAMBDA_PS, epsilon = 1e-12);
        assert_eq!(relay_arrival_rate(0.3, 0.2, 1.0).unwrap(), 0.0);
        assert_eq!(relay_arrival_rate(0.0, 0.2, 0.4).unwrap(), 0.0);
    }

    #[test]
    fn mixtures() {
        let link = LinkBudget::new(100.0, 1.0).unwrap();
        let rs = 1.0 / 0.9;
        let sd = success_mixture(0.7, 0.6, rs, 1.0, link, Destination::Secondary).unwrap();
        let pd = success_mixture(0.7, 0.6, rs, 1.0, link, Destination::PrimaryRelay).unwrap();
        assert_abs_diff_eq!(sd, PHI_SD, epsilon = 1e-12);
        assert_abs_diff_eq!(pd, PHI_PD, epsilon = 1e-12);
        let half = link.success_prob(rs, 0.5).unwrap();
        for omega in [0.0, 0.3, 1.0] {
            let v = success_mixture(omega, 0.5, rs, 1.0, link, Destination::Secondary).unwrap();
            assert_abs_diff_eq!(v, half, epsilon = 1e-15);
        }
    }

    #[test]
    fn reference_metrics() {
        let (params, policy) = reference();
        let m = metrics(&params, &policy, 0.5).unwrap();
        assert_abs_diff_eq!(m.mu_p, MU_P, epsilon = 1e-12);
        assert_abs_diff_eq!(m.idle, IDLE, epsilon = 1e-12);
        assert_abs_diff_eq!(m.lambda_ps, LAMBDA_PS, epsilon = 1e-12);
        assert_abs_diff_eq!(m.mu_s, MU_S, epsilon = 1e-12);
        assert_abs_diff_eq!(m.mu_ps, MU_PS, epsilon = 1e-12);
        assert_eq!(m.mu_s, m.idle * m.phi_s_sd);
        assert_eq!(m.mu_ps, m.idle * m.phi_s_pd);
    }

    #[test]
    fn metrics_edge_cases() {
        let (params, policy) = reference();
        let m = metrics(&params, &policy, 0.0).unwrap();
        assert_eq!(m.idle, 1.0);
        assert_eq!(m.lambda_ps, 0.0);
        let all_own = Policy::proposed(1.0, 1.0).unwrap();
        let m = metrics(&params, &all_own, 0.5).unwrap();
        assert_eq!(m.mu_ps, 0.0);
        assert!(metrics(&params, &policy, 0.999).is_err());
    }

    #[test]
    fn single_precision_metrics() {
        let params = SystemParams::<f32>::figure_setting(1.0);
        let policy = Policy::proposed(0.6f32, 0.7).unwrap();
        let m = metrics(&params, &policy, 0.5).unwrap();
        assert!((m.mu_s as f64 - MU_S).abs() < 1e-5);
    }

    #[test]
    fn stability_verdicts() {
        let (params, policy) = reference();
        let m = metrics(&params, &policy, 0.0).unwrap();
        assert!(is_stable(&m, 0.0, 0.0).all());
        let m = metrics(&params, &policy, 0.5).unwrap();
        assert!(is_stable(&m, 0.5, 0.2).all());
        let v = is_stable(&m, 0.5, 0.5);
        assert!(v.primary && v.relay && !v.secondary);
    }

    #[test]
    fn secondary_delay_values() {
        assert_abs_diff_eq!(secondary_delay(0.0, 0.3, 1.0, 1.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(secondary_delay(0.5, 0.2, MU_P, PHI_SD).unwrap(), D_S, epsilon = 1e-10);
        let mu_s = (1.0 - 0.5 / MU_P) * PHI_SD;
        let mut prev = 0.0;
        for gap in [1e-2, 1e-4, 1e-6, 1e-8] {
            let d = secondary_delay(0.5, mu_s - gap, MU_P, PHI_SD).unwrap();
            assert!(d > prev);
            prev = d;
        }
        assert!(prev > 1e7);
        assert_eq!(
            secondary_delay(0.5, 0.49, MU_P, PHI_SD),
            Err(Error::Unstable("secondary"))
        );
        assert_eq!(secondary_delay(0.6, 0.1, 0.6, 0.9), Err(Error::Saturated("primary")));
    }

    #[test]
    fn primary_delay_values() {
        assert_abs_diff_eq!(primary_delay(0.4, 1.0, 0.0, 0.3).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(primary_delay(0.5, MU_P, OUT, PHI_PD).unwrap(), D_P, epsilon = 1e-10);
        let tiny = 1e-9;
        let c = delay_coeffs(0.5, MU_P, OUT, PHI_PD, 2.0).unwrap();
        let limit = 1.0 / MU_P + c.g / c.c;
        assert_abs_diff_eq!(primary_delay(tiny, MU_P, OUT, PHI_PD).unwrap(), limit, epsilon = 1e-6);
        assert_eq!(primary_delay(0.5, MU_P, OUT, 0.01), Err(Error::Unstable("relay")));
    }

    #[test]
    fn coefficient_values() {
        let c = delay_coeffs(0.5, MU_P, OUT, PHI_PD, 2.0).unwrap();
        assert_abs_diff_eq!(c.relay_feed, 0.0861066649579777, epsilon = 1e-12);
        assert_abs_diff_eq!(c.f, -0.0852894279769672, epsilon = 1e-12);
        assert_abs_diff_eq!(c.g, 0.0853268901464494, epsilon = 1e-12);
        assert_abs_diff_eq!(c.a, 1.03855130835654, epsilon = 1e-12);
        assert_abs_diff_eq!(c.b, -1.9729656576566, epsilon = 1e-12);
        assert_abs_diff_eq!(c.c, 0.935272233747076, epsilon = 1e-12);
        assert_abs_diff_eq!(c.cap_slack, 0.981554076482933, epsilon = 1e-12);
        assert_eq!(c.g, c.relay_feed * MU_P);
    }

    #[test]
    fn cap_below_floor_is_infeasible() {
        let floor = (1.0 - 0.5) / (MU_P - 0.5);
        assert!(matches!(
            delay_coeffs(0.5, MU_P, OUT, PHI_PD, floor - 1e-6),
            Err(Error::InfeasibleCap { .. })
        ));
    }

    #[test]
    fn no_relaying_coefficients() {
        let c = delay_coeffs(0.3, 1.0, 0.0, 0.8, 3.0).unwrap();
        assert_eq!(c.relay_feed, 0.0);
        assert_eq!(c.cap_bound, 0.0);
        assert_abs_diff_eq!(c.cap_slope, -c.cap_slack * 0.7 * 0.7, epsilon = 1e-15);
    }

    fn params_strategy() -> impl Strategy<Value = (SystemParams<f64>, f64)> {
        (0.2f64..3.0, 0.0f64..0.5, 2.0f64..50.0, 10.0f64..500.0, 0.0f64..1.0).prop_map(|(rate, tau, gp, gs, load)| {
            let p = SystemParams::normalized(rate, tau, gp, gs);
            (p, load)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn mixture_symmetry(omega in 0.0f64..=1.0, delta in 0.0f64..=1.0, rate in 0.1f64..4.0, gs in 1.0f64..500.0) {
            let link = LinkBudget::new(gs, 1.0).unwrap();
            for dest in [Destination::Secondary, Destination::PrimaryRelay] {
                let a = success_mixture(omega, delta, rate, 1.0, link, dest).unwrap();
                let b = success_mixture(1.0 - omega, 1.0 - delta, rate, 1.0, link, dest).unwrap();
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn half_split_ignores_omega((params, load) in params_strategy(), omega in 0.0f64..=1.0, ls in 0.0f64..0.3) {
            let lp = load * 0.9 * primary_service_rate(primary_outages(&params).unwrap().0, primary_outages(&params).unwrap().1).unwrap();
            let a = metrics(&params, &Policy::proposed(0.5, omega).unwrap(), lp).unwrap();
            let b = metrics(&params, &Policy::proposed(0.5, 0.5).unwrap(), lp).unwrap();
            prop_assert!((a.mu_s - b.mu_s).abs() <= 1e-12);
            prop_assert!((a.mu_ps - b.mu_ps).abs() <= 1e-12);
            if let (Ok(x), Ok(y)) = (secondary_delay(lp, ls, a.mu_p, a.phi_s_sd), secondary_delay(lp, ls, b.mu_p, b.phi_s_sd)) {
                prop_assert!((x - y).abs() <= 1e-12 * y.max(1.0));
            }
            if let (Ok(x), Ok(y)) = (primary_delay(lp, a.mu_p, a.out_p_pd, a.phi_s_pd), primary_delay(lp, b.mu_p, b.out_p_pd, b.phi_s_pd)) {
                prop_assert!((x - y).abs() <= 1e-12 * y.max(1.0));
            }
        }

        #[test]
        fn primary_delay_at_least_queue_term(load in 0.0f64..0.999, out in 0.0f64..1.0, out_s in 0.0f64..1.0, phi in 0.0f64..=1.0) {
            let mu_p = primary_service_rate(out, out_s).unwrap();
            let lp = load * mu_p;
            if let Ok(d) = primary_delay(lp, mu_p, out, phi) {
                prop_assert!(d >= (1.0 - lp) / (mu_p - lp) - 1e-12);
            }
        }

        #[test]
        fn no_primary_load_gives_geo_geo_1(frac in 0.0f64..0.999, phi in 0.01f64..=1.0, mu_p in 0.05f64..=1.0) {
            let ls = frac * phi;
            let d = secondary_delay(0.0, ls, mu_p, phi).unwrap();
            let expected = (1.0 - ls) / (phi - ls);
            prop_assert!((d - expected).abs() <= 1e-9 * expected);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn cap_rewrite_matches_delay(load in 0.0f64..0.999, out in 0.0f64..1.0, out_s in 0.0f64..1.0, phi in 0.0f64..=1.0, extra in 0.0f64..5.0) {
            let mu_p = primary_service_rate(out, out_s).unwrap();
            let lp = load * mu_p;
            let Ok(d_p) = primary_delay(lp, mu_p, out, phi) else {
                return Ok(());
            };
            let floor = (1.0 - lp) / (mu_p - lp);
            let cap = floor + extra;
            prop_assume!((d_p - cap).abs() > 1e-9 * cap);
            let coeffs = delay_coeffs(lp, mu_p, out, phi, cap).unwrap();
            prop_assert_eq!(d_p <= cap, coeffs.cap_holds(phi));
        }
    }
}
