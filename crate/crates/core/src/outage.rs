//! Rayleigh-fading outage probabilities.
//!
//! A link with SNR `gamma` and exponentially distributed gain of mean `sigma`
//! carrying `rate` bits/s over `band` Hz is in outage when
//! `rate > band * log2(1 + h * gamma)`, which happens with probability
//! `1 - exp(-(2^(rate/band) - 1) / (gamma * sigma))`.

use crate::error::{Error, Result};
use crate::num::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget<S> {
    /// Transmit SNR `P / N0`.
    pub snr: S,
    /// Mean of the exponential channel gain.
    pub mean_gain: S,
}

impl<S: Scalar> LinkBudget<S> {
    pub fn new(snr: S, mean_gain: S) -> Result<Self> {
        if !(snr > S::zero()) {
            return Err(Error::param("snr", format!("must be positive, got {snr}")));
        }
        if !(mean_gain > S::zero()) {
            return Err(Error::param("mean_gain", format!("must be positive, got {mean_gain}")));
        }
        Ok(LinkBudget { snr, mean_gain })
    }

    /// `gamma * sigma`.
    pub fn mean_snr(&self) -> S {
        self.snr * self.mean_gain
    }

    /// Probability that `rate` bits/s get through `band` Hz in one slot.
    ///
    /// A zero band carries nothing, except a zero rate which always succeeds.
    pub fn success_prob(&self, rate: S, band: S) -> Result<S> {
        success_prob(rate, band, *self)
    }

    pub fn outage_prob(&self, rate: S, band: S) -> Result<S> {
        outage_prob(rate, band, *self)
    }
}

pub fn success_prob<S: Scalar>(rate: S, band: S, link: LinkBudget<S>) -> Result<S> {
    if !(rate >= S::zero()) {
        return Err(Error::param("rate", format!("must be non-negative, got {rate}")));
    }
    if !(band >= S::zero()) {
        return Err(Error::param("band", format!("must be non-negative, got {band}")));
    }
    if rate == S::zero() {
        return Ok(S::one());
    }
    if band == S::zero() {
        return Ok(S::zero());
    }
    Ok(success_from_spectral_efficiency(rate / band, link.mean_snr()))
}

pub fn outage_prob<S: Scalar>(rate: S, band: S, link: LinkBudget<S>) -> Result<S> {
    success_prob(rate, band, link).map(|p| S::one() - p)
}

/// `exp(-(2^x - 1) / mean_snr)` for spectral efficiency `x >= 0`.
///
/// Once `2^x` leaves the representable range the threshold is infinite and
/// the link always fails.
pub(crate) fn success_from_spectral_efficiency<S: Scalar>(x: S, mean_snr: S) -> S {
    if x.is_infinite() {
        return S::zero();
    }
    let threshold = exp2_minus_one(x) / mean_snr;
    if !threshold.is_finite() {
        return S::zero();
    }
    (-threshold).exp()
}

/// `2^x - 1`, avoiding cancellation for small `x`.
fn exp2_minus_one<S: Scalar>(x: S) -> S {
    if x < S::one() {
        (x * S::LN_2()).exp_m1()
    } else {
        x.exp2() - S::one()
    }
}
