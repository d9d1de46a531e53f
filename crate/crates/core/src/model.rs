//! Shared parameter and policy types.

use crate::error::{Error, Result};
use crate::num::{is_probability, Scalar};
use crate::outage::LinkBudget;

/// Physical and protocol constants of one primary band.
///
/// Powers and noise are spectral densities (W/Hz), so the SNR of a link
/// does not depend on how much of the band it uses. Mean gains are the
/// means of the exponentially distributed (Rayleigh fading) channel gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams<S> {
    /// Slot length `T` in seconds.
    pub slot_duration: S,
    /// Sensing time `tau` at the start of each slot, in seconds.
    pub sensing_duration: S,
    /// Total bandwidth `W` in Hz.
    pub bandwidth: S,
    /// Bits per packet.
    pub packet_bits: S,
    pub power_primary: S,
    pub power_secondary: S,
    pub noise: S,
    pub gain_p_pd: S,
    pub gain_p_s: S,
    pub gain_s_sd: S,
    pub gain_s_pd: S,
}

/// Transmission rates implied by a [`SystemParams`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates<S> {
    /// Primary rate `b / T` (bits/s).
    pub primary: S,
    /// Secondary rate `b / (T - tau)` (bits/s).
    pub secondary: S,
    /// Spectral rate `b / (T W)` (bits/s/Hz).
    pub spectral: S,
}

/// The four radio links of the system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Link {
    /// Primary transmitter to primary destination.
    PrimaryToDestination,
    /// Primary transmitter to the secondary user (overhearing).
    PrimaryToSecondary,
    /// Secondary user to its own destination.
    SecondaryToDestination,
    /// Secondary user to the primary destination (relaying).
    SecondaryToPrimaryDestination,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Protocol {
    /// Probabilistic band splitting between the own and relay queues.
    #[default]
    Proposed,
    /// Prioritized cognitive relaying: relay queue first, full band.
    Pcr,
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Protocol::Proposed => "proposed",
            Protocol::Pcr => "pcr",
        })
    }
}

impl std::str::FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "proposed" | "p" => Ok(Protocol::Proposed),
            "pcr" => Ok(Protocol::Pcr),
            other => Err(Error::param("protocol", format!("unknown protocol `{other}`"))),
        }
    }
}

/// The SU's control pair. `delta` is the share of `W` handed to the own
/// queue with probability `omega`. Both are ignored under [`Protocol::Pcr`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Policy<S> {
    pub delta: S,
    pub omega: S,
    pub protocol: Protocol,
}

impl<S: Scalar> Policy<S> {
    pub fn proposed(delta: S, omega: S) -> Result<Self> {
        let policy = Policy {
            delta,
            omega,
            protocol: Protocol::Proposed,
        };
        policy.check()?;
        Ok(policy)
    }

    pub fn pcr() -> Self {
        Policy {
            delta: S::one(),
            omega: S::one(),
            protocol: Protocol::Pcr,
        }
    }

    pub fn check(&self) -> Result<()> {
        if !is_probability(self.delta) {
            return Err(Error::param("delta", format!("{} not in [0, 1]", self.delta)));
        }
        if !is_probability(self.omega) {
            return Err(Error::param("omega", format!("{} not in [0, 1]", self.omega)));
        }
        Ok(())
    }

    /// The policy with the roles of the two sub-bands exchanged. It yields
    /// identical service rates.
    pub fn mirrored(&self) -> Self {
        Policy {
            delta: S::one() - self.delta,
            omega: S::one() - self.omega,
            protocol: self.protocol,
        }
    }
}

/// Bernoulli arrival rates in packets per slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrivals<S> {
    pub primary: S,
    pub secondary: S,
}

impl<S: Scalar> Arrivals<S> {
    pub fn new(primary: S, secondary: S) -> Result<Self> {
        if !is_probability(primary) {
            return Err(Error::param("lambda_p", format!("{primary} not in [0, 1]")));
        }
        if !is_probability(secondary) {
            return Err(Error::param("lambda_s", format!("{secondary} not in [0, 1]")));
        }
        Ok(Arrivals { primary, secondary })
    }
}

impl<S: Scalar> SystemParams<S> {
    /// Unit slot, unit bandwidth setup parameterized by spectral rate,
    /// sensing fraction and the two SNRs. All mean gains are one.
    pub fn normalized(spectral_rate: S, sensing_fraction: S, snr_primary: S, snr_secondary: S) -> Self {
        let noise = S::lit(1e-11);
        SystemParams {
            slot_duration: S::one(),
            sensing_duration: sensing_fraction,
            bandwidth: S::one(),
            packet_bits: spectral_rate,
            power_primary: snr_primary * noise,
            power_secondary: snr_secondary * noise,
            noise,
            gain_p_pd: S::one(),
            gain_p_s: S::one(),
            gain_s_sd: S::one(),
            gain_s_pd: S::one(),
        }
    }

    /// Setting of the throughput and delay figures: `tau = 0.1 T`, all mean
    /// gains one, `P_s = 1e-9`, `P_p = 1e-10`, `N0 = 1e-11` W/Hz, unit slot
    /// and bandwidth, `b` chosen so the spectral rate is `spectral_rate`.
    pub fn figure_setting(spectral_rate: S) -> Self {
        SystemParams {
            slot_duration: S::one(),
            sensing_duration: S::lit(0.1),
            bandwidth: S::one(),
            packet_bits: spectral_rate,
            power_primary: S::lit(1e-10),
            power_secondary: S::lit(1e-9),
            noise: S::lit(1e-11),
            gain_p_pd: S::one(),
            gain_p_s: S::one(),
            gain_s_sd: S::one(),
            gain_s_pd: S::one(),
        }
    }

    /// Same system with the packet size rescaled to hit `spectral_rate`.
    pub fn with_spectral_rate(&self, spectral_rate: S) -> Self {
        SystemParams {
            packet_bits: spectral_rate * self.slot_duration * self.bandwidth,
            ..*self
        }
    }

    /// Checks the physical invariants and returns the derived rates.
    pub fn validate(&self) -> Result<Rates<S>> {
        let positive = [
            ("slot_duration", self.slot_duration),
            ("bandwidth", self.bandwidth),
            ("packet_bits", self.packet_bits),
            ("power_primary", self.power_primary),
            ("power_secondary", self.power_secondary),
            ("noise", self.noise),
            ("gain_p_pd", self.gain_p_pd),
            ("gain_p_s", self.gain_p_s),
            ("gain_s_sd", self.gain_s_sd),
            ("gain_s_pd", self.gain_s_pd),
        ];
        for (name, value) in positive {
            if !(value > S::zero() && value.is_finite()) {
                return Err(Error::param(name, format!("must be positive and finite, got {value}")));
            }
        }
        if !(self.sensing_duration >= S::zero()) {
            return Err(Error::param(
                "sensing_duration",
                format!("must be non-negative, got {}", self.sensing_duration),
            ));
        }
        if self.sensing_duration >= self.slot_duration {
            return Err(Error::param(
                "sensing_duration",
                format!(
                    "must be shorter than the slot ({} >= {})",
                    self.sensing_duration, self.slot_duration
                ),
            ));
        }
        for (name, snr) in [
            ("power_primary", self.snr_primary()),
            ("power_secondary", self.snr_secondary()),
        ] {
            if !(snr > S::zero() && snr.is_finite()) {
                return Err(Error::param(name, format!("SNR {snr} is not finite and positive")));
            }
        }
        Ok(self.rates())
    }

    pub fn rates(&self) -> Rates<S> {
        Rates {
            primary: self.packet_bits / self.slot_duration,
            secondary: self.packet_bits / (self.slot_duration - self.sensing_duration),
            spectral: self.packet_bits / (self.slot_duration * self.bandwidth),
        }
    }

    pub fn snr_primary(&self) -> S {
        self.power_primary / self.noise
    }

    pub fn snr_secondary(&self) -> S {
        self.power_secondary / self.noise
    }

    /// `tau / T`.
    pub fn sensing_fraction(&self) -> S {
        self.sensing_duration / self.slot_duration
    }

    pub fn link(&self, link: Link) -> LinkBudget<S> {
        let (snr, mean_gain) = match link {
            Link::PrimaryToDestination => (self.snr_primary(), self.gain_p_pd),
            Link::PrimaryToSecondary => (self.snr_primary(), self.gain_p_s),
            Link::SecondaryToDestination => (self.snr_secondary(), self.gain_s_sd),
            Link::SecondaryToPrimaryDestination => (self.snr_secondary(), self.gain_s_pd),
        };
        LinkBudget { snr, mean_gain }
    }
}
