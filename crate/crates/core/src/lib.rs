//! Band-splitting cooperative cognitive relaying.
//!
//! A secondary user (SU) keeps its own queue plus a relay queue of primary
//! packets it overheard but the primary destination missed. Whenever the
//! primary queue is empty the SU splits the band into `delta * W` and
//! `(1 - delta) * W` and, with probability `omega`, gives the `delta` share to
//! its own queue (the relay queue gets the other share).
//!
//! The crate provides:
//!
//! * [`model`] and [`outage`]: parameters, derived rates and Rayleigh outage
//!   probabilities,
//! * [`queueing`]: closed-form service rates, stability and mean delays,
//! * [`optimize`]: throughput maximization, delay minimization under a
//!   primary delay cap, the deterministic-assignment special case and the
//!   prioritized cognitive relaying (PCR) baseline,
//! * [`simulate`]: a slot-level Monte Carlo simulator used to check all of
//!   the above independently.
//!
//! All analytic code is generic over the floating point type through
//! [`Scalar`]; the aliases below fix it to `f64`, which is what the
//! simulator and the CLI use.

pub mod error;
pub mod model;
pub mod num;
pub mod optimize;
pub mod outage;
pub mod queueing;
pub mod simulate;

pub use error::{Error, Result};
pub use num::Scalar;

pub type SystemParams = model::SystemParams<f64>;
pub type Rates = model::Rates<f64>;
pub type Policy = model::Policy<f64>;
pub type Arrivals = model::Arrivals<f64>;
pub type LinkBudget = outage::LinkBudget<f64>;
pub type QueueMetrics = queueing::QueueMetrics<f64>;
pub type DelayCoeffs = queueing::DelayCoeffs<f64>;
pub type OptResult = optimize::OptResult<f64>;
pub type ReducedLp = optimize::ReducedLp<f64>;

pub type SystemParamsF32 = model::SystemParams<f32>;
pub type PolicyF32 = model::Policy<f32>;
pub type QueueMetricsF32 = queueing::QueueMetrics<f32>;

pub use model::Protocol;
pub use simulate::{SimConfig, SimStats};
