//! Slot-level Monte Carlo simulation of the three-queue system.
//!
//! Each slot:
//!
//! 1. Bernoulli arrivals join `Q_p` and `Q_s` (they can leave in the same slot).
//! 2. Occupancies are sampled.
//! 3. If `Q_p` is non-empty the PU sends its head packet over the full band
//!    at `b / T`. It leaves if the primary destination decodes it; otherwise,
//!    if the SU decodes it, it moves to `Q_ps`.
//! 4. If `Q_p` is empty the SU transmits at `b / (T - tau)`. Under the
//!    proposed protocol the `delta` share goes to `Q_s` with probability
//!    `omega` (to `Q_ps` otherwise) and each head packet uses its own share.
//!    Under PCR, `Q_ps` gets the full band if non-empty, else `Q_s` does.
//!
//! Every link draws an independent exponential gain each time it is used and
//! fails when the rate exceeds `band * log2(1 + h * snr)`. Delays count the
//! slot of departure, so the minimum is one slot.
//!
//! Randomness comes from ChaCha8 streams keyed by `(seed, replication)`: one
//! stream per arrival process, one for the band choice and one per link.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::model::{Arrivals, Policy, Protocol, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    /// Slots per replication, warmup included.
    pub n_slots: u64,
    pub n_replications: usize,
    pub seed: u64,
    /// Leading slots excluded from every statistic.
    pub warmup_slots: u64,
}

impl SimConfig {
    /// Config with the default warmup of 10% of the slots.
    pub fn new(n_slots: u64, n_replications: usize, seed: u64) -> Self {
        SimConfig {
            n_slots,
            n_replications,
            seed,
            warmup_slots: n_slots / 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_slots <= self.warmup_slots {
            return Err(Error::param(
                "n_slots",
                format!(
                    "{} slots leave nothing after {} warmup slots",
                    self.n_slots, self.warmup_slots
                ),
            ));
        }
        if self.n_replications == 0 {
            return Err(Error::param("n_replications", "need at least one replication"));
        }
        Ok(())
    }

    pub fn measured_slots(&self) -> u64 {
        self.n_slots - self.warmup_slots
    }
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig::new(1_000_000, 10, 42)
    }
}

/// Mean across replications with the half-width of its 95% Student-t
/// confidence interval. `mean` is NaN when no replication observed the
/// quantity; `half_width` is NaN with fewer than two observations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub half_width: f64,
}

impl Estimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let xs: Vec<f64> = samples.iter().copied().filter(|x| x.is_finite()).collect();
        let n = xs.len();
        if n == 0 {
            return Estimate {
                mean: f64::NAN,
                half_width: f64::NAN,
            };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return Estimate {
                mean,
                half_width: f64::NAN,
            };
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
            .expect("positive degrees of freedom")
            .inverse_cdf(0.975);
        Estimate {
            mean,
            half_width: t * (var / n as f64).sqrt(),
        }
    }

    pub fn contains(&self, value: f64) -> bool {
        (self.mean - value).abs() <= self.half_width
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PerQueue<T> {
    pub primary: T,
    pub secondary: T,
    pub relay: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LinkTally {
    pub attempts: u64,
    pub successes: u64,
}

impl LinkTally {
    fn record(&mut self, success: bool) {
        self.attempts += 1;
        self.successes += success as u64;
    }

    fn merge(&mut self, other: &LinkTally) {
        self.attempts += other.attempts;
        self.successes += other.successes;
    }

    pub fn frequency(&self) -> f64 {
        self.successes as f64 / self.attempts as f64
    }
}

/// Transmission attempts per link. SU links are split by sub-band:
/// index 0 is the `delta` share, index 1 the `1 - delta` share. Under PCR
/// every SU attempt uses the full band and is counted at index 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LinkTallies {
    pub p_pd: LinkTally,
    pub p_s: LinkTally,
    pub s_sd: [LinkTally; 2],
    pub s_pd: [LinkTally; 2],
}

impl LinkTallies {
    fn merge(&mut self, other: &LinkTallies) {
        self.p_pd.merge(&other.p_pd);
        self.p_s.merge(&other.p_s);
        for i in 0..2 {
            self.s_sd[i].merge(&other.s_sd[i]);
            self.s_pd[i].merge(&other.s_pd[i]);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimStats {
    pub protocol: Protocol,
    /// Slots per replication after warmup.
    pub measured_slots: u64,
    pub delivered_primary_rate: Estimate,
    pub delivered_secondary_rate: Estimate,
    /// Fraction of slots with `Q_p` empty.
    pub idle_fraction: Estimate,
    pub relay_inflow_rate: Estimate,
    pub mean_delay_primary_e2e: Estimate,
    pub mean_delay_secondary: Estimate,
    /// Empirical arrival rate into each queue (the relay entry is the inflow).
    pub arrival_rate: PerQueue<Estimate>,
    /// Mean occupancy sampled after arrivals, before service.
    pub mean_queue_len: PerQueue<Estimate>,
    /// Mean time spent in each queue by departing packets. For `Q_ps` this
    /// counts the slots after the one in which the packet entered.
    pub mean_sojourn: PerQueue<Estimate>,
    /// Backlog change over the measured window divided by its length.
    pub backlog_growth: PerQueue<Estimate>,
    /// Set when some queue grows faster than a stable queue plausibly could.
    pub growing: bool,
    pub links: LinkTallies,
    /// Hash of the arrival sequence of each replication.
    pub arrival_fingerprints: Vec<u64>,
    /// Raw per-replication values used for paired comparisons.
    pub per_replication: Vec<ReplicationSummary>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReplicationSummary {
    pub delivered_primary_rate: f64,
    pub delivered_secondary_rate: f64,
    pub mean_delay_primary_e2e: f64,
    pub mean_delay_secondary: f64,
}

/// Stream ids within one replication.
const ARRIVALS_P: u64 = 0;
const ARRIVALS_S: u64 = 1;
const BAND_CHOICE: u64 = 2;
const GAIN_P_PD: u64 = 3;
const GAIN_P_S: u64 = 4;
const GAIN_S_SD: u64 = 5;
const GAIN_S_PD: u64 = 6;

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn substream(seed: u64, replication: u64, salt: u64, stream: u64) -> ChaCha8Rng {
    let key = splitmix(splitmix(splitmix(seed) ^ replication) ^ salt.wrapping_mul(0xA24B_AED4_963E_E407));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(stream);
    rng
}

struct Link {
    rng: ChaCha8Rng,
    gain: Exp<f64>,
    snr: f64,
}

impl Link {
    fn new(rng: ChaCha8Rng, mean_gain: f64, snr: f64) -> Self {
        Link {
            rng,
            gain: Exp::new(1.0 / mean_gain).expect("positive mean gain"),
            snr,
        }
    }

    fn delivers(&mut self, rate: f64, band: f64) -> bool {
        let h = self.gain.sample(&mut self.rng);
        rate <= band * (h * self.snr).ln_1p() / std::f64::consts::LN_2
    }
}

struct Setup {
    lambda_p: f64,
    lambda_s: f64,
    protocol: Protocol,
    omega: f64,
    band_delta: f64,
    band_rest: f64,
    bandwidth: f64,
    rate_p: f64,
    rate_s: f64,
    params: SystemParams<f64>,
}

#[derive(Default)]
struct Accumulator {
    sum: f64,
    count: u64,
}

impl Accumulator {
    fn push(&mut self, x: f64) {
        self.sum += x;
        self.count += 1;
    }

    fn mean(&self) -> f64 {
        if self.count == 0 {
            f64::NAN
        } else {
            self.sum / self.count as f64
        }
    }
}

struct Replication {
    delivered_p: u64,
    delivered_s: u64,
    idle: u64,
    inflow: u64,
    arrivals_p: u64,
    arrivals_s: u64,
    delay_p: Accumulator,
    delay_s: Accumulator,
    sojourn: PerQueue<Accumulator>,
    occupancy: PerQueue<u64>,
    growth: PerQueue<i64>,
    links: LinkTallies,
    fingerprint: u64,
}

fn fnv(hash: u64, x: u64) -> u64 {
    (hash ^ x).wrapping_mul(0x0000_0100_0000_01B3)
}

fn run_replication(setup: &Setup, config: &SimConfig, replication: u64, channel_salt: u64) -> Replication {
    let seed = config.seed;
    let mut arr_p = substream(seed, replication, 0, ARRIVALS_P);
    let mut arr_s = substream(seed, replication, 0, ARRIVALS_S);
    let mut choice = substream(seed, replication, channel_salt, BAND_CHOICE);
    let p = &setup.params;
    let (snr_p, snr_s) = (p.snr_primary(), p.snr_secondary());
    let mut p_pd = Link::new(
        substream(seed, replication, channel_salt, GAIN_P_PD),
        p.gain_p_pd,
        snr_p,
    );
    let mut p_s = Link::new(substream(seed, replication, channel_salt, GAIN_P_S), p.gain_p_s, snr_p);
    let mut s_sd = Link::new(
        substream(seed, replication, channel_salt, GAIN_S_SD),
        p.gain_s_sd,
        snr_s,
    );
    let mut s_pd = Link::new(
        substream(seed, replication, channel_salt, GAIN_S_PD),
        p.gain_s_pd,
        snr_s,
    );

    let mut q_p: VecDeque<u64> = VecDeque::new();
    let mut q_s: VecDeque<u64> = VecDeque::new();
    // (arrival slot at Q_p, slot in which it entered Q_ps)
    let mut q_ps: VecDeque<(u64, u64)> = VecDeque::new();

    let mut rep = Replication {
        delivered_p: 0,
        delivered_s: 0,
        idle: 0,
        inflow: 0,
        arrivals_p: 0,
        arrivals_s: 0,
        delay_p: Accumulator::default(),
        delay_s: Accumulator::default(),
        sojourn: PerQueue::default(),
        occupancy: PerQueue::default(),
        growth: PerQueue::default(),
        links: LinkTallies::default(),
        fingerprint: 0xCBF2_9CE4_8422_2325,
    };
    let warmup = config.warmup_slots;
    let mut backlog_at_warmup = PerQueue::<i64>::default();

    for t in 0..config.n_slots {
        let measuring = t >= warmup;
        if t == warmup {
            backlog_at_warmup = PerQueue {
                primary: q_p.len() as i64,
                secondary: q_s.len() as i64,
                relay: q_ps.len() as i64,
            };
        }
        // packets that arrived before the warmup ended are not timed
        let timed = |arrival: u64| arrival >= warmup;

        let new_p = arr_p.random::<f64>() < setup.lambda_p;
        let new_s = arr_s.random::<f64>() < setup.lambda_s;
        rep.fingerprint = fnv(rep.fingerprint, (new_p as u64) | ((new_s as u64) << 1));
        if new_p {
            q_p.push_back(t);
        }
        if new_s {
            q_s.push_back(t);
        }
        if measuring {
            rep.arrivals_p += new_p as u64;
            rep.arrivals_s += new_s as u64;
            rep.occupancy.primary += q_p.len() as u64;
            rep.occupancy.secondary += q_s.len() as u64;
            rep.occupancy.relay += q_ps.len() as u64;
        }

        if let Some(&arrival) = q_p.front() {
            let direct = p_pd.delivers(setup.rate_p, setup.bandwidth);
            let overheard = p_s.delivers(setup.rate_p, setup.bandwidth);
            if measuring {
                rep.links.p_pd.record(direct);
                rep.links.p_s.record(overheard);
            }
            if direct || overheard {
                q_p.pop_front();
                let delay = (t - arrival + 1) as f64;
                if measuring && timed(arrival) {
                    rep.sojourn.primary.push(delay);
                }
                if direct {
                    if measuring {
                        rep.delivered_p += 1;
                        if timed(arrival) {
                            rep.delay_p.push(delay);
                        }
                    }
                } else {
                    q_ps.push_back((arrival, t));
                    if measuring {
                        rep.inflow += 1;
                    }
                }
            }
            continue;
        }

        if measuring {
            rep.idle += 1;
        }
        let (own_band, relay_band, own_share, relay_share) = match setup.protocol {
            Protocol::Proposed => {
                if choice.random::<f64>() < setup.omega {
                    (setup.band_delta, setup.band_rest, 0, 1)
                } else {
                    (setup.band_rest, setup.band_delta, 1, 0)
                }
            }
            Protocol::Pcr => {
                if q_ps.is_empty() {
                    (setup.bandwidth, 0.0, 0, 0)
                } else {
                    (0.0, setup.bandwidth, 0, 0)
                }
            }
        };
        let own_turn = setup.protocol == Protocol::Proposed || q_ps.is_empty();
        if let Some(&(arrival, entered)) = q_ps.front() {
            let ok = s_pd.delivers(setup.rate_s, relay_band);
            if measuring {
                rep.links.s_pd[relay_share].record(ok);
            }
            if ok {
                q_ps.pop_front();
                if measuring {
                    rep.delivered_p += 1;
                    if timed(arrival) {
                        rep.delay_p.push((t - arrival + 1) as f64);
                    }
                    if entered >= warmup {
                        rep.sojourn.relay.push((t - entered) as f64);
                    }
                }
            }
        }
        if own_turn {
            if let Some(&arrival) = q_s.front() {
                let ok = s_sd.delivers(setup.rate_s, own_band);
                if measuring {
                    rep.links.s_sd[own_share].record(ok);
                }
                if ok {
                    q_s.pop_front();
                    if measuring {
                        rep.delivered_s += 1;
                        if timed(arrival) {
                            let d = (t - arrival + 1) as f64;
                            rep.delay_s.push(d);
                            rep.sojourn.secondary.push(d);
                        }
                    }
                }
            }
        }
    }
    rep.growth = PerQueue {
        primary: q_p.len() as i64 - backlog_at_warmup.primary,
        secondary: q_s.len() as i64 - backlog_at_warmup.secondary,
        relay: q_ps.len() as i64 - backlog_at_warmup.relay,
    };
    rep
}

fn validated_setup(params: &SystemParams<f64>, policy: &Policy<f64>, arrivals: &Arrivals<f64>) -> Result<Setup> {
    let rates = params.validate()?;
    policy.check()?;
    Arrivals::new(arrivals.primary, arrivals.secondary)?;
    Ok(Setup {
        lambda_p: arrivals.primary,
        lambda_s: arrivals.secondary,
        protocol: policy.protocol,
        omega: policy.omega,
        band_delta: policy.delta * params.bandwidth,
        band_rest: (1.0 - policy.delta) * params.bandwidth,
        bandwidth: params.bandwidth,
        rate_p: rates.primary,
        rate_s: rates.secondary,
        params: *params,
    })
}

/// Runs `config.n_replications` independent replications (in parallel) and
/// aggregates them. The result depends only on the arguments.
pub fn simulate(
    params: &SystemParams<f64>,
    policy: &Policy<f64>,
    arrivals: &Arrivals<f64>,
    config: &SimConfig,
) -> Result<SimStats> {
    simulate_salted(params, policy, arrivals, config, 0)
}

fn simulate_salted(
    params: &SystemParams<f64>,
    policy: &Policy<f64>,
    arrivals: &Arrivals<f64>,
    config: &SimConfig,
    channel_salt: u64,
) -> Result<SimStats> {
    config.validate()?;
    let setup = validated_setup(params, policy, arrivals)?;
    let reps: Vec<Replication> = (0..config.n_replications as u64)
        .into_par_iter()
        .map(|r| run_replication(&setup, config, r, channel_salt))
        .collect();
    Ok(aggregate(&reps, config, policy.protocol))
}

fn aggregate(reps: &[Replication], config: &SimConfig, protocol: Protocol) -> SimStats {
    let n = config.measured_slots() as f64;
    let est = |f: &dyn Fn(&Replication) -> f64| -> Estimate {
        Estimate::from_samples(&reps.iter().map(f).collect::<Vec<_>>())
    };
    let mut links = LinkTallies::default();
    for r in reps {
        links.merge(&r.links);
    }
    let backlog_growth = PerQueue {
        primary: est(&|r| r.growth.primary as f64 / n),
        secondary: est(&|r| r.growth.secondary as f64 / n),
        relay: est(&|r| r.growth.relay as f64 / n),
    };
    let threshold = 5.0 / n.sqrt();
    let growing = [backlog_growth.primary, backlog_growth.secondary, backlog_growth.relay]
        .iter()
        .any(|g| g.mean > threshold);
    SimStats {
        protocol,
        measured_slots: config.measured_slots(),
        delivered_primary_rate: est(&|r| r.delivered_p as f64 / n),
        delivered_secondary_rate: est(&|r| r.delivered_s as f64 / n),
        idle_fraction: est(&|r| r.idle as f64 / n),
        relay_inflow_rate: est(&|r| r.inflow as f64 / n),
        mean_delay_primary_e2e: est(&|r| r.delay_p.mean()),
        mean_delay_secondary: est(&|r| r.delay_s.mean()),
        arrival_rate: PerQueue {
            primary: est(&|r| r.arrivals_p as f64 / n),
            secondary: est(&|r| r.arrivals_s as f64 / n),
            relay: est(&|r| r.inflow as f64 / n),
        },
        mean_queue_len: PerQueue {
            primary: est(&|r| r.occupancy.primary as f64 / n),
            secondary: est(&|r| r.occupancy.secondary as f64 / n),
            relay: est(&|r| r.occupancy.relay as f64 / n),
        },
        mean_sojourn: PerQueue {
            primary: est(&|r| r.sojourn.primary.mean()),
            secondary: est(&|r| r.sojourn.secondary.mean()),
            relay: est(&|r| r.sojourn.relay.mean()),
        },
        backlog_growth,
        growing,
        links,
        arrival_fingerprints: reps.iter().map(|r| r.fingerprint).collect(),
        per_replication: reps
            .iter()
            .map(|r| ReplicationSummary {
                delivered_primary_rate: r.delivered_p as f64 / n,
                delivered_secondary_rate: r.delivered_s as f64 / n,
                mean_delay_primary_e2e: r.delay_p.mean(),
                mean_delay_secondary: r.delay_s.mean(),
            })
            .collect(),
    }
}

/// Both protocols on common random numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolComparison {
    pub proposed: SimStats,
    pub pcr: SimStats,
    /// Paired per-replication differences, proposed minus PCR.
    pub secondary_rate_gain: Estimate,
    pub secondary_delay_gain: Estimate,
    pub primary_delay_gain: Estimate,
    /// True when both arms saw identical arrival sequences.
    pub arrivals_identical: bool,
}

/// Simulates `proposed` and PCR with shared arrival streams and separate
/// channel streams, and reports paired differences.
pub fn compare_protocols(
    params: &SystemParams<f64>,
    arrivals: &Arrivals<f64>,
    config: &SimConfig,
    proposed: &Policy<f64>,
) -> Result<ProtocolComparison> {
    let proposed_policy = Policy {
        protocol: Protocol::Proposed,
        ..*proposed
    };
    let a = simulate_salted(params, &proposed_policy, arrivals, config, 1)?;
    let b = simulate_salted(params, &Policy::pcr(), arrivals, config, 2)?;
    let paired = |f: fn(&ReplicationSummary) -> f64| {
        let diffs: Vec<f64> = a
            .per_replication
            .iter()
            .zip(&b.per_replication)
            .map(|(x, y)| f(x) - f(y))
            .collect();
        Estimate::from_samples(&diffs)
    };
    Ok(ProtocolComparison {
        secondary_rate_gain: paired(|r| r.delivered_secondary_rate),
        secondary_delay_gain: paired(|r| r.mean_delay_secondary),
        primary_delay_gain: paired(|r| r.mean_delay_primary_e2e),
        arrivals_identical: a.arrival_fingerprints == b.arrival_fingerprints,
        proposed: a,
        pcr: b,
    })
}
