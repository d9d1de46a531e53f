mod common;

use bandsplit::model::Link;
use bandsplit::optimize::max_secondary_throughput;
use bandsplit::queueing::{metrics, primary_delay, primary_outages, subband_success};
use bandsplit::simulate::{compare_protocols, simulate, LinkTally, SimConfig};
use bandsplit::{Arrivals, Policy, SystemParams};
use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn within_se(tally: &LinkTally, p: f64, k: f64) -> bool {
    let n = tally.attempts as f64;
    let se = (p * (1.0 - p) / n).sqrt();
    (tally.frequency() - p).abs() <= k * se.max(1.0 / n)
}

#[test]
fn random_stable_draws_match_rates() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut done = 0;
    while done < 20 {
        let params = system_from(std::array::from_fn(|_| rng.random()));
        let lambda_p = rng.random_range(0.05..0.8) * primary_capacity(&params);
        let (delta, omega) = (rng.random::<f64>(), rng.random::<f64>());
        let m = metrics_at(&params, lambda_p, delta, omega).unwrap();
        if m.lambda_ps >= 0.9 * m.mu_ps || m.mu_s < 0.05 {
            continue;
        }
        let lambda_s = rng.random_range(0.1..0.8) * m.mu_s;
        let s = simulate(
            &params,
            &Policy::proposed(delta, omega).unwrap(),
            &Arrivals::new(lambda_p, lambda_s).unwrap(),
            &SimConfig::new(200_000, 8, done),
        )
        .unwrap();
        assert!(!s.growing, "draw {done}: {params:?}");
        // 3 half-widths keeps the family-wise false alarm rate low over 60 checks
        for (name, est, want) in [
            ("idle", s.idle_fraction, m.idle),
            ("inflow", s.relay_inflow_rate, m.lambda_ps),
            ("delivered_p", s.delivered_primary_rate, lambda_p),
            ("delivered_s", s.delivered_secondary_rate, lambda_s),
        ] {
            assert!(
                (est.mean - want).abs() <= 3.0 * est.half_width + 1e-4,
                "draw {done} {name}: {est:?} vs {want}"
            );
        }
        done += 1;
    }
}

#[test]
fn link_frequencies_match_outage_model() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for seed in 0..5 {
        let params = system_from(std::array::from_fn(|_| rng.random()));
        let lambda_p = 0.6 * primary_capacity(&params);
        let delta = rng.random_range(0.1..0.9);
        let s = simulate(
            &params,
            &Policy::proposed(delta, 0.5).unwrap(),
            &Arrivals::new(lambda_p, 1.0).unwrap(),
            &SimConfig::new(100_000, 4, seed),
        )
        .unwrap();
        let l = &s.links;
        let (out_pd, out_ps) = primary_outages(&params).unwrap();
        let expect = [
            (&l.p_pd, 1.0 - out_pd),
            (&l.p_s, 1.0 - out_ps),
            (
                &l.s_sd[0],
                subband_success(&params, Link::SecondaryToDestination, delta),
            ),
            (
                &l.s_sd[1],
                subband_success(&params, Link::SecondaryToDestination, 1.0 - delta),
            ),
        ];
        for (i, (tally, p)) in expect.into_iter().enumerate() {
            assert!(tally.attempts > 1000);
            assert!(within_se(tally, p, 3.0), "seed {seed} link {i}: {tally:?} vs {p}");
        }
    }
}

#[test]
fn both_primary_links_drawn_on_every_primary_slot() {
    let params = SystemParams::figure_setting(1.5);
    let s = simulate(
        &params,
        &Policy::proposed(0.7, 0.6).unwrap(),
        &Arrivals::new(0.4, 0.2).unwrap(),
        &SimConfig::new(50_000, 2, 3),
    )
    .unwrap();
    let busy_slots = (1.0 - s.idle_fraction.mean) * (2 * s.measured_slots) as f64;
    assert_eq!(s.links.p_s.attempts, s.links.p_pd.attempts);
    assert!((s.links.p_pd.attempts as f64 - busy_slots).abs() < 1e-6 * busy_slots);
}

#[test]
fn pcr_primary_delay_matches_analysis() {
    let params = SystemParams::figure_setting(1.0);
    let m = metrics(&params, &Policy::pcr(), 0.5).unwrap();
    let full_pd = subband_success(&params, Link::SecondaryToPrimaryDestination, 1.0);
    let dp = primary_delay(0.5, m.mu_p, m.out_p_pd, full_pd).unwrap();
    let s = simulate(
        &params,
        &Policy::pcr(),
        &Arrivals::new(0.5, 0.2).unwrap(),
        &SimConfig::new(500_000, 8, 1),
    )
    .unwrap();
    assert!(
        s.mean_delay_primary_e2e.contains(dp),
        "{:?} vs {dp}",
        s.mean_delay_primary_e2e
    );
    assert!(s.idle_fraction.contains(m.idle));
}

#[test]
fn saturated_secondary_delivers_its_service_rate() {
    let params = SystemParams::figure_setting(1.0);
    let policy = Policy::proposed(0.6, 0.7).unwrap();
    let m = metrics(&params, &policy, 0.5).unwrap();
    let s = simulate(
        &params,
        &policy,
        &Arrivals::new(0.5, 1.0).unwrap(),
        &SimConfig::new(200_000, 6, 8),
    )
    .unwrap();
    assert!(
        s.delivered_secondary_rate.contains(m.mu_s),
        "{:?} vs {}",
        s.delivered_secondary_rate,
        m.mu_s
    );
    assert!(s.growing);
}

#[test]
fn optimized_policy_outdelivers_pcr_on_common_arrivals() {
    // saturated secondary queue: delivered rate is the stable throughput
    for rate in [0.5, 1.0, 1.5] {
        let params = SystemParams::figure_setting(rate);
        let opt = max_secondary_throughput(&params, 0.8, 1e-3).unwrap();
        let cmp = compare_protocols(
            &params,
            &Arrivals::new(0.8, 1.0).unwrap(),
            &SimConfig::new(200_000, 6, 21),
            &opt.policy(),
        )
        .unwrap();
        assert!(cmp.arrivals_identical);
        let gain = cmp.secondary_rate_gain;
        assert!(gain.mean - gain.half_width > 0.0, "rate {rate}: {gain:?}");
    }
}

#[test]
fn comparison_is_deterministic() {
    let params = SystemParams::figure_setting(1.0);
    let arrivals = Arrivals::new(0.5, 0.3).unwrap();
    let config = SimConfig::new(20_000, 3, 77);
    let policy = Policy::proposed(0.8, 0.9).unwrap();
    let a = compare_protocols(&params, &arrivals, &config, &policy).unwrap();
    let b = compare_protocols(&params, &arrivals, &config, &policy).unwrap();
    assert_eq!(a, b);
    assert!(a.arrivals_identical);
    assert_eq!(a.proposed.arrival_fingerprints.len(), 3);
    let other = compare_protocols(&params, &arrivals, &SimConfig { seed: 78, ..config }, &policy).unwrap();
    assert_ne!(a.proposed.arrival_fingerprints, other.proposed.arrival_fingerprints);
}

#[test]
fn replications_differ() {
    let s = simulate(
        &SystemParams::figure_setting(1.0),
        &Policy::proposed(0.6, 0.7).unwrap(),
        &Arrivals::new(0.5, 0.2).unwrap(),
        &SimConfig::new(10_000, 4, 1),
    )
    .unwrap();
    let fp = &s.arrival_fingerprints;
    assert!(fp.iter().enumerate().all(|(i, x)| fp[i + 1..].iter().all(|y| y != x)));
}
