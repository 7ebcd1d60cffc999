use bb84cert::numerics::Probability;
use bb84cert::sim::{estimate_stats, run_protocol, simulate_and_certify, EveStrategy, ProtocolConfig};

fn p(v: f64) -> Probability {
    Probability::new(v).unwrap()
}

fn within_sigmas(observed: f64, expected: f64, trials: u64, k: f64) -> bool {
    let sigma = (expected * (1.0 - expected) / trials as f64).sqrt();
    (observed - expected).abs() <= k * sigma
}

#[test]
fn depolarizing_halves_into_errors() {
    let mut cfg = ProtocolConfig::ideal(400_000, 21);
    cfg.channel.depolarizing = p(0.1);
    let t = run_protocol(&cfg).unwrap();
    let s = estimate_stats(&t).unwrap();
    assert!(within_sigmas(s.delta_x.value(), 0.05, t.xx.nonvacuum(), 3.0), "{}", s.delta_x);
    assert!(within_sigmas(s.delta_z.value(), 0.05, t.zz.nonvacuum(), 3.0), "{}", s.delta_z);
}

#[test]
fn intercept_resend_quarter_errors() {
    let mut cfg = ProtocolConfig::ideal(400_000, 22);
    cfg.eve = EveStrategy::InterceptResend;
    let r = simulate_and_certify(&cfg).unwrap();
    let t = r.counts;
    assert!(within_sigmas(r.stats.delta_x.value(), 0.25, t.xx.nonvacuum(), 3.0));
    assert!(within_sigmas(r.stats.delta_z.value(), 0.25, t.zz.nonvacuum(), 3.0));
    assert!(!r.certificate.positive);
}

#[test]
fn loss_composes_with_efficiency() {
    let mut cfg = ProtocolConfig::ideal(400_000, 23);
    cfg.channel.transmittance = p(0.2);
    cfg.detector.eta0 = p(0.6);
    cfg.detector.eta1 = p(0.6);
    let t = run_protocol(&cfg).unwrap();
    let s = estimate_stats(&t).unwrap();
    assert!(within_sigmas(s.q_x.value(), 0.12, t.xx.total, 3.0));
    assert!(within_sigmas(s.q_z.value(), 0.12, t.zz.total, 3.0));
    assert!(within_sigmas(s.q_ph.value(), 0.12, t.zx.total, 3.0));
    assert_eq!(s.delta_z.value(), 0.0);
}

#[test]
fn dark_counts_add_random_bits() {
    // Lossless path: the signal detector always fires; a dark click on the other
    // detector (probability d) produces a coincidence and a random bit.
    let d = 0.2;
    let mut cfg = ProtocolConfig::ideal(400_000, 24);
    cfg.detector.dark = p(d);
    let t = run_protocol(&cfg).unwrap();
    let s = estimate_stats(&t).unwrap();
    assert_eq!(s.q_z.value(), 1.0);
    assert!(within_sigmas(s.delta_z.value(), d / 2.0, t.zz.nonvacuum(), 3.0));
}

#[test]
fn efficiency_mismatch_biases_detections() {
    // Z-basis detections: bit 0 with η0, bit 1 with η1.
    let mut cfg = ProtocolConfig::ideal(400_000, 25);
    cfg.detector.eta0 = p(0.5);
    let t = run_protocol(&cfg).unwrap();
    let s = estimate_stats(&t).unwrap();
    assert!(within_sigmas(s.q_z.value(), 0.75, t.zz.total, 3.0));
}

#[test]
fn partial_blinding_removes_signal_clicks() {
    let mut cfg = ProtocolConfig::ideal(400_000, 26);
    cfg.eve = EveStrategy::BlindFraction(p(0.3));
    let r = run_protocol(&cfg).unwrap();
    let s = estimate_stats(&r).unwrap();
    assert!(within_sigmas(s.q_z.value(), 0.7, r.zz.total, 3.0));
    assert_eq!(s.delta_z.value(), 0.0);
}

#[test]
fn seed_scan_is_statistically_sound() {
    let mut outside = 0;
    for seed in 0..50 {
        let mut cfg = ProtocolConfig::ideal(40_000, 1000 + seed);
        cfg.channel.depolarizing = p(0.1);
        let t = run_protocol(&cfg).unwrap();
        let s = estimate_stats(&t).unwrap();
        if !within_sigmas(s.delta_x.value(), 0.05, t.xx.nonvacuum(), 3.0) {
            outside += 1;
        }
    }
    assert!(outside <= 5, "{outside} of 50 runs outside 3 sigma");
}

#[test]
fn tilted_source_certifies_with_derived_delta() {
    let mut cfg = ProtocolConfig::ideal(200_000, 27);
    cfg.source.x_tilt = 0.2;
    let r = simulate_and_certify(&cfg).unwrap();
    assert!(r.derived_imperfections.delta > 0.0);
    assert!(r.certificate.delta_ph >= r.stats.delta_x.value());
    assert!(r.certificate.positive);
}
