use psqe::adversary::{self, AttackStrategy};
use psqe::protocol::KeyBits;
use psqe::harness::{self, ExperimentConfig, StrategySpec, TamperVerdict};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sigma(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

#[test]
fn honest_experiment_has_full_agreement_and_unbiased_pad() {
    let mut cfg = ExperimentConfig::new(5, 1000, 21);
    cfg.pad_length = 256;
    cfg.shards = 4;
    let r = harness::run_experiment(&cfg).unwrap();
    assert_eq!(r.agreement_rate, 1.0);
    assert!(r.pad_bias_within_5_sigma, "bias {}", r.pad_bias);
    assert_eq!(r.pad_roundtrip_ok, Some(true));
}

#[test]
fn optimal_experiment_tracks_upper_bound() {
    let rounds = 20_000;
    let mut cfg = ExperimentConfig::new(3, rounds, 22);
    cfg.strategy = Some(StrategySpec::Optimal);
    cfg.shards = 4;
    let p = harness::run_experiment(&cfg).unwrap().empirical_ps.unwrap();
    assert!((p - 0.75).abs() <= 3.0 * sigma(0.75, rounds), "{p}");
}

#[test]
fn sweep_converges_toward_half() {
    let rounds = 40_000;
    let mut base = ExperimentConfig::new(3, rounds, 23);
    base.shards = 4;
    let rows = harness::sweep(&base, &[3, 4, 5, 6], &[Some(StrategySpec::Optimal)]).unwrap();
    let ps: Vec<f64> = rows.iter().map(|r| r.empirical_ps.unwrap()).collect();
    for (r, p) in rows.iter().zip(&ps) {
        let bound = adversary::ps_bounds(r.n).unwrap().p_max;
        assert_eq!(r.p_max, bound);
        assert!((p - bound).abs() <= 3.0 * sigma(bound, rounds), "n={} {p} vs {bound}", r.n);
    }
    assert!(ps.windows(2).all(|w| w[1] < w[0]), "{ps:?}");
}

#[test]
fn honest_sweep_agrees_everywhere() {
    let rows = harness::sweep(&ExperimentConfig::new(3, 500, 24), &[3, 5, 7], &[None]).unwrap();
    assert!(rows.iter().all(|r| r.agreement_rate == 1.0 && r.verdict == TamperVerdict::Clean));
}

#[test]
fn passive_eve_is_a_coin_flip() {
    let rounds = 20_000;
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let r = adversary::simulate_attack(&AttackStrategy::Passive, 5, rounds, &mut rng).unwrap();
    assert!((r.empirical_ps - 0.5).abs() <= 3.0 * sigma(0.5, rounds));
    assert_eq!(r.mismatches, 0);
}

#[test]
fn tamper_floor_for_every_active_strategy() {
    let n = 5;
    let rounds = 10_000;
    let p_max = adversary::ps_bounds(n).unwrap().p_max;
    let floor = 1.0 - p_max - 3.0 * sigma(1.0 - p_max, rounds);
    let strategies = [
        AttackStrategy::InterceptResendComputational,
        AttackStrategy::OptimalUnitary,
        AttackStrategy::GuessKey("0110".parse::<KeyBits>().unwrap()),
    ];
    for (i, s) in strategies.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(260 + i as u64);
        let (_, transcripts) = adversary::simulate_attack_with_transcripts(s, n, rounds, &mut rng).unwrap();
        let stat = harness::tamper_detection_stat(&transcripts, harness::DEFAULT_TAMPER_THRESHOLD).unwrap();
        assert!(stat.mismatch_rate >= floor, "{}: {}", s.name(), stat.mismatch_rate);
        assert_eq!(stat.verdict, TamperVerdict::Tampered);
    }
}

#[test]
fn intercept_resend_success_matches_closed_form() {
    // each cipher bit survives a computational measurement with probability 3/4
    let rounds = 40_000;
    for n in [3, 5] {
        let mut rng = ChaCha8Rng::seed_from_u64(27 + n as u64);
        let r = adversary::simulate_attack(&AttackStrategy::InterceptResendComputational, n, rounds, &mut rng).unwrap();
        let want = 0.5 * (1.0 + 0.5f64.powi(n as i32 - 1));
        assert!((r.empirical_ps - want).abs() <= 4.0 * sigma(want, rounds), "n={n}");
    }
}
