//! Where Alice measures `q_n` within a round must not change any observable
//! statistics.

use psqe::protocol::{AliceMeasurement, KeyBits, RoundEngine, RoundOptions};
use psqe::qsim::basis_index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn placements_give_same_distribution() {
    let n = 4;
    let rounds = 8000;
    let engine = RoundEngine::new(n).unwrap();
    let sigma = |p: f64| (p * (1.0 - p) / rounds as f64).sqrt();
    let mut per_placement = Vec::new();
    for (i, placement) in [
        AliceMeasurement::AfterPreparation,
        AliceMeasurement::AfterBobRotation,
        AliceMeasurement::AfterBobMeasurement,
    ]
    .into_iter()
    .enumerate()
    {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + i as u64);
        let opts = RoundOptions { alice_measurement: placement, ..RoundOptions::default() };
        let mut counts = vec![0usize; 1 << (n - 1)];
        let mut ones = 0;
        for j in 0..rounds {
            let key = KeyBits::random(n - 1, &mut rng).unwrap();
            let t = engine.run(j, &key, None, &opts, &mut rng).unwrap();
            assert_eq!(t.agrees(), Some(true), "{placement:?}");
            counts[basis_index(&t.cipher_outcomes)] += 1;
            ones += t.alice_bit as usize;
        }
        let p1 = ones as f64 / rounds as f64;
        assert!((p1 - 0.5).abs() <= 5.0 * sigma(0.5), "{placement:?}: P(q_n=1) = {p1}");
        // Bob's outcomes are uniform over all cipher strings
        let expect = 1.0 / counts.len() as f64;
        for &c in &counts {
            let f = c as f64 / rounds as f64;
            assert!((f - expect).abs() <= 5.0 * sigma(expect), "{placement:?}: {f}");
        }
        per_placement.push(counts);
    }
    // pairwise: frequencies agree within 5 sigma of a difference of proportions
    let expect = 1.0 / per_placement[0].len() as f64;
    let diff_sigma = (2.0 * expect * (1.0 - expect) / rounds as f64).sqrt();
    for a in 0..per_placement.len() {
        for b in a + 1..per_placement.len() {
            for (x, y) in per_placement[a].iter().zip(&per_placement[b]) {
                let d = (*x as f64 - *y as f64).abs() / rounds as f64;
                assert!(d <= 5.0 * diff_sigma);
            }
        }
    }
}
