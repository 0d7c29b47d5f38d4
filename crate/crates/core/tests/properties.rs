use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use psqe::adversary::{self, lemma1_check};
use psqe::protocol::{self, apply_key_rotation, format_bits, parse_bits, KeyBits, PadBits};
use psqe::qsim::{
    self, eigensystem, max_abs_entry, partial_trace, tol, DensityMatrix, GateOp, StateVector, Unitary, C64,
};
use psqe::states;

fn random_state(num_qubits: usize, seed: u64) -> StateVector {
    use rand::Rng;
    use rand_distr::StandardNormal;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amps = (0..1usize << num_qubits)
        .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    StateVector::from_unnormalized(amps).unwrap()
}

fn gate_strategy(num_qubits: usize) -> impl Strategy<Value = GateOp> {
    prop_oneof![
        (0..num_qubits).prop_map(GateOp::Hadamard),
        (0..num_qubits).prop_map(GateOp::PauliX),
        (0..num_qubits, 0..num_qubits)
            .prop_filter("distinct", |(c, t)| c != t)
            .prop_map(|(control, target)| GateOp::Cnot { control, target }),
    ]
}

fn circuit_case() -> impl Strategy<Value = (usize, Vec<GateOp>, u64)> {
    (2usize..=6).prop_flat_map(|q| (Just(q), prop::collection::vec(gate_strategy(q), 0..40), any::<u64>()))
}

fn bits(len: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0u8..=1, len)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn gates_preserve_norm((q, gates, seed) in circuit_case()) {
        let mut s = random_state(q, seed);
        for g in gates {
            s.apply_gate_in_place(g).unwrap();
        }
        prop_assert!((s.norm_sqr() - 1.0).abs() < tol::STATE);
    }

    #[test]
    fn self_inverse_gates((q, gates, seed) in circuit_case()) {
        let start = random_state(q, seed);
        for g in gates {
            let mut s = start.clone();
            s.apply_gate_in_place(g).unwrap();
            s.apply_gate_in_place(g).unwrap();
            prop_assert!(s.max_abs_diff(&start) < tol::STATE);
        }
    }

    #[test]
    fn unitary_on_subset_preserves_norm(q in 2usize..=5, seed: u64, k in 1usize..=2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = Unitary::haar_random(1 << k, &mut rng).unwrap();
        let targets: Vec<usize> = (0..k).map(|i| (i * 2 + seed as usize) % q).collect();
        prop_assume!(targets.iter().collect::<std::collections::HashSet<_>>().len() == k);
        let start = random_state(q, seed ^ 1);
        let mut s = start.clone();
        s.apply_unitary_in_place(&u, &targets).unwrap();
        prop_assert!((s.norm_sqr() - 1.0).abs() < tol::STATE);
        s.apply_unitary_in_place(&u.adjoint(), &targets).unwrap();
        prop_assert!(s.max_abs_diff(&start) < 1e-9);
    }

    #[test]
    fn measurement_collapses(q in 1usize..=5, seed: u64, idx in 0usize..5) {
        let idx = idx % q;
        let mut s = random_state(q, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bit = s.measure_in_place(idx, &mut rng).unwrap();
        let p1 = s.prob_one(idx).unwrap();
        prop_assert!((p1 - bit as f64).abs() < tol::STATE);
        prop_assert!((s.norm_sqr() - 1.0).abs() < tol::STATE);
    }

    #[test]
    fn partial_trace_is_density_matrix(q in 2usize..=6, seed: u64, mask in 1usize..64) {
        let keep: Vec<usize> = (0..q).filter(|i| mask >> i & 1 == 1).collect();
        prop_assume!(!keep.is_empty());
        let rho = partial_trace(&random_state(q, seed), &keep).unwrap();
        prop_assert!((rho.trace().re - 1.0).abs() < tol::STATE);
        prop_assert!(qsim::hermitian_deviation(rho.matrix()) < tol::STATE);
    }

    #[test]
    fn eigen_reconstruction(dim in 1usize..=32, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = qsim::random_hermitian(dim, &mut rng);
        let e = eigensystem(&h).unwrap();
        prop_assert!(max_abs_entry(&(e.reconstruct() - &h)) < tol::RECONSTRUCTION);
        prop_assert!(qsim::unitarity_deviation(&e.vectors) < tol::UNITARY);
        prop_assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn trace_bound_holds(dim in 2usize..=16, k_frac in 0.0f64..1.0, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = 1 + ((dim - 1) as f64 * k_frac) as usize;
        let h = qsim::random_hermitian(dim, &mut rng);
        let subset = qsim::random_orthonormal(dim, k, &mut rng).unwrap();
        prop_assert!(lemma1_check(&h, &subset).unwrap().holds);
    }

    #[test]
    fn key_rotation_is_involution(n in 3usize..=6, key_seed: u64, state_seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(key_seed);
        let key = KeyBits::random(n - 1, &mut rng).unwrap();
        let pos = states::cipher_positions(n);
        let start = random_state(2 * n - 1, state_seed);
        let twice = apply_key_rotation(&apply_key_rotation(&start, &key, &pos).unwrap(), &key, &pos).unwrap();
        prop_assert!(twice.max_abs_diff(&start) < tol::STATE);
    }

    #[test]
    fn cipher_state_maximally_mixed(n in 3usize..=6, key_seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(key_seed);
        let key = KeyBits::random(n - 1, &mut rng).unwrap();
        let rho = adversary::reduced_cipher_state(n, &key).unwrap();
        prop_assert!(rho.max_abs_diff(&DensityMatrix::maximally_mixed(n - 1)) < tol::STATE);
    }

    #[test]
    fn honest_round_agrees(n in 3usize..=6, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let key = KeyBits::random(n - 1, &mut rng).unwrap();
        let t = protocol::run_round(n, &key, None, &mut rng).unwrap();
        prop_assert_eq!(t.agrees(), Some(true));
    }

    #[test]
    fn xor_roundtrip(p in bits(1..=64), seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pad_bits: Vec<u8> = (0..p.len()).map(|_| rand::Rng::gen_range(&mut rng, 0..=1u8)).collect();
        let mut pad = PadBits::new(pad_bits.clone()).unwrap();
        let c = protocol::encrypt(&p, &mut pad).unwrap();
        prop_assert_eq!(protocol::decrypt(&c, &PadBits::new(pad_bits).unwrap()).unwrap(), p);
        prop_assert!(pad.is_used());
    }

    #[test]
    fn bit_string_roundtrip(b in bits(1..=64)) {
        prop_assert_eq!(parse_bits(&format_bits(&b)).unwrap(), b.clone());
        if b.len() >= 2 {
            let key = KeyBits::new(b).unwrap();
            let json = serde_json::to_string(&key).unwrap();
            prop_assert_eq!(serde_json::from_str::<KeyBits>(&json).unwrap(), key);
        }
    }

    #[test]
    fn bounds_symmetric(n in 3usize..=60) {
        let b = adversary::ps_bounds(n).unwrap();
        prop_assert!((b.p_min + b.p_max - 1.0).abs() < 1e-15);
        prop_assert!(b.p_min <= 0.5 && b.p_max >= 0.5);
        let next = adversary::ps_bounds(n + 1).unwrap();
        prop_assert!(next.p_max < b.p_max);
    }

    #[test]
    fn haar_unitary_is_unitary(k in 0usize..=4, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = Unitary::haar_random(1 << k, &mut rng).unwrap();
        prop_assert!(qsim::unitarity_deviation(u.matrix()) < tol::UNITARY);
    }

    #[test]
    fn support_partition(n in 2usize..=8) {
        let c = states::check_support_partition(&states::psi(n).unwrap()).unwrap();
        prop_assert!(c.holds);
    }
}

#[test]
fn random_hermitian_is_hermitian() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let h: DMatrix<C64> = qsim::random_hermitian(7, &mut rng);
    assert!(qsim::hermitian_deviation(&h) < 1e-15);
}
