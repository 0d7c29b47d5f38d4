mod common;

use psqe::protocol::{self, apply_key_rotation, KeyBits, PadOptions};
use psqe::qsim::tol;
use psqe::states;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn rotated_state_matches_term_expansion() {
    let key: KeyBits = "0110".parse().unwrap();
    let got = apply_key_rotation(&states::psi_d(5).unwrap(), &key, &states::cipher_positions(5)).unwrap();
    let want = common::worked_example_rotated_state();
    assert!(got.max_abs_diff(&want) < tol::STATE);
}

#[test]
fn term_expansion_differs_for_other_keys() {
    let want = common::worked_example_rotated_state();
    for key in ["0000", "0100", "1110"] {
        let key: KeyBits = key.parse().unwrap();
        let got = apply_key_rotation(&states::psi_d(5).unwrap(), &key, &states::cipher_positions(5)).unwrap();
        assert!(got.max_abs_diff(&want) > 0.01);
    }
}

#[test]
fn injected_pad_encrypts_to_golden_ciphertext() {
    let key: KeyBits = "0110".parse().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let opts = PadOptions { inject: Some(vec![0, 1, 0, 0, 1]), ..PadOptions::default() };
    let mut run = protocol::generate_pad_with(5, &key, 5, None, &opts, &mut rng).unwrap();
    assert_eq!(run.alice.bits(), &[0, 1, 0, 0, 1]);
    assert_eq!(run.bob.bits(), &[0, 1, 0, 0, 1]);
    let c = protocol::encrypt(&[1, 0, 1, 0, 0], &mut run.alice).unwrap();
    assert_eq!(c.bits(), &[1, 1, 1, 0, 1]);
    assert_eq!(protocol::decrypt(&c, &run.bob).unwrap(), vec![1, 0, 1, 0, 0]);
}
