#![allow(dead_code)]

use std::f64::consts::FRAC_1_SQRT_2;

use psqe::qsim::{StateVector, C64};

fn ket(symbol: char) -> [f64; 2] {
    match symbol {
        '0' => [1.0, 0.0],
        '1' => [0.0, 1.0],
        '+' => [FRAC_1_SQRT_2, FRAC_1_SQRT_2],
        '-' => [FRAC_1_SQRT_2, -FRAC_1_SQRT_2],
        _ => panic!("bad ket {symbol}"),
    }
}

/// Product state from one symbol per qubit, leftmost first.
pub fn product(symbols: &str) -> Vec<f64> {
    let mut v = vec![1.0];
    for s in symbols.chars() {
        let k = ket(s);
        v = v.iter().flat_map(|&a| [a * k[0], a * k[1]]).collect();
    }
    v
}

/// `H_2 H_3 |psi_D^(5)>` written term by term, register order
/// `q1 q2 q3 q4 q1D q2D q3D q4D q5`.
pub fn worked_example_rotated_state() -> StateVector {
    // (q1, q2, q1D q2D) pairs
    let a = [("0", "+", "00"), ("1", "-", "11")];
    let b = [("0", "-", "01"), ("1", "+", "10")];
    // bracket X: A |+>_3 |0>_3D + B |->_3 |1>_3D; bracket Y swaps the q3 parts
    let bracket = |swap: bool| -> Vec<(String, String)> {
        let (pa, pb) = if swap { (("-", "1"), ("+", "0")) } else { (("+", "0"), ("-", "1")) };
        let mut terms = Vec::new();
        for (q1, q2, d) in a {
            terms.push((format!("{q1}{q2}{}", pa.0), format!("{d}{}", pa.1)));
        }
        for (q1, q2, d) in b {
            terms.push((format!("{q1}{q2}{}", pb.0), format!("{d}{}", pb.1)));
        }
        terms
    };
    let mut amps = vec![0.0; 1 << 9];
    // q5 = 0: X |0>_4|0>_4D + Y |1>_4|1>_4D ; q5 = 1: X |1>|1> + Y |0>|0>
    for (q5, q4_x) in [('0', '0'), ('1', '1')] {
        let q4_y = if q4_x == '0' { '1' } else { '0' };
        for (swap, q4) in [(false, q4_x), (true, q4_y)] {
            for (front, dups) in bracket(swap) {
                let labels = format!("{front}{q4}{dups}{q4}{q5}");
                for (i, x) in product(&labels).into_iter().enumerate() {
                    amps[i] += 0.25 * x;
                }
            }
        }
    }
    StateVector::from_amplitudes(amps.into_iter().map(|x| C64::new(x, 0.0)).collect()).unwrap()
}
