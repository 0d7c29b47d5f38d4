//! The protocol's state family, built by gate application.
//!
//! Register layouts:
//! - `ghz`, `psi`, `psi_tilde` over `n` qubits: position `i` holds protocol qubit `q_{i+1}`.
//! - `psi_d` over `2n - 1` qubits: `[0, n-2]` cipher qubits `q_1..q_{n-1}`,
//!   `[n-1, 2n-3]` their duplicates `q_{1D}..q_{(n-1)D}`, `2n-2` holds `q_n`.
//! - `phi_d` over `2n` qubits: `[0, n-1]` protocol qubits, `[n, 2n-1]` duplicates.

use std::f64::consts::FRAC_1_SQRT_2;

use thiserror::Error;

use crate::qsim::{self, tol, Circuit, GateOp, QsimError, StateVector, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("{family:?} needs n >= {min}, got {n}")]
    TooFewQubits { family: StateFamily, n: usize, min: usize },
    #[error("parity of an empty bit sequence")]
    EmptyBits,
    #[error(transparent)]
    Sim(#[from] QsimError),
}

pub type Result<T> = std::result::Result<T, StateError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StateFamily {
    Ghz,
    Psi,
    PsiTilde,
    PsiD,
    PhiD,
}

impl StateFamily {
    pub fn min_n(self) -> usize {
        match self {
            StateFamily::PsiD => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StateFamilyLabel {
    pub kind: StateFamily,
    pub n: usize,
}

impl StateFamilyLabel {
    pub fn new(kind: StateFamily, n: usize) -> Result<Self> {
        check_n(kind, n)?;
        Ok(Self { kind, n })
    }

    pub fn circuit(&self) -> Result<Circuit> {
        match self.kind {
            StateFamily::Ghz => ghz_circuit(self.n),
            StateFamily::Psi => psi_circuit(self.n),
            StateFamily::PsiTilde => {
                let mut c = psi_circuit(self.n)?;
                c.push(GateOp::PauliX(self.n - 1))?;
                Ok(c)
            }
            StateFamily::PsiD => psi_d_circuit(self.n),
            StateFamily::PhiD => phi_d_circuit(self.n),
        }
    }

    pub fn build(&self) -> Result<StateVector> {
        Ok(self.circuit()?.run()?)
    }
}

fn check_n(family: StateFamily, n: usize) -> Result<()> {
    let min = family.min_n();
    if n < min {
        return Err(StateError::TooFewQubits { family, n, min });
    }
    Ok(())
}

/// Register position of protocol qubit `q_{i+1}` inside `psi_d(n)`.
pub fn psi_d_position(n: usize, i: usize) -> usize {
    if i + 1 == n {
        2 * n - 2
    } else {
        i
    }
}

/// Positions of the cipher qubits `q_1..q_{n-1}` inside `psi_d(n)`.
pub fn cipher_positions(n: usize) -> Vec<usize> {
    (0..n - 1).collect()
}

pub fn duplicate_positions(n: usize) -> Vec<usize> {
    (n - 1..2 * n - 2).collect()
}

/// Position of `q_n` inside `psi_d(n)`.
pub fn last_qubit_position(n: usize) -> usize {
    2 * n - 2
}

fn push_ghz(c: &mut Circuit, positions: &[usize]) -> qsim::Result<()> {
    c.push(GateOp::Hadamard(positions[0]))?;
    for &p in &positions[1..] {
        c.push(GateOp::Cnot { control: positions[0], target: p })?;
    }
    Ok(())
}

fn push_all_hadamards(c: &mut Circuit, positions: &[usize]) -> qsim::Result<()> {
    c.extend(positions.iter().map(|&p| GateOp::Hadamard(p)))
}

pub fn ghz_circuit(n: usize) -> Result<Circuit> {
    check_n(StateFamily::Ghz, n)?;
    let mut c = Circuit::new(n);
    push_ghz(&mut c, &(0..n).collect::<Vec<_>>())?;
    Ok(c)
}

pub fn psi_circuit(n: usize) -> Result<Circuit> {
    check_n(StateFamily::Psi, n)?;
    let positions: Vec<usize> = (0..n).collect();
    let mut c = Circuit::new(n);
    push_ghz(&mut c, &positions)?;
    push_all_hadamards(&mut c, &positions)?;
    Ok(c)
}

/// GHZ preparation, Hadamard layer, then one CNOT copy per cipher qubit.
pub fn psi_d_circuit(n: usize) -> Result<Circuit> {
    check_n(StateFamily::PsiD, n)?;
    let positions: Vec<usize> = (0..n).map(|i| psi_d_position(n, i)).collect();
    let mut c = Circuit::new(2 * n - 1);
    push_ghz(&mut c, &positions)?;
    push_all_hadamards(&mut c, &positions)?;
    for i in 0..n - 1 {
        c.push(GateOp::Cnot { control: i, target: n - 1 + i })?;
    }
    Ok(c)
}

pub fn phi_d_circuit(n: usize) -> Result<Circuit> {
    check_n(StateFamily::PhiD, n)?;
    let positions: Vec<usize> = (0..n).collect();
    let mut c = Circuit::new(2 * n);
    push_ghz(&mut c, &positions)?;
    push_all_hadamards(&mut c, &positions)?;
    for i in 0..n {
        c.push(GateOp::Cnot { control: i, target: n + i })?;
    }
    Ok(c)
}

pub fn ghz(n: usize) -> Result<StateVector> {
    StateFamilyLabel::new(StateFamily::Ghz, n)?.build()
}

pub fn psi(n: usize) -> Result<StateVector> {
    StateFamilyLabel::new(StateFamily::Psi, n)?.build()
}

/// `X` on the last qubit of `psi(n)`.
pub fn psi_tilde(n: usize) -> Result<StateVector> {
    StateFamilyLabel::new(StateFamily::PsiTilde, n)?.build()
}

pub fn psi_d(n: usize) -> Result<StateVector> {
    StateFamilyLabel::new(StateFamily::PsiD, n)?.build()
}

pub fn phi_d(n: usize) -> Result<StateVector> {
    StateFamilyLabel::new(StateFamily::PhiD, n)?.build()
}

pub fn parity(bits: &[u8]) -> Result<u8> {
    if bits.is_empty() {
        return Err(StateError::EmptyBits);
    }
    Ok(bits.iter().fold(0, |acc, b| acc ^ (b & 1)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropertyCheck {
    pub holds: bool,
    pub max_deviation: f64,
}

/// Compares `candidate` (expected to be `psi(n+1)`) with
/// `(psi(n)|0> + psi_tilde(n)|1>) / sqrt(2)`.
pub fn check_property1_against(n: usize, candidate: &StateVector) -> Result<PropertyCheck> {
    let zero = StateVector::basis(1, 0);
    let one = StateVector::basis(1, 1);
    let left = psi(n)?.tensor(&zero);
    let right = psi_tilde(n)?.tensor(&one);
    let amps: Vec<C64> = left
        .amplitudes()
        .iter()
        .zip(right.amplitudes())
        .map(|(a, b)| (a + b) * FRAC_1_SQRT_2)
        .collect();
    let recursion = StateVector::from_amplitudes(amps)?;
    let max_deviation = recursion.max_abs_diff(candidate);
    Ok(PropertyCheck { holds: max_deviation <= tol::STATE, max_deviation })
}

pub fn check_property1(n: usize) -> Result<PropertyCheck> {
    check_property1_against(n, &psi(n + 1)?)
}

/// Supports of `state` and of `X_last state` must be disjoint, cover every
/// basis string, and carry amplitudes of one common magnitude.
pub fn check_support_partition(state: &StateVector) -> Result<PropertyCheck> {
    let n = state.num_qubits();
    let tilde = qsim::apply_gate(state, GateOp::PauliX(n - 1))?;
    let threshold = tol::STATE;
    let a = state.support(threshold);
    let b = tilde.support(threshold);
    let disjoint = a.iter().all(|i| !b.contains(i));
    let covers = a.len() + b.len() == state.dim();
    let reference = (1.0 / state.dim() as f64).sqrt() * std::f64::consts::SQRT_2;
    let max_deviation = a
        .iter()
        .map(|&i| state.amplitude(i).norm())
        .chain(b.iter().map(|&i| tilde.amplitude(i).norm()))
        .map(|m| (m - reference).abs())
        .fold(0.0, f64::max);
    Ok(PropertyCheck { holds: disjoint && covers && max_deviation <= tol::STATE, max_deviation })
}

pub fn check_property2(n: usize) -> Result<bool> {
    Ok(check_support_partition(&psi(n)?)?.holds)
}
