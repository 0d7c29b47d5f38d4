//! Eavesdropper strategies and the success-probability analysis.
//!
//! Eve sees only the cipher qubits `q_1..q_{n-1}`. Averaged over the uniform
//! key, the cipher-qubit state conditioned on `q_n = 0` is the effective
//! state `rho_e`: an equal mixture, over every even-parity string and every
//! Hadamard key-variant of it, of the corresponding product projector.
//! Equivalently `rho_e = 2^{-(n-2)} sum_even rho(q_1) ⊗ ... ⊗ rho(q_{n-1})`
//! with `rho(0) = (|0><0| + |+><+|)/2` and `rho(1) = (|1><1| + |-><-|)/2`.
//!
//! Eve applies a unitary `U` to the cipher qubits, measures them in the
//! computational basis and guesses `q_n` as the parity of her outcomes. Her
//! key-averaged success is `sum_even <s| U rho_e U† |s>`, which is bounded
//! on both sides by half-sums of the spectrum of `rho_e` (see [`lemma1_check`]).
//! The spectrum has two values, `(1 ± (√2/2)^{n-1}) / 2^{n-1}`, each with
//! multiplicity `2^{n-2}`, giving `P_s ∈ [1/2 - (√2/2)^{n+1}, 1/2 + (√2/2)^{n+1}]`.

use std::f64::consts::{FRAC_1_SQRT_2, LN_2};
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::{
    ChannelHook, EveAction, KeyBits, ProtocolError, RoundEngine, RoundOptions, RoundTranscript,
};
use crate::qsim::{
    self, max_abs_entry, partial_trace, tol, DensityMatrix, QsimError, StateVector, Unitary, C64,
};
use crate::states::{self, StateError};

#[derive(Debug, Error)]
pub enum AdversaryError {
    #[error("n = {n} outside supported range [{min}, {max}]")]
    UnsupportedN { n: usize, min: usize, max: usize },
    #[error("number of rounds must be at least {min}, got {got}")]
    TooFewRounds { min: usize, got: usize },
    #[error("guessed key has {got} bits, expected {expected}")]
    GuessLength { expected: usize, got: usize },
    #[error("attack unitary has dimension {got}, expected {expected}")]
    UnitaryDimension { expected: usize, got: usize },
    #[error("basis subset must hold between 1 and {max} vectors, got {got}")]
    SubsetSize { max: usize, got: usize },
    #[error("unknown strategy {0:?}")]
    UnknownStrategy(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Sim(#[from] QsimError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error("report CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("report JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("report I/O: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, AdversaryError>;

const SQRT2_OVER_2: f64 = FRAC_1_SQRT_2;

fn require_n(n: usize, min: usize, max: usize) -> Result<()> {
    if n < min || n > max {
        return Err(AdversaryError::UnsupportedN { n, min, max });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum AttackStrategy {
    /// Leaves the qubits alone and guesses `q_n` by a fair coin.
    Passive,
    /// Undoes a guessed key, measures, re-applies the guess and forwards.
    GuessKey(KeyBits),
    /// Measures in the computational basis and forwards the collapsed qubits.
    InterceptResendComputational,
    /// [`optimal_attack_unitary`] for the round's `n`.
    OptimalUnitary,
    CustomUnitary(Unitary),
}

impl AttackStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            AttackStrategy::Passive => "passive",
            AttackStrategy::GuessKey(_) => "guess-key",
            AttackStrategy::InterceptResendComputational => "intercept-resend",
            AttackStrategy::OptimalUnitary => "optimal",
            AttackStrategy::CustomUnitary(_) => "custom-unitary",
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            AttackStrategy::GuessKey(k) if k.len() + 1 != n => {
                Err(AdversaryError::GuessLength { expected: n - 1, got: k.len() })
            }
            AttackStrategy::CustomUnitary(u) if u.dimension() != 1 << (n - 1) => {
                Err(AdversaryError::UnitaryDimension { expected: 1 << (n - 1), got: u.dimension() })
            }
            _ => Ok(()),
        }
    }
}

enum EveMode {
    Passive,
    Rotate(KeyBits),
    Computational,
    Unitary { forward: Unitary, back: Unitary },
}

/// A strategy bound to a protocol size, usable as a channel hook.
pub struct Eavesdropper {
    label: &'static str,
    mode: EveMode,
}

impl Eavesdropper {
    pub fn new(strategy: &AttackStrategy, n: usize) -> Result<Self> {
        require_n(n, 3, usize::MAX)?;
        strategy.validate(n)?;
        let mode = match strategy {
            AttackStrategy::Passive => EveMode::Passive,
            AttackStrategy::GuessKey(k) => EveMode::Rotate(k.clone()),
            AttackStrategy::InterceptResendComputational => EveMode::Computational,
            AttackStrategy::OptimalUnitary => {
                let u = optimal_attack_unitary(n)?;
                EveMode::Unitary { back: u.adjoint(), forward: u }
            }
            AttackStrategy::CustomUnitary(u) => EveMode::Unitary { back: u.adjoint(), forward: u.clone() },
        };
        Ok(Self { label: strategy.name(), mode })
    }
}

fn measure_all(
    state: &mut StateVector,
    cipher: &[usize],
    rng: &mut dyn RngCore,
) -> std::result::Result<Vec<u8>, ProtocolError> {
    cipher
        .iter()
        .map(|&p| state.measure_in_place(p, rng).map_err(ProtocolError::from))
        .collect()
}

impl ChannelHook for Eavesdropper {
    fn intercept(
        &mut self,
        state: &mut StateVector,
        cipher: &[usize],
        rng: &mut dyn RngCore,
    ) -> std::result::Result<EveAction, ProtocolError> {
        let (outcomes, guess) = match &self.mode {
            EveMode::Passive => (Vec::new(), rng.gen_range(0..=1u8)),
            EveMode::Computational => {
                let out = measure_all(state, cipher, rng)?;
                let g = states::parity(&out)?;
                (out, g)
            }
            EveMode::Rotate(k) => {
                let rotated = crate::protocol::apply_key_rotation(state, k, cipher)?;
                *state = rotated;
                let out = measure_all(state, cipher, rng)?;
                *state = crate::protocol::apply_key_rotation(state, k, cipher)?;
                let g = states::parity(&out)?;
                (out, g)
            }
            EveMode::Unitary { forward, back } => {
                state.apply_unitary_in_place(forward, cipher)?;
                let out = measure_all(state, cipher, rng)?;
                state.apply_unitary_in_place(back, cipher)?;
                let g = states::parity(&out)?;
                (out, g)
            }
        };
        Ok(EveAction { strategy: self.label.to_string(), outcomes, guess: Some(guess) })
    }
}

/// `P_min` and `P_max` for protocol size `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsBounds {
    pub n: usize,
    pub p_min: f64,
    pub p_max: f64,
}

pub fn ps_bounds(n: usize) -> Result<PsBounds> {
    require_n(n, 3, usize::MAX)?;
    let gap = SQRT2_OVER_2.powi(n as i32 + 1);
    Ok(PsBounds { n, p_min: 0.5 - gap, p_max: 0.5 + gap })
}

/// Reduced state of the cipher qubits of `psi_d(n)` after the key rotation.
pub fn reduced_cipher_state(n: usize, key: &KeyBits) -> Result<DensityMatrix> {
    require_n(n, 3, usize::MAX)?;
    let cipher = states::cipher_positions(n);
    let rotated = crate::protocol::apply_key_rotation(&states::psi_d(n)?, key, &cipher)?;
    Ok(partial_trace(&rotated, &cipher)?)
}

/// Same as [`reduced_cipher_state`] but starting from `psi(n)`, i.e. with no
/// duplicate qubits.
pub fn reduced_cipher_state_without_duplicates(n: usize, key: &KeyBits) -> Result<DensityMatrix> {
    require_n(n, 3, usize::MAX)?;
    let cipher = states::cipher_positions(n);
    let rotated = crate::protocol::apply_key_rotation(&states::psi(n)?, key, &cipher)?;
    Ok(partial_trace(&rotated, &cipher)?)
}

/// Single-qubit key-variant: `|b>` if not rotated, `H|b>` otherwise.
fn variant_vector(bit: u8, rotated: bool) -> [f64; 2] {
    match (bit, rotated) {
        (0, false) => [1.0, 0.0],
        (_, false) => [0.0, 1.0],
        (0, true) => [FRAC_1_SQRT_2, FRAC_1_SQRT_2],
        (_, true) => [FRAC_1_SQRT_2, -FRAC_1_SQRT_2],
    }
}

fn product_vector(factors: &[[f64; 2]]) -> Vec<f64> {
    let mut v = vec![1.0];
    for f in factors {
        v = v.iter().flat_map(|&a| [a * f[0], a * f[1]]).collect();
    }
    v
}

fn even_strings(m: usize) -> impl Iterator<Item = usize> {
    (0..1usize << m).filter(|s| s.count_ones() % 2 == 0)
}

/// `rho_e` by explicit enumeration of every even-parity string and every
/// key-variant projector. Supported for `3 <= n <= 8`.
pub fn rho_e_explicit(n: usize) -> Result<DensityMatrix> {
    require_n(n, 3, 8)?;
    let m = n - 1;
    let dim = 1usize << m;
    let weight = 1.0 / ((1usize << (m - 1)) * (1usize << m)) as f64;
    let mut acc = vec![0.0f64; dim * dim];
    for s in even_strings(m) {
        let bits = qsim::index_bits(s, m);
        for variant in 0..1usize << m {
            let factors: Vec<[f64; 2]> = bits
                .iter()
                .enumerate()
                .map(|(i, &b)| variant_vector(b, qsim::basis_bit(variant, m, i) == 1))
                .collect();
            let v = product_vector(&factors);
            for r in 0..dim {
                if v[r] == 0.0 {
                    continue;
                }
                let vr = v[r] * weight;
                for c in 0..dim {
                    acc[r * dim + c] += vr * v[c];
                }
            }
        }
    }
    let matrix = DMatrix::from_fn(dim, dim, |r, c| C64::new(acc[r * dim + c], 0.0));
    Ok(DensityMatrix::new(matrix)?)
}

/// `rho(0)` or `rho(1)`: equal mixture of `|b>` and `H|b>`.
pub fn single_qubit_rho(bit: u8) -> DMatrix<C64> {
    let mut m = DMatrix::zeros(2, 2);
    for rotated in [false, true] {
        let v = variant_vector(bit, rotated);
        for r in 0..2 {
            for c in 0..2 {
                m[(r, c)] += C64::new(0.5 * v[r] * v[c], 0.0);
            }
        }
    }
    m
}

/// `rho_e` as `2^{-(n-2)} sum_even rho(q_1) ⊗ ... ⊗ rho(q_{n-1})`.
pub fn rho_e_factorized(n: usize) -> Result<DensityMatrix> {
    require_n(n, 3, 12)?;
    let m = n - 1;
    let rho = [single_qubit_rho(0), single_qubit_rho(1)];
    let dim = 1usize << m;
    let mut acc = DMatrix::<C64>::zeros(dim, dim);
    for s in even_strings(m) {
        let mut term = DMatrix::<C64>::identity(1, 1);
        for b in qsim::index_bits(s, m) {
            term = term.kronecker(&rho[b as usize]);
        }
        acc += term;
    }
    acc *= C64::new(1.0 / (1usize << (m - 1)) as f64, 0.0);
    Ok(DensityMatrix::new(acc)?)
}

/// Closed-form spectrum of `rho_e`.
///
/// Eigenvectors are tensor products of `phi1`, `phi2` (the common
/// eigenbasis of `rho(0)` and `rho(1)`); a product with an even number of
/// `phi2` factors has eigenvalue `lambda_high`, odd has `lambda_low`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedEigensystem {
    pub n: usize,
    pub lambda_high: f64,
    pub lambda_low: f64,
    /// Multiplicity of each of the two eigenvalues, `2^{n-2}`.
    pub multiplicity: usize,
    pub phi1: [f64; 2],
    pub phi2: [f64; 2],
}

impl ClosedEigensystem {
    pub fn num_qubits(&self) -> usize {
        self.n - 1
    }

    pub fn eigenvalues_ascending(&self) -> Vec<f64> {
        let mut v = vec![self.lambda_low; self.multiplicity];
        v.extend(std::iter::repeat_n(self.lambda_high, self.multiplicity));
        v
    }

    /// Bit `i` of `index` (qubit order) selects `phi2` for factor `i`.
    pub fn eigenvector(&self, index: usize) -> DVector<C64> {
        let m = self.num_qubits();
        let factors: Vec<[f64; 2]> = (0..m)
            .map(|i| if qsim::basis_bit(index, m, i) == 1 { self.phi2 } else { self.phi1 })
            .collect();
        DVector::from_iterator(1 << m, product_vector(&factors).into_iter().map(|x| C64::new(x, 0.0)))
    }

    pub fn eigenvalue(&self, index: usize) -> f64 {
        if index.count_ones().is_multiple_of(2) {
            self.lambda_high
        } else {
            self.lambda_low
        }
    }

    /// `sum_k lambda_k |psi_k><psi_k|`.
    pub fn reconstruct(&self) -> DMatrix<C64> {
        let dim = 1usize << self.num_qubits();
        let mut acc = DMatrix::<C64>::zeros(dim, dim);
        for k in 0..dim {
            let v = self.eigenvector(k);
            acc += &v * v.adjoint() * C64::new(self.eigenvalue(k), 0.0);
        }
        acc
    }
}

pub fn rho_e_eigensystem_closed(n: usize) -> Result<ClosedEigensystem> {
    require_n(n, 3, usize::MAX)?;
    let s2 = 2f64.sqrt();
    let a = (2.0 + s2).sqrt() / 2.0;
    let b = (2.0 - s2).sqrt() / 2.0;
    // trace-normalized prefactor 1/2^{n-1}
    let scale = 0.5f64.powi(n as i32 - 1);
    let gap = SQRT2_OVER_2.powi(n as i32 - 1);
    Ok(ClosedEigensystem {
        n,
        lambda_high: scale * (1.0 + gap),
        lambda_low: scale * (1.0 - gap),
        multiplicity: 1 << (n - 2),
        phi1: [a, b],
        phi2: [b, -a],
    })
}

/// `(min, max)` of the half-spectrum sums: sum of the lowest and highest
/// `len/2` eigenvalues of an ascending list.
pub fn half_spectrum_sums(ascending: &[f64]) -> (f64, f64) {
    let half = ascending.len() / 2;
    (ascending[..half].iter().sum(), ascending[ascending.len() - half..].iter().sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lemma1Outcome {
    pub lower: f64,
    pub value: f64,
    pub upper: f64,
    pub holds: bool,
}

/// Checks `sum_{i<=k} λ_i <= sum_i <φ_i|H|φ_i> <= sum_{i>N-k} λ_i` for an
/// orthonormal `subset` of size `k`.
pub fn lemma1_check(h: &DMatrix<C64>, subset: &[DVector<C64>]) -> Result<Lemma1Outcome> {
    let eig = qsim::eigensystem(h)?;
    let dim = h.nrows();
    let k = subset.len();
    if k == 0 || k > dim {
        return Err(AdversaryError::SubsetSize { max: dim, got: k });
    }
    if let Some(v) = subset.iter().find(|v| v.len() != dim) {
        return Err(QsimError::DimensionMismatch { expected: dim, got: v.len() }.into());
    }
    let basis = DMatrix::from_columns(subset);
    let gram = basis.adjoint() * &basis;
    let dev = max_abs_entry(&(gram - DMatrix::<C64>::identity(k, k)));
    if dev > tol::UNITARY {
        return Err(QsimError::NotOrthonormal(dev).into());
    }
    let value: f64 = subset.iter().map(|v| (v.adjoint() * h * v)[(0, 0)].re).sum();
    let lower: f64 = eig.values[..k].iter().sum();
    let upper: f64 = eig.values[dim - k..].iter().sum();
    let slack = tol::UNITARY * (1.0 + max_abs_entry(h)) * k as f64;
    Ok(Lemma1Outcome { lower, value, upper, holds: value >= lower - slack && value <= upper + slack })
}

/// Unitary that sends each eigenvector of `rho_e` with an even number of
/// `phi2` factors (the `2^{n-2}` largest eigenvalues) to an even-parity
/// computational string: `U = V^{⊗(n-1)}` with `V phi1 = |0>`, `V phi2 = |1>`.
///
/// Eve applies `U` itself to the cipher qubits and then measures, so her
/// outcome statistics are those of `U rho_e U†`.
pub fn optimal_attack_unitary(n: usize) -> Result<Unitary> {
    let closed = rho_e_eigensystem_closed(n)?;
    let [a, b] = closed.phi1;
    let [c, d] = closed.phi2;
    let v = DMatrix::from_row_slice(2, 2, &[C64::new(a, 0.0), C64::new(b, 0.0), C64::new(c, 0.0), C64::new(d, 0.0)]);
    Ok(Unitary::new(v)?.tensor_power(n - 1))
}

/// `sum_even <s| U rho_e U† |s>`: Eve's key-averaged success probability for
/// attack unitary `u`.
pub fn predicted_success(n: usize, u: &Unitary) -> Result<f64> {
    let rho = rho_e_factorized(n)?;
    let rotated = rho.conjugate(u)?;
    Ok(even_strings(n - 1).map(|s| rotated.matrix()[(s, s)].re).sum())
}

/// Aggregate of a simulated attack campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub strategy: String,
    pub n: usize,
    pub rounds: usize,
    pub successes: usize,
    pub empirical_ps: f64,
    pub bound: PsBounds,
    pub std_error: f64,
    /// Rounds where Bob's decoded bit differs from Alice's.
    pub mismatches: usize,
    pub mismatch_rate: f64,
}

impl AttackReport {
    fn from_counts(strategy: &str, n: usize, rounds: usize, successes: usize, mismatches: usize) -> Result<Self> {
        let p = successes as f64 / rounds as f64;
        Ok(Self {
            strategy: strategy.to_string(),
            n,
            rounds,
            successes,
            empirical_ps: p,
            bound: ps_bounds(n)?,
            std_error: (p * (1.0 - p) / rounds as f64).sqrt(),
            mismatches,
            mismatch_rate: mismatches as f64 / rounds as f64,
        })
    }

    /// Sums the counts of two reports over the same strategy and `n`.
    pub fn merge(&self, other: &AttackReport) -> Result<AttackReport> {
        Self::from_counts(
            &self.strategy,
            self.n,
            self.rounds + other.rounds,
            self.successes + other.successes,
            self.mismatches + other.mismatches,
        )
    }
}

/// Binomial standard deviation of a proportion.
pub fn binomial_sigma(p: f64, trials: usize) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

/// Runs `rounds` Phase-1 rounds, each with a fresh uniform key, with the
/// strategy acting on the cipher qubits in transit. A round succeeds when
/// Eve's guess equals Alice's `q_n`.
pub fn simulate_attack<R: Rng + ?Sized>(
    strategy: &AttackStrategy,
    n: usize,
    rounds: usize,
    rng: &mut R,
) -> Result<AttackReport> {
    Ok(attack_campaign(strategy, n, rounds, false, rng)?.0)
}

/// [`simulate_attack`] that also keeps every round transcript.
pub fn simulate_attack_with_transcripts<R: Rng + ?Sized>(
    strategy: &AttackStrategy,
    n: usize,
    rounds: usize,
    rng: &mut R,
) -> Result<(AttackReport, Vec<RoundTranscript>)> {
    attack_campaign(strategy, n, rounds, true, rng)
}

fn attack_campaign<R: Rng + ?Sized>(
    strategy: &AttackStrategy,
    n: usize,
    rounds: usize,
    keep: bool,
    rng: &mut R,
) -> Result<(AttackReport, Vec<RoundTranscript>)> {
    if rounds == 0 {
        return Err(AdversaryError::TooFewRounds { min: 1, got: 0 });
    }
    let engine = RoundEngine::new(n)?;
    let mut eve = Eavesdropper::new(strategy, n)?;
    let opts = RoundOptions::default();
    let mut successes = 0;
    let mut mismatches = 0;
    let mut kept = Vec::with_capacity(if keep { rounds } else { 0 });
    for j in 0..rounds {
        let key = KeyBits::random(n - 1, rng)?;
        let t = engine.run(j, &key, Some(&mut eve), &opts, rng)?;
        let guess = t.eve_action.as_ref().and_then(|a| a.guess);
        successes += (guess == Some(t.alice_bit)) as usize;
        mismatches += (t.agrees() == Some(false)) as usize;
        if keep {
            kept.push(t);
        }
    }
    let report = AttackReport::from_counts(strategy.name(), n, rounds, successes, mismatches)?;
    Ok((report, kept))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceOutcome {
    /// Largest empirical success over every unitary tried.
    pub max_ps: f64,
    /// Empirical success of the optimal unitary.
    pub optimal_ps: f64,
    /// Empirical success of each Haar-random unitary, in sampling order.
    pub random_ps: Vec<f64>,
    pub bound: PsBounds,
    /// Binomial sigma at `P_max` for `rounds_each` trials.
    pub sigma: f64,
}

/// Simulates `num_unitaries` Haar-random attack unitaries plus the optimal
/// one and reports the best empirical success found.
pub fn brute_force_ps_search<R: Rng + ?Sized>(
    n: usize,
    num_unitaries: usize,
    rounds_each: usize,
    rng: &mut R,
) -> Result<BruteForceOutcome> {
    require_n(n, 3, 4)?;
    if num_unitaries == 0 {
        return Err(AdversaryError::TooFewRounds { min: 1, got: 0 });
    }
    let dim = 1usize << (n - 1);
    let mut random_ps = Vec::with_capacity(num_unitaries);
    for _ in 0..num_unitaries {
        let u = Unitary::haar_random(dim, rng)?;
        random_ps.push(simulate_attack(&AttackStrategy::CustomUnitary(u), n, rounds_each, rng)?.empirical_ps);
    }
    let optimal_ps = simulate_attack(&AttackStrategy::OptimalUnitary, n, rounds_each, rng)?.empirical_ps;
    let max_ps = random_ps.iter().copied().fold(optimal_ps, f64::max);
    let bound = ps_bounds(n)?;
    Ok(BruteForceOutcome { max_ps, optimal_ps, random_ps, bound, sigma: binomial_sigma(bound.p_max, rounds_each) })
}

/// `H_2(p) = -p log2 p - (1-p) log2 (1-p)`.
pub fn binary_entropy(p: f64) -> f64 {
    let term = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.log2() };
    term(p) + term(1.0 - p)
}

/// Eve's per-round information gain `1 - H_2(P_max(n))`, in bits.
pub fn entropy_gain(n: usize) -> Result<f64> {
    Ok(1.0 - binary_entropy(ps_bounds(n)?.p_max))
}

/// Second-order approximation `2^{-n} / ln 2` of [`entropy_gain`].
pub fn entropy_gain_approx(n: usize) -> f64 {
    0.5f64.powi(n as i32) / LN_2
}

#[derive(Debug, Clone, PartialEq)]
pub struct BayesReport {
    pub rounds: usize,
    /// `P(q_n = 0 | parity 0)`.
    pub p_zero_given_even: f64,
    /// `P(q_n = 1 | parity 1)`.
    pub p_one_given_odd: f64,
    /// `P(parity of Eve's outcomes = 0)`.
    pub p_even: f64,
    pub p_qn_zero: f64,
    /// Sigma of the difference between the two conditionals.
    pub sigma_diff: f64,
    pub holds: bool,
}

/// Estimates both conditionals of Eve's parity guess under attack unitary
/// `u` and checks their equality and the two half-marginals within 5 sigma.
pub fn bayes_symmetry_check<R: Rng + ?Sized>(
    n: usize,
    u: &Unitary,
    rounds: usize,
    rng: &mut R,
) -> Result<BayesReport> {
    const MIN_ROUNDS: usize = 10_000;
    if rounds < MIN_ROUNDS {
        return Err(AdversaryError::TooFewRounds { min: MIN_ROUNDS, got: rounds });
    }
    let strategy = AttackStrategy::CustomUnitary(u.clone());
    let (_, transcripts) = simulate_attack_with_transcripts(&strategy, n, rounds, rng)?;
    let (mut even, mut zero_even, mut one_odd, mut qn_zero) = (0usize, 0usize, 0usize, 0usize);
    for t in &transcripts {
        let outcomes = t.eve_action.as_ref().map(|a| a.outcomes.as_slice()).unwrap_or(&[]);
        let par = states::parity(outcomes)?;
        if par == 0 {
            even += 1;
            zero_even += (t.alice_bit == 0) as usize;
        } else {
            one_odd += (t.alice_bit == 1) as usize;
        }
        qn_zero += (t.alice_bit == 0) as usize;
    }
    let odd = rounds - even;
    let c0 = zero_even as f64 / even.max(1) as f64;
    let c1 = one_odd as f64 / odd.max(1) as f64;
    let pooled = (zero_even + one_odd) as f64 / rounds as f64;
    let sigma_diff =
        (pooled * (1.0 - pooled) * (1.0 / even.max(1) as f64 + 1.0 / odd.max(1) as f64)).sqrt();
    let p_even = even as f64 / rounds as f64;
    let p_qn_zero = qn_zero as f64 / rounds as f64;
    let half_sigma = binomial_sigma(0.5, rounds);
    let holds = (c0 - c1).abs() <= 5.0 * sigma_diff.max(f64::EPSILON)
        && (p_even - 0.5).abs() <= 5.0 * half_sigma
        && (p_qn_zero - 0.5).abs() <= 5.0 * half_sigma;
    Ok(BayesReport { rounds, p_zero_given_even: c0, p_one_given_odd: c1, p_even, p_qn_zero, sigma_diff, holds })
}

/// Builds a strategy from its CLI/config name.
pub fn strategy_from_name(name: &str, guess: Option<KeyBits>) -> Result<AttackStrategy> {
    match name {
        "passive" => Ok(AttackStrategy::Passive),
        "intercept-resend" => Ok(AttackStrategy::InterceptResendComputational),
        "optimal" => Ok(AttackStrategy::OptimalUnitary),
        "guess-key" => guess
            .map(AttackStrategy::GuessKey)
            .ok_or_else(|| AdversaryError::UnknownStrategy("guess-key (missing guessed key)".into())),
        other => Err(AdversaryError::UnknownStrategy(other.to_string())),
    }
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct ReportRow {
    strategy: String,
    n: usize,
    rounds: usize,
    empirical_ps: f64,
    p_min: f64,
    p_max: f64,
    std_error: f64,
}

/// CSV with header `strategy,n,rounds,empirical_ps,p_min,p_max,std_error`.
pub fn write_reports_csv<W: Write>(w: W, reports: &[AttackReport]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in reports {
        out.serialize(ReportRow {
            strategy: r.strategy.clone(),
            n: r.n,
            rounds: r.rounds,
            empirical_ps: r.empirical_ps,
            p_min: r.bound.p_min,
            p_max: r.bound.p_max,
            std_error: r.std_error,
        })?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_report_json<W: Write>(mut w: W, report: &AttackReport) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, report)?;
    w.write_all(b"\n")?;
    Ok(())
}
