//! Two-phase protocol engine.
//!
//! Phase 1 runs entangled-state rounds: Alice prepares `psi_d(n)`, rotates
//! the cipher qubits with the reusable key, the cipher qubits cross the
//! channel (where an eavesdropper hook may act), Bob undoes the rotation and
//! decodes `q_n` as the parity of his cipher-qubit outcomes. Phase 2 is a
//! one-time XOR pad over the accumulated `q_n` values.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qsim::{Circuit, GateOp, QsimError, StateVector};
use crate::states::{self, StateError};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("key has {got} bits, expected {expected}")]
    KeyLength { expected: usize, got: usize },
    #[error("invalid bit character {0:?}")]
    InvalidBit(char),
    #[error("invalid hex string {0:?}")]
    InvalidHex(String),
    #[error("hex value {value:?} does not fit in {len} bits")]
    HexOverflow { value: String, len: usize },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("pad has already been used")]
    PadReused,
    #[error("empty bit sequence")]
    EmptyInput,
    #[error("number of rounds must be at least 1")]
    ZeroRounds,
    #[error("n_k = {n_k} out of range for n = {n}")]
    OnesOutOfRange { n: usize, n_k: usize },
    #[error("protocol needs n >= 3, got {0}")]
    TooSmall(usize),
    #[error(transparent)]
    Sim(#[from] QsimError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error("transcript I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("transcript encoding: {0}")]
    Json(#[from] serde_json::Error),
    #[error("channel hook failed: {0}")]
    Hook(String),
}

pub type Result<T> = std::result::Result<T, ProtocolError>;

/// Parses an ASCII `0`/`1` string, most significant bit first.
pub fn parse_bits(s: &str) -> Result<Vec<u8>> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(ProtocolError::InvalidBit(other)),
        })
        .collect()
}

pub fn format_bits(bits: &[u8]) -> String {
    bits.iter().map(|&b| if b == 0 { '0' } else { '1' }).collect()
}

/// Hex value rendered as exactly `len` bits, most significant first.
pub fn bits_from_hex(hex: &str, len: usize) -> Result<Vec<u8>> {
    let digits = hex.trim_start_matches("0x").trim_start_matches("0X");
    if digits.is_empty() {
        return Err(ProtocolError::InvalidHex(hex.to_string()));
    }
    let mut bits = Vec::with_capacity(digits.len() * 4);
    for c in digits.chars() {
        let v = c.to_digit(16).ok_or_else(|| ProtocolError::InvalidHex(hex.to_string()))?;
        bits.extend((0..4).rev().map(|k| ((v >> k) & 1) as u8));
    }
    if bits.len() > len {
        let excess = bits.len() - len;
        if bits[..excess].contains(&1) {
            return Err(ProtocolError::HexOverflow { value: hex.to_string(), len });
        }
        bits.drain(..excess);
    } else {
        let mut padded = vec![0; len - bits.len()];
        padded.extend(bits);
        bits = padded;
    }
    Ok(bits)
}

/// Bit string or `0x`-prefixed hex; hex requires an explicit length.
pub fn parse_bit_arg(s: &str, hex_len: Option<usize>) -> Result<Vec<u8>> {
    if s.starts_with("0x") || s.starts_with("0X") {
        let len = hex_len.ok_or_else(|| ProtocolError::InvalidHex(format!("{s} (hex needs a length)")))?;
        bits_from_hex(s, len)
    } else {
        parse_bits(s)
    }
}

fn check_bits(bits: &[u8]) -> Result<()> {
    match bits.iter().find(|&&b| b > 1) {
        Some(&b) => Err(ProtocolError::InvalidBit(char::from(b'0' + b.min(9)))),
        None => Ok(()),
    }
}

/// The reusable `(n-1)`-bit key shared by Alice and Bob.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct KeyBits(Vec<u8>);

impl KeyBits {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        check_bits(&bits)?;
        if bits.len() < 2 {
            return Err(ProtocolError::KeyLength { expected: 2, got: bits.len() });
        }
        Ok(Self(bits))
    }

    pub fn zeros(len: usize) -> Result<Self> {
        Self::new(vec![0; len])
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Result<Self> {
        Self::new((0..len).map(|_| rng.gen_range(0..=1u8)).collect())
    }

    /// Key whose bits are the binary expansion of `value` (MSB first).
    pub fn from_index(value: usize, len: usize) -> Result<Self> {
        Self::new(crate::qsim::index_bits(value, len))
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of 1 bits.
    pub fn ones(&self) -> usize {
        self.0.iter().filter(|&&b| b == 1).count()
    }

    /// Copy with bit `i` flipped.
    pub fn flipped(&self, i: usize) -> Self {
        let mut bits = self.0.clone();
        bits[i] ^= 1;
        Self(bits)
    }

    fn expect_len(&self, n: usize) -> Result<()> {
        if self.len() + 1 != n {
            return Err(ProtocolError::KeyLength { expected: n.saturating_sub(1), got: self.len() });
        }
        Ok(())
    }
}

impl fmt::Display for KeyBits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_bits(&self.0))
    }
}

impl FromStr for KeyBits {
    type Err = ProtocolError;

    fn from_str(s: &str) -> Result<Self> {
        Self::new(parse_bits(s)?)
    }
}

impl From<KeyBits> for String {
    fn from(k: KeyBits) -> String {
        k.to_string()
    }
}

impl TryFrom<String> for KeyBits {
    type Error = ProtocolError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// One-time pad accumulated from Phase 1. Encrypting consumes it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PadBits {
    bits: Vec<u8>,
    used: bool,
}

impl PadBits {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        check_bits(&bits)?;
        Ok(Self { bits, used: false })
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn is_used(&self) -> bool {
        self.used
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CipherText(pub Vec<u8>);

impl CipherText {
    pub fn bits(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Display for CipherText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_bits(&self.0))
    }
}

fn xor(a: &[u8], b: &[u8]) -> Vec<u8> {
    a.iter().zip(b).map(|(x, y)| x ^ y).collect()
}

/// `c_i = p_i XOR b_i`; marks the pad as used.
pub fn encrypt(plaintext: &[u8], pad: &mut PadBits) -> Result<CipherText> {
    check_bits(plaintext)?;
    if pad.used {
        return Err(ProtocolError::PadReused);
    }
    if plaintext.len() != pad.len() {
        return Err(ProtocolError::LengthMismatch { expected: pad.len(), got: plaintext.len() });
    }
    pad.used = true;
    Ok(CipherText(xor(plaintext, &pad.bits)))
}

pub fn decrypt(ciphertext: &CipherText, pad: &PadBits) -> Result<Vec<u8>> {
    if ciphertext.0.len() != pad.len() {
        return Err(ProtocolError::LengthMismatch { expected: pad.len(), got: ciphertext.0.len() });
    }
    Ok(xor(&ciphertext.0, &pad.bits))
}

/// What an eavesdropper did to one round's cipher qubits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EveAction {
    pub strategy: String,
    pub outcomes: Vec<u8>,
    pub guess: Option<u8>,
}

/// Acts on the cipher qubits while they are in transit (between Alice's
/// and Bob's key rotations). `cipher` lists the register positions of
/// `q_1..q_{n-1}` in order.
pub trait ChannelHook {
    fn intercept(
        &mut self,
        state: &mut StateVector,
        cipher: &[usize],
        rng: &mut dyn RngCore,
    ) -> Result<EveAction>;
}

/// Hadamard on every cipher position whose key bit is 1. Self-inverse.
pub fn apply_key_rotation(
    state: &StateVector,
    key: &KeyBits,
    cipher_positions: &[usize],
) -> Result<StateVector> {
    let mut out = state.clone();
    rotate_in_place(&mut out, key, cipher_positions, None)?;
    Ok(out)
}

fn rotate_in_place(
    state: &mut StateVector,
    key: &KeyBits,
    cipher_positions: &[usize],
    mut log: Option<&mut Circuit>,
) -> Result<()> {
    if key.len() != cipher_positions.len() {
        return Err(ProtocolError::LengthMismatch { expected: cipher_positions.len(), got: key.len() });
    }
    for (&bit, &pos) in key.bits().iter().zip(cipher_positions) {
        if bit == 1 {
            let gate = GateOp::Hadamard(pos);
            state.apply_gate_in_place(gate)?;
            if let Some(log) = log.as_deref_mut() {
                log.push(gate)?;
            }
        }
    }
    Ok(())
}

/// When Alice measures `q_n` within a round.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AliceMeasurement {
    /// Right after the state is prepared, before her key rotation.
    AfterPreparation,
    /// After Bob's inverse rotation, before his measurements.
    #[default]
    AfterBobRotation,
    /// After Bob has measured every cipher qubit.
    AfterBobMeasurement,
}

#[derive(Debug, Clone, Default)]
pub struct RoundOptions {
    pub alice_measurement: AliceMeasurement,
    /// Key Bob uses for his rotation; Alice's key when `None`.
    pub bob_key: Option<KeyBits>,
    /// Projects `q_n` onto this value instead of sampling it.
    pub forced_alice_bit: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundTranscript {
    pub round_index: usize,
    pub key: KeyBits,
    pub alice_bit: u8,
    pub bob_bit: Option<u8>,
    pub cipher_outcomes: Vec<u8>,
    pub eve_action: Option<EveAction>,
}

impl RoundTranscript {
    pub fn agrees(&self) -> Option<bool> {
        self.bob_bit.map(|b| b == self.alice_bit)
    }
}

/// Holds the prepared `psi_d(n)` so repeated rounds only clone it.
#[derive(Debug, Clone)]
pub struct RoundEngine {
    n: usize,
    prepared: StateVector,
    preparation: Circuit,
    cipher: Vec<usize>,
}

impl RoundEngine {
    pub fn new(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(ProtocolError::TooSmall(n));
        }
        let preparation = states::psi_d_circuit(n)?;
        let prepared = preparation.run()?;
        Ok(Self { n, prepared, preparation, cipher: states::cipher_positions(n) })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn prepared(&self) -> &StateVector {
        &self.prepared
    }

    pub fn run<R: Rng + ?Sized>(
        &self,
        round_index: usize,
        key: &KeyBits,
        eve: Option<&mut dyn ChannelHook>,
        opts: &RoundOptions,
        rng: &mut R,
    ) -> Result<RoundTranscript> {
        self.execute(round_index, key, eve, opts, None, rng)
    }

    /// Like [`RoundEngine::run`] but also returns every gate applied by
    /// Alice and Bob (preparation, encryption, decryption).
    pub fn run_logged<R: Rng + ?Sized>(
        &self,
        round_index: usize,
        key: &KeyBits,
        eve: Option<&mut dyn ChannelHook>,
        opts: &RoundOptions,
        rng: &mut R,
    ) -> Result<(RoundTranscript, Circuit)> {
        let mut log = self.preparation.clone();
        let t = self.execute(round_index, key, eve, opts, Some(&mut log), rng)?;
        Ok((t, log))
    }

    fn alice_measure<R: Rng + ?Sized>(
        &self,
        state: &mut StateVector,
        forced: Option<u8>,
        rng: &mut R,
    ) -> Result<u8> {
        let pos = states::last_qubit_position(self.n);
        match forced {
            Some(bit) => {
                state.project_in_place(pos, bit)?;
                Ok(bit)
            }
            None => Ok(state.measure_in_place(pos, rng)?),
        }
    }

    fn execute<R: Rng + ?Sized>(
        &self,
        round_index: usize,
        key: &KeyBits,
        eve: Option<&mut dyn ChannelHook>,
        opts: &RoundOptions,
        mut log: Option<&mut Circuit>,
        rng: &mut R,
    ) -> Result<RoundTranscript> {
        key.expect_len(self.n)?;
        let bob_key = opts.bob_key.as_ref().unwrap_or(key);
        bob_key.expect_len(self.n)?;

        let mut state = self.prepared.clone();
        let mut alice_bit = None;
        if opts.alice_measurement == AliceMeasurement::AfterPreparation {
            alice_bit = Some(self.alice_measure(&mut state, opts.forced_alice_bit, rng)?);
        }

        rotate_in_place(&mut state, key, &self.cipher, log.as_deref_mut())?;

        let eve_action = match eve {
            Some(hook) => {
                let mut as_core = RngAdapter(rng);
                Some(hook.intercept(&mut state, &self.cipher, &mut as_core)?)
            }
            None => None,
        };

        rotate_in_place(&mut state, bob_key, &self.cipher, log)?;

        if opts.alice_measurement == AliceMeasurement::AfterBobRotation {
            alice_bit = Some(self.alice_measure(&mut state, opts.forced_alice_bit, rng)?);
        }

        let mut cipher_outcomes = Vec::with_capacity(self.cipher.len());
        for &pos in &self.cipher {
            cipher_outcomes.push(state.measure_in_place(pos, rng)?);
        }
        let bob_bit = states::parity(&cipher_outcomes)?;

        if opts.alice_measurement == AliceMeasurement::AfterBobMeasurement {
            alice_bit = Some(self.alice_measure(&mut state, opts.forced_alice_bit, rng)?);
        }

        Ok(RoundTranscript {
            round_index,
            key: key.clone(),
            alice_bit: alice_bit.expect("every placement measures q_n"),
            bob_bit: Some(bob_bit),
            cipher_outcomes,
            eve_action,
        })
    }
}

// Lets a generic `Rng + ?Sized` be handed to object-safe hooks.
struct RngAdapter<'a, R: Rng + ?Sized>(&'a mut R);

impl<R: Rng + ?Sized> RngCore for RngAdapter<'_, R> {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.0.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.0.try_fill_bytes(dest)
    }
}

/// One Phase-1 round with default options.
pub fn run_round<R: Rng + ?Sized>(
    n: usize,
    key: &KeyBits,
    eve: Option<&mut dyn ChannelHook>,
    rng: &mut R,
) -> Result<RoundTranscript> {
    RoundEngine::new(n)?.run(0, key, eve, &RoundOptions::default(), rng)
}

#[derive(Debug, Clone, Default)]
pub struct PadOptions {
    pub round: RoundOptions,
    /// Forces Alice's `q_n` outcome in round `j` to `inject[j]`.
    pub inject: Option<Vec<u8>>,
}

#[derive(Debug, Clone)]
pub struct PadRun {
    pub alice: PadBits,
    pub bob: PadBits,
    pub transcripts: Vec<RoundTranscript>,
}

pub fn generate_pad<R: Rng + ?Sized>(
    n: usize,
    key: &KeyBits,
    m: usize,
    eve: Option<&mut dyn ChannelHook>,
    rng: &mut R,
) -> Result<PadRun> {
    generate_pad_with(n, key, m, eve, &PadOptions::default(), rng)
}

pub fn generate_pad_with<R: Rng + ?Sized>(
    n: usize,
    key: &KeyBits,
    m: usize,
    mut eve: Option<&mut dyn ChannelHook>,
    opts: &PadOptions,
    rng: &mut R,
) -> Result<PadRun> {
    if m == 0 {
        return Err(ProtocolError::ZeroRounds);
    }
    if let Some(inject) = &opts.inject {
        if inject.len() != m {
            return Err(ProtocolError::LengthMismatch { expected: m, got: inject.len() });
        }
        check_bits(inject)?;
    }
    let engine = RoundEngine::new(n)?;
    let mut round_opts = opts.round.clone();
    let mut transcripts = Vec::with_capacity(m);
    for j in 0..m {
        if let Some(inject) = &opts.inject {
            round_opts.forced_alice_bit = Some(inject[j]);
        }
        let hook = eve.as_mut().map(|h| &mut **h as &mut dyn ChannelHook);
        transcripts.push(engine.run(j, key, hook, &round_opts, rng)?);
    }
    let alice = PadBits::new(transcripts.iter().map(|t| t.alice_bit).collect())?;
    let bob = PadBits::new(transcripts.iter().map(|t| t.bob_bit.unwrap_or(0)).collect())?;
    Ok(PadRun { alice, bob, transcripts })
}

/// Who answers Alice's authentication challenge.
#[derive(Debug, Clone)]
pub enum Responder {
    /// Holds a key (the right one for genuine Bob).
    KeyHolder(KeyBits),
    /// No key: draws a fresh random rotation guess every round.
    Impersonator,
}

/// Honest code-word authentication: Bob encrypts the code word with his
/// pad, Alice decrypts with hers and compares.
pub fn authenticate<R: Rng + ?Sized>(
    codeword: &[u8],
    n: usize,
    key: &KeyBits,
    rng: &mut R,
) -> Result<bool> {
    authenticate_with(codeword, n, key, &Responder::KeyHolder(key.clone()), None, rng)
}

pub fn authenticate_with<R: Rng + ?Sized>(
    codeword: &[u8],
    n: usize,
    alice_key: &KeyBits,
    responder: &Responder,
    mut eve: Option<&mut dyn ChannelHook>,
    rng: &mut R,
) -> Result<bool> {
    if codeword.is_empty() {
        return Err(ProtocolError::EmptyInput);
    }
    check_bits(codeword)?;
    let engine = RoundEngine::new(n)?;
    let mut alice_bits = Vec::with_capacity(codeword.len());
    let mut responder_bits = Vec::with_capacity(codeword.len());
    for j in 0..codeword.len() {
        let bob_key = match responder {
            Responder::KeyHolder(k) => k.clone(),
            Responder::Impersonator => KeyBits::random(n - 1, rng)?,
        };
        let opts = RoundOptions { bob_key: Some(bob_key), ..RoundOptions::default() };
        let hook = eve.as_mut().map(|h| &mut **h as &mut dyn ChannelHook);
        let t = engine.run(j, alice_key, hook, &opts, rng)?;
        alice_bits.push(t.alice_bit);
        responder_bits.push(t.bob_bit.unwrap_or(0));
    }
    let mut responder_pad = PadBits::new(responder_bits)?;
    let alice_pad = PadBits::new(alice_bits)?;
    let sent = encrypt(codeword, &mut responder_pad)?;
    Ok(decrypt(&sent, &alice_pad)? == codeword)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceCounts {
    pub qubits: usize,
    pub cnots: usize,
    pub hadamards: usize,
}

/// Closed-form circuit size for key length `n - 1` with `n_k` ones.
pub fn circuit_resources(n: usize, n_k: usize) -> Result<ResourceCounts> {
    if n < 3 {
        return Err(ProtocolError::TooSmall(n));
    }
    if n_k > n - 1 {
        return Err(ProtocolError::OnesOutOfRange { n, n_k });
    }
    Ok(ResourceCounts { qubits: 2 * n - 1, cnots: 2 * n - 2, hadamards: n + 2 * n_k + 1 })
}

/// Counts the gates actually emitted by one honest round.
pub fn instrumented_resources<R: Rng + ?Sized>(
    n: usize,
    key: &KeyBits,
    rng: &mut R,
) -> Result<ResourceCounts> {
    let engine = RoundEngine::new(n)?;
    let (_, log) = engine.run_logged(0, key, None, &RoundOptions::default(), rng)?;
    let counts = log.counts();
    Ok(ResourceCounts { qubits: log.num_qubits(), cnots: counts.cnot, hadamards: counts.hadamard })
}

/// One JSON object per line.
pub fn write_transcripts_jsonl<W: Write>(mut w: W, transcripts: &[RoundTranscript]) -> Result<()> {
    for t in transcripts {
        serde_json::to_writer(&mut w, t)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_transcripts_jsonl<B: BufRead>(r: B) -> Result<Vec<RoundTranscript>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}
