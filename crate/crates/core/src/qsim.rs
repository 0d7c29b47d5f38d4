//! Dense state-vector engine.
//!
//! Qubit ordering: qubit 0 is the leftmost label in ket notation. In a basis
//! index over `q` qubits, qubit `i` is stored in bit `q - 1 - i`, so `|q0 q1 .. q_{q-1}>`
//! reads as the binary expansion of the index, most significant bit first.
//! For example `|011>` over three qubits is index 3.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

pub type C64 = Complex64;

/// Numerical tolerances shared by the whole crate.
pub mod tol {
    /// State identities: norms, amplitude comparisons, density-matrix checks.
    pub const STATE: f64 = 1e-10;
    /// Unitarity, orthonormality of eigenvectors and basis subsets.
    pub const UNITARY: f64 = 1e-9;
    /// Accepted asymmetry of a matrix handed to the eigensolver.
    pub const HERMITIAN_INPUT: f64 = 1e-9;
    /// Eigendecomposition reconstruction error.
    pub const RECONSTRUCTION: f64 = 1e-8;
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QsimError {
    #[error("qubit index {index} out of range for {num_qubits} qubits")]
    QubitOutOfRange { index: usize, num_qubits: usize },
    #[error("CNOT control equals target ({0})")]
    ControlEqualsTarget(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("duplicate qubit {0} in target list")]
    DuplicateTarget(usize),
    #[error("empty qubit subset")]
    EmptySubsystem,
    #[error("state is not normalized (norm^2 = {0})")]
    NotNormalized(f64),
    #[error("measurement branch has zero probability")]
    ZeroProbabilityBranch,
    #[error("matrix is not Hermitian (max asymmetry {0:e})")]
    NotHermitian(f64),
    #[error("matrix is not unitary (max deviation {0:e})")]
    NotUnitary(f64),
    #[error("vectors are not orthonormal (max deviation {0:e})")]
    NotOrthonormal(f64),
    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),
    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),
}

pub type Result<T> = std::result::Result<T, QsimError>;

#[inline]
fn mask(num_qubits: usize, qubit: usize) -> usize {
    1 << (num_qubits - 1 - qubit)
}

fn check_index(num_qubits: usize, index: usize) -> Result<()> {
    if index >= num_qubits {
        return Err(QsimError::QubitOutOfRange { index, num_qubits });
    }
    Ok(())
}

fn log2_exact(len: usize) -> Result<usize> {
    if len == 0 || !len.is_power_of_two() {
        return Err(QsimError::NotPowerOfTwo(len));
    }
    Ok(len.trailing_zeros() as usize)
}

/// Bit of `qubit` inside basis index `index` over `num_qubits` qubits.
pub fn basis_bit(index: usize, num_qubits: usize, qubit: usize) -> u8 {
    ((index & mask(num_qubits, qubit)) != 0) as u8
}

/// Basis index of a bit string, most significant (qubit 0) first.
pub fn basis_index(bits: &[u8]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | (b & 1) as usize)
}

/// Bits of a basis index, qubit 0 first.
pub fn index_bits(index: usize, num_qubits: usize) -> Vec<u8> {
    (0..num_qubits).map(|q| basis_bit(index, num_qubits, q)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateOp {
    Hadamard(usize),
    PauliX(usize),
    Cnot { control: usize, target: usize },
}

impl GateOp {
    pub fn validate(&self, num_qubits: usize) -> Result<()> {
        match *self {
            GateOp::Hadamard(t) | GateOp::PauliX(t) => check_index(num_qubits, t),
            GateOp::Cnot { control, target } => {
                check_index(num_qubits, control)?;
                check_index(num_qubits, target)?;
                if control == target {
                    return Err(QsimError::ControlEqualsTarget(control));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amplitudes: Vec<C64>,
}

impl StateVector {
    /// `|0...0>` over `num_qubits` qubits.
    pub fn zero(num_qubits: usize) -> Self {
        Self::basis(num_qubits, 0)
    }

    pub fn basis(num_qubits: usize, index: usize) -> Self {
        let mut amplitudes = vec![C64::new(0.0, 0.0); 1 << num_qubits];
        amplitudes[index] = C64::new(1.0, 0.0);
        Self { num_qubits, amplitudes }
    }

    /// Builds a state from raw amplitudes; the length must be a power of two
    /// and the squared norm must be 1 within [`tol::STATE`].
    pub fn from_amplitudes(amplitudes: Vec<C64>) -> Result<Self> {
        let num_qubits = log2_exact(amplitudes.len())?;
        let state = Self { num_qubits, amplitudes };
        let norm = state.norm_sqr();
        if (norm - 1.0).abs() > tol::STATE {
            return Err(QsimError::NotNormalized(norm));
        }
        Ok(state)
    }

    /// Like [`StateVector::from_amplitudes`] but rescales to unit norm first.
    pub fn from_unnormalized(mut amplitudes: Vec<C64>) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if norm <= 0.0 {
            return Err(QsimError::NotNormalized(norm));
        }
        let scale = 1.0 / norm.sqrt();
        amplitudes.iter_mut().for_each(|a| *a *= scale);
        Self::from_amplitudes(amplitudes)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, index: usize) -> C64 {
        self.amplitudes[index]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probability(&self, index: usize) -> f64 {
        self.amplitudes[index].norm_sqr()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(QsimError::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Largest entrywise amplitude difference; infinite on dimension mismatch.
    pub fn max_abs_diff(&self, other: &StateVector) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `self ⊗ other`; qubits of `other` are appended to the right.
    pub fn tensor(&self, other: &StateVector) -> StateVector {
        let mut amplitudes = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amplitudes {
            for b in &other.amplitudes {
                amplitudes.push(a * b);
            }
        }
        StateVector { num_qubits: self.num_qubits + other.num_qubits, amplitudes }
    }

    /// Indices of basis states whose amplitude magnitude exceeds `threshold`.
    pub fn support(&self, threshold: f64) -> Vec<usize> {
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm() > threshold)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn apply_gate_in_place(&mut self, gate: GateOp) -> Result<()> {
        gate.validate(self.num_qubits)?;
        let n = self.num_qubits;
        let amps = &mut self.amplitudes;
        match gate {
            GateOp::Hadamard(t) => {
                let m = mask(n, t);
                for i in 0..amps.len() {
                    if i & m == 0 {
                        let a = amps[i];
                        let b = amps[i | m];
                        amps[i] = (a + b) * FRAC_1_SQRT_2;
                        amps[i | m] = (a - b) * FRAC_1_SQRT_2;
                    }
                }
            }
            GateOp::PauliX(t) => {
                let m = mask(n, t);
                for i in 0..amps.len() {
                    if i & m == 0 {
                        amps.swap(i, i | m);
                    }
                }
            }
            GateOp::Cnot { control, target } => {
                let mc = mask(n, control);
                let mt = mask(n, target);
                for i in 0..amps.len() {
                    if i & mc != 0 && i & mt == 0 {
                        amps.swap(i, i | mt);
                    }
                }
            }
        }
        Ok(())
    }

    pub fn apply_unitary_in_place(&mut self, u: &Unitary, targets: &[usize]) -> Result<()> {
        let k = targets.len();
        if k == 0 {
            return Err(QsimError::EmptySubsystem);
        }
        let sub_dim = 1usize << k;
        if u.dimension() != sub_dim {
            return Err(QsimError::DimensionMismatch { expected: sub_dim, got: u.dimension() });
        }
        for (j, &t) in targets.iter().enumerate() {
            check_index(self.num_qubits, t)?;
            if targets[..j].contains(&t) {
                return Err(QsimError::DuplicateTarget(t));
            }
        }
        let n = self.num_qubits;
        let target_masks: Vec<usize> = targets.iter().map(|&t| mask(n, t)).collect();
        let all_targets: usize = target_masks.iter().sum();
        // offsets[s]: displacement of sub-basis state s (targets[0] most significant)
        let offsets: Vec<usize> = (0..sub_dim)
            .map(|s| {
                target_masks
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| s & (1 << (k - 1 - j)) != 0)
                    .map(|(_, m)| m)
                    .sum()
            })
            .collect();
        let m = u.matrix();
        let mut gathered = vec![C64::new(0.0, 0.0); sub_dim];
        for base in 0..self.amplitudes.len() {
            if base & all_targets != 0 {
                continue;
            }
            for (s, off) in offsets.iter().enumerate() {
                gathered[s] = self.amplitudes[base + off];
            }
            for (r, off) in offsets.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for (c, g) in gathered.iter().enumerate() {
                    acc += m[(r, c)] * g;
                }
                self.amplitudes[base + off] = acc;
            }
        }
        Ok(())
    }

    /// Probability that `index` reads 1.
    pub fn prob_one(&self, index: usize) -> Result<f64> {
        check_index(self.num_qubits, index)?;
        let m = mask(self.num_qubits, index);
        Ok(self
            .amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| i & m != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    /// Projects `index` onto `bit` and renormalizes.
    pub fn project_in_place(&mut self, index: usize, bit: u8) -> Result<()> {
        let p1 = self.prob_one(index)?;
        let p = if bit == 1 { p1 } else { 1.0 - p1 };
        if p <= 1e-15 {
            return Err(QsimError::ZeroProbabilityBranch);
        }
        let m = mask(self.num_qubits, index);
        let scale = 1.0 / p.sqrt();
        for (i, a) in self.amplitudes.iter_mut().enumerate() {
            if ((i & m != 0) as u8) == bit {
                *a *= scale;
            } else {
                *a = C64::new(0.0, 0.0);
            }
        }
        Ok(())
    }

    /// Computational-basis measurement with eager collapse.
    pub fn measure_in_place<R: Rng + ?Sized>(&mut self, index: usize, rng: &mut R) -> Result<u8> {
        let norm = self.norm_sqr();
        if (norm - 1.0).abs() > tol::STATE {
            return Err(QsimError::NotNormalized(norm));
        }
        let p1 = self.prob_one(index)?;
        let bit = (rng.gen::<f64>() < p1) as u8;
        self.project_in_place(index, bit)?;
        Ok(bit)
    }
}

/// Ordered gate list over a fixed register.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Circuit {
    num_qubits: usize,
    gates: Vec<GateOp>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GateCounts {
    pub hadamard: usize,
    pub pauli_x: usize,
    pub cnot: usize,
}

impl Circuit {
    pub fn new(num_qubits: usize) -> Self {
        Self { num_qubits, gates: Vec::new() }
    }

    pub fn push(&mut self, gate: GateOp) -> Result<()> {
        gate.validate(self.num_qubits)?;
        self.gates.push(gate);
        Ok(())
    }

    pub fn extend(&mut self, gates: impl IntoIterator<Item = GateOp>) -> Result<()> {
        gates.into_iter().try_for_each(|g| self.push(g))
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn gates(&self) -> &[GateOp] {
        &self.gates
    }

    pub fn counts(&self) -> GateCounts {
        let mut c = GateCounts::default();
        for g in &self.gates {
            match g {
                GateOp::Hadamard(_) => c.hadamard += 1,
                GateOp::PauliX(_) => c.pauli_x += 1,
                GateOp::Cnot { .. } => c.cnot += 1,
            }
        }
        c
    }

    pub fn apply_to(&self, state: &mut StateVector) -> Result<()> {
        if state.num_qubits() != self.num_qubits {
            return Err(QsimError::DimensionMismatch { expected: self.num_qubits, got: state.num_qubits() });
        }
        self.gates.iter().try_for_each(|&g| state.apply_gate_in_place(g))
    }

    /// Runs the circuit on `|0...0>`.
    pub fn run(&self) -> Result<StateVector> {
        let mut s = StateVector::zero(self.num_qubits);
        self.apply_to(&mut s)?;
        Ok(s)
    }
}

pub fn apply_gate(state: &StateVector, gate: GateOp) -> Result<StateVector> {
    let mut out = state.clone();
    out.apply_gate_in_place(gate)?;
    Ok(out)
}

pub fn apply_unitary_on_subset(
    state: &StateVector,
    u: &Unitary,
    targets: &[usize],
) -> Result<StateVector> {
    let mut out = state.clone();
    out.apply_unitary_in_place(u, targets)?;
    Ok(out)
}

pub fn measure_qubit<R: Rng + ?Sized>(
    state: &StateVector,
    index: usize,
    rng: &mut R,
) -> Result<(u8, StateVector)> {
    let mut out = state.clone();
    let bit = out.measure_in_place(index, rng)?;
    Ok((bit, out))
}

/// Square unitary matrix acting on `log2(dimension)` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct Unitary {
    matrix: DMatrix<C64>,
}

impl Unitary {
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(QsimError::DimensionMismatch { expected: matrix.nrows(), got: matrix.ncols() });
        }
        log2_exact(matrix.nrows())?;
        let dev = unitarity_deviation(&matrix);
        if dev > tol::UNITARY {
            return Err(QsimError::NotUnitary(dev));
        }
        Ok(Self { matrix })
    }

    pub fn identity(dimension: usize) -> Result<Self> {
        Self::new(DMatrix::identity(dimension, dimension))
    }

    pub fn hadamard() -> Self {
        let h = C64::new(FRAC_1_SQRT_2, 0.0);
        Self { matrix: DMatrix::from_row_slice(2, 2, &[h, h, h, -h]) }
    }

    /// `self ⊗ self ⊗ ...` (`count` factors).
    pub fn tensor_power(&self, count: usize) -> Self {
        let mut m = DMatrix::identity(1, 1);
        for _ in 0..count {
            m = m.kronecker(&self.matrix);
        }
        Self { matrix: m }
    }

    pub fn kron(&self, other: &Unitary) -> Self {
        Self { matrix: self.matrix.kronecker(&other.matrix) }
    }

    pub fn adjoint(&self) -> Self {
        Self { matrix: self.matrix.adjoint() }
    }

    /// Haar-distributed unitary: QR of a complex Ginibre matrix with the
    /// phases of `R`'s diagonal moved into `Q`.
    pub fn haar_random<R: Rng + ?Sized>(dimension: usize, rng: &mut R) -> Result<Self> {
        log2_exact(dimension)?;
        let g = DMatrix::from_fn(dimension, dimension, |_, _| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            C64::new(re, im) * FRAC_1_SQRT_2
        });
        let qr = g.qr();
        let mut q = qr.q();
        let r = qr.r();
        for j in 0..dimension {
            let d = r[(j, j)];
            let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
            for i in 0..dimension {
                q[(i, j)] *= phase;
            }
        }
        Self::new(q)
    }

    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn num_qubits(&self) -> usize {
        self.dimension().trailing_zeros() as usize
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }
}

/// `(G + G†)/2` for a complex Ginibre matrix `G`; any dimension.
pub fn random_hermitian<R: Rng + ?Sized>(dimension: usize, rng: &mut R) -> DMatrix<C64> {
    let g = DMatrix::from_fn(dimension, dimension, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    (&g + g.adjoint()) * C64::new(0.5, 0.0)
}

/// `k` random orthonormal vectors in `C^dimension` (Gram-Schmidt via QR of
/// a Ginibre `dimension x k` matrix). Requires `1 <= k <= dimension`.
pub fn random_orthonormal<R: Rng + ?Sized>(dimension: usize, k: usize, rng: &mut R) -> Result<Vec<DVector<C64>>> {
    if k == 0 || k > dimension {
        return Err(QsimError::DimensionMismatch { expected: dimension, got: k });
    }
    let g = DMatrix::from_fn(dimension, k, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let q = g.qr().q();
    Ok((0..k).map(|j| q.column(j).into_owned()).collect())
}

/// `max |U U† - I|` entrywise.
pub fn unitarity_deviation(m: &DMatrix<C64>) -> f64 {
    let prod = m * m.adjoint();
    let id = DMatrix::<C64>::identity(m.nrows(), m.ncols());
    max_abs_entry(&(prod - id))
}

pub fn max_abs_entry(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn hermitian_deviation(m: &DMatrix<C64>) -> f64 {
    if m.nrows() != m.ncols() {
        return f64::INFINITY;
    }
    max_abs_entry(&(m - m.adjoint()))
}

/// Hermitian, PSD, unit-trace matrix over `num_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    num_qubits: usize,
    matrix: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(QsimError::DimensionMismatch { expected: matrix.nrows(), got: matrix.ncols() });
        }
        let num_qubits = log2_exact(matrix.nrows())?;
        let herm = hermitian_deviation(&matrix);
        if herm > tol::STATE {
            return Err(QsimError::NotHermitian(herm));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > tol::STATE || tr.im.abs() > tol::STATE {
            return Err(QsimError::InvalidDensityMatrix(format!("trace {tr}")));
        }
        let eig = eigensystem(&matrix)?;
        if let Some(&lo) = eig.values.first() {
            if lo < -tol::STATE {
                return Err(QsimError::InvalidDensityMatrix(format!("negative eigenvalue {lo:e}")));
            }
        }
        Ok(Self { num_qubits, matrix })
    }

    pub fn from_pure(state: &StateVector) -> Self {
        let v = DVector::from_column_slice(state.amplitudes());
        Self { num_qubits: state.num_qubits(), matrix: &v * v.adjoint() }
    }

    /// `I / 2^num_qubits`.
    pub fn maximally_mixed(num_qubits: usize) -> Self {
        let d = 1usize << num_qubits;
        let matrix = DMatrix::identity(d, d) * C64::new(1.0 / d as f64, 0.0);
        Self { num_qubits, matrix }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        max_abs_entry(&(&self.matrix - &other.matrix))
    }

    /// `U ρ U†`; `u` must act on all qubits of the state.
    pub fn conjugate(&self, u: &Unitary) -> Result<DensityMatrix> {
        if u.dimension() != self.dim() {
            return Err(QsimError::DimensionMismatch { expected: self.dim(), got: u.dimension() });
        }
        let matrix = u.matrix() * &self.matrix * u.matrix().adjoint();
        Ok(Self { num_qubits: self.num_qubits, matrix })
    }
}

/// Reduced state of the `keep` qubits; the result's qubit `j` is `keep[j]`.
pub fn partial_trace(state: &StateVector, keep: &[usize]) -> Result<DensityMatrix> {
    if keep.is_empty() {
        return Err(QsimError::EmptySubsystem);
    }
    let n = state.num_qubits();
    for (j, &q) in keep.iter().enumerate() {
        check_index(n, q)?;
        if keep[..j].contains(&q) {
            return Err(QsimError::DuplicateTarget(q));
        }
    }
    let traced: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
    let keep_dim = 1usize << keep.len();
    let env_dim = 1usize << traced.len();
    // rows: kept subsystem, columns: environment
    let mut a = DMatrix::<C64>::zeros(keep_dim, env_dim);
    for (i, amp) in state.amplitudes().iter().enumerate() {
        let k = keep.iter().fold(0, |acc, &q| (acc << 1) | basis_bit(i, n, q) as usize);
        let e = traced.iter().fold(0, |acc, &q| (acc << 1) | basis_bit(i, n, q) as usize);
        a[(k, e)] = *amp;
    }
    let matrix = &a * a.adjoint();
    Ok(DensityMatrix { num_qubits: keep.len(), matrix })
}

/// Eigenvalues in ascending order with the matching orthonormal eigenvectors
/// as columns of `vectors`.
#[derive(Debug, Clone)]
pub struct Eigensystem {
    pub values: Vec<f64>,
    pub vectors: DMatrix<C64>,
}

impl Eigensystem {
    pub fn reconstruct(&self) -> DMatrix<C64> {
        let d = DMatrix::from_diagonal(&DVector::from_iterator(
            self.values.len(),
            self.values.iter().map(|&v| C64::new(v, 0.0)),
        ));
        &self.vectors * d * self.vectors.adjoint()
    }

    pub fn vector(&self, i: usize) -> DVector<C64> {
        self.vectors.column(i).into_owned()
    }
}

pub fn eigensystem(m: &DMatrix<C64>) -> Result<Eigensystem> {
    let dev = hermitian_deviation(m);
    if dev > tol::HERMITIAN_INPUT {
        return Err(QsimError::NotHermitian(dev));
    }
    let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(Eigensystem { values, vectors })
}
