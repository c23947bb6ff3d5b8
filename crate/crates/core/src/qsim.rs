//! Dense statevector engine.
//!
//! A [`StateVector`] holds the joint pure state of every live qubit. Qubits
//! are addressed by external [`QubitId`] labels; the internal bit position of
//! a label is hidden and survives retirement of other qubits. Basis indices
//! use ket order: the first label in [`StateVector::labels`] is the most
//! significant bit.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

/// Tolerance for unitarity and norm checks.
pub const NORM_TOL: f64 = 1e-10;
/// Forced outcomes below this probability are impossible branches.
pub const IMPOSSIBLE_BRANCH_TOL: f64 = 1e-12;
/// Tolerance for end-to-end fidelity comparisons.
pub const FIDELITY_TOL: f64 = 1e-9;
/// Maximum residual allowed when factoring out a retired qubit.
pub const RETIRE_TOL: f64 = 1e-9;
/// Hard cap on the register size.
pub const MAX_QUBITS: usize = 28;

pub type Amplitude = Complex64;

/// External qubit label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QubitId(pub u32);

impl fmt::Display for QubitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u32> for QubitId {
    fn from(v: u32) -> Self {
        QubitId(v)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QsimError {
    #[error("basis index {index} out of range for {num_qubits} qubits")]
    IndexOutOfRange { index: usize, num_qubits: usize },
    #[error("amplitude vector has length {len}, expected {expected}")]
    BadLength { len: usize, expected: usize },
    #[error("state is not normalized (norm^2 = {norm_sqr})")]
    NotNormalized { norm_sqr: f64 },
    #[error("qubit {0} is already present in the state")]
    DuplicateLabel(QubitId),
    #[error("qubit {0} is not live in the state")]
    UnknownLabel(QubitId),
    #[error("qubit {0} appears both as control and target")]
    LabelCollision(QubitId),
    #[error("controlled gate needs at least one control")]
    EmptyControls,
    #[error("outcome {outcome} on qubit {qubit} has probability {probability:e}")]
    ImpossibleBranch {
        qubit: QubitId,
        outcome: u8,
        probability: f64,
    },
    #[error("outcome must be 0 or 1, got {0}")]
    InvalidOutcome(u8),
    #[error("qubit {qubit} is entangled with the rest of the register (residual {residual:e})")]
    Entangled { qubit: QubitId, residual: f64 },
    #[error("states are defined on different qubit labels")]
    LabelMismatch,
    #[error("matrix is not unitary (deviation {deviation:e})")]
    NotUnitary { deviation: f64 },
    #[error("matrix is not Hermitian and involutory (deviation {deviation:e})")]
    NotHermitianInvolutory { deviation: f64 },
    #[error("register of {0} qubits exceeds the simulator limit")]
    TooManyQubits(usize),
}

pub type Result<T, E = QsimError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateKind {
    HermitianInvolutory,
    Unitary,
    PauliX,
    PauliZ,
    Hadamard,
    Identity,
}

impl GateKind {
    /// Every kind except a general unitary is Hermitian and involutory.
    pub fn is_hermitian_involutory(self) -> bool {
        !matches!(self, GateKind::Unitary)
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            GateKind::HermitianInvolutory => "hermitian_involutory",
            GateKind::Unitary => "unitary",
            GateKind::PauliX => "pauli_x",
            GateKind::PauliZ => "pauli_z",
            GateKind::Hadamard => "hadamard",
            GateKind::Identity => "identity",
        };
        f.write_str(s)
    }
}

pub type Matrix2 = [[Complex64; 2]; 2];

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn mat_mul(a: &Matrix2, b: &Matrix2) -> Matrix2 {
    let mut out = [[Complex64::default(); 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, entry) in row.iter_mut().enumerate() {
            *entry = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn adjoint(a: &Matrix2) -> Matrix2 {
    [
        [a[0][0].conj(), a[1][0].conj()],
        [a[0][1].conj(), a[1][1].conj()],
    ]
}

fn max_deviation(a: &Matrix2, b: &Matrix2) -> f64 {
    let mut dev: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            dev = dev.max((a[i][j] - b[i][j]).norm());
        }
    }
    dev
}

const IDENTITY: Matrix2 = [
    [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
    [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
];

/// A validated single-qubit gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gate1Q {
    matrix: Matrix2,
    kind: GateKind,
}

impl Gate1Q {
    pub fn identity() -> Self {
        Gate1Q {
            matrix: IDENTITY,
            kind: GateKind::Identity,
        }
    }

    pub fn pauli_x() -> Self {
        Gate1Q {
            matrix: [[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]],
            kind: GateKind::PauliX,
        }
    }

    pub fn pauli_z() -> Self {
        Gate1Q {
            matrix: [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]],
            kind: GateKind::PauliZ,
        }
    }

    pub fn hadamard() -> Self {
        let s = FRAC_1_SQRT_2;
        Gate1Q {
            matrix: [[c(s, 0.0), c(s, 0.0)], [c(s, 0.0), c(-s, 0.0)]],
            kind: GateKind::Hadamard,
        }
    }

    /// Accepts any unitary matrix.
    pub fn unitary(matrix: Matrix2) -> Result<Self> {
        let deviation = max_deviation(&mat_mul(&matrix, &adjoint(&matrix)), &IDENTITY);
        if deviation > NORM_TOL {
            return Err(QsimError::NotUnitary { deviation });
        }
        Ok(Gate1Q {
            matrix,
            kind: GateKind::Unitary,
        })
    }

    /// Accepts a matrix that is both Hermitian and unitary.
    pub fn hermitian_involutory(matrix: Matrix2) -> Result<Self> {
        let gate = Self::unitary(matrix)?;
        let deviation = max_deviation(&matrix, &adjoint(&matrix))
            .max(max_deviation(&mat_mul(&matrix, &matrix), &IDENTITY));
        if deviation > NORM_TOL {
            return Err(QsimError::NotHermitianInvolutory { deviation });
        }
        Ok(Gate1Q {
            kind: GateKind::HermitianInvolutory,
            ..gate
        })
    }

    /// Haar-ish random unitary from a normalized complex Gaussian column and
    /// a random relative phase.
    pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut v = [Complex64::default(); 2];
        for a in v.iter_mut() {
            *a = c(rng.sample(StandardNormal), rng.sample(StandardNormal));
        }
        let norm = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
        let (a, b) = (v[0] / norm, v[1] / norm);
        let phase = Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU));
        let matrix = [[a, -b.conj() * phase], [b, a.conj() * phase]];
        Gate1Q {
            matrix,
            kind: GateKind::Unitary,
        }
    }

    /// Random `n·σ` for a uniformly random unit vector `n`.
    pub fn random_hermitian_involutory<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut n = [0.0f64; 3];
        loop {
            for x in n.iter_mut() {
                *x = rng.sample(StandardNormal);
            }
            let len = n.iter().map(|x| x * x).sum::<f64>().sqrt();
            if len > 1e-6 {
                n.iter_mut().for_each(|x| *x /= len);
                break;
            }
        }
        let matrix = [
            [c(n[2], 0.0), c(n[0], -n[1])],
            [c(n[0], n[1]), c(-n[2], 0.0)],
        ];
        Gate1Q {
            matrix,
            kind: GateKind::HermitianInvolutory,
        }
    }

    pub fn matrix(&self) -> &Matrix2 {
        &self.matrix
    }

    pub fn kind(&self) -> GateKind {
        self.kind
    }

    pub fn is_hermitian_involutory(&self) -> bool {
        self.kind.is_hermitian_involutory()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Basis {
    Computational,
    Hadamard,
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Basis::Computational => f.write_str("Z"),
            Basis::Hadamard => f.write_str("X"),
        }
    }
}

/// Outcome of one measurement. Outcome 0 is `|0⟩` or `|+⟩`, 1 is `|1⟩` or `|−⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementRecord {
    pub qubit: QubitId,
    pub basis: Basis,
    pub outcome: u8,
    pub probability: f64,
}

/// Joint pure state of the live qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    labels: Vec<QubitId>,
    amps: Vec<Amplitude>,
}

/// Builds a basis state on labels `1..=num_qubits`.
pub fn new_basis_state(num_qubits: usize, basis_index: usize) -> Result<StateVector> {
    let labels: Vec<QubitId> = (1..=num_qubits as u32).map(QubitId).collect();
    StateVector::basis(&labels, basis_index)
}

fn check_labels(labels: &[QubitId]) -> Result<()> {
    if labels.len() > MAX_QUBITS {
        return Err(QsimError::TooManyQubits(labels.len()));
    }
    for (i, l) in labels.iter().enumerate() {
        if labels[..i].contains(l) {
            return Err(QsimError::DuplicateLabel(*l));
        }
    }
    Ok(())
}

impl StateVector {
    pub fn basis(labels: &[QubitId], basis_index: usize) -> Result<Self> {
        check_labels(labels)?;
        let dim = 1usize << labels.len();
        if basis_index >= dim {
            return Err(QsimError::IndexOutOfRange {
                index: basis_index,
                num_qubits: labels.len(),
            });
        }
        let mut amps = vec![Complex64::default(); dim];
        amps[basis_index] = c(1.0, 0.0);
        Ok(StateVector {
            labels: labels.to_vec(),
            amps,
        })
    }

    /// Amplitudes in ket order of `labels`. Must be normalized.
    pub fn from_amplitudes(labels: &[QubitId], amps: Vec<Amplitude>) -> Result<Self> {
        check_labels(labels)?;
        let expected = 1usize << labels.len();
        if amps.len() != expected {
            return Err(QsimError::BadLength {
                len: amps.len(),
                expected,
            });
        }
        let state = StateVector {
            labels: labels.to_vec(),
            amps,
        };
        let norm_sqr = state.norm_sqr();
        if (norm_sqr - 1.0).abs() > NORM_TOL {
            return Err(QsimError::NotNormalized { norm_sqr });
        }
        Ok(state)
    }

    /// Equal superposition of all basis states.
    pub fn uniform(labels: &[QubitId]) -> Result<Self> {
        check_labels(labels)?;
        let dim = 1usize << labels.len();
        let a = c(1.0 / (dim as f64).sqrt(), 0.0);
        Ok(StateVector {
            labels: labels.to_vec(),
            amps: vec![a; dim],
        })
    }

    /// Normalized complex Gaussian state.
    pub fn random<R: Rng + ?Sized>(labels: &[QubitId], rng: &mut R) -> Result<Self> {
        check_labels(labels)?;
        let dim = 1usize << labels.len();
        let mut amps: Vec<Amplitude> = (0..dim)
            .map(|_| c(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|a| *a /= norm);
        Ok(StateVector {
            labels: labels.to_vec(),
            amps,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[QubitId] {
        &self.labels
    }

    pub fn amplitudes(&self) -> &[Amplitude] {
        &self.amps
    }

    pub fn contains(&self, q: QubitId) -> bool {
        self.labels.contains(&q)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn weight(&self, q: QubitId) -> Result<usize> {
        let pos = self
            .labels
            .iter()
            .position(|&l| l == q)
            .ok_or(QsimError::UnknownLabel(q))?;
        Ok(1usize << (self.labels.len() - 1 - pos))
    }

    /// Amplitude of the basis state given as one bit per label.
    pub fn amplitude_of(&self, bits: &[(QubitId, u8)]) -> Result<Amplitude> {
        if bits.len() != self.labels.len() {
            return Err(QsimError::LabelMismatch);
        }
        let mut index = 0;
        for &(q, b) in bits {
            if b > 1 {
                return Err(QsimError::InvalidOutcome(b));
            }
            if b == 1 {
                index |= self.weight(q)?;
            }
        }
        Ok(self.amps[index])
    }

    /// Adds a qubit in `|0⟩` at the end of the label list.
    pub fn append_zero(&mut self, q: QubitId) -> Result<()> {
        if self.contains(q) {
            return Err(QsimError::DuplicateLabel(q));
        }
        if self.labels.len() + 1 > MAX_QUBITS {
            return Err(QsimError::TooManyQubits(self.labels.len() + 1));
        }
        let mut amps = vec![Complex64::default(); self.amps.len() * 2];
        for (i, a) in self.amps.iter().enumerate() {
            amps[2 * i] = *a;
        }
        self.amps = amps;
        self.labels.push(q);
        Ok(())
    }

    /// Tensors `(|00⟩ + |11⟩)/√2` on `(a, b)` onto the register.
    pub fn append_bell_pair(&mut self, a: QubitId, b: QubitId) -> Result<()> {
        if a == b || self.contains(a) {
            return Err(QsimError::DuplicateLabel(a));
        }
        if self.contains(b) {
            return Err(QsimError::DuplicateLabel(b));
        }
        if self.labels.len() + 2 > MAX_QUBITS {
            return Err(QsimError::TooManyQubits(self.labels.len() + 2));
        }
        let mut amps = vec![Complex64::default(); self.amps.len() * 4];
        for (i, x) in self.amps.iter().enumerate() {
            let v = x * FRAC_1_SQRT_2;
            amps[4 * i] = v;
            amps[4 * i + 3] = v;
        }
        self.amps = amps;
        self.labels.push(a);
        self.labels.push(b);
        Ok(())
    }

    pub fn apply_1q(&mut self, gate: &Gate1Q, q: QubitId) -> Result<()> {
        let w = self.weight(q)?;
        let m = gate.matrix;
        for chunk in self.amps.chunks_mut(2 * w) {
            let (lo, hi) = chunk.split_at_mut(w);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = m[0][0] * x + m[0][1] * y;
                *b = m[1][0] * x + m[1][1] * y;
            }
        }
        Ok(())
    }

    /// Applies `gate` to `target` on the subspace where every control is 1.
    pub fn apply_controlled(
        &mut self,
        gate: &Gate1Q,
        controls: &[QubitId],
        target: QubitId,
    ) -> Result<()> {
        if controls.is_empty() {
            return Err(QsimError::EmptyControls);
        }
        let tw = self.weight(target)?;
        let mut mask = 0usize;
        for (i, &ctl) in controls.iter().enumerate() {
            if ctl == target {
                return Err(QsimError::LabelCollision(ctl));
            }
            if controls[..i].contains(&ctl) {
                return Err(QsimError::DuplicateLabel(ctl));
            }
            mask |= self.weight(ctl)?;
        }
        let m = gate.matrix;
        for (chunk_idx, chunk) in self.amps.chunks_mut(2 * tw).enumerate() {
            let base = chunk_idx * 2 * tw;
            let (lo, hi) = chunk.split_at_mut(tw);
            for (off, (a, b)) in lo.iter_mut().zip(hi.iter_mut()).enumerate() {
                if (base + off) & mask != mask {
                    continue;
                }
                let (x, y) = (*a, *b);
                *a = m[0][0] * x + m[0][1] * y;
                *b = m[1][0] * x + m[1][1] * y;
            }
        }
        Ok(())
    }

    /// Multiplies every amplitude whose `qubits` are all 1 by −1.
    pub fn apply_phase_flip(&mut self, qubits: &[QubitId]) -> Result<()> {
        let mut mask = 0usize;
        for (i, &q) in qubits.iter().enumerate() {
            if qubits[..i].contains(&q) {
                return Err(QsimError::LabelCollision(q));
            }
            mask |= self.weight(q)?;
        }
        for (i, a) in self.amps.iter_mut().enumerate() {
            if i & mask == mask {
                *a = -*a;
            }
        }
        Ok(())
    }

    /// Probability that measuring `q` in `basis` yields `outcome`.
    pub fn outcome_probability(&self, q: QubitId, basis: Basis, outcome: u8) -> Result<f64> {
        if outcome > 1 {
            return Err(QsimError::InvalidOutcome(outcome));
        }
        let w = self.weight(q)?;
        let mut p = 0.0;
        for chunk in self.amps.chunks(2 * w) {
            let (lo, hi) = chunk.split_at(w);
            for (a, b) in lo.iter().zip(hi) {
                p += match (basis, outcome) {
                    (Basis::Computational, 0) => a.norm_sqr(),
                    (Basis::Computational, _) => b.norm_sqr(),
                    (Basis::Hadamard, 0) => (a + b).norm_sqr() * 0.5,
                    (Basis::Hadamard, _) => (a - b).norm_sqr() * 0.5,
                };
            }
        }
        Ok(p)
    }

    /// Projects onto `outcome` and renormalizes.
    pub fn measure_forced(
        &mut self,
        q: QubitId,
        basis: Basis,
        outcome: u8,
    ) -> Result<MeasurementRecord> {
        let probability = self.outcome_probability(q, basis, outcome)?;
        if probability < IMPOSSIBLE_BRANCH_TOL {
            return Err(QsimError::ImpossibleBranch {
                qubit: q,
                outcome,
                probability,
            });
        }
        if basis == Basis::Hadamard {
            self.apply_1q(&Gate1Q::hadamard(), q)?;
        }
        let w = self.weight(q)?;
        let scale = 1.0 / probability.sqrt();
        for chunk in self.amps.chunks_mut(2 * w) {
            let (lo, hi) = chunk.split_at_mut(w);
            let (keep, drop) = if outcome == 0 { (lo, hi) } else { (hi, lo) };
            keep.iter_mut().for_each(|a| *a *= scale);
            drop.iter_mut().for_each(|a| *a = Complex64::default());
        }
        if basis == Basis::Hadamard {
            self.apply_1q(&Gate1Q::hadamard(), q)?;
        }
        Ok(MeasurementRecord {
            qubit: q,
            basis,
            outcome,
            probability,
        })
    }

    /// Draws an outcome from the Born distribution.
    pub fn measure_sampled<R: Rng + ?Sized>(
        &mut self,
        q: QubitId,
        basis: Basis,
        rng: &mut R,
    ) -> Result<MeasurementRecord> {
        let p0 = self.outcome_probability(q, basis, 0)?;
        let u: f64 = rng.random();
        let outcome = if u < p0 { 0 } else { 1 };
        // Guard against a draw landing on a numerically empty branch.
        let outcome = if self.outcome_probability(q, basis, outcome)? < IMPOSSIBLE_BRANCH_TOL {
            1 - outcome
        } else {
            outcome
        };
        self.measure_forced(q, basis, outcome)
    }

    /// Removes `q`, which must be in a product state with the rest.
    pub fn retire_qubit(&mut self, q: QubitId) -> Result<()> {
        let w = self.weight(q)?;
        let half = self.amps.len() / 2;
        let mut zero = Vec::with_capacity(half);
        let mut one = Vec::with_capacity(half);
        for chunk in self.amps.chunks(2 * w) {
            let (lo, hi) = chunk.split_at(w);
            zero.extend_from_slice(lo);
            one.extend_from_slice(hi);
        }
        let n0: f64 = zero.iter().map(|a| a.norm_sqr()).sum();
        let n1: f64 = one.iter().map(|a| a.norm_sqr()).sum();
        let (mut keep, other, keep_norm) = if n0 >= n1 {
            (zero, one, n0)
        } else {
            (one, zero, n1)
        };
        let scale = 1.0 / keep_norm.sqrt();
        keep.iter_mut().for_each(|a| *a *= scale);
        // other = coeff * keep + residual; the qubit factors out iff residual vanishes.
        let coeff: Complex64 = keep.iter().zip(&other).map(|(k, o)| k.conj() * o).sum();
        let residual: f64 = keep
            .iter()
            .zip(&other)
            .map(|(k, o)| (o - coeff * k).norm_sqr())
            .sum();
        if residual > RETIRE_TOL {
            return Err(QsimError::Entangled { qubit: q, residual });
        }
        let pos = self
            .labels
            .iter()
            .position(|&l| l == q)
            .expect("weight found it");
        self.labels.remove(pos);
        self.amps = keep;
        Ok(())
    }

    /// Same state with the labels permuted into `order`.
    pub fn reordered(&self, order: &[QubitId]) -> Result<StateVector> {
        if order.len() != self.labels.len() {
            return Err(QsimError::LabelMismatch);
        }
        let mut weights = Vec::with_capacity(order.len());
        for &q in order {
            weights.push(self.weight(q).map_err(|_| QsimError::LabelMismatch)?);
        }
        check_labels(order)?;
        let n = order.len();
        let mut amps = vec![Complex64::default(); self.amps.len()];
        for (new_index, slot) in amps.iter_mut().enumerate() {
            let mut old_index = 0;
            for (k, w) in weights.iter().enumerate() {
                if new_index >> (n - 1 - k) & 1 == 1 {
                    old_index |= w;
                }
            }
            *slot = self.amps[old_index];
        }
        Ok(StateVector {
            labels: order.to_vec(),
            amps,
        })
    }

    /// `|⟨self|other⟩|²`, matching qubits by label.
    pub fn fidelity_up_to_phase(&self, other: &StateVector) -> Result<f64> {
        let other = if other.labels == self.labels {
            std::borrow::Cow::Borrowed(other)
        } else {
            std::borrow::Cow::Owned(other.reordered(&self.labels)?)
        };
        let overlap: Complex64 = self
            .amps
            .iter()
            .zip(other.amps.iter())
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(overlap.norm_sqr())
    }
}

/// Free-function form of [`StateVector::fidelity_up_to_phase`].
pub fn fidelity_up_to_phase(a: &StateVector, b: &StateVector) -> Result<f64> {
    a.fidelity_up_to_phase(b)
}
