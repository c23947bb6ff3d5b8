//! Ground truth for protocol runs.
//!
//! The oracles apply the desired non-local gate directly to the input
//! state. [`solve_correction`] searches a dictionary of diagonal local
//! operations for the smallest subset that brings a post-measurement state
//! onto the oracle state.

use itertools::Itertools;
use thiserror::Error;

use crate::network::{PartyId, QubitLayout, RootedTree};
use crate::ops::{apply_ops, LocalOp};
use crate::qsim::{Gate1Q, GateKind, QsimError, QubitId, StateVector, FIDELITY_TOL};

/// Dictionaries larger than this are refused; the search is exhaustive.
pub const MAX_DICTIONARY: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error(transparent)]
    Qsim(#[from] QsimError),
    #[error("the controlled-Hermitian oracle needs a Hermitian involutory gate, got {0}")]
    GateKind(GateKind),
    #[error("no dictionary subset reaches the oracle state (best fidelity {best_fidelity})")]
    NoSolution { best_fidelity: f64 },
    #[error("dictionary operation {0} is not diagonal")]
    NotDiagonal(LocalOp),
    #[error("dictionary of {0} operations is too large for exhaustive search")]
    DictionaryTooLarge(usize),
    #[error("party {0} is not part of the layout")]
    UnknownParty(PartyId),
}

pub type Result<T, E = OracleError> = std::result::Result<T, E>;

/// Applies `CH(control → target)` from every control-party input.
pub fn oracle_ch(input: &StateVector, layout: &QubitLayout, gate: &Gate1Q) -> Result<StateVector> {
    oracle_ch_in_order(input, layout, gate, &layout.control_inputs())
}

/// [`oracle_ch`] with an explicit order over the control inputs.
pub fn oracle_ch_in_order(
    input: &StateVector,
    layout: &QubitLayout,
    gate: &Gate1Q,
    order: &[QubitId],
) -> Result<StateVector> {
    if !gate.is_hermitian_involutory() {
        return Err(OracleError::GateKind(gate.kind()));
    }
    let target = layout.target_input();
    let mut out = input.clone();
    for &c in order {
        out.apply_controlled(gate, &[c], target)?;
    }
    Ok(out)
}

/// Applies one gate on the target controlled by every control-party input.
pub fn oracle_cu(input: &StateVector, layout: &QubitLayout, gate: &Gate1Q) -> Result<StateVector> {
    let mut out = input.clone();
    out.apply_controlled(gate, &layout.control_inputs(), layout.target_input())?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Verdict {
    Pass { fidelity: f64 },
    Fail { fidelity: f64 },
}

impl Verdict {
    pub fn is_pass(&self) -> bool {
        matches!(self, Verdict::Pass { .. })
    }

    pub fn fidelity(&self) -> f64 {
        match *self {
            Verdict::Pass { fidelity } | Verdict::Fail { fidelity } => fidelity,
        }
    }
}

pub fn verify_branch(protocol_state: &StateVector, oracle_state: &StateVector) -> Result<Verdict> {
    let fidelity = protocol_state.fidelity_up_to_phase(oracle_state)?;
    Ok(if fidelity >= 1.0 - FIDELITY_TOL {
        Verdict::Pass { fidelity }
    } else {
        Verdict::Fail { fidelity }
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DictionaryEntry {
    pub party: PartyId,
    pub op: LocalOp,
}

/// Candidate corrections. Every entry is diagonal in the computational
/// basis, so any subset can be applied in any order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CorrectionDictionary {
    entries: Vec<DictionaryEntry>,
}

impl CorrectionDictionary {
    pub fn new(mut entries: Vec<DictionaryEntry>) -> Result<Self> {
        if let Some(e) = entries.iter().find(|e| !e.op.is_diagonal()) {
            return Err(OracleError::NotDiagonal(e.op.clone()));
        }
        entries.sort_by(|a, b| {
            (&a.party, a.op.kind_rank(), &a.op).cmp(&(&b.party, b.op.kind_rank(), &b.op))
        });
        Ok(CorrectionDictionary { entries })
    }

    /// `Z` on every control party's input.
    pub fn ch(tree: &RootedTree, layout: &QubitLayout) -> Result<Self> {
        let entries = tree
            .parties()
            .iter()
            .filter(|p| *p != tree.root())
            .map(|p| {
                let q = layout
                    .input(p)
                    .ok_or_else(|| OracleError::UnknownParty(p.clone()))?;
                Ok(DictionaryEntry {
                    party: p.clone(),
                    op: LocalOp::Z(q),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries)
    }

    /// For the parties at `depth`: `Z` on the input, and for each internal
    /// one a `CZ` on the input controlled by its child-shared halves.
    pub fn cu_stage(tree: &RootedTree, layout: &QubitLayout, depth: usize) -> Result<Self> {
        let mut entries = Vec::new();
        for p in tree.parties() {
            if tree.depth(p) != Some(depth) || depth == 0 {
                continue;
            }
            let input = layout
                .input(p)
                .ok_or_else(|| OracleError::UnknownParty(p.clone()))?;
            entries.push(DictionaryEntry {
                party: p.clone(),
                op: LocalOp::Z(input),
            });
            let halves: Vec<QubitId> = layout
                .edges_below(p)
                .iter()
                .map(|e| e.parent_half)
                .collect();
            if !halves.is_empty() {
                entries.push(DictionaryEntry {
                    party: p.clone(),
                    op: LocalOp::Cz {
                        controls: halves,
                        target: input,
                    },
                });
            }
        }
        Self::new(entries)
    }

    /// The depth-one dictionary.
    pub fn cu(tree: &RootedTree, layout: &QubitLayout) -> Result<Self> {
        Self::cu_stage(tree, layout, 1)
    }

    pub fn entries(&self) -> &[DictionaryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Smallest dictionary subset taking `pre_correction` to `oracle_state` up to
/// global phase. Ties go to the lexicographically smallest subset by
/// (party, operation kind). The result is sorted by target qubit.
pub fn solve_correction(
    pre_correction: &StateVector,
    oracle_state: &StateVector,
    dictionary: &CorrectionDictionary,
) -> Result<Vec<LocalOp>> {
    let m = dictionary.len();
    if m > MAX_DICTIONARY {
        return Err(OracleError::DictionaryTooLarge(m));
    }
    // Diagonal operations never use the protocol gate.
    let unused = Gate1Q::identity();
    let mut best_fidelity: f64 = 0.0;
    for k in 0..=m {
        for combo in (0..m).combinations(k) {
            let mut ops: Vec<LocalOp> = combo
                .iter()
                .map(|&i| dictionary.entries[i].op.clone())
                .collect();
            let mut state = pre_correction.clone();
            apply_ops(&ops, &mut state, &unused)?;
            let fidelity = state.fidelity_up_to_phase(oracle_state)?;
            if fidelity >= 1.0 - FIDELITY_TOL {
                ops.sort_by_key(|op| (op.target(), op.kind_rank()));
                return Ok(ops);
            }
            best_fidelity = best_fidelity.max(fidelity);
        }
    }
    Err(OracleError::NoSolution { best_fidelity })
}

/// How an edge half tracks the inputs of the subtree below it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CopyRule {
    /// Holds the XOR of the subtree inputs.
    Parity,
    /// Holds the AND of the subtree inputs.
    Conjunction,
}

/// The oracle state extended with the parent-side halves in `halves`, each
/// holding the value `rule` assigns to the subtree of its edge's child.
/// This is the ideal mid-protocol state against which staged corrections
/// are solved.
pub fn stage_reference(
    oracle_state: &StateVector,
    tree: &RootedTree,
    layout: &QubitLayout,
    halves: &[QubitId],
    rule: CopyRule,
) -> Result<StateVector> {
    let mut out = oracle_state.clone();
    let x = Gate1Q::pauli_x();
    for &half in halves {
        let edge = layout
            .edge_with_parent_half(half)
            .ok_or(QsimError::UnknownLabel(half))?;
        let inputs: Vec<QubitId> = tree
            .subtree(&edge.child)
            .into_iter()
            .map(|p| {
                layout
                    .input(p)
                    .ok_or_else(|| OracleError::UnknownParty(p.clone()))
            })
            .collect::<Result<_>>()?;
        out.append_zero(half)?;
        match rule {
            CopyRule::Conjunction => out.apply_controlled(&x, &inputs, half)?,
            CopyRule::Parity => {
                for q in inputs {
                    out.apply_controlled(&x, &[q], half)?;
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{allocate_layout, Numbering};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn five() -> (RootedTree, QubitLayout) {
        let tree = RootedTree::five_party();
        let layout = allocate_layout(&tree, Numbering::FiveParty).unwrap();
        (tree, layout)
    }

    fn ket(layout: &QubitLayout, index: usize) -> StateVector {
        StateVector::basis(&layout.input_labels(), index).unwrap()
    }

    #[test]
    fn ch_oracle_cases() {
        let (_, layout) = five();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let psi = StateVector::random(&layout.input_labels(), &mut rng).unwrap();
        let out = oracle_ch(&psi, &layout, &Gate1Q::identity()).unwrap();
        assert_eq!(out, psi);

        // Four CNOTs on the target cancel: |11110⟩ is unchanged.
        let input = ket(&layout, 0b11110);
        let out = oracle_ch(&input, &layout, &Gate1Q::pauli_x()).unwrap();
        assert!((out.fidelity_up_to_phase(&input).unwrap() - 1.0).abs() < 1e-12);

        // One active control puts the target in |+⟩.
        let input = ket(&layout, 0b10000);
        let out = oracle_ch(&input, &layout, &Gate1Q::hadamard()).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((out.amplitudes()[0b10000].re - h).abs() < 1e-12);
        assert!((out.amplitudes()[0b10001].re - h).abs() < 1e-12);

        let u = Gate1Q::random_unitary(&mut rng);
        assert_eq!(
            oracle_ch(&input, &layout, &u),
            Err(OracleError::GateKind(GateKind::Unitary))
        );
    }

    #[test]
    fn cu_oracle_cases() {
        let (_, layout) = five();
        let out = oracle_cu(&ket(&layout, 0b11110), &layout, &Gate1Q::pauli_x()).unwrap();
        assert!((out.amplitudes()[0b11111].re - 1.0).abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = Gate1Q::random_unitary(&mut rng);
        let input = ket(&layout, 0b01110);
        assert_eq!(oracle_cu(&input, &layout, &u).unwrap(), input);

        let uniform = StateVector::uniform(&layout.input_labels()).unwrap();
        let out = oracle_cu(&uniform, &layout, &Gate1Q::pauli_z()).unwrap();
        let a = 1.0 / 32f64.sqrt();
        for (i, amp) in out.amplitudes().iter().enumerate() {
            let expected = if i == 31 { -a } else { a };
            assert!((amp.re - expected).abs() < 1e-12 && amp.im.abs() < 1e-12);
        }
    }

    #[test]
    fn ch_oracle_is_order_independent() {
        let (_, layout) = five();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let psi = StateVector::random(&layout.input_labels(), &mut rng).unwrap();
        for gate in [
            Gate1Q::hadamard(),
            Gate1Q::random_hermitian_involutory(&mut rng),
        ] {
            let base = oracle_ch(&psi, &layout, &gate).unwrap();
            for perm in layout.control_inputs().into_iter().permutations(4) {
                let other = oracle_ch_in_order(&psi, &layout, &gate, &perm).unwrap();
                let diff = base
                    .amplitudes()
                    .iter()
                    .zip(other.amplitudes())
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max);
                assert!(diff <= 1e-12);
            }
        }
    }

    #[test]
    fn verdicts() {
        let (_, layout) = five();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let psi = StateVector::random(&layout.input_labels(), &mut rng).unwrap();
        assert!(verify_branch(&psi, &psi).unwrap().is_pass());

        let mut flipped = psi.clone();
        flipped.apply_phase_flip(&[QubitId(3)]).unwrap();
        let v = verify_branch(&flipped, &psi).unwrap();
        assert!(!v.is_pass() && v.fidelity() < 0.999);

        let mut negated = psi.clone();
        negated.apply_1q(&Gate1Q::pauli_z(), QubitId(1)).unwrap();
        negated.apply_1q(&Gate1Q::pauli_x(), QubitId(1)).unwrap();
        negated.apply_1q(&Gate1Q::pauli_z(), QubitId(1)).unwrap();
        negated.apply_1q(&Gate1Q::pauli_x(), QubitId(1)).unwrap();
        // ZXZX = −I
        assert!(verify_branch(&negated, &psi).unwrap().is_pass());
    }

    #[test]
    fn solver_finds_minimal_sets() {
        let (tree, layout) = five();
        let dict = CorrectionDictionary::ch(&tree, &layout).unwrap();
        assert_eq!(dict.len(), 4);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let psi = StateVector::random(&layout.input_labels(), &mut rng).unwrap();
        assert_eq!(solve_correction(&psi, &psi, &dict).unwrap(), vec![]);

        let mut damaged = psi.clone();
        damaged.apply_phase_flip(&[QubitId(9)]).unwrap();
        damaged.apply_phase_flip(&[QubitId(7)]).unwrap();
        assert_eq!(
            solve_correction(&damaged, &psi, &dict).unwrap(),
            vec![LocalOp::Z(QubitId(7)), LocalOp::Z(QubitId(9))]
        );

        // The target's phase is outside the dictionary.
        let mut bad = psi.clone();
        bad.apply_phase_flip(&[QubitId(13)]).unwrap();
        assert!(matches!(
            solve_correction(&bad, &psi, &dict),
            Err(OracleError::NoSolution { .. })
        ));
    }

    #[test]
    fn cu_dictionary_vocabulary() {
        let (tree, layout) = five();
        let dict = CorrectionDictionary::cu(&tree, &layout).unwrap();
        let ops: Vec<String> = dict.entries().iter().map(|e| e.op.to_string()).collect();
        assert_eq!(ops, vec!["Z^7", "CZ^7_{5,6}", "Z^9"]);
        assert!(dict.entries().iter().all(|e| e.op.is_diagonal()));
        assert!(matches!(
            CorrectionDictionary::new(vec![DictionaryEntry {
                party: "T".into(),
                op: LocalOp::X(QubitId(1)),
            }]),
            Err(OracleError::NotDiagonal(_))
        ));
    }

    #[test]
    fn diagonal_entries_commute() {
        let (tree, layout) = five();
        let dict = CorrectionDictionary::cu(&tree, &layout).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut labels = layout.input_labels();
        labels.extend([QubitId(5), QubitId(6)]);
        let psi = StateVector::random(&labels, &mut rng).unwrap();
        let ops: Vec<LocalOp> = dict.entries().iter().map(|e| e.op.clone()).collect();
        let mut reference = psi.clone();
        apply_ops(&ops, &mut reference, &Gate1Q::identity()).unwrap();
        for perm in ops.iter().cloned().permutations(ops.len()) {
            let mut s = psi.clone();
            apply_ops(&perm, &mut s, &Gate1Q::identity()).unwrap();
            assert_eq!(s, reference);
        }
    }

    #[test]
    fn stage_reference_copies_subtree_values() {
        let (tree, layout) = five();
        // Inputs ket order 1,3,7,9,13: S21=1, S22=1, S11=1.
        let input = ket(&layout, 0b11100);
        let r = stage_reference(
            &input,
            &tree,
            &layout,
            &[QubitId(11), QubitId(5)],
            CopyRule::Conjunction,
        )
        .unwrap();
        let bits = [(1, 1), (3, 1), (7, 1), (9, 0), (13, 0), (11, 1), (5, 1)];
        let bits: Vec<(QubitId, u8)> = bits.iter().map(|&(q, b)| (QubitId(q), b)).collect();
        assert!((r.amplitude_of(&bits).unwrap().re - 1.0).abs() < 1e-12);
        let r = stage_reference(&input, &tree, &layout, &[QubitId(11)], CopyRule::Parity).unwrap();
        let bits = [(1, 1), (3, 1), (7, 1), (9, 0), (13, 0), (11, 1)];
        let bits: Vec<(QubitId, u8)> = bits.iter().map(|&(q, b)| (QubitId(q), b)).collect();
        assert!((r.amplitude_of(&bits).unwrap().re - 1.0).abs() < 1e-12);
    }
}
