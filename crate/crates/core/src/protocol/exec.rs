use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::transcript::{Event, Transcript};
use super::{
    Action, Correction, ProtocolError, ProtocolKind, ProtocolSchedule, ProtocolStep, Result,
};
use crate::network::PartyId;
use crate::ops::{apply_ops, LocalOp};
use crate::qsim::{Gate1Q, QubitId, StateVector, IMPOSSIBLE_BRANCH_TOL};

/// Outcome bit per measured qubit.
pub type OutcomeAssignment = BTreeMap<QubitId, u8>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OutcomePolicy {
    Forced(OutcomeAssignment),
    /// Born-rule sampling from a seeded generator.
    Sampled(u64),
}

/// Where measurement outcomes come from while a run advances.
#[derive(Debug, Clone)]
pub enum OutcomeSource {
    Forced(OutcomeAssignment),
    Sampled(Box<ChaCha8Rng>),
}

impl From<&OutcomePolicy> for OutcomeSource {
    fn from(policy: &OutcomePolicy) -> Self {
        match policy {
            OutcomePolicy::Forced(a) => OutcomeSource::Forced(a.clone()),
            OutcomePolicy::Sampled(seed) => {
                OutcomeSource::Sampled(Box::new(ChaCha8Rng::seed_from_u64(*seed)))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExecOptions {
    /// Drop each qubit from the register right after it is measured.
    pub retire_measured: bool,
}

impl Default for ExecOptions {
    fn default() -> Self {
        ExecOptions {
            retire_measured: true,
        }
    }
}

/// A run in progress. Cloning forks the run, which is how branches are
/// explored.
#[derive(Debug, Clone)]
pub struct Execution<'a> {
    schedule: &'a ProtocolSchedule,
    gate: Gate1Q,
    options: ExecOptions,
    state: StateVector,
    cursor: usize,
    outcomes: OutcomeAssignment,
    inbox: BTreeMap<PartyId, OutcomeAssignment>,
    overrides: BTreeMap<(usize, PartyId), Vec<LocalOp>>,
    probability: f64,
    transcript: Transcript,
}

impl<'a> Execution<'a> {
    /// Checks the gate and input, then shares one Bell pair per tree edge.
    pub fn new(
        schedule: &'a ProtocolSchedule,
        input: &StateVector,
        gate: &Gate1Q,
        options: ExecOptions,
    ) -> Result<Self> {
        let kind = schedule.kind();
        if kind == ProtocolKind::Ch && !gate.is_hermitian_involutory() {
            return Err(ProtocolError::GateKindMismatch {
                kind,
                gate: gate.kind(),
            });
        }
        let layout = schedule.layout();
        let expected = layout.input_labels();
        let mut given = input.labels().to_vec();
        given.sort();
        if given != expected {
            return Err(ProtocolError::InputLabelMismatch { expected });
        }
        let mut state = input.clone();
        for e in layout.edges() {
            state.append_bell_pair(e.child_half, e.parent_half)?;
        }
        let tree = schedule.tree();
        Ok(Execution {
            schedule,
            gate: *gate,
            options,
            state,
            cursor: 0,
            outcomes: BTreeMap::new(),
            inbox: BTreeMap::new(),
            overrides: BTreeMap::new(),
            probability: 1.0,
            transcript: Transcript::new(kind, tree.len(), layout.edges().len()),
        })
    }

    pub fn state(&self) -> &StateVector {
        &self.state
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    /// Probability of the outcomes drawn so far.
    pub fn probability(&self) -> f64 {
        self.probability
    }

    pub fn outcomes(&self) -> &OutcomeAssignment {
        &self.outcomes
    }

    pub fn peek(&self) -> Option<&'a ProtocolStep> {
        self.schedule.steps().get(self.cursor)
    }

    /// Replaces the operations `actor` applies at correction step `index`.
    pub fn set_override(&mut self, index: usize, actor: PartyId, ops: Vec<LocalOp>) {
        self.overrides.insert((index, actor), ops);
    }

    /// Executes the next step; returns false once the schedule is exhausted.
    pub fn step(&mut self, source: &mut OutcomeSource) -> Result<bool> {
        let Some(step) = self.peek() else {
            return Ok(false);
        };
        let event = match &step.action {
            Action::Gate(op) => {
                op.apply(&mut self.state, &self.gate)?;
                Event::Gate(op.clone())
            }
            Action::Measure { qubit, basis } => {
                let record = match source {
                    OutcomeSource::Forced(a) => {
                        let bit = *a.get(qubit).ok_or(ProtocolError::MissingOutcome(*qubit))?;
                        self.state.measure_forced(*qubit, *basis, bit)?
                    }
                    OutcomeSource::Sampled(rng) => {
                        self.state.measure_sampled(*qubit, *basis, rng)?
                    }
                };
                if self.options.retire_measured {
                    self.state.retire_qubit(*qubit)?;
                }
                self.probability *= record.probability;
                self.outcomes.insert(*qubit, record.outcome);
                Event::Measure(record)
            }
            Action::Send { qubit, to } => {
                let bit = *self
                    .outcomes
                    .get(qubit)
                    .ok_or(ProtocolError::MissingOutcome(*qubit))?;
                for r in to {
                    self.inbox.entry(r.clone()).or_default().insert(*qubit, bit);
                }
                Event::Send {
                    qubit: *qubit,
                    bit,
                    to: to.clone(),
                }
            }
            Action::Correct(c) => {
                let applied = match self.overrides.get(&(step.index, step.actor.clone())) {
                    Some(ops) => ops.clone(),
                    None => self.choose(step, c)?,
                };
                apply_ops(&applied, &mut self.state, &self.gate)?;
                Event::Correct { applied }
            }
        };
        self.transcript.record(step.index, &step.actor, event);
        self.cursor += 1;
        Ok(true)
    }

    fn choose(&self, step: &ProtocolStep, c: &Correction) -> Result<Vec<LocalOp>> {
        let inbox = self.inbox.get(&step.actor);
        let pattern: Vec<u8> = c
            .inputs()
            .iter()
            .map(|q| {
                inbox
                    .and_then(|m| m.get(q))
                    .copied()
                    .ok_or(ProtocolError::UnreceivedOutcome {
                        actor: step.actor.clone(),
                        qubit: *q,
                    })
            })
            .collect::<Result<_>>()?;
        match c {
            Correction::Lookup(table) => table
                .lookup(&pattern)
                .map(<[LocalOp]>::to_vec)
                .ok_or_else(|| ProtocolError::MissingCorrectionRow {
                    step: step.index,
                    actor: step.actor.clone(),
                    pattern,
                }),
            Correction::Parity { ops, .. } => {
                let odd = pattern.iter().filter(|&&b| b == 1).count() % 2 == 1;
                Ok(if odd { ops.clone() } else { Vec::new() })
            }
        }
    }

    /// Runs every step whose index is below `index`.
    pub fn run_until(&mut self, index: usize, source: &mut OutcomeSource) -> Result<()> {
        while self.peek().is_some_and(|s| s.index < index) {
            self.step(source)?;
        }
        Ok(())
    }

    /// Runs the remaining steps. With retirement on, the returned state is
    /// on the input qubits in ascending label order.
    pub fn finish(mut self, source: &mut OutcomeSource) -> Result<(StateVector, Transcript)> {
        while self.step(source)? {}
        let state = if self.options.retire_measured {
            self.state
                .reordered(&self.schedule.layout().input_labels())?
        } else {
            self.state
        };
        Ok((state, self.transcript))
    }
}

pub fn execute(
    schedule: &ProtocolSchedule,
    input: &StateVector,
    gate: &Gate1Q,
    policy: &OutcomePolicy,
) -> Result<(StateVector, Transcript)> {
    execute_with(schedule, input, gate, policy, ExecOptions::default())
}

pub fn execute_with(
    schedule: &ProtocolSchedule,
    input: &StateVector,
    gate: &Gate1Q,
    policy: &OutcomePolicy,
    options: ExecOptions,
) -> Result<(StateVector, Transcript)> {
    let run = Execution::new(schedule, input, gate, options)?;
    run.finish(&mut OutcomeSource::from(policy))
}

#[derive(Debug, Clone)]
pub struct Branch {
    pub assignment: OutcomeAssignment,
    pub state: StateVector,
    pub probability: f64,
    pub transcript: Transcript,
}

/// Every outcome assignment with nonzero probability, in lexicographic order
/// of outcomes taken in measurement order. Branches fork in parallel.
pub fn enumerate_branches(
    schedule: &ProtocolSchedule,
    input: &StateVector,
    gate: &Gate1Q,
) -> Result<Vec<Branch>> {
    let run = Execution::new(schedule, input, gate, ExecOptions::default())?;
    explore(run)
}

fn explore(mut run: Execution<'_>) -> Result<Vec<Branch>> {
    let mut none = OutcomeSource::Forced(BTreeMap::new());
    loop {
        match run.peek() {
            None => {
                let assignment = run.outcomes().clone();
                let probability = run.probability();
                let (state, transcript) = run.finish(&mut none)?;
                return Ok(vec![Branch {
                    assignment,
                    state,
                    probability,
                    transcript,
                }]);
            }
            Some(ProtocolStep {
                action: Action::Measure { qubit, basis },
                ..
            }) => {
                let fork = |bit: u8| -> Result<Vec<Branch>> {
                    if run.state().outcome_probability(*qubit, *basis, bit)? < IMPOSSIBLE_BRANCH_TOL
                    {
                        return Ok(Vec::new());
                    }
                    let mut next = run.clone();
                    next.step(&mut OutcomeSource::Forced(BTreeMap::from([(*qubit, bit)])))?;
                    explore(next)
                };
                let (zero, one) = rayon::join(|| fork(0), || fork(1));
                let mut out = zero?;
                out.extend(one?);
                return Ok(out);
            }
            Some(_) => {
                run.step(&mut none)?;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{allocate_layout, Numbering, RootedTree};
    use crate::oracle::{oracle_ch, oracle_cu};
    use crate::protocol::{build_ch_schedule, build_cu_schedule};

    fn ch_five() -> ProtocolSchedule {
        let tree = RootedTree::five_party();
        let layout = allocate_layout(&tree, Numbering::FiveParty).unwrap();
        build_ch_schedule(&tree, &layout).unwrap()
    }

    fn cu_five() -> ProtocolSchedule {
        let tree = RootedTree::five_party();
        let layout = allocate_layout(&tree, Numbering::FiveParty).unwrap();
        build_cu_schedule(&tree, &layout).unwrap()
    }

    fn zeros(s: &ProtocolSchedule) -> OutcomePolicy {
        OutcomePolicy::Forced(s.measured_qubits().into_iter().map(|q| (q, 0)).collect())
    }

    fn random_input(s: &ProtocolSchedule, seed: u64) -> StateVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        StateVector::random(&s.layout().input_labels(), &mut rng).unwrap()
    }

    #[test]
    fn identity_gate_leaves_input_alone() {
        let s = ch_five();
        let psi = random_input(&s, 1);
        let (out, t) = execute(&s, &psi, &Gate1Q::identity(), &zeros(&s)).unwrap();
        assert!(out.fidelity_up_to_phase(&psi).unwrap() > 1.0 - 1e-9);
        assert_eq!((t.ebits, t.cbits, t.step_count), (4, 10, 10));
    }

    #[test]
    fn ch_hadamard_all_branches_match_oracle() {
        let s = ch_five();
        let psi = random_input(&s, 2);
        let gate = Gate1Q::hadamard();
        let oracle = oracle_ch(&psi, s.layout(), &gate).unwrap();
        let branches = enumerate_branches(&s, &psi, &gate).unwrap();
        assert_eq!(branches.len(), 256);
        let total: f64 = branches.iter().map(|b| b.probability).sum();
        assert!((total - 1.0).abs() < 1e-9);
        for b in &branches {
            assert!(b.state.fidelity_up_to_phase(&oracle).unwrap() > 1.0 - 1e-9);
        }
    }

    #[test]
    fn cu_all_controls_set_flips_target() {
        let s = cu_five();
        let labels = s.layout().input_labels();
        // Inputs 1,3,7,9 set, target 13 clear.
        let input = StateVector::basis(&labels, 0b11110).unwrap();
        let expected = StateVector::basis(&labels, 0b11111).unwrap();
        for b in enumerate_branches(&s, &input, &Gate1Q::pauli_x()).unwrap() {
            assert!(b.state.fidelity_up_to_phase(&expected).unwrap() > 1.0 - 1e-9);
        }
    }

    #[test]
    fn cu_random_unitary_all_branches() {
        let s = cu_five();
        let psi = random_input(&s, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let gate = Gate1Q::random_unitary(&mut rng);
        let oracle = oracle_cu(&psi, s.layout(), &gate).unwrap();
        let branches = enumerate_branches(&s, &psi, &gate).unwrap();
        assert_eq!(branches.len(), 256);
        for b in &branches {
            assert!(b.state.fidelity_up_to_phase(&oracle).unwrap() > 1.0 - 1e-9);
            assert_eq!(b.transcript.cbits, 8);
            assert_eq!(b.transcript.step_count, 13);
        }
    }

    #[test]
    fn two_party_has_four_branches() {
        let tree = RootedTree::star(2);
        let layout = allocate_layout(&tree, Numbering::Canonical).unwrap();
        let s = build_ch_schedule(&tree, &layout).unwrap();
        let psi = random_input(&s, 5);
        assert_eq!(
            enumerate_branches(&s, &psi, &Gate1Q::pauli_z())
                .unwrap()
                .len(),
            4
        );
    }

    #[test]
    fn rejects_bad_gate_and_input() {
        let s = ch_five();
        let psi = random_input(&s, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = Gate1Q::random_unitary(&mut rng);
        assert!(matches!(
            execute(&s, &psi, &u, &zeros(&s)),
            Err(ProtocolError::GateKindMismatch { .. })
        ));
        let wrong = StateVector::basis(&[QubitId(1), QubitId(2)], 0).unwrap();
        assert!(matches!(
            execute(&s, &wrong, &Gate1Q::identity(), &zeros(&s)),
            Err(ProtocolError::InputLabelMismatch { .. })
        ));
        assert!(matches!(
            execute(
                &s,
                &psi,
                &Gate1Q::identity(),
                &OutcomePolicy::Forced(BTreeMap::new())
            ),
            Err(ProtocolError::MissingOutcome(_))
        ));
    }

    #[test]
    fn forced_runs_are_reproducible() {
        let s = cu_five();
        let psi = random_input(&s, 8);
        let policy = OutcomePolicy::Forced(
            s.measured_qubits()
                .into_iter()
                .enumerate()
                .map(|(i, q)| (q, (i % 2) as u8))
                .collect(),
        );
        let gate = Gate1Q::hadamard();
        let a = execute(&s, &psi, &gate, &policy).unwrap();
        let b = execute(&s, &psi, &gate, &policy).unwrap();
        assert_eq!(a.1.to_text(), b.1.to_text());
        assert_eq!(a.0, b.0);
    }

    #[test]
    fn sampled_runs_follow_seed() {
        let s = ch_five();
        let psi = random_input(&s, 9);
        let gate = Gate1Q::hadamard();
        let a = execute(&s, &psi, &gate, &OutcomePolicy::Sampled(42)).unwrap();
        let b = execute(&s, &psi, &gate, &OutcomePolicy::Sampled(42)).unwrap();
        assert_eq!(a.1, b.1);
        let oracle = oracle_ch(&psi, s.layout(), &gate).unwrap();
        assert!(a.0.fidelity_up_to_phase(&oracle).unwrap() > 1.0 - 1e-9);
    }

    #[test]
    fn retirement_does_not_change_result() {
        let s = ch_five();
        let psi = random_input(&s, 10);
        let gate = Gate1Q::pauli_x();
        let policy =
            OutcomePolicy::Forced(s.measured_qubits().into_iter().map(|q| (q, 1)).collect());
        let (small, _) = execute_with(
            &s,
            &psi,
            &gate,
            &policy,
            ExecOptions {
                retire_measured: true,
            },
        )
        .unwrap();
        let (mut full, _) = execute_with(
            &s,
            &psi,
            &gate,
            &policy,
            ExecOptions {
                retire_measured: false,
            },
        )
        .unwrap();
        assert_eq!(full.num_qubits(), 13);
        for q in s.measured_qubits() {
            full.retire_qubit(q).unwrap();
        }
        assert!(small.fidelity_up_to_phase(&full).unwrap() > 1.0 - 1e-9);
    }
}
