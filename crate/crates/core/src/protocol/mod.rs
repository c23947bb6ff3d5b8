//! LOCC schedules for the rooted-tree protocols, their executor, and the
//! five-party reference correction tables.
//!
//! A schedule is a flat list of [`ProtocolStep`]s. Step indices count
//! batched stages: every simultaneous action of the same kind across parties
//! shares one index, so a controlled-Hermitian schedule ends at `3h + 4` and
//! a controlled-unitary one at `6h + 1`.

mod build;
mod exec;
mod fixtures;
mod tables;
mod transcript;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::network::{NetworkError, PartyId, QubitLayout, RootedTree};
use crate::ops::{format_ops, LocalOp};
use crate::oracle::OracleError;
use crate::qsim::{Basis, GateKind, QsimError, QubitId};

pub use build::{build_ch_schedule, build_cu_schedule, build_schedule, validate_schedule};
pub use exec::{
    enumerate_branches, execute, execute_with, Branch, ExecOptions, Execution, OutcomeAssignment,
    OutcomePolicy, OutcomeSource,
};
pub use fixtures::fixture_tables;
pub use tables::{
    expand_parity_table, parity_correction, regenerate_tables, RowStatus, TableDiff, TableDiffRow,
    TableReport,
};
pub use transcript::{Event, Transcript, TranscriptEntry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProtocolKind {
    /// Simultaneous controlled-Hermitian gates.
    Ch,
    /// Multiparty controlled-unitary gate.
    Cu,
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProtocolKind::Ch => "ch",
            ProtocolKind::Cu => "cu",
        })
    }
}

impl FromStr for ProtocolKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ch" => Ok(ProtocolKind::Ch),
            "cu" => Ok(ProtocolKind::Cu),
            other => Err(format!(
                "unknown protocol kind `{other}` (expected ch or cu)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Qsim(#[from] QsimError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("protocols need at least two parties, got {0}")]
    TooFewParties(usize),
    #[error("{kind} protocol cannot run gate of kind {gate}")]
    GateKindMismatch { kind: ProtocolKind, gate: GateKind },
    #[error("input state must be defined on exactly the input qubits {expected:?}")]
    InputLabelMismatch { expected: Vec<QubitId> },
    #[error("layout does not match the tree")]
    LayoutMismatch,
    #[error("no forced outcome given for qubit {0}")]
    MissingOutcome(QubitId),
    #[error("{actor} reads outcome of qubit {qubit} it never received")]
    UnreceivedOutcome { actor: PartyId, qubit: QubitId },
    #[error("no correction row for {actor} at step {step} with outcomes {pattern:?}")]
    MissingCorrectionRow {
        step: usize,
        actor: PartyId,
        pattern: Vec<u8>,
    },
    #[error(
        "solved corrections for {actor} at step {step} depend on outcomes it does not receive"
    )]
    InconsistentCorrection { step: usize, actor: PartyId },
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
}

pub type Result<T, E = ProtocolError> = std::result::Result<T, E>;

/// Which table a set of correction rows belongs to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableContext {
    pub kind: ProtocolKind,
    /// Step index at which the operations are applied.
    pub step: usize,
    pub actors: Vec<PartyId>,
    /// Basis of the outcomes the rows are keyed on.
    pub basis: Basis,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrectionRow {
    /// One bit per table input, in input order.
    pub pattern: Vec<u8>,
    /// Operator order: the rightmost operation is applied first.
    pub ops: Vec<LocalOp>,
}

/// Outcome pattern → local operations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrectionTable {
    pub context: TableContext,
    pub inputs: Vec<QubitId>,
    pub rows: Vec<CorrectionRow>,
}

impl CorrectionTable {
    pub fn new(context: TableContext, inputs: Vec<QubitId>) -> Self {
        CorrectionTable {
            context,
            inputs,
            rows: Vec::new(),
        }
    }

    pub fn lookup(&self, pattern: &[u8]) -> Option<&[LocalOp]> {
        self.rows
            .iter()
            .find(|r| r.pattern == pattern)
            .map(|r| r.ops.as_slice())
    }

    /// True when every one of the `2^k` patterns has exactly one row.
    pub fn is_complete(&self) -> bool {
        let k = self.inputs.len();
        self.rows.len() == 1 << k
            && all_patterns(k).all(|p| self.rows.iter().filter(|r| r.pattern == p).count() == 1)
    }

    pub fn format_pattern(&self, pattern: &[u8]) -> String {
        format_pattern(&self.inputs, self.context.basis, pattern)
    }

    /// Rows in canonical pattern order.
    pub fn sorted_rows(&self) -> Vec<&CorrectionRow> {
        let mut rows: Vec<&CorrectionRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| a.pattern.cmp(&b.pattern));
        rows
    }

    pub fn render(&self) -> String {
        let actors: Vec<&str> = self.context.actors.iter().map(|a| a.as_str()).collect();
        let mut out = format!(
            "{} step {} actors {}\n",
            self.context.kind,
            self.context.step,
            actors.join(",")
        );
        for row in self.sorted_rows() {
            out.push_str(&format!(
                "  {:<28} {}\n",
                self.format_pattern(&row.pattern),
                format_ops(&row.ops)
            ));
        }
        out
    }
}

/// All bit patterns of length `k`, first bit most significant.
pub fn all_patterns(k: usize) -> impl Iterator<Item = Vec<u8>> {
    (0..1usize << k).map(move |i| (0..k).map(|b| ((i >> (k - 1 - b)) & 1) as u8).collect())
}

pub fn format_pattern(inputs: &[QubitId], basis: Basis, pattern: &[u8]) -> String {
    inputs
        .iter()
        .zip(pattern)
        .map(|(q, &b)| {
            let sym = match (basis, b) {
                (Basis::Computational, 0) => "0",
                (Basis::Computational, _) => "1",
                (Basis::Hadamard, 0) => "+",
                (Basis::Hadamard, _) => "-",
            };
            format!("|{sym}>_{q}")
        })
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Correction {
    /// Operations chosen by the received outcomes of `table.inputs`.
    Lookup(CorrectionTable),
    /// `ops` applied iff an odd number of `inputs` came out 1.
    Parity {
        inputs: Vec<QubitId>,
        ops: Vec<LocalOp>,
    },
}

impl Correction {
    pub fn inputs(&self) -> &[QubitId] {
        match self {
            Correction::Lookup(t) => &t.inputs,
            Correction::Parity { inputs, .. } => inputs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Gate(LocalOp),
    Measure { qubit: QubitId, basis: Basis },
    Send { qubit: QubitId, to: Vec<PartyId> },
    Correct(Correction),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolStep {
    pub index: usize,
    pub actor: PartyId,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolSchedule {
    kind: ProtocolKind,
    tree: RootedTree,
    layout: QubitLayout,
    steps: Vec<ProtocolStep>,
    /// Joint solver tables of the downward stages (controlled-unitary only).
    stage_tables: Vec<CorrectionTable>,
}

impl ProtocolSchedule {
    pub fn kind(&self) -> ProtocolKind {
        self.kind
    }

    pub fn tree(&self) -> &RootedTree {
        &self.tree
    }

    pub fn layout(&self) -> &QubitLayout {
        &self.layout
    }

    pub fn steps(&self) -> &[ProtocolStep] {
        &self.steps
    }

    pub fn step_count(&self) -> usize {
        self.steps.iter().map(|s| s.index).max().unwrap_or(0)
    }

    /// Measured qubits in schedule order.
    pub fn measured_qubits(&self) -> Vec<QubitId> {
        self.steps
            .iter()
            .filter_map(|s| match s.action {
                Action::Measure { qubit, .. } => Some(qubit),
                _ => None,
            })
            .collect()
    }

    pub fn steps_at(&self, index: usize) -> impl Iterator<Item = &ProtocolStep> {
        self.steps.iter().filter(move |s| s.index == index)
    }

    /// The lookup table `actor` consults at step `index`, if any.
    pub fn table_for(&self, index: usize, actor: &PartyId) -> Option<&CorrectionTable> {
        self.steps_at(index).find_map(|s| match &s.action {
            Action::Correct(Correction::Lookup(t)) if &s.actor == actor => Some(t),
            _ => None,
        })
    }

    pub fn stage_tables(&self) -> &[CorrectionTable] {
        &self.stage_tables
    }

    pub fn stage_table(&self, index: usize) -> Option<&CorrectionTable> {
        self.stage_tables.iter().find(|t| t.context.step == index)
    }

    /// Plain-text listing of every step.
    pub fn render(&self) -> String {
        let mut out = format!(
            "# schedule kind={} parties={} steps={}\n",
            self.kind,
            self.tree.len(),
            self.step_count()
        );
        for s in &self.steps {
            let what = match &s.action {
                Action::Gate(op) => format!("gate {op}"),
                Action::Measure { qubit, basis } => format!("measure qubit={qubit} basis={basis}"),
                Action::Send { qubit, to } => {
                    let to: Vec<&str> = to.iter().map(|p| p.as_str()).collect();
                    format!("send qubit={qubit} to={}", to.join(","))
                }
                Action::Correct(Correction::Lookup(t)) => {
                    let ins: Vec<String> = t.inputs.iter().map(|q| q.to_string()).collect();
                    format!("correct lookup on={} rows={}", ins.join(","), t.rows.len())
                }
                Action::Correct(Correction::Parity { inputs, ops }) => {
                    let ins: Vec<String> = inputs.iter().map(|q| q.to_string()).collect();
                    format!(
                        "correct parity on={} ops={}",
                        ins.join(","),
                        format_ops(ops)
                    )
                }
            };
            out.push_str(&format!("step={} actor={} {}\n", s.index, s.actor, what));
        }
        out
    }
}
