use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::build::build_schedule;
use super::exec::{ExecOptions, Execution, OutcomeAssignment, OutcomeSource};
use super::fixtures::fixture_tables;
use super::{
    all_patterns, Action, Correction, CorrectionRow, CorrectionTable, ProtocolError, ProtocolKind,
    ProtocolSchedule, Result, TableContext,
};
use crate::network::{allocate_layout, Numbering, PartyId, RootedTree};
use crate::ops::{format_ops, LocalOp};
use crate::oracle::{oracle_ch, oracle_cu, solve_correction, verify_branch, CorrectionDictionary};
use crate::qsim::{Basis, Gate1Q, QubitId, StateVector};

const REPORT_SEED: u64 = 20_17;

/// Phase flip on `input` iff an odd number of the path outcomes are 1.
pub fn parity_correction(path_outcomes: &[u8], input: QubitId) -> Vec<LocalOp> {
    if path_outcomes.iter().filter(|&&b| b == 1).count() % 2 == 1 {
        vec![LocalOp::Z(input)]
    } else {
        Vec::new()
    }
}

/// Joint table of the final controlled-Hermitian stage: every pattern of the
/// Hadamard outcomes (inputs in ascending label order) mapped to the union of
/// the parties' parity corrections.
pub fn expand_parity_table(schedule: &ProtocolSchedule) -> Result<CorrectionTable> {
    let last = schedule.step_count();
    let rules: Vec<(&PartyId, &[QubitId], &[LocalOp])> = schedule
        .steps_at(last)
        .filter_map(|s| match &s.action {
            Action::Correct(Correction::Parity { inputs, ops }) => {
                Some((&s.actor, inputs.as_slice(), ops.as_slice()))
            }
            _ => None,
        })
        .collect();
    if schedule.kind() != ProtocolKind::Ch || rules.is_empty() {
        return Err(ProtocolError::InvalidSchedule(
            "no parity stage to expand".to_string(),
        ));
    }
    let mut inputs: Vec<QubitId> = schedule
        .steps()
        .iter()
        .filter_map(|s| match s.action {
            Action::Measure {
                qubit,
                basis: Basis::Hadamard,
            } => Some(qubit),
            _ => None,
        })
        .collect();
    inputs.sort();
    let context = TableContext {
        kind: ProtocolKind::Ch,
        step: last,
        actors: rules.iter().map(|r| r.0.clone()).collect(),
        basis: Basis::Hadamard,
    };
    let mut table = CorrectionTable::new(context, inputs.clone());
    for pattern in all_patterns(inputs.len()) {
        let bit: BTreeMap<QubitId, u8> = inputs
            .iter()
            .copied()
            .zip(pattern.iter().copied())
            .collect();
        let mut ops: Vec<LocalOp> = rules
            .iter()
            .filter(|(_, path, _)| path.iter().filter(|q| bit[q] == 1).count() % 2 == 1)
            .flat_map(|(_, _, ops)| ops.iter().cloned())
            .collect();
        ops.sort_by_key(|op| (op.target(), op.kind_rank()));
        table.rows.push(CorrectionRow { pattern, ops });
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowStatus {
    Match,
    Diff,
}

impl std::fmt::Display for RowStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RowStatus::Match => "MATCH",
            RowStatus::Diff => "DIFF",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableDiffRow {
    pub pattern: Vec<u8>,
    pub reference: Vec<LocalOp>,
    pub generated: Vec<LocalOp>,
    /// Independent solver answer, where one is computed for this table.
    pub solver: Option<Vec<LocalOp>>,
    pub status: RowStatus,
    /// End-of-run fidelity with the oracle when the reference row is applied.
    pub reference_fidelity: f64,
    /// Same with the generated row.
    pub generated_fidelity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableDiff {
    pub context: TableContext,
    pub inputs: Vec<QubitId>,
    pub rows: Vec<TableDiffRow>,
}

impl TableDiff {
    pub fn matches(&self) -> bool {
        self.rows.iter().all(|r| r.status == RowStatus::Match)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableReport {
    pub tables: Vec<TableDiff>,
}

impl TableReport {
    pub fn find(&self, kind: ProtocolKind, step: usize) -> Option<&TableDiff> {
        self.tables
            .iter()
            .find(|t| t.context.kind == kind && t.context.step == step)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for t in &self.tables {
            let actors: Vec<&str> = t.context.actors.iter().map(|a| a.as_str()).collect();
            let _ = writeln!(
                out,
                "== {} step {} actors {} ==",
                t.context.kind,
                t.context.step,
                actors.join(",")
            );
            for r in &t.rows {
                let pattern = super::format_pattern(&t.inputs, t.context.basis, &r.pattern);
                let _ = write!(
                    out,
                    "{}  {pattern}  reference: {}  generated: {}",
                    r.status,
                    format_ops(&r.reference),
                    format_ops(&r.generated)
                );
                if let Some(s) = &r.solver {
                    let _ = write!(out, "  solver: {}", format_ops(s));
                }
                let _ = writeln!(
                    out,
                    "  F(reference)={:.6}  F(generated)={:.6}",
                    r.reference_fidelity, r.generated_fidelity
                );
            }
        }
        out
    }
}

struct Probe<'a> {
    schedule: &'a ProtocolSchedule,
    input: StateVector,
    gate: Gate1Q,
    oracle: StateVector,
}

impl Probe<'_> {
    fn forced(&self, table: &CorrectionTable, pattern: &[u8]) -> OutcomeAssignment {
        let mut a: OutcomeAssignment = self
            .schedule
            .measured_qubits()
            .into_iter()
            .map(|q| (q, 0))
            .collect();
        a.extend(table.inputs.iter().copied().zip(pattern.iter().copied()));
        a
    }

    /// Final-state fidelity when the actors of `table` apply `ops` (split by
    /// the owner of each target) instead of their own rows; `None` keeps the
    /// schedule's rows.
    fn fidelity(
        &self,
        table: &CorrectionTable,
        pattern: &[u8],
        ops: Option<&[LocalOp]>,
    ) -> Result<f64> {
        let mut run = Execution::new(
            self.schedule,
            &self.input,
            &self.gate,
            ExecOptions::default(),
        )?;
        if let Some(ops) = ops {
            let layout = self.schedule.layout();
            for actor in &table.context.actors {
                let own = layout.input(actor);
                let mut owned: Vec<QubitId> = layout
                    .edges_below(actor)
                    .iter()
                    .map(|e| e.parent_half)
                    .collect();
                owned.extend(own);
                owned.extend(layout.edge_above(actor).map(|e| e.child_half));
                let mine: Vec<LocalOp> = ops
                    .iter()
                    .filter(|op| owned.contains(&op.target()))
                    .cloned()
                    .collect();
                run.set_override(table.context.step, actor.clone(), mine);
            }
        }
        let (out, _) = run.finish(&mut OutcomeSource::Forced(self.forced(table, pattern)))?;
        Ok(verify_branch(&out, &self.oracle)?.fidelity())
    }

    fn generated(&self, table: &CorrectionTable) -> Result<CorrectionTable> {
        let ctx = &table.context;
        if let Some(t) = self.schedule.stage_table(ctx.step) {
            return Ok(t.clone());
        }
        if ctx.actors.len() == 1 {
            if let Some(t) = self.schedule.table_for(ctx.step, &ctx.actors[0]) {
                return Ok(t.clone());
            }
        }
        if ctx.step == self.schedule.step_count() && ctx.kind == ProtocolKind::Ch {
            return expand_parity_table(self.schedule);
        }
        Err(ProtocolError::InvalidSchedule(format!(
            "no generated table for {} step {}",
            ctx.kind, ctx.step
        )))
    }

    /// Minimal diagonal correction found by search on the pre-correction state.
    fn solve_ch(&self, table: &CorrectionTable, pattern: &[u8]) -> Result<Vec<LocalOp>> {
        let mut run = Execution::new(
            self.schedule,
            &self.input,
            &self.gate,
            ExecOptions::default(),
        )?;
        run.run_until(
            table.context.step,
            &mut OutcomeSource::Forced(self.forced(table, pattern)),
        )?;
        let dictionary = CorrectionDictionary::ch(self.schedule.tree(), self.schedule.layout())?;
        Ok(solve_correction(run.state(), &self.oracle, &dictionary)?)
    }
}

fn diff_table(probe: &Probe<'_>, reference: &CorrectionTable) -> Result<TableDiff> {
    let generated = probe.generated(reference)?;
    let final_stage =
        reference.context.kind == ProtocolKind::Ch && reference.context.step == probe.schedule.step_count();
    let mut rows = Vec::new();
    for row in &reference.rows {
        let mine = generated
            .lookup(&row.pattern)
            .ok_or_else(|| ProtocolError::MissingCorrectionRow {
                step: reference.context.step,
                actor: reference.context.actors[0].clone(),
                pattern: row.pattern.clone(),
            })?
            .to_vec();
        let solver = if final_stage {
            Some(probe.solve_ch(reference, &row.pattern)?)
        } else {
            None
        };
        let status = if mine == row.ops && solver.as_ref().is_none_or(|s| *s == row.ops) {
            RowStatus::Match
        } else {
            RowStatus::Diff
        };
        rows.push(TableDiffRow {
            pattern: row.pattern.clone(),
            reference_fidelity: probe.fidelity(reference, &row.pattern, Some(&row.ops))?,
            generated_fidelity: probe.fidelity(reference, &row.pattern, None)?,
            reference: row.ops.clone(),
            generated: mine,
            solver,
            status,
        });
    }
    Ok(TableDiff {
        context: reference.context.clone(),
        inputs: reference.inputs.clone(),
        rows,
    })
}

/// Rebuilds the five-party schedules and diffs each reference table against
/// them. Every row is also replayed to the end of the run on a random probe
/// input, once with the reference operations and once with the generated ones.
pub fn regenerate_tables() -> Result<TableReport> {
    let tree = RootedTree::five_party();
    let layout = allocate_layout(&tree, Numbering::FiveParty)?;
    let mut rng = ChaCha8Rng::seed_from_u64(REPORT_SEED);
    let input = StateVector::random(&layout.input_labels(), &mut rng)?;
    let hermitian = Gate1Q::random_hermitian_involutory(&mut rng);
    let unitary = Gate1Q::random_unitary(&mut rng);

    let ch = build_schedule(ProtocolKind::Ch, &tree, &layout)?;
    let cu = build_schedule(ProtocolKind::Cu, &tree, &layout)?;
    let probes = [
        Probe {
            schedule: &ch,
            oracle: oracle_ch(&input, &layout, &hermitian)?,
            input: input.clone(),
            gate: hermitian,
        },
        Probe {
            schedule: &cu,
            oracle: oracle_cu(&input, &layout, &unitary)?,
            input,
            gate: unitary,
        },
    ];
    let tables = fixture_tables()
        .iter()
        .map(|reference| {
            let probe = match reference.context.kind {
                ProtocolKind::Ch => &probes[0],
                ProtocolKind::Cu => &probes[1],
            };
            diff_table(probe, reference)
        })
        .collect::<Result<_>>()?;
    Ok(TableReport { tables })
}
