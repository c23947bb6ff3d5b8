use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::exec::{ExecOptions, Execution, OutcomeSource};
use super::{
    all_patterns, Action, Correction, CorrectionRow, CorrectionTable, ProtocolError, ProtocolKind,
    ProtocolSchedule, ProtocolStep, Result, TableContext,
};
use crate::network::{deepest_first, PartyId, QubitLayout, RootedTree};
use crate::ops::LocalOp;
use crate::oracle::{oracle_cu, solve_correction, stage_reference, CopyRule, CorrectionDictionary};
use crate::qsim::{Basis, Gate1Q, QubitId, StateVector};

/// Seed of the generic probe state used to resolve downward corrections.
const PROBE_SEED: u64 = 0x5eed_7e1e;

pub fn build_schedule(
    kind: ProtocolKind,
    tree: &RootedTree,
    layout: &QubitLayout,
) -> Result<ProtocolSchedule> {
    match kind {
        ProtocolKind::Ch => build_ch_schedule(tree, layout),
        ProtocolKind::Cu => build_cu_schedule(tree, layout),
    }
}

fn check_inputs(tree: &RootedTree, layout: &QubitLayout) -> Result<()> {
    if tree.len() < 2 {
        return Err(ProtocolError::TooFewParties(tree.len()));
    }
    let parties_ok = tree.parties().iter().all(|p| layout.input(p).is_some())
        && layout.inputs().len() == tree.len()
        && layout.target() == tree.root();
    let edges_ok = layout.edges().len() == tree.len() - 1
        && tree
            .edges()
            .into_iter()
            .all(|(c, p)| layout.edge_above(c).is_some_and(|e| &e.parent == p));
    let labels = layout.all_labels();
    let distinct = labels.iter().collect::<BTreeSet<_>>().len() == labels.len();
    if parties_ok && edges_ok && distinct && labels.len() == 3 * tree.len() - 2 {
        Ok(())
    } else {
        Err(ProtocolError::LayoutMismatch)
    }
}

struct Steps(Vec<ProtocolStep>);

impl Steps {
    fn push(&mut self, index: usize, actor: &PartyId, action: Action) {
        self.0.push(ProtocolStep {
            index,
            actor: actor.clone(),
            action,
        });
    }
}

fn input(layout: &QubitLayout, p: &PartyId) -> QubitId {
    layout.input(p).expect("checked layout")
}

fn half_above(layout: &QubitLayout, p: &PartyId) -> QubitId {
    layout.edge_above(p).expect("non-root party").child_half
}

/// The shared upward phase: leaves entangle their input with the pair toward
/// the parent, then level by level the computational-basis outcomes travel up
/// and each parent fixes its halves with `X` before folding them into its own
/// pair (or, at the root, into the protocol gate).
fn upward(steps: &mut Steps, kind: ProtocolKind, tree: &RootedTree, layout: &QubitLayout) {
    let order = deepest_first(tree);
    let h = tree.profile().height;
    for p in order
        .iter()
        .copied()
        .filter(|&p| tree.is_leaf(p) && p != tree.root())
    {
        let op = LocalOp::Cnot {
            controls: vec![input(layout, p)],
            target: half_above(layout, p),
        };
        steps.push(1, p, Action::Gate(op));
    }
    for d in (1..=h).rev() {
        let base = 2 + 3 * (h - d);
        let level: Vec<&PartyId> = order
            .iter()
            .copied()
            .filter(|p| tree.depth(p) == Some(d))
            .collect();
        for p in &level {
            let qubit = half_above(layout, p);
            steps.push(
                base,
                p,
                Action::Measure {
                    qubit,
                    basis: Basis::Computational,
                },
            );
        }
        for p in &level {
            let qubit = half_above(layout, p);
            let to = vec![tree.parent(p).expect("depth >= 1").clone()];
            steps.push(base + 1, p, Action::Send { qubit, to });
        }
        for parent in order
            .iter()
            .filter(|p| tree.depth(p) == Some(d - 1) && !tree.is_leaf(p))
        {
            let table = upward_table(kind, tree, layout, parent, base + 2);
            steps.push(base + 2, parent, Action::Correct(Correction::Lookup(table)));
        }
    }
}

fn upward_table(
    kind: ProtocolKind,
    tree: &RootedTree,
    layout: &QubitLayout,
    party: &PartyId,
    step: usize,
) -> CorrectionTable {
    let below = layout.edges_below(party);
    let halves: Vec<QubitId> = below.iter().map(|e| e.parent_half).collect();
    let own = input(layout, party);
    let block: Vec<LocalOp> = match (kind, party == tree.root()) {
        (ProtocolKind::Ch, true) => halves
            .iter()
            .map(|&k| LocalOp::Ch {
                control: k,
                target: own,
            })
            .collect(),
        (ProtocolKind::Cu, true) => vec![LocalOp::Cu {
            controls: halves.clone(),
            target: own,
        }],
        (ProtocolKind::Ch, false) => {
            let q = half_above(layout, party);
            halves
                .iter()
                .chain(std::iter::once(&own))
                .map(|&c| LocalOp::Cnot {
                    controls: vec![c],
                    target: q,
                })
                .collect()
        }
        (ProtocolKind::Cu, false) => {
            let mut controls = halves.clone();
            controls.push(own);
            vec![LocalOp::Cnot {
                controls,
                target: half_above(layout, party),
            }]
        }
    };
    let context = TableContext {
        kind,
        step,
        actors: vec![party.clone()],
        basis: Basis::Computational,
    };
    let inputs: Vec<QubitId> = below.iter().map(|e| e.child_half).collect();
    let mut table = CorrectionTable::new(context, inputs);
    for pattern in all_patterns(below.len()) {
        let mut ops = block.clone();
        ops.extend(
            halves
                .iter()
                .zip(&pattern)
                .filter(|(_, &b)| b == 1)
                .map(|(&k, _)| LocalOp::X(k)),
        );
        table.rows.push(CorrectionRow { pattern, ops });
    }
    table
}

/// Controlled-Hermitian schedule on an arbitrary rooted tree.
///
/// After the upward phase every edge half at a parent holds the parity of
/// the inputs in the child's subtree. All those halves are then measured in
/// the Hadamard basis; each outcome goes to every party of the child's
/// subtree, and a party flips its input's phase when the outcomes along its
/// path to the root have odd parity.
pub fn build_ch_schedule(tree: &RootedTree, layout: &QubitLayout) -> Result<ProtocolSchedule> {
    check_inputs(tree, layout)?;
    let h = tree.profile().height;
    let mut steps = Steps(Vec::new());
    upward(&mut steps, ProtocolKind::Ch, tree, layout);

    let measure_step = 3 * h + 2;
    let holders: Vec<&PartyId> = tree
        .bfs_order()
        .into_iter()
        .filter(|p| !tree.is_leaf(p))
        .collect();
    for p in &holders {
        for e in layout.edges_below(p) {
            steps.push(
                measure_step,
                p,
                Action::Measure {
                    qubit: e.parent_half,
                    basis: Basis::Hadamard,
                },
            );
        }
    }
    for p in &holders {
        for e in layout.edges_below(p) {
            let to = tree.subtree(&e.child).into_iter().cloned().collect();
            steps.push(
                measure_step + 1,
                p,
                Action::Send {
                    qubit: e.parent_half,
                    to,
                },
            );
        }
    }
    for p in deepest_first(tree)
        .into_iter()
        .filter(|p| *p != tree.root())
    {
        steps.push(
            measure_step + 2,
            p,
            Action::Correct(Correction::Parity {
                inputs: path_halves(tree, layout, p),
                ops: vec![LocalOp::Z(input(layout, p))],
            }),
        );
    }
    let schedule = ProtocolSchedule {
        kind: ProtocolKind::Ch,
        tree: tree.clone(),
        layout: layout.clone(),
        steps: steps.0,
        stage_tables: Vec::new(),
    };
    validate_schedule(&schedule)?;
    Ok(schedule)
}

/// Parent-side halves of the edges on `p`'s path to the root, nearest first.
pub(crate) fn path_halves(tree: &RootedTree, layout: &QubitLayout, p: &PartyId) -> Vec<QubitId> {
    let mut out = Vec::new();
    let mut cur = p;
    while let Some(parent) = tree.parent(cur) {
        out.push(layout.edge_above(cur).expect("edge").parent_half);
        cur = parent;
    }
    out
}

/// Controlled-unitary schedule on an arbitrary rooted tree.
///
/// Edge halves carry the AND of the subtree inputs, so the phase kicked back
/// by a Hadamard-basis measurement is a multi-controlled phase across the
/// subtree. It is undone top-down: each party holds the halves carrying the
/// AND of its children's subtrees and can apply the phase locally before
/// measuring those halves for its children. The correction rows are solved
/// stage by stage against the oracle on a generic probe state.
pub fn build_cu_schedule(tree: &RootedTree, layout: &QubitLayout) -> Result<ProtocolSchedule> {
    check_inputs(tree, layout)?;
    let h = tree.profile().height;
    let mut steps = Steps(Vec::new());
    upward(&mut steps, ProtocolKind::Cu, tree, layout);

    let bfs = tree.bfs_order();
    for d in 1..=h {
        let base = 3 * h + 2 + 3 * (d - 1);
        let holders: Vec<&PartyId> = bfs
            .iter()
            .copied()
            .filter(|p| tree.depth(p) == Some(d - 1) && !tree.is_leaf(p))
            .collect();
        for p in &holders {
            for e in layout.edges_below(p) {
                steps.push(
                    base,
                    p,
                    Action::Measure {
                        qubit: e.parent_half,
                        basis: Basis::Hadamard,
                    },
                );
            }
        }
        for p in &holders {
            for e in layout.edges_below(p) {
                steps.push(
                    base + 1,
                    p,
                    Action::Send {
                        qubit: e.parent_half,
                        to: vec![e.child.clone()],
                    },
                );
            }
        }
        for p in bfs.iter().filter(|p| tree.depth(p) == Some(d)) {
            let context = TableContext {
                kind: ProtocolKind::Cu,
                step: base + 2,
                actors: vec![(*p).clone()],
                basis: Basis::Hadamard,
            };
            let half = layout.edge_above(p).expect("depth >= 1").parent_half;
            let table = CorrectionTable::new(context, vec![half]);
            steps.push(base + 2, p, Action::Correct(Correction::Lookup(table)));
        }
    }
    let mut schedule = ProtocolSchedule {
        kind: ProtocolKind::Cu,
        tree: tree.clone(),
        layout: layout.clone(),
        steps: steps.0,
        stage_tables: Vec::new(),
    };
    resolve_downward(&mut schedule)?;
    validate_schedule(&schedule)?;
    Ok(schedule)
}

/// Fills the downward correction tables of a controlled-unitary schedule by
/// running the solver on every outcome pattern of each stage.
fn resolve_downward(schedule: &mut ProtocolSchedule) -> Result<()> {
    let tree = schedule.tree.clone();
    let layout = schedule.layout.clone();
    let h = tree.profile().height;
    let mut rng = ChaCha8Rng::seed_from_u64(PROBE_SEED);
    let probe = StateVector::random(&layout.input_labels(), &mut rng)?;
    let gate = Gate1Q::random_unitary(&mut rng);
    let oracle = oracle_cu(&probe, &layout, &gate)?;
    let inputs: BTreeSet<QubitId> = layout.input_labels().into_iter().collect();
    let zeros: BTreeMap<QubitId, u8> = schedule
        .measured_qubits()
        .into_iter()
        .map(|q| (q, 0))
        .collect();

    for d in 1..=h {
        let measure_step = 3 * h + 2 + 3 * (d - 1);
        let correct_step = measure_step + 2;
        let stage_qubits: Vec<QubitId> = schedule
            .steps_at(measure_step)
            .filter_map(|s| match s.action {
                Action::Measure { qubit, .. } => Some(qubit),
                _ => None,
            })
            .collect();
        let actors: Vec<PartyId> = schedule
            .steps_at(correct_step)
            .map(|s| s.actor.clone())
            .collect();
        let dictionary = CorrectionDictionary::cu_stage(&tree, &layout, d)?;
        let mut joint = CorrectionTable::new(
            TableContext {
                kind: ProtocolKind::Cu,
                step: correct_step,
                actors: actors.clone(),
                basis: Basis::Hadamard,
            },
            stage_qubits.clone(),
        );
        {
            let mut prefix = Execution::new(schedule, &probe, &gate, ExecOptions::default())?;
            prefix.run_until(measure_step, &mut OutcomeSource::Forced(zeros.clone()))?;
            for pattern in all_patterns(stage_qubits.len()) {
                let mut forced = zeros.clone();
                forced.extend(stage_qubits.iter().copied().zip(pattern.iter().copied()));
                let mut run = prefix.clone();
                run.run_until(correct_step, &mut OutcomeSource::Forced(forced))?;
                let live_halves: Vec<QubitId> = run
                    .state()
                    .labels()
                    .iter()
                    .copied()
                    .filter(|q| !inputs.contains(q))
                    .collect();
                let reference =
                    stage_reference(&oracle, &tree, &layout, &live_halves, CopyRule::Conjunction)?;
                let ops = solve_correction(run.state(), &reference, &dictionary)?;
                joint.rows.push(CorrectionRow { pattern, ops });
            }
        }

        install_joint(schedule, joint)?;
    }
    Ok(())
}

/// Splits a joint table over a stage's outcomes into the lookup tables of
/// the parties acting at that step. Each party keeps the operations on its
/// own input and must be able to choose them from the outcomes it receives.
fn install_joint(schedule: &mut ProtocolSchedule, joint: CorrectionTable) -> Result<()> {
    let index = joint.context.step;
    let layout = schedule.layout.clone();
    let mut claimed = 0;
    let mut actors = 0;
    for step in schedule.steps.iter_mut().filter(|s| s.index == index) {
        let Action::Correct(Correction::Lookup(table)) = &mut step.action else {
            continue;
        };
        actors += 1;
        let own = input(&layout, &step.actor);
        let cols: Vec<usize> = table
            .inputs
            .iter()
            .map(|q| {
                joint.inputs.iter().position(|j| j == q).ok_or_else(|| {
                    ProtocolError::InvalidSchedule(format!("joint table lacks outcome {q}"))
                })
            })
            .collect::<Result<_>>()?;
        let mut rows: BTreeMap<Vec<u8>, Vec<LocalOp>> = BTreeMap::new();
        for row in &joint.rows {
            let key: Vec<u8> = cols.iter().map(|&c| row.pattern[c]).collect();
            let mine: Vec<LocalOp> = row
                .ops
                .iter()
                .filter(|op| op.target() == own)
                .cloned()
                .collect();
            claimed += mine.len();
            match rows.get(&key) {
                Some(existing) if *existing != mine => {
                    return Err(ProtocolError::InconsistentCorrection {
                        step: index,
                        actor: step.actor.clone(),
                    });
                }
                Some(_) => {}
                None => {
                    rows.insert(key, mine);
                }
            }
        }
        table.rows = rows
            .into_iter()
            .map(|(pattern, ops)| CorrectionRow { pattern, ops })
            .collect();
    }
    if actors == 0 || claimed != joint.rows.iter().map(|r| r.ops.len()).sum::<usize>() {
        return Err(ProtocolError::InvalidSchedule(format!(
            "joint table for step {index} does not fit the parties acting there"
        )));
    }
    schedule.stage_tables.retain(|t| t.context.step != index);
    schedule.stage_tables.push(joint);
    schedule.stage_tables.sort_by_key(|t| t.context.step);
    Ok(())
}

impl ProtocolSchedule {
    /// A copy whose corrections at `joint.context.step` come from `joint`,
    /// e.g. a reference table to be checked against the oracle.
    pub fn with_joint_table(&self, joint: CorrectionTable) -> Result<ProtocolSchedule> {
        let mut out = self.clone();
        install_joint(&mut out, joint)?;
        validate_schedule(&out)?;
        Ok(out)
    }
}

/// Static checks: locality of every action, message causality, table
/// completeness and the batched step count.
pub fn validate_schedule(schedule: &ProtocolSchedule) -> Result<()> {
    let tree = &schedule.tree;
    let layout = &schedule.layout;
    let invalid = |m: String| Err(ProtocolError::InvalidSchedule(m));

    let mut owned: BTreeMap<&PartyId, BTreeSet<QubitId>> = BTreeMap::new();
    for (p, &q) in layout.inputs() {
        owned.entry(p).or_default().insert(q);
    }
    for e in layout.edges() {
        owned.entry(&e.child).or_default().insert(e.child_half);
        owned.entry(&e.parent).or_default().insert(e.parent_half);
    }
    let mut measured: BTreeMap<QubitId, &PartyId> = BTreeMap::new();
    let mut received: BTreeMap<&PartyId, BTreeSet<QubitId>> = BTreeMap::new();
    let mut last_index = 0;

    for s in &schedule.steps {
        if s.index < last_index {
            return invalid(format!("step {} listed after step {}", s.index, last_index));
        }
        last_index = s.index;
        let mine = owned.get(&s.actor).cloned().unwrap_or_default();
        let touches_own = |qs: &[QubitId]| qs.iter().all(|q| mine.contains(q));
        let live = |qs: &[QubitId]| qs.iter().all(|q| !measured.contains_key(q));
        match &s.action {
            Action::Gate(op) => {
                if !touches_own(&op.qubits()) || !live(&op.qubits()) {
                    return invalid(format!("{} applies non-local or stale {op}", s.actor));
                }
            }
            Action::Measure { qubit, .. } => {
                if !mine.contains(qubit) || measured.contains_key(qubit) {
                    return invalid(format!("{} cannot measure {qubit}", s.actor));
                }
                measured.insert(*qubit, &s.actor);
            }
            Action::Send { qubit, to } => {
                if measured.get(qubit) != Some(&&s.actor) {
                    return invalid(format!("{} sends unmeasured {qubit}", s.actor));
                }
                for r in to {
                    if !tree.contains(r) {
                        return invalid(format!("unknown recipient {r}"));
                    }
                    received.entry(r).or_default().insert(*qubit);
                }
            }
            Action::Correct(c) => {
                let got = received.get(&s.actor).cloned().unwrap_or_default();
                if let Some(q) = c.inputs().iter().find(|q| !got.contains(q)) {
                    return Err(ProtocolError::UnreceivedOutcome {
                        actor: s.actor.clone(),
                        qubit: *q,
                    });
                }
                let ops: Vec<&LocalOp> = match c {
                    Correction::Lookup(t) => {
                        if !t.is_complete() {
                            return invalid(format!(
                                "incomplete table for {} at {}",
                                s.actor, s.index
                            ));
                        }
                        t.rows.iter().flat_map(|r| r.ops.iter()).collect()
                    }
                    Correction::Parity { ops, .. } => ops.iter().collect(),
                };
                for op in ops {
                    if !touches_own(&op.qubits()) || !live(&op.qubits()) {
                        return invalid(format!(
                            "{} corrects with non-local or stale {op}",
                            s.actor
                        ));
                    }
                }
            }
        }
    }
    let h = tree.profile().height;
    let expected = match schedule.kind {
        ProtocolKind::Ch => 3 * h + 4,
        ProtocolKind::Cu => 6 * h + 1,
    };
    if schedule.step_count() != expected {
        return invalid(format!(
            "{} steps, expected {expected}",
            schedule.step_count()
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{allocate_layout, Numbering};
    use crate::ops::format_ops;

    fn layout(tree: &RootedTree) -> QubitLayout {
        allocate_layout(tree, Numbering::Canonical).unwrap()
    }

    #[test]
    fn ch_step_counts() {
        let five = RootedTree::five_party();
        assert_eq!(
            build_ch_schedule(&five, &layout(&five))
                .unwrap()
                .step_count(),
            10
        );
        let star = RootedTree::star(5);
        assert_eq!(
            build_ch_schedule(&star, &layout(&star))
                .unwrap()
                .step_count(),
            7
        );
        let path = RootedTree::path(5);
        assert_eq!(
            build_ch_schedule(&path, &layout(&path))
                .unwrap()
                .step_count(),
            16
        );
    }

    #[test]
    fn cu_step_counts() {
        let five = RootedTree::five_party();
        assert_eq!(
            build_cu_schedule(&five, &layout(&five))
                .unwrap()
                .step_count(),
            13
        );
        let star = RootedTree::star(5);
        assert_eq!(
            build_cu_schedule(&star, &layout(&star))
                .unwrap()
                .step_count(),
            7
        );
        let path = RootedTree::path(5);
        assert_eq!(
            build_cu_schedule(&path, &layout(&path))
                .unwrap()
                .step_count(),
            25
        );
    }

    #[test]
    fn too_few_parties() {
        let single = RootedTree::star(1);
        let l = layout(&single);
        assert_eq!(
            build_ch_schedule(&single, &l),
            Err(ProtocolError::TooFewParties(1))
        );
        assert_eq!(
            build_cu_schedule(&single, &l),
            Err(ProtocolError::TooFewParties(1))
        );
    }

    #[test]
    fn layout_must_match_tree() {
        let five = RootedTree::five_party();
        let star = RootedTree::star(5);
        assert_eq!(
            build_ch_schedule(&five, &layout(&star)),
            Err(ProtocolError::LayoutMismatch)
        );
    }

    #[test]
    fn five_party_upward_rows() {
        let five = RootedTree::five_party();
        let s = build_ch_schedule(&five, &layout(&five)).unwrap();
        let t = s.table_for(4, &"S11".into()).unwrap();
        assert_eq!(t.inputs, vec![QubitId(2), QubitId(4)]);
        assert_eq!(
            format_ops(t.lookup(&[1, 0]).unwrap()),
            "CN^8_5 CN^8_6 CN^8_7 X^5"
        );
        let t = s.table_for(7, &"T".into()).unwrap();
        assert_eq!(
            format_ops(t.lookup(&[1, 1]).unwrap()),
            "CH^13_11 CH^13_12 X^11 X^12"
        );

        let s = build_cu_schedule(&five, &layout(&five)).unwrap();
        let t = s.table_for(4, &"S11".into()).unwrap();
        assert_eq!(format_ops(t.lookup(&[0, 1]).unwrap()), "CN^8_{5,6,7} X^6");
        let t = s.table_for(7, &"T".into()).unwrap();
        assert_eq!(format_ops(t.lookup(&[0, 0]).unwrap()), "CU^13_{11,12}");
    }

    #[test]
    fn cu_downward_rows_are_solved() {
        let five = RootedTree::five_party();
        let s = build_cu_schedule(&five, &layout(&five)).unwrap();
        let s11 = s.table_for(10, &"S11".into()).unwrap();
        assert_eq!(format_ops(s11.lookup(&[0]).unwrap()), "I");
        assert_eq!(format_ops(s11.lookup(&[1]).unwrap()), "CZ^7_{5,6}");
        let s12 = s.table_for(10, &"S12".into()).unwrap();
        assert_eq!(format_ops(s12.lookup(&[1]).unwrap()), "Z^9");
        let s21 = s.table_for(13, &"S21".into()).unwrap();
        assert_eq!(format_ops(s21.lookup(&[1]).unwrap()), "Z^1");
        assert_eq!(s.stage_tables().len(), 2);
        assert!(s.stage_tables().iter().all(|t| t.is_complete()));
    }

    #[test]
    fn cbit_messages_reach_whole_subtree() {
        let five = RootedTree::five_party();
        let s = build_ch_schedule(&five, &layout(&five)).unwrap();
        let sends: Vec<(QubitId, usize)> = s
            .steps_at(9)
            .filter_map(|st| match &st.action {
                Action::Send { qubit, to } => Some((*qubit, to.len())),
                _ => None,
            })
            .collect();
        assert_eq!(
            sends,
            vec![
                (QubitId(11), 3),
                (QubitId(12), 1),
                (QubitId(5), 1),
                (QubitId(6), 1)
            ]
        );
    }

    #[test]
    fn validation_rejects_broken_schedules() {
        let five = RootedTree::five_party();
        let good = build_ch_schedule(&five, &layout(&five)).unwrap();

        // A correction that reads an outcome its actor never received.
        let mut bad = good.clone();
        bad.steps
            .retain(|s| !(s.index == 9 && s.actor.as_str() == "S11"));
        assert!(matches!(
            validate_schedule(&bad),
            Err(ProtocolError::UnreceivedOutcome { .. })
        ));

        // A gate reaching into another party's qubits.
        let mut bad = good.clone();
        bad.steps[0].action = Action::Gate(LocalOp::Cnot {
            controls: vec![QubitId(1)],
            target: QubitId(13),
        });
        assert!(matches!(
            validate_schedule(&bad),
            Err(ProtocolError::InvalidSchedule(_))
        ));

        // Sending before measuring.
        let mut bad = good;
        let first_send = bad
            .steps
            .iter()
            .position(|s| matches!(s.action, Action::Send { .. }))
            .unwrap();
        let send = bad.steps.remove(first_send);
        bad.steps.insert(0, ProtocolStep { index: 1, ..send });
        assert!(matches!(
            validate_schedule(&bad),
            Err(ProtocolError::InvalidSchedule(_))
        ));
    }
    #[test]
    fn reference_downward_tables_install_but_fail() {
        let five = RootedTree::five_party();
        let s = build_cu_schedule(&five, &layout(&five)).unwrap();
        let mut with_reference = s.clone();
        for t in crate::protocol::fixture_tables()
            .into_iter()
            .filter(|t| t.context.kind == ProtocolKind::Cu && t.context.step > 7)
        {
            with_reference = with_reference.with_joint_table(t).unwrap();
        }
        let s12 = with_reference.table_for(10, &"S12".into()).unwrap();
        assert_eq!(format_ops(s12.lookup(&[0]).unwrap()), "Z^9");
        assert_ne!(with_reference, s);

        // Operations nobody at the step owns are rejected.
        let mut bogus = s.stage_table(10).unwrap().clone();
        bogus.rows[0].ops.push(LocalOp::Z(QubitId(13)));
        assert!(s.with_joint_table(bogus).is_err());
    }
}
