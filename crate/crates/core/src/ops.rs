//! Local operations used in schedules and correction tables.
//!
//! The text form follows operator notation: `CN^8_{5,6,7}` is a NOT on 8
//! controlled by 5, 6 and 7; `X^5` / `Z^9` are Pauli flips; `CH^13_11` and
//! `CU^13_{11,12}` apply the protocol gate; `CZ^7_{5,6}` is a controlled
//! phase flip on 7.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::qsim::{Gate1Q, QsimError, QubitId, StateVector};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LocalOp {
    X(QubitId),
    Z(QubitId),
    /// Multi-controlled NOT.
    Cnot {
        controls: Vec<QubitId>,
        target: QubitId,
    },
    /// Multi-controlled phase flip; diagonal.
    Cz {
        controls: Vec<QubitId>,
        target: QubitId,
    },
    /// Singly controlled protocol gate (Hermitian case).
    Ch {
        control: QubitId,
        target: QubitId,
    },
    /// Multi-controlled protocol gate (unitary case).
    Cu {
        controls: Vec<QubitId>,
        target: QubitId,
    },
}

impl LocalOp {
    pub fn target(&self) -> QubitId {
        match self {
            LocalOp::X(q) | LocalOp::Z(q) => *q,
            LocalOp::Cnot { target, .. }
            | LocalOp::Cz { target, .. }
            | LocalOp::Ch { target, .. }
            | LocalOp::Cu { target, .. } => *target,
        }
    }

    pub fn controls(&self) -> Vec<QubitId> {
        match self {
            LocalOp::X(_) | LocalOp::Z(_) => Vec::new(),
            LocalOp::Ch { control, .. } => vec![*control],
            LocalOp::Cnot { controls, .. }
            | LocalOp::Cz { controls, .. }
            | LocalOp::Cu { controls, .. } => controls.clone(),
        }
    }

    /// Every qubit the operation touches.
    pub fn qubits(&self) -> Vec<QubitId> {
        let mut v = self.controls();
        v.push(self.target());
        v
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self, LocalOp::Z(_) | LocalOp::Cz { .. })
    }

    /// Ordering rank used for deterministic tie-breaks: phase flips first.
    pub fn kind_rank(&self) -> u8 {
        match self {
            LocalOp::Z(_) => 0,
            LocalOp::Cz { .. } => 1,
            LocalOp::X(_) => 2,
            LocalOp::Cnot { .. } => 3,
            LocalOp::Ch { .. } => 4,
            LocalOp::Cu { .. } => 5,
        }
    }

    /// Applies the operation; `gate` is the protocol gate for `Ch`/`Cu`.
    pub fn apply(&self, state: &mut StateVector, gate: &Gate1Q) -> Result<(), QsimError> {
        match self {
            LocalOp::X(q) => state.apply_1q(&Gate1Q::pauli_x(), *q),
            LocalOp::Z(q) => state.apply_phase_flip(&[*q]),
            LocalOp::Cnot { controls, target } => {
                state.apply_controlled(&Gate1Q::pauli_x(), controls, *target)
            }
            LocalOp::Cz { controls, target } => {
                if controls.contains(target) {
                    return Err(QsimError::LabelCollision(*target));
                }
                let mut all = controls.clone();
                all.push(*target);
                state.apply_phase_flip(&all)
            }
            LocalOp::Ch { control, target } => state.apply_controlled(gate, &[*control], *target),
            LocalOp::Cu { controls, target } => state.apply_controlled(gate, controls, *target),
        }
    }
}

/// Applies a list written in operator order: the rightmost element first.
pub fn apply_ops(ops: &[LocalOp], state: &mut StateVector, gate: &Gate1Q) -> Result<(), QsimError> {
    for op in ops.iter().rev() {
        op.apply(state, gate)?;
    }
    Ok(())
}

fn write_sub(f: &mut fmt::Formatter<'_>, qs: &[QubitId]) -> fmt::Result {
    if qs.len() == 1 {
        write!(f, "{}", qs[0])
    } else {
        let list: Vec<String> = qs.iter().map(|q| q.to_string()).collect();
        write!(f, "{{{}}}", list.join(","))
    }
}

impl fmt::Display for LocalOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LocalOp::X(q) => write!(f, "X^{q}"),
            LocalOp::Z(q) => write!(f, "Z^{q}"),
            LocalOp::Cnot { controls, target } => {
                write!(f, "CN^{target}_")?;
                write_sub(f, controls)
            }
            LocalOp::Cz { controls, target } => {
                write!(f, "CZ^{target}_")?;
                write_sub(f, controls)
            }
            LocalOp::Ch { control, target } => write!(f, "CH^{target}_{control}"),
            LocalOp::Cu { controls, target } => {
                write!(f, "CU^{target}_")?;
                write_sub(f, controls)
            }
        }
    }
}

/// Renders an operation list; the empty list is `I`.
pub fn format_ops(ops: &[LocalOp]) -> String {
    if ops.is_empty() {
        "I".to_string()
    } else {
        ops.iter()
            .map(|o| o.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot parse operation `{0}`")]
pub struct ParseOpError(pub String);

fn parse_qubits(s: &str) -> Option<Vec<QubitId>> {
    let inner = s
        .strip_prefix('{')
        .and_then(|r| r.strip_suffix('}'))
        .unwrap_or(s);
    inner
        .split(',')
        .map(|t| t.trim().parse::<u32>().ok().map(QubitId))
        .collect()
}

impl FromStr for LocalOp {
    type Err = ParseOpError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseOpError(s.to_string());
        let (head, rest) = s.trim().split_once('^').ok_or_else(err)?;
        let (target, controls) = match rest.split_once('_') {
            Some((t, c)) => (t, Some(c)),
            None => (rest, None),
        };
        let target = QubitId(target.parse().map_err(|_| err())?);
        let controls = match controls {
            Some(c) => Some(parse_qubits(c).ok_or_else(err)?),
            None => None,
        };
        let op = match (head, controls) {
            ("X", None) => LocalOp::X(target),
            ("Z", None) => LocalOp::Z(target),
            ("CN", Some(controls)) => LocalOp::Cnot { controls, target },
            ("CZ", Some(controls)) => LocalOp::Cz { controls, target },
            ("CU", Some(controls)) => LocalOp::Cu { controls, target },
            ("CH", Some(controls)) if controls.len() == 1 => LocalOp::Ch {
                control: controls[0],
                target,
            },
            _ => return Err(err()),
        };
        Ok(op)
    }
}

/// Parses a space-separated operation list; `I` is the empty list.
pub fn parse_ops(s: &str) -> Result<Vec<LocalOp>, ParseOpError> {
    let s = s.trim();
    if s == "I" || s.is_empty() {
        return Ok(Vec::new());
    }
    s.split_whitespace().map(str::parse).collect()
}
