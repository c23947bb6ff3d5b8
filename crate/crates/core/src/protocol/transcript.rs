use std::fmt::Write as _;

use super::ProtocolKind;
use crate::network::PartyId;
use crate::ops::{format_ops, LocalOp};
use crate::qsim::{MeasurementRecord, QubitId};

#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    Gate(LocalOp),
    Measure(MeasurementRecord),
    Send {
        qubit: QubitId,
        bit: u8,
        to: Vec<PartyId>,
    },
    Correct {
        applied: Vec<LocalOp>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranscriptEntry {
    pub step: usize,
    pub actor: PartyId,
    pub event: Event,
    /// Classical bits sent so far, this entry included.
    pub cbits_total: usize,
}

/// Ledger of one executed run.
#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    pub kind: ProtocolKind,
    pub parties: usize,
    pub entries: Vec<TranscriptEntry>,
    pub cbits: usize,
    pub ebits: usize,
    pub step_count: usize,
}

impl Transcript {
    pub(crate) fn new(kind: ProtocolKind, parties: usize, ebits: usize) -> Self {
        Transcript {
            kind,
            parties,
            entries: Vec::new(),
            cbits: 0,
            ebits,
            step_count: 0,
        }
    }

    pub(crate) fn record(&mut self, step: usize, actor: &PartyId, event: Event) {
        if let Event::Send { to, .. } = &event {
            self.cbits += to.len();
        }
        self.step_count = self.step_count.max(step);
        self.entries.push(TranscriptEntry {
            step,
            actor: actor.clone(),
            event,
            cbits_total: self.cbits,
        });
    }

    pub fn measurements(&self) -> impl Iterator<Item = &MeasurementRecord> {
        self.entries.iter().filter_map(|e| match &e.event {
            Event::Measure(r) => Some(r),
            _ => None,
        })
    }

    /// One line per entry with a fixed field order. Probabilities are
    /// rounded so the text is stable across platforms.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# transcript kind={} parties={} ebits={} cbits={} steps={}\n",
            self.kind, self.parties, self.ebits, self.cbits, self.step_count
        );
        for e in &self.entries {
            let _ = write!(out, "step={} actor={} ", e.step, e.actor);
            let _ = match &e.event {
                Event::Gate(op) => write!(out, "gate op={op}"),
                Event::Measure(r) => write!(
                    out,
                    "measure qubit={} basis={} outcome={} p={:.6}",
                    r.qubit, r.basis, r.outcome, r.probability
                ),
                Event::Send { qubit, bit, to } => {
                    let to: Vec<&str> = to.iter().map(|p| p.as_str()).collect();
                    write!(out, "send qubit={qubit} bit={bit} to={}", to.join(","))
                }
                Event::Correct { applied } => write!(out, "correct ops={}", format_ops(applied)),
            };
            let _ = writeln!(out, " cbits={}", e.cbits_total);
        }
        out
    }
}
