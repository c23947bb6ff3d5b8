//! Reference correction tables of the five-party protocols, transcribed row
//! for row. They are kept for diffing against generated schedules; for the
//! controlled-unitary downward stages the solver is authoritative.

use super::{CorrectionRow, CorrectionTable, ProtocolKind, TableContext};
use crate::network::PartyId;
use crate::ops::parse_ops;
use crate::qsim::{Basis, QubitId};

fn table(
    kind: ProtocolKind,
    step: usize,
    actors: &[&str],
    basis: Basis,
    inputs: &[u32],
    rows: &[(&str, &str)],
) -> CorrectionTable {
    let context = TableContext {
        kind,
        step,
        actors: actors.iter().map(|&a| PartyId::new(a)).collect(),
        basis,
    };
    let mut t = CorrectionTable::new(context, inputs.iter().map(|&q| QubitId(q)).collect());
    for &(pattern, ops) in rows {
        t.rows.push(CorrectionRow {
            pattern: pattern
                .chars()
                .map(|c| match c {
                    '0' | '+' => 0,
                    _ => 1,
                })
                .collect(),
            ops: parse_ops(ops).expect("fixture operations are well formed"),
        });
    }
    t
}

/// The seven five-party tables, upward stages first.
pub fn fixture_tables() -> Vec<CorrectionTable> {
    use Basis::{Computational as Z, Hadamard as X};
    use ProtocolKind::{Ch, Cu};
    vec![
        table(
            Ch,
            4,
            &["S11"],
            Z,
            &[2, 4],
            &[
                ("00", "CN^8_5 CN^8_6 CN^8_7"),
                ("10", "CN^8_5 CN^8_6 CN^8_7 X^5"),
                ("01", "CN^8_5 CN^8_6 CN^8_7 X^6"),
                ("11", "CN^8_5 CN^8_6 CN^8_7 X^5 X^6"),
            ],
        ),
        table(
            Ch,
            7,
            &["T"],
            Z,
            &[8, 10],
            &[
                ("00", "CH^13_11 CH^13_12"),
                ("10", "CH^13_11 CH^13_12 X^11"),
                ("01", "CH^13_11 CH^13_12 X^12"),
                ("11", "CH^13_11 CH^13_12 X^11 X^12"),
            ],
        ),
        table(
            Ch,
            10,
            &["S21", "S22", "S11", "S12"],
            X,
            &[5, 6, 11, 12],
            &[
                ("++++", "I"),
                ("+++-", "Z^9"),
                ("++-+", "Z^1 Z^3 Z^7"),
                ("+-++", "Z^3"),
                ("-+++", "Z^1"),
                ("++--", "Z^1 Z^3 Z^7 Z^9"),
                ("--++", "Z^1 Z^3"),
                ("+--+", "Z^1 Z^7"),
                ("-++-", "Z^1 Z^9"),
                ("+-+-", "Z^3 Z^9"),
                ("-+-+", "Z^3 Z^7"),
                ("+---", "Z^1 Z^7 Z^9"),
                ("-+--", "Z^3 Z^7 Z^9"),
                ("--+-", "Z^1 Z^3 Z^9"),
                ("---+", "Z^7"),
                ("----", "Z^7 Z^9"),
            ],
        ),
        table(
            Cu,
            4,
            &["S11"],
            Z,
            &[2, 4],
            &[
                ("00", "CN^8_{5,6,7}"),
                ("10", "CN^8_{5,6,7} X^5"),
                ("01", "CN^8_{5,6,7} X^6"),
                ("11", "CN^8_{5,6,7} X^5 X^6"),
            ],
        ),
        table(
            Cu,
            7,
            &["T"],
            Z,
            &[8, 10],
            &[
                ("00", "CU^13_{11,12}"),
                ("10", "CU^13_{11,12} X^11"),
                ("01", "CU^13_{11,12} X^12"),
                ("11", "CU^13_{11,12} X^11 X^12"),
            ],
        ),
        table(
            Cu,
            10,
            &["S11", "S12"],
            X,
            &[11, 12],
            &[
                ("++", "Z^9"),
                ("+-", "I"),
                ("-+", "CZ^7_{5,6} Z^9"),
                ("--", "CZ^7_{5,6}"),
            ],
        ),
        table(
            Cu,
            13,
            &["S21", "S22"],
            X,
            &[5, 6],
            &[("++", "Z^3"), ("+-", "I"), ("-+", "Z^1 Z^3"), ("--", "Z^1")],
        ),
    ]
}
