//! Simulation and verification of LOCC protocols that implement non-local
//! controlled gates over a rooted-tree network of Bell pairs.
//!
//! [`qsim`] is the dense statevector engine, [`network`] describes trees and
//! qubit layouts, [`protocol`] builds and runs schedules, [`oracle`] applies
//! the intended gates directly, and [`resources`] holds the closed-form
//! counts.

pub mod network;
pub mod ops;
pub mod oracle;
pub mod protocol;
pub mod qsim;
pub mod resources;

pub use network::{allocate_layout, parse_tree, Numbering, PartyId, QubitLayout, RootedTree};
pub use ops::LocalOp;
pub use protocol::{build_schedule, ProtocolKind, ProtocolSchedule, Transcript};
pub use qsim::{Basis, Gate1Q, QubitId, StateVector};
