//! Oblivious transfer: undeniable OT from the erasure channels, its one-out-of-two
//! form, and committed OT with public verification.

pub mod gcot;
pub mod uot;

pub use gcot::{gcot, gcot_outcome, gcot_setup, GcotParams, GcotRun, GcotSession, GcotSetup};
pub use uot::{one_of_two_uot, uot, uot_via_aot, uot_via_ob, OneOfTwo, UotOutcome, UotParams};
