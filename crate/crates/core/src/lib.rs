//! Simulator and library for robust multi-party computation built on anonymous
//! oblivious transfer.
//!
//! Every protocol layer runs inside a deterministic [`simnet::Sim`]: the ideal anonymous
//! and oblivious channels, information-theoretic authentication ([`mac`]), broadcast
//! channels built from them ([`broadcast`]), global commitments with linear proofs and
//! copying ([`commit`]), undeniable and committed oblivious transfer ([`ot`]) and
//! circuit evaluation on distributed commitments ([`mpc`]). A run either completes with
//! the correct result or names a cheater (or splits the players so that one group holds
//! every honest player).

pub mod bits;
pub mod broadcast;
pub mod cheat;
pub mod code;
pub mod commit;
pub mod mac;
pub mod model;
pub mod mpc;
pub mod ot;
pub mod scenario;
pub mod simnet;
pub mod transcript;

pub use bits::BitString;
pub use model::{Halt, PlayerId, PlayerSet, ProtocolOutcome, Step};
pub use simnet::{Sim, SimConfig};
