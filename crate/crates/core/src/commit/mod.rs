//! Commitment layer: global bit commitments, XOR-pair commitments with linear proofs
//! and copying, coin tossing, distributed commitments and the anonymous setup phase.

pub mod dbc;
pub mod gbc;
pub mod gbcx;
pub mod setup;

pub use dbc::{dbc_create_user, dbc_open, Dbc};
pub use gbc::{gbc_commit, gbc_commit_anonymous, gbc_open, Gbc, GbcParams, Origin};
pub use gbcx::{
    coin_toss, copy_batch, gbcx_commit, gbcx_open, gbcx_open_private, prove, prove_with, replicate,
    Challenge, CommitParams, Gbcx, ProofRecord, Relation,
};
pub use setup::{anonymous_setup, SetupParams, SetupReport};
