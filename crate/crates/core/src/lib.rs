//! Trustable association rule mining on top of a hash-linked ledger.
//!
//! Prescription records are appended to a replicated, tamper-evident chain
//! ([`ledger`]) and mined for association rules ([`arm`]) through three
//! execution layers:
//!
//! - the server layer ([`parallel`]): SMP thread pools and MPP master/worker
//!   actors doing count-distribution Apriori,
//! - the streaming layer ([`streaming`]): sliding-window ingestion and
//!   continuous queries over ledger subscriptions,
//! - the smart-contract layer ([`contracts`]): a deterministic state machine
//!   that escrows a reward, accepts model submissions, ranks them and pays
//!   the winner.
//!
//! The model lifecycle (initialize, train, validate, score, evaluate,
//! serialize, clean up) is driven by the event dispatcher in [`lifecycle`].
//! [`experiment`] wires everything into the end-to-end prescription study.

pub mod arm;
pub mod contracts;
pub mod experiment;
pub mod ledger;
pub mod lifecycle;
pub mod parallel;
pub mod streaming;

pub use arm::{AssociationRule, ItemTransaction, Itemset, MiningParams};
pub use ledger::{Block, Chain, Digest, Record};
pub use lifecycle::{ArtifactFormat, ModelArtifact};
