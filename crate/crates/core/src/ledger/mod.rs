//! Append-only hash-linked block store with leader-based replication.
//!
//! # Canonical block encoding
//!
//! A block hash is the SHA-256 of the following bytes, all integers
//! big-endian:
//!
//! ```text
//! index          u64
//! timestamp_ms   u64
//! prev_hash      32 bytes
//! record_count   u32
//! record_count × {
//!     patient_id u64
//!     item_len   u32
//!     item       item_len bytes of UTF-8
//! }
//! ```
//!
//! The genesis block has index 0, a zeroed `prev_hash` and no records.

mod block;
mod io;
mod network;

pub use block::{canonical_bytes, hash_block, validate_chain, Block, Chain, Digest, Record};
pub use io::{read_chain_jsonl, read_records_csv, write_chain_jsonl, write_records_csv};
pub use network::{
    read_at_rest, ChainStore, Clock, Consensus, FixedClock, LeaderReplication, MemberNode, Network,
    RecordFilter, Role, Subscription, SystemClock,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("node `{0}` is not the leader")]
    NotLeader(String),
    #[error("unknown member `{0}`")]
    UnknownMember(String),
    #[error("refusing to append a block without records")]
    EmptyPayload,
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("chain failed validation")]
    CorruptChain,
    #[error("block {requested} is past the chain tip {tip}")]
    OutOfRange { requested: u64, tip: u64 },
    #[error("member `{member}` rejected block {index}: {reason}")]
    ReplicationRejected {
        member: String,
        index: u64,
        reason: String,
    },
    #[error("network needs at least one member")]
    NoMembers,
    #[error("chain store is closed")]
    Closed,
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
