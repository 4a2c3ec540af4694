use std::collections::VecDeque;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::time::{SystemTime, UNIX_EPOCH};

use super::block::{validate_chain, Block, Chain, Record};
use super::LedgerError;

/// Source of block timestamps in milliseconds since the epoch.
pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    }
}

/// Deterministic clock: returns `start`, `start + step`, `start + 2·step`, ...
#[derive(Debug)]
pub struct FixedClock {
    start: u64,
    step: u64,
    ticks: AtomicU64,
}

impl FixedClock {
    pub fn new(start: u64, step: u64) -> Self {
        FixedClock {
            start,
            step,
            ticks: AtomicU64::new(0),
        }
    }
}

impl Clock for FixedClock {
    fn now_ms(&self) -> u64 {
        let n = self.ticks.fetch_add(1, Ordering::SeqCst);
        self.start + n * self.step
    }
}

struct StoreState {
    chain: Chain,
    closed: bool,
}

/// A member's copy of the chain. Appends and reads may interleave from
/// different threads; readers always see whole blocks.
pub struct ChainStore {
    state: Mutex<StoreState>,
    appended: Condvar,
}

impl ChainStore {
    pub fn new(chain: Chain) -> Arc<Self> {
        Arc::new(ChainStore {
            state: Mutex::new(StoreState {
                chain,
                closed: false,
            }),
            appended: Condvar::new(),
        })
    }

    fn lock(&self) -> MutexGuard<'_, StoreState> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn snapshot(&self) -> Chain {
        self.lock().chain.clone()
    }

    pub fn len(&self) -> usize {
        self.lock().chain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn tip(&self) -> Option<Block> {
        self.lock().chain.tip().cloned()
    }

    pub(crate) fn push(&self, block: Block) -> Result<(), String> {
        let mut state = self.lock();
        if state.closed {
            return Err("store is closed".into());
        }
        state.chain.check_successor(&block)?;
        state.chain.blocks.push(block);
        drop(state);
        self.appended.notify_all();
        Ok(())
    }

    /// Marks the chain as finished. Subscriptions drain what is left and end.
    pub fn close(&self) {
        self.lock().closed = true;
        self.appended.notify_all();
    }

    pub fn is_closed(&self) -> bool {
        self.lock().closed
    }

    /// Streams records starting at block `from_block`, then keeps following
    /// new appends until the store is closed.
    pub fn subscribe(self: &Arc<Self>, from_block: u64) -> Result<Subscription, LedgerError> {
        let tip = self
            .lock()
            .chain
            .tip()
            .map(|b| b.index)
            .ok_or(LedgerError::CorruptChain)?;
        if from_block > tip {
            return Err(LedgerError::OutOfRange {
                requested: from_block,
                tip,
            });
        }
        Ok(Subscription {
            store: Arc::clone(self),
            next_block: from_block,
            pending: VecDeque::new(),
        })
    }
}

/// Ordered record stream over a [`ChainStore`]. Each block's records are
/// taken under one lock, so a block is never observed half-appended.
pub struct Subscription {
    store: Arc<ChainStore>,
    next_block: u64,
    pending: VecDeque<Record>,
}

impl Subscription {
    /// Non-blocking variant of `next`: returns `None` when nothing is
    /// available yet, even if the store is still open.
    pub fn poll(&mut self) -> Option<Record> {
        if self.pending.is_empty() {
            let store = Arc::clone(&self.store);
            let state = store.lock();
            self.take_ready(&state.chain);
        }
        self.pending.pop_front()
    }

    /// Index of the next block this subscription will read.
    pub fn position(&self) -> u64 {
        self.next_block
    }

    fn take_ready(&mut self, chain: &Chain) {
        while let Some(block) = chain.blocks.get(self.next_block as usize) {
            self.pending.extend(block.records.iter().cloned());
            self.next_block += 1;
        }
    }
}

impl Iterator for Subscription {
    type Item = Record;

    fn next(&mut self) -> Option<Record> {
        loop {
            if let Some(r) = self.pending.pop_front() {
                return Some(r);
            }
            let store = Arc::clone(&self.store);
            let mut state = store.lock();
            while state.chain.len() as u64 <= self.next_block && !state.closed {
                state = store
                    .appended
                    .wait(state)
                    .unwrap_or_else(|e| e.into_inner());
            }
            if state.chain.len() as u64 <= self.next_block {
                return None;
            }
            self.take_ready(&state.chain);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Leader,
    Follower,
}

pub struct MemberNode {
    pub node_id: String,
    pub role: Role,
    store: Arc<ChainStore>,
}

impl MemberNode {
    pub fn chain(&self) -> Chain {
        self.store.snapshot()
    }

    pub fn store(&self) -> &Arc<ChainStore> {
        &self.store
    }
}

/// Ordering/replication strategy for new blocks.
pub trait Consensus: Send + Sync {
    /// Delivers `block` to every member. Must not return until all members
    /// hold it.
    fn replicate(
        &self,
        block: &Block,
        leader: &MemberNode,
        followers: &[&MemberNode],
    ) -> Result<(), LedgerError>;
}

/// Synchronous single-leader replication: the leader commits, then pushes
/// the block to each follower, which re-verifies it before accepting.
#[derive(Debug, Default, Clone, Copy)]
pub struct LeaderReplication;

impl Consensus for LeaderReplication {
    fn replicate(
        &self,
        block: &Block,
        leader: &MemberNode,
        followers: &[&MemberNode],
    ) -> Result<(), LedgerError> {
        for member in std::iter::once(leader).chain(followers.iter().copied()) {
            member.store.push(block.clone()).map_err(|reason| {
                LedgerError::ReplicationRejected {
                    member: member.node_id.clone(),
                    index: block.index,
                    reason,
                }
            })?;
        }
        Ok(())
    }
}

/// Permissioned network of members sharing one chain. The first member is
/// the leader; appends are serialized through it.
pub struct Network {
    members: Vec<MemberNode>,
    consensus: Box<dyn Consensus>,
    clock: Arc<dyn Clock>,
    append_lock: Mutex<()>,
}

impl Network {
    pub fn new(member_ids: &[&str], clock: Arc<dyn Clock>) -> Result<Self, LedgerError> {
        Self::with_consensus(member_ids, clock, Box::new(LeaderReplication))
    }

    pub fn with_consensus(
        member_ids: &[&str],
        clock: Arc<dyn Clock>,
        consensus: Box<dyn Consensus>,
    ) -> Result<Self, LedgerError> {
        if member_ids.is_empty() {
            return Err(LedgerError::NoMembers);
        }
        let genesis = Chain::new(clock.now_ms());
        let members = member_ids
            .iter()
            .enumerate()
            .map(|(i, id)| MemberNode {
                node_id: (*id).to_string(),
                role: if i == 0 { Role::Leader } else { Role::Follower },
                store: ChainStore::new(genesis.clone()),
            })
            .collect();
        Ok(Network {
            members,
            consensus,
            clock,
            append_lock: Mutex::new(()),
        })
    }

    pub fn members(&self) -> &[MemberNode] {
        &self.members
    }

    pub fn member(&self, node_id: &str) -> Option<&MemberNode> {
        self.members.iter().find(|m| m.node_id == node_id)
    }

    pub fn leader(&self) -> &MemberNode {
        &self.members[0]
    }

    /// Appends a block of `records` through `node_id`, which must be the
    /// leader, and replicates it to every follower before returning.
    pub fn append_block(&self, node_id: &str, records: Vec<Record>) -> Result<Block, LedgerError> {
        let node = self
            .member(node_id)
            .ok_or_else(|| LedgerError::UnknownMember(node_id.to_string()))?;
        if node.role != Role::Leader {
            return Err(LedgerError::NotLeader(node_id.to_string()));
        }
        if records.is_empty() {
            return Err(LedgerError::EmptyPayload);
        }

        let _writer = self.append_lock.lock().unwrap_or_else(|e| e.into_inner());
        let tip = node.store.tip().ok_or(LedgerError::CorruptChain)?;
        let timestamp = self.clock.now_ms().max(tip.timestamp);
        let block = Block::seal(tip.index + 1, timestamp, tip.hash, records);
        let followers: Vec<&MemberNode> = self.members[1..].iter().collect();
        self.consensus.replicate(&block, node, &followers)?;
        Ok(block)
    }

    /// Closes every member's store; open subscriptions end once drained.
    pub fn close(&self) {
        for m in &self.members {
            m.store.close();
        }
    }
}

/// Record predicate for [`read_at_rest`]. Unset fields match anything.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RecordFilter {
    pub patient_id: Option<u64>,
    pub item: Option<String>,
}

impl RecordFilter {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn patient(patient_id: u64) -> Self {
        RecordFilter {
            patient_id: Some(patient_id),
            item: None,
        }
    }

    pub fn item(item: impl Into<String>) -> Self {
        RecordFilter {
            patient_id: None,
            item: Some(item.into()),
        }
    }

    pub fn matches(&self, record: &Record) -> bool {
        self.patient_id.is_none_or(|p| p == record.patient_id)
            && self.item.as_deref().is_none_or(|i| i == record.item)
    }
}

/// All records of a validated chain that pass `filter`, in block order.
pub fn read_at_rest(chain: &Chain, filter: &RecordFilter) -> Result<Vec<Record>, LedgerError> {
    if !validate_chain(chain) {
        return Err(LedgerError::CorruptChain);
    }
    Ok(chain
        .blocks
        .iter()
        .flat_map(|b| b.records.iter())
        .filter(|r| filter.matches(r))
        .cloned()
        .collect())
}
