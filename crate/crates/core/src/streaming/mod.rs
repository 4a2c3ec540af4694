//! Sliding-window mining over a stream of transactions.
//!
//! A [`SlidingWindow`] keeps the most recent `capacity` transactions and
//! evicts strictly first-in first-out. Queries recompute exactly over the
//! buffer, so a window is always equivalent to batch mining of its contents.
//! Single-item counts are maintained incrementally on ingest and evict.

use std::collections::{BTreeMap, VecDeque};
use std::io::Write;
use std::sync::{Arc, Mutex, RwLock};

use thiserror::Error;

use crate::arm::apriori::{count_in, levelwise, Encoded, ItemId, SupportCounter};
use crate::arm::{
    generate_rules, rule_row, ArmError, AssociationRule, ItemTransaction, MiningParams,
    RULE_TABLE_HEADER,
};
use crate::ledger::{Block, Record};
use crate::lifecycle::{decode_model, evaluate_rules, LifecycleError, MetricSpec, ModelArtifact};

#[derive(Debug, Error)]
pub enum StreamingError {
    #[error("window is empty")]
    EmptyWindow,
    #[error("window capacity must be at least 1")]
    ZeroCapacity,
    #[error("stream failed after {after} transactions: {reason}")]
    StreamError { after: u64, reason: String },
    #[error("cannot decode model: {0}")]
    DecodeError(#[source] LifecycleError),
    #[error(transparent)]
    Mining(#[from] ArmError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// What one ingest displaced.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Eviction {
    /// Generation number (1-based) of the ingested transaction.
    pub generation: u64,
    pub evicted: Option<ItemTransaction>,
}

#[derive(Debug, Clone)]
pub struct SlidingWindow {
    capacity: usize,
    buffer: VecDeque<ItemTransaction>,
    generation: u64,
    evicted: u64,
    item_counts: BTreeMap<String, u64>,
}

impl SlidingWindow {
    pub fn new(capacity: usize) -> Result<Self, StreamingError> {
        if capacity == 0 {
            return Err(StreamingError::ZeroCapacity);
        }
        Ok(SlidingWindow {
            capacity,
            buffer: VecDeque::with_capacity(capacity.min(1 << 16)),
            generation: 0,
            evicted: 0,
            item_counts: BTreeMap::new(),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Total transactions ever ingested.
    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn evicted(&self) -> u64 {
        self.evicted
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn transactions(&self) -> impl Iterator<Item = &ItemTransaction> {
        self.buffer.iter()
    }

    /// Single-item counts over the buffer.
    pub fn item_counts(&self) -> &BTreeMap<String, u64> {
        &self.item_counts
    }

    pub fn ingest(&mut self, txn: ItemTransaction) -> Eviction {
        for item in &txn.items {
            *self.item_counts.entry(item.clone()).or_default() += 1;
        }
        self.buffer.push_back(txn);
        self.generation += 1;
        let evicted = (self.buffer.len() > self.capacity).then(|| {
            let old = self
                .buffer
                .pop_front()
                .expect("over capacity implies non-empty");
            for item in &old.items {
                let c = self.item_counts.get_mut(item).expect("counted on ingest");
                *c -= 1;
                if *c == 0 {
                    self.item_counts.remove(item);
                }
            }
            self.evicted += 1;
            old
        });
        Eviction {
            generation: self.generation,
            evicted,
        }
    }

    fn snapshot_rows(&self) -> Vec<ItemTransaction> {
        self.buffer.iter().cloned().collect()
    }
}

/// Answers level one from the memoized counts, deeper levels by scanning.
struct WindowCounter<'a> {
    encoded: &'a Encoded,
    memo: &'a BTreeMap<String, u64>,
}

impl SupportCounter for WindowCounter<'_> {
    type Error = ArmError;

    fn count(&mut self, candidates: &[Vec<ItemId>]) -> Result<Vec<u64>, ArmError> {
        if candidates.iter().all(|c| c.len() == 1) {
            return Ok(candidates
                .iter()
                .map(|c| {
                    self.memo
                        .get(&self.encoded.vocab[c[0] as usize])
                        .copied()
                        .unwrap_or(0)
                })
                .collect());
        }
        count_in(&self.encoded.rows, self.encoded.vocab.len(), candidates)
    }
}

/// Mines the buffered transactions.
pub fn query_window(
    window: &SlidingWindow,
    params: &MiningParams,
) -> Result<Vec<AssociationRule>, StreamingError> {
    params.validate()?;
    if window.is_empty() {
        return Err(StreamingError::EmptyWindow);
    }
    let txns = window.snapshot_rows();
    let encoded = Encoded::new(&txns);
    let mut counter = WindowCounter {
        encoded: &encoded,
        memo: &window.item_counts,
    };
    let n = txns.len() as u64;
    let frequent = levelwise(&mut counter, encoded.vocab.len(), n, params)?;
    Ok(generate_rules(&encoded.decode(&frequent), n, params)?)
}

/// Scores `artifact` against the buffer. An empty window yields no score.
pub fn validate_in_window(
    window: &SlidingWindow,
    artifact: &ModelArtifact,
    metric: MetricSpec,
) -> Result<Option<f64>, StreamingError> {
    let rules = decode_model(artifact).map_err(StreamingError::DecodeError)?;
    Ok(score_window(window, &rules, metric))
}

fn score_window(
    window: &SlidingWindow,
    rules: &[AssociationRule],
    metric: MetricSpec,
) -> Option<f64> {
    if window.is_empty() {
        return None;
    }
    Some(evaluate_rules(rules, &window.snapshot_rows(), metric))
}

/// One point of a windowed validation series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScorePoint {
    pub generation: u64,
    pub score: f64,
}

/// Feeds `stream` through `window`, scoring the model after every ingest.
/// An empty stream returns an empty series; a stream error aborts.
pub fn validate_stream<I, E>(
    window: &mut SlidingWindow,
    stream: I,
    artifact: &ModelArtifact,
    metric: MetricSpec,
) -> Result<Vec<ScorePoint>, StreamingError>
where
    I: IntoIterator<Item = Result<ItemTransaction, E>>,
    E: std::fmt::Display,
{
    let rules = decode_model(artifact).map_err(StreamingError::DecodeError)?;
    let mut series = Vec::new();
    for event in stream {
        let txn = event.map_err(|e| StreamingError::StreamError {
            after: window.generation(),
            reason: e.to_string(),
        })?;
        let generation = window.ingest(txn).generation;
        if let Some(score) = score_window(window, &rules, metric) {
            series.push(ScorePoint { generation, score });
        }
    }
    Ok(series)
}

/// Groups an ordered record stream into transactions. A transaction closes
/// when the patient id changes or [`flush`](Self::flush) is called.
#[derive(Debug, Default)]
pub struct TransactionAssembler {
    current: Option<(u64, Vec<String>)>,
}

impl TransactionAssembler {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: &Record) -> Option<ItemTransaction> {
        match &mut self.current {
            Some((pid, items)) if *pid == record.patient_id => {
                items.push(record.item.clone());
                None
            }
            _ => {
                let done = self.flush();
                self.current = Some((record.patient_id, vec![record.item.clone()]));
                done
            }
        }
    }

    /// Completed transactions from one block, in record order.
    pub fn push_block(&mut self, block: &Block) -> Vec<ItemTransaction> {
        block.records.iter().filter_map(|r| self.push(r)).collect()
    }

    pub fn flush(&mut self) -> Option<ItemTransaction> {
        self.current.take().map(|(pid, items)| {
            ItemTransaction::new(pid, items).expect("records carry at least one item")
        })
    }
}

/// A window with one writer and many readers. Readers get an immutable
/// snapshot that is swapped in only after an ingest is complete.
#[derive(Debug)]
pub struct SharedWindow {
    writer: Mutex<SlidingWindow>,
    published: RwLock<Arc<SlidingWindow>>,
}

impl SharedWindow {
    pub fn new(window: SlidingWindow) -> Self {
        SharedWindow {
            published: RwLock::new(Arc::new(window.clone())),
            writer: Mutex::new(window),
        }
    }

    pub fn ingest(&self, txn: ItemTransaction) -> Eviction {
        let mut w = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        let report = w.ingest(txn);
        let snap = Arc::new(w.clone());
        *self.published.write().unwrap_or_else(|e| e.into_inner()) = snap;
        report
    }

    pub fn snapshot(&self) -> Arc<SlidingWindow> {
        Arc::clone(&self.published.read().unwrap_or_else(|e| e.into_inner()))
    }
}

pub const QUERY_HEADER_PREFIX: [&str; 3] = ["Tick", "Generation", "Window Size"];

/// Appends the result of each continuous-query tick as CSV rows.
pub struct ContinuousQuery<W: Write> {
    out: csv::Writer<W>,
    params: MiningParams,
    tick: u64,
}

impl<W: Write> ContinuousQuery<W> {
    pub fn new(out: W, params: MiningParams) -> Result<Self, StreamingError> {
        params.validate()?;
        let mut out = csv::Writer::from_writer(out);
        out.write_record(QUERY_HEADER_PREFIX.iter().chain(RULE_TABLE_HEADER.iter()))?;
        Ok(ContinuousQuery {
            out,
            params,
            tick: 0,
        })
    }

    /// Queries the window and writes one row per rule. An empty window
    /// still advances the tick but writes nothing.
    pub fn tick(&mut self, window: &SlidingWindow) -> Result<Vec<AssociationRule>, StreamingError> {
        self.tick += 1;
        let rules = match query_window(window, &self.params) {
            Err(StreamingError::EmptyWindow) => return Ok(Vec::new()),
            other => other?,
        };
        let prefix = [
            self.tick.to_string(),
            window.generation().to_string(),
            window.len().to_string(),
        ];
        for rule in &rules {
            self.out
                .write_record(prefix.iter().cloned().chain(rule_row(rule)))?;
        }
        self.out.flush().map_err(csv::Error::from)?;
        Ok(rules)
    }

    pub fn ticks(&self) -> u64 {
        self.tick
    }

    pub fn into_inner(self) -> Result<W, StreamingError> {
        self.out
            .into_inner()
            .map_err(|e| StreamingError::Csv(csv::Error::from(e.into_error())))
    }
}
