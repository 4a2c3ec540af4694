//! Master/worker mining over in-process message queues.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use crossbeam_channel::{bounded, unbounded, Receiver, RecvTimeoutError, Sender};

use super::{check_input, partition_ranges, ParallelError};
use crate::arm::apriori::{count_in, levelwise, Encoded, ItemId, SupportCounter};
use crate::arm::{generate_rules, AssociationRule, ItemTransaction, Itemset, MiningParams};
use crate::lifecycle::{serialize_model, write_artifact, ArtifactFormat, ModelArtifact};

/// Injected misbehaviour, for exercising the failure paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorkerFault {
    /// The worker reports an error on its first counting request.
    FailDuringCounting(usize),
    /// The worker counts normally but never sends its final model part.
    WithholdPart(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterConfig {
    pub n_workers: usize,
    /// How long the master waits at any barrier.
    pub barrier_timeout: Duration,
    pub fault: Option<WorkerFault>,
}

impl ClusterConfig {
    pub fn new(n_workers: usize) -> Result<Self, ParallelError> {
        if n_workers == 0 {
            return Err(ParallelError::InvalidConfig(
                "n_workers must be at least 1".into(),
            ));
        }
        Ok(ClusterConfig {
            n_workers,
            ..Default::default()
        })
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.barrier_timeout = timeout;
        self
    }

    pub fn with_fault(mut self, fault: WorkerFault) -> Self {
        self.fault = Some(fault);
        self
    }
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            n_workers: 1,
            barrier_timeout: Duration::from_secs(30),
            fault: None,
        }
    }
}

/// One worker's contribution: its shard size and the count of every
/// candidate it was asked about, keyed by the sorted item names.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ModelPart {
    pub worker: usize,
    pub n_transactions: u64,
    pub counts: BTreeMap<Vec<String>, u64>,
}

impl ModelPart {
    pub fn count_of(&self, items: &[&str]) -> Option<u64> {
        let mut key: Vec<String> = items.iter().map(|s| s.to_string()).collect();
        key.sort();
        self.counts.get(&key).copied()
    }
}

/// What the master needs to turn the aggregated parts into an artifact.
#[derive(Debug, Clone, PartialEq)]
pub struct PersistSpec {
    pub params: MiningParams,
    pub format: ArtifactFormat,
    pub producer: String,
    pub created_ms: u64,
}

pub enum MppRole<'a> {
    /// Sends its parts to the master and writes nothing.
    Worker { outbox: &'a Sender<ModelPart> },
    /// Aggregates `expected` parts and writes the only artifact to `out`.
    Master {
        out: &'a Path,
        expected: usize,
        spec: &'a PersistSpec,
    },
}

/// Persists the model for one participant. Only the master returns an
/// artifact; it refuses to write unless every part has arrived.
pub fn mpp_serialize(
    role: MppRole<'_>,
    parts: Vec<ModelPart>,
) -> Result<Option<ModelArtifact>, ParallelError> {
    match role {
        MppRole::Worker { outbox } => {
            for part in parts {
                let worker = part.worker;
                outbox
                    .send(part)
                    .map_err(|_| ParallelError::WorkerFailure {
                        worker,
                        reason: "master is gone".into(),
                    })?;
            }
            Ok(None)
        }
        MppRole::Master {
            out,
            expected,
            spec,
        } => {
            if parts.len() != expected {
                return Err(ParallelError::BarrierTimeout {
                    received: parts.len(),
                    expected,
                });
            }
            let rules = aggregate_parts(&parts, &spec.params)?;
            let artifact = serialize_model(&rules, spec.format, &spec.producer, spec.created_ms)?;
            write_artifact(&artifact, out)?;
            Ok(Some(artifact))
        }
    }
}

/// Sums counts per itemset across parts, applies the global thresholds and
/// derives the rules.
pub fn aggregate_parts(
    parts: &[ModelPart],
    params: &MiningParams,
) -> Result<Vec<AssociationRule>, ParallelError> {
    let n: u64 = parts.iter().map(|p| p.n_transactions).sum();
    if n == 0 {
        return Err(crate::arm::ArmError::EmptyInput.into());
    }
    let mut totals: BTreeMap<&[String], u64> = BTreeMap::new();
    for part in parts {
        for (items, c) in &part.counts {
            *totals.entry(items.as_slice()).or_default() += c;
        }
    }
    let mut frequent: Vec<Itemset> = totals
        .into_iter()
        .filter(|(items, c)| items.len() <= params.max_rule_items && params.meets_support(*c, n))
        .map(|(items, count)| Itemset {
            items: items.to_vec(),
            count,
        })
        .collect();
    frequent.sort_by(|a, b| (a.len(), &a.items).cmp(&(b.len(), &b.items)));
    Ok(generate_rules(&frequent, n, params)?)
}

enum ToWorker {
    Count(Arc<Vec<Vec<ItemId>>>),
    Finish,
}

enum ToMaster {
    Counts(Vec<u64>),
    Failed { worker: usize, reason: String },
}

struct MasterCounter {
    workers: Vec<Sender<ToWorker>>,
    replies: Receiver<ToMaster>,
    timeout: Duration,
}

impl MasterCounter {
    fn recv_until(&self, deadline: Instant, received: usize) -> Result<ToMaster, ParallelError> {
        self.replies.recv_deadline(deadline).map_err(|e| match e {
            RecvTimeoutError::Timeout => ParallelError::BarrierTimeout {
                received,
                expected: self.workers.len(),
            },
            RecvTimeoutError::Disconnected => ParallelError::WorkerFailure {
                worker: received,
                reason: "worker hung up".into(),
            },
        })
    }
}

impl SupportCounter for MasterCounter {
    type Error = ParallelError;

    fn count(&mut self, candidates: &[Vec<ItemId>]) -> Result<Vec<u64>, ParallelError> {
        let shared = Arc::new(candidates.to_vec());
        for (i, w) in self.workers.iter().enumerate() {
            w.send(ToWorker::Count(Arc::clone(&shared))).map_err(|_| {
                ParallelError::WorkerFailure {
                    worker: i,
                    reason: "worker hung up".into(),
                }
            })?;
        }
        let deadline = Instant::now() + self.timeout;
        let mut total = vec![0u64; candidates.len()];
        for received in 0..self.workers.len() {
            match self.recv_until(deadline, received)? {
                ToMaster::Counts(counts) => {
                    for (t, c) in total.iter_mut().zip(counts) {
                        *t += c;
                    }
                }
                ToMaster::Failed { worker, reason } => {
                    return Err(ParallelError::WorkerFailure { worker, reason })
                }
            }
        }
        Ok(total)
    }
}

struct Worker<'a> {
    id: usize,
    rows: &'a [Vec<ItemId>],
    vocab: &'a [String],
    fault: Option<WorkerFault>,
}

impl Worker<'_> {
    fn run(self, inbox: Receiver<ToWorker>, replies: Sender<ToMaster>, outbox: Sender<ModelPart>) {
        let mut part = ModelPart {
            worker: self.id,
            n_transactions: self.rows.len() as u64,
            counts: BTreeMap::new(),
        };
        for msg in inbox {
            match msg {
                ToWorker::Count(cands) => {
                    let reply = if self.fault == Some(WorkerFault::FailDuringCounting(self.id)) {
                        Err("injected failure".to_string())
                    } else {
                        count_in(self.rows, self.vocab.len(), &cands).map_err(|e| e.to_string())
                    };
                    let msg = match reply {
                        Ok(counts) => {
                            for (ids, &c) in cands.iter().zip(&counts) {
                                let key = ids
                                    .iter()
                                    .map(|&i| self.vocab[i as usize].clone())
                                    .collect();
                                part.counts.insert(key, c);
                            }
                            ToMaster::Counts(counts)
                        }
                        Err(reason) => ToMaster::Failed {
                            worker: self.id,
                            reason,
                        },
                    };
                    let failed = matches!(msg, ToMaster::Failed { .. });
                    if replies.send(msg).is_err() || failed {
                        return;
                    }
                }
                ToWorker::Finish => {
                    if self.fault != Some(WorkerFault::WithholdPart(self.id)) {
                        // A vanished master is not this worker's problem.
                        let _ = mpp_serialize(MppRole::Worker { outbox: &outbox }, vec![part]);
                    }
                    return;
                }
            }
        }
    }
}

/// Everything the master holds once the aggregation barrier is passed.
#[derive(Debug, Clone)]
pub struct ClusterRun {
    /// Parts in worker order.
    pub parts: Vec<ModelPart>,
}

/// Runs the master/worker exchange up to and including the aggregation
/// barrier. Workers hold disjoint contiguous shards; the master holds none.
pub fn run_cluster(
    txns: &[ItemTransaction],
    params: &MiningParams,
    cluster: &ClusterConfig,
) -> Result<ClusterRun, ParallelError> {
    check_input(txns, params)?;
    let n_workers = ClusterConfig::new(cluster.n_workers)?.n_workers;
    let encoded = Encoded::new(txns);
    let shards = partition_ranges(encoded.rows.len(), n_workers);

    std::thread::scope(|scope| {
        let (reply_tx, reply_rx) = unbounded();
        let (part_tx, part_rx) = bounded(n_workers);
        let mut inboxes = Vec::with_capacity(n_workers);
        for (id, shard) in shards.into_iter().enumerate() {
            let (tx, rx) = unbounded();
            inboxes.push(tx);
            let worker = Worker {
                id,
                rows: &encoded.rows[shard],
                vocab: &encoded.vocab,
                fault: cluster.fault,
            };
            let replies = reply_tx.clone();
            let outbox = part_tx.clone();
            std::thread::Builder::new()
                .name(format!("mpp-worker-{id}"))
                .spawn_scoped(scope, move || worker.run(rx, replies, outbox))
                .map_err(|e| ParallelError::ThreadSetup(e.to_string()))?;
        }
        drop((reply_tx, part_tx));

        let mut master = MasterCounter {
            workers: inboxes,
            replies: reply_rx,
            timeout: cluster.barrier_timeout,
        };
        levelwise(&mut master, encoded.vocab.len(), txns.len() as u64, params)?;

        for w in &master.workers {
            let _ = w.send(ToWorker::Finish);
        }
        let deadline = Instant::now() + cluster.barrier_timeout;
        let mut parts = Vec::with_capacity(n_workers);
        while parts.len() < n_workers {
            match part_rx.recv_deadline(deadline) {
                Ok(p) => parts.push(p),
                Err(_) => {
                    return Err(ParallelError::BarrierTimeout {
                        received: parts.len(),
                        expected: n_workers,
                    })
                }
            }
        }
        parts.sort_by_key(|p: &ModelPart| p.worker);
        Ok(ClusterRun { parts })
    })
}

/// Mines rules on a simulated cluster of `cluster.n_workers` nodes.
pub fn mpp_mine(
    txns: &[ItemTransaction],
    params: &MiningParams,
    cluster: &ClusterConfig,
) -> Result<Vec<AssociationRule>, ParallelError> {
    let run = run_cluster(txns, params, cluster)?;
    aggregate_parts(&run.parts, params)
}

/// Mines on the cluster and has the master write the single artifact to
/// `out`. Nothing is written if any participant misses the barrier.
pub fn mpp_mine_and_persist(
    txns: &[ItemTransaction],
    cluster: &ClusterConfig,
    spec: &PersistSpec,
    out: &Path,
) -> Result<ModelArtifact, ParallelError> {
    let run = run_cluster(txns, &spec.params, cluster)?;
    let role = MppRole::Master {
        out,
        expected: cluster.n_workers,
        spec,
    };
    Ok(mpp_serialize(role, run.parts)?.expect("master always returns the artifact"))
}
