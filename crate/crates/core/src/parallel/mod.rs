//! Server-layer execution by count distribution.
//!
//! Data is split into contiguous partitions, every partition counts the same
//! candidate list, and the per-partition counts are summed before the
//! support threshold is applied. Both modes therefore reproduce the
//! sequential miner exactly.
//!
//! SMP runs the partitions on a rayon pool (or in a plain loop when the
//! `parallel` feature is off). MPP simulates a master and worker nodes as
//! threads that only talk over channels; the master is the only writer.

mod mpp;

use std::ops::Range;

use thiserror::Error;

use crate::arm::apriori::{count_in, levelwise, Encoded, ItemId, SupportCounter};
use crate::arm::{generate_rules, ArmError, AssociationRule, ItemTransaction, MiningParams};
use crate::lifecycle::LifecycleError;

pub use mpp::{
    aggregate_parts, mpp_mine, mpp_mine_and_persist, mpp_serialize, run_cluster, ClusterConfig,
    ClusterRun, ModelPart, MppRole, PersistSpec, WorkerFault,
};

#[derive(Debug, Error)]
pub enum ParallelError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("could not set up threads: {0}")]
    ThreadSetup(String),
    #[error("out of memory while counting candidates")]
    OutOfMemory,
    #[error("worker {worker} failed: {reason}")]
    WorkerFailure { worker: usize, reason: String },
    #[error("aggregation barrier timed out with {received} of {expected} parts")]
    BarrierTimeout { received: usize, expected: usize },
    #[error(transparent)]
    Arm(ArmError),
    #[error("persisting model: {0}")]
    Persist(#[source] Box<LifecycleError>),
}

impl From<ArmError> for ParallelError {
    fn from(e: ArmError) -> Self {
        match e {
            ArmError::OutOfMemory => ParallelError::OutOfMemory,
            other => ParallelError::Arm(other),
        }
    }
}

impl From<LifecycleError> for ParallelError {
    fn from(e: LifecycleError) -> Self {
        ParallelError::Persist(Box::new(e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ThreadPoolConfig {
    pub n_threads: usize,
}

impl ThreadPoolConfig {
    pub fn new(n_threads: usize) -> Result<Self, ParallelError> {
        if n_threads == 0 {
            return Err(ParallelError::InvalidConfig(
                "n_threads must be at least 1".into(),
            ));
        }
        Ok(ThreadPoolConfig { n_threads })
    }
}

/// Splits `0..n` into `parts` contiguous ranges whose lengths differ by at
/// most one, longer ranges first. `parts` must be non-zero.
pub fn partition_ranges(n: usize, parts: usize) -> Vec<Range<usize>> {
    assert!(parts > 0, "at least one partition");
    let base = n / parts;
    let extra = n % parts;
    let mut start = 0;
    (0..parts)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

fn check_input(txns: &[ItemTransaction], params: &MiningParams) -> Result<(), ParallelError> {
    params.validate()?;
    if txns.is_empty() {
        return Err(ArmError::EmptyInput.into());
    }
    Ok(())
}

struct PartitionCounter<'a> {
    partitions: Vec<&'a [Vec<ItemId>]>,
    vocab_len: usize,
    #[cfg(feature = "parallel")]
    pool: rayon::ThreadPool,
}

impl SupportCounter for PartitionCounter<'_> {
    type Error = ParallelError;

    fn count(&mut self, candidates: &[Vec<ItemId>]) -> Result<Vec<u64>, ParallelError> {
        let vocab_len = self.vocab_len;
        #[cfg(feature = "parallel")]
        let partials: Result<Vec<Vec<u64>>, ArmError> = {
            use rayon::prelude::*;
            let parts = &self.partitions;
            self.pool.install(|| {
                parts
                    .par_iter()
                    .map(|rows| count_in(rows, vocab_len, candidates))
                    .collect()
            })
        };
        #[cfg(not(feature = "parallel"))]
        let partials: Result<Vec<Vec<u64>>, ArmError> = self
            .partitions
            .iter()
            .map(|rows| count_in(rows, vocab_len, candidates))
            .collect();

        // Level barrier: every partition has reported before the merge.
        let mut total = vec![0u64; candidates.len()];
        for part in partials? {
            for (t, c) in total.iter_mut().zip(part) {
                *t += c;
            }
        }
        Ok(total)
    }
}

/// Mines rules with `pool.n_threads` partitions counted concurrently.
pub fn smp_mine(
    txns: &[ItemTransaction],
    params: &MiningParams,
    pool: &ThreadPoolConfig,
) -> Result<Vec<AssociationRule>, ParallelError> {
    check_input(txns, params)?;
    let threads = ThreadPoolConfig::new(pool.n_threads)?.n_threads;
    let encoded = Encoded::new(txns);
    let partitions = partition_ranges(encoded.rows.len(), threads)
        .into_iter()
        .map(|r| &encoded.rows[r])
        .collect();
    let mut counter = PartitionCounter {
        partitions,
        vocab_len: encoded.vocab.len(),
        #[cfg(feature = "parallel")]
        pool: rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .thread_name(|i| format!("smp-{i}"))
            .build()
            .map_err(|e| ParallelError::ThreadSetup(e.to_string()))?,
    };
    let n = txns.len() as u64;
    let frequent = levelwise(&mut counter, encoded.vocab.len(), n, params)?;
    Ok(generate_rules(&encoded.decode(&frequent), n, params)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arm::fixtures::d5;
    use crate::arm::mine_rules;

    #[test]
    fn partitions_are_contiguous_and_complete() {
        let lens: Vec<usize> = partition_ranges(5, 3).iter().map(|r| r.len()).collect();
        assert_eq!(lens, [2, 2, 1]);
        assert_eq!(partition_ranges(5, 2), vec![0..3, 3..5]);
        assert_eq!(partition_ranges(2, 4), vec![0..1, 1..2, 2..2, 2..2]);
        for n in 0..30 {
            for k in 1..9 {
                let rs = partition_ranges(n, k);
                assert_eq!(rs.len(), k);
                assert_eq!(rs[0].start, 0);
                assert_eq!(rs[k - 1].end, n);
                assert!(rs.windows(2).all(|w| w[0].end == w[1].start));
            }
        }
    }

    #[test]
    fn smp_matches_sequential_on_d5() {
        let params = MiningParams::new(0.6, 0.75, 3).unwrap();
        let expected = mine_rules(&d5(), &params).unwrap();
        for t in 1..=8 {
            let got = smp_mine(&d5(), &params, &ThreadPoolConfig::new(t).unwrap()).unwrap();
            assert_eq!(got, expected, "threads = {t}");
        }
    }

    #[test]
    fn smp_rejects_bad_input() {
        let params = MiningParams::default();
        let pool = ThreadPoolConfig { n_threads: 2 };
        assert!(matches!(
            smp_mine(&[], &params, &pool),
            Err(ParallelError::Arm(ArmError::EmptyInput))
        ));
        assert!(matches!(
            smp_mine(&d5(), &params, &ThreadPoolConfig { n_threads: 0 }),
            Err(ParallelError::InvalidConfig(_))
        ));
    }
}
