//! Level-wise candidate generation shared by every execution mode.
//!
//! Counting is abstracted behind [`SupportCounter`] so the same level loop
//! drives the sequential miner, the SMP partition counter, the MPP
//! master/worker exchange and the sliding window.

use std::collections::{BTreeMap, HashSet};

use super::{ArmError, ItemTransaction, Itemset, MiningParams};

pub(crate) type ItemId = u32;

/// Transactions re-encoded over a dense, lexicographically ordered item
/// vocabulary. Sorted id vectors therefore sort like the item names.
#[derive(Debug, Clone)]
pub(crate) struct Encoded {
    pub vocab: Vec<String>,
    pub rows: Vec<Vec<ItemId>>,
}

impl Encoded {
    pub fn new(txns: &[ItemTransaction]) -> Self {
        let vocab: Vec<String> = txns
            .iter()
            .flat_map(|t| t.items.iter())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .cloned()
            .collect();
        let index: BTreeMap<&str, ItemId> = vocab
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i as ItemId))
            .collect();
        let rows = txns
            .iter()
            .map(|t| t.items.iter().map(|s| index[s.as_str()]).collect())
            .collect();
        Encoded { vocab, rows }
    }

    pub fn decode(&self, frequent: &[(Vec<ItemId>, u64)]) -> Vec<Itemset> {
        frequent
            .iter()
            .map(|(ids, count)| Itemset {
                items: ids
                    .iter()
                    .map(|&i| self.vocab[i as usize].clone())
                    .collect(),
                count: *count,
            })
            .collect()
    }
}

pub(crate) trait SupportCounter {
    type Error: From<ArmError>;

    /// Number of transactions containing each candidate, in candidate order.
    fn count(&mut self, candidates: &[Vec<ItemId>]) -> Result<Vec<u64>, Self::Error>;
}

pub(crate) struct SequentialCounter<'a> {
    rows: &'a [Vec<ItemId>],
    vocab_len: usize,
}

impl<'a> SequentialCounter<'a> {
    pub fn new(encoded: &'a Encoded) -> Self {
        SequentialCounter {
            rows: &encoded.rows,
            vocab_len: encoded.vocab.len(),
        }
    }
}

impl SupportCounter for SequentialCounter<'_> {
    type Error = ArmError;

    fn count(&mut self, candidates: &[Vec<ItemId>]) -> Result<Vec<u64>, ArmError> {
        count_in(self.rows, self.vocab_len, candidates)
    }
}

/// Counts candidate occurrences over one partition of rows.
pub(crate) fn count_in(
    rows: &[Vec<ItemId>],
    vocab_len: usize,
    candidates: &[Vec<ItemId>],
) -> Result<Vec<u64>, ArmError> {
    let mut counts: Vec<u64> = Vec::new();
    counts
        .try_reserve_exact(candidates.len())
        .map_err(|_| ArmError::OutOfMemory)?;
    counts.resize(candidates.len(), 0);
    let mut present: Vec<bool> = Vec::new();
    present
        .try_reserve_exact(vocab_len)
        .map_err(|_| ArmError::OutOfMemory)?;
    present.resize(vocab_len, false);

    for row in rows {
        for &i in row {
            present[i as usize] = true;
        }
        for (slot, cand) in counts.iter_mut().zip(candidates) {
            if cand.iter().all(|&i| present[i as usize]) {
                *slot += 1;
            }
        }
        for &i in row {
            present[i as usize] = false;
        }
    }
    Ok(counts)
}

/// Joins frequent (k-1)-itemsets sharing a (k-2)-prefix and drops any
/// candidate with an infrequent (k-1)-subset. Input must be sorted.
pub(crate) fn next_candidates(frequent: &[Vec<ItemId>]) -> Vec<Vec<ItemId>> {
    let known: HashSet<&[ItemId]> = frequent.iter().map(Vec::as_slice).collect();
    let mut out = Vec::new();
    for (i, a) in frequent.iter().enumerate() {
        let prefix = &a[..a.len() - 1];
        for b in &frequent[i + 1..] {
            if &b[..b.len() - 1] != prefix {
                break;
            }
            let mut cand = a.clone();
            cand.push(*b.last().unwrap());
            let closed = (0..cand.len()).all(|skip| {
                let sub: Vec<ItemId> = cand
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != skip)
                    .map(|(_, &x)| x)
                    .collect();
                known.contains(sub.as_slice())
            });
            if closed {
                out.push(cand);
            }
        }
    }
    out
}

/// Runs Apriori levels `1..=max_rule_items` against `counter`. Returns
/// frequent itemsets (sorted ids, count) ordered by size, then ids.
pub(crate) fn levelwise<C: SupportCounter>(
    counter: &mut C,
    vocab_len: usize,
    n: u64,
    params: &MiningParams,
) -> Result<Vec<(Vec<ItemId>, u64)>, C::Error> {
    let mut result = Vec::new();
    let mut candidates: Vec<Vec<ItemId>> = (0..vocab_len as ItemId).map(|i| vec![i]).collect();
    let mut k = 1;
    while !candidates.is_empty() && k <= params.max_rule_items {
        let counts = counter.count(&candidates)?;
        let frequent: Vec<(Vec<ItemId>, u64)> = candidates
            .into_iter()
            .zip(counts)
            .filter(|&(_, c)| params.meets_support(c, n))
            .collect();
        let level: Vec<Vec<ItemId>> = frequent.iter().map(|(s, _)| s.clone()).collect();
        result.extend(frequent);
        k += 1;
        candidates = if k <= params.max_rule_items {
            next_candidates(&level)
        } else {
            Vec::new()
        };
    }
    Ok(result)
}
