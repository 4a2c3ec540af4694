//! Exhaustive reference miner for equivalence testing.
//!
//! Every subset of the item vocabulary is counted directly with a
//! superset-sum over transaction bitmasks, and every split of every
//! frequent itemset is tried as a rule. Nothing here shares code with the
//! Apriori path except the [`AssociationRule`] data type.

use std::collections::BTreeSet;

use super::{ArmError, AssociationRule, ItemTransaction, Itemset, MiningParams};

pub const MAX_ORACLE_ITEMS: usize = 20;
pub const MAX_ORACLE_TRANSACTIONS: usize = 2_000;

pub fn brute_force_rules(
    txns: &[ItemTransaction],
    params: &MiningParams,
) -> Result<Vec<AssociationRule>, ArmError> {
    params.validate()?;
    let vocab: Vec<&String> = txns
        .iter()
        .flat_map(|t| t.items.iter())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if vocab.len() > MAX_ORACLE_ITEMS || txns.len() > MAX_ORACLE_TRANSACTIONS {
        return Err(ArmError::TooLarge {
            items: vocab.len(),
            transactions: txns.len(),
        });
    }
    if txns.is_empty() {
        return Err(ArmError::EmptyInput);
    }
    let m = vocab.len();
    let n = txns.len() as u64;

    // cover[s] = number of transactions whose item mask is a superset of s.
    let mut cover = vec![0u64; 1 << m];
    for t in txns {
        let mask = t
            .items
            .iter()
            .map(|item| 1usize << vocab.binary_search(&item).expect("item in vocabulary"))
            .fold(0, |acc, bit| acc | bit);
        cover[mask] += 1;
    }
    for bit in 0..m {
        for s in 0..(1usize << m) {
            if s & (1 << bit) == 0 {
                cover[s] += cover[s | (1 << bit)];
            }
        }
    }

    let items_of = |mask: usize| -> Vec<String> {
        (0..m)
            .filter(|b| mask & (1 << b) != 0)
            .map(|b| vocab[b].clone())
            .collect()
    };

    let mut rules = Vec::new();
    for set in 1..(1usize << m) {
        let size = set.count_ones() as usize;
        if size < 2 || size > params.max_rule_items {
            continue;
        }
        let count = cover[set];
        if (count as f64 / n as f64) < params.min_support {
            continue;
        }
        let mut lhs = (set - 1) & set;
        while lhs > 0 {
            let rhs = set ^ lhs;
            let (lhs_count, rhs_count) = (cover[lhs], cover[rhs]);
            if count as f64 / lhs_count as f64 >= params.min_confidence {
                rules.push(AssociationRule {
                    lhs: Itemset {
                        items: items_of(lhs),
                        count: lhs_count,
                    },
                    rhs: Itemset {
                        items: items_of(rhs),
                        count: rhs_count,
                    },
                    count,
                    support: count as f64 / n as f64,
                    confidence: count as f64 / lhs_count as f64,
                    lift: (count as f64 * n as f64) / (lhs_count as f64 * rhs_count as f64),
                });
            }
            lhs = (lhs - 1) & set;
        }
    }
    rules.sort_by(|a, b| a.count.cmp(&b.count).then_with(|| a.text().cmp(&b.text())));
    Ok(rules)
}

fn close(a: f64, b: f64, rel_tol: f64) -> bool {
    a == b || (a - b).abs() <= rel_tol * a.abs().max(b.abs())
}

/// Checks two rule lists for identical rules and counts (in order) with
/// statistics agreeing to `rel_tol`. Returns a description of the first
/// difference.
pub fn compare_rule_sets(
    actual: &[AssociationRule],
    expected: &[AssociationRule],
    rel_tol: f64,
) -> Result<(), String> {
    if actual.len() != expected.len() {
        return Err(format!(
            "{} rules vs {} expected",
            actual.len(),
            expected.len()
        ));
    }
    for (a, e) in actual.iter().zip(expected) {
        if a.lhs != e.lhs || a.rhs != e.rhs || a.count != e.count {
            return Err(format!(
                "rule `{}` ({}) vs `{}` ({})",
                a, a.count, e, e.count
            ));
        }
        for (name, x, y) in [
            ("support", a.support, e.support),
            ("confidence", a.confidence, e.confidence),
            ("lift", a.lift, e.lift),
        ] {
            if !close(x, y, rel_tol) {
                return Err(format!("rule `{a}`: {name} {x} vs {y}"));
            }
        }
    }
    Ok(())
}
