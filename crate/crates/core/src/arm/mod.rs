//! Apriori frequent-itemset mining and association rule generation.
//!
//! Support is measured against the number of transactions (patients), not
//! records. A rule `lhs ==> rhs` carries
//!
//! - `support    = count / N`
//! - `confidence = count / count(lhs)`
//! - `lift       = confidence / (count(rhs) / N)`
//!
//! where `count` is the number of transactions containing `lhs ∪ rhs`.

pub(crate) mod apriori;
pub mod oracle;
mod table;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::Record;

pub use oracle::{brute_force_rules, compare_rule_sets};
pub(crate) use table::rule_row;
pub use table::{
    format_rule_table, parse_rule_table, write_rule_table, RuleRow, RULE_TABLE_HEADER,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArmError {
    #[error("no transactions to mine")]
    EmptyInput,
    #[error("invalid mining parameters: {0}")]
    InvalidParams(String),
    #[error("transaction for patient {0} has no items")]
    EmptyTransaction(u64),
    #[error("frequent itemset list lacks subset {0:?}")]
    MissingSubset(Vec<String>),
    #[error(
        "instance too large for exhaustive enumeration: {items} items, {transactions} transactions"
    )]
    TooLarge { items: usize, transactions: usize },
    #[error("could not allocate counting buffers")]
    OutOfMemory,
}

/// One patient's deduplicated prescription set.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ItemTransaction {
    pub patient_id: u64,
    pub items: BTreeSet<String>,
}

impl ItemTransaction {
    pub fn new<I, S>(patient_id: u64, items: I) -> Result<Self, ArmError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let items: BTreeSet<String> = items.into_iter().map(Into::into).collect();
        if items.is_empty() {
            return Err(ArmError::EmptyTransaction(patient_id));
        }
        Ok(ItemTransaction { patient_id, items })
    }

    pub fn contains_all(&self, items: &[String]) -> bool {
        items.iter().all(|i| self.items.contains(i))
    }
}

/// A sorted set of items and the number of transactions containing it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Itemset {
    pub items: Vec<String>,
    pub count: u64,
}

impl Itemset {
    pub fn new<I, S>(items: I, count: u64) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut items: Vec<String> = items.into_iter().map(Into::into).collect();
        items.sort();
        items.dedup();
        Itemset { items, count }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationRule {
    /// Antecedent, with its own transaction count.
    pub lhs: Itemset,
    /// Consequent, with its own transaction count.
    pub rhs: Itemset,
    /// Transactions containing `lhs ∪ rhs`.
    pub count: u64,
    pub support: f64,
    pub confidence: f64,
    pub lift: f64,
}

impl AssociationRule {
    /// Builds a rule from raw counts over `n` transactions.
    pub fn from_counts(lhs: Itemset, rhs: Itemset, count: u64, n: u64) -> Self {
        let support = count as f64 / n as f64;
        let confidence = count as f64 / lhs.count as f64;
        let lift = confidence / (rhs.count as f64 / n as f64);
        AssociationRule {
            lhs,
            rhs,
            count,
            support,
            confidence,
            lift,
        }
    }

    /// Human-readable form, e.g. `actiq & fentora ==> meperidine`.
    pub fn text(&self) -> String {
        format!(
            "{} ==> {}",
            self.lhs.items.join(" & "),
            self.rhs.items.join(" & ")
        )
    }

    pub fn item_count(&self) -> usize {
        self.lhs.len() + self.rhs.len()
    }
}

impl fmt::Display for AssociationRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiningParams {
    pub min_support: f64,
    pub min_confidence: f64,
    /// Upper bound on `|lhs| + |rhs|`, and therefore on mined itemset size.
    pub max_rule_items: usize,
}

impl Default for MiningParams {
    fn default() -> Self {
        MiningParams {
            min_support: 0.20,
            min_confidence: 0.70,
            max_rule_items: 3,
        }
    }
}

impl MiningParams {
    pub fn new(
        min_support: f64,
        min_confidence: f64,
        max_rule_items: usize,
    ) -> Result<Self, ArmError> {
        let params = MiningParams {
            min_support,
            min_confidence,
            max_rule_items,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), ArmError> {
        let unit = |x: f64| x > 0.0 && x <= 1.0;
        if !unit(self.min_support) {
            return Err(ArmError::InvalidParams(format!(
                "min_support {} not in (0, 1]",
                self.min_support
            )));
        }
        if !unit(self.min_confidence) {
            return Err(ArmError::InvalidParams(format!(
                "min_confidence {} not in (0, 1]",
                self.min_confidence
            )));
        }
        if self.max_rule_items < 2 {
            return Err(ArmError::InvalidParams(format!(
                "max_rule_items {} below 2",
                self.max_rule_items
            )));
        }
        Ok(())
    }

    pub(crate) fn meets_support(&self, count: u64, n: u64) -> bool {
        count as f64 / n as f64 >= self.min_support
    }

    pub(crate) fn meets_confidence(&self, count: u64, lhs_count: u64) -> bool {
        count as f64 / lhs_count as f64 >= self.min_confidence
    }
}

/// Groups records into one transaction per patient, in order of each
/// patient's first appearance. Duplicate drugs collapse.
pub fn group_transactions(records: &[Record]) -> Vec<ItemTransaction> {
    let mut order: Vec<u64> = Vec::new();
    let mut items: HashMap<u64, BTreeSet<String>> = HashMap::new();
    for r in records {
        items
            .entry(r.patient_id)
            .or_insert_with(|| {
                order.push(r.patient_id);
                BTreeSet::new()
            })
            .insert(r.item.clone());
    }
    order
        .into_iter()
        .map(|patient_id| ItemTransaction {
            patient_id,
            items: items.remove(&patient_id).unwrap_or_default(),
        })
        .collect()
}

/// Level-wise Apriori. Returns every itemset of size `1..=max_rule_items`
/// whose support reaches `min_support`, ordered by size then items.
pub fn mine_frequent_itemsets(
    txns: &[ItemTransaction],
    params: &MiningParams,
) -> Result<Vec<Itemset>, ArmError> {
    params.validate()?;
    if txns.is_empty() {
        return Err(ArmError::EmptyInput);
    }
    let encoded = apriori::Encoded::new(txns);
    let mut counter = apriori::SequentialCounter::new(&encoded);
    let frequent =
        apriori::levelwise(&mut counter, encoded.vocab.len(), txns.len() as u64, params)?;
    Ok(encoded.decode(&frequent))
}

/// Derives all rules `lhs ==> rhs` from a downward-closed frequent set,
/// sorted by support then rule text.
pub fn generate_rules(
    frequent: &[Itemset],
    n: u64,
    params: &MiningParams,
) -> Result<Vec<AssociationRule>, ArmError> {
    params.validate()?;
    if n == 0 {
        return Err(ArmError::EmptyInput);
    }
    let counts: HashMap<&[String], u64> = frequent
        .iter()
        .map(|s| (s.items.as_slice(), s.count))
        .collect();
    let lookup = |items: &[String]| {
        counts
            .get(items)
            .copied()
            .ok_or_else(|| ArmError::MissingSubset(items.to_vec()))
    };

    let mut rules = Vec::new();
    for set in frequent {
        let k = set.len();
        if k < 2 || k > params.max_rule_items || !params.meets_support(set.count, n) {
            continue;
        }
        // Every non-empty proper subset of the itemset is a candidate lhs.
        for mask in 1..(1u64 << k) - 1 {
            let (lhs, rhs): (Vec<_>, Vec<_>) = set
                .items
                .iter()
                .enumerate()
                .partition(|(i, _)| mask & (1 << i) != 0);
            let lhs: Vec<String> = lhs.into_iter().map(|(_, s)| s.clone()).collect();
            let rhs: Vec<String> = rhs.into_iter().map(|(_, s)| s.clone()).collect();
            let lhs_count = lookup(&lhs)?;
            if !params.meets_confidence(set.count, lhs_count) {
                continue;
            }
            let rhs_count = lookup(&rhs)?;
            rules.push(AssociationRule::from_counts(
                Itemset {
                    items: lhs,
                    count: lhs_count,
                },
                Itemset {
                    items: rhs,
                    count: rhs_count,
                },
                set.count,
                n,
            ));
        }
    }
    sort_rules(&mut rules);
    Ok(rules)
}

pub(crate) fn sort_rules(rules: &mut [AssociationRule]) {
    rules.sort_by_cached_key(|r| (r.count, r.text()));
}

/// The full sequential pipeline: frequent itemsets, then rules.
pub fn mine_rules(
    txns: &[ItemTransaction],
    params: &MiningParams,
) -> Result<Vec<AssociationRule>, ArmError> {
    let frequent = mine_frequent_itemsets(txns, params)?;
    generate_rules(&frequent, txns.len() as u64, params)
}

/// How a rule performs on a scoring set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleScore {
    /// Transactions containing the lhs.
    pub lhs_hits: u64,
    /// Transactions containing both lhs and rhs.
    pub both_hits: u64,
    /// `both_hits / lhs_hits`, or `None` when the lhs never fires.
    pub confidence: Option<f64>,
}

pub fn score_rules(model: &[AssociationRule], txns: &[ItemTransaction]) -> Vec<RuleScore> {
    model
        .iter()
        .map(|rule| {
            let mut lhs_hits = 0;
            let mut both_hits = 0;
            for t in txns {
                if t.contains_all(&rule.lhs.items) {
                    lhs_hits += 1;
                    if t.contains_all(&rule.rhs.items) {
                        both_hits += 1;
                    }
                }
            }
            RuleScore {
                lhs_hits,
                both_hits,
                confidence: (lhs_hits > 0).then(|| both_hits as f64 / lhs_hits as f64),
            }
        })
        .collect()
}

/// Count of each single item across `txns`.
pub fn item_frequencies(txns: &[ItemTransaction]) -> BTreeMap<String, u64> {
    let mut freq = BTreeMap::new();
    for t in txns {
        for item in &t.items {
            *freq.entry(item.clone()).or_insert(0) += 1;
        }
    }
    freq
}


#[cfg(test)]
mod tests {
    use super::fixtures::d5;
    use super::*;

    fn params(s: f64, c: f64) -> MiningParams {
        MiningParams::new(s, c, 3).unwrap()
    }

    #[test]
    fn groups_fig3_rows_into_two_transactions() {
        let drugs0 = [
            "actiq",
            "meperidine",
            "fentora",
            "methadone",
            "lorcet",
            "acetaminophen",
            "duragesic",
        ];
        let drugs1 = [
            "morphine",
            "hysingla",
            "actiq",
            "percocet",
            "oxycodone",
            "fentora",
            "meperidine",
        ];
        let records: Vec<Record> = drugs0
            .iter()
            .map(|d| Record::new(0, *d).unwrap())
            .chain(drugs1.iter().map(|d| Record::new(1, *d).unwrap()))
            .collect();
        let txns = group_transactions(&records);
        assert_eq!(txns.len(), 2);
        assert_eq!(txns[0].patient_id, 0);
        assert!(txns.iter().all(|t| t.items.len() == 7));
    }

    #[test]
    fn grouping_deduplicates_and_handles_empty() {
        assert!(group_transactions(&[]).is_empty());
        let r = Record::new(9, "actiq").unwrap();
        let txns = group_transactions(&[r.clone(), r.clone(), Record::new(9, "lorcet").unwrap()]);
        assert_eq!(txns.len(), 1);
        assert_eq!(txns[0].items.len(), 2);
    }

    // Expected counts from enumerating all seven non-empty subsets of
    // {a, b, c} against D5 by hand.
    #[test]
    fn d5_frequent_itemsets() {
        let frequent = mine_frequent_itemsets(&d5(), &params(0.6, 0.5)).unwrap();
        let expected = vec![
            Itemset::new(["a"], 4),
            Itemset::new(["b"], 4),
            Itemset::new(["c"], 4),
            Itemset::new(["a", "b"], 3),
            Itemset::new(["a", "c"], 3),
            Itemset::new(["b", "c"], 3),
        ];
        assert_eq!(frequent, expected);
    }

    #[test]
    fn d5_full_support_is_empty() {
        assert!(mine_frequent_itemsets(&d5(), &params(1.0, 0.5))
            .unwrap()
            .is_empty());
    }

    #[test]
    fn single_transaction() {
        let txns = vec![ItemTransaction::new(0, ["x"]).unwrap()];
        assert_eq!(
            mine_frequent_itemsets(&txns, &params(0.5, 0.5)).unwrap(),
            vec![Itemset::new(["x"], 1)]
        );
    }

    #[test]
    fn empty_input_errors() {
        assert_eq!(
            mine_frequent_itemsets(&[], &params(0.5, 0.5)),
            Err(ArmError::EmptyInput)
        );
        assert_eq!(
            mine_rules(&[], &params(0.5, 0.5)),
            Err(ArmError::EmptyInput)
        );
    }

    #[test]
    fn d5_rules_at_three_quarters_confidence() {
        let rules = mine_rules(&d5(), &params(0.6, 0.75)).unwrap();
        let texts: Vec<String> = rules.iter().map(|r| r.text()).collect();
        assert_eq!(
            texts,
            ["a ==> b", "a ==> c", "b ==> a", "b ==> c", "c ==> a", "c ==> b"]
        );
        for r in &rules {
            assert_eq!(r.count, 3);
            assert_eq!(r.support, 0.6);
            assert_eq!(r.confidence, 0.75);
            assert!((r.lift - 0.9375).abs() < 1e-12);
        }
    }

    #[test]
    fn d5_full_confidence_has_no_rules() {
        assert!(mine_rules(&d5(), &params(0.6, 1.0)).unwrap().is_empty());
    }

    #[test]
    fn generate_rules_reports_missing_subset() {
        let frequent = vec![Itemset::new(["a"], 4), Itemset::new(["a", "b"], 3)];
        assert_eq!(
            generate_rules(&frequent, 5, &params(0.6, 0.5)),
            Err(ArmError::MissingSubset(vec!["b".into()]))
        );
    }

    #[test]
    fn reference_row_arithmetic() {
        // 202 patients hold {actiq, fentora, meperidine}; 78.90625% confidence
        // pins the antecedent count at 256.
        let n = 1001;
        let count = 202u64;
        let lhs_count = (count as f64 / 0.7890625).round() as u64;
        assert_eq!(lhs_count, 256);
        assert_eq!(lhs_count as f64 * 0.7890625, 202.0);
        let rule = AssociationRule::from_counts(
            Itemset::new(["actiq", "fentora"], lhs_count),
            Itemset::new(["meperidine"], 300),
            count,
            n,
        );
        assert!((rule.support * 100.0 - 20.17982018).abs() < 1e-6);
        assert_eq!(rule.confidence, 0.7890625);
        assert_eq!(rule.text(), "actiq & fentora ==> meperidine");
    }

    #[test]
    fn params_validation() {
        assert!(MiningParams::new(0.0, 0.5, 3).is_err());
        assert!(MiningParams::new(0.5, 1.5, 3).is_err());
        assert!(MiningParams::new(0.5, 0.5, 1).is_err());
        assert!(MiningParams::new(f64::NAN, 0.5, 3).is_err());
        let d = MiningParams::default();
        assert_eq!(
            (d.min_support, d.min_confidence, d.max_rule_items),
            (0.2, 0.7, 3)
        );
    }

    #[test]
    fn scoring_on_training_data_reproduces_confidence() {
        let rules = mine_rules(&d5(), &params(0.6, 0.75)).unwrap();
        for (rule, score) in rules.iter().zip(score_rules(&rules, &d5())) {
            assert_eq!(score.confidence, Some(rule.confidence));
        }
    }

    #[test]
    fn scoring_hand_cases() {
        let rule =
            AssociationRule::from_counts(Itemset::new(["a"], 1), Itemset::new(["b"], 1), 1, 2);
        let data = vec![
            ItemTransaction::new(0, ["a"]).unwrap(),
            ItemTransaction::new(1, ["a", "b"]).unwrap(),
        ];
        assert_eq!(score_rules(&[rule], &data)[0].confidence, Some(0.5));

        let rule =
            AssociationRule::from_counts(Itemset::new(["x"], 1), Itemset::new(["y"], 1), 1, 2);
        let s = score_rules(&[rule], &data)[0];
        assert_eq!((s.lhs_hits, s.confidence), (0, None));
    }

    #[test]
    fn max_rule_items_bounds_itemset_size() {
        let txns: Vec<ItemTransaction> = (0..4)
            .map(|i| ItemTransaction::new(i, ["a", "b", "c", "d"]).unwrap())
            .collect();
        let p = MiningParams::new(0.5, 0.5, 2).unwrap();
        let frequent = mine_frequent_itemsets(&txns, &p).unwrap();
        assert_eq!(frequent.len(), 4 + 6);
        assert!(mine_rules(&txns, &p)
            .unwrap()
            .iter()
            .all(|r| r.item_count() == 2));
        let p4 = MiningParams::new(0.5, 0.5, 4).unwrap();
        assert_eq!(mine_frequent_itemsets(&txns, &p4).unwrap().len(), 15);
    }
}
