use serde::{Deserialize, Serialize};

use super::{decode_model, LifecycleError, ModelArtifact};
use crate::arm::{score_rules, AssociationRule, ItemTransaction};

/// How a rule set is scored against held-out transactions. Higher is better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricSpec {
    /// Mean of each rule's empirical confidence; rules whose lhs never
    /// fires contribute 0.
    #[default]
    MeanEmpiricalConfidence,
    /// Total rhs hits over total lhs hits across all rules.
    PooledConfidence,
}

pub fn evaluate_rules(
    rules: &[AssociationRule],
    txns: &[ItemTransaction],
    metric: MetricSpec,
) -> f64 {
    if rules.is_empty() {
        return 0.0;
    }
    let scores = score_rules(rules, txns);
    match metric {
        MetricSpec::MeanEmpiricalConfidence => {
            scores
                .iter()
                .map(|s| s.confidence.unwrap_or(0.0))
                .sum::<f64>()
                / scores.len() as f64
        }
        MetricSpec::PooledConfidence => {
            let lhs: u64 = scores.iter().map(|s| s.lhs_hits).sum();
            let both: u64 = scores.iter().map(|s| s.both_hits).sum();
            if lhs == 0 {
                0.0
            } else {
                both as f64 / lhs as f64
            }
        }
    }
}

/// Decodes `artifact` and scores it on `txns`.
pub fn evaluate_model(
    artifact: &ModelArtifact,
    txns: &[ItemTransaction],
    metric: MetricSpec,
) -> Result<f64, LifecycleError> {
    let rules = decode_model(artifact)?;
    Ok(evaluate_rules(&rules, txns, metric))
}
