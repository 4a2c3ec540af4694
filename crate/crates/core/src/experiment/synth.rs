//! Seeded prescription generator.
//!
//! Uniformly drawing 7 of 20 drugs puts every pair near 12% support, so no
//! rule would clear a 20% threshold. Instead each patient may receive a few
//! co-prescription bundles (drug groups that tend to appear together), and
//! the remaining slots are filled uniformly from the rest of the catalog.

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ExperimentConfig, ExperimentError};
use crate::ledger::Record;

/// Drug names seen in the reference prescription sample and rule table.
pub const CORE_DRUGS: [&str; 13] = [
    "actiq",
    "meperidine",
    "fentora",
    "methadone",
    "lorcet",
    "acetaminophen",
    "duragesic",
    "morphine",
    "hysingla",
    "percocet",
    "oxycodone",
    "dilaudid",
    "hydrouscodeine",
];

/// Placeholders that pad the catalog to 20. The full reference list is not
/// known; these are ordinary opioid names chosen to fill the slots.
pub const PLACEHOLDER_DRUGS: [&str; 7] = [
    "buprenorphine",
    "codeine",
    "hydromorphone",
    "oxymorphone",
    "tapentadol",
    "tramadol",
    "levorphanol",
];

pub fn default_catalog() -> Vec<String> {
    CORE_DRUGS
        .iter()
        .chain(&PLACEHOLDER_DRUGS)
        .map(|s| s.to_string())
        .collect()
}

/// A group of drugs prescribed together with probability `weight`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub drugs: Vec<String>,
    pub weight: f64,
}

impl Bundle {
    pub fn new(drugs: &[&str], weight: f64) -> Self {
        Bundle {
            drugs: drugs.iter().map(|s| s.to_string()).collect(),
            weight,
        }
    }
}

/// Co-prescription weighting. Bundles are offered to each patient in a
/// random order and accepted with their weight if they still fit.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationProfile {
    pub bundles: Vec<Bundle>,
}

impl CorrelationProfile {
    /// No bundles: every patient gets a uniform sample.
    pub fn uniform() -> Self {
        CorrelationProfile {
            bundles: Vec::new(),
        }
    }
}

impl Default for CorrelationProfile {
    fn default() -> Self {
        CorrelationProfile {
            bundles: vec![
                Bundle::new(&["actiq", "fentora", "meperidine"], 0.25),
                Bundle::new(&["actiq", "morphine", "oxycodone"], 0.22),
                Bundle::new(&["dilaudid", "duragesic"], 0.24),
                Bundle::new(&["hysingla", "oxycodone", "percocet"], 0.25),
                Bundle::new(&["lorcet", "fentora"], 0.22),
                Bundle::new(&["hydrouscodeine", "oxycodone"], 0.24),
            ],
        }
    }
}

/// Builds `n_patients × drugs_per_patient` records, patient by patient.
/// Output depends only on the config.
pub fn generate_synthetic(config: &ExperimentConfig) -> Result<Vec<Record>, ExperimentError> {
    config.validate()?;
    let catalog = &config.catalog;
    let k = config.drugs_per_patient;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let bundles: Vec<(Vec<usize>, f64)> = config
        .profile
        .bundles
        .iter()
        .map(|b| {
            let ids = b
                .drugs
                .iter()
                .map(|d| {
                    catalog
                        .iter()
                        .position(|c| c == d)
                        .expect("validated against catalog")
                })
                .collect();
            (ids, b.weight)
        })
        .collect();

    let mut records = Vec::with_capacity(config.n_patients * k);
    let mut order: Vec<usize> = (0..bundles.len()).collect();
    for patient in 0..config.n_patients as u64 {
        let mut chosen: Vec<usize> = Vec::with_capacity(k);
        order.shuffle(&mut rng);
        for &b in &order {
            let (ids, weight) = &bundles[b];
            // Draw unconditionally so the stream of draws per patient is fixed.
            let take = rng.random::<f64>() < *weight;
            let fresh: Vec<usize> = ids
                .iter()
                .copied()
                .filter(|i| !chosen.contains(i))
                .collect();
            if take && chosen.len() + fresh.len() <= k {
                chosen.extend(fresh);
            }
        }
        let rest: Vec<usize> = (0..catalog.len()).filter(|i| !chosen.contains(i)).collect();
        let fill = index::sample(&mut rng, rest.len(), k - chosen.len());
        chosen.extend(fill.iter().map(|j| rest[j]));
        for i in chosen {
            records.push(Record {
                patient_id: patient,
                item: catalog[i].clone(),
            });
        }
    }
    Ok(records)
}
