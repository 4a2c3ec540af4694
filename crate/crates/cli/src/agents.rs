//! Participant-side behaviour: each agent trains on its own data, keeps
//! submitting better models while its daily allowance lasts, and the winner
//! collects once the giver's validation set has ranked everyone.

use anyhow::Result;
use clap::Args;

use armchain::arm::{group_transactions, mine_rules, ItemTransaction, MiningParams};
use armchain::contracts::{
    contract_main, ContractEvent, ContractRun, ContractState, ContractTerms, Wallet,
};
use armchain::experiment::{generate_synthetic, ExperimentConfig};
use armchain::lifecycle::{
    evaluate_rules, serialize_model, ArtifactFormat, MetricSpec, ValidationSplit,
};

#[derive(Args, Debug, Clone)]
pub struct SimArgs {
    #[arg(long, default_value_t = 3)]
    pub participants: usize,
    #[arg(long, default_value_t = 2)]
    pub days: u32,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub reward: u64,
    #[arg(long, default_value_t = 5)]
    pub daily_limit: u32,
    /// Patients in each participant's private data set.
    #[arg(long, default_value_t = 300)]
    pub patients: usize,
    /// The winner splits the reward with the other participants.
    #[arg(long)]
    pub share: bool,
}

/// Support thresholds an agent tries, loosest last.
const SUPPORT_LADDER: [f64; 6] = [0.34, 0.30, 0.27, 0.24, 0.22, 0.20];

fn dataset(seed: u64, patients: usize) -> Result<Vec<ItemTransaction>> {
    let cfg = ExperimentConfig {
        n_patients: patients,
        seed,
        ..Default::default()
    };
    Ok(group_transactions(&generate_synthetic(&cfg)?))
}

fn name(i: usize) -> String {
    format!("participant-{}", i + 1)
}

/// Builds the event stream by letting agents act against a mirror of the
/// contract, then runs it through the contract main loop.
pub fn simulate(args: &SimArgs) -> Result<ContractRun> {
    let terms = ContractTerms {
        daily_limit: args.daily_limit,
        ..Default::default()
    };
    let mut mirror = ContractState::new(terms.clone())?;
    let mut events = Vec::new();
    let mut push = |mirror: &mut ContractState, e: ContractEvent| -> Result<()> {
        mirror.apply(&e)?;
        events.push(e);
        Ok(())
    };

    push(
        &mut mirror,
        ContractEvent::DepositReward {
            giver: "giver".into(),
            amount: args.reward,
            metric: Some(MetricSpec::MeanEmpiricalConfidence),
        },
    )?;

    let split = ValidationSplit::HashHoldout { percent: 25 };
    for i in 0..args.participants {
        let (train, holdout) = split.partition(&dataset(args.seed + 1 + i as u64, args.patients)?);
        let mut best = f64::NEG_INFINITY;
        // Each agent starts somewhere different on the ladder.
        let mut ladder = SUPPORT_LADDER.iter().cycle().skip(i);
        for day in 0..args.days {
            loop {
                let used = mirror
                    .submissions()
                    .iter()
                    .filter(|s| s.participant == name(i) && s.day == day)
                    .count();
                if used >= args.daily_limit as usize {
                    break;
                }
                let support = *ladder.next().expect("cycle never ends");
                let params = MiningParams::new(support, 0.7, 3)?;
                let Ok(rules) = mine_rules(&train, &params) else {
                    break;
                };
                if rules.is_empty() {
                    continue;
                }
                let local = evaluate_rules(&rules, &holdout, MetricSpec::MeanEmpiricalConfidence);
                if local <= best {
                    // No improvement at this threshold; try again tomorrow.
                    break;
                }
                best = local;
                let format = if i % 2 == 0 {
                    ArtifactFormat::RulesetText
                } else {
                    ArtifactFormat::RulesetBinary
                };
                let artifact = serialize_model(&rules, format, &name(i), u64::from(day))?;
                push(
                    &mut mirror,
                    ContractEvent::ModelSubmission {
                        participant: name(i),
                        artifact,
                        day,
                    },
                )?;
            }
        }
    }

    let validation = dataset(args.seed, args.patients)?;
    push(&mut mirror, ContractEvent::ModelEvaluation { validation })?;
    if let Some(winner) = mirror.winner().map(str::to_string) {
        let share_with = if args.share {
            (0..args.participants)
                .map(name)
                .filter(|n| *n != winner)
                .collect()
        } else {
            Vec::new()
        };
        events.push(ContractEvent::CollectReward {
            wallet: Wallet::new(winner.clone()),
            participant: winner,
            share_with,
        });
    }
    Ok(contract_main(ContractState::new(terms)?, events))
}
