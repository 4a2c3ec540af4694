use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use super::{ContractError, ContractEvent};
use crate::arm::ItemTransaction;
use crate::lifecycle::{decode_model, evaluate_rules, ArtifactFormat, MetricSpec, ModelArtifact};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Phase {
    Open,
    Evaluating,
    Settled,
}

/// Fixed when the contract is created.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContractTerms {
    /// Submissions allowed per participant per day index.
    pub daily_limit: u32,
    pub accepted_formats: Vec<ArtifactFormat>,
}

impl Default for ContractTerms {
    fn default() -> Self {
        ContractTerms {
            daily_limit: 5,
            accepted_formats: vec![ArtifactFormat::RulesetText, ArtifactFormat::RulesetBinary],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Wallet {
    pub participant: String,
    pub balance: u64,
    pub valid: bool,
}

impl Wallet {
    pub fn new(participant: impl Into<String>) -> Self {
        Wallet {
            participant: participant.into(),
            balance: 0,
            valid: true,
        }
    }

    fn is_ok_for(&self, participant: &str) -> bool {
        self.valid && self.participant == participant
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Deposit {
    pub giver: String,
    pub amount: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Submission {
    pub participant: String,
    pub artifact: ModelArtifact,
    pub day: u32,
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Payout {
    pub recipient: String,
    pub amount: u64,
}

/// The whole contract. Fields are private: the only way to change a state
/// is to apply an event, which also appends it to the log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractState {
    terms: ContractTerms,
    phase: Phase,
    metric: Option<MetricSpec>,
    reward_pool: u64,
    deposits: Vec<Deposit>,
    submissions: Vec<Submission>,
    winner: Option<String>,
    payouts: Vec<Payout>,
    event_log: Vec<ContractEvent>,
}

impl ContractState {
    pub fn new(terms: ContractTerms) -> Result<Self, ContractError> {
        if terms.daily_limit == 0 {
            return Err(ContractError::InvalidTerms(
                "daily_limit must be at least 1".into(),
            ));
        }
        if terms.accepted_formats.is_empty() {
            return Err(ContractError::InvalidTerms("no accepted formats".into()));
        }
        Ok(ContractState {
            terms,
            phase: Phase::Open,
            metric: None,
            reward_pool: 0,
            deposits: Vec::new(),
            submissions: Vec::new(),
            winner: None,
            payouts: Vec::new(),
            event_log: Vec::new(),
        })
    }

    /// Rebuilds a state by applying `events` in order to a fresh contract.
    pub fn replay<'a, I>(terms: ContractTerms, events: I) -> Result<Self, ContractError>
    where
        I: IntoIterator<Item = &'a ContractEvent>,
    {
        let mut state = ContractState::new(terms)?;
        for e in events {
            state.apply(e)?;
        }
        Ok(state)
    }

    pub fn terms(&self) -> &ContractTerms {
        &self.terms
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// The evaluation metric, fixed by the first deposit.
    pub fn metric(&self) -> Option<MetricSpec> {
        self.metric
    }

    pub fn reward_pool(&self) -> u64 {
        self.reward_pool
    }

    pub fn deposits(&self) -> &[Deposit] {
        &self.deposits
    }

    /// Total deposited per giver.
    pub fn deposited_by(&self) -> BTreeMap<&str, u64> {
        let mut m = BTreeMap::new();
        for d in &self.deposits {
            *m.entry(d.giver.as_str()).or_default() += d.amount;
        }
        m
    }

    pub fn submissions(&self) -> &[Submission] {
        &self.submissions
    }

    pub fn winner(&self) -> Option<&str> {
        self.winner.as_deref()
    }

    pub fn payouts(&self) -> &[Payout] {
        &self.payouts
    }

    pub fn event_log(&self) -> &[ContractEvent] {
        &self.event_log
    }

    pub fn total_deposited(&self) -> u64 {
        self.deposits.iter().map(|d| d.amount).sum()
    }

    pub fn total_paid(&self) -> u64 {
        self.payouts.iter().map(|p| p.amount).sum()
    }

    /// Deterministic byte encoding, for comparing replicas.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("contract state always serializes")
    }

    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_bytes()))
    }

    fn require_phase(&self, expected: Phase) -> Result<(), ContractError> {
        if self.phase != expected {
            return Err(ContractError::WrongPhase {
                expected,
                actual: self.phase,
            });
        }
        Ok(())
    }

    /// Applies one event. On error the state is left unchanged.
    pub fn apply(&mut self, event: &ContractEvent) -> Result<(), ContractError> {
        match event {
            ContractEvent::DepositReward {
                giver,
                amount,
                metric,
            } => self.deposit_reward(giver, *amount, *metric)?,
            ContractEvent::ModelSubmission {
                participant,
                artifact,
                day,
            } => self.submit_model(participant, artifact, *day)?,
            ContractEvent::ModelEvaluation { validation } => {
                self.evaluate_and_settle(validation)?
            }
            ContractEvent::CollectReward {
                participant,
                wallet,
                share_with,
            } => {
                let mut wallet = wallet.clone();
                self.collect_reward(participant, &mut wallet, share_with)?;
            }
            ContractEvent::Unknown => {
                return Err(ContractError::UnexpectedEvent("unknown event kind".into()))
            }
            // Lifecycle steps that happen off-contract are acknowledged only.
            _ => {}
        }
        self.event_log.push(event.clone());
        Ok(())
    }

    fn deposit_reward(
        &mut self,
        giver: &str,
        amount: u64,
        metric: Option<MetricSpec>,
    ) -> Result<(), ContractError> {
        self.require_phase(Phase::Open)?;
        if amount == 0 {
            return Err(ContractError::NonPositiveAmount);
        }
        let metric = match (self.metric, metric) {
            (Some(fixed), Some(asked)) if fixed != asked => {
                return Err(ContractError::MetricMismatch {
                    fixed,
                    requested: asked,
                })
            }
            (Some(fixed), _) => fixed,
            (None, asked) => asked.unwrap_or_default(),
        };
        let pool = self
            .reward_pool
            .checked_add(amount)
            .ok_or(ContractError::Overflow)?;
        self.metric = Some(metric);
        self.reward_pool = pool;
        self.deposits.push(Deposit {
            giver: giver.to_string(),
            amount,
        });
        Ok(())
    }

    fn submit_model(
        &mut self,
        participant: &str,
        artifact: &ModelArtifact,
        day: u32,
    ) -> Result<(), ContractError> {
        // Fair play comes first: escrow and rate limit.
        self.require_phase(Phase::Open)?;
        if self.reward_pool == 0 {
            return Err(ContractError::NoEscrow);
        }
        let today = self
            .submissions
            .iter()
            .filter(|s| s.participant == participant && s.day == day)
            .count();
        if today >= self.terms.daily_limit as usize {
            return Err(ContractError::SubmissionLimitReached {
                participant: participant.to_string(),
                day,
                limit: self.terms.daily_limit,
            });
        }
        if artifact.is_empty() {
            return Err(ContractError::NoModel);
        }
        if !self.terms.accepted_formats.contains(&artifact.format) {
            return Err(ContractError::FormatRejected(artifact.format));
        }
        decode_model(artifact).map_err(|e| ContractError::InvalidArtifact(e.to_string()))?;
        self.submissions.push(Submission {
            participant: participant.to_string(),
            artifact: artifact.clone(),
            day,
            score: None,
        });
        Ok(())
    }

    fn evaluate_and_settle(&mut self, validation: &[ItemTransaction]) -> Result<(), ContractError> {
        self.require_phase(Phase::Open)?;
        if self.submissions.is_empty() {
            return Err(ContractError::NoSubmissions);
        }
        let metric = self.metric.unwrap_or_default();
        let mut scores = Vec::with_capacity(self.submissions.len());
        for s in &self.submissions {
            let rules = decode_model(&s.artifact)
                .map_err(|e| ContractError::InvalidArtifact(e.to_string()))?;
            scores.push(evaluate_rules(&rules, validation, metric));
        }
        self.phase = Phase::Evaluating;
        // Strictly greater keeps the earliest submission on ties.
        let mut best = 0;
        for (i, &score) in scores.iter().enumerate() {
            if score > scores[best] {
                best = i;
            }
        }
        for (s, score) in self.submissions.iter_mut().zip(scores) {
            s.score = Some(score);
        }
        self.winner = Some(self.submissions[best].participant.clone());
        self.phase = Phase::Settled;
        Ok(())
    }

    /// Pays the pool out to the winner, optionally split evenly with
    /// `share_with`. Integer division; the winner keeps the remainder.
    fn collect_reward(
        &mut self,
        participant: &str,
        wallet: &mut Wallet,
        share_with: &[String],
    ) -> Result<Vec<Payout>, ContractError> {
        self.require_phase(Phase::Settled)?;
        let winner = self
            .winner
            .clone()
            .expect("settled contracts have a winner");
        if participant != winner {
            return Err(ContractError::NotWinner(participant.to_string()));
        }
        if self.reward_pool == 0 {
            return Err(ContractError::AlreadyCollected);
        }
        if !wallet.is_ok_for(participant) {
            return Err(ContractError::BadWallet);
        }
        let mut recipients = vec![winner.clone()];
        for other in share_with {
            if !recipients.contains(other) {
                recipients.push(other.clone());
            }
        }
        let n = recipients.len() as u64;
        let share = self.reward_pool / n;
        let remainder = self.reward_pool % n;
        let payouts: Vec<Payout> = recipients
            .into_iter()
            .enumerate()
            .map(|(i, recipient)| Payout {
                amount: share + if i == 0 { remainder } else { 0 },
                recipient,
            })
            .collect();
        wallet.balance += payouts[0].amount;
        self.reward_pool = 0;
        self.payouts.extend(payouts.iter().cloned());
        Ok(payouts)
    }
}

/// Stand-alone form of the collect operation: returns the payout records
/// and credits the winner's wallet. The event is logged as applied.
pub fn collect_reward(
    state: &mut ContractState,
    participant: &str,
    wallet: &mut Wallet,
    share_with: &[String],
) -> Result<Vec<Payout>, ContractError> {
    let payouts = state.collect_reward(participant, wallet, share_with)?;
    state.event_log.push(ContractEvent::CollectReward {
        participant: participant.to_string(),
        wallet: Wallet {
            balance: wallet.balance - payouts[0].amount,
            ..wallet.clone()
        },
        share_with: share_with.to_vec(),
    });
    Ok(payouts)
}
