//! The reward, submission and fair-play contracts as a deterministic state
//! machine.
//!
//! Every change to a [`ContractState`] goes through [`ContractState::apply`],
//! which appends the event to the state's log. Replaying that log against a
//! fresh contract reproduces the state byte for byte.
//!
//! [`contract_main`] drives a whole event stream: leading deposits form the
//! fair-play preamble, lifecycle and submission events are dispatched in
//! order, and reward collection runs once the stream ends.

mod state;

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arm::ItemTransaction;
use crate::lifecycle::{
    route, ArtifactFormat, DispatchScope, EventKind, MetricSpec, ModelArtifact,
};

pub use state::{
    collect_reward, ContractState, ContractTerms, Deposit, Payout, Phase, Submission, Wallet,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContractError {
    #[error("expected phase {expected:?}, contract is {actual:?}")]
    WrongPhase { expected: Phase, actual: Phase },
    #[error("deposit amount must be positive")]
    NonPositiveAmount,
    #[error("reward pool overflow")]
    Overflow,
    #[error("metric is fixed to {fixed:?}, deposit asked for {requested:?}")]
    MetricMismatch {
        fixed: MetricSpec,
        requested: MetricSpec,
    },
    #[error("no reward escrowed yet")]
    NoEscrow,
    #[error("{participant} reached {limit} submissions on day {day}")]
    SubmissionLimitReached {
        participant: String,
        day: u32,
        limit: u32,
    },
    #[error("submitted model is empty")]
    NoModel,
    #[error("format {0:?} is not accepted")]
    FormatRejected(ArtifactFormat),
    #[error("submitted model does not decode: {0}")]
    InvalidArtifact(String),
    #[error("nothing was submitted")]
    NoSubmissions,
    #[error("wallet rejected")]
    BadWallet,
    #[error("{0} is not the winner")]
    NotWinner(String),
    #[error("reward already collected")]
    AlreadyCollected,
    #[error("invalid terms: {0}")]
    InvalidTerms(String),
    #[error("unexpected event: {0}")]
    UnexpectedEvent(String),
    #[error("event log line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for ContractError {
    fn from(e: std::io::Error) -> Self {
        ContractError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ContractEvent {
    DepositReward {
        giver: String,
        amount: u64,
        /// Only the first deposit may choose; later ones must agree.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        metric: Option<MetricSpec>,
    },
    ModelSubmission {
        participant: String,
        artifact: ModelArtifact,
        day: u32,
    },
    ModelEvaluation {
        validation: Vec<ItemTransaction>,
    },
    CollectReward {
        participant: String,
        wallet: Wallet,
        #[serde(default)]
        share_with: Vec<String>,
    },
    ModelInitialization,
    ModelTraining,
    ModelValidation,
    ModelScoring,
    ModelSerialization,
    ModelCleanUp,
    #[serde(other)]
    Unknown,
}

impl ContractEvent {
    pub fn kind(&self) -> EventKind {
        match self {
            ContractEvent::DepositReward { .. } => EventKind::Other("DEPOSIT_REWARD".into()),
            ContractEvent::ModelSubmission { .. } => EventKind::ModelSubmission,
            ContractEvent::ModelEvaluation { .. } => EventKind::ModelEvaluation,
            ContractEvent::CollectReward { .. } => EventKind::Other("COLLECT_REWARD".into()),
            ContractEvent::ModelInitialization => EventKind::ModelInitialization,
            ContractEvent::ModelTraining => EventKind::ModelTraining,
            ContractEvent::ModelValidation => EventKind::ModelValidation,
            ContractEvent::ModelScoring => EventKind::ModelScoring,
            ContractEvent::ModelSerialization => EventKind::ModelSerialization,
            ContractEvent::ModelCleanUp => EventKind::ModelCleanUp,
            ContractEvent::Unknown => EventKind::Other("UNKNOWN".into()),
        }
    }
}

/// Why [`contract_main`] stopped early.
#[derive(Debug, Clone, PartialEq)]
pub enum Halt {
    /// An event the dispatcher does not handle ended the event loop. The
    /// reward contract still ran.
    Break { index: usize, kind: EventKind },
    /// An event failed; nothing after it was applied.
    Error { index: usize, error: ContractError },
}

#[derive(Debug, Clone)]
pub struct ContractRun {
    pub state: ContractState,
    pub halt: Option<Halt>,
    /// Events never looked at because the loop stopped first.
    pub unprocessed: usize,
}

impl ContractRun {
    pub fn error(&self) -> Option<&ContractError> {
        match &self.halt {
            Some(Halt::Error { error, .. }) => Some(error),
            _ => None,
        }
    }
}

/// Runs an event stream against `state`.
pub fn contract_main<I>(mut state: ContractState, events: I) -> ContractRun
where
    I: IntoIterator<Item = ContractEvent>,
{
    let mut events = events.into_iter().enumerate().peekable();
    let fail = |state, index, error, rest: usize| ContractRun {
        state,
        halt: Some(Halt::Error { index, error }),
        unprocessed: rest,
    };

    // Fair-play preamble: the reward is escrowed before anything else.
    while let Some((i, e)) =
        events.next_if(|(_, e)| matches!(e, ContractEvent::DepositReward { .. }))
    {
        if let Err(err) = state.apply(&e) {
            return fail(state, i, err, events.count());
        }
    }

    let mut collects = Vec::new();
    let mut halt = None;
    for (i, e) in events.by_ref() {
        if matches!(e, ContractEvent::CollectReward { .. }) {
            collects.push((i, e));
            continue;
        }
        if route(&e.kind(), DispatchScope::SmartContract).is_none() {
            halt = Some(Halt::Break {
                index: i,
                kind: e.kind(),
            });
            break;
        }
        if let Err(err) = state.apply(&e) {
            return fail(state, i, err, events.count());
        }
    }
    let unprocessed = events.count();

    // Reward contract.
    for (i, e) in collects {
        if let Err(err) = state.apply(&e) {
            return fail(state, i, err, unprocessed);
        }
    }
    ContractRun {
        state,
        halt,
        unprocessed,
    }
}

pub fn write_event_log<W: Write>(
    events: &[ContractEvent],
    mut out: W,
) -> Result<(), ContractError> {
    for e in events {
        serde_json::to_writer(&mut out, e).map_err(|e| ContractError::Io(e.to_string()))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_event_log<R: BufRead>(input: R) -> Result<Vec<ContractEvent>, ContractError> {
    let mut events = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let e = serde_json::from_str(&line).map_err(|e| ContractError::Parse {
            line: n + 1,
            reason: e.to_string(),
        })?;
        events.push(e);
    }
    Ok(events)
}
