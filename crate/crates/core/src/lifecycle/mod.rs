//! The seven-step model lifecycle, driven by an event dispatcher.
//!
//! [`dispatch`] routes one [`LifecycleEvent`] to the matching
//! [`LifecycleModel`] operation with a panic guard around the call.
//! [`run_event_loop`] repeats that until the events run out, an operation
//! fails, or an event kind is not recognised (which ends the loop).

mod artifact;
mod evaluate;

use std::fmt;
use std::panic::{self, AssertUnwindSafe};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::arm::{
    mine_rules, score_rules, ArmError, AssociationRule, ItemTransaction, MiningParams, RuleScore,
};
use crate::parallel::{smp_mine, ParallelError, ThreadPoolConfig};

pub use artifact::{
    decode_model, read_artifact, serialize_model, sidecar_path, write_artifact, ArtifactFormat,
    ArtifactMetadata, ModelArtifact,
};
pub use evaluate::{evaluate_model, evaluate_rules, MetricSpec};

#[derive(Debug, Error)]
pub enum LifecycleError {
    #[error("unknown event `{0}`")]
    UnknownEvent(String),
    #[error("no trained model")]
    NoModel,
    #[error("no data for {0}")]
    NoData(&'static str),
    #[error("cannot decode model: {0}")]
    Decode(String),
    #[error("item `{0}` cannot be encoded in a ruleset artifact")]
    Unencodable(String),
    #[error("needs {required} CPUs, {available} available")]
    InsufficientResources { required: usize, available: usize },
    #[error("context was cleaned up")]
    ContextClosed,
    #[error("bad artifact path: {0}")]
    BadPath(String),
    #[error("operation panicked: {0}")]
    Panicked(String),
    #[error(transparent)]
    Mining(#[from] ArmError),
    #[error(transparent)]
    Parallel(#[from] ParallelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Lifecycle event kinds. Anything unrecognised parses to `Other`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum EventKind {
    ModelInitialization,
    ModelTraining,
    ModelValidation,
    ModelScoring,
    ModelEvaluation,
    ModelSerialization,
    ModelCleanUp,
    /// Only meaningful inside the smart-contract layer.
    ModelSubmission,
    Other(String),
}

impl EventKind {
    pub const KNOWN: [EventKind; 8] = [
        EventKind::ModelInitialization,
        EventKind::ModelTraining,
        EventKind::ModelValidation,
        EventKind::ModelScoring,
        EventKind::ModelEvaluation,
        EventKind::ModelSerialization,
        EventKind::ModelCleanUp,
        EventKind::ModelSubmission,
    ];

    pub fn as_str(&self) -> &str {
        match self {
            EventKind::ModelInitialization => "MODEL_INITIALIZATION",
            EventKind::ModelTraining => "MODEL_TRAINING",
            EventKind::ModelValidation => "MODEL_VALIDATION",
            EventKind::ModelScoring => "MODEL_SCORING",
            EventKind::ModelEvaluation => "MODEL_EVALUATION",
            EventKind::ModelSerialization => "MODEL_SERIALIZATION",
            EventKind::ModelCleanUp => "MODEL_CLEAN_UP",
            EventKind::ModelSubmission => "MODEL_SUBMISSION",
            EventKind::Other(s) => s,
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(EventKind::KNOWN
            .iter()
            .find(|k| k.as_str() == s)
            .cloned()
            .unwrap_or_else(|| EventKind::Other(s.to_string())))
    }
}

impl Serialize for EventKind {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for EventKind {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Ok(s.parse().expect("infallible"))
    }
}

/// Where events are being dispatched. Submissions only exist on-contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DispatchScope {
    Thread,
    SmartContract,
}

/// The lifecycle step an event kind maps to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Initialize,
    Train,
    Validate,
    Score,
    Evaluate,
    Serialize,
    CleanUp,
    Submit,
}

/// Maps an event kind to exactly one step, or `None` when the kind is not
/// valid in `scope`.
pub fn route(kind: &EventKind, scope: DispatchScope) -> Option<Step> {
    Some(match kind {
        EventKind::ModelInitialization => Step::Initialize,
        EventKind::ModelTraining => Step::Train,
        EventKind::ModelValidation => Step::Validate,
        EventKind::ModelScoring => Step::Score,
        EventKind::ModelEvaluation => Step::Evaluate,
        EventKind::ModelSerialization => Step::Serialize,
        EventKind::ModelCleanUp => Step::CleanUp,
        EventKind::ModelSubmission if scope == DispatchScope::SmartContract => Step::Submit,
        EventKind::ModelSubmission | EventKind::Other(_) => return None,
    })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum Payload {
    #[default]
    None,
    Transactions(Vec<ItemTransaction>),
    Format(ArtifactFormat),
}

impl Payload {
    fn transactions(&self) -> Option<&[ItemTransaction]> {
        match self {
            Payload::Transactions(t) => Some(t),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LifecycleEvent {
    pub kind: EventKind,
    pub payload: Payload,
}

impl LifecycleEvent {
    pub fn new(kind: EventKind) -> Self {
        LifecycleEvent {
            kind,
            payload: Payload::None,
        }
    }

    pub fn with_data(kind: EventKind, txns: Vec<ItemTransaction>) -> Self {
        LifecycleEvent {
            kind,
            payload: Payload::Transactions(txns),
        }
    }
}

/// Minimum machine the model is willing to run on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ResourceRequirement {
    pub min_cpus: usize,
}

impl ResourceRequirement {
    pub fn check(&self) -> Result<(), LifecycleError> {
        let available = std::thread::available_parallelism().map_or(1, |n| n.get());
        if available < self.min_cpus {
            return Err(LifecycleError::InsufficientResources {
                required: self.min_cpus,
                available,
            });
        }
        Ok(())
    }
}

/// Whether training data is split into train and validation portions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ValidationSplit {
    #[default]
    None,
    /// Patients whose id hashes into the lowest `percent` buckets (of 100)
    /// are held out for validation.
    HashHoldout { percent: u8 },
}

impl ValidationSplit {
    pub fn is_holdout(&self, patient_id: u64) -> bool {
        match *self {
            ValidationSplit::None => false,
            ValidationSplit::HashHoldout { percent } => {
                let h = Sha256::digest(patient_id.to_be_bytes());
                let bucket = u64::from_be_bytes(h[..8].try_into().unwrap()) % 100;
                bucket < u64::from(percent)
            }
        }
    }

    /// Returns (training, validation).
    pub fn partition(
        &self,
        txns: &[ItemTransaction],
    ) -> (Vec<ItemTransaction>, Vec<ItemTransaction>) {
        txns.iter()
            .cloned()
            .partition(|t| !self.is_holdout(t.patient_id))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextConfig {
    pub producer: String,
    pub created_ms: u64,
    pub format: ArtifactFormat,
    pub metric: MetricSpec,
    pub resources: ResourceRequirement,
    pub split: ValidationSplit,
}

impl Default for ContextConfig {
    fn default() -> Self {
        ContextConfig {
            producer: "armchain".into(),
            created_ms: 0,
            format: ArtifactFormat::RulesetText,
            metric: MetricSpec::default(),
            resources: ResourceRequirement::default(),
            split: ValidationSplit::None,
        }
    }
}

/// Per-run state. Owned by exactly one driver; nothing in here is shared.
#[derive(Debug, Default)]
pub struct ExecutionContext {
    pub config: ContextConfig,
    pub training: Vec<ItemTransaction>,
    pub validation: Vec<ItemTransaction>,
    pub scoring: Vec<ItemTransaction>,
    pub rules: Option<Vec<AssociationRule>>,
    pub validation_score: Option<f64>,
    pub rule_scores: Option<Vec<RuleScore>>,
    pub evaluation_score: Option<f64>,
    pub artifact: Option<ModelArtifact>,
    closed: bool,
}

impl ExecutionContext {
    pub fn new(config: ContextConfig) -> Self {
        ExecutionContext {
            config,
            ..Default::default()
        }
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn trained_rules(&self) -> Result<&[AssociationRule], LifecycleError> {
        self.rules.as_deref().ok_or(LifecycleError::NoModel)
    }

    fn reset(&mut self) {
        let config = std::mem::take(&mut self.config);
        *self = ExecutionContext::new(config);
    }
}

pub type Status = Result<(), LifecycleError>;

/// A model that can be driven through the lifecycle.
pub trait LifecycleModel {
    fn initialize(&mut self, ctx: &mut ExecutionContext, payload: &Payload) -> Status;
    fn train(&mut self, ctx: &mut ExecutionContext, payload: &Payload) -> Status;
    fn validate(&mut self, ctx: &mut ExecutionContext, payload: &Payload) -> Status;
    fn score(&mut self, ctx: &mut ExecutionContext, payload: &Payload) -> Status;
    fn evaluate(&mut self, ctx: &mut ExecutionContext, payload: &Payload) -> Status;
    fn serialize(&mut self, ctx: &mut ExecutionContext, payload: &Payload) -> Status;
    fn cleanup(&mut self, ctx: &mut ExecutionContext, payload: &Payload) -> Status;
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "unknown panic".into())
}

/// Routes `event` to one lifecycle operation in the thread scope.
pub fn dispatch<M: LifecycleModel + ?Sized>(
    event: &LifecycleEvent,
    model: &mut M,
    ctx: &mut ExecutionContext,
) -> Status {
    let step = route(&event.kind, DispatchScope::Thread)
        .ok_or_else(|| LifecycleError::UnknownEvent(event.kind.to_string()))?;
    if ctx.closed {
        return Err(LifecycleError::ContextClosed);
    }
    let p = &event.payload;
    let outcome = panic::catch_unwind(AssertUnwindSafe(|| match step {
        Step::Initialize => model.initialize(ctx, p),
        Step::Train => model.train(ctx, p),
        Step::Validate => model.validate(ctx, p),
        Step::Score => model.score(ctx, p),
        Step::Evaluate => model.evaluate(ctx, p),
        Step::Serialize => model.serialize(ctx, p),
        Step::CleanUp => model.cleanup(ctx, p),
        Step::Submit => unreachable!("submissions are not routed in the thread scope"),
    }));
    outcome.unwrap_or_else(|p| Err(LifecycleError::Panicked(panic_message(p))))
}

#[derive(Debug)]
pub enum LoopEnd {
    /// The event source ran dry.
    Exhausted,
    /// An unrecognised event ended the loop.
    Break(EventKind),
    /// An operation failed; the loop stopped at that event.
    Failed(LifecycleError),
}

#[derive(Debug)]
pub struct LoopOutcome {
    /// Events that reached an operation successfully.
    pub completed: usize,
    pub end: LoopEnd,
}

impl LoopOutcome {
    pub fn is_ok(&self) -> bool {
        !matches!(self.end, LoopEnd::Failed(_))
    }
}

pub fn run_event_loop<M, I>(events: I, model: &mut M, ctx: &mut ExecutionContext) -> LoopOutcome
where
    M: LifecycleModel + ?Sized,
    I: IntoIterator<Item = LifecycleEvent>,
{
    let mut completed = 0;
    for event in events {
        match dispatch(&event, model, ctx) {
            Ok(()) => completed += 1,
            Err(LifecycleError::UnknownEvent(_)) => {
                return LoopOutcome {
                    completed,
                    end: LoopEnd::Break(event.kind),
                }
            }
            Err(e) => {
                return LoopOutcome {
                    completed,
                    end: LoopEnd::Failed(e),
                }
            }
        }
    }
    LoopOutcome {
        completed,
        end: LoopEnd::Exhausted,
    }
}

/// Association rule mining as a lifecycle model.
#[derive(Debug, Clone)]
pub struct ArmModel {
    pub params: MiningParams,
    /// Train on an SMP pool instead of the calling thread.
    pub pool: Option<ThreadPoolConfig>,
}

impl ArmModel {
    pub fn new(params: MiningParams) -> Self {
        ArmModel { params, pool: None }
    }

    pub fn with_pool(params: MiningParams, pool: ThreadPoolConfig) -> Self {
        ArmModel {
            params,
            pool: Some(pool),
        }
    }

    fn held_out_or_training<'a>(
        ctx: &'a ExecutionContext,
        payload: &'a Payload,
        preferred: &'a [ItemTransaction],
    ) -> &'a [ItemTransaction] {
        payload
            .transactions()
            .or((!preferred.is_empty()).then_some(preferred))
            .unwrap_or(&ctx.training)
    }
}

impl LifecycleModel for ArmModel {
    fn initialize(&mut self, ctx: &mut ExecutionContext, _payload: &Payload) -> Status {
        ctx.config.resources.check()?;
        self.params.validate()?;
        ctx.reset();
        Ok(())
    }

    fn train(&mut self, ctx: &mut ExecutionContext, payload: &Payload) -> Status {
        if let Some(txns) = payload.transactions() {
            let (train, holdout) = ctx.config.split.partition(txns);
            ctx.training = train;
            if !holdout.is_empty() {
                ctx.validation = holdout;
            }
        }
        if ctx.training.is_empty() {
            return Err(LifecycleError::NoData("training"));
        }
        let rules = match &self.pool {
            Some(pool) => smp_mine(&ctx.training, &self.params, pool)?,
            None => mine_rules(&ctx.training, &self.params)?,
        };
        ctx.rules = Some(rules);
        Ok(())
    }

    fn validate(&mut self, ctx: &mut ExecutionContext, payload: &Payload) -> Status {
        let rules = ctx.trained_rules()?;
        let data = Self::held_out_or_training(ctx, payload, &ctx.validation);
        ctx.validation_score = Some(evaluate_rules(rules, data, ctx.config.metric));
        Ok(())
    }

    fn score(&mut self, ctx: &mut ExecutionContext, payload: &Payload) -> Status {
        let rules = ctx.trained_rules()?;
        let data = Self::held_out_or_training(ctx, payload, &ctx.scoring);
        ctx.rule_scores = Some(score_rules(rules, data));
        Ok(())
    }

    fn evaluate(&mut self, ctx: &mut ExecutionContext, payload: &Payload) -> Status {
        let rules = ctx.trained_rules()?;
        let data = Self::held_out_or_training(ctx, payload, &ctx.validation);
        ctx.evaluation_score = Some(evaluate_rules(rules, data, ctx.config.metric));
        Ok(())
    }

    fn serialize(&mut self, ctx: &mut ExecutionContext, payload: &Payload) -> Status {
        let format = match payload {
            Payload::Format(f) => *f,
            _ => ctx.config.format,
        };
        let rules = ctx.trained_rules()?;
        let artifact = serialize_model(rules, format, &ctx.config.producer, ctx.config.created_ms)?;
        ctx.artifact = Some(artifact);
        Ok(())
    }

    fn cleanup(&mut self, ctx: &mut ExecutionContext, _payload: &Payload) -> Status {
        ctx.reset();
        ctx.closed = true;
        Ok(())
    }
}
