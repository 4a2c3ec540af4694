//! The end-to-end prescription study: generate records, load them into a
//! three-pharmacy ledger, validate what was persisted, mine it in one of
//! four execution modes and write the rule table and model.

mod config;
mod synth;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arm::{
    group_transactions, write_rule_table, ArmError, AssociationRule, ItemTransaction, MiningParams,
};
use crate::ledger::{
    read_at_rest, read_chain_jsonl, validate_chain, write_chain_jsonl, write_records_csv, Chain,
    ChainStore, Clock, FixedClock, LedgerError, Network, Record, RecordFilter, SystemClock,
};
use crate::lifecycle::{
    run_event_loop, serialize_model, write_artifact, ArmModel, ArtifactFormat, ContextConfig,
    EventKind, ExecutionContext, LifecycleError, LifecycleEvent, LoopEnd, ModelArtifact,
};
use crate::parallel::{
    mpp_mine_and_persist, ClusterConfig, ParallelError, PersistSpec, ThreadPoolConfig,
};
use crate::streaming::{query_window, SlidingWindow, StreamingError, TransactionAssembler};

pub use synth::{
    default_catalog, generate_synthetic, Bundle, CorrelationProfile, CORE_DRUGS, PLACEHOLDER_DRUGS,
};

/// Ledger members, in order; the first one leads.
pub const MEMBERS: [&str; 3] = ["pharmacy-a", "pharmacy-b", "pharmacy-c"];

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("config line {line}: {reason}")]
    ConfigParse { line: usize, reason: String },
    #[error("persisted chain failed validation")]
    TamperedChain,
    #[error("ledger replicas diverged")]
    ReplicaMismatch,
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Mining(#[from] ArmError),
    #[error(transparent)]
    Parallel(#[from] ParallelError),
    #[error(transparent)]
    Streaming(#[from] StreamingError),
    #[error(transparent)]
    Lifecycle(#[from] LifecycleError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Single,
    Smp,
    Mpp,
    Streaming,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Single, Mode::Smp, Mode::Mpp, Mode::Streaming];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Single => "single",
            Mode::Smp => "smp",
            Mode::Mpp => "mpp",
            Mode::Streaming => "streaming",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown mode `{s}` (single, smp, mpp, streaming)"))
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n_patients: usize,
    pub drugs_per_patient: usize,
    pub catalog: Vec<String>,
    pub seed: u64,
    pub profile: CorrelationProfile,
    pub params: MiningParams,
    pub mode: Mode,
    pub threads: usize,
    pub workers: usize,
    pub barrier_timeout: Duration,
    /// Sliding-window size for streaming mode; `None` keeps everything.
    pub window_capacity: Option<usize>,
    pub patients_per_block: usize,
    /// Start of a deterministic block clock; `None` uses wall time.
    pub clock_start_ms: Option<u64>,
    pub format: ArtifactFormat,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n_patients: 1001,
            drugs_per_patient: 7,
            catalog: default_catalog(),
            seed: 20,
            profile: CorrelationProfile::default(),
            params: MiningParams::default(),
            mode: Mode::Single,
            threads: 4,
            workers: 3,
            barrier_timeout: Duration::from_secs(30),
            window_capacity: None,
            patients_per_block: 1,
            clock_start_ms: Some(1_700_000_000_000),
            format: ArtifactFormat::RulesetText,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::InvalidConfig(m));
        if self.n_patients == 0 {
            return bad("n_patients must be at least 1".into());
        }
        if self.drugs_per_patient == 0 || self.drugs_per_patient > self.catalog.len() {
            return bad(format!(
                "drugs_per_patient must be in 1..={}",
                self.catalog.len()
            ));
        }
        for (i, d) in self.catalog.iter().enumerate() {
            if Record::new(0, d.as_str()).is_err() {
                return bad(format!("catalog entry `{d}` is not a lowercase word"));
            }
            if self.catalog[..i].contains(d) {
                return bad(format!("catalog lists `{d}` twice"));
            }
        }
        for b in &self.profile.bundles {
            if !(0.0..=1.0).contains(&b.weight) {
                return bad(format!("bundle weight {} outside [0, 1]", b.weight));
            }
            if let Some(d) = b.drugs.iter().find(|d| !self.catalog.contains(d)) {
                return bad(format!("bundle drug `{d}` is not in the catalog"));
            }
        }
        if self.threads == 0 || self.workers == 0 || self.patients_per_block == 0 {
            return bad("threads, workers and patients_per_block must be at least 1".into());
        }
        if self.window_capacity == Some(0) {
            return bad("window_capacity must be at least 1".into());
        }
        self.params.validate()?;
        Ok(())
    }

    fn created_ms(&self) -> u64 {
        self.clock_start_ms.unwrap_or(0)
    }

    fn clock(&self) -> Arc<dyn Clock> {
        match self.clock_start_ms {
            Some(start) => Arc::new(FixedClock::new(start, 1000)),
            None => Arc::new(SystemClock),
        }
    }
}

/// Appends `records` through the leader, `patients_per_block` patients per
/// block. Records must be grouped by patient.
pub fn load_ledger(
    records: &[Record],
    config: &ExperimentConfig,
) -> Result<Network, ExperimentError> {
    config.validate()?;
    let network = Network::new(&MEMBERS, config.clock())?;
    let leader = network.leader().node_id.clone();
    let mut block: Vec<Record> = Vec::new();
    let mut patients_in_block = 0;
    let mut last = None;
    for r in records {
        if last != Some(r.patient_id) {
            if patients_in_block == config.patients_per_block {
                network.append_block(&leader, std::mem::take(&mut block))?;
                patients_in_block = 0;
            }
            patients_in_block += 1;
            last = Some(r.patient_id);
        }
        block.push(r.clone());
    }
    if !block.is_empty() {
        network.append_block(&leader, block)?;
    }
    Ok(network)
}

/// Returns the agreed chain, or an error if any member disagrees.
pub fn converged_chain(network: &Network) -> Result<Chain, ExperimentError> {
    let chain = network.leader().chain();
    if network.members().iter().any(|m| m.chain() != chain) {
        return Err(ExperimentError::ReplicaMismatch);
    }
    Ok(chain)
}

pub fn write_chain(chain: &Chain, path: &Path) -> Result<(), ExperimentError> {
    write_chain_jsonl(chain, BufWriter::new(File::create(path)?))?;
    Ok(())
}

/// Reads a persisted chain and refuses it unless every hash checks out.
pub fn read_validated_chain(path: &Path) -> Result<Chain, ExperimentError> {
    let chain = read_chain_jsonl(BufReader::new(File::open(path)?))?;
    if !validate_chain(&chain) {
        return Err(ExperimentError::TamperedChain);
    }
    Ok(chain)
}

fn check_lifecycle(end: LoopEnd) -> Result<(), ExperimentError> {
    match end {
        LoopEnd::Exhausted => Ok(()),
        LoopEnd::Failed(e) => Err(e.into()),
        LoopEnd::Break(kind) => Err(LifecycleError::UnknownEvent(kind.to_string()).into()),
    }
}

fn train_via_lifecycle(
    txns: Vec<ItemTransaction>,
    model: &mut ArmModel,
    config: &ExperimentConfig,
) -> Result<(Vec<AssociationRule>, ModelArtifact), ExperimentError> {
    let mut ctx = ExecutionContext::new(ContextConfig {
        producer: "armchain".into(),
        created_ms: config.created_ms(),
        format: config.format,
        ..Default::default()
    });
    let events = [
        LifecycleEvent::new(EventKind::ModelInitialization),
        LifecycleEvent::with_data(EventKind::ModelTraining, txns),
        LifecycleEvent::new(EventKind::ModelSerialization),
    ];
    check_lifecycle(run_event_loop(events, model, &mut ctx).end)?;
    let rules = ctx.rules.take().ok_or(LifecycleError::NoModel)?;
    let artifact = ctx.artifact.take().ok_or(LifecycleError::NoModel)?;
    Ok((rules, artifact))
}

/// Replays the chain through a ledger subscription into a sliding window.
fn stream_chain(chain: &Chain, capacity: usize) -> Result<SlidingWindow, ExperimentError> {
    let store = ChainStore::new(chain.clone());
    store.close();
    let mut window = SlidingWindow::new(capacity)?;
    let mut assembler = TransactionAssembler::new();
    for record in store.subscribe(0)? {
        if let Some(t) = assembler.push(&record) {
            window.ingest(t);
        }
    }
    if let Some(t) = assembler.flush() {
        window.ingest(t);
    }
    Ok(window)
}

pub fn chain_transactions(chain: &Chain) -> Result<Vec<ItemTransaction>, ExperimentError> {
    Ok(group_transactions(&read_at_rest(
        chain,
        &RecordFilter::all(),
    )?))
}

/// Mines a validated chain in `config.mode` and writes the model to
/// `model_path`.
pub fn mine_chain(
    chain: &Chain,
    config: &ExperimentConfig,
    model_path: &Path,
) -> Result<(Vec<AssociationRule>, ModelArtifact), ExperimentError> {
    config.validate()?;
    let (rules, artifact) = match config.mode {
        Mode::Single => train_via_lifecycle(
            chain_transactions(chain)?,
            &mut ArmModel::new(config.params),
            config,
        )?,
        Mode::Smp => {
            let pool = ThreadPoolConfig::new(config.threads)?;
            train_via_lifecycle(
                chain_transactions(chain)?,
                &mut ArmModel::with_pool(config.params, pool),
                config,
            )?
        }
        Mode::Mpp => {
            let cluster = ClusterConfig::new(config.workers)?.with_timeout(config.barrier_timeout);
            let spec = PersistSpec {
                params: config.params,
                format: config.format,
                producer: "armchain".into(),
                created_ms: config.created_ms(),
            };
            let artifact =
                mpp_mine_and_persist(&chain_transactions(chain)?, &cluster, &spec, model_path)?;
            return Ok((artifact.decode()?, artifact));
        }
        Mode::Streaming => {
            let window = stream_chain(chain, config.window_capacity.unwrap_or(usize::MAX))?;
            let rules = query_window(&window, &config.params)?;
            let artifact = serialize_model(&rules, config.format, "armchain", config.created_ms())?;
            (rules, artifact)
        }
    };
    write_artifact(&artifact, model_path)?;
    Ok((rules, artifact))
}

pub fn write_rules_csv(rules: &[AssociationRule], path: &Path) -> Result<(), ExperimentError> {
    write_rule_table(rules, BufWriter::new(File::create(path)?))?;
    Ok(())
}

/// What a run produced, also written as `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mode: Mode,
    pub seed: u64,
    pub n_patients: usize,
    pub n_records: usize,
    pub n_blocks: usize,
    pub chain_tip: String,
    pub rule_count: usize,
    pub records_csv: Option<PathBuf>,
    pub chain_jsonl: PathBuf,
    pub rules_csv: PathBuf,
    pub model: PathBuf,
}

pub struct ExperimentOutput {
    pub rules: Vec<AssociationRule>,
    pub artifact: ModelArtifact,
    pub summary: RunSummary,
}

/// File names used inside an output directory.
pub mod files {
    pub const RECORDS: &str = "records.csv";
    pub const CHAIN: &str = "chain.jsonl";
    pub const RULES: &str = "rules.csv";
    pub const SUMMARY: &str = "summary.json";
    pub const MODEL_STEM: &str = "model";
}

pub fn model_path(out_dir: &Path, format: ArtifactFormat) -> PathBuf {
    out_dir.join(format!("{}.{}", files::MODEL_STEM, format.extension()))
}

/// Generates records, loads and persists the ledger, re-reads and validates
/// it, then mines and writes all outputs into `out_dir`.
pub fn run_experiment(
    config: &ExperimentConfig,
    out_dir: &Path,
) -> Result<ExperimentOutput, ExperimentError> {
    fs::create_dir_all(out_dir)?;
    let records = generate_synthetic(config)?;
    let records_csv = out_dir.join(files::RECORDS);
    write_records_csv(&records, BufWriter::new(File::create(&records_csv)?))?;

    let network = load_ledger(&records, config)?;
    let chain = converged_chain(&network)?;
    network.close();
    let chain_jsonl = out_dir.join(files::CHAIN);
    write_chain(&chain, &chain_jsonl)?;

    mine_persisted(config, &chain_jsonl, out_dir, Some(records_csv))
}

/// The second half of [`run_experiment`]: everything after the chain is on
/// disk. Fails without writing results if the chain does not validate.
pub fn mine_persisted(
    config: &ExperimentConfig,
    chain_jsonl: &Path,
    out_dir: &Path,
    records_csv: Option<PathBuf>,
) -> Result<ExperimentOutput, ExperimentError> {
    let chain = read_validated_chain(chain_jsonl)?;
    let model = model_path(out_dir, config.format);
    let (rules, artifact) = mine_chain(&chain, config, &model)?;
    let rules_csv = out_dir.join(files::RULES);
    write_rules_csv(&rules, &rules_csv)?;
    let summary = RunSummary {
        mode: config.mode,
        seed: config.seed,
        n_patients: chain_transactions(&chain)?.len(),
        n_records: chain.record_count(),
        n_blocks: chain.len(),
        chain_tip: chain.tip().map(|b| b.hash.to_hex()).unwrap_or_default(),
        rule_count: rules.len(),
        records_csv,
        chain_jsonl: chain_jsonl.to_path_buf(),
        rules_csv,
        model,
    };
    fs::write(
        out_dir.join(files::SUMMARY),
        serde_json::to_vec_pretty(&summary)?,
    )?;
    Ok(ExperimentOutput {
        rules,
        artifact,
        summary,
    })
}
