mod agents;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use armchain::contracts::{
    contract_main, write_event_log, ContractEvent, ContractRun, ContractState, ContractTerms, Halt,
};
use armchain::experiment::{
    self, converged_chain, generate_synthetic, load_ledger, read_validated_chain, run_experiment,
    write_chain, ExperimentConfig,
};
use armchain::ledger::{read_chain_jsonl, read_records_csv, validate_chain, write_records_csv};
use armchain::lifecycle::{read_artifact, MetricSpec};
use armchain::streaming::{
    validate_in_window, ContinuousQuery, SlidingWindow, TransactionAssembler,
};

#[derive(Parser)]
#[command(
    name = "armchain",
    version,
    about = "Association rule mining over a permissioned prescription ledger"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic prescription records as CSV.
    Gen {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "records.csv")]
        out: PathBuf,
    },
    /// Load a records CSV into the three-member ledger and write the chain.
    Load {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        records: PathBuf,
        #[arg(long, default_value = "chain.jsonl")]
        out: PathBuf,
    },
    /// Validate a persisted chain. Exits non-zero if any hash fails.
    ValidateChain {
        #[arg(long)]
        chain: PathBuf,
    },
    /// Mine a validated chain and write the rule table, model and summary.
    Mine {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        chain: PathBuf,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Stream a chain through a sliding window, querying every few transactions.
    Stream {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        chain: PathBuf,
        /// Run a continuous query after this many transactions.
        #[arg(long, default_value_t = 100)]
        every: u64,
        #[arg(long, default_value = "queries.csv")]
        out: PathBuf,
        /// Score this model against the window at every query tick.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Run a contract scenario (JSON) through the contract main loop.
    Contract {
        #[arg(long)]
        scenario: PathBuf,
        /// Write the applied event log as JSON lines.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Simulate participants competing for a reward and run the contract.
    Agents {
        #[command(flatten)]
        sim: agents::SimArgs,
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// The full experiment: generate, load, validate, mine, write.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
}

/// Experiment settings: a config file, then individual overrides.
#[derive(Args, Default)]
struct ConfigArgs {
    /// `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_patients: Option<usize>,
    #[arg(long)]
    drugs_per_patient: Option<usize>,
    #[arg(long)]
    min_support: Option<f64>,
    #[arg(long)]
    min_confidence: Option<f64>,
    #[arg(long)]
    max_rule_items: Option<usize>,
    /// single, smp, mpp or streaming.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    window_capacity: Option<usize>,
    /// text or binary.
    #[arg(long)]
    format: Option<String>,
    /// Any other config key, as `key=value`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_file(p)
                .with_context(|| format!("reading {}", p.display()))?,
            None => ExperimentConfig::default(),
        };
        let flags: [(&str, Option<String>); 11] = [
            ("seed", self.seed.map(|v| v.to_string())),
            ("n_patients", self.n_patients.map(|v| v.to_string())),
            (
                "drugs_per_patient",
                self.drugs_per_patient.map(|v| v.to_string()),
            ),
            ("min_support", self.min_support.map(|v| v.to_string())),
            ("min_confidence", self.min_confidence.map(|v| v.to_string())),
            ("max_rule_items", self.max_rule_items.map(|v| v.to_string())),
            ("mode", self.mode.clone()),
            ("threads", self.threads.map(|v| v.to_string())),
            ("workers", self.workers.map(|v| v.to_string())),
            (
                "window_capacity",
                self.window_capacity.map(|v| v.to_string()),
            ),
            ("format", self.format.clone()),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, &v).map_err(anyhow::Error::msg)?;
            }
        }
        for kv in &self.overrides {
            let (k, v) = kv
                .split_once('=')
                .with_context(|| format!("--set {kv}: expected KEY=VALUE"))?;
            cfg.set(k.trim(), v).map_err(anyhow::Error::msg)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// A scenario is either a bare list of events or terms plus events.
#[derive(Deserialize)]
#[serde(untagged)]
enum Scenario {
    Events(Vec<ContractEvent>),
    Full {
        #[serde(default)]
        terms: Option<ContractTerms>,
        events: Vec<ContractEvent>,
    },
}

#[derive(Serialize)]
struct SubmissionReport<'a> {
    participant: &'a str,
    day: u32,
    format: &'a str,
    score: Option<f64>,
}

#[derive(Serialize)]
struct ContractReport<'a> {
    phase: armchain::contracts::Phase,
    metric: Option<MetricSpec>,
    reward_pool: u64,
    total_deposited: u64,
    winner: Option<&'a str>,
    payouts: &'a [armchain::contracts::Payout],
    submissions: Vec<SubmissionReport<'a>>,
    applied_events: usize,
    unprocessed_events: usize,
    halted: Option<String>,
    error: Option<String>,
    digest: String,
}

fn contract_report(run: &ContractRun) -> ContractReport<'_> {
    let s = &run.state;
    ContractReport {
        phase: s.phase(),
        metric: s.metric(),
        reward_pool: s.reward_pool(),
        total_deposited: s.total_deposited(),
        winner: s.winner(),
        payouts: s.payouts(),
        submissions: s
            .submissions()
            .iter()
            .map(|x| SubmissionReport {
                participant: &x.participant,
                day: x.day,
                format: x.artifact.format.extension(),
                score: x.score,
            })
            .collect(),
        applied_events: s.event_log().len(),
        unprocessed_events: run.unprocessed,
        halted: match &run.halt {
            Some(Halt::Break { index, kind }) => {
                Some(format!("event {index}: unhandled kind {kind}"))
            }
            Some(Halt::Error { index, .. }) => Some(format!("event {index}")),
            None => None,
        },
        error: run.error().map(|e| e.to_string()),
        digest: s.digest(),
    }
}

/// Prints the report and turns an errored run into a failing exit code.
fn finish_contract(run: &ContractRun, log: Option<&Path>) -> Result<ExitCode> {
    if let Some(path) = log {
        write_event_log(run.state.event_log(), BufWriter::new(File::create(path)?))?;
    }
    writeln!(
        std::io::stdout().lock(),
        "{}",
        serde_json::to_string_pretty(&contract_report(run))?
    )?;
    if let Some(e) = run.error() {
        eprintln!("contract error: {e}");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_stream(
    cfg: &ExperimentConfig,
    chain: &Path,
    every: u64,
    out: &Path,
    model: Option<&Path>,
) -> Result<()> {
    if every == 0 {
        bail!("--every must be at least 1");
    }
    let chain = read_validated_chain(chain)?;
    let model = model.map(read_artifact).transpose()?;
    let capacity = cfg.window_capacity.unwrap_or(usize::MAX);
    let mut window = SlidingWindow::new(capacity)?;
    let mut query = ContinuousQuery::new(BufWriter::new(File::create(out)?), cfg.params)?;
    let mut assembler = TransactionAssembler::new();

    let mut on_txn = |window: &mut SlidingWindow, t, last: bool| -> Result<()> {
        let report = window.ingest(t);
        if report.generation.is_multiple_of(every) || last {
            let rules = query.tick(window)?;
            let score = match &model {
                Some(m) => validate_in_window(window, m, MetricSpec::default())?,
                None => None,
            };
            let score = score.map(|s| format!(" score={s:.6}")).unwrap_or_default();
            println!(
                "tick {} generation {} window {} rules {}{}",
                query.ticks(),
                report.generation,
                window.len(),
                rules.len(),
                score
            );
        }
        Ok(())
    };
    for record in chain.blocks.iter().flat_map(|b| &b.records) {
        if let Some(t) = assembler.push(record) {
            on_txn(&mut window, t, false)?;
        }
    }
    if let Some(t) = assembler.flush() {
        on_txn(&mut window, t, true)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Gen { config, out } => {
            let cfg = config.resolve()?;
            let records = generate_synthetic(&cfg)?;
            write_records_csv(&records, BufWriter::new(File::create(&out)?))?;
            println!(
                "wrote {} records for {} patients to {}",
                records.len(),
                cfg.n_patients,
                out.display()
            );
        }
        Command::Load {
            config,
            records,
            out,
        } => {
            let cfg = config.resolve()?;
            let recs = read_records_csv(BufReader::new(File::open(&records)?))?;
            let network = load_ledger(&recs, &cfg)?;
            let chain = converged_chain(&network)?;
            network.close();
            write_chain(&chain, &out)?;
            let tip = chain.tip().map(|b| b.hash.to_hex()).unwrap_or_default();
            println!(
                "{} blocks replicated to {} members; tip {tip}; wrote {}",
                chain.len(),
                network.members().len(),
                out.display()
            );
        }
        Command::ValidateChain { chain } => {
            let c = read_chain_jsonl(BufReader::new(File::open(&chain)?))?;
            if validate_chain(&c) {
                println!("valid: {} blocks, {} records", c.len(), c.record_count());
            } else {
                println!("INVALID: {}", chain.display());
                return Ok(ExitCode::from(1));
            }
        }
        Command::Mine {
            config,
            chain,
            out_dir,
        } => {
            let cfg = config.resolve()?;
            fs::create_dir_all(&out_dir)?;
            let out = experiment::mine_persisted(&cfg, &chain, &out_dir, None)?;
            print_rules(&out);
        }
        Command::Stream {
            config,
            chain,
            every,
            out,
            model,
        } => {
            let cfg = config.resolve()?;
            cmd_stream(&cfg, &chain, every, &out, model.as_deref())?;
        }
        Command::Contract { scenario, log } => {
            let text = fs::read_to_string(&scenario)
                .with_context(|| format!("reading {}", scenario.display()))?;
            let (terms, events) = match serde_json::from_str(&text)
                .with_context(|| format!("parsing scenario {}", scenario.display()))?
            {
                Scenario::Events(events) => (ContractTerms::default(), events),
                Scenario::Full { terms, events } => (terms.unwrap_or_default(), events),
            };
            let run = contract_main(ContractState::new(terms)?, events);
            return finish_contract(&run, log.as_deref());
        }
        Command::Agents { sim, log } => {
            let run = agents::simulate(&sim)?;
            return finish_contract(&run, log.as_deref());
        }
        Command::Run { config, out_dir } => {
            let cfg = config.resolve()?;
            let out = run_experiment(&cfg, &out_dir)?;
            print_rules(&out);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn print_rules(out: &experiment::ExperimentOutput) {
    let s = &out.summary;
    let mut stdout = std::io::stdout().lock();
    let _ = writeln!(
        stdout,
        "mode {}: {} rules from {} records of {} patients ({} blocks, tip {})",
        s.mode, s.rule_count, s.n_records, s.n_patients, s.n_blocks, s.chain_tip
    );
    for r in &out.rules {
        let _ = writeln!(
            stdout,
            "  {:<45} support {:>6.2}%  confidence {:>6.2}%  lift {:.3}",
            r.text(),
            r.support * 100.0,
            r.confidence * 100.0,
            r.lift
        );
    }
    let _ = writeln!(
        stdout,
        "rules: {}  model: {}",
        s.rules_csv.display(),
        s.model.display()
    );
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
