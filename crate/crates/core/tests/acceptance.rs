//! Acceptance suite. Runs without the libtest harness so each criterion
//! prints exactly one PASS/FAIL line with its runtime and budget.

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use armchain::arm::{
    brute_force_rules, compare_rule_sets, format_rule_table, group_transactions, mine_rules,
    parse_rule_table, AssociationRule, ItemTransaction, Itemset, MiningParams,
};
use armchain::contracts::{
    contract_main, ContractError, ContractEvent, ContractState, ContractTerms, Phase, Wallet,
};
use armchain::experiment::{
    default_catalog, files, run_experiment, ExperimentConfig, Mode, MEMBERS,
};
use armchain::ledger::{
    read_records_csv, validate_chain, write_chain_jsonl, Block, Chain, FixedClock, Network, Record,
};
use armchain::lifecycle::{
    decode_model, evaluate_rules, serialize_model, ArtifactFormat, MetricSpec,
};
use armchain::streaming::{query_window, SlidingWindow};

type Outcome = Result<String, String>;
type Variant = (String, Box<dyn Fn(&mut ExperimentConfig)>);
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn vocab(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("item{i:02}")).collect()
}

fn random_txns(
    rng: &mut ChaCha8Rng,
    items: &[String],
    n: usize,
    density: f64,
) -> Vec<ItemTransaction> {
    (0..n)
        .map(|p| {
            let mut picked: Vec<&String> =
                items.iter().filter(|_| rng.random_bool(density)).collect();
            if picked.is_empty() {
                picked.push(items.choose(rng).unwrap());
            }
            ItemTransaction::new(p as u64, picked.into_iter().cloned()).unwrap()
        })
        .collect()
}

fn random_params(rng: &mut ChaCha8Rng) -> MiningParams {
    MiningParams::new(
        rng.random_range(0.05..0.6),
        rng.random_range(0.3..1.0),
        rng.random_range(2..=4),
    )
    .unwrap()
}

fn reference_row_arithmetic() -> Outcome {
    let rule = AssociationRule::from_counts(
        Itemset::new(["actiq", "fentora"], 256),
        Itemset::new(["meperidine"], 303),
        202,
        1001,
    );
    let support_pct = rule.support * 100.0;
    ensure((support_pct - 20.17982010).abs() < 1e-6, || {
        format!("support {support_pct}%")
    })?;
    ensure((support_pct - 100.0 * 202.0 / 1001.0).abs() < 1e-12, || {
        "support formula".into()
    })?;
    ensure(rule.confidence * 100.0 == 78.90625, || {
        format!("confidence {}%", rule.confidence * 100.0)
    })?;
    let implied = 202.0 / 0.7890625;
    ensure(implied == 256.0, || {
        format!("implied antecedent count {implied}")
    })?;
    let rows = parse_rule_table(format_rule_table(&[rule]).as_bytes())?;
    ensure((rows[0].support_pct - 20.17982010).abs() < 1e-6, || {
        "table support column".into()
    })?;
    ensure(rows[0].confidence_pct == 78.90625, || {
        "table confidence column".into()
    })?;
    Ok(format!(
        "support {support_pct:.8}%, antecedent count {implied}"
    ))
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA11CE);
    let mut total_rules = 0;
    for case in 0..100 {
        let items = vocab(rng.random_range(1..=12));
        let n = rng.random_range(1..=200);
        let density = rng.random_range(0.1..0.7);
        let txns = random_txns(&mut rng, &items, n, density);
        let params = random_params(&mut rng);
        let apriori = mine_rules(&txns, &params).map_err(|e| e.to_string())?;
        let oracle = brute_force_rules(&txns, &params).map_err(|e| e.to_string())?;
        compare_rule_sets(&apriori, &oracle, 1e-9).map_err(|e| format!("case {case}: {e}"))?;
        total_rules += oracle.len();
    }
    Ok(format!("100 instances, {total_rules} rules"))
}

fn default_pipeline() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = ExperimentConfig::default();
    let out = run_experiment(&cfg, dir.path()).map_err(|e| e.to_string())?;
    ensure(out.rules.len() >= 10, || {
        format!("only {} rules", out.rules.len())
    })?;

    let records =
        read_records_csv(File::open(dir.path().join(files::RECORDS)).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let txns = group_transactions(&records);
    ensure(txns.len() == 1001, || format!("{} patients", txns.len()))?;
    let n = txns.len() as f64;
    let count = |items: &[String]| txns.iter().filter(|t| t.contains_all(items)).count() as u64;

    let rows =
        parse_rule_table(File::open(dir.path().join(files::RULES)).map_err(|e| e.to_string())?)?;
    ensure(rows.len() == out.rules.len(), || {
        "table and rule list differ in length".into()
    })?;
    for row in &rows {
        let all: Vec<String> = row.lhs.iter().chain(&row.rhs).cloned().collect();
        let both = count(&all);
        let lhs = count(&row.lhs);
        let support = both as f64 / n;
        let confidence = both as f64 / lhs as f64;
        let name = format!("{} ==> {}", row.lhs.join(" & "), row.rhs.join(" & "));
        ensure(both == row.count, || {
            format!("{name}: count {} vs recount {both}", row.count)
        })?;
        ensure(support >= 0.20, || format!("{name}: support {support}"))?;
        ensure(confidence >= 0.70, || {
            format!("{name}: confidence {confidence}")
        })?;
        ensure(all.len() <= 3, || format!("{name}: {} items", all.len()))?;
        ensure((row.support_pct - 100.0 * support).abs() < 1e-7, || {
            format!("{name}: support column")
        })?;
        ensure(
            (row.confidence_pct - 100.0 * confidence).abs() < 1e-7,
            || format!("{name}: confidence column"),
        )?;
    }
    Ok(format!("{} rules, all recounted", rows.len()))
}

fn mode_agreement() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED);
    let mut variants: Vec<Variant> = vec![("single".into(), Box::new(|c| c.mode = Mode::Single))];
    for t in [1, 3, 8] {
        variants.push((
            format!("smp/{t}"),
            Box::new(move |c| {
                c.mode = Mode::Smp;
                c.threads = t;
            }),
        ));
    }
    for w in [1, 3, 4] {
        variants.push((
            format!("mpp/{w}"),
            Box::new(move |c| {
                c.mode = Mode::Mpp;
                c.workers = w;
            }),
        ));
    }
    variants.push((
        "streaming".into(),
        Box::new(|c| {
            c.mode = Mode::Streaming;
            c.window_capacity = Some(c.n_patients);
        }),
    ));

    for _ in 0..10 {
        let seed = rng.random::<u64>();
        let mut reference: Option<Vec<u8>> = None;
        for (name, apply) in &variants {
            let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
            let mut cfg = ExperimentConfig {
                seed,
                ..Default::default()
            };
            apply(&mut cfg);
            run_experiment(&cfg, dir.path()).map_err(|e| format!("seed {seed} {name}: {e}"))?;
            let csv = fs::read(dir.path().join(files::RULES)).map_err(|e| e.to_string())?;
            match &reference {
                None => reference = Some(csv),
                Some(r) => ensure(*r == csv, || {
                    format!("seed {seed}: {name} differs from single")
                })?,
            }
        }
    }
    Ok(format!(
        "10 seeds x {} modes byte-identical",
        variants.len()
    ))
}

fn hundred_block_chain(rng: &mut ChaCha8Rng) -> Chain {
    let items = default_catalog();
    let mut chain = Chain::new(1_000);
    for i in 1..100u64 {
        let tip = chain.tip().unwrap();
        let records = (0..rng.random_range(1..8))
            .map(|_| {
                Record::new(
                    rng.random_range(0..500),
                    items.choose(rng).unwrap().as_str(),
                )
                .unwrap()
            })
            .collect();
        let block = Block::seal(
            i,
            tip.timestamp + rng.random_range(0..1000),
            tip.hash,
            records,
        );
        chain.blocks.push(block);
    }
    chain
}

/// Flips bits in one byte of one hashed or stored field of one block.
fn mutate(chain: &mut Chain, rng: &mut ChaCha8Rng) -> String {
    let b = rng.random_range(0..chain.blocks.len());
    let block = &mut chain.blocks[b];
    let mask: u8 = rng.random_range(1..=127);
    let pos = rng.random::<u32>() as usize;
    let flip = |bytes: &mut [u8]| bytes[pos % bytes.len()] ^= mask;
    let field = rng.random_range(0..6);
    match (field, block.records.is_empty()) {
        (0, _) => {
            let mut v = block.index.to_be_bytes();
            flip(&mut v);
            block.index = u64::from_be_bytes(v);
            format!("block {b} index")
        }
        (1, _) => {
            let mut v = block.timestamp.to_be_bytes();
            flip(&mut v);
            block.timestamp = u64::from_be_bytes(v);
            format!("block {b} timestamp")
        }
        (2, _) => {
            flip(&mut block.prev_hash.0);
            format!("block {b} prev_hash")
        }
        (3, _) | (_, true) => {
            flip(&mut block.hash.0);
            format!("block {b} hash")
        }
        (4, false) => {
            let r = rng.random_range(0..block.records.len());
            let mut v = block.records[r].patient_id.to_be_bytes();
            flip(&mut v);
            block.records[r].patient_id = u64::from_be_bytes(v);
            format!("block {b} record {r} patient")
        }
        _ => {
            let r = rng.random_range(0..block.records.len());
            let mut bytes = std::mem::take(&mut block.records[r].item).into_bytes();
            flip(&mut bytes);
            block.records[r].item = String::from_utf8(bytes).expect("ASCII stays ASCII");
            format!("block {b} record {r} item")
        }
    }
}

fn tamper_evidence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7A3);
    let chain = hundred_block_chain(&mut rng);
    ensure(chain.len() == 100, || format!("{} blocks", chain.len()))?;
    ensure(validate_chain(&chain), || "unmutated chain rejected".into())?;
    for i in 0..1000 {
        let mut copy = chain.clone();
        let what = mutate(&mut copy, &mut rng);
        ensure(!validate_chain(&copy), || {
            format!("mutation {i} ({what}) went unnoticed")
        })?;
    }
    ensure(validate_chain(&chain), || "original chain changed".into())?;
    Ok("1000 of 1000 mutations detected".into())
}

fn replication_convergence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x3E9);
    let items = default_catalog();
    let network = Network::new(&MEMBERS, Arc::new(FixedClock::new(1_700_000_000_000, 7)))
        .map_err(|e| e.to_string())?;
    let leader = network.leader().node_id.clone();
    for _ in 0..200 {
        let records = (0..rng.random_range(1..6))
            .map(|_| {
                Record::new(
                    rng.random_range(0..1000),
                    items.choose(&mut rng).unwrap().as_str(),
                )
                .unwrap()
            })
            .collect();
        network
            .append_block(&leader, records)
            .map_err(|e| e.to_string())?;
    }
    let encoded: Vec<Vec<u8>> = network
        .members()
        .iter()
        .map(|m| {
            let mut buf = Vec::new();
            write_chain_jsonl(&m.chain(), &mut buf).map(|_| buf)
        })
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    network.close();
    ensure(network.members()[0].chain().len() == 201, || {
        "expected 200 blocks after genesis".into()
    })?;
    ensure(encoded.windows(2).all(|w| w[0] == w[1]), || {
        "member chains differ".into()
    })?;
    ensure(validate_chain(&network.members()[0].chain()), || {
        "replicated chain invalid".into()
    })?;
    Ok(format!(
        "{} members, 201 blocks each, byte-identical",
        encoded.len()
    ))
}

struct ContractFixture {
    models: Vec<armchain::ModelArtifact>,
    validation: Vec<ItemTransaction>,
}

impl ContractFixture {
    fn new(rng: &mut ChaCha8Rng) -> Self {
        let items = vocab(8);
        let mut models = Vec::new();
        while models.len() < 6 {
            let txns = random_txns(rng, &items, 40, 0.45);
            let rules = mine_rules(&txns, &random_params(rng)).unwrap();
            if rules.is_empty() {
                continue;
            }
            let format = if models.len() % 2 == 0 {
                ArtifactFormat::RulesetText
            } else {
                ArtifactFormat::RulesetBinary
            };
            models.push(serialize_model(&rules, format, "fixture", 0).unwrap());
        }
        let validation = random_txns(rng, &items, 60, 0.45);
        ContractFixture { models, validation }
    }

    fn scenario(&self, rng: &mut ChaCha8Rng) -> Vec<ContractEvent> {
        let people = ["ana", "bo", "cy"];
        let mut events = Vec::new();
        for _ in 0..rng.random_range(0..3) {
            events.push(ContractEvent::DepositReward {
                giver: ["giver", "sponsor"].choose(rng).unwrap().to_string(),
                amount: rng.random_range(0..150),
                metric: [
                    None,
                    Some(MetricSpec::MeanEmpiricalConfidence),
                    Some(MetricSpec::PooledConfidence),
                ]
                .choose(rng)
                .copied()
                .unwrap(),
            });
        }
        for _ in 0..rng.random_range(0..14) {
            events.push(ContractEvent::ModelSubmission {
                participant: people.choose(rng).unwrap().to_string(),
                artifact: self.models.choose(rng).unwrap().clone(),
                day: rng.random_range(0..2),
            });
        }
        if rng.random_bool(0.85) {
            events.push(ContractEvent::ModelEvaluation {
                validation: self.validation.clone(),
            });
        }
        for _ in 0..rng.random_range(0..3) {
            let who = people.choose(rng).unwrap().to_string();
            let share_with = people
                .iter()
                .filter(|_| rng.random_bool(0.3))
                .map(|p| p.to_string())
                .collect();
            events.push(ContractEvent::CollectReward {
                wallet: Wallet::new(who.clone()),
                participant: who,
                share_with,
            });
        }
        // Some scenarios get two events swapped out of order.
        if events.len() > 1 && rng.random_bool(0.3) {
            let (i, j) = (
                rng.random_range(0..events.len()),
                rng.random_range(0..events.len()),
            );
            events.swap(i, j);
        }
        events
    }
}

fn conserved(s: &ContractState) -> bool {
    s.total_deposited() == s.reward_pool() + s.total_paid()
}

/// Independent re-scoring of every submission: decode, score, argmax with
/// the earliest submission winning ties.
fn expected_winner(
    s: &ContractState,
    validation: &[ItemTransaction],
) -> (Option<String>, Vec<f64>) {
    let metric = s.metric().unwrap_or_default();
    let scores: Vec<f64> = s
        .submissions()
        .iter()
        .map(|sub| evaluate_rules(&decode_model(&sub.artifact).unwrap(), validation, metric))
        .collect();
    let mut winner: Option<(usize, f64)> = None;
    for (i, &score) in scores.iter().enumerate() {
        if winner.is_none_or(|(_, best)| score > best) {
            winner = Some((i, score));
        }
    }
    (
        winner.map(|(i, _)| s.submissions()[i].participant.clone()),
        scores,
    )
}

fn contract_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0DE);
    let fixture = ContractFixture::new(&mut rng);
    let (mut settled, mut tied, mut limited) = (0, 0, 0);
    for case in 0..50 {
        let terms = ContractTerms {
            daily_limit: rng.random_range(1..=5),
            ..Default::default()
        };
        let events = fixture.scenario(&mut rng);

        // Direct application: errors leave the state untouched.
        let mut state = ContractState::new(terms.clone()).unwrap();
        for e in &events {
            let before = state.clone();
            if state.apply(e).is_err() {
                ensure(state == before, || {
                    format!("case {case}: failed event changed the state")
                })?;
            }
            ensure(conserved(&state), || {
                format!("case {case}: value not conserved")
            })?;
        }
        let replayed =
            ContractState::replay(terms.clone(), state.event_log()).map_err(|e| e.to_string())?;
        ensure(
            replayed.canonical_bytes() == state.canonical_bytes(),
            || format!("case {case}: replay differs"),
        )?;

        // Main loop: its log must refold to the same state by either path.
        let run = contract_main(ContractState::new(terms.clone()).unwrap(), events.clone());
        let log = run.state.event_log().to_vec();
        let refold =
            ContractState::replay(terms.clone(), &log).map_err(|e| format!("case {case}: {e}"))?;
        let rerun = contract_main(ContractState::new(terms.clone()).unwrap(), log);
        ensure(
            refold.canonical_bytes() == run.state.canonical_bytes(),
            || format!("case {case}: refold differs"),
        )?;
        ensure(
            rerun.state.canonical_bytes() == run.state.canonical_bytes(),
            || format!("case {case}: rerun differs"),
        )?;
        ensure(conserved(&run.state), || {
            format!("case {case}: main loop broke conservation")
        })?;

        // Rate limit: fill one participant's day, then one more.
        let mut open = ContractState::new(terms.clone()).unwrap();
        open.apply(&ContractEvent::DepositReward {
            giver: "giver".into(),
            amount: 10,
            metric: None,
        })
        .unwrap();
        let submit = ContractEvent::ModelSubmission {
            participant: "ana".into(),
            artifact: fixture.models[0].clone(),
            day: 3,
        };
        for _ in 0..terms.daily_limit {
            open.apply(&submit)
                .map_err(|e| format!("case {case}: {e}"))?;
        }
        ensure(
            matches!(
                open.apply(&submit),
                Err(ContractError::SubmissionLimitReached { .. })
            ),
            || format!("case {case}: submission {} accepted", terms.daily_limit + 1),
        )?;
        limited += 1;

        // Settlement against exhaustive re-scoring.
        for s in [&state, &run.state] {
            if s.phase() != Phase::Settled {
                continue;
            }
            settled += 1;
            let (winner, scores) = expected_winner(s, &fixture.validation);
            let stored: Vec<f64> = s.submissions().iter().map(|x| x.score.unwrap()).collect();
            ensure(stored == scores, || {
                format!("case {case}: stored scores differ")
            })?;
            ensure(s.winner() == winner.as_deref(), || {
                format!("case {case}: winner {:?}, expected {winner:?}", s.winner())
            })?;
            let distinct: BTreeSet<u64> = scores.iter().map(|x| x.to_bits()).collect();
            if distinct.len() < scores.len() {
                tied += 1;
            }
        }
    }
    Ok(format!(
        "50 scenarios, {settled} settlements ({tied} with ties), {limited} limit checks"
    ))
}

fn streaming_suffix() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x57E4);
    let mut queries = 0;
    for case in 0..50 {
        let items = vocab(rng.random_range(2..=9));
        let len = rng.random_range(1..=120);
        let capacity = rng.random_range(1..=80);
        let density = rng.random_range(0.2..0.6);
        let stream = random_txns(&mut rng, &items, len, density);
        let params = random_params(&mut rng);
        let mut window = SlidingWindow::new(capacity).map_err(|e| e.to_string())?;
        for (g, t) in stream.iter().enumerate() {
            window.ingest(t.clone());
            let generation = g + 1;
            if generation % 7 != 0 && generation != len {
                continue;
            }
            let suffix = &stream[generation - capacity.min(generation)..generation];
            let streamed = query_window(&window, &params).map_err(|e| e.to_string())?;
            let batch = mine_rules(suffix, &params).map_err(|e| e.to_string())?;
            ensure(streamed == batch, || {
                format!("case {case} generation {generation}: window differs from batch")
            })?;
            queries += 1;
        }
    }
    Ok(format!("50 streams, {queries} queries"))
}

fn random_rule(rng: &mut ChaCha8Rng, items: &[String]) -> AssociationRule {
    let k = rng.random_range(2..=items.len().min(4));
    let picked: Vec<&String> = items.choose_multiple(rng, k).collect();
    let split = rng.random_range(1..k);
    let n = rng.random_range(1..100_000u64);
    let both = rng.random_range(0..=n);
    let lhs = Itemset::new(
        picked[..split].iter().map(|s| s.as_str()),
        rng.random_range(both..=n),
    );
    let rhs = Itemset::new(
        picked[split..].iter().map(|s| s.as_str()),
        rng.random_range(both..=n),
    );
    let mut rule = AssociationRule::from_counts(lhs, rhs, both, n);
    if rng.random_bool(0.2) {
        // Arbitrary finite statistics must survive too.
        rule.support = f64::from_bits(rng.random::<u64>() >> 2);
        rule.lift = rng.random::<f64>() * 1e300;
    }
    rule
}

fn serialization_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5E7);
    let mut total = 0;
    for case in 0..100 {
        let items: Vec<String> = (0..rng.random_range(2..=15))
            .map(|i| {
                format!(
                    "{}-{i}",
                    ["drug", "rx", "ÿmed", "x"].choose(&mut rng).unwrap()
                )
            })
            .collect();
        let rules: Vec<AssociationRule> = (0..rng.random_range(1..=40))
            .map(|_| random_rule(&mut rng, &items))
            .collect();
        let mut decoded = Vec::new();
        for format in [ArtifactFormat::RulesetText, ArtifactFormat::RulesetBinary] {
            let artifact =
                serialize_model(&rules, format, "acceptance", case).map_err(|e| e.to_string())?;
            let back =
                decode_model(&artifact).map_err(|e| format!("case {case} {format:?}: {e}"))?;
            ensure(back == rules, || {
                format!("case {case}: {format:?} round trip differs")
            })?;
            let json = serde_json::to_string(&artifact).map_err(|e| e.to_string())?;
            let reparsed: armchain::ModelArtifact =
                serde_json::from_str(&json).map_err(|e| e.to_string())?;
            ensure(reparsed == artifact, || {
                format!("case {case}: {format:?} JSON form differs")
            })?;
            decoded.push(back);
        }
        ensure(decoded[0] == decoded[1], || {
            format!("case {case}: formats decode differently")
        })?;
        total += rules.len();
    }
    Ok(format!("100 rule sets, {total} rules, both formats"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        (
            "rule table arithmetic",
            Duration::from_secs(1),
            reference_row_arithmetic,
        ),
        (
            "oracle equivalence",
            Duration::from_secs(60),
            oracle_equivalence,
        ),
        (
            "default pipeline",
            Duration::from_secs(30),
            default_pipeline,
        ),
        ("mode agreement", Duration::from_secs(300), mode_agreement),
        ("tamper evidence", Duration::from_secs(10), tamper_evidence),
        (
            "replication convergence",
            Duration::from_secs(5),
            replication_convergence,
        ),
        (
            "contract properties",
            Duration::from_secs(30),
            contract_properties,
        ),
        (
            "streaming suffix",
            Duration::from_secs(60),
            streaming_suffix,
        ),
        (
            "serialization round trip",
            Duration::from_secs(10),
            serialization_round_trip,
        ),
    ];
    // `cargo test -- <filter>` passes a name filter; honour substring matches.
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.into_iter().enumerate() {
        if filter.as_deref().is_some_and(|f| !name.contains(f)) {
            continue;
        }
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let result = match outcome {
            Ok(detail) if elapsed <= budget => Ok(detail),
            Ok(detail) => Err(format!("{detail}; over budget")),
            Err(e) => Err(e),
        };
        match result {
            Ok(detail) => println!(
                "criterion {}: PASS {name} ({elapsed:.2?} of {budget:?}) {detail}",
                i + 1
            ),
            Err(e) => {
                failed += 1;
                println!(
                    "criterion {}: FAIL {name} ({elapsed:.2?} of {budget:?}) {e}",
                    i + 1
                );
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
