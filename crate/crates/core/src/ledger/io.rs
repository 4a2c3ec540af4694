use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use super::block::{Block, Chain, Record};
use super::LedgerError;

/// Writes one JSON object per block, one block per line.
pub fn write_chain_jsonl<W: Write>(chain: &Chain, mut out: W) -> Result<(), LedgerError> {
    for block in &chain.blocks {
        serde_json::to_writer(&mut out, block).map_err(std::io::Error::other)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Parses a JSON-lines chain. Does not validate hashes; call
/// [`validate_chain`](super::validate_chain) on the result.
pub fn read_chain_jsonl<R: BufRead>(input: R) -> Result<Chain, LedgerError> {
    let mut blocks = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let block: Block = serde_json::from_str(&line).map_err(|e| LedgerError::Parse {
            line: i + 1,
            reason: e.to_string(),
        })?;
        blocks.push(block);
    }
    Ok(Chain { blocks })
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    patient: u64,
    drug: String,
}

/// Reads `patient,drug` rows.
pub fn read_records_csv<R: Read>(input: R) -> Result<Vec<Record>, LedgerError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = reader.headers().map_err(|e| csv_error(1, e))?.clone();
    if headers.len() != 2 || &headers[0] != "patient" || &headers[1] != "drug" {
        return Err(LedgerError::Parse {
            line: 1,
            reason: "expected header `patient,drug`".into(),
        });
    }
    let mut records = Vec::new();
    for (i, row) in reader.deserialize::<CsvRow>().enumerate() {
        let row = row.map_err(|e| csv_error(i + 2, e))?;
        records.push(
            Record::new(row.patient, row.drug).map_err(|e| LedgerError::Parse {
                line: i + 2,
                reason: e.to_string(),
            })?,
        );
    }
    Ok(records)
}

pub fn write_records_csv<W: Write>(records: &[Record], out: W) -> Result<(), LedgerError> {
    let mut writer = csv::Writer::from_writer(out);
    for r in records {
        writer
            .serialize(CsvRow {
                patient: r.patient_id,
                drug: r.item.clone(),
            })
            .map_err(|e| csv_error(0, e))?;
    }
    writer.flush()?;
    Ok(())
}

fn csv_error(line: usize, e: csv::Error) -> LedgerError {
    LedgerError::Parse {
        line,
        reason: e.to_string(),
    }
}
