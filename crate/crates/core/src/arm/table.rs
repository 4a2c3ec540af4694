use std::io::{Read, Write};

use super::AssociationRule;

pub const RULE_TABLE_HEADER: [&str; 10] = [
    "Size of Rule LHS",
    "Size of Rule RHS",
    "Transaction Count",
    "Support(%)",
    "Confidence(%)",
    "Lift",
    "Item1",
    "Item2",
    "Item3",
    "Rule",
];

/// Writes rules as CSV. Percentages and lift are printed with 8 decimals;
/// `Item1..Item3` list lhs items then rhs items, blank when unused.
pub fn write_rule_table<W: Write>(rules: &[AssociationRule], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RULE_TABLE_HEADER)?;
    for rule in rules {
        w.write_record(rule_row(rule))?;
    }
    w.flush()?;
    Ok(())
}

/// The table cells for one rule, in header order.
pub(crate) fn rule_row(rule: &AssociationRule) -> Vec<String> {
    let mut items = rule.lhs.items.iter().chain(&rule.rhs.items).cloned();
    let mut row = vec![
        rule.lhs.len().to_string(),
        rule.rhs.len().to_string(),
        rule.count.to_string(),
        format!("{:.8}", rule.support * 100.0),
        format!("{:.8}", rule.confidence * 100.0),
        format!("{:.8}", rule.lift),
    ];
    row.extend((0..3).map(|_| items.next().unwrap_or_default()));
    row.push(rule.text());
    row
}

pub fn format_rule_table(rules: &[AssociationRule]) -> String {
    let mut buf = Vec::new();
    write_rule_table(rules, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("rule table is UTF-8")
}

/// One parsed row of a rule table.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleRow {
    pub lhs_size: usize,
    pub rhs_size: usize,
    pub count: u64,
    pub support_pct: f64,
    pub confidence_pct: f64,
    pub lift: f64,
    pub lhs: Vec<String>,
    pub rhs: Vec<String>,
}

pub fn parse_rule_table<R: Read>(input: R) -> Result<Vec<RuleRow>, String> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers().map_err(|e| e.to_string())?;
    if headers.iter().ne(RULE_TABLE_HEADER) {
        return Err(format!("unexpected header {headers:?}"));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let r = record.map_err(|e| e.to_string())?;
        let num = |i: usize| r[i].parse::<f64>().map_err(|e| format!("column {i}: {e}"));
        let int = |i: usize| r[i].parse::<u64>().map_err(|e| format!("column {i}: {e}"));
        let (lhs, rhs) = r[9]
            .split_once(" ==> ")
            .ok_or_else(|| format!("malformed rule `{}`", &r[9]))?;
        let split = |s: &str| s.split(" & ").map(str::to_string).collect::<Vec<_>>();
        rows.push(RuleRow {
            lhs_size: int(0)? as usize,
            rhs_size: int(1)? as usize,
            count: int(2)?,
            support_pct: num(3)?,
            confidence_pct: num(4)?,
            lift: num(5)?,
            lhs: split(lhs),
            rhs: split(rhs),
        });
    }
    Ok(rows)
}
