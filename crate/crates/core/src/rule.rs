//! Association rules and their JSON Lines representation.

use std::cmp::Ordering;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tabular::{ItemId, OneHotSchema, TransactionDb};

/// `antecedent -> consequent` with a single-item consequent.
///
/// Equality and ordering look only at the items; the statistics ride along.
#[derive(Debug, Clone)]
pub struct Rule {
    /// Sorted item ids, at most one per column.
    pub antecedent: Vec<ItemId>,
    pub consequent: ItemId,
    pub support: f64,
    pub confidence: f64,
    pub zhang: Option<f64>,
}

impl Rule {
    pub fn new(mut antecedent: Vec<ItemId>, consequent: ItemId) -> Self {
        antecedent.sort_unstable();
        Rule {
            antecedent,
            consequent,
            support: 0.0,
            confidence: 0.0,
            zhang: None,
        }
    }

    pub fn key(&self) -> (&[ItemId], ItemId) {
        (&self.antecedent, self.consequent)
    }

    /// Fills support and confidence by counting over `db`.
    pub fn measure(&mut self, db: &TransactionDb) {
        let n = db.len();
        let cover = db.count(&self.antecedent);
        let mut both = self.antecedent.clone();
        both.push(self.consequent);
        let joint = db.count(&both);
        self.support = if n == 0 { 0.0 } else { joint as f64 / n as f64 };
        self.confidence = if cover == 0 {
            0.0
        } else {
            joint as f64 / cover as f64
        };
    }
}

impl PartialEq for Rule {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Rule {}

impl PartialOrd for Rule {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Rule {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

impl std::hash::Hash for Rule {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.key().hash(state);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemRecord {
    pub column: String,
    pub value: String,
}

/// One line of a rules file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleRecord {
    pub antecedent: Vec<ItemRecord>,
    pub consequent: ItemRecord,
    pub support: f64,
    pub confidence: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

fn item_record(schema: &OneHotSchema, item: ItemId) -> ItemRecord {
    let (column, value) = schema.describe(item);
    ItemRecord {
        column: column.to_owned(),
        value: value.to_owned(),
    }
}

impl RuleRecord {
    pub fn from_rule(rule: &Rule, schema: &OneHotSchema, source: Option<&str>) -> Self {
        RuleRecord {
            antecedent: rule
                .antecedent
                .iter()
                .map(|&i| item_record(schema, i))
                .collect(),
            consequent: item_record(schema, rule.consequent),
            support: rule.support,
            confidence: rule.confidence,
            source: source.map(str::to_owned),
        }
    }

    pub fn to_rule(&self, schema: &OneHotSchema) -> Result<Rule> {
        let lookup = |item: &ItemRecord| {
            schema.find(&item.column, &item.value).ok_or_else(|| {
                Error::Format(format!(
                    "unknown item {}={} in rules file",
                    item.column, item.value
                ))
            })
        };
        let antecedent = self.antecedent.iter().map(lookup).collect::<Result<Vec<_>>>()?;
        let consequent = lookup(&self.consequent)?;
        let mut rule = Rule::new(antecedent, consequent);
        rule.support = self.support;
        rule.confidence = self.confidence;
        Ok(rule)
    }
}

pub fn write_jsonl<W: Write>(
    mut out: W,
    rules: &[Rule],
    schema: &OneHotSchema,
    source: Option<&str>,
) -> Result<()> {
    for rule in rules {
        serde_json::to_writer(&mut out, &RuleRecord::from_rule(rule, schema, source))?;
        out.write_all(b"\n").map_err(|e| Error::io("<rules>", e))?;
    }
    out.flush().map_err(|e| Error::io("<rules>", e))
}

pub fn read_jsonl<R: BufRead>(input: R, schema: &OneHotSchema) -> Result<Vec<Rule>> {
    let mut rules = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<rules>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: RuleRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            row: i + 1,
            message: e.to_string(),
        })?;
        rules.push(record.to_rule(schema)?);
    }
    Ok(rules)
}
