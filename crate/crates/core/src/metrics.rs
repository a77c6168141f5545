//! Rule quality: coverage, support, confidence, data coverage, Zhang's metric.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rule::Rule;
use crate::tabular::TransactionDb;
use crate::tidset::{vertical, TidSet};

/// Aggregate quality of a rule set. Averages are over rules whose
/// antecedent occurs at least once.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RuleMetricsReport {
    pub rule_count: usize,
    /// Mean fraction of transactions containing the antecedent.
    pub avg_coverage: f64,
    pub avg_support: f64,
    pub avg_confidence: f64,
    /// Fraction of transactions containing at least one antecedent.
    pub total_data_coverage: f64,
    pub avg_zhang: f64,
    pub exec_seconds: f64,
    /// Set when no rule contributed to the averages.
    pub empty: bool,
    /// Rules whose antecedent never occurs (excluded from the averages).
    pub undefined_rules: usize,
}

/// Raw counts for one rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RuleCounts {
    pub n: usize,
    pub antecedent: usize,
    pub consequent: usize,
    pub joint: usize,
}

impl RuleCounts {
    pub fn confidence(&self) -> f64 {
        self.joint as f64 / self.antecedent as f64
    }

    /// Confidence of `not X -> Y`; 0 when every transaction contains `X`.
    pub fn complement_confidence(&self) -> f64 {
        let outside = self.n - self.antecedent;
        if outside == 0 {
            0.0
        } else {
            (self.consequent - self.joint) as f64 / outside as f64
        }
    }

    pub fn zhang(&self) -> f64 {
        let conf = self.confidence();
        let conf_out = self.complement_confidence();
        let denom = conf.max(conf_out);
        if denom == 0.0 {
            0.0
        } else {
            (conf - conf_out) / denom
        }
    }
}

/// Precomputed item tidsets for repeated rule evaluation.
pub struct RuleEvaluator<'a> {
    db: &'a TransactionDb,
    tids: Vec<TidSet>,
}

impl<'a> RuleEvaluator<'a> {
    pub fn new(db: &'a TransactionDb) -> Self {
        RuleEvaluator {
            db,
            tids: vertical(db.n_items(), db.transactions()),
        }
    }

    pub fn cover(&self, items: &[usize]) -> TidSet {
        let mut set = TidSet::full(self.db.len());
        for &i in items {
            set.intersect_with(&self.tids[i]);
        }
        set
    }

    pub fn counts(&self, rule: &Rule) -> RuleCounts {
        let cover = self.cover(&rule.antecedent);
        let consequent = &self.tids[rule.consequent];
        RuleCounts {
            n: self.db.len(),
            antecedent: cover.len(),
            consequent: consequent.len(),
            joint: cover.intersection_len(consequent),
        }
    }
}

/// Zhang's metric of one rule over `db`.
pub fn zhang(rule: &Rule, db: &TransactionDb) -> Result<f64> {
    if db.is_empty() {
        return Err(Error::EmptyDatabase);
    }
    let counts = RuleEvaluator::new(db).counts(rule);
    if counts.antecedent == 0 {
        return Err(Error::UndefinedRule {
            antecedent: rule.antecedent.clone(),
        });
    }
    Ok(counts.zhang())
}

/// Fills support, confidence and Zhang's metric of each rule in place.
/// Rules whose antecedent never occurs get zeros and no Zhang value.
pub fn annotate(rules: &mut [Rule], db: &TransactionDb) {
    let eval = RuleEvaluator::new(db);
    let n = db.len();
    for rule in rules {
        let c = eval.counts(rule);
        if c.antecedent == 0 || n == 0 {
            rule.support = 0.0;
            rule.confidence = 0.0;
            rule.zhang = None;
        } else {
            rule.support = c.joint as f64 / n as f64;
            rule.confidence = c.confidence();
            rule.zhang = Some(c.zhang());
        }
    }
}

pub fn evaluate_rules(
    rules: &[Rule],
    db: &TransactionDb,
    exec_seconds: f64,
) -> Result<RuleMetricsReport> {
    if db.is_empty() {
        return Err(Error::EmptyDatabase);
    }
    let n = db.len() as f64;
    let eval = RuleEvaluator::new(db);
    let mut seen = HashSet::new();
    let mut covered = TidSet::empty(db.len());
    let mut report = RuleMetricsReport {
        exec_seconds,
        ..RuleMetricsReport::default()
    };
    let (mut cov, mut sup, mut conf, mut zh) = (0.0, 0.0, 0.0, 0.0);
    let mut defined = 0usize;
    for rule in rules {
        if !seen.insert(rule.key()) {
            continue;
        }
        report.rule_count += 1;
        let cover = eval.cover(&rule.antecedent);
        let c = RuleCounts {
            n: db.len(),
            antecedent: cover.len(),
            consequent: eval.tids[rule.consequent].len(),
            joint: cover.intersection_len(&eval.tids[rule.consequent]),
        };
        if c.antecedent == 0 {
            report.undefined_rules += 1;
            continue;
        }
        covered.union_with(&cover);
        defined += 1;
        cov += c.antecedent as f64 / n;
        sup += c.joint as f64 / n;
        conf += c.confidence();
        zh += c.zhang();
    }
    report.total_data_coverage = covered.len() as f64 / n;
    if defined == 0 {
        report.empty = true;
    } else {
        let k = defined as f64;
        report.avg_coverage = cov / k;
        report.avg_support = sup / k;
        report.avg_confidence = conf / k;
        report.avg_zhang = zh / k;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::miners::fixtures::db4;

    #[test]
    fn zhang_on_db4() {
        // a -> b: conf 2/3; only t4 lacks a and it has b, so conf' = 1
        let z = zhang(&Rule::new(vec![0], 1), &db4()).unwrap();
        assert!((z + 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn zhang_edge_cases() {
        let independent = RuleCounts { n: 4, antecedent: 2, consequent: 4, joint: 2 };
        assert_eq!(independent.zhang(), 0.0);
        let maximal = RuleCounts { n: 4, antecedent: 2, consequent: 2, joint: 2 };
        assert_eq!(maximal.zhang(), 1.0);
        let everywhere = RuleCounts { n: 4, antecedent: 4, consequent: 2, joint: 2 };
        assert_eq!(everywhere.complement_confidence(), 0.0);
        assert_eq!(everywhere.zhang(), 1.0);
        let never = RuleCounts { n: 4, antecedent: 2, consequent: 0, joint: 0 };
        assert_eq!(never.zhang(), 0.0);
    }

    #[test]
    fn zhang_undefined_rule() {
        let db = TransactionDb::new(db4().schema().clone(), vec![vec![1], vec![2]]).unwrap();
        assert!(matches!(
            zhang(&Rule::new(vec![0], 1), &db),
            Err(Error::UndefinedRule { .. })
        ));
    }

    #[test]
    fn report_for_a_implies_b() {
        let r = evaluate_rules(&[Rule::new(vec![0], 1)], &db4(), 0.0).unwrap();
        assert_eq!(r.rule_count, 1);
        assert!((r.avg_coverage - 0.75).abs() < 1e-9);
        assert!((r.avg_support - 0.5).abs() < 1e-9);
        assert!((r.avg_confidence - 0.666667).abs() < 1e-6);
        assert!((r.total_data_coverage - 0.75).abs() < 1e-9);
        assert!((r.avg_zhang + 0.333333).abs() < 1e-6);
        assert!(!r.empty);
    }

    #[test]
    fn empty_rule_set() {
        let r = evaluate_rules(&[], &db4(), 1.5).unwrap();
        assert_eq!(r.rule_count, 0);
        assert!(r.empty);
        assert_eq!(r.avg_confidence, 0.0);
        assert_eq!(r.total_data_coverage, 0.0);
        assert_eq!(r.exec_seconds, 1.5);
    }

    #[test]
    fn shared_antecedent_coverage_is_a_union() {
        let rules = [Rule::new(vec![0], 1), Rule::new(vec![0], 2)];
        let r = evaluate_rules(&rules, &db4(), 0.0).unwrap();
        assert!((r.total_data_coverage - 0.75).abs() < 1e-12);
    }

    #[test]
    fn duplicates_do_not_count_twice() {
        let once = evaluate_rules(&[Rule::new(vec![0], 1), Rule::new(vec![1, 2], 0)], &db4(), 0.0).unwrap();
        let twice = evaluate_rules(
            &[Rule::new(vec![0], 1), Rule::new(vec![1, 2], 0), Rule::new(vec![0], 1)],
            &db4(),
            0.0,
        )
        .unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn empty_db_is_an_error() {
        let db = TransactionDb::new(db4().schema().clone(), vec![]).unwrap();
        assert!(matches!(evaluate_rules(&[], &db, 0.0), Err(Error::EmptyDatabase)));
    }

    #[test]
    fn annotate_fills_fields() {
        let mut rules = vec![Rule::new(vec![0], 1)];
        annotate(&mut rules, &db4());
        assert_eq!(rules[0].support, 0.5);
        assert!((rules[0].zhang.unwrap() + 1.0 / 3.0).abs() < 1e-12);
    }
}
