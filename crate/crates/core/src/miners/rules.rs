use std::collections::HashMap;

use super::Itemset;
use crate::error::{Error, Result};
use crate::rule::Rule;
use crate::tabular::{ItemId, TransactionDb};

/// Assembles single-consequent rules from a support-closed itemset list.
///
/// Every itemset `Z` with `2 <= |Z| <= max_antecedents + 1` yields
/// `Z \ {y} -> y` for each `y` in `Z` whose confidence reaches `min_conf`.
pub fn generate_rules(
    frequent: &[Itemset],
    db: &TransactionDb,
    min_conf: f64,
    max_antecedents: usize,
) -> Result<Vec<Rule>> {
    let counts: HashMap<&[ItemId], usize> = frequent
        .iter()
        .map(|s| (s.items.as_slice(), s.count))
        .collect();

    let mut scratch = Vec::new();
    for set in frequent.iter().filter(|s| s.items.len() >= 2) {
        for skip in 0..set.items.len() {
            scratch.clear();
            scratch.extend(
                set.items
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != skip)
                    .map(|(_, &item)| item),
            );
            if !counts.contains_key(scratch.as_slice()) {
                return Err(Error::NotSupportClosed {
                    itemset: set.items.clone(),
                    missing: scratch.clone(),
                });
            }
        }
    }

    let n = db.len();
    let mut rules = Vec::new();
    for set in frequent {
        let len = set.items.len();
        if len < 2 || len > max_antecedents + 1 {
            continue;
        }
        for (skip, &consequent) in set.items.iter().enumerate() {
            scratch.clear();
            scratch.extend(
                set.items
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != skip)
                    .map(|(_, &item)| item),
            );
            let cover = counts[scratch.as_slice()];
            let confidence = set.count as f64 / cover as f64;
            if confidence >= min_conf {
                rules.push(Rule {
                    antecedent: scratch.clone(),
                    consequent,
                    support: set.count as f64 / n as f64,
                    confidence,
                    zhang: None,
                });
            }
        }
    }
    rules.sort_unstable();
    rules.dedup();
    Ok(rules)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::miners::brute_force_frequent;
    use crate::miners::fixtures::db4;

    #[test]
    fn db4_rules_at_two_thirds() {
        let db = db4();
        let frequent = brute_force_frequent(&db, 0.5).unwrap();
        let rules = generate_rules(&frequent, &db, 0.6, 2).unwrap();
        assert_eq!(rules.len(), 6);
        for r in &rules {
            assert!((r.confidence - 2.0 / 3.0).abs() < 1e-15);
            assert_eq!(r.support, 0.5);
        }
        let keys: Vec<_> = rules.iter().map(|r| (r.antecedent.clone(), r.consequent)).collect();
        assert_eq!(
            keys,
            vec![
                (vec![0], 1),
                (vec![0], 2),
                (vec![1], 0),
                (vec![1], 2),
                (vec![2], 0),
                (vec![2], 1)
            ]
        );
    }

    #[test]
    fn db4_rules_at_high_confidence() {
        let db = db4();
        let frequent = brute_force_frequent(&db, 0.5).unwrap();
        assert!(generate_rules(&frequent, &db, 0.8, 2).unwrap().is_empty());
    }

    #[test]
    fn zero_confidence_emits_every_candidate() {
        let db = db4();
        let frequent = brute_force_frequent(&db, 0.25).unwrap();
        // 3 pairs x 2 directions + 1 triple x 3 consequents
        assert_eq!(generate_rules(&frequent, &db, 0.0, 2).unwrap().len(), 9);
        assert_eq!(generate_rules(&frequent, &db, 0.0, 1).unwrap().len(), 6);
    }

    #[test]
    fn rejects_non_closed_input() {
        let db = db4();
        let frequent = vec![
            Itemset::new(vec![0], 3, 4),
            Itemset::new(vec![0, 1], 2, 4),
        ];
        match generate_rules(&frequent, &db, 0.5, 2) {
            Err(Error::NotSupportClosed { itemset, missing }) => {
                assert_eq!(itemset, vec![0, 1]);
                assert_eq!(missing, vec![1]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
