use super::{canonicalize, check_min_support, Itemset};
use crate::error::{Error, Result};
use crate::tabular::TransactionDb;

pub const BRUTE_FORCE_ITEM_CAP: usize = 20;

/// Enumerates every non-empty subset of the item universe and counts it.
///
/// Exponential; meant as a test oracle for the real miners.
pub fn brute_force_frequent(db: &TransactionDb, min_support: f64) -> Result<Vec<Itemset>> {
    check_min_support(min_support)?;
    let m = db.n_items();
    if m > BRUTE_FORCE_ITEM_CAP {
        return Err(Error::ItemUniverseTooLarge {
            items: m,
            cap: BRUTE_FORCE_ITEM_CAP,
        });
    }
    let n = db.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let masks: Vec<u32> = db
        .transactions()
        .iter()
        .map(|t| t.iter().fold(0u32, |acc, &i| acc | (1 << i)))
        .collect();
    let mut out = Vec::new();
    for subset in 1u32..(1u32 << m) {
        let count = masks.iter().filter(|&&t| t & subset == subset).count();
        if count as f64 / n as f64 >= min_support {
            let items = (0..m).filter(|&i| subset & (1 << i) != 0).collect();
            out.push(Itemset::new(items, count, n));
        }
    }
    canonicalize(&mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::miners::fixtures::db4;
    use crate::tabular::OneHotSchema;

    fn summary(sets: &[Itemset]) -> Vec<(Vec<usize>, f64)> {
        sets.iter().map(|s| (s.items.clone(), s.support)).collect()
    }

    #[test]
    fn db4_half() {
        let sets = brute_force_frequent(&db4(), 0.5).unwrap();
        assert_eq!(
            summary(&sets),
            vec![
                (vec![0], 0.75),
                (vec![1], 0.75),
                (vec![2], 0.75),
                (vec![0, 1], 0.5),
                (vec![0, 2], 0.5),
                (vec![1, 2], 0.5),
            ]
        );
    }

    #[test]
    fn db4_full_support_is_empty() {
        assert!(brute_force_frequent(&db4(), 1.0).unwrap().is_empty());
    }

    #[test]
    fn db4_quarter_adds_triple() {
        let sets = brute_force_frequent(&db4(), 0.25).unwrap();
        assert_eq!(sets.len(), 7);
        assert_eq!(summary(&sets[6..]), vec![(vec![0, 1, 2], 0.25)]);
    }

    #[test]
    fn refuses_large_universe() {
        let names: Vec<String> = (0..21).map(|i| format!("i{i}")).collect();
        let db = TransactionDb::new(OneHotSchema::single_items(&names), vec![vec![0]]).unwrap();
        assert!(matches!(
            brute_force_frequent(&db, 0.5),
            Err(Error::ItemUniverseTooLarge { items: 21, .. })
        ));
    }
}
