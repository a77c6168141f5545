//! Frequent itemset miners and rule generation from frequent itemsets.
//!
//! All miners agree on one frequency test: an itemset with `count`
//! occurrences in `n` transactions is frequent iff `count / n >= min_support`
//! evaluated in `f64`. The threshold is turned into an integer count once
//! ([`min_count`]) so the miners themselves only compare counts.

mod brute;
mod eclat;
mod fpgrowth;
mod rules;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tabular::{ItemId, TransactionDb};

pub use brute::{brute_force_frequent, BRUTE_FORCE_ITEM_CAP};
pub use eclat::{eclat_frequent, eclat_frequent_capped};
pub use fpgrowth::{fpgrowth_frequent, fpgrowth_frequent_capped};
pub use rules::generate_rules;

/// A frequent itemset with its exact occurrence count.
#[derive(Debug, Clone, PartialEq)]
pub struct Itemset {
    /// Sorted, duplicate-free.
    pub items: Vec<ItemId>,
    pub count: usize,
    pub support: f64,
}

impl Itemset {
    pub(crate) fn new(mut items: Vec<ItemId>, count: usize, n: usize) -> Self {
        items.sort_unstable();
        Itemset {
            items,
            count,
            support: count as f64 / n as f64,
        }
    }
}

/// Size first, then lexicographic.
pub(crate) fn canonicalize(sets: &mut [Itemset]) {
    sets.sort_unstable_by(|a, b| {
        a.items
            .len()
            .cmp(&b.items.len())
            .then_with(|| a.items.cmp(&b.items))
    });
}

pub(crate) fn check_min_support(min_support: f64) -> Result<()> {
    if min_support > 0.0 && min_support <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "min_support must lie in (0, 1], got {min_support}"
        )))
    }
}

/// Smallest count `c` with `c / n >= min_support`.
pub fn min_count(min_support: f64, n: usize) -> usize {
    let ratio = |c: usize| c as f64 / n as f64;
    let mut c = ((min_support * n as f64).ceil() as usize).min(n);
    while c > 0 && ratio(c - 1) >= min_support {
        c -= 1;
    }
    while c <= n && ratio(c) < min_support {
        c += 1;
    }
    c.max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Miner {
    FpGrowth,
    Eclat,
    BruteForce,
}

impl Miner {
    /// Mines frequent itemsets, optionally capped at `max_len` items.
    pub fn mine(
        self,
        db: &TransactionDb,
        min_support: f64,
        max_len: Option<usize>,
    ) -> Result<Vec<Itemset>> {
        match self {
            Miner::FpGrowth => fpgrowth_frequent_capped(db, min_support, max_len),
            Miner::Eclat => eclat_frequent_capped(db, min_support, max_len),
            Miner::BruteForce => {
                let mut sets = brute_force_frequent(db, min_support)?;
                if let Some(cap) = max_len {
                    sets.retain(|s| s.items.len() <= cap);
                }
                Ok(sets)
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Miner::FpGrowth => "fpgrowth",
            Miner::Eclat => "eclat",
            Miner::BruteForce => "bruteforce",
        }
    }
}

impl fmt::Display for Miner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Miner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fpgrowth" => Ok(Miner::FpGrowth),
            "eclat" => Ok(Miner::Eclat),
            "bruteforce" => Ok(Miner::BruteForce),
            other => Err(Error::InvalidConfig(format!("unknown miner {other:?}"))),
        }
    }
}

/// Mines and assembles rules in one go, the way the algorithmic baselines
/// are run: itemsets are capped at `max_antecedents + 1` items.
pub fn mine_rules(
    miner: Miner,
    db: &TransactionDb,
    min_support: f64,
    min_conf: f64,
    max_antecedents: usize,
) -> Result<Vec<crate::rule::Rule>> {
    let frequent = miner.mine(db, min_support, Some(max_antecedents + 1))?;
    generate_rules(&frequent, db, min_conf, max_antecedents)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use crate::tabular::{OneHotSchema, TransactionDb};

    /// t1={a,b,c}, t2={a,b}, t3={a,c}, t4={b,c}
    pub fn db4() -> TransactionDb {
        TransactionDb::new(
            OneHotSchema::single_items(&["a", "b", "c"]),
            vec![vec![0, 1, 2], vec![0, 1], vec![0, 2], vec![1, 2]],
        )
        .unwrap()
    }
}
