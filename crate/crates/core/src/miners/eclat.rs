use super::{canonicalize, check_min_support, min_count, Itemset};
use crate::error::Result;
use crate::tabular::{ItemId, TransactionDb};
use crate::tidset::{vertical, TidSet};

struct Context {
    min_count: usize,
    max_len: usize,
    n: usize,
}

/// Depth-first walk over one prefix equivalence class.
fn walk(
    prefix: &mut Vec<ItemId>,
    class: &[(ItemId, TidSet)],
    ctx: &Context,
    out: &mut Vec<Itemset>,
) {
    for (i, (item, tids)) in class.iter().enumerate() {
        prefix.push(*item);
        out.push(Itemset::new(prefix.clone(), tids.len(), ctx.n));
        if prefix.len() < ctx.max_len {
            let next: Vec<(ItemId, TidSet)> = class[i + 1..]
                .iter()
                .filter_map(|(other, other_tids)| {
                    let joint = tids.intersection(other_tids);
                    (joint.len() >= ctx.min_count).then_some((*other, joint))
                })
                .collect();
            if !next.is_empty() {
                walk(prefix, &next, ctx, out);
            }
        }
        prefix.pop();
    }
}

/// All frequent itemsets by vertical tidset intersection.
pub fn eclat_frequent(db: &TransactionDb, min_support: f64) -> Result<Vec<Itemset>> {
    eclat_frequent_capped(db, min_support, None)
}

/// [`eclat_frequent`] restricted to itemsets of at most `max_len` items.
pub fn eclat_frequent_capped(
    db: &TransactionDb,
    min_support: f64,
    max_len: Option<usize>,
) -> Result<Vec<Itemset>> {
    check_min_support(min_support)?;
    let n = db.len();
    let max_len = max_len.unwrap_or(usize::MAX);
    if n == 0 || max_len == 0 {
        return Ok(Vec::new());
    }
    let ctx = Context {
        min_count: min_count(min_support, n),
        max_len,
        n,
    };
    let roots: Vec<(ItemId, TidSet)> = vertical(db.n_items(), db.transactions())
        .into_iter()
        .enumerate()
        .filter(|(_, tids)| tids.len() >= ctx.min_count)
        .collect();
    let mut out = Vec::new();
    walk(&mut Vec::new(), &roots, &ctx, &mut out);
    canonicalize(&mut out);
    Ok(out)
}
