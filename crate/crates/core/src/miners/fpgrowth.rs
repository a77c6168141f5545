use super::{canonicalize, check_min_support, min_count, Itemset};
use crate::error::Result;
use crate::tabular::{ItemId, TransactionDb};

const NIL: u32 = u32::MAX;
const ROOT: u32 = 0;

/// Items are identified inside trees by rank: rank 0 is the most frequent
/// item, ties broken by item id.
#[derive(Debug, Clone)]
struct Node {
    rank: u32,
    count: usize,
    parent: u32,
    first_child: u32,
    next_sibling: u32,
    /// Next node carrying the same rank (header chain).
    next_same: u32,
}

#[derive(Debug)]
struct FpTree {
    nodes: Vec<Node>,
    heads: Vec<u32>,
    totals: Vec<usize>,
}

impl FpTree {
    fn new(n_ranks: usize) -> Self {
        FpTree {
            nodes: vec![Node {
                rank: NIL,
                count: 0,
                parent: NIL,
                first_child: NIL,
                next_sibling: NIL,
                next_same: NIL,
            }],
            heads: vec![NIL; n_ranks],
            totals: vec![0; n_ranks],
        }
    }

    /// Inserts a path given in ascending rank order.
    fn insert(&mut self, path: &[u32], count: usize) {
        let mut cur = ROOT;
        for &rank in path {
            let mut child = self.nodes[cur as usize].first_child;
            while child != NIL && self.nodes[child as usize].rank != rank {
                child = self.nodes[child as usize].next_sibling;
            }
            if child == NIL {
                child = self.nodes.len() as u32;
                let parent = &self.nodes[cur as usize];
                let node = Node {
                    rank,
                    count: 0,
                    parent: cur,
                    first_child: NIL,
                    next_sibling: parent.first_child,
                    next_same: self.heads[rank as usize],
                };
                self.nodes[cur as usize].first_child = child;
                self.heads[rank as usize] = child;
                self.nodes.push(node);
            }
            self.nodes[child as usize].count += count;
            self.totals[rank as usize] += count;
            cur = child;
        }
    }

    /// Prefix paths of every node carrying `rank`, written into `paths`
    /// (ascending rank order) as `(start, end, count)` slices of `buf`.
    fn pattern_base(&self, rank: u32, buf: &mut Vec<u32>, paths: &mut Vec<(usize, usize, usize)>) {
        buf.clear();
        paths.clear();
        let mut node = self.heads[rank as usize];
        while node != NIL {
            let start = buf.len();
            let mut up = self.nodes[node as usize].parent;
            while up != ROOT {
                buf.push(self.nodes[up as usize].rank);
                up = self.nodes[up as usize].parent;
            }
            buf[start..].reverse();
            if buf.len() > start {
                paths.push((start, buf.len(), self.nodes[node as usize].count));
            }
            node = self.nodes[node as usize].next_same;
        }
    }
}

struct Context<'a> {
    /// Item id for each rank.
    items: &'a [ItemId],
    min_count: usize,
    max_len: usize,
    n: usize,
}

fn grow(tree: &FpTree, suffix: &mut Vec<ItemId>, ctx: &Context, out: &mut Vec<Itemset>) {
    let mut buf = Vec::new();
    let mut paths = Vec::new();
    for rank in (0..tree.heads.len()).rev() {
        let total = tree.totals[rank];
        if total < ctx.min_count {
            continue;
        }
        suffix.push(ctx.items[rank]);
        out.push(Itemset::new(suffix.clone(), total, ctx.n));

        if suffix.len() < ctx.max_len && rank > 0 {
            tree.pattern_base(rank as u32, &mut buf, &mut paths);
            let mut counts = vec![0usize; rank];
            for &(start, end, count) in &paths {
                for &r in &buf[start..end] {
                    counts[r as usize] += count;
                }
            }
            if suffix.len() + 1 == ctx.max_len {
                // Last level: the conditional counts are the answer.
                for (r, &count) in counts.iter().enumerate().rev() {
                    if count >= ctx.min_count {
                        suffix.push(ctx.items[r]);
                        out.push(Itemset::new(suffix.clone(), count, ctx.n));
                        suffix.pop();
                    }
                }
            } else if counts.iter().any(|&c| c >= ctx.min_count) {
                let mut cond = FpTree::new(rank);
                let mut filtered = Vec::new();
                for &(start, end, count) in &paths {
                    filtered.clear();
                    filtered.extend(
                        buf[start..end]
                            .iter()
                            .copied()
                            .filter(|&r| counts[r as usize] >= ctx.min_count),
                    );
                    if !filtered.is_empty() {
                        cond.insert(&filtered, count);
                    }
                }
                grow(&cond, suffix, ctx, out);
            }
        }
        suffix.pop();
    }
}

/// All frequent itemsets via FP-tree construction and conditional
/// pattern-base recursion.
pub fn fpgrowth_frequent(db: &TransactionDb, min_support: f64) -> Result<Vec<Itemset>> {
    fpgrowth_frequent_capped(db, min_support, None)
}

/// [`fpgrowth_frequent`] restricted to itemsets of at most `max_len` items.
pub fn fpgrowth_frequent_capped(
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
    let threshold = min_count(min_support, n);

    let mut item_counts = vec![0usize; db.n_items()];
    for t in db.transactions() {
        for &i in t {
            item_counts[i] += 1;
        }
    }
    let mut ranked: Vec<ItemId> = (0..db.n_items())
        .filter(|&i| item_counts[i] >= threshold)
        .collect();
    ranked.sort_by(|&a, &b| item_counts[b].cmp(&item_counts[a]).then(a.cmp(&b)));
    let mut rank_of = vec![NIL; db.n_items()];
    for (r, &item) in ranked.iter().enumerate() {
        rank_of[item] = r as u32;
    }

    let mut tree = FpTree::new(ranked.len());
    let mut path = Vec::new();
    for t in db.transactions() {
        path.clear();
        path.extend(t.iter().map(|&i| rank_of[i]).filter(|&r| r != NIL));
        path.sort_unstable();
        if !path.is_empty() {
            tree.insert(&path, 1);
        }
    }

    let ctx = Context {
        items: &ranked,
        min_count: threshold,
        max_len,
        n,
    };
    let mut out = Vec::new();
    grow(&tree, &mut Vec::new(), &ctx, &mut out);
    canonicalize(&mut out);
    Ok(out)
}
