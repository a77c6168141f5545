//! Fixed-width bitsets over transaction ids.

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TidSet {
    words: Vec<u64>,
}

impl TidSet {
    pub fn empty(n: usize) -> Self {
        TidSet {
            words: vec![0; n.div_ceil(64)],
        }
    }

    pub fn full(n: usize) -> Self {
        let mut set = TidSet::empty(n);
        for t in 0..n {
            set.insert(t);
        }
        set
    }

    pub fn insert(&mut self, tid: usize) {
        self.words[tid / 64] |= 1 << (tid % 64);
    }

    pub fn contains(&self, tid: usize) -> bool {
        self.words[tid / 64] & (1 << (tid % 64)) != 0
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn intersection(&self, other: &TidSet) -> TidSet {
        TidSet {
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a & b)
                .collect(),
        }
    }

    /// `|self & other|` without materializing the intersection.
    pub fn intersection_len(&self, other: &TidSet) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    pub fn intersect_with(&mut self, other: &TidSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= b;
        }
    }

    pub fn union_with(&mut self, other: &TidSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(w, &bits)| {
            (0..64).filter(move |b| bits & (1 << b) != 0).map(move |b| w * 64 + b)
        })
    }
}

/// Vertical layout of a transaction database: one tidset per item.
pub fn vertical(n_items: usize, transactions: &[Vec<usize>]) -> Vec<TidSet> {
    let mut sets = vec![TidSet::empty(transactions.len()); n_items];
    for (tid, t) in transactions.iter().enumerate() {
        for &item in t {
            sets[item].insert(tid);
        }
    }
    sets
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_operations() {
        let mut a = TidSet::empty(130);
        let mut b = TidSet::empty(130);
        for t in [0, 5, 64, 129] {
            a.insert(t);
        }
        for t in [5, 64, 100] {
            b.insert(t);
        }
        assert_eq!(a.len(), 4);
        assert_eq!(a.intersection_len(&b), 2);
        assert_eq!(a.intersection(&b).iter().collect::<Vec<_>>(), [5, 64]);
        let mut u = a.clone();
        u.union_with(&b);
        assert_eq!(u.len(), 5);
        assert_eq!(TidSet::full(70).len(), 70);
    }
}
