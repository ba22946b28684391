/// A strict partial order over `n` owners, kept transitively closed.
///
/// `higher(i)` is the set of owners with priority over `i`. Edges are added
/// with [`PrioritySet::add`], which refuses anything that would close a
/// cycle.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrioritySet {
    n: usize,
    words: usize,
    higher: Vec<u64>,
    edges: Vec<(usize, usize)>,
}

impl PrioritySet {
    pub fn new(n: usize) -> Self {
        let words = n.div_ceil(64).max(1);
        PrioritySet {
            n,
            words,
            higher: vec![0; n * words],
            edges: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// The pairs added so far as `(higher, lower)`, in insertion order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    #[inline]
    fn row(&self, i: usize) -> &[u64] {
        &self.higher[i * self.words..(i + 1) * self.words]
    }

    /// Whether `hi` has priority over `lo`, directly or transitively.
    #[inline]
    pub fn precedes(&self, hi: usize, lo: usize) -> bool {
        self.row(lo)[hi / 64] >> (hi % 64) & 1 == 1
    }

    pub fn would_cycle(&self, hi: usize, lo: usize) -> bool {
        hi == lo || self.precedes(lo, hi)
    }

    /// Adds `hi ≺ lo`. Returns false, leaving the set unchanged, if that
    /// would create a cycle.
    pub fn add(&mut self, hi: usize, lo: usize) -> bool {
        if self.would_cycle(hi, lo) {
            return false;
        }
        if !self.precedes(hi, lo) {
            let mut gained = self.row(hi).to_vec();
            gained[hi / 64] |= 1 << (hi % 64);
            for x in 0..self.n {
                if x == lo || self.precedes(lo, x) {
                    let w = self.words;
                    for (dst, src) in self.higher[x * w..(x + 1) * w].iter_mut().zip(&gained) {
                        *dst |= src;
                    }
                }
            }
        }
        self.edges.push((hi, lo));
        true
    }

    /// Owners with priority over `i`, ascending.
    pub fn ancestors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&j| self.precedes(j, i))
    }

    pub fn ancestor_count(&self, i: usize) -> u32 {
        self.row(i).iter().map(|w| w.count_ones()).sum()
    }

    /// `i` together with every owner below it.
    pub fn with_descendants(&self, i: usize) -> Vec<usize> {
        (0..self.n)
            .filter(|&x| x == i || self.precedes(i, x))
            .collect()
    }

    /// Owners that take part in at least one priority pair.
    pub fn ordered_members(&self) -> Vec<usize> {
        let mut member = vec![false; self.n];
        for &(a, b) in &self.edges {
            member[a] = true;
            member[b] = true;
        }
        let ids: Vec<usize> = (0..self.n).filter(|&i| member[i]).collect();
        self.topological(ids)
    }

    /// Sorts `ids` so that every owner comes after all of its ancestors.
    /// Ancestor counts strictly increase along the order, so sorting by
    /// (count, index) is a valid topological order.
    pub fn topological(&self, mut ids: Vec<usize>) -> Vec<usize> {
        ids.sort_by_key(|&i| (self.ancestor_count(i), i));
        ids
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closure_and_cycle_rejection() {
        let mut p = PrioritySet::new(4);
        assert!(p.add(0, 1));
        assert!(p.add(1, 2));
        assert!(p.precedes(0, 2));
        assert!(!p.add(2, 0));
        assert!(!p.add(1, 1));
        assert_eq!(p.ancestors(2).collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(p.with_descendants(1), vec![1, 2]);
        assert_eq!(p.ordered_members(), vec![0, 1, 2]);
    }

    #[test]
    fn adding_above_a_chain_updates_descendants() {
        let mut p = PrioritySet::new(70);
        assert!(p.add(1, 2));
        assert!(p.add(2, 3));
        assert!(p.add(65, 1));
        assert!(p.precedes(65, 3));
        assert_eq!(p.ancestor_count(3), 3);
        assert!(!p.add(3, 65));
    }

    #[test]
    fn topological_order_respects_chain() {
        let mut p = PrioritySet::new(3);
        p.add(2, 1);
        p.add(1, 0);
        assert_eq!(p.ordered_members(), vec![2, 1, 0]);
    }
}
