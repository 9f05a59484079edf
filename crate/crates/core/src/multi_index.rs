//! Multi-indices for spatial derivatives, stored in canonical sorted form.
//!
//! Mixed partials of smooth grid functions commute, so each derivative is
//! identified by the multiset of differentiation directions. Directions are
//! 0-based (`0 = x`, `1 = y`).

/// A canonical (sorted) multi-index of differentiation directions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex {
    dirs: Vec<usize>,
}

impl MultiIndex {
    /// Build from an arbitrary direction list; sorts into canonical form.
    pub fn new(dirs: &[usize]) -> Self {
        let mut dirs = dirs.to_vec();
        dirs.sort_unstable();
        Self { dirs }
    }

    /// The empty index (the section value itself).
    pub fn identity() -> Self {
        Self { dirs: Vec::new() }
    }

    /// Derivative order `|I|`.
    pub fn order(&self) -> usize {
        self.dirs.len()
    }

    /// Sorted direction list.
    pub fn dirs(&self) -> &[usize] {
        &self.dirs
    }

    /// How many times direction `d` appears.
    pub fn count(&self, d: usize) -> usize {
        self.dirs.iter().filter(|&&x| x == d).count()
    }

    /// Largest direction index referenced, if any.
    pub fn max_dir(&self) -> Option<usize> {
        self.dirs.last().copied()
    }
}

impl std::fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.dirs.is_empty() {
            return write!(f, "()");
        }
        let parts: Vec<String> = self.dirs.iter().map(|d| format!("{}", d + 1)).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// All canonical multi-indices of exactly `order` in `dim` dimensions,
/// lexicographically ordered.
pub fn canonical_indices(dim: usize, order: usize) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(order);
    fn rec(dim: usize, order: usize, start: usize, current: &mut Vec<usize>, out: &mut Vec<MultiIndex>) {
        if current.len() == order {
            out.push(MultiIndex { dirs: current.clone() });
            return;
        }
        for d in start..dim {
            current.push(d);
            rec(dim, order, d, current, out);
            current.pop();
        }
    }
    rec(dim, order, 0, &mut current, &mut out);
    out
}

/// All canonical multi-indices of order `0..=max_order`, grouped by order.
pub fn canonical_indices_up_to(dim: usize, max_order: usize) -> Vec<MultiIndex> {
    (0..=max_order)
        .flat_map(|j| canonical_indices(dim, j))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonicalizes() {
        assert_eq!(MultiIndex::new(&[1, 0, 1]).dirs(), &[0, 1, 1]);
        assert_eq!(MultiIndex::new(&[1, 0]), MultiIndex::new(&[0, 1]));
    }

    #[test]
    fn counts_match_stars_and_bars() {
        // dim 2: order j has j+1 canonical indices
        for j in 0..5 {
            assert_eq!(canonical_indices(2, j).len(), j + 1);
        }
        // dim 1: always exactly one
        for j in 0..5 {
            assert_eq!(canonical_indices(1, j).len(), 1);
        }
        // orders 0..=4 in dim 2: 1+2+3+4+5 = 15
        assert_eq!(canonical_indices_up_to(2, 4).len(), 15);
    }

    #[test]
    fn grouped_by_order_then_lex() {
        let all = canonical_indices_up_to(2, 2);
        let expect: Vec<MultiIndex> = vec![
            MultiIndex::new(&[]),
            MultiIndex::new(&[0]),
            MultiIndex::new(&[1]),
            MultiIndex::new(&[0, 0]),
            MultiIndex::new(&[0, 1]),
            MultiIndex::new(&[1, 1]),
        ];
        assert_eq!(all, expect);
    }
}
