use std::fmt;

/// Multi-index `μ = (μ_1, …, μ_n)` labelling the tensor Hermite function `Φ_μ`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex {
    components: Vec<u32>,
}

impl MultiIndex {
    pub fn new(components: Vec<u32>) -> Self {
        assert!(!components.is_empty(), "multi-index needs at least one component");
        Self { components }
    }

    pub fn components(&self) -> &[u32] {
        &self.components
    }

    pub fn dimension(&self) -> usize {
        self.components.len()
    }

    /// `|μ| = Σ μ_i`
    pub fn degree(&self) -> usize {
        self.components.iter().map(|&c| c as usize).sum()
    }

    /// Eigenvalue of `Φ_μ` for the Hermite operator: `2|μ| + n`.
    pub fn eigenvalue(&self) -> usize {
        2 * self.degree() + self.dimension()
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.components.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// All multi-indices with `2|μ| + n <= max_eigenvalue`, graded by `|μ|`.
///
/// Within one degree the order is descending lexicographic, so in two
/// dimensions `(1,0)` precedes `(0,1)`. An eigenvalue cap below `n` yields
/// an empty list.
pub fn enumerate_band(n: usize, max_eigenvalue: usize) -> Vec<MultiIndex> {
    assert!(n >= 1, "dimension must be positive");
    if max_eigenvalue < n {
        return Vec::new();
    }
    let max_degree = (max_eigenvalue - n) / 2;
    let mut out = Vec::new();
    let mut current = vec![0u32; n];
    for degree in 0..=max_degree {
        push_compositions(degree, 0, &mut current, &mut out);
    }
    out
}

fn push_compositions(remaining: usize, pos: usize, current: &mut [u32], out: &mut Vec<MultiIndex>) {
    let n = current.len();
    if pos == n - 1 {
        current[pos] = remaining as u32;
        out.push(MultiIndex::new(current.to_vec()));
        return;
    }
    for first in (0..=remaining).rev() {
        current[pos] = first as u32;
        push_compositions(remaining - first, pos + 1, current, out);
    }
}

/// A truncated index set together with the bookkeeping the transforms need.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    dimension: usize,
    max_eigenvalue: usize,
    indices: Vec<MultiIndex>,
    /// `degree_offsets[d]..degree_offsets[d + 1]` is the eigenspace of `2d + n`.
    degree_offsets: Vec<usize>,
}

impl Band {
    pub fn new(dimension: usize, max_eigenvalue: usize) -> Self {
        let indices = enumerate_band(dimension, max_eigenvalue);
        let mut degree_offsets = vec![0usize];
        let mut degree = 0;
        for (i, mu) in indices.iter().enumerate() {
            while mu.degree() > degree {
                degree_offsets.push(i);
                degree += 1;
            }
        }
        if !indices.is_empty() {
            degree_offsets.push(indices.len());
        }
        Self {
            dimension,
            max_eigenvalue,
            indices,
            degree_offsets,
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn max_eigenvalue(&self) -> usize {
        self.max_eigenvalue
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    /// Largest `|μ|` present, or `None` for an empty band.
    pub fn max_degree(&self) -> Option<usize> {
        self.indices.last().map(MultiIndex::degree)
    }

    /// Number of distinct eigenvalues in the band.
    pub fn eigenspace_count(&self) -> usize {
        self.degree_offsets.len().saturating_sub(1)
    }

    /// Index range of the eigenspace with `|μ| = degree`.
    pub fn eigenspace_range(&self, degree: usize) -> Option<std::ops::Range<usize>> {
        if degree + 1 < self.degree_offsets.len() {
            Some(self.degree_offsets[degree]..self.degree_offsets[degree + 1])
        } else {
            None
        }
    }

    /// Position of `mu` in graded order, if it lies in the band.
    pub fn position(&self, mu: &MultiIndex) -> Option<usize> {
        if mu.dimension() != self.dimension {
            return None;
        }
        let range = self.eigenspace_range(mu.degree())?;
        self.indices[range.clone()]
            .iter()
            .position(|m| m == mu)
            .map(|p| range.start + p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mi(c: &[u32]) -> MultiIndex {
        MultiIndex::new(c.to_vec())
    }

    #[test]
    fn one_dimensional_band() {
        assert_eq!(enumerate_band(1, 5), vec![mi(&[0]), mi(&[1]), mi(&[2])]);
        let eig: Vec<_> = enumerate_band(1, 5).iter().map(MultiIndex::eigenvalue).collect();
        assert_eq!(eig, vec![1, 3, 5]);
    }

    #[test]
    fn two_dimensional_band_order() {
        assert_eq!(enumerate_band(2, 4), vec![mi(&[0, 0]), mi(&[1, 0]), mi(&[0, 1])]);
    }

    #[test]
    fn stars_and_bars_count() {
        for k in 0..20usize {
            let band = enumerate_band(2, 2 * k + 2);
            assert_eq!(band.len(), (k + 1) * (k + 2) / 2);
        }
        // three dimensions: C(K+3, 3)
        for k in 0..8usize {
            assert_eq!(enumerate_band(3, 2 * k + 3).len(), (k + 1) * (k + 2) * (k + 3) / 6);
        }
    }

    #[test]
    fn empty_below_ground_state() {
        assert!(enumerate_band(2, 1).is_empty());
        assert!(Band::new(3, 2).is_empty());
        assert_eq!(Band::new(3, 2).eigenspace_count(), 0);
    }

    #[test]
    fn graded_and_unique() {
        let band = enumerate_band(3, 15);
        for w in band.windows(2) {
            assert!(w[0].degree() <= w[1].degree());
            if w[0].degree() == w[1].degree() {
                assert!(w[0] > w[1]);
            }
        }
        let mut sorted = band.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), band.len());
    }

    #[test]
    fn eigenspace_ranges() {
        let band = Band::new(2, 8);
        assert_eq!(band.eigenspace_count(), 4);
        assert_eq!(band.eigenspace_range(0), Some(0..1));
        assert_eq!(band.eigenspace_range(3), Some(6..10));
        assert_eq!(band.eigenspace_range(4), None);
        assert_eq!(band.position(&mi(&[1, 2])), Some(8));
        assert_eq!(band.position(&mi(&[5, 0])), None);
    }
}
