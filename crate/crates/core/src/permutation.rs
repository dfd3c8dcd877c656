//! Permutations of `{0, …, n−1}`.
//!
//! Convention used throughout the crate: the permutation matrix `Π` of `π`
//! acts on a point cloud by `(ΠX)_i = X_{π(i)}`.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(mapping: Vec<usize>) -> Result<Self> {
        let n = mapping.len();
        let mut seen = vec![false; n];
        for &j in &mapping {
            if j >= n || seen[j] {
                return Err(Error::Contract(format!(
                    "not a bijection on 0..{n}: {mapping:?}"
                )));
            }
            seen[j] = true;
        }
        Ok(Self(mapping))
    }

    pub(crate) fn new_unchecked(mapping: Vec<usize>) -> Self {
        debug_assert!(Self::new(mapping.clone()).is_ok());
        Self(mapping)
    }

    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    /// Uniformly random permutation.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut v: Vec<usize> = (0..n).collect();
        v.shuffle(rng);
        Self(v)
    }

    /// Swaps the images of `i` and `j`.
    pub fn transposition(n: usize, i: usize, j: usize) -> Self {
        let mut v: Vec<usize> = (0..n).collect();
        v.swap(i, j);
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn apply(&self, i: usize) -> usize {
        self.0[i]
    }

    /// `self ∘ other`, i.e. `i ↦ self(other(i))`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        check_len(self, other)?;
        Ok(Self(other.0.iter().map(|&j| self.0[j]).collect()))
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.len()];
        for (i, &j) in self.0.iter().enumerate() {
            inv[j] = i;
        }
        Self(inv)
    }

    /// Number of indices where the two permutations disagree.
    pub fn hamming(&self, other: &Self) -> Result<usize> {
        check_len(self, other)?;
        Ok(self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count())
    }

    /// Cycles `(i, π(i), π²(i), …)`, each starting at its smallest element,
    /// ordered by that element. Fixed points are 1-cycles.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.len()];
        let mut out = Vec::new();
        for start in 0..self.len() {
            if seen[start] {
                continue;
            }
            let mut cycle = vec![start];
            seen[start] = true;
            let mut i = self.0[start];
            while i != start {
                seen[i] = true;
                cycle.push(i);
                i = self.0[i];
            }
            out.push(cycle);
        }
        out
    }

    /// `counts[k]` is the number of k-cycles (index 0 unused).
    pub fn cycle_type(&self) -> CycleType {
        let mut counts = vec![0; self.len() + 1];
        for c in self.cycles() {
            counts[c.len()] += 1;
        }
        CycleType { counts }
    }

    /// Rows of `x` permuted: row `i` of the result is row `π(i)` of `x`.
    pub fn permute_rows(&self, x: &Matrix) -> Matrix {
        Matrix::from_fn(x.nrows(), x.ncols(), |i, c| x[(self.0[i], c)])
    }

    /// The permutation matrix `Π` with `Π[i][π(i)] = 1`.
    pub fn to_matrix(&self) -> Matrix {
        let n = self.len();
        let mut m = Matrix::zeros(n, n);
        for (i, &j) in self.0.iter().enumerate() {
            m[(i, j)] = 1.0;
        }
        m
    }
}

fn check_len(a: &Permutation, b: &Permutation) -> Result<()> {
    if a.len() == b.len() {
        Ok(())
    } else {
        Err(Error::Dimension(format!(
            "permutation lengths differ: {} vs {}",
            a.len(),
            b.len()
        )))
    }
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Vec<usize> {
        p.0
    }
}

/// Fraction of indices on which `p` and `q` agree.
pub fn overlap(p: &Permutation, q: &Permutation) -> Result<f64> {
    check_len(p, q)?;
    if p.is_empty() {
        return Ok(1.0);
    }
    let agree = p.0.iter().zip(&q.0).filter(|(a, b)| a == b).count();
    Ok(agree as f64 / p.len() as f64)
}

/// Multiset of cycle lengths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleType {
    counts: Vec<usize>,
}

impl CycleType {
    /// `counts[k]` = number of k-cycles; `counts[0]` must be zero and
    /// `Σ k·counts[k]` defines n.
    pub fn new(counts: Vec<usize>) -> Result<Self> {
        if counts.first().copied().unwrap_or(0) != 0 {
            return Err(Error::Contract("there are no cycles of length 0".into()));
        }
        if counts.iter().skip(1).all(|&c| c == 0) {
            return Err(Error::Contract("cycle type is empty".into()));
        }
        Ok(Self { counts })
    }

    /// Builds a cycle type from a list of cycle lengths.
    pub fn from_lengths(lengths: &[usize]) -> Result<Self> {
        let n: usize = lengths.iter().sum();
        let mut counts = vec![0; n + 1];
        for &k in lengths {
            if k == 0 {
                return Err(Error::Contract("there are no cycles of length 0".into()));
            }
            counts[k] += 1;
        }
        Self::new(counts)
    }

    pub fn n(&self) -> usize {
        self.counts.iter().enumerate().map(|(k, &c)| k * c).sum()
    }

    pub fn count(&self, k: usize) -> usize {
        self.counts.get(k).copied().unwrap_or(0)
    }

    /// `(k, n_k)` for every length with `n_k > 0`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(k, &c)| (k, c))
    }

    pub fn is_identity(&self) -> bool {
        self.iter().all(|(k, _)| k == 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_non_bijections() {
        assert!(Permutation::new(vec![0, 0, 1]).is_err());
        assert!(Permutation::new(vec![0, 3, 1]).is_err());
        assert!(Permutation::new(vec![2, 0, 1]).is_ok());
    }

    #[test]
    fn compose_and_inverse() {
        let p = Permutation::new(vec![1, 2, 0]).unwrap();
        let q = Permutation::new(vec![0, 2, 1]).unwrap();
        let pq = p.compose(&q).unwrap();
        assert_eq!(pq.as_slice(), &[1, 0, 2]);
        assert_eq!(p.compose(&p.inverse()).unwrap(), Permutation::identity(3));
    }

    #[test]
    fn overlap_examples() {
        let id = Permutation::identity(10);
        assert_eq!(overlap(&id, &id).unwrap(), 1.0);
        let t = Permutation::transposition(10, 3, 7);
        assert!((overlap(&id, &t).unwrap() - 0.8).abs() < 1e-15);
        assert!(overlap(&id, &Permutation::identity(9)).is_err());
    }

    #[test]
    fn overlap_hamming_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let p = Permutation::random(17, &mut rng);
            let q = Permutation::random(17, &mut rng);
            let h = p.hamming(&q).unwrap() as f64;
            assert!((overlap(&p, &q).unwrap() - (1.0 - h / 17.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn cycles_and_type() {
        let p = Permutation::new(vec![1, 0, 2, 4, 5, 3]).unwrap();
        assert_eq!(p.cycles(), vec![vec![0, 1], vec![2], vec![3, 4, 5]]);
        let ct = p.cycle_type();
        assert_eq!(ct.n(), 6);
        assert_eq!((ct.count(1), ct.count(2), ct.count(3)), (1, 1, 1));
        assert!(Permutation::identity(4).cycle_type().is_identity());
    }

    #[test]
    fn permute_rows_matches_matrix_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = Permutation::random(6, &mut rng);
        let x = Matrix::from_fn(6, 2, |i, j| (i * 2 + j) as f64);
        assert_eq!(p.permute_rows(&x), p.to_matrix() * &x);
    }

    #[test]
    fn serde_validates() {
        let p: Permutation = serde_json::from_str("[2,0,1]").unwrap();
        assert_eq!(p.as_slice(), &[2, 0, 1]);
        assert!(serde_json::from_str::<Permutation>("[1,1,0]").is_err());
    }
}
