//! Dense linear-algebra primitives and orthogonal-group utilities.
//!
//! Matrices are `nalgebra::DMatrix<f64>`. Point clouds are `n × d` with one
//! point per row.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;

/// Largest dimension for which the sign-flip group is enumerated.
pub const SIGN_FLIP_MAX_DIM: usize = 20;

const ORTHO_TOL: f64 = 1e-9;

pub(crate) fn ensure_finite(m: &Matrix, what: &str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Contract(format!("{what} has non-finite entries")))
    }
}

pub(crate) fn ensure_square(m: &Matrix, what: &str) -> Result<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(Error::Dimension(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )))
    }
}

/// Frobenius inner product `⟨a, b⟩ = tr(aᵀ b)`.
pub fn inner(a: &Matrix, b: &Matrix) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// An element of O(d).
#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalMatrix(Matrix);

impl OrthogonalMatrix {
    /// Validates `QᵀQ = I` to 1e-9 in Frobenius norm.
    pub fn new(q: Matrix) -> Result<Self> {
        ensure_square(&q, "orthogonal matrix")?;
        ensure_finite(&q, "orthogonal matrix")?;
        let d = q.nrows();
        let err = (q.transpose() * &q - Matrix::identity(d, d)).norm();
        if err > ORTHO_TOL {
            return Err(Error::Contract(format!(
                "matrix is not orthogonal (‖QᵀQ − I‖_F = {err:e})"
            )));
        }
        Ok(Self(q))
    }

    pub(crate) fn new_unchecked(q: Matrix) -> Self {
        Self(q)
    }

    pub fn identity(d: usize) -> Self {
        Self(Matrix::identity(d, d))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_inner(self) -> Matrix {
        self.0
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant()
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn compose(&self, other: &Self) -> Self {
        Self(&self.0 * &other.0)
    }

    /// Phases `θ_ℓ ∈ [−π, π]` of the eigenvalues `e^{iθ_ℓ}`, sorted ascending.
    pub fn eigen_phases(&self) -> Vec<f64> {
        let mut phases: Vec<f64> = if self.dim() == 2 {
            let q = &self.0;
            if self.determinant() > 0.0 {
                let phi = q[(1, 0)].atan2(q[(0, 0)]);
                vec![phi, -phi]
            } else {
                vec![0.0, PI]
            }
        } else {
            self.0
                .complex_eigenvalues()
                .iter()
                .map(|z| z.im.atan2(z.re))
                .collect()
        };
        phases.sort_by(f64::total_cmp);
        phases
    }
}

impl TryFrom<Matrix> for OrthogonalMatrix {
    type Error = Error;
    fn try_from(m: Matrix) -> Result<Self> {
        Self::new(m)
    }
}

impl From<OrthogonalMatrix> for Matrix {
    fn from(q: OrthogonalMatrix) -> Matrix {
        q.0
    }
}

/// Sum of singular values of a square matrix.
pub fn nuclear_norm(m: &Matrix) -> Result<f64> {
    ensure_square(m, "nuclear_norm input")?;
    ensure_finite(m, "nuclear_norm input")?;
    Ok(m.singular_values().iter().sum())
}

/// Largest singular value.
pub fn operator_norm(m: &Matrix) -> f64 {
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

/// `Q* = U Vᵀ` for `M = U S Vᵀ`, the maximizer of `⟨M, Q⟩` over O(d).
///
/// Rank-deficient inputs get whatever completion the SVD backend picks; the
/// attained value `⟨M, Q*⟩ = ‖M‖_*` does not depend on it.
pub fn procrustes_rotation(m: &Matrix) -> Result<OrthogonalMatrix> {
    ensure_square(m, "procrustes_rotation input")?;
    ensure_finite(m, "procrustes_rotation input")?;
    let svd = m.clone().svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::Contract("SVD did not return singular vectors".into())),
    };
    Ok(OrthogonalMatrix::new_unchecked(u * v_t))
}

/// `[[cos θ, −sin θ], [sin θ, cos θ]]`, or `[[cos θ, sin θ], [sin θ, −cos θ]]`
/// when `reflect` is set.
pub fn rotation2d(theta: f64, reflect: bool) -> OrthogonalMatrix {
    let (s, c) = theta.sin_cos();
    let m = if reflect {
        Matrix::from_row_slice(2, 2, &[c, s, s, -c])
    } else {
        Matrix::from_row_slice(2, 2, &[c, -s, s, c])
    };
    OrthogonalMatrix::new_unchecked(m)
}

/// All `2^d` diagonal ±1 matrices, `+1` before `−1` in lexicographic order
/// of the diagonal.
pub fn sign_flip_group(d: usize) -> Result<Vec<OrthogonalMatrix>> {
    Ok(sign_vectors(d)?
        .into_iter()
        .map(|signs| {
            OrthogonalMatrix::new_unchecked(Matrix::from_diagonal(&nalgebra::DVector::from_vec(
                signs,
            )))
        })
        .collect())
}

/// Sign vectors `q ∈ {±1}^d` in the same order as [`sign_flip_group`].
pub fn sign_vectors(d: usize) -> Result<Vec<Vec<f64>>> {
    if d == 0 {
        return Err(Error::Parameter("dimension must be at least 1".into()));
    }
    if d > SIGN_FLIP_MAX_DIM {
        return Err(Error::Capacity(format!(
            "sign-flip enumeration is capped at d = {SIGN_FLIP_MAX_DIM}, got {d}"
        )));
    }
    Ok((0..1usize << d)
        .map(|mask| {
            (0..d)
                .map(|l| if mask >> (d - 1 - l) & 1 == 1 { -1.0 } else { 1.0 })
                .collect()
        })
        .collect())
}

/// Haar-distributed element of O(d): QR of a Gaussian matrix with the
/// diagonal of R made positive.
pub fn haar_orthogonal<R: Rng + ?Sized>(d: usize, rng: &mut R) -> OrthogonalMatrix {
    let g = Matrix::from_fn(d, d, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    OrthogonalMatrix::new_unchecked(q)
}

/// A δ-net of O(2) in operator norm: a uniform angle grid of rotations and
/// one of reflections, spacing at most `2·arcsin(δ/2)`.
pub fn net_o2(delta: f64) -> Result<Vec<OrthogonalMatrix>> {
    if !(delta > 0.0 && delta < 2.0) {
        return Err(Error::Parameter(format!(
            "net resolution must lie in (0, 2), got {delta}"
        )));
    }
    let spacing = 2.0 * (delta / 2.0).asin();
    let points = (2.0 * PI / spacing).ceil() as usize;
    Ok(angle_grid(points))
}

/// `points` rotations at angles `2πk/points` followed by the reflections at
/// the same angles.
pub fn angle_grid(points: usize) -> Vec<OrthogonalMatrix> {
    [false, true]
        .into_iter()
        .flat_map(|reflect| {
            (0..points).map(move |k| rotation2d(2.0 * PI * k as f64 / points as f64, reflect))
        })
        .collect()
}

/// Operator-norm covering radius of an angle grid with `points` angles per
/// family.
pub fn angle_grid_resolution(points: usize) -> f64 {
    2.0 * (PI / (2.0 * points as f64)).sin()
}

/// Eigendecomposition of a symmetric matrix with eigenvalues in descending
/// order.
pub fn symmetric_eigen_desc(a: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    ensure_square(a, "symmetric matrix")?;
    ensure_finite(a, "symmetric matrix")?;
    let eig = SymmetricEigen::new(a.clone());
    let mut order: Vec<usize> = (0..a.nrows()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = Matrix::from_fn(a.nrows(), a.nrows(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(d: usize, rng: &mut ChaCha8Rng) -> Matrix {
        Matrix::from_fn(d, d, |_, _| rng.sample(StandardNormal))
    }

    /// Singular values as square roots of the eigenvalues of MᵀM.
    fn singular_values_via_gram(m: &Matrix) -> Vec<f64> {
        let gram = m.transpose() * m;
        SymmetricEigen::new(gram)
            .eigenvalues
            .iter()
            .map(|l| l.max(0.0).sqrt())
            .collect()
    }

    #[test]
    fn nuclear_norm_examples() {
        let m = Matrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, -4.0]);
        assert!((nuclear_norm(&m).unwrap() - 7.0).abs() < 1e-12);
        assert_eq!(nuclear_norm(&Matrix::zeros(2, 2)).unwrap(), 0.0);
        assert!(matches!(
            nuclear_norm(&Matrix::zeros(2, 3)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn nuclear_norm_matches_gram_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let m = random_matrix(3, &mut rng);
            let oracle: f64 = singular_values_via_gram(&m).iter().sum();
            let got = nuclear_norm(&m).unwrap();
            assert!((got - oracle).abs() <= 1e-9 * oracle, "{got} vs {oracle}");
        }
    }

    #[test]
    fn procrustes_examples() {
        let q = procrustes_rotation(&Matrix::identity(2, 2)).unwrap();
        assert!((q.as_matrix() - Matrix::identity(2, 2)).norm() < 1e-12);
        let q = procrustes_rotation(&Matrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, -3.0])).unwrap();
        let want = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!((q.as_matrix() - want).norm() < 1e-12);
    }

    #[test]
    fn procrustes_attains_nuclear_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let m = random_matrix(4, &mut rng);
            let q = procrustes_rotation(&m).unwrap();
            OrthogonalMatrix::new(q.as_matrix().clone()).unwrap();
            let nn = nuclear_norm(&m).unwrap();
            assert!((inner(&m, q.as_matrix()) - nn).abs() <= 1e-9 * nn);
        }
    }

    #[test]
    fn procrustes_rank_deficient() {
        let m = Matrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 0.0, 0.0, 0.0]);
        let q = procrustes_rotation(&m).unwrap();
        assert!(OrthogonalMatrix::new(q.as_matrix().clone()).is_ok());
        let nn = nuclear_norm(&m).unwrap();
        assert!((inner(&m, q.as_matrix()) - nn).abs() < 1e-9 * nn);
    }

    #[test]
    fn rotation2d_examples() {
        let i = rotation2d(0.0, false);
        assert!((i.as_matrix() - Matrix::identity(2, 2)).norm() < 1e-15);
        let r = rotation2d(PI / 2.0, false);
        let want = Matrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        assert!((r.as_matrix() - want).norm() < 1e-15);
        let f = rotation2d(0.0, true);
        let want = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!((f.as_matrix() - want).norm() < 1e-15);
    }

    #[test]
    fn sign_flip_group_examples() {
        let g1 = sign_flip_group(1).unwrap();
        assert_eq!(g1.len(), 2);
        assert_eq!(g1[0].as_matrix()[(0, 0)], 1.0);
        assert_eq!(g1[1].as_matrix()[(0, 0)], -1.0);
        let g2 = sign_flip_group(2).unwrap();
        assert_eq!(g2.len(), 4);
        for q in &g2 {
            OrthogonalMatrix::new(q.as_matrix().clone()).unwrap();
        }
        let g3 = sign_flip_group(3).unwrap();
        assert_eq!(g3.len(), 8);
        for (a, qa) in g3.iter().enumerate() {
            for qb in &g3[a + 1..] {
                assert_ne!(qa, qb);
            }
        }
        assert!(matches!(sign_flip_group(21), Err(Error::Capacity(_))));
    }

    #[test]
    fn sign_flip_group_is_closed_and_involutive() {
        let g = sign_flip_group(3).unwrap();
        for a in &g {
            let sq = a.compose(a);
            assert!((sq.as_matrix() - Matrix::identity(3, 3)).norm() < 1e-15);
            for b in &g {
                assert!(g.contains(&a.compose(b)));
            }
        }
    }

    #[test]
    fn haar_samples_are_orthogonal_and_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for d in 1..6 {
            let q = haar_orthogonal(d, &mut rng);
            let err = (q.as_matrix().transpose() * q.as_matrix() - Matrix::identity(d, d)).norm();
            assert!(err < 1e-9);
            assert!((q.determinant().abs() - 1.0).abs() < 1e-9);
        }
        let a = haar_orthogonal(3, &mut ChaCha8Rng::seed_from_u64(5));
        let b = haar_orthogonal(3, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
    }

    #[test]
    fn haar_inner_product_has_zero_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let m = Matrix::from_row_slice(3, 3, &[1.0, 2.0, 0.5, -1.0, 0.3, 2.0, 0.0, 1.0, 1.5]);
        let draws = 100_000;
        let samples: Vec<f64> = (0..draws)
            .map(|_| inner(&m, haar_orthogonal(3, &mut rng).as_matrix()))
            .collect();
        let mean = samples.iter().sum::<f64>() / draws as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
        let se = (var / draws as f64).sqrt();
        assert!(mean.abs() < 4.0 * se, "mean {mean} se {se}");
        // E⟨M,Q⟩² = ‖M‖_F²/d for Haar Q
        let want = m.norm_squared() / 3.0;
        assert!((var - want).abs() < 0.05 * want);
    }

    #[test]
    fn net_o2_coverage() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for delta in [0.5, 0.1, 0.02] {
            let net = net_o2(delta).unwrap();
            let dist = |q: &OrthogonalMatrix| {
                net.iter()
                    .map(|n| operator_norm(&(q.as_matrix() - n.as_matrix())))
                    .fold(f64::INFINITY, f64::min)
            };
            assert!(dist(&OrthogonalMatrix::identity(2)) <= delta);
            for _ in 0..1000 {
                assert!(dist(&haar_orthogonal(2, &mut rng)) <= delta + 1e-12);
            }
        }
    }

    #[test]
    fn net_o2_size_bound() {
        let net = net_o2(0.1).unwrap();
        let bound = 2.0 * (2.0 * PI / (2.0 * 0.05f64.asin())).ceil() + 2.0;
        assert!(net.len() as f64 <= bound);
        assert!(net_o2(0.0).is_err());
        assert!(net_o2(2.0).is_err());
    }

    #[test]
    fn eigen_phases_of_rotation_and_reflection() {
        let p = rotation2d(0.7, false).eigen_phases();
        assert!((p[0] + 0.7).abs() < 1e-12 && (p[1] - 0.7).abs() < 1e-12);
        let p = rotation2d(0.3, true).eigen_phases();
        assert!(p[0].abs() < 1e-12 && (p[1] - PI).abs() < 1e-12);
        let q = OrthogonalMatrix::identity(3);
        assert!(q.eigen_phases().iter().all(|t| t.abs() < 1e-12));
    }

    #[test]
    fn symmetric_eigen_is_descending() {
        let a = Matrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 0.0, 0.0, 0.0, -1.0]);
        let (vals, vecs) = symmetric_eigen_desc(&a).unwrap();
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        let rebuilt = &vecs * Matrix::from_diagonal(&nalgebra::DVector::from_vec(vals)) * vecs.transpose();
        assert!((rebuilt - a).norm() < 1e-12);
    }
}
