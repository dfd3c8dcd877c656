//! Ground-truth instances and the three observation models.
//!
//! An [`Instance`] draws `X` with iid Gaussian rows, a uniform permutation
//! `π*`, and `Y = Π*X + σZ`. [`observe`] turns it into what an estimator is
//! allowed to see: the raw clouds, their Gram matrices, or their squared
//! distance matrices.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{ensure_finite, ensure_square, symmetric_eigen_desc, Matrix};
use crate::permutation::Permutation;

/// Smallest eigenvalue accepted for a user-supplied covariance.
pub const MIN_COVARIANCE_EIGENVALUE: f64 = 1e-6;
/// Negative eigenvalues down to this value still count as PSD.
pub const PSD_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    LinearAssignment,
    DotProduct,
    Distance,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [
        ModelKind::LinearAssignment,
        ModelKind::DotProduct,
        ModelKind::Distance,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::LinearAssignment => "linear_assignment",
            ModelKind::DotProduct => "dot_product",
            ModelKind::Distance => "distance",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown model `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub x: Matrix,
    pub y: Matrix,
    pub pi_star: Permutation,
    pub sigma: f64,
    pub covariance: Option<Matrix>,
    /// Seed the instance was drawn from, when known.
    pub seed: Option<u64>,
}

impl Instance {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    /// Draws an instance from a fresh ChaCha8 stream seeded with `seed`.
    pub fn from_seed(
        n: usize,
        d: usize,
        sigma: f64,
        covariance: Option<&Matrix>,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut inst = sample_instance(n, d, sigma, covariance, &mut rng)?;
        inst.seed = Some(seed);
        Ok(inst)
    }

    /// Stable content hash (first 8 bytes of SHA-256, hex).
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n() as u64).to_le_bytes());
        h.update((self.d() as u64).to_le_bytes());
        h.update(self.sigma.to_bits().to_le_bytes());
        for m in [&self.x, &self.y] {
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    h.update(m[(i, j)].to_bits().to_le_bytes());
                }
            }
        }
        for &p in self.pi_star.as_slice() {
            h.update((p as u64).to_le_bytes());
        }
        let digest = h.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_document(&self) -> InstanceDocument {
        InstanceDocument {
            n: self.n(),
            d: self.d(),
            sigma: self.sigma,
            seed: self.seed,
            covariance: self.covariance.as_ref().map(rows_of),
            x: rows_of(&self.x),
            y: rows_of(&self.y),
            pi_star: self.pi_star.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str::<InstanceDocument>(s)?.try_into()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// JSON form of an [`Instance`]; matrices are arrays of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceDocument {
    pub n: usize,
    pub d: usize,
    pub sigma: f64,
    pub seed: Option<u64>,
    pub covariance: Option<Vec<Vec<f64>>>,
    #[serde(rename = "X")]
    pub x: Vec<Vec<f64>>,
    #[serde(rename = "Y")]
    pub y: Vec<Vec<f64>>,
    pub pi_star: Permutation,
}

impl TryFrom<InstanceDocument> for Instance {
    type Error = Error;
    fn try_from(doc: InstanceDocument) -> Result<Self> {
        let x = from_rows(&doc.x, doc.n, doc.d, "X")?;
        let y = from_rows(&doc.y, doc.n, doc.d, "Y")?;
        let covariance = doc
            .covariance
            .as_ref()
            .map(|c| from_rows(c, doc.d, doc.d, "covariance"))
            .transpose()?;
        if doc.pi_star.len() != doc.n {
            return Err(Error::Dimension(format!(
                "pi_star has length {}, expected {}",
                doc.pi_star.len(),
                doc.n
            )));
        }
        Ok(Instance {
            x,
            y,
            pi_star: doc.pi_star,
            sigma: doc.sigma,
            covariance,
            seed: doc.seed,
        })
    }
}

fn rows_of(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>], n: usize, d: usize, what: &str) -> Result<Matrix> {
    if rows.len() != n || rows.iter().any(|r| r.len() != d) {
        return Err(Error::Dimension(format!("{what} must be {n}x{d}")));
    }
    let m = Matrix::from_fn(n, d, |i, j| rows[i][j]);
    ensure_finite(&m, what)?;
    Ok(m)
}

/// Draws `X` (rows iid `N(0, Σ)` or `N(0, I)`), a uniform `π*`, and
/// `Y = Π*X + σZ`.
pub fn sample_instance<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    sigma: f64,
    covariance: Option<&Matrix>,
    rng: &mut R,
) -> Result<Instance> {
    if n < 2 {
        return Err(Error::Parameter(format!("need n ≥ 2, got {n}")));
    }
    if d < 1 {
        return Err(Error::Parameter("need d ≥ 1".into()));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Parameter(format!("sigma must be finite and ≥ 0, got {sigma}")));
    }
    let factor = covariance.map(|c| covariance_factor(c, d)).transpose()?;

    let g = Matrix::from_fn(n, d, |_, _| rng.sample(StandardNormal));
    let x = match &factor {
        Some(l) => g * l.transpose(),
        None => g,
    };
    let pi_star = Permutation::random(n, rng);
    let mut y = pi_star.permute_rows(&x);
    if sigma > 0.0 {
        let z = Matrix::from_fn(n, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        y += z * sigma;
    }
    Ok(Instance {
        x,
        y,
        pi_star,
        sigma,
        covariance: covariance.cloned(),
        seed: None,
    })
}

fn covariance_factor(c: &Matrix, d: usize) -> Result<Matrix> {
    if c.shape() != (d, d) {
        return Err(Error::Dimension(format!("covariance must be {d}x{d}")));
    }
    ensure_finite(c, "covariance")?;
    if (c - c.transpose()).amax() > 1e-12 * (1.0 + c.amax()) {
        return Err(Error::Parameter("covariance must be symmetric".into()));
    }
    let (vals, _) = symmetric_eigen_desc(c)?;
    let min = vals.last().copied().unwrap_or(0.0);
    if min <= MIN_COVARIANCE_EIGENVALUE {
        return Err(Error::Parameter(format!(
            "covariance must be positive definite (min eigenvalue {min:e})"
        )));
    }
    c.clone()
        .cholesky()
        .map(|ch| ch.l())
        .ok_or_else(|| Error::Parameter("covariance is not positive definite".into()))
}

/// What an estimator may see.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub model: ModelKind,
    /// `X`, `A = XXᵀ`, or `D_X`.
    pub left: Matrix,
    /// `Y`, `B = YYᵀ`, or `D_Y`.
    pub right: Matrix,
}

impl Observation {
    pub fn new(model: ModelKind, left: Matrix, right: Matrix) -> Result<Self> {
        ensure_finite(&left, "observation")?;
        ensure_finite(&right, "observation")?;
        if left.shape() != right.shape() {
            return Err(Error::Dimension(format!(
                "observation payloads differ in shape: {:?} vs {:?}",
                left.shape(),
                right.shape()
            )));
        }
        if model != ModelKind::LinearAssignment {
            for m in [&left, &right] {
                ensure_square(m, "pairwise observation")?;
                if !is_symmetric(m, 1e-9) {
                    return Err(Error::Contract("pairwise observation must be symmetric".into()));
                }
            }
        }
        if model == ModelKind::Distance {
            for m in [&left, &right] {
                if m.diagonal().iter().any(|&v| v.abs() > 1e-9) || m.iter().any(|&v| v < -1e-9) {
                    return Err(Error::Contract(
                        "distance matrices need a zero diagonal and nonnegative entries".into(),
                    ));
                }
            }
        }
        Ok(Self { model, left, right })
    }

    pub fn n(&self) -> usize {
        self.left.nrows()
    }

    /// Smallest eigenvalue over both payloads (dot-product observations).
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let a = symmetric_eigen_desc(&self.left)?.0;
        let b = symmetric_eigen_desc(&self.right)?.0;
        Ok(a.last().copied().unwrap_or(0.0).min(b.last().copied().unwrap_or(0.0)))
    }

    pub(crate) fn require(&self, model: ModelKind) -> Result<()> {
        if self.model == model {
            Ok(())
        } else {
            Err(Error::Contract(format!(
                "expected a {model} observation, got {}",
                self.model
            )))
        }
    }
}

pub(crate) fn is_symmetric(m: &Matrix, rel_tol: f64) -> bool {
    m.is_square() && (m - m.transpose()).amax() <= rel_tol * (1.0 + m.amax())
}

pub fn gram(x: &Matrix) -> Matrix {
    x * x.transpose()
}

/// `D[i][j] = ‖X_i − X_j‖²`.
pub fn squared_distances(x: &Matrix) -> Matrix {
    let n = x.nrows();
    Matrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            (x.row(i) - x.row(j)).norm_squared()
        }
    })
}

pub fn observe(inst: &Instance, model: ModelKind) -> Observation {
    let (left, right) = match model {
        ModelKind::LinearAssignment => (inst.x.clone(), inst.y.clone()),
        ModelKind::DotProduct => (gram(&inst.x), gram(&inst.y)),
        ModelKind::Distance => (squared_distances(&inst.x), squared_distances(&inst.y)),
    };
    Observation { model, left, right }
}

/// `Ã = −½ (I − F) D (I − F)` with `F = 11ᵀ/n`.
///
/// Computed by subtracting row and column means and adding back the grand
/// mean, which is the same operator without forming `I − F`.
pub fn double_center(d: &Matrix) -> Result<Matrix> {
    ensure_square(d, "distance matrix")?;
    ensure_finite(d, "distance matrix")?;
    if !is_symmetric(d, 1e-9) {
        return Err(Error::Contract("distance matrix must be symmetric".into()));
    }
    if d.diagonal().iter().any(|&v| v.abs() > 1e-9 * (1.0 + d.amax())) {
        return Err(Error::Contract("distance matrix must have a zero diagonal".into()));
    }
    let n = d.nrows();
    let nf = n as f64;
    let row_means: Vec<f64> = (0..n).map(|i| d.row(i).sum() / nf).collect();
    let grand = row_means.iter().sum::<f64>() / nf;
    let mut out = Matrix::from_fn(n, n, |i, j| {
        -0.5 * (d[(i, j)] - row_means[i] - row_means[j] + grand)
    });
    // exact symmetry for downstream eigensolvers
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (out[(i, j)] + out[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(out)
}

/// Top-`d` eigenpairs of a symmetric matrix, descending, with each
/// eigenvector's largest-magnitude entry made positive.
pub fn top_eigenpairs(a: &Matrix, d: usize) -> Result<(Vec<f64>, Matrix)> {
    ensure_square(a, "PSD matrix")?;
    if d > a.nrows() {
        return Err(Error::Dimension(format!(
            "rank {d} exceeds matrix size {}",
            a.nrows()
        )));
    }
    let (vals, vecs) = symmetric_eigen_desc(a)?;
    let mut u = vecs.columns(0, d).into_owned();
    for mut col in u.column_iter_mut() {
        let pivot = col.iter().copied().fold(0.0f64, |best, v| {
            if v.abs() > best.abs() {
                v
            } else {
                best
            }
        });
        if pivot < 0.0 {
            col.neg_mut();
        }
    }
    Ok((vals[..d].to_vec(), u))
}

/// `A^{1/2} = U_d Λ_d^{1/2}` from the top-`d` eigenpairs; negative
/// eigenvalues are clipped to zero.
pub fn factorize(a: &Matrix, d: usize) -> Result<Matrix> {
    let (vals, u) = top_eigenpairs(a, d)?;
    let scale = DVector::from_iterator(d, vals.iter().map(|&l| l.max(0.0).sqrt()));
    Ok(u * Matrix::from_diagonal(&scale))
}
