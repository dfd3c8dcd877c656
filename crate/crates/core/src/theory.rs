//! Computable objects from the analysis of the linear assignment and
//! dot-product models: the orbit decomposition of the log-likelihood,
//! augmenting 2-orbits, the Gaussian MGF over `(Π, Q)`, the O(2) net bound
//! and the recovery thresholds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{haar_orthogonal, inner, net_o2, nuclear_norm, Matrix, OrthogonalMatrix};
use crate::models::Instance;
use crate::par;
use crate::permutation::{CycleType, Permutation};

/// Fewest Monte-Carlo samples accepted by the MGF estimators.
pub const MIN_MC_SAMPLES: usize = 1000;
const MC_CHUNK: usize = 4096;

/// A cycle `(i₁, …, i_t)` of `(π*)⁻¹∘π`, `t ≥ 2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Orbit(Vec<usize>);

impl Orbit {
    pub fn new(vertices: Vec<usize>) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::Contract("an orbit has at least two vertices".into()));
        }
        let mut sorted = vertices.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Contract(format!("orbit repeats a vertex: {vertices:?}")));
        }
        Ok(Self(vertices))
    }

    pub fn vertices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// `(1/σ²)·⟨ΠX − Π*X, Y⟩`.
pub fn loglik_diff(inst: &Instance, pi: &Permutation) -> Result<f64> {
    if !(inst.sigma > 0.0) {
        return Err(Error::Parameter("log-likelihood ratio needs sigma > 0".into()));
    }
    check_len(inst, pi)?;
    let (x, y) = (&inst.x, &inst.y);
    let mut s = 0.0;
    for i in 0..inst.n() {
        let (a, b) = (pi.apply(i), inst.pi_star.apply(i));
        if a != b {
            s += (x.row(a) - x.row(b)).dot(&y.row(i));
        }
    }
    Ok(s / (inst.sigma * inst.sigma))
}

/// Cycles of length ≥ 2 of `(π*)⁻¹∘π`, each listed as `i, σ(i), σ²(i), …`.
pub fn orbits(inst: &Instance, pi: &Permutation) -> Result<Vec<Orbit>> {
    check_len(inst, pi)?;
    let sigma = inst.pi_star.inverse().compose(pi)?;
    Ok(sigma
        .cycles()
        .into_iter()
        .filter(|c| c.len() > 1)
        .map(Orbit)
        .collect())
}

/// `Δ(O) = Σ_k ⟨X_{π*(i_{k+1})} − X_{π*(i_k)}, Y_{i_k}⟩`, indices cyclic.
pub fn delta_orbit(inst: &Instance, orbit: &Orbit) -> Result<f64> {
    let v = Orbit::new(orbit.0.clone())?.0;
    if let Some(&bad) = v.iter().find(|&&i| i >= inst.n()) {
        return Err(Error::Contract(format!("orbit vertex {bad} out of range")));
    }
    let (x, y, p) = (&inst.x, &inst.y, &inst.pi_star);
    let t = v.len();
    Ok((0..t)
        .map(|k| {
            let (i, j) = (v[k], v[(k + 1) % t]);
            (x.row(p.apply(j)) - x.row(p.apply(i))).dot(&y.row(i))
        })
        .sum())
}

/// An index pair `(i, j)` with `i < j`.
pub type Pair = (usize, usize);

/// All pairs `i < j` whose transposition does not decrease the likelihood,
/// and a vertex-disjoint subcollection chosen greedily in index order.
pub fn augmenting_2orbits(inst: &Instance) -> (Vec<Pair>, Vec<Pair>) {
    let n = inst.n();
    let (x, y, p) = (&inst.x, &inst.y, &inst.pi_star);
    let rows: Vec<Vec<(usize, usize)>> = par::map_range(n, |i| {
        (i + 1..n)
            .filter(|&j| {
                let dx = x.row(p.apply(j)) - x.row(p.apply(i));
                let dy = y.row(i) - y.row(j);
                dx.dot(&dy) >= 0.0
            })
            .map(|j| (i, j))
            .collect()
    });
    let pairs: Vec<(usize, usize)> = rows.into_iter().flatten().collect();
    let mut used = vec![false; n];
    let mut disjoint = Vec::new();
    for &(i, j) in &pairs {
        if !used[i] && !used[j] {
            used[i] = true;
            used[j] = true;
            disjoint.push((i, j));
        }
    }
    (pairs, disjoint)
}

/// `log a_k(Q)` for one cycle length.
fn log_a_k(k: usize, thetas: &[f64], sigma: f64) -> f64 {
    let d = thetas.len() as f64;
    let kf = k as f64;
    let l = 2.0 * kf * (2.0 * sigma).asinh();
    let log_brackets: f64 = thetas
        .iter()
        .map(|&th| {
            if l <= 30.0 {
                let (sh, sn) = ((l / 2.0).sinh(), (kf * th / 2.0).sin());
                (4.0 * (sh * sh + sn * sn)).ln()
            } else {
                l + ((-2.0 * l).exp() - 2.0 * (kf * th).cos() * (-l).exp()).ln_1p()
            }
        })
        .sum();
    kf * d * (4.0 * sigma).ln() - 0.5 * log_brackets
}

/// `Π_k a_k(Q)^{n_k}` where `θ_ℓ` are the eigen-phases of `Q`.
pub fn mgf_closed_form(cycle_type: &CycleType, thetas: &[f64], sigma: f64) -> Result<f64> {
    Ok(log_mgf_closed_form(cycle_type, thetas, sigma)?.exp())
}

/// Natural log of [`mgf_closed_form`].
pub fn log_mgf_closed_form(cycle_type: &CycleType, thetas: &[f64], sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    if thetas.is_empty() {
        return Err(Error::Parameter("need at least one eigen-phase".into()));
    }
    Ok(cycle_type
        .iter()
        .map(|(k, nk)| nk as f64 * log_a_k(k, thetas, sigma))
        .sum())
}

/// [`mgf_closed_form`] for a concrete `(π, Q)`.
pub fn mgf_for(pi: &Permutation, q: &OrthogonalMatrix, sigma: f64) -> Result<f64> {
    if pi.is_empty() {
        return Err(Error::Contract("empty permutation".into()));
    }
    mgf_closed_form(&pi.cycle_type(), &q.eigen_phases(), sigma)
}

/// Monte-Carlo estimate of `E exp(−‖X − ΠXQ‖_F² / (32σ²))` for `X` with iid
/// standard Gaussian entries.
pub fn mgf_monte_carlo<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    pi: &Permutation,
    q: &OrthogonalMatrix,
    sigma: f64,
    samples: usize,
    rng: &mut R,
) -> Result<f64> {
    mgf_mc(n, d, pi, q, sigma, samples, false, rng)
}

/// [`mgf_monte_carlo`] with `X` replaced by the centered cloud `(I − 11ᵀ/n)X`.
pub fn mgf_monte_carlo_centered<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    pi: &Permutation,
    q: &OrthogonalMatrix,
    sigma: f64,
    samples: usize,
    rng: &mut R,
) -> Result<f64> {
    mgf_mc(n, d, pi, q, sigma, samples, true, rng)
}

#[allow(clippy::too_many_arguments)]
fn mgf_mc<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    pi: &Permutation,
    q: &OrthogonalMatrix,
    sigma: f64,
    samples: usize,
    center: bool,
    rng: &mut R,
) -> Result<f64> {
    check_sigma(sigma)?;
    if samples < MIN_MC_SAMPLES {
        return Err(Error::Parameter(format!(
            "need at least {MIN_MC_SAMPLES} samples, got {samples}"
        )));
    }
    if pi.len() != n || q.dim() != d {
        return Err(Error::Dimension(format!(
            "expected π on {n} points and Q of size {d}, got {} and {}",
            pi.len(),
            q.dim()
        )));
    }
    let master: u64 = rng.random();
    let scale = 1.0 / (32.0 * sigma * sigma);
    let qm = q.as_matrix();
    let chunks = samples.div_ceil(MC_CHUNK);
    let sums = par::map_range(chunks, |c| {
        let mut r = ChaCha8Rng::seed_from_u64(master);
        r.set_stream(c as u64);
        let count = MC_CHUNK.min(samples - c * MC_CHUNK);
        let mut x = vec![0.0; n * d];
        let mut acc = 0.0;
        for _ in 0..count {
            x.iter_mut().for_each(|v| *v = r.sample(StandardNormal));
            if center {
                for col in 0..d {
                    let mean = (0..n).map(|i| x[i * d + col]).sum::<f64>() / n as f64;
                    (0..n).for_each(|i| x[i * d + col] -= mean);
                }
            }
            let mut sq = 0.0;
            for i in 0..n {
                let src = pi.apply(i) * d;
                for col in 0..d {
                    let rotated: f64 = (0..d).map(|m| x[src + m] * qm[(m, col)]).sum();
                    let diff = x[i * d + col] - rotated;
                    sq += diff * diff;
                }
            }
            acc += (-sq * scale).exp();
        }
        acc
    });
    Ok(sums.iter().sum::<f64>() / samples as f64)
}

/// Ratio between the MGF of the centered model and [`mgf_closed_form`]:
/// `Π_ℓ (1 + (2 − 2cos θ_ℓ)/(16σ²))^{1/2}`.
pub fn mgf_distance_correction(thetas: &[f64], sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    let t = 1.0 / (16.0 * sigma * sigma);
    Ok(thetas
        .iter()
        .map(|&th| 0.5 * (1.0 + (2.0 - 2.0 * th.cos()) * t).ln())
        .sum::<f64>()
        .exp())
}

/// Compares `max_{Q ∈ net} ⟨M, Q⟩` against `(1 − δ²/2)·‖M‖_*`.
pub fn check_net_lemma(m: &Matrix, delta: f64) -> Result<(f64, f64, bool)> {
    if m.shape() != (2, 2) {
        return Err(Error::Dimension("net lemma is stated for 2x2 matrices".into()));
    }
    let net = net_o2(delta)?;
    let lhs = net
        .iter()
        .map(|q| inner(m, q.as_matrix()))
        .fold(f64::NEG_INFINITY, f64::max);
    let rhs = (1.0 - delta * delta / 2.0) * nuclear_norm(m)?;
    Ok((lhs, rhs, lhs >= rhs - 1e-12))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdReport {
    /// `n^{−2/d}`.
    pub perfect_threshold: f64,
    /// `n^{−1/d}`.
    pub almost_threshold: f64,
    /// `(d/2)·log(1 + σ⁻²) − (1 − ε)·log n + 1 + log(n + 1)/n`; almost-exact
    /// recovery is impossible while this is negative.
    pub mi_almost_lhs: f64,
    /// `(d/4)·log(1 + σ⁻²) − log n + log d`; exact recovery is impossible
    /// while this is negative.
    pub exact_nec_lhs: f64,
}

pub fn thresholds(n: usize, d: usize, sigma: f64, eps: f64) -> Result<ThresholdReport> {
    if n < 2 || d < 1 {
        return Err(Error::Parameter(format!("need n ≥ 2 and d ≥ 1, got n = {n}, d = {d}")));
    }
    check_sigma(sigma)?;
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::Parameter(format!("eps must lie in [0, 1), got {eps}")));
    }
    let (nf, df) = (n as f64, d as f64);
    let info = (1.0 + sigma.powi(-2)).ln();
    Ok(ThresholdReport {
        perfect_threshold: nf.powf(-2.0 / df),
        almost_threshold: nf.powf(-1.0 / df),
        mi_almost_lhs: df / 2.0 * info - (1.0 - eps) * nf.ln() + 1.0 + (nf + 1.0).ln() / nf,
        exact_nec_lhs: df / 4.0 * info - nf.ln() + df.ln(),
    })
}

/// The σ at which `mi_almost_lhs` vanishes.
pub fn mi_almost_root(n: usize, d: usize, eps: f64) -> f64 {
    let (nf, df) = (n as f64, d as f64);
    let target = (1.0 - eps) * nf.ln() - 1.0 - (nf + 1.0).ln() / nf;
    ((2.0 * target / df).exp() - 1.0).powf(-0.5)
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("sigma must be > 0, got {sigma}")))
    }
}

fn check_len(inst: &Instance, pi: &Permutation) -> Result<()> {
    if pi.len() == inst.n() {
        Ok(())
    } else {
        Err(Error::Dimension(format!(
            "permutation on {} points for an instance with n = {}",
            pi.len(),
            inst.n()
        )))
    }
}

/// Outcome of one oracle check run by [`verify_suite`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Cross-checks the closed forms above against independent computations:
/// MGF vs Monte Carlo (plain and centered), the net bound on random
/// matrices, and the orbit decomposition of the log-likelihood.
pub fn verify_suite(seed: u64, mc_samples: usize) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();

    for centered in [false, true] {
        let mut worst: f64 = 0.0;
        for _ in 0..5 {
            let pi = Permutation::random(4, &mut rng);
            let q = haar_orthogonal(2, &mut rng);
            let sigma = rng.random_range(0.2..0.5);
            let thetas = q.eigen_phases();
            let mut exact = mgf_closed_form(&pi.cycle_type(), &thetas, sigma)?;
            let mc = if centered {
                exact *= mgf_distance_correction(&thetas, sigma)?;
                mgf_monte_carlo_centered(4, 2, &pi, &q, sigma, mc_samples, &mut rng)?
            } else {
                mgf_monte_carlo(4, 2, &pi, &q, sigma, mc_samples, &mut rng)?
            };
            worst = worst.max((mc - exact).abs() / exact);
        }
        let name = if centered {
            "centered MGF correction vs Monte Carlo"
        } else {
            "MGF closed form vs Monte Carlo"
        };
        checks.push(Check {
            name: name.into(),
            passed: worst <= 0.05,
            detail: format!("max relative error {worst:.4} over 5 configurations"),
        });
    }

    for delta in [0.5, 0.1, 0.02] {
        let mut violations = 0;
        for _ in 0..100 {
            let m = Matrix::from_fn(2, 2, |_, _| rng.sample(StandardNormal));
            if !check_net_lemma(&m, delta)?.2 {
                violations += 1;
            }
        }
        checks.push(Check {
            name: format!("net bound at delta = {delta}"),
            passed: violations == 0,
            detail: format!("{violations} violations in 100 matrices"),
        });
    }

    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(2..=20);
        let d = rng.random_range(1..=4);
        let sigma = rng.random_range(0.05..2.0);
        let inst = crate::models::sample_instance(n, d, sigma, None, &mut rng)?;
        let pi = Permutation::random(n, &mut rng);
        let lhs = loglik_diff(&inst, &pi)? * sigma * sigma;
        let rhs: f64 = orbits(&inst, &pi)?
            .iter()
            .map(|o| delta_orbit(&inst, o))
            .sum::<Result<f64>>()?;
        worst = worst.max((lhs - rhs).abs());
    }
    checks.push(Check {
        name: "orbit decomposition of the log-likelihood".into(),
        passed: worst <= 1e-9,
        detail: format!("max abs error {worst:.2e} over 100 pairs"),
    });

    let id = mgf_closed_form(&CycleType::from_lengths(&[1; 6])?, &[0.0, 0.0], 0.3)?;
    checks.push(Check {
        name: "MGF at the identity".into(),
        passed: (id - 1.0).abs() <= 1e-12,
        detail: format!("value {id}"),
    });
    Ok(checks)
}
