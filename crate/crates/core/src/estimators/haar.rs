//! Exact MLE under a Haar prior on the latent rotation, for small `n`.

use itertools::Itertools;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{haar_orthogonal, inner, OrthogonalMatrix};
use crate::par;
use crate::permutation::Permutation;

use super::{argmax_by_objective, EstimateResult, Factors};

/// Largest `n` for which all `n!` permutations are enumerated.
pub const HAAR_MLE_MAX_N: usize = 8;

/// Maximizes `log E_Q exp(⟨M(π), Q⟩/σ²)` over all permutations, with the
/// expectation estimated from `mc_samples` Haar draws shared by every `π`.
pub fn haar_mle<R: Rng + ?Sized>(
    f: &Factors,
    sigma: f64,
    mc_samples: usize,
    rng: &mut R,
) -> Result<EstimateResult> {
    if mc_samples < 1 {
        return Err(Error::Parameter("mc_samples must be ≥ 1".into()));
    }
    check(f, sigma)?;
    let qs: Vec<OrthogonalMatrix> = (0..mc_samples).map(|_| haar_orthogonal(f.d(), rng)).collect();
    haar_mle_with_samples(f, sigma, &qs)
}

/// [`haar_mle`] with caller-supplied rotation samples.
pub fn haar_mle_with_samples(
    f: &Factors,
    sigma: f64,
    qs: &[OrthogonalMatrix],
) -> Result<EstimateResult> {
    check(f, sigma)?;
    if qs.is_empty() {
        return Err(Error::Parameter("need at least one rotation sample".into()));
    }
    if qs.iter().any(|q| q.dim() != f.d()) {
        return Err(Error::Dimension("rotation samples must be d x d".into()));
    }
    let n = f.n();
    let perms: Vec<Vec<usize>> = (0..n).permutations(n).collect();
    let scale = 1.0 / (sigma * sigma);
    let scores = par::map_slice(&perms, |p| {
        let m = f.cross(&Permutation::new_unchecked(p.clone()));
        let logs: Vec<f64> = qs.iter().map(|q| inner(&m, q.as_matrix()) * scale).collect();
        log_mean_exp(&logs)
    });
    let best = argmax_by_objective(&scores).expect("n! ≥ 1");
    Ok(EstimateResult {
        permutation: Permutation::new_unchecked(perms[best].clone()),
        objective: scores[best],
        iterations: perms.len(),
        best_q: None,
        history: Vec::new(),
    })
}

fn check(f: &Factors, sigma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Parameter(format!("sigma must be > 0, got {sigma}")));
    }
    if f.n() > HAAR_MLE_MAX_N {
        return Err(Error::Capacity(format!(
            "haar_mle enumerates n! permutations; n = {} exceeds {HAAR_MLE_MAX_N}",
            f.n()
        )));
    }
    Ok(())
}

fn log_mean_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = v.iter().map(|x| (x - m).exp()).sum();
    m + (s / v.len() as f64).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{observe, Instance, ModelKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn factors(n: usize, sigma: f64, seed: u64) -> (Instance, Factors) {
        let inst = Instance::from_seed(n, 2, sigma, None, seed).unwrap();
        let f = Factors::from_observation(&observe(&inst, ModelKind::DotProduct), 2).unwrap();
        (inst, f)
    }

    #[test]
    fn rejects_large_n_and_bad_sigma() {
        let (_, f) = factors(9, 0.1, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(haar_mle(&f, 0.1, 10, &mut rng), Err(Error::Capacity(_))));
        let (_, f) = factors(5, 0.1, 1);
        assert!(matches!(haar_mle(&f, 0.0, 10, &mut rng), Err(Error::Parameter(_))));
    }

    #[test]
    fn low_noise_recovers_truth() {
        let (inst, f) = factors(6, 0.01, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = haar_mle(&f, 0.01, 500, &mut rng).unwrap();
        assert_eq!(r.permutation, inst.pi_star);
        assert_eq!(r.iterations, 720);
    }

    #[test]
    fn log_mean_exp_is_stable() {
        assert!((log_mean_exp(&[1000.0, 1000.0]) - 1000.0).abs() < 1e-12);
        assert!((log_mean_exp(&[0.0, 2f64.ln()]) - 1.5f64.ln()).abs() < 1e-12);
    }
}
