//! Spectral baselines: Umeyama, GRAMPA and degree matching.

use crate::assignment::Matcher;
use crate::error::{Error, Result};
use crate::linalg::{sign_vectors, symmetric_eigen_desc, Matrix};
use crate::models::{ModelKind, Observation};
use crate::par;
use crate::permutation::Permutation;

use super::{argmax_by_objective, EstimateResult, Factors};

/// Matches the top-`d` eigenvectors of `A` and `B` under every sign
/// assignment `q ∈ {±1}^d`, with weights `W = V diag(q) Uᵀ`.
pub fn umeyama(f: &Factors, matcher: Matcher) -> Result<EstimateResult> {
    let signs = sign_vectors(f.d())?;
    let u = &f.spectrum_a.vectors;
    let v = &f.spectrum_b.vectors;
    let solved = par::map_slice(&signs, |q| {
        let mut vq = v.clone();
        for (mut col, &s) in vq.column_iter_mut().zip(q) {
            col *= s;
        }
        matcher.solve(&(vq * u.transpose()))
    });
    let solved: Vec<_> = solved.into_iter().collect::<Result<_>>()?;
    let objectives: Vec<f64> = solved.iter().map(|a| a.objective).collect();
    let best = argmax_by_objective(&objectives).expect("2^d ≥ 2 candidates");
    let a = solved.into_iter().nth(best).expect("index in range");
    Ok(EstimateResult::from_assignment(a, signs.len(), None))
}

/// `X̂ = Σ_{i,j} u_i u_iᵀ J v_j v_jᵀ / ((λ_i − μ_j)² + η²)`, indexed by
/// (row of `A`, row of `B`).
pub fn grampa_similarity(obs: &Observation, eta: f64) -> Result<Matrix> {
    obs.require(ModelKind::DotProduct)?;
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::Parameter(format!("eta must be > 0, got {eta}")));
    }
    let (lambda, u) = symmetric_eigen_desc(&obs.left)?;
    let (mu, v) = symmetric_eigen_desc(&obs.right)?;
    let cu: Vec<f64> = u.column_iter().map(|c| c.sum()).collect();
    let cv: Vec<f64> = v.column_iter().map(|c| c.sum()).collect();
    let n = obs.n();
    let c = Matrix::from_fn(n, n, |i, j| {
        let gap = lambda[i] - mu[j];
        cu[i] * cv[j] / (gap * gap + eta * eta)
    });
    Ok(&u * c * v.transpose())
}

/// GRAMPA: rounds the similarity matrix with a linear assignment.
pub fn grampa(obs: &Observation, eta: f64, matcher: Matcher) -> Result<EstimateResult> {
    let xhat = grampa_similarity(obs, eta)?;
    let a = matcher.solve(&xhat.transpose())?;
    Ok(EstimateResult::from_assignment(a, 1, None))
}

/// Matches rows by rank of their sums `A·1` and `B·1`.
pub fn degree_match(obs: &Observation) -> Result<EstimateResult> {
    obs.require(ModelKind::DotProduct)?;
    let da: Vec<f64> = obs.left.row_iter().map(|r| r.sum()).collect();
    let db: Vec<f64> = obs.right.row_iter().map(|r| r.sum()).collect();
    let order = |deg: &[f64]| {
        let mut idx: Vec<usize> = (0..deg.len()).collect();
        idx.sort_by(|&i, &j| deg[i].total_cmp(&deg[j]).then(i.cmp(&j)));
        idx
    };
    let (sa, sb) = (order(&da), order(&db));
    let mut map = vec![0; da.len()];
    for (&i, &j) in sb.iter().zip(&sa) {
        map[i] = j;
    }
    let permutation = Permutation::new_unchecked(map);
    let objective = (0..db.len()).map(|i| db[i] * da[permutation.apply(i)]).sum();
    Ok(EstimateResult {
        permutation,
        objective,
        iterations: 0,
        best_q: None,
        history: Vec::new(),
    })
}
