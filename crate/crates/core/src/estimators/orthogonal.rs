//! Estimators built on the double maximization over permutations and the
//! orthogonal group.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::assignment::{Assignment, Matcher};
use crate::error::{Error, Result};
use crate::linalg::{
    angle_grid, haar_orthogonal, nuclear_norm, procrustes_rotation, sign_flip_group, Matrix,
    OrthogonalMatrix,
};
use crate::par;

use super::{argmax_by_objective, EstimateResult, Factors, CONVERGENCE_TOL};

/// Solves one assignment per candidate `Q` and keeps the best.
fn search(f: &Factors, candidates: &[OrthogonalMatrix], matcher: Matcher) -> Result<EstimateResult> {
    let solved: Vec<Result<Assignment>> =
        par::map_slice(candidates, |q| matcher.solve(&f.weights(q.as_matrix())));
    let solved: Vec<Assignment> = solved.into_iter().collect::<Result<_>>()?;
    let objectives: Vec<f64> = solved.iter().map(|a| a.objective).collect();
    let best = argmax_by_objective(&objectives)
        .ok_or_else(|| Error::Parameter("empty candidate set".into()))?;
    let q = candidates[best].clone();
    let a = solved.into_iter().nth(best).expect("index in range");
    Ok(EstimateResult::from_assignment(a, candidates.len(), Some(q)))
}

/// Approximate MLE for d = 2 with the inner maximum taken over `t0`
/// rotations and `t0` reflections at angles `2πk/t0`.
pub fn aml_grid2d(f: &Factors, t0: usize, matcher: Matcher) -> Result<EstimateResult> {
    if f.d() != 2 {
        return Err(Error::UnsupportedDimension(format!(
            "aml_grid2d needs d = 2, got d = {}",
            f.d()
        )));
    }
    if t0 < 1 {
        return Err(Error::Parameter("grid size must be ≥ 1".into()));
    }
    search(f, &angle_grid(t0), matcher)
}

/// Approximate MLE with the inner maximum restricted to the `2^d` diagonal
/// sign flips.
pub fn aml_signflip(f: &Factors, matcher: Matcher) -> Result<EstimateResult> {
    search(f, &sign_flip_group(f.d())?, matcher)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlternatingOptions {
    pub max_iter: usize,
    pub restarts: usize,
    pub matcher: Matcher,
}

impl Default for AlternatingOptions {
    fn default() -> Self {
        Self {
            max_iter: super::DEFAULT_MAX_ITER,
            restarts: super::DEFAULT_RESTARTS,
            matcher: Matcher::Exact,
        }
    }
}

/// One coordinate-ascent run. `dual_step` maps `M(π)` to the next dual
/// variable and the objective value at `π`.
fn ascend(
    f: &Factors,
    init: Matrix,
    max_iter: usize,
    matcher: Matcher,
    dual_step: impl Fn(&Matrix) -> Result<(Matrix, f64)>,
) -> Result<EstimateResult> {
    let mut q = init;
    let mut history = Vec::new();
    let mut best: Option<(crate::permutation::Permutation, f64, Matrix)> = None;
    for _ in 0..max_iter {
        let a = matcher.solve(&f.weights(&q))?;
        let m = f.cross(&a.permutation);
        let (q_next, objective) = dual_step(&m)?;
        if let Some((_, prev, _)) = &best {
            if objective - prev < CONVERGENCE_TOL {
                break;
            }
        }
        history.push(objective);
        best = Some((a.permutation, objective, q_next.clone()));
        q = q_next;
    }
    let (permutation, objective, q) = best.expect("max_iter ≥ 1");
    Ok(EstimateResult {
        permutation,
        objective,
        iterations: history.len(),
        best_q: OrthogonalMatrix::new(q).ok(),
        history,
    })
}

/// Alternating maximization from a single starting rotation: LAP for fixed
/// `Q`, then the Procrustes rotation for fixed `π`.
pub fn alternating_run(
    f: &Factors,
    init: &OrthogonalMatrix,
    max_iter: usize,
    matcher: Matcher,
) -> Result<EstimateResult> {
    check_dual_dim(f, init.as_matrix())?;
    ascend(f, init.as_matrix().clone(), max_iter.max(1), matcher, |m| {
        Ok((procrustes_rotation(m)?.into_inner(), nuclear_norm(m)?))
    })
}

/// Best of `restarts` alternating runs; the first starts from `init` when
/// given, the rest from Haar-random rotations.
pub fn alternating_procrustes<R: Rng + ?Sized>(
    f: &Factors,
    init: Option<&OrthogonalMatrix>,
    opts: &AlternatingOptions,
    rng: &mut R,
) -> Result<EstimateResult> {
    let d = f.d();
    let starts = starting_points(init.cloned(), opts.restarts, rng, |r| haar_orthogonal(d, r));
    best_run(&starts, |q| alternating_run(f, q, opts.max_iter, opts.matcher))
}

/// Alternating heuristic for `max_π ‖(A^{1/2})ᵀ Πᵀ B^{1/2}‖_F`: LAP for a
/// fixed unit-Frobenius `Q`, then `Q = M/‖M‖_F`.
pub fn qap_run(f: &Factors, init: &Matrix, max_iter: usize, matcher: Matcher) -> Result<EstimateResult> {
    check_dual_dim(f, init)?;
    let norm = init.norm();
    if !(norm > 0.0) {
        return Err(Error::Parameter("initial dual matrix must be nonzero".into()));
    }
    ascend(f, init / norm, max_iter.max(1), matcher, |m| {
        let fro = m.norm();
        let q = if fro > 0.0 { m / fro } else { m.clone() };
        Ok((q, fro))
    })
}

/// Best of `restarts` Frobenius runs; the first starts from `init` (or
/// `I/√d`), the rest from normalized Gaussian matrices.
pub fn qap_frobenius<R: Rng + ?Sized>(
    f: &Factors,
    init: Option<&Matrix>,
    opts: &AlternatingOptions,
    rng: &mut R,
) -> Result<EstimateResult> {
    let d = f.d();
    let first = init
        .cloned()
        .unwrap_or_else(|| Matrix::identity(d, d) / (d as f64).sqrt());
    let starts = starting_points(Some(first), opts.restarts, rng, |r| {
        Matrix::from_fn(d, d, |_, _| r.sample(StandardNormal))
    });
    let mut out = best_run(&starts, |q| qap_run(f, q, opts.max_iter, opts.matcher))?;
    out.best_q = None;
    Ok(out)
}

fn check_dual_dim(f: &Factors, q: &Matrix) -> Result<()> {
    if q.shape() == (f.d(), f.d()) {
        Ok(())
    } else {
        Err(Error::Dimension(format!(
            "dual variable must be {0}x{0}, got {1}x{2}",
            f.d(),
            q.nrows(),
            q.ncols()
        )))
    }
}

/// `init` (if any) followed by random starts, `restarts.max(1)` in total.
/// Each random start gets its own stream so runs can execute in parallel.
fn starting_points<T, R: Rng + ?Sized>(
    init: Option<T>,
    restarts: usize,
    rng: &mut R,
    draw: impl Fn(&mut ChaCha8Rng) -> T,
) -> Vec<T> {
    let total = restarts.max(1);
    let mut starts: Vec<T> = init.into_iter().collect();
    while starts.len() < total {
        let mut sub = ChaCha8Rng::seed_from_u64(rng.random());
        starts.push(draw(&mut sub));
    }
    starts
}

fn best_run<T: Sync>(
    starts: &[T],
    run: impl Fn(&T) -> Result<EstimateResult> + Sync + Send,
) -> Result<EstimateResult> {
    let runs: Vec<EstimateResult> = par::map_slice(starts, run).into_iter().collect::<Result<_>>()?;
    let objectives: Vec<f64> = runs.iter().map(|r| r.objective).collect();
    let best = argmax_by_objective(&objectives).expect("at least one start");
    Ok(runs.into_iter().nth(best).expect("index in range"))
}
