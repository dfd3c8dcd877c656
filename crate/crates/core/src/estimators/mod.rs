//! Permutation estimators.
//!
//! Every estimator maps an [`Observation`] to an [`EstimateResult`]. The
//! dot-product estimators work on rank-`d` factors `A^{1/2}`, `B^{1/2}`
//! ([`Factors`]); the distance model is reduced to the dot-product model by
//! double centering ([`estimate_distance`]).
//!
//! Candidate searches (angle grid, sign flips, restarts, permutations) are
//! evaluated in parallel and reduced by `(objective, candidate index)`, so
//! the result does not depend on the thread schedule.

mod haar;
mod linear;
mod orthogonal;
mod spectral;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::assignment::{Assignment, Matcher};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, OrthogonalMatrix};
use crate::models::{double_center, top_eigenpairs, ModelKind, Observation};
use crate::permutation::Permutation;

pub use haar::{haar_mle, haar_mle_with_samples, HAAR_MLE_MAX_N};
pub use linear::{mle_linear, mle_linear_with};
pub use orthogonal::{
    aml_grid2d, aml_signflip, alternating_procrustes, alternating_run, qap_frobenius, qap_run,
    AlternatingOptions,
};
pub use spectral::{degree_match, grampa, grampa_similarity, umeyama};

pub use crate::permutation::overlap;

pub const DEFAULT_GRID_SIZE: usize = 100;
pub const DEFAULT_ETA: f64 = 0.2;
pub const DEFAULT_MAX_ITER: usize = 100;
pub const DEFAULT_RESTARTS: usize = 10;
pub const DEFAULT_MC_SAMPLES: usize = 2000;
/// Iterative methods stop once an iteration improves the objective by less
/// than this.
pub const CONVERGENCE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    MleLinear,
    AmlGrid2d,
    AmlSignflip,
    Umeyama,
    Alternating,
    QapFrobenius,
    Grampa,
    Degree,
    HaarMle,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 9] = [
        EstimatorKind::MleLinear,
        EstimatorKind::AmlGrid2d,
        EstimatorKind::AmlSignflip,
        EstimatorKind::Umeyama,
        EstimatorKind::Alternating,
        EstimatorKind::QapFrobenius,
        EstimatorKind::Grampa,
        EstimatorKind::Degree,
        EstimatorKind::HaarMle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorKind::MleLinear => "mle_linear",
            EstimatorKind::AmlGrid2d => "aml_grid2d",
            EstimatorKind::AmlSignflip => "aml_signflip",
            EstimatorKind::Umeyama => "umeyama",
            EstimatorKind::Alternating => "alternating",
            EstimatorKind::QapFrobenius => "qap_frobenius",
            EstimatorKind::Grampa => "grampa",
            EstimatorKind::Degree => "degree",
            EstimatorKind::HaarMle => "haar_mle",
        }
    }

    /// Whether the estimator can run on observations from `model`.
    pub fn supports(self, model: ModelKind) -> bool {
        match model {
            ModelKind::LinearAssignment => self == EstimatorKind::MleLinear,
            ModelKind::DotProduct => self != EstimatorKind::MleLinear,
            ModelKind::Distance => DISTANCE_INNER_KINDS.contains(&self),
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown estimator `{s}`")))
    }
}

/// Estimators that [`estimate_distance`] accepts as its inner step.
pub const DISTANCE_INNER_KINDS: [EstimatorKind; 4] = [
    EstimatorKind::AmlGrid2d,
    EstimatorKind::AmlSignflip,
    EstimatorKind::Umeyama,
    EstimatorKind::Alternating,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    pub kind: EstimatorKind,
    /// Angles per family (rotations, reflections) for `aml_grid2d`.
    pub grid_size: usize,
    /// GRAMPA regularizer.
    pub eta: f64,
    pub max_iter: usize,
    pub restarts: usize,
    pub mc_samples: usize,
    /// Rounding step for the LAP-based estimators.
    pub matcher: Matcher,
    /// Seed for standalone runs; the sweep harness derives its own.
    pub seed: u64,
    /// Name used in output; defaults to the kind plus `_greedy` when the
    /// greedy matcher is selected.
    pub label: Option<String>,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            kind: EstimatorKind::AmlSignflip,
            grid_size: DEFAULT_GRID_SIZE,
            eta: DEFAULT_ETA,
            max_iter: DEFAULT_MAX_ITER,
            restarts: DEFAULT_RESTARTS,
            mc_samples: DEFAULT_MC_SAMPLES,
            matcher: Matcher::Exact,
            seed: 0,
            label: None,
        }
    }
}

impl EstimatorConfig {
    pub fn new(kind: EstimatorKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn greedy(mut self) -> Self {
        self.matcher = Matcher::Greedy;
        self
    }

    pub fn with_grid_size(mut self, t0: usize) -> Self {
        self.grid_size = t0;
        self
    }

    pub fn name(&self) -> String {
        match &self.label {
            Some(l) => l.clone(),
            None if self.matcher == Matcher::Greedy => format!("{}_greedy", self.kind),
            None => self.kind.to_string(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_size < 1 {
            return Err(Error::Parameter("grid_size must be ≥ 1".into()));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Parameter(format!("eta must be > 0, got {}", self.eta)));
        }
        if self.max_iter < 1 {
            return Err(Error::Parameter("max_iter must be ≥ 1".into()));
        }
        if self.restarts < 1 {
            return Err(Error::Parameter("restarts must be ≥ 1".into()));
        }
        if self.mc_samples < 1 {
            return Err(Error::Parameter("mc_samples must be ≥ 1".into()));
        }
        Ok(())
    }
}

impl FromStr for EstimatorConfig {
    type Err = Error;

    /// Parses a kind name, optionally suffixed with `_greedy`.
    fn from_str(s: &str) -> Result<Self> {
        if let Ok(kind) = s.parse::<EstimatorKind>() {
            return Ok(Self::new(kind));
        }
        match s.strip_suffix("_greedy") {
            Some(base) => Ok(Self::new(base.parse()?).greedy()),
            None => Err(Error::Parameter(format!("unknown estimator `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    pub permutation: Permutation,
    /// Estimator-specific objective at the returned permutation.
    pub objective: f64,
    /// LAP solves for search estimators, ascent steps for iterative ones.
    pub iterations: usize,
    pub best_q: Option<OrthogonalMatrix>,
    /// Objective after each ascent step of the best run (iterative
    /// estimators only).
    pub history: Vec<f64>,
}

impl EstimateResult {
    fn from_assignment(a: Assignment, iterations: usize, best_q: Option<OrthogonalMatrix>) -> Self {
        Self {
            permutation: a.permutation,
            objective: a.objective,
            iterations,
            best_q,
            history: Vec::new(),
        }
    }
}

/// Eigenvalues (descending) and unit eigenvectors of one side.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl Spectrum {
    /// `U Λ^{1/2}` with negative eigenvalues clipped.
    pub fn factor(&self) -> Matrix {
        let mut f = self.vectors.clone();
        for (mut col, &l) in f.column_iter_mut().zip(&self.values) {
            col *= l.max(0.0).sqrt();
        }
        f
    }
}

/// Rank-`d` factors of a dot-product observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Factors {
    /// `A^{1/2}`, n × d.
    pub a: Matrix,
    /// `B^{1/2}`, n × d.
    pub b: Matrix,
    pub spectrum_a: Spectrum,
    pub spectrum_b: Spectrum,
}

impl Factors {
    pub fn from_observation(obs: &Observation, d: usize) -> Result<Self> {
        obs.require(ModelKind::DotProduct)?;
        if d < 1 {
            return Err(Error::Parameter("rank must be ≥ 1".into()));
        }
        let (va, ua) = top_eigenpairs(&obs.left, d)?;
        let (vb, ub) = top_eigenpairs(&obs.right, d)?;
        let spectrum_a = Spectrum { values: va, vectors: ua };
        let spectrum_b = Spectrum { values: vb, vectors: ub };
        Ok(Self {
            a: spectrum_a.factor(),
            b: spectrum_b.factor(),
            spectrum_a,
            spectrum_b,
        })
    }

    /// Factors given directly, e.g. `X` and `Y` themselves.
    pub fn from_matrices(a: Matrix, b: Matrix) -> Result<Self> {
        if a.shape() != b.shape() {
            return Err(Error::Dimension("factor shapes differ".into()));
        }
        let spectrum = |m: &Matrix| -> Result<Spectrum> {
            let (values, vectors) = top_eigenpairs(&(m * m.transpose()), m.ncols())?;
            Ok(Spectrum { values, vectors })
        };
        Ok(Self {
            spectrum_a: spectrum(&a)?,
            spectrum_b: spectrum(&b)?,
            a,
            b,
        })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn d(&self) -> usize {
        self.a.ncols()
    }

    /// `W[i][j] = ⟨(B^{1/2})_i, (A^{1/2} Q)_j⟩`, so that
    /// `Σ_i W[i][π(i)] = ⟨B^{1/2}, Π A^{1/2} Q⟩`.
    pub fn weights(&self, q: &Matrix) -> Matrix {
        &self.b * (&self.a * q).transpose()
    }

    /// `M(π) = (A^{1/2})ᵀ Πᵀ B^{1/2}`, the d × d matrix whose nuclear norm
    /// is the approximate-MLE objective.
    pub fn cross(&self, pi: &Permutation) -> Matrix {
        let d = self.d();
        let mut m = Matrix::zeros(d, d);
        for i in 0..self.n() {
            let ra = self.a.row(pi.apply(i));
            let rb = self.b.row(i);
            for r in 0..d {
                for c in 0..d {
                    m[(r, c)] += ra[r] * rb[c];
                }
            }
        }
        m
    }
}

/// Index of the best `(objective, index)` pair: largest objective, ties to
/// the smallest index.
pub(crate) fn argmax_by_objective(objectives: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in objectives.iter().enumerate() {
        match best {
            Some(b) if v <= objectives[b] => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Doubly centers both distance matrices and runs `inner` on the resulting
/// centered Gram pair.
pub fn estimate_distance<R: Rng + ?Sized>(
    obs: &Observation,
    inner: &EstimatorConfig,
    d: usize,
    rng: &mut R,
) -> Result<EstimateResult> {
    obs.require(ModelKind::Distance)?;
    if !DISTANCE_INNER_KINDS.contains(&inner.kind) {
        return Err(Error::Contract(format!(
            "{} cannot run on centered distance data",
            inner.kind
        )));
    }
    let centered = center_distance_observation(obs)?;
    run_on_gram(&centered, inner, d, None, rng)
}

/// The dot-product observation `(Ã, B̃)` obtained by double centering.
pub fn center_distance_observation(obs: &Observation) -> Result<Observation> {
    obs.require(ModelKind::Distance)?;
    Observation::new(
        ModelKind::DotProduct,
        double_center(&obs.left)?,
        double_center(&obs.right)?,
    )
}

/// Runs the configured estimator on any supported observation.
///
/// `d` is the latent dimension; `sigma` is only consulted by `haar_mle`.
pub fn estimate<R: Rng + ?Sized>(
    obs: &Observation,
    cfg: &EstimatorConfig,
    d: usize,
    sigma: Option<f64>,
    rng: &mut R,
) -> Result<EstimateResult> {
    cfg.validate()?;
    if !cfg.kind.supports(obs.model) {
        return Err(Error::Contract(format!(
            "{} does not run on {} observations",
            cfg.kind, obs.model
        )));
    }
    match obs.model {
        ModelKind::LinearAssignment => mle_linear_with(obs, cfg.matcher),
        ModelKind::Distance => estimate_distance(obs, cfg, d, rng),
        ModelKind::DotProduct => run_on_gram(obs, cfg, d, sigma, rng),
    }
}

fn run_on_gram<R: Rng + ?Sized>(
    obs: &Observation,
    cfg: &EstimatorConfig,
    d: usize,
    sigma: Option<f64>,
    rng: &mut R,
) -> Result<EstimateResult> {
    match cfg.kind {
        EstimatorKind::Grampa => return grampa(obs, cfg.eta, cfg.matcher),
        EstimatorKind::Degree => return degree_match(obs),
        EstimatorKind::MleLinear => {
            return Err(Error::Contract("mle_linear needs the raw point clouds".into()))
        }
        _ => {}
    }
    let f = Factors::from_observation(obs, d)?;
    match cfg.kind {
        EstimatorKind::AmlGrid2d => aml_grid2d(&f, cfg.grid_size, cfg.matcher),
        EstimatorKind::AmlSignflip => aml_signflip(&f, cfg.matcher),
        EstimatorKind::Umeyama => umeyama(&f, cfg.matcher),
        EstimatorKind::Alternating => alternating_procrustes(
            &f,
            None,
            &AlternatingOptions {
                max_iter: cfg.max_iter,
                restarts: cfg.restarts,
                matcher: cfg.matcher,
            },
            rng,
        ),
        EstimatorKind::QapFrobenius => qap_frobenius(
            &f,
            None,
            &AlternatingOptions {
                max_iter: cfg.max_iter,
                restarts: cfg.restarts,
                matcher: cfg.matcher,
            },
            rng,
        ),
        EstimatorKind::HaarMle => {
            let sigma = sigma.ok_or_else(|| {
                Error::Parameter("haar_mle needs the noise level sigma".into())
            })?;
            haar_mle(&f, sigma, cfg.mc_samples, rng)
        }
        EstimatorKind::Grampa | EstimatorKind::Degree | EstimatorKind::MleLinear => unreachable!(),
    }
}
