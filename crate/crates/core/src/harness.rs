//! Seeded σ-sweeps over models and estimators.
//!
//! One [`Instance`] is drawn per `(σ, trial)` and shared by every model and
//! estimator, so curves are paired comparisons. All seeds are derived from
//! `base_seed` by hashing, and records are emitted in a fixed order, so the
//! CSV output does not depend on the worker count.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimators::{estimate, EstimatorConfig, EstimatorKind};
use crate::models::{observe, Instance, ModelKind};
use crate::par;
use crate::permutation::overlap;

pub const CSV_HEADER: [&str; 12] = [
    "model",
    "estimator",
    "n",
    "d",
    "sigma",
    "trial",
    "seed",
    "instance_hash",
    "overlap",
    "objective",
    "runtime_ms",
    "iterations",
];

pub const DEFAULT_SIGMA_POINTS: usize = 15;
pub const DEFAULT_TRIALS: usize = 10;

/// Either an explicit ascending list or a log-spaced range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SigmaGrid {
    List(Vec<f64>),
    LogSpaced { min: f64, max: f64, points: usize },
}

impl SigmaGrid {
    /// `points` values from `0.1·n^{−2/d}` to `10·n^{−1/d}`.
    pub fn default_for(n: usize, d: usize) -> Self {
        let (nf, df) = (n as f64, d as f64);
        SigmaGrid::LogSpaced {
            min: 0.1 * nf.powf(-2.0 / df),
            max: 10.0 * nf.powf(-1.0 / df),
            points: DEFAULT_SIGMA_POINTS,
        }
    }

    pub fn values(&self) -> Result<Vec<f64>> {
        let v = match self {
            SigmaGrid::List(v) => v.clone(),
            &SigmaGrid::LogSpaced { min, max, points } => {
                if points < 1 {
                    return Err(Error::Parameter("sigma grid needs at least one point".into()));
                }
                if !(min > 0.0 && max >= min && max.is_finite()) {
                    return Err(Error::Parameter(format!(
                        "log-spaced sigma grid needs 0 < min ≤ max, got [{min}, {max}]"
                    )));
                }
                if points == 1 {
                    vec![min]
                } else {
                    let (lo, hi) = (min.ln(), max.ln());
                    (0..points)
                        .map(|k| {
                            if k == 0 {
                                min
                            } else if k + 1 == points {
                                max
                            } else {
                                (lo + (hi - lo) * k as f64 / (points - 1) as f64).exp()
                            }
                        })
                        .collect()
                }
            }
        };
        if v.is_empty() {
            return Err(Error::Parameter("sigma grid is empty".into()));
        }
        if v.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::Parameter(format!("sigma values must be > 0: {v:?}")));
        }
        if v.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Parameter(format!("sigma grid must be ascending: {v:?}")));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub n: usize,
    pub d: usize,
    #[serde(default = "all_models")]
    pub models: Vec<ModelKind>,
    /// Names such as `"aml_grid2d_greedy"` or full estimator objects.
    #[serde(deserialize_with = "estimator_list")]
    pub estimators: Vec<EstimatorConfig>,
    /// Defaults to [`SigmaGrid::default_for`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_grid: Option<SigmaGrid>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
    /// Thread count; 0 uses every available core.
    #[serde(default)]
    pub workers: usize,
    /// Record wall-clock time per run. Off by default so that reruns are
    /// byte-identical.
    #[serde(default)]
    pub record_runtime: bool,
}

fn all_models() -> Vec<ModelKind> {
    ModelKind::ALL.to_vec()
}

fn default_trials() -> usize {
    DEFAULT_TRIALS
}

fn estimator_list<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<Vec<EstimatorConfig>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Entry {
        Name(String),
        Full(EstimatorConfig),
    }
    Vec::<Entry>::deserialize(de)?
        .into_iter()
        .map(|e| match e {
            Entry::Name(s) => s.parse().map_err(serde::de::Error::custom),
            Entry::Full(c) => Ok(c),
        })
        .collect()
}

impl SweepConfig {
    pub fn new(n: usize, d: usize, models: Vec<ModelKind>, estimators: Vec<EstimatorConfig>) -> Self {
        Self {
            n,
            d,
            models,
            estimators,
            sigma_grid: None,
            trials: DEFAULT_TRIALS,
            base_seed: 0,
            output_path: None,
            workers: 0,
            record_runtime: false,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn sigmas(&self) -> Result<Vec<f64>> {
        self.sigma_grid
            .clone()
            .unwrap_or_else(|| SigmaGrid::default_for(self.n, self.d))
            .values()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 || self.d < 1 {
            return Err(Error::Parameter(format!(
                "need n ≥ 1 and d ≥ 1, got n = {}, d = {}",
                self.n, self.d
            )));
        }
        if self.trials < 1 {
            return Err(Error::Parameter("trials must be ≥ 1".into()));
        }
        if self.models.is_empty() || self.estimators.is_empty() {
            return Err(Error::Parameter("need at least one model and one estimator".into()));
        }
        for e in &self.estimators {
            e.validate()?;
        }
        let mut names: Vec<String> = self.estimators.iter().map(|e| e.name()).collect();
        names.sort();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Parameter(format!("duplicate estimator name `{}`", w[0])));
        }
        self.sigmas()?;
        Ok(())
    }
}

/// One estimator run on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub model: ModelKind,
    pub estimator: String,
    pub n: usize,
    pub d: usize,
    pub sigma: f64,
    pub trial: usize,
    pub seed: u64,
    pub instance_hash: String,
    /// NaN when the run failed.
    pub overlap: f64,
    /// NaN when the run failed.
    pub objective: f64,
    pub runtime_ms: f64,
    pub iterations: usize,
    #[serde(skip)]
    pub error: Option<String>,
}

impl SweepRecord {
    pub fn is_error(&self) -> bool {
        self.overlap.is_nan()
    }
}

/// Stable 64-bit seed for a labelled `(σ-index, trial)` cell.
pub fn derive_seed(base_seed: u64, label: &str, sigma_index: usize, trial: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(base_seed.to_le_bytes());
    h.update((label.len() as u64).to_le_bytes());
    h.update(label.as_bytes());
    h.update((sigma_index as u64).to_le_bytes());
    h.update((trial as u64).to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

fn instance_seed(base_seed: u64, sigma_index: usize, trial: usize) -> u64 {
    derive_seed(base_seed, "instance", sigma_index, trial)
}

fn run_seed(base_seed: u64, model: ModelKind, estimator: &str, sigma_index: usize, trial: usize) -> u64 {
    derive_seed(base_seed, &format!("{model}/{estimator}"), sigma_index, trial)
}

struct Task<'a> {
    model: ModelKind,
    estimator: &'a EstimatorConfig,
    cell: usize,
}

/// Runs every compatible `(model, estimator, σ, trial)` combination.
///
/// Records are ordered by model, estimator (config order), σ and trial.
/// Estimator failures become rows with NaN overlap and objective.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRecord>> {
    cfg.validate()?;
    let sigmas = cfg.sigmas()?;
    let cells: Vec<(usize, usize)> = (0..sigmas.len())
        .flat_map(|s| (0..cfg.trials).map(move |t| (s, t)))
        .collect();
    par::with_workers(cfg.workers, || {
        let instances: Vec<(Instance, String)> = par::map_slice(&cells, |&(s, t)| {
            let inst = Instance::from_seed(cfg.n, cfg.d, sigmas[s], None, instance_seed(cfg.base_seed, s, t))?;
            let hash = inst.content_hash();
            Ok((inst, hash))
        })
        .into_iter()
        .collect::<Result<_>>()?;

        let mut tasks = Vec::new();
        for &model in &cfg.models {
            for est in &cfg.estimators {
                if !est.kind.supports(model) {
                    log::debug!("skipping {} on {model}", est.name());
                    continue;
                }
                tasks.extend((0..cells.len()).map(|cell| Task { model, estimator: est, cell }));
            }
        }
        Ok(par::map_slice(&tasks, |task| {
            let (s, t) = cells[task.cell];
            let (inst, hash) = &instances[task.cell];
            run_one(cfg, task, inst, hash, sigmas[s], s, t)
        }))
    })
}

fn run_one(
    cfg: &SweepConfig,
    task: &Task<'_>,
    inst: &Instance,
    hash: &str,
    sigma: f64,
    sigma_index: usize,
    trial: usize,
) -> SweepRecord {
    let name = task.estimator.name();
    let seed = run_seed(cfg.base_seed, task.model, &name, sigma_index, trial);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let obs = observe(inst, task.model);
    let start = Instant::now();
    let haar_sigma = (task.estimator.kind == EstimatorKind::HaarMle).then_some(inst.sigma);
    let outcome = estimate(&obs, task.estimator, cfg.d, haar_sigma, &mut rng)
        .and_then(|r| Ok((overlap(&r.permutation, &inst.pi_star)?, r)));
    let runtime_ms = if cfg.record_runtime {
        start.elapsed().as_secs_f64() * 1e3
    } else {
        0.0
    };
    let mut rec = SweepRecord {
        model: task.model,
        estimator: name,
        n: cfg.n,
        d: cfg.d,
        sigma,
        trial,
        seed,
        instance_hash: hash.to_string(),
        overlap: f64::NAN,
        objective: f64::NAN,
        runtime_ms,
        iterations: 0,
        error: None,
    };
    match outcome {
        Ok((ov, r)) => {
            rec.overlap = ov;
            rec.objective = r.objective;
            rec.iterations = r.iterations;
        }
        Err(e) => {
            log::warn!(
                "{} on {} failed at sigma = {sigma}, trial {trial}: {e}",
                rec.estimator,
                rec.model
            );
            rec.error = Some(e.to_string());
        }
    }
    rec
}

/// Writes records as CSV with the [`CSV_HEADER`] columns.
pub fn write_csv<W: Write>(records: &[SweepRecord], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(records: &[SweepRecord], path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_csv(records, std::io::BufWriter::new(std::fs::File::create(path)?))
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<SweepRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(Error::Contract(format!("unexpected CSV header {header:?}")));
    }
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// A sweep whose records were computed but could not be written.
#[derive(Debug, thiserror::Error)]
#[error("writing sweep output failed: {source}")]
pub struct PartialSweep {
    pub records: Vec<SweepRecord>,
    #[source]
    pub source: Error,
}

/// Runs the sweep and writes the CSV to `cfg.output_path` when set.
pub fn run_sweep_to_file(cfg: &SweepConfig) -> Result<Vec<SweepRecord>, PartialSweep> {
    let records = run_sweep(cfg).map_err(|source| PartialSweep { records: Vec::new(), source })?;
    if let Some(path) = &cfg.output_path {
        if let Err(source) = write_csv_file(&records, path) {
            return Err(PartialSweep { records, source });
        }
    }
    Ok(records)
}

/// Aggregate over the trials of one `(model, estimator, σ)` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub model: ModelKind,
    pub estimator: String,
    pub n: usize,
    pub d: usize,
    pub sigma: f64,
    pub runs: usize,
    pub errors: usize,
    pub mean_overlap: f64,
    /// Population standard deviation.
    pub std_overlap: f64,
    pub mean_runtime_ms: f64,
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<18} {:<22} sigma={:<10.4e} overlap={:.4} ± {:.4} ({} runs",
            self.model.as_str(),
            self.estimator,
            self.sigma,
            self.mean_overlap,
            self.std_overlap,
            self.runs
        )?;
        if self.errors > 0 {
            write!(f, ", {} failed", self.errors)?;
        }
        write!(f, ")")
    }
}

/// One row per `(model, estimator, σ)`, ordered by first appearance of
/// `(model, estimator)` and then by σ. Failed runs are counted but excluded
/// from the means.
pub fn summarize(records: &[SweepRecord]) -> Result<Vec<Summary>> {
    if records.is_empty() {
        return Err(Error::Contract("cannot summarize an empty record set".into()));
    }
    let mut groups: Vec<((ModelKind, &str), Vec<(f64, Vec<&SweepRecord>)>)> = Vec::new();
    for r in records {
        let key = (r.model, r.estimator.as_str());
        let pos = match groups.iter().position(|(k, _)| *k == key) {
            Some(p) => p,
            None => {
                groups.push((key, Vec::new()));
                groups.len() - 1
            }
        };
        let cells = &mut groups[pos].1;
        match cells.iter_mut().find(|(s, _)| s.to_bits() == r.sigma.to_bits()) {
            Some((_, v)) => v.push(r),
            None => cells.push((r.sigma, vec![r])),
        }
    }
    let mut out = Vec::new();
    for ((model, estimator), mut cells) in groups {
        cells.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (sigma, rs) in cells {
            let ok: Vec<&SweepRecord> = rs.iter().copied().filter(|r| !r.is_error()).collect();
            let m = ok.len() as f64;
            let mean = ok.iter().map(|r| r.overlap).sum::<f64>() / m;
            let var = ok.iter().map(|r| (r.overlap - mean).powi(2)).sum::<f64>() / m;
            out.push(Summary {
                model,
                estimator: estimator.to_string(),
                n: rs[0].n,
                d: rs[0].d,
                sigma,
                runs: rs.len(),
                errors: rs.len() - ok.len(),
                mean_overlap: mean,
                std_overlap: var.sqrt(),
                mean_runtime_ms: ok.iter().map(|r| r.runtime_ms).sum::<f64>() / m,
            });
        }
    }
    Ok(out)
}

/// Overlap-vs-σ comparison of the linear-assignment and dot-product models:
/// for d = 2 the grid estimator with exact and greedy rounding, otherwise
/// sign flips with exact and greedy rounding plus Umeyama.
pub fn demo_config(n: usize, d: usize) -> SweepConfig {
    let mut estimators = vec![EstimatorConfig::new(EstimatorKind::MleLinear)];
    if d == 2 {
        let grid = EstimatorConfig::new(EstimatorKind::AmlGrid2d);
        estimators.push(grid.clone());
        estimators.push(grid.greedy());
    } else {
        let flips = EstimatorConfig::new(EstimatorKind::AmlSignflip);
        estimators.push(flips.clone());
        estimators.push(flips.greedy());
        estimators.push(EstimatorConfig::new(EstimatorKind::Umeyama));
    }
    SweepConfig::new(
        n,
        d,
        vec![ModelKind::LinearAssignment, ModelKind::DotProduct],
        estimators,
    )
}
