//! Synthetic partial domain adaptation tasks, the weighting-scheme ablation,
//! the outlier-weight diagnostic and the `α_max`/`β` sensitivity sweep.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::measures::{LabeledSample, PdaDataset};
use crate::warmpot::{train, TrainConfig};
use crate::weights::{histogram, Scheme, WeightVector, HISTOGRAM_BINS};

/// Gaussian class blobs; the target draws only the first `shared` classes
/// and is translated by `shift` along a seed-dependent unit direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub classes: usize,
    pub shared: usize,
    pub d: usize,
    pub n_s: usize,
    pub n_t: usize,
    pub separation: f64,
    pub noise: f64,
    pub shift: f64,
    pub seed: u64,
}

impl TaskSpec {
    /// `K = 5`, 3 shared classes, separation `4 × noise`.
    pub fn standard() -> Self {
        Self { classes: 5, shared: 3, d: 2, n_s: 250, n_t: 150, separation: 4.0, noise: 1.0, shift: 1.0, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.shared == 0 || self.shared > self.classes {
            return Err(invalid("shared", format!("must lie in 1..={}, got {}", self.classes, self.shared)));
        }
        if self.d == 0 {
            return Err(invalid("d", "must be positive"));
        }
        if self.n_s < self.classes {
            return Err(invalid("n_s", format!("need at least one sample per class, got {}", self.n_s)));
        }
        if self.n_t < self.shared {
            return Err(invalid("n_t", format!("need at least one sample per shared class, got {}", self.n_t)));
        }
        if !(self.separation > 0.0) || !self.separation.is_finite() {
            return Err(invalid("separation", format!("must be positive, got {}", self.separation)));
        }
        if !(self.noise > 0.0) || !self.noise.is_finite() {
            return Err(invalid("noise", format!("must be positive, got {}", self.noise)));
        }
        if !(self.shift >= 0.0) || !self.shift.is_finite() {
            return Err(invalid("shift", format!("must be nonnegative, got {}", self.shift)));
        }
        Ok(())
    }

    /// Fraction of source samples from classes absent in the target.
    pub fn outlier_sample_share(&self) -> f64 {
        (0..self.n_s).filter(|i| i % self.classes >= self.shared).count() as f64 / self.n_s as f64
    }
}

/// Training preset for the synthetic ablation: the default cost weights with a
/// shorter schedule and a larger step size for the linear model.
pub fn bench_config() -> TrainConfig {
    TrainConfig { total_iters: 500, ramp_iters: 250, lr: 0.02, ..TrainConfig::default() }
}

/// Class centers with every pair at least `separation` apart: a regular
/// polygon with side `separation` in the first two coordinates, or evenly
/// spaced points on a line when `d = 1`.
pub fn class_centers(spec: &TaskSpec) -> Vec<Vec<f64>> {
    let k = spec.classes;
    (0..k)
        .map(|c| {
            let mut v = vec![0.0; spec.d];
            if spec.d == 1 || k <= 2 {
                v[0] = c as f64 * spec.separation;
            } else {
                let radius = spec.separation / (2.0 * (std::f64::consts::PI / k as f64).sin());
                let angle = 2.0 * std::f64::consts::PI * c as f64 / k as f64;
                v[0] = radius * angle.cos();
                v[1] = radius * angle.sin();
            }
            v
        })
        .collect()
}

/// Source labels cycle through all `K` classes, target labels through the
/// first `shared`; the hidden target labels are attached.
pub fn generate_pda_task(spec: &TaskSpec) -> Result<PdaDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let centers = class_centers(spec);
    let mut gauss = move || -> f64 { StandardNormal.sample(&mut rng) };
    let mut dir: Vec<f64> = (0..spec.d).map(|_| gauss()).collect();
    let n = crate::measures::norm(&dir).max(1e-12);
    dir.iter_mut().for_each(|v| *v *= spec.shift / n);

    let mut draw = |c: usize, offset: &[f64]| -> Vec<f64> {
        centers[c].iter().zip(offset).map(|(m, o)| m + o + spec.noise * gauss()).collect()
    };
    let zero = vec![0.0; spec.d];
    let source = (0..spec.n_s)
        .map(|i| {
            let c = i % spec.classes;
            LabeledSample::new(draw(c, &zero), c as f64)
        })
        .collect();
    let mut target = Vec::with_capacity(spec.n_t);
    let mut hidden = Vec::with_capacity(spec.n_t);
    for j in 0..spec.n_t {
        let c = j % spec.shared;
        target.push(draw(c, &dir));
        hidden.push(c as f64);
    }
    PdaDataset::new(source, target, Some(hidden))
}

/// `Σ_{i: y_i ≥ shared} w_i / Σ_i w_i`.
pub fn outlier_weight_share(weights: &WeightVector, source_labels: &[f64], shared: usize) -> Result<f64> {
    if weights.len() != source_labels.len() {
        return Err(Error::DimensionMismatch { expected: source_labels.len(), got: weights.len() });
    }
    let total = weights.total();
    if !(total > 0.0) {
        return Err(Error::ZeroWeight);
    }
    let outlier: f64 =
        weights.values.iter().zip(source_labels).filter(|(_, &y)| y >= shared as f64).map(|(w, _)| w).sum();
    Ok(outlier / total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub accuracy: Option<f64>,
    pub outlier_share: Option<f64>,
    pub histogram: Vec<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeSummary {
    pub scheme: Scheme,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub mean_outlier_share: f64,
    pub runs: Vec<SeedRun>,
}

impl SchemeSummary {
    pub fn accuracies(&self) -> Vec<f64> {
        self.runs.iter().filter_map(|r| r.accuracy).collect()
    }

    pub fn failures(&self) -> usize {
        self.runs.iter().filter(|r| r.error.is_some()).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub outlier_sample_share: f64,
    pub schemes: Vec<SchemeSummary>,
}

impl BenchResult {
    pub fn scheme(&self, s: Scheme) -> Option<&SchemeSummary> {
        self.schemes.iter().find(|x| x.scheme == s)
    }
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn run_cell(spec: &TaskSpec, cfg: &TrainConfig, scheme: Scheme, seed: u64) -> SeedRun {
    let outcome = generate_pda_task(&TaskSpec { seed, ..spec.clone() })
        .and_then(|data| train(&data, &TrainConfig { seed, scheme, ..cfg.clone() }));
    match outcome {
        Ok(r) => SeedRun {
            seed,
            accuracy: r.target_accuracy,
            outlier_share: r.outlier_share,
            histogram: histogram(&r.normalized_weights, HISTOGRAM_BINS),
            error: None,
        },
        Err(e) => SeedRun { seed, accuracy: None, outlier_share: None, histogram: vec![], error: Some(e.to_string()) },
    }
}

/// Trains one model per `(scheme, seed)`: the task and the initialization
/// are drawn from the seed, so runs are paired across schemes. Failed cells
/// are kept with their error message.
pub fn compare_schemes(spec: &TaskSpec, cfg: &TrainConfig, schemes: &[Scheme], seeds: &[u64]) -> Result<BenchResult> {
    spec.validate()?;
    cfg.validate()?;
    if schemes.is_empty() || seeds.is_empty() {
        return Err(invalid("seeds", "need at least one scheme and one seed"));
    }
    let cells: Vec<(Scheme, u64)> = schemes.iter().flat_map(|&s| seeds.iter().map(move |&seed| (s, seed))).collect();
    let runs: Vec<SeedRun> = cells.par_iter().map(|&(s, seed)| run_cell(spec, cfg, s, seed)).collect();
    let schemes = schemes
        .iter()
        .enumerate()
        .map(|(k, &scheme)| {
            let runs = runs[k * seeds.len()..(k + 1) * seeds.len()].to_vec();
            let acc: Vec<f64> = runs.iter().filter_map(|r| r.accuracy).collect();
            let shares: Vec<f64> = runs.iter().filter_map(|r| r.outlier_share).collect();
            let (mean_accuracy, std_accuracy) = mean_std(&acc);
            SchemeSummary { scheme, mean_accuracy, std_accuracy, mean_outlier_share: mean_std(&shares).0, runs }
        })
        .collect();
    Ok(BenchResult { outlier_sample_share: spec.outlier_sample_share(), schemes })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    AlphaMax,
    Beta,
}

impl std::str::FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alpha_max" => Ok(Self::AlphaMax),
            "beta" => Ok(Self::Beta),
            other => Err(invalid("param", format!("unknown sweep parameter `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
}

/// One WARMPOT train/evaluate per grid value and seed with everything else fixed.
pub fn sensitivity_sweep(
    spec: &TaskSpec,
    cfg: &TrainConfig,
    param: SweepParam,
    grid: &[f64],
    seeds: &[u64],
) -> Result<Vec<SweepRow>> {
    if grid.iter().any(|&v| !(v > 0.0 && v <= 1.0)) {
        return Err(invalid("grid", "values must lie in (0, 1]"));
    }
    grid.iter()
        .map(|&value| {
            let cfg = match param {
                SweepParam::AlphaMax => TrainConfig { alpha_max: value, ..cfg.clone() },
                SweepParam::Beta => TrainConfig { beta: value, ..cfg.clone() },
            };
            let bench = compare_schemes(spec, &cfg, &[Scheme::Warmpot], seeds)?;
            let s = &bench.schemes[0];
            if let Some(err) = s.runs.iter().find_map(|r| r.error.clone()) {
                return Err(Error::Solver(err));
            }
            Ok(SweepRow { value, mean_accuracy: s.mean_accuracy, std_accuracy: s.std_accuracy })
        })
        .collect()
}

/// `scheme,seed,accuracy,outlier_share,error` rows.
pub fn write_results_csv(bench: &BenchResult, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["scheme", "seed", "accuracy", "outlier_share", "error"])?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for s in &bench.schemes {
        for r in &s.runs {
            w.write_record([
                s.scheme.name().to_string(),
                r.seed.to_string(),
                opt(r.accuracy),
                opt(r.outlier_share),
                r.error.clone().unwrap_or_default(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `scheme,seed,bin_lo,bin_hi,count` rows.
pub fn write_histogram_csv(bench: &BenchResult, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["scheme", "seed", "bin_lo", "bin_hi", "count"])?;
    for s in &bench.schemes {
        for r in &s.runs {
            let bins = r.histogram.len();
            for (b, c) in r.histogram.iter().enumerate() {
                w.write_record([
                    s.scheme.name().to_string(),
                    r.seed.to_string(),
                    (b as f64 / bins as f64).to_string(),
                    ((b + 1) as f64 / bins as f64).to_string(),
                    c.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep_csv(param: SweepParam, rows: &[SweepRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let name = match param {
        SweepParam::AlphaMax => "alpha_max",
        SweepParam::Beta => "beta",
    };
    w.write_record(["param", "value", "mean_accuracy", "std_accuracy"])?;
    for r in rows {
        w.write_record([
            name.to_string(),
            r.value.to_string(),
            r.mean_accuracy.to_string(),
            r.std_accuracy.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
