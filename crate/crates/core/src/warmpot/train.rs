use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{alpha_schedule, training_cost, warmpot_step, Batch, ModelParams, TrainConfig};
use crate::error::{Error, Result};
use crate::measures::PdaDataset;
use crate::pot::entropic_partial_ot;
use crate::weights::{normalized_source_weights, scheme_arpm, scheme_ba3us, Scheme, WeightVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub alpha: f64,
    pub objective: f64,
    pub weighted_loss: f64,
    pub alignment: f64,
    pub plan_mass: f64,
    pub converged: bool,
    pub solver_iterations: usize,
    /// Share of the batch source-loss weight on classes absent from the
    /// target; needs hidden target labels.
    pub outlier_share: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub params: ModelParams,
    pub trace: Vec<TraceRow>,
    /// Source weights of the trained model over the whole source set.
    pub final_weights: WeightVector,
    /// `final_weights` mapped into `[0, 1]`.
    pub normalized_weights: Vec<f64>,
    pub target_accuracy: Option<f64>,
    pub outlier_share: Option<f64>,
}

pub fn evaluate_accuracy(params: &ModelParams, inputs: &[Vec<f64>], labels: &[f64]) -> f64 {
    let hits = inputs.iter().zip(labels).filter(|(x, &y)| params.predict(x) as f64 == y).count();
    hits as f64 / inputs.len().max(1) as f64
}

fn class_labels(data: &PdaDataset) -> Result<Vec<usize>> {
    data.source
        .iter()
        .map(|s| s.class().ok_or_else(|| Error::Dataset(format!("source label {} is not a class id", s.y))))
        .collect()
}

fn outlier_classes(data: &PdaDataset, classes: usize) -> Option<Vec<bool>> {
    let hidden = data.target_labels_hidden.as_ref()?;
    let mut present = vec![false; classes];
    for &y in hidden {
        if let Some(c) = crate::measures::class_of(y).filter(|&c| c < classes) {
            present[c] = true;
        }
    }
    Some(present.into_iter().map(|p| !p).collect())
}

fn share(weights: &[f64], labels: &[usize], outlier: &[bool]) -> f64 {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    weights.iter().zip(labels).filter(|(_, &y)| outlier[y]).map(|(w, _)| w).sum::<f64>() / total
}

/// WARMPOT source weights `p̂` of the full source set: row sums of the
/// entropic plan at `α_max` with the training cost of the given parameters.
pub fn full_data_weights(params: &ModelParams, data: &PdaDataset, cfg: &TrainConfig) -> Result<WeightVector> {
    let batch = Batch::new(data.source_inputs(), class_labels(data)?, data.target_inputs.clone())?;
    let cost = training_cost(params, &batch, cfg.eta1, cfg.eta2)?;
    let (n_s, n_t) = cost.dim();
    let a = vec![1.0 / (cfg.beta * n_s as f64); n_s];
    let b = vec![1.0 / n_t as f64; n_t];
    let alpha = cfg.alpha_max.min(1.0);
    let res = entropic_partial_ot(&a, &b, &cost, alpha, &cfg.solver())?;
    Ok(WeightVector { values: res.plan.row_sums(), normalizer: alpha, scheme: Scheme::Warmpot })
}

/// Full-data source weights of `cfg.scheme` for the given parameters.
pub fn scheme_weights(params: &ModelParams, data: &PdaDataset, cfg: &TrainConfig) -> Result<WeightVector> {
    match cfg.scheme {
        Scheme::Warmpot => full_data_weights(params, data, cfg),
        Scheme::Uniform => crate::weights::scheme_uniform(data.n_source()),
        Scheme::Ba3us => {
            let preds: Vec<f64> = data.target_inputs.iter().map(|x| params.predict(x) as f64).collect();
            scheme_ba3us(&preds, &data.source_labels())
        }
        Scheme::Arpm => {
            let sf: Vec<Vec<f64>> = data.source.iter().map(|s| params.features(&s.x)).collect();
            let tf: Vec<Vec<f64>> = data.target_inputs.iter().map(|x| params.features(x)).collect();
            scheme_arpm(&sf, &tf, &cfg.arpm)
        }
    }
}

/// Runs `total_iters` WARMPOT steps on minibatches drawn without replacement
/// (per iteration) from a ChaCha8 stream seeded by `cfg.seed`. Under the
/// WARMPOT scheme the source-loss weights are the plan's row sums on every
/// minibatch; the other schemes recompute full-data weights every
/// `weight_update_interval` iterations and rescale the batch slice to the
/// plan mass. The trace is a deterministic function of data and config.
pub fn train(data: &PdaDataset, cfg: &TrainConfig) -> Result<TrainResult> {
    cfg.validate()?;
    let labels = class_labels(data)?;
    let classes = data.num_classes().max(1);
    let d = data.input_dim();
    let k = cfg.feature_dim.unwrap_or(d);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = ModelParams::init(d, k, classes, &mut rng);
    let outlier = outlier_classes(data, classes);
    let (n_s, n_t) = (data.n_source(), data.n_target());
    let (b_s, b_t) = (cfg.batch_size.min(n_s), cfg.batch_size.min(n_t));

    let mut global: Option<WeightVector> = None;
    let mut trace = Vec::with_capacity(cfg.total_iters);
    for iter in 0..cfg.total_iters {
        let si = sample(&mut rng, n_s, b_s).into_vec();
        let ti = sample(&mut rng, n_t, b_t).into_vec();
        let batch = Batch {
            source_x: si.iter().map(|&i| data.source[i].x.clone()).collect(),
            source_y: si.iter().map(|&i| labels[i]).collect(),
            target_x: ti.iter().map(|&j| data.target_inputs[j].clone()).collect(),
        };
        let alpha = alpha_schedule(iter, cfg);
        let step = if cfg.scheme == Scheme::Warmpot {
            warmpot_step(&params, &batch, alpha, cfg, None)?
        } else {
            if iter % cfg.weight_update_interval == 0 {
                global = Some(scheme_weights(&params, data, cfg)?);
            }
            let g = global.as_ref().expect("weights computed at iteration 0");
            let mass = alpha.min(1.0 / cfg.beta).min(1.0);
            let mut w: Vec<f64> = si.iter().map(|&i| g.values[i]).collect();
            let total: f64 = w.iter().sum();
            if total > 0.0 {
                w.iter_mut().for_each(|v| *v *= mass / total);
            } else {
                w.iter_mut().for_each(|v| *v = mass / b_s as f64);
            }
            warmpot_step(&params, &batch, alpha, cfg, Some(&w))?
        };
        let obj = &step.objective;
        trace.push(TraceRow {
            iter,
            alpha: obj.alpha,
            objective: obj.value,
            weighted_loss: obj.weighted_loss,
            alignment: obj.alignment,
            plan_mass: obj.plan.total_mass(),
            converged: obj.converged,
            solver_iterations: obj.solver_iterations,
            outlier_share: outlier.as_ref().map(|o| share(&step.loss_weights, &batch.source_y, o)),
        });
        params = step.params;
        if !params.is_finite() {
            return Err(Error::NonFiniteGradient {
                block: "params",
                detail: format!("non-finite parameters after iteration {iter}"),
            });
        }
    }

    let final_weights = scheme_weights(&params, data, cfg)?;
    let normalized_weights = unit_scaled_weights(&final_weights, cfg.beta)?;
    let target_accuracy =
        data.target_labels_hidden.as_ref().map(|h| evaluate_accuracy(&params, &data.target_inputs, h));
    let outlier_share = outlier.as_ref().map(|o| share(&final_weights.values, &labels, o));
    Ok(TrainResult { params, trace, final_weights, normalized_weights, target_accuracy, outlier_share })
}

/// Weights mapped into `[0, 1]`: WARMPOT weights divided by their cap
/// `1/(β n_s)`, other schemes divided by their maximum.
pub fn unit_scaled_weights(weights: &WeightVector, beta: f64) -> Result<Vec<f64>> {
    if weights.scheme == Scheme::Warmpot {
        return Ok(normalized_source_weights(weights, beta, weights.len())?.values);
    }
    let max = weights.values.iter().fold(0.0f64, |m, v| m.max(*v));
    Ok(weights.values.iter().map(|v| if max > 0.0 { v / max } else { 0.0 }).collect())
}

/// Share of the total weight on source classes absent from the hidden
/// target labels; `None` without hidden labels.
pub fn outlier_share(weights: &[f64], data: &PdaDataset) -> Result<Option<f64>> {
    let labels = class_labels(data)?;
    let classes = data.num_classes().max(1);
    Ok(outlier_classes(data, classes).map(|o| share(weights, &labels, &o)))
}

pub fn write_trace_csv(trace: &[TraceRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in trace {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
