//! WARMPOT: weighted source cross-entropy plus a partial-OT alignment term
//! on a linear feature map and a linear-softmax classifier, trained by
//! minibatch SGD with the transport plan frozen during each gradient step.

mod train;

pub use train::{
    evaluate_accuracy, full_data_weights, outlier_share, scheme_weights, train, unit_scaled_weights, write_trace_csv,
    TraceRow, TrainResult,
};

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::measures::{cross_entropy, distance, softmax};
use crate::pot::{entropic_partial_ot, SolverConfig, TransportPlan};
use crate::weights::{ArpmConfig, Scheme, WeightVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub alpha_max: f64,
    pub ramp_iters: usize,
    pub total_iters: usize,
    pub beta: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub eps: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub solver_max_iter: usize,
    pub solver_tol: f64,
    /// Feature dimension `k`; the input dimension when `None`.
    pub feature_dim: Option<usize>,
    /// Source-loss weighting; the alignment term is the same for every scheme.
    pub scheme: Scheme,
    /// Iterations between recomputations of the uniform/BA³US/ARPM weights.
    /// WARMPOT weights are recomputed on every minibatch.
    pub weight_update_interval: usize,
    pub arpm: ArpmConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            alpha_max: 0.8,
            ramp_iters: 2500,
            total_iters: 5000,
            beta: 0.35,
            eta1: 0.125,
            eta2: 1.75,
            eps: 7.0,
            lr: 0.001,
            batch_size: 65,
            seed: 0,
            solver_max_iter: 5000,
            solver_tol: 1e-9,
            feature_dim: None,
            scheme: Scheme::Warmpot,
            weight_update_interval: 100,
            arpm: ArpmConfig::default(),
        }
    }
}

impl TrainConfig {
    /// Large-scale preset: `α_max = 0.08, η1 = 0.92, η2 = 5.47, β = 0.72, ε = 5.59`.
    pub fn imagenet_caltech_like() -> Self {
        Self { alpha_max: 0.08, eta1: 0.92, eta2: 5.47, beta: 0.72, eps: 5.59, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name, v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(invalid(name, format!("must lie in (0, 1], got {v}")))
            }
        };
        unit("alpha_max", self.alpha_max)?;
        unit("beta", self.beta)?;
        if self.total_iters == 0 || self.ramp_iters == 0 {
            return Err(invalid("total_iters", "iteration counts must be positive"));
        }
        if self.ramp_iters > self.total_iters {
            return Err(invalid("ramp_iters", format!("{} exceeds total_iters {}", self.ramp_iters, self.total_iters)));
        }
        if !(self.eta1 >= 0.0) || !self.eta1.is_finite() {
            return Err(invalid("eta1", format!("must be nonnegative, got {}", self.eta1)));
        }
        if !(self.eta2 >= 0.0) || !self.eta2.is_finite() {
            return Err(invalid("eta2", format!("must be nonnegative, got {}", self.eta2)));
        }
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return Err(invalid("lr", format!("must be nonnegative, got {}", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch_size", "must be positive"));
        }
        if self.weight_update_interval == 0 {
            return Err(invalid("weight_update_interval", "must be positive"));
        }
        if self.feature_dim == Some(0) {
            return Err(invalid("feature_dim", "must be positive"));
        }
        self.solver().validate()
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig { eps: self.eps, max_iter: self.solver_max_iter, tol: self.solver_tol }
    }
}

/// `0.01 + (α_max − 0.01)·min(iter/ramp, 1)`.
pub fn alpha_schedule(iter: usize, cfg: &TrainConfig) -> f64 {
    let t = (iter as f64 / cfg.ramp_iters as f64).min(1.0);
    0.01 + (cfg.alpha_max - 0.01) * t
}

/// Linear feature map `f(x) = W_f x` and classifier logits `W_g f + bias`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub wf: Array2<f64>,
    pub wg: Array2<f64>,
    pub bias: Vec<f64>,
}

impl ModelParams {
    pub fn init(d: usize, k: usize, classes: usize, rng: &mut impl Rng) -> Self {
        let nf = Normal::new(0.0, 1.0 / (d as f64).sqrt()).expect("valid normal");
        let ng = Normal::new(0.0, 0.1 / (k as f64).sqrt()).expect("valid normal");
        let wf = Array2::from_shape_fn((k, d), |_| nf.sample(rng));
        let wg = Array2::from_shape_fn((classes, k), |_| ng.sample(rng));
        Self { wf, wg, bias: vec![0.0; classes] }
    }

    pub fn classes(&self) -> usize {
        self.bias.len()
    }

    pub fn features(&self, x: &[f64]) -> Vec<f64> {
        self.wf.rows().into_iter().map(|r| r.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn logits_of_features(&self, f: &[f64]) -> Vec<f64> {
        self.wg
            .rows()
            .into_iter()
            .zip(&self.bias)
            .map(|(r, b)| r.iter().zip(f).map(|(a, b)| a * b).sum::<f64>() + b)
            .collect()
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.logits_of_features(&self.features(x))
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        crate::measures::argmax(&self.logits(x))
    }

    pub fn is_finite(&self) -> bool {
        self.wf.iter().chain(self.wg.iter()).chain(&self.bias).all(|v| v.is_finite())
    }
}

/// Gradient with the same layout as [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub wf: Array2<f64>,
    pub wg: Array2<f64>,
    pub bias: Vec<f64>,
}

impl Gradient {
    fn check_finite(&self) -> Result<()> {
        for (block, values) in [
            ("wf", self.wf.iter().collect::<Vec<_>>()),
            ("wg", self.wg.iter().collect()),
            ("bias", self.bias.iter().collect()),
        ] {
            if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient {
                    block,
                    detail: format!("entry {pos} is {} ({} entries)", values[pos], values.len()),
                });
            }
        }
        Ok(())
    }
}

/// Labeled source and unlabeled target inputs of one minibatch.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub source_x: Vec<Vec<f64>>,
    pub source_y: Vec<usize>,
    pub target_x: Vec<Vec<f64>>,
}

impl Batch {
    pub fn new(source_x: Vec<Vec<f64>>, source_y: Vec<usize>, target_x: Vec<Vec<f64>>) -> Result<Self> {
        if source_x.is_empty() || target_x.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        if source_y.len() != source_x.len() {
            return Err(Error::DimensionMismatch { expected: source_x.len(), got: source_y.len() });
        }
        Ok(Self { source_x, source_y, target_x })
    }
}

struct Forward {
    sf: Vec<Vec<f64>>,
    tf: Vec<Vec<f64>>,
    s_logits: Vec<Vec<f64>>,
    t_logits: Vec<Vec<f64>>,
}

fn forward(params: &ModelParams, batch: &Batch) -> Result<Forward> {
    let k = params.classes();
    if let Some(&y) = batch.source_y.iter().find(|&&y| y >= k) {
        return Err(invalid("label", format!("class {y} outside the {k}-class head")));
    }
    let d = params.wf.ncols();
    for x in batch.source_x.iter().chain(&batch.target_x) {
        if x.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: x.len() });
        }
    }
    let sf: Vec<Vec<f64>> = batch.source_x.iter().map(|x| params.features(x)).collect();
    let tf: Vec<Vec<f64>> = batch.target_x.iter().map(|x| params.features(x)).collect();
    let s_logits = sf.iter().map(|f| params.logits_of_features(f)).collect();
    let t_logits = tf.iter().map(|f| params.logits_of_features(f)).collect();
    Ok(Forward { sf, tf, s_logits, t_logits })
}

/// `c_ij = η1‖f(x_i) − f(x̃_j)‖ + η2·CE(y_i, softmax(w(x̃_j)))`.
pub fn training_cost(params: &ModelParams, batch: &Batch, eta1: f64, eta2: f64) -> Result<Array2<f64>> {
    let fw = forward(params, batch)?;
    Ok(cost_from_forward(&fw, batch, eta1, eta2))
}

fn cost_from_forward(fw: &Forward, batch: &Batch, eta1: f64, eta2: f64) -> Array2<f64> {
    Array2::from_shape_fn((fw.sf.len(), fw.tf.len()), |(i, j)| {
        let mut c = eta1 * distance(&fw.sf[i], &fw.tf[j]);
        if eta2 != 0.0 {
            c += eta2 * cross_entropy(&fw.t_logits[j], batch.source_y[i]);
        }
        c
    })
}

#[derive(Debug, Clone)]
pub struct ObjectiveResult {
    pub value: f64,
    pub weighted_loss: f64,
    pub alignment: f64,
    /// `CE(w(x_i), y_i)` per source sample.
    pub source_ce: Vec<f64>,
    pub plan: TransportPlan,
    pub p_hat: WeightVector,
    pub cost: Array2<f64>,
    /// The mass actually transported after clamping to the feasible maximum.
    pub alpha: f64,
    pub converged: bool,
    pub solver_iterations: usize,
}

/// Solves the minibatch entropic partial OT between `(1/β)`-scaled uniform
/// source atoms and uniform target atoms and returns
/// `Σ_i p̂_i CE(w(x_i), y_i) + Σ_ij Π_ij c_ij` with `p̂` the plan's row sums.
pub fn warmpot_objective(
    params: &ModelParams,
    batch: &Batch,
    alpha: f64,
    cfg: &TrainConfig,
) -> Result<ObjectiveResult> {
    let fw = forward(params, batch)?;
    let cost = cost_from_forward(&fw, batch, cfg.eta1, cfg.eta2);
    let (n_s, n_t) = cost.dim();
    let a = vec![1.0 / (cfg.beta * n_s as f64); n_s];
    let b = vec![1.0 / n_t as f64; n_t];
    let alpha = alpha.min(1.0 / cfg.beta).min(1.0);
    let res = entropic_partial_ot(&a, &b, &cost, alpha, &cfg.solver())?;
    let p_hat = WeightVector { values: res.plan.row_sums(), normalizer: alpha, scheme: Scheme::Warmpot };
    let source_ce: Vec<f64> = fw.s_logits.iter().zip(&batch.source_y).map(|(s, &y)| cross_entropy(s, y)).collect();
    let weighted_loss = dot(&source_ce, &p_hat.values);
    let alignment = res.plan.cost(&cost);
    Ok(ObjectiveResult {
        value: weighted_loss + alignment,
        weighted_loss,
        alignment,
        source_ce,
        plan: res.plan,
        p_hat,
        cost,
        alpha,
        converged: res.converged,
        solver_iterations: res.iterations,
    })
}

fn weighted_ce(fw: &Forward, batch: &Batch, weights: &[f64]) -> f64 {
    fw.s_logits.iter().zip(&batch.source_y).zip(weights).map(|((s, &y), w)| w * cross_entropy(s, y)).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `Σ_i w_i CE(w(x_i), y_i) + Σ_ij Π_ij c_ij(params)` with `Π` and `w` held fixed.
pub fn fixed_plan_objective(
    params: &ModelParams,
    batch: &Batch,
    plan: &Array2<f64>,
    loss_weights: &[f64],
    eta1: f64,
    eta2: f64,
) -> Result<f64> {
    let fw = forward(params, batch)?;
    let cost = cost_from_forward(&fw, batch, eta1, eta2);
    Ok(weighted_ce(&fw, batch, loss_weights) + (plan * &cost).sum())
}

/// Analytic gradient of [`fixed_plan_objective`] in all parameter blocks.
/// The norm term uses the zero subgradient where `f(x_i) = f(x̃_j)`.
pub fn fixed_plan_gradient(
    params: &ModelParams,
    batch: &Batch,
    plan: &Array2<f64>,
    loss_weights: &[f64],
    eta1: f64,
    eta2: f64,
) -> Result<Gradient> {
    let fw = forward(params, batch)?;
    let (n_s, n_t) = (fw.sf.len(), fw.tf.len());
    if plan.dim() != (n_s, n_t) {
        return Err(Error::DimensionMismatch { expected: n_s * n_t, got: plan.len() });
    }
    if loss_weights.len() != n_s {
        return Err(Error::DimensionMismatch { expected: n_s, got: loss_weights.len() });
    }
    let classes = params.classes();
    let k = params.wf.nrows();

    // d/d logits
    let mut ds: Vec<Vec<f64>> = Vec::with_capacity(n_s);
    for i in 0..n_s {
        let mut g = softmax(&fw.s_logits[i]);
        g[batch.source_y[i]] -= 1.0;
        g.iter_mut().for_each(|v| *v *= loss_weights[i]);
        ds.push(g);
    }
    let mut dt: Vec<Vec<f64>> = vec![vec![0.0; classes]; n_t];
    if eta2 != 0.0 {
        for j in 0..n_t {
            let prob = softmax(&fw.t_logits[j]);
            let qj: f64 = (0..n_s).map(|i| plan[[i, j]]).sum();
            for c in 0..classes {
                dt[j][c] = eta2 * qj * prob[c];
            }
            for i in 0..n_s {
                dt[j][batch.source_y[i]] -= eta2 * plan[[i, j]];
            }
        }
    }

    // d/d features, classifier part
    let back =
        |g: &[f64]| -> Vec<f64> { (0..k).map(|c| (0..classes).map(|r| params.wg[[r, c]] * g[r]).sum()).collect() };
    let mut dsf: Vec<Vec<f64>> = ds.iter().map(|g| back(g)).collect();
    let mut dtf: Vec<Vec<f64>> = dt.iter().map(|g| back(g)).collect();
    // alignment part
    if eta1 != 0.0 {
        for i in 0..n_s {
            for j in 0..n_t {
                let pij = plan[[i, j]];
                if pij == 0.0 {
                    continue;
                }
                let dist = distance(&fw.sf[i], &fw.tf[j]);
                if dist == 0.0 {
                    continue;
                }
                let scale = eta1 * pij / dist;
                for c in 0..k {
                    let u = scale * (fw.sf[i][c] - fw.tf[j][c]);
                    dsf[i][c] += u;
                    dtf[j][c] -= u;
                }
            }
        }
    }

    let mut wg = Array2::<f64>::zeros((classes, k));
    let mut bias = vec![0.0; classes];
    for (g, f) in ds.iter().zip(&fw.sf).chain(dt.iter().zip(&fw.tf)) {
        for r in 0..classes {
            bias[r] += g[r];
            for c in 0..k {
                wg[[r, c]] += g[r] * f[c];
            }
        }
    }
    let mut wf = Array2::<f64>::zeros(params.wf.dim());
    for (g, x) in dsf.iter().zip(&batch.source_x).chain(dtf.iter().zip(&batch.target_x)) {
        for c in 0..k {
            for (e, xv) in x.iter().enumerate() {
                wf[[c, e]] += g[c] * xv;
            }
        }
    }
    Ok(Gradient { wf, wg, bias })
}

/// Result of one alternating step: the plan solved at the old parameters and
/// the parameters after one gradient step with that plan frozen.
#[derive(Debug, Clone)]
pub struct StepResult {
    pub params: ModelParams,
    pub objective: ObjectiveResult,
    pub loss_weights: Vec<f64>,
}

/// One WARMPOT step. `loss_weights` replaces `p̂` in the source-loss term
/// when given (the alternative weighting schemes); the alignment term is
/// unchanged, and the returned objective is reported with those weights.
pub fn warmpot_step(
    params: &ModelParams,
    batch: &Batch,
    alpha: f64,
    cfg: &TrainConfig,
    loss_weights: Option<&[f64]>,
) -> Result<StepResult> {
    let mut objective = warmpot_objective(params, batch, alpha, cfg)?;
    let weights = match loss_weights {
        Some(w) => {
            if w.len() != batch.source_x.len() {
                return Err(Error::DimensionMismatch { expected: batch.source_x.len(), got: w.len() });
            }
            objective.weighted_loss = dot(&objective.source_ce, w);
            objective.value = objective.weighted_loss + objective.alignment;
            w.to_vec()
        }
        None => objective.p_hat.values.clone(),
    };
    let grad = fixed_plan_gradient(params, batch, &objective.plan.matrix, &weights, cfg.eta1, cfg.eta2)?;
    grad.check_finite()?;
    let mut next = params.clone();
    if cfg.lr != 0.0 {
        next.wf.scaled_add(-cfg.lr, &grad.wf);
        next.wg.scaled_add(-cfg.lr, &grad.wg);
        next.bias.iter_mut().zip(&grad.bias).for_each(|(b, g)| *b -= cfg.lr * g);
    }
    Ok(StepResult { params: next, objective, loss_weights: weights })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::feature_cost_matrix;
    use crate::pot::{pw_distance, Method};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_batch(rng: &mut ChaCha8Rng, n_s: usize, n_t: usize, d: usize, classes: usize) -> Batch {
        let mut pt = |shift: f64| -> Vec<f64> { (0..d).map(|_| rng.gen_range(-1.0..1.0) + shift).collect() };
        let sx: Vec<Vec<f64>> = (0..n_s).map(|_| pt(0.0)).collect();
        let tx: Vec<Vec<f64>> = (0..n_t).map(|_| pt(0.3)).collect();
        let sy = (0..n_s).map(|i| i % classes).collect();
        Batch::new(sx, sy, tx).unwrap()
    }

    #[test]
    fn alpha_ramp() {
        let cfg = TrainConfig::default();
        assert_eq!(alpha_schedule(0, &cfg), 0.01);
        assert!((alpha_schedule(2500, &cfg) - 0.8).abs() < 1e-15);
        assert!((alpha_schedule(1250, &cfg) - 0.405).abs() < 1e-15);
        assert!((alpha_schedule(4999, &cfg) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn defaults_and_preset() {
        let c = TrainConfig::default();
        assert_eq!(
            (c.alpha_max, c.beta, c.eta1, c.eta2, c.eps, c.lr, c.batch_size),
            (0.8, 0.35, 0.125, 1.75, 7.0, 0.001, 65)
        );
        assert_eq!((c.ramp_iters, c.total_iters), (2500, 5000));
        let p = TrainConfig::imagenet_caltech_like();
        assert_eq!((p.alpha_max, p.eta1, p.eta2, p.beta, p.eps), (0.08, 0.92, 5.47, 0.72, 5.59));
        assert!(TrainConfig { ramp_iters: 6000, ..c.clone() }.validate().is_err());
        assert!(TrainConfig { beta: 0.0, ..c }.validate().is_err());
    }

    fn fd_check(seed: u64, eta1: f64, eta2: f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let batch = random_batch(&mut rng, 5, 5, 3, 3);
        let params = ModelParams::init(3, 2, 3, &mut rng);
        let plan = Array2::from_shape_fn((5, 5), |_| rng.gen_range(0.0..0.05));
        let weights: Vec<f64> = (0..5).map(|_| rng.gen_range(0.0..0.2)).collect();
        let grad = fixed_plan_gradient(&params, &batch, &plan, &weights, eta1, eta2).unwrap();
        let h = 1e-5;
        let value = |p: &ModelParams| fixed_plan_objective(p, &batch, &plan, &weights, eta1, eta2).unwrap();
        let check = |analytic: f64, bump: &dyn Fn(&mut ModelParams, f64)| {
            let mut plus = params.clone();
            bump(&mut plus, h);
            let mut minus = params.clone();
            bump(&mut minus, -h);
            let fd = (value(&plus) - value(&minus)) / (2.0 * h);
            let rel = (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-6);
            assert!(rel <= 1e-4, "analytic {analytic} vs fd {fd}");
        };
        for ((r, c), &g) in grad.wf.indexed_iter() {
            check(g, &|p, d| p.wf[[r, c]] += d);
        }
        for ((r, c), &g) in grad.wg.indexed_iter() {
            check(g, &|p, d| p.wg[[r, c]] += d);
        }
        for (r, &g) in grad.bias.iter().enumerate() {
            check(g, &|p, d| p.bias[r] += d);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for seed in 0..5 {
            fd_check(seed, 0.125, 1.75);
        }
        fd_check(9, 0.0, 0.0);
        fd_check(10, 1.0, 0.0);
        fd_check(11, 0.0, 3.0);
    }

    #[test]
    fn zero_lr_keeps_params() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let batch = random_batch(&mut rng, 6, 4, 2, 2);
        let params = ModelParams::init(2, 2, 2, &mut rng);
        let cfg = TrainConfig { lr: 0.0, ..Default::default() };
        let r = warmpot_step(&params, &batch, 0.5, &cfg, None).unwrap();
        assert_eq!(r.params, params);
    }

    #[test]
    fn no_alignment_is_weighted_cross_entropy_sgd() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let batch = random_batch(&mut rng, 6, 4, 2, 3);
        let params = ModelParams::init(2, 2, 3, &mut rng);
        let cfg = TrainConfig { eta1: 0.0, eta2: 0.0, lr: 0.1, ..Default::default() };
        let r = warmpot_step(&params, &batch, 0.5, &cfg, None).unwrap();
        // manual weighted CE gradient on bias
        let w = &r.objective.p_hat.values;
        let mut gb = [0.0; 3];
        for (i, x) in batch.source_x.iter().enumerate() {
            let mut p = softmax(&params.logits(x));
            p[batch.source_y[i]] -= 1.0;
            for c in 0..3 {
                gb[c] += w[i] * p[c];
            }
        }
        for c in 0..3 {
            assert!((r.params.bias[c] - (params.bias[c] - 0.1 * gb[c])).abs() < 1e-14);
        }
        assert_eq!(r.objective.alignment, 0.0);
    }

    #[test]
    fn eta2_zero_alignment_is_feature_pw() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let batch = random_batch(&mut rng, 8, 7, 3, 3);
        let params = ModelParams::init(3, 2, 3, &mut rng);
        let cfg = TrainConfig { eta2: 0.0, ..Default::default() };
        let r = warmpot_objective(&params, &batch, 0.6, &cfg).unwrap();
        let sf: Vec<_> = batch.source_x.iter().map(|x| params.features(x)).collect();
        let tf: Vec<_> = batch.target_x.iter().map(|x| params.features(x)).collect();
        let c = feature_cost_matrix(&sf, &tf, cfg.eta1).unwrap().entries;
        let pw =
            pw_distance(&[1.0 / (0.35 * 8.0); 8], &[1.0 / 7.0; 7], &c, 0.6, Method::Entropic(cfg.solver())).unwrap();
        assert!((r.alignment - pw).abs() <= 1e-9);
    }

    #[test]
    fn objective_recomputes_from_plan() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let batch = random_batch(&mut rng, 5, 6, 2, 2);
        let params = ModelParams::init(2, 2, 2, &mut rng);
        let cfg = TrainConfig::default();
        let r = warmpot_objective(&params, &batch, 0.4, &cfg).unwrap();
        let p = r.plan.row_sums();
        let again = fixed_plan_objective(&params, &batch, &r.plan.matrix, &p, cfg.eta1, cfg.eta2).unwrap();
        assert!((again - r.value).abs() < 1e-12);
        assert!(r.plan.max_violation() < 1e-8);
        assert!((r.p_hat.total() - 0.4).abs() < 1e-9);
        assert!(r.p_hat.values.iter().all(|&v| v <= 1.0 / (0.35 * 5.0) + 1e-9));
    }

    #[test]
    fn identical_batches_small_eps_vanish() {
        // one-hot perfect classifier, identical source and target
        let sx = vec![vec![5.0, 0.0], vec![0.0, 5.0]];
        let batch = Batch::new(sx.clone(), vec![0, 1], sx).unwrap();
        let params = ModelParams {
            wf: Array2::eye(2),
            wg: Array2::from_shape_vec((2, 2), vec![20.0, 0.0, 0.0, 20.0]).unwrap(),
            bias: vec![0.0, 0.0],
        };
        let cfg = TrainConfig { eps: 0.05, beta: 1.0, solver_max_iter: 100_000, ..Default::default() };
        let r = warmpot_objective(&params, &batch, 1.0, &cfg).unwrap();
        assert!(r.value < 1e-6, "{}", r.value);
    }

    #[test]
    fn non_finite_gradient_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let batch = random_batch(&mut rng, 3, 3, 2, 2);
        let mut params = ModelParams::init(2, 2, 2, &mut rng);
        params.bias[0] = f64::NAN;
        let cfg = TrainConfig::default();
        let plan = Array2::from_elem((3, 3), 0.01);
        let g = fixed_plan_gradient(&params, &batch, &plan, &[0.1; 3], cfg.eta1, cfg.eta2).unwrap();
        assert!(matches!(g.check_finite(), Err(Error::NonFiniteGradient { .. })));
    }
}
