//! Right-hand sides of the feature-based and joint-distribution bounds on the
//! empirical target loss, the pairwise Lipschitz inequality behind them, and
//! the PAC-Bayes wrapper. Classifier sets are finite so every min/max over
//! them is exact.
//!
//! `L_f`, `L̂_f` and `Ξ` need the target labels; they are computed from
//! hidden labels for verification only.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::measures::{
    distance, feature_cost_matrix, joint_cost_matrix, Classifier, FeatureMap, Hypothesis, LipschitzClassifier,
    LossSpec, PdaDataset,
};
use crate::pot::{entropic_partial_ot, exact_partial_ot, Method, TransportPlan};
use crate::weights::{marginal_weights, tv_term};

/// Labeled source and target samples; target labels are the hidden ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundData {
    pub source_x: Vec<Vec<f64>>,
    pub source_y: Vec<f64>,
    pub target_x: Vec<Vec<f64>>,
    pub target_y: Vec<f64>,
}

impl BoundData {
    pub fn new(
        source_x: Vec<Vec<f64>>,
        source_y: Vec<f64>,
        target_x: Vec<Vec<f64>>,
        target_y: Vec<f64>,
    ) -> Result<Self> {
        if source_x.is_empty() || target_x.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        if source_y.len() != source_x.len() {
            return Err(Error::DimensionMismatch { expected: source_x.len(), got: source_y.len() });
        }
        if target_y.len() != target_x.len() {
            return Err(Error::DimensionMismatch { expected: target_x.len(), got: target_y.len() });
        }
        Ok(Self { source_x, source_y, target_x, target_y })
    }

    pub fn from_dataset(data: &PdaDataset) -> Result<Self> {
        let hidden = data
            .target_labels_hidden
            .clone()
            .ok_or_else(|| Error::Dataset("bound evaluation needs hidden target labels".into()))?;
        Self::new(data.source_inputs(), data.source_labels(), data.target_inputs.clone(), hidden)
    }

    pub fn samples(&self) -> impl Iterator<Item = (&Vec<f64>, f64)> {
        self.source_x
            .iter()
            .zip(self.source_y.iter().copied())
            .chain(self.target_x.iter().zip(self.target_y.iter().copied()))
    }
}

/// A finite set of certified `γ`-Lipschitz scalar classifiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteClassifierSet {
    pub candidates: Vec<LipschitzClassifier>,
    pub gamma: f64,
}

impl FiniteClassifierSet {
    pub fn new(candidates: Vec<LipschitzClassifier>, gamma: f64) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::EmptyClassifierSet);
        }
        for g in &candidates {
            g.certify(gamma)?;
        }
        Ok(Self { candidates, gamma })
    }

    /// Grid over `(v, b)`: `per_axis` values of each coordinate of `v` in
    /// `[−γ, γ]`, rescaled onto the ball `‖v‖ ≤ γ`, times the given biases.
    pub fn grid(dim: usize, gamma: f64, per_axis: usize, biases: &[f64], lo: f64, hi: f64) -> Result<Self> {
        if dim == 0 || per_axis == 0 || biases.is_empty() {
            return Err(Error::EmptyClassifierSet);
        }
        let axis: Vec<f64> = if per_axis == 1 {
            vec![0.0]
        } else {
            (0..per_axis).map(|i| -gamma + 2.0 * gamma * i as f64 / (per_axis - 1) as f64).collect()
        };
        let mut candidates = Vec::new();
        for idx in 0..per_axis.pow(dim as u32) {
            let mut rest = idx;
            let mut v = Vec::with_capacity(dim);
            for _ in 0..dim {
                v.push(axis[rest % per_axis]);
                rest /= per_axis;
            }
            let n = crate::measures::norm(&v);
            if n > gamma {
                v.iter_mut().for_each(|x| *x *= gamma / n);
            }
            for &b in biases {
                candidates.push(LipschitzClassifier::new(v.clone(), b, lo, hi)?);
            }
        }
        Self::new(candidates, gamma)
    }

    pub fn with(&self, g: &LipschitzClassifier) -> Result<Self> {
        let mut candidates = self.candidates.clone();
        if !candidates.contains(g) {
            candidates.push(g.clone());
        }
        Self::new(candidates, self.gamma)
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub weighted_source_loss: f64,
    pub pw_term: f64,
    pub tv_term: f64,
    /// Oracle-only: needs the hidden target labels.
    pub lf_term: f64,
    pub rhs_total: f64,
    pub lhs_empirical_target_loss: f64,
    pub pw_value: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub zeta: f64,
}

impl BoundReport {
    pub fn slack(&self) -> f64 {
        self.rhs_total - self.lhs_empirical_target_loss
    }
}

fn require_metric(loss: LossSpec) -> Result<()> {
    if loss.is_metric() {
        Ok(())
    } else {
        Err(invalid("loss", "the bounds need a metric loss on labels"))
    }
}

fn certified_classifier(w: &Hypothesis, gamma: f64) -> Result<&LipschitzClassifier> {
    match &w.classifier {
        Classifier::Lipschitz(g) => {
            g.certify(gamma)?;
            Ok(g)
        }
        Classifier::Softmax(_) => Err(invalid("classifier", "bounds need a scalar Lipschitz classifier")),
    }
}

fn check_unit(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must lie in (0, 1], got {v}")))
    }
}

/// `min_{g′ ∈ G} max_{(x,y) ∈ z ∪ z̃} ℓ(g′(f(x)), y)`.
pub fn l_f(f: &FeatureMap, set: &FiniteClassifierSet, data: &BoundData, loss: LossSpec) -> Result<f64> {
    require_metric(loss)?;
    if set.is_empty() {
        return Err(Error::EmptyClassifierSet);
    }
    let feats: Vec<(Vec<f64>, f64)> = data.samples().map(|(x, y)| (f.apply(x), y)).collect();
    Ok(set
        .candidates
        .iter()
        .map(|g| feats.iter().map(|(t, y)| loss.eval(g.predict(t), *y)).fold(0.0, f64::max))
        .fold(f64::INFINITY, f64::min))
}

fn solve_plan(a: &[f64], b: &[f64], cost: &Array2<f64>, alpha: f64, method: Method) -> Result<TransportPlan> {
    match method {
        Method::Exact => exact_partial_ot(a, b, cost, alpha).map(|(p, _)| p),
        Method::Entropic(cfg) => entropic_partial_ot(a, b, cost, alpha, &cfg).map(|r| r.plan),
    }
}

fn empirical_target_loss(w: &Hypothesis, data: &BoundData, loss: LossSpec) -> f64 {
    let n_t = data.target_x.len() as f64;
    data.target_x.iter().zip(&data.target_y).map(|(x, y)| loss.eval(w.predict(x), *y)).sum::<f64>() / n_t
}

/// Feature-based bound:
/// `Σ (p_i/α) ℓ(w(x_i), y_i) + (2/α) PW_α((1/β)P_s^f, Q_t^f) + ½Σ|1/n_t − q_j/α| + 2 L_f`
/// with cost `γ‖f(x) − f(x̃)‖` and `p, q` the marginals of the plan.
pub fn theorem1_rhs(
    w: &Hypothesis,
    data: &BoundData,
    alpha: f64,
    beta: f64,
    gamma: f64,
    set: &FiniteClassifierSet,
    loss: LossSpec,
    method: Method,
) -> Result<BoundReport> {
    require_metric(loss)?;
    check_unit("alpha", alpha)?;
    check_unit("beta", beta)?;
    certified_classifier(w, gamma)?;
    let f = &w.feature;
    let sf = f.apply_all(&data.source_x)?;
    let tf = f.apply_all(&data.target_x)?;
    let (n_s, n_t) = (sf.len(), tf.len());
    let cost = feature_cost_matrix(&sf, &tf, gamma)?.entries;
    let a = vec![1.0 / (beta * n_s as f64); n_s];
    let b = vec![1.0 / n_t as f64; n_t];
    let plan = solve_plan(&a, &b, &cost, alpha, method)?;
    let pw = plan.cost(&cost);
    let (p, q) = marginal_weights(&plan);

    let weighted = p
        .values
        .iter()
        .zip(data.source_x.iter().zip(&data.source_y))
        .map(|(pi, (x, y))| pi / alpha * loss.eval(w.predict(x), *y))
        .sum::<f64>();
    let pw_term = 2.0 / alpha * pw;
    let tv = tv_term(&q.values, alpha, n_t)?;
    let lf_term = 2.0 * l_f(f, set, data, loss)?;
    Ok(BoundReport {
        weighted_source_loss: weighted,
        pw_term,
        tv_term: tv,
        lf_term,
        rhs_total: weighted + pw_term + tv + lf_term,
        lhs_empirical_target_loss: empirical_target_loss(w, data, loss),
        pw_value: pw,
        alpha,
        beta,
        gamma,
        zeta: loss.zeta().unwrap_or(f64::NAN),
    })
}

fn weighted_losses(
    g: &LipschitzClassifier,
    feats: &[Vec<f64>],
    labels: &[f64],
    weights: &[f64],
    alpha: f64,
    loss: LossSpec,
) -> f64 {
    feats.iter().zip(labels).zip(weights).map(|((t, y), wt)| wt / alpha * loss.eval(g.predict(t), *y)).sum()
}

/// `Ξ = min_{g′}(A + B) − (min_{g′} A + min_{g′} B)` with `A`, `B` the
/// `p̂/α`- and `q̂/α`-weighted source and target losses of `g′ ∘ f`.
#[allow(clippy::too_many_arguments)]
pub fn xi_term(
    f: &FeatureMap,
    set: &FiniteClassifierSet,
    p_hat: &[f64],
    q_hat: &[f64],
    alpha: f64,
    data: &BoundData,
    loss: LossSpec,
) -> Result<f64> {
    require_metric(loss)?;
    if set.is_empty() {
        return Err(Error::EmptyClassifierSet);
    }
    let sf = f.apply_all(&data.source_x)?;
    let tf = f.apply_all(&data.target_x)?;
    let mut min_a = f64::INFINITY;
    let mut min_b = f64::INFINITY;
    let mut min_ab = f64::INFINITY;
    for g in &set.candidates {
        let a = weighted_losses(g, &sf, &data.source_y, p_hat, alpha, loss);
        let b = weighted_losses(g, &tf, &data.target_y, q_hat, alpha, loss);
        min_a = min_a.min(a);
        min_b = min_b.min(b);
        min_ab = min_ab.min(a + b);
    }
    // floating-point addition is monotone, so this is never negative
    Ok(min_ab - (min_a + min_b))
}

/// Joint-distribution bound:
/// `Σ (p̂_i/α) ℓ(w(x_i), y_i) + (1/α) PW_α((1/β)P_z^f, Q_t^w) + ½Σ|1/n_t − q̂_j/α| + L̂_f`
/// with cost `ζγ‖f(x) − f(x̃)‖ + ℓ(y, w(x̃))`. The classifier of `w` is added
/// to the candidate set before the minima in `L̂_f` are taken.
#[allow(clippy::too_many_arguments)]
pub fn theorem2_rhs(
    w: &Hypothesis,
    data: &BoundData,
    alpha: f64,
    beta: f64,
    gamma: f64,
    set: &FiniteClassifierSet,
    loss: LossSpec,
    method: Method,
) -> Result<BoundReport> {
    if !loss.is_metric() {
        return Err(Error::JointCostRequiresMetric);
    }
    let zeta = loss.zeta().ok_or_else(|| invalid("loss", "the joint bound needs a Lipschitz loss"))?;
    check_unit("alpha", alpha)?;
    check_unit("beta", beta)?;
    let g = certified_classifier(w, gamma)?;
    let set = set.with(g)?;
    let f = &w.feature;
    let sf = f.apply_all(&data.source_x)?;
    let tf = f.apply_all(&data.target_x)?;
    let (n_s, n_t) = (sf.len(), tf.len());
    let predicted: Vec<f64> = data.target_x.iter().map(|x| w.predict(x)).collect();
    let cost = joint_cost_matrix(&sf, &data.source_y, &tf, &predicted, zeta * gamma, loss)?.entries;
    let a = vec![1.0 / (beta * n_s as f64); n_s];
    let b = vec![1.0 / n_t as f64; n_t];
    let plan = solve_plan(&a, &b, &cost, alpha, method)?;
    let pw = plan.cost(&cost);
    let (p, q) = marginal_weights(&plan);

    let weighted = weighted_losses(g, &sf, &data.source_y, &p.values, alpha, loss);
    let pw_term = pw / alpha;
    let tv = tv_term(&q.values, alpha, n_t)?;
    let min_b = set
        .candidates
        .iter()
        .map(|g| weighted_losses(g, &tf, &data.target_y, &q.values, alpha, loss))
        .fold(f64::INFINITY, f64::min);
    let xi = xi_term(f, &set, &p.values, &q.values, alpha, data, loss)?;
    let lf_term = min_b + xi;
    Ok(BoundReport {
        weighted_source_loss: weighted,
        pw_term,
        tv_term: tv,
        lf_term,
        rhs_total: weighted + pw_term + tv + lf_term,
        lhs_empirical_target_loss: empirical_target_loss(w, data, loss),
        pw_value: pw,
        alpha,
        beta,
        gamma,
        zeta,
    })
}

/// `max` over all pairs of samples in `z ∪ z̃` of
/// `|ℓ(w(x), y) − ℓ(w(x̃), ỹ)| − 2γ‖f(x) − f(x̃)‖ − 2 L_f`; nonpositive when
/// the pairwise inequality holds.
pub fn lemma_a5_check(
    w: &Hypothesis,
    gamma: f64,
    set: &FiniteClassifierSet,
    data: &BoundData,
    loss: LossSpec,
) -> Result<f64> {
    require_metric(loss)?;
    certified_classifier(w, gamma)?;
    let lf = l_f(&w.feature, set, data, loss)?;
    let pts: Vec<(Vec<f64>, f64)> =
        data.samples().map(|(x, y)| (w.feature.apply(x), loss.eval(w.predict(x), y))).collect();
    let mut worst = f64::NEG_INFINITY;
    for (fi, li) in &pts {
        for (fj, lj) in &pts {
            worst = worst.max((li - lj).abs() - 2.0 * gamma * distance(fi, fj) - 2.0 * lf);
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacBayesConfig {
    pub lambda: f64,
    pub delta: f64,
    pub n_t: usize,
    pub kl: f64,
}

impl PacBayesConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(invalid("lambda", format!("must be positive, got {}", self.lambda)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid("delta", format!("must lie in (0, 1), got {}", self.delta)));
        }
        if self.n_t == 0 {
            return Err(invalid("n_t", "must be at least 1"));
        }
        if !(self.kl >= 0.0) {
            return Err(invalid("kl", format!("must be nonnegative, got {}", self.kl)));
        }
        Ok(())
    }

    /// `B = λ/(8 n_t) + (KL + ln(1/δ))/λ`.
    pub fn penalty(&self) -> f64 {
        self.lambda / (8.0 * self.n_t as f64) + (self.kl + (1.0 / self.delta).ln()) / self.lambda
    }
}

/// `mean_R + λ/(8 n_t) + (KL + ln(1/δ))/λ`.
pub fn pac_bayes_rhs(mean_r: f64, cfg: &PacBayesConfig) -> Result<f64> {
    cfg.validate()?;
    Ok(mean_r + cfg.penalty())
}

/// The `λ` minimizing the penalty: `√(8 n_t (KL + ln(1/δ)))`.
pub fn optimal_lambda(n_t: usize, kl: f64, delta: f64) -> f64 {
    (8.0 * n_t as f64 * (kl + (1.0 / delta).ln())).sqrt()
}

/// `KL(post ‖ prior)` between categorical distributions.
pub fn kl_categorical(posterior: &[f64], prior: &[f64]) -> Result<f64> {
    if posterior.len() != prior.len() {
        return Err(Error::DimensionMismatch { expected: prior.len(), got: posterior.len() });
    }
    let mut kl = 0.0;
    for (&p, &q) in posterior.iter().zip(prior) {
        if p > 0.0 {
            if q <= 0.0 {
                return Ok(f64::INFINITY);
            }
            kl += p * (p / q).ln();
        }
    }
    Ok(kl.max(0.0))
}

/// One random bound instance: data, a certified hypothesis, a classifier
/// grid of at most 24 candidates, and `(α, β, γ)`.
#[derive(Debug, Clone)]
pub struct BoundInstance {
    pub data: BoundData,
    pub hypothesis: Hypothesis,
    pub set: FiniteClassifierSet,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

/// Random instance with `n_s, n_t ≤ max_n`, inputs in dimension 1–3,
/// features in dimension 1–2, labels in `[0, 1]` from a noisy linear rule
/// that differs between the domains.
pub fn random_instance(seed: u64, max_n: usize) -> Result<BoundInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_n = max_n.max(2);
    let n_s = rng.gen_range(2..=max_n);
    let n_t = rng.gen_range(2..=max_n);
    let d = rng.gen_range(1..=3);
    let k = rng.gen_range(1..=d.min(2));
    let mut gauss = || -> f64 { StandardNormal.sample(&mut rng) };
    let fm = Array2::from_shape_fn((k, d), |_| gauss() / (d as f64).sqrt());
    let shift: Vec<f64> = (0..d).map(|_| gauss()).collect();
    let rule: Vec<f64> = (0..d).map(|_| 0.4 * gauss()).collect();
    let source_x: Vec<Vec<f64>> = (0..n_s).map(|_| (0..d).map(|_| gauss()).collect()).collect();
    let target_x: Vec<Vec<f64>> = (0..n_t).map(|_| (0..d).map(|c| gauss() + shift[c]).collect()).collect();
    let label = |x: &[f64], offset: f64, noise: f64| -> f64 {
        (0.5 + offset + x.iter().zip(&rule).map(|(a, b)| a * b).sum::<f64>() + noise).clamp(0.0, 1.0)
    };
    let source_y = source_x.iter().map(|x| label(x, 0.0, 0.1 * gauss())).collect();
    let target_offset = 0.2 * gauss();
    let target_y = target_x.iter().map(|x| label(x, target_offset, 0.1 * gauss())).collect();

    let gamma = rng.gen_range(0.1..3.0);
    let alpha = rng.gen_range(0.02..=1.0);
    let beta = rng.gen_range(0.02..=1.0);
    let dir: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let dn = crate::measures::norm(&dir).max(1e-12);
    let scale = rng.gen_range(0.0..=1.0) * gamma / dn;
    let g = LipschitzClassifier::new(dir.iter().map(|x| x * scale).collect(), rng.gen_range(0.0..1.0), 0.0, 1.0)?;
    let hypothesis = Hypothesis::lipschitz(FeatureMap::new(fm)?, g)?;
    let set = if k == 1 {
        FiniteClassifierSet::grid(1, gamma, 4, &[0.0, 0.2, 0.4, 0.6, 0.8, 1.0], 0.0, 1.0)?
    } else {
        FiniteClassifierSet::grid(2, gamma, 3, &[0.25, 0.75], 0.0, 1.0)?
    };
    let data = BoundData::new(source_x, source_y, target_x, target_y)?;
    Ok(BoundInstance { data, hypothesis, set, alpha, beta, gamma })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundCheckSummary {
    pub theorem: u8,
    pub trials: usize,
    pub violations: usize,
    pub max_slack: f64,
    pub min_slack: f64,
    pub reports: Vec<BoundReport>,
}

/// Evaluates theorem 1 or 2 on `trials` random instances (seeds
/// `seed, seed+1, …`) and counts `rhs < lhs − 1e−9`.
pub fn check_theorem(theorem: u8, trials: usize, seed: u64, max_n: usize) -> Result<BoundCheckSummary> {
    if theorem != 1 && theorem != 2 {
        return Err(invalid("theorem", format!("must be 1 or 2, got {theorem}")));
    }
    let reports = (0..trials)
        .into_par_iter()
        .map(|t| {
            let inst = random_instance(seed.wrapping_add(t as u64), max_n)?;
            let args = (&inst.hypothesis, &inst.data, inst.alpha, inst.beta, inst.gamma, &inst.set);
            if theorem == 1 {
                theorem1_rhs(args.0, args.1, args.2, args.3, args.4, args.5, LossSpec::CLIPPED_ABS, Method::Exact)
            } else {
                theorem2_rhs(args.0, args.1, args.2, args.3, args.4, args.5, LossSpec::CLIPPED_ABS, Method::Exact)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let violations = reports.iter().filter(|r| r.slack() < -1e-9).count();
    let max_slack = reports.iter().map(BoundReport::slack).fold(f64::NEG_INFINITY, f64::max);
    let min_slack = reports.iter().map(BoundReport::slack).fold(f64::INFINITY, f64::min);
    Ok(BoundCheckSummary { theorem, trials, violations, max_slack, min_slack, reports })
}

/// Monte-Carlo check of the PAC-Bayes bound with a finite hypothesis set.
///
/// Population: 1-D target atoms with known probabilities and a two-point
/// label distribution per atom, so the population loss of every hypothesis
/// is exact. Each trial draws `n_s` source and `n_t` target samples, forms a
/// Gibbs posterior on the source loss over a grid of clamp classifiers with
/// a uniform prior, and compares `E_post[population loss]` with
/// `E_post[R] + B` at a fixed `λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacBayesSimulation {
    pub trials: usize,
    pub n_s: usize,
    pub n_t: usize,
    pub delta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub temperature: f64,
    pub seed: u64,
}

impl Default for PacBayesSimulation {
    fn default() -> Self {
        Self {
            trials: 500,
            n_s: 30,
            n_t: 30,
            delta: 0.1,
            alpha: 0.8,
            beta: 0.6,
            gamma: 1.0,
            temperature: 20.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacBayesOutcome {
    pub trials: usize,
    /// Violations with `R` the feature-based bound right-hand side.
    pub violations_feature_bound: usize,
    /// Violations with `R` the empirical target loss itself (the tightest valid `R`).
    pub violations_empirical: usize,
    pub lambda: f64,
    pub mean_penalty: f64,
}

impl PacBayesOutcome {
    pub fn rate_feature_bound(&self) -> f64 {
        self.violations_feature_bound as f64 / self.trials as f64
    }

    pub fn rate_empirical(&self) -> f64 {
        self.violations_empirical as f64 / self.trials as f64
    }
}

struct Population {
    atoms: Vec<f64>,
    probs: Vec<f64>,
    /// Two equally likely labels per atom.
    labels: Vec<[f64; 2]>,
}

impl Population {
    fn sample(&self, rng: &mut ChaCha8Rng) -> (f64, f64) {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut k = self.atoms.len() - 1;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                k = i;
                break;
            }
        }
        (self.atoms[k], self.labels[k][rng.gen_range(0..2)])
    }

    fn loss(&self, g: &LipschitzClassifier, loss: LossSpec) -> f64 {
        self.atoms
            .iter()
            .zip(&self.probs)
            .zip(&self.labels)
            .map(|((x, p), ys)| {
                let pred = g.predict(&[*x]);
                p * 0.5 * (loss.eval(pred, ys[0]) + loss.eval(pred, ys[1]))
            })
            .sum()
    }
}

pub fn simulate_pac_bayes(cfg: &PacBayesSimulation) -> Result<PacBayesOutcome> {
    check_unit("alpha", cfg.alpha)?;
    check_unit("beta", cfg.beta)?;
    if cfg.trials == 0 || cfg.n_s == 0 || cfg.n_t == 0 {
        return Err(invalid("trials", "trials and sample sizes must be positive"));
    }
    let loss = LossSpec::CLIPPED_ABS;
    let rule = |x: f64| (0.5 + 0.3 * x).clamp(0.0, 1.0);
    let source = Population {
        atoms: (0..12).map(|i| -1.5 + 3.0 * i as f64 / 11.0).collect(),
        probs: vec![1.0 / 12.0; 12],
        labels: (0..12)
            .map(|i| {
                let y = rule(-1.5 + 3.0 * i as f64 / 11.0);
                [(y - 0.1).max(0.0), (y + 0.1).min(1.0)]
            })
            .collect(),
    };
    let target = Population {
        atoms: (0..6).map(|i| -0.5 + 2.0 * i as f64 / 5.0).collect(),
        probs: vec![0.25, 0.2, 0.2, 0.15, 0.1, 0.1],
        labels: (0..6)
            .map(|i| {
                let y = rule(-0.5 + 2.0 * i as f64 / 5.0) + 0.05;
                [(y - 0.15).clamp(0.0, 1.0), (y + 0.15).clamp(0.0, 1.0)]
            })
            .collect(),
    };
    let hyps = FiniteClassifierSet::grid(1, cfg.gamma, 9, &[0.2, 0.35, 0.5, 0.65, 0.8], 0.0, 1.0)?;
    let h = hyps.len();
    let prior = vec![1.0 / h as f64; h];
    let pop_loss: Vec<f64> = hyps.candidates.iter().map(|g| target.loss(g, loss)).collect();
    let lambda = optimal_lambda(cfg.n_t, 0.0, cfg.delta);

    let outcomes = (0..cfg.trials)
        .into_par_iter()
        .map(|t| -> Result<(bool, bool, f64)> {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(1_000_003).wrapping_add(t as u64));
            let src: Vec<(f64, f64)> = (0..cfg.n_s).map(|_| source.sample(&mut rng)).collect();
            let tgt: Vec<(f64, f64)> = (0..cfg.n_t).map(|_| target.sample(&mut rng)).collect();
            let data = BoundData::new(
                src.iter().map(|s| vec![s.0]).collect(),
                src.iter().map(|s| s.1).collect(),
                tgt.iter().map(|s| vec![s.0]).collect(),
                tgt.iter().map(|s| s.1).collect(),
            )?;
            // posterior ∝ prior · exp(−temperature · source loss)
            let src_loss: Vec<f64> = hyps
                .candidates
                .iter()
                .map(|g| src.iter().map(|(x, y)| loss.eval(g.predict(&[*x]), *y)).sum::<f64>() / cfg.n_s as f64)
                .collect();
            let logits: Vec<f64> = src_loss.iter().map(|l| -cfg.temperature * l).collect();
            let post = crate::measures::softmax(&logits);
            let kl = kl_categorical(&post, &prior)?;
            let pen = PacBayesConfig { lambda, delta: cfg.delta, n_t: cfg.n_t, kl }.penalty();

            let mut mean_r_thm = 0.0;
            let mut mean_r_emp = 0.0;
            let mut mean_pop = 0.0;
            for (j, g) in hyps.candidates.iter().enumerate() {
                let w = Hypothesis::lipschitz(FeatureMap::identity(1), g.clone())?;
                let rep = theorem1_rhs(&w, &data, cfg.alpha, cfg.beta, cfg.gamma, &hyps, loss, Method::Exact)?;
                mean_r_thm += post[j] * rep.rhs_total;
                mean_r_emp += post[j] * rep.lhs_empirical_target_loss;
                mean_pop += post[j] * pop_loss[j];
            }
            Ok((mean_pop > mean_r_thm + pen, mean_pop > mean_r_emp + pen, pen))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PacBayesOutcome {
        trials: cfg.trials,
        violations_feature_bound: outcomes.iter().filter(|o| o.0).count(),
        violations_empirical: outcomes.iter().filter(|o| o.1).count(),
        lambda,
        mean_penalty: outcomes.iter().map(|o| o.2).sum::<f64>() / cfg.trials as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn clamp1(v: f64, b: f64) -> LipschitzClassifier {
        LipschitzClassifier::new(vec![v], b, 0.0, 1.0).unwrap()
    }

    fn line_data(n: usize, shift: f64, rule: impl Fn(f64) -> f64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let xs: Vec<Vec<f64>> = (0..n).map(|i| vec![shift + i as f64 / n as f64]).collect();
        let ys = xs.iter().map(|x| rule(x[0])).collect();
        (xs, ys)
    }

    #[test]
    fn realizable_lf_is_zero() {
        let truth = clamp1(0.5, 0.1);
        let (sx, sy) = line_data(6, 0.0, |x| truth.predict(&[x]));
        let (tx, ty) = line_data(4, 0.3, |x| truth.predict(&[x]));
        let data = BoundData::new(sx, sy, tx, ty).unwrap();
        let set = FiniteClassifierSet::new(vec![clamp1(0.0, 0.9), truth.clone()], 1.0).unwrap();
        assert_eq!(l_f(&FeatureMap::identity(1), &set, &data, LossSpec::CLIPPED_ABS).unwrap(), 0.0);
    }

    #[test]
    fn singleton_lf_is_plain_max() {
        let g = clamp1(0.3, 0.2);
        let data = BoundData::new(vec![vec![0.0], vec![1.0]], vec![0.9, 0.1], vec![vec![2.0]], vec![0.5]).unwrap();
        let set = FiniteClassifierSet::new(vec![g.clone()], 1.0).unwrap();
        let want =
            [(0.2, 0.9), (0.5, 0.1), (0.8, 0.5)].iter().map(|(p, y): &(f64, f64)| (p - y).abs()).fold(0.0, f64::max);
        let got = l_f(&FeatureMap::identity(1), &set, &data, LossSpec::CLIPPED_ABS).unwrap();
        assert!((got - want).abs() < 1e-15);
        assert!(matches!(FiniteClassifierSet::new(vec![], 1.0), Err(Error::EmptyClassifierSet)));
    }

    #[test]
    fn lf_matches_double_loop() {
        let inst = random_instance(11, 10).unwrap();
        let f = &inst.hypothesis.feature;
        let set = FiniteClassifierSet::new(inst.set.candidates[..5].to_vec(), inst.gamma).unwrap();
        let mut best = f64::INFINITY;
        for g in &set.candidates {
            let mut worst: f64 = 0.0;
            for (x, y) in inst.data.source_x.iter().zip(&inst.data.source_y) {
                worst = worst.max((g.predict(&f.apply(x)) - y).abs().min(1.0));
            }
            for (x, y) in inst.data.target_x.iter().zip(&inst.data.target_y) {
                worst = worst.max((g.predict(&f.apply(x)) - y).abs().min(1.0));
            }
            best = best.min(worst);
        }
        assert_eq!(l_f(f, &set, &inst.data, LossSpec::CLIPPED_ABS).unwrap(), best);
    }

    #[test]
    fn grid_candidates_are_certified() {
        let set = FiniteClassifierSet::grid(2, 0.7, 3, &[0.0, 0.5], 0.0, 1.0).unwrap();
        assert_eq!(set.len(), 18);
        assert!(set.candidates.iter().all(|g| g.is_certified(0.7)));
    }

    #[test]
    fn identical_domains_leave_only_lf() {
        let truth = clamp1(0.8, 0.1);
        let (x, y) = line_data(5, 0.0, |x| truth.predict(&[x]));
        let data = BoundData::new(x.clone(), y.clone(), x, y).unwrap();
        let w = Hypothesis::lipschitz(FeatureMap::identity(1), truth.clone()).unwrap();
        let set = FiniteClassifierSet::new(vec![clamp1(0.0, 0.5)], 1.0).unwrap();
        let r = theorem1_rhs(&w, &data, 1.0, 1.0, 1.0, &set, LossSpec::CLIPPED_ABS, Method::Exact).unwrap();
        assert_eq!(r.lhs_empirical_target_loss, 0.0);
        assert!(r.pw_value.abs() < 1e-12 && r.tv_term.abs() < 1e-12 && r.weighted_source_loss == 0.0);
        let lf = l_f(&FeatureMap::identity(1), &set, &data, LossSpec::CLIPPED_ABS).unwrap();
        assert!((r.rhs_total - 2.0 * lf).abs() < 1e-12);

        let with_truth = set.with(&truth).unwrap();
        let r2 = theorem2_rhs(&w, &data, 1.0, 1.0, 1.0, &with_truth, LossSpec::CLIPPED_ABS, Method::Exact).unwrap();
        assert!(r2.rhs_total.abs() < 1e-12, "{r2:?}");
    }

    #[test]
    fn default_alpha_beta_accepted() {
        let inst = random_instance(2, 12).unwrap();
        let r = theorem1_rhs(
            &inst.hypothesis,
            &inst.data,
            0.8,
            0.35,
            inst.gamma,
            &inst.set,
            LossSpec::CLIPPED_ABS,
            Method::Exact,
        )
        .unwrap();
        assert_eq!((r.alpha, r.beta), (0.8, 0.35));
    }

    #[test]
    fn report_terms_sum_and_bound_holds() {
        for seed in 0..30 {
            let inst = random_instance(seed, 20).unwrap();
            for thm in [1, 2] {
                let f = if thm == 1 { theorem1_rhs } else { theorem2_rhs };
                let r = f(
                    &inst.hypothesis,
                    &inst.data,
                    inst.alpha,
                    inst.beta,
                    inst.gamma,
                    &inst.set,
                    LossSpec::CLIPPED_ABS,
                    Method::Exact,
                )
                .unwrap();
                let sum = r.weighted_source_loss + r.pw_term + r.tv_term + r.lf_term;
                assert!((r.rhs_total - sum).abs() <= 1e-12);
                assert!(r.weighted_source_loss >= 0.0 && r.pw_term >= -1e-12 && r.tv_term >= 0.0 && r.lf_term >= 0.0);
                assert!(r.slack() >= -1e-9, "theorem {thm} seed {seed}: {r:?}");
            }
        }
    }

    #[test]
    fn uncertified_classifier_rejected() {
        let inst = random_instance(5, 8).unwrap();
        let mut w = inst.hypothesis.clone();
        if let Classifier::Lipschitz(g) = &mut w.classifier {
            g.v.iter_mut().for_each(|v| *v = 10.0 * inst.gamma);
        }
        let err = theorem1_rhs(&w, &inst.data, 0.5, 0.5, inst.gamma, &inst.set, LossSpec::CLIPPED_ABS, Method::Exact)
            .unwrap_err();
        assert!(err.to_string().starts_with("Lipschitz certificate missing"));
    }

    #[test]
    fn substituting_a_fixed_candidate_only_loosens() {
        let inst = random_instance(8, 15).unwrap();
        let loss = LossSpec::CLIPPED_ABS;
        let full = theorem1_rhs(
            &inst.hypothesis,
            &inst.data,
            inst.alpha,
            inst.beta,
            inst.gamma,
            &inst.set,
            loss,
            Method::Exact,
        )
        .unwrap();
        for g in &inst.set.candidates {
            let single = FiniteClassifierSet::new(vec![g.clone()], inst.gamma).unwrap();
            let r = theorem1_rhs(
                &inst.hypothesis,
                &inst.data,
                inst.alpha,
                inst.beta,
                inst.gamma,
                &single,
                loss,
                Method::Exact,
            )
            .unwrap();
            assert!(r.rhs_total >= full.rhs_total - 1e-12);
        }
    }

    #[test]
    fn xi_singleton_and_common_minimizer() {
        let inst = random_instance(3, 10).unwrap();
        let f = &inst.hypothesis.feature;
        let p = vec![0.5 / inst.data.source_x.len() as f64; inst.data.source_x.len()];
        let q = vec![0.5 / inst.data.target_x.len() as f64; inst.data.target_x.len()];
        let single = FiniteClassifierSet::new(vec![inst.set.candidates[0].clone()], inst.gamma).unwrap();
        assert_eq!(xi_term(f, &single, &p, &q, 0.5, &inst.data, LossSpec::CLIPPED_ABS).unwrap(), 0.0);

        let truth = clamp1(0.5, 0.2);
        let (sx, sy) = line_data(5, 0.0, |x| truth.predict(&[x]));
        let (tx, ty) = line_data(3, 0.5, |x| truth.predict(&[x]));
        let data = BoundData::new(sx, sy, tx, ty).unwrap();
        let set = FiniteClassifierSet::new(vec![clamp1(0.0, 0.0), truth, clamp1(-1.0, 1.0)], 1.0).unwrap();
        let xi = xi_term(&FeatureMap::identity(1), &set, &[0.2; 5], &[1.0 / 3.0; 3], 1.0, &data, LossSpec::CLIPPED_ABS)
            .unwrap();
        assert_eq!(xi, 0.0);
    }

    #[test]
    fn xi_matches_enumeration() {
        let inst = random_instance(21, 12).unwrap();
        let f = &inst.hypothesis.feature;
        let set = FiniteClassifierSet::new(inst.set.candidates[..4].to_vec(), inst.gamma).unwrap();
        let ns = inst.data.source_x.len();
        let nt = inst.data.target_x.len();
        let p: Vec<f64> = (0..ns).map(|i| (i + 1) as f64 / (ns * ns) as f64).collect();
        let q: Vec<f64> = (0..nt).map(|j| (nt - j) as f64 / (nt * nt) as f64).collect();
        let alpha = 0.7;
        let a = |g: &LipschitzClassifier| -> f64 {
            (0..ns)
                .map(|i| {
                    p[i] / alpha * (g.predict(&f.apply(&inst.data.source_x[i])) - inst.data.source_y[i]).abs().min(1.0)
                })
                .sum()
        };
        let b = |g: &LipschitzClassifier| -> f64 {
            (0..nt)
                .map(|j| {
                    q[j] / alpha * (g.predict(&f.apply(&inst.data.target_x[j])) - inst.data.target_y[j]).abs().min(1.0)
                })
                .sum()
        };
        // min over g1, g2 of a(g1)+b(g2) is the separate-minima sum
        let mut joint = f64::INFINITY;
        let mut separate = f64::INFINITY;
        for g1 in &set.candidates {
            joint = joint.min(a(g1) + b(g1));
            for g2 in &set.candidates {
                separate = separate.min(a(g1) + b(g2));
            }
        }
        let xi = xi_term(f, &set, &p, &q, alpha, &inst.data, LossSpec::CLIPPED_ABS).unwrap();
        assert!((xi - (joint - separate)).abs() < 1e-12);
        assert!(xi >= 0.0);
    }

    #[test]
    fn lemma_pairs_hold_and_loosen_with_gamma() {
        for seed in 0..10 {
            let inst = random_instance(seed, 15).unwrap();
            let loss = LossSpec::CLIPPED_ABS;
            let v = lemma_a5_check(&inst.hypothesis, inst.gamma, &inst.set, &inst.data, loss).unwrap();
            assert!(v <= 1e-9, "seed {seed}: {v}");
            let big = FiniteClassifierSet::new(inst.set.candidates.clone(), 10.0 * inst.gamma).unwrap();
            let v10 = lemma_a5_check(&inst.hypothesis, 10.0 * inst.gamma, &big, &inst.data, loss).unwrap();
            assert!(v10 <= v + 1e-12);
        }
    }

    #[test]
    fn lemma_identical_pair_has_zero_lhs() {
        let g = clamp1(0.4, 0.3);
        let data = BoundData::new(vec![vec![0.5]], vec![0.2], vec![vec![0.5]], vec![0.2]).unwrap();
        let w = Hypothesis::lipschitz(FeatureMap::identity(1), g.clone()).unwrap();
        let set = FiniteClassifierSet::new(vec![g], 1.0).unwrap();
        let v = lemma_a5_check(&w, 1.0, &set, &data, LossSpec::CLIPPED_ABS).unwrap();
        assert!(v <= 0.0);
    }

    #[test]
    fn pac_bayes_arithmetic() {
        let cfg = PacBayesConfig { lambda: 2.0, delta: (-2.0f64).exp(), n_t: 1, kl: 0.0 };
        assert!((pac_bayes_rhs(0.0, &cfg).unwrap() - 1.25).abs() < 1e-12);
        let delta = (-1.0f64).exp();
        let lam = optimal_lambda(2, 0.0, delta);
        assert!((lam - 4.0).abs() < 1e-12);
        let cfg = PacBayesConfig { lambda: lam, delta, n_t: 2, kl: 0.0 };
        assert!((cfg.penalty() - 0.5).abs() < 1e-12);
        assert!(pac_bayes_rhs(0.0, &PacBayesConfig { delta: 1.0, ..cfg }).is_err());
        assert!(pac_bayes_rhs(0.0, &PacBayesConfig { delta: 0.0, ..cfg }).is_err());
    }

    #[test]
    fn pac_bayes_minimizer_by_line_search() {
        for (n_t, kl, delta) in [(10, 0.3, 0.1), (50, 2.0, 0.05), (3, 0.0, 0.5)] {
            let pen = |l: f64| PacBayesConfig { lambda: l, delta, n_t, kl }.penalty();
            let (mut lo, mut hi) = (1e-3, 1e3);
            for _ in 0..200 {
                let m1 = lo + (hi - lo) / 3.0;
                let m2 = hi - (hi - lo) / 3.0;
                if pen(m1) < pen(m2) {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            let closed = optimal_lambda(n_t, kl, delta);
            assert!((0.5 * (lo + hi) - closed).abs() < 1e-6 * closed);
        }
    }

    #[test]
    fn kl_cases() {
        assert_eq!(kl_categorical(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
        assert!((kl_categorical(&[1.0, 0.0], &[0.5, 0.5]).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(kl_categorical(&[0.5, 0.5], &[1.0, 0.0]).unwrap(), f64::INFINITY);
    }

    #[test]
    fn pac_bayes_small_simulation() {
        let out = simulate_pac_bayes(&PacBayesSimulation { trials: 40, ..Default::default() }).unwrap();
        assert_eq!(out.trials, 40);
        assert!(out.rate_feature_bound() <= 0.15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn xi_nonnegative(seed in 0u64..10_000, alpha in 0.05..1.0f64) {
            let inst = random_instance(seed, 10).unwrap();
            let ns = inst.data.source_x.len();
            let nt = inst.data.target_x.len();
            let p = vec![alpha / ns as f64; ns];
            let q = vec![alpha / nt as f64; nt];
            let xi = xi_term(&inst.hypothesis.feature, &inst.set, &p, &q, alpha, &inst.data, LossSpec::CLIPPED_ABS).unwrap();
            prop_assert!(xi >= 0.0);
        }

        #[test]
        fn pac_bayes_convex_in_lambda(l1 in 0.01..100.0f64, l2 in 0.01..100.0f64, t in 0.0..1.0f64) {
            let pen = |l: f64| PacBayesConfig { lambda: l, delta: 0.1, n_t: 20, kl: 0.7 }.penalty();
            let mid = t * l1 + (1.0 - t) * l2;
            prop_assert!(pen(mid) <= t * pen(l1) + (1.0 - t) * pen(l2) + 1e-9);
        }
    }
}
