//! Discrete measures, cost matrices, losses and hypotheses `w = g ∘ f`.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// A labeled input. Class ids are stored as integral reals so that the
/// metric-loss regime (labels in ℝ) and the class regime share one type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub x: Vec<f64>,
    pub y: f64,
}

impl LabeledSample {
    pub fn new(x: Vec<f64>, y: f64) -> Self {
        Self { x, y }
    }

    /// The label as a class id, if it is a nonnegative integer.
    pub fn class(&self) -> Option<usize> {
        class_of(self.y)
    }
}

pub(crate) fn class_of(y: f64) -> Option<usize> {
    (y >= 0.0 && y.fract() == 0.0 && y.is_finite()).then_some(y as usize)
}

/// Labeled source samples and unlabeled target inputs. The hidden target
/// labels are only ever read by evaluators.
#[derive(Debug, Clone, PartialEq)]
pub struct PdaDataset {
    pub source: Vec<LabeledSample>,
    pub target_inputs: Vec<Vec<f64>>,
    pub target_labels_hidden: Option<Vec<f64>>,
}

impl PdaDataset {
    pub fn new(
        source: Vec<LabeledSample>,
        target_inputs: Vec<Vec<f64>>,
        target_labels_hidden: Option<Vec<f64>>,
    ) -> Result<Self> {
        if source.is_empty() || target_inputs.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        let d = source[0].x.len();
        if d == 0 {
            return Err(invalid("d", "input dimension must be at least 1"));
        }
        for x in source.iter().map(|s| &s.x).chain(target_inputs.iter()) {
            if x.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: x.len() });
            }
        }
        if source.iter().any(|s| !s.y.is_finite()) {
            return Err(invalid("y", "labels must be finite"));
        }
        if let Some(hidden) = &target_labels_hidden {
            if hidden.len() != target_inputs.len() {
                return Err(Error::DimensionMismatch { expected: target_inputs.len(), got: hidden.len() });
            }
            for &y in hidden {
                if !source.iter().any(|s| s.y == y) {
                    return Err(Error::Dataset(format!(
                        "hidden target label {y} does not occur in the source label set"
                    )));
                }
            }
        }
        Ok(Self { source, target_inputs, target_labels_hidden })
    }

    pub fn input_dim(&self) -> usize {
        self.source[0].x.len()
    }

    pub fn n_source(&self) -> usize {
        self.source.len()
    }

    pub fn n_target(&self) -> usize {
        self.target_inputs.len()
    }

    /// One past the largest source class id.
    pub fn num_classes(&self) -> usize {
        self.source.iter().filter_map(LabeledSample::class).max().map_or(0, |c| c + 1)
    }

    pub fn source_labels(&self) -> Vec<f64> {
        self.source.iter().map(|s| s.y).collect()
    }

    pub fn source_inputs(&self) -> Vec<Vec<f64>> {
        self.source.iter().map(|s| s.x.clone()).collect()
    }
}

/// Nonnegative masses on atoms of an external point list. Total mass may
/// exceed one (the `1/β`-inflated source).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    pub masses: Vec<f64>,
    pub support_ids: Vec<usize>,
}

impl DiscreteMeasure {
    pub fn new(masses: Vec<f64>) -> Result<Self> {
        if masses.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        for (index, &value) in masses.iter().enumerate() {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(Error::NegativeMass { index, value });
            }
        }
        let support_ids = (0..masses.len()).collect();
        Ok(Self { masses, support_ids })
    }

    pub fn uniform(n: usize, scale: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyMeasure);
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(invalid("scale", format!("must be positive, got {scale}")));
        }
        Self::new(vec![scale / n as f64; n])
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }
}

/// Linear feature map `f(x) = W x` with `W ∈ ℝ^{k×d}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    pub matrix: Array2<f64>,
}

impl FeatureMap {
    pub fn new(matrix: Array2<f64>) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(invalid("feature_map", "k and d must be at least 1"));
        }
        if matrix.nrows() > matrix.ncols() {
            return Err(invalid("feature_map", "feature dimension k must not exceed d"));
        }
        Ok(Self { matrix })
    }

    pub fn identity(d: usize) -> Self {
        Self { matrix: Array2::eye(d) }
    }

    pub fn input_dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn feature_dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matrix.rows().into_iter().map(|row| row.iter().zip(x).map(|(w, xi)| w * xi).sum()).collect()
    }

    pub fn apply_all(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        xs.iter()
            .map(|x| {
                if x.len() != self.input_dim() {
                    Err(Error::DimensionMismatch { expected: self.input_dim(), got: x.len() })
                } else {
                    Ok(self.apply(x))
                }
            })
            .collect()
    }
}

/// Scalar classifier `t ↦ clamp(⟨v,t⟩ + b, lo, hi)`. Clamping is
/// 1-Lipschitz, so the map is `‖v‖`-Lipschitz into ℝ and hence into the
/// clipped-absolute metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzClassifier {
    pub v: Vec<f64>,
    pub b: f64,
    pub lo: f64,
    pub hi: f64,
}

impl LipschitzClassifier {
    pub fn new(v: Vec<f64>, b: f64, lo: f64, hi: f64) -> Result<Self> {
        if v.is_empty() {
            return Err(invalid("v", "classifier needs at least one weight"));
        }
        if !(lo <= hi) {
            return Err(invalid("clamp", format!("lo {lo} must not exceed hi {hi}")));
        }
        Ok(Self { v, b, lo, hi })
    }

    pub fn lipschitz(&self) -> f64 {
        norm(&self.v)
    }

    pub fn is_certified(&self, gamma: f64) -> bool {
        self.lipschitz() <= gamma * (1.0 + 1e-12) + 1e-15
    }

    pub fn certify(&self, gamma: f64) -> Result<()> {
        if self.is_certified(gamma) {
            Ok(())
        } else {
            Err(Error::LipschitzCertificate { norm: self.lipschitz(), gamma })
        }
    }

    pub fn predict(&self, t: &[f64]) -> f64 {
        let s: f64 = self.v.iter().zip(t).map(|(v, t)| v * t).sum::<f64>() + self.b;
        s.clamp(self.lo, self.hi)
    }
}

/// Linear-softmax head for the cross-entropy regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxHead {
    pub weights: Array2<f64>,
    pub bias: Vec<f64>,
}

impl SoftmaxHead {
    pub fn logits(&self, t: &[f64]) -> Vec<f64> {
        self.weights
            .rows()
            .into_iter()
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(t).map(|(w, t)| w * t).sum::<f64>() + b)
            .collect()
    }

    pub fn probabilities(&self, t: &[f64]) -> Vec<f64> {
        softmax(&self.logits(t))
    }

    pub fn predict_class(&self, t: &[f64]) -> usize {
        argmax(&self.logits(t))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Classifier {
    Lipschitz(LipschitzClassifier),
    Softmax(SoftmaxHead),
}

/// A hypothesis decomposed as `w = g ∘ f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub feature: FeatureMap,
    pub classifier: Classifier,
}

impl Hypothesis {
    pub fn lipschitz(feature: FeatureMap, g: LipschitzClassifier) -> Result<Self> {
        if g.v.len() != feature.feature_dim() {
            return Err(Error::DimensionMismatch { expected: feature.feature_dim(), got: g.v.len() });
        }
        Ok(Self { feature, classifier: Classifier::Lipschitz(g) })
    }

    /// Real-valued prediction: the clamped score, or the argmax class id.
    pub fn predict(&self, x: &[f64]) -> f64 {
        let t = self.feature.apply(x);
        match &self.classifier {
            Classifier::Lipschitz(g) => g.predict(&t),
            Classifier::Softmax(h) => h.predict_class(&t) as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossKind {
    ClippedAbs,
    ZeroOne,
    CrossEntropy,
}

/// A bounded loss. The metric regimes take two real labels; cross-entropy
/// takes a class id and a probability vector (see [`cross_entropy`]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
}

impl LossSpec {
    pub const CLIPPED_ABS: Self = Self { kind: LossKind::ClippedAbs };
    pub const ZERO_ONE: Self = Self { kind: LossKind::ZeroOne };
    pub const CROSS_ENTROPY: Self = Self { kind: LossKind::CrossEntropy };

    pub fn is_metric(&self) -> bool {
        !matches!(self.kind, LossKind::CrossEntropy)
    }

    /// Lipschitz constant in each argument, when one exists.
    pub fn zeta(&self) -> Option<f64> {
        match self.kind {
            LossKind::ClippedAbs => Some(1.0),
            _ => None,
        }
    }

    /// Metric loss between two real labels. Panics in the cross-entropy regime.
    pub fn eval(&self, a: f64, b: f64) -> f64 {
        match self.kind {
            LossKind::ClippedAbs => (a - b).abs().min(1.0),
            LossKind::ZeroOne => {
                if a == b {
                    0.0
                } else {
                    1.0
                }
            }
            LossKind::CrossEntropy => panic!("cross-entropy is not a metric on labels"),
        }
    }
}

/// `-log p_y` computed from logits with log-sum-exp.
pub fn cross_entropy(logits: &[f64], y: usize) -> f64 {
    log_sum_exp(logits) - logits[y]
}

pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn softmax(v: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(v);
    v.iter().map(|x| (x - lse).exp()).collect()
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CostKind {
    FeatureOnly,
    Joint,
}

/// Nonnegative, finite `n_s × n_t` transport cost.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    pub entries: Array2<f64>,
    pub kind: CostKind,
}

impl CostMatrix {
    pub fn new(entries: Array2<f64>, kind: CostKind) -> Result<Self> {
        for ((row, col), &c) in entries.indexed_iter() {
            if !c.is_finite() || c < 0.0 {
                return Err(Error::NonFiniteCost { row, col });
            }
        }
        Ok(Self { entries, kind })
    }
}

/// Uniform measure of total mass `scale` over the features `f(x)`.
pub fn empirical_feature_measure(
    samples: &[Vec<f64>],
    f: &FeatureMap,
    scale: f64,
) -> Result<(DiscreteMeasure, Vec<Vec<f64>>)> {
    if samples.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    let features = f.apply_all(samples)?;
    let measure = DiscreteMeasure::uniform(samples.len(), scale)?;
    Ok((measure, features))
}

fn check_dims(source: &[Vec<f64>], target: &[Vec<f64>]) -> Result<usize> {
    let k = source.first().or(target.first()).map_or(0, Vec::len);
    for v in source.iter().chain(target) {
        if v.len() != k {
            return Err(Error::DimensionMismatch { expected: k, got: v.len() });
        }
    }
    Ok(k)
}

/// `C_ij = γ‖f_i − f̃_j‖`.
pub fn feature_cost_matrix(source_feats: &[Vec<f64>], target_feats: &[Vec<f64>], gamma: f64) -> Result<CostMatrix> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(invalid("gamma", format!("must be positive, got {gamma}")));
    }
    check_dims(source_feats, target_feats)?;
    let entries = Array2::from_shape_fn((source_feats.len(), target_feats.len()), |(i, j)| {
        gamma * distance(&source_feats[i], &target_feats[j])
    });
    CostMatrix::new(entries, CostKind::FeatureOnly)
}

/// `C_ij = ζγ‖f_i − f̃_j‖ + ℓ(y_i, ỹ_j)` with `ỹ` the predicted target labels.
pub fn joint_cost_matrix(
    source_feats: &[Vec<f64>],
    source_labels: &[f64],
    target_feats: &[Vec<f64>],
    predicted_labels: &[f64],
    zeta_gamma: f64,
    loss: LossSpec,
) -> Result<CostMatrix> {
    if !loss.is_metric() {
        return Err(Error::JointCostRequiresMetric);
    }
    if !(zeta_gamma >= 0.0) || !zeta_gamma.is_finite() {
        return Err(invalid("zeta_gamma", format!("must be nonnegative, got {zeta_gamma}")));
    }
    check_dims(source_feats, target_feats)?;
    if source_labels.len() != source_feats.len() {
        return Err(Error::DimensionMismatch { expected: source_feats.len(), got: source_labels.len() });
    }
    if predicted_labels.len() != target_feats.len() {
        return Err(Error::DimensionMismatch { expected: target_feats.len(), got: predicted_labels.len() });
    }
    let entries = Array2::from_shape_fn((source_feats.len(), target_feats.len()), |(i, j)| {
        zeta_gamma * distance(&source_feats[i], &target_feats[j]) + loss.eval(source_labels[i], predicted_labels[j])
    });
    CostMatrix::new(entries, CostKind::Joint)
}
