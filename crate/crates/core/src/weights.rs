//! Source/target weights derived from transport plans, the TV correction,
//! and the competing source weighting schemes.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::measures::{feature_cost_matrix, norm};
use crate::pot::{exact_partial_ot, flow, TransportPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    Warmpot,
    Uniform,
    Ba3us,
    Arpm,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Warmpot => "warmpot",
            Scheme::Uniform => "uniform",
            Scheme::Ba3us => "ba3us",
            Scheme::Arpm => "arpm",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "warmpot" => Ok(Scheme::Warmpot),
            "uniform" => Ok(Scheme::Uniform),
            "ba3us" => Ok(Scheme::Ba3us),
            "arpm" => Ok(Scheme::Arpm),
            other => Err(invalid("scheme", format!("unknown scheme `{other}`"))),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub values: Vec<f64>,
    /// The mass the values are measured against (`α` for plan marginals).
    pub normalizer: f64,
    pub scheme: Scheme,
}

impl WeightVector {
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Row sums `p` and column sums `q` of a plan.
pub fn marginal_weights(plan: &TransportPlan) -> (WeightVector, WeightVector) {
    let p = WeightVector { values: plan.row_sums(), normalizer: plan.mass, scheme: Scheme::Warmpot };
    let q = WeightVector { values: plan.col_sums(), normalizer: plan.mass, scheme: Scheme::Warmpot };
    (p, q)
}

/// `½ Σ_j |1/n_t − q_j/α|`.
pub fn tv_term(q: &[f64], alpha: f64, n_t: usize) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(invalid("alpha", format!("must be positive, got {alpha}")));
    }
    if q.len() != n_t {
        return Err(Error::DimensionMismatch { expected: n_t, got: q.len() });
    }
    let u = 1.0 / n_t as f64;
    Ok(0.5 * q.iter().map(|qj| (u - qj / alpha).abs()).sum::<f64>())
}

/// Scale `p_i` by `β n_s` so a source atom used at full capacity reads 1.
pub fn normalized_source_weights(p: &WeightVector, beta: f64, n_s: usize) -> Result<WeightVector> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(invalid("beta", format!("must lie in (0, 1], got {beta}")));
    }
    let factor = beta * n_s as f64;
    let cap = 1.0 / factor;
    let mut values = Vec::with_capacity(p.len());
    for (index, &v) in p.values.iter().enumerate() {
        if v > cap + 1e-9 {
            return Err(Error::CapViolation { index, value: v, cap });
        }
        values.push((v * factor).clamp(0.0, 1.0));
    }
    Ok(WeightVector { values, normalizer: 1.0, scheme: p.scheme })
}

pub fn scheme_uniform(n_s: usize) -> Result<WeightVector> {
    if n_s == 0 {
        return Err(Error::EmptyMeasure);
    }
    Ok(WeightVector { values: vec![1.0 / n_s as f64; n_s], normalizer: 1.0, scheme: Scheme::Uniform })
}

/// Weight of source sample `i` is the fraction of target predictions equal
/// to its label.
pub fn scheme_ba3us(target_predictions: &[f64], source_labels: &[f64]) -> Result<WeightVector> {
    if target_predictions.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    let n_t = target_predictions.len() as f64;
    let values =
        source_labels.iter().map(|y| target_predictions.iter().filter(|&&p| p == *y).count() as f64 / n_t).collect();
    Ok(WeightVector { values, normalizer: 1.0, scheme: Scheme::Ba3us })
}

/// Balanced `W₁(Σ p̂_i δ_{s_i}, uniform over targets)` with its optimal
/// source potentials.
pub fn w1_to_uniform_target(
    weights: &[f64],
    source_feats: &[Vec<f64>],
    target_feats: &[Vec<f64>],
) -> Result<(f64, Vec<f64>)> {
    let cost = feature_cost_matrix(source_feats, target_feats, 1.0)?.entries;
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroWeight);
    }
    let supply: Vec<f64> = weights.iter().map(|w| w.max(0.0) / total).collect();
    let demand = vec![1.0 / target_feats.len() as f64; target_feats.len()];
    let sol = flow::solve_balanced(&supply, &demand, &cost)?;
    let value = sol.flow.iter().zip(cost.iter()).map(|(p, c)| p * c).sum();
    Ok((value, sol.row_dual))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArpmConfig {
    pub rho: f64,
    pub subgradient_steps: usize,
    pub step_size: f64,
}

impl Default for ArpmConfig {
    fn default() -> Self {
        Self { rho: 0.5, subgradient_steps: 300, step_size: 0.5 }
    }
}

/// Projected subgradient on `min_{p̂ ∈ Δ} W₁(Σ p̂_i δ_{f(x_i)}, Q_t^f)` where
/// `Δ = simplex ∩ {‖p̂ − 1/n_s‖² ≤ ρ/n_s}`. Optimal dual source potentials
/// serve as subgradients; the best iterate is returned, so the result is
/// never worse than uniform.
pub fn scheme_arpm(source_feats: &[Vec<f64>], target_feats: &[Vec<f64>], cfg: &ArpmConfig) -> Result<WeightVector> {
    if !(cfg.rho >= 0.0) {
        return Err(invalid("rho", format!("must be nonnegative, got {}", cfg.rho)));
    }
    if !(cfg.step_size > 0.0) || cfg.subgradient_steps == 0 {
        return Err(invalid("arpm", "step_size and subgradient_steps must be positive"));
    }
    let n_s = source_feats.len();
    let uniform = scheme_uniform(n_s)?;
    if cfg.rho == 0.0 {
        return Ok(WeightVector { scheme: Scheme::Arpm, ..uniform });
    }
    let radius = (cfg.rho / n_s as f64).sqrt();
    let mut p = uniform.values.clone();
    let (mut value, mut potentials) = w1_to_uniform_target(&p, source_feats, target_feats)?;
    let mut best = (value, p.clone());
    for k in 0..cfg.subgradient_steps {
        let mean = potentials.iter().sum::<f64>() / n_s as f64;
        let g: Vec<f64> = potentials.iter().map(|u| u - mean).collect();
        let gnorm = norm(&g);
        if gnorm < 1e-15 {
            break;
        }
        let step = cfg.step_size * radius.min(1.0) / ((k + 1) as f64).sqrt() / gnorm;
        let trial: Vec<f64> = p.iter().zip(&g).map(|(pi, gi)| pi - step * gi).collect();
        p = project_simplex_ball(&trial, radius);
        (value, potentials) = w1_to_uniform_target(&p, source_feats, target_feats)?;
        if value < best.0 {
            best = (value, p.clone());
        }
    }
    Ok(WeightVector { values: best.1, normalizer: 1.0, scheme: Scheme::Arpm })
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cumulative += ui;
        let t = (cumulative - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Dykstra's alternating projection onto `simplex ∩ B(uniform, radius)`,
/// 100 rounds or until the iterate moves less than `1e-10`. The result is
/// pulled radially towards the centre so it is exactly feasible.
pub fn project_simplex_ball(v: &[f64], radius: f64) -> Vec<f64> {
    let n = v.len();
    let center = 1.0 / n as f64;
    let ball = |x: &[f64]| -> Vec<f64> {
        let d = x.iter().map(|xi| (xi - center) * (xi - center)).sum::<f64>().sqrt();
        if d <= radius {
            x.to_vec()
        } else {
            x.iter().map(|xi| center + (xi - center) * radius / d).collect()
        }
    };
    let mut x = v.to_vec();
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    for _ in 0..100 {
        let xp: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + b).collect();
        let y = project_simplex(&xp);
        p = xp.iter().zip(&y).map(|(a, b)| a - b).collect();
        let yq: Vec<f64> = y.iter().zip(&q).map(|(a, b)| a + b).collect();
        let next = ball(&yq);
        q = yq.iter().zip(&next).map(|(a, b)| a - b).collect();
        let moved = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        x = next;
        if moved < 1e-10 {
            break;
        }
    }
    // simplex point pulled towards the centre stays in the simplex
    ball(&project_simplex(&x))
}

/// Solves `min_{p̂ ∈ Γ} W₁(Σ p̂_i δ_{s_i}, Q_t^f)` over the capped simplex
/// `Γ = {p̂ ≥ 0, Σp̂ = 1, p̂_i ≤ 1/(β n_s)}` as a partial OT problem with
/// `α = 1` and returns the row sums of its optimal plan.
pub fn gamma_constrained_weights(
    source_feats: &[Vec<f64>],
    target_feats: &[Vec<f64>],
    beta: f64,
) -> Result<WeightVector> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(invalid("beta", format!("must lie in (0, 1], got {beta}")));
    }
    let n_s = source_feats.len();
    let n_t = target_feats.len();
    if n_s == 0 || n_t == 0 {
        return Err(Error::EmptyMeasure);
    }
    let cost = feature_cost_matrix(source_feats, target_feats, 1.0)?.entries;
    let a = vec![1.0 / (beta * n_s as f64); n_s];
    let b = vec![1.0 / n_t as f64; n_t];
    let (plan, _) = exact_partial_ot(&a, &b, &cost, 1.0)?;
    Ok(WeightVector { values: plan.row_sums(), normalizer: 1.0, scheme: Scheme::Warmpot })
}

/// Counts of `values` in `bins` equal-width bins on `[0, 1]`; values are
/// clamped into the range and 1.0 falls in the last bin.
pub fn histogram(values: &[f64], bins: usize) -> Vec<usize> {
    let mut counts = vec![0usize; bins.max(1)];
    let last = counts.len() - 1;
    for &v in values {
        let idx = ((v.clamp(0.0, 1.0) * counts.len() as f64).floor() as usize).min(last);
        counts[idx] += 1;
    }
    counts
}

pub const HISTOGRAM_BINS: usize = 20;

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn plan(matrix: Array2<f64>, mass: f64) -> TransportPlan {
        let (m, n) = matrix.dim();
        TransportPlan::new(matrix, vec![1.0; m], vec![1.0; n], mass, 1e-9).unwrap()
    }

    #[test]
    fn uniform_plan_marginals() {
        let alpha = 0.6;
        let (p, q) = marginal_weights(&plan(Array2::from_elem((3, 4), alpha / 12.0), alpha));
        for v in &p.values {
            assert!((v - alpha / 3.0).abs() < 1e-15);
        }
        for v in &q.values {
            assert!((v - alpha / 4.0).abs() < 1e-15);
        }
    }

    #[test]
    fn reference_instance_marginals() {
        let c = array![[1.0, 2.0], [3.0, 0.0]];
        let (pl, _) = exact_partial_ot(&[0.6, 0.4], &[0.5, 0.5], &c, 0.5).unwrap();
        let (p, q) = marginal_weights(&pl);
        for (got, want) in p.values.iter().zip([0.1, 0.4]) {
            assert!((got - want).abs() < 1e-12);
        }
        for (got, want) in q.values.iter().zip([0.1, 0.4]) {
            assert!((got - want).abs() < 1e-12);
        }
        let caps = WeightVector { values: p.values.clone(), normalizer: 0.5, scheme: Scheme::Warmpot };
        let norm = normalized_source_weights(&caps, 1.0, 2).unwrap();
        assert!((norm.values[0] - 0.2).abs() < 1e-12 && (norm.values[1] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn full_mass_gives_uniform_target_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let beta = 0.35;
        let (n_s, n_t) = (8, 5);
        let c = Array2::from_shape_fn((n_s, n_t), |_| rng.gen_range(0.0..2.0));
        let a = vec![1.0 / (beta * n_s as f64); n_s];
        let b = vec![1.0 / n_t as f64; n_t];
        let (pl, _) = exact_partial_ot(&a, &b, &c, 1.0).unwrap();
        let (p, q) = marginal_weights(&pl);
        for v in &q.values {
            assert!((v - 0.2).abs() < 1e-12);
        }
        assert!(tv_term(&q.values, 1.0, n_t).unwrap() < 1e-12);
        assert!(p.values.iter().all(|&v| v <= 1.0 / (beta * n_s as f64) + 1e-12));
    }

    #[test]
    fn tv_cases() {
        assert_eq!(tv_term(&[0.25, 0.25], 0.5, 2).unwrap(), 0.0);
        assert_eq!(tv_term(&[0.5, 0.0], 0.5, 2).unwrap(), 0.5);
        assert!(tv_term(&[0.5], 0.0, 1).is_err());
    }

    #[test]
    fn tv_matches_explicit_distributions() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let n_t = rng.gen_range(1..10);
            let q: Vec<f64> = (0..n_t).map(|_| rng.gen_range(0.0..1.0)).collect();
            let alpha: f64 = q.iter().sum();
            // Q uniform on the targets, Q^q with masses q_j/α, both as maps atom → prob
            let uniform: Vec<f64> = vec![1.0 / n_t as f64; n_t];
            let reweighted: Vec<f64> = q.iter().map(|v| v / alpha).collect();
            let tv = 0.5 * uniform.iter().zip(&reweighted).map(|(a, b)| (a - b).abs()).sum::<f64>();
            assert!((tv_term(&q, alpha, n_t).unwrap() - tv).abs() < 1e-14);
        }
    }

    #[test]
    fn normalized_weights_edges() {
        let p = WeightVector { values: vec![1.0 / (0.5 * 4.0), 0.0], normalizer: 1.0, scheme: Scheme::Warmpot };
        let n = normalized_source_weights(&p, 0.5, 4).unwrap();
        assert_eq!(n.values, vec![1.0, 0.0]);
        let bad = WeightVector { values: vec![0.6], normalizer: 1.0, scheme: Scheme::Warmpot };
        assert!(matches!(normalized_source_weights(&bad, 1.0, 2), Err(Error::CapViolation { .. })));
    }

    #[test]
    fn uniform_scheme() {
        assert_eq!(scheme_uniform(4).unwrap().values, vec![0.25; 4]);
        assert_eq!(scheme_uniform(1).unwrap().values, vec![1.0]);
        for n in [3, 7, 19] {
            assert!((scheme_uniform(n).unwrap().total() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ba3us_counts() {
        let w = scheme_ba3us(&[0.0, 0.0, 1.0, 2.0], &[0.0, 1.0]).unwrap();
        assert_eq!(w.values, vec![0.5, 0.25]);
        let w = scheme_ba3us(&[0.0, 0.0], &[3.0]).unwrap();
        assert_eq!(w.values, vec![0.0]);
    }

    #[test]
    fn ba3us_matches_histogram() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let preds: Vec<f64> = (0..40).map(|_| rng.gen_range(0..5) as f64).collect();
        let labels: Vec<f64> = (0..25).map(|_| rng.gen_range(0..6) as f64).collect();
        let mut hist = [0usize; 6];
        for &p in &preds {
            hist[p as usize] += 1;
        }
        let w = scheme_ba3us(&preds, &labels).unwrap();
        for (v, y) in w.values.iter().zip(&labels) {
            assert_eq!(*v, hist[*y as usize] as f64 / 40.0);
        }
    }

    fn cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect()
    }

    #[test]
    fn arpm_rho_zero_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s = cloud(&mut rng, 5);
        let t = cloud(&mut rng, 4);
        let w = scheme_arpm(&s, &t, &ArpmConfig { rho: 0.0, ..Default::default() }).unwrap();
        assert_eq!(w.values, vec![0.2; 5]);
        assert!(scheme_arpm(&s, &t, &ArpmConfig { rho: -1.0, ..Default::default() }).is_err());
    }

    #[test]
    fn arpm_never_worse_than_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let s = cloud(&mut rng, 6);
            let t = cloud(&mut rng, 5);
            let w = scheme_arpm(&s, &t, &ArpmConfig::default()).unwrap();
            let (v, _) = w1_to_uniform_target(&w.values, &s, &t).unwrap();
            let (u, _) = w1_to_uniform_target(&[1.0 / 6.0; 6], &s, &t).unwrap();
            assert!(v <= u + 1e-12);
            assert!((w.total() - 1.0).abs() < 1e-9);
            let dev: f64 = w.values.iter().map(|p| (p - 1.0 / 6.0).powi(2)).sum();
            assert!(dev <= 0.5 / 6.0 + 1e-9);
        }
    }

    #[test]
    fn arpm_matches_target_frequencies_when_supports_coincide() {
        // targets: A, A, A, B  →  optimal weights (0.75, 0.25, 0)
        let s = vec![vec![0.0, 0.0], vec![3.0, 0.0], vec![0.0, 3.0]];
        let t = vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![0.0, 0.0], vec![3.0, 0.0]];
        let cfg = ArpmConfig { rho: 100.0, subgradient_steps: 2000, step_size: 0.5 };
        let w = scheme_arpm(&s, &t, &cfg).unwrap();
        let (v, _) = w1_to_uniform_target(&w.values, &s, &t).unwrap();
        let (exact, _) =
            exact_partial_ot(&[0.75, 0.25, 0.0], &[0.25; 4], &feature_cost_matrix(&s, &t, 1.0).unwrap().entries, 1.0)
                .unwrap();
        assert!(exact.cost(&feature_cost_matrix(&s, &t, 1.0).unwrap().entries) < 1e-12);
        assert!(v < 1e-3, "objective {v}");
        assert!((w.values[0] - 0.75).abs() < 1e-3 && (w.values[1] - 0.25).abs() < 1e-3);
    }

    #[test]
    fn arpm_close_to_grid_search() {
        let s = vec![vec![0.0, 0.0], vec![1.0, 0.5], vec![-0.5, 1.2]];
        let t = vec![vec![0.8, 0.4], vec![0.1, -0.2]];
        let rho = 0.3;
        let cfg = ArpmConfig { rho, subgradient_steps: 2000, step_size: 0.5 };
        let w = scheme_arpm(&s, &t, &cfg).unwrap();
        let (v, _) = w1_to_uniform_target(&w.values, &s, &t).unwrap();
        let grid = 300;
        let mut best = f64::INFINITY;
        for i in 0..=grid {
            for j in 0..=grid - i {
                let p = [i as f64 / grid as f64, j as f64 / grid as f64, (grid - i - j) as f64 / grid as f64];
                let dev: f64 = p.iter().map(|x| (x - 1.0 / 3.0).powi(2)).sum();
                if dev > rho / 3.0 {
                    continue;
                }
                best = best.min(w1_to_uniform_target(&p, &s, &t).unwrap().0);
            }
        }
        assert!(v <= best * 1.01, "arpm {v} vs grid {best}");
    }

    #[test]
    fn gamma_weights_beta_one_are_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = cloud(&mut rng, 5);
        let t = cloud(&mut rng, 3);
        let w = gamma_constrained_weights(&s, &t, 1.0).unwrap();
        for v in &w.values {
            assert!((v - 0.2).abs() < 1e-12);
        }
        assert!(gamma_constrained_weights(&s, &t, 0.0).is_err());
    }

    #[test]
    fn gamma_weights_match_marginals_of_full_mass_plan() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let s = cloud(&mut rng, 6);
            let t = cloud(&mut rng, 4);
            let beta = rng.gen_range(0.2..1.0);
            let g = gamma_constrained_weights(&s, &t, beta).unwrap();
            let cost = feature_cost_matrix(&s, &t, 1.0).unwrap().entries;
            let (pl, pw) = exact_partial_ot(&[1.0 / (beta * 6.0); 6], &[0.25; 4], &cost, 1.0).unwrap();
            let (p, _) = marginal_weights(&pl);
            let (vg, _) = w1_to_uniform_target(&g.values, &s, &t).unwrap();
            let (vp, _) = w1_to_uniform_target(&p.values, &s, &t).unwrap();
            assert!((vg - vp).abs() < 1e-9 && (vp - pw).abs() < 1e-9);
        }
    }

    #[test]
    fn histogram_bins() {
        let h = histogram(&[0.0, 0.04, 0.05, 0.5, 0.99, 1.0], 20);
        assert_eq!(h.len(), 20);
        assert_eq!((h[0], h[1], h[10], h[19]), (2, 1, 1, 2));
        assert_eq!(h.iter().sum::<usize>(), 6);
    }

    proptest! {
        #[test]
        fn simplex_ball_projection_is_feasible(
            v in proptest::collection::vec(-2.0..2.0f64, 2..8),
            rho in 0.0..2.0f64,
        ) {
            let n = v.len();
            let r = (rho / n as f64).sqrt();
            let p = project_simplex_ball(&v, r);
            prop_assert!(p.iter().all(|&x| x >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let dev: f64 = p.iter().map(|x| (x - 1.0 / n as f64).powi(2)).sum::<f64>().sqrt();
            prop_assert!(dev <= r + 1e-12);
        }

        #[test]
        fn plan_marginals_sum_to_mass(
            seed in 0u64..1000,
            m in 1usize..6,
            n in 1usize..6,
            frac in 0.05..1.0f64,
            beta in 0.2..1.0f64,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = Array2::from_shape_fn((m, n), |_| rng.gen_range(0.0..1.0));
            let a = vec![1.0 / (beta * m as f64); m];
            let b = vec![1.0 / n as f64; n];
            let alpha = frac;
            let (pl, _) = exact_partial_ot(&a, &b, &c, alpha).unwrap();
            let (p, q) = marginal_weights(&pl);
            prop_assert!((p.total() - alpha).abs() < 1e-9);
            prop_assert!((q.total() - alpha).abs() < 1e-9);
            prop_assert!(p.values.iter().all(|&v| v >= -1e-12 && v <= a[0] + 1e-9));
            prop_assert!(q.values.iter().all(|&v| v >= -1e-12 && v <= b[0] + 1e-9));
        }
    }
}
