use ndarray::Array2;
use potpda::bounds::{random_instance, theorem1_rhs, theorem2_rhs, BoundReport};
use potpda::measures::LossSpec;
use potpda::pot::{entropic_partial_ot, exact_partial_ot, Method, SolverConfig};
use potpda::synthbench::{bench_config, generate_pda_task, TaskSpec};
use potpda::warmpot::{train, TrainConfig};
use potpda::weights::{histogram, Scheme, HISTOGRAM_BINS};
use serde::Serialize;

pub fn json(v: &impl Serialize) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Serialize)]
pub struct PlanView {
    pub plan: Vec<Vec<f64>>,
    pub cost: f64,
    pub mass: f64,
    pub row_sums: Vec<f64>,
    pub col_sums: Vec<f64>,
    pub row_cap: f64,
    pub method: &'static str,
}

/// Points on a line with source masses `1/(β n_s)`, target masses `1/n_t`
/// and cost `|s_i − t_j|`; exact when `eps ≤ 0`, entropic otherwise.
pub fn solve_points(source: &[f64], target: &[f64], beta: f64, alpha: f64, eps: f64) -> Result<PlanView, String> {
    if source.is_empty() || target.is_empty() {
        return Err("need at least one source and one target point".into());
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(format!("beta must lie in (0, 1], got {beta}"));
    }
    let (m, n) = (source.len(), target.len());
    let row_cap = 1.0 / (beta * m as f64);
    let a = vec![row_cap; m];
    let b = vec![1.0 / n as f64; n];
    let c = Array2::from_shape_fn((m, n), |(i, j)| (source[i] - target[j]).abs());
    let (plan, method) = if eps > 0.0 {
        let cfg = SolverConfig { eps, ..SolverConfig::default() };
        (entropic_partial_ot(&a, &b, &c, alpha, &cfg).map_err(|e| e.to_string())?.plan, "entropic")
    } else {
        (exact_partial_ot(&a, &b, &c, alpha).map_err(|e| e.to_string())?.0, "exact")
    };
    Ok(PlanView {
        plan: plan.matrix.rows().into_iter().map(|r| r.to_vec()).collect(),
        cost: plan.cost(&c),
        mass: plan.total_mass(),
        row_sums: plan.row_sums(),
        col_sums: plan.col_sums(),
        row_cap,
        method,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundView {
    pub report: BoundReport,
    pub slack: f64,
    pub n_s: usize,
    pub n_t: usize,
}

/// Right-hand side terms of the feature-based (1) or joint (2) bound on the
/// random instance drawn from `seed`, at the given `α` and `β`.
pub fn bound_terms(seed: u64, theorem: u8, alpha: f64, beta: f64) -> Result<BoundView, String> {
    let inst = random_instance(seed, 30).map_err(|e| e.to_string())?;
    let f = match theorem {
        1 => theorem1_rhs,
        2 => theorem2_rhs,
        other => return Err(format!("theorem must be 1 or 2, got {other}")),
    };
    let report =
        f(&inst.hypothesis, &inst.data, alpha, beta, inst.gamma, &inst.set, LossSpec::CLIPPED_ABS, Method::Exact)
            .map_err(|e| e.to_string())?;
    Ok(BoundView { slack: report.slack(), n_s: inst.data.source_x.len(), n_t: inst.data.target_x.len(), report })
}

#[derive(Debug, Clone, Serialize)]
pub struct WeightsView {
    pub scheme: String,
    pub accuracy: Option<f64>,
    pub outlier_share: Option<f64>,
    pub outlier_sample_share: f64,
    pub histogram: Vec<usize>,
    /// Mean normalized weight per source class.
    pub class_means: Vec<f64>,
    pub objective: Vec<f64>,
}

/// Trains on a small standard synthetic task (3 of 5 classes shared) and
/// returns the source weights of the trained model.
pub fn train_weights(scheme: &str, shift: f64, alpha_max: f64, iters: usize, seed: u64) -> Result<WeightsView, String> {
    let scheme: Scheme = scheme.parse().map_err(|e: potpda::Error| e.to_string())?;
    let spec = TaskSpec { n_s: 150, n_t: 90, shift, seed, ..TaskSpec::standard() };
    let data = generate_pda_task(&spec).map_err(|e| e.to_string())?;
    let iters = iters.max(2);
    let cfg = TrainConfig { total_iters: iters, ramp_iters: iters / 2, alpha_max, scheme, seed, ..bench_config() };
    let r = train(&data, &cfg).map_err(|e| e.to_string())?;
    let mut sums = vec![0.0; spec.classes];
    let mut counts = vec![0usize; spec.classes];
    for (w, s) in r.normalized_weights.iter().zip(&data.source) {
        let c = s.y as usize;
        sums[c] += w;
        counts[c] += 1;
    }
    Ok(WeightsView {
        scheme: scheme.name().to_string(),
        accuracy: r.target_accuracy,
        outlier_share: r.outlier_share,
        outlier_sample_share: spec.outlier_sample_share(),
        histogram: histogram(&r.normalized_weights, HISTOGRAM_BINS),
        class_means: sums.iter().zip(&counts).map(|(s, &c)| s / c.max(1) as f64).collect(),
        objective: r.trace.iter().map(|t| t.objective).collect(),
    })
}
