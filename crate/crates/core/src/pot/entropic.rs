//! Entropic partial OT by iterated KL projections with Dykstra corrections.

use ndarray::{Array2, Zip};

use super::{validate_problem, SolverConfig, TransportPlan};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct EntropicResult {
    pub plan: TransportPlan,
    pub converged: bool,
    pub iterations: usize,
    /// Max-abs change of the plan over the last sweep.
    pub last_change: f64,
    pub eps: f64,
}

/// Each sweep projects (in KL) onto `{Π1 ≤ a}` by row scaling
/// `min(a ⊘ Π1, 1)`, onto `{Πᵀ1 ≤ b}` by column scaling, and onto
/// `{ΣΠ = α}` by a global rescale, with Dykstra corrections so the
/// iterates converge to the KL projection of `exp(−C/ε)` onto the
/// intersection. Each projection rescales whole rows, columns or the whole
/// matrix, so the plan is always `diag(e^x) K diag(e^y) e^z` and the
/// corrections are per-row, per-column and scalar; everything is carried in
/// the log domain.
///
/// The stopping rule is a max-abs plan change below `cfg.tol` between
/// sweeps together with both caps holding to the same tolerance.
/// Non-convergence is reported through [`EntropicResult::converged`], not as
/// an error.
pub fn entropic_partial_ot(
    a: &[f64],
    b: &[f64],
    cost: &Array2<f64>,
    alpha: f64,
    cfg: &SolverConfig,
) -> Result<EntropicResult> {
    cfg.validate()?;
    validate_problem(a, b, cost, alpha)?;
    let (m, n) = cost.dim();

    // Zero-mass atoms carry no plan mass; solve on the rest.
    let rows: Vec<usize> = (0..m).filter(|&i| a[i] > 0.0).collect();
    let cols: Vec<usize> = (0..n).filter(|&j| b[j] > 0.0).collect();
    let (mr, nc) = (rows.len(), cols.len());

    let log_k = Array2::from_shape_fn((mr, nc), |(i, j)| -cost[[rows[i], cols[j]]] / cfg.eps);
    if log_k.iter().any(|x| !x.is_finite()) {
        return Err(Error::KernelRange { eps: cfg.eps });
    }
    let log_a: Vec<f64> = rows.iter().map(|&i| a[i].ln()).collect();
    let log_b: Vec<f64> = cols.iter().map(|&j| b[j].ln()).collect();
    let log_alpha = alpha.ln();

    // log plan = log_k + x_i + y_j + z
    let mut x = vec![0.0; mr];
    let mut y = vec![0.0; nc];
    let mut z = log_alpha - lse(log_k.iter().copied());
    // Dykstra corrections (logs of q1, q2, q3)
    let mut rho = vec![0.0; mr];
    let mut kappa = vec![0.0; nc];
    let mut tau = 0.0;

    let plan_of = |x: &[f64], y: &[f64], z: f64| {
        Array2::from_shape_fn((mr, nc), |(i, j)| (log_k[[i, j]] + x[i] + y[j] + z).exp())
    };
    let mut current = plan_of(&x, &y, z);
    let mut converged = false;
    let mut iterations = 0;
    let mut last_change = f64::INFINITY;

    for it in 0..cfg.max_iter {
        iterations = it + 1;

        for i in 0..mr {
            x[i] += rho[i];
            let row_lse = lse((0..nc).map(|j| log_k[[i, j]] + x[i] + y[j] + z));
            let s = (log_a[i] - row_lse).min(0.0);
            x[i] += s;
            rho[i] = -s;
        }
        for j in 0..nc {
            y[j] += kappa[j];
            let col_lse = lse((0..mr).map(|i| log_k[[i, j]] + x[i] + y[j] + z));
            let t = (log_b[j] - col_lse).min(0.0);
            y[j] += t;
            kappa[j] = -t;
        }
        z += tau;
        let total_lse = lse(log_k.indexed_iter().map(|((i, j), l)| l + x[i] + y[j] + z));
        let sigma = log_alpha - total_lse;
        z += sigma;
        tau = -sigma;

        let next = plan_of(&x, &y, z);
        last_change = Zip::from(&next).and(&current).fold(0.0f64, |acc, &p, &q| acc.max((p - q).abs()));
        current = next;
        if !last_change.is_finite() {
            return Err(Error::KernelRange { eps: cfg.eps });
        }
        // A sweep can return to its starting point while the caps are still
        // violated, so stationarity alone is not enough.
        if last_change < cfg.tol && cap_violation(&current, &rows, &cols, a, b) < cfg.tol.max(1e-12) {
            converged = true;
            break;
        }
    }

    let mut matrix = Array2::<f64>::zeros((m, n));
    for (ii, &i) in rows.iter().enumerate() {
        for (jj, &j) in cols.iter().enumerate() {
            matrix[[i, j]] = current[[ii, jj]];
        }
    }
    let plan = TransportPlan::unchecked(matrix, a.to_vec(), b.to_vec(), alpha);
    Ok(EntropicResult { plan, converged, iterations, last_change, eps: cfg.eps })
}

fn lse(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn cap_violation(plan: &Array2<f64>, rows: &[usize], cols: &[usize], a: &[f64], b: &[f64]) -> f64 {
    let r = plan.rows().into_iter().zip(rows).map(|(r, &i)| r.sum() - a[i]);
    let c = plan.columns().into_iter().zip(cols).map(|(c, &j)| c.sum() - b[j]);
    r.chain(c).fold(0.0, f64::max)
}
