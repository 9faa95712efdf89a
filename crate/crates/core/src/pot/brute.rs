//! Vertex enumeration oracle for tiny partial OT instances.

use ndarray::Array2;

use super::{validate_problem, TransportPlan};
use crate::error::{Error, Result};

pub const BRUTE_FORCE_MAX_VARIABLES: usize = 6;

/// Enumerates every basic solution of the constraint system (the equality
/// `ΣΠ = α` plus `mn − 1` active inequalities among `Π ≥ 0`, row caps and
/// column caps) and returns the cheapest feasible one.
pub fn brute_force_partial_ot(a: &[f64], b: &[f64], cost: &Array2<f64>, alpha: f64) -> Result<(TransportPlan, f64)> {
    validate_problem(a, b, cost, alpha)?;
    let (m, n) = cost.dim();
    let vars = m * n;
    if vars > BRUTE_FORCE_MAX_VARIABLES {
        return Err(Error::TooLarge { variables: vars, max: BRUTE_FORCE_MAX_VARIABLES });
    }

    // Inequality rows as (coefficients, rhs) for `coef · x ≤ rhs` or, for
    // nonnegativity, `−x ≤ 0`.
    let mut ineq: Vec<(Vec<f64>, f64)> = Vec::new();
    for k in 0..vars {
        let mut row = vec![0.0; vars];
        row[k] = -1.0;
        ineq.push((row, 0.0));
    }
    for i in 0..m {
        let mut row = vec![0.0; vars];
        for j in 0..n {
            row[i * n + j] = 1.0;
        }
        ineq.push((row, a[i]));
    }
    for j in 0..n {
        let mut row = vec![0.0; vars];
        for i in 0..m {
            row[i * n + j] = 1.0;
        }
        ineq.push((row, b[j]));
    }
    let scale = 1.0 + a.iter().chain(b).fold(0.0f64, |s, x| s.max(*x));
    let feas_tol = 1e-10 * scale;

    let mut best: Option<(Vec<f64>, f64)> = None;
    for active in combinations(ineq.len(), vars - 1) {
        let mut mat = Vec::with_capacity(vars);
        let mut rhs = Vec::with_capacity(vars);
        mat.push(vec![1.0; vars]);
        rhs.push(alpha);
        for &k in &active {
            mat.push(ineq[k].0.clone());
            rhs.push(ineq[k].1);
        }
        let Some(x) = solve_dense(mat, rhs) else { continue };
        let feasible = ineq.iter().all(|(row, r)| row.iter().zip(&x).map(|(c, x)| c * x).sum::<f64>() <= r + feas_tol);
        if !feasible {
            continue;
        }
        let value: f64 = x.iter().zip(cost.iter()).map(|(x, c)| x * c).sum();
        if best.as_ref().is_none_or(|(_, v)| value < *v) {
            best = Some((x, value));
        }
    }
    let (x, value) = best.ok_or_else(|| Error::Solver("no feasible vertex".into()))?;
    let matrix = Array2::from_shape_fn((m, n), |(i, j)| x[i * n + j].max(0.0));
    Ok((TransportPlan::unchecked(matrix, a.to_vec(), b.to_vec(), alpha), value))
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_dense(mut mat: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| mat[i][col].abs().total_cmp(&mat[j][col].abs()))?;
        if mat[pivot][col].abs() < 1e-12 {
            return None;
        }
        mat.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..n {
            let factor = mat[row][col] / mat[col][col];
            if factor == 0.0 {
                continue;
            }
            for c in col..n {
                mat[row][c] -= factor * mat[col][c];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| mat[row][c] * x[c]).sum();
        x[row] = (rhs[row] - s) / mat[row][row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn single_cell() {
        let (_, v) = brute_force_partial_ot(&[2.0], &[1.5], &array![[4.0]], 0.75).unwrap();
        assert!((v - 3.0).abs() < 1e-12);
    }

    #[test]
    fn picks_cheapest_column_at_full_mass() {
        let (plan, v) = brute_force_partial_ot(&[0.4], &[0.5, 0.5], &array![[2.0, 1.0]], 0.4).unwrap();
        assert!((v - 0.4).abs() < 1e-12);
        assert!((plan.matrix[[0, 1]] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn reference_instance() {
        let c = array![[1.0, 2.0], [3.0, 0.0]];
        let (_, v) = brute_force_partial_ot(&[0.6, 0.4], &[0.5, 0.5], &c, 0.5).unwrap();
        assert!((v - 0.1).abs() < 1e-12);
    }

    #[test]
    fn too_large() {
        let c = Array2::zeros((3, 3));
        assert!(matches!(brute_force_partial_ot(&[1.0; 3], &[1.0; 3], &c, 1.0), Err(Error::TooLarge { .. })));
    }
}
