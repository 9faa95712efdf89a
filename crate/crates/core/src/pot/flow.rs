//! Successive shortest paths for the dense balanced transportation problem
//! with real-valued supplies and demands.
//!
//! Node layout: rows `0..m`, columns `m..m+n`, super source `m+n`, super
//! sink `m+n+1`. Row→column arcs are uncapacitated; column→row residual
//! arcs carry the current flow. Node potentials keep reduced costs
//! nonnegative so Dijkstra applies, and at termination they are an optimal
//! dual solution.

use ndarray::Array2;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BalancedSolution {
    pub flow: Array2<f64>,
    /// Dual `u_i` for each row constraint.
    pub row_dual: Vec<f64>,
    /// Dual `v_j` for each column constraint; `u_i + v_j ≤ C_ij` with
    /// equality wherever flow is positive.
    pub col_dual: Vec<f64>,
}

const NONE: usize = usize::MAX;

/// Minimise `Σ C_ij Π_ij` subject to `Π 1 = supply`, `Πᵀ 1 = demand`,
/// `Π ≥ 0`. Totals must agree to within a relative `1e-9`.
pub fn solve_balanced(supply: &[f64], demand: &[f64], cost: &Array2<f64>) -> Result<BalancedSolution> {
    let (m, n) = cost.dim();
    if supply.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: supply.len() });
    }
    if demand.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: demand.len() });
    }
    let total_s: f64 = supply.iter().sum();
    let total_d: f64 = demand.iter().sum();
    let scale = total_s.max(total_d).max(1.0);
    if (total_s - total_d).abs() > 1e-9 * scale {
        return Err(Error::Solver(format!("unbalanced totals {total_s} vs {total_d}")));
    }
    let eps = 1e-12 * scale;

    let source = m + n;
    let sink = m + n + 1;
    let nodes = m + n + 2;

    let mut flow = Array2::<f64>::zeros((m, n));
    let mut rem_s = supply.to_vec();
    let mut rem_d = demand.to_vec();

    // Initial potentials are shortest distances in the acyclic initial graph,
    // which admits negative costs.
    let mut pi = vec![0.0; nodes];
    for j in 0..n {
        pi[m + j] = (0..m).map(|i| cost[[i, j]]).fold(f64::INFINITY, f64::min);
    }
    pi[sink] = (0..n).map(|j| pi[m + j]).fold(f64::INFINITY, f64::min);
    if m == 0 || n == 0 {
        return Ok(BalancedSolution { flow, row_dual: vec![0.0; m], col_dual: vec![0.0; n] });
    }

    let mut dist = vec![f64::INFINITY; nodes];
    let mut parent = vec![NONE; nodes];
    let mut done = vec![false; nodes];
    let max_rounds = 16 * (m + n) * (m + n) + 64;

    for _ in 0..max_rounds {
        if rem_s.iter().sum::<f64>() <= eps * (m as f64) {
            break;
        }
        dist.fill(f64::INFINITY);
        parent.fill(NONE);
        done.fill(false);
        dist[source] = 0.0;
        // source → rows with remaining supply
        done[source] = true;
        for i in 0..m {
            if rem_s[i] > eps {
                let rc = (pi[source] - pi[i]).max(0.0);
                if rc < dist[i] {
                    dist[i] = rc;
                    parent[i] = source;
                }
            }
        }
        loop {
            let mut u = NONE;
            let mut best = f64::INFINITY;
            for v in 0..nodes {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = v;
                }
            }
            if u == NONE {
                break;
            }
            done[u] = true;
            if u == sink {
                break;
            }
            if u < m {
                for j in 0..n {
                    let v = m + j;
                    if done[v] {
                        continue;
                    }
                    let rc = (cost[[u, j]] + pi[u] - pi[v]).max(0.0);
                    if dist[u] + rc < dist[v] {
                        dist[v] = dist[u] + rc;
                        parent[v] = u;
                    }
                }
            } else {
                let j = u - m;
                for i in 0..m {
                    if done[i] || flow[[i, j]] <= eps {
                        continue;
                    }
                    let rc = (-cost[[i, j]] + pi[u] - pi[i]).max(0.0);
                    if dist[u] + rc < dist[i] {
                        dist[i] = dist[u] + rc;
                        parent[i] = u;
                    }
                }
                if rem_d[j] > eps && !done[sink] {
                    let rc = (pi[u] - pi[sink]).max(0.0);
                    if dist[u] + rc < dist[sink] {
                        dist[sink] = dist[u] + rc;
                        parent[sink] = u;
                    }
                }
            }
        }
        if !dist[sink].is_finite() {
            return Err(Error::Solver("no augmenting path with supply remaining".into()));
        }
        let cap = dist[sink];
        for v in 0..nodes {
            pi[v] += dist[v].min(cap);
        }

        // Walk back from the sink to find the bottleneck.
        let last_col = parent[sink];
        let mut bottleneck = rem_d[last_col - m];
        let mut v = last_col;
        loop {
            let u = parent[v];
            if u == source {
                bottleneck = bottleneck.min(rem_s[v]);
                break;
            }
            if u >= m {
                // column u → row v uses reverse residual
                bottleneck = bottleneck.min(flow[[v, u - m]]);
            }
            v = u;
        }
        let mut v = last_col;
        rem_d[last_col - m] -= bottleneck;
        loop {
            let u = parent[v];
            if u == source {
                rem_s[v] -= bottleneck;
                break;
            }
            if u < m {
                flow[[u, v - m]] += bottleneck;
            } else {
                flow[[v, u - m]] -= bottleneck;
                if flow[[v, u - m]] < eps {
                    flow[[v, u - m]] = 0.0;
                }
            }
            v = u;
        }
    }
    if rem_s.iter().sum::<f64>() > eps * (m as f64) + 1e-10 * scale {
        return Err(Error::Solver("successive shortest paths did not terminate".into()));
    }

    let row_dual = (0..m).map(|i| -pi[i]).collect();
    let col_dual = (0..n).map(|j| pi[m + j]).collect();
    Ok(BalancedSolution { flow, row_dual, col_dual })
}
