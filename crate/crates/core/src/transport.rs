//! Exact discrete optimal transport by successive shortest paths.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{param, Result};
use crate::math::abs;

/// Masses below this are treated as exhausted.
const MASS_EPS: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq)]
pub struct TransportSolution {
    pub cost: f64,
    /// Nonzero entries `(i, j, mass)` of the optimal plan.
    pub plan: Vec<(usize, usize, f64)>,
    /// Dual potentials with `u_i + v_j <= c_ij` and `sum a u + sum b v = cost`.
    pub dual_u: Vec<f64>,
    pub dual_v: Vec<f64>,
}

/// Minimum-cost coupling of `supply` and `demand` under a nonnegative cost.
///
/// Both sides must carry the same total mass up to rounding; `demand` is
/// rescaled to the supply total.
pub fn transport(supply: &[f64], demand: &[f64], cost: &dyn Fn(usize, usize) -> f64) -> Result<TransportSolution> {
    let m = supply.len();
    let n = demand.len();
    let sa: f64 = supply.iter().sum();
    let sb: f64 = demand.iter().sum();
    if supply.iter().chain(demand).any(|&x| !(x >= 0.0)) {
        return param("masses must be nonnegative");
    }
    if abs(sa - sb) > 1e-9 * sa.max(sb).max(1.0) {
        return param("supply and demand totals differ");
    }
    let c: Vec<f64> = (0..m * n).map(|k| cost(k / n, k % n)).collect();
    if c.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return param("costs must be finite and nonnegative");
    }
    let mut left: Vec<f64> = supply.to_vec();
    let mut right: Vec<f64> = demand.iter().map(|x| if sb > 0.0 { x * sa / sb } else { 0.0 }).collect();
    let mut flow = vec![0.0; m * n];
    // Node potentials: left nodes 0..m, right nodes m..m+n.
    let mut pot = vec![0.0; m + n];
    let total = m + n;
    let mut guard = 0usize;
    while left.iter().any(|&x| x > MASS_EPS) && right.iter().any(|&x| x > MASS_EPS) {
        guard += 1;
        if guard > 8 * (m + 1) * (n + 1) + 64 {
            break;
        }
        let mut dist = vec![f64::INFINITY; total];
        let mut prev = vec![usize::MAX; total];
        let mut done = vec![false; total];
        for i in 0..m {
            if left[i] > MASS_EPS {
                dist[i] = 0.0;
            }
        }
        let mut target = usize::MAX;
        loop {
            let mut best = usize::MAX;
            let mut bd = f64::INFINITY;
            for k in 0..total {
                if !done[k] && dist[k] < bd {
                    bd = dist[k];
                    best = k;
                }
            }
            if best == usize::MAX {
                break;
            }
            done[best] = true;
            if best >= m && right[best - m] > MASS_EPS {
                target = best;
                break;
            }
            if best < m {
                let i = best;
                for j in 0..n {
                    let k = m + j;
                    if done[k] {
                        continue;
                    }
                    let rc = (c[i * n + j] + pot[i] - pot[k]).max(0.0);
                    if bd + rc < dist[k] {
                        dist[k] = bd + rc;
                        prev[k] = i;
                    }
                }
            } else {
                let j = best - m;
                for i in 0..m {
                    if done[i] || flow[i * n + j] <= MASS_EPS {
                        continue;
                    }
                    let rc = (pot[best] - c[i * n + j] - pot[i]).max(0.0);
                    if bd + rc < dist[i] {
                        dist[i] = bd + rc;
                        prev[i] = best;
                    }
                }
            }
        }
        if target == usize::MAX {
            break;
        }
        let dt = dist[target];
        for k in 0..total {
            pot[k] += dist[k].min(dt);
        }
        // Walk the path back to a source, finding the bottleneck.
        let mut amount = right[target - m];
        let mut k = target;
        while prev[k] != usize::MAX {
            let p = prev[k];
            if p >= m {
                amount = amount.min(flow[k * n + (p - m)]);
            }
            k = p;
        }
        amount = amount.min(left[k]);
        let start = k;
        let mut k = target;
        while prev[k] != usize::MAX {
            let p = prev[k];
            if p < m {
                flow[p * n + (k - m)] += amount;
            } else {
                flow[k * n + (p - m)] -= amount;
                if flow[k * n + (p - m)] < MASS_EPS {
                    flow[k * n + (p - m)] = 0.0;
                }
            }
            k = p;
        }
        left[start] -= amount;
        right[target - m] -= amount;
    }
    let mut plan = Vec::new();
    let mut total_cost = 0.0;
    for i in 0..m {
        for j in 0..n {
            let f = flow[i * n + j];
            if f > 0.0 {
                plan.push((i, j, f));
                total_cost += f * c[i * n + j];
            }
        }
    }
    let dual_u = (0..m).map(|i| -pot[i]).collect();
    let dual_v = (0..n).map(|j| pot[m + j]).collect();
    Ok(TransportSolution { cost: total_cost, plan, dual_u, dual_v })
}
