//! Numerical scan of the Jacobian norm condition over capped inputs.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{param, Result};
use crate::jacobian::{
    coloring_vertex_weight, jacobian_phi, norm_star_star_upper_below, norm_weighted_upper_below, potts_vertex_weight, random_capped, random_corner,
    Potential,
};
use crate::math::{exp, sqrt};
use crate::rng;
use crate::tree::{potts_cap, xi, SubDistribution};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    /// Weighted norm with the coloring weight scheme.
    Coloring { q: usize, delta: usize },
    /// Plain ★★ norm with children capped by `1/(q - delta)`.
    ColoringUnweighted { q: usize, delta: usize },
    /// Weighted norm with the Potts weight scheme.
    Potts { q: usize, beta: f64, delta: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Children may be pinned.
    Strong,
    /// Every child is free.
    Weak,
}

/// Samples per independent task; each task owns one RNG stream.
pub const TASK_SIZE: usize = 256;

/// The input at which the largest norm was observed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WorstInput {
    pub children: Vec<Vec<f64>>,
    /// Colors of pinned children.
    pub pinned: Vec<usize>,
    pub root_list: Vec<usize>,
    pub w_root: f64,
    pub w_children: Vec<f64>,
    pub profile: &'static str,
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionReport {
    pub family: Family,
    pub mode: Mode,
    pub samples: usize,
    /// Largest certified norm upper bound over the sampled inputs.
    pub sampled_max_norm: f64,
    /// Largest closed-form bound over the covered configurations.
    pub analytic_bound: f64,
    /// `1 - sampled_max_norm`; nonpositive means no contraction was observed.
    pub delta_hat: f64,
    /// Largest ratio of a sampled norm to its per-configuration closed form.
    pub max_config_ratio: f64,
    /// Samples whose norm exceeded the per-configuration closed form.
    pub config_violations: usize,
    pub worst_input: WorstInput,
    pub warnings: Vec<String>,
}

/// `sqrt(exp(5 xi / (2 (q_r - 1)) - 2 gamma / q_r))` for the weighted coloring scheme.
pub fn coloring_weighted_bound(q_r: usize, d_r: usize, gamma: f64) -> f64 {
    let q = q_r as f64;
    sqrt(exp(5.0 * xi(gamma, d_r, q_r) / (2.0 * (q - 1.0)) - 2.0 * gamma / q))
}

/// Squared ★★ bound `exp(-2 gamma_r / q_r + 3 / (gamma_c - 1))` where
/// `gamma_r = q_r - d_r` and children are capped by `1 / gamma_c`.
pub fn unweighted_bound_sq(q_r: usize, d_r: usize, gamma_c: f64) -> f64 {
    let q = q_r as f64;
    let gamma_r = q - d_r as f64;
    exp(-2.0 * gamma_r / q + 3.0 / (gamma_c - 1.0))
}

/// `sqrt(exp(5 theta B / (2 (1 - theta B)) + 2 theta delta_r / q - 2))` with `B` the Potts cap.
pub fn potts_weighted_bound(q: usize, beta: f64, delta_r: usize) -> f64 {
    let theta = 1.0 - beta;
    let tb = theta * potts_cap(q, beta, delta_r);
    sqrt(exp(5.0 * tb / (2.0 * (1.0 - tb)) + 2.0 * theta * delta_r as f64 / q as f64 - 2.0))
}

/// ★★ bound `exp(-eps / 4)` at `q = (1 + eps) delta` with `delta >= 7 / eps^2`.
pub fn eps_delta_bound(eps: f64) -> f64 {
    exp(-eps / 4.0)
}

/// Root shapes `(delta_r, d_r)` covered by a family and mode.
pub fn root_configs(family: &Family, mode: Mode) -> Vec<(usize, usize)> {
    let top = match family {
        Family::Coloring { delta, .. } => delta.saturating_sub(1),
        Family::ColoringUnweighted { delta, .. } | Family::Potts { delta, .. } => *delta,
    };
    let mut out = Vec::new();
    for delta_r in 1..=top {
        match mode {
            Mode::Weak => out.push((delta_r, delta_r)),
            Mode::Strong => (1..=delta_r).for_each(|d| out.push((delta_r, d))),
        }
    }
    out
}

/// Rejects parameter combinations the samplers cannot handle.
pub fn check_family(family: &Family) -> Result<()> {
    match *family {
        Family::Coloring { q, delta } | Family::ColoringUnweighted { q, delta } => {
            if delta == 0 || q <= delta + 1 {
                return param(format!("need delta >= 1 and q > delta + 1, got q = {q}, delta = {delta}"));
            }
        }
        Family::Potts { q, beta, delta } => {
            if delta == 0 || q < 3 || !(0.0..=1.0).contains(&beta) {
                return param("need delta >= 1, q >= 3 and beta in [0,1]");
            }
        }
    }
    Ok(())
}

/// Closed-form bound maximized over the root shapes.
pub fn analytic_bound(family: &Family, mode: Mode) -> f64 {
    root_configs(family, mode)
        .into_iter()
        .map(|(delta_r, d_r)| match *family {
            Family::Coloring { q, delta } => {
                let gamma = (q - delta + 1) as f64;
                coloring_weighted_bound(q - (delta_r - d_r), d_r, gamma)
            }
            Family::ColoringUnweighted { q, delta } => sqrt(unweighted_bound_sq(q - (delta_r - d_r), d_r, (q - delta) as f64)),
            Family::Potts { q, beta, .. } => potts_weighted_bound(q, beta, delta_r),
        })
        .fold(0.0, f64::max)
}

/// Regime and concavity warnings for a family.
pub fn regime_warnings(family: &Family, mode: Mode) -> Vec<String> {
    let mut w = Vec::new();
    match *family {
        Family::Coloring { q, delta } => {
            if q < delta + 3 {
                w.push(format!("q = {q} is below delta + 3 = {}", delta + 3));
            }
            let cap = (1..delta).flat_map(|dv| (0..=dv).map(move |d| (dv, d))).map(|(dv, d)| coloring_cap(q, delta, dv, d)).fold(0.0, f64::max);
            if cap > 1.0 / 3.0 {
                w.push(format!("marginal cap {cap:.4} exceeds the concavity limit 1/3 of the potential"));
            }
            w.push(String::from("roots with delta children are outside the scanned shapes"));
        }
        Family::ColoringUnweighted { q, delta } => {
            let gamma = (q - delta) as f64;
            if gamma < 3.0 * sqrt(delta as f64) {
                w.push(format!("q - delta = {gamma} is below 3 sqrt(delta)"));
            }
            if 1.0 / gamma > 1.0 / 3.0 {
                w.push(format!("marginal cap {:.4} exceeds the concavity limit 1/3 of the potential", 1.0 / gamma));
            }
        }
        Family::Potts { q, beta, delta } => {
            let theta = 1.0 - beta;
            if (q as f64) < theta * (delta as f64 + 4.0) + 1.0 {
                w.push(format!("q = {q} is below (1 - beta)(delta + 4) + 1"));
            }
            let cap = potts_cap(q, beta, 0);
            let limit = Potential::potts(beta).map(|p| p.concave_limit()).unwrap_or(1.0);
            if cap > limit {
                w.push(format!("marginal cap {cap:.4} exceeds the concavity limit {limit:.4} of the potential"));
            }
            if mode == Mode::Strong {
                w.push(String::from("pinned children are outside the Potts weak-mixing regime"));
            }
        }
    }
    w
}

fn coloring_cap(q: usize, delta: usize, delta_v: usize, d_v: usize) -> f64 {
    coloring_vertex_weight(q - (delta_v - d_v), d_v, (q - delta + 1) as f64).map(|w| w.cap).unwrap_or(1.0)
}

/// Partial result of one task, merged by maximum.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskResult {
    pub task: u64,
    pub samples: usize,
    pub max_norm: f64,
    pub max_ratio: f64,
    pub violations: usize,
    pub worst: WorstInput,
}

struct Child {
    weight: f64,
    cap: f64,
}

/// Draws a child's shape and returns its cap and weight.
fn draw_child<R: Rng + ?Sized>(r: &mut R, family: &Family) -> Child {
    match *family {
        Family::Coloring { q, delta } => {
            let delta_v = r.gen_range(0..delta);
            let d_v = r.gen_range(0..=delta_v);
            let vw = coloring_vertex_weight(q - (delta_v - d_v), d_v, (q - delta + 1) as f64).expect("regime checked");
            Child { weight: vw.w, cap: vw.cap }
        }
        Family::ColoringUnweighted { q, delta } => Child { weight: 1.0, cap: 1.0 / (q - delta) as f64 },
        Family::Potts { q, beta, delta } => {
            let delta_v = r.gen_range(0..delta);
            match potts_vertex_weight(q, beta, delta_v) {
                Ok(vw) => Child { weight: vw.w, cap: vw.cap },
                Err(_) => Child { weight: 1.0, cap: potts_cap(q, beta, delta_v) },
            }
        }
    }
}

/// The tight profile: mass `1/(d+1)` on one color and the rest spread over `k` others.
fn bad_profile(q: usize, list: &[usize], d: usize, k: usize, focus: usize, cap: f64) -> Vec<f64> {
    let mut v = vec![0.0; q];
    let c = list[focus % list.len()];
    v[c] = (1.0 / (d as f64 + 1.0)).min(cap);
    let others: Vec<usize> = list.iter().copied().filter(|&b| b != c).take(k.max(1)).collect();
    let each = ((1.0 - v[c]) / others.len().max(1) as f64).min(cap);
    for b in others {
        v[b] = each;
    }
    v
}

/// Runs `count` samples on stream `(seed, task)`.
pub fn certify_task(family: &Family, mode: Mode, seed: u64, task: u64, count: usize) -> TaskResult {
    let mut r = rng::stream(seed, task);
    let configs = root_configs(family, mode);
    let pot = match *family {
        Family::Potts { beta, .. } => Potential::potts(beta).expect("beta checked"),
        _ => Potential::coloring(),
    };
    let mut out = TaskResult { task, samples: count, max_norm: 0.0, max_ratio: 0.0, violations: 0, worst: WorstInput::default() };
    for k in 0..count {
        let global = task as usize * TASK_SIZE + k;
        let (delta_r, d_r) = configs[global % configs.len()];
        let q = match *family {
            Family::Coloring { q, .. } | Family::ColoringUnweighted { q, .. } | Family::Potts { q, .. } => q,
        };
        let pins = delta_r - d_r;
        let pinned: Vec<usize> = if pins == 0 {
            Vec::new()
        } else if r.gen_bool(0.5) {
            let mut all: Vec<usize> = (0..q).collect();
            for i in 0..pins {
                let j = r.gen_range(i..q);
                all.swap(i, j);
            }
            all.truncate(pins);
            all
        } else {
            (0..pins).map(|_| r.gen_range(0..q)).collect()
        };
        let is_coloring = !matches!(family, Family::Potts { .. });
        let root_list: Vec<usize> = if is_coloring { (0..q).filter(|c| !pinned.contains(c)).collect() } else { (0..q).collect() };
        let kids: Vec<Child> = (0..d_r).map(|_| draw_child(&mut r, family)).collect();
        let profile = ["interior", "corner", "mixed", "tight"][global % 4];
        let focus = r.gen_range(0..root_list.len());
        let spread = root_list.len().saturating_sub(d_r).max(1);
        let free: Vec<Vec<f64>> = kids
            .iter()
            .map(|ch| match profile {
                "interior" => random_capped(&mut r, q, &root_list, ch.cap),
                "corner" => random_corner(&mut r, q, &root_list, ch.cap),
                "mixed" => {
                    if r.gen_bool(0.5) {
                        random_capped(&mut r, q, &root_list, ch.cap)
                    } else {
                        random_corner(&mut r, q, &root_list, ch.cap)
                    }
                }
                _ => bad_profile(q, &root_list, d_r, spread, focus, ch.cap),
            })
            .collect();
        let mut children: Vec<SubDistribution> = pinned.iter().map(|&c| SubDistribution::point_mass(q, c)).collect();
        for (v, ch) in free.iter().zip(&kids) {
            children.push(SubDistribution::new(v.clone(), ch.cap.min(1.0)).expect("sampler respects caps"));
        }
        let Ok(jac) = jacobian_phi(&pot, &children, &root_list) else { continue };
        let (w_root, config_bound_sq) = match *family {
            Family::Coloring { q, delta } => {
                let w = coloring_vertex_weight(q - pins, d_r, (q - delta + 1) as f64).expect("regime checked").w;
                let b = coloring_weighted_bound(q - pins, d_r, (q - delta + 1) as f64);
                (w, b * b)
            }
            Family::ColoringUnweighted { delta, .. } => (1.0, unweighted_bound_sq(root_list.len(), d_r, (q - delta) as f64)),
            Family::Potts { q, beta, .. } => {
                let w = potts_vertex_weight(q, beta, delta_r).map(|v| v.w).unwrap_or(1.0);
                let b = potts_weighted_bound(q, beta, delta_r);
                (w, b * b)
            }
        };
        // Refinement can stop once the bound cannot raise either running maximum.
        let target = out.max_norm.min(sqrt(config_bound_sq * out.max_ratio));
        let norm = if matches!(family, Family::ColoringUnweighted { .. }) {
            norm_star_star_upper_below(jac.blocks(), target)
        } else {
            let wk: Vec<f64> = kids.iter().map(|c| c.weight).collect();
            norm_weighted_upper_below(jac.blocks(), w_root, &wk, target).expect("weights positive")
        };
        let ratio = norm * norm / config_bound_sq;
        if ratio > 1.0 + 1e-9 {
            out.violations += 1;
        }
        out.max_ratio = out.max_ratio.max(ratio);
        if norm > out.max_norm {
            out.max_norm = norm;
            out.worst = WorstInput {
                children: free,
                pinned,
                root_list,
                w_root,
                w_children: kids.iter().map(|c| c.weight).collect(),
                profile,
                norm,
            };
        }
    }
    out
}

/// Number of tasks needed for `samples` samples.
pub fn task_count(samples: usize) -> u64 {
    samples.div_ceil(TASK_SIZE) as u64
}

/// Samples assigned to `task`.
pub fn task_samples(samples: usize, task: u64) -> usize {
    let start = task as usize * TASK_SIZE;
    TASK_SIZE.min(samples.saturating_sub(start))
}

/// Merges task results; ties keep the lowest task index so the outcome does
/// not depend on completion order.
pub fn merge(family: &Family, mode: Mode, samples: usize, mut parts: Vec<TaskResult>) -> ContractionReport {
    parts.sort_by_key(|p| p.task);
    let mut best: Option<&TaskResult> = None;
    for p in &parts {
        if best.map_or(true, |b| p.max_norm > b.max_norm) {
            best = Some(p);
        }
    }
    let sampled = best.map_or(0.0, |b| b.max_norm);
    ContractionReport {
        family: *family,
        mode,
        samples,
        sampled_max_norm: sampled,
        analytic_bound: analytic_bound(family, mode),
        delta_hat: 1.0 - sampled,
        max_config_ratio: parts.iter().map(|p| p.max_ratio).fold(0.0, f64::max),
        config_violations: parts.iter().map(|p| p.violations).sum(),
        worst_input: best.map(|b| b.worst.clone()).unwrap_or_default(),
        warnings: regime_warnings(family, mode),
    }
}

/// Scans `samples` inputs sequentially.
pub fn certify_contraction(family: Family, mode: Mode, samples: usize, seed: u64) -> Result<ContractionReport> {
    check_family(&family)?;
    let parts = (0..task_count(samples)).map(|t| certify_task(&family, mode, seed, t, task_samples(samples, t))).collect();
    Ok(merge(&family, mode, samples, parts))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_examples() {
        let b = unweighted_bound_sq(18, 9, 9.0);
        assert!((b - (-0.625f64).exp()).abs() < 1e-15);
        assert!((b - 0.5353).abs() < 1e-4 && (b.sqrt() - 0.7316).abs() < 1e-4);
        assert!((eps_delta_bound(0.5) - 0.8825).abs() < 1e-4);
        for delta in [3, 4, 5, 10, 40] {
            let fam = Family::Coloring { q: delta + 3, delta };
            assert!(analytic_bound(&fam, Mode::Strong) < 1.0, "delta {delta}");
        }
        let potts = Family::Potts { q: 7, beta: 0.25, delta: 3 };
        assert!(analytic_bound(&potts, Mode::Weak) < 1.0);
    }

    #[test]
    fn root_shapes() {
        let fam = Family::Coloring { q: 6, delta: 3 };
        assert_eq!(root_configs(&fam, Mode::Strong), vec![(1, 1), (2, 1), (2, 2)]);
        assert_eq!(root_configs(&fam, Mode::Weak), vec![(1, 1), (2, 2)]);
        let un = Family::ColoringUnweighted { q: 18, delta: 9 };
        assert_eq!(root_configs(&un, Mode::Weak).len(), 9);
    }

    #[test]
    fn weighted_scan_contracts_at_delta_plus_three() {
        let rep = certify_contraction(Family::Coloring { q: 6, delta: 3 }, Mode::Strong, 2000, 1).unwrap();
        assert!(rep.sampled_max_norm < 1.0, "{rep:?}");
        assert!(rep.delta_hat > 0.0);
        assert_eq!(rep.samples, 2000);
    }

    #[test]
    fn unweighted_scan_respects_the_configuration_bound() {
        let rep = certify_contraction(Family::ColoringUnweighted { q: 18, delta: 9 }, Mode::Strong, 600, 2).unwrap();
        assert_eq!(rep.config_violations, 0, "{rep:?}");
        assert!(rep.max_config_ratio <= 1.0);
    }

    #[test]
    fn potts_scan_contracts() {
        let rep = certify_contraction(Family::Potts { q: 7, beta: 0.25, delta: 3 }, Mode::Weak, 1000, 3).unwrap();
        assert!(rep.sampled_max_norm < 1.0, "{rep:?}");
        assert_eq!(rep.config_violations, 0);
    }

    #[test]
    fn merge_is_order_independent() {
        let fam = Family::Coloring { q: 6, delta: 3 };
        let parts: Vec<TaskResult> = (0..4).map(|t| certify_task(&fam, Mode::Strong, 9, t, 50)).collect();
        let mut rev = parts.clone();
        rev.reverse();
        assert_eq!(merge(&fam, Mode::Strong, 200, parts), merge(&fam, Mode::Strong, 200, rev));
    }

    #[test]
    fn rejects_degenerate_parameters() {
        assert!(certify_contraction(Family::Coloring { q: 3, delta: 3 }, Mode::Strong, 10, 0).is_err());
    }
}
