//! The local coupling between two conditionings of one vertex, and the
//! calculators for the resulting Wasserstein recursion.
//!
//! A disagreement at a sphere vertex is handled with the triangle inequality:
//! the pair is split into a center discrepancy at a fixed sphere color and a
//! sphere discrepancy under the second center color. The two couplings are
//! glued through the shared middle configuration by running the procedure
//! conditionally: given a draw from the first law it produces a draw from the
//! second, so the composition is again a coupling.

use core::ops::Range;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::error::{param, Error, Result};
use crate::graph::{Graph, Pinning, SpinSystem};
use crate::math::{ceil, harmonic, ln, powi, sqrt};
use crate::oracle::{enumerate_gibbs, GibbsTable};
use crate::rng::{self, sample_weighted, Rng};
use crate::tree::{exact_forest_marginals, sample_forest};

pub const DEFAULT_DEPTH_CAP: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceEvent {
    pub depth: usize,
    /// Vertex whose two conditionings are being coupled.
    pub center: usize,
    /// Sphere vertex revealed at this step.
    pub vertex: usize,
    pub coupled: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingOutcome {
    pub x: Vec<usize>,
    pub y: Vec<usize>,
    /// Disagreements on the free vertices other than the starting center.
    pub hamming: usize,
    pub trace: Vec<TraceEvent>,
    pub max_depth: usize,
    /// Sphere disagreements whose color was infeasible under the other
    /// conditioning; the second side was then drawn independently.
    pub independent_draws: usize,
}

/// The same instance with every pinned vertex split into one copy per edge, so
/// that a graph whose free part is a forest becomes a forest.
struct Split<'a, S: SpinSystem> {
    sys: &'a S,
    graph: Graph,
    origin: Vec<usize>,
}

impl<S: SpinSystem> SpinSystem for Split<'_, S> {
    fn graph(&self) -> &Graph {
        &self.graph
    }
    fn q(&self) -> usize {
        self.sys.q()
    }
    fn list(&self, v: usize) -> &[usize] {
        self.sys.list(self.origin[v])
    }
    fn theta(&self) -> f64 {
        self.sys.theta()
    }
    fn edge_weight(&self, a: usize, b: usize) -> f64 {
        self.sys.edge_weight(a, b)
    }
}

fn split<'a, S: SpinSystem>(sys: &'a S, fixed: &[Option<usize>]) -> Result<(Split<'a, S>, Pinning)> {
    let g = sys.graph();
    let n = g.vertex_count();
    let mut origin: Vec<usize> = (0..n).collect();
    let mut edges = Vec::new();
    let mut pin = Pinning::new();
    for (v, c) in fixed.iter().enumerate() {
        if let Some(c) = c {
            pin.insert(v, *c);
        }
    }
    for &(a, b) in g.edges() {
        match (fixed[a], fixed[b]) {
            (None, None) => edges.push((a, b)),
            (Some(ca), Some(cb)) => {
                if sys.edge_weight(ca, cb) == 0.0 {
                    return Err(Error::Infeasible);
                }
            }
            (Some(c), None) | (None, Some(c)) => {
                let free = if fixed[a].is_none() { a } else { b };
                let pinned = a + b - free;
                let copy = origin.len();
                origin.push(pinned);
                pin.insert(copy, c);
                edges.push((copy, free));
            }
        }
    }
    let graph = Graph::new(origin.len(), &edges)?;
    Ok((Split { sys, graph, origin }, pin))
}

/// Exact conditional laws: the forest engine when the free part is a forest,
/// otherwise a filtered enumeration.
enum Law<'a, S: SpinSystem> {
    Forest(&'a S),
    Table(GibbsTable),
}

impl<S: SpinSystem> Law<'_, S> {
    fn matches(s: &[usize], fixed: &[Option<usize>]) -> bool {
        fixed.iter().zip(s).all(|(f, c)| f.map_or(true, |f| f == *c))
    }

    fn marginal(&self, fixed: &[Option<usize>], v: usize) -> Result<Vec<f64>> {
        match self {
            Law::Forest(sys) => {
                let (inst, pin) = split(*sys, fixed)?;
                Ok(exact_forest_marginals(&inst, &pin)?.marginal(v).to_vec())
            }
            Law::Table(t) => {
                let mut m = vec![0.0; t.q()];
                for (s, p) in t.iter() {
                    if Self::matches(s, fixed) {
                        m[s[v]] += p;
                    }
                }
                let z: f64 = m.iter().sum();
                if !(z > 0.0) {
                    return Err(Error::Infeasible);
                }
                m.iter_mut().for_each(|x| *x /= z);
                Ok(m)
            }
        }
    }

    fn sample(&self, fixed: &[Option<usize>], rng: &mut Rng) -> Result<Vec<usize>> {
        match self {
            Law::Forest(sys) => {
                let n = sys.graph().vertex_count();
                let (inst, pin) = split(*sys, fixed)?;
                let mut s = sample_forest(&inst, &pin, rng)?;
                s.truncate(n);
                Ok(s)
            }
            Law::Table(t) => {
                let w: Vec<f64> = t.iter().map(|(s, p)| if Self::matches(s, fixed) { p } else { 0.0 }).collect();
                if !w.iter().any(|&x| x > 0.0) {
                    return Err(Error::Infeasible);
                }
                Ok(t.state(sample_weighted(rng, &w)).to_vec())
            }
        }
    }
}

struct Coupler<'a, S: SpinSystem> {
    sys: &'a S,
    law: Law<'a, S>,
    radius: usize,
    depth_cap: usize,
    trace: Vec<TraceEvent>,
    max_depth: usize,
    independent_draws: usize,
}

impl<S: SpinSystem> Coupler<'_, S> {
    /// Given `x` drawn from the law under `fixed` plus `w <- x[w]`, returns a
    /// draw from the law under `fixed` plus `w <- c`.
    fn couple_given(&mut self, fixed: &mut Vec<Option<usize>>, w: usize, c: usize, x: &[usize], rng: &mut Rng, depth: usize) -> Result<Vec<usize>> {
        self.max_depth = self.max_depth.max(depth);
        if depth > self.depth_cap {
            return Err(Error::CapExceeded { what: "coupling recursion depth", needed: depth as u64, cap: self.depth_cap as u64 });
        }
        let b = x[w];
        if b == c {
            return Ok(x.to_vec());
        }
        let g = self.sys.graph();
        let sphere: Vec<usize> = g.sphere(w, self.radius).into_iter().filter(|&v| v != w && fixed[v].is_none()).collect();
        if sphere.is_empty() {
            // The pinned sphere separates the ball from the rest: redraw the
            // inside under `w <- c` and keep the outside.
            fixed[w] = Some(c);
            let fresh = self.law.sample(fixed, rng);
            fixed[w] = None;
            let fresh = fresh?;
            let dist = g.distances(w);
            return Ok((0..x.len()).map(|v| if matches!(dist[v], Some(d) if d < self.radius) { fresh[v] } else { x[v] }).collect());
        }
        let v = sphere[rng.gen_range(0..sphere.len())];
        fixed[w] = Some(b);
        let pb = self.law.marginal(fixed, v);
        fixed[w] = Some(c);
        let pc = self.law.marginal(fixed, v);
        fixed[w] = None;
        let (pb, pc) = (pb?, pc?);
        // Maximal coupling, conditioned on the first coordinate.
        let bp = x[v];
        let stay = pb[bp].min(pc[bp]) / pb[bp];
        let cp = if rng.gen::<f64>() < stay {
            bp
        } else {
            let residual: Vec<f64> = pc.iter().zip(&pb).map(|(a, b)| (a - b).max(0.0)).collect();
            sample_weighted(rng, &residual)
        };
        self.trace.push(TraceEvent { depth, center: w, vertex: v, coupled: bp == cp });
        if pc[bp] == 0.0 {
            // No middle law to glue through: `v <- bp` is impossible under
            // `w <- c`. Draw the second side afresh.
            self.independent_draws += 1;
            fixed[w] = Some(c);
            fixed[v] = Some(cp);
            let y = self.law.sample(fixed, rng);
            fixed[w] = None;
            fixed[v] = None;
            return y;
        }
        fixed[v] = Some(bp);
        let z = self.couple_given(fixed, w, c, x, rng, depth + 1);
        fixed[v] = None;
        let z = z?;
        if bp == cp {
            return Ok(z);
        }
        // `z` follows the law under `w <- c, v <- bp`; move the discrepancy to `v`.
        fixed[w] = Some(c);
        let y = self.couple_given(fixed, v, cp, &z, rng, depth + 1);
        fixed[w] = None;
        y
    }
}

/// Draws `(X, Y)` from the local coupling of the laws under `u <- b` and
/// `u <- c`, using the stream `(seed, trial)`.
pub fn algorithm1_couple<S: SpinSystem>(
    sys: &S,
    pin: &Pinning,
    u: usize,
    b: usize,
    c: usize,
    radius: usize,
    seed: u64,
    trial: u64,
    depth_cap: usize,
    state_cap: u64,
) -> Result<CouplingOutcome> {
    let mut coupler = prepare(sys, pin, u, radius, depth_cap, state_cap)?;
    couple_with(&mut coupler, pin, u, b, c, seed, trial)
}

fn prepare<'a, S: SpinSystem>(sys: &'a S, pin: &Pinning, u: usize, radius: usize, depth_cap: usize, state_cap: u64) -> Result<Coupler<'a, S>> {
    pin.validate(sys)?;
    let g = sys.graph();
    if u >= g.vertex_count() || pin.contains(u) {
        return param(format!("vertex {u} must be free"));
    }
    if radius == 0 {
        return param("radius must be at least 1");
    }
    let free: Vec<usize> = (0..g.vertex_count()).filter(|&v| v != u && !pin.contains(v)).collect();
    let law = if g.induced(&free).0.is_forest() { Law::Forest(sys) } else { Law::Table(enumerate_gibbs(sys, pin, state_cap)?) };
    Ok(Coupler { sys, law, radius, depth_cap, trace: Vec::new(), max_depth: 0, independent_draws: 0 })
}

fn couple_with<S: SpinSystem>(coupler: &mut Coupler<'_, S>, pin: &Pinning, u: usize, b: usize, c: usize, seed: u64, trial: u64) -> Result<CouplingOutcome> {
    let n = coupler.sys.graph().vertex_count();
    let mut fixed = pin.to_vec(n);
    let mut r = rng::stream(seed, trial);
    fixed[u] = Some(b);
    let x = coupler.law.sample(&fixed, &mut r)?;
    fixed[u] = None;
    // Check `c` before running so an infeasible color is reported as such.
    fixed[u] = Some(c);
    coupler.law.marginal(&fixed, u)?;
    fixed[u] = None;
    coupler.trace.clear();
    coupler.max_depth = 0;
    coupler.independent_draws = 0;
    let y = coupler.couple_given(&mut fixed, u, c, &x, &mut r, 0)?;
    let hamming = (0..n).filter(|&v| v != u && !pin.contains(v) && x[v] != y[v]).count();
    Ok(CouplingOutcome { x, y, hamming, trace: core::mem::take(&mut coupler.trace), max_depth: coupler.max_depth, independent_draws: coupler.independent_draws })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingSummary {
    pub trials: usize,
    pub completed: usize,
    /// Trials discarded for exceeding the depth cap.
    pub discarded: usize,
    pub mean_hamming: f64,
    /// Standard error of the mean over completed trials.
    pub std_error: f64,
    pub max_depth: usize,
}

impl CouplingSummary {
    /// Summary of completed trials given as `(hamming, max_depth)` pairs.
    pub fn from_completed(trials: usize, discarded: usize, completed: &[(usize, usize)]) -> Self {
        let done = completed.len();
        let sum: f64 = completed.iter().map(|c| c.0 as f64).sum();
        let sq: f64 = completed.iter().map(|c| (c.0 * c.0) as f64).sum();
        let mean = if done > 0 { sum / done as f64 } else { 0.0 };
        let var = if done > 1 { (sq - done as f64 * mean * mean) / (done - 1) as f64 } else { 0.0 };
        CouplingSummary {
            trials,
            completed: done,
            discarded,
            mean_hamming: mean,
            std_error: sqrt(var.max(0.0) / done.max(1) as f64),
            max_depth: completed.iter().map(|c| c.1).max().unwrap_or(0),
        }
    }
}

/// Runs the couplings for trial indices in `trials`, trial `t` on stream
/// `(seed, t)`; outcomes are passed to `sink` in trial order.
pub fn run_couplings<S: SpinSystem>(
    sys: &S,
    pin: &Pinning,
    u: usize,
    colors: (usize, usize),
    radius: usize,
    trials: Range<usize>,
    seed: u64,
    depth_cap: usize,
    state_cap: u64,
    sink: &mut dyn FnMut(usize, &CouplingOutcome),
) -> Result<CouplingSummary> {
    let mut coupler = prepare(sys, pin, u, radius, depth_cap, state_cap)?;
    let total = trials.len();
    let mut completed = Vec::with_capacity(total);
    let mut discarded = 0usize;
    for t in trials {
        match couple_with(&mut coupler, pin, u, colors.0, colors.1, seed, t as u64) {
            Ok(out) => {
                completed.push((out.hamming, out.max_depth));
                sink(t, &out);
            }
            Err(Error::CapExceeded { what: "coupling recursion depth", .. }) => discarded += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(CouplingSummary::from_completed(total, discarded, &completed))
}

/// Iterates the upper bound on the Wasserstein distance of size `k` and
/// breadth `ell` instances; `delta_r` is `Delta^R`.
pub fn d_recursion(k: usize, ell: usize, delta_r: usize, eps: f64) -> f64 {
    d_table(k, delta_r.max(ell), delta_r, eps)[k][ell]
}

/// The full table `D[k][l]` for `k <= k_max`, `l <= l_max`.
pub fn d_table(k_max: usize, l_max: usize, delta_r: usize, eps: f64) -> Vec<Vec<f64>> {
    let base = delta_r as f64;
    let width = l_max.max(delta_r) + 1;
    let mut d = vec![vec![base; width]; k_max + 1];
    for k in 1..=k_max {
        let wide = d[k - 1][..=delta_r].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for l in 1..width {
            d[k][l] = d[k - 1][l - 1] + eps / l as f64 * (wide + 1.0);
        }
    }
    d
}

/// `(1 + 2 eps H(ell)) Delta^R`.
pub fn d_closed_bound(ell: usize, delta_r: usize, eps: f64) -> f64 {
    (1.0 + 2.0 * eps * harmonic(ell)) * delta_r as f64
}

/// Largest decay level for which the closed bound is proved.
pub fn eps_threshold(delta: usize, radius: usize) -> f64 {
    1.0 / (8.0 * radius as f64 * ln(delta as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterChoice {
    pub radius: usize,
    pub k: usize,
    pub girth: usize,
    /// `2 C_sm (1-delta)^K Delta^R + C_infl (1-delta)^R`.
    pub lhs: f64,
    /// `1 / (8 R ln Delta)`.
    pub target: f64,
}

pub fn decay_lhs(c_sm: f64, c_infl: f64, delta: f64, max_degree: usize, radius: usize, k: usize) -> f64 {
    let rho = 1.0 - delta;
    2.0 * c_sm * powi(rho, k as i32) * powi(max_degree as f64, radius as i32) + c_infl * powi(rho, radius as i32)
}

/// Smallest radius `R >= 2`, then smallest `K > R` with `K >= ln(C_sm)/delta`,
/// for which the decay inequality holds; the girth requirement is `2K + 2`.
pub fn parameter_search(c_sm: f64, c_infl: f64, delta: f64, max_degree: usize) -> Result<ParameterChoice> {
    if !(c_sm > 0.0 && c_infl > 0.0) {
        return param("constants must be positive");
    }
    if !(delta > 0.0 && delta < 1.0) {
        return param("delta must lie in (0,1)");
    }
    if max_degree < 2 {
        return param("max degree must be at least 2");
    }
    const RADIUS_CAP: usize = 100_000;
    const K_CAP: usize = 10_000_000;
    let rho = 1.0 - delta;
    let k_floor = ceil((ln(c_sm) / delta).max(0.0)) as usize;
    for radius in 2..=RADIUS_CAP {
        let target = eps_threshold(max_degree, radius);
        let room = target - c_infl * powi(rho, radius as i32);
        if room <= 0.0 {
            continue;
        }
        let need = room / (2.0 * c_sm * powi(max_degree as f64, radius as i32));
        let mut k = if need >= 1.0 { 0 } else { ceil(ln(need) / ln(rho)).max(0.0) as usize };
        k = k.max(radius + 1).max(k_floor);
        if k > K_CAP {
            return Err(Error::SearchExhausted(format!("K exceeds {K_CAP} at radius {radius}")));
        }
        // Rounding in the closed form is settled by plugging in.
        while k > radius + 1 && k > k_floor && decay_lhs(c_sm, c_infl, delta, max_degree, radius, k - 1) <= target {
            k -= 1;
        }
        while decay_lhs(c_sm, c_infl, delta, max_degree, radius, k) > target {
            k += 1;
        }
        let lhs = decay_lhs(c_sm, c_infl, delta, max_degree, radius, k);
        return Ok(ParameterChoice { radius, k, girth: 2 * k + 2, lhs, target });
    }
    Err(Error::SearchExhausted(format!("no radius up to {RADIUS_CAP} works")))
}
