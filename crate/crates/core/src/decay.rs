//! Spatial-mixing and influence decay profiles on trees, rate fits, and the
//! constants that turn a contraction rate into decay bounds.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::error::{param, Error, Result};
use crate::graph::{random_tree, ColoringInstance, Pinning, PottsInstance, RootedTree, SpinSystem};
use crate::jacobian::{coloring_vertex_weight, potts_vertex_weight, Potential};
use crate::math::{exp, ln, powi, sqrt};
use crate::oracle::{enumerate_gibbs, tv_distance};
use crate::rng;
use crate::tree::{bound_lower, exact_forest_marginals, potts_cap, RootMarginal};

/// Exact search is used while `(feasible pinnings)^2` stays below this.
pub const EXACT_PAIR_CAP: u64 = 1_000_000;

/// The root-level Jacobian norm bound used when the root has `Delta` children.
pub const ROOT_NORM_BOUND: f64 = 17.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Exact when the sphere is small enough, heuristic otherwise.
    Auto,
    Exact,
    Heuristic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchConfig {
    pub strategy: Strategy,
    pub random_pairs: usize,
    /// Passes of single-vertex recoloring started from the best pair found.
    pub flip_passes: usize,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { strategy: Strategy::Auto, random_pairs: 200, flip_passes: 2, seed: 0 }
    }
}

/// How the value at one distance was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMode {
    /// Nothing to vary at this distance.
    Empty,
    Exact,
    Heuristic,
}

impl SearchMode {
    pub fn name(self) -> &'static str {
        match self {
            SearchMode::Empty => "empty",
            SearchMode::Exact => "exact",
            SearchMode::Heuristic => "heuristic",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayProfile {
    pub distances: Vec<usize>,
    pub values: Vec<f64>,
    pub modes: Vec<SearchMode>,
    pub fitted_rate: Option<f64>,
    pub fit_residual: Option<f64>,
}

impl DecayProfile {
    fn assemble(distances: Vec<usize>, values: Vec<f64>, modes: Vec<SearchMode>) -> Self {
        let fit = fit_rate(&distances, &values).ok();
        DecayProfile { distances, values, modes, fitted_rate: fit.map(|f| f.0), fit_residual: fit.map(|f| f.1) }
    }

    pub fn is_strictly_decreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] < w[0])
    }

    /// Largest `value / (c * rate^distance)`; at most 1 means the profile is dominated.
    pub fn domination_ratio(&self, c: f64, rate: f64) -> f64 {
        self.distances
            .iter()
            .zip(&self.values)
            .map(|(&d, &v)| v / (c * powi(rate, d as i32)))
            .fold(0.0, f64::max)
    }
}

/// Least-squares fit of `ln value` against distance over the positive values.
///
/// Returns `(exp(slope), rms residual)`.
pub fn fit_rate(distances: &[usize], values: &[f64]) -> Result<(f64, f64)> {
    if distances.len() != values.len() {
        return param("distances and values differ in length");
    }
    let pts: Vec<(f64, f64)> = distances.iter().zip(values).filter(|(_, &v)| v > 0.0).map(|(&d, &v)| (d as f64, ln(v))).collect();
    if pts.len() < 3 {
        return param(format!("need at least 3 positive values to fit a rate, got {}", pts.len()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return param("distances must not all coincide");
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let rss: f64 = pts
        .iter()
        .map(|p| {
            let e = p.1 - my - slope * (p.0 - mx);
            e * e
        })
        .sum();
    Ok((exp(slope), sqrt(rss / n)))
}

fn check_depths(depths: &[usize]) -> Result<()> {
    if depths.windows(2).any(|w| w[1] <= w[0]) {
        return param("distances must be strictly increasing");
    }
    Ok(())
}

/// Worst root discrepancy over pairs of pinnings that agree with `base` and
/// differ only on the free vertices at each distance from `r`.
pub fn boundary_profile<S: SpinSystem>(
    sys: &S,
    tree: &RootedTree,
    r: usize,
    base: &Pinning,
    depths: &[usize],
    cfg: &SearchConfig,
) -> Result<DecayProfile> {
    check_depths(depths)?;
    let g = tree.graph();
    if r >= g.vertex_count() || base.contains(r) {
        return param("the root must be a free vertex of the tree");
    }
    if g.vertex_count() != sys.graph().vertex_count() {
        return param("tree and instance differ in size");
    }
    let rooted = if tree.root() == r { tree.clone() } else { RootedTree::new(g.clone(), r)? };
    let mut values = Vec::with_capacity(depths.len());
    let mut modes = Vec::with_capacity(depths.len());
    for &ell in depths {
        let sphere: Vec<usize> = g.sphere(r, ell).into_iter().filter(|&v| !base.contains(v)).collect();
        let (value, mode) = worst_pair(sys, &rooted, base, &sphere, cfg, ell as u64)?;
        values.push(value);
        modes.push(mode);
    }
    Ok(DecayProfile::assemble(depths.to_vec(), values, modes))
}

/// Strong spatial mixing profile of a coloring instance on a tree.
pub fn ssm_profile(tree: &RootedTree, inst: &ColoringInstance, r: usize, base: &Pinning, depths: &[usize], cfg: &SearchConfig) -> Result<DecayProfile> {
    boundary_profile(inst, tree, r, base, depths, cfg)
}

/// Weak spatial mixing profile of the Potts model: whole spheres are pinned
/// and nothing closer.
pub fn wsm_profile_potts(tree: &RootedTree, q: usize, beta: f64, r: usize, depths: &[usize], cfg: &SearchConfig) -> Result<DecayProfile> {
    let inst = PottsInstance::new(tree.graph().clone(), q, beta)?;
    boundary_profile(&inst, tree, r, &Pinning::new(), depths, cfg)
}

fn pick(list: &[usize], c: usize) -> usize {
    if list.contains(&c) {
        c
    } else {
        list[c % list.len()]
    }
}

/// Pins `sphere[k]` to `colors[k]` and returns the root marginal, if any.
fn load<S: SpinSystem>(rm: &mut RootMarginal<'_, S>, sphere: &[usize], colors: &[usize]) -> Result<Option<Vec<f64>>> {
    for (&v, &c) in sphere.iter().zip(colors) {
        rm.set(v, Some(c))?;
    }
    Ok(rm.marginal().ok().map(<[f64]>::to_vec))
}

fn worst_pair<S: SpinSystem>(
    sys: &S,
    tree: &RootedTree,
    base: &Pinning,
    sphere: &[usize],
    cfg: &SearchConfig,
    stream: u64,
) -> Result<(f64, SearchMode)> {
    if sphere.is_empty() {
        return Ok((0.0, SearchMode::Empty));
    }
    let lists: Vec<&[usize]> = sphere.iter().map(|&v| sys.list(v)).collect();
    let count = lists.iter().fold(1u64, |acc, l| acc.saturating_mul(l.len() as u64));
    let exact_ok = count.saturating_mul(count) <= EXACT_PAIR_CAP;
    let exact = match cfg.strategy {
        Strategy::Exact if !exact_ok => {
            return Err(Error::CapExceeded { what: "pinning pairs", needed: count.saturating_mul(count), cap: EXACT_PAIR_CAP })
        }
        Strategy::Exact => true,
        Strategy::Auto => exact_ok,
        Strategy::Heuristic => false,
    };
    let mut a = RootMarginal::new(sys, tree, base)?;
    if !a.is_feasible() {
        return Err(Error::Infeasible);
    }
    if exact {
        let mut seen: Vec<Vec<f64>> = Vec::new();
        let mut digits = vec![0usize; sphere.len()];
        let colors: Vec<usize> = lists.iter().map(|l| l[0]).collect();
        if let Some(m) = load(&mut a, sphere, &colors)? {
            seen.push(m);
        }
        // Odometer over the sphere colorings, touching only changed digits.
        'outer: loop {
            let mut k = 0;
            loop {
                if k == sphere.len() {
                    break 'outer;
                }
                digits[k] += 1;
                if digits[k] < lists[k].len() {
                    a.set(sphere[k], Some(lists[k][digits[k]]))?;
                    break;
                }
                digits[k] = 0;
                a.set(sphere[k], Some(lists[k][0]))?;
                k += 1;
            }
            if let Ok(m) = a.marginal() {
                seen.push(m.to_vec());
            }
        }
        let mut best = 0.0f64;
        for i in 0..seen.len() {
            for j in i + 1..seen.len() {
                best = best.max(tv_distance(&seen[i], &seen[j]));
            }
        }
        return Ok((best, SearchMode::Exact));
    }
    let mut b = RootMarginal::new(sys, tree, base)?;
    let mut r = rng::stream(cfg.seed, stream);
    let q = sys.q();
    let mut best = (-1.0f64, Vec::new(), Vec::new());
    let mut consider = |x: Vec<usize>, y: Vec<usize>, a: &mut RootMarginal<'_, S>, b: &mut RootMarginal<'_, S>| -> Result<()> {
        if let (Some(p), Some(p2)) = (load(a, sphere, &x)?, load(b, sphere, &y)?) {
            let d = tv_distance(&p, &p2);
            if d > best.0 {
                best = (d, x, y);
            }
        }
        Ok(())
    };
    for c1 in 0..q {
        for c2 in c1 + 1..q {
            let x = lists.iter().map(|l| pick(l, c1)).collect();
            let y = lists.iter().map(|l| pick(l, c2)).collect();
            consider(x, y, &mut a, &mut b)?;
        }
    }
    for _ in 0..cfg.random_pairs {
        let x = lists.iter().map(|l| l[r.gen_range(0..l.len())]).collect();
        let y = lists.iter().map(|l| l[r.gen_range(0..l.len())]).collect();
        consider(x, y, &mut a, &mut b)?;
    }
    let (mut value, mut x, mut y) = best;
    if value < 0.0 {
        return Ok((0.0, SearchMode::Heuristic));
    }
    load(&mut a, sphere, &x)?;
    load(&mut b, sphere, &y)?;
    for _ in 0..cfg.flip_passes {
        let mut improved = false;
        for k in 0..sphere.len() {
            for side in 0..2 {
                let (rm, cur, other) = if side == 0 { (&mut a, &mut x, &b) } else { (&mut b, &mut y, &a) };
                let Ok(fixed_side) = other.marginal() else { continue };
                let fixed_side = fixed_side.to_vec();
                for &c in lists[k] {
                    if c == cur[k] {
                        continue;
                    }
                    rm.set(sphere[k], Some(c))?;
                    match rm.marginal() {
                        Ok(m) if tv_distance(m, &fixed_side) > value => {
                            value = tv_distance(m, &fixed_side);
                            cur[k] = c;
                            improved = true;
                        }
                        _ => rm.set(sphere[k], Some(cur[k]))?,
                    }
                }
            }
        }
        if !improved {
            break;
        }
    }
    Ok((value, SearchMode::Heuristic))
}

/// Total influence of `u` on each sphere: the largest, over pairs of colors
/// for `u`, summed total variation between the conditional marginals of the
/// free vertices at that distance.
///
/// Forests use the exact tree engine, other graphs the enumeration oracle.
pub fn tid_profile<S: SpinSystem>(sys: &S, pin: &Pinning, u: usize, depths: &[usize], state_cap: u64) -> Result<DecayProfile> {
    check_depths(depths)?;
    let g = sys.graph();
    if u >= g.vertex_count() || pin.contains(u) {
        return param("the source must be a free vertex");
    }
    let mut laws: Vec<Vec<Vec<f64>>> = Vec::new();
    if g.is_forest() {
        for &c in sys.list(u) {
            if let Ok(t) = exact_forest_marginals(sys, &pin.with(u, c)) {
                laws.push((0..g.vertex_count()).map(|v| t.marginal(v).to_vec()).collect());
            }
        }
    } else {
        let table = enumerate_gibbs(sys, pin, state_cap)?;
        for &c in sys.list(u) {
            if let Ok(t) = table.condition(u, c) {
                laws.push(t.marginals());
            }
        }
    }
    let dist = g.distances(u);
    let mut values = Vec::with_capacity(depths.len());
    let mut modes = Vec::with_capacity(depths.len());
    for &ell in depths {
        let sphere: Vec<usize> = (0..g.vertex_count()).filter(|&v| dist[v] == Some(ell) && v != u && !pin.contains(v)).collect();
        let mut best = 0.0f64;
        for i in 0..laws.len() {
            for j in i + 1..laws.len() {
                let s: f64 = sphere.iter().map(|&v| tv_distance(&laws[i][v], &laws[j][v])).sum();
                best = best.max(s);
            }
        }
        values.push(best);
        modes.push(if sphere.is_empty() { SearchMode::Empty } else { SearchMode::Exact });
    }
    Ok(DecayProfile::assemble(depths.to_vec(), values, modes))
}

/// Model family whose constants are reported.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regime {
    /// Colorings with the vertex weights built from `gamma = q - max_degree + 1`.
    Coloring { q: usize, max_degree: usize },
    /// Antiferromagnetic Potts with the cap-based weights.
    Potts { q: usize, beta: f64, max_degree: usize },
    /// Colorings at `q = ceil((1 + eps) max_degree)` with unit weights.
    EpsDelta { eps: f64, max_degree: usize },
}

impl Regime {
    pub fn q(&self) -> usize {
        match *self {
            Regime::Coloring { q, .. } | Regime::Potts { q, .. } => q,
            Regime::EpsDelta { eps, max_degree } => crate::math::ceil((1.0 + eps) * max_degree as f64 - 1e-9) as usize,
        }
    }

    pub fn max_degree(&self) -> usize {
        match *self {
            Regime::Coloring { max_degree, .. } | Regime::Potts { max_degree, .. } | Regime::EpsDelta { max_degree, .. } => max_degree,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Regime::Coloring { .. } => "coloring",
            Regime::Potts { .. } => "potts",
            Regime::EpsDelta { .. } => "eps-delta",
        }
    }

    fn potential(&self) -> Result<Potential> {
        match *self {
            Regime::Potts { beta, .. } => Potential::potts(beta),
            _ => Ok(Potential::coloring()),
        }
    }

    /// Contraction rate proved for the `(1 + eps) Delta` regime.
    pub fn proved_delta(&self) -> Option<f64> {
        match *self {
            Regime::EpsDelta { eps, .. } => Some(1.0 - exp(-eps / 4.0)),
            _ => None,
        }
    }
}

/// Marginal bounds and weight range feeding the constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeBounds {
    pub lower: f64,
    pub upper: f64,
    pub w_min: f64,
    pub w_max: f64,
}

/// Bounds for a regime, taken over every vertex shape the weights cover.
pub fn regime_bounds(regime: &Regime) -> Result<RegimeBounds> {
    let dmax = regime.max_degree();
    if dmax == 0 {
        return param("max degree must be positive");
    }
    match *regime {
        Regime::Coloring { q, max_degree } => {
            if q < max_degree + 3 {
                return param(format!("the coloring weights need q >= max_degree + 3, got q = {q}"));
            }
            let gamma = (q - max_degree + 1) as f64;
            let (mut upper, mut w_min, mut w_max) = (0.0f64, f64::INFINITY, 0.0f64);
            for children in 0..max_degree {
                for free in 0..=children {
                    let vw = coloring_vertex_weight(q - (children - free), free, gamma)?;
                    upper = upper.max(vw.cap);
                    w_min = w_min.min(vw.w);
                    w_max = w_max.max(vw.w);
                }
            }
            let lower = bound_lower(q, (q - max_degree) as f64, max_degree);
            Ok(RegimeBounds { lower, upper, w_min, w_max })
        }
        Regime::Potts { q, beta, max_degree } => {
            let (mut w_min, mut w_max) = (f64::INFINITY, 0.0f64);
            for children in 0..=max_degree {
                let vw = potts_vertex_weight(q, beta, children)?;
                w_min = w_min.min(vw.w);
                w_max = w_max.max(vw.w);
            }
            let upper = potts_cap(q, beta, max_degree);
            // Every factor lies in [beta, 1], whatever the neighbors do.
            let floor = powi(beta, max_degree as i32);
            Ok(RegimeBounds { lower: floor / (floor + q as f64 - 1.0), upper, w_min, w_max })
        }
        Regime::EpsDelta { eps, max_degree } => {
            if !(eps > 0.0 && eps < 1.0) {
                return param("eps must lie in (0,1)");
            }
            let ed = eps * max_degree as f64;
            if ed <= 1.0 {
                return param("need eps * max_degree > 1");
            }
            let lower = powi(1.0 - 1.0 / ed, max_degree as i32) / regime.q() as f64;
            Ok(RegimeBounds { lower, upper: 1.0 / ed, w_min: 1.0, w_max: 1.0 })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstantsReport {
    pub regime: Regime,
    pub q: usize,
    pub delta: f64,
    pub bounds: RegimeBounds,
    pub c_sm: f64,
    pub c_si: f64,
    pub c_infl: f64,
    /// `17 / (w_min (1 - delta))`, the extra factor when the root has `Delta` children.
    pub root_factor: f64,
    pub c_sm_root: f64,
    pub c_infl_root: f64,
    /// Closed-form upper bounds `(C_SM, C_INFL)` in the `(1 + eps) Delta` regime.
    pub closed_forms: Option<(f64, f64)>,
    pub notes: Vec<String>,
}

/// `C_SM`, `C_SI` and `C_INFL` from a potential derivative and bounds.
pub fn constants_from_bounds(pot: &Potential, q: usize, bounds: &RegimeBounds, delta: f64) -> Result<(f64, f64, f64)> {
    if !(delta > 0.0 && delta < 1.0) {
        return param(format!("delta must lie in (0,1), got {delta}"));
    }
    let RegimeBounds { lower, upper, w_min, w_max } = *bounds;
    if !(lower > 0.0 && upper > 0.0 && lower <= upper && w_min > 0.0 && w_max >= w_min) {
        return param("degenerate marginal bounds or weights");
    }
    let phi_l = pot.derivative(lower)?;
    let phi_b = pot.derivative(upper)?;
    let ratio = w_max * phi_l / (w_min * phi_b);
    let c_sm = sqrt(q as f64) / (1.0 - delta) * ratio;
    let c_si = ratio * upper / lower;
    Ok((c_sm, c_si, sqrt(q as f64) * c_si))
}

/// Constants for a regime at contraction rate `1 - delta`; `None` uses the
/// proved rate where one exists.
pub fn constants_report(regime: Regime, delta: Option<f64>) -> Result<ConstantsReport> {
    let Some(delta) = delta.or(regime.proved_delta()) else {
        return param("this regime needs an explicit delta");
    };
    let q = regime.q();
    let bounds = regime_bounds(&regime)?;
    let (c_sm, c_si, c_infl) = constants_from_bounds(&regime.potential()?, q, &bounds, delta)?;
    let root_factor = ROOT_NORM_BOUND / (bounds.w_min * (1.0 - delta));
    let mut notes = Vec::new();
    notes.push(String::from("the root factor 17 is asserted without derivation; it applies when the root has max_degree children"));
    let closed_forms = match regime {
        Regime::EpsDelta { eps, max_degree } => {
            let ed = eps * max_degree as f64;
            let qf = q as f64;
            if ed < 7.0 / eps {
                notes.push(format!("max_degree = {max_degree} is below 7/eps^2; the rate is not proved there"));
            }
            let sm = 2.0 * qf * sqrt(1.0 / ed) * exp(1.0 / eps + eps / 4.0);
            let infl = qf * qf * qf / (sqrt(ed) * ed * (qf - 1.0)) * exp(3.0 / eps);
            Some((sm, infl))
        }
        Regime::Potts { q, beta, max_degree } => {
            let edge = (1.0 - beta) * (max_degree as f64 + 4.0) + 1.0;
            if (q as f64) < edge {
                notes.push(format!("q = {q} is below (1-beta)(max_degree+4)+1 = {edge}"));
            }
            None
        }
        Regime::Coloring { .. } => None,
    };
    Ok(ConstantsReport {
        regime,
        q,
        delta,
        bounds,
        c_sm,
        c_si,
        c_infl,
        root_factor,
        c_sm_root: c_sm * root_factor,
        c_infl_root: c_infl * root_factor,
        closed_forms,
        notes,
    })
}

/// Outcome of the one-step contraction check.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractionCheck {
    pub trials: usize,
    /// Trials with a nonzero discrepancy among the free children.
    pub informative: usize,
    pub violations: usize,
    /// Largest observed `lhs / rhs`.
    pub max_ratio: f64,
    pub rate: f64,
}

/// Checks `w_r |phi(p_r) - phi(p'_r)| <= rate * max_i w_i |phi(p_i) - phi(p'_i)|`
/// for exact subtree marginals under random pinning pairs that differ only at
/// distance two or more from the root.
///
/// Trees have maximum degree `max_degree` and a root with at most
/// `max_degree - 1` children; colorings use `q` colors.
pub fn one_step_contraction(q: usize, max_degree: usize, rate: f64, trials: usize, seed: u64) -> Result<ContractionCheck> {
    if q < max_degree + 3 || max_degree < 2 {
        return param("need max_degree >= 2 and q >= max_degree + 3");
    }
    let gamma = (q - max_degree + 1) as f64;
    let pot = Potential::coloring();
    let mut r = rng::stream(seed, 0);
    let mut out = ContractionCheck { trials: 0, informative: 0, violations: 0, max_ratio: 0.0, rate };
    let mut attempts = 0usize;
    while out.trials < trials {
        attempts += 1;
        if attempts > 50 * trials + 100 {
            return Err(Error::SearchExhausted(String::from("too few feasible pinning pairs")));
        }
        let n = r.gen_range(4..=24);
        let g = random_tree(n, max_degree, max_degree - 1, &mut r)?;
        let tree = RootedTree::new(g.clone(), 0)?;
        let inst = ColoringInstance::uniform(g.clone(), q)?;
        let far: Vec<usize> = (1..n).filter(|&v| tree.depth(v) >= 2).collect();
        if far.is_empty() {
            continue;
        }
        // Same pinned set for both sides; colors differ only far from the root.
        let density = r.gen_range(0.1..0.9);
        let mut pa = Pinning::new();
        let mut pb = Pinning::new();
        for v in 1..n {
            if r.gen_bool(density) {
                let c = r.gen_range(0..q);
                pa.insert(v, c);
                let c2 = if tree.depth(v) >= 2 && r.gen_bool(0.5) { r.gen_range(0..q) } else { c };
                pb.insert(v, c2);
            }
        }
        let (Ok(ma), Ok(mb)) = (RootMarginal::new(&inst, &tree, &pa), RootMarginal::new(&inst, &tree, &pb)) else { continue };
        if !ma.is_feasible() || !mb.is_feasible() {
            continue;
        }
        out.trials += 1;
        let weight = |v: usize, pin: &Pinning| -> Result<f64> {
            let kids = tree.children(v);
            let free = kids.iter().filter(|&&c| !pin.contains(c)).count();
            Ok(coloring_vertex_weight(q - (kids.len() - free), free, gamma)?.w)
        };
        let gap = |x: &[f64], y: &[f64]| -> Result<f64> {
            let mut s = 0.0;
            for c in 0..q {
                let d = pot.phi(x[c])? - pot.phi(y[c])?;
                s += d * d;
            }
            Ok(sqrt(s))
        };
        let lhs = weight(0, &pa)? * gap(ma.marginal()?, mb.marginal()?)?;
        let mut rhs = 0.0f64;
        for &c in tree.children(0) {
            if pa.contains(c) {
                continue;
            }
            rhs = rhs.max(weight(c, &pa)? * gap(ma.message(c)?, mb.message(c)?)?);
        }
        if rhs > 0.0 {
            out.informative += 1;
            out.max_ratio = out.max_ratio.max(lhs / rhs);
        }
        if lhs > rate * rhs + 1e-12 {
            out.violations += 1;
        }
    }
    Ok(out)
}
