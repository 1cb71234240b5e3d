//! Brute-force Gibbs distributions on small instances, and the exact
//! quantities built from them: influence matrices, spectral independence,
//! total variation and Hamming Wasserstein distances.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{param, Error, Result};
use crate::graph::{Pinning, SpinSystem};
use crate::linalg::{eigenvalues, Mat};
use crate::math::abs;
use crate::transport::transport;

/// Default limit on joint support size, per side, for exact Wasserstein distances.
pub const DEFAULT_SUPPORT_CAP: usize = 2000;

/// Eigenvalues with a larger imaginary part are reported as a complex spectrum.
pub const IMAG_TOLERANCE: f64 = 1e-8;

/// Exact distribution over all extensions of a pinning.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsTable {
    n: usize,
    q: usize,
    fixed: Vec<Option<usize>>,
    /// Row-major full colorings, `n` entries per state.
    states: Vec<usize>,
    probs: Vec<f64>,
}

impl GibbsTable {
    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn state(&self, i: usize) -> &[usize] {
        &self.states[i * self.n..(i + 1) * self.n]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[usize], f64)> + '_ {
        (0..self.len()).map(move |i| (self.state(i), self.probs[i]))
    }

    pub fn is_free(&self, v: usize) -> bool {
        self.fixed[v].is_none()
    }

    pub fn pinned_color(&self, v: usize) -> Option<usize> {
        self.fixed[v]
    }

    pub fn free_vertices(&self) -> Vec<usize> {
        (0..self.n).filter(|&v| self.fixed[v].is_none()).collect()
    }

    /// Marginal law of `v` as a length-`q` vector.
    pub fn marginal(&self, v: usize) -> Vec<f64> {
        let mut m = vec![0.0; self.q];
        for (s, p) in self.iter() {
            m[s[v]] += p;
        }
        m
    }

    /// Marginals of every vertex in one pass.
    pub fn marginals(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.q]; self.n];
        for (s, p) in self.iter() {
            for (v, &c) in s.iter().enumerate() {
                m[v][c] += p;
            }
        }
        m
    }

    /// Joint law of the colors on `vertices`, keyed by the color tuple.
    pub fn joint(&self, vertices: &[usize]) -> BTreeMap<Vec<usize>, f64> {
        let mut out = BTreeMap::new();
        for (s, p) in self.iter() {
            let key: Vec<usize> = vertices.iter().map(|&v| s[v]).collect();
            *out.entry(key).or_insert(0.0) += p;
        }
        out
    }

    /// The table conditioned on `v` having color `c`; `v` becomes pinned.
    pub fn condition(&self, v: usize, c: usize) -> Result<GibbsTable> {
        if v >= self.n || c >= self.q {
            return param(format!("cannot condition on vertex {v} color {c}"));
        }
        let mut states = Vec::new();
        let mut probs = Vec::new();
        for (s, p) in self.iter() {
            if s[v] == c {
                states.extend_from_slice(s);
                probs.push(p);
            }
        }
        let z: f64 = probs.iter().sum();
        if !(z > 0.0) {
            return Err(Error::Infeasible);
        }
        probs.iter_mut().for_each(|p| *p /= z);
        let mut fixed = self.fixed.clone();
        fixed[v] = Some(c);
        Ok(GibbsTable { n: self.n, q: self.q, fixed, states, probs })
    }
}

/// Enumerates every extension of `pin` with positive weight.
pub fn enumerate_gibbs<S: SpinSystem>(sys: &S, pin: &Pinning, state_cap: u64) -> Result<GibbsTable> {
    pin.validate(sys)?;
    let g = sys.graph();
    let n = g.vertex_count();
    let fixed = pin.to_vec(n);
    let order = search_order(sys, &fixed);
    let mut product: u64 = 1;
    for &v in &order {
        product = product.saturating_mul(sys.list(v).len() as u64);
    }
    if product > state_cap {
        return Err(Error::CapExceeded { what: "Gibbs enumeration", needed: product, cap: state_cap });
    }
    let mut base = 1.0;
    for &(u, v) in g.edges() {
        if let (Some(a), Some(b)) = (fixed[u], fixed[v]) {
            base *= sys.edge_weight(a, b);
        }
    }
    let mut states = Vec::new();
    let mut weights = Vec::new();
    if base > 0.0 {
        let mut colors: Vec<usize> = fixed.iter().map(|c| c.unwrap_or(usize::MAX)).collect();
        let mut assigned: Vec<bool> = fixed.iter().map(Option::is_some).collect();
        let mut emit = |colors: &[usize], w: f64| {
            states.extend_from_slice(colors);
            weights.push(w);
        };
        backtrack(sys, &order, 0, base, &mut colors, &mut assigned, &mut emit);
    }
    let z: f64 = weights.iter().sum();
    if !(z > 0.0) {
        return Err(Error::Infeasible);
    }
    weights.iter_mut().for_each(|w| *w /= z);
    Ok(GibbsTable { n, q: sys.q(), fixed, states, probs: weights })
}

/// Free vertices in breadth-first order from the pinned set, so constraints bite early.
fn search_order<S: SpinSystem>(sys: &S, fixed: &[Option<usize>]) -> Vec<usize> {
    let g = sys.graph();
    let n = g.vertex_count();
    let mut seen: Vec<bool> = fixed.iter().map(Option::is_some).collect();
    let mut order = Vec::new();
    let mut queue = alloc::collections::VecDeque::new();
    let mut seeds: Vec<usize> = (0..n).filter(|&v| fixed[v].is_some()).collect();
    seeds.extend((0..n).filter(|&v| fixed[v].is_none()));
    for s in seeds {
        if fixed[s].is_some() {
            queue.push_back(s);
        } else if !seen[s] {
            seen[s] = true;
            order.push(s);
            queue.push_back(s);
        }
        while let Some(x) = queue.pop_front() {
            for &y in g.neighbors(x) {
                if !seen[y] {
                    seen[y] = true;
                    order.push(y);
                    queue.push_back(y);
                }
            }
        }
    }
    order
}

fn backtrack<S: SpinSystem>(
    sys: &S,
    order: &[usize],
    k: usize,
    weight: f64,
    colors: &mut [usize],
    assigned: &mut [bool],
    emit: &mut dyn FnMut(&[usize], f64),
) {
    if k == order.len() {
        emit(colors, weight);
        return;
    }
    let v = order[k];
    let g = sys.graph();
    for &c in sys.list(v) {
        let mut w = weight;
        for &u in g.neighbors(v) {
            if assigned[u] {
                w *= sys.edge_weight(c, colors[u]);
            }
        }
        if w > 0.0 {
            colors[v] = c;
            assigned[v] = true;
            backtrack(sys, order, k + 1, w, colors, assigned, emit);
            assigned[v] = false;
        }
    }
    colors[v] = usize::MAX;
}

/// `(1/2) sum |a - b|`; a shorter vector is padded with zeros.
pub fn tv_distance(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().max(b.len());
    let at = |x: &[f64], i: usize| x.get(i).copied().unwrap_or(0.0);
    0.5 * (0..n).map(|i| abs(at(a, i) - at(b, i))).sum::<f64>()
}

/// Pairwise influences `mu_v^{u<-b}(c) - mu_v(c)` over free vertex-color pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceMatrix {
    /// `(vertex, color)` of each row and column.
    pub index: Vec<(usize, usize)>,
    pub entries: Mat,
}

impl InfluenceMatrix {
    /// The block of rows at `u` and columns at `v`, as a `q x q` matrix.
    pub fn block(&self, u: usize, v: usize, q: usize) -> Mat {
        let mut m = Mat::zeros(q, q);
        for (i, &(a, b)) in self.index.iter().enumerate() {
            if a != u {
                continue;
            }
            for (j, &(x, c)) in self.index.iter().enumerate() {
                if x == v {
                    m[(b, c)] = self.entries[(i, j)];
                }
            }
        }
        m
    }
}

/// Marginals of all vertices under `u <- b` for each feasible `b`, from one pass.
fn conditional_marginals(table: &GibbsTable, u: usize) -> Vec<Option<Vec<Vec<f64>>>> {
    let (n, q) = (table.n, table.q);
    let mut acc = vec![vec![vec![0.0; q]; n]; q];
    let mut mass = vec![0.0; q];
    for (s, p) in table.iter() {
        let b = s[u];
        mass[b] += p;
        for (v, &c) in s.iter().enumerate() {
            acc[b][v][c] += p;
        }
    }
    acc.into_iter()
        .zip(mass)
        .map(|(mut m, z)| {
            if z > 0.0 {
                m.iter_mut().flatten().for_each(|x| *x /= z);
                Some(m)
            } else {
                None
            }
        })
        .collect()
}

pub fn influence_matrix_of(table: &GibbsTable) -> Result<InfluenceMatrix> {
    let free = table.free_vertices();
    if free.len() < 2 {
        return param("influence matrices need at least two free vertices");
    }
    let base = table.marginals();
    let mut index = Vec::new();
    for &v in &free {
        index.extend((0..table.q).filter(|&c| base[v][c] > 0.0).map(|c| (v, c)));
    }
    let mut entries = Mat::zeros(index.len(), index.len());
    let mut row = 0;
    for &u in &free {
        let cond = conditional_marginals(table, u);
        for (b, m) in cond.iter().enumerate() {
            let Some(m) = m else { continue };
            debug_assert_eq!(index[row], (u, b));
            for (j, &(v, c)) in index.iter().enumerate() {
                if v != u {
                    entries[(row, j)] = m[v][c] - base[v][c];
                }
            }
            row += 1;
        }
    }
    Ok(InfluenceMatrix { index, entries })
}

pub fn influence_matrix<S: SpinSystem>(sys: &S, pin: &Pinning, state_cap: u64) -> Result<InfluenceMatrix> {
    influence_matrix_of(&enumerate_gibbs(sys, pin, state_cap)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralReport {
    pub lambda_max: f64,
    /// Largest imaginary part over the spectrum.
    pub max_imag: f64,
    /// Set when `max_imag` exceeds [`IMAG_TOLERANCE`].
    pub complex_spectrum: bool,
    pub dimension: usize,
}

pub fn spectral_report(m: &InfluenceMatrix) -> Result<SpectralReport> {
    let eig = eigenvalues(&m.entries)?;
    let lambda_max = eig.iter().map(|e| e.0).fold(f64::NEG_INFINITY, f64::max);
    let max_imag = eig.iter().map(|e| abs(e.1)).fold(0.0, f64::max);
    Ok(SpectralReport { lambda_max, max_imag, complex_spectrum: max_imag > IMAG_TOLERANCE, dimension: m.index.len() })
}

/// Largest real eigenvalue of the influence matrix.
pub fn spectral_independence<S: SpinSystem>(sys: &S, pin: &Pinning, state_cap: u64) -> Result<SpectralReport> {
    spectral_report(&influence_matrix(sys, pin, state_cap)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct W1Bounds {
    /// Optimal transport value; `None` when the support exceeded the cap.
    pub exact: Option<f64>,
    /// Sum of single-vertex total variation distances.
    pub lower: f64,
    /// Cost of the greedy coupling.
    pub upper: f64,
}

/// Wasserstein distance under Hamming cost on the vertices free in both tables.
pub fn w1_hamming(a: &GibbsTable, b: &GibbsTable, support_cap: usize) -> Result<W1Bounds> {
    if a.n != b.n || a.q != b.q {
        return param("tables live on different instances");
    }
    let common: Vec<usize> = (0..a.n).filter(|&v| a.is_free(v) && b.is_free(v)).collect();
    let pa = a.joint(&common);
    let pb = b.joint(&common);
    let lower: f64 = common.iter().map(|&v| tv_distance(&a.marginal(v), &b.marginal(v))).sum();
    // Shared mass stays put; only the residuals have to move.
    let mut ra: Vec<(&Vec<usize>, f64)> = Vec::new();
    let mut rb: Vec<(&Vec<usize>, f64)> = Vec::new();
    for (k, &x) in &pa {
        let y = pb.get(k).copied().unwrap_or(0.0);
        if x > y {
            ra.push((k, x - y));
        }
    }
    for (k, &y) in &pb {
        let x = pa.get(k).copied().unwrap_or(0.0);
        if y > x {
            rb.push((k, y - x));
        }
    }
    let hamming = |s: &[usize], t: &[usize]| s.iter().zip(t).filter(|(x, y)| x != y).count() as f64;
    let ma: f64 = ra.iter().map(|r| r.1).sum();
    let mb: f64 = rb.iter().map(|r| r.1).sum();
    let mut upper = 0.0;
    if ma > 0.0 && mb > 0.0 {
        for (s, x) in &ra {
            for (t, y) in &rb {
                upper += x * y / mb * hamming(s, t);
            }
        }
    }
    let exact = if ra.len() <= support_cap && rb.len() <= support_cap {
        if ra.is_empty() || rb.is_empty() {
            Some(0.0)
        } else {
            let supply: Vec<f64> = ra.iter().map(|r| r.1).collect();
            let demand: Vec<f64> = rb.iter().map(|r| r.1 * ma / mb).collect();
            let sol = transport(&supply, &demand, &|i, j| hamming(ra[i].0, rb[j].0))?;
            Some(sol.cost.clamp(lower.min(upper), upper))
        }
    } else {
        None
    };
    Ok(W1Bounds { exact, lower, upper })
}

/// Largest sum over the free sphere `S(u, r)` of marginal TV distances between
/// two conditionings of `u`.
pub fn influence_decay_at_radius<S: SpinSystem>(sys: &S, pin: &Pinning, u: usize, r: usize, state_cap: u64) -> Result<f64> {
    if pin.contains(u) {
        return param(format!("vertex {u} is pinned"));
    }
    let table = enumerate_gibbs(sys, pin, state_cap)?;
    let sphere: Vec<usize> = sys.graph().sphere(u, r).into_iter().filter(|&v| table.is_free(v)).collect();
    let cond = conditional_marginals(&table, u);
    let feasible: Vec<&Vec<Vec<f64>>> = cond.iter().flatten().collect();
    let mut best = 0.0f64;
    for i in 0..feasible.len() {
        for j in i + 1..feasible.len() {
            let s: f64 = sphere.iter().map(|&v| tv_distance(&feasible[i][v], &feasible[j][v])).sum();
            best = best.max(s);
        }
    }
    Ok(best)
}

/// Both sides of the sum-of-influences inequality for the worst color pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SumInflReport {
    pub colors: (usize, usize),
    pub lhs: f64,
    /// TV distance of the joint law on the free part of `S(u, K)`.
    pub outer_tv: f64,
    pub inner_count: usize,
    /// Largest inner sum over outer colorings feasible under both conditionings.
    pub max_term: f64,
    pub rhs: f64,
    pub slack: f64,
    /// Outer colorings examined by the maximization.
    pub outer_colorings: usize,
    /// The maximization enumerates every outer coloring.
    pub exact: bool,
    /// `(tv, ratio bound)` for the outer joint law when `B(u, K)` is a tree.
    pub ratio_check: Option<(f64, f64)>,
}

/// Evaluates the inequality for every pair of feasible colors at `u` and
/// returns the pair with the least slack.
pub fn check_sum_infl_inequality<S: SpinSystem>(sys: &S, pin: &Pinning, u: usize, r: usize, k: usize, state_cap: u64) -> Result<SumInflReport> {
    if !(k > r && r >= 1) {
        return param("need K > R >= 1");
    }
    if pin.contains(u) {
        return param(format!("vertex {u} is pinned"));
    }
    let g = sys.graph();
    let table = enumerate_gibbs(sys, pin, state_cap)?;
    let inner: Vec<usize> = g.sphere(u, r).into_iter().filter(|&v| table.is_free(v)).collect();
    let outer: Vec<usize> = g.sphere(u, k).into_iter().filter(|&v| table.is_free(v)).collect();
    let ball_is_tree = g.induced(&g.ball(u, k)).0.is_tree();
    let q = table.q;

    // One pass: for each (center color, outer coloring) the mass and the
    // inner marginals.
    struct Cell {
        mass: f64,
        inner: Vec<Vec<f64>>,
    }
    let mut cells: BTreeMap<(usize, Vec<usize>), Cell> = BTreeMap::new();
    let mut center = vec![0.0; q];
    for (s, p) in table.iter() {
        center[s[u]] += p;
        let key = (s[u], outer.iter().map(|&v| s[v]).collect::<Vec<_>>());
        let cell = cells.entry(key).or_insert_with(|| Cell { mass: 0.0, inner: vec![vec![0.0; q]; inner.len()] });
        cell.mass += p;
        for (i, &v) in inner.iter().enumerate() {
            cell.inner[i][s[v]] += p;
        }
    }
    let colors: Vec<usize> = (0..q).filter(|&c| center[c] > 0.0).collect();
    let mut outer_keys: Vec<&Vec<usize>> = cells.keys().map(|(_, s)| s).collect();
    outer_keys.sort();
    outer_keys.dedup();

    let inner_law = |b: usize, key: Option<&Vec<usize>>| -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; q]; inner.len()];
        let mut z = 0.0;
        for ((c, s), cell) in &cells {
            if *c == b && key.map_or(true, |k| k == s) {
                z += cell.mass;
                for (i, row) in cell.inner.iter().enumerate() {
                    for (x, y) in m[i].iter_mut().zip(row) {
                        *x += y;
                    }
                }
            }
        }
        m.iter_mut().flatten().for_each(|x| *x /= z);
        m
    };
    let outer_mass = |b: usize, s: &Vec<usize>| cells.get(&(b, s.clone())).map_or(0.0, |c| c.mass) / center[b];

    let mut best: Option<SumInflReport> = None;
    for (ib, &b) in colors.iter().enumerate() {
        for &c in &colors[ib + 1..] {
            let mb = inner_law(b, None);
            let mc = inner_law(c, None);
            let lhs: f64 = (0..inner.len()).map(|i| tv_distance(&mb[i], &mc[i])).sum();
            let mut outer_tv = 0.0;
            let mut max_term = 0.0f64;
            let mut ratio = 0.0f64;
            for s in &outer_keys {
                let (xb, xc) = (outer_mass(b, s), outer_mass(c, s));
                outer_tv += 0.5 * abs(xb - xc);
                if xc > 0.0 {
                    ratio = ratio.max(abs(xb / xc - 1.0));
                } else if xb > 0.0 {
                    ratio = f64::INFINITY;
                }
                if xb > 0.0 && xc > 0.0 {
                    let sb = inner_law(b, Some(s));
                    let sc = inner_law(c, Some(s));
                    let t: f64 = (0..inner.len()).map(|i| tv_distance(&sb[i], &sc[i])).sum();
                    max_term = max_term.max(t);
                }
            }
            let rhs = outer_tv * inner.len() as f64 + max_term;
            let report = SumInflReport {
                colors: (b, c),
                lhs,
                outer_tv,
                inner_count: inner.len(),
                max_term,
                rhs,
                slack: rhs - lhs,
                outer_colorings: outer_keys.len(),
                exact: true,
                ratio_check: ball_is_tree.then_some((outer_tv, 0.5 * ratio)),
            };
            if best.as_ref().map_or(true, |r| report.slack < r.slack) {
                best = Some(report);
            }
        }
    }
    best.ok_or_else(|| Error::Parameter(format!("vertex {u} has fewer than two feasible colors")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{ColoringInstance, Graph, PottsInstance, RootedTree, DEFAULT_STATE_CAP};
    use crate::jacobian::{jacobian_log_normalized, jacobian_plain_theta};
    use crate::linalg::power_iteration_sym;
    use crate::rng;
    use crate::tree::{exact_forest_marginals, SubDistribution};
    use rand::Rng;

    const CAP: u64 = DEFAULT_STATE_CAP;

    fn edge(q: usize) -> ColoringInstance {
        ColoringInstance::uniform(Graph::path(2), q).unwrap()
    }

    #[test]
    fn edge_and_triangle_tables() {
        let t = enumerate_gibbs(&edge(3), &Pinning::new(), CAP).unwrap();
        assert_eq!(t.len(), 6);
        assert!(t.probs().iter().all(|&p| (p - 1.0 / 6.0).abs() < 1e-15));
        let tri = ColoringInstance::uniform(Graph::complete(3), 3).unwrap();
        let t = enumerate_gibbs(&tri, &Pinning::new(), CAP).unwrap();
        assert_eq!(t.len(), 6);
        for (s, p) in t.iter() {
            assert!(s[0] != s[1] && s[1] != s[2] && s[0] != s[2]);
            assert!((p - 1.0 / 6.0).abs() < 1e-15);
        }
    }

    #[test]
    fn potts_edge_monochromatic_mass() {
        let sys = PottsInstance::new(Graph::path(2), 2, 0.5).unwrap();
        let t = enumerate_gibbs(&sys, &Pinning::new(), CAP).unwrap();
        let mono: f64 = t.iter().filter(|(s, _)| s[0] == s[1]).map(|(_, p)| p).sum();
        assert!((mono - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn errors_for_cap_and_infeasibility() {
        let sys = ColoringInstance::uniform(Graph::path(8), 9).unwrap();
        assert!(matches!(enumerate_gibbs(&sys, &Pinning::new(), 1000), Err(Error::CapExceeded { .. })));
        let tri = ColoringInstance::uniform(Graph::complete(3), 3).unwrap();
        let pin = Pinning::from_pairs(&[(0, 0), (1, 1)]);
        assert!(enumerate_gibbs(&tri, &pin.with(2, 0), CAP).is_err());
        let k4 = ColoringInstance::uniform(Graph::complete(4), 3).unwrap();
        assert_eq!(enumerate_gibbs(&k4, &Pinning::new(), CAP), Err(Error::Infeasible));
    }

    #[test]
    fn marginals_match_tree_recursion() {
        let mut r = rng::stream(70, 0);
        for trial in 0..30 {
            let g = if trial % 3 == 0 { Graph::path(9) } else { Graph::dary_tree(2, 2).unwrap() };
            let n = g.vertex_count();
            let q = 3 + trial % 2;
            let pin = Pinning::from_pairs(&[(n - 1, r.gen_range(0..q)), (0, r.gen_range(0..q))]);
            let check = |table: GibbsTable, exact: crate::tree::MarginalTable| {
                for v in 0..n {
                    let m = table.marginal(v);
                    for c in 0..q {
                        assert!((m[c] - exact.marginal(v)[c]).abs() < 1e-10);
                    }
                }
            };
            if trial % 2 == 0 {
                let sys = ColoringInstance::uniform(g, q).unwrap();
                check(enumerate_gibbs(&sys, &pin, CAP).unwrap(), exact_forest_marginals(&sys, &pin).unwrap());
            } else {
                let sys = PottsInstance::new(g, q, r.gen::<f64>()).unwrap();
                check(enumerate_gibbs(&sys, &pin, CAP).unwrap(), exact_forest_marginals(&sys, &pin).unwrap());
            }
        }
    }

    #[test]
    fn edge_influence_and_spectrum() {
        let m = influence_matrix(&edge(3), &Pinning::new(), CAP).unwrap();
        assert_eq!(m.index.len(), 6);
        let block = m.block(0, 1, 3);
        for b in 0..3 {
            for c in 0..3 {
                let want = if b == c { -1.0 / 3.0 } else { 1.0 / 6.0 };
                assert!((block[(b, c)] - want).abs() < 1e-15);
            }
        }
        let rep = spectral_report(&m).unwrap();
        assert!((rep.lambda_max - 0.5).abs() < 1e-10);
        assert!(!rep.complex_spectrum);
        let single = Pinning::from_pairs(&[(0, 0)]);
        assert!(influence_matrix(&edge(3), &single, CAP).is_err());
    }

    fn random_instance(r: &mut rng::Rng, trial: usize) -> (ColoringInstance, Pinning) {
        let g = match trial % 4 {
            0 => Graph::path(4),
            1 => Graph::cycle(5).unwrap(),
            2 => Graph::dary_tree(2, 2).unwrap(),
            _ => Graph::new(5, &[(0, 1), (1, 2), (2, 0), (2, 3), (3, 4)]).unwrap(),
        };
        let q = 3 + r.gen_range(0..2);
        let n = g.vertex_count();
        let lists = (0..n)
            .map(|_| {
                let l: Vec<usize> = (0..q).filter(|_| r.gen_bool(0.8)).collect();
                if l.len() < 2 {
                    (0..q).collect()
                } else {
                    l
                }
            })
            .collect();
        let sys = ColoringInstance::new(g, q, lists).unwrap();
        let mut pin = Pinning::new();
        if r.gen_bool(0.5) {
            let v = r.gen_range(0..n);
            pin.insert(v, sys.list(v)[0]);
        }
        (sys, pin)
    }

    #[test]
    fn rows_sum_to_zero_and_diagonal_blocks_vanish() {
        let mut r = rng::stream(71, 0);
        let mut done = 0;
        for trial in 0..60 {
            let (sys, pin) = random_instance(&mut r, trial);
            let Ok(m) = influence_matrix(&sys, &pin, CAP) else { continue };
            done += 1;
            for i in 0..m.index.len() {
                let s: f64 = m.entries.row(i).iter().sum();
                assert!(s.abs() < 1e-12);
                for j in 0..m.index.len() {
                    if m.index[i].0 == m.index[j].0 {
                        assert_eq!(m.entries[(i, j)], 0.0);
                    }
                }
            }
        }
        assert!(done > 30);
    }

    #[test]
    fn influences_factor_along_paths() {
        let mut r = rng::stream(72, 0);
        for trial in 0..20 {
            let q = 3 + trial % 3;
            let pin = Pinning::from_pairs(&[(3, r.gen_range(0..q))]);
            let check = |m: InfluenceMatrix| {
                let uv = m.block(0, 1, q);
                let vw = m.block(1, 2, q);
                let uw = m.block(0, 2, q);
                assert!(uv.mul(&vw).max_abs_diff(&uw) < 1e-12);
            };
            if trial % 2 == 0 {
                check(influence_matrix(&ColoringInstance::uniform(Graph::path(4), q).unwrap(), &pin, CAP).unwrap());
            } else {
                let sys = PottsInstance::new(Graph::path(4), q, r.gen::<f64>()).unwrap();
                check(influence_matrix(&sys, &pin, CAP).unwrap());
            }
        }
    }

    #[test]
    fn influence_equals_log_jacobian_at_the_root() {
        // Root 0 with children 1, 2; child 1 has children 3, 4.
        let g = Graph::new(5, &[(0, 1), (0, 2), (1, 3), (1, 4)]).unwrap();
        let mut r = rng::stream(73, 0);
        for trial in 0..20 {
            let q = 3 + trial % 2;
            let beta = if trial % 2 == 0 { 0.0 } else { r.gen::<f64>() };
            let sys = PottsInstance::new(g.clone(), q, beta).unwrap();
            let pin = Pinning::from_pairs(&[(4, r.gen_range(0..q))]);
            let table = enumerate_gibbs(&sys, &pin, CAP).unwrap();
            let infl = influence_matrix_of(&table).unwrap();
            // Subtree marginals of the children with the root removed.
            let cut = PottsInstance::new(Graph::new(5, &[(1, 3), (1, 4)]).unwrap(), q, beta).unwrap();
            let sub = exact_forest_marginals(&cut, &pin).unwrap();
            let children: Vec<SubDistribution> = [1, 2].iter().map(|&v| SubDistribution::distribution(sub.marginal(v).to_vec()).unwrap()).collect();
            let root_list: Vec<usize> = (0..q).collect();
            let jac = jacobian_log_normalized(sys.theta(), &children, &root_list).unwrap();
            let plain = jacobian_plain_theta(sys.theta(), &children, &root_list).unwrap();
            let gm = plain.root_marginal();
            for (k, &child) in [1usize, 2].iter().enumerate() {
                let block = infl.block(0, child, q);
                assert!(block.max_abs_diff(&jac.blocks()[k]) < 1e-12, "trial {trial}");
                // Without renormalizing the child law the identity picks up a rank-one drift.
                let p = sub.marginal(child);
                let raw = &plain.blocks()[k];
                let drift = (0..q).filter(|&c| gm[c] > 0.0).map(|c| (0..q).map(|b| raw[(c, b)] * p[b] / gm[c]).sum::<f64>().abs()).fold(0.0, f64::max);
                if trial == 0 && child == 1 {
                    assert!(drift > 1e-3, "{drift}");
                }
            }
        }
    }

    #[test]
    fn spectrum_agrees_with_power_iteration_on_trees() {
        // On trees the influence matrix is similar to a symmetric one.
        let g = Graph::dary_tree(2, 2).unwrap();
        for q in [4, 5] {
            let m = influence_matrix(&ColoringInstance::uniform(g.clone(), q).unwrap(), &Pinning::new(), CAP).unwrap();
            let t = enumerate_gibbs(&ColoringInstance::uniform(g.clone(), q).unwrap(), &Pinning::new(), CAP).unwrap();
            let base = t.marginals();
            let d: Vec<f64> = m.index.iter().map(|&(v, c)| base[v][c].sqrt()).collect();
            let k = d.len();
            let mut sym = Mat::zeros(k, k);
            for i in 0..k {
                for j in 0..k {
                    sym[(i, j)] = d[i] * m.entries[(i, j)] / d[j];
                }
            }
            let sym_t = sym.transpose();
            assert!(sym.max_abs_diff(&sym_t) < 1e-12);
            let rep = spectral_report(&m).unwrap();
            let shifted = {
                let mut s = sym.clone();
                for i in 0..k {
                    s[(i, i)] += 2.0;
                }
                s
            };
            let top = power_iteration_sym(&shifted, 1e-14, 100_000) - 2.0;
            assert!((rep.lambda_max - top).abs() < 1e-8, "{} vs {}", rep.lambda_max, top);
        }
    }

    #[test]
    fn tv_examples() {
        assert_eq!(tv_distance(&[0.2, 0.8], &[0.2, 0.8]), 0.0);
        assert!((tv_distance(&[0.0, 0.5, 0.5], &[0.5, 0.0, 0.5]) - 0.5).abs() < 1e-15);
        let mut r = rng::stream(74, 0);
        for _ in 0..100 {
            let a: Vec<f64> = (0..4).map(|_| r.gen::<f64>()).collect();
            let b: Vec<f64> = (0..4).map(|_| r.gen::<f64>()).collect();
            let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
            let a: Vec<f64> = a.iter().map(|x| x / sa).collect();
            let b: Vec<f64> = b.iter().map(|x| x / sb).collect();
            assert_eq!(tv_distance(&a, &b), tv_distance(&b, &a));
            assert!(tv_distance(&a, &b) <= 1.0);
        }
    }

    #[test]
    fn w1_edge_example_and_identity() {
        let t = enumerate_gibbs(&edge(3), &Pinning::new(), CAP).unwrap();
        let a = t.condition(0, 1).unwrap();
        let b = t.condition(0, 2).unwrap();
        let w = w1_hamming(&a, &b, DEFAULT_SUPPORT_CAP).unwrap();
        assert!((w.exact.unwrap() - 0.5).abs() < 1e-15);
        assert!((w.lower - 0.5).abs() < 1e-15);
        let w = w1_hamming(&t, &t, DEFAULT_SUPPORT_CAP).unwrap();
        assert_eq!((w.exact, w.lower, w.upper), (Some(0.0), 0.0, 0.0));
        let big = w1_hamming(&a, &b, 0).unwrap();
        assert!(big.exact.is_none() && big.upper >= 0.5);
    }

    #[test]
    fn w1_bounds_sandwich_exact_value() {
        let mut r = rng::stream(75, 0);
        let mut done = 0;
        while done < 100 {
            let (sys, pin) = random_instance(&mut r, done);
            let Ok(t) = enumerate_gibbs(&sys, &pin, CAP) else { continue };
            let free = t.free_vertices();
            let u = free[r.gen_range(0..free.len())];
            let m = t.marginal(u);
            let colors: Vec<usize> = (0..t.q()).filter(|&c| m[c] > 0.0).collect();
            if colors.len() < 2 {
                continue;
            }
            let a = t.condition(u, colors[0]).unwrap();
            let b = t.condition(u, colors[1]).unwrap();
            let w = w1_hamming(&a, &b, DEFAULT_SUPPORT_CAP).unwrap();
            let x = w.exact.unwrap();
            assert!(w.lower <= x + 1e-12 && x <= w.upper + 1e-12, "{w:?}");
            done += 1;
        }
    }

    #[test]
    fn w1_is_invariant_under_color_relabeling() {
        let mut r = rng::stream(76, 0);
        for trial in 0..20 {
            let q = 4;
            let g = if trial % 2 == 0 { Graph::cycle(5).unwrap() } else { Graph::dary_tree(2, 2).unwrap() };
            let perm: Vec<usize> = {
                let mut p: Vec<usize> = (0..q).collect();
                for i in (1..q).rev() {
                    p.swap(i, r.gen_range(0..=i));
                }
                p
            };
            let sys = ColoringInstance::uniform(g.clone(), q).unwrap();
            let pin = Pinning::from_pairs(&[(2, 1)]);
            let pin_p = Pinning::from_pairs(&[(2, perm[1])]);
            let t = enumerate_gibbs(&sys, &pin, CAP).unwrap();
            let tp = enumerate_gibbs(&sys, &pin_p, CAP).unwrap();
            let w = w1_hamming(&t.condition(0, 0).unwrap(), &t.condition(0, 3).unwrap(), DEFAULT_SUPPORT_CAP).unwrap();
            let wp = w1_hamming(&tp.condition(0, perm[0]).unwrap(), &tp.condition(0, perm[3]).unwrap(), DEFAULT_SUPPORT_CAP).unwrap();
            assert!((w.exact.unwrap() - wp.exact.unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn spectral_chain_through_wasserstein() {
        let mut r = rng::stream(77, 0);
        let mut done = 0;
        for trial in 0..12 {
            let (sys, pin) = random_instance(&mut r, trial);
            let Ok(t) = enumerate_gibbs(&sys, &pin, CAP) else { continue };
            let Ok(m) = influence_matrix_of(&t) else { continue };
            let lam = spectral_report(&m).unwrap().lambda_max;
            let norm = m.entries.norm_inf();
            let mut w_max = 0.0f64;
            for u in t.free_vertices() {
                let mu = t.marginal(u);
                let colors: Vec<usize> = (0..t.q()).filter(|&c| mu[c] > 0.0).collect();
                for &b in &colors {
                    for &c in &colors {
                        if b != c {
                            let w = w1_hamming(&t.condition(u, b).unwrap(), &t.condition(u, c).unwrap(), DEFAULT_SUPPORT_CAP).unwrap();
                            w_max = w_max.max(w.exact.unwrap());
                        }
                    }
                }
            }
            assert!(lam <= norm + 1e-10 && norm <= 2.0 * w_max + 1e-10, "{lam} {norm} {w_max}");
            done += 1;
        }
        assert!(done > 6);
    }

    #[test]
    fn influence_decay_examples() {
        let sys = edge(3);
        let v = influence_decay_at_radius(&sys, &Pinning::new(), 0, 1, CAP).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
        assert_eq!(influence_decay_at_radius(&sys, &Pinning::new(), 0, 5, CAP).unwrap(), 0.0);
        let tree = ColoringInstance::uniform(Graph::path(7), 4).unwrap();
        let mut last = f64::INFINITY;
        for r in 1..=3 {
            let x = influence_decay_at_radius(&tree, &Pinning::new(), 0, r, CAP).unwrap();
            assert!(x < last);
            last = x;
        }
    }

    #[test]
    fn sum_influence_inequality_holds() {
        for n in 4..8 {
            let sys = ColoringInstance::uniform(Graph::path(n), 3).unwrap();
            let rep = check_sum_infl_inequality(&sys, &Pinning::from_pairs(&[(n - 1, 0)]), 0, 1, 2, CAP).unwrap();
            assert!(rep.slack >= -1e-12, "{rep:?}");
            let (tv, bound) = rep.ratio_check.unwrap();
            assert!(tv <= bound + 1e-12);
        }
        let c6 = ColoringInstance::uniform(Graph::cycle(6).unwrap(), 4).unwrap();
        let rep = check_sum_infl_inequality(&c6, &Pinning::new(), 0, 1, 2, CAP).unwrap();
        assert!(rep.slack >= -1e-12 && rep.ratio_check.is_some());
        // Empty outer sphere: the bound is the inner maximum alone.
        let p3 = ColoringInstance::uniform(Graph::path(3), 3).unwrap();
        let rep = check_sum_infl_inequality(&p3, &Pinning::new(), 0, 1, 3, CAP).unwrap();
        assert_eq!(rep.outer_tv, 0.0);
        assert!((rep.rhs - rep.max_term).abs() < 1e-15 && rep.lhs <= rep.rhs + 1e-15);
        let rooted = RootedTree::new(Graph::path(3), 0).unwrap();
        assert_eq!(rooted.root(), 0);
    }
}
