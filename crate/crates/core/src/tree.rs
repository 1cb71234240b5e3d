//! Tree recursions, exact marginals on trees and closed-form marginal bounds.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{domain, param, Error, Result};
use crate::graph::{Graph, Pinning, RootedTree, SpinSystem};
use crate::math::{powf, powi};

/// Normalizers below this are treated as an empty support.
pub const DENOMINATOR_FLOOR: f64 = 1e-300;

const TOL: f64 = 1e-12;

/// Nonnegative color-indexed vector with entries at most `cap` and total at most 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SubDistribution {
    values: Vec<f64>,
    cap: f64,
}

impl SubDistribution {
    pub fn new(values: Vec<f64>, cap: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&cap) {
            return param("cap must lie in [0,1]");
        }
        if values.iter().any(|&x| !(x >= -TOL && x <= cap + TOL)) {
            return domain(format!("entries must lie in [0, {cap}]"));
        }
        if values.iter().sum::<f64>() > 1.0 + TOL {
            return domain("entries sum to more than 1");
        }
        Ok(SubDistribution { values, cap })
    }

    /// A probability vector with the trivial cap 1.
    pub fn distribution(values: Vec<f64>) -> Result<Self> {
        SubDistribution::new(values, 1.0)
    }

    pub fn point_mass(q: usize, c: usize) -> Self {
        let mut values = vec![0.0; q];
        values[c] = 1.0;
        SubDistribution { values, cap: 1.0 }
    }

    pub fn uniform(q: usize) -> Self {
        SubDistribution { values: vec![1.0 / q as f64; q], cap: 1.0 }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The color carrying all mass, if this is a point mass.
    pub fn as_point_mass(&self) -> Option<usize> {
        let c = self.values.iter().position(|&x| x == 1.0)?;
        self.values.iter().enumerate().all(|(b, &x)| b == c || x == 0.0).then_some(c)
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Unnormalized recursion weights `prod_i (1 - theta p_i(c))` on `list`, zero elsewhere.
pub(crate) fn recursion_weights(list: &[usize], q: usize, theta: f64, children: &[&[f64]]) -> Vec<f64> {
    let mut w = vec![0.0; q];
    for &c in list {
        let mut prod = 1.0;
        for p in children {
            prod *= 1.0 - theta * p[c];
        }
        w[c] = prod;
    }
    w
}

pub(crate) fn normalize(mut w: Vec<f64>) -> Result<Vec<f64>> {
    let z: f64 = w.iter().sum();
    if !(z >= DENOMINATOR_FLOOR) {
        return Err(Error::Infeasible);
    }
    w.iter_mut().for_each(|x| *x /= z);
    Ok(w)
}

/// The tree recursion `g` for a root with color list `list`.
///
/// `theta = 1` gives list colorings, `theta = 1 - beta` the Potts model.
pub fn recursion_step(list: &[usize], q: usize, theta: f64, children: &[&[f64]]) -> Result<Vec<f64>> {
    if let Some(p) = children.iter().find(|p| p.len() != q) {
        return param(format!("child vector has length {} but q = {q}", p.len()));
    }
    normalize(recursion_weights(list, q, theta, children))
}

fn palette_size(list: &[usize], children: &[SubDistribution]) -> usize {
    let from_list = list.iter().max().map_or(0, |&c| c + 1);
    children.iter().map(SubDistribution::len).fold(from_list, usize::max)
}

/// Coloring recursion: `g_c = prod_i (1 - p_i(c)) / sum_{c' in list} prod_i (1 - p_i(c'))`.
///
/// Child vectors are read only on the root list; shorter children are padded with zeros.
pub fn recursion_step_coloring(lists_root: &[usize], children: &[SubDistribution]) -> Result<SubDistribution> {
    let q = palette_size(lists_root, children);
    let padded: Vec<Vec<f64>> = children
        .iter()
        .map(|p| {
            let mut v = p.values().to_vec();
            v.resize(q, 0.0);
            v
        })
        .collect();
    let refs: Vec<&[f64]> = padded.iter().map(Vec::as_slice).collect();
    let g = recursion_step(lists_root, q, 1.0, &refs)?;
    Ok(SubDistribution { values: g, cap: 1.0 })
}

/// Potts recursion: `g_c = prod_i (1 - (1-beta) p_i(c)) / sum_b prod_i (1 - (1-beta) p_i(b))`.
pub fn recursion_step_potts(q: usize, beta: f64, children: &[SubDistribution]) -> Result<SubDistribution> {
    if !(0.0..=1.0).contains(&beta) {
        return param("beta must lie in [0,1]");
    }
    let list: Vec<usize> = (0..q).collect();
    let refs: Vec<&[f64]> = children.iter().map(SubDistribution::values).collect();
    let g = recursion_step(&list, q, 1.0 - beta, &refs)?;
    Ok(SubDistribution { values: g, cap: 1.0 })
}

/// Parent/children structure of a forest, rooted at the smallest vertex of
/// each component unless built from a [`RootedTree`].
#[derive(Debug, Clone)]
pub(crate) struct Forest {
    pub parent: Vec<Option<usize>>,
    pub children: Vec<Vec<usize>>,
    /// Parents before children.
    pub order: Vec<usize>,
}

impl Forest {
    pub fn from_graph(g: &Graph) -> Self {
        let n = g.vertex_count();
        let mut parent = vec![None; n];
        let mut children = vec![Vec::new(); n];
        let mut order = Vec::with_capacity(n);
        let mut seen = vec![false; n];
        for s in 0..n {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut queue = VecDeque::from([s]);
            while let Some(x) = queue.pop_front() {
                order.push(x);
                for &y in g.neighbors(x) {
                    if !seen[y] {
                        seen[y] = true;
                        parent[y] = Some(x);
                        children[x].push(y);
                        queue.push_back(y);
                    }
                }
            }
        }
        Forest { parent, children, order }
    }

    pub fn from_tree(t: &RootedTree) -> Self {
        let n = t.vertex_count();
        Forest {
            parent: (0..n).map(|v| t.parent(v)).collect(),
            children: (0..n).map(|v| t.children(v).to_vec()).collect(),
            order: t.order().to_vec(),
        }
    }
}

/// Upward messages: `up[v]` is the marginal of `v` in its subtree under the pinning.
pub(crate) fn upward<S: SpinSystem>(sys: &S, forest: &Forest, fixed: &[Option<usize>]) -> Result<Vec<Vec<f64>>> {
    let q = sys.q();
    let theta = sys.theta();
    let mut up: Vec<Vec<f64>> = vec![Vec::new(); forest.order.len()];
    for &v in forest.order.iter().rev() {
        up[v] = upward_at(sys, forest, fixed, &up, v, q, theta)?;
    }
    Ok(up)
}

fn upward_at<S: SpinSystem>(
    sys: &S,
    forest: &Forest,
    fixed: &[Option<usize>],
    up: &[Vec<f64>],
    v: usize,
    q: usize,
    theta: f64,
) -> Result<Vec<f64>> {
    let kids: Vec<&[f64]> = forest.children[v].iter().map(|&i| up[i].as_slice()).collect();
    match fixed[v] {
        Some(c) => {
            // The pinned color must stay compatible with what the subtree below allows.
            let w = recursion_weights(&[c], q, theta, &kids);
            if !(w[c] >= DENOMINATOR_FLOOR) {
                return Err(Error::Infeasible);
            }
            let mut m = vec![0.0; q];
            m[c] = 1.0;
            Ok(m)
        }
        None => normalize(recursion_weights(sys.list(v), q, theta, &kids)),
    }
}

/// Exact marginals of every vertex; pinned vertices carry point masses.
pub(crate) fn all_marginals<S: SpinSystem>(sys: &S, forest: &Forest, fixed: &[Option<usize>]) -> Result<Vec<Vec<f64>>> {
    let q = sys.q();
    let theta = sys.theta();
    let n = forest.order.len();
    let up = upward(sys, forest, fixed)?;
    // down[v]: marginal of parent(v) in the tree with the subtree of v removed.
    let mut down: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut full: Vec<Vec<f64>> = vec![Vec::new(); n];
    for &v in &forest.order {
        let from_parent = core::mem::take(&mut down[v]);
        let mut inputs: Vec<&[f64]> = forest.children[v].iter().map(|&i| up[i].as_slice()).collect();
        if forest.parent[v].is_some() {
            inputs.push(from_parent.as_slice());
        }
        full[v] = match fixed[v] {
            Some(_) => up[v].clone(),
            None => normalize(recursion_weights(sys.list(v), q, theta, &inputs))?,
        };
        for (k, &child) in forest.children[v].iter().enumerate() {
            down[child] = match fixed[v] {
                Some(_) => up[v].clone(),
                None => {
                    let others: Vec<&[f64]> =
                        inputs.iter().enumerate().filter(|&(j, _)| j != k).map(|(_, p)| *p).collect();
                    normalize(recursion_weights(sys.list(v), q, theta, &others))?
                }
            };
        }
        down[v] = from_parent;
    }
    Ok(full)
}

/// Whether a pinning of a forest instance has a positive-weight extension.
pub(crate) fn forest_feasible<S: SpinSystem>(sys: &S, pin: &Pinning) -> bool {
    let forest = Forest::from_graph(sys.graph());
    upward(sys, &forest, &pin.to_vec(sys.graph().vertex_count())).is_ok()
}

/// Exact conditional marginals of all vertices of a tree instance.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalTable {
    q: usize,
    rows: Vec<Vec<f64>>,
    pinned: Vec<Option<usize>>,
}

impl MarginalTable {
    /// Marginal of `v`; a point mass when `v` is pinned.
    pub fn marginal(&self, v: usize) -> &[f64] {
        &self.rows[v]
    }

    pub fn is_pinned(&self, v: usize) -> bool {
        self.pinned[v].is_some()
    }

    pub fn free_vertices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.rows.len()).filter(move |&v| self.pinned[v].is_none())
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn vertex_count(&self) -> usize {
        self.rows.len()
    }
}

/// Exact marginals on a tree by upward messages followed by a downward pass.
pub fn exact_tree_marginals<S: SpinSystem>(sys: &S, tree: &RootedTree, pin: &Pinning) -> Result<MarginalTable> {
    if sys.graph().vertex_count() != tree.vertex_count() {
        return param("tree and instance differ in size");
    }
    pin.validate(sys)?;
    let fixed = pin.to_vec(tree.vertex_count());
    let rows = all_marginals(sys, &Forest::from_tree(tree), &fixed)?;
    Ok(MarginalTable { q: sys.q(), rows, pinned: fixed })
}

/// Exact marginals on any forest instance (each component rooted at its smallest vertex).
pub fn exact_forest_marginals<S: SpinSystem>(sys: &S, pin: &Pinning) -> Result<MarginalTable> {
    let g = sys.graph();
    if !g.is_forest() {
        return param("instance graph has a cycle");
    }
    pin.validate(sys)?;
    let fixed = pin.to_vec(g.vertex_count());
    let rows = all_marginals(sys, &Forest::from_graph(g), &fixed)?;
    Ok(MarginalTable { q: sys.q(), rows, pinned: fixed })
}

/// Draws an exact sample from the Gibbs distribution of a forest instance.
pub fn sample_forest<S: SpinSystem, R: Rng + ?Sized>(sys: &S, pin: &Pinning, rng: &mut R) -> Result<Vec<usize>> {
    let g = sys.graph();
    if !g.is_forest() {
        return param("instance graph has a cycle");
    }
    let forest = Forest::from_graph(g);
    let fixed = pin.to_vec(g.vertex_count());
    let up = upward(sys, &forest, &fixed)?;
    let theta = sys.theta();
    let mut out = vec![0; g.vertex_count()];
    for &v in &forest.order {
        out[v] = match fixed[v] {
            Some(c) => c,
            None => {
                let mut w = up[v].clone();
                if let Some(u) = forest.parent[v] {
                    w[out[u]] *= 1.0 - theta;
                }
                crate::rng::sample_weighted(rng, &w)
            }
        };
    }
    Ok(out)
}

/// Root marginal of a tree under a pinning that changes one vertex at a time.
///
/// Only the messages on the path from the changed vertex to the root are
/// recomputed, so boundary searches on deep trees stay cheap. A pinning with
/// no proper extension marks the affected path as blocked instead of failing,
/// so the search can move on and undo the change later.
pub struct RootMarginal<'a, S: SpinSystem> {
    sys: &'a S,
    forest: Forest,
    root: usize,
    fixed: Vec<Option<usize>>,
    up: Vec<Vec<f64>>,
    blocked: Vec<bool>,
}

impl<'a, S: SpinSystem> RootMarginal<'a, S> {
    pub fn new(sys: &'a S, tree: &RootedTree, pin: &Pinning) -> Result<Self> {
        pin.validate(sys)?;
        if tree.vertex_count() != sys.graph().vertex_count() {
            return param("tree and instance differ in size");
        }
        let forest = Forest::from_tree(tree);
        let fixed = pin.to_vec(tree.vertex_count());
        let up = upward(sys, &forest, &fixed)?;
        let blocked = vec![false; up.len()];
        Ok(RootMarginal { sys, forest, root: tree.root(), fixed, up, blocked })
    }

    /// Pins (or frees, with `None`) vertex `v` and refreshes the affected messages.
    pub fn set(&mut self, v: usize, color: Option<usize>) -> Result<()> {
        let q = self.sys.q();
        if color.is_some_and(|c| c >= q) {
            return param(format!("color out of range for q = {q}"));
        }
        self.fixed[v] = color;
        let theta = self.sys.theta();
        let mut x = Some(v);
        while let Some(u) = x {
            let dead = self.forest.children[u].iter().any(|&c| self.blocked[c]);
            self.blocked[u] = dead
                || match upward_at(self.sys, &self.forest, &self.fixed, &self.up, u, q, theta) {
                    Ok(m) => {
                        self.up[u] = m;
                        false
                    }
                    Err(_) => true,
                };
            x = self.forest.parent[u];
        }
        Ok(())
    }

    pub fn is_feasible(&self) -> bool {
        !self.blocked[self.root]
    }

    /// Marginal of `v` in its own subtree under the current pinning.
    pub fn message(&self, v: usize) -> Result<&[f64]> {
        if self.blocked[v] {
            return Err(Error::Infeasible);
        }
        Ok(&self.up[v])
    }

    pub fn marginal(&self) -> Result<&[f64]> {
        self.message(self.root)
    }
}

/// Fact: a root with `q_r >= d_r + gamma` colors has every marginal at most `1/gamma`.
pub fn bound_one_level(gamma: f64) -> f64 {
    1.0 / gamma
}

/// The amortized cap parameter `(1 + 1/(gamma-1))^(gamma d_v / (q_v - 1))`.
pub fn xi(gamma: f64, d_v: usize, q_v: usize) -> f64 {
    powf(1.0 + 1.0 / (gamma - 1.0), gamma * d_v as f64 / (q_v as f64 - 1.0))
}

/// Two-level cap on a root marginal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLevelBound {
    /// Cap on `p / (1 - p)`.
    pub odds: f64,
    /// The equivalent cap on `p` itself, `xi / (q_r - 1 + xi)`.
    pub p_cap: f64,
}

pub fn bound_two_level_odds(q_r: usize, d_r: usize, gamma: f64) -> TwoLevelBound {
    let x = xi(gamma, d_r, q_r);
    let odds = x / (q_r as f64 - 1.0);
    TwoLevelBound { odds, p_cap: x / (q_r as f64 - 1.0 + x) }
}

/// Lower bound `(1/q)(1 - 1/gamma)^{d_v}` on marginals of available colors.
pub fn bound_lower(q: usize, gamma: f64, d_v: usize) -> f64 {
    powi(1.0 - 1.0 / gamma, d_v as i32) / q as f64
}

/// Potts marginal cap for a vertex with `delta_r` neighbors of which `d_r` are free.
pub fn bound_potts_two_level(q: usize, beta: f64, delta_r: usize, d_r: usize) -> Result<f64> {
    if d_r > delta_r {
        return param("free neighbors exceed neighbors");
    }
    let theta = 1.0 - beta;
    let qm1 = q as f64 - 1.0;
    let lead = qm1 - theta * (delta_r - d_r) as f64;
    if lead < 0.0 {
        return domain("q - 1 < (1-beta)(Delta_r - d_r)");
    }
    Ok(1.0 / (1.0 + lead * powi(1.0 - theta / qm1, d_r as i32)))
}

/// The Potts weak-mixing cap with all `delta` neighbors free.
pub fn potts_cap(q: usize, beta: f64, delta: usize) -> f64 {
    bound_potts_two_level(q, beta, delta, delta).expect("no pinned neighbors")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{ColoringInstance, PottsInstance};
    use crate::rng;
    use std::vec::Vec;

    fn sd(v: &[f64]) -> SubDistribution {
        SubDistribution::distribution(v.to_vec()).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn coloring_recursion_examples() {
        let u = SubDistribution::uniform(3);
        let g = recursion_step_coloring(&[0, 1, 2], &[u.clone(), u]).unwrap();
        assert!(close(g.values(), &[1.0 / 3.0; 3], 1e-15));

        let g = recursion_step_coloring(&[0, 1, 2], &[SubDistribution::point_mass(3, 0)]).unwrap();
        assert!(close(g.values(), &[0.0, 0.5, 0.5], 1e-15));

        // Products (1/2)(1), (1/2)(1/2), (1)(1/2) normalized by 5/4.
        let g = recursion_step_coloring(&[0, 1, 2], &[sd(&[0.5, 0.5, 0.0]), sd(&[0.0, 0.5, 0.5])]).unwrap();
        assert!(close(g.values(), &[0.4, 0.2, 0.4], 1e-15));
    }

    #[test]
    fn recursion_respects_root_list() {
        let g = recursion_step_coloring(&[1, 2], &[sd(&[0.5, 0.25, 0.25])]).unwrap();
        assert!(close(g.values(), &[0.0, 0.5, 0.5], 1e-15));
        let err = recursion_step_coloring(&[0], &[SubDistribution::point_mass(2, 0)]).unwrap_err();
        assert_eq!(err, Error::Infeasible);
    }

    #[test]
    fn potts_recursion_examples() {
        let kids = [sd(&[0.2, 0.3, 0.5]), sd(&[0.6, 0.1, 0.3])];
        let g = recursion_step_potts(3, 1.0, &kids).unwrap();
        assert!(close(g.values(), &[1.0 / 3.0; 3], 1e-15));
        let g = recursion_step_potts(2, 0.5, &[sd(&[1.0, 0.0])]).unwrap();
        assert!(close(g.values(), &[1.0 / 3.0, 2.0 / 3.0], 1e-15));
    }

    #[test]
    fn potts_at_zero_beta_is_bitwise_coloring() {
        let mut r = rng::stream(5, 0);
        for _ in 0..200 {
            let q = r.gen_range(2..6);
            let d = r.gen_range(0..4);
            let kids: Vec<SubDistribution> = (0..d)
                .map(|_| {
                    let raw: Vec<f64> = (0..q).map(|_| r.gen::<f64>()).collect();
                    let s: f64 = raw.iter().sum::<f64>() * 1.1;
                    SubDistribution::distribution(raw.iter().map(|x| x / s).collect()).unwrap()
                })
                .collect();
            let list: Vec<usize> = (0..q).collect();
            let a = recursion_step_potts(q, 0.0, &kids).unwrap();
            let b = recursion_step_coloring(&list, &kids).unwrap();
            assert!(a.values().iter().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    /// Brute-force marginals for the unit tests of this module.
    fn brute_marginals<S: SpinSystem>(sys: &S, pin: &Pinning) -> Vec<Vec<f64>> {
        let g = sys.graph();
        let n = g.vertex_count();
        let q = sys.q();
        let mut acc = vec![vec![0.0; q]; n];
        let mut z = 0.0;
        let total = q.pow(n as u32);
        for mut code in 0..total {
            let mut col = vec![0; n];
            for c in col.iter_mut() {
                *c = code % q;
                code /= q;
            }
            if (0..n).any(|v| !sys.list(v).contains(&col[v]) || pin.get(v).map_or(false, |c| c != col[v])) {
                continue;
            }
            let w: f64 = g.edges().iter().map(|&(u, v)| sys.edge_weight(col[u], col[v])).product();
            z += w;
            for v in 0..n {
                acc[v][col[v]] += w;
            }
        }
        acc.iter().map(|row| row.iter().map(|x| x / z).collect()).collect()
    }

    fn random_tree(r: &mut crate::rng::Rng, n: usize) -> Graph {
        let mut g = Graph::empty(n);
        for v in 1..n {
            g.add_edge(r.gen_range(0..v), v).unwrap();
        }
        g
    }

    #[test]
    fn up_down_marginals_match_brute_force() {
        let mut r = rng::stream(9, 0);
        for trial in 0..150 {
            let n = r.gen_range(1..=7);
            let q = r.gen_range(2..=4);
            let g = random_tree(&mut r, n);
            let root = r.gen_range(0..n);
            let tree = RootedTree::new(g.clone(), root).unwrap();
            let mut pin = Pinning::new();
            for v in 0..n {
                if r.gen_bool(0.25) {
                    pin.insert(v, r.gen_range(0..q));
                }
            }
            let potts = PottsInstance::new(g.clone(), q, [0.0, 0.3, 1.0][trial % 3]).unwrap();
            let inst = ColoringInstance::uniform(g, q).unwrap();
            match exact_tree_marginals(&inst, &tree, &pin) {
                Ok(t) => {
                    let b = brute_marginals(&inst, &pin);
                    for v in 0..n {
                        assert!(close(t.marginal(v), &b[v], 1e-12), "trial {trial} vertex {v}");
                    }
                }
                Err(Error::Infeasible) => assert!(!forest_feasible(&inst, &pin)),
                Err(e) => panic!("{e}"),
            }
            if let Ok(t) = exact_tree_marginals(&potts, &tree, &pin) {
                let b = brute_marginals(&potts, &pin);
                for v in 0..n {
                    assert!(close(t.marginal(v), &b[v], 1e-12), "potts trial {trial} vertex {v}");
                }
            }
        }
    }

    #[test]
    fn edge_and_path_examples() {
        let inst = ColoringInstance::uniform(Graph::path(3), 3).unwrap();
        let t = RootedTree::new(Graph::path(3), 0).unwrap();
        let m = exact_tree_marginals(&inst, &t, &Pinning::new()).unwrap();
        assert!(close(m.marginal(1), &[1.0 / 3.0; 3], 1e-15));
        let inst = ColoringInstance::uniform(Graph::path(2), 3).unwrap();
        let t = RootedTree::new(Graph::path(2), 0).unwrap();
        let m = exact_tree_marginals(&inst, &t, &Pinning::from_pairs(&[(0, 0)])).unwrap();
        assert!(close(m.marginal(1), &[0.0, 0.5, 0.5], 1e-15));
    }

    #[test]
    fn sampler_follows_marginals() {
        let inst = ColoringInstance::uniform(Graph::path(3), 3).unwrap();
        let pin = Pinning::from_pairs(&[(0, 0)]);
        let mut r = rng::stream(3, 0);
        let mut counts = [[0usize; 3]; 3];
        let trials = 30_000;
        for _ in 0..trials {
            let s = sample_forest(&inst, &pin, &mut r).unwrap();
            assert_ne!(s[0], s[1]);
            assert_ne!(s[1], s[2]);
            for v in 0..3 {
                counts[v][s[v]] += 1;
            }
        }
        // vertex 2 given vertex 0 = 0: P(2 = 0) = 1/2, others 1/4
        let p = counts[2][0] as f64 / trials as f64;
        assert!((p - 0.5).abs() < 0.015);
    }

    #[test]
    fn incremental_root_marginal_matches_full_recomputation() {
        let g = Graph::dary_tree(2, 4).unwrap();
        let tree = RootedTree::new(g.clone(), 0).unwrap();
        let inst = ColoringInstance::uniform(g, 4).unwrap();
        let mut pin = Pinning::new();
        let mut rm = RootMarginal::new(&inst, &tree, &pin).unwrap();
        let mut r = rng::stream(4, 0);
        for _ in 0..40 {
            let v = r.gen_range(15..31);
            let c = r.gen_range(0..4);
            pin.insert(v, c);
            rm.set(v, Some(c)).unwrap();
            let full = exact_tree_marginals(&inst, &tree, &pin).unwrap();
            assert!(close(rm.marginal().unwrap(), full.marginal(0), 1e-13));
        }
    }

    #[test]
    fn blocked_pinning_recovers_after_undo() {
        // Star with center 0 and three leaves, two colors on the leaves kill the center's list.
        let g = Graph::new(4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        let tree = RootedTree::new(g.clone(), 0).unwrap();
        let inst = ColoringInstance::new(g, 3, vec![vec![0, 1], vec![0, 1, 2], vec![0, 1, 2], vec![0, 1, 2]]).unwrap();
        let mut rm = RootMarginal::new(&inst, &tree, &Pinning::new()).unwrap();
        let before = rm.marginal().unwrap().to_vec();
        rm.set(1, Some(0)).unwrap();
        rm.set(2, Some(1)).unwrap();
        assert!(!rm.is_feasible());
        assert!(rm.marginal().is_err());
        rm.set(2, None).unwrap();
        rm.set(1, None).unwrap();
        assert!(close(rm.marginal().unwrap(), &before, 1e-15));
        assert!(rm.set(3, Some(7)).is_err());
    }

    #[test]
    fn bound_examples() {
        assert_eq!(bound_one_level(3.0), 1.0 / 3.0);
        assert_eq!(bound_one_level(1.0), 1.0);
        let b = bound_two_level_odds(6, 3, 3.0);
        assert!((b.odds - 0.4149486).abs() < 1e-7, "{}", b.odds);
        assert!((b.p_cap - 0.2932606).abs() < 1e-7, "{}", b.p_cap);
        assert!((bound_two_level_odds(7, 0, 4.0).odds - 1.0 / 6.0).abs() < 1e-15);
        assert!((bound_lower(6, 3.0, 3) - 8.0 / 162.0).abs() < 1e-15);
        assert_eq!(bound_lower(5, 3.0, 0), 0.2);
        assert!((potts_cap(7, 0.25, 3) - 0.19922).abs() < 5e-6);
        assert!((bound_potts_two_level(5, 1.0, 3, 1).unwrap() - 0.2).abs() < 1e-15);
        assert!((xi(4.0, 3, 7) - 16.0 / 9.0).abs() < 1e-14);
        assert_eq!(xi(4.0, 0, 7), 1.0);
    }

    #[test]
    fn xi_stays_in_unit_to_four() {
        for gamma in [2.0, 2.5, 3.0, 4.0, 7.0] {
            for d in 0..40 {
                for q in 2..60 {
                    if (q as f64) < d as f64 + gamma {
                        continue;
                    }
                    let x = xi(gamma, d, q);
                    assert!((1.0..=4.0).contains(&x), "gamma {gamma} d {d} q {q}: {x}");
                }
            }
        }
    }

    #[test]
    fn two_level_cap_is_closed_under_the_recursion() {
        let mut r = rng::stream(21, 0);
        let gamma = 4.0;
        for _ in 0..3000 {
            let d_r = r.gen_range(0..6);
            let q_r = d_r + 4 + r.gen_range(0..3);
            let mut kids = Vec::new();
            for _ in 0..d_r {
                let d_i = r.gen_range(0..6);
                let q_i = d_i + 4 + r.gen_range(0..3);
                let cap = bound_two_level_odds(q_i, d_i, gamma).p_cap;
                let v: Vec<f64> = capped_random(&mut r, q_r, cap);
                kids.push(SubDistribution::new(v, cap).unwrap());
            }
            let list: Vec<usize> = (0..q_r).collect();
            let g = recursion_step_coloring(&list, &kids).unwrap();
            let cap = bound_two_level_odds(q_r, d_r, gamma).p_cap;
            assert!(g.values().iter().all(|&x| x <= cap + 1e-12));
        }
    }

    fn capped_random(r: &mut crate::rng::Rng, q: usize, cap: f64) -> Vec<f64> {
        let total = r.gen::<f64>();
        let mut v: Vec<f64> = (0..q).map(|_| r.gen::<f64>()).collect();
        let s: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x = (*x / s * total).min(cap));
        v
    }
}
