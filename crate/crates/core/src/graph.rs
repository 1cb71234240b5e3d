//! Graphs, rooted trees, spin-system instances and pinnings.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::error::{param, Error, Result};
use crate::rng;

/// Simple undirected graph with sorted adjacency lists.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    adj: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Graph { n, adj: vec![Vec::new(); n], edges: Vec::new() }
    }

    /// Builds a graph, rejecting self-loops, duplicates and out-of-range endpoints.
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Graph::empty(n);
        for &(u, v) in edges {
            g.add_edge(u, v)?;
        }
        Ok(g)
    }

    pub fn add_edge(&mut self, u: usize, v: usize) -> Result<()> {
        if u >= self.n || v >= self.n {
            return param(format!("edge ({u},{v}) out of range for {} vertices", self.n));
        }
        if u == v {
            return param(format!("self-loop at {u}"));
        }
        if self.has_edge(u, v) {
            return param(format!("duplicate edge ({u},{v})"));
        }
        let (a, b) = if u < v { (u, v) } else { (v, u) };
        let pos = self.adj[u].binary_search(&v).unwrap_err();
        self.adj[u].insert(pos, v);
        let pos = self.adj[v].binary_search(&u).unwrap_err();
        self.adj[v].insert(pos, u);
        let pos = self.edges.binary_search(&(a, b)).unwrap_err();
        self.edges.insert(pos, (a, b));
        Ok(())
    }

    pub fn path(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Graph::new(n, &edges).expect("path edges are valid")
    }

    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return param("a cycle needs at least 3 vertices");
        }
        let mut edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        edges.push((0, n - 1));
        Graph::new(n, &edges)
    }

    pub fn complete(n: usize) -> Self {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                edges.push((u, v));
            }
        }
        Graph::new(n, &edges).expect("complete graph edges are valid")
    }

    /// Complete tree where every internal vertex has `d` children and leaves
    /// sit at depth `h`. Vertex 0 is the root; vertices are numbered level by level.
    pub fn dary_tree(d: usize, h: usize) -> Result<Self> {
        if d == 0 {
            return Ok(Graph::empty(1));
        }
        let mut count: u64 = 1;
        let mut level: u64 = 1;
        for _ in 0..h {
            level = level.saturating_mul(d as u64);
            count = count.saturating_add(level);
        }
        if count > 1 << 22 {
            return Err(Error::CapExceeded { what: "tree size", needed: count, cap: 1 << 22 });
        }
        let n = count as usize;
        let edges: Vec<_> = (1..n).map(|v| ((v - 1) / d, v)).collect();
        Graph::new(n, &edges)
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges as sorted pairs (u < v) in lexicographic order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.n && self.adj[u].binary_search(&v).is_ok()
    }

    /// BFS distances from `u`; `None` for unreachable vertices.
    pub fn distances(&self, u: usize) -> Vec<Option<usize>> {
        self.distances_within(u, usize::MAX)
    }

    fn distances_within(&self, u: usize, limit: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n];
        dist[u] = Some(0);
        let mut queue = VecDeque::from([u]);
        while let Some(x) = queue.pop_front() {
            let dx = dist[x].unwrap();
            if dx >= limit {
                continue;
            }
            for &y in &self.adj[x] {
                if dist[y].is_none() {
                    dist[y] = Some(dx + 1);
                    queue.push_back(y);
                }
            }
        }
        dist
    }

    /// Vertices at distance exactly `r` from `u`, sorted.
    pub fn sphere(&self, u: usize, r: usize) -> Vec<usize> {
        let dist = self.distances_within(u, r);
        (0..self.n).filter(|&v| dist[v] == Some(r)).collect()
    }

    /// Vertices at distance at most `r` from `u`, sorted.
    pub fn ball(&self, u: usize, r: usize) -> Vec<usize> {
        let dist = self.distances_within(u, r);
        (0..self.n).filter(|&v| matches!(dist[v], Some(d) if d <= r)).collect()
    }

    pub fn is_connected(&self) -> bool {
        self.n == 0 || self.distances(0).iter().all(Option::is_some)
    }

    pub fn is_forest(&self) -> bool {
        girth(self).is_none()
    }

    pub fn is_tree(&self) -> bool {
        self.n > 0 && self.edges.len() + 1 == self.n && self.is_connected()
    }

    /// Induced subgraph on `vertices` (sorted); returns the graph and the map
    /// from new indices to old ones.
    pub fn induced(&self, vertices: &[usize]) -> (Graph, Vec<usize>) {
        let mut index = vec![usize::MAX; self.n];
        for (i, &v) in vertices.iter().enumerate() {
            index[v] = i;
        }
        let mut g = Graph::empty(vertices.len());
        for &(u, v) in &self.edges {
            if index[u] != usize::MAX && index[v] != usize::MAX {
                g.add_edge(index[u], index[v]).expect("induced edges are valid");
            }
        }
        (g, vertices.to_vec())
    }
}

/// Length of the shortest cycle, or `None` for forests.
pub fn girth(g: &Graph) -> Option<usize> {
    let n = g.vertex_count();
    let mut best: Option<usize> = None;
    let mut dist = vec![usize::MAX; n];
    let mut parent = vec![usize::MAX; n];
    for s in 0..n {
        dist.iter_mut().for_each(|d| *d = usize::MAX);
        dist[s] = 0;
        parent[s] = usize::MAX;
        let mut queue = VecDeque::from([s]);
        while let Some(x) = queue.pop_front() {
            if let Some(b) = best {
                if 2 * dist[x] + 1 >= b {
                    break;
                }
            }
            for &y in g.neighbors(x) {
                if dist[y] == usize::MAX {
                    dist[y] = dist[x] + 1;
                    parent[y] = x;
                    queue.push_back(y);
                } else if parent[x] != y {
                    let len = dist[x] + dist[y] + 1;
                    if best.map_or(true, |b| len < b) {
                        best = Some(len);
                    }
                }
            }
        }
    }
    best
}

/// Random graph with maximum degree at most `max_degree` and girth at least
/// `min_girth`, grown by inserting random edges that close no short cycle.
///
/// Each attempt scans all vertex pairs in a random order once, which yields a
/// maximal graph for the constraints. The first connected attempt is returned.
pub fn generate_girth_graph(n: usize, max_degree: usize, min_girth: usize, seed: u64) -> Result<Graph> {
    const ATTEMPTS: u64 = 64;
    if n == 0 {
        return param("need at least one vertex");
    }
    if min_girth < 3 {
        return param("min_girth must be at least 3");
    }
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    for u in 0..n {
        for v in u + 1..n {
            pairs.push((u, v));
        }
    }
    for attempt in 0..ATTEMPTS {
        let mut rng = rng::stream(seed, attempt);
        pairs.shuffle(&mut rng);
        let mut g = Graph::empty(n);
        for &(u, v) in &pairs {
            if g.degree(u) >= max_degree || g.degree(v) >= max_degree {
                continue;
            }
            // The new edge closes a cycle of length dist(u,v)+1.
            let dist = g.distances_within(u, min_girth - 2);
            if matches!(dist[v], Some(d) if d + 1 < min_girth) {
                continue;
            }
            g.add_edge(u, v)?;
        }
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(Error::SearchExhausted(format!(
        "no connected graph with n={n}, max degree {max_degree}, girth >= {min_girth} after {ATTEMPTS} attempts"
    )))
}

/// Random tree on `n` vertices by attaching each new vertex to a uniform
/// earlier vertex that still has room; vertex 0 keeps at most `root_degree`
/// neighbors and every other vertex at most `max_degree`.
pub fn random_tree<R: rand::Rng + ?Sized>(n: usize, max_degree: usize, root_degree: usize, rng: &mut R) -> Result<Graph> {
    if n == 0 {
        return param("need at least one vertex");
    }
    let mut g = Graph::empty(n);
    let room = |g: &Graph, v: usize| g.degree(v) < if v == 0 { root_degree } else { max_degree };
    for v in 1..n {
        let open: Vec<usize> = (0..v).filter(|&u| room(&g, u)).collect();
        if open.is_empty() {
            return param("degree limits admit no spanning tree");
        }
        g.add_edge(open[rng.gen_range(0..open.len())], v)?;
    }
    Ok(g)
}

/// Tree with a distinguished root and parent/children arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct RootedTree {
    graph: Graph,
    root: usize,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    depth: Vec<usize>,
    order: Vec<usize>,
}

impl RootedTree {
    pub fn new(graph: Graph, root: usize) -> Result<Self> {
        if !graph.is_tree() {
            return param("graph is not a tree");
        }
        if root >= graph.vertex_count() {
            return param("root out of range");
        }
        let n = graph.vertex_count();
        let mut parent = vec![None; n];
        let mut children = vec![Vec::new(); n];
        let mut depth = vec![0; n];
        let mut order = Vec::with_capacity(n);
        let mut seen = vec![false; n];
        seen[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(x) = queue.pop_front() {
            order.push(x);
            for &y in graph.neighbors(x) {
                if !seen[y] {
                    seen[y] = true;
                    parent[y] = Some(x);
                    depth[y] = depth[x] + 1;
                    children[x].push(y);
                    queue.push_back(y);
                }
            }
        }
        Ok(RootedTree { graph, root, parent, children, depth, order })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parent[v]
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    pub fn depth(&self, v: usize) -> usize {
        self.depth[v]
    }

    /// Vertices in BFS order from the root (parents before children).
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn height(&self) -> usize {
        self.depth.iter().copied().max().unwrap_or(0)
    }

    pub fn vertex_count(&self) -> usize {
        self.graph.vertex_count()
    }

    /// Vertices of the subtree rooted at `v`.
    pub fn subtree(&self, v: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![v];
        while let Some(x) = stack.pop() {
            out.push(x);
            stack.extend(self.children[x].iter().rev());
        }
        out
    }
}

/// A spin system on a graph: per-vertex allowed colors and an edge
/// interaction that multiplies the weight by `1 - theta` for every
/// monochromatic edge.
pub trait SpinSystem {
    fn graph(&self) -> &Graph;
    fn q(&self) -> usize;
    /// Sorted allowed colors of `v`.
    fn list(&self, v: usize) -> &[usize];
    /// `1 - beta`; equal to 1 for hard-constraint colorings.
    fn theta(&self) -> f64;

    fn is_hard(&self) -> bool {
        self.theta() == 1.0
    }

    /// Weight of an edge whose endpoints carry colors `a` and `b`.
    fn edge_weight(&self, a: usize, b: usize) -> f64 {
        if a == b {
            1.0 - self.theta()
        } else {
            1.0
        }
    }
}

/// Uniform proper list colorings.
#[derive(Debug, Clone, PartialEq)]
pub struct ColoringInstance {
    graph: Graph,
    q: usize,
    lists: Vec<Vec<usize>>,
}

impl ColoringInstance {
    pub fn new(graph: Graph, q: usize, lists: Vec<Vec<usize>>) -> Result<Self> {
        if lists.len() != graph.vertex_count() {
            return param("one color list per vertex is required");
        }
        let mut lists = lists;
        for (v, list) in lists.iter_mut().enumerate() {
            list.sort_unstable();
            list.dedup();
            if list.is_empty() {
                return param(format!("empty list at vertex {v}"));
            }
            if list.iter().any(|&c| c >= q) {
                return param(format!("list of vertex {v} uses a color >= q={q}"));
            }
        }
        Ok(ColoringInstance { graph, q, lists })
    }

    /// Every vertex may use all of `[q]`.
    pub fn uniform(graph: Graph, q: usize) -> Result<Self> {
        let n = graph.vertex_count();
        ColoringInstance::new(graph, q, vec![(0..q).collect(); n])
    }
}

impl SpinSystem for ColoringInstance {
    fn graph(&self) -> &Graph {
        &self.graph
    }
    fn q(&self) -> usize {
        self.q
    }
    fn list(&self, v: usize) -> &[usize] {
        &self.lists[v]
    }
    fn theta(&self) -> f64 {
        1.0
    }
}

/// Antiferromagnetic Potts model: weight `beta^(monochromatic edges)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PottsInstance {
    graph: Graph,
    q: usize,
    beta: f64,
    colors: Vec<usize>,
}

impl PottsInstance {
    pub fn new(graph: Graph, q: usize, beta: f64) -> Result<Self> {
        if q < 2 {
            return param("Potts model needs q >= 2");
        }
        if !(0.0..=1.0).contains(&beta) {
            return param("beta must lie in [0,1]");
        }
        Ok(PottsInstance { graph, q, beta, colors: (0..q).collect() })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

impl SpinSystem for PottsInstance {
    fn graph(&self) -> &Graph {
        &self.graph
    }
    fn q(&self) -> usize {
        self.q
    }
    fn list(&self, _v: usize) -> &[usize] {
        &self.colors
    }
    fn theta(&self) -> f64 {
        1.0 - self.beta
    }
}

/// Partial assignment of colors to vertices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Pinning {
    assignments: BTreeMap<usize, usize>,
    feasible: Option<bool>,
}

impl Pinning {
    pub fn new() -> Self {
        Pinning::default()
    }

    pub fn from_pairs(pairs: &[(usize, usize)]) -> Self {
        let mut p = Pinning::new();
        for &(v, c) in pairs {
            p.assignments.insert(v, c);
        }
        p
    }

    /// Adds or replaces an assignment; clears any feasibility verdict.
    pub fn insert(&mut self, v: usize, c: usize) {
        self.assignments.insert(v, c);
        self.feasible = None;
    }

    pub fn remove(&mut self, v: usize) {
        self.assignments.remove(&v);
        self.feasible = None;
    }

    pub fn with(&self, v: usize, c: usize) -> Pinning {
        let mut p = self.clone();
        p.insert(v, c);
        p
    }

    pub fn get(&self, v: usize) -> Option<usize> {
        self.assignments.get(&v).copied()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.assignments.contains_key(&v)
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.assignments.iter().map(|(&v, &c)| (v, c))
    }

    /// Dense per-vertex view.
    pub fn to_vec(&self, n: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; n];
        for (v, c) in self.iter() {
            if v < n {
                out[v] = Some(c);
            }
        }
        out
    }

    /// Result of the last extendability check, if any.
    pub fn feasibility(&self) -> Option<bool> {
        self.feasible
    }

    /// Runs the extendability check and records its verdict.
    pub fn verify<S: SpinSystem>(mut self, sys: &S, state_cap: u64) -> Result<Pinning> {
        let ok = check_pinning_feasible(sys, &self, state_cap)?;
        self.feasible = Some(ok);
        Ok(self)
    }

    /// Checks that every pinned vertex exists and its color is in its list.
    pub fn validate<S: SpinSystem>(&self, sys: &S) -> Result<()> {
        let n = sys.graph().vertex_count();
        for (v, c) in self.iter() {
            if v >= n {
                return param(format!("pinned vertex {v} out of range"));
            }
            if sys.list(v).binary_search(&c).is_err() {
                return param(format!("pinned color {c} not in the list of vertex {v}"));
            }
        }
        Ok(())
    }
}

/// Default limit on enumerated states for exact computations.
pub const DEFAULT_STATE_CAP: u64 = 1_000_000;

/// Whether some full configuration of positive weight extends `pin`.
///
/// Forests are decided exactly by the tree recursion; other graphs by
/// backtracking, refused when the product of free list sizes exceeds `state_cap`.
pub fn check_pinning_feasible<S: SpinSystem>(sys: &S, pin: &Pinning, state_cap: u64) -> Result<bool> {
    pin.validate(sys)?;
    if !sys.is_hard() {
        return Ok(true);
    }
    let g = sys.graph();
    if g.is_forest() {
        return Ok(crate::tree::forest_feasible(sys, pin));
    }
    let n = g.vertex_count();
    let fixed = pin.to_vec(n);
    let mut product: u64 = 1;
    for v in 0..n {
        if fixed[v].is_none() {
            product = product.saturating_mul(sys.list(v).len() as u64);
        }
    }
    if product > state_cap {
        return Err(Error::CapExceeded { what: "feasibility search", needed: product, cap: state_cap });
    }
    let mut colors = fixed.clone();
    for &(u, v) in g.edges() {
        if let (Some(a), Some(b)) = (fixed[u], fixed[v]) {
            if a == b {
                return Ok(false);
            }
        }
    }
    let free: Vec<usize> = (0..n).filter(|&v| fixed[v].is_none()).collect();
    Ok(extend(sys, &free, 0, &mut colors))
}

fn extend<S: SpinSystem>(sys: &S, free: &[usize], k: usize, colors: &mut Vec<Option<usize>>) -> bool {
    if k == free.len() {
        return true;
    }
    let v = free[k];
    for &c in sys.list(v) {
        if sys.graph().neighbors(v).iter().all(|&u| colors[u] != Some(c)) {
            colors[v] = Some(c);
            if extend(sys, free, k + 1, colors) {
                colors[v] = None;
                return true;
            }
        }
    }
    colors[v] = None;
    false
}
