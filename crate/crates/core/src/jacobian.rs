//! Potentials, Jacobian blocks of the tree recursion, the ★★ and weighted
//! operator norms, and the vertex weight schemes.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{domain, param, Result};
use crate::linalg::{norm2, sym_eigen, sym_lambda_max, Mat};
use crate::math::{atanh, exp, ln, ln1p, sqrt, tanh};
use crate::rng;
use crate::tree::{normalize, potts_cap, recursion_weights, xi, SubDistribution, DENOMINATOR_FLOOR};

/// Relative slack added to computed eigenvalues before they are used as upper bounds.
const EIGEN_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PotentialKind {
    Coloring,
    Potts { beta: f64 },
}

/// The potential `phi` with derivative `1 / (sqrt(x) (1 - theta x))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Potential {
    kind: PotentialKind,
    theta: f64,
}

impl Potential {
    pub fn coloring() -> Self {
        Potential { kind: PotentialKind::Coloring, theta: 1.0 }
    }

    pub fn potts(beta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&beta) {
            return param("beta must lie in [0,1]");
        }
        Ok(Potential { kind: PotentialKind::Potts { beta }, theta: 1.0 - beta })
    }

    pub fn kind(&self) -> PotentialKind {
        self.kind
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    fn check(&self, x: f64) -> Result<()> {
        if !(x >= 0.0 && x <= 1.0 && self.theta * x < 1.0) {
            return domain(format!("potential undefined at {x}"));
        }
        Ok(())
    }

    pub fn phi(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        if self.theta == 0.0 {
            return Ok(2.0 * sqrt(x));
        }
        let r = sqrt(self.theta);
        Ok(2.0 / r * atanh(sqrt(self.theta * x)))
    }

    pub fn phi_inv(&self, y: f64) -> Result<f64> {
        if !(y >= 0.0) || !y.is_finite() {
            return domain(format!("inverse potential undefined at {y}"));
        }
        let x = if self.theta == 0.0 {
            y * y / 4.0
        } else {
            let t = tanh(y * sqrt(self.theta) / 2.0);
            t * t / self.theta
        };
        if x > 1.0 + 1e-12 {
            return domain(format!("{y} lies outside the range of the potential"));
        }
        Ok(x.min(1.0))
    }

    /// The derivative `phi'(x)`, finite for `0 < x` and `theta x < 1`.
    pub fn derivative(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        if x == 0.0 {
            return domain("potential derivative diverges at 0");
        }
        Ok(1.0 / (sqrt(x) * (1.0 - self.theta * x)))
    }

    /// Right end of the interval `[0, a]` on which `phi` is concave.
    pub fn concave_limit(&self) -> f64 {
        if self.theta == 0.0 {
            1.0
        } else {
            (1.0 / (3.0 * self.theta)).min(1.0)
        }
    }
}

/// Per-child Jacobian blocks of the recursion at a root.
///
/// Rows index the output color, columns the input color of the child.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianBlocks {
    blocks: Vec<Mat>,
    child_index: Vec<usize>,
    root_marginal: Vec<f64>,
    /// Free children.
    pub d_r: usize,
    /// All children.
    pub delta_r: usize,
    /// Root list size.
    pub q_r: usize,
}

impl JacobianBlocks {
    pub fn blocks(&self) -> &[Mat] {
        &self.blocks
    }

    /// Position among the input children of each block.
    pub fn child_index(&self) -> &[usize] {
        &self.child_index
    }

    pub fn root_marginal(&self) -> &[f64] {
        &self.root_marginal
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }
}

struct Prepared {
    q: usize,
    g: Vec<f64>,
    padded: Vec<Vec<f64>>,
    free: Vec<usize>,
}

fn prepare(theta: f64, children: &[SubDistribution], root_list: &[usize]) -> Result<Prepared> {
    let q = root_list.iter().map(|&c| c + 1).chain(children.iter().map(SubDistribution::len)).max().unwrap_or(0);
    let padded: Vec<Vec<f64>> = children
        .iter()
        .map(|p| {
            let mut v = p.values().to_vec();
            v.resize(q, 0.0);
            v
        })
        .collect();
    let refs: Vec<&[f64]> = padded.iter().map(Vec::as_slice).collect();
    let g = normalize(recursion_weights(root_list, q, theta, &refs))?;
    let free: Vec<usize> = (0..children.len()).filter(|&i| children[i].as_point_mass().is_none()).collect();
    for &i in &free {
        for &c in root_list {
            if 1.0 - theta * padded[i][c] < DENOMINATOR_FLOOR {
                return domain(format!("child {i} makes the recursion singular at color {c}"));
            }
        }
    }
    Ok(Prepared { q, g, padded, free })
}

fn finish(prep: Prepared, blocks: Vec<Mat>, children: usize, root_list: &[usize]) -> JacobianBlocks {
    JacobianBlocks {
        blocks,
        d_r: prep.free.len(),
        child_index: prep.free,
        root_marginal: prep.g,
        delta_r: children,
        q_r: root_list.len(),
    }
}

/// Jacobian of the coloring recursion with respect to each free child.
pub fn jacobian_plain(children: &[SubDistribution], root_list: &[usize]) -> Result<JacobianBlocks> {
    jacobian_plain_theta(1.0, children, root_list)
}

/// Jacobian `theta (g g^T - diag g) diag(1 - theta p_i)^{-1}` for general `theta`.
pub fn jacobian_plain_theta(theta: f64, children: &[SubDistribution], root_list: &[usize]) -> Result<JacobianBlocks> {
    let prep = prepare(theta, children, root_list)?;
    let (q, g) = (prep.q, &prep.g);
    let blocks = prep
        .free
        .iter()
        .map(|&i| {
            let p = &prep.padded[i];
            let mut m = Mat::zeros(q, q);
            for c in 0..q {
                for b in 0..q {
                    if g[b] == 0.0 {
                        continue;
                    }
                    let delta = if b == c { g[b] } else { 0.0 };
                    m[(c, b)] = theta * (g[c] * g[b] - delta) / (1.0 - theta * p[b]);
                }
            }
            m
        })
        .collect();
    Ok(finish(prep, blocks, children.len(), root_list))
}

/// Jacobian of the recursion conjugated by the potential, in the factored form
/// `-theta diag(1 - theta g)^{-1} (I - sqrt(g) sqrt(g)^T) diag(sqrt(g p_i))`.
pub fn jacobian_phi(pot: &Potential, children: &[SubDistribution], root_list: &[usize]) -> Result<JacobianBlocks> {
    let theta = pot.theta();
    let prep = prepare(theta, children, root_list)?;
    let (q, g) = (prep.q, &prep.g);
    let sg: Vec<f64> = g.iter().map(|&x| sqrt(x)).collect();
    let blocks = prep
        .free
        .iter()
        .map(|&i| {
            let p = &prep.padded[i];
            let mut m = Mat::zeros(q, q);
            if theta == 0.0 {
                return m;
            }
            for c in 0..q {
                let scale = -theta / (1.0 - theta * g[c]);
                for b in 0..q {
                    let proj = if b == c { 1.0 } else { 0.0 } - sg[c] * sg[b];
                    m[(c, b)] = scale * proj * sqrt(g[b] * p[b]);
                }
            }
            m
        })
        .collect();
    Ok(finish(prep, blocks, children.len(), root_list))
}

/// Jacobian in log coordinates of the recursion that first renormalizes each
/// child law: `L_i - (L_i 1) p_i^T` with `L_i = diag(1/g) J_i diag(p_i)`.
///
/// Its rows sum to zero, and on a tree it equals the influence block from the
/// root to child `i` when `p_i` is that child's subtree marginal.
pub fn jacobian_log_normalized(theta: f64, children: &[SubDistribution], root_list: &[usize]) -> Result<JacobianBlocks> {
    let mut jac = jacobian_plain_theta(theta, children, root_list)?;
    let g = jac.root_marginal.clone();
    let q = g.len();
    for (k, block) in jac.blocks.iter_mut().enumerate() {
        let p = children[jac.child_index[k]].values();
        let at = |b: usize| p.get(b).copied().unwrap_or(0.0);
        for c in 0..q {
            if g[c] == 0.0 {
                for b in 0..q {
                    block[(c, b)] = 0.0;
                }
                continue;
            }
            let row: Vec<f64> = (0..q).map(|b| block[(c, b)] * at(b) / g[c]).collect();
            let drift: f64 = row.iter().sum();
            for b in 0..q {
                block[(c, b)] = row[b] - drift * at(b);
            }
        }
    }
    Ok(jac)
}

/// Certified interval for an operator norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormBounds {
    pub lower: f64,
    pub upper: f64,
}

/// Squared spectral norm of the concatenation `[B_1 ... B_d]`.
pub fn l2_norm_sq(blocks: &[Mat]) -> f64 {
    match blocks.first() {
        None => 0.0,
        Some(b0) => {
            let mut s = Mat::zeros(b0.rows(), b0.rows());
            for b in blocks {
                s.add_assign(&b.gram_rows());
            }
            sym_lambda_max(&s).max(0.0)
        }
    }
}

/// Cauchy-Schwarz bound `sqrt(lambda_max(sum B_i B_i^T / t_i) * sum t_i)` and the
/// top eigenvector of the weighted Gram sum.
fn weighted_cs_bound(grams: &[Mat], t: &[f64]) -> (f64, Vec<f64>) {
    let n = grams[0].rows();
    let mut s = Mat::zeros(n, n);
    for (g, &ti) in grams.iter().zip(t) {
        s.add_assign(&g.scaled(1.0 / ti));
    }
    let (vals, vecs) = sym_eigen(&s);
    let lambda = vals[n - 1].max(0.0);
    let top: Vec<f64> = (0..n).map(|k| vecs[(k, n - 1)]).collect();
    let total: f64 = t.iter().sum();
    (sqrt(lambda * (1.0 + EIGEN_SLACK) * total * (1.0 + EIGEN_SLACK)), top)
}

/// Upper bound on the ★★ norm `sup { |sum_i B_i x_i| : |x_i| <= 1 }`.
///
/// Every positive split `t` gives the sound bound
/// `sqrt(lambda_max(sum B_i B_i^T / t_i) * sum t_i)`; `t = 1` is the plain
/// `sqrt(d lambda_max)` bound. The minimum is taken over a few fixed splits
/// and a damped refinement toward the stationary split `t_i = |B_i^T v|`.
pub fn norm_star_star_upper(blocks: &[Mat]) -> f64 {
    star_star_upper_with(blocks, &[], 0.0)
}

/// Like [`norm_star_star_upper`] but stops refining once the bound drops to `target`.
pub fn norm_star_star_upper_below(blocks: &[Mat], target: f64) -> f64 {
    star_star_upper_with(blocks, &[], target)
}

fn star_star_upper_with(blocks: &[Mat], extra: &[Vec<f64>], target: f64) -> f64 {
    let live: Vec<usize> = (0..blocks.len()).filter(|&i| blocks[i].data().iter().any(|&x| x != 0.0)).collect();
    if live.is_empty() {
        return 0.0;
    }
    let owned: Vec<&Mat> = live.iter().map(|&i| &blocks[i]).collect();
    let grams: Vec<Mat> = owned.iter().map(|b| b.gram_rows()).collect();
    let spectral: Vec<f64> = grams.iter().map(|g| sqrt(sym_lambda_max(g).max(0.0))).collect();
    let mut candidates: Vec<Vec<f64>> = vec![vec![1.0; owned.len()], spectral.clone(), spectral.iter().map(|x| x * x).collect()];
    for t in extra {
        candidates.push(live.iter().map(|&i| t[i]).collect());
    }
    let mut best = f64::INFINITY;
    let mut start = (candidates[0].clone(), Vec::new());
    for t in candidates {
        if t.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
            continue;
        }
        let (bound, v) = weighted_cs_bound(&grams, &t);
        if bound < best {
            best = bound;
            start = (t, v);
        }
    }
    let (mut t, mut v) = start;
    let mut stalled = 0;
    for _ in 0..80 {
        if best <= target {
            break;
        }
        let target: Vec<f64> = owned.iter().map(|b| norm2(&b.tmul_vec(&v))).collect();
        let top = target.iter().cloned().fold(0.0, f64::max);
        if !(top > 0.0) {
            break;
        }
        let total: f64 = t.iter().sum();
        let tsum: f64 = target.iter().sum();
        t = t.iter().zip(&target).map(|(&a, &b)| sqrt(a / total * (b / tsum).max(1e-12))).collect();
        let (bound, nv) = weighted_cs_bound(&grams, &t);
        v = nv;
        if bound < best * (1.0 - 1e-12) {
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= 5 {
                best = best.min(bound);
                break;
            }
        }
        best = best.min(bound);
    }
    best
}

/// Value `sum_i |B_i^T y|` for a unit `y`; every such value is attained, so it
/// is a lower bound on the ★★ norm.
fn dual_value(blocks: &[Mat], y: &[f64]) -> f64 {
    blocks.iter().map(|b| norm2(&b.tmul_vec(y))).sum()
}

fn ascent(blocks: &[Mat], mut y: Vec<f64>) -> f64 {
    let mut best = 0.0;
    for _ in 0..500 {
        let n = norm2(&y);
        if !(n > 0.0) {
            break;
        }
        y.iter_mut().for_each(|v| *v /= n);
        let value = dual_value(blocks, &y);
        if value <= best * (1.0 + 1e-15) {
            best = best.max(value);
            break;
        }
        best = value;
        let mut next = vec![0.0; y.len()];
        for b in blocks {
            let x = b.tmul_vec(&y);
            let nx = norm2(&x);
            if nx > 0.0 {
                let bx = b.mul_vec(&x);
                next.iter_mut().zip(&bx).for_each(|(a, v)| *a += v / nx);
            }
        }
        y = next;
    }
    best
}

/// Lower bound on the ★★ norm by alternating ascent from several starts.
pub fn norm_star_star_lower(blocks: &[Mat], restarts: usize) -> f64 {
    let Some(b0) = blocks.first() else { return 0.0 };
    let n = b0.rows();
    let mut s = Mat::zeros(n, n);
    for b in blocks {
        s.add_assign(&b.gram_rows());
    }
    let (_, vecs) = sym_eigen(&s);
    let mut best = ascent(blocks, (0..n).map(|k| vecs[(k, n - 1)]).collect());
    for b in blocks {
        let (_, bv) = sym_eigen(&b.gram_rows());
        best = best.max(ascent(blocks, (0..n).map(|k| bv[(k, n - 1)]).collect()));
    }
    let mut r = rng::stream(0x5eed, n as u64);
    for _ in 0..restarts {
        let y: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
        best = best.max(ascent(blocks, y));
    }
    best
}

/// Certified interval for the ★★ norm.
pub fn norm_star_star(blocks: &[Mat]) -> NormBounds {
    let upper = norm_star_star_upper(blocks);
    let lower = norm_star_star_lower(blocks, 24).min(upper);
    NormBounds { lower, upper }
}

fn rescale(blocks: &[Mat], w_root: f64, w_children: &[f64]) -> Result<Vec<Mat>> {
    if w_children.len() != blocks.len() {
        return param(format!("{} weights for {} blocks", w_children.len(), blocks.len()));
    }
    if !(w_root > 0.0) || w_children.iter().any(|w| !(*w > 0.0)) {
        return param("weights must be positive");
    }
    Ok(blocks.iter().zip(w_children).map(|(b, w)| b.scaled(w_root / w)).collect())
}

/// The weighted norm `sup w |J x| / max_i w_i |x_i|` via block rescaling.
///
/// The upper bound also tries the split `t_i = (w_root / w_i)^2`, which
/// reproduces the comparison with the spectral norm of the unscaled blocks.
pub fn norm_weighted(blocks: &[Mat], w_root: f64, w_children: &[f64]) -> Result<NormBounds> {
    let scaled = rescale(blocks, w_root, w_children)?;
    let upper = star_star_upper_with(&scaled, &[weight_split(w_root, w_children)], 0.0);
    let lower = norm_star_star_lower(&scaled, 24).min(upper);
    Ok(NormBounds { lower, upper })
}

pub fn norm_weighted_upper(blocks: &[Mat], w_root: f64, w_children: &[f64]) -> Result<f64> {
    norm_weighted_upper_below(blocks, w_root, w_children, 0.0)
}

/// Weighted upper bound that stops refining once it drops to `target`.
pub fn norm_weighted_upper_below(blocks: &[Mat], w_root: f64, w_children: &[f64], target: f64) -> Result<f64> {
    let scaled = rescale(blocks, w_root, w_children)?;
    Ok(star_star_upper_with(&scaled, &[weight_split(w_root, w_children)], target))
}

fn weight_split(w_root: f64, w_children: &[f64]) -> Vec<f64> {
    w_children.iter().map(|w| (w_root / w) * (w_root / w)).collect()
}

/// `(1/x + 1) ln(1 + x) - 1`, the weight offset for a vertex whose odds cap is `x`.
pub fn zeta_from_odds(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    (1.0 / x + 1.0) * ln1p(x) - 1.0
}

/// `(1/x) ln(1/(1-x)) - 1`, the weight offset for a vertex whose scaled marginal cap is `x`.
pub fn zeta_from_cap(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    -ln1p(-x) / x - 1.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VertexWeight {
    /// Cap on the vertex marginal that the weight is built from.
    pub cap: f64,
    pub zeta: f64,
    pub w: f64,
}

/// Per-vertex weights, in the order of the input maps.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightScheme {
    pub vertices: Vec<VertexWeight>,
}

/// Coloring weight for a vertex with `q_v` colors and `d_v` free children.
pub fn coloring_vertex_weight(q_v: usize, d_v: usize, gamma: f64) -> Result<VertexWeight> {
    if !(gamma >= 2.0) {
        return param("gamma must be at least 2");
    }
    if (q_v as f64) < d_v as f64 + gamma || q_v < 2 {
        return param(format!("q_v = {q_v} is below d_v + gamma = {}", d_v as f64 + gamma));
    }
    let x = xi(gamma, d_v, q_v);
    let odds = x / (q_v as f64 - 1.0);
    let zeta = zeta_from_odds(odds);
    if !(zeta > 0.0 && zeta < 1.0) {
        return param(format!("weight offset {zeta} outside (0,1)"));
    }
    Ok(VertexWeight { cap: x / (q_v as f64 - 1.0 + x), zeta, w: 1.0 / sqrt(1.0 - zeta) })
}

pub fn weight_scheme_coloring(q_map: &[usize], d_map: &[usize], gamma: f64) -> Result<WeightScheme> {
    if q_map.len() != d_map.len() {
        return param("list-size and degree maps differ in length");
    }
    let vertices = q_map.iter().zip(d_map).map(|(&q, &d)| coloring_vertex_weight(q, d, gamma)).collect::<Result<_>>()?;
    Ok(WeightScheme { vertices })
}

/// Potts weight for a vertex with `delta_v` children.
pub fn potts_vertex_weight(q: usize, beta: f64, delta_v: usize) -> Result<VertexWeight> {
    if !(0.0..=1.0).contains(&beta) || q < 2 {
        return param("need q >= 2 and beta in [0,1]");
    }
    let theta = 1.0 - beta;
    let cap = potts_cap(q, beta, delta_v);
    let x = theta * cap;
    if x >= 0.6 {
        return domain(format!("scaled cap {x} is not below 3/5"));
    }
    let zeta = zeta_from_cap(x);
    Ok(VertexWeight { cap, zeta, w: 1.0 / sqrt(1.0 - zeta) })
}

pub fn weight_scheme_potts(q: usize, beta: f64, delta_map: &[usize]) -> Result<WeightScheme> {
    let vertices = delta_map.iter().map(|&d| potts_vertex_weight(q, beta, d)).collect::<Result<_>>()?;
    Ok(WeightScheme { vertices })
}

/// Cap `(1/q) exp(-gamma/q + 1/(gamma-1))` on `g_c(p) sum_i p_i(c)` when children are capped by `1/gamma`.
pub fn tech1_bound(q: usize, gamma: f64) -> f64 {
    let q = q as f64;
    exp(-gamma / q + 1.0 / (gamma - 1.0)) / q
}

/// Amortized cap on `g_c(p) sum_i p_i(c)` for children with parameters `(q_i, d_i)`.
pub fn amortized_bound(children_params: &[(usize, usize)], q: usize, gamma: f64) -> f64 {
    let qf = q as f64;
    let sum: f64 = children_params
        .iter()
        .map(|&(qi, di)| zeta_from_odds(xi(gamma, di, qi) / (qi as f64 - 1.0)) + 1.0)
        .sum();
    exp(sum / qf - 1.0) / qf
}

/// Bound on the squared spectral norm of the potential Jacobian at a coloring root.
pub fn l2_bound_formula(q_r: usize, gamma: f64, xi_root: f64, children_zetas: &[f64]) -> f64 {
    let q = q_r as f64;
    let z: f64 = children_zetas.iter().sum();
    exp(2.0 * xi_root / (q - 1.0) - gamma / q) * exp(z / q) / q
}

/// Lower bound `(1 - b)^{s/b}` on `prod (1 - nu)` for `nu <= b` with total `s`.
pub fn product_lower_bound(b: f64, s: f64) -> f64 {
    if s == 0.0 {
        return 1.0;
    }
    if b >= 1.0 {
        return 0.0;
    }
    exp(s / b * ln1p(-b))
}

/// Random subdistribution on `support` within `q` colors with entries at
/// most `cap`: a Dirichlet-style direction scaled to a random total mass,
/// with any excess over the cap poured into the remaining entries.
pub fn random_capped<R: Rng + ?Sized>(r: &mut R, q: usize, support: &[usize], cap: f64) -> Vec<f64> {
    let mut v = vec![0.0; q];
    if support.is_empty() {
        return v;
    }
    let sharpness = [1.0, 2.0, 4.0][r.gen_range(0..3)];
    let e: Vec<f64> = support.iter().map(|_| powi_f(-ln(1.0 - r.gen::<f64>()), sharpness)).collect();
    let total: f64 = e.iter().sum();
    let room = (cap * support.len() as f64).min(1.0);
    let mass = if r.gen_bool(0.5) { room } else { r.gen::<f64>() * room };
    for (&c, x) in support.iter().zip(&e) {
        v[c] = if total > 0.0 { x / total * mass } else { mass / support.len() as f64 };
    }
    pour_excess(&mut v, support, cap);
    v
}

fn powi_f(x: f64, k: f64) -> f64 {
    let mut y = 1.0;
    for _ in 0..k as usize {
        y *= x;
    }
    y
}

/// Clamp entries to `cap`, redistributing the excess proportionally over
/// entries still below it.
fn pour_excess(v: &mut [f64], support: &[usize], cap: f64) {
    for _ in 0..support.len() + 1 {
        let excess: f64 = support.iter().map(|&c| (v[c] - cap).max(0.0)).sum();
        if excess <= 0.0 {
            return;
        }
        let open: f64 = support.iter().filter(|&&c| v[c] < cap).map(|&c| v[c].max(1e-300)).sum();
        for &c in support {
            if v[c] >= cap {
                v[c] = cap;
            }
        }
        if open <= 0.0 {
            return;
        }
        for &c in support {
            if v[c] < cap {
                v[c] += excess * v[c].max(1e-300) / open;
            }
        }
    }
    for &c in support {
        v[c] = v[c].min(cap);
    }
}

/// Corner point of the capped simplex: entries `cap` on a random subset plus one remainder.
pub fn random_corner<R: Rng + ?Sized>(r: &mut R, q: usize, support: &[usize], cap: f64) -> Vec<f64> {
    let mut v = vec![0.0; q];
    let mut order = support.to_vec();
    for i in (1..order.len()).rev() {
        order.swap(i, r.gen_range(0..=i));
    }
    let mut left = if r.gen_bool(0.5) { 1.0 } else { r.gen::<f64>() };
    for c in order {
        if left <= 0.0 {
            break;
        }
        let x = cap.min(left);
        v[c] = x;
        left -= x;
    }
    v
}

/// Largest value of `g_c sum_i p_i(c)` over the root list.
pub fn max_marginal_load(g: &[f64], children: &[&[f64]], root_list: &[usize]) -> f64 {
    root_list.iter().map(|&c| g[c] * children.iter().map(|p| p[c]).sum::<f64>()).fold(0.0, f64::max)
}
