//! Heat-bath Glauber dynamics with exact diagnostics on small instances.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::error::{param, Error, Result};
use crate::graph::{Pinning, SpinSystem};
use crate::linalg::{sym_eigenvalues, Mat};
use crate::math::{abs, sqrt};
use crate::oracle::enumerate_gibbs;
use crate::rng::{self, Rng};

/// Largest state space for which the dense spectral gap is computed.
pub const GAP_DENSE_CAP: usize = 3000;

#[derive(Debug, Clone)]
pub struct ChainState {
    pub coloring: Vec<usize>,
    pub step: u64,
    pub rng: Rng,
}

/// A pinned instance ready to run; free vertices are the ones that move.
pub struct Glauber<'a, S: SpinSystem> {
    sys: &'a S,
    fixed: Vec<Option<usize>>,
    free: Vec<usize>,
}

impl<'a, S: SpinSystem> Glauber<'a, S> {
    /// Checks the ergodicity condition on the free part of the instance: for
    /// colorings, each free vertex with a free neighbor needs at least two
    /// more available colors than free neighbors, and each isolated free
    /// vertex needs one available color.
    pub fn new(sys: &'a S, pin: &Pinning) -> Result<Self> {
        pin.validate(sys)?;
        let g = sys.graph();
        let n = g.vertex_count();
        let fixed = pin.to_vec(n);
        let free: Vec<usize> = (0..n).filter(|&v| fixed[v].is_none()).collect();
        if sys.is_hard() {
            for &v in &free {
                let available = sys.list(v).iter().filter(|&&c| g.neighbors(v).iter().all(|&u| fixed[u] != Some(c))).count();
                let free_deg = g.neighbors(v).iter().filter(|&&u| fixed[u].is_none()).count();
                let need = if free_deg == 0 { 1 } else { free_deg + 2 };
                if available < need {
                    return Err(Error::Ergodicity { vertex: v });
                }
            }
        }
        Ok(Glauber { sys, fixed, free })
    }

    pub fn free_vertices(&self) -> &[usize] {
        &self.free
    }

    /// Greedy start: pinned colors, then the first color per free vertex that
    /// avoids its already colored neighbors.
    pub fn initial_coloring(&self) -> Result<Vec<usize>> {
        self.greedy(None)
    }

    /// Greedy coloring that also avoids `other` wherever it can, for
    /// maximal-disagreement starts.
    fn greedy(&self, other: Option<&[usize]>) -> Result<Vec<usize>> {
        let g = self.sys.graph();
        let mut colors: Vec<Option<usize>> = self.fixed.clone();
        for &v in &self.free {
            let ok = |c: usize, colors: &[Option<usize>]| !self.sys.is_hard() || g.neighbors(v).iter().all(|&u| colors[u] != Some(c));
            let list = self.sys.list(v);
            let pick = list
                .iter()
                .copied()
                .find(|&c| ok(c, &colors) && other.map_or(true, |o| o[v] != c))
                .or_else(|| list.iter().copied().find(|&c| ok(c, &colors)));
            match pick {
                Some(c) => colors[v] = Some(c),
                None => return Err(Error::Infeasible),
            }
        }
        Ok(colors.into_iter().map(|c| c.expect("every vertex colored")).collect())
    }

    pub fn start(&self, seed: u64, chain: u64) -> Result<ChainState> {
        Ok(ChainState { coloring: self.initial_coloring()?, step: 0, rng: rng::stream(seed, chain) })
    }

    /// Unnormalized conditional weights of each list color at `v`.
    fn conditional(&self, v: usize, coloring: &[usize]) -> Vec<f64> {
        let g = self.sys.graph();
        self.sys
            .list(v)
            .iter()
            .map(|&c| g.neighbors(v).iter().map(|&u| self.sys.edge_weight(c, coloring[u])).product())
            .collect()
    }

    /// Color at `v` given the uniform draw `u`, by inverse CDF in list order.
    fn resample(&self, v: usize, coloring: &[usize], u: f64) -> usize {
        let w = self.conditional(v, coloring);
        let total: f64 = w.iter().sum();
        let list = self.sys.list(v);
        let mut x = u * total;
        let mut last = coloring[v];
        for (i, &wi) in w.iter().enumerate() {
            if wi <= 0.0 {
                continue;
            }
            last = list[i];
            if x < wi {
                return list[i];
            }
            x -= wi;
        }
        last
    }

    /// One heat-bath update at a uniformly chosen free vertex.
    pub fn step(&self, state: &mut ChainState) {
        state.step += 1;
        if self.free.is_empty() {
            return;
        }
        let v = self.free[state.rng.gen_range(0..self.free.len())];
        let u: f64 = state.rng.gen();
        state.coloring[v] = self.resample(v, &state.coloring, u);
    }

    pub fn run(&self, state: &mut ChainState, steps: u64) {
        for _ in 0..steps {
            self.step(state);
        }
    }
}

/// One update of `state`; the ergodicity check runs on every call.
pub fn glauber_step<S: SpinSystem>(sys: &S, pin: &Pinning, state: &mut ChainState) -> Result<()> {
    Glauber::new(sys, pin)?.step(state);
    Ok(())
}

/// Exact Glauber kernel on the support of the Gibbs distribution, stored by rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    pub states: Vec<Vec<usize>>,
    pub stationary: Vec<f64>,
    /// Nonzero `(column, probability)` entries of each row.
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl TransitionMatrix {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dense(&self) -> Mat {
        let n = self.len();
        let mut m = Mat::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, p) in row {
                m[(i, j)] += p;
            }
        }
        m
    }

    /// `x P` for a row vector `x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        for (i, row) in self.rows.iter().enumerate() {
            if x[i] == 0.0 {
                continue;
            }
            for &(j, p) in row {
                y[j] += x[i] * p;
            }
        }
        y
    }

    /// `max |pi P - pi|`.
    pub fn stationarity_error(&self) -> f64 {
        let y = self.apply(&self.stationary);
        y.iter().zip(&self.stationary).map(|(a, b)| abs(a - b)).fold(0.0, f64::max)
    }

    /// `1 - lambda_2` from the symmetrized kernel; refused above [`GAP_DENSE_CAP`] states.
    pub fn spectral_gap(&self) -> Result<f64> {
        let n = self.len();
        if n > GAP_DENSE_CAP {
            return Err(Error::CapExceeded { what: "dense spectral gap", needed: n as u64, cap: GAP_DENSE_CAP as u64 });
        }
        if n < 2 {
            return Ok(1.0);
        }
        let s: Vec<f64> = self.stationary.iter().map(|&p| sqrt(p)).collect();
        let mut m = Mat::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, p) in row {
                m[(i, j)] += s[i] * p / s[j];
            }
        }
        // Reversibility makes this symmetric up to rounding.
        let sym = m.transpose();
        let mut avg = m;
        avg.add_assign(&sym);
        let ev = sym_eigenvalues(&avg.scaled(0.5));
        Ok(1.0 - ev[n - 2])
    }
}

pub fn transition_matrix<S: SpinSystem>(sys: &S, pin: &Pinning, state_cap: u64) -> Result<TransitionMatrix> {
    let chain = Glauber::new(sys, pin)?;
    let table = enumerate_gibbs(sys, pin, state_cap)?;
    let states: Vec<Vec<usize>> = table.iter().map(|(s, _)| s.to_vec()).collect();
    let stationary = table.probs().to_vec();
    let index: BTreeMap<&[usize], usize> = states.iter().enumerate().map(|(i, s)| (s.as_slice(), i)).collect();
    let k = chain.free.len() as f64;
    let mut rows = Vec::with_capacity(states.len());
    for (i, s) in states.iter().enumerate() {
        let mut row: BTreeMap<usize, f64> = BTreeMap::new();
        let mut y = s.clone();
        for &v in &chain.free {
            let w = chain.conditional(v, s);
            let total: f64 = w.iter().sum();
            for (ci, &c) in sys.list(v).iter().enumerate() {
                if w[ci] <= 0.0 {
                    continue;
                }
                y[v] = c;
                let j = index[y.as_slice()];
                *row.entry(j).or_insert(0.0) += w[ci] / total / k;
            }
            y[v] = s[v];
        }
        if chain.free.is_empty() {
            row.insert(i, 1.0);
        }
        rows.push(row.into_iter().collect());
    }
    Ok(TransitionMatrix { states, stationary, rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixingKind {
    ExactTv,
    Coalescence,
    Autocorrelation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixingReport {
    pub kind: MixingKind,
    /// Worst-start TV by step, coalescence times by trial, or autocorrelation by lag.
    pub values: Vec<f64>,
    /// Mixing time, median coalescence time, or integrated autocorrelation time.
    pub summary: f64,
    /// Trials that hit the step cap.
    pub timeouts: usize,
    pub notes: Vec<String>,
}

/// Relabels colors in order of first appearance.
fn canonical(s: &[usize]) -> Vec<usize> {
    let mut map: BTreeMap<usize, usize> = BTreeMap::new();
    s.iter()
        .map(|&c| {
            let next = map.len();
            *map.entry(c).or_insert(next)
        })
        .collect()
}

/// Start states whose worst case covers all starts; one per color-permutation
/// class when every vertex is free with the full color set.
fn start_states<S: SpinSystem>(sys: &S, pin: &Pinning, m: &TransitionMatrix) -> (Vec<usize>, bool) {
    let n = sys.graph().vertex_count();
    let symmetric = pin.is_empty() && (0..n).all(|v| sys.list(v).len() == sys.q());
    if !symmetric {
        return ((0..m.len()).collect(), false);
    }
    let mut seen = BTreeMap::new();
    for (i, s) in m.states.iter().enumerate() {
        seen.entry(canonical(s)).or_insert(i);
    }
    (seen.into_values().collect(), true)
}

/// Smallest `t` with worst-start `TV(P^t(x, .), pi) <= eps`, found by
/// evolving each start distribution; gives up after `max_steps`.
pub fn exact_mixing_time<S: SpinSystem>(sys: &S, pin: &Pinning, eps: f64, state_cap: u64, max_steps: usize) -> Result<MixingReport> {
    let m = transition_matrix(sys, pin, state_cap)?;
    let (starts, reduced) = start_states(sys, pin, &m);
    let mut notes = Vec::new();
    if reduced {
        notes.push(format!("{} start classes under color permutations", starts.len()));
    }
    let mut dists: Vec<Vec<f64>> = starts
        .iter()
        .map(|&i| {
            let mut x = vec![0.0; m.len()];
            x[i] = 1.0;
            x
        })
        .collect();
    let worst = |dists: &[Vec<f64>]| dists.iter().map(|x| crate::oracle::tv_distance(x, &m.stationary)).fold(0.0, f64::max);
    let mut values = vec![worst(&dists)];
    let mut t = 0;
    while values[t] > eps {
        if t == max_steps {
            return Err(Error::SearchExhausted(format!("distance {} above {eps} after {max_steps} steps", values[t])));
        }
        dists = dists.iter().map(|x| m.apply(x)).collect();
        values.push(worst(&dists));
        t += 1;
    }
    Ok(MixingReport { kind: MixingKind::ExactTv, values, summary: t as f64, timeouts: 0, notes })
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Coalescence time of one grand-coupled pair from the maximal-disagreement start.
pub fn coalescence_trial<S: SpinSystem>(chain: &Glauber<'_, S>, seed: u64, trial: u64, step_cap: u64) -> Result<Option<u64>> {
    let mut x = chain.initial_coloring()?;
    let mut y = chain.greedy(Some(&x))?;
    let mut r = rng::stream(seed, trial);
    let mut disagree = chain.free.iter().filter(|&&v| x[v] != y[v]).count();
    let mut t = 0;
    while disagree > 0 {
        if t == step_cap {
            return Ok(None);
        }
        t += 1;
        let v = chain.free[r.gen_range(0..chain.free.len())];
        let u: f64 = r.gen();
        let was = x[v] != y[v];
        x[v] = chain.resample(v, &x, u);
        y[v] = chain.resample(v, &y, u);
        let now = x[v] != y[v];
        if was && !now {
            disagree -= 1;
        } else if !was && now {
            disagree += 1;
        }
    }
    Ok(Some(t))
}

/// Coalescence times of `trials` identity-coupled pairs; each trial owns the
/// stream `(seed, trial)`.
pub fn coalescence_estimate<S: SpinSystem>(sys: &S, pin: &Pinning, trials: usize, seed: u64, step_cap: u64) -> Result<MixingReport> {
    let chain = Glauber::new(sys, pin)?;
    let times = (0..trials).map(|t| coalescence_trial(&chain, seed, t as u64, step_cap)).collect::<Result<Vec<_>>>()?;
    Ok(coalescence_report(&times, step_cap))
}

/// Report over per-trial coalescence times; `None` marks a trial that hit the cap.
pub fn coalescence_report(times: &[Option<u64>], step_cap: u64) -> MixingReport {
    let values: Vec<f64> = times.iter().map(|t| t.unwrap_or(step_cap) as f64).collect();
    let timeouts = times.iter().filter(|t| t.is_none()).count();
    let mut notes = Vec::new();
    if timeouts > 0 {
        notes.push(format!("{timeouts} of {} trials hit the step cap {step_cap}", times.len()));
    }
    MixingReport { kind: MixingKind::Coalescence, summary: median(values.clone()), values, timeouts, notes }
}

/// Autocorrelation of the number of vertices holding their list's first color,
/// sampled once per sweep after burn-in. The summary is the integrated
/// autocorrelation time in sweeps, summed until the first negative lag.
pub fn autocorrelation_estimate<S: SpinSystem>(sys: &S, pin: &Pinning, sweeps: usize, burnin: usize, max_lag: usize, seed: u64) -> Result<MixingReport> {
    if sweeps < 2 * max_lag.max(1) {
        return param("need at least twice as many sweeps as lags");
    }
    let chain = Glauber::new(sys, pin)?;
    let mut state = chain.start(seed, 0)?;
    let sweep = chain.free.len().max(1) as u64;
    chain.run(&mut state, burnin as u64 * sweep);
    let mut series = Vec::with_capacity(sweeps);
    for _ in 0..sweeps {
        chain.run(&mut state, sweep);
        series.push(chain.free.iter().filter(|&&v| state.coloring[v] == sys.list(v)[0]).count() as f64);
    }
    let mean = series.iter().sum::<f64>() / sweeps as f64;
    let var = series.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / sweeps as f64;
    let mut values = vec![1.0];
    for lag in 1..=max_lag {
        let c = (0..sweeps - lag).map(|i| (series[i] - mean) * (series[i + lag] - mean)).sum::<f64>() / (sweeps - lag) as f64;
        values.push(if var > 0.0 { c / var } else { 0.0 });
    }
    let mut tau = 1.0;
    for &r in &values[1..] {
        if r < 0.0 {
            break;
        }
        tau += 2.0 * r;
    }
    Ok(MixingReport { kind: MixingKind::Autocorrelation, values, summary: tau, timeouts: 0, notes: Vec::new() })
}
