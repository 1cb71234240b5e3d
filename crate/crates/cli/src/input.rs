//! Graph, instance and pinning inputs: built-in shapes and the file formats.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Deserialize;
use spinlab_core::graph::Graph;
use spinlab_core::{ColoringInstance, Pinning, PottsInstance, SpinSystem};

use crate::CliError;

/// Either model, so commands can stay generic over [`SpinSystem`].
pub enum Model {
    Coloring(ColoringInstance),
    Potts(PottsInstance),
}

impl SpinSystem for Model {
    fn graph(&self) -> &Graph {
        match self {
            Model::Coloring(m) => m.graph(),
            Model::Potts(m) => m.graph(),
        }
    }
    fn q(&self) -> usize {
        match self {
            Model::Coloring(m) => m.q(),
            Model::Potts(m) => m.q(),
        }
    }
    fn list(&self, v: usize) -> &[usize] {
        match self {
            Model::Coloring(m) => m.list(v),
            Model::Potts(m) => m.list(v),
        }
    }
    fn theta(&self) -> f64 {
        match self {
            Model::Coloring(m) => m.theta(),
            Model::Potts(m) => m.theta(),
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// `bintree:h`, `dary:d:h`, `path:n` or `cycle:n`.
pub fn builtin_graph(spec: &str) -> Result<Graph, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let num = |s: &str| s.parse::<usize>().map_err(|_| usage(format!("bad number {s:?} in graph spec {spec:?}")));
    let g = match parts.as_slice() {
        ["bintree", h] => Graph::dary_tree(2, num(h)?)?,
        ["dary", d, h] => Graph::dary_tree(num(d)?, num(h)?)?,
        ["path", n] => Graph::path(num(n)?),
        ["cycle", n] => Graph::cycle(num(n)?)?,
        _ => return Err(usage(format!("unknown graph spec {spec:?}; expected bintree:h, dary:d:h, path:n or cycle:n"))),
    };
    Ok(g)
}

/// Plain text: a line `n m` then `m` lines `u v`. Lines starting with `#` are skipped.
pub fn parse_graph(text: &str) -> Result<Graph, CliError> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    let head = lines.next().ok_or_else(|| usage("graph file is empty"))?;
    let nums = |l: &str| -> Result<Vec<usize>, CliError> {
        l.split_whitespace().map(|t| t.parse::<usize>().map_err(|_| usage(format!("bad graph line {l:?}")))).collect()
    };
    let h = nums(head)?;
    if h.len() != 2 {
        return Err(usage("graph header must be `n m`"));
    }
    let mut edges = Vec::with_capacity(h[1]);
    for l in lines {
        let e = nums(l)?;
        if e.len() != 2 {
            return Err(usage(format!("edge line {l:?} must hold two vertices")));
        }
        edges.push((e[0], e[1]));
    }
    if edges.len() != h[1] {
        return Err(usage(format!("header promises {} edges, found {}", h[1], edges.len())));
    }
    Ok(Graph::new(h[0], &edges)?)
}

pub fn format_graph(g: &Graph) -> String {
    let mut s = format!("{} {}\n", g.vertex_count(), g.edge_count());
    for &(u, v) in g.edges() {
        s.push_str(&format!("{u} {v}\n"));
    }
    s
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    q: usize,
    lists: Option<Vec<Vec<usize>>>,
    beta: Option<f64>,
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn load_graph(tree: Option<&str>, graph: Option<&Path>) -> Result<Graph, CliError> {
    match (tree, graph) {
        (Some(spec), None) => builtin_graph(spec),
        (None, Some(path)) => parse_graph(&read_text(path)?),
        (Some(_), Some(_)) => Err(usage("give either --tree or --graph, not both")),
        (None, None) => Err(usage("a graph is required: --tree SPEC or --graph FILE")),
    }
}

/// Builds the model from an instance file or from `q` and an optional `beta`.
pub fn load_model(graph: Graph, q: Option<usize>, beta: Option<f64>, instance: Option<&Path>) -> Result<Model, CliError> {
    if let Some(path) = instance {
        if q.is_some() || beta.is_some() {
            return Err(usage("--instance already fixes q and beta"));
        }
        let f: InstanceFile = serde_json::from_str(&read_text(path)?).map_err(|e| usage(format!("instance file: {e}")))?;
        return match (f.beta, f.lists) {
            (Some(_), Some(_)) => Err(usage("instance file: the Potts model takes no color lists")),
            (Some(b), None) => Ok(Model::Potts(PottsInstance::new(graph, f.q, b)?)),
            (None, Some(lists)) => Ok(Model::Coloring(ColoringInstance::new(graph, f.q, lists)?)),
            (None, None) => Ok(Model::Coloring(ColoringInstance::uniform(graph, f.q)?)),
        };
    }
    let q = q.ok_or_else(|| usage("--q is required without --instance"))?;
    match beta {
        Some(b) => Ok(Model::Potts(PottsInstance::new(graph, q, b)?)),
        None => Ok(Model::Coloring(ColoringInstance::uniform(graph, q)?)),
    }
}

/// JSON map from vertex to color, merged with inline `v:c` pairs.
pub fn load_pinning(file: Option<&Path>, inline: &[String]) -> Result<Pinning, CliError> {
    let mut pin = Pinning::new();
    if let Some(path) = file {
        let map: BTreeMap<String, usize> = serde_json::from_str(&read_text(path)?).map_err(|e| usage(format!("pinning file: {e}")))?;
        for (k, c) in map {
            let v = k.parse::<usize>().map_err(|_| usage(format!("pinning key {k:?} is not a vertex")))?;
            pin.insert(v, c);
        }
    }
    for item in inline {
        let (v, c) = item.split_once(':').ok_or_else(|| usage(format!("pin {item:?} must look like vertex:color")))?;
        let v = v.trim().parse::<usize>().map_err(|_| usage(format!("bad vertex in pin {item:?}")))?;
        let c = c.trim().parse::<usize>().map_err(|_| usage(format!("bad color in pin {item:?}")))?;
        pin.insert(v, c);
    }
    Ok(pin)
}

/// `a:b` (inclusive) or a comma-separated list.
pub fn parse_depths(spec: &str) -> Result<Vec<usize>, CliError> {
    let bad = || usage(format!("bad distance list {spec:?}; use a:b or a,b,c"));
    if let Some((a, b)) = spec.split_once(':') {
        let a = a.trim().parse::<usize>().map_err(|_| bad())?;
        let b = b.trim().parse::<usize>().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    spec.split(',').map(|t| t.trim().parse::<usize>().map_err(|_| bad())).collect()
}
