use rayon::prelude::*;
use serde_json::{json, Value};

use spinlab_core::certify::{self, ContractionReport, Family, Mode};
use spinlab_core::coupling::{self, CouplingOutcome, CouplingSummary};
use spinlab_core::decay::{self, DecayProfile, Regime, SearchConfig, SearchMode, Strategy};
use spinlab_core::glauber::{self, Glauber, MixingReport};
use spinlab_core::graph::{generate_girth_graph, girth};
use spinlab_core::oracle::{self, enumerate_gibbs};
use spinlab_core::tree::exact_forest_marginals;
use spinlab_core::{Pinning, RootedTree, SpinSystem};

use crate::input::{format_graph, load_graph, load_model, load_pinning, parse_depths, Model};
use crate::*;

pub fn dispatch(cli: &Cli) -> Result<Output, CliError> {
    match &cli.command {
        Command::Marginals(a) => marginals(a),
        Command::Certify(a) => certify_cmd(a),
        Command::Influence(a) => influence(a),
        Command::Glauber(a) => glauber_cmd(a),
        Command::Couple(a) => couple(a),
        Command::Decay(a) => decay_cmd(a),
        Command::Constants(a) => constants(a),
        Command::GenGraph(a) => gen_graph(a),
    }
}

fn model_and_pin(m: &ModelArgs) -> Result<(Model, Pinning), CliError> {
    let g = load_graph(m.tree.as_deref(), m.graph.as_deref())?;
    let model = load_model(g, m.q, m.beta, m.instance.as_deref())?;
    let pin = load_pinning(m.pin_file.as_deref(), &m.pins)?;
    pin.validate(&model)?;
    Ok((model, pin))
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn marginals(a: &MarginalsArgs) -> Result<Output, CliError> {
    let (model, pin) = model_and_pin(&a.model)?;
    let n = model.graph().vertex_count();
    let use_tree = match a.engine {
        Engine::Auto => model.graph().is_forest(),
        Engine::Tree => true,
        Engine::Oracle => false,
    };
    let rows: Vec<Vec<f64>> = if use_tree {
        let t = exact_forest_marginals(&model, &pin)?;
        (0..n).map(|v| t.marginal(v).to_vec()).collect()
    } else {
        enumerate_gibbs(&model, &pin, a.state_cap)?.marginals()
    };
    let mut table = Vec::new();
    for (v, row) in rows.iter().enumerate() {
        for (c, p) in row.iter().enumerate() {
            table.push(vec![v.to_string(), c.to_string(), p.to_string()]);
        }
    }
    let result = json!({
        "engine": if use_tree { "tree" } else { "oracle" },
        "marginals": rows.iter().enumerate().map(|(v, r)| json!({ "vertex": v, "pinned": pin.get(v), "probs": r })).collect::<Vec<_>>(),
    });
    Ok(Output::json(result).with_table(vec!["vertex", "color", "probability"], table))
}

fn family_of(family: FamilyArg, q: usize, delta: usize, beta: Option<f64>) -> Result<Family, CliError> {
    Ok(match family {
        FamilyArg::Coloring => Family::Coloring { q, delta },
        FamilyArg::Unweighted => Family::ColoringUnweighted { q, delta },
        FamilyArg::Potts => Family::Potts { q, beta: beta.ok_or_else(|| usage("--beta is required for the Potts family"))?, delta },
    })
}

/// Runs the certifier with tasks spread over the pool; the merge is order independent.
fn certify_parallel(family: Family, mode: Mode, samples: usize, seed: u64) -> Result<ContractionReport, CliError> {
    certify::check_family(&family)?;
    let parts = (0..certify::task_count(samples))
        .into_par_iter()
        .map(|t| certify::certify_task(&family, mode, seed, t, certify::task_samples(samples, t)))
        .collect();
    Ok(certify::merge(&family, mode, samples, parts))
}

fn report_json(r: &ContractionReport) -> Value {
    json!({
        "samples": r.samples,
        "sampled_max_norm": r.sampled_max_norm,
        "analytic_bound": r.analytic_bound,
        "delta_hat": r.delta_hat,
        "max_config_ratio": r.max_config_ratio,
        "config_violations": r.config_violations,
        "worst_input": {
            "children": r.worst_input.children,
            "pinned": r.worst_input.pinned,
            "root_list": r.worst_input.root_list,
            "w_root": r.worst_input.w_root,
            "w_children": r.worst_input.w_children,
            "profile": r.worst_input.profile,
            "norm": r.worst_input.norm,
        },
        "warnings": r.warnings,
    })
}

fn certify_cmd(a: &CertifyArgs) -> Result<Output, CliError> {
    let family = family_of(a.family, a.q, a.delta_max, a.beta)?;
    let mode = match a.mode {
        ModeArg::Strong => Mode::Strong,
        ModeArg::Weak => Mode::Weak,
    };
    let r = certify_parallel(family, mode, a.samples, a.seed)?;
    let rows = vec![
        vec!["sampled_max_norm".into(), r.sampled_max_norm.to_string()],
        vec!["analytic_bound".into(), r.analytic_bound.to_string()],
        vec!["delta_hat".into(), r.delta_hat.to_string()],
        vec!["max_config_ratio".into(), r.max_config_ratio.to_string()],
        vec!["config_violations".into(), r.config_violations.to_string()],
    ];
    Ok(Output::json(report_json(&r)).with_table(vec!["field", "value"], rows))
}

fn profile_json(p: &DecayProfile) -> Value {
    json!({
        "distances": p.distances,
        "values": p.values,
        "modes": p.modes.iter().map(|m| m.name()).collect::<Vec<_>>(),
        "fitted_rate": p.fitted_rate,
        "fit_residual": p.fit_residual,
    })
}

fn profile_rows(p: &DecayProfile) -> Vec<Vec<String>> {
    p.distances.iter().zip(&p.values).zip(&p.modes).map(|((d, v), m)| vec![d.to_string(), v.to_string(), m.name().to_string()]).collect()
}

fn influence(a: &InfluenceArgs) -> Result<Output, CliError> {
    let (model, pin) = model_and_pin(&a.model)?;
    let table = enumerate_gibbs(&model, &pin, a.state_cap)?;
    let m = oracle::influence_matrix_of(&table)?;
    let s = oracle::spectral_report(&m)?;
    let mut result = json!({
        "lambda_max": s.lambda_max,
        "max_imag": s.max_imag,
        "complex_spectrum": s.complex_spectrum,
        "dimension": s.dimension,
    });
    if a.matrix {
        let n = m.index.len();
        result["index"] = json!(m.index);
        result["matrix"] = json!((0..n).map(|i| (0..n).map(|j| m.entries[(i, j)]).collect::<Vec<f64>>()).collect::<Vec<_>>());
    }
    let mut out_rows = Vec::new();
    if let Some(u) = a.source {
        let depths = parse_depths(&a.depths)?;
        let p = decay::tid_profile(&model, &pin, u, &depths, a.state_cap)?;
        out_rows = profile_rows(&p);
        result["influence_sums"] = profile_json(&p);
        if let (Some(r), Some(k)) = (a.check_radius, a.check_k) {
            let c = oracle::check_sum_infl_inequality(&model, &pin, u, r, k, a.state_cap)?;
            result["sum_influence_check"] = json!({
                "colors": [c.colors.0, c.colors.1],
                "lhs": c.lhs,
                "rhs": c.rhs,
                "outer_tv": c.outer_tv,
                "inner_count": c.inner_count,
                "max_term": c.max_term,
                "slack": c.slack,
                "outer_colorings": c.outer_colorings,
                "ratio_check": c.ratio_check.map(|(tv, bound)| json!({ "tv": tv, "bound": bound })),
            });
        } else if a.check_radius.is_some() {
            return Err(usage("--check-radius needs --check-k"));
        }
    }
    Ok(Output::json(result).with_table(vec!["distance", "value", "mode"], out_rows))
}

fn mixing_json(r: &MixingReport) -> Value {
    let kind = match r.kind {
        glauber::MixingKind::ExactTv => "exact-tv",
        glauber::MixingKind::Coalescence => "coalescence",
        glauber::MixingKind::Autocorrelation => "autocorrelation",
    };
    json!({ "kind": kind, "summary": r.summary, "timeouts": r.timeouts, "values": r.values, "notes": r.notes })
}

fn glauber_cmd(a: &GlauberArgs) -> Result<Output, CliError> {
    let (model, pin) = model_and_pin(&a.model)?;
    let report = match a.method {
        GlauberMethod::Exact => glauber::exact_mixing_time(&model, &pin, a.eps, a.state_cap, a.steps as usize)?,
        GlauberMethod::Coalescence => {
            let chain = Glauber::new(&model, &pin)?;
            let times = (0..a.trials)
                .into_par_iter()
                .map(|t| glauber::coalescence_trial(&chain, a.seed, t as u64, a.steps))
                .collect::<Result<Vec<_>, _>>()?;
            glauber::coalescence_report(&times, a.steps)
        }
        GlauberMethod::Autocorrelation => glauber::autocorrelation_estimate(&model, &pin, a.sweeps, a.burnin as usize, a.max_lag, a.seed)?,
        GlauberMethod::Sample => return glauber_sample(a, &model, &pin),
    };
    let rows = report.values.iter().enumerate().map(|(i, v)| vec![i.to_string(), v.to_string()]).collect();
    Ok(Output::json(mixing_json(&report)).with_table(vec!["index", "value"], rows))
}

fn glauber_sample(a: &GlauberArgs, model: &Model, pin: &Pinning) -> Result<Output, CliError> {
    let chain = Glauber::new(model, pin)?;
    let mut state = chain.start(a.seed, 0)?;
    chain.run(&mut state, a.burnin);
    let n = model.graph().vertex_count();
    let q = model.q();
    let mut counts = vec![vec![0u64; q]; n];
    for _ in 0..a.steps {
        chain.step(&mut state);
        for (v, &c) in state.coloring.iter().enumerate() {
            counts[v][c] += 1;
        }
    }
    let freq: Vec<Vec<f64>> = counts.iter().map(|row| row.iter().map(|&k| k as f64 / a.steps.max(1) as f64).collect()).collect();
    let mut rows = Vec::new();
    for (v, row) in freq.iter().enumerate() {
        for (c, f) in row.iter().enumerate() {
            rows.push(vec![v.to_string(), c.to_string(), f.to_string()]);
        }
    }
    let result = json!({ "steps": a.steps, "burnin": a.burnin, "final_coloring": state.coloring, "frequencies": freq });
    Ok(Output::json(result).with_table(vec!["vertex", "color", "frequency"], rows))
}

fn outcome_json(t: usize, o: &CouplingOutcome) -> Value {
    json!({
        "trial": t,
        "hamming": o.hamming,
        "max_depth": o.max_depth,
        "independent_draws": o.independent_draws,
        "x": o.x,
        "y": o.y,
        "trace": o.trace.iter().map(|e| json!([e.depth, e.center, e.vertex, e.coupled])).collect::<Vec<_>>(),
    })
}

fn couple(a: &CoupleArgs) -> Result<Output, CliError> {
    let (model, pin) = model_and_pin(&a.model)?;
    if a.trials == 0 {
        return Err(usage("--trials must be positive"));
    }
    // Fixed chunks keep the per-trial streams and the output order independent of the pool.
    let chunk = a.trials.div_ceil(rayon::current_num_threads().max(1));
    let starts: Vec<usize> = (0..a.trials).step_by(chunk).collect();
    let parts = starts
        .into_par_iter()
        .map(|s| {
            let mut got: Vec<(usize, CouplingOutcome)> = Vec::new();
            let range = s..(s + chunk).min(a.trials);
            let summary =
                coupling::run_couplings(&model, &pin, a.u, (a.b, a.c), a.radius, range, a.seed, a.depth_cap, a.state_cap, &mut |t, o| got.push((t, o.clone())))?;
            Ok((summary.discarded, got))
        })
        .collect::<Result<Vec<_>, spinlab_core::Error>>()?;
    let discarded = parts.iter().map(|p| p.0).sum();
    let outcomes: Vec<&(usize, CouplingOutcome)> = parts.iter().flat_map(|p| p.1.iter()).collect();
    let completed: Vec<(usize, usize)> = outcomes.iter().map(|(_, o)| (o.hamming, o.max_depth)).collect();
    let summary = CouplingSummary::from_completed(a.trials, discarded, &completed);
    if a.lines {
        let mut lines: Vec<Value> = outcomes.iter().map(|(t, o)| outcome_json(*t, o)).collect();
        lines.push(json!({ "summary": summary_json(&summary) }));
        return Ok(Output { result: Value::Null, table: None, lines: Some(lines), text: None });
    }
    let mut result = json!({ "summary": summary_json(&summary) });
    if a.exact_w1 {
        let table = enumerate_gibbs(&model, &pin, a.state_cap)?;
        let w = oracle::w1_hamming(&table.condition(a.u, a.b)?, &table.condition(a.u, a.c)?, oracle::DEFAULT_SUPPORT_CAP)?;
        result["w1"] = json!({ "exact": w.exact, "lower": w.lower, "upper": w.upper });
    }
    let rows = outcomes
        .iter()
        .map(|(t, o)| vec![t.to_string(), o.hamming.to_string(), o.max_depth.to_string(), o.independent_draws.to_string()])
        .collect();
    Ok(Output::json(result).with_table(vec!["trial", "hamming", "max_depth", "independent_draws"], rows))
}

fn summary_json(s: &CouplingSummary) -> Value {
    json!({
        "trials": s.trials,
        "completed": s.completed,
        "discarded": s.discarded,
        "mean_hamming": s.mean_hamming,
        "std_error": s.std_error,
        "max_depth": s.max_depth,
    })
}

fn decay_cmd(a: &DecayArgs) -> Result<Output, CliError> {
    let (model, pin) = model_and_pin(&a.model)?;
    let depths = parse_depths(&a.depths)?;
    let g = model.graph();
    let root = a.root.unwrap_or(0);
    let cfg = SearchConfig {
        strategy: match a.strategy {
            StrategyArg::Auto => Strategy::Auto,
            StrategyArg::Exact => Strategy::Exact,
            StrategyArg::Heuristic => Strategy::Heuristic,
        },
        random_pairs: a.random_pairs,
        flip_passes: a.flip_passes,
        seed: a.seed,
    };
    let profile = match a.kind {
        DecayKind::Tid => decay::tid_profile(&model, &pin, root, &depths, a.state_cap)?,
        DecayKind::Ssm | DecayKind::Wsm => {
            if !g.is_tree() {
                return Err(usage("spatial mixing profiles need a tree"));
            }
            if a.kind == DecayKind::Wsm && !pin.is_empty() {
                return Err(usage("weak spatial mixing pins whole spheres only; drop --pin"));
            }
            let tree = RootedTree::new(g.clone(), root)?;
            // Distances are independent searches, so they run in parallel.
            let parts = depths
                .par_iter()
                .map(|&d| decay::boundary_profile(&model, &tree, root, &pin, &[d], &cfg))
                .collect::<Result<Vec<_>, _>>()?;
            let values: Vec<f64> = parts.iter().map(|p| p.values[0]).collect();
            let modes: Vec<SearchMode> = parts.iter().map(|p| p.modes[0]).collect();
            let fit = decay::fit_rate(&depths, &values).ok();
            DecayProfile { distances: depths.clone(), values, modes, fitted_rate: fit.map(|f| f.0), fit_residual: fit.map(|f| f.1) }
        }
    };
    let mut result = json!({ "profile": profile_json(&profile) });
    if let Some(delta) = a.delta {
        let max_degree = g.max_degree();
        let regime = match &model {
            Model::Coloring(_) => Regime::Coloring { q: model.q(), max_degree },
            Model::Potts(p) => Regime::Potts { q: model.q(), beta: p.beta(), max_degree },
        };
        let c = decay::constants_report(regime, Some(delta))?;
        let constant = if a.kind == DecayKind::Tid { c.c_infl } else { c.c_sm };
        result["dominance"] = json!({ "constant": constant, "rate": 1.0 - delta, "max_ratio": profile.domination_ratio(constant, 1.0 - delta) });
    }
    Ok(Output::json(result).with_table(vec!["distance", "value", "mode"], profile_rows(&profile)))
}

fn constants(a: &ConstantsArgs) -> Result<Output, CliError> {
    let need_q = || a.q.ok_or_else(|| usage("--q is required for this regime"));
    let (regime, family) = match a.regime {
        RegimeArg::Coloring => {
            let q = need_q()?;
            (Regime::Coloring { q, max_degree: a.delta_max }, Some(Family::Coloring { q, delta: a.delta_max }))
        }
        RegimeArg::Potts => {
            let q = need_q()?;
            let beta = a.beta.ok_or_else(|| usage("--beta is required for the Potts regime"))?;
            (Regime::Potts { q, beta, max_degree: a.delta_max }, Some(Family::Potts { q, beta, delta: a.delta_max }))
        }
        RegimeArg::EpsDelta => (Regime::EpsDelta { eps: a.eps.ok_or_else(|| usage("--eps is required for this regime"))?, max_degree: a.delta_max }, None),
    };
    let mut delta_source = "given";
    let mut delta = a.delta.or(regime.proved_delta());
    if a.delta.is_none() && delta.is_some() {
        delta_source = "proved";
    }
    if delta.is_none() {
        let fam = family.expect("regimes without a proved rate have a family");
        let mode = if matches!(regime, Regime::Potts { .. }) { Mode::Weak } else { Mode::Strong };
        let r = certify_parallel(fam, mode, a.samples, a.seed)?;
        delta = Some(r.delta_hat);
        delta_source = "certifier";
    }
    let c = decay::constants_report(regime, delta)?;
    let mut result = json!({
        "regime": regime.name(),
        "q": c.q,
        "delta": c.delta,
        "delta_source": delta_source,
        "lower": c.bounds.lower,
        "upper": c.bounds.upper,
        "w_min": c.bounds.w_min,
        "w_max": c.bounds.w_max,
        "c_sm": c.c_sm,
        "c_si": c.c_si,
        "c_infl": c.c_infl,
        "root_factor": c.root_factor,
        "c_sm_root": c.c_sm_root,
        "c_infl_root": c.c_infl_root,
        "closed_forms": c.closed_forms.map(|(sm, infl)| json!({ "c_sm": sm, "c_infl": infl })),
        "notes": c.notes,
    });
    if a.search {
        let p = coupling::parameter_search(c.c_sm, c.c_infl, c.delta, a.delta_max)?;
        result["parameters"] = json!({ "radius": p.radius, "k": p.k, "girth": p.girth, "lhs": p.lhs, "target": p.target });
    }
    let rows = ["c_sm", "c_si", "c_infl", "root_factor", "delta"].iter().map(|k| vec![k.to_string(), result[*k].to_string()]).collect();
    Ok(Output::json(result).with_table(vec!["field", "value"], rows))
}

fn gen_graph(a: &GenGraphArgs) -> Result<Output, CliError> {
    let g = generate_girth_graph(a.n, a.max_degree, a.min_girth, a.seed)?;
    let gi = girth(&g);
    if a.text {
        return Ok(Output { result: Value::Null, table: None, lines: None, text: Some(format_graph(&g)) });
    }
    let result = json!({ "n": g.vertex_count(), "edges": g.edges(), "girth": gi, "max_degree": g.max_degree() });
    let rows = g.edges().iter().map(|(u, v)| vec![u.to_string(), v.to_string()]).collect();
    Ok(Output::json(result).with_table(vec!["u", "v"], rows))
}
