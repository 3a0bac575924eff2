//! Subcommand implementations. Each `resolve_*` fills in defaults and
//! validates; each `run_*` takes a resolved block and produces the outputs.

use crate::config::{config_error, required, *};
use crate::output::{num, Csv};
use anyhow::Result;
use arboreal::exact;
use arboreal::frd::{self, Backend};
use arboreal::freefield::{self, ZdGreen};
use arboreal::grassmann::dictionary_check;
use arboreal::lattice::{Graph, Torus};
use arboreal::mcmc::{self, Budget, ChainConfig, Observable};
use arboreal::rgflow::{self, BulkCouplings, ObservableCase, ObservableCouplings, J_INFINITE};
use serde_json::json;

/// What a subcommand produced.
pub struct Outcome {
    pub csv: String,
    pub report: Option<serde_json::Value>,
    /// Set when an invariant check failed; outputs are still written.
    pub failure: Option<String>,
}

impl Outcome {
    fn csv(csv: Csv) -> Self {
        Outcome { csv: csv.into_string(), report: None, failure: None }
    }
}

/// Map library errors on user input to configuration errors.
fn input<T>(r: arboreal::Result<T>) -> Result<T> {
    use arboreal::Error as E;
    r.map_err(|e| match e {
        E::InvalidTorus(_) | E::InvalidGraph(_) | E::Parse { .. } | E::InvalidArgument(_) | E::TooLarge(_) => {
            ConfigError(e.to_string()).into()
        }
        other => other.into(),
    })
}

fn check_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        config_error(format!("'{name}' must be finite"))
    }
}

fn check_seed(seed: u64) -> Result<()> {
    // the config file stores integers as i64
    if seed > i64::MAX as u64 {
        return config_error("seed must be below 2^63");
    }
    Ok(())
}

fn parse_backend(name: &str, tolerance: f64) -> Result<Backend> {
    match name {
        "polynomial" => Ok(Backend::Polynomial),
        "bump" => Ok(Backend::Bump { tolerance }),
        other => config_error(format!("unknown backend '{other}' (polynomial, bump)")),
    }
}

/// `builtin:NAME`, `file:PATH` or `torus:D,SIDE`, with uniform weights.
fn load_graph(spec: &str, beta: f64, h: f64) -> Result<Graph> {
    let (kind, rest) = spec.split_once(':').unwrap_or(("builtin", spec));
    let g = match kind {
        "builtin" => input(Graph::builtin(rest))?.reweighted(beta, h),
        "file" => {
            let text = std::fs::read_to_string(rest)?;
            input(Graph::parse_edge_list(&text))?.reweighted(beta, h)
        }
        "torus" => {
            let parts: Vec<usize> = rest.split(',').map(|s| s.trim().parse()).collect::<std::result::Result<_, _>>().map_err(|_| ConfigError(format!("bad torus spec '{rest}'")))?;
            let [d, side] = parts[..] else {
                return config_error(format!("torus spec needs D,SIDE, got '{rest}'"));
            };
            input(Torus::with_side(d, side))?.graph(beta, h)
        }
        other => return config_error(format!("unknown graph kind '{other}'")),
    };
    Ok(g)
}

fn offset_header(d: usize) -> Vec<String> {
    (0..d).map(|i| format!("x{i}")).collect()
}

fn offset_cells(t: &Torus, x: usize) -> Vec<String> {
    t.displacement(0, x).iter().map(|c| c.to_string()).collect()
}

// ---- exact-check / ward-check ---------------------------------------------

pub fn resolve_graph(p: GraphParams, ward: bool) -> Result<GraphParams> {
    let graph = required(&p.graph, "graph")?;
    let beta = p.beta.unwrap_or(1.0);
    let h = p.h.unwrap_or(0.0);
    check_finite("beta", beta)?;
    check_finite("h", h)?;
    if beta < 0.0 || h < 0.0 {
        return config_error("beta and h must be non-negative");
    }
    let tol = if ward { Some(p.tol.unwrap_or(1e-12)) } else { None };
    if !ward && p.tol.is_some() {
        return config_error("'tol' applies to ward-check only");
    }
    Ok(GraphParams { graph: Some(graph), beta: Some(beta), h: Some(h), tol })
}

pub fn run_exact_check(p: &GraphParams) -> Result<Outcome> {
    let g = load_graph(p.graph.as_ref().unwrap(), p.beta.unwrap(), p.h.unwrap())?;
    let ex = input(exact::exact_summary(&g))?;
    let n = g.vertex_count();
    let mut csv = Csv::new(&["observable", "x", "y", "value"]);
    let blank = String::new;
    csv.row(&["partition_function".into(), blank(), blank(), num(ex.z)]);
    csv.row(&["forests".into(), blank(), blank(), ex.forests.to_string()]);
    for x in 0..n {
        csv.row(&["theta".into(), x.to_string(), blank(), num(ex.theta(x))]);
        csv.row(&["mean_tree_size".into(), x.to_string(), blank(), num(ex.mean_tree_size[x])]);
        csv.row(&["ghost_edge".into(), x.to_string(), blank(), num(ex.ghost_edge[x])]);
    }
    type Pair = fn(&exact::ExactSummary, usize, usize) -> f64;
    let pairs: [(&str, Pair); 5] = [
        ("connection", |e, x, y| e.conn(x, y)),
        ("tau", |e, x, y| e.tau(x, y)),
        ("sigma", |e, x, y| e.sigma(x, y)),
        ("both_rooted_apart", |e, x, y| e.both_rooted_apart(x, y)),
        ("ghost_edge_pair", |e, x, y| e.ghost_edge_pair(x, y)),
    ];
    for (name, f) in pairs {
        for x in 0..n {
            for y in 0..n {
                csv.row(&[name.into(), x.to_string(), y.to_string(), num(f(&ex, x, y))]);
            }
        }
    }
    Ok(Outcome::csv(csv))
}

pub fn run_ward_check(p: &GraphParams) -> Result<Outcome> {
    let g = load_graph(p.graph.as_ref().unwrap(), p.beta.unwrap(), p.h.unwrap())?;
    let r = input(dictionary_check(&g))?;
    let tol = p.tol.unwrap();
    let mut csv = Csv::new(&["identity", "discrepancy", "pass"]);
    for (name, v) in r.rows() {
        csv.row(&[name.into(), num(v), (v <= tol).to_string()]);
    }
    let max = r.max();
    let report = json!({ "max_discrepancy": max, "tolerance": tol, "pass": max <= tol });
    let failure = (max > tol).then(|| format!("largest discrepancy {max:e} exceeds {tol:e}"));
    Ok(Outcome { csv: csv.into_string(), report: Some(report), failure })
}

// ---- sample ---------------------------------------------------------------

pub fn resolve_sample(p: SampleParams) -> Result<SampleParams> {
    if p.graph.is_some() == p.torus.is_some() {
        return config_error("give exactly one of 'graph' and 'torus'");
    }
    if let Some(t) = &p.torus {
        if t.len() != 3 {
            return config_error("'torus' needs three integers D L N");
        }
    }
    let beta = required(&p.beta, "beta")?;
    let h = p.h.unwrap_or(0.0);
    check_finite("beta", beta)?;
    check_finite("h", h)?;
    let seed = p.seed.unwrap_or(1);
    check_seed(seed)?;
    let sweeps = p.sweeps.unwrap_or(10_000);
    let observables = p.observables.unwrap_or_else(|| Observable::ALL.iter().map(|o| o.name().to_string()).collect());
    for o in &observables {
        input(Observable::parse(o))?;
    }
    let targets = match p.targets {
        Some(t) => t,
        None => match &p.torus {
            Some(t) => {
                let torus = input(Torus::new(t[0], t[1], t[2]))?;
                vec![torus.step(0, 0, true)]
            }
            None => {
                let g = load_graph(p.graph.as_ref().unwrap(), 1.0, 0.0)?;
                (0..g.vertex_count()).collect()
            }
        },
    };
    Ok(SampleParams {
        beta: Some(beta),
        h: Some(h),
        seed: Some(seed),
        sweeps: Some(sweeps),
        burnin: Some(p.burnin.unwrap_or(sweeps / 10)),
        stride: Some(p.stride.unwrap_or(1)),
        batches: Some(p.batches.unwrap_or(32)),
        chains: Some(p.chains.unwrap_or(1)),
        observables: Some(observables),
        targets: Some(targets),
        ..p
    })
}

pub fn run_sample(p: &SampleParams) -> Result<Outcome> {
    let (beta, h, seed) = (p.beta.unwrap(), p.h.unwrap(), p.seed.unwrap());
    let sweeps = p.sweeps.unwrap();
    let mut cfg = match (&p.graph, &p.torus) {
        (Some(g), None) => ChainConfig::new(load_graph(g, 1.0, 0.0)?, beta, h, seed, sweeps),
        (None, Some(t)) => ChainConfig::torus(&input(Torus::new(t[0], t[1], t[2]))?, beta, h, seed, sweeps),
        _ => unreachable!("resolved"),
    };
    cfg.burnin = p.burnin.unwrap();
    cfg.stride = p.stride.unwrap();
    cfg.batches = p.batches.unwrap();
    cfg.targets = p.targets.clone().unwrap();
    cfg.observables = p.observables.as_ref().unwrap().iter().map(|o| Observable::parse(o)).collect::<arboreal::Result<_>>()?;
    input(cfg.validate())?;
    let est = input(mcmc::run_chains(&cfg, p.chains.unwrap()))?;
    let mut csv = Csv::new(&["observable", "argument", "estimate", "stderr", "batches", "seed"]);
    for e in est.estimates() {
        csv.row(&[
            e.observable.name().into(),
            e.argument.map(|a| a.to_string()).unwrap_or_default(),
            num(e.estimate),
            num(e.stderr),
            e.batches.to_string(),
            seed.to_string(),
        ]);
    }
    let report = json!({
        "proposals": est.proposals,
        "accepted": est.accepted,
        "acceptance_rate": est.acceptance_rate(),
        "samples": est.samples(),
        "tree_size_histogram": est.histogram,
    });
    Ok(Outcome { csv: csv.into_string(), report: Some(report), failure: None })
}

// ---- frd ------------------------------------------------------------------

fn torus_dln(d: &Option<usize>, l: &Option<usize>, n: &Option<usize>) -> Result<Torus> {
    input(Torus::new(required(d, "d")?, required(l, "L")?, required(n, "N")?))
}

pub fn resolve_frd(p: FrdParams) -> Result<FrdParams> {
    torus_dln(&p.d, &p.l, &p.n)?;
    let m2 = required(&p.m2, "m2")?;
    check_finite("m2", m2)?;
    let backend = p.backend.unwrap_or_else(|| "polynomial".into());
    let tolerance = p.tolerance.unwrap_or(1e-10);
    parse_backend(&backend, tolerance)?;
    Ok(FrdParams { backend: Some(backend), tolerance: Some(tolerance), ..p })
}

pub fn run_frd(p: &FrdParams) -> Result<Outcome> {
    let torus = torus_dln(&p.d, &p.l, &p.n)?;
    let backend = parse_backend(p.backend.as_ref().unwrap(), p.tolerance.unwrap())?;
    let m2 = p.m2.unwrap();
    let dec = input(frd::decompose(&torus, m2, backend))?;
    let mut header = vec!["j".to_string()];
    header.extend(offset_header(torus.dim()));
    header.push("value".into());
    let mut csv = Csv::new(&header.iter().map(|s| s.as_str()).collect::<Vec<_>>());
    for k in dec.kernels() {
        for x in 0..torus.volume() {
            let mut cells = vec![k.j.to_string()];
            cells.extend(offset_cells(&torus, x));
            cells.push(num(k.values[x]));
            csv.row(&cells);
        }
    }
    let r = &dec.report;
    let range_tol = match backend {
        Backend::Polynomial => 1e-13,
        Backend::Bump { tolerance } => tolerance,
    };
    let checks = [
        ("reconstruction", r.reconstruction, r.reconstruction <= 1e-10),
        ("range", r.max_range_violation(), r.max_range_violation() <= range_tol),
        ("positivity", r.min_eigenvalue(), r.min_eigenvalue() >= -1e-10),
        ("t_n_bounds", r.t_n.unwrap_or(f64::NAN), r.t_n_in_bounds(m2)),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !c.2).map(|c| c.0).collect();
    let report = json!({
        "invariants": checks.iter().map(|(n, v, ok)| json!({"name": n, "value": v, "pass": ok})).collect::<Vec<_>>(),
        "contract": r,
        "zero_mode_rest": dec.zero_mode_rest(),
        "wick": dec.kernels().iter().map(|k| {
            let (c0, lap) = frd::laplacian_at_zero(&torus, k);
            json!({"j": k.j, "c0": c0, "laplacian": lap})
        }).collect::<Vec<_>>(),
    });
    let failure = (!failed.is_empty()).then(|| format!("contract violated: {}", failed.join(", ")));
    Ok(Outcome { csv: csv.into_string(), report: Some(report), failure })
}

// ---- flow -----------------------------------------------------------------

pub fn resolve_flow(p: FlowParams) -> Result<FlowParams> {
    let torus = torus_dln(&p.d, &p.l, &p.n)?;
    let m2 = required(&p.m2, "m2")?;
    check_finite("m2", m2)?;
    let b0 = p.b0.unwrap_or(0.0);
    check_finite("b0", b0)?;
    let case = p.case.unwrap_or(1);
    if !(1..=2).contains(&case) {
        return config_error("'case' must be 1 or 2");
    }
    let a = p.a.unwrap_or_else(|| vec![0; torus.dim()]);
    let b = required(&p.b, "b")?;
    if a.len() != torus.dim() || b.len() != torus.dim() {
        return config_error(format!("points need {} coordinates", torus.dim()));
    }
    let backend = p.backend.unwrap_or_else(|| "polynomial".into());
    parse_backend(&backend, 1e-10)?;
    Ok(FlowParams { b0: Some(b0), case: Some(case), a: Some(a), b: Some(b), backend: Some(backend), ..p })
}

pub fn run_flow(p: &FlowParams) -> Result<Outcome> {
    let torus = torus_dln(&p.d, &p.l, &p.n)?;
    let m2 = p.m2.unwrap();
    let dec = input(frd::decompose(&torus, m2, parse_backend(p.backend.as_ref().unwrap(), 1e-10)?))?;
    let a = torus.index(p.a.as_ref().unwrap());
    let b = torus.index(p.b.as_ref().unwrap());
    let case = if p.case == Some(1) { ObservableCase::One } else { ObservableCase::Two };
    let bulk0 = BulkCouplings { b: p.b0.unwrap(), ..Default::default() };
    let obs0 = ObservableCouplings::initial(case, 1.0);
    let res = input(rgflow::run_flow(&dec, bulk0, obs0, a, b))?;

    let mut csv = Csv::new(&[
        "j", "z", "y", "a", "b", "u", "z_hat", "y_hat", "a_hat", "b_hat", "lambda_a", "lambda_b", "gamma_a",
        "gamma_b", "q", "eta", "r", "c_ab_next", "c_00_next",
    ]);
    let mut push = |j: usize, row: &rgflow::FlowRow, o: &ObservableCouplings| {
        let (cab, c00) = row.next_kernel.map_or((String::new(), String::new()), |k| (num(k.c_ab), num(k.c_00)));
        let (bk, r) = (&row.bulk, &row.rescaled);
        csv.row(&[
            j.to_string(),
            num(bk.z),
            num(bk.y),
            num(bk.a),
            num(bk.b),
            num(bk.u),
            num(r.z),
            num(r.y),
            num(r.a),
            num(r.b),
            num(o.lambda_a),
            num(o.lambda_b),
            num(o.gamma_a),
            num(o.gamma_b),
            num(o.q),
            num(o.eta),
            num(o.r),
            cab,
            c00,
        ]);
    };
    for row in &res.rows {
        push(row.j, row, &row.observable);
    }
    let last = res.rows.last().expect("at least one row");
    if let Some(o1) = &res.observable_n1 {
        push(last.j + 1, last, o1);
    }

    let mut report = json!({
        "coalescence_scale": (res.coalescence_scale != J_INFINITE).then_some(res.coalescence_scale),
        "t_n": dec.t_n(),
        "zero_mode": res.zero_mode,
        "zero_mode_observables": res.zero_mode_observables,
        "correlators_n1": res.correlators_n1,
        "correlators_nn": res.correlators_nn,
    });
    if m2 > 0.0 {
        let g = input(freefield::green(&torus, m2))?.at(a, b);
        let expected = if case == ObservableCase::One { g } else { -g * g };
        let obj = report.as_object_mut().unwrap();
        obj.insert("green_ab".into(), json!(g));
        obj.insert("expected_q".into(), json!(expected));
        if let Some(o1) = &res.observable_n1 {
            obj.insert("final_q_error".into(), json!((o1.q - expected).abs()));
        }
        if let Some(zm) = &res.zero_mode {
            obj.insert("susceptibility".into(), json!(input(rgflow::susceptibility(zm.a_tilde, zm.u_tilde, m2))?));
        }
        if p.b0.unwrap() > 0.0 {
            let (beta, h) = input(rgflow::beta_h_from_couplings(m2, 0.0, 0.0, p.b0.unwrap()))?;
            obj.insert("beta".into(), json!(beta));
            obj.insert("h".into(), json!(h));
        }
    }
    Ok(Outcome { csv: csv.into_string(), report: Some(report), failure: None })
}

// ---- green ----------------------------------------------------------------

pub fn resolve_green(p: GreenParams) -> Result<GreenParams> {
    let d = required(&p.d, "d")?;
    if p.zd == Some(true) {
        if p.m2.is_some() || p.side.is_some() {
            return config_error("'zd' takes neither 'm2' nor 'side'");
        }
        return Ok(GreenParams { zd: Some(true), rmax: Some(p.rmax.unwrap_or(4)), ..p });
    }
    if p.rmax.is_some() {
        return config_error("'rmax' applies with 'zd' only");
    }
    input(Torus::with_side(d, required(&p.side, "side")?))?;
    let m2 = required(&p.m2, "m2")?;
    check_finite("m2", m2)?;
    Ok(GreenParams { zd: Some(false), ..p })
}

pub fn run_green(p: &GreenParams) -> Result<Outcome> {
    let d = p.d.unwrap();
    let mut header = offset_header(d);
    if p.zd == Some(true) {
        let z = input(ZdGreen::compute(d, &ZdGreen::default_sides(d)))?;
        let rmax = p.rmax.unwrap() as i64;
        header.extend(["value".into(), "stability".into()]);
        let mut csv = Csv::new(&header.iter().map(|s| s.as_str()).collect::<Vec<_>>());
        let side = 2 * rmax + 1;
        for i in 0..side.pow(d as u32) {
            let x: Vec<i64> = (0..d).map(|k| (i / side.pow(k as u32)) % side - rmax).collect();
            let mut cells: Vec<String> = x.iter().map(|c| c.to_string()).collect();
            cells.extend([num(z.value(&x)), num(z.stability(&x))]);
            csv.row(&cells);
        }
        let report = json!({ "sides": z.sides });
        return Ok(Outcome { csv: csv.into_string(), report: Some(report), failure: None });
    }
    let torus = input(Torus::with_side(d, p.side.unwrap()))?;
    let g = input(freefield::green(&torus, p.m2.unwrap()))?;
    header.push("value".into());
    let mut csv = Csv::new(&header.iter().map(|s| s.as_str()).collect::<Vec<_>>());
    for x in 0..torus.volume() {
        let mut cells = offset_cells(&torus, x);
        cells.push(num(g.value(x)));
        csv.row(&cells);
    }
    let report = json!({ "operator_residual": g.operator_residual(), "sum": g.sum() });
    Ok(Outcome { csv: csv.into_string(), report: Some(report), failure: None })
}

// ---- theta-scan / decay-fit -----------------------------------------------

fn budget(seed: Option<u64>, sweeps: Option<usize>, burnin: Option<usize>, batches: Option<usize>) -> Result<Budget> {
    let seed = seed.unwrap_or(1);
    check_seed(seed)?;
    let mut b = Budget::new(sweeps.unwrap_or(10_000), seed);
    b.burnin = burnin.unwrap_or(b.burnin);
    b.batches = batches.unwrap_or(b.batches);
    Ok(b)
}

pub fn resolve_theta_scan(p: ThetaScanParams) -> Result<ThetaScanParams> {
    let d = p.d.unwrap_or(3);
    input(Torus::with_side(d, required(&p.side, "side")?))?;
    let betas = required(&p.betas, "betas")?;
    let h = required(&p.h, "h")?;
    check_finite("h", h)?;
    let b = budget(p.seed, p.sweeps, p.burnin, p.batches)?;
    Ok(ThetaScanParams {
        d: Some(d),
        betas: Some(betas),
        seed: Some(b.seed),
        sweeps: Some(b.sweeps),
        burnin: Some(b.burnin),
        batches: Some(b.batches),
        ..p
    })
}

pub fn run_theta_scan(p: &ThetaScanParams) -> Result<Outcome> {
    let b = budget(p.seed, p.sweeps, p.burnin, p.batches)?;
    let rows = input(mcmc::theta_scan(p.d.unwrap(), p.side.unwrap(), p.betas.as_ref().unwrap(), p.h.unwrap(), b))?;
    let mut csv = Csv::new(&["beta", "theta", "stderr", "acceptance"]);
    for r in rows {
        csv.row(&[num(r.beta), num(r.theta), num(r.stderr), num(r.acceptance)]);
    }
    Ok(Outcome::csv(csv))
}

pub fn resolve_decay_fit(p: DecayFitParams) -> Result<DecayFitParams> {
    let d = required(&p.d, "d")?;
    let side = required(&p.side, "side")?;
    input(Torus::with_side(d, side))?;
    for (n, v) in [("beta", &p.beta), ("h", &p.h)] {
        check_finite(n, required(v, n)?)?;
    }
    let b = budget(p.seed, p.sweeps, p.burnin, p.batches)?;
    Ok(DecayFitParams {
        rmin: Some(p.rmin.unwrap_or(1)),
        rmax: Some(p.rmax.unwrap_or(side / 2)),
        seed: Some(b.seed),
        sweeps: Some(b.sweeps),
        burnin: Some(b.burnin),
        batches: Some(b.batches),
        ..p
    })
}

pub fn run_decay_fit(p: &DecayFitParams) -> Result<Outcome> {
    let b = budget(p.seed, p.sweeps, p.burnin, p.batches)?;
    let range = p.rmin.unwrap()..=p.rmax.unwrap();
    let fit = mcmc::decay_fit(p.d.unwrap(), p.side.unwrap(), p.beta.unwrap(), p.h.unwrap(), range, b);
    let fit = match fit {
        Err(arboreal::Error::InsufficientSignal(m)) => {
            let csv = Csv::new(&["r", "estimate", "stderr", "used"]);
            return Ok(Outcome { csv: csv.into_string(), report: None, failure: Some(format!("insufficient signal: {m}")) });
        }
        other => input(other)?,
    };
    let mut csv = Csv::new(&["r", "estimate", "stderr", "used"]);
    for &(r, e, s, used) in &fit.points {
        csv.row(&[r.to_string(), num(e), num(s), used.to_string()]);
    }
    let report = json!({ "slope": fit.slope, "intercept": fit.intercept, "r2": fit.r2 });
    Ok(Outcome { csv: csv.into_string(), report: Some(report), failure: None })
}
