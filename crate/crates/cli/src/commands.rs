use std::collections::BTreeSet;
use std::path::Path;

use brwlab::genfun::{first_return_coeffs, lambda_s_from_series, phi_eval, PhiSeries};
use brwlab::kernels::{delta_set, truncate_with_cap, Family, RateKernel, Vertex};
use brwlab::montecarlo::{
    default_bracket_range, mix64, BracketPolicy, KernelSimulator, MCConfig, MonteCarloError, SimRoute,
    SurvivalReport, TargetSpec, TARGET_VERTEX_CAP,
};
use brwlab::phases::{
    classify_pair, inherited_survival_check, maximality_check, prop36_check, q0_equality_mc, tree_lambda_w_star,
    tree_phase_diagram, CheckOutcome, CriticalEstimate, Method, PhaseError,
};
use brwlab::report::{write_phase_diagram, write_phi_series, write_phi_table, write_survival};
use brwlab::spectral::{doubling_radii, lambda_s_truncation};
use brwlab::Interval;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::CliError;
use crate::runspec::{LambdaWMethod, Loaded};

/// Largest `abs_err` accepted in a phase-diagram row.
pub const PHASE_DIAGRAM_MAX_ERR: f64 = 1e-6;

/// Command result: the bytes to emit and the checks that failed.
pub struct Output {
    pub body: Vec<u8>,
    pub failures: Vec<String>,
}

fn mc_err(e: MonteCarloError) -> CliError {
    match e {
        MonteCarloError::InvalidConfig(_)
        | MonteCarloError::InvalidLambda(_)
        | MonteCarloError::InvalidRange(..)
        | MonteCarloError::UnknownVertex(_) => CliError::input(e),
        _ => CliError::compute(e),
    }
}

fn phase_err(e: PhaseError) -> CliError {
    match e {
        PhaseError::Contradiction(_) | PhaseError::Inconsistent { .. } => CliError::Assertion(vec![e.to_string()]),
        _ => CliError::compute(e),
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::compute(format!("writing CSV: {e}"))
}

fn json_body(v: &Value) -> Vec<u8> {
    let mut body = serde_json::to_vec_pretty(v).expect("JSON values serialize");
    body.push(b'\n');
    body
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}

fn check_name(c: CheckOutcome) -> Value {
    serde_json::to_value(c).expect("outcomes serialize")
}

/// Critical parameters of one kernel with the evidence behind them.
struct Params {
    estimate: CriticalEstimate,
    detail: Value,
    failures: Vec<String>,
}

fn export_series(series: &PhiSeries, loaded: &Loaded) -> Result<(), CliError> {
    let p = &loaded.spec.params;
    if let Some(path) = &p.series_csv {
        let mut buf = Vec::new();
        write_phi_series(&mut buf, series).map_err(csv_err)?;
        write_file(path, &buf)?;
    }
    if let Some(table) = &p.phi_table {
        let rows = table
            .lambdas
            .iter()
            .map(|&l| phi_eval(series, l).map(|v| (l, v)))
            .collect::<Result<Vec<_>, _>>()
            .map_err(CliError::compute)?;
        let mut buf = Vec::new();
        write_phi_table(&mut buf, &rows).map_err(csv_err)?;
        write_file(&table.csv, &buf)?;
    }
    Ok(())
}

fn params_for(kernel: &RateKernel, start: &Vertex, loaded: &Loaded, export: bool) -> Result<Params, CliError> {
    let p = &loaded.spec.params;
    let tol = loaded.spec.tol;
    let origin = kernel.origin();
    let mut failures = Vec::new();

    let mut phi_detail = Value::Null;
    let mut phi = None;
    if p.phi {
        let series = first_return_coeffs(kernel, &origin, p.order).map_err(CliError::compute)?;
        if export {
            export_series(&series, loaded)?;
        }
        match lambda_s_from_series(&series, tol) {
            Ok(i) => {
                phi = Some(i);
                phi_detail = json!({"order": p.order, "certified": series.is_certified(), "lambda_s": i});
            }
            Err(e) => phi_detail = json!({"order": p.order, "error": e.to_string()}),
        }
    }

    let mut trunc_detail = Value::Null;
    let mut trunc = None;
    if p.truncation {
        let radii = p.radii.clone().unwrap_or_else(|| doubling_radii(kernel, &origin, p.vertex_cap));
        if radii.is_empty() {
            trunc_detail = json!({"error": "no truncation radius fits within the vertex cap"});
        } else {
            let schedule = lambda_s_truncation(kernel, &origin, &radii, tol).map_err(CliError::compute)?;
            let last = schedule.final_estimate().expect("radii are nonempty");
            let extrapolated = schedule.extrapolated_limit();
            let interval = Interval::new(extrapolated.unwrap_or(last).min(last), last);
            trunc = Some(interval);
            let entries: Vec<Value> = schedule
                .entries
                .iter()
                .map(|e| {
                    json!({
                        "radius": e.radius,
                        "vertex_count": e.vertex_count.to_string(),
                        "spectral_radius": e.spectral_radius,
                        "lambda_s_estimate": e.lambda_s_estimate,
                        "method": e.method.name(),
                    })
                })
                .collect();
            trunc_detail = json!({"entries": entries, "extrapolated": extrapolated, "lambda_s": interval});
        }
    }

    // A truncated kernel is dominated by the full one, so its estimate sits above the root.
    if let (Some(f), Some(t)) = (phi, trunc) {
        if t.hi < f.lo - tol * f.lo.max(1.0) {
            failures.push(format!("truncation estimate {} lies below the series root {:?}", t.hi, f));
        }
    }
    let (lambda_s, s_method) = match (phi, trunc) {
        (Some(f), _) => (f, Method::PhiRoot),
        (None, Some(t)) => (t, Method::SpectralTruncation),
        (None, None) => {
            return Err(CliError::compute(format!(
                "no lambda_s estimate: series {phi_detail}, truncation {trunc_detail}"
            )))
        }
    };

    let (lambda_w, w_method, bracket_detail) = match p.lambda_w {
        LambdaWMethod::ClosedForm => match kernel.family() {
            Family::Tree { d, loop_rate } if !kernel.is_patched() => {
                (Interval::point(tree_lambda_w_star(*d, *loop_rate)), Method::ClosedForm, Value::Null)
            }
            _ => return Err(CliError::input("closed-form lambda_w needs an unpatched tree kernel")),
        },
        LambdaWMethod::McBracket => {
            let policy = BracketPolicy::from(p.policy);
            let mc = &loaded.spec.mc;
            let range = p.lambda_range.unwrap_or_else(|| default_bracket_range(kernel, lambda_s.hi));
            let sim = KernelSimulator::for_budget(kernel, start, mc, &policy);
            let bracket = sim.lambda_w_bracket(start, range, mc, p.rounds, &policy).map_err(mc_err)?;
            let detail = serde_json::to_value(&bracket).expect("brackets serialize");
            (bracket.interval, Method::McBracket, detail)
        }
    };

    let estimate = CriticalEstimate::new(lambda_w, w_method, lambda_s, s_method).map_err(phase_err)?;
    let prop36 = prop36_check(kernel.limsup_row_sum(), &estimate, tol);
    if prop36 == CheckOutcome::Fail {
        failures.push(format!(
            "lambda_s * limsup row sum <= 1 but lambda_w {:?} differs from lambda_s {:?}",
            estimate.lambda_w, estimate.lambda_s
        ));
    }
    let detail = json!({
        "estimate": estimate,
        "phi": phi_detail,
        "truncation": trunc_detail,
        "bracket": bracket_detail,
        "checks": {"equal_when_mean_bounded": check_name(prop36)},
    });
    Ok(Params { estimate, detail, failures })
}

pub fn params(loaded: &Loaded) -> Result<Output, CliError> {
    let kernel = loaded.kernel()?;
    let start = loaded.start(kernel)?;
    let p = params_for(kernel, &start, loaded, true)?;
    Ok(Output { body: json_body(&p.detail), failures: p.failures })
}

pub fn simulate(loaded: &Loaded) -> Result<Output, CliError> {
    let kernel = loaded.kernel()?;
    let start = loaded.start(kernel)?;
    let target = loaded.spec.target.clone().unwrap_or(TargetSpec::OriginBall(0));
    let mc = loaded.spec.mc;
    let sim = KernelSimulator::new(kernel, horizon_depth(kernel, &start, &mc));
    let reports = loaded
        .lambda_grid()?
        .into_iter()
        .map(|l| sim.estimate(l, &start, &target, &mc).map(|(r, _)| r))
        .collect::<Result<Vec<_>, _>>()
        .map_err(mc_err)?;
    let mut body = Vec::new();
    write_survival(&mut body, &reports).map_err(csv_err)?;
    Ok(Output { body, failures: Vec::new() })
}

fn horizon_depth(kernel: &RateKernel, start: &Vertex, mc: &MCConfig) -> u64 {
    let level = kernel.radial_quotient().and_then(|q| q.level_of(start)).unwrap_or(0);
    level + u64::from(mc.max_generations) + 1
}

pub fn phase_diagram(loaded: &Loaded) -> Result<Output, CliError> {
    let cfg = loaded
        .spec
        .phase_diagram
        .as_ref()
        .ok_or_else(|| CliError::input("run spec has no \"phase_diagram\" section"))?;
    let grid = cfg.grid()?;
    let rows = tree_phase_diagram(cfg.d, &grid, loaded.spec.tol).map_err(|e| match e {
        PhaseError::Kernel(k) => CliError::input(k),
        e => phase_err(e),
    })?;
    let failures = rows
        .iter()
        .filter(|r| r.abs_err.is_nan() || r.abs_err > PHASE_DIAGRAM_MAX_ERR)
        .map(|r| format!("k = {}: abs_err {} above {PHASE_DIAGRAM_MAX_ERR}", r.k_oo, r.abs_err))
        .collect();
    let mut body = Vec::new();
    write_phase_diagram(&mut body, &rows).map_err(csv_err)?;
    Ok(Output { body, failures })
}

/// The kernels, checked to be finite modifications of each other, with the
/// vertices whose rows differ.
fn kernel_pair(loaded: &Loaded) -> Result<(&RateKernel, &RateKernel, BTreeSet<Vertex>), CliError> {
    let (k, ks) = (loaded.kernel()?, loaded.kernel_star()?);
    let candidates = k.difference_candidates(ks).ok_or_else(|| {
        CliError::input(format!(
            "kernels are not in the same class representation ({} vs {})",
            describe(k),
            describe(ks)
        ))
    })?;
    Ok((k, ks, delta_set(k, ks, &candidates)))
}

fn describe(k: &RateKernel) -> String {
    match k.family() {
        Family::Tree { d, .. } => format!("tree d={d}"),
        f => f.name().to_string(),
    }
}

fn vertex_list(set: &BTreeSet<Vertex>) -> Value {
    serde_json::to_value(set).expect("vertices serialize")
}

fn default_target(delta: &BTreeSet<Vertex>, kernel: &RateKernel) -> TargetSpec {
    if delta.is_empty() {
        TargetSpec::Vertices(vec![kernel.origin()])
    } else {
        TargetSpec::Vertices(delta.iter().cloned().collect())
    }
}

fn star_config(mc: &MCConfig) -> MCConfig {
    MCConfig { seed: mix64(mc.seed, 1), ..*mc }
}

pub fn compare(loaded: &Loaded) -> Result<Output, CliError> {
    let (k, ks, delta) = kernel_pair(loaded)?;
    let tol = loaded.spec.tol;
    let start = loaded.start(k)?;
    let base = params_for(k, &start, loaded, false)?;
    let star = params_for(ks, &start, loaded, false)?;
    let mut failures: Vec<String> = base.failures.iter().chain(&star.failures).cloned().collect();

    let class = match classify_pair(&base.estimate, &star.estimate, tol) {
        Ok(c) => serde_json::to_value(c).expect("classes serialize"),
        Err(e @ PhaseError::Contradiction(_)) => {
            failures.push(e.to_string());
            json!({"Contradiction": e.to_string()})
        }
        Err(e) => return Err(phase_err(e)),
    };

    // Each kernel is a finite modification of the other.
    let mut maximality = serde_json::Map::new();
    for (name, b, m) in [("kernel", &base, &star), ("kernel_star", &star, &base)] {
        let v = if b.estimate.has_pure_global_phase(tol) {
            let r = maximality_check(&b.estimate, &[m.estimate], tol).map_err(phase_err)?;
            if r.outcome == CheckOutcome::Fail {
                failures.push(format!("{name} has a pure global phase but its lambda_w is not maximal"));
            }
            serde_json::to_value(r).expect("reports serialize")
        } else {
            check_name(CheckOutcome::NotApplicable)
        };
        maximality.insert(name.to_string(), v);
    }

    let inherited = match loaded.spec.lambda {
        None => Value::Null,
        Some(lambda) => {
            let target = loaded.spec.target.clone().unwrap_or_else(|| default_target(&delta, k));
            let mc = loaded.spec.mc;
            let run = |kernel: &RateKernel, cfg: &MCConfig| {
                KernelSimulator::new(kernel, horizon_depth(kernel, &start, cfg))
                    .estimate(lambda, &start, &target, cfg)
                    .map(|(r, _)| r)
                    .map_err(mc_err)
            };
            let r = run(k, &mc)?;
            let rs = run(ks, &star_config(&mc))?;
            let forward = inherited_survival_check(&r, &rs);
            let backward = inherited_survival_check(&rs, &r);
            for (name, c) in [("kernel", forward), ("kernel_star", backward)] {
                if c == CheckOutcome::Fail {
                    failures.push(format!("{name} survives locally but not strongly, yet the other kernel shows no global survival"));
                }
            }
            json!({
                "lambda": lambda,
                "target": target,
                "kernel": r,
                "kernel_star": rs,
                "from_kernel": check_name(forward),
                "from_kernel_star": check_name(backward),
            })
        }
    };

    let body = json!({
        "delta_set": vertex_list(&delta),
        "kernel": base.detail,
        "kernel_star": star.detail,
        "class": class,
        "maximality": maximality,
        "inherited_survival": inherited,
    });
    Ok(Output { body: json_body(&body), failures })
}

fn target_vertices(kernel: &RateKernel, target: &TargetSpec) -> Result<BTreeSet<Vertex>, CliError> {
    match target {
        TargetSpec::Vertices(vs) => Ok(vs.iter().cloned().collect()),
        TargetSpec::OriginBall(r) => {
            let radius = usize::try_from(*r).unwrap_or(usize::MAX);
            let ball = truncate_with_cap(kernel, &kernel.origin(), radius, TARGET_VERTEX_CAP).map_err(CliError::input)?;
            Ok(ball.vertices().iter().cloned().collect())
        }
    }
}

#[derive(Serialize)]
struct Q0Row {
    kernel: &'static str,
    lambda: f64,
    trials: u64,
    never_hit_freq: f64,
    never_hit_lo: f64,
    never_hit_hi: f64,
    undecided_count: u64,
    route: &'static str,
    overlap: &'static str,
}

pub fn q0_check(loaded: &Loaded) -> Result<Output, CliError> {
    let (k, ks, delta) = kernel_pair(loaded)?;
    let lambda = loaded.lambda()?;
    let start = loaded.start(k)?;
    let target = loaded.spec.target.clone().unwrap_or_else(|| default_target(&delta, k));
    let set = target_vertices(k, &target)?;
    if let Some(v) = delta.iter().find(|v| !set.contains(v)) {
        return Err(CliError::input(format!("the kernels differ at {v}, outside the target set")));
    }
    let mc = loaded.spec.mc;
    let run = |kernel: &RateKernel, cfg: &MCConfig| {
        KernelSimulator::new(kernel, horizon_depth(kernel, &start, cfg))
            .estimate(lambda, &start, &target, cfg)
            .map_err(mc_err)
    };
    let (r1, route1) = run(k, &mc)?;
    let (r2, route2) = run(ks, &star_config(&mc))?;
    let outcome = q0_equality_mc(&r1, &r2);
    let overlap = match outcome {
        CheckOutcome::Pass => "pass",
        CheckOutcome::Fail => "fail",
        CheckOutcome::NotApplicable => "not-applicable",
    };
    let row = |name: &'static str, r: &SurvivalReport, route: SimRoute| Q0Row {
        kernel: name,
        lambda,
        trials: r.trials,
        never_hit_freq: r.never_hit.frequency,
        never_hit_lo: r.never_hit.lo,
        never_hit_hi: r.never_hit.hi,
        undecided_count: r.undecided_count(),
        route: match route {
            SimRoute::Lumped => "lumped",
            SimRoute::Vertex => "vertex",
        },
        overlap,
    };
    let mut body = Vec::new();
    {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut body);
        w.serialize(row("kernel", &r1, route1)).map_err(csv_err)?;
        w.serialize(row("kernel_star", &r2, route2)).map_err(csv_err)?;
        w.flush().map_err(|e| CliError::compute(format!("writing CSV: {e}")))?;
    }
    let failures = if outcome == CheckOutcome::Fail {
        vec![format!(
            "never-hit intervals [{}, {}] and [{}, {}] do not overlap",
            r1.never_hit.lo, r1.never_hit.hi, r2.never_hit.lo, r2.never_hit.hi
        )]
    } else {
        Vec::new()
    };
    Ok(Output { body, failures })
}
