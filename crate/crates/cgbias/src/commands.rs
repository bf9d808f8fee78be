//! Command implementations. Each returns the text to print; errors carry the
//! process exit code (1 input, 2 non-convergence, 3 audit/verify failure).

use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use cgbias_core::costfun::{apply_bias, BiasSpec, CostModel};
use cgbias_core::exhibits::{
    gen_braess_adversarial, gen_braess_quadratic, gen_pigou, gen_risk_unbounded, gen_tightness,
};
use cgbias_core::flowsolve::{
    per_type_cost, social_cost, solve_equilibrium_multitype, solve_social_optimum, FlowState,
    Instance, SolveError, SolverConfig,
};
use cgbias_core::smoothbounds::{
    analytic_biased_smoothness, audit_instance, bpoa_upper_bound, classify_costs, fit_mu_hat,
    measured_bpoa, verify_biased_smoothness, CostClass, SmoothnessParams, CERT_TOL,
};

use crate::formats::{BiasDoc, CostDoc, InstanceDocument};

#[derive(Debug)]
pub enum CliError {
    /// Bad input: unparseable file, invalid parameters. Exit 1.
    Input(String),
    /// Solver hit the iteration cap; the message holds the partial report.
    /// Exit 2.
    NonConverged(String),
    /// An audit or verification check failed; the message holds the report.
    /// Exit 3.
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::NonConverged(_) => 2,
            CliError::Failed(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::NonConverged(m) | CliError::Failed(m) => m,
        }
    }
}

fn input_err(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

pub fn load_instance(path: &str) -> Result<Instance, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read `{path}`: {e}")))?;
    let doc = crate::formats::parse_document(&text).map_err(input_err)?;
    doc.to_instance().map_err(input_err)
}

pub fn parse_bias(text: &str) -> Result<BiasSpec, CliError> {
    let doc: BiasDoc = serde_json::from_str(text)
        .map_err(|e| CliError::Input(format!("bad bias descriptor: {e}")))?;
    Ok(doc.to_spec())
}

pub fn parse_cost(text: &str) -> Result<CostModel, CliError> {
    let doc: CostDoc = serde_json::from_str(text)
        .map_err(|e| CliError::Input(format!("bad cost descriptor: {e}")))?;
    Ok(doc.to_model())
}

/// Shared solver knobs.
pub fn solver_config(tol: f64, max_iters: usize, restarts: usize, seed: u64) -> SolverConfig {
    SolverConfig {
        tolerance: tol,
        max_iters,
        restarts,
        seed,
        ..SolverConfig::default()
    }
}

fn flow_report(
    inst: &Instance,
    flow: &FlowState,
    residual: f64,
    iterations: usize,
    converged: bool,
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "instance: {}", inst.name);
    let _ = writeln!(out, "edge loads:");
    for (i, e) in inst.net.edges().iter().enumerate() {
        let _ = writeln!(out, "  {} {}", e.id, flow.total[i]);
    }
    let _ = writeln!(out, "per-type costs:");
    for (i, t) in inst.types.iter().enumerate() {
        let c = per_type_cost(inst, flow, i).map(|v| v.to_string());
        let _ = writeln!(out, "  {} {}", t.name, c.unwrap_or_else(|_| "n/a".into()));
    }
    let sc = social_cost(inst, flow).map(|v| v.to_string());
    let _ = writeln!(out, "social cost: {}", sc.unwrap_or_else(|_| "n/a".into()));
    let _ = writeln!(out, "vi residual: {residual}");
    let _ = writeln!(out, "iterations: {iterations}");
    let _ = writeln!(out, "converged: {converged}");
    out
}

fn strip_biases(inst: &Instance) -> Instance {
    let mut unbiased = inst.clone();
    for t in unbiased.types.iter_mut() {
        t.bias = BiasSpec::Identity;
    }
    unbiased
}

/// `solve`: biased (default) or unbiased equilibrium of the instance.
pub fn cmd_solve(inst: &Instance, cfg: &SolverConfig, true_costs: bool) -> Result<String, CliError> {
    let work = if true_costs { strip_biases(inst) } else { inst.clone() };
    match solve_equilibrium_multitype(&work, cfg) {
        Ok((flow, cert)) => Ok(flow_report(
            inst,
            &flow,
            cert.vi_residual,
            cert.iterations,
            cert.converged,
        )),
        Err(SolveError::NotConverged { flow, cert }) => Err(CliError::NonConverged(flow_report(
            inst,
            &flow,
            cert.vi_residual,
            cert.iterations,
            false,
        ))),
        Err(e) => Err(input_err(e)),
    }
}

/// `opt`: social optimum under true costs.
pub fn cmd_opt(inst: &Instance, cfg: &SolverConfig) -> Result<String, CliError> {
    match solve_social_optimum(inst, cfg) {
        Ok((flow, sc)) => {
            let mut out = String::new();
            let _ = writeln!(out, "instance: {}", inst.name);
            let _ = writeln!(out, "edge loads:");
            for (i, e) in inst.net.edges().iter().enumerate() {
                let _ = writeln!(out, "  {} {}", e.id, flow.total[i]);
            }
            let _ = writeln!(out, "optimal social cost: {sc}");
            Ok(out)
        }
        Err(SolveError::NotConverged { flow, cert }) => Err(CliError::NonConverged(flow_report(
            inst,
            &flow,
            cert.vi_residual,
            cert.iterations,
            false,
        ))),
        Err(e) => Err(input_err(e)),
    }
}

/// Analytic bound for an instance, when its cost class and (uniform) bias
/// admit one. Returns the reason otherwise.
fn analytic_for_instance(inst: &Instance) -> Result<f64, String> {
    let Some(class) = classify_costs(inst) else {
        return Err("costs are not polynomial".into());
    };
    let mut biases = inst.types.iter().filter(|t| t.mass > 0.0).map(|t| &t.bias);
    let Some(first) = biases.next() else {
        return Err("no positive-mass types".into());
    };
    if !biases.all(|b| b == first) {
        return Err("types carry different biases".into());
    }
    let params =
        analytic_biased_smoothness(&class, first).map_err(|e| format!("no certificate: {e:?}"))?;
    bpoa_upper_bound(&params).map_err(|e| format!("unbounded: {e:?}"))
}

/// `bpoa`: measured ratio plus the analytic bound when derivable.
pub fn cmd_bpoa(inst: &Instance, cfg: &SolverConfig) -> Result<String, CliError> {
    let report = match measured_bpoa(inst, cfg) {
        Ok(r) => r,
        Err(SolveError::NotConverged { .. }) => {
            return Err(CliError::NonConverged(format!(
                "instance: {}\nsolver did not converge; no BPoA measurement",
                inst.name
            )))
        }
        Err(e) => return Err(input_err(e)),
    };
    let measured = report.measured_bpoa.expect("measured_bpoa always set on success");
    let mut out = String::new();
    let _ = writeln!(out, "instance: {}", inst.name);
    let _ = writeln!(out, "measured bpoa: {measured}");
    match analytic_for_instance(inst) {
        Ok(bound) => {
            let _ = writeln!(out, "analytic bound: {bound}");
            let _ = writeln!(out, "row: {bound},{measured},{}", bound - measured);
        }
        Err(why) => {
            let _ = writeln!(out, "analytic bound: unavailable ({why})");
            let _ = writeln!(out, "row: ,{measured},");
        }
    }
    Ok(out)
}

/// One sweep point: parameter value, analytic bound, measured BPoA on the
/// tight instance, and their difference.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub param: f64,
    pub analytic_bound: Option<f64>,
    pub measured_bpoa: Option<f64>,
    pub slack: Option<f64>,
}

fn opt_field(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn render_sweep(rows: &[SweepRow]) -> String {
    let mut out = String::from("param,analytic_bound,measured_bpoa,slack\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.param,
            opt_field(r.analytic_bound),
            opt_field(r.measured_bpoa),
            opt_field(r.slack)
        );
    }
    out
}

fn bias_for(family: &str, param: f64) -> Result<BiasSpec, CliError> {
    match family {
        "tax" => Ok(BiasSpec::Tax { beta: param }),
        "pessimism" => Ok(BiasSpec::Pessimism { r: param }),
        other => Err(CliError::Input(format!(
            "unsupported bias family `{other}` (supported: tax, pessimism)"
        ))),
    }
}

fn sweep_point(class: &CostClass, family: &str, param: f64, cfg: &SolverConfig) -> SweepRow {
    let bias = match bias_for(family, param) {
        Ok(b) => b,
        Err(_) => {
            return SweepRow { param, analytic_bound: None, measured_bpoa: None, slack: None }
        }
    };
    let analytic = analytic_biased_smoothness(class, &bias)
        .ok()
        .and_then(|p| bpoa_upper_bound(&p).ok());
    let measured = gen_tightness(class, &bias)
        .ok()
        .and_then(|inst| measured_bpoa(&inst, cfg).ok())
        .and_then(|r| r.measured_bpoa);
    SweepRow {
        param,
        analytic_bound: analytic,
        measured_bpoa: measured,
        slack: match (analytic, measured) {
            (Some(a), Some(m)) => Some(a - m),
            _ => None,
        },
    }
}

/// Worker count for sweeps: CGBIAS_THREADS caps it, 0 or unset means one
/// worker per available core.
pub fn sweep_threads(n_jobs: usize) -> usize {
    let auto = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let cap = std::env::var("CGBIAS_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(auto);
    cap.max(1).min(n_jobs.max(1))
}

/// `sweep`: rows for param in from..=to stepping by step; rows are computed
/// concurrently but emitted in parameter order.
pub fn cmd_sweep(
    class: &CostClass,
    family: &str,
    from: f64,
    to: f64,
    step: f64,
    cfg: &SolverConfig,
) -> Result<String, CliError> {
    let _ = bias_for(family, 1.0)?;
    if !(step > 0.0) || !step.is_finite() {
        return Err(CliError::Input("step must be positive".into()));
    }
    if to < from {
        return Err(CliError::Input("sweep range is empty (to < from)".into()));
    }
    let n = ((to - from) / step + 1.5).floor() as usize;
    let params: Vec<f64> = (0..n).map(|i| from + step * i as f64).filter(|&p| p <= to + 1e-12).collect();
    Ok(render_sweep(&sweep_rows(class, family, &params, cfg)))
}

pub fn sweep_rows(
    class: &CostClass,
    family: &str,
    params: &[f64],
    cfg: &SolverConfig,
) -> Vec<SweepRow> {
    let workers = sweep_threads(params.len());
    let results: Mutex<Vec<Option<SweepRow>>> = Mutex::new(vec![None; params.len()]);
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= params.len() {
                    break;
                }
                let row = sweep_point(class, family, params[i], cfg);
                results.lock().unwrap()[i] = Some(row);
            });
        }
    });
    results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every sweep row is computed"))
        .collect()
}

/// Representative cost for a class: the pure monomial, which is extremal for
/// the smoothness constants within the class.
pub fn class_cost(class: &CostClass) -> Result<CostModel, CliError> {
    let d = match class {
        CostClass::Affine => 1,
        CostClass::Quadratic => 2,
        CostClass::Poly { d } => *d,
        _ => return Err(CliError::Input("class has no representative cost".into())),
    };
    Ok(CostModel::monomial(1.0, d))
}

/// `smooth fit`: numerically fit mu-hat at fixed lambda.
pub fn cmd_smooth_fit(
    cost: &CostModel,
    bias: &BiasSpec,
    lambda: f64,
    domain: (f64, f64),
    grid: usize,
) -> Result<String, CliError> {
    let bc = apply_bias(cost, bias).map_err(input_err)?;
    let p = fit_mu_hat(cost, &bc, lambda, domain, grid)
        .map_err(|e| CliError::Input(format!("fit failed: {e:?}")))?;
    let mut out = String::new();
    let _ = writeln!(out, "lambda: {}", p.lambda);
    let _ = writeln!(out, "mu_hat: {}", p.mu);
    let _ = writeln!(out, "domain: [{}, {}]", p.domain.0, p.domain.1);
    match bpoa_upper_bound(&p) {
        Ok(b) => {
            let _ = writeln!(out, "bpoa bound: {b}");
        }
        Err(_) => {
            let _ = writeln!(out, "bpoa bound: unbounded");
        }
    }
    Ok(out)
}

/// `smooth verify`: certify a (lambda, mu) pair on a grid; FAIL exits 3 with
/// the worst witness.
pub fn cmd_smooth_verify(
    cost: &CostModel,
    bias: &BiasSpec,
    lambda: f64,
    mu: f64,
    domain: (f64, f64),
    grid: usize,
) -> Result<String, CliError> {
    let bc = apply_bias(cost, bias).map_err(input_err)?;
    let p = SmoothnessParams { domain, ..SmoothnessParams::analytic(lambda, mu, "cli") };
    let (violation, (x, xp)) = verify_biased_smoothness(cost, &bc, &p, grid).map_err(input_err)?;
    let mut out = String::new();
    let _ = writeln!(out, "lambda: {lambda}");
    let _ = writeln!(out, "mu: {mu}");
    let _ = writeln!(out, "max violation: {violation}");
    let _ = writeln!(out, "worst point: ({x}, {xp})");
    if violation <= CERT_TOL {
        let _ = writeln!(out, "verdict: PASS");
        Ok(out)
    } else {
        let _ = writeln!(out, "verdict: FAIL");
        Err(CliError::Failed(out))
    }
}

/// `audit`: run every applicable check; exit 3 if any fails.
pub fn cmd_audit(inst: &Instance, cfg: &SolverConfig) -> Result<String, CliError> {
    let report = match audit_instance(inst, cfg) {
        Ok(r) => r,
        Err(SolveError::NotConverged { .. }) => {
            return Err(CliError::NonConverged(format!(
                "instance: {}\nsolver did not converge; audit aborted",
                inst.name
            )))
        }
        Err(e) => return Err(input_err(e)),
    };
    let mut out = String::new();
    let _ = writeln!(out, "instance: {}", inst.name);
    for c in &report.checks {
        let slack = c.slack.map(|s| format!(" slack {s}")).unwrap_or_default();
        let _ = writeln!(out, "{:7} {}{} ({})", c.status.to_string(), c.name, slack, c.detail);
    }
    if report.failed() {
        Err(CliError::Failed(out))
    } else {
        Ok(out)
    }
}

/// `generate`: build an exhibit and emit its instance document.
pub enum GenerateSpec {
    Pigou { a: f64, d: u32, bias: BiasSpec, mass: f64 },
    Braess { bias: BiasSpec },
    Adversarial { eps: f64, m_exp: u32 },
    Risk { eps: f64, m: f64 },
    Tightness { class: CostClass, bias: BiasSpec },
}

pub fn cmd_generate(spec: &GenerateSpec) -> Result<String, CliError> {
    let inst = match spec {
        GenerateSpec::Pigou { a, d, bias, mass } => {
            gen_pigou(*a, *d, bias.clone(), *mass).map_err(input_err)?
        }
        GenerateSpec::Braess { bias } => gen_braess_quadratic(bias.clone()),
        GenerateSpec::Adversarial { eps, m_exp } => {
            gen_braess_adversarial(*eps, *m_exp).map_err(input_err)?
        }
        GenerateSpec::Risk { eps, m } => gen_risk_unbounded(*eps, *m).map_err(input_err)?,
        GenerateSpec::Tightness { class, bias } => {
            gen_tightness(class, bias).map_err(input_err)?
        }
    };
    Ok(crate::formats::render_document(&InstanceDocument::from_instance(&inst)))
}
