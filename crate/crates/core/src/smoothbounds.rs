//! Smoothness certificates and price-of-anarchy bounds.
//!
//! A cost `c` with perceived form `hat c` is (lambda, mu)-biased-smooth when
//! `c(x)x + hat c(x)(x' - x) <= lambda c(x')x' + mu c(x)x` for all loads
//! `x, x' >= 0`; the equilibrium-vs-optimum ratio is then at most
//! `lambda / (1 - mu)`. This module evaluates the closed-form certificates
//! for the standard cost classes, certifies or fits parameters numerically
//! on a grid with local refinement, and audits solved instances against the
//! per-type and diverse-population bounds.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use libm::pow;

use crate::costfun::{
    apply_bias_for_edge, marginal, observed_kappa, BiasSpec, BiasedCost, CostError, CostModel,
};
use crate::flowsolve::{
    derive_homogeneous, per_type_cost, social_cost_unchecked, solve_equilibrium_multitype,
    solve_social_optimum, FlowState, Instance, SolveError, SolverConfig,
};

/// Default certification box for load arguments.
pub const DEFAULT_DOMAIN: (f64, f64) = (0.0, 10.0);

/// Numerical slack allowed when confirming a certificate.
pub const CERT_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub enum Provenance {
    /// Closed-form certificate; `also` lists coarser certificates that apply
    /// but were superseded by a sharper one.
    Analytic { prop: String, also: Vec<String> },
    Fitted { grid: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmoothnessParams {
    pub lambda: f64,
    pub mu: f64,
    /// Load interval on which the certificate was checked or fitted.
    pub domain: (f64, f64),
    pub provenance: Provenance,
}

impl SmoothnessParams {
    pub fn analytic(lambda: f64, mu: f64, prop: &str) -> Self {
        SmoothnessParams {
            lambda,
            mu,
            domain: DEFAULT_DOMAIN,
            provenance: Provenance::Analytic {
                prop: String::from(prop),
                also: Vec::new(),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SmoothError {
    /// No proposition covers this (class, bias) pair.
    Unsupported { class: String, bias: String },
    /// No mu < 1 exists at the requested lambda on the domain.
    Unsmoothable { mu: f64 },
    /// A formula's precondition fails (e.g. mu >= 1/2 in the weighted bound).
    Inapplicable(String),
    Cost(CostError),
}

impl fmt::Display for SmoothError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SmoothError::Unsupported { class, bias } => {
                write!(f, "no certificate for class {class} under bias {bias}")
            }
            SmoothError::Unsmoothable { mu } => {
                write!(f, "unsmoothable at this lambda (fitted mu = {mu})")
            }
            SmoothError::Inapplicable(why) => write!(f, "bound inapplicable: {why}"),
            SmoothError::Cost(e) => write!(f, "cost evaluation failed: {e}"),
        }
    }
}

impl From<CostError> for SmoothError {
    fn from(e: CostError) -> Self {
        SmoothError::Cost(e)
    }
}

/// Cost classes with closed-form certificates. `General` and `Convex` carry
/// the class's standard smoothness mu (lambda = 1 without loss of
/// generality).
#[derive(Clone, Debug, PartialEq)]
pub enum CostClass {
    General { mu: f64 },
    Convex { mu: f64 },
    Affine,
    Quadratic,
    Poly { d: u32 },
}

impl CostClass {
    fn name(&self) -> String {
        match self {
            CostClass::General { .. } => "general".into(),
            CostClass::Convex { .. } => "convex".into(),
            CostClass::Affine => "affine".into(),
            CostClass::Quadratic => "quadratic".into(),
            CostClass::Poly { d } => alloc::format!("poly({d})"),
        }
    }

    pub fn degree(&self) -> Option<u32> {
        match self {
            CostClass::Affine => Some(1),
            CostClass::Quadratic => Some(2),
            CostClass::Poly { d } => Some(*d),
            _ => None,
        }
    }

    /// Standard (unbiased) smoothness mu of the class at lambda = 1.
    pub fn standard_mu(&self) -> f64 {
        match self {
            CostClass::General { mu } | CostClass::Convex { mu } => *mu,
            CostClass::Affine => 0.25,
            CostClass::Quadratic => poly_standard_mu(2),
            CostClass::Poly { d } => poly_standard_mu(*d),
        }
    }
}

/// `d (1+d)^(-(d+1)/d)`: 1/4 for affine, about 0.3849 for quadratics.
pub fn poly_standard_mu(d: u32) -> f64 {
    let d = d as f64;
    d * pow(1.0 + d, -(d + 1.0) / d)
}

// ---------------------------------------------------------------------------
// Numerical certification and fitting.

fn def_lhs(
    c: &CostModel,
    bc: &BiasedCost,
    lambda: f64,
    mu: f64,
    x: f64,
    xp: f64,
) -> Result<f64, CostError> {
    let cx = c.eval(x)?;
    Ok(cx * x + bc.eval(x)? * (xp - x) - lambda * c.eval(xp)? * xp - mu * cx * x)
}

/// Grid maximization of `f` over `[dom]^2` with local refinement around the
/// incumbent, plus rays `x' = kx` for a spread of slopes.
fn max_over_box(
    f: &dyn Fn(f64, f64) -> Result<f64, CostError>,
    dom: (f64, f64),
    grid: usize,
) -> Result<(f64, (f64, f64)), CostError> {
    let (lo, hi) = dom;
    let n = grid.max(2);
    let at = |i: usize, m: usize| lo + (hi - lo) * i as f64 / (m - 1) as f64;
    let mut best = f64::NEG_INFINITY;
    let mut arg = (lo, lo);
    for i in 0..n {
        for j in 0..n {
            let (x, xp) = (at(i, n), at(j, n));
            let v = f(x, xp)?;
            if v > best {
                best = v;
                arg = (x, xp);
            }
        }
    }
    for &k in &[0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0] {
        for i in 0..4 * n {
            let x = at(i, 4 * n);
            let xp = k * x;
            if xp >= lo && xp <= hi {
                let v = f(x, xp)?;
                if v > best {
                    best = v;
                    arg = (x, xp);
                }
            }
        }
    }
    // Local refinement: shrink a window around the incumbent.
    let mut half = (hi - lo) / (n - 1) as f64;
    for _ in 0..6 {
        let (cx, cxp) = arg;
        let m = 33;
        for i in 0..m {
            for j in 0..m {
                let x = (cx - half + 2.0 * half * i as f64 / (m - 1) as f64).clamp(lo, hi);
                let xp = (cxp - half + 2.0 * half * j as f64 / (m - 1) as f64).clamp(lo, hi);
                let v = f(x, xp)?;
                if v > best {
                    best = v;
                    arg = (x, xp);
                }
            }
        }
        half /= 8.0;
    }
    Ok((best, arg))
}

/// Worst violation of the biased-smoothness inequality for `(c, bc)` under
/// `p` over `p.domain`^2. A value `<= 1e-9` confirms the certificate; a
/// positive value is a counterexample, not an error.
pub fn verify_biased_smoothness(
    c: &CostModel,
    bc: &BiasedCost,
    p: &SmoothnessParams,
    grid: usize,
) -> Result<(f64, (f64, f64)), CostError> {
    max_over_box(
        &|x, xp| def_lhs(c, bc, p.lambda, p.mu, x, xp),
        p.domain,
        grid,
    )
}

/// Smallest mu making `(c, bc)` (lambda, mu)-biased-smooth on the domain,
/// found by grid maximization of the mu that each point demands.
pub fn fit_mu_hat(
    c: &CostModel,
    bc: &BiasedCost,
    lambda: f64,
    domain: (f64, f64),
    grid: usize,
) -> Result<SmoothnessParams, SmoothError> {
    let ratio = |x: f64, xp: f64| -> Result<f64, CostError> {
        let denom = c.eval(x)? * x;
        if denom <= 1e-12 {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(def_lhs(c, bc, lambda, 0.0, x, xp)? / denom)
    };
    let (worst, _) = max_over_box(&ratio, domain, grid)?;
    // A negative fit strengthens the bound but the bound formula expects
    // mu in [0, 1); clamp and report 0.
    let mu = worst.max(0.0);
    if mu >= 1.0 {
        return Err(SmoothError::Unsmoothable { mu });
    }
    Ok(SmoothnessParams {
        lambda,
        mu,
        domain,
        provenance: Provenance::Fitted { grid },
    })
}

// ---------------------------------------------------------------------------
// Closed-form certificates.

fn affine_tax(beta: f64) -> (f64, f64, &'static str) {
    if beta <= 1.0 {
        (1.0, (beta + 1.0) * (beta + 1.0) / 4.0 - beta, "affine tax beta<=1")
    } else {
        ((1.0 + beta) * (1.0 + beta) / (4.0 * beta), 0.0, "affine tax beta>=1")
    }
}

fn poly_tax(d: u32, beta: f64) -> (f64, f64, &'static str) {
    let df = d as f64;
    if beta <= 1.0 {
        let mu = df * pow((1.0 + df * beta) / (1.0 + df), (df + 1.0) / df) - df * beta;
        (1.0, mu, "poly tax beta<=1")
    } else {
        let lam = pow(1.0 + df * beta, df + 1.0) / (pow(beta, df) * pow(df + 1.0, df + 1.0));
        (lam, 0.0, "poly tax beta>=1")
    }
}

/// The sharpest closed-form `(lambda, mu)` certificate for the class under
/// the bias, with coarser applicable certificates retained in provenance.
pub fn analytic_biased_smoothness(
    class: &CostClass,
    bias: &BiasSpec,
) -> Result<SmoothnessParams, SmoothError> {
    let unsupported = || SmoothError::Unsupported {
        class: class.name(),
        bias: alloc::format!("{bias:?}"),
    };
    let mut candidates: Vec<(f64, f64, String)> = Vec::new();
    match bias {
        BiasSpec::Identity => {
            candidates.push((1.0, class.standard_mu(), "standard smoothness".into()));
        }
        BiasSpec::Tax { beta } => {
            let beta = *beta;
            match class {
                CostClass::Affine => {
                    let (l, m, tag) = affine_tax(beta);
                    candidates.push((l, m, tag.into()));
                }
                CostClass::Quadratic | CostClass::Poly { .. } => {
                    let d = class.degree().unwrap();
                    let (l, m, tag) = poly_tax(d, beta);
                    candidates.push((l, m, tag.into()));
                }
                _ => {}
            }
            let mu = class.standard_mu();
            if beta <= 1.0 {
                candidates.push((1.0, (1.0 - beta) * mu, "general tax beta<=1".into()));
            } else {
                if !matches!(class, CostClass::General { .. }) {
                    candidates.push((1.0 + (beta - 1.0) * mu, 0.0, "convex tax beta>=1".into()));
                }
                candidates.push((beta, 0.0, "all costs tax beta>=1".into()));
            }
        }
        BiasSpec::Pessimism { r } => {
            let r = *r;
            match class {
                CostClass::Affine => {
                    // c(rx) = c(x) + (r-1) x c'(x) for affine c.
                    let (l, m, _) = affine_tax(r - 1.0);
                    candidates.push((l, m, "affine pessimism via tax equivalence".into()));
                }
                CostClass::Quadratic => {
                    if r <= 1.82 {
                        candidates.push((
                            1.0,
                            0.842 - 0.457 * r,
                            "quadratic pessimism r<=1.82".into(),
                        ));
                    } else if r >= 2.0 {
                        // The textbook constant r^2/4 is only pointwise valid
                        // once r^2 >= sqrt(27)/(sqrt(27)-4) (~ r >= 2.084).
                        // Below that, the sharp monomial constants take over:
                        // for x^2 the best lambda at mu = 0 is
                        // 4 r^6 / (27 (r^2-1)^2) (maximizer x/x' =
                        // 2r^2/(3(r^2-1))), and for x it is r^2/(4(r-1)).
                        let rr1 = r * r - 1.0;
                        let quad = 4.0 * pow(r, 6.0) / (27.0 * rr1 * rr1);
                        let lin = r * r / (4.0 * (r - 1.0));
                        let lambda = (r * r / 4.0).max(quad).max(lin);
                        candidates.push((lambda, 0.0, "quadratic pessimism r>=2".into()));
                    }
                    // r in (1.82, 2): no certificate; BPoA is only bracketed.
                }
                _ => {}
            }
        }
        BiasSpec::MeanVar { gamma, kappa, .. } => {
            let k = kappa.ok_or_else(unsupported)?;
            candidates.push((
                1.0 + gamma * k,
                class.standard_mu(),
                "mean-variance".into(),
            ));
        }
        BiasSpec::Capacity { .. } | BiasSpec::Override(_) => {}
    }
    candidates.retain(|(_, m, _)| *m < 1.0);
    if candidates.is_empty() {
        return Err(unsupported());
    }
    let bound = |l: f64, m: f64| l / (1.0 - m);
    let mut bi = 0;
    for i in 1..candidates.len() {
        if bound(candidates[i].0, candidates[i].1) < bound(candidates[bi].0, candidates[bi].1) {
            bi = i;
        }
    }
    let (lambda, mu, prop) = candidates[bi].clone();
    let also = candidates
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != bi)
        .map(|(_, (_, _, t))| t.clone())
        .collect();
    Ok(SmoothnessParams {
        lambda,
        mu,
        domain: DEFAULT_DOMAIN,
        provenance: Provenance::Analytic { prop, also },
    })
}

/// The worst-case BPoA bound `lambda / (1 - mu)` of Cor. to the smoothness
/// inequality.
pub fn bpoa_upper_bound(p: &SmoothnessParams) -> Result<f64, SmoothError> {
    if p.mu >= 1.0 {
        return Err(SmoothError::Unsmoothable { mu: p.mu });
    }
    Ok(p.lambda / (1.0 - p.mu))
}

/// Closed-form worst-case BPoA over affine games with tax sensitivity beta.
pub fn affine_tax_bpoa(beta: f64) -> f64 {
    let (l, m, _) = affine_tax(beta);
    l / (1.0 - m)
}

// ---------------------------------------------------------------------------
// Measured bounds.

#[derive(Clone, Debug)]
pub struct BoundReport {
    pub analytic_bound: Option<f64>,
    pub measured_bpoa: Option<f64>,
    /// Name of the instance the measurement ran on.
    pub tight_instance: Option<String>,
    /// analytic - measured, when both are present.
    pub slack: Option<f64>,
}

impl BoundReport {
    pub fn with_analytic(mut self, bound: f64) -> Self {
        self.analytic_bound = Some(bound);
        self.slack = self.measured_bpoa.map(|m| bound - m);
        self
    }
}

/// Ratio of the (worst found) biased-equilibrium social cost to the true
/// optimum's.
pub fn measured_bpoa(inst: &Instance, cfg: &SolverConfig) -> Result<BoundReport, SolveError> {
    let (eq, _cert) = solve_equilibrium_multitype(inst, cfg)?;
    let eq_sc = social_cost_unchecked(inst, &eq.total)?;
    let (_opt, opt_sc) = solve_social_optimum(inst, cfg)?;
    if opt_sc <= 0.0 {
        return Err(SolveError::InvalidInstance(
            "optimal social cost is zero; BPoA undefined".into(),
        ));
    }
    Ok(BoundReport {
        analytic_bound: None,
        measured_bpoa: Some(eq_sc / opt_sc),
        tight_instance: Some(inst.name.clone()),
        slack: None,
    })
}

/// Fraction-independent diverse bound: the BPoA of a symmetric DSP game is at
/// most the sum of the homogeneous per-type bounds.
pub fn diverse_bound_sum(params: &[SmoothnessParams]) -> Result<f64, SmoothError> {
    let mut acc = 0.0;
    for p in params {
        acc += bpoa_upper_bound(p)?;
    }
    Ok(acc)
}

/// One population's parameters for the fraction-dependent bound.
#[derive(Clone, Debug)]
pub struct TypeParams {
    pub mass: f64,
    /// (lambda^i, mu^i): smoothness of the type's unbiased game.
    pub unbiased: SmoothnessParams,
    /// (hat lambda^i, hat mu^i): biased smoothness of the type's game.
    pub biased: SmoothnessParams,
}

/// Fraction-dependent bound for symmetric convex DSP games:
/// `sum_i (n_i/n) lambda lambda^i hat-lambda^i /
///  ((1-2mu)(1-mu^i)(1-hat-mu^i))`.
pub fn diverse_bound_weighted(
    base: &SmoothnessParams,
    types: &[TypeParams],
) -> Result<f64, SmoothError> {
    if base.mu >= 0.5 {
        return Err(SmoothError::Inapplicable(alloc::format!(
            "base mu = {} >= 1/2, the (1-2mu) factor fails",
            base.mu
        )));
    }
    let n: f64 = types.iter().map(|t| t.mass).sum();
    if n <= 0.0 {
        return Err(SmoothError::Inapplicable("total mass is zero".into()));
    }
    let mut acc = 0.0;
    for t in types {
        if t.unbiased.mu >= 1.0 || t.biased.mu >= 1.0 {
            return Err(SmoothError::Unsmoothable {
                mu: t.unbiased.mu.max(t.biased.mu),
            });
        }
        acc += (t.mass / n) * base.lambda * t.unbiased.lambda * t.biased.lambda
            / ((1.0 - 2.0 * base.mu) * (1.0 - t.unbiased.mu) * (1.0 - t.biased.mu));
    }
    Ok(acc)
}

/// Bound on the harm an adversarial fraction `alpha` of the population can
/// inflict on the remaining agents' cost.
pub fn adversarial_fraction_bound(p: &SmoothnessParams, alpha: f64) -> Result<f64, SmoothError> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(SmoothError::Inapplicable("alpha must lie in [0, 1)".into()));
    }
    Ok(bpoa_upper_bound(p)? / (1.0 - alpha))
}

/// Worst-case BPoA bound for affine games with diverse tax sensitivities:
/// the max of the per-beta bounds when all betas sit on one side of 1, and
/// 4/3 of the bound at the largest beta in the mixed case.
pub fn diverse_max_affine(betas: &[f64]) -> Result<f64, SmoothError> {
    if betas.is_empty() {
        return Err(SmoothError::Inapplicable("empty sensitivity list".into()));
    }
    let all_low = betas.iter().all(|&b| b <= 1.0);
    let all_high = betas.iter().all(|&b| b >= 1.0);
    if all_low || all_high {
        Ok(betas
            .iter()
            .map(|&b| affine_tax_bpoa(b))
            .fold(f64::NEG_INFINITY, f64::max))
    } else {
        let top = betas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Ok(4.0 / 3.0 * affine_tax_bpoa(top))
    }
}

// ---------------------------------------------------------------------------
// Instance classification and per-type parameters.

/// The tightest closed-form class covering every base cost of the instance,
/// or `None` for non-polynomial costs.
pub fn classify_costs(inst: &Instance) -> Option<CostClass> {
    let mut max_d = 0usize;
    for c in inst.costs() {
        max_d = max_d.max(c.degree()?);
    }
    Some(match max_d {
        0 | 1 => CostClass::Affine,
        2 => CostClass::Quadratic,
        d => CostClass::Poly { d: d as u32 },
    })
}

/// Effective bias of a type for certificate lookup: for MEANVAR the declared
/// kappa is checked against the instance's variance models on the domain and
/// downgraded to the observed ratio when violated.
fn effective_bias(inst: &Instance, bias: &BiasSpec, domain: (f64, f64)) -> Result<BiasSpec, SmoothError> {
    if let BiasSpec::MeanVar { gamma, variance, kappa } = bias {
        let mut needed = kappa.unwrap_or(0.0);
        for (e, c) in inst.costs().iter().enumerate() {
            let Some(v) = variance.for_edge(&inst.net.edges()[e].id) else {
                continue;
            };
            match observed_kappa(c, v, domain, 201)? {
                Some(k) => needed = needed.max(k),
                None => {
                    return Err(SmoothError::Inapplicable(
                        "variance positive where the cost vanishes; no kappa bound".into(),
                    ))
                }
            }
        }
        return Ok(BiasSpec::MeanVar {
            gamma: *gamma,
            variance: variance.clone(),
            kappa: Some(needed),
        });
    }
    Ok(bias.clone())
}

/// Biased-smoothness parameters for one type of an instance: the analytic
/// certificate when one applies, otherwise a per-edge numerical fit (the
/// worst edge's mu governs).
pub fn params_for_type(
    inst: &Instance,
    i: usize,
    domain: (f64, f64),
) -> Result<SmoothnessParams, SmoothError> {
    let bias = effective_bias(inst, &inst.types[i].bias, domain)?;
    if let Some(class) = classify_costs(inst) {
        if let Ok(p) = analytic_biased_smoothness(&class, &bias) {
            return Ok(p);
        }
    }
    let mut worst: Option<SmoothnessParams> = None;
    for (e, c) in inst.costs().iter().enumerate() {
        let bc = apply_bias_for_edge(c, &bias, &inst.net.edges()[e].id)?;
        let p = fit_mu_hat(c, &bc, 1.0, domain, 201)?;
        if worst.as_ref().map_or(true, |w| p.mu > w.mu) {
            worst = Some(p);
        }
    }
    worst.ok_or(SmoothError::Inapplicable("instance has no edges".into()))
}

// ---------------------------------------------------------------------------
// Auditor.

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

impl fmt::Display for CheckStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Skipped => "SKIPPED",
        })
    }
}

#[derive(Clone, Debug)]
pub struct AuditCheck {
    pub name: String,
    pub status: CheckStatus,
    pub detail: String,
    /// Remaining margin of the checked inequality (negative on failure).
    pub slack: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct AuditReport {
    pub checks: Vec<AuditCheck>,
}

impl AuditReport {
    pub fn failed(&self) -> bool {
        self.checks.iter().any(|c| c.status == CheckStatus::Fail)
    }

    fn push(&mut self, name: &str, status: CheckStatus, detail: String, slack: Option<f64>) {
        self.checks.push(AuditCheck {
            name: String::from(name),
            status,
            detail,
            slack,
        });
    }
}

const AUDIT_TOL: f64 = 1e-6;

/// Per-edge flow of `eq` restricted to the paths type `i` uses: for each edge,
/// the total mass (over all types) riding paths that carry positive type-i
/// flow. The monotonicity lemma is a statement about path flows, so only this
/// restricted load is comparable against the all-type-i equilibrium; flow that
/// crosses a type-i edge on a path type i never takes is excluded.
pub fn restricted_loads(eq: &FlowState, i: usize, n_edges: usize) -> Vec<f64> {
    let mut out = alloc::vec![0.0; n_edges];
    let Some(paths) = &eq.paths else {
        return out;
    };
    let used: BTreeSet<&[usize]> = paths[i]
        .iter()
        .filter(|(_, m)| *m > 1e-9)
        .map(|(p, _)| p.as_slice())
        .collect();
    for tp in paths {
        for (p, m) in tp {
            if used.contains(p.as_slice()) {
                for &e in p {
                    out[e] += m;
                }
            }
        }
    }
    out
}

/// Whether every positive-mass type routes between the certificate terminals,
/// making the game symmetric in the paper's sense.
fn is_symmetric_dsp(inst: &Instance) -> bool {
    let Some(cert) = inst.net.dsp_certificate() else {
        return false;
    };
    inst.types.iter().filter(|t| t.mass > 0.0).all(|t| {
        inst.net.node_index(&t.source) == Some(cert.source)
            && inst.net.node_index(&t.target) == Some(cert.target)
    })
}

/// Solve the instance and check every lemma-level inequality that applies:
/// perceived-cost ratio floors, marginal-cost growth, per-type cost bounds,
/// DSP edge monotonicity, and the diverse-population bounds. Checks that do
/// not apply are reported SKIPPED with the reason.
pub fn audit_instance(inst: &Instance, cfg: &SolverConfig) -> Result<AuditReport, SolveError> {
    let mut report = AuditReport { checks: Vec::new() };
    let domain = (0.0, inst.total_mass().max(1.0));
    let live: Vec<usize> = (0..inst.types.len())
        .filter(|&i| inst.types[i].mass > 0.0)
        .collect();

    // Per-type smoothness parameters; several checks hinge on them.
    let mut params: Vec<Option<SmoothnessParams>> = Vec::new();
    for &i in &live {
        params.push(params_for_type(inst, i, domain).ok());
    }

    // (a) Perceived-cost ratio floor: hat c^i(x) >= (1 - hat mu^i) c(x).
    for (pi, &i) in live.iter().enumerate() {
        let name = alloc::format!("hat-cost ratio floor [type {}]", inst.types[i].name);
        let Some(p) = &params[pi] else {
            report.push(&name, CheckStatus::Skipped, "no smoothness parameters derivable".into(), None);
            continue;
        };
        let mut slack = f64::INFINITY;
        let mut ok = true;
        'edges: for (e, c) in inst.costs().iter().enumerate() {
            let bc = apply_bias_for_edge(c, &inst.types[i].bias, &inst.net.edges()[e].id)?;
            for k in 0..201 {
                let x = domain.0 + (domain.1 - domain.0) * k as f64 / 200.0;
                let gap = bc.eval(x)? - (1.0 - p.mu) * c.eval(x)?;
                slack = slack.min(gap);
                if gap < -AUDIT_TOL {
                    ok = false;
                    break 'edges;
                }
            }
        }
        report.push(
            &name,
            if ok { CheckStatus::Pass } else { CheckStatus::Fail },
            alloc::format!("mu-hat = {:.6}", p.mu),
            Some(slack),
        );
    }

    // (b) Marginal-cost growth: c*(x) <= lambda/(1-2mu) c(x) per edge.
    {
        let name = "marginal-cost growth";
        match classify_costs(inst) {
            Some(class) if class.standard_mu() < 0.5 => {
                let factor = 1.0 / (1.0 - 2.0 * class.standard_mu());
                let mut slack = f64::INFINITY;
                let mut ok = true;
                'edges2: for c in inst.costs() {
                    let star = marginal(c)?;
                    for k in 0..201 {
                        let x = domain.0 + (domain.1 - domain.0) * k as f64 / 200.0;
                        let gap = factor * c.eval(x)? - star.eval(x)?;
                        slack = slack.min(gap);
                        if gap < -AUDIT_TOL {
                            ok = false;
                            break 'edges2;
                        }
                    }
                }
                report.push(
                    name,
                    if ok { CheckStatus::Pass } else { CheckStatus::Fail },
                    alloc::format!("factor = {factor:.4}"),
                    Some(slack),
                );
            }
            Some(class) => report.push(
                name,
                CheckStatus::Skipped,
                alloc::format!("class mu = {} >= 1/2", class.standard_mu()),
                None,
            ),
            None => report.push(
                name,
                CheckStatus::Skipped,
                "non-polynomial costs".into(),
                None,
            ),
        }
    }

    // Solved artifacts shared by the remaining checks.
    let (eq, _) = solve_equilibrium_multitype(inst, cfg)?;
    let eq_sc = social_cost_unchecked(inst, &eq.total)?;
    let (_, opt_sc) = solve_social_optimum(inst, cfg)?;
    let symmetric = is_symmetric_dsp(inst);

    // Homogeneous per-type artifacts.
    let mut homo_eq = Vec::new();
    for &i in &live {
        let gi_hat = derive_homogeneous(inst, i, true);
        let (si, _) = solve_equilibrium_multitype(&gi_hat, cfg)?;
        let gi = derive_homogeneous(inst, i, false);
        let (_, opt_i) = solve_social_optimum(&gi, cfg)?;
        homo_eq.push((si, opt_i));
    }

    // (c) Per-type cost bounds.
    for (pi, &i) in live.iter().enumerate() {
        let name = alloc::format!("per-type cost bound [type {}]", inst.types[i].name);
        if !symmetric {
            report.push(&name, CheckStatus::Skipped, "not a symmetric DSP game".into(), None);
            continue;
        }
        let Some(p) = &params[pi] else {
            report.push(&name, CheckStatus::Skipped, "no smoothness parameters derivable".into(), None);
            continue;
        };
        let bound = p.lambda / (1.0 - p.mu) * homo_eq[pi].1;
        let sci = per_type_cost(inst, &eq, i)?;
        let slack = bound - sci;
        report.push(
            &name,
            if slack >= -AUDIT_TOL { CheckStatus::Pass } else { CheckStatus::Fail },
            alloc::format!("SC_i = {sci:.6}, bound = {bound:.6}"),
            Some(slack),
        );
    }

    // (d) DSP edge monotonicity: on every edge, the all-type-i equilibrium
    // carries at least the mixed-equilibrium flow that rides paths type i
    // itself uses. (The unrestricted per-edge comparison can fail when
    // another type's path crosses a type-i edge; see restricted_loads.)
    for (pi, &i) in live.iter().enumerate() {
        let name = alloc::format!("dsp edge monotonicity [type {}]", inst.types[i].name);
        if !symmetric {
            report.push(&name, CheckStatus::Skipped, "no dsp certificate or asymmetric demand".into(), None);
            continue;
        }
        let si = &homo_eq[pi].0;
        let restricted = restricted_loads(&eq, i, inst.net.edges().len());
        let mut slack = f64::INFINITY;
        let mut ok = true;
        for e in 0..inst.net.edges().len() {
            if restricted[e] > AUDIT_TOL {
                let gap = si.total[e] - restricted[e];
                slack = slack.min(gap);
                if gap < -AUDIT_TOL {
                    ok = false;
                }
            }
        }
        report.push(
            &name,
            if ok { CheckStatus::Pass } else { CheckStatus::Fail },
            "all-type-i equilibrium vs mixed equilibrium".into(),
            Some(slack),
        );
    }

    // (e) Diverse-population bounds against the measured BPoA.
    {
        let name = "diverse bound (sum)";
        if !symmetric {
            report.push(name, CheckStatus::Skipped, "not a symmetric DSP game".into(), None);
        } else if opt_sc <= 0.0 {
            report.push(name, CheckStatus::Skipped, "optimal social cost is zero".into(), None);
        } else if params.iter().any(|p| p.is_none()) {
            report.push(name, CheckStatus::Skipped, "smoothness parameters missing for some type".into(), None);
        } else {
            let ps: Vec<SmoothnessParams> = params.iter().flatten().cloned().collect();
            match diverse_bound_sum(&ps) {
                Ok(bound) => {
                    let measured = eq_sc / opt_sc;
                    let slack = bound - measured;
                    report.push(
                        name,
                        if slack >= -AUDIT_TOL { CheckStatus::Pass } else { CheckStatus::Fail },
                        alloc::format!("measured BPoA = {measured:.6}, bound = {bound:.6}"),
                        Some(slack),
                    );
                }
                Err(e) => report.push(name, CheckStatus::Skipped, alloc::format!("{e}"), None),
            }
        }
    }
    {
        let name = "diverse bound (weighted)";
        let class = classify_costs(inst);
        if !symmetric || class.is_none() {
            report.push(name, CheckStatus::Skipped, "needs a symmetric convex DSP game".into(), None);
        } else if params.iter().any(|p| p.is_none()) {
            report.push(name, CheckStatus::Skipped, "smoothness parameters missing for some type".into(), None);
        } else {
            let class = class.unwrap();
            let base = SmoothnessParams::analytic(1.0, class.standard_mu(), "standard smoothness");
            let types: Vec<TypeParams> = live
                .iter()
                .enumerate()
                .map(|(pi, &i)| TypeParams {
                    mass: inst.types[i].mass,
                    unbiased: base.clone(),
                    biased: params[pi].clone().unwrap(),
                })
                .collect();
            match diverse_bound_weighted(&base, &types) {
                Ok(bound) => {
                    let measured = eq_sc / opt_sc;
                    let slack = bound - measured;
                    report.push(
                        name,
                        if slack >= -AUDIT_TOL { CheckStatus::Pass } else { CheckStatus::Fail },
                        alloc::format!("measured BPoA = {measured:.6}, bound = {bound:.6}"),
                        Some(slack),
                    );
                }
                Err(e) => report.push(name, CheckStatus::Skipped, alloc::format!("{e}"), None),
            }
        }
    }

    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use crate::costfun::{apply_bias, VarianceModel};
    use crate::flowsolve::AgentType;
    use crate::netgraph::{dsp_edge, dsp_parallel};

    fn x() -> CostModel {
        CostModel::monomial(1.0, 1)
    }

    fn x2() -> CostModel {
        CostModel::monomial(1.0, 2)
    }

    fn verify_ok(c: &CostModel, bias: &BiasSpec, lambda: f64, mu: f64) -> f64 {
        let bc = apply_bias(c, bias).unwrap();
        let p = SmoothnessParams::analytic(lambda, mu, "test");
        verify_biased_smoothness(c, &bc, &p, 201).unwrap().0
    }

    #[test]
    fn standard_certificates_hold() {
        assert!(verify_ok(&x(), &BiasSpec::Identity, 1.0, 0.25) <= CERT_TOL);
        assert!(verify_ok(&x(), &BiasSpec::Tax { beta: 1.0 }, 1.0, 0.0) <= CERT_TOL);
        let mu = 0.842 - 0.457 * 1.5;
        assert!(verify_ok(&x2(), &BiasSpec::Pessimism { r: 1.5 }, 1.0, mu) <= CERT_TOL);
    }

    #[test]
    fn undersized_mu_is_caught() {
        // True mu for affine identity is 1/4; 0.2 must be refuted.
        assert!(verify_ok(&x(), &BiasSpec::Identity, 1.0, 0.2) > 1e-4);
    }

    #[test]
    fn fitted_mu_matches_closed_forms() {
        let id = apply_bias(&x(), &BiasSpec::Identity).unwrap();
        let p = fit_mu_hat(&x(), &id, 1.0, DEFAULT_DOMAIN, 201).unwrap();
        assert!((p.mu - 0.25).abs() < 2e-2);

        let id2 = apply_bias(&x2(), &BiasSpec::Identity).unwrap();
        let p = fit_mu_hat(&x2(), &id2, 1.0, DEFAULT_DOMAIN, 201).unwrap();
        assert!((p.mu - poly_standard_mu(2)).abs() < 2e-2);

        let t = apply_bias(&x(), &BiasSpec::Tax { beta: 0.5 }).unwrap();
        let p = fit_mu_hat(&x(), &t, 1.0, DEFAULT_DOMAIN, 201).unwrap();
        assert!((p.mu - 0.0625).abs() < 2e-2);
    }

    #[test]
    fn analytic_lookup_examples() {
        let p = analytic_biased_smoothness(&CostClass::Affine, &BiasSpec::Tax { beta: 0.0 }).unwrap();
        assert!((p.lambda - 1.0).abs() < 1e-12 && (p.mu - 0.25).abs() < 1e-12);

        let p = analytic_biased_smoothness(&CostClass::Poly { d: 2 }, &BiasSpec::Tax { beta: 2.0 })
            .unwrap();
        assert!((p.lambda - 125.0 / 108.0).abs() < 1e-12 && p.mu == 0.0);

        let p = analytic_biased_smoothness(
            &CostClass::General { mu: 0.25 },
            &BiasSpec::Tax { beta: 3.0 },
        )
        .unwrap();
        assert!((p.lambda - 3.0).abs() < 1e-12 && p.mu == 0.0);

        let p = analytic_biased_smoothness(&CostClass::Quadratic, &BiasSpec::Pessimism { r: 2.5 })
            .unwrap();
        assert!((p.lambda - 1.5625).abs() < 1e-12 && p.mu == 0.0);

        let p = analytic_biased_smoothness(
            &CostClass::Affine,
            &BiasSpec::MeanVar {
                gamma: 1.0,
                variance: VarianceModel::Uniform(CostModel::constant(0.0)),
                kappa: Some(0.5),
            },
        )
        .unwrap();
        assert!((p.lambda - 1.5).abs() < 1e-12 && (p.mu - 0.25).abs() < 1e-12);
    }

    #[test]
    fn pessimism_gap_unsupported() {
        let err = analytic_biased_smoothness(&CostClass::Quadratic, &BiasSpec::Pessimism { r: 1.9 });
        assert!(matches!(err, Err(SmoothError::Unsupported { .. })));
    }

    #[test]
    fn bound_arithmetic() {
        let p = SmoothnessParams::analytic(1.0, 0.25, "t");
        assert!((bpoa_upper_bound(&p).unwrap() - 4.0 / 3.0).abs() < 1e-12);
        let p = SmoothnessParams::analytic(3.0, 0.0, "t");
        assert!((bpoa_upper_bound(&p).unwrap() - 3.0).abs() < 1e-12);
        let p = SmoothnessParams::analytic(1.5, 0.25, "t");
        assert!((bpoa_upper_bound(&p).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn diverse_bound_examples() {
        let b0 = SmoothnessParams::analytic(1.0, 0.25, "t");
        let b1 = SmoothnessParams::analytic(1.0, 0.0, "t");
        let s = diverse_bound_sum(&[b0.clone(), b1.clone()]).unwrap();
        assert!((s - 7.0 / 3.0).abs() < 1e-12);
        let s = diverse_bound_sum(&[b0.clone(), b0.clone(), b0.clone()]).unwrap();
        assert!((s - 4.0).abs() < 1e-12);

        let base = b0.clone();
        let types = [
            TypeParams {
                mass: 0.5,
                unbiased: base.clone(),
                biased: b0.clone(),
            },
            TypeParams {
                mass: 0.5,
                unbiased: base.clone(),
                biased: b1.clone(),
            },
        ];
        let w = diverse_bound_weighted(&base, &types).unwrap();
        assert!((w - 28.0 / 9.0).abs() < 1e-12);

        let bad = SmoothnessParams::analytic(1.0, 0.6, "t");
        assert!(matches!(
            diverse_bound_weighted(&bad, &types),
            Err(SmoothError::Inapplicable(_))
        ));
    }

    #[test]
    fn adversarial_and_max_affine() {
        let p = SmoothnessParams::analytic(1.0, 0.25, "t");
        assert!((adversarial_fraction_bound(&p, 0.1).unwrap() - (4.0 / 3.0) / 0.9).abs() < 1e-12);
        let q = SmoothnessParams::analytic(1.0, 0.0, "t");
        assert!((adversarial_fraction_bound(&q, 0.5).unwrap() - 2.0).abs() < 1e-12);

        let b = diverse_max_affine(&[0.2, 0.5, 1.0]).unwrap();
        assert!((b - affine_tax_bpoa(0.2)).abs() < 1e-12);
        let b = diverse_max_affine(&[2.0, 3.0]).unwrap();
        assert!((b - 4.0 / 3.0).abs() < 1e-12);
        let b = diverse_max_affine(&[0.5, 2.0]).unwrap();
        assert!((b - 1.5).abs() < 1e-12);
        assert!(diverse_max_affine(&[]).is_err());
    }

    fn pigou(bias: BiasSpec) -> Instance {
        let net = dsp_parallel(dsp_edge("e1"), dsp_edge("e2")).build().unwrap();
        let (s, t) = {
            let c = net.dsp_certificate().unwrap();
            (net.nodes()[c.source].clone(), net.nodes()[c.target].clone())
        };
        Instance::new(
            "pigou",
            net,
            &[
                ("e1".into(), CostModel::constant(1.0)),
                ("e2".into(), CostModel::monomial(1.0, 1)),
            ],
            vec![AgentType {
                name: "t0".into(),
                source: s,
                target: t,
                mass: 1.0,
                bias,
            }],
        )
        .unwrap()
    }

    #[test]
    fn measured_bpoa_pigou() {
        let r = measured_bpoa(&pigou(BiasSpec::Identity), &SolverConfig::default()).unwrap();
        assert!((r.measured_bpoa.unwrap() - 4.0 / 3.0).abs() < 1e-3);
    }

    #[test]
    fn audit_pigou_all_applicable_pass() {
        let report = audit_instance(&pigou(BiasSpec::Tax { beta: 0.5 }), &SolverConfig::default())
            .unwrap();
        assert!(!report.failed());
        assert!(report
            .checks
            .iter()
            .any(|c| c.status == CheckStatus::Pass));
    }
}
