//! Generators for the named worst-case instances: Pigou networks, the
//! quadratic Braess variation, the adversarial-fraction Braess game, the
//! unbounded-ratio risk network, and the tight instances matching each
//! closed-form certificate.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use libm::{ceil, floor, log2, pow};

use crate::costfun::{BiasSpec, CostModel};
use crate::flowsolve::{AgentType, Instance, SolveError};
use crate::netgraph::{dsp_edge, dsp_parallel, Edge, Network};
use crate::smoothbounds::CostClass;

/// Ceiling on `q * d` for the risk network (`q` chains of degree-`d` costs).
pub const DEFAULT_SIZE_BUDGET: usize = 10_000;

#[derive(Clone, Debug, PartialEq)]
pub enum ExhibitError {
    InvalidParam(String),
    /// No tight construction exists for this (class, bias) pair.
    Unsupported(String),
    SizeBudget { q: usize, d: usize, budget: usize },
}

impl fmt::Display for ExhibitError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExhibitError::InvalidParam(why) => write!(f, "invalid parameter: {why}"),
            ExhibitError::Unsupported(why) => write!(f, "no construction: {why}"),
            ExhibitError::SizeBudget { q, d, budget } => {
                write!(f, "instance size q*d = {}*{} exceeds budget {budget}", q, d)
            }
        }
    }
}

fn build(res: Result<Instance, SolveError>) -> Instance {
    match res {
        Ok(inst) => inst,
        // Generators construct their own networks; a failure here is a bug.
        Err(e) => panic!("generator produced an invalid instance: {e}"),
    }
}

/// The Pigou network G_P(a, d): a constant-cost link `e1` (cost 1) in
/// parallel with `e2` of cost `a x^d`, one agent type of the given mass.
pub fn gen_pigou(
    a: f64,
    d: u32,
    bias: BiasSpec,
    mass: f64,
) -> Result<Instance, ExhibitError> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(ExhibitError::InvalidParam("pigou coefficient a must be positive".into()));
    }
    if d < 1 {
        return Err(ExhibitError::InvalidParam("pigou degree must be at least 1".into()));
    }
    if !(mass > 0.0) || !mass.is_finite() {
        return Err(ExhibitError::InvalidParam("mass must be positive".into()));
    }
    let net = dsp_parallel(dsp_edge("e1"), dsp_edge("e2"))
        .build()
        .expect("two-edge parallel recipe is valid");
    let cert = net.dsp_certificate().unwrap();
    let (s, t) = (
        net.nodes()[cert.source].clone(),
        net.nodes()[cert.target].clone(),
    );
    Ok(build(Instance::new(
        &format!("pigou(a={a},d={d})"),
        net,
        &[
            ("e1".into(), CostModel::constant(1.0)),
            ("e2".into(), CostModel::monomial(a, d)),
        ],
        vec![AgentType {
            name: "agents".into(),
            source: s,
            target: t,
            mass,
            bias,
        }],
    )))
}

fn braess_net() -> Network {
    let nodes: Vec<String> = ["u", "a", "b", "v"].iter().map(|s| String::from(*s)).collect();
    let idx = |n: &str| nodes.iter().position(|x| x == n).unwrap();
    let edges = [
        ("ua", "u", "a"),
        ("ub", "u", "b"),
        ("av", "a", "v"),
        ("bv", "b", "v"),
        ("ab", "a", "b"),
    ]
    .iter()
    .map(|(id, f, t)| Edge {
        id: String::from(*id),
        from: idx(f),
        to: idx(t),
    })
    .collect();
    Network::new(nodes, edges).expect("braess topology is valid")
}

/// The quadratic Braess variation: `ua` and `bv` cost `x^2`, `ub` and `av`
/// cost 1, and the shortcut `ab` is free. One unit of mass from `u` to `v`.
/// Not series-parallel, so no certificate is attached.
pub fn gen_braess_quadratic(bias: BiasSpec) -> Instance {
    build(Instance::new(
        "braess-quadratic",
        braess_net(),
        &[
            ("ua".into(), CostModel::monomial(1.0, 2)),
            ("ub".into(), CostModel::constant(1.0)),
            ("av".into(), CostModel::constant(1.0)),
            ("bv".into(), CostModel::monomial(1.0, 2)),
            ("ab".into(), CostModel::constant(0.0)),
        ],
        vec![AgentType {
            name: "agents".into(),
            source: "u".into(),
            target: "v".into(),
            mass: 1.0,
            bias,
        }],
    ))
}

/// Braess topology in which a small adversarial fraction wrecks everyone
/// else: `ua` and `bv` cost `(2x)^M`, `ub` and `av` are free, the shortcut
/// `ab` costs the constant `M`. A `1 - eps` mass of truthful agents shares
/// the network with an `eps` mass whose override costs lure it onto the
/// shortcut path, pushing the steep edges past load 1/2.
pub fn gen_braess_adversarial(eps: f64, m_exp: u32) -> Result<Instance, ExhibitError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(ExhibitError::InvalidParam("eps must lie in (0, 1)".into()));
    }
    if m_exp < 1 {
        return Err(ExhibitError::InvalidParam("exponent must be at least 1".into()));
    }
    let m = m_exp as f64;
    // (2x)^M expands to 2^M x^M.
    let steep = CostModel::monomial(pow(2.0, m), m_exp);
    let mut override_costs: BTreeMap<String, CostModel> = BTreeMap::new();
    override_costs.insert("ua".into(), CostModel::constant(0.0));
    override_costs.insert("ub".into(), CostModel::constant(m));
    override_costs.insert("av".into(), CostModel::constant(m));
    override_costs.insert("bv".into(), CostModel::constant(0.0));
    override_costs.insert("ab".into(), CostModel::constant(0.0));
    Ok(build(Instance::new(
        &format!("braess-adversarial(eps={eps},M={m_exp})"),
        braess_net(),
        &[
            ("ua".into(), steep.clone()),
            ("ub".into(), CostModel::constant(0.0)),
            ("av".into(), CostModel::constant(0.0)),
            ("bv".into(), steep),
            ("ab".into(), CostModel::constant(m)),
        ],
        vec![
            AgentType {
                name: "truthful".into(),
                source: "u".into(),
                target: "v".into(),
                mass: 1.0 - eps,
                bias: BiasSpec::Identity,
            },
            AgentType {
                name: "adversarial".into(),
                source: "u".into(),
                target: "v".into(),
                mass: eps,
                bias: BiasSpec::Override(override_costs),
            },
        ],
    )))
}

/// Parameters the risk network derives from `(eps, M)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RiskParams {
    /// Number of parallel three-edge chains; smallest integer > 2M/eps.
    pub q: usize,
    /// Cost degree; smallest integer > max(log2(q) + 1, 10).
    pub d: u32,
    /// End-edge coefficient (q/2)^d.
    pub a: f64,
}

pub fn risk_params(eps: f64, m: f64) -> Result<RiskParams, ExhibitError> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(ExhibitError::InvalidParam("eps must lie in (0, 0.5)".into()));
    }
    if !(m >= 1.0) || !m.is_finite() {
        return Err(ExhibitError::InvalidParam("M must be at least 1".into()));
    }
    let strict_next = |x: f64| {
        let c = ceil(x);
        if c == floor(x) { c + 1.0 } else { c }
    };
    let q = strict_next(2.0 * m / eps) as usize;
    let d = strict_next(if log2(q as f64) + 1.0 > 10.0 {
        log2(q as f64) + 1.0
    } else {
        10.0
    }) as u32;
    Ok(RiskParams {
        q,
        d,
        a: pow(q as f64 / 2.0, d as f64),
    })
}

/// The unbounded-ratio risk network. `q` parallel chains run source to
/// target, each `s -> cJa -> cJb -> t` with end edges costing `a x^d` and a
/// middle edge costing `x`. A free bypass `s -> sp -> c0a`, `cJb -> c(J+1)a`,
/// `c(q-1)b -> tp -> t` threads every middle edge in chain order.
///
/// A pessimistic minority (mass `eps`, margin r = 8) sees the end edges as
/// prohibitive and takes the bypass, loading every middle edge with at least
/// `eps` extra mass; the true optimum spreads evenly at vanishing cost, so
/// the cost ratio exceeds `M`.
pub fn gen_risk_unbounded(eps: f64, m: f64) -> Result<Instance, ExhibitError> {
    gen_risk_unbounded_with_budget(eps, m, DEFAULT_SIZE_BUDGET)
}

pub fn gen_risk_unbounded_with_budget(
    eps: f64,
    m: f64,
    budget: usize,
) -> Result<Instance, ExhibitError> {
    let p = risk_params(eps, m)?;
    let (q, d) = (p.q, p.d);
    if q * d as usize > budget {
        return Err(ExhibitError::SizeBudget { q, d: d as usize, budget });
    }

    let mut nodes: Vec<String> = vec!["s".into(), "sp".into(), "tp".into(), "t".into()];
    for j in 0..q {
        nodes.push(format!("c{j:04}a"));
        nodes.push(format!("c{j:04}b"));
    }
    let idx = |name: &str, nodes: &[String]| nodes.iter().position(|n| n == name).unwrap();
    let mut edges = Vec::new();
    let mut costs: Vec<(String, CostModel)> = Vec::new();
    let add = |edges: &mut Vec<Edge>, costs: &mut Vec<(String, CostModel)>,
                   id: String, f: usize, t: usize, c: CostModel| {
        edges.push(Edge { id: id.clone(), from: f, to: t });
        costs.push((id, c));
    };
    let s = idx("s", &nodes);
    let sp = idx("sp", &nodes);
    let tp = idx("tp", &nodes);
    let t = idx("t", &nodes);
    let end_cost = CostModel::monomial(p.a, d);
    for j in 0..q {
        let ja = idx(&format!("c{j:04}a"), &nodes);
        let jb = idx(&format!("c{j:04}b"), &nodes);
        add(&mut edges, &mut costs, format!("in{j:04}"), s, ja, end_cost.clone());
        add(&mut edges, &mut costs, format!("mid{j:04}"), ja, jb, CostModel::monomial(1.0, 1));
        add(&mut edges, &mut costs, format!("out{j:04}"), jb, t, end_cost.clone());
        if j + 1 < q {
            let next = idx(&format!("c{:04}a", j + 1), &nodes);
            add(&mut edges, &mut costs, format!("z{j:04}"), jb, next, CostModel::constant(0.0));
        }
    }
    add(&mut edges, &mut costs, "z-entry".into(), sp, idx("c0000a", &nodes), CostModel::constant(0.0));
    add(&mut edges, &mut costs, "z-exit".into(), idx(&format!("c{:04}b", q - 1), &nodes), tp, CostModel::constant(0.0));
    add(&mut edges, &mut costs, "z-s".into(), s, sp, CostModel::constant(0.0));
    add(&mut edges, &mut costs, "z-t".into(), tp, t, CostModel::constant(0.0));

    let net = Network::new(nodes, edges).expect("risk network wiring is valid");
    Ok(build(Instance::new(
        &format!("risk-unbounded(eps={eps},M={m})"),
        net,
        &costs,
        vec![
            AgentType {
                name: "riskless".into(),
                source: "s".into(),
                target: "t".into(),
                mass: 1.0 - eps,
                bias: BiasSpec::Pessimism { r: 1.0 },
            },
            AgentType {
                name: "pessimist".into(),
                source: "s".into(),
                target: "t".into(),
                mass: eps,
                bias: BiasSpec::Pessimism { r: 8.0 },
            },
        ],
    )))
}

/// The Pigou instance on which the class's certificate is tight.
pub fn gen_tightness(class: &CostClass, bias: &BiasSpec) -> Result<Instance, ExhibitError> {
    let degree = match class {
        CostClass::Affine => 1u32,
        CostClass::Quadratic => 2,
        CostClass::Poly { d } => *d,
        _ => {
            return Err(ExhibitError::Unsupported(
                "tight instances exist only for affine and polynomial classes".into(),
            ))
        }
    };
    // Affine pessimism inflates loads exactly like a tax of r - 1.
    let beta = match bias {
        BiasSpec::Identity => 0.0,
        BiasSpec::Tax { beta } => *beta,
        BiasSpec::Pessimism { r } if degree == 1 => r - 1.0,
        BiasSpec::Pessimism { r } if degree == 2 => {
            if *r < 2.0 {
                return Err(ExhibitError::Unsupported(
                    "quadratic pessimism has a tight instance only for r >= 2".into(),
                ));
            }
            let a = 4.0 / (r * r);
            return gen_pigou(a, 2, bias.clone(), 1.0);
        }
        _ => {
            return Err(ExhibitError::Unsupported(
                "no tight construction for this bias on this class".into(),
            ))
        }
    };
    if beta < 0.0 {
        return Err(ExhibitError::InvalidParam("negative sensitivity".into()));
    }
    let d = degree as f64;
    let a = if beta <= 1.0 {
        1.0 / (1.0 + d * beta)
    } else {
        pow(beta, d) * pow(d + 1.0, d) / pow(1.0 + d * beta, d + 1.0)
    };
    gen_pigou(a, degree, bias.clone(), 1.0)
}
