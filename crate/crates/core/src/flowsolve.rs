//! Equilibrium and social-optimum computation.
//!
//! Uniform-bias games minimize the Beckmann potential; heterogeneous games run
//! per-type best-response sweeps (Gauss-Seidel over types). Both share one
//! column-generation engine: each type keeps an active set of paths, new
//! columns arrive from a shortest-path oracle on frozen perceived costs, and
//! mass moves between a type's dearest used path and its cheapest path by
//! bisection on the cost gap (exact line search of the potential when one
//! exists). Convergence is certified by the variational-inequality residual.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::costfun::{apply_bias_for_edge, marginal, BiasSpec, BiasedCost, CostError, CostModel};
use crate::netgraph::{Commodity, FlowViolation, Network};
use crate::SplitRng;

#[derive(Clone, Debug)]
pub struct AgentType {
    pub name: String,
    pub source: String,
    pub target: String,
    pub mass: f64,
    pub bias: BiasSpec,
}

#[derive(Clone, Debug)]
pub struct Instance {
    pub name: String,
    pub net: Network,
    /// True (unbiased) cost per edge, indexed like `net.edges`.
    base_costs: Vec<CostModel>,
    pub types: Vec<AgentType>,
}

#[derive(Clone, Debug)]
pub enum SolveError {
    InvalidInstance(String),
    NoPath { type_name: String },
    MixedBias,
    Cost(CostError),
    InvalidFlow(Vec<FlowViolation>),
    NotConverged {
        flow: Box<FlowState>,
        cert: Box<EquilibriumCertificate>,
    },
}

impl fmt::Display for SolveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolveError::InvalidInstance(why) => write!(f, "invalid instance: {why}"),
            SolveError::NoPath { type_name } => {
                write!(f, "type `{type_name}` has no path from source to target")
            }
            SolveError::MixedBias => {
                write!(f, "uniform solver requires all types to share one bias")
            }
            SolveError::Cost(e) => write!(f, "cost evaluation failed: {e}"),
            SolveError::InvalidFlow(v) => write!(f, "invalid flow ({} violations)", v.len()),
            SolveError::NotConverged { cert, .. } => write!(
                f,
                "no convergence after {} sweeps (residual {:.3e})",
                cert.iterations, cert.vi_residual
            ),
        }
    }
}

impl From<CostError> for SolveError {
    fn from(e: CostError) -> Self {
        SolveError::Cost(e)
    }
}

impl Instance {
    pub fn new(
        name: &str,
        net: Network,
        costs: &[(String, CostModel)],
        types: Vec<AgentType>,
    ) -> Result<Instance, SolveError> {
        let mut base = vec![None; net.edges().len()];
        for (id, model) in costs {
            let e = net
                .edge_index(id)
                .ok_or_else(|| SolveError::InvalidInstance(alloc::format!("unknown edge `{id}`")))?;
            if base[e].is_some() {
                return Err(SolveError::InvalidInstance(alloc::format!(
                    "duplicate cost for edge `{id}`"
                )));
            }
            model.validate()?;
            base[e] = Some(model.clone());
        }
        let mut base_costs = Vec::with_capacity(net.edges().len());
        for (e, m) in base.into_iter().enumerate() {
            match m {
                Some(m) => base_costs.push(m),
                None => {
                    return Err(SolveError::InvalidInstance(alloc::format!(
                        "edge `{}` has no cost",
                        net.edges()[e].id
                    )))
                }
            }
        }
        for t in &types {
            t.bias.validate()?;
            if t.mass < 0.0 || !t.mass.is_finite() {
                return Err(SolveError::InvalidInstance(alloc::format!(
                    "type `{}` has negative mass",
                    t.name
                )));
            }
            let u = net.node_index(&t.source).ok_or_else(|| {
                SolveError::InvalidInstance(alloc::format!("unknown node `{}`", t.source))
            })?;
            let v = net.node_index(&t.target).ok_or_else(|| {
                SolveError::InvalidInstance(alloc::format!("unknown node `{}`", t.target))
            })?;
            if t.mass > 0.0 && !reachable(&net, u, v) {
                return Err(SolveError::NoPath {
                    type_name: t.name.clone(),
                });
            }
        }
        Ok(Instance {
            name: String::from(name),
            net,
            base_costs,
            types,
        })
    }

    pub fn cost(&self, edge: usize) -> &CostModel {
        &self.base_costs[edge]
    }

    pub fn costs(&self) -> &[CostModel] {
        &self.base_costs
    }

    pub fn total_mass(&self) -> f64 {
        self.types.iter().map(|t| t.mass).sum()
    }

    pub fn commodities(&self) -> Vec<Commodity> {
        self.types
            .iter()
            .map(|t| Commodity {
                source: self.net.node_index(&t.source).unwrap(),
                target: self.net.node_index(&t.target).unwrap(),
                mass: t.mass,
            })
            .collect()
    }

    /// Perceived cost of every edge for every type.
    pub fn perceived_costs(&self) -> Result<Vec<Vec<BiasedCost>>, CostError> {
        self.types
            .iter()
            .map(|t| {
                self.net
                    .edges()
                    .iter()
                    .enumerate()
                    .map(|(e, edge)| apply_bias_for_edge(&self.base_costs[e], &t.bias, &edge.id))
                    .collect()
            })
            .collect()
    }
}

fn reachable(net: &Network, u: usize, v: usize) -> bool {
    let mut seen = vec![false; net.nodes().len()];
    let mut stack = vec![u];
    seen[u] = true;
    while let Some(w) = stack.pop() {
        if w == v {
            return true;
        }
        for &e in net.out_edges(w) {
            let to = net.edges()[e].to;
            if !seen[to] {
                seen[to] = true;
                stack.push(to);
            }
        }
    }
    false
}

/// All agents of type `i`: same network and costs, total mass relocated onto
/// type `i`'s terminals, bias either the identity (the game G^i) or type
/// `i`'s own (the game hat-G^i).
pub fn derive_homogeneous(inst: &Instance, i: usize, biased: bool) -> Instance {
    let t = &inst.types[i];
    Instance {
        name: inst.name.clone(),
        net: inst.net.clone(),
        base_costs: inst.base_costs.clone(),
        types: vec![AgentType {
            name: t.name.clone(),
            source: t.source.clone(),
            target: t.target.clone(),
            mass: inst.total_mass(),
            bias: if biased { t.bias.clone() } else { BiasSpec::Identity },
        }],
    }
}

// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct FlowState {
    /// `per_type[i][e]` is the mass of type `i` on edge `e`.
    pub per_type: Vec<Vec<f64>>,
    /// Total load per edge.
    pub total: Vec<f64>,
    /// Per-type path decomposition: (path as edge indices, mass).
    pub paths: Option<Vec<Vec<(Vec<usize>, f64)>>>,
}

impl FlowState {
    pub fn from_paths(n_edges: usize, paths: Vec<Vec<(Vec<usize>, f64)>>) -> FlowState {
        let mut per_type = Vec::with_capacity(paths.len());
        let mut total = vec![0.0; n_edges];
        for tp in &paths {
            let mut row = vec![0.0; n_edges];
            for (p, m) in tp {
                for &e in p {
                    row[e] += m;
                }
            }
            for e in 0..n_edges {
                total[e] += row[e];
            }
            per_type.push(row);
        }
        FlowState {
            per_type,
            total,
            paths: Some(paths),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepRule {
    /// Column generation with exact 1-D line search between paths.
    ExactLinesearch,
    /// Averaged best response with weights 2/(k+2).
    Harmonic,
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub tolerance: f64,
    pub max_iters: usize,
    pub step_rule: StepRule,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tolerance: 1e-8,
            max_iters: 5_000,
            step_rule: StepRule::ExactLinesearch,
            restarts: 1,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EquilibriumCertificate {
    pub vi_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub per_type_path_cost_spread: f64,
    /// Residual after each sweep, for convergence reporting.
    pub trajectory: Vec<f64>,
}

// ---------------------------------------------------------------------------
// Social-cost accounting.

/// Total true cost `sum_e s_e c_e(s_e)`. The flow is validated against the
/// instance's commodities first.
pub fn social_cost(inst: &Instance, flow: &FlowState) -> Result<f64, SolveError> {
    let violations =
        crate::netgraph::validate_flow(&inst.net, &inst.commodities(), &flow.per_type);
    if !violations.is_empty() {
        return Err(SolveError::InvalidFlow(violations));
    }
    social_cost_unchecked(inst, &flow.total)
}

pub(crate) fn social_cost_unchecked(inst: &Instance, total: &[f64]) -> Result<f64, SolveError> {
    let mut sc = 0.0;
    for (e, &load) in total.iter().enumerate() {
        sc += load * inst.base_costs[e].eval(load)?;
    }
    Ok(sc)
}

/// True cost borne by type `i`: `sum_e s_{i,e} c_e(s_e)`.
pub fn per_type_cost(inst: &Instance, flow: &FlowState, i: usize) -> Result<f64, SolveError> {
    let mut acc = 0.0;
    for (e, &m) in flow.per_type[i].iter().enumerate() {
        if m > 0.0 {
            acc += m * inst.base_costs[e].eval(flow.total[e])?;
        }
    }
    Ok(acc)
}

// ---------------------------------------------------------------------------
// Shortest paths on frozen costs.

/// Distance-to-target labels via Dijkstra on the reversed graph.
fn dist_to_target(net: &Network, target: usize, cost: &[f64]) -> Vec<f64> {
    let n = net.nodes().len();
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    dist[target] = 0.0;
    // Small graphs dominate here; a linear scan for the minimum keeps the
    // no_std code simple and is O(n^2 + m).
    loop {
        let mut best = usize::MAX;
        let mut bd = f64::INFINITY;
        for v in 0..n {
            if !done[v] && dist[v] < bd {
                bd = dist[v];
                best = v;
            }
        }
        if best == usize::MAX {
            break;
        }
        done[best] = true;
        for &e in net.in_edges(best) {
            let from = net.edges()[e].from;
            let nd = cost[e] + dist[best];
            if nd < dist[from] {
                dist[from] = nd;
            }
        }
    }
    dist
}

/// Greedy reconstruction of a shortest path from `source` given
/// distance-to-target labels. Among tight out-edges the one earliest in the
/// id-sorted adjacency wins, so ties break to the lexicographically smallest
/// edge-id sequence.
fn reconstruct(
    net: &Network,
    source: usize,
    target: usize,
    cost: &[f64],
    dist: &[f64],
) -> Option<Vec<usize>> {
    if !dist[source].is_finite() {
        return None;
    }
    let mut path = Vec::new();
    let mut at = source;
    let mut visited = vec![false; net.nodes().len()];
    visited[at] = true;
    while at != target {
        let slack_tol = 1e-12 * (1.0 + dist[source].abs());
        let mut pick = None;
        for &e in net.out_edges(at) {
            let to = net.edges()[e].to;
            if !dist[to].is_finite() {
                continue;
            }
            if cost[e] + dist[to] <= dist[at] + slack_tol {
                if !visited[to] {
                    pick = Some(e);
                    break;
                } else if pick.is_none() {
                    pick = Some(e);
                }
            }
        }
        let e = pick?;
        path.push(e);
        at = net.edges()[e].to;
        visited[at] = true;
        if path.len() > net.edges().len() {
            return None;
        }
    }
    Some(path)
}

// ---------------------------------------------------------------------------
// The column-generation engine.

struct Engine<'a> {
    inst: &'a Instance,
    /// Perceived cost per type per edge (the solver's response costs).
    evals: Vec<Vec<BiasedCost>>,
    /// Indices of types with positive mass.
    live: Vec<usize>,
    terminals: Vec<(usize, usize)>,
    /// Active path set per live type: (edge indices, mass).
    active: Vec<Vec<(Vec<usize>, f64)>>,
    total: Vec<f64>,
}

impl<'a> Engine<'a> {
    fn new(inst: &'a Instance, evals: Vec<Vec<BiasedCost>>) -> Engine<'a> {
        let live: Vec<usize> = (0..inst.types.len())
            .filter(|&i| inst.types[i].mass > 0.0)
            .collect();
        let terminals = live
            .iter()
            .map(|&i| {
                (
                    inst.net.node_index(&inst.types[i].source).unwrap(),
                    inst.net.node_index(&inst.types[i].target).unwrap(),
                )
            })
            .collect();
        let n_edges = inst.net.edges().len();
        Engine {
            inst,
            evals,
            active: vec![Vec::new(); live.len()],
            live,
            terminals,
            total: vec![0.0; n_edges],
        }
    }

    fn frozen_costs(&self, li: usize) -> Result<Vec<f64>, CostError> {
        let ti = self.live[li];
        self.total
            .iter()
            .enumerate()
            .map(|(e, &load)| self.evals[ti][e].eval(load))
            .collect()
    }

    fn path_cost(&self, li: usize, path: &[usize]) -> Result<f64, CostError> {
        let ti = self.live[li];
        let mut acc = 0.0;
        for &e in path {
            acc += self.evals[ti][e].eval(self.total[e])?;
        }
        Ok(acc)
    }

    /// Place each type's mass on a shortest path at the loads left by the
    /// types seeded before it. `noise` perturbs the frozen costs so restarts
    /// explore different equilibria.
    fn seed(&mut self, rng: Option<&mut SplitRng>) -> Result<(), SolveError> {
        let mut rng = rng;
        for li in 0..self.live.len() {
            let ti = self.live[li];
            let (u, v) = self.terminals[li];
            let mut cost = self.frozen_costs(li)?;
            if let Some(r) = rng.as_deref_mut() {
                let scale = cost.iter().fold(0.0f64, |a, &c| a.max(c)) + 1.0;
                for c in cost.iter_mut() {
                    *c += scale * r.next_f64();
                }
            }
            let dist = dist_to_target(&self.inst.net, v, &cost);
            let path = reconstruct(&self.inst.net, u, v, &cost, &dist).ok_or_else(|| {
                SolveError::NoPath {
                    type_name: self.inst.types[ti].name.clone(),
                }
            })?;
            let mass = self.inst.types[ti].mass;
            for &e in &path {
                self.total[e] += mass;
            }
            self.active[li].push((path, mass));
        }
        Ok(())
    }

    /// Move `delta` of type `li`'s mass from active path `from` to `to`,
    /// where `delta` either closes the perceived cost gap or drains the donor.
    fn shift(&mut self, li: usize, from: usize, to: usize) -> Result<f64, CostError> {
        let n_edges = self.inst.net.edges().len();
        // Net per-edge direction: -1 donor-only, +1 receiver-only.
        let mut dir = vec![0i8; n_edges];
        for &e in &self.active[li][from].0 {
            dir[e] -= 1;
        }
        for &e in &self.active[li][to].0 {
            dir[e] += 1;
        }
        let ti = self.live[li];
        let gap = |this: &Engine<'a>, delta: f64| -> Result<f64, CostError> {
            let mut g = 0.0;
            for e in 0..n_edges {
                match dir[e] {
                    -1 => g += this.evals[ti][e].eval((this.total[e] - delta).max(0.0))?,
                    1 => g -= this.evals[ti][e].eval(this.total[e] + delta)?,
                    _ => {}
                }
            }
            Ok(g)
        };
        let avail = self.active[li][from].1;
        let delta = if gap(self, avail)? >= 0.0 {
            avail
        } else {
            let (mut lo, mut hi) = (0.0, avail);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if gap(self, mid)? >= 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-16 * (1.0 + avail) {
                    break;
                }
            }
            0.5 * (lo + hi)
        };
        if delta <= 0.0 {
            return Ok(0.0);
        }
        for e in 0..n_edges {
            match dir[e] {
                -1 => self.total[e] = (self.total[e] - delta).max(0.0),
                1 => self.total[e] += delta,
                _ => {}
            }
        }
        self.active[li][from].1 -= delta;
        self.active[li][to].1 += delta;
        Ok(delta)
    }

    /// Within-type equilibration: repeatedly move mass from the dearest used
    /// path to the cheapest active path. Returns the final spread.
    fn equilibrate(&mut self, li: usize, tol: f64) -> Result<f64, CostError> {
        let cap = 60 * self.active[li].len() + 60;
        let mut spread = 0.0;
        for _ in 0..cap {
            let costs: Vec<f64> = self.active[li]
                .iter()
                .map(|(p, _)| self.path_cost(li, p))
                .collect::<Result<_, _>>()?;
            let mut cheapest = 0;
            for k in 1..costs.len() {
                if costs[k] < costs[cheapest] {
                    cheapest = k;
                }
            }
            let mut dearest = None;
            let mut worst = costs[cheapest];
            for (k, &c) in costs.iter().enumerate() {
                if self.active[li][k].1 > 1e-15 && c > worst {
                    worst = c;
                    dearest = Some(k);
                }
            }
            spread = worst - costs[cheapest];
            let Some(d) = dearest else { break };
            if spread <= tol {
                break;
            }
            if self.shift(li, d, cheapest)? == 0.0 {
                break;
            }
        }
        self.active[li].retain(|(_, m)| *m > 1e-15);
        Ok(spread)
    }

    /// One Gauss-Seidel sweep: per type, pull in the current shortest path as
    /// a new column and equilibrate. Returns the worst per-type spread.
    fn sweep_linesearch(&mut self, tol: f64) -> Result<f64, SolveError> {
        let mut worst = 0.0f64;
        for li in 0..self.live.len() {
            let (u, v) = self.terminals[li];
            let cost = self.frozen_costs(li)?;
            let dist = dist_to_target(&self.inst.net, v, &cost);
            if let Some(p) = reconstruct(&self.inst.net, u, v, &cost, &dist) {
                if !self.active[li].iter().any(|(q, _)| *q == p) {
                    self.active[li].push((p, 0.0));
                }
            }
            worst = worst.max(self.equilibrate(li, 0.25 * tol)?);
        }
        Ok(worst)
    }

    /// One averaged-best-response step with weight 2/(k+2).
    fn sweep_harmonic(&mut self, k: usize) -> Result<(), SolveError> {
        let w = 2.0 / (k as f64 + 2.0);
        for li in 0..self.live.len() {
            let ti = self.live[li];
            let (u, v) = self.terminals[li];
            let cost = self.frozen_costs(li)?;
            let dist = dist_to_target(&self.inst.net, v, &cost);
            let p = reconstruct(&self.inst.net, u, v, &cost, &dist).ok_or_else(|| {
                SolveError::NoPath {
                    type_name: self.inst.types[ti].name.clone(),
                }
            })?;
            let mass = self.inst.types[ti].mass;
            for (q, m) in self.active[li].iter_mut() {
                let drop = w * *m;
                *m -= drop;
                for &e in q.iter() {
                    self.total[e] -= drop;
                }
            }
            let add = w * mass;
            for &e in &p {
                self.total[e] += add;
            }
            match self.active[li].iter_mut().find(|(q, _)| *q == p) {
                Some((_, m)) => *m += add,
                None => self.active[li].push((p, add)),
            }
            self.active[li].retain(|(_, m)| *m > 1e-15);
        }
        Ok(())
    }

    /// VI residual at the current iterate: total perceived cost minus the
    /// cost of routing every type on its currently-shortest path.
    fn residual(&self) -> Result<f64, SolveError> {
        let mut res = 0.0;
        for li in 0..self.live.len() {
            let ti = self.live[li];
            let (u, v) = self.terminals[li];
            let cost = self.frozen_costs(li)?;
            let dist = dist_to_target(&self.inst.net, v, &cost);
            if !dist[u].is_finite() {
                return Err(SolveError::NoPath {
                    type_name: self.inst.types[ti].name.clone(),
                });
            }
            let mut borne = 0.0;
            for (p, m) in &self.active[li] {
                if *m > 0.0 {
                    borne += m * self.path_cost(li, p)?;
                }
            }
            res += borne - self.inst.types[ti].mass * dist[u];
        }
        Ok(res.max(0.0))
    }

    fn spread(&self) -> Result<f64, CostError> {
        let mut worst = 0.0f64;
        for li in 0..self.live.len() {
            let mut lo = f64::INFINITY;
            let mut hi = 0.0f64;
            for (p, m) in &self.active[li] {
                if *m > 1e-15 {
                    let c = self.path_cost(li, p)?;
                    lo = lo.min(c);
                    hi = hi.max(c);
                }
            }
            if lo.is_finite() {
                worst = worst.max(hi - lo);
            }
        }
        Ok(worst)
    }

    fn extract(&self) -> FlowState {
        let n_edges = self.inst.net.edges().len();
        let mut paths = vec![Vec::new(); self.inst.types.len()];
        for (li, &ti) in self.live.iter().enumerate() {
            paths[ti] = self.active[li].clone();
        }
        FlowState::from_paths(n_edges, paths)
    }

    fn run(
        &mut self,
        cfg: &SolverConfig,
        rng: Option<&mut SplitRng>,
    ) -> Result<(FlowState, EquilibriumCertificate), SolveError> {
        self.seed(rng)?;
        let mut trajectory = Vec::new();
        let mut best: Option<(f64, FlowState, f64, usize)> = None;
        for k in 0..cfg.max_iters {
            match cfg.step_rule {
                StepRule::ExactLinesearch => {
                    self.sweep_linesearch(cfg.tolerance)?;
                }
                StepRule::Harmonic => self.sweep_harmonic(k)?,
            }
            let res = self.residual()?;
            trajectory.push(res);
            let better = best.as_ref().map_or(true, |(r, ..)| res < *r);
            if better || res <= cfg.tolerance {
                let spread = self.spread()?;
                if better {
                    best = Some((res, self.extract(), spread, k + 1));
                }
                if res <= cfg.tolerance && spread <= cfg.tolerance {
                    return Ok((
                        self.extract(),
                        EquilibriumCertificate {
                            vi_residual: res,
                            iterations: k + 1,
                            converged: true,
                            per_type_path_cost_spread: spread,
                            trajectory,
                        },
                    ));
                }
            }
        }
        let (res, flow, spread, iters) = best.expect("max_iters >= 1");
        Err(SolveError::NotConverged {
            flow: Box::new(flow),
            cert: Box::new(EquilibriumCertificate {
                vi_residual: res,
                iterations: iters,
                converged: false,
                per_type_path_cost_spread: spread,
                trajectory,
            }),
        })
    }
}

// ---------------------------------------------------------------------------
// Public solver entry points.

fn check_cfg(cfg: &SolverConfig) -> Result<(), SolveError> {
    if !(cfg.tolerance > 0.0) {
        return Err(SolveError::InvalidInstance("tolerance must be positive".into()));
    }
    if cfg.max_iters == 0 {
        return Err(SolveError::InvalidInstance("max_iters must be at least 1".into()));
    }
    Ok(())
}

fn solve_with_evals(
    inst: &Instance,
    evals: &[Vec<BiasedCost>],
    cfg: &SolverConfig,
) -> Result<(FlowState, EquilibriumCertificate), SolveError> {
    check_cfg(cfg)?;
    let mut rng = SplitRng::new(cfg.seed);
    let restarts = cfg.restarts.max(1);
    let mut best: Option<(f64, FlowState, EquilibriumCertificate)> = None;
    let mut failure: Option<SolveError> = None;
    for r in 0..restarts {
        let mut engine = Engine::new(inst, evals.to_vec());
        let mut noise = if r == 0 {
            None
        } else {
            Some(rng.split(r as u64))
        };
        match engine.run(cfg, noise.as_mut()) {
            Ok((flow, cert)) => {
                let sc = social_cost_unchecked(inst, &flow.total)?;
                if best.as_ref().map_or(true, |(b, ..)| sc > *b) {
                    best = Some((sc, flow, cert));
                }
            }
            Err(e) => failure = Some(e),
        }
    }
    match best {
        Some((_, flow, cert)) => Ok((flow, cert)),
        None => Err(failure.expect("at least one restart ran")),
    }
}

/// Equilibrium of a game in which every type holds the same bias. The
/// Beckmann potential of the perceived costs exists, so the returned flow is
/// a global potential minimizer and its social cost is unique.
pub fn solve_equilibrium_uniform(
    inst: &Instance,
    cfg: &SolverConfig,
) -> Result<(FlowState, EquilibriumCertificate), SolveError> {
    let live: Vec<&AgentType> = inst.types.iter().filter(|t| t.mass > 0.0).collect();
    if let Some(first) = live.first() {
        if live.iter().any(|t| t.bias != first.bias) {
            return Err(SolveError::MixedBias);
        }
    }
    let evals = inst.perceived_costs()?;
    solve_with_evals(inst, &evals, cfg)
}

/// Equilibrium of a player-specific game with heterogeneous biases. With
/// `restarts > 1` the returned flow is the found equilibrium of maximal true
/// social cost, a lower estimate of the worst equilibrium.
pub fn solve_equilibrium_multitype(
    inst: &Instance,
    cfg: &SolverConfig,
) -> Result<(FlowState, EquilibriumCertificate), SolveError> {
    let evals = inst.perceived_costs()?;
    solve_with_evals(inst, &evals, cfg)
}

/// Social optimum on the true costs, solved as an equilibrium under marginal
/// costs. Returns the optimal flow and its social cost.
pub fn solve_social_optimum(
    inst: &Instance,
    cfg: &SolverConfig,
) -> Result<(FlowState, f64), SolveError> {
    let mut evals = Vec::with_capacity(inst.types.len());
    let marginal_row: Vec<BiasedCost> = inst
        .base_costs
        .iter()
        .map(|c| {
            apply_bias_for_edge(&marginal(c)?, &BiasSpec::Identity, "")
        })
        .collect::<Result<_, _>>()?;
    for _ in 0..inst.types.len() {
        evals.push(marginal_row.clone());
    }
    // The objective is type-symmetric, so restarts only re-confirm the value;
    // a single run suffices.
    let one = SolverConfig {
        restarts: 1,
        ..cfg.clone()
    };
    let (flow, _cert) = solve_with_evals(inst, &evals, &one)?;
    let sc = social_cost_unchecked(inst, &flow.total)?;
    Ok((flow, sc))
}

/// Variational-inequality residual of a flow under the perceived costs:
/// total perceived cost borne minus the cost of rerouting every type onto
/// its cheapest path at frozen loads. Zero exactly at equilibrium.
pub fn vi_residual(inst: &Instance, flow: &FlowState) -> Result<f64, SolveError> {
    let evals = inst.perceived_costs()?;
    let mut res = 0.0;
    for (i, t) in inst.types.iter().enumerate() {
        if t.mass == 0.0 {
            continue;
        }
        let u = inst.net.node_index(&t.source).unwrap();
        let v = inst.net.node_index(&t.target).unwrap();
        let cost: Vec<f64> = flow
            .total
            .iter()
            .enumerate()
            .map(|(e, &load)| evals[i][e].eval(load))
            .collect::<Result<_, _>>()?;
        let dist = dist_to_target(&inst.net, v, &cost);
        if !dist[u].is_finite() {
            return Err(SolveError::NoPath {
                type_name: t.name.clone(),
            });
        }
        let borne: f64 = flow.per_type[i]
            .iter()
            .enumerate()
            .map(|(e, &m)| m * cost[e])
            .sum();
        res += borne - t.mass * dist[u];
    }
    Ok(res.max(0.0))
}

/// A valid (generally non-equilibrium) flow: each type's mass spread over up
/// to three randomly priced shortest paths. Used for optimality spot checks.
pub fn random_flow(inst: &Instance, rng: &mut SplitRng) -> Result<FlowState, SolveError> {
    let n_edges = inst.net.edges().len();
    let mut paths = vec![Vec::new(); inst.types.len()];
    for (i, t) in inst.types.iter().enumerate() {
        if t.mass == 0.0 {
            continue;
        }
        let u = inst.net.node_index(&t.source).unwrap();
        let v = inst.net.node_index(&t.target).unwrap();
        let pieces = 1 + rng.below(3);
        let mut shares = Vec::with_capacity(pieces);
        let mut left = t.mass;
        for k in 0..pieces {
            let m = if k + 1 == pieces {
                left
            } else {
                let m = left * rng.next_f64();
                left -= m;
                m
            };
            shares.push(m);
        }
        for share in shares {
            let cost: Vec<f64> = (0..n_edges).map(|_| rng.next_f64() + 1e-6).collect();
            let dist = dist_to_target(&inst.net, v, &cost);
            let p = reconstruct(&inst.net, u, v, &cost, &dist).ok_or_else(|| {
                SolveError::NoPath {
                    type_name: t.name.clone(),
                }
            })?;
            match paths[i].iter_mut().find(|(q, _): &&mut (Vec<usize>, f64)| *q == p) {
                Some((_, m)) => *m += share,
                None => paths[i].push((p, share)),
            }
        }
    }
    Ok(FlowState::from_paths(n_edges, paths))
}
