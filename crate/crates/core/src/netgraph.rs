//! Directed multigraph representation, the series-parallel composition
//! algebra, simple-path enumeration and flow feasibility checks.
//!
//! Series-parallel structure is never *recognized* on arbitrary input; it is
//! carried as a replayable [`DspRecipe`] certificate produced by the
//! composition operators. Operations that require series-parallel structure
//! reject networks without a certificate.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// Conservation/mass checks use this tolerance.
pub const FLOW_TOL: f64 = 1e-9;

/// Default ceiling for exhaustive path enumeration.
pub const DEFAULT_PATH_CAP: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub id: String,
    pub from: usize,
    pub to: usize,
}

/// A directed multigraph. Parallel edges between the same node pair are
/// allowed (the Pigou topology needs them).
#[derive(Clone, Debug)]
pub struct Network {
    nodes: Vec<String>,
    edges: Vec<Edge>,
    /// Outgoing edge indices per node, sorted by edge id.
    adj_out: Vec<Vec<usize>>,
    /// Incoming edge indices per node, sorted by edge id.
    adj_in: Vec<Vec<usize>>,
    dsp: Option<DspCertificate>,
}

/// Proof that the network was built by series/parallel composition, with the
/// declared terminals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DspCertificate {
    pub recipe: DspRecipe,
    pub source: usize,
    pub target: usize,
}

/// Recursive series-parallel recipe. Leaves are single edges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DspRecipe {
    Edge(String),
    Series(Box<DspRecipe>, Box<DspRecipe>),
    Parallel(Box<DspRecipe>, Box<DspRecipe>),
}

/// Single directed edge, the base case of the composition algebra.
pub fn dsp_edge(cost_tag: &str) -> DspRecipe {
    DspRecipe::Edge(cost_tag.to_string())
}

/// Serial composition: the target of `a` is merged with the source of `b`.
pub fn dsp_series(a: DspRecipe, b: DspRecipe) -> DspRecipe {
    DspRecipe::Series(Box::new(a), Box::new(b))
}

/// Parallel composition: sources merged, targets merged.
pub fn dsp_parallel(a: DspRecipe, b: DspRecipe) -> DspRecipe {
    DspRecipe::Parallel(Box::new(a), Box::new(b))
}

impl DspRecipe {
    pub fn leaf_count(&self) -> usize {
        match self {
            DspRecipe::Edge(_) => 1,
            DspRecipe::Series(a, b) | DspRecipe::Parallel(a, b) => {
                a.leaf_count() + b.leaf_count()
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            DspRecipe::Edge(_) => 0,
            DspRecipe::Series(a, b) | DspRecipe::Parallel(a, b) => {
                1 + core::cmp::max(a.depth(), b.depth())
            }
        }
    }

    fn leaf_ids<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            DspRecipe::Edge(id) => out.push(id),
            DspRecipe::Series(a, b) | DspRecipe::Parallel(a, b) => {
                a.leaf_ids(out);
                b.leaf_ids(out);
            }
        }
    }

    /// Replay the composition and build the network it describes.
    pub fn build(&self) -> Result<Network, NetError> {
        let mut ids = Vec::new();
        self.leaf_ids(&mut ids);
        {
            let mut sorted = ids.clone();
            sorted.sort_unstable();
            for w in sorted.windows(2) {
                if w[0] == w[1] {
                    return Err(NetError::DuplicateEdgeId(w[0].to_string()));
                }
            }
        }

        // Build with provisional node labels and a union-find for the merges.
        let mut uf = UnionFind::default();
        let mut raw_edges: Vec<(String, usize, usize)> = Vec::new();
        let (src, tgt) = build_rec(self, &mut uf, &mut raw_edges);

        // Canonical node names by first appearance in leaf order.
        let mut names: Vec<String> = Vec::new();
        let mut canon: Vec<Option<usize>> = vec![None; uf.len()];
        let canon_of = |root: usize, names: &mut Vec<String>, canon: &mut Vec<Option<usize>>| {
            *canon[root].get_or_insert_with(|| {
                names.push(format!("n{}", names.len()));
                names.len() - 1
            })
        };
        let mut edges = Vec::with_capacity(raw_edges.len());
        for (id, f, t) in &raw_edges {
            let f = uf.find(*f);
            let t = uf.find(*t);
            let from = canon_of(f, &mut names, &mut canon);
            let to = canon_of(t, &mut names, &mut canon);
            edges.push(Edge {
                id: id.clone(),
                from,
                to,
            });
        }
        let source = canon[uf.find(src)].expect("source appears in an edge");
        let target = canon[uf.find(tgt)].expect("target appears in an edge");

        let mut net = Network::new(names, edges)?;
        if !net.is_acyclic() {
            return Err(NetError::CertificateMismatch("built graph is cyclic".into()));
        }
        net.dsp = Some(DspCertificate {
            recipe: self.clone(),
            source,
            target,
        });
        Ok(net)
    }
}

fn build_rec(
    r: &DspRecipe,
    uf: &mut UnionFind,
    edges: &mut Vec<(String, usize, usize)>,
) -> (usize, usize) {
    match r {
        DspRecipe::Edge(id) => {
            let s = uf.fresh();
            let t = uf.fresh();
            edges.push((id.clone(), s, t));
            (s, t)
        }
        DspRecipe::Series(a, b) => {
            let (sa, ta) = build_rec(a, uf, edges);
            let (sb, tb) = build_rec(b, uf, edges);
            uf.union(ta, sb);
            (sa, tb)
        }
        DspRecipe::Parallel(a, b) => {
            let (sa, ta) = build_rec(a, uf, edges);
            let (sb, tb) = build_rec(b, uf, edges);
            uf.union(sa, sb);
            uf.union(ta, tb);
            (sa, ta)
        }
    }
}

#[derive(Default)]
struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn fresh(&mut self) -> usize {
        self.parent.push(self.parent.len());
        self.parent.len() - 1
    }
    fn len(&self) -> usize {
        self.parent.len()
    }
    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[rb] = ra;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum NetError {
    UnknownNode(String),
    DanglingEdge { edge: String, node: usize },
    DuplicateEdgeId(String),
    DuplicateNodeId(String),
    PathExplosion { found: usize, cap: usize },
    CertificateMismatch(String),
    NotSeriesParallel,
}

impl fmt::Display for NetError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NetError::UnknownNode(n) => write!(f, "unknown node `{n}`"),
            NetError::DanglingEdge { edge, node } => {
                write!(f, "edge `{edge}` references missing node index {node}")
            }
            NetError::DuplicateEdgeId(id) => write!(f, "duplicate edge id `{id}`"),
            NetError::DuplicateNodeId(id) => write!(f, "duplicate node id `{id}`"),
            NetError::PathExplosion { found, cap } => {
                write!(f, "more than {cap} paths exist (found at least {found})")
            }
            NetError::CertificateMismatch(why) => write!(f, "dsp certificate mismatch: {why}"),
            NetError::NotSeriesParallel => write!(f, "network carries no dsp certificate"),
        }
    }
}

impl Network {
    pub fn new(nodes: Vec<String>, edges: Vec<Edge>) -> Result<Self, NetError> {
        {
            let mut sorted: Vec<&String> = nodes.iter().collect();
            sorted.sort_unstable();
            for w in sorted.windows(2) {
                if w[0] == w[1] {
                    return Err(NetError::DuplicateNodeId(w[0].clone()));
                }
            }
        }
        {
            let mut sorted: Vec<&String> = edges.iter().map(|e| &e.id).collect();
            sorted.sort_unstable();
            for w in sorted.windows(2) {
                if w[0] == w[1] {
                    return Err(NetError::DuplicateEdgeId(w[0].clone()));
                }
            }
        }
        for e in &edges {
            if e.from >= nodes.len() {
                return Err(NetError::DanglingEdge {
                    edge: e.id.clone(),
                    node: e.from,
                });
            }
            if e.to >= nodes.len() {
                return Err(NetError::DanglingEdge {
                    edge: e.id.clone(),
                    node: e.to,
                });
            }
        }
        let mut adj_out = vec![Vec::new(); nodes.len()];
        let mut adj_in = vec![Vec::new(); nodes.len()];
        for (i, e) in edges.iter().enumerate() {
            adj_out[e.from].push(i);
            adj_in[e.to].push(i);
        }
        for list in adj_out.iter_mut().chain(adj_in.iter_mut()) {
            list.sort_by(|&a, &b| edges[a].id.cmp(&edges[b].id));
        }
        Ok(Network {
            nodes,
            edges,
            adj_out,
            adj_in,
            dsp: None,
        })
    }

    /// Build a network from a recipe, attaching the certificate.
    pub fn from_recipe(recipe: &DspRecipe) -> Result<Self, NetError> {
        recipe.build()
    }

    /// Attach a certificate to an imported network after verifying that
    /// replaying the recipe reproduces exactly this edge structure (up to a
    /// consistent renaming of nodes).
    pub fn attach_certificate(&mut self, recipe: DspRecipe) -> Result<(), NetError> {
        let rebuilt = recipe.build()?;
        if rebuilt.edges.len() != self.edges.len() {
            return Err(NetError::CertificateMismatch(format!(
                "recipe has {} edges, network has {}",
                rebuilt.edges.len(),
                self.edges.len()
            )));
        }
        // Map rebuilt node indices onto ours through matching edge ids.
        let mut node_map: Vec<Option<usize>> = vec![None; rebuilt.nodes.len()];
        for re in &rebuilt.edges {
            let mine = self
                .edge_index(&re.id)
                .ok_or_else(|| NetError::CertificateMismatch(format!("edge `{}` missing", re.id)))?;
            let me = &self.edges[mine];
            for (r, m) in [(re.from, me.from), (re.to, me.to)] {
                match node_map[r] {
                    None => node_map[r] = Some(m),
                    Some(prev) if prev == m => {}
                    Some(_) => {
                        return Err(NetError::CertificateMismatch(format!(
                            "inconsistent node identification at edge `{}`",
                            re.id
                        )))
                    }
                }
            }
        }
        let mut seen = vec![false; self.nodes.len()];
        for m in node_map.iter().flatten() {
            if seen[*m] {
                return Err(NetError::CertificateMismatch(
                    "recipe merges nodes the network keeps distinct".into(),
                ));
            }
            seen[*m] = true;
        }
        let cert = rebuilt.dsp.expect("build always attaches a certificate");
        self.dsp = Some(DspCertificate {
            recipe: cert.recipe,
            source: node_map[cert.source].unwrap(),
            target: node_map[cert.target].unwrap(),
        });
        Ok(())
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n == name)
    }

    pub fn edge_index(&self, id: &str) -> Option<usize> {
        self.edges.iter().position(|e| e.id == id)
    }

    pub fn out_edges(&self, node: usize) -> &[usize] {
        &self.adj_out[node]
    }

    pub fn in_edges(&self, node: usize) -> &[usize] {
        &self.adj_in[node]
    }

    pub fn dsp_certificate(&self) -> Option<&DspCertificate> {
        self.dsp.as_ref()
    }

    /// Kahn topological order, or `None` if the graph has a cycle.
    pub fn topo_order(&self) -> Option<Vec<usize>> {
        let mut indeg: Vec<usize> = self.adj_in.iter().map(Vec::len).collect();
        let mut queue: Vec<usize> = (0..self.nodes.len()).filter(|&v| indeg[v] == 0).collect();
        queue.sort_unstable();
        let mut order = Vec::with_capacity(self.nodes.len());
        let mut head = 0;
        while head < queue.len() {
            let v = queue[head];
            head += 1;
            order.push(v);
            for &ei in &self.adj_out[v] {
                let w = self.edges[ei].to;
                indeg[w] -= 1;
                if indeg[w] == 0 {
                    queue.push(w);
                }
            }
        }
        (order.len() == self.nodes.len()).then_some(order)
    }

    pub fn is_acyclic(&self) -> bool {
        self.topo_order().is_some()
    }
}

/// All simple directed paths for one commodity, in lexicographic edge-id
/// order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathSet {
    pub source: usize,
    pub target: usize,
    /// Each path is a sequence of edge indices into the network.
    pub paths: Vec<Vec<usize>>,
}

impl PathSet {
    pub fn edge_id_paths<'a>(&self, net: &'a Network) -> Vec<Vec<&'a str>> {
        self.paths
            .iter()
            .map(|p| p.iter().map(|&e| net.edges[e].id.as_str()).collect())
            .collect()
    }
}

/// Enumerate all simple `u -> v` paths, failing once more than `cap` exist.
///
/// Out-edges are explored in edge-id order, so the result is already sorted
/// lexicographically by edge-id sequence and is independent of node insertion
/// order.
pub fn enumerate_paths(
    net: &Network,
    u: usize,
    v: usize,
    cap: usize,
) -> Result<PathSet, NetError> {
    assert!(cap > 0, "path cap must be positive");
    let mut paths = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    let mut on_path = vec![false; net.nodes.len()];
    dfs_paths(net, u, v, cap, &mut stack, &mut on_path, &mut paths)?;
    Ok(PathSet {
        source: u,
        target: v,
        paths,
    })
}

fn dfs_paths(
    net: &Network,
    at: usize,
    goal: usize,
    cap: usize,
    stack: &mut Vec<usize>,
    on_path: &mut [bool],
    out: &mut Vec<Vec<usize>>,
) -> Result<(), NetError> {
    if at == goal && !stack.is_empty() {
        if out.len() == cap {
            return Err(NetError::PathExplosion {
                found: cap + 1,
                cap,
            });
        }
        out.push(stack.clone());
        return Ok(());
    }
    if at == goal {
        // Zero-length source==target query: no paths by convention.
        return Ok(());
    }
    on_path[at] = true;
    for &ei in net.out_edges(at) {
        let next = net.edges()[ei].to;
        if on_path[next] {
            continue;
        }
        stack.push(ei);
        let r = dfs_paths(net, next, goal, cap, stack, on_path, out);
        stack.pop();
        r?;
    }
    on_path[at] = false;
    Ok(())
}

/// One commodity for feasibility checking: terminals and total mass.
#[derive(Clone, Debug, PartialEq)]
pub struct Commodity {
    pub source: usize,
    pub target: usize,
    pub mass: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FlowViolation {
    NegativeFlow { type_idx: usize, edge: String, value: f64 },
    Conservation { type_idx: usize, node: String, imbalance: f64 },
    Mass { type_idx: usize, routed: f64, expected: f64 },
    Shape { type_idx: usize },
}

impl fmt::Display for FlowViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FlowViolation::NegativeFlow { type_idx, edge, value } => {
                write!(f, "type {type_idx}: negative flow {value} on edge `{edge}`")
            }
            FlowViolation::Conservation { type_idx, node, imbalance } => {
                write!(f, "type {type_idx}: conservation off by {imbalance} at node `{node}`")
            }
            FlowViolation::Mass { type_idx, routed, expected } => {
                write!(f, "type {type_idx}: routes {routed} of expected mass {expected}")
            }
            FlowViolation::Shape { type_idx } => {
                write!(f, "type {type_idx}: flow vector length does not match edge count")
            }
        }
    }
}

/// Check per-type conservation, nonnegativity and total mass for per-type
/// edge flow vectors. Returns the violated constraints; an empty vector means
/// the flow is valid.
pub fn validate_flow(
    net: &Network,
    commodities: &[Commodity],
    per_type_flow: &[Vec<f64>],
) -> Vec<FlowViolation> {
    let mut out = Vec::new();
    for (i, (com, flow)) in commodities.iter().zip(per_type_flow).enumerate() {
        if flow.len() != net.edges.len() {
            out.push(FlowViolation::Shape { type_idx: i });
            continue;
        }
        for (ei, &x) in flow.iter().enumerate() {
            if x < -FLOW_TOL {
                out.push(FlowViolation::NegativeFlow {
                    type_idx: i,
                    edge: net.edges[ei].id.clone(),
                    value: x,
                });
            }
        }
        for node in 0..net.nodes.len() {
            let outflow: f64 = net.adj_out[node].iter().map(|&e| flow[e]).sum();
            let inflow: f64 = net.adj_in[node].iter().map(|&e| flow[e]).sum();
            let mut expected = 0.0;
            if node == com.source {
                expected += com.mass;
            }
            if node == com.target {
                expected -= com.mass;
            }
            let imbalance = outflow - inflow - expected;
            if libm::fabs(imbalance) > FLOW_TOL {
                if node == com.source {
                    out.push(FlowViolation::Mass {
                        type_idx: i,
                        routed: outflow - inflow,
                        expected: com.mass,
                    });
                } else {
                    out.push(FlowViolation::Conservation {
                        type_idx: i,
                        node: net.nodes[node].clone(),
                        imbalance,
                    });
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_edge_recipe() {
        let net = dsp_edge("e1").build().unwrap();
        assert_eq!(net.nodes().len(), 2);
        assert_eq!(net.edges().len(), 1);
        let cert = net.dsp_certificate().unwrap();
        let ps = enumerate_paths(&net, cert.source, cert.target, 10).unwrap();
        assert_eq!(ps.paths.len(), 1);
    }

    #[test]
    fn series_and_parallel_counts() {
        let s = dsp_series(dsp_edge("a"), dsp_edge("b")).build().unwrap();
        assert_eq!(s.nodes().len(), 3);
        let cert = s.dsp_certificate().unwrap();
        assert_eq!(
            enumerate_paths(&s, cert.source, cert.target, 10).unwrap().paths.len(),
            1
        );

        let p = dsp_parallel(dsp_edge("a"), dsp_edge("b")).build().unwrap();
        assert_eq!(p.nodes().len(), 2);
        let cert = p.dsp_certificate().unwrap();
        assert_eq!(
            enumerate_paths(&p, cert.source, cert.target, 10).unwrap().paths.len(),
            2
        );
    }

    #[test]
    fn replay_is_idempotent() {
        let recipe = dsp_parallel(
            dsp_series(dsp_edge("a"), dsp_edge("b")),
            dsp_edge("c"),
        );
        let n1 = recipe.build().unwrap();
        let n2 = n1.dsp_certificate().unwrap().recipe.build().unwrap();
        assert_eq!(n1.edges(), n2.edges());
        assert_eq!(n1.nodes(), n2.nodes());
    }

    #[test]
    fn parallel_chains_path_count() {
        // q serial chains of length 3 composed in parallel -> q paths.
        let q = 4;
        let mut recipe: Option<DspRecipe> = None;
        for j in 0..q {
            let chain = dsp_series(
                dsp_series(
                    dsp_edge(&format!("p{j}-in")),
                    dsp_edge(&format!("p{j}-mid")),
                ),
                dsp_edge(&format!("p{j}-out")),
            );
            recipe = Some(match recipe {
                None => chain,
                Some(r) => dsp_parallel(r, chain),
            });
        }
        let net = recipe.unwrap().build().unwrap();
        let cert = net.dsp_certificate().unwrap();
        let ps = enumerate_paths(&net, cert.source, cert.target, 100).unwrap();
        assert_eq!(ps.paths.len(), q);
    }

    #[test]
    fn path_cap_triggers() {
        let net = dsp_parallel(dsp_edge("a"), dsp_edge("b")).build().unwrap();
        let cert = net.dsp_certificate().unwrap();
        let err = enumerate_paths(&net, cert.source, cert.target, 1).unwrap_err();
        assert!(matches!(err, NetError::PathExplosion { .. }));
    }

    #[test]
    fn attach_certificate_checks_structure() {
        let recipe = dsp_parallel(dsp_edge("a"), dsp_edge("b"));
        let built = recipe.build().unwrap();
        let mut imported = Network::new(
            built.nodes().to_vec(),
            built.edges().to_vec(),
        )
        .unwrap();
        assert!(imported.attach_certificate(recipe.clone()).is_ok());

        // A series recipe over the same edge ids does not match.
        let wrong = dsp_series(dsp_edge("a"), dsp_edge("b"));
        let mut imported2 = Network::new(built.nodes().to_vec(), built.edges().to_vec()).unwrap();
        assert!(imported2.attach_certificate(wrong).is_err());
    }

    #[test]
    fn validate_flow_reports_mass_violation() {
        let net = dsp_parallel(dsp_edge("e1"), dsp_edge("e2")).build().unwrap();
        let cert = net.dsp_certificate().unwrap();
        let com = Commodity {
            source: cert.source,
            target: cert.target,
            mass: 1.0,
        };
        let ok = validate_flow(&net, &[com.clone()], &[vec![0.5, 0.5]]);
        assert!(ok.is_empty());
        let bad = validate_flow(&net, &[com], &[vec![0.6, 0.6]]);
        assert!(bad
            .iter()
            .any(|v| matches!(v, FlowViolation::Mass { .. })));
    }
}
