//! JSON instance documents: a self-contained description of a biased game
//! (network, true costs, agent types with bias descriptors, optional
//! series-parallel recipe) that round-trips through serde.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use cgbias_core::costfun::{BiasSpec, CostModel, VarianceModel};
use cgbias_core::flowsolve::{AgentType, Instance};
use cgbias_core::netgraph::{dsp_edge, dsp_parallel, dsp_series, DspRecipe, Edge, Network};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug)]
pub struct DocError(pub String);

impl fmt::Display for DocError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for DocError {}

fn err<T>(msg: impl Into<String>) -> Result<T, DocError> {
    Err(DocError(msg.into()))
}

/// Edge cost descriptor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "lowercase")]
pub enum CostDoc {
    /// `{"poly": [a0, a1, ...]}`
    Poly(Vec<f64>),
    /// `{"table": [[x0, c0], [x1, c1], ...]}`
    Table(Vec<(f64, f64)>),
    /// `{"power": {"scale": s, "shift": h, "degree": d}}` for `s (x + h)^d`.
    Power { scale: f64, shift: f64, degree: u32 },
}

impl CostDoc {
    pub fn to_model(&self) -> CostModel {
        match self {
            CostDoc::Poly(c) => CostModel::Poly(c.clone()),
            CostDoc::Table(pts) => CostModel::Table(pts.clone()),
            CostDoc::Power { scale, shift, degree } => CostModel::ScaledShiftedPower {
                scale: *scale,
                shift: *shift,
                degree: *degree,
            },
        }
    }

    pub fn from_model(m: &CostModel) -> CostDoc {
        match m {
            CostModel::Poly(c) => CostDoc::Poly(c.clone()),
            CostModel::Table(pts) => CostDoc::Table(pts.clone()),
            CostModel::ScaledShiftedPower { scale, shift, degree } => CostDoc::Power {
                scale: *scale,
                shift: *shift,
                degree: *degree,
            },
        }
    }
}

/// Variance model for the mean-variance bias: either one descriptor for
/// every edge, or a per-edge map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VarianceDoc {
    Uniform(CostDoc),
    PerEdge(BTreeMap<String, CostDoc>),
}

impl VarianceDoc {
    fn to_model(&self) -> VarianceModel {
        match self {
            VarianceDoc::Uniform(c) => VarianceModel::Uniform(c.to_model()),
            VarianceDoc::PerEdge(m) => VarianceModel::PerEdge(
                m.iter().map(|(k, v)| (k.clone(), v.to_model())).collect(),
            ),
        }
    }

    fn from_model(m: &VarianceModel) -> VarianceDoc {
        match m {
            VarianceModel::Uniform(c) => VarianceDoc::Uniform(CostDoc::from_model(c)),
            VarianceModel::PerEdge(map) => VarianceDoc::PerEdge(
                map.iter().map(|(k, v)| (k.clone(), CostDoc::from_model(v))).collect(),
            ),
        }
    }
}

/// Bias descriptor, one of `{"identity":{}}`, `{"tax":{"beta":b}}`,
/// `{"pessimism":{"r":r}}`, `{"meanvar":{...}}`, `{"capacity":{...}}`,
/// `{"override":{edge-id: cost}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "lowercase")]
pub enum BiasDoc {
    Identity {},
    Tax {
        beta: f64,
    },
    Pessimism {
        r: f64,
    },
    MeanVar {
        gamma: f64,
        variance: VarianceDoc,
        kappa: Option<f64>,
    },
    Capacity {
        #[serde(rename = "L")]
        limit: f64,
        delta: f64,
        #[serde(rename = "M")]
        penalty: f64,
    },
    Override(BTreeMap<String, CostDoc>),
}

impl BiasDoc {
    pub fn to_spec(&self) -> BiasSpec {
        match self {
            BiasDoc::Identity {} => BiasSpec::Identity,
            BiasDoc::Tax { beta } => BiasSpec::Tax { beta: *beta },
            BiasDoc::Pessimism { r } => BiasSpec::Pessimism { r: *r },
            BiasDoc::MeanVar { gamma, variance, kappa } => BiasSpec::MeanVar {
                gamma: *gamma,
                variance: variance.to_model(),
                kappa: *kappa,
            },
            BiasDoc::Capacity { limit, delta, penalty } => BiasSpec::Capacity {
                limit: *limit,
                delta: *delta,
                penalty: *penalty,
            },
            BiasDoc::Override(map) => BiasSpec::Override(
                map.iter().map(|(k, v)| (k.clone(), v.to_model())).collect(),
            ),
        }
    }

    pub fn from_spec(spec: &BiasSpec) -> BiasDoc {
        match spec {
            BiasSpec::Identity => BiasDoc::Identity {},
            BiasSpec::Tax { beta } => BiasDoc::Tax { beta: *beta },
            BiasSpec::Pessimism { r } => BiasDoc::Pessimism { r: *r },
            BiasSpec::MeanVar { gamma, variance, kappa } => BiasDoc::MeanVar {
                gamma: *gamma,
                variance: VarianceDoc::from_model(variance),
                kappa: *kappa,
            },
            BiasSpec::Capacity { limit, delta, penalty } => BiasDoc::Capacity {
                limit: *limit,
                delta: *delta,
                penalty: *penalty,
            },
            BiasSpec::Override(map) => BiasDoc::Override(
                map.iter().map(|(k, v)| (k.clone(), CostDoc::from_model(v))).collect(),
            ),
        }
    }
}

/// Series-parallel recipe: `{"edge": id}` or `{"series": [...]}` /
/// `{"parallel": [...]}` with two or more operands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "lowercase")]
pub enum RecipeDoc {
    Edge(String),
    Series(Vec<RecipeDoc>),
    Parallel(Vec<RecipeDoc>),
}

impl RecipeDoc {
    pub fn to_recipe(&self) -> Result<DspRecipe, DocError> {
        let fold = |items: &[RecipeDoc],
                    join: fn(DspRecipe, DspRecipe) -> DspRecipe|
         -> Result<DspRecipe, DocError> {
            if items.len() < 2 {
                return err("series/parallel recipe needs at least two operands");
            }
            let mut acc = items[0].to_recipe()?;
            for item in &items[1..] {
                acc = join(acc, item.to_recipe()?);
            }
            Ok(acc)
        };
        match self {
            RecipeDoc::Edge(id) => Ok(dsp_edge(id)),
            RecipeDoc::Series(items) => fold(items, dsp_series),
            RecipeDoc::Parallel(items) => fold(items, dsp_parallel),
        }
    }

    pub fn from_recipe(r: &DspRecipe) -> RecipeDoc {
        match r {
            DspRecipe::Edge(id) => RecipeDoc::Edge(id.clone()),
            DspRecipe::Series(a, b) => {
                RecipeDoc::Series(vec![Self::from_recipe(a), Self::from_recipe(b)])
            }
            DspRecipe::Parallel(a, b) => {
                RecipeDoc::Parallel(vec![Self::from_recipe(a), Self::from_recipe(b)])
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeDoc {
    pub id: String,
    pub from: String,
    pub to: String,
    pub cost: CostDoc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TypeDoc {
    pub name: String,
    pub source: String,
    pub target: String,
    pub mass: f64,
    pub bias: BiasDoc,
}

/// One self-contained game file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDocument {
    pub schema: u32,
    pub name: String,
    pub nodes: Vec<String>,
    pub edges: Vec<EdgeDoc>,
    pub types: Vec<TypeDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dsp: Option<RecipeDoc>,
}

impl InstanceDocument {
    pub fn to_instance(&self) -> Result<Instance, DocError> {
        if self.schema != SCHEMA_VERSION {
            return err(format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                self.schema
            ));
        }
        let node_idx = |name: &str| -> Result<usize, DocError> {
            self.nodes
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| DocError(format!("unknown node `{name}`")))
        };
        let mut edges = Vec::with_capacity(self.edges.len());
        let mut costs = Vec::with_capacity(self.edges.len());
        for e in &self.edges {
            edges.push(Edge {
                id: e.id.clone(),
                from: node_idx(&e.from)?,
                to: node_idx(&e.to)?,
            });
            costs.push((e.id.clone(), e.cost.to_model()));
        }
        let mut net = Network::new(self.nodes.clone(), edges)
            .map_err(|e| DocError(format!("invalid network: {e}")))?;
        if let Some(recipe) = &self.dsp {
            net.attach_certificate(recipe.to_recipe()?)
                .map_err(|e| DocError(format!("dsp recipe does not match the network: {e}")))?;
        }
        let types = self
            .types
            .iter()
            .map(|t| AgentType {
                name: t.name.clone(),
                source: t.source.clone(),
                target: t.target.clone(),
                mass: t.mass,
                bias: t.bias.to_spec(),
            })
            .collect();
        Instance::new(&self.name, net, &costs, types)
            .map_err(|e| DocError(format!("invalid instance: {e}")))
    }

    pub fn from_instance(inst: &Instance) -> InstanceDocument {
        let nodes = inst.net.nodes().to_vec();
        let edges = inst
            .net
            .edges()
            .iter()
            .enumerate()
            .map(|(i, e)| EdgeDoc {
                id: e.id.clone(),
                from: nodes[e.from].clone(),
                to: nodes[e.to].clone(),
                cost: CostDoc::from_model(inst.cost(i)),
            })
            .collect();
        let types = inst
            .types
            .iter()
            .map(|t| TypeDoc {
                name: t.name.clone(),
                source: t.source.clone(),
                target: t.target.clone(),
                mass: t.mass,
                bias: BiasDoc::from_spec(&t.bias),
            })
            .collect();
        InstanceDocument {
            schema: SCHEMA_VERSION,
            name: inst.name.clone(),
            nodes,
            edges,
            types,
            dsp: inst
                .net
                .dsp_certificate()
                .map(|c| RecipeDoc::from_recipe(&c.recipe)),
        }
    }
}

/// Parse a document from JSON, reporting serde's line/column on failure.
pub fn parse_document(text: &str) -> Result<InstanceDocument, DocError> {
    serde_json::from_str(text).map_err(|e| DocError(format!("parse error: {e}")))
}

/// Serialize a document to pretty JSON with a trailing newline.
pub fn render_document(doc: &InstanceDocument) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("document serialization cannot fail");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use cgbias_core::exhibits::{gen_braess_quadratic, gen_pigou};

    #[test]
    fn pigou_round_trips_with_recipe() {
        let inst = gen_pigou(1.0, 2, BiasSpec::Tax { beta: 0.5 }, 1.0).unwrap();
        let doc = InstanceDocument::from_instance(&inst);
        let text = render_document(&doc);
        let back = parse_document(&text).unwrap();
        assert_eq!(doc, back);
        assert_eq!(render_document(&back), text);
        let inst2 = back.to_instance().unwrap();
        assert!(inst2.net.dsp_certificate().is_some());
        assert_eq!(inst2.net.edges().len(), 2);
    }

    #[test]
    fn bias_descriptors_use_lowercase_tags() {
        let doc = BiasDoc::from_spec(&BiasSpec::MeanVar {
            gamma: 2.0,
            variance: VarianceModel::Uniform(CostModel::monomial(0.5, 1)),
            kappa: Some(0.5),
        });
        let text = serde_json::to_string(&doc).unwrap();
        assert_eq!(
            text,
            r#"{"meanvar":{"gamma":2.0,"variance":{"poly":[0.0,0.5]},"kappa":0.5}}"#
        );
        let ident: BiasDoc = serde_json::from_str(r#"{"identity":{}}"#).unwrap();
        assert_eq!(ident.to_spec(), BiasSpec::Identity);
        let cap: BiasDoc =
            serde_json::from_str(r#"{"capacity":{"L":2.0,"delta":0.5,"M":10.0}}"#).unwrap();
        assert!(matches!(cap.to_spec(), BiasSpec::Capacity { .. }));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let inst = gen_braess_quadratic(BiasSpec::Identity);
        let doc = InstanceDocument::from_instance(&inst);
        let mut v: serde_json::Value = serde_json::from_str(&render_document(&doc)).unwrap();
        v.as_object_mut()
            .unwrap()
            .insert("extra".into(), serde_json::json!(1));
        let e = parse_document(&v.to_string()).unwrap_err();
        assert!(e.0.contains("extra"), "{e}");
    }

    #[test]
    fn override_bias_round_trips() {
        let mut map = BTreeMap::new();
        map.insert("ua".to_string(), CostDoc::Poly(vec![0.0]));
        map.insert("ub".to_string(), CostDoc::Poly(vec![60.0]));
        let doc = BiasDoc::Override(map);
        let text = serde_json::to_string(&doc).unwrap();
        let back: BiasDoc = serde_json::from_str(&text).unwrap();
        assert_eq!(doc, back);
    }
}
