//! Shared random generators for the integration tests.
//!
//! Each test binary compiles its own copy, so not every helper is used in
//! every binary.
#![allow(dead_code)]

use cgbias_core::costfun::{BiasSpec, CostModel};
use cgbias_core::flowsolve::{AgentType, Instance};
use cgbias_core::netgraph::{dsp_edge, dsp_parallel, dsp_series, DspRecipe};
use cgbias_core::SplitRng;

pub fn random_recipe(rng: &mut SplitRng, max_depth: usize, counter: &mut usize) -> DspRecipe {
    if max_depth == 0 || rng.next_f64() < 0.35 {
        let id = format!("e{:03}", *counter);
        *counter += 1;
        return dsp_edge(&id);
    }
    let a = random_recipe(rng, max_depth - 1, counter);
    let b = random_recipe(rng, max_depth - 1, counter);
    if rng.next_f64() < 0.5 {
        dsp_series(a, b)
    } else {
        dsp_parallel(a, b)
    }
}

/// Strictly increasing or constant polynomial of degree at most `max_deg`
/// with a positive constant term.
pub fn random_poly(rng: &mut SplitRng, max_deg: usize) -> CostModel {
    let deg = rng.below(max_deg + 1);
    let mut coeffs = vec![0.1 + 0.9 * rng.next_f64()];
    for _ in 0..deg {
        coeffs.push(if rng.next_f64() < 0.3 {
            0.0
        } else {
            0.1 + rng.next_f64()
        });
    }
    CostModel::poly(&coeffs)
}

/// A symmetric DSP instance: random recipe, random polynomial costs of
/// degree at most 3, and 2 to 4 same-terminal types with tax (optionally
/// also pessimism) biases.
pub fn random_symmetric_dsp(rng: &mut SplitRng, max_depth: usize, tax_only: bool) -> Instance {
    let mut counter = 0;
    let recipe = random_recipe(rng, max_depth, &mut counter);
    let net = recipe.build().unwrap();
    let cert = net.dsp_certificate().unwrap();
    let (s, t) = (
        net.nodes()[cert.source].clone(),
        net.nodes()[cert.target].clone(),
    );
    let costs: Vec<(String, CostModel)> = net
        .edges()
        .iter()
        .map(|e| (e.id.clone(), random_poly(rng, 3)))
        .collect();
    let n_types = 2 + rng.below(3);
    let types = (0..n_types)
        .map(|k| {
            let bias = if tax_only || rng.next_f64() < 0.5 {
                BiasSpec::Tax {
                    beta: 2.0 * rng.next_f64(),
                }
            } else {
                BiasSpec::Pessimism {
                    r: 1.0 + 2.0 * rng.next_f64(),
                }
            };
            AgentType {
                name: format!("t{k}"),
                source: s.clone(),
                target: t.clone(),
                mass: 0.1 + 0.9 * rng.next_f64(),
                bias,
            }
        })
        .collect();
    Instance::new("random-dsp", net, &costs, types).unwrap()
}
