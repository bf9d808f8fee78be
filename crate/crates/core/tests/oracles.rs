//! Solver oracle tests: closed-form equilibria and optima for the Pigou and
//! Braess families.

mod common;

use cgbias_core::costfun::{BiasSpec, CostModel, VarianceModel};
use cgbias_core::exhibits::{gen_braess_quadratic, gen_pigou, gen_tightness};
use cgbias_core::flowsolve::{
    random_flow, social_cost, solve_equilibrium_uniform, solve_social_optimum, vi_residual,
    FlowState, SolverConfig,
};
use cgbias_core::smoothbounds::{measured_bpoa, CostClass};
use cgbias_core::SplitRng;

fn meanvar_half_x() -> BiasSpec {
    BiasSpec::MeanVar {
        gamma: 1.0,
        variance: VarianceModel::Uniform(CostModel::monomial(0.5, 1)),
        kappa: None,
    }
}

// Expected loads on u-a, by hand: identity sends everything down the
// shortcut (x = 1). Pessimism r = 3 wants the interior indifference
// 9x^2 = 1, but x = 1/3 needs shortcut flow 2x - 1 < 0, so the
// equilibrium sits on the two outer paths at x = 1/2. Tax beta = 1
// equalizes 3x^2 + 1 against 6x^2, x = 1/sqrt(3). Mean-variance adds
// x/2 everywhere; equalizing x^2 + 3/2 against 2x^2 + 2x - 1/2 gives
// x^2 + 2x - 2 = 0, x = sqrt(3) - 1. Each value cross-checked by
// minimizing the perceived Beckmann potential with scipy.
#[test]
fn braess_variant_equilibrium_loads() {
    let cases: Vec<(BiasSpec, f64)> = vec![
        (BiasSpec::Identity, 1.0),
        (BiasSpec::Pessimism { r: 3.0 }, 0.5),
        (BiasSpec::Tax { beta: 1.0 }, 1.0 / 3f64.sqrt()),
        (meanvar_half_x(), 3f64.sqrt() - 1.0),
    ];
    for (bias, expected) in cases {
        let inst = gen_braess_quadratic(bias.clone());
        let (flow, cert) = solve_equilibrium_uniform(&inst, &SolverConfig::default()).unwrap();
        assert!(cert.converged);
        let ua = inst.net.edge_index("ua").unwrap();
        assert!(
            (flow.total[ua] - expected).abs() < 1e-6,
            "bias {bias:?}: load {} vs {expected}",
            flow.total[ua]
        );
    }
}

#[test]
fn braess_symmetric_flow_social_cost_formula() {
    let inst = gen_braess_quadratic(BiasSpec::Identity);
    let e = |id: &str| inst.net.edge_index(id).unwrap();
    for &x in &[0.6, 0.75, 1.0] {
        // Mass 1-x on each outer path, 2x-1 through the shortcut.
        let paths = vec![vec![
            (vec![e("ua"), e("av")], 1.0 - x),
            (vec![e("ub"), e("bv")], 1.0 - x),
            (vec![e("ua"), e("ab"), e("bv")], 2.0 * x - 1.0),
        ]];
        let flow = FlowState::from_paths(inst.net.edges().len(), paths);
        let sc = social_cost(&inst, &flow).unwrap();
        let formula = 2.0 * x * x * x - 2.0 * x + 2.0;
        assert!((sc - formula).abs() < 1e-12, "x = {x}");
    }
}

#[test]
fn braess_social_optimum() {
    let inst = gen_braess_quadratic(BiasSpec::Identity);
    let (flow, sc) = solve_social_optimum(&inst, &SolverConfig::default()).unwrap();
    let ua = inst.net.edge_index("ua").unwrap();
    assert!((flow.total[ua] - 1.0 / 3f64.sqrt()).abs() < 1e-6);
    assert!((sc - (2.0 - 4.0 / (3.0 * 3f64.sqrt()))).abs() < 1e-6);
}

#[test]
fn pigou_tax_tight_instance() {
    let beta = 0.5;
    let inst = gen_tightness(&CostClass::Affine, &BiasSpec::Tax { beta }).unwrap();
    let (flow, _) = solve_equilibrium_uniform(&inst, &SolverConfig::default()).unwrap();
    let e2 = inst.net.edge_index("e2").unwrap();
    assert!((flow.total[e2] - 1.0).abs() < 1e-6);

    let (opt, opt_sc) = solve_social_optimum(&inst, &SolverConfig::default()).unwrap();
    assert!((opt.total[e2] - (beta + 1.0) / 2.0).abs() < 1e-6);
    assert!((opt_sc - (1.0 - (beta + 1.0) / 4.0)).abs() < 1e-9);

    let report = measured_bpoa(&inst, &SolverConfig::default()).unwrap();
    let b1 = beta + 1.0;
    let expected = 4.0 / (4.0 * b1 - b1 * b1);
    assert!((report.measured_bpoa.unwrap() - expected).abs() < 1e-3);
}

#[test]
fn marginal_tax_restores_optimality() {
    for inst in [
        gen_braess_quadratic(BiasSpec::Tax { beta: 1.0 }),
        gen_pigou(1.0, 3, BiasSpec::Tax { beta: 1.0 }, 1.0).unwrap(),
    ] {
        let report = measured_bpoa(&inst, &SolverConfig::default()).unwrap();
        assert!((report.measured_bpoa.unwrap() - 1.0).abs() < 1e-3);
    }
}

#[test]
fn optimum_beats_random_flows() {
    let mut rng = SplitRng::new(42);
    for inst in [
        gen_pigou(1.0, 1, BiasSpec::Identity, 1.0).unwrap(),
        gen_braess_quadratic(BiasSpec::Identity),
    ] {
        let (_, opt_sc) = solve_social_optimum(&inst, &SolverConfig::default()).unwrap();
        for _ in 0..1000 {
            let flow = random_flow(&inst, &mut rng).unwrap();
            assert!(social_cost(&inst, &flow).unwrap() >= opt_sc - 1e-9);
        }
    }
}

#[test]
fn residual_vanishes_at_equilibrium() {
    for bias in [
        BiasSpec::Identity,
        BiasSpec::Pessimism { r: 2.0 },
        BiasSpec::Tax { beta: 0.7 },
    ] {
        let inst = gen_braess_quadratic(bias);
        let cfg = SolverConfig::default();
        let (flow, cert) = solve_equilibrium_uniform(&inst, &cfg).unwrap();
        assert!(cert.vi_residual <= cfg.tolerance);
        assert!(vi_residual(&inst, &flow).unwrap() <= 10.0 * cfg.tolerance);
    }
}

#[test]
fn equilibrium_cost_stable_across_restarts() {
    let inst = gen_braess_quadratic(BiasSpec::Identity);
    let base = SolverConfig::default();
    let (f0, _) = solve_equilibrium_uniform(&inst, &base).unwrap();
    let sc0 = social_cost(&inst, &f0).unwrap();
    for seed in 1..4 {
        let cfg = SolverConfig {
            restarts: 3,
            seed,
            ..SolverConfig::default()
        };
        let (f, _) = solve_equilibrium_uniform(&inst, &cfg).unwrap();
        assert!((social_cost(&inst, &f).unwrap() - sc0).abs() < 1e-6);
    }
}
