use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use estimand_core::adjust::{
    maic_estimate, maic_weights, stc_gcomp, stc_plugin, GcompOptions, GcompSe, MaicWeights, MomentOrder,
};
use estimand_core::quadrature::QuadratureSettings;
use estimand_core::trial::{simulate_trial, Formula, TrialConfig, TrialIpd};
use estimand_core::{ctem, mte, Coefficients, CovariateDistribution, LinkFunction, OutcomeModel};

fn delta_method() -> GcompOptions {
    GcompOptions {
        se: GcompSe::DeltaMethod,
        quadrature: QuadratureSettings::default(),
    }
}

fn simulate(link: LinkFunction, c: Coefficients, dist: &CovariateDistribution, n: usize, seed: u64) -> (OutcomeModel, TrialIpd) {
    let model = OutcomeModel::canonical(link, c).unwrap();
    let ipd = simulate_trial(&TrialConfig::new(model, dist.clone(), n, seed)).unwrap();
    (model, ipd)
}

#[test]
fn maic_matches_random_feasible_targets() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let n = 400;
    let x = DMatrix::from_fn(n, 3, |_, j| match j {
        0 => rng.random::<f64>() * 4.0 - 1.0,
        1 => f64::from(rng.random_bool(0.3)),
        _ => rng.random::<f64>().powi(2),
    });
    for _ in 0..100 {
        // a strictly positive mixture of the rows is an interior point of the hull
        let mix: Vec<f64> = (0..n).map(|_| rng.random::<f64>().powi(4) + 1e-3).collect();
        let total: f64 = mix.iter().sum();
        let target: Vec<f64> = (0..3)
            .map(|j| (0..n).map(|i| mix[i] * x[(i, j)]).sum::<f64>() / total)
            .collect();
        let w = maic_weights(&x, &target).unwrap();
        for j in 0..3 {
            let m: f64 = (0..n).map(|i| w.weights[i] * x[(i, j)]).sum();
            assert!((m - target[j]).abs() < 1e-8, "moment {j}: {m} vs {}", target[j]);
        }
        assert!(w.ess > 0.0 && w.ess <= n as f64 + 1e-9);
        assert!((w.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn maic_second_moments_match() {
    let dist = CovariateDistribution::normal(0.5, 1.0).unwrap();
    let (_, ipd) = simulate(LinkFunction::Identity, Coefficients::homogeneous(0.0, 1.0, 1.0), &dist, 5000, 3);
    let target = [0.8, 0.8 * 0.8 + 0.7 * 0.7];
    let w = MaicWeights::fit(&ipd, &[], MomentOrder::FirstAndSecond, &target).unwrap();
    let m1: f64 = (0..ipd.len()).map(|i| w.weights[i] * ipd.x(i)[0]).sum();
    let m2: f64 = (0..ipd.len()).map(|i| w.weights[i] * ipd.x(i)[0].powi(2)).sum();
    assert!((m1 - target[0]).abs() < 1e-8 && (m2 - target[1]).abs() < 1e-8);
    assert_eq!(w.moment_names, ["x1", "x1^2"]);
}

#[test]
fn maic_reweights_a_bernoulli_population() {
    let c = Coefficients::linear(-0.5, 1.0, 0.8, 0.5);
    let (model, ipd) = simulate(LinkFunction::Logit, c, &CovariateDistribution::bernoulli(0.5).unwrap(), 1_000_000, 21);
    let w = MaicWeights::fit(&ipd, &[], MomentOrder::First, &[0.8]).unwrap();
    let r = maic_estimate(&ipd, &w, LinkFunction::Logit.scale(), "target").unwrap();
    let truth = mte(&model, &CovariateDistribution::bernoulli(0.8).unwrap(), &QuadratureSettings::default()).unwrap();
    assert!(((r.estimate - truth) / r.se).abs() < 3.0, "{} vs {truth} (se {})", r.estimate, r.se);
}

#[test]
fn gcomp_recovers_the_two_point_mixture_mte() {
    let dist = CovariateDistribution::bernoulli(0.5).unwrap();
    let (_, ipd) = simulate(LinkFunction::Logit, Coefficients::homogeneous(0.0, 2.0, 1.0), &dist, 1_000_000, 22);
    let r = stc_gcomp(&ipd, &dist, LinkFunction::Logit, Formula::Interaction, &delta_method(), "BC").unwrap();
    assert!(((r.estimate - 0.8698) / r.se).abs() < 3.0, "{} (se {})", r.estimate, r.se);
}

#[test]
fn plugin_tracks_ctem_and_departs_from_mte_under_logit() {
    let index = CovariateDistribution::normal(0.5, 1.0).unwrap();
    let target = CovariateDistribution::normal(0.0, 1.0).unwrap();
    let c = Coefficients::quadratic(-0.5, 1.5, -0.2, 1.0, 0.4, 0.6);
    let (model, ipd) = simulate(LinkFunction::Logit, c, &index, 1_000_000, 23);
    let r = stc_plugin(&ipd, &[0.0], LinkFunction::Logit, Formula::QuadraticInteraction, "target").unwrap();
    let q = QuadratureSettings::default();
    let ctem_truth = ctem(&model, &target).unwrap();
    let mte_truth = mte(&model, &target, &q).unwrap();
    assert!(((r.estimate - ctem_truth) / r.se).abs() < 3.0);
    assert!(((r.estimate - mte_truth) / r.se).abs() > 3.0, "ctem {ctem_truth} mte {mte_truth}");
}

#[test]
fn identity_link_methods_agree_on_linear_modification() {
    let index = CovariateDistribution::normal(0.5, 1.0).unwrap();
    let target = CovariateDistribution::normal(1.0, 1.0).unwrap();
    let (_, ipd) = simulate(LinkFunction::Identity, Coefficients::linear(0.5, 1.0, 1.0, 0.5), &index, 100_000, 24);
    let w = MaicWeights::fit(&ipd, &[], MomentOrder::First, &[1.0]).unwrap();
    let results = [
        maic_estimate(&ipd, &w, LinkFunction::Identity.scale(), "target").unwrap(),
        stc_plugin(&ipd, &[1.0], LinkFunction::Identity, Formula::Interaction, "target").unwrap(),
        stc_gcomp(&ipd, &target, LinkFunction::Identity, Formula::Interaction, &delta_method(), "target").unwrap(),
    ];
    for a in &results {
        assert!(((a.estimate - 1.5) / a.se).abs() < 3.0, "{:?}", a);
        for b in &results {
            let se = a.se.max(b.se);
            assert!((a.estimate - b.estimate).abs() < 3.0 * se, "{:?} vs {:?}", a.method, b.method);
        }
    }
}

#[test]
fn conditional_and_marginal_estimators_diverge_under_logit() {
    let dist = CovariateDistribution::normal(0.0, 1.0).unwrap();
    let (_, ipd) = simulate(LinkFunction::Logit, Coefficients::homogeneous(0.0, 2.0, 1.0), &dist, 1_000_000, 25);
    let w = MaicWeights::fit(&ipd, &[], MomentOrder::First, &[0.0]).unwrap();
    let maic = maic_estimate(&ipd, &w, LinkFunction::Logit.scale(), "target").unwrap();
    let plugin = stc_plugin(&ipd, &[0.0], LinkFunction::Logit, Formula::Interaction, "target").unwrap();
    let se = (maic.se.powi(2) + plugin.se.powi(2)).sqrt();
    assert!((plugin.estimate - maic.estimate) / se > 3.0);
}
