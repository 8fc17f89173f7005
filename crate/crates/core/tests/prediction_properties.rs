//! Properties of the Monte-Carlo predictive machinery: variance floors,
//! convergence with the sample budget, and bit-level reproducibility.

use bayesid::models::{ActivationKind, MlpSpec, ModelSpec, Network};
use bayesid::prediction::{
    free_run_bands, free_run_simulate, predictive_stats, PosteriorModel,
};
use bayesid::data::RegressorConfig;
use ndarray::{arr1, Array2};
use proptest::prelude::*;

/// Single linear layer reading `dim` regressors, weights as given.
fn linear_net(weights: &[f64]) -> Network {
    let spec = ModelSpec::Mlp(MlpSpec {
        input_dim: weights.len(),
        hidden: vec![(1, ActivationKind::Identity)],
        output_activation: ActivationKind::Identity,
        biases: false,
    });
    let mut net = Network::init(&spec, 0);
    let flat: Vec<f64> = weights.iter().copied().chain([1.0]).collect();
    net.set_params_flat(&flat);
    net
}

/// Posterior over the first-layer weights only; the output weight is fixed.
fn posterior(weights: &[f64], vars: &[f64], zeta: f64) -> PosteriorModel {
    let net = linear_net(weights);
    let mut variances: Vec<Array2<f64>> = net
        .slots()
        .iter()
        .map(|s| Array2::zeros(s.values.dim()))
        .collect();
    for (i, &v) in vars.iter().enumerate() {
        variances[0][[i, 0]] = v;
    }
    PosteriorModel {
        network: net,
        variances,
        zeta,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Predictive variance never drops below the aleatoric floor ζ.
    #[test]
    fn predictive_variance_respects_noise_floor(
        w in prop::collection::vec(-2.0..2.0_f64, 3),
        vars in prop::collection::vec(0.0..0.5_f64, 3),
        zeta in 0.0..0.3_f64,
        seed in any::<u64>(),
    ) {
        let pm = posterior(&w, &vars, zeta);
        let z = Array2::from_shape_fn((5, 3), |(r, c)| 0.3 * (r as f64) - 0.2 * (c as f64));
        let (_, var) = predictive_stats(&pm, &z, 64, seed).unwrap();
        for &v in var.iter() {
            prop_assert!(v >= zeta);
            prop_assert!(v.is_finite());
        }
    }

    /// Free-run simulation is a pure function of its inputs.
    #[test]
    fn free_run_is_deterministic(
        w in prop::collection::vec(-0.4..0.4_f64, 3),
        u_vals in prop::collection::vec(-1.0..1.0_f64, 12),
    ) {
        let net = linear_net(&w);
        let cfg = RegressorConfig { l_u: 1, l_y: 1 };
        let u = arr1(&u_vals);
        let a = free_run_simulate(&net, u.view(), &[0.1], &cfg).unwrap();
        let b = free_run_simulate(&net, u.view(), &[0.1], &cfg).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn monte_carlo_error_shrinks_with_sample_budget() {
    // Scalar linear model ŷ = w·z with w ~ N(1.2, 0.09) and noise floor
    // ζ = 0.05: closed-form predictive variance at z is ζ + 0.09 z².
    let pm = posterior(&[1.2], &[0.09], 0.05);
    let z = Array2::from_shape_vec((1, 1), vec![2.0]).unwrap();
    let exact_mean = 1.2 * 2.0;
    let exact_var = 0.05 + 0.09 * 4.0;

    let mut errs = Vec::new();
    for m in [1_000, 10_000, 100_000] {
        let (mean, var) = predictive_stats(&pm, &z, m, 424_242).unwrap();
        let e_mean = (mean[0] - exact_mean).abs() / exact_mean.abs();
        let e_var = (var[0] - exact_var).abs() / exact_var;
        errs.push(e_mean.max(e_var));
    }
    assert!(
        errs[2] < errs[0],
        "sampling error failed to shrink: {errs:?}"
    );
    assert!(errs[2] < 0.01, "1e5 draws should be within 1%: {errs:?}");
}

#[test]
fn band_draws_are_reproducible_and_seed_sensitive() {
    let pm = posterior(&[0.3, -0.2, 0.1], &[0.04, 0.02, 0.01], 0.02);
    let cfg = RegressorConfig { l_u: 1, l_y: 1 };
    let u = arr1(&[0.5, -0.3, 0.8, 0.1, -0.6, 0.2, 0.9, -0.4]);

    let a = free_run_bands(&pm, u.view(), &[0.0], &cfg, 16, 7).unwrap();
    let b = free_run_bands(&pm, u.view(), &[0.0], &cfg, 16, 7).unwrap();
    assert_eq!(a.mean, b.mean);
    assert_eq!(a.std, b.std);

    let c = free_run_bands(&pm, u.view(), &[0.0], &cfg, 16, 8).unwrap();
    assert_ne!(a.mean, c.mean, "different seeds must give different draws");
}
