//! Release gate: every guarantee the tool advertises, checked end to end at
//! its stated tolerance. Each test prints one `[PASS]` line when its
//! guarantee holds; a failed assertion marks the corresponding guarantee as
//! not met.

use std::time::Instant;

use bayesid::hessian::{
    finite_diff_network_diag, finite_diff_rnn_diag, mac_count, mlp_hessian_exact,
    network_hessian_diag, rnn_hessian_diag, MacVariant,
};
use bayesid::models::rnn::SimpleRnn;
use bayesid::models::{ActivationKind, MlpNetwork, MlpSpec, ModelSpec, Network};
use bayesid::prediction::{predictive_stats, PosteriorModel};
use bayesid::sbl::{
    cccp_gap, posterior_variance, regularised_loss, solve_psi_scalar, update_alpha, GroupWeights,
    Grouping,
};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FD_EPS: f64 = 1e-4;

fn assert_rel(analytic: f64, oracle: f64, rel: f64, floor: f64, what: &str) {
    let tol = floor + rel * oracle.abs().max(analytic.abs());
    assert!(
        (analytic - oracle).abs() <= tol,
        "{what}: analytic {analytic} vs oracle {oracle} (tol {tol})"
    );
}

/// Diagonals of the exact per-layer curvature blocks, reshaped to the slot
/// layout (`flat = col * rows + row` within a block).
fn exact_diagonals(net: &MlpNetwork, z: &Array2<f64>, targets: &Array1<f64>) -> Vec<Array2<f64>> {
    let blocks = mlp_hessian_exact(net, z, targets).expect("net small enough for exact blocks");
    let mut out = Vec::new();
    for (l, block) in blocks.iter().enumerate() {
        let m = if l == 0 { net.input_dim } else { net.units[l - 1] };
        let n = net.units[l];
        let mut diag = Array2::zeros((m, n));
        for a in 0..m {
            for b in 0..n {
                let flat = b * m + a;
                diag[[a, b]] = block[[flat, flat]];
            }
        }
        out.push(diag);
    }
    out
}

/// Exact curvature on a 2-3-1 tanh net agrees with central finite
/// differences to 1e-5 relative across 20 seeds, and the whole check runs
/// in under a second.
#[test]
fn exact_curvature_oracle_is_fast_and_tight() {
    let start = Instant::now();
    let spec = ModelSpec::Mlp(MlpSpec {
        input_dim: 2,
        hidden: vec![(3, ActivationKind::Tanh)],
        output_activation: ActivationKind::Identity,
        biases: false,
    });
    for seed in 0..20u64 {
        let net = Network::init(&spec, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(9_000 + seed);
        let z = Array2::from_shape_fn((5, 2), |_| rng.random_range(-1.2..1.2));
        let targets = Array1::from_shape_fn(5, |_| rng.random_range(-1.0..1.0));

        let mlp = match &net {
            Network::Mlp(m) => m,
            Network::Lstm(_) => unreachable!(),
        };
        let exact = exact_diagonals(mlp, &z, &targets);
        let oracle = finite_diff_network_diag(&net, &z, &targets, 1, FD_EPS).unwrap();
        for (l, diag) in exact.iter().enumerate() {
            for (idx, &v) in diag.indexed_iter() {
                assert_rel(v, oracle[l][idx], 1e-5, 1e-7, &format!("seed {seed} layer {l} {idx:?}"));
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 1.0,
        "oracle comparison took {elapsed:?}, budget is 1 s"
    );
    eprintln!(
        "[PASS] exact curvature matches finite differences to 1e-5 relative on 20 seeds in {:.0} ms",
        elapsed.as_secs_f64() * 1e3
    );
}

/// The diagonal-only recursion loses nothing until it crosses a hidden
/// layer with more than one downstream unit: for scalar-output nets the
/// weights into the last hidden layer (and the output weights) carry
/// exactly the same curvature as the full per-layer blocks.
#[test]
fn diagonal_recursion_is_exact_through_the_last_hidden_layer() {
    use ActivationKind::{Sigmoid, Tanh};
    let cases = [
        (2, vec![(3, Tanh)]),
        (3, vec![(4, Sigmoid)]),
        (2, vec![(3, Tanh), (3, Sigmoid)]),
        (3, vec![(4, Sigmoid), (2, Tanh), (3, Tanh)]),
    ];
    for (case, (input_dim, hidden)) in cases.iter().enumerate() {
        for seed in 0..5u64 {
            let spec = ModelSpec::Mlp(MlpSpec {
                input_dim: *input_dim,
                hidden: hidden.clone(),
                output_activation: ActivationKind::Identity,
                biases: false,
            });
            let net = Network::init(&spec, 500 * case as u64 + seed);
            let mut rng = ChaCha8Rng::seed_from_u64(77 + seed);
            let z = Array2::from_shape_fn((6, *input_dim), |_| rng.random_range(-1.0..1.0));
            let targets = Array1::from_shape_fn(6, |_| rng.random_range(-1.0..1.0));

            let mlp = match &net {
                Network::Mlp(m) => m,
                Network::Lstm(_) => unreachable!(),
            };
            let exact = exact_diagonals(mlp, &z, &targets);
            let simplified = network_hessian_diag(&net, &z, &targets, 1);
            let layers = exact.len();
            for l in [layers - 2, layers - 1] {
                for (idx, &v) in simplified[l].indexed_iter() {
                    assert_rel(
                        v,
                        exact[l][idx],
                        1e-10,
                        1e-14,
                        &format!("case {case} seed {seed} layer {l} {idx:?}"),
                    );
                }
            }
        }
    }
    eprintln!("[PASS] diagonal recursion equals exact blocks in the last two layers to 1e-10 relative");
}

/// Recurrent curvature on a one-state linear cell over a three-step series
/// with the window covering the whole series.
///
/// The recurrent recursion treats each unrolled visit of a shared weight as
/// its own layer and sums per-visit diagonals, so it omits the cross-visit
/// products `2·(∂y/∂W at step j)·(∂y/∂W at step k)` and the second-order
/// path terms that arise because the state weight multiplies its own past
/// influence. Wherever those omitted terms vanish — no state feedback plus
/// zero residuals, or a single step — the diagonals are exact and must
/// match finite differences to 1e-5 relative. For a general one-state
/// linear cell the difference from finite differences must be *exactly*
/// the omitted terms, which have a closed form; anything else would be an
/// implementation bug rather than the documented approximation.
#[test]
fn single_state_recurrent_curvature_matches_the_oracle() {
    // Exactness regime: no state feedback, zero residuals.
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1_300 + seed);
        let mut rnn = SimpleRnn::init(1, 1, ActivationKind::Identity, &mut rng);
        rnn.w_h[[0, 0]] = 0.0;
        let z = Array2::from_shape_fn((3, 1), |_| rng.random_range(-1.0..1.0));
        let (outputs, _) = rnn.forward(&z);

        let got = rnn_hessian_diag(&rnn, &z, &outputs, 3);
        let oracle = finite_diff_rnn_diag(&rnn, &z, &outputs, FD_EPS).unwrap();
        for (slot, name) in [(0, "input map"), (1, "state map"), (2, "readout")] {
            assert_rel(
                got[slot][[0, 0]],
                oracle[slot][[0, 0]],
                1e-5,
                1e-7,
                &format!("seed {seed} {name}"),
            );
        }
    }

    // Single-step regime: nothing to unroll, exact for any weights.
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(2_300 + seed);
        let rnn = SimpleRnn::init(1, 1, ActivationKind::Identity, &mut rng);
        let z = Array2::from_shape_fn((1, 1), |_| rng.random_range(-1.0..1.0));
        let targets = Array1::from_shape_fn(1, |_| rng.random_range(-1.0..1.0));
        let got = rnn_hessian_diag(&rnn, &z, &targets, 3);
        let oracle = finite_diff_rnn_diag(&rnn, &z, &targets, FD_EPS).unwrap();
        for slot in 0..3 {
            assert_rel(
                got[slot][[0, 0]],
                oracle[slot][[0, 0]],
                1e-5,
                1e-7,
                &format!("seed {seed} single-step slot {slot}"),
            );
        }
    }

    // General regime: the gap to finite differences is exactly the omitted
    // cross-visit and second-order path terms.
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(3_300 + seed);
        let rnn = SimpleRnn::init(1, 1, ActivationKind::Identity, &mut rng);
        let (b, a, c) = (rnn.w_i[[0, 0]], rnn.w_h[[0, 0]], rnn.w_o[[0, 0]]);
        let z: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();

        // Forward state and its parameter derivatives, by direct recursion:
        // s(t) = a s(t-1) + b z(t), p = ds/da, q = d²s/da², r = ds/db.
        let (mut s, mut p, mut q, mut r) = (vec![0.0; 4], vec![0.0; 4], vec![0.0; 4], vec![0.0; 4]);
        for t in 1..=3 {
            s[t] = a * s[t - 1] + b * z[t - 1];
            p[t] = s[t - 1] + a * p[t - 1];
            q[t] = 2.0 * p[t - 1] + a * q[t - 1];
            r[t] = a * r[t - 1] + z[t - 1];
        }
        let e: Vec<f64> = (1..=3).map(|t| c * s[t] - y[t - 1]).collect();

        // True diagonals of the mean loss (1/3) sum of half squared errors.
        let true_wh =
            (1..=3).map(|t| c * c * p[t] * p[t] + e[t - 1] * c * q[t]).sum::<f64>() / 3.0;
        let true_wi = (1..=3).map(|t| c * c * r[t] * r[t]).sum::<f64>() / 3.0;
        let true_wo = (1..=3).map(|t| s[t] * s[t]).sum::<f64>() / 3.0;

        // What the per-visit construction keeps.
        let kept_wh = c * c * (s[1] * s[1] + s[2] * s[2] + a * a * s[1] * s[1]) / 3.0;
        let kept_wi = c * c
            * (z[0] * z[0] * (1.0 + a * a + a.powi(4))
                + z[1] * z[1] * (1.0 + a * a)
                + z[2] * z[2])
            / 3.0;

        let za = Array2::from_shape_vec((3, 1), z.clone()).unwrap();
        let ya = Array1::from_vec(y.clone());
        let got = rnn_hessian_diag(&rnn, &za, &ya, 3);
        let oracle = finite_diff_rnn_diag(&rnn, &za, &ya, FD_EPS).unwrap();

        // The implementation reproduces the per-visit construction exactly...
        assert_rel(got[0][[0, 0]], kept_wi, 1e-12, 1e-13, &format!("seed {seed} kept input"));
        assert_rel(got[1][[0, 0]], kept_wh, 1e-12, 1e-13, &format!("seed {seed} kept state"));
        assert_rel(got[2][[0, 0]], true_wo, 1e-12, 1e-13, &format!("seed {seed} readout"));
        // ...finite differences see the full derivative...
        assert_rel(oracle[0][[0, 0]], true_wi, 1e-5, 1e-7, &format!("seed {seed} oracle input"));
        assert_rel(oracle[1][[0, 0]], true_wh, 1e-5, 1e-7, &format!("seed {seed} oracle state"));
        // ...and the gap is exactly the omitted terms.
        let omitted_wh = (c * c * 2.0 * a * s[1] * s[2] + 2.0 * c * e[2] * s[1]) / 3.0;
        let omitted_wi = c * c * 2.0 * a
            * (z[0] * z[1] * (1.0 + a * a) + a * z[0] * z[2] + z[1] * z[2])
            / 3.0;
        assert_rel(
            true_wh - kept_wh,
            omitted_wh,
            1e-12,
            1e-13,
            &format!("seed {seed} omitted state terms"),
        );
        assert_rel(
            true_wi - kept_wi,
            omitted_wi,
            1e-12,
            1e-13,
            &format!("seed {seed} omitted input terms"),
        );
    }
    eprintln!(
        "[PASS] one-state linear recurrent curvature: exact vs finite differences (1e-5) where the \
         construction's omitted cross-visit terms vanish; elsewhere the gap equals those terms in closed form"
    );
}

/// Cost model of the curvature recursions, in multiply–accumulates per
/// layer. The diagonal recursion for a 100→100 layer costs 40,200 MACs —
/// within 1% of the 0.04×10⁶ figure it is usually quoted as. The full-block
/// recursion costs 8,029,900 MACs, about 200× the diagonal one; that is the
/// entire case for carrying diagonals instead of blocks.
#[test]
fn curvature_cost_counts_match_their_closed_forms() {
    let simplified = mac_count(MacVariant::Simplified, 100, 100);
    assert_eq!(simplified, 40_200);
    let quoted = 0.04e6;
    let rel = (simplified as f64 - quoted).abs() / quoted;
    assert!(rel <= 0.01, "simplified count is {rel:.4} away from the quoted figure");

    let exact = mac_count(MacVariant::Exact, 100, 100);
    assert_eq!(exact, 8_029_900);
    assert!(exact > 100 * simplified, "full blocks must dwarf the diagonal recursion");
    eprintln!(
        "[PASS] curvature cost: simplified 40,200 MACs (within 1% of 0.04e6), exact {exact} MACs"
    );
}

/// Randomized stress over the width solver and slope update: the tangent
/// construction never undershoots the concave term, the closed-form width
/// minimiser beats an exhaustive 1e-4-spaced grid, and the slope stays
/// nonnegative whenever curvature has been clamped.
#[test]
fn width_solver_and_slope_survive_randomized_stress() {
    let mut rng = ChaCha8Rng::seed_from_u64(55_555);

    // Tangent-over-concave gap, 1000 random width/curvature vectors.
    for case in 0..1000 {
        let n = rng.random_range(1..9usize);
        let psi_k: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.random_range(-3.0..3.0))).collect();
        let psi_c: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.random_range(-3.0..3.0))).collect();
        let h: Vec<f64> = (0..n)
            .map(|_| (rng.random_range(-2.0..2.0) as f64).max(0.0) * 10.0)
            .collect();
        let gap = cccp_gap(&psi_c, &psi_k, &h);
        assert!(gap >= -1e-10, "case {case}: tangent undershoots, gap {gap}");
    }

    // Closed-form width minimiser vs a 1e-4-resolution grid search.
    for case in 0..1000 {
        let w = rng.random_range(-1.0..1.0);
        let alpha = 10f64.powf(rng.random_range(-0.6..1.4));
        let solved = solve_psi_scalar(w, alpha)
            .expect("positive slope")
            .expect("positive slope always yields a width");
        let objective = |psi: f64| w * w / psi + alpha * psi;
        let mut grid_best = f64::INFINITY;
        let mut psi = 1e-4;
        while psi <= 2.5 {
            grid_best = grid_best.min(objective(psi));
            psi += 1e-4;
        }
        assert!(
            solved.objective <= grid_best + 1e-12,
            "case {case}: solver {} beaten by grid {grid_best}",
            solved.objective
        );
    }

    // Slope nonnegativity under clamped curvature.
    for case in 0..1000 {
        let h = (rng.random_range(-5.0..5.0) as f64).max(0.0);
        let psi = 10f64.powf(rng.random_range(-6.0..6.0));
        let sigma = posterior_variance(h, psi).unwrap();
        let alpha = update_alpha(sigma, psi).unwrap();
        assert!(alpha >= 0.0, "case {case}: negative slope {alpha} (h {h}, psi {psi})");
    }
    eprintln!("[PASS] width solver beats a 1e-4 grid, tangent gap >= -1e-10, slope >= 0 (1000 cases each)");
}

/// With every group weight at one, the regularised loss is exactly the
/// plain sparse-group-lasso objective: data loss plus lambda times a mix of
/// entrywise L1 and groupwise L2 norms.
#[test]
fn unit_weights_make_the_penalty_plain_sparse_group_lasso() {
    use ActivationKind::{Identity, Relu, Sigmoid, Tanh};
    let groupings = [
        Grouping::ShapeWise,
        Grouping::RowWise,
        Grouping::ColumnWise,
        Grouping::RowAndColumn,
    ];
    for seed in 0..20u64 {
        let spec = if seed % 4 == 3 {
            ModelSpec::Lstm(bayesid::models::LstmSpec {
                input_dim: 1 + (seed as usize % 3),
                hidden: 2 + (seed as usize % 2),
                biases: seed % 2 == 0,
            })
        } else {
            ModelSpec::Mlp(MlpSpec {
                input_dim: 2 + (seed as usize % 3),
                hidden: vec![(3, [Tanh, Sigmoid, Relu][seed as usize % 3])],
                output_activation: Identity,
                biases: seed % 2 == 1,
            })
        };
        let net = Network::init(&spec, 31 * seed + 7);
        let slots = net.slots();
        let mut rng = ChaCha8Rng::seed_from_u64(777 + seed);
        let lambda = rng.random_range(1e-4..1e-1);
        let data_loss = rng.random_range(0.0..2.0);

        let weights: Vec<GroupWeights> = slots
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let (r, c) = s.values.dim();
                GroupWeights::ones(groupings[i % 4], r, c)
            })
            .collect();
        let got = regularised_loss(data_loss, slots, &weights, lambda);

        // Independent reconstruction of the plain penalty.
        let mut penalty = 0.0;
        for (i, s) in slots.iter().enumerate() {
            let (rows, cols) = s.values.dim();
            match groupings[i % 4] {
                Grouping::ShapeWise => {
                    penalty += s.values.iter().map(|w| w.abs()).sum::<f64>();
                }
                Grouping::RowWise => {
                    for a in 0..rows {
                        penalty += s.values.row(a).iter().map(|w| w * w).sum::<f64>().sqrt();
                    }
                }
                Grouping::ColumnWise => {
                    for b in 0..cols {
                        penalty += s.values.column(b).iter().map(|w| w * w).sum::<f64>().sqrt();
                    }
                }
                Grouping::RowAndColumn => {
                    for a in 0..rows {
                        penalty += s.values.row(a).iter().map(|w| w * w).sum::<f64>().sqrt();
                    }
                    for b in 0..cols {
                        penalty += s.values.column(b).iter().map(|w| w * w).sum::<f64>().sqrt();
                    }
                }
            }
        }
        let expected = data_loss + lambda * penalty;
        assert!(
            (got - expected).abs() <= 1e-12 * expected.abs().max(1.0),
            "seed {seed}: regularised {got} vs plain {expected}"
        );
    }
    eprintln!("[PASS] unit group weights reduce the objective to plain sparse group lasso (20 nets, 1e-12)");
}

/// Full pipeline on a known first-order system: five seeded repeats on
/// y(t) = 0.7 y(t-1) + 0.5 u(t-1) + e with sigma = 0.01 over 800 samples
/// (600 estimation / 200 validation), a 1x10 identity MLP over five input
/// and five output lags, six refinement cycles. The best model must reach
/// free-run validation RMSE <= 0.05, prune every lag >= 3, keep sparsity
/// >= 60%, and finish inside two minutes.
#[test]
fn first_order_dynamics_are_recovered_within_budget() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let config = format!(
        r#"
[dataset]
kind = "arx"
samples = 800
seed = 1
noise_std = 0.01
a = [0.7]
b = [0.5]

[split]
estimation_fraction = 0.75

[regressors]
l_u = 5
l_y = 5

[model]
kind = "mlp"
units = [10]
activation = "identity"

[identification]
lambda = 3e-3
cycles = 6
epochs = 200
repeats = 5
seed = 0
tau = 1
learning_rate = 0.01

[simulation]
mc_samples = 16

[output]
dir = "{}"
"#,
        out_dir.display()
    );
    let cfg_path = tmp.path().join("experiment.toml");
    std::fs::write(&cfg_path, config).unwrap();

    let start = Instant::now();
    let code = bayesid_cli::runner::run(&cfg_path).expect("run completes");
    let elapsed = start.elapsed();
    assert_eq!(code, 0, "identification must succeed");
    assert!(
        elapsed.as_secs_f64() < 120.0,
        "run took {elapsed:?}, budget is 2 min"
    );

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap())
            .unwrap();
    let best = &report["report"]["best"];
    let rmse = best["val_rmse"].as_f64().unwrap();
    let sparsity = best["sparsity"].as_f64().unwrap();
    let repeat = best["repeat"].as_u64().unwrap() as usize;
    let cycle = best["cycle"].as_u64().unwrap() as usize;
    let pruned: Vec<u64> = report["report"]["repeats"][repeat]["cycles"][cycle]
        ["pruned_regressors"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap())
        .collect();

    assert!(rmse <= 0.05, "free-run validation RMSE {rmse} exceeds 0.05");
    assert!(sparsity >= 0.60, "sparsity {sparsity} below 60%");
    // Regressor order: u(s), u(s-1)..u(s-5), y(s-1)..y(s-5); indices 3-5 and
    // 8-10 are the u and y lags of order >= 3.
    for lag in [3u64, 4, 5, 8, 9, 10] {
        assert!(pruned.contains(&lag), "lag index {lag} should be pruned, got {pruned:?}");
    }
    eprintln!(
        "[PASS] first-order recovery: RMSE {rmse:.4} <= 0.05, sparsity {:.1}% >= 60%, lags >= 3 pruned, {:.0} s < 120 s",
        sparsity * 100.0,
        elapsed.as_secs_f64()
    );
}

/// Monte-Carlo predictive statistics on a net with a single uncertain
/// weight agree with the analytic Gaussian push-through at 10^5 draws
/// within 3% relative, and collapse exactly to the noise floor when the
/// weight variance is zero.
#[test]
fn analytic_gaussian_push_through_matches_monte_carlo() {
    let spec = ModelSpec::Mlp(MlpSpec {
        input_dim: 1,
        hidden: vec![(1, ActivationKind::Identity)],
        output_activation: ActivationKind::Identity,
        biases: false,
    });
    let mut net = Network::init(&spec, 0);
    let w = 1.7;
    net.set_params_flat(&[w, 1.0]);
    let var_w = 0.09;
    let zeta = 0.02;
    let mut pm = PosteriorModel::point(net.clone(), zeta);
    pm.variances[0][[0, 0]] = var_w;

    let z = Array2::from_shape_vec((3, 1), vec![0.5, -1.3, 2.0]).unwrap();
    let (means, vars) = predictive_stats(&pm, &z, 100_000, 2_024).unwrap();
    for (i, zv) in [0.5, -1.3, 2.0].iter().enumerate() {
        let mean_true = w * zv;
        let var_true = zeta + var_w * zv * zv;
        let mean_rel = (means[i] - mean_true).abs() / mean_true.abs();
        let var_rel = (vars[i] - var_true).abs() / var_true;
        assert!(mean_rel <= 0.03, "mean at z={zv}: {} vs {mean_true}", means[i]);
        assert!(var_rel <= 0.03, "variance at z={zv}: {} vs {var_true}", vars[i]);
    }

    // Zero weight variance: the predictive variance IS the noise floor.
    let point = PosteriorModel::point(net, zeta);
    let (_, vars0) = predictive_stats(&point, &z, 500, 7).unwrap();
    for &v in vars0.iter() {
        assert_eq!(v, zeta, "with no weight uncertainty the band is exactly the noise floor");
    }
    eprintln!("[PASS] predictive statistics match the analytic push-through within 3% at 1e5 draws");
}

/// Free-run accuracy on the coupled-drives records. The data is an external
/// download, so the test is opt-in: set BAYESID_CED_DIR to a directory of
/// CSV files (one per drive, columns u,y) and run with --ignored. Each
/// drive must reach free-run validation RMSE <= 0.25 with a 1x10 LSTM over
/// ten lags and ten refinement cycles, best of five repeats.
#[test]
#[ignore = "slow; requires externally downloaded drive data"]
fn coupled_drives_lstm_free_run() {
    let Some(dir) = std::env::var_os("BAYESID_CED_DIR") else {
        eprintln!("[SKIP] coupled-drives data not configured; set BAYESID_CED_DIR");
        return;
    };
    let dir = std::path::PathBuf::from(dir);
    let mut checked = 0;
    for entry in std::fs::read_dir(&dir).expect("data directory") {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("csv") {
            continue;
        }
        let tmp = tempfile::tempdir().unwrap();
        let out_dir = tmp.path().join("out");
        let config = format!(
            r#"
[dataset]
kind = "csv"
path = "{}"

[split]
estimation_fraction = 0.75

[regressors]
l_u = 10
l_y = 10

[model]
kind = "lstm"
units = [10]

[identification]
lambda = 1e-3
cycles = 10
epochs = 200
repeats = 5
seed = 0
tau = 10

[simulation]
mc_samples = 32

[output]
dir = "{}"
"#,
            path.display(),
            out_dir.display()
        );
        let cfg_path = tmp.path().join("drive.toml");
        std::fs::write(&cfg_path, config).unwrap();
        let code = bayesid_cli::runner::run(&cfg_path).expect("drive run completes");
        assert_eq!(code, 0);
        let report: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap())
                .unwrap();
        let rmse = report["report"]["best"]["val_rmse"].as_f64().unwrap();
        assert!(rmse <= 0.25, "drive {}: free-run RMSE {rmse} above 0.25", path.display());
        checked += 1;
    }
    assert!(checked > 0, "no drive CSVs found in {}", dir.display());
    eprintln!("[PASS] coupled-drives free-run RMSE <= 0.25 on {checked} drive records");
}
