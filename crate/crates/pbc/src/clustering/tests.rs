use super::*;
use crate::data::LabeledPoint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn linear_model(coefficients: &[f64], intercept: f64) -> TrainedModel {
    let mut params = coefficients.to_vec();
    params.push(intercept);
    TrainedModel::new(
        RegressorSpec::RidgeLinear { ridge_lambda: 0.0 },
        coefficients.len(),
        params,
    )
    .unwrap()
}

fn ridge_config(k_hat: usize) -> PbcConfig {
    PbcConfig::new(k_hat, RegressorSpec::RidgeLinear { ridge_lambda: 0.0 })
}

/// Points on two exact lines: y = 2x and y = -3x.
fn two_line_dataset(seed: u64, per_line: usize) -> (Dataset, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::new();
    let mut truth = Vec::new();
    for _ in 0..per_line {
        let x = rng.gen_range(-3.0..3.0);
        points.push(LabeledPoint::new(vec![x], 2.0 * x).unwrap());
        truth.push(0);
    }
    for _ in 0..per_line {
        let x = rng.gen_range(-3.0..3.0);
        points.push(LabeledPoint::new(vec![x], -3.0 * x).unwrap());
        truth.push(1);
    }
    (Dataset::from_points(points).unwrap(), truth)
}

#[test]
fn cost_matrix_direct_arithmetic() {
    let dataset =
        Dataset::from_points(vec![LabeledPoint::new(vec![1.0], 0.9).unwrap()]).unwrap();
    let models = vec![linear_model(&[1.0], 0.0), linear_model(&[-1.0], 0.0)];
    let costs = cost_matrix(&dataset, &models, LossKind::SquaredError).unwrap();
    assert!((costs.cost(0, 0) - 0.01).abs() < 1e-12);
    assert!((costs.cost(0, 1) - 3.61).abs() < 1e-12);
}

#[test]
fn cost_matrix_zero_for_perfect_model() {
    let dataset =
        Dataset::from_points(vec![LabeledPoint::new(vec![2.0], 4.0).unwrap()]).unwrap();
    let models = vec![linear_model(&[2.0], 0.0)];
    let costs = cost_matrix(&dataset, &models, LossKind::SquaredError).unwrap();
    assert_eq!(costs.row(0), &[0.0]);
}

#[test]
fn cost_matrix_matches_entry_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let points: Vec<LabeledPoint> = (0..5)
        .map(|_| LabeledPoint::new(vec![rng.gen_range(-2.0..2.0)], rng.gen_range(-2.0..2.0)).unwrap())
        .collect();
    let dataset = Dataset::from_points(points).unwrap();
    let models: Vec<TrainedModel> = (0..3)
        .map(|_| linear_model(&[rng.gen_range(-2.0..2.0)], rng.gen_range(-1.0..1.0)))
        .collect();
    let costs = cost_matrix(&dataset, &models, LossKind::SquaredError).unwrap();
    for (i, point) in dataset.points().iter().enumerate() {
        for (k, model) in models.iter().enumerate() {
            let expected =
                (predict(model, point.features()).unwrap() - point.target()).powi(2);
            assert!((costs.cost(i, k) - expected).abs() < 1e-15);
        }
    }
}

#[test]
fn expectation_step_takes_argmin_with_low_index_ties() {
    let costs = CostMatrix::new(vec![0.01, 3.61, 2.0, 2.0], 2, 2).unwrap();
    let assignment = expectation_step(&costs);
    assert_eq!(assignment.labels(), &[0, 0]);
}

#[test]
fn expectation_step_matches_scan_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let values: Vec<f64> = (0..50 * 4).map(|_| rng.gen_range(0.0..10.0)).collect();
    let costs = CostMatrix::new(values, 50, 4).unwrap();
    let assignment = expectation_step(&costs);
    for i in 0..50 {
        let row = costs.row(i);
        let mut best = 0;
        for k in 1..4 {
            if row[k] < row[best] {
                best = k;
            }
        }
        assert_eq!(assignment.labels()[i], best);
    }
}

#[test]
fn soft_probabilities_symmetric_and_exact() {
    let costs = CostMatrix::new(vec![5.0, 5.0, 5.0], 1, 3).unwrap();
    let rows = soft_assignment_probabilities(&costs);
    for p in &rows[0] {
        assert!((p - 1.0 / 3.0).abs() < 1e-12);
    }

    let costs = CostMatrix::new(vec![0.0, 3.0_f64.ln()], 1, 2).unwrap();
    let rows = soft_assignment_probabilities(&costs);
    assert!((rows[0][0] - 0.75).abs() < 1e-12);
    assert!((rows[0][1] - 0.25).abs() < 1e-12);
}

#[test]
fn soft_probabilities_match_exponentiation_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let values: Vec<f64> = (0..20 * 3).map(|_| rng.gen_range(0.0..5.0)).collect();
    let costs = CostMatrix::new(values, 20, 3).unwrap();
    let rows = soft_assignment_probabilities(&costs);
    for (i, probabilities) in rows.iter().enumerate() {
        let raw: Vec<f64> = costs.row(i).iter().map(|&c| (-c).exp()).collect();
        let total: f64 = raw.iter().sum();
        let mut sum = 0.0;
        for k in 0..3 {
            assert!((probabilities[k] - raw[k] / total).abs() < 1e-12);
            assert!(probabilities[k] >= 0.0);
            sum += probabilities[k];
            for j in 0..3 {
                // Probability ordering is the reverse of cost ordering.
                if costs.cost(i, k) < costs.cost(i, j) {
                    assert!(probabilities[k] > probabilities[j]);
                }
            }
        }
        assert!((sum - 1.0).abs() < 1e-12);
    }
}

#[test]
fn maximization_recovers_exact_lines() {
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for i in 0..10 {
        let x = i as f64 - 5.0;
        points.push(LabeledPoint::new(vec![x], 2.0 * x).unwrap());
        labels.push(0);
        points.push(LabeledPoint::new(vec![x], -x + 1.0).unwrap());
        labels.push(1);
    }
    let dataset = Dataset::from_points(points).unwrap();
    let mut assignment = Assignment::new(labels, 2).unwrap();
    let config = ridge_config(2);
    let previous = vec![linear_model(&[0.0], 0.0), linear_model(&[0.0], 0.0)];
    let models = maximization_step(&dataset, &mut assignment, &config, &previous).unwrap();
    assert!((models[0].parameters()[0] - 2.0).abs() < 1e-9);
    assert!(models[0].parameters()[1].abs() < 1e-9);
    assert!((models[1].parameters()[0] + 1.0).abs() < 1e-9);
    assert!((models[1].parameters()[1] - 1.0).abs() < 1e-9);
}

#[test]
fn maximization_single_cluster_equals_full_fit() {
    let (dataset, _) = two_line_dataset(1, 20);
    let mut assignment = Assignment::new(vec![0; dataset.len()], 1).unwrap();
    let config = ridge_config(1);
    let previous = vec![linear_model(&[0.0], 0.0)];
    let models = maximization_step(&dataset, &mut assignment, &config, &previous).unwrap();
    let full = fit(&config.regressor, dataset.points(), None).unwrap();
    assert_eq!(models[0].parameters(), full.parameters());
}

#[test]
fn maximization_matches_per_cluster_fit_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let points: Vec<LabeledPoint> = (0..40)
        .map(|_| {
            LabeledPoint::new(
                vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)],
                rng.gen_range(-2.0..2.0),
            )
            .unwrap()
        })
        .collect();
    let dataset = Dataset::from_points(points).unwrap();
    let labels: Vec<usize> = (0..40).map(|_| rng.gen_range(0..3)).collect();
    let mut assignment = Assignment::new(labels.clone(), 3).unwrap();
    let config = PbcConfig::new(3, RegressorSpec::RidgeLinear { ridge_lambda: 0.1 });
    let previous: Vec<TrainedModel> = (0..3).map(|_| linear_model(&[0.0, 0.0], 0.0)).collect();
    let models = maximization_step(&dataset, &mut assignment, &config, &previous).unwrap();

    for (k, model) in models.iter().enumerate() {
        let members: Vec<LabeledPoint> = labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == k)
            .map(|(i, _)| dataset.points()[i].clone())
            .collect();
        let oracle = fit(&config.regressor, &members, None).unwrap();
        assert_eq!(model.parameters(), oracle.parameters());
    }
}

#[test]
fn maximization_reseeds_empty_cluster() {
    // Ten points, all labeled 0; cluster 1 is empty and must grab the
    // ceil(10 / 20) = 1 worst-explained point.
    let points: Vec<LabeledPoint> = (0..10)
        .map(|i| LabeledPoint::new(vec![i as f64], i as f64).unwrap())
        .collect();
    let dataset = Dataset::from_points(points).unwrap();
    let mut assignment = Assignment::new(vec![0; 10], 2).unwrap();
    let config = ridge_config(2);
    // Model 0 fits y = x except at x = 9; model 1 is arbitrary.
    let previous = vec![linear_model(&[1.0], 0.0), linear_model(&[5.0], 0.0)];
    // Perturb: make point 7 poorly explained by model 0.
    let mut pts = dataset.points().to_vec();
    pts[7] = LabeledPoint::new(vec![7.0], 100.0).unwrap();
    let dataset = Dataset::from_points(pts).unwrap();

    let models = maximization_step(&dataset, &mut assignment, &config, &previous).unwrap();
    assert_eq!(models.len(), 2);
    assert_eq!(assignment.members_of(1), vec![7]);
}

#[test]
fn reassignment_fraction_counts_differences() {
    let a = Assignment::new(vec![0, 1, 0, 1], 2).unwrap();
    assert_eq!(reassignment_fraction(&a, &a).unwrap(), 0.0);

    let b = Assignment::new(vec![1, 0, 1, 0], 2).unwrap();
    assert_eq!(reassignment_fraction(&a, &b).unwrap(), 1.0);

    let c = Assignment::new(vec![0; 10], 2).unwrap();
    let mut labels = vec![0; 10];
    labels[1] = 1;
    labels[4] = 1;
    labels[9] = 1;
    let d = Assignment::new(labels, 2).unwrap();
    assert_eq!(reassignment_fraction(&c, &d).unwrap(), 0.3);

    let short = Assignment::new(vec![0], 2).unwrap();
    assert!(reassignment_fraction(&a, &short).is_err());
}

#[test]
fn initialize_single_cluster_is_uniform_sample() {
    let (dataset, _) = two_line_dataset(3, 20);
    let config = ridge_config(1);
    let (members, models) = initialize_clusters(&dataset, &config, 5).unwrap();
    assert_eq!(members.len(), 1);
    assert_eq!(models.len(), 1);
    // ceil(0.3 * 40 / 1) = 12 seed points.
    assert_eq!(members[0].len(), 12);
    let mut sorted = members[0].clone();
    sorted.dedup();
    assert_eq!(sorted.len(), 12, "seed indices must be distinct");
}

#[test]
fn initialize_falls_back_to_uniform_on_perfect_fit() {
    // Every point sits on y = 2x, so after cluster 0 all distances are zero.
    let points: Vec<LabeledPoint> = (0..20)
        .map(|i| {
            let x = i as f64 * 0.5 - 5.0;
            LabeledPoint::new(vec![x], 2.0 * x).unwrap()
        })
        .collect();
    let dataset = Dataset::from_points(points).unwrap();
    let config = ridge_config(2);
    let (members, models) = initialize_clusters(&dataset, &config, 11).unwrap();
    assert_eq!(members.len(), 2);
    assert_eq!(models.len(), 2);
    assert_eq!(members[0].len(), 3); // ceil(0.3 * 20 / 2)
    assert_eq!(members[1].len(), 3);
    let overlap = members[1].iter().filter(|i| members[0].contains(i)).count();
    assert_eq!(overlap, 0);
}

#[test]
fn initialize_matches_reference_sampler_oracle() {
    // N = 8, K = 2: replicate the sampling procedure draw by draw with the
    // same seeded generator and check the selection weights by hand.
    let points: Vec<LabeledPoint> = (0..8)
        .map(|i| {
            let x = i as f64;
            // Half the points sit on y = x, half on y = -2x + 20.
            let y = if i < 4 { x } else { -2.0 * x + 20.0 };
            LabeledPoint::new(vec![x], y).unwrap()
        })
        .collect();
    let dataset = Dataset::from_points(points.clone()).unwrap();
    let mut config = ridge_config(2);
    config.init_fraction = 0.5; // seed size = ceil(0.5 * 8 / 2) = 2
    let seed = 21;
    let (members, models) = initialize_clusters(&dataset, &config, seed).unwrap();

    // Reference sampler: sequential renormalized draws over the remaining
    // candidates in ascending-index order, one uniform f64 each.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool: Vec<usize> = (0..8).collect();
    let mut draw = |pool: &mut Vec<usize>, weights: &mut Vec<f64>| -> usize {
        let total: f64 = weights.iter().sum();
        let u = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = pool.len() - 1;
        for (j, &w) in weights.iter().enumerate() {
            acc += w;
            if u < acc {
                chosen = j;
                break;
            }
        }
        weights.remove(chosen);
        pool.remove(chosen)
    };

    let mut weights = vec![1.0; 8];
    let mut cluster0 = vec![draw(&mut pool, &mut weights), draw(&mut pool, &mut weights)];
    cluster0.sort_unstable();
    assert_eq!(members[0], cluster0);

    let seed_points: Vec<LabeledPoint> = cluster0.iter().map(|&i| points[i].clone()).collect();
    let model0 = fit(&config.regressor, &seed_points, None).unwrap();
    assert_eq!(models[0].parameters(), model0.parameters());

    // Hand-computed distances: squared error of each unassigned point under
    // the only existing model.
    let mut weights: Vec<f64> = pool
        .iter()
        .map(|&i| {
            let p = &points[i];
            (predict(&model0, p.features()).unwrap() - p.target()).powi(2)
        })
        .collect();
    assert!(weights.iter().sum::<f64>() > 0.0, "fixture should not be degenerate");
    let mut cluster1 = vec![draw(&mut pool, &mut weights), draw(&mut pool, &mut weights)];
    cluster1.sort_unstable();
    assert_eq!(members[1], cluster1);
}

#[test]
fn run_pbc_k1_converges_immediately_to_full_fit() {
    let (dataset, _) = two_line_dataset(9, 30);
    let config = ridge_config(1).with_seed(4);
    let result = run_pbc(&dataset, &config).unwrap();
    assert!(result.converged);
    assert_eq!(result.iterations, 1);

    let full = fit(&config.regressor, dataset.points(), None).unwrap();
    assert_eq!(result.models[0].parameters(), full.parameters());
    let assignment = Assignment::new(vec![0; dataset.len()], 1).unwrap();
    let full_loss =
        dataset_loss(&dataset, &assignment, &[full], LossKind::SquaredError).unwrap();
    assert_eq!(result.loss_history.last().copied().unwrap(), full_loss);
}

#[test]
fn run_pbc_recovers_noiseless_lines() {
    let (dataset, truth) = two_line_dataset(13, 100);
    let config = ridge_config(2).with_seed(3);
    let result = run_pbc(&dataset, &config).unwrap();
    assert!(result.loss_history.last().unwrap() < &1e-12);
    assert_eq!(
        crate::datagen::misclassification_rate(&result.assignment, &truth).unwrap(),
        0.0
    );
}

#[test]
fn run_pbc_is_deterministic() {
    let (dataset, _) = two_line_dataset(17, 50);
    let mut config = ridge_config(2).with_seed(7);
    config.zeta = 0.005;
    let a = run_pbc(&dataset, &config).unwrap();
    let b = run_pbc(&dataset, &config).unwrap();
    assert_eq!(a, b);
}

#[test]
fn run_pbc_halts_at_max_iterations() {
    // Every point sits on the same line, so under soft assignment both
    // clusters stay near-equally probable and labels keep resampling.
    let points: Vec<LabeledPoint> = (0..60)
        .map(|i| {
            let x = i as f64 * 0.1 - 3.0;
            LabeledPoint::new(vec![x], 2.0 * x).unwrap()
        })
        .collect();
    let dataset = Dataset::from_points(points).unwrap();
    let mut config = ridge_config(2).with_seed(1);
    config.soft_assignment = true;
    config.zeta = 1e-12;
    config.max_iterations = 7;
    let result = run_pbc(&dataset, &config).unwrap();
    assert_eq!(result.iterations, 7);
    assert!(!result.converged);
    assert_eq!(result.loss_history.len(), 7);
    assert_eq!(result.reassignment_history.len(), 7);
}

#[test]
fn run_pbc_loss_history_monotone_for_ridge() {
    let (dataset, _) = two_line_dataset(23, 80);
    let mut config = ridge_config(2).with_seed(2);
    config.zeta = 1e-9; // run several iterations
    config.max_iterations = 20;
    let result = run_pbc(&dataset, &config).unwrap();
    for pair in result.loss_history.windows(2) {
        assert!(pair[1] <= pair[0] + 1e-9, "loss increased: {pair:?}");
    }
}

#[test]
fn run_pbc_converged_final_fraction_below_zeta() {
    let (dataset, _) = two_line_dataset(29, 60);
    let config = ridge_config(2).with_seed(6);
    let result = run_pbc(&dataset, &config).unwrap();
    if result.converged {
        assert!(result.reassignment_history.last().unwrap() < &config.zeta);
    }
}

#[test]
fn soft_assignment_runs_and_reports_probability_shaped_labels() {
    let (dataset, _) = two_line_dataset(31, 40);
    let mut config = ridge_config(2).with_seed(9);
    config.soft_assignment = true;
    config.max_iterations = 5;
    config.zeta = 1e-12;
    let result = run_pbc(&dataset, &config).unwrap();
    assert_eq!(result.assignment.len(), dataset.len());
    assert!(result.assignment.labels().iter().all(|&l| l < 2));
}

#[test]
fn config_validation_rejects_bad_values() {
    let spec = RegressorSpec::RidgeLinear { ridge_lambda: 0.0 };
    assert!(PbcConfig { zeta: 0.0, ..PbcConfig::new(2, spec.clone()) }.validate(100).is_err());
    assert!(PbcConfig { k_hat: 0, ..PbcConfig::new(2, spec.clone()) }.validate(100).is_err());
    assert!(PbcConfig { init_fraction: 0.0, ..PbcConfig::new(2, spec.clone()) }
        .validate(100)
        .is_err());
    // k_hat exceeding init_fraction * n
    assert!(PbcConfig::new(50, spec.clone()).validate(100).is_err());
    // dataset smaller than k_hat
    assert!(PbcConfig::new(5, spec).validate(3).is_err());
}
