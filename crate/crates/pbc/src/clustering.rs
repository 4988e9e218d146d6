//! Performance-based clustering: error-proportional initialization, argmin
//! assignment, per-cluster refitting, and convergence on the reassignment
//! fraction.
//!
//! Points are clustered by which model explains them best, not by
//! feature-space proximity. Each iteration assigns every point to the
//! cluster whose current model gives it the lowest loss, then refits each
//! cluster's model on its new members. The loop stops once fewer than a
//! `zeta` fraction of points change cluster, or after `max_iterations`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{dataset_loss, point_loss, Assignment, Dataset, LossKind};
use crate::error::{Error, Result};
use crate::learners::{fit, predict, RegressorSpec, TrainedModel};

/// Configuration for one clustering run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PbcConfig {
    /// Number of clusters to estimate.
    pub k_hat: usize,
    /// Loss used for assignment costs and loss accounting.
    pub loss: LossKind,
    /// Learner fitted per cluster.
    pub regressor: RegressorSpec,
    /// Convergence threshold on the reassignment fraction, in (0, 1].
    pub zeta: f64,
    pub max_iterations: usize,
    /// Fraction of the dataset used to seed the initial clusters, in (0, 1].
    pub init_fraction: f64,
    /// Sample labels from probabilities proportional to `exp(-cost)` instead
    /// of taking the argmin.
    pub soft_assignment: bool,
    pub seed: u64,
}

impl PbcConfig {
    /// Defaults: squared error, hard assignment, `zeta` = 0.01,
    /// `max_iterations` = 50, `init_fraction` = 0.3.
    pub fn new(k_hat: usize, regressor: RegressorSpec) -> Self {
        Self {
            k_hat,
            loss: LossKind::SquaredError,
            regressor,
            zeta: 0.01,
            max_iterations: 50,
            init_fraction: 0.3,
            soft_assignment: false,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Validates the configuration against a dataset of `n` points.
    pub fn validate(&self, n: usize) -> Result<()> {
        self.regressor.validate()?;
        if self.k_hat == 0 {
            return Err(Error::InvalidInput("k_hat must be at least 1".into()));
        }
        if !(self.zeta > 0.0 && self.zeta <= 1.0) {
            return Err(Error::InvalidInput("zeta must lie in (0, 1]".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidInput("max_iterations must be at least 1".into()));
        }
        if !(self.init_fraction > 0.0 && self.init_fraction <= 1.0) {
            return Err(Error::InvalidInput("init_fraction must lie in (0, 1]".into()));
        }
        if (self.init_fraction * n as f64) < 1.0 {
            return Err(Error::InvalidInput(
                "init_fraction times dataset size must be at least 1".into(),
            ));
        }
        if (self.k_hat as f64) > self.init_fraction * n as f64 {
            return Err(Error::InvalidInput(format!(
                "k_hat = {} exceeds init_fraction * n = {}",
                self.k_hat,
                self.init_fraction * n as f64
            )));
        }
        if n < self.k_hat {
            return Err(Error::InvalidInput(
                "dataset must hold at least k_hat points".into(),
            ));
        }
        Ok(())
    }
}

/// N x K matrix of per-point, per-cluster losses.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    values: Vec<f64>, // row-major
    n_points: usize,
    n_clusters: usize,
}

impl CostMatrix {
    pub fn new(values: Vec<f64>, n_points: usize, n_clusters: usize) -> Result<Self> {
        if values.len() != n_points * n_clusters {
            return Err(Error::InvalidInput(format!(
                "cost matrix needs {} entries, got {}",
                n_points * n_clusters,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidState(
                "cost matrix entries must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            values,
            n_points,
            n_clusters,
        })
    }

    pub fn cost(&self, point: usize, cluster: usize) -> f64 {
        self.values[point * self.n_clusters + cluster]
    }

    pub fn row(&self, point: usize) -> &[f64] {
        &self.values[point * self.n_clusters..(point + 1) * self.n_clusters]
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }
}

/// Entry `(i, k)` is the loss of point `i` under model `k`.
pub fn cost_matrix(
    dataset: &Dataset,
    models: &[TrainedModel],
    loss: LossKind,
) -> Result<CostMatrix> {
    if models.is_empty() {
        return Err(Error::InvalidInput("cost_matrix requires at least one model".into()));
    }
    let mut values = Vec::with_capacity(dataset.len() * models.len());
    for point in dataset.points() {
        for model in models {
            let prediction = predict(model, point.features())?;
            values.push(point_loss(prediction, point.target(), loss)?);
        }
    }
    CostMatrix::new(values, dataset.len(), models.len())
}

/// Assigns every point to its lowest-cost cluster; ties break toward the
/// lowest cluster index.
pub fn expectation_step(costs: &CostMatrix) -> Assignment {
    let labels = (0..costs.n_points())
        .map(|i| {
            let row = costs.row(i);
            let mut best = 0;
            for (k, &c) in row.iter().enumerate().skip(1) {
                if c < row[best] {
                    best = k;
                }
            }
            best
        })
        .collect();
    Assignment::new(labels, costs.n_clusters()).expect("argmin labels are in range")
}

/// Per-row probabilities proportional to `exp(-cost)`, computed with
/// max-subtraction so large costs cannot underflow the whole row.
pub fn soft_assignment_probabilities(costs: &CostMatrix) -> Vec<Vec<f64>> {
    (0..costs.n_points())
        .map(|i| {
            let row = costs.row(i);
            let min = row.iter().cloned().fold(f64::INFINITY, f64::min);
            let exps: Vec<f64> = row.iter().map(|&c| (-(c - min)).exp()).collect();
            let total: f64 = exps.iter().sum();
            exps.into_iter().map(|e| e / total).collect()
        })
        .collect()
}

/// Refits each cluster's model on its current members, warm-starting
/// iterative learners from the previous model.
///
/// An empty cluster is reseeded in place with the points currently worst
/// explained by their assigned models (one tenth of an average cluster's
/// share), so `assignment` may be adjusted before fitting.
pub fn maximization_step(
    dataset: &Dataset,
    assignment: &mut Assignment,
    config: &PbcConfig,
    previous_models: &[TrainedModel],
) -> Result<Vec<TrainedModel>> {
    if assignment.len() != dataset.len() {
        return Err(Error::InvalidInput(
            "assignment length does not match dataset".into(),
        ));
    }
    reseed_empty_clusters(dataset, assignment, config, previous_models)?;

    let mut models = Vec::with_capacity(config.k_hat);
    for k in 0..config.k_hat {
        let member_indices = assignment.members_of(k);
        let members = dataset.select(&member_indices)?;
        let warm = previous_models.get(k).filter(|_| is_warm_startable(&config.regressor));
        models.push(fit(&config.regressor, members.points(), warm)?);
    }
    Ok(models)
}

fn is_warm_startable(spec: &RegressorSpec) -> bool {
    matches!(spec, RegressorSpec::Mlp { .. })
}

/// Moves the highest-loss points into any cluster the expectation step left
/// empty. Donor clusters are never drained below one point.
fn reseed_empty_clusters(
    dataset: &Dataset,
    assignment: &mut Assignment,
    config: &PbcConfig,
    models: &[TrainedModel],
) -> Result<()> {
    let n = dataset.len();
    let mut sizes = vec![0usize; config.k_hat];
    for &l in assignment.labels() {
        sizes[l] += 1;
    }
    if sizes.iter().all(|&s| s > 0) {
        return Ok(());
    }

    let quota = n.div_ceil(10 * config.k_hat);
    let mut labels = assignment.labels().to_vec();
    let mut assigned_cost: Vec<f64> = Vec::with_capacity(n);
    for (point, &l) in dataset.points().iter().zip(&labels) {
        let model = models.get(l).ok_or_else(|| {
            Error::InvalidInput("assignment label exceeds model count".into())
        })?;
        let prediction = predict(model, point.features())?;
        assigned_cost.push(point_loss(prediction, point.target(), config.loss)?);
    }

    let empty: Vec<usize> = (0..config.k_hat).filter(|&k| sizes[k] == 0).collect();
    for k in empty {
        let mut candidates: Vec<usize> = (0..n).collect();
        candidates.sort_by(|&a, &b| {
            assigned_cost[b]
                .partial_cmp(&assigned_cost[a])
                .unwrap()
                .then(a.cmp(&b))
        });
        let mut grabbed = 0;
        for i in candidates {
            if grabbed == quota {
                break;
            }
            let from = labels[i];
            if from == k || sizes[from] <= 1 {
                continue;
            }
            sizes[from] -= 1;
            sizes[k] += 1;
            labels[i] = k;
            // Its cost under the empty cluster's stale model is irrelevant;
            // keep it out of later grabs this round.
            assigned_cost[i] = f64::NEG_INFINITY;
            grabbed += 1;
        }
        if grabbed == 0 {
            return Err(Error::InvalidState(format!(
                "could not reseed empty cluster {k}"
            )));
        }
    }
    *assignment = Assignment::new(labels, config.k_hat)?;
    Ok(())
}

/// Fraction of points whose labels differ between two assignments.
pub fn reassignment_fraction(previous: &Assignment, current: &Assignment) -> Result<f64> {
    if previous.len() != current.len() {
        return Err(Error::InvalidInput(format!(
            "assignment lengths differ: {} vs {}",
            previous.len(),
            current.len()
        )));
    }
    if previous.is_empty() {
        return Err(Error::InvalidInput("assignments must be nonempty".into()));
    }
    let changed = previous
        .labels()
        .iter()
        .zip(current.labels())
        .filter(|(a, b)| a != b)
        .count();
    Ok(changed as f64 / previous.len() as f64)
}

/// Draws `count` distinct indices from `pool` with probability proportional
/// to `weights`, one sequential renormalized draw at a time.
fn sample_weighted_without_replacement(
    rng: &mut ChaCha8Rng,
    pool: &mut Vec<usize>,
    weights: &mut Vec<f64>,
    count: usize,
) -> Vec<usize> {
    let mut picked = Vec::with_capacity(count);
    for _ in 0..count.min(pool.len()) {
        let total: f64 = weights.iter().sum();
        let u = rng.gen::<f64>() * total;
        let mut cumulative = 0.0;
        let mut chosen = pool.len() - 1;
        for (j, &w) in weights.iter().enumerate() {
            cumulative += w;
            if u < cumulative {
                chosen = j;
                break;
            }
        }
        picked.push(pool.remove(chosen));
        weights.remove(chosen);
    }
    picked
}

/// Seeds `k_hat` clusters: the first from a uniform sample, each subsequent
/// one from points sampled proportionally to how poorly the models built so
/// far explain them. Returns per-cluster member indices and the fitted seed
/// models.
///
/// If every unassigned point is already perfectly explained (all distances
/// zero), sampling falls back to uniform.
pub fn initialize_clusters(
    dataset: &Dataset,
    config: &PbcConfig,
    rng_seed: u64,
) -> Result<(Vec<Vec<usize>>, Vec<TrainedModel>)> {
    config.validate(dataset.len())?;
    let n = dataset.len();
    let seed_size = ((config.init_fraction * n as f64) / config.k_hat as f64).ceil() as usize;
    let seed_size = seed_size.max(1);

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut unassigned: Vec<usize> = (0..n).collect();
    let mut members: Vec<Vec<usize>> = Vec::with_capacity(config.k_hat);
    let mut models: Vec<TrainedModel> = Vec::with_capacity(config.k_hat);

    for cluster in 0..config.k_hat {
        if unassigned.is_empty() {
            return Err(Error::InvalidInput(format!(
                "no unassigned points left to seed cluster {cluster}"
            )));
        }
        let mut weights = if cluster == 0 {
            vec![1.0; unassigned.len()]
        } else {
            let distances: Vec<f64> = unassigned
                .iter()
                .map(|&i| {
                    let point = &dataset.points()[i];
                    let mut best = f64::INFINITY;
                    for model in &models {
                        let prediction = predict(model, point.features())?;
                        best = best.min(point_loss(prediction, point.target(), config.loss)?);
                    }
                    Ok(best)
                })
                .collect::<Result<_>>()?;
            if distances.iter().sum::<f64>() > 0.0 {
                distances
            } else {
                // Degenerate perfect fit: fall back to uniform sampling.
                vec![1.0; unassigned.len()]
            }
        };
        let mut chosen =
            sample_weighted_without_replacement(&mut rng, &mut unassigned, &mut weights, seed_size);
        chosen.sort_unstable();
        let seed_points = dataset.select(&chosen)?;
        models.push(fit(&config.regressor, seed_points.points(), None)?);
        members.push(chosen);
    }
    Ok((members, models))
}

/// Output of a clustering run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult {
    pub assignment: Assignment,
    pub models: Vec<TrainedModel>,
    /// Mean loss after each maximization step. Non-increasing for the
    /// ridge learner under squared error, which refits exactly.
    pub loss_history: Vec<f64>,
    /// Fraction of points that changed cluster at each iteration.
    pub reassignment_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Per-iteration snapshots for diagnostics and invariant checks.
#[derive(Debug, Clone)]
pub struct PbcTrace {
    pub seed_members: Vec<Vec<usize>>,
    pub initial_models: Vec<TrainedModel>,
    /// Assignment the first reassignment fraction is measured against: seed
    /// labels on seeded points, lowest-cost labels elsewhere.
    pub initial_assignment: Assignment,
    pub iterations: Vec<TraceIteration>,
}

/// State captured at the end of one expectation/maximization round.
#[derive(Debug, Clone)]
pub struct TraceIteration {
    /// Labels produced by the expectation step (argmin, or sampled in soft
    /// mode), before any empty-cluster reseeding.
    pub expectation_assignment: Assignment,
    /// Labels the refit actually used, after reseeding if it fired.
    pub assignment: Assignment,
    pub models: Vec<TrainedModel>,
    pub reseeded: bool,
}

/// Runs the full clustering loop. Deterministic given `config.seed`.
pub fn run_pbc(dataset: &Dataset, config: &PbcConfig) -> Result<ClusteringResult> {
    run_pbc_traced(dataset, config).map(|(result, _)| result)
}

/// [`run_pbc`] plus per-iteration assignments and models.
pub fn run_pbc_traced(
    dataset: &Dataset,
    config: &PbcConfig,
) -> Result<(ClusteringResult, PbcTrace)> {
    if dataset.is_empty() {
        return Err(Error::InvalidInput("cannot cluster an empty dataset".into()));
    }
    config.validate(dataset.len())?;

    let (seed_members, seed_models) = initialize_clusters(dataset, config, config.seed)?;
    let mut soft_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x9e3779b97f4a7c15));

    // Baseline for the first reassignment fraction: seeded points keep their
    // seed cluster, everything else takes its lowest-cost seed model.
    let initial_assignment = {
        let costs = cost_matrix(dataset, &seed_models, config.loss)?;
        let mut labels = expectation_step(&costs).labels().to_vec();
        for (cluster, indices) in seed_members.iter().enumerate() {
            for &i in indices {
                labels[i] = cluster;
            }
        }
        Assignment::new(labels, config.k_hat)?
    };

    let mut models = seed_models.clone();
    let mut previous = initial_assignment.clone();
    let mut loss_history = Vec::new();
    let mut reassignment_history = Vec::new();
    let mut trace_iterations = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iterations {
        iterations += 1;
        let costs = cost_matrix(dataset, &models, config.loss)?;
        let hard = expectation_step(&costs);
        let mut assignment = if config.soft_assignment {
            let probabilities = soft_assignment_probabilities(&costs);
            let labels = probabilities
                .iter()
                .map(|row| {
                    let u: f64 = soft_rng.gen();
                    let mut cumulative = 0.0;
                    let mut chosen = row.len() - 1;
                    for (k, &p) in row.iter().enumerate() {
                        cumulative += p;
                        if u < cumulative {
                            chosen = k;
                            break;
                        }
                    }
                    chosen
                })
                .collect();
            Assignment::new(labels, config.k_hat)?
        } else {
            hard.clone()
        };

        let expectation_assignment = assignment.clone();
        models = maximization_step(dataset, &mut assignment, config, &models)?;
        let reseeded = assignment != expectation_assignment;

        // Loss accounting always uses the argmin labels so hard and soft
        // runs share one definition.
        let mut hard_for_loss = hard.clone();
        if reseeded && !config.soft_assignment {
            hard_for_loss = assignment.clone();
        }
        loss_history.push(dataset_loss(dataset, &hard_for_loss, &models, config.loss)?);

        let fraction = reassignment_fraction(&previous, &assignment)?;
        reassignment_history.push(fraction);
        trace_iterations.push(TraceIteration {
            expectation_assignment,
            assignment: assignment.clone(),
            models: models.clone(),
            reseeded,
        });
        previous = assignment;
        if fraction < config.zeta {
            converged = true;
            break;
        }
    }

    let result = ClusteringResult {
        assignment: previous,
        models,
        loss_history,
        reassignment_history,
        iterations,
        converged,
    };
    let trace = PbcTrace {
        seed_members,
        initial_models: seed_models,
        initial_assignment,
        iterations: trace_iterations,
    };
    Ok((result, trace))
}

#[cfg(test)]
mod tests;
