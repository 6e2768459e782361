//! Sparse graph-combination selection: fit nonnegative weights on the
//! per-feature similarity graphs so their combination approximates the label
//! graph, with a redundancy penalty over the feature embeddings.

use crate::dataset::Dataset;
use crate::distance::{all_distance_matrices, DistanceMatrix, DistanceParams};
use crate::error::{Error, Result, ResultExt};
use crate::graph::label_graph;
use crate::info::{build_redundancy, nystrom_redundancy, psd_shift, RedundancyKind, RedundancyMatrix};
use crate::pipeline::{effective_k, embed_features};
use crate::ranker::{distinct, DEFAULT_KNN};
use crate::solver::{flatten, solve, solve_for_support_size, SolveResult, SolverOptions};
use crate::spectral::PieParams;

/// Coefficients at or below this count as unselected.
pub const SUPPORT_EPSILON: f64 = 1e-9;

/// Feature count above which [`NystromChoice::Auto`] switches to landmarks.
pub const AUTO_NYSTROM_FEATURES: usize = 512;

/// Landmark count used by [`NystromChoice::Auto`] on large feature sets.
pub const AUTO_NYSTROM_LANDMARKS: usize = 256;

pub const DEFAULT_BETA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaChoice {
    Fixed(f64),
    /// Bisect lambda for a support of this size.
    TargetSize(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NystromChoice {
    #[default]
    Auto,
    Off,
    Landmarks(usize),
}

impl NystromChoice {
    pub fn landmarks_for(self, m: usize) -> Option<usize> {
        match self {
            NystromChoice::Auto if m > AUTO_NYSTROM_FEATURES => Some(AUTO_NYSTROM_LANDMARKS),
            NystromChoice::Auto | NystromChoice::Off => None,
            NystromChoice::Landmarks(s) => Some(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectParams {
    pub knn_k: usize,
    pub lambda: LambdaChoice,
    pub beta: f64,
    pub penalty: RedundancyKind,
    pub nystrom: NystromChoice,
    pub pie: PieParams,
    pub distance: DistanceParams,
    pub solver: SolverOptions,
}

impl SelectParams {
    pub fn new(lambda: LambdaChoice) -> Self {
        Self {
            knn_k: DEFAULT_KNN,
            lambda,
            beta: DEFAULT_BETA,
            penalty: RedundancyKind::Cmi,
            nystrom: NystromChoice::Auto,
            pie: PieParams::default(),
            distance: DistanceParams::default(),
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub alpha: Vec<f64>,
    /// Ascending feature ids with `alpha > SUPPORT_EPSILON`.
    pub selected: Vec<usize>,
    pub penalty_kind: RedundancyKind,
    pub lambda: f64,
    pub beta: f64,
    pub gamma: f64,
    pub landmarks: Option<Vec<usize>>,
    pub sweeps_used: usize,
    pub converged: bool,
    pub final_objective: f64,
    /// The shifted penalty matrix the solver used.
    pub redundancy: RedundancyMatrix,
}

pub fn support(alpha: &[f64]) -> Vec<usize> {
    alpha
        .iter()
        .enumerate()
        .filter(|(_, &a)| a > SUPPORT_EPSILON)
        .map(|(i, _)| i)
        .collect()
}

/// Selects features using the training segments of `dataset`.
pub fn pie_ss(dataset: &Dataset, params: &SelectParams, seed: u64) -> Result<SelectionResult> {
    let distances = all_distance_matrices(dataset, &params.distance, None)?;
    pie_ss_with(dataset, &distances, params, seed)
}

/// Like [`pie_ss`] with precomputed full (all-segment) distance matrices.
pub fn pie_ss_with(
    dataset: &Dataset,
    distances: &[DistanceMatrix],
    params: &SelectParams,
    seed: u64,
) -> Result<SelectionResult> {
    let train = dataset.train_ids();
    let labels = dataset.labels_of(train);
    let restricted: Vec<DistanceMatrix> = distances.iter().map(|d| d.restrict(train)).collect();
    let names: Vec<String> = dataset.descriptors().iter().map(|d| d.name.clone()).collect();
    select_from_distances(&restricted, &names, &labels, params, seed)
}

/// Selection core over distance matrices already restricted to the labeled
/// segments.
pub fn select_from_distances(
    distances: &[DistanceMatrix],
    names: &[String],
    labels: &[usize],
    params: &SelectParams,
    seed: u64,
) -> Result<SelectionResult> {
    let m = distances.len();
    if m == 0 || names.len() != m {
        return Err(Error::DimensionMismatch {
            what: "feature names",
            expected: m,
            found: names.len(),
        });
    }
    let n = labels.len();
    if let Some(d) = distances.iter().find(|d| d.size() != n) {
        return Err(Error::DimensionMismatch {
            what: "distance matrix vs labels",
            expected: n,
            found: d.size(),
        });
    }
    if !(params.beta >= 0.0 && params.beta.is_finite()) {
        return Err(Error::Parameter(format!("beta must be finite and nonnegative, got {}", params.beta)));
    }
    let classes = distinct(labels);
    let k = effective_k(params.knn_k, n)?;
    let fe = embed_features(distances, names, k, &params.pie, seed)?;
    let target = label_graph(labels).context(|| "label graph".to_string())?;

    let raw = match params.nystrom.landmarks_for(m) {
        Some(s) if s < m => nystrom_redundancy(&fe.embeddings, labels, classes, params.penalty, s, seed),
        Some(s) if s > m => Err(Error::Parameter(format!("landmark count {s} exceeds feature count {m}"))),
        _ => build_redundancy(&fe.embeddings, labels, classes, params.penalty),
    }
    .context(|| "redundancy matrix".to_string())?;
    let redundancy = psd_shift(&raw)?;

    let design = flatten(&fe.graphs, &target)?;
    let (lambda, result): (f64, SolveResult) = match params.lambda {
        LambdaChoice::Fixed(lambda) => (lambda, solve(&design, &redundancy.values, lambda, params.beta, &params.solver)?),
        LambdaChoice::TargetSize(size) => {
            if size == 0 || size > m {
                return Err(Error::Parameter(format!("target size must lie in [1, {m}], got {size}")));
            }
            let t = solve_for_support_size(
                &design,
                &redundancy.values,
                params.beta,
                size,
                SUPPORT_EPSILON,
                &params.solver,
            )?;
            if t.support_size != size {
                log::warn!("closest achievable support size is {} (target {size})", t.support_size);
            }
            (t.lambda, t.result)
        }
    };
    if !result.converged {
        log::warn!("solver stopped after {} sweeps without converging", result.sweeps_used);
    }
    let selected = support(&result.alpha);
    if selected.is_empty() {
        log::warn!("no feature selected at lambda = {lambda}");
    }
    let final_objective = match result.final_objective() {
        Some(v) => v,
        None => crate::solver::objective(&result.alpha, &design, &redundancy.values, lambda, params.beta)?,
    };
    Ok(SelectionResult {
        selected,
        penalty_kind: params.penalty,
        lambda,
        beta: params.beta,
        gamma: redundancy.gamma,
        landmarks: redundancy.landmarks.clone(),
        sweeps_used: result.sweeps_used,
        converged: result.converged,
        final_objective,
        alpha: result.alpha,
        redundancy,
    })
}
