//! Evaluating a feature subset: aggregate per-feature distance matrices and
//! classify held-out segments with the 1-nearest-neighbor rule.

use rayon::prelude::*;

use crate::distance::DistanceMatrix;
use crate::error::{Error, Result};
use crate::graph::SimilarityGraph;
use crate::matrix::SquareMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedDistance {
    pub values: SquareMatrix,
    /// Weight applied to each input matrix (all ones when unweighted).
    pub weights: Vec<f64>,
}

impl AggregatedDistance {
    pub fn size(&self) -> usize {
        self.values.size()
    }
}

fn sum_weighted(matrices: &[&SquareMatrix], weights: Option<&[f64]>) -> Result<AggregatedDistance> {
    let first = matrices
        .first()
        .ok_or_else(|| Error::InvalidInput("cannot aggregate an empty selection".into()))?;
    let n = first.size();
    if let Some(m) = matrices.iter().find(|m| m.size() != n) {
        return Err(Error::DimensionMismatch {
            what: "aggregated matrix size",
            expected: n,
            found: m.size(),
        });
    }
    let weights = match weights {
        Some(w) => {
            if w.len() != matrices.len() {
                return Err(Error::DimensionMismatch {
                    what: "aggregation weights",
                    expected: matrices.len(),
                    found: w.len(),
                });
            }
            if let Some(bad) = w.iter().find(|x| !(**x >= 0.0 && x.is_finite())) {
                return Err(Error::InvalidInput(format!("aggregation weight {bad} is negative or not finite")));
            }
            Some(w.to_vec())
        }
        None => None,
    };
    let mut data = vec![0.0; n * n];
    for (k, m) in matrices.iter().enumerate() {
        match &weights {
            Some(w) => {
                let scale = w[k];
                data.par_iter_mut().zip(m.as_slice()).for_each(|(o, x)| *o += scale * x);
            }
            None => data.par_iter_mut().zip(m.as_slice()).for_each(|(o, x)| *o += x),
        }
    }
    Ok(AggregatedDistance {
        values: SquareMatrix::from_row_major(n, data)?,
        weights: weights.unwrap_or_else(|| vec![1.0; matrices.len()]),
    })
}

/// Elementwise sum of the matrices, or `sum_i w_i M_i` when weights are given.
pub fn aggregate(matrices: &[DistanceMatrix], weights: Option<&[f64]>) -> Result<AggregatedDistance> {
    let refs: Vec<&SquareMatrix> = matrices.iter().map(|m| &m.values).collect();
    sum_weighted(&refs, weights)
}

/// Like [`aggregate`] over the dissimilarities `1 - w` of similarity graphs.
pub fn aggregate_graphs(graphs: &[SimilarityGraph], weights: Option<&[f64]>) -> Result<AggregatedDistance> {
    let complements: Vec<SquareMatrix> = graphs.iter().map(SimilarityGraph::complement).collect();
    let refs: Vec<&SquareMatrix> = complements.iter().collect();
    sum_weighted(&refs, weights)
}

/// Label of the closest training segment for every test segment; equal
/// distances go to the smaller training id.
pub fn nn1_classify(
    dist: &AggregatedDistance,
    train_ids: &[usize],
    test_ids: &[usize],
    labels: &[usize],
) -> Result<Vec<usize>> {
    if train_ids.is_empty() {
        return Err(Error::InvalidInput("1-NN needs at least one training segment".into()));
    }
    let n = dist.size();
    if let Some(&bad) = train_ids.iter().chain(test_ids).find(|&&i| i >= n || i >= labels.len()) {
        return Err(Error::InvalidInput(format!("segment id {bad} outside the distance matrix")));
    }
    let mut train: Vec<usize> = train_ids.to_vec();
    train.sort_unstable();
    Ok(test_ids
        .par_iter()
        .map(|&t| {
            let row = dist.values.row(t);
            let mut best = train[0];
            for &c in &train[1..] {
                if row[c] < row[best] {
                    best = c;
                }
            }
            labels[best]
        })
        .collect())
}

/// Fraction of exact matches.
pub fn accuracy(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            what: "prediction count",
            expected: truth.len(),
            found: predicted.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::InvalidInput("accuracy of an empty prediction set".into()));
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / truth.len() as f64)
}
