//! Power iteration embedding: early-stopped power iteration on `D^-1 W`.
//!
//! The iterate quickly becomes nearly constant on each cluster of the graph
//! while different clusters keep different values, long before it collapses
//! to the trivial constant eigenvector. The stop test looks at the change in
//! successive step sizes (an acceleration criterion), which fires in that
//! intermediate regime.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{row_normalize, SimilarityGraph};
use crate::rng::{self, Stage};

const PARALLEL_ROWS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PieParams {
    /// Stop threshold on `max_i |delta_t[i] - delta_{t+1}[i]|`; `None` means `1e-6 / n`.
    pub epsilon: Option<f64>,
    pub max_iter: usize,
}

impl Default for PieParams {
    fn default() -> Self {
        Self {
            epsilon: None,
            max_iter: 1000,
        }
    }
}

impl PieParams {
    pub fn epsilon_for(&self, n: usize) -> f64 {
        self.epsilon.unwrap_or(1e-6 / n.max(1) as f64)
    }
}

/// One-dimensional graph embedding with unit l1 norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub values: Vec<f64>,
    pub iterations_used: usize,
}

impl Embedding {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Seeded uniform start vector, l1-normalized.
pub fn initial_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng::stream(seed, Stage::PowerIteration);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        v.iter_mut().for_each(|x| *x /= total);
    } else {
        v.fill(1.0 / n as f64);
    }
    v
}

pub fn pie(graph: &SimilarityGraph, params: &PieParams, seed: u64) -> Result<Embedding> {
    pie_observed(graph, params, seed, |_, _| {})
}

/// Like [`pie`], calling `observer(t, v_t)` for the start vector and every
/// iterate.
pub fn pie_observed(
    graph: &SimilarityGraph,
    params: &PieParams,
    seed: u64,
    mut observer: impl FnMut(usize, &[f64]),
) -> Result<Embedding> {
    let n = graph.size();
    if n == 0 {
        return Err(Error::InvalidInput("power iteration on an empty graph".into()));
    }
    let walk = row_normalize(graph)?.matrix;
    let epsilon = params.epsilon_for(n);

    let mut v = initial_vector(n, seed);
    observer(0, &v);
    let mut next = vec![0.0; n];
    let mut delta = vec![0.0; n];
    let mut prev_delta: Option<Vec<f64>> = None;
    let mut t = 0;
    while t < params.max_iter {
        if n >= PARALLEL_ROWS {
            next.par_iter_mut().enumerate().for_each(|(i, o)| {
                *o = walk.row(i).iter().zip(&v).map(|(a, b)| a * b).sum();
            });
        } else {
            walk.mat_vec(&v, &mut next);
        }
        let norm: f64 = next.iter().map(|x| x.abs()).sum();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidInput(format!("power iteration produced norm {norm}")));
        }
        for ((x, d), old) in next.iter_mut().zip(delta.iter_mut()).zip(&v) {
            *x /= norm;
            *d = (*x - old).abs();
        }
        std::mem::swap(&mut v, &mut next);
        t += 1;
        observer(t, &v);
        // the first comparison needs two deltas, so at least two steps run
        if let Some(prev) = prev_delta.as_mut() {
            let accel = prev
                .iter()
                .zip(&delta)
                .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
            if accel <= epsilon {
                break;
            }
            prev.copy_from_slice(&delta);
        } else {
            prev_delta = Some(delta.clone());
        }
    }
    Ok(Embedding {
        values: v,
        iterations_used: t,
    })
}
