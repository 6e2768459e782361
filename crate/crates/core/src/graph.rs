//! k-nearest-neighbor similarity graphs, the label graph, and random-walk
//! normalization.

use rayon::prelude::*;

use crate::distance::DistanceMatrix;
use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;

/// Directed 0/1 adjacency: row `i` marks the neighbors chosen by vertex `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectedGraph {
    pub adjacency: SquareMatrix,
}

/// Symmetric adjacency with zero diagonal and weights in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph {
    pub adjacency: SquareMatrix,
}

impl SimilarityGraph {
    pub fn size(&self) -> usize {
        self.adjacency.size()
    }

    /// Wraps a hand-built adjacency after checking symmetry, diagonal and
    /// weight range.
    pub fn from_adjacency(adjacency: SquareMatrix) -> Result<Self> {
        let n = adjacency.size();
        for i in 0..n {
            if adjacency.get(i, i) != 0.0 {
                return Err(Error::InvalidInput(format!("graph has self-loop at {i}")));
            }
            for j in 0..n {
                let w = adjacency.get(i, j);
                if !(0.0..=1.0).contains(&w) {
                    return Err(Error::InvalidInput(format!("graph weight {w} at ({i}, {j}) outside [0, 1]")));
                }
            }
        }
        if !adjacency.is_symmetric() {
            return Err(Error::InvalidInput("graph adjacency is not symmetric".into()));
        }
        Ok(Self { adjacency })
    }

    /// `1 - w` off the diagonal, zero on it: a dissimilarity view of the graph.
    pub fn complement(&self) -> SquareMatrix {
        let n = self.size();
        SquareMatrix::from_fn(n, |i, j| if i == j { 0.0 } else { 1.0 - self.adjacency.get(i, j) })
    }
}

/// Row-stochastic matrix `D^-1 W`.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeNormalized {
    pub matrix: SquareMatrix,
}

/// Links every vertex to its `k` nearest other vertices with weight 1.
/// Equal distances go to the smaller column index.
pub fn knn_graph(distances: &DistanceMatrix, k: usize) -> Result<DirectedGraph> {
    let n = distances.size();
    if k == 0 || k >= n {
        return Err(Error::Parameter(format!("knn k must satisfy 1 <= k < n = {n}, got {k}")));
    }
    let rows: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let row = distances.values.row(i);
            let mut candidates: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            candidates.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
            candidates.truncate(k);
            candidates
        })
        .collect();
    let mut adjacency = SquareMatrix::zeros(n);
    for (i, nbrs) in rows.into_iter().enumerate() {
        for j in nbrs {
            adjacency.set(i, j, 1.0);
        }
    }
    Ok(DirectedGraph { adjacency })
}

/// `0.5 * (W + W^T)` with the diagonal cleared.
pub fn symmetrize(directed: &DirectedGraph) -> SimilarityGraph {
    let a = &directed.adjacency;
    let n = a.size();
    let mut w = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (a.get(i, j) + a.get(j, i));
            w.set(i, j, v);
            w.set(j, i, v);
        }
    }
    SimilarityGraph { adjacency: w }
}

/// Same-label indicator graph with zero diagonal.
pub fn label_graph(labels: &[usize]) -> Result<SimilarityGraph> {
    let first = labels.first().ok_or(Error::DegenerateLabels)?;
    if labels.iter().all(|l| l == first) {
        return Err(Error::DegenerateLabels);
    }
    let n = labels.len();
    let adjacency = SquareMatrix::from_fn(n, |i, j| {
        if i != j && labels[i] == labels[j] {
            1.0
        } else {
            0.0
        }
    });
    Ok(SimilarityGraph { adjacency })
}

pub fn row_normalize(graph: &SimilarityGraph) -> Result<DegreeNormalized> {
    let n = graph.size();
    let mut matrix = SquareMatrix::zeros(n);
    for (i, row) in graph.adjacency.rows().enumerate() {
        let degree: f64 = row.iter().sum();
        if degree <= 0.0 {
            return Err(Error::IsolatedVertex { vertex: i });
        }
        for (j, &w) in row.iter().enumerate() {
            if w != 0.0 {
                matrix.set(i, j, w / degree);
            }
        }
    }
    Ok(DegreeNormalized { matrix })
}

/// k-NN graph of a distance matrix, symmetrized.
pub fn similarity_graph(distances: &DistanceMatrix, k: usize) -> Result<SimilarityGraph> {
    Ok(symmetrize(&knn_graph(distances, k)?))
}
