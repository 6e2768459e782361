//! Per-feature graph and embedding stage shared by ranking and selection.

use rayon::prelude::*;

use crate::distance::DistanceMatrix;
use crate::error::{Error, Result, ResultExt};
use crate::graph::{similarity_graph, SimilarityGraph};
use crate::spectral::{pie, Embedding, PieParams};

/// Neighbor count actually used on `n` vertices: `k` clamped to `n - 1`.
pub fn effective_k(k: usize, n: usize) -> Result<usize> {
    if n < 2 {
        return Err(Error::Parameter(format!("need at least 2 segments for a graph, got {n}")));
    }
    if k == 0 {
        return Err(Error::Parameter("knn k must be at least 1".into()));
    }
    if k >= n {
        log::warn!("knn k = {k} clamped to {} for {n} segments", n - 1);
        return Ok(n - 1);
    }
    Ok(k)
}

#[derive(Debug, Clone)]
pub struct FeatureEmbeddings {
    pub graphs: Vec<SimilarityGraph>,
    pub embeddings: Vec<Embedding>,
}

/// k-NN graph and power iteration embedding for every feature. Every feature
/// uses the same start vector, so identical graphs give identical embeddings.
pub fn embed_features(
    distances: &[DistanceMatrix],
    names: &[String],
    k: usize,
    pie_params: &PieParams,
    seed: u64,
) -> Result<FeatureEmbeddings> {
    let (graphs, embeddings) = distances
        .par_iter()
        .zip(names)
        .map(|(dm, name)| {
            let g = similarity_graph(dm, k).context(|| format!("graph for feature {name:?}"))?;
            let e = pie(&g, pie_params, seed).context(|| format!("embedding for feature {name:?}"))?;
            Ok((g, e))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    Ok(FeatureEmbeddings { graphs, embeddings })
}
