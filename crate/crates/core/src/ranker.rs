//! Filter-style ranking: score each feature by the NMI between its graph
//! embedding and the class labels.

use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::distance::{all_distance_matrices, DistanceMatrix, DistanceParams};
use crate::error::{Error, Result, ResultExt};
use crate::info::nmi;
use crate::pipeline::{effective_k, embed_features};
use crate::spectral::PieParams;

pub const DEFAULT_KNN: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankParams {
    pub knn_k: usize,
    pub pie: PieParams,
    pub distance: DistanceParams,
}

impl Default for RankParams {
    fn default() -> Self {
        Self {
            knn_k: DEFAULT_KNN,
            pie: PieParams::default(),
            distance: DistanceParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankResult {
    /// Score per feature id.
    pub scores: Vec<f64>,
    /// Feature ids by descending score, ties by ascending id.
    pub order: Vec<usize>,
}

impl RankResult {
    pub fn from_scores(scores: Vec<f64>) -> Self {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        Self { scores, order }
    }

    /// 1-based rank of each feature id.
    pub fn ranks(&self) -> Vec<usize> {
        let mut ranks = vec![0; self.order.len()];
        for (pos, &f) in self.order.iter().enumerate() {
            ranks[f] = pos + 1;
        }
        ranks
    }

    pub fn top(&self, k: usize) -> Vec<usize> {
        let mut ids: Vec<usize> = self.order.iter().take(k).copied().collect();
        ids.sort_unstable();
        ids
    }
}

/// Ranks every feature on the training segments of `dataset`.
pub fn pie_rank(dataset: &Dataset, params: &RankParams, seed: u64) -> Result<RankResult> {
    let distances = all_distance_matrices(dataset, &params.distance, None)?;
    pie_rank_with(dataset, &distances, params, seed)
}

/// Like [`pie_rank`] with precomputed full (all-segment) distance matrices.
/// Only the training rows and columns are read.
pub fn pie_rank_with(
    dataset: &Dataset,
    distances: &[DistanceMatrix],
    params: &RankParams,
    seed: u64,
) -> Result<RankResult> {
    let train = dataset.train_ids();
    let labels = dataset.labels_of(train);
    let restricted: Vec<DistanceMatrix> = distances.iter().map(|d| d.restrict(train)).collect();
    let names: Vec<String> = dataset.descriptors().iter().map(|d| d.name.clone()).collect();
    rank_from_distances(&restricted, &names, &labels, params, seed)
}

/// Ranking core over distance matrices already restricted to the labeled
/// segments.
pub fn rank_from_distances(
    distances: &[DistanceMatrix],
    names: &[String],
    labels: &[usize],
    params: &RankParams,
    seed: u64,
) -> Result<RankResult> {
    if distances.len() != names.len() {
        return Err(Error::DimensionMismatch {
            what: "feature names",
            expected: distances.len(),
            found: names.len(),
        });
    }
    let n = labels.len();
    for d in distances {
        if d.size() != n {
            return Err(Error::DimensionMismatch {
                what: "distance matrix vs labels",
                expected: n,
                found: d.size(),
            });
        }
    }
    let classes = distinct(labels);
    let k = effective_k(params.knn_k, n)?;
    let fe = embed_features(distances, names, k, &params.pie, seed)?;
    let scores = fe
        .embeddings
        .par_iter()
        .zip(names)
        .map(|(e, name)| nmi(&e.values, labels, classes).context(|| format!("score for feature {name:?}")))
        .collect::<Result<Vec<f64>>>()?;
    Ok(RankResult::from_scores(scores))
}

pub(crate) fn distinct(labels: &[usize]) -> usize {
    let mut seen: Vec<usize> = labels.to_vec();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}

/// Componentwise mean of several rankings of the same features.
pub fn average_scores(results: &[RankResult]) -> Result<RankResult> {
    let first = results
        .first()
        .ok_or_else(|| Error::InvalidInput("no rankings to average".into()))?;
    let m = first.scores.len();
    let mut sum = vec![0.0; m];
    for r in results {
        if r.scores.len() != m {
            return Err(Error::DimensionMismatch {
                what: "ranking length",
                expected: m,
                found: r.scores.len(),
            });
        }
        for (s, x) in sum.iter_mut().zip(&r.scores) {
            *s += x;
        }
    }
    let count = results.len() as f64;
    Ok(RankResult::from_scores(sum.into_iter().map(|s| s / count).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{FeatureKind, Value};
    use rand::{Rng, SeedableRng};

    fn planted(n: usize, seed: u64) -> Dataset {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<String> = (0..n).map(|i| format!("c{}", i % 2)).collect();
        let values = (0..n)
            .map(|i| vec![Value::Scalar((i % 2) as f64), Value::Scalar(rng.random::<f64>())])
            .collect();
        Dataset::from_labeled(
            vec![("signal".into(), FeatureKind::Scalar), ("noise".into(), FeatureKind::Scalar)],
            values,
            labels,
        )
        .unwrap()
    }

    #[test]
    fn planted_indicator_beats_noise() {
        let mut wins = 0;
        for seed in 0..10 {
            let r = pie_rank(&planted(60, seed), &RankParams::default(), seed).unwrap();
            if r.scores[0] > r.scores[1] && r.order[0] == 0 {
                wins += 1;
            }
        }
        assert!(wins >= 9, "{wins}/10");
    }

    #[test]
    fn single_feature_and_duplicates() {
        let ds = planted(20, 3);
        let one = ds.with_features(&[1]).unwrap();
        assert_eq!(pie_rank(&one, &RankParams::default(), 1).unwrap().order, [0]);

        let dup = ds.with_features(&[1, 1]);
        // names must be unique, so duplicate through a renamed copy
        assert!(dup.is_err());
        let values = ds
            .segments()
            .iter()
            .map(|s| vec![s.values[1].clone(), s.values[1].clone()])
            .collect();
        let labels = ds.labels().iter().map(|&l| ds.classes()[l].clone()).collect();
        let dup = Dataset::from_labeled(
            vec![("a".into(), FeatureKind::Scalar), ("a_copy".into(), FeatureKind::Scalar)],
            values,
            labels,
        )
        .unwrap();
        let r = pie_rank(&dup, &RankParams::default(), 5).unwrap();
        assert_eq!(r.scores[0], r.scores[1]);
        assert_eq!(r.order, [0, 1]);
    }

    #[test]
    fn averaging() {
        let a = RankResult::from_scores(vec![0.2, 0.9, 0.5]);
        assert_eq!(average_scores(std::slice::from_ref(&a)).unwrap(), a);
        assert_eq!(average_scores(&[a.clone(), a.clone(), a.clone()]).unwrap().order, a.order);
        let r = average_scores(&[RankResult::from_scores(vec![1.0, 0.0]), RankResult::from_scores(vec![0.0, 1.0])]).unwrap();
        assert_eq!(r.scores, [0.5, 0.5]);
        assert_eq!(r.order, [0, 1]);
        assert!(average_scores(&[a, RankResult::from_scores(vec![1.0])]).is_err());
        assert!(average_scores(&[]).is_err());
    }

    #[test]
    fn ranks_and_top() {
        let r = RankResult::from_scores(vec![0.1, 0.7, 0.7, 0.3]);
        assert_eq!(r.order, [1, 2, 3, 0]);
        assert_eq!(r.ranks(), [4, 1, 2, 3]);
        assert_eq!(r.top(2), [1, 2]);
    }

    #[test]
    fn permuting_features_permutes_scores() {
        let ds = planted(30, 8);
        let base = pie_rank(&ds, &RankParams::default(), 2).unwrap();
        let swapped = pie_rank(&ds.with_features(&[1, 0]).unwrap(), &RankParams::default(), 2).unwrap();
        assert_eq!(swapped.scores, [base.scores[1], base.scores[0]]);
    }

    #[test]
    fn affine_rescaling_keeps_scores() {
        let ds = planted(30, 4);
        let values = ds
            .segments()
            .iter()
            .map(|s| {
                s.values
                    .iter()
                    .map(|v| match v {
                        Value::Scalar(x) => Value::Scalar(3.0 * x - 7.0),
                        v => v.clone(),
                    })
                    .collect()
            })
            .collect();
        let labels = ds.labels().iter().map(|&l| ds.classes()[l].clone()).collect();
        let scaled = Dataset::from_labeled(
            ds.descriptors().iter().map(|d| (d.name.clone(), d.kind)).collect(),
            values,
            labels,
        )
        .unwrap();
        let a = pie_rank(&ds, &RankParams::default(), 6).unwrap();
        let b = pie_rank(&scaled, &RankParams::default(), 6).unwrap();
        assert_eq!(a.scores, b.scores);
    }
}
