//! Per-feature pairwise distances: DTW for series, absolute difference for
//! scalars, 0/1 for category tokens.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::dataset::{Dataset, Value};
use crate::error::{Error, Result, ResultExt};
use crate::matrix::SquareMatrix;

/// Options for the series metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DistanceParams {
    /// Sakoe-Chiba band half-width; `None` is unconstrained DTW.
    pub window: Option<usize>,
    /// Z-normalize each series before comparing.
    pub znorm: bool,
}

impl DistanceParams {
    fn cache_tag(&self) -> String {
        match self.window {
            Some(w) => format!("dtw-abs;window={w};znorm={}", self.znorm),
            None => format!("dtw-abs;window=none;znorm={}", self.znorm),
        }
    }
}

/// Symmetric, zero-diagonal, nonnegative distances between all segments for
/// one feature.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub feature_id: usize,
    pub values: SquareMatrix,
}

impl DistanceMatrix {
    pub fn size(&self) -> usize {
        self.values.size()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values.get(i, j)
    }

    /// Distances among `ids` only, in that order.
    pub fn restrict(&self, ids: &[usize]) -> DistanceMatrix {
        DistanceMatrix {
            feature_id: self.feature_id,
            values: self.values.select(ids),
        }
    }
}

fn check_series(s: &[f64], which: &str) -> Result<()> {
    if s.is_empty() {
        return Err(Error::InvalidInput(format!("dtw: {which} sequence is empty")));
    }
    if let Some(x) = s.iter().find(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(format!("dtw: {which} sequence has non-finite value {x}")));
    }
    Ok(())
}

/// Unconstrained dynamic time warping with element cost `|s_i - t_j|`.
pub fn dtw(s: &[f64], t: &[f64]) -> Result<f64> {
    dtw_windowed(s, t, None)
}

/// DTW restricted to a Sakoe-Chiba band. The band is widened to the length
/// difference when narrower, so the end cell always stays reachable.
pub fn dtw_windowed(s: &[f64], t: &[f64], window: Option<usize>) -> Result<f64> {
    check_series(s, "first")?;
    check_series(t, "second")?;
    Ok(dtw_unchecked(s, t, window))
}

fn dtw_unchecked(s: &[f64], t: &[f64], window: Option<usize>) -> f64 {
    let (ns, nt) = (s.len(), t.len());
    let band = window.map(|w| w.max(ns.abs_diff(nt)));
    let mut prev = vec![f64::INFINITY; nt + 1];
    let mut curr = vec![f64::INFINITY; nt + 1];
    prev[0] = 0.0;
    for i in 1..=ns {
        curr.fill(f64::INFINITY);
        let (lo, hi) = match band {
            Some(w) => (i.saturating_sub(w).max(1), (i + w).min(nt)),
            None => (1, nt),
        };
        let si = s[i - 1];
        for j in lo..=hi {
            let best = prev[j - 1].min(prev[j]).min(curr[j - 1]);
            curr[j] = (si - t[j - 1]).abs() + best;
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[nt]
}

pub fn scalar_distance(a: f64, b: f64) -> Result<f64> {
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidInput(format!("scalar distance of non-finite {a}, {b}")));
    }
    Ok((a - b).abs())
}

pub fn categorical_distance(a: &str, b: &str) -> f64 {
    if a == b {
        0.0
    } else {
        1.0
    }
}

fn znormalize(s: &[f64]) -> Vec<f64> {
    let n = s.len() as f64;
    let mean = s.iter().sum::<f64>() / n;
    let var = s.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    if sd > 0.0 {
        s.iter().map(|x| (x - mean) / sd).collect()
    } else {
        s.iter().map(|x| x - mean).collect()
    }
}

fn value_distance(a: &Value, b: &Value, params: &DistanceParams) -> Result<f64> {
    match (a, b) {
        (Value::Series(s), Value::Series(t)) => dtw_windowed(s, t, params.window),
        (Value::Scalar(x), Value::Scalar(y)) => scalar_distance(*x, *y),
        (Value::Category(x), Value::Category(y)) => Ok(categorical_distance(x, y)),
        _ => Err(Error::InvalidInput("values of different kinds".into())),
    }
}

/// Full n x n distance matrix for one feature over every segment.
///
/// Only the upper triangle is evaluated; each cell is independent, so the
/// result does not depend on the rayon pool size.
pub fn distance_matrix(dataset: &Dataset, feature_id: usize, params: &DistanceParams) -> Result<DistanceMatrix> {
    if feature_id >= dataset.n_features() {
        return Err(Error::Parameter(format!(
            "feature id {feature_id} out of range for {} features",
            dataset.n_features()
        )));
    }
    let n = dataset.n_segments();
    let normalized: Option<Vec<Value>> = params.znorm.then(|| {
        (0..n)
            .map(|i| match dataset.value(i, feature_id) {
                Value::Series(s) => Value::Series(znormalize(s)),
                v => v.clone(),
            })
            .collect()
    });
    let value = |i: usize| match &normalized {
        Some(v) => &v[i],
        None => dataset.value(i, feature_id),
    };
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i + 1..n)
                .map(|j| {
                    value_distance(value(i), value(j), params).context(|| {
                        format!(
                            "distance between segments {i} and {j} for feature {:?}",
                            dataset.descriptors()[feature_id].name
                        )
                    })
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut m = SquareMatrix::zeros(n);
    for (i, row) in upper.into_iter().enumerate() {
        for (off, d) in row.into_iter().enumerate() {
            let j = i + 1 + off;
            m.set(i, j, d);
            m.set(j, i, d);
        }
    }
    Ok(DistanceMatrix {
        feature_id,
        values: m,
    })
}

/// On-disk cache of distance matrices, one CSV per feature under a directory
/// keyed by the dataset content and the metric parameters.
#[derive(Debug, Clone)]
pub struct DistanceCache {
    root: PathBuf,
}

impl DistanceCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn dir_for(&self, dataset: &Dataset, params: &DistanceParams) -> PathBuf {
        let mut h = Sha256::new();
        h.update(dataset.content_hash().as_bytes());
        h.update([0u8]);
        h.update(params.cache_tag().as_bytes());
        self.root.join(hex::encode(h.finalize()))
    }

    pub fn path_for(&self, dataset: &Dataset, params: &DistanceParams, feature_id: usize) -> PathBuf {
        self.dir_for(dataset, params).join(format!("M_{feature_id}.csv"))
    }

    pub fn load_or_compute(
        &self,
        dataset: &Dataset,
        feature_id: usize,
        params: &DistanceParams,
    ) -> Result<DistanceMatrix> {
        let path = self.path_for(dataset, params, feature_id);
        if path.is_file() {
            match read_matrix(&path) {
                Ok(values) if values.size() == dataset.n_segments() => {
                    return Ok(DistanceMatrix { feature_id, values });
                }
                Ok(_) | Err(_) => log::warn!("ignoring unreadable cache entry {}", path.display()),
            }
        }
        let dm = distance_matrix(dataset, feature_id, params)?;
        write_matrix_atomic(&path, &dm.values)?;
        Ok(dm)
    }
}

fn read_matrix(path: &Path) -> Result<SquareMatrix> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    SquareMatrix::read_csv(BufReader::new(file))
}

/// Writes a matrix as CSV through a temporary sibling and a rename.
pub fn write_matrix_atomic(path: &Path, m: &SquareMatrix) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = path.with_extension(format!("csv.tmp{}", std::process::id()));
    {
        let file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        let mut w = BufWriter::new(file);
        m.write_csv(&mut w).map_err(|e| Error::io(&tmp, e))?;
        w.flush().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Distance matrices for every feature, through the cache when one is given.
pub fn all_distance_matrices(
    dataset: &Dataset,
    params: &DistanceParams,
    cache: Option<&DistanceCache>,
) -> Result<Vec<DistanceMatrix>> {
    (0..dataset.n_features())
        .map(|j| match cache {
            Some(c) => c.load_or_compute(dataset, j, params),
            None => distance_matrix(dataset, j, params),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::FeatureKind;
    use proptest::prelude::*;

    /// Minimum path cost over every monotone warp path, enumerated recursively.
    fn brute_force(s: &[f64], t: &[f64]) -> f64 {
        fn walk(s: &[f64], t: &[f64], i: usize, j: usize) -> f64 {
            let here = (s[i] - t[j]).abs();
            if i + 1 == s.len() && j + 1 == t.len() {
                return here;
            }
            let mut best = f64::INFINITY;
            if i + 1 < s.len() {
                best = best.min(walk(s, t, i + 1, j));
            }
            if j + 1 < t.len() {
                best = best.min(walk(s, t, i, j + 1));
            }
            if i + 1 < s.len() && j + 1 < t.len() {
                best = best.min(walk(s, t, i + 1, j + 1));
            }
            here + best
        }
        walk(s, t, 0, 0)
    }

    #[test]
    fn dtw_examples() {
        assert_eq!(dtw(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(dtw(&[0.0], &[5.0]).unwrap(), 5.0);
        assert_eq!(brute_force(&[1.0, 3.0, 4.0], &[1.0, 4.0]), 1.0);
        assert_eq!(dtw(&[1.0, 3.0, 4.0], &[1.0, 4.0]).unwrap(), 1.0);
    }

    #[test]
    fn dtw_rejects_bad_input() {
        assert!(dtw(&[], &[1.0]).is_err());
        assert!(dtw(&[1.0], &[]).is_err());
        assert!(dtw(&[1.0, f64::NAN], &[1.0]).is_err());
        assert!(dtw(&[1.0], &[f64::INFINITY]).is_err());
    }

    #[test]
    fn wide_window_matches_unconstrained() {
        let s = [0.0, 2.0, 1.0, 5.0, 3.0];
        let t = [1.0, 1.0, 4.0];
        assert_eq!(dtw_windowed(&s, &t, Some(10)).unwrap(), dtw(&s, &t).unwrap());
        // a zero band on equal lengths is the diagonal path
        let u = [3.0, 0.0, 1.0, 1.0, 2.0];
        let diag: f64 = s.iter().zip(&u).map(|(a, b)| (a - b).abs()).sum();
        assert_eq!(dtw_windowed(&s, &u, Some(0)).unwrap(), diag);
        assert!(dtw_windowed(&s, &t, Some(0)).unwrap().is_finite());
    }

    #[test]
    fn scalar_and_categorical() {
        assert_eq!(scalar_distance(3.0, 3.0).unwrap(), 0.0);
        assert_eq!(scalar_distance(1.5, 4.0).unwrap(), 2.5);
        assert_eq!(scalar_distance(-2.0, 2.0).unwrap(), 4.0);
        assert!(scalar_distance(f64::NAN, 1.0).is_err());
        assert_eq!(categorical_distance("M", "M"), 0.0);
        assert_eq!(categorical_distance("M", "F"), 1.0);
        assert_eq!(categorical_distance("ICU1", "icu1"), 1.0);
    }

    fn single_feature(kind: FeatureKind, values: Vec<Value>) -> Dataset {
        let n = values.len();
        Dataset::from_labeled(
            vec![("f".into(), kind)],
            values.into_iter().map(|v| vec![v]).collect(),
            (0..n).map(|i| format!("c{}", i % 2)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn matrix_examples() {
        let ds = single_feature(FeatureKind::Scalar, vec![Value::Scalar(0.0), Value::Scalar(1.0), Value::Scalar(3.0)]);
        let m = distance_matrix(&ds, 0, &DistanceParams::default()).unwrap();
        let expect = SquareMatrix::from_rows(&[vec![0.0, 1.0, 3.0], vec![1.0, 0.0, 2.0], vec![3.0, 2.0, 0.0]]).unwrap();
        assert_eq!(m.values, expect);

        let ds = single_feature(
            FeatureKind::TimeSeries,
            vec![Value::Series(vec![1.0, 2.0]), Value::Series(vec![1.0, 2.0])],
        );
        assert_eq!(distance_matrix(&ds, 0, &DistanceParams::default()).unwrap().values, SquareMatrix::zeros(2));

        let ds = single_feature(
            FeatureKind::TimeSeries,
            vec![
                Value::Series(vec![1.0, 3.0, 4.0]),
                Value::Series(vec![1.0, 4.0]),
                Value::Series(vec![1.0, 3.0, 4.0]),
            ],
        );
        let m = distance_matrix(&ds, 0, &DistanceParams::default()).unwrap();
        assert_eq!(m.get(0, 1), 1.0);
        assert_eq!(m.get(0, 2), 0.0);
        assert!(m.values.is_symmetric());
        assert!(distance_matrix(&ds, 1, &DistanceParams::default()).is_err());
    }

    #[test]
    fn matrix_independent_of_pool_size() {
        let values = (0..12)
            .map(|i| Value::Series((0..(5 + i % 4)).map(|t| ((t * 7 + i * 3) % 11) as f64 * 0.37).collect()))
            .collect();
        let ds = single_feature(FeatureKind::TimeSeries, values);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| distance_matrix(&ds, 0, &DistanceParams::default()).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ds = single_feature(
            FeatureKind::TimeSeries,
            vec![Value::Series(vec![0.1, 0.7]), Value::Series(vec![1.0 / 3.0]), Value::Series(vec![2.0, -1.5, 0.2])],
        );
        let cache = DistanceCache::new(dir.path());
        let p = DistanceParams::default();
        let first = cache.load_or_compute(&ds, 0, &p).unwrap();
        assert!(cache.path_for(&ds, &p, 0).is_file());
        let second = cache.load_or_compute(&ds, 0, &p).unwrap();
        assert_eq!(first, second);
        let other = DistanceParams { znorm: true, ..p };
        assert_ne!(cache.dir_for(&ds, &p), cache.dir_for(&ds, &other));
    }

    proptest! {
        #[test]
        fn dtw_symmetric_and_self_zero(
            s in prop::collection::vec(-5.0f64..5.0, 1..12),
            t in prop::collection::vec(-5.0f64..5.0, 1..12),
        ) {
            prop_assert_eq!(dtw(&s, &t).unwrap(), dtw(&t, &s).unwrap());
            prop_assert_eq!(dtw(&s, &s).unwrap(), 0.0);
        }

        #[test]
        fn dtw_bounded_by_diagonal_path(
            pairs in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..12),
        ) {
            let (s, t): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let diag: f64 = s.iter().zip(&t).map(|(a, b)| (a - b).abs()).sum();
            prop_assert!(dtw(&s, &t).unwrap() <= diag + 1e-12);
        }

        #[test]
        fn dtw_matches_enumeration(
            s in prop::collection::vec(0u8..3, 1..6),
            t in prop::collection::vec(0u8..3, 1..6),
        ) {
            let s: Vec<f64> = s.into_iter().map(f64::from).collect();
            let t: Vec<f64> = t.into_iter().map(f64::from).collect();
            prop_assert_eq!(dtw(&s, &t).unwrap(), brute_force(&s, &t));
        }
    }
}
