//! Planted synthetic datasets for tests and benchmarks.
//!
//! Informative features are time series whose level and sinusoid frequency
//! depend on the class, plus unit Gaussian noise. Noise features are unit
//! Gaussian noise only. Series lengths vary per segment.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::dataset::{split, Dataset, FeatureKind, Value};
use crate::error::{Error, Result};
use crate::rng::{self, Stage};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub classes: usize,
    pub informative: usize,
    pub noise: usize,
    /// Feature ids to append exact copies of, named `<name>_dup`.
    pub duplicates: Vec<usize>,
    pub min_len: usize,
    pub max_len: usize,
    /// Stratified train fraction; `None` keeps every segment in training.
    pub train_fraction: Option<f64>,
}

impl SyntheticSpec {
    pub fn new(n: usize, classes: usize, informative: usize, noise: usize) -> Self {
        Self {
            n,
            classes,
            informative,
            noise,
            duplicates: Vec::new(),
            min_len: 30,
            max_len: 50,
            train_fraction: None,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Parameter(msg));
        if self.informative == 0 {
            return bad("need at least one informative feature".into());
        }
        if self.classes < 2 {
            return bad(format!("need at least 2 classes, got {}", self.classes));
        }
        if self.n < 2 * self.classes {
            return bad(format!("need at least 2 segments per class, got n = {}", self.n));
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return bad(format!("invalid length range {}..={}", self.min_len, self.max_len));
        }
        let m = self.informative + self.noise;
        if let Some(d) = self.duplicates.iter().find(|&&d| d >= m) {
            return bad(format!("duplicate target {d} is not a feature id below {m}"));
        }
        Ok(())
    }
}

/// Class-specific pattern of one informative feature.
struct Pattern {
    level: Vec<f64>,
    cycles: Vec<f64>,
}

fn pattern(classes: usize, rng: &mut impl Rng) -> Pattern {
    let mid = (classes as f64 - 1.0) / 2.0;
    let mut level: Vec<f64> = (0..classes).map(|c| 1.5 * (c as f64 - mid)).collect();
    let mut cycles: Vec<f64> = (0..classes).map(|c| 1.0 + c as f64).collect();
    level.shuffle(rng);
    cycles.shuffle(rng);
    Pattern { level, cycles }
}

pub fn gen_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = rng::stream(seed, Stage::Synthetic);
    let patterns: Vec<Pattern> = (0..spec.informative).map(|_| pattern(spec.classes, &mut rng)).collect();

    let mut features: Vec<(String, FeatureKind)> = (0..spec.informative)
        .map(|j| (format!("informative_{j}"), FeatureKind::TimeSeries))
        .chain((0..spec.noise).map(|j| (format!("noise_{j}"), FeatureKind::TimeSeries)))
        .collect();
    for &d in &spec.duplicates {
        let name = format!("{}_dup", features[d].0);
        features.push((name, FeatureKind::TimeSeries));
    }

    let mut values = Vec::with_capacity(spec.n);
    let mut labels = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let class = i % spec.classes;
        let mut row = Vec::with_capacity(features.len());
        for j in 0..spec.informative + spec.noise {
            let len = rng.random_range(spec.min_len..=spec.max_len);
            let series: Vec<f64> = (0..len)
                .map(|t| {
                    let noise: f64 = rng.sample(StandardNormal);
                    match patterns.get(j) {
                        Some(p) => {
                            let phase = 2.0 * PI * p.cycles[class] * t as f64 / len as f64;
                            p.level[class] + phase.sin() + noise
                        }
                        None => noise,
                    }
                })
                .collect();
            row.push(Value::Series(series));
        }
        for &d in &spec.duplicates {
            row.push(row[d].clone());
        }
        values.push(row);
        labels.push(format!("c{class}"));
    }
    let ds = Dataset::from_labeled(features, values, labels)?;
    match spec.train_fraction {
        Some(f) => split(&ds, f, seed),
        None => Ok(ds),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_determinism() {
        let spec = SyntheticSpec::new(60, 3, 5, 15);
        let a = gen_synthetic(&spec, 1).unwrap();
        assert_eq!((a.n_segments(), a.n_features(), a.n_classes()), (60, 20, 3));
        assert_eq!(a, gen_synthetic(&spec, 1).unwrap());
        assert_ne!(a, gen_synthetic(&spec, 2).unwrap());
    }

    #[test]
    fn duplicates_are_exact() {
        let mut spec = SyntheticSpec::new(12, 2, 2, 1);
        spec.duplicates = vec![0];
        let ds = gen_synthetic(&spec, 3).unwrap();
        assert_eq!(ds.n_features(), 4);
        assert_eq!(ds.descriptors()[3].name, "informative_0_dup");
        for seg in ds.segments() {
            assert_eq!(seg.values[3], seg.values[0]);
        }
    }

    #[test]
    fn split_and_errors() {
        let mut spec = SyntheticSpec::new(20, 2, 1, 1);
        spec.train_fraction = Some(0.5);
        let ds = gen_synthetic(&spec, 4).unwrap();
        assert_eq!((ds.train_ids().len(), ds.test_ids().len()), (10, 10));

        assert!(gen_synthetic(&SyntheticSpec::new(20, 2, 0, 3), 1).is_err());
        assert!(gen_synthetic(&SyntheticSpec::new(3, 2, 1, 0), 1).is_err());
        let mut bad = SyntheticSpec::new(20, 2, 1, 1);
        bad.duplicates = vec![2];
        assert!(gen_synthetic(&bad, 1).is_err());
    }
}
