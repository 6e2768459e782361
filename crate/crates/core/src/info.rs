//! Discretization of embeddings and the information measures built on it.
//!
//! All logarithms are natural. Measures operate on bin/label index slices so
//! the same functions serve quantized embeddings and class labels.

use std::cmp::Ordering;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;
use crate::rng::{self, Stage};
use crate::spectral::Embedding;

const LLOYD_MAX_ITER: usize = 100;
/// Dense eigensolve limit for the smallest-eigenvalue search.
const DENSE_EIGEN_LIMIT: usize = 2000;
pub const PSD_MARGIN: f64 = 1e-9;

/// Bin index per sample, each in `[0, C)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Discretization {
    pub bins: Vec<usize>,
}

impl Discretization {
    pub fn as_slice(&self) -> &[usize] {
        &self.bins
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// One-dimensional k-means with `c` centers.
///
/// Centers start at the `(2i+1)/(2c)` quantiles; Lloyd steps run until the
/// assignment stops changing (at most 100 steps). A point equidistant to two
/// centers joins the lower-indexed one, and an emptied center keeps its
/// position. Bins are finally numbered by ascending center value. The seed
/// is accepted for interface stability; the procedure is deterministic.
pub fn quantize(values: &[f64], c: usize, _seed: u64) -> Result<Discretization> {
    let n = values.len();
    if c < 2 {
        return Err(Error::Parameter(format!("quantizer needs at least 2 bins, got {c}")));
    }
    if n < c {
        return Err(Error::Parameter(format!("cannot quantize {n} values into {c} bins")));
    }
    if values.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("quantize: non-finite value".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut centers: Vec<f64> = (0..c)
        .map(|i| quantile(&sorted, (2 * i + 1) as f64 / (2 * c) as f64))
        .collect();

    let assign = |centers: &[f64], x: f64| -> usize {
        let mut best = 0;
        let mut best_d = (x - centers[0]).abs();
        for (k, &ck) in centers.iter().enumerate().skip(1) {
            let d = (x - ck).abs();
            if d < best_d {
                best = k;
                best_d = d;
            }
        }
        best
    };

    let mut bins: Vec<usize> = values.iter().map(|&x| assign(&centers, x)).collect();
    for _ in 0..LLOYD_MAX_ITER {
        let mut sums = vec![0.0; c];
        let mut counts = vec![0usize; c];
        for (&b, &x) in bins.iter().zip(values) {
            sums[b] += x;
            counts[b] += 1;
        }
        for k in 0..c {
            if counts[k] > 0 {
                centers[k] = sums[k] / counts[k] as f64;
            }
        }
        let next: Vec<usize> = values.iter().map(|&x| assign(&centers, x)).collect();
        if next == bins {
            break;
        }
        bins = next;
    }

    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&a, &b| centers[a].total_cmp(&centers[b]).then(a.cmp(&b)));
    let mut rank = vec![0; c];
    for (r, &k) in order.iter().enumerate() {
        rank[k] = r;
    }
    Ok(Discretization {
        bins: bins.into_iter().map(|b| rank[b]).collect(),
    })
}

fn cardinality(xs: &[usize]) -> usize {
    xs.iter().max().map_or(0, |m| m + 1)
}

fn check_len(what: &'static str, a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            what,
            expected: a,
            found: b,
        });
    }
    Ok(())
}

/// Empirical Shannon entropy in nats.
pub fn entropy(a: &[usize]) -> f64 {
    let n = a.len();
    if n == 0 {
        return 0.0;
    }
    let mut counts = vec![0usize; cardinality(a)];
    for &x in a {
        counts[x] += 1;
    }
    let n = n as f64;
    let h = counts
        .iter()
        .filter(|&&k| k > 0)
        .map(|&k| {
            let p = k as f64 / n;
            -p * p.ln()
        })
        .sum::<f64>();
    h.max(0.0)
}

/// Joint counts of two index sequences.
struct Joint {
    counts: Vec<usize>,
    cols: usize,
    row_totals: Vec<usize>,
    col_totals: Vec<usize>,
}

impl Joint {
    fn new(a: &[usize], b: &[usize]) -> Self {
        let rows = cardinality(a);
        let cols = cardinality(b);
        let mut counts = vec![0usize; rows * cols];
        let mut row_totals = vec![0usize; rows];
        let mut col_totals = vec![0usize; cols];
        for (&x, &y) in a.iter().zip(b) {
            counts[x * cols + y] += 1;
            row_totals[x] += 1;
            col_totals[y] += 1;
        }
        Self {
            counts,
            cols,
            row_totals,
            col_totals,
        }
    }

    /// Sum over nonzero cells of `n_xy * ln(n_xy * total / (n_x * n_y))`.
    fn weighted_log_ratio(&self, total: usize) -> f64 {
        let mut s = 0.0;
        for (idx, &nxy) in self.counts.iter().enumerate() {
            if nxy == 0 {
                continue;
            }
            let nx = self.row_totals[idx / self.cols];
            let ny = self.col_totals[idx % self.cols];
            s += nxy as f64 * ((nxy as f64 * total as f64) / (nx as f64 * ny as f64)).ln();
        }
        s
    }
}

/// Empirical mutual information in nats.
pub fn mutual_information(a: &[usize], b: &[usize]) -> Result<f64> {
    check_len("mutual information operands", a.len(), b.len())?;
    if a.is_empty() {
        return Ok(0.0);
    }
    let joint = Joint::new(a, b);
    Ok((joint.weighted_log_ratio(a.len()) / a.len() as f64).max(0.0))
}

/// Empirical `I(a; b | c)` in nats.
pub fn conditional_mi(a: &[usize], b: &[usize], c: &[usize]) -> Result<f64> {
    check_len("conditional MI operands", a.len(), b.len())?;
    check_len("conditional MI operands", a.len(), c.len())?;
    let n = a.len();
    if n == 0 {
        return Ok(0.0);
    }
    let mut groups: Vec<(Vec<usize>, Vec<usize>)> = vec![(Vec::new(), Vec::new()); cardinality(c)];
    for ((&x, &y), &z) in a.iter().zip(b).zip(c) {
        groups[z].0.push(x);
        groups[z].1.push(y);
    }
    let s: f64 = groups
        .iter()
        .filter(|(xs, _)| !xs.is_empty())
        .map(|(xs, ys)| Joint::new(xs, ys).weighted_log_ratio(xs.len()))
        .sum();
    Ok((s / n as f64).max(0.0))
}

/// `I(a; b) / sqrt(H(a) H(b))`, zero when either entropy vanishes.
pub fn normalized_mi(a: &[usize], b: &[usize]) -> Result<f64> {
    let mi = mutual_information(a, b)?;
    let ha = entropy(a);
    let hb = entropy(b);
    if ha == 0.0 || hb == 0.0 {
        return Ok(0.0);
    }
    Ok(mi / (ha * hb).sqrt())
}

/// NMI between an embedding, quantized into `c` bins, and the labels.
pub fn nmi(embedding: &[f64], labels: &[usize], c: usize) -> Result<f64> {
    check_len("embedding and labels", embedding.len(), labels.len())?;
    if entropy(labels) == 0.0 {
        return Err(Error::DegenerateLabels);
    }
    let bins = quantize(embedding, c, 0)?;
    normalized_mi(&bins.bins, labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RedundancyKind {
    /// Pairwise mutual information between quantized embeddings.
    Mi,
    /// Label relevance on the diagonal, averaged conditional relevance off it.
    Cmi,
}

impl RedundancyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RedundancyKind::Mi => "mi",
            RedundancyKind::Cmi => "cmi",
        }
    }
}

impl std::str::FromStr for RedundancyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mi" => Ok(RedundancyKind::Mi),
            "cmi" => Ok(RedundancyKind::Cmi),
            other => Err(Error::Parameter(format!("unknown penalty kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RedundancyMatrix {
    pub kind: RedundancyKind,
    pub values: SquareMatrix,
    /// Diagonal shift already applied to `values`.
    pub gamma: f64,
    /// Landmark feature ids when the matrix was completed from a subset.
    pub landmarks: Option<Vec<usize>>,
}

struct RedundancyCells<'a> {
    bins: Vec<Discretization>,
    labels: &'a [usize],
    kind: RedundancyKind,
}

impl<'a> RedundancyCells<'a> {
    fn new(embeddings: &[Embedding], labels: &'a [usize], c: usize, kind: RedundancyKind) -> Result<Self> {
        if embeddings.is_empty() {
            return Err(Error::InvalidInput("redundancy matrix of zero embeddings".into()));
        }
        for e in embeddings {
            check_len("embedding length", labels.len(), e.len())?;
        }
        let bins = embeddings
            .par_iter()
            .map(|e| quantize(&e.values, c, 0))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { bins, labels, kind })
    }

    fn cell(&self, i: usize, j: usize) -> Result<f64> {
        let (bi, bj) = (self.bins[i].as_slice(), self.bins[j].as_slice());
        match self.kind {
            RedundancyKind::Mi => mutual_information(bi, bj),
            RedundancyKind::Cmi if i == j => mutual_information(bi, self.labels),
            RedundancyKind::Cmi => {
                Ok(0.5 * (conditional_mi(bi, self.labels, bj)? + conditional_mi(bj, self.labels, bi)?))
            }
        }
    }

    fn fill(&self, rows: &[usize], cols: &[usize]) -> Result<Vec<Vec<f64>>> {
        rows.par_iter()
            .map(|&i| cols.iter().map(|&j| self.cell(i, j)).collect())
            .collect()
    }
}

/// Exact m x m redundancy matrix over quantized embeddings.
pub fn build_redundancy(
    embeddings: &[Embedding],
    labels: &[usize],
    c: usize,
    kind: RedundancyKind,
) -> Result<RedundancyMatrix> {
    let cells = RedundancyCells::new(embeddings, labels, c, kind)?;
    let m = embeddings.len();
    let upper: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| (i..m).map(|j| cells.cell(i, j)).collect())
        .collect::<Result<_>>()?;
    let mut values = SquareMatrix::zeros(m);
    for (i, row) in upper.into_iter().enumerate() {
        for (off, x) in row.into_iter().enumerate() {
            values.set(i, i + off, x);
            values.set(i + off, i, x);
        }
    }
    Ok(RedundancyMatrix {
        kind,
        values,
        gamma: 0.0,
        landmarks: None,
    })
}

/// Truncated eigen pseudo-inverse: eigenvalues with magnitude at or below
/// `cutoff` are treated as zero.
fn pseudo_inverse(a: &SquareMatrix, cutoff: f64) -> SquareMatrix {
    let s = a.size();
    let eig = nalgebra::SymmetricEigen::new(a.to_nalgebra());
    let mut out = SquareMatrix::zeros(s);
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda.abs() <= cutoff {
            continue;
        }
        let u = eig.eigenvectors.column(k);
        for i in 0..s {
            for j in 0..s {
                out.set(i, j, out.get(i, j) + u[i] * u[j] / lambda);
            }
        }
    }
    out
}

/// Nystrom completion of an m x m symmetric matrix from the rows of the
/// landmark ids: the landmark block `A` and the cross block `B` come from
/// `cell`, the rest is `B^T A^+ B`. `A^+` drops eigenvalues with magnitude at
/// most `1e-8 * trace(A) / s`. The result is symmetrized.
pub fn nystrom_complete(
    m: usize,
    landmarks: &[usize],
    rows: impl Fn(&[usize], &[usize]) -> Result<Vec<Vec<f64>>>,
) -> Result<SquareMatrix> {
    let s = landmarks.len();
    if s == 0 || s > m {
        return Err(Error::Parameter(format!("need 1 <= landmarks <= {m}, got {s}")));
    }
    let mut is_landmark = vec![false; m];
    for &l in landmarks {
        if l >= m || is_landmark[l] {
            return Err(Error::Parameter(format!("invalid or repeated landmark {l}")));
        }
        is_landmark[l] = true;
    }
    let others: Vec<usize> = (0..m).filter(|&j| !is_landmark[j]).collect();

    let a_rows = rows(landmarks, landmarks)?;
    let b_rows = rows(landmarks, &others)?;
    let a = SquareMatrix::from_rows(&a_rows)?;
    let cutoff = 1e-8 * a.trace().abs() / s as f64;
    let a_pinv = pseudo_inverse(&a, cutoff);

    let mut q = SquareMatrix::zeros(m);
    for (r, &li) in landmarks.iter().enumerate() {
        for (c, &lj) in landmarks.iter().enumerate() {
            q.set(li, lj, a_rows[r][c]);
        }
        for (c, &oj) in others.iter().enumerate() {
            q.set(li, oj, b_rows[r][c]);
            q.set(oj, li, b_rows[r][c]);
        }
    }
    // (A^+ B) column by column, then B^T times it
    let o = others.len();
    let mut pinv_b = vec![vec![0.0; o]; s];
    for (r, row) in pinv_b.iter_mut().enumerate() {
        for (c, x) in row.iter_mut().enumerate() {
            *x = (0..s).map(|k| a_pinv.get(r, k) * b_rows[k][c]).sum();
        }
    }
    for (x, &oi) in others.iter().enumerate() {
        for (y, &oj) in others.iter().enumerate() {
            let v: f64 = (0..s).map(|k| b_rows[k][x] * pinv_b[k][y]).sum();
            q.set(oi, oj, v);
        }
    }
    Ok(SquareMatrix::from_fn(m, |i, j| 0.5 * (q.get(i, j) + q.get(j, i))))
}

/// Redundancy matrix completed from `s` uniformly sampled landmark features.
pub fn nystrom_redundancy(
    embeddings: &[Embedding],
    labels: &[usize],
    c: usize,
    kind: RedundancyKind,
    s: usize,
    seed: u64,
) -> Result<RedundancyMatrix> {
    let m = embeddings.len();
    if s == 0 || s > m {
        return Err(Error::Parameter(format!("landmark count {s} must lie in [1, {m}]")));
    }
    let cells = RedundancyCells::new(embeddings, labels, c, kind)?;
    let mut rng = rng::stream(seed, Stage::Landmarks);
    let mut landmarks = index::sample(&mut rng, m, s).into_vec();
    landmarks.sort_unstable();
    let values = nystrom_complete(m, &landmarks, |r, c| cells.fill(r, c))?;
    Ok(RedundancyMatrix {
        kind,
        values,
        gamma: 0.0,
        landmarks: Some(landmarks),
    })
}

/// Smallest eigenvalue of a symmetric matrix.
///
/// Dense eigensolve up to 2000 rows; beyond that, power iteration on
/// `sigma I - R` where `sigma` is the Gershgorin bound.
pub fn min_eigenvalue(r: &SquareMatrix) -> f64 {
    let m = r.size();
    if m == 0 {
        return 0.0;
    }
    if m <= DENSE_EIGEN_LIMIT {
        let eig = nalgebra::SymmetricEigen::new(r.to_nalgebra());
        return eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    }
    min_eigenvalue_power(r)
}

fn min_eigenvalue_power(r: &SquareMatrix) -> f64 {
    let m = r.size();
    let sigma = r
        .rows()
        .map(|row| row.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let shifted = SquareMatrix::from_fn(m, |i, j| if i == j { sigma - r.get(i, j) } else { -r.get(i, j) });
    let mut v: Vec<f64> = (0..m).map(|i| 1.0 + (i % 7) as f64 * 1e-3).collect();
    let mut w = vec![0.0; m];
    let mut rayleigh = 0.0;
    for _ in 0..10_000 {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        w.par_iter_mut()
            .enumerate()
            .for_each(|(i, o)| *o = shifted.row(i).iter().zip(&v).map(|(a, b)| a * b).sum());
        let next: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
        std::mem::swap(&mut v, &mut w);
        if (next - rayleigh).abs() <= 1e-12 * next.abs().max(1.0) {
            rayleigh = next;
            break;
        }
        rayleigh = next;
    }
    sigma - rayleigh
}

/// Adds `gamma I` with `gamma = max(0, -lambda_min) + 1e-9`.
pub fn psd_shift(r: &RedundancyMatrix) -> Result<RedundancyMatrix> {
    if r.values.as_slice().iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("redundancy matrix has non-finite entries".into()));
    }
    let lambda_min = min_eigenvalue(&r.values);
    let shift = match lambda_min.partial_cmp(&0.0) {
        Some(Ordering::Less) => -lambda_min + PSD_MARGIN,
        _ => PSD_MARGIN,
    };
    let mut values = r.values.clone();
    for i in 0..values.size() {
        values.set(i, i, values.get(i, i) + shift);
    }
    Ok(RedundancyMatrix {
        kind: r.kind,
        values,
        gamma: r.gamma + shift,
        landmarks: r.landmarks.clone(),
    })
}
