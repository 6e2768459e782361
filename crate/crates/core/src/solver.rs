//! Nonnegative sparse coordinate descent for
//!
//! ```text
//! J(a) = 1/2 ||h_y - H a||^2 + lambda ||a||_1 + beta a^T Q a,   a >= 0
//! ```
//!
//! where each column of `H` is a flattened similarity graph, `h_y` is the
//! flattened label graph and `Q` a PSD-shifted redundancy matrix.
//!
//! Every coordinate step is the exact minimizer of the one-dimensional
//! problem, so the objective never increases; the solver checks this after
//! each sweep and fails loudly if rounding ever says otherwise.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::SimilarityGraph;
use crate::matrix::SquareMatrix;

/// Relative slack for the per-sweep monotonicity check.
pub const MONOTONE_RTOL: f64 = 1e-10;

/// A column of `H`, keeping only the nonzero entries of the flattened graph.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseColumn {
    pub index: Vec<usize>,
    pub value: Vec<f64>,
}

impl SparseColumn {
    fn from_dense(dense: &[f64]) -> Self {
        let (index, value) = dense
            .iter()
            .enumerate()
            .filter(|(_, &x)| x != 0.0)
            .map(|(i, &x)| (i, x))
            .unzip();
        Self { index, value }
    }

    fn dot(&self, dense: &[f64]) -> f64 {
        self.index.iter().zip(&self.value).map(|(&i, &x)| x * dense[i]).sum()
    }

    fn axpy(&self, scale: f64, dense: &mut [f64]) {
        for (&i, &x) in self.index.iter().zip(&self.value) {
            dense[i] += scale * x;
        }
    }

    fn squared_norm(&self) -> f64 {
        self.value.iter().map(|x| x * x).sum()
    }
}

/// Flattened design: `H` by columns plus the target `h_y`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatDesign {
    pub rows: usize,
    pub columns: Vec<SparseColumn>,
    pub target: Vec<f64>,
    /// `H_k^T H_k` per column.
    pub gram_diag: Vec<f64>,
    /// `H_k^T h_y` per column.
    pub target_corr: Vec<f64>,
}

impl FlatDesign {
    /// Builds a design from dense columns of equal length.
    pub fn from_columns(columns: &[Vec<f64>], target: Vec<f64>) -> Result<Self> {
        let rows = target.len();
        for c in columns {
            if c.len() != rows {
                return Err(Error::DimensionMismatch {
                    what: "design column",
                    expected: rows,
                    found: c.len(),
                });
            }
        }
        let columns: Vec<SparseColumn> = columns.par_iter().map(|c| SparseColumn::from_dense(c)).collect();
        let gram_diag = columns.par_iter().map(SparseColumn::squared_norm).collect();
        let target_corr = columns.par_iter().map(|c| c.dot(&target)).collect();
        Ok(Self {
            rows,
            columns,
            target,
            gram_diag,
            target_corr,
        })
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn column_dense(&self, k: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        for (&i, &x) in self.columns[k].index.iter().zip(&self.columns[k].value) {
            out[i] = x;
        }
        out
    }

    /// `h_y - H alpha`.
    pub fn residual(&self, alpha: &[f64]) -> Vec<f64> {
        let mut r = self.target.clone();
        for (c, &a) in self.columns.iter().zip(alpha) {
            if a != 0.0 {
                c.axpy(-a, &mut r);
            }
        }
        r
    }

    /// Smallest lambda for which `alpha = 0` is optimal.
    pub fn lambda_max(&self) -> f64 {
        self.target_corr.iter().fold(0.0, |acc, x| acc.max(x.abs()))
    }
}

/// Row-major flattening of each graph into a column of `H`, and of the
/// target graph into `h_y`.
pub fn flatten(graphs: &[SimilarityGraph], target: &SimilarityGraph) -> Result<FlatDesign> {
    let n = target.size();
    for g in graphs {
        if g.size() != n {
            return Err(Error::DimensionMismatch {
                what: "graph size",
                expected: n,
                found: g.size(),
            });
        }
    }
    let rows = n * n;
    let columns: Vec<SparseColumn> = graphs
        .par_iter()
        .map(|g| SparseColumn::from_dense(g.adjacency.as_slice()))
        .collect();
    let target = target.adjacency.as_slice().to_vec();
    let gram_diag = columns.par_iter().map(SparseColumn::squared_norm).collect();
    let target_corr = columns.par_iter().map(|c| c.dot(&target)).collect();
    Ok(FlatDesign {
        rows,
        columns,
        target,
        gram_diag,
        target_corr,
    })
}

fn check_dims(alpha: &[f64], design: &FlatDesign, qhat: &SquareMatrix) -> Result<()> {
    let m = design.n_columns();
    if alpha.len() != m {
        return Err(Error::DimensionMismatch {
            what: "coefficient vector",
            expected: m,
            found: alpha.len(),
        });
    }
    if qhat.size() != m {
        return Err(Error::DimensionMismatch {
            what: "penalty matrix",
            expected: m,
            found: qhat.size(),
        });
    }
    Ok(())
}

fn quadratic_form(alpha: &[f64], q: &SquareMatrix) -> f64 {
    q.rows()
        .zip(alpha)
        .filter(|(_, &a)| a != 0.0)
        .map(|(row, &a)| a * row.iter().zip(alpha).map(|(x, y)| x * y).sum::<f64>())
        .sum()
}

fn objective_from_residual(residual: &[f64], alpha: &[f64], qhat: &SquareMatrix, lambda: f64, beta: f64) -> f64 {
    let fit = 0.5 * residual.iter().map(|x| x * x).sum::<f64>();
    let l1: f64 = alpha.iter().map(|a| a.abs()).sum();
    fit + lambda * l1 + beta * quadratic_form(alpha, qhat)
}

/// `1/2 ||h_y - H alpha||^2 + lambda ||alpha||_1 + beta alpha^T Q alpha`.
pub fn objective(alpha: &[f64], design: &FlatDesign, qhat: &SquareMatrix, lambda: f64, beta: f64) -> Result<f64> {
    check_dims(alpha, design, qhat)?;
    Ok(objective_from_residual(&design.residual(alpha), alpha, qhat, lambda, beta))
}

fn penalty_coupling(alpha: &[f64], qhat: &SquareMatrix, k: usize) -> f64 {
    // alpha^T Q[:, k]
    alpha
        .iter()
        .enumerate()
        .filter(|(_, &a)| a != 0.0)
        .map(|(i, &a)| a * qhat.get(i, k))
        .sum()
}

fn gradient_with_residual(
    k: usize,
    alpha: &[f64],
    residual: &[f64],
    design: &FlatDesign,
    qhat: &SquareMatrix,
    beta: f64,
) -> f64 {
    -design.columns[k].dot(residual) + 2.0 * beta * penalty_coupling(alpha, qhat, k)
}

/// Derivative of the smooth part along coordinate `k`:
/// `H_k^T H alpha - H_k^T h_y + 2 beta alpha^T Q[:, k]`.
pub fn coordinate_gradient(
    alpha: &[f64],
    k: usize,
    design: &FlatDesign,
    qhat: &SquareMatrix,
    beta: f64,
) -> Result<f64> {
    check_dims(alpha, design, qhat)?;
    if k >= alpha.len() {
        return Err(Error::Parameter(format!("coordinate {k} out of range")));
    }
    let r = design.residual(alpha);
    Ok(gradient_with_residual(k, alpha, &r, design, qhat, beta))
}

/// Soft threshold followed by projection onto the nonnegative half-line.
#[inline]
pub fn prox_l1_nonneg(x: f64, threshold: f64) -> f64 {
    (x - threshold).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub max_sweeps: usize,
    pub tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_sweeps: 10_000,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub alpha: Vec<f64>,
    /// Objective after each completed sweep.
    pub objective_trace: Vec<f64>,
    pub sweeps_used: usize,
    pub converged: bool,
}

impl SolveResult {
    pub fn final_objective(&self) -> Option<f64> {
        self.objective_trace.last().copied()
    }

    pub fn support(&self, epsilon: f64) -> Vec<usize> {
        self.alpha
            .iter()
            .enumerate()
            .filter(|(_, &a)| a > epsilon)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Cyclic coordinate descent from `alpha = 0`.
pub fn solve(
    design: &FlatDesign,
    qhat: &SquareMatrix,
    lambda: f64,
    beta: f64,
    options: &SolverOptions,
) -> Result<SolveResult> {
    let m = design.n_columns();
    let mut alpha = vec![0.0; m];
    check_dims(&alpha, design, qhat)?;
    if !(lambda >= 0.0 && lambda.is_finite()) || !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::Parameter(format!(
            "lambda and beta must be finite and nonnegative, got {lambda}, {beta}"
        )));
    }
    let mut residual = design.target.clone();
    let mut previous = objective_from_residual(&residual, &alpha, qhat, lambda, beta);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut sweeps = 0;

    while sweeps < options.max_sweeps {
        sweeps += 1;
        let mut max_change = 0.0f64;
        for k in 0..m {
            let g = gradient_with_residual(k, &alpha, &residual, design, qhat, beta);
            let z = design.gram_diag[k] + 2.0 * beta * qhat.get(k, k);
            let updated = if z > 0.0 {
                prox_l1_nonneg(z * alpha[k] - g, lambda) / z
            } else if g == 0.0 {
                0.0
            } else {
                return Err(Error::DegenerateCoordinate {
                    coordinate: k,
                    gradient: g,
                });
            };
            let step = updated - alpha[k];
            if step != 0.0 {
                design.columns[k].axpy(-step, &mut residual);
                alpha[k] = updated;
                max_change = max_change.max(step.abs());
            }
        }
        let current = objective_from_residual(&residual, &alpha, qhat, lambda, beta);
        if current > previous + MONOTONE_RTOL * previous.abs().max(1.0) {
            return Err(Error::ObjectiveIncrease {
                sweep: sweeps,
                previous,
                current,
            });
        }
        trace.push(current);
        previous = current;
        let scale = 1.0 + alpha.iter().fold(0.0f64, |acc, a| acc.max(a.abs()));
        if max_change <= options.tol * scale {
            converged = true;
            break;
        }
    }
    Ok(SolveResult {
        alpha,
        objective_trace: trace,
        sweeps_used: sweeps,
        converged,
    })
}

/// Largest scaled KKT violation of a candidate solution.
///
/// For `alpha_k > 0` the violation is `|g_k + lambda|`, for `alpha_k = 0` it is
/// `max(0, -(g_k + lambda))`, each divided by `1 + |g_k|`.
pub fn kkt_violation(alpha: &[f64], design: &FlatDesign, qhat: &SquareMatrix, lambda: f64, beta: f64) -> Result<f64> {
    check_dims(alpha, design, qhat)?;
    let r = design.residual(alpha);
    let mut worst = 0.0f64;
    for (k, &a) in alpha.iter().enumerate() {
        let g = gradient_with_residual(k, alpha, &r, design, qhat, beta);
        let v = if a > 0.0 {
            (g + lambda).abs()
        } else {
            (-(g + lambda)).max(0.0)
        };
        worst = worst.max(v / (1.0 + g.abs()));
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetedSolve {
    pub lambda: f64,
    pub result: SolveResult,
    pub support_size: usize,
    pub steps: usize,
}

pub const BISECTION_STEPS: usize = 30;

/// Bisects lambda on `[0, lambda_max]` for a support of `target` features,
/// assuming support size does not grow with lambda. Returns the first
/// solve whose support size is closest to the target.
pub fn solve_for_support_size(
    design: &FlatDesign,
    qhat: &SquareMatrix,
    beta: f64,
    target: usize,
    support_epsilon: f64,
    options: &SolverOptions,
) -> Result<TargetedSolve> {
    let mut lo = 0.0;
    let mut hi = design.lambda_max();
    let mut best: Option<TargetedSolve> = None;
    for step in 1..=BISECTION_STEPS {
        let lambda = 0.5 * (lo + hi);
        let result = solve(design, qhat, lambda, beta, options)?;
        let size = result.support(support_epsilon).len();
        let better = best
            .as_ref()
            .is_none_or(|b| size.abs_diff(target) < b.support_size.abs_diff(target));
        if better {
            best = Some(TargetedSolve {
                lambda,
                result,
                support_size: size,
                steps: step,
            });
        }
        if size == target {
            break;
        }
        if size > target {
            lo = lambda;
        } else {
            hi = lambda;
        }
    }
    Ok(best.expect("at least one bisection step"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn design(columns: &[Vec<f64>], target: &[f64]) -> FlatDesign {
        FlatDesign::from_columns(columns, target.to_vec()).unwrap()
    }

    fn q(rows: &[Vec<f64>]) -> SquareMatrix {
        SquareMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn flatten_examples() {
        let w = SimilarityGraph::from_adjacency(q(&[vec![0.0, 1.0], vec![1.0, 0.0]])).unwrap();
        let zero = SimilarityGraph::from_adjacency(SquareMatrix::zeros(2)).unwrap();
        let d = flatten(&[w.clone(), zero], &w).unwrap();
        assert_eq!(d.column_dense(0), [0.0, 1.0, 1.0, 0.0]);
        assert_eq!(d.column_dense(1), [0.0; 4]);
        assert_eq!(d.gram_diag, [2.0, 0.0]);
        assert_eq!(d.target, [0.0, 1.0, 1.0, 0.0]);
        let big = SimilarityGraph::from_adjacency(SquareMatrix::zeros(3)).unwrap();
        assert!(flatten(&[big], &w).is_err());
    }

    #[test]
    fn objective_examples() {
        let d = design(&[vec![1.0, 0.0]], &[1.0, 0.0]);
        let one = q(&[vec![1.0]]);
        assert_eq!(objective(&[0.0], &d, &one, 0.3, 1.0).unwrap(), 0.5);
        assert_eq!(objective(&[1.0], &d, &one, 0.0, 1.0).unwrap(), 1.0);
        assert!(objective(&[1.0, 0.0], &d, &one, 0.0, 1.0).is_err());

        // square invertible H with lambda = beta = 0: the exact solution leaves no residual
        let d = design(&[vec![2.0, 0.0], vec![1.0, 1.0]], &[3.0, 1.0]);
        let z = SquareMatrix::zeros(2);
        assert_eq!(objective(&[1.0, 1.0], &d, &z, 0.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn gradient_examples() {
        let d = design(&[vec![1.0, 0.0]], &[1.0, 0.0]);
        let one = q(&[vec![1.0]]);
        assert_eq!(coordinate_gradient(&[0.0], 0, &d, &one, 1.0).unwrap(), -1.0);

        let d = design(&[vec![0.5, 1.0, 0.0], vec![1.0, 0.0, 0.5]], &[1.0, 1.0, 0.0]);
        let qq = q(&[vec![1.0, 0.2], vec![0.2, 1.0]]);
        for k in 0..2 {
            assert_eq!(coordinate_gradient(&[0.0, 0.0], k, &d, &qq, 0.7).unwrap(), -d.target_corr[k]);
        }
        assert!(coordinate_gradient(&[0.0, 0.0], 2, &d, &qq, 0.7).is_err());
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let m = rng.random_range(1..5);
            let rows = rng.random_range(2..10);
            let cols: Vec<Vec<f64>> = (0..m).map(|_| (0..rows).map(|_| rng.random::<f64>()).collect()).collect();
            let target: Vec<f64> = (0..rows).map(|_| rng.random::<f64>()).collect();
            let d = design(&cols, &target);
            let raw: Vec<f64> = (0..m * m).map(|_| rng.random_range(-1.0..1.0)).collect();
            let qq = SquareMatrix::from_fn(m, |i, j| raw[i.min(j) * m + i.max(j)]);
            let beta = rng.random_range(0.0..2.0);
            let alpha: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..2.0)).collect();
            let smooth = |a: &[f64]| objective(a, &d, &qq, 0.0, beta).unwrap();
            for k in 0..m {
                let h = 1e-5;
                let mut up = alpha.clone();
                up[k] += h;
                let mut down = alpha.clone();
                down[k] -= h;
                let fd = (smooth(&up) - smooth(&down)) / (2.0 * h);
                let g = coordinate_gradient(&alpha, k, &d, &qq, beta).unwrap();
                assert!((fd - g).abs() <= 1e-6 * (1.0 + g.abs()), "{fd} vs {g}");
            }
        }
    }

    #[test]
    fn prox_examples() {
        assert!((prox_l1_nonneg(0.5, 0.2) - 0.3).abs() < 1e-15);
        assert_eq!(prox_l1_nonneg(-0.5, 0.2), 0.0);
        assert_eq!(prox_l1_nonneg(0.1, 0.2), 0.0);
    }

    #[test]
    fn solve_examples() {
        let d = design(&[vec![1.0, 0.0, 1.0, 0.0]], &[2.0, 0.0, 2.0, 0.0]);
        let r = solve(&d, &SquareMatrix::zeros(1), 0.0, 0.0, &SolverOptions::default()).unwrap();
        assert!((r.alpha[0] - 2.0).abs() < 1e-12);

        let d = design(&[vec![1.0, 0.5, 0.0], vec![0.0, 1.0, 1.0]], &[1.0, 1.0, 1.0]);
        let qq = SquareMatrix::identity(2);
        let r = solve(&d, &qq, d.lambda_max(), 1.0, &SolverOptions::default()).unwrap();
        assert_eq!(r.alpha, [0.0, 0.0]);
        assert_eq!(r.sweeps_used, 1);
        assert!(r.converged);
    }

    #[test]
    fn degenerate_coordinate() {
        let d = design(&[vec![0.0, 0.0], vec![1.0, 0.0]], &[1.0, 0.0]);
        let qq = q(&[vec![0.0, 1.0], vec![1.0, 1.0]]);
        // beta = 0 with an all-zero column: flat direction, zero gradient
        assert!(solve(&d, &qq, 0.0, 0.0, &SolverOptions::default()).is_ok());
        // beta > 0 couples the zero column to the active one with zero curvature
        let err = solve(&d, &qq, 0.0, 1.0, &SolverOptions::default()).unwrap_err();
        assert!(matches!(err, Error::DegenerateCoordinate { coordinate: 0, .. }), "{err}");
    }

    #[test]
    fn duplicate_columns_with_mi_penalty_concentrate() {
        // grid-search oracle on the two-variable problem
        let col = vec![1.0, 0.5, 0.0, 1.0];
        let d = design(&[col.clone(), col.clone()], &[1.0, 1.0, 0.0, 1.0]);
        let h = 0.6;
        let qq = q(&[vec![h + 1e-9, h], vec![h, h + 1e-9]]);
        let (lambda, beta) = (0.05, 5.0);
        let r = solve(&d, &qq, lambda, beta, &SolverOptions::default()).unwrap();
        assert!(r.alpha[0] * r.alpha[1] < 1e-6, "{:?}", r.alpha);
        let mut best = f64::INFINITY;
        for i in 0..=1000 {
            for j in 0..=1000 - i {
                let a = [i as f64 * 1e-3, j as f64 * 1e-3];
                best = best.min(objective(&a, &d, &qq, lambda, beta).unwrap());
            }
        }
        let got = r.final_objective().unwrap();
        assert!(got <= best + 1e-9, "{got} vs grid {best}");
    }

    #[test]
    fn targeted_bisection_reaches_size() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let rows = 40;
        let cols: Vec<Vec<f64>> = (0..8).map(|_| (0..rows).map(|_| rng.random::<f64>()).collect()).collect();
        let target: Vec<f64> = (0..rows).map(|i| cols[0][i] + 0.5 * cols[3][i] + 0.1 * rng.random::<f64>()).collect();
        let d = design(&cols, &target);
        let qq = SquareMatrix::identity(8);
        let t = solve_for_support_size(&d, &qq, 0.01, 2, 1e-9, &SolverOptions::default()).unwrap();
        assert_eq!(t.support_size, 2);
        assert!(t.lambda > 0.0 && t.lambda < d.lambda_max());
    }
}
