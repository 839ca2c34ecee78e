//! Minimal dense linear algebra used by the model fitters.
//!
//! Every system solved in this crate is of normal-equations form
//! `X' W X b = X' W y` with a handful of columns, so a plain Cholesky
//! factorization is all that is needed. Rolling it by hand keeps the crate
//! free of a LAPACK backend and makes rank-deficiency reporting precise: the
//! first column whose pivot collapses is named in the error.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Relative pivot tolerance below which a Cholesky pivot is treated as zero.
const PIVOT_RTOL: f64 = 1e-12;

/// Solve the symmetric positive definite system `a x = b` in place via
/// Cholesky. `context` is appended to the rank-deficiency error message
/// (e.g. " within arm 1") so callers can localize the offending design.
pub(crate) fn cholesky_solve(a: &Array2<f64>, b: &Array1<f64>, context: &str) -> Result<Array1<f64>> {
    let p = a.nrows();
    if a.ncols() != p || b.len() != p {
        return Err(Error::Invalid(format!(
            "cholesky_solve: shape mismatch ({}x{} vs rhs {})",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    let max_diag = (0..p).map(|j| a[[j, j]].abs()).fold(0.0_f64, f64::max);
    let tol = PIVOT_RTOL * max_diag.max(1e-300);

    // Lower-triangular factor, row by row.
    let mut l = Array2::<f64>::zeros((p, p));
    for j in 0..p {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if !(d > tol) {
            return Err(Error::RankDeficient {
                column: j,
                context: context.to_string(),
            });
        }
        let dj = d.sqrt();
        l[[j, j]] = dj;
        for i in (j + 1)..p {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / dj;
        }
    }

    // Forward then backward substitution.
    let mut y = Array1::<f64>::zeros(p);
    for i in 0..p {
        let mut s = b[i];
        for k in 0..i {
            s -= l[[i, k]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    let mut x = Array1::<f64>::zeros(p);
    for i in (0..p).rev() {
        let mut s = y[i];
        for k in (i + 1)..p {
            s -= l[[k, i]] * x[k];
        }
        x[i] = s / l[[i, i]];
    }
    Ok(x)
}

/// Weighted least squares: minimize `sum_i w_i (y_i - x_i' b)^2`.
///
/// Forms the normal equations `X' W X b = X' W y` and solves by Cholesky.
/// Weights must be non-negative; rows with weight exactly zero contribute
/// nothing to either side.
pub(crate) fn solve_wls(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    w: ArrayView1<f64>,
    context: &str,
) -> Result<Array1<f64>> {
    let n = x.nrows();
    let p = x.ncols();
    if y.len() != n || w.len() != n {
        return Err(Error::Invalid(format!(
            "solve_wls: {} rows but {} outcomes / {} weights",
            n,
            y.len(),
            w.len()
        )));
    }
    let mut gram = Array2::<f64>::zeros((p, p));
    let mut rhs = Array1::<f64>::zeros(p);
    for i in 0..n {
        let wi = w[i];
        if wi == 0.0 {
            continue;
        }
        let row = x.row(i);
        for a in 0..p {
            let wa = wi * row[a];
            rhs[a] += wa * y[i];
            for b in a..p {
                gram[[a, b]] += wa * row[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            gram[[a, b]] = gram[[b, a]];
        }
    }
    cholesky_solve(&gram, &rhs, context)
}

/// Largest eigenvalue of `(c/n) X' diag(w) X` estimated by power iteration.
///
/// Used to seed proximal-gradient step sizes; a handful of iterations is
/// plenty because only the order of magnitude matters (backtracking corrects
/// the rest). Deterministic: starts from the all-ones vector.
pub(crate) fn weighted_gram_spectral_bound(x: ArrayView2<f64>, w: ArrayView1<f64>, scale: f64) -> f64 {
    let n = x.nrows();
    let p = x.ncols();
    if n == 0 || p == 0 {
        return 0.0;
    }
    let mut v = Array1::<f64>::ones(p);
    let mut norm = (p as f64).sqrt();
    let mut lambda = 0.0;
    for _ in 0..12 {
        v.mapv_inplace(|t| t / norm);
        // u = (scale/n) X' diag(w) X v, accumulated row by row.
        let mut u = Array1::<f64>::zeros(p);
        for i in 0..n {
            let wi = w[i];
            if wi == 0.0 {
                continue;
            }
            let row = x.row(i);
            let dot = row.dot(&v);
            let c = scale / n as f64 * wi * dot;
            for j in 0..p {
                u[j] += c * row[j];
            }
        }
        lambda = u.dot(&v);
        norm = u.dot(&u).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        v = u;
    }
    lambda.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn cholesky_solves_small_spd_system() {
        let a = array![[4.0, 2.0], [2.0, 3.0]];
        let b = array![10.0, 8.0];
        let x = cholesky_solve(&a, &b, "").unwrap();
        // Reference solution computed by hand: det = 8, x = (7/4, 3/2).
        assert_abs_diff_eq!(x[0], 1.75, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], 1.5, epsilon = 1e-12);
    }

    #[test]
    fn cholesky_names_dependent_column() {
        // Third column is the sum of the first two, so the Gram matrix of
        // [e1, e2, e1+e2] breaks at pivot 2.
        let x = array![[1.0, 0.0, 1.0], [0.0, 1.0, 1.0], [1.0, 1.0, 2.0]];
        let gram = x.t().dot(&x);
        let b = Array1::zeros(3);
        match cholesky_solve(&gram, &b, " in test design") {
            Err(Error::RankDeficient { column, .. }) => assert_eq!(column, 2),
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn wls_ignores_zero_weight_rows() {
        // Two informative rows pin the line y = 1 + 2 t; the third row is
        // wildly off but carries zero weight.
        let x = array![[1.0, 0.0], [1.0, 1.0], [1.0, 2.0]];
        let y = array![1.0, 3.0, -100.0];
        let w = array![1.0, 1.0, 0.0];
        let b = solve_wls(x.view(), y.view(), w.view(), "").unwrap();
        assert_abs_diff_eq!(b[0], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(b[1], 2.0, epsilon = 1e-10);
    }

    #[test]
    fn spectral_bound_matches_known_eigenvalue() {
        // X = I (2x2), w = 1: (1/n) X'X has top eigenvalue 1/2; scale 2 -> 1.
        let x = array![[1.0, 0.0], [0.0, 1.0]];
        let w = array![1.0, 1.0];
        let l = weighted_gram_spectral_bound(x.view(), w.view(), 2.0);
        assert_abs_diff_eq!(l, 1.0, epsilon = 1e-9);
    }
}
