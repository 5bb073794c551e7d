//! Small dense-linear-algebra helpers shared by the regressors and the engine.

use ndarray::prelude::*;
use ndarray_linalg::{CholeskyInto, EigValshInto, Eigh, InverseC, UPLO};

use crate::error::{Error, Result};

/// Double centering: H A H with H = I − J/n, computed in O(n²) without
/// materialising H.
pub(crate) fn centered_both(a: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    let col_means = a.mean_axis(Axis(0)).expect("nonempty");
    let row_means = a.mean_axis(Axis(1)).expect("nonempty");
    let grand = col_means.sum() / n as f64;
    let mut out = a.clone();
    for i in 0..n {
        let ri = row_means[i];
        let mut row = out.row_mut(i);
        for j in 0..n {
            row[j] += grand - ri - col_means[j];
        }
    }
    out
}

pub(crate) fn symmetrize(a: &mut Array2<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[[i, j]] + a[[j, i]]);
            a[[i, j]] = v;
            a[[j, i]] = v;
        }
    }
}

/// Eigenvalues of a symmetric matrix, ascending.
pub(crate) fn sym_eigvals(a: Array2<f64>) -> Result<Array1<f64>> {
    a.eigvalsh_into(UPLO::Lower)
        .map_err(|e| Error::Eigen(e.to_string()))
}

/// Inverse of a symmetric positive-definite matrix. Cholesky first; if that
/// fails (marginally indefinite input from round-off), an eigendecomposition
/// pseudo-inverse with eigenvalue floor 1e-12 is used instead. The flag
/// reports whether the fallback ran.
pub(crate) fn spd_inverse(a: &Array2<f64>) -> Result<(Array2<f64>, bool)> {
    if let Ok(inv) = a.invc() {
        return Ok((inv, false));
    }
    let (vals, q) = a
        .eigh(UPLO::Lower)
        .map_err(|e| Error::Factorization(format!("eigen fallback failed: {e}")))?;
    let floored = vals.mapv(|v| 1.0 / v.max(1e-12));
    let scaled = &q * &floored; // scales column k of Q by 1/max(w_k, floor)
    Ok((scaled.dot(&q.t()), true))
}

/// Cholesky factor check used by tests and validation paths.
#[allow(dead_code)]
pub(crate) fn is_spd(a: &Array2<f64>) -> bool {
    a.clone().cholesky_into(UPLO::Lower).is_ok()
}
