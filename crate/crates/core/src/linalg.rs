//! Small dense symmetric-matrix routines.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigenvalues ascending, with matching eigenvector columns.
pub fn symmetric_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (DVector::zeros(0), DMatrix::zeros(0, 0));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        vectors.set_column(c, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

pub fn trace(m: &DMatrix<f64>) -> f64 {
    (0..m.nrows()).map(|i| m[(i, i)]).sum()
}

/// Fails when `m` has an eigenvalue below `-tol_rel · max(trace, tiny)`.
pub fn check_psd(m: &DMatrix<f64>, tol_rel: f64) -> Result<()> {
    if m.nrows() == 0 {
        return Ok(());
    }
    let (values, _) = symmetric_eigen(m);
    let floor = -tol_rel * trace(m).abs().max(f64::MIN_POSITIVE);
    if values[0] < floor {
        return Err(Error::NotPositiveSemidefinite(values[0]));
    }
    Ok(())
}

/// Symmetric square root of a PSD matrix; eigenvalues below
/// `clip_rel · λ_max` are set to zero.
pub fn psd_sqrt(m: &DMatrix<f64>, clip_rel: f64) -> DMatrix<f64> {
    let n = m.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let (values, vectors) = symmetric_eigen(m);
    let cutoff = clip_rel * values[n - 1].max(0.0);
    let roots = DVector::from_iterator(
        n,
        values.iter().map(|&l| if l > cutoff { l.sqrt() } else { 0.0 }),
    );
    &vectors * DMatrix::from_diagonal(&roots) * vectors.transpose()
}

/// Moore-Penrose inverse of a symmetric matrix. Eigenvalues at or below
/// `clip_rel · scale` are treated as zero; the flag reports whether any
/// direction was dropped.
pub fn symmetric_pinv(m: &DMatrix<f64>, scale: f64, clip_rel: f64) -> (DMatrix<f64>, bool) {
    let n = m.nrows();
    if n == 0 {
        return (DMatrix::zeros(0, 0), false);
    }
    let (values, vectors) = symmetric_eigen(m);
    let cutoff = clip_rel * scale.abs();
    let mut clipped = false;
    let inv = DVector::from_iterator(
        n,
        values.iter().map(|&l| {
            if l > cutoff {
                1.0 / l
            } else {
                clipped = true;
                0.0
            }
        }),
    );
    (&vectors * DMatrix::from_diagonal(&inv) * vectors.transpose(), clipped)
}

/// Pivoted Cholesky factor `L` (`n × rank`) with `L Lᵀ ≈ m`.
///
/// Pivots greedily on the largest remaining Schur-complement diagonal and
/// stops once it falls to `tol_rel · max diag`, so rank-deficient matrices
/// yield a narrow factor whose dropped directions carry no variance.
pub fn pivoted_cholesky(m: &DMatrix<f64>, tol_rel: f64) -> DMatrix<f64> {
    let n = m.nrows();
    let max_diag = (0..n).map(|i| m[(i, i)]).fold(0.0_f64, f64::max);
    let tol = tol_rel * max_diag;
    let mut d: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    let mut l = DMatrix::<f64>::zeros(n, n);
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut rank = 0;
    while !remaining.is_empty() {
        let (pos, &p) = remaining
            .iter()
            .enumerate()
            .max_by(|a, b| d[*a.1].total_cmp(&d[*b.1]))
            .unwrap();
        if d[p] <= tol || max_diag <= 0.0 {
            break;
        }
        let piv = d[p].sqrt();
        l[(p, rank)] = piv;
        remaining.swap_remove(pos);
        for &j in &remaining {
            let mut s = m[(j, p)];
            for c in 0..rank {
                s -= l[(j, c)] * l[(p, c)];
            }
            let v = s / piv;
            l[(j, rank)] = v;
            d[j] -= v * v;
        }
        rank += 1;
    }
    l.columns(0, rank).into_owned()
}
