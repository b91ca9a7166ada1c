//! Small dense linear-algebra helpers shared by the estimators.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

/// Relative threshold below which a pivot or eigenvalue counts as zero.
pub const RANK_TOL: f64 = 1e-10;

/// Relative threshold below which a least-squares solve switches to the
/// pseudo-inverse and flags the result.
pub const NEAR_SINGULAR_TOL: f64 = 1e-7;

#[derive(Debug, Clone)]
pub struct LstsqSolution {
    pub coef: DVector<f64>,
    pub residuals: DVector<f64>,
    pub rss: f64,
    pub near_singular: bool,
}

/// Least squares via Householder QR with column pivoting on the
/// column-equilibrated design.
///
/// Returns `None` when the design is rank deficient (smallest `|R_jj|`
/// below `RANK_TOL` times the largest).
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<LstsqSolution> {
    let (n, k) = a.shape();
    assert_eq!(n, b.len(), "lstsq: row mismatch");
    if k == 0 || n < k {
        return None;
    }
    let norms: Vec<f64> = a.column_iter().map(|c| c.norm()).collect();
    if norms.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return None;
    }
    let mut scaled = a.clone();
    for (j, mut c) in scaled.column_iter_mut().enumerate() {
        c /= norms[j];
    }
    let qr = scaled.clone().col_piv_qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..k).map(|j| r[(j, j)].abs()).collect();
    let dmax = diag.iter().cloned().fold(0.0, f64::max);
    let dmin = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(dmax > 0.0) || dmin < RANK_TOL * dmax {
        return None;
    }
    let near_singular = dmin < NEAR_SINGULAR_TOL * dmax;
    let mut coef = if near_singular {
        let svd = scaled.svd(true, true);
        let eps = RANK_TOL * svd.singular_values.max();
        svd.solve(b, eps).ok()?
    } else {
        let mut qtb = b.clone();
        qr.q_tr_mul(&mut qtb);
        let r_sq = r.view((0, 0), (k, k)).into_owned();
        let mut x = r_sq.solve_upper_triangular(&qtb.rows(0, k).into_owned())?;
        qr.p().inv_permute_rows(&mut x);
        x
    };
    for (j, v) in coef.iter_mut().enumerate() {
        *v /= norms[j];
    }
    let residuals = b - a * &coef;
    let rss = residuals.norm_squared();
    Some(LstsqSolution {
        coef,
        residuals,
        rss,
        near_singular,
    })
}

/// Ratio of smallest to largest eigenvalue of a symmetric matrix.
pub fn eigen_ratio(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 1.0;
    }
    let eig = SymmetricEigen::new(symmetrize(m)).eigenvalues;
    let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) {
        return 0.0;
    }
    min / max
}

/// `D^-1/2 m D^-1/2` with `D = diag(m)`, or `None` if a diagonal entry is not
/// positive.
pub fn unit_diagonal(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let d: Vec<f64> = m.diagonal().iter().map(|v| v.sqrt()).collect();
    if d.iter().any(|v| !(*v > 0.0)) {
        return None;
    }
    Some(DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)] / (d[r] * d[c])))
}

/// Scale-invariant rank check: the eigenvalue ratio is taken after
/// normalizing the diagonal to one.
pub fn is_full_rank_sym(m: &DMatrix<f64>) -> bool {
    m.iter().all(|v| v.is_finite()) && unit_diagonal(m).is_some_and(|s| eigen_ratio(&s) >= RANK_TOL)
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Inverse of a symmetric positive definite matrix.
pub fn spd_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if !is_full_rank_sym(m) {
        return None;
    }
    Cholesky::new(symmetrize(m)).map(|c| c.inverse())
}

/// Solves `m x = b` for symmetric positive definite `m`.
pub fn spd_solve(m: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    if !is_full_rank_sym(m) {
        return None;
    }
    Cholesky::new(symmetrize(m)).map(|c| c.solve(b))
}

/// Solves a general square system with LU.
pub fn solve(m: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    m.clone().lu().solve(b)
}

pub fn quad_form(m: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    v.dot(&(m * v))
}

pub fn mean_vector(vs: &[DVector<f64>]) -> DVector<f64> {
    let k = vs.first().map(|v| v.len()).unwrap_or(0);
    let mut acc = DVector::zeros(k);
    for v in vs {
        acc += v;
    }
    acc / vs.len().max(1) as f64
}

pub fn mean_matrix(ms: &[DMatrix<f64>]) -> DMatrix<f64> {
    let (r, c) = ms.first().map(|m| m.shape()).unwrap_or((0, 0));
    let mut acc = DMatrix::zeros(r, c);
    for m in ms {
        acc += m;
    }
    acc / ms.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lstsq_recovers_exact_fit() {
        let a = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let b = DVector::from_vec(vec![2.0, 5.0, 8.0, 11.0]);
        let s = lstsq(&a, &b).unwrap();
        assert!((s.coef[0] - 2.0).abs() < 1e-12);
        assert!((s.coef[1] - 3.0).abs() < 1e-12);
        assert!(s.rss < 1e-20);
        assert!(!s.near_singular);
    }

    #[test]
    fn lstsq_matches_normal_equations_with_pivoting() {
        let a = DMatrix::from_row_slice(
            5,
            3,
            &[
                1.0, 0.1, 30.0, 1.0, -0.4, 12.0, 1.0, 0.7, -8.0, 1.0, 0.2, 4.0, 1.0, -1.3, 9.0,
            ],
        );
        let b = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0, 0.25]);
        let s = lstsq(&a, &b).unwrap();
        let at = a.transpose();
        let direct = (&at * &a).try_inverse().unwrap() * (&at * &b);
        assert!((s.coef - direct).amax() < 1e-10);
    }

    #[test]
    fn lstsq_rejects_collinear_columns() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert!(lstsq(&a, &b).is_none());
    }

    #[test]
    fn spd_inverse_of_diag() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 4.0]));
        let inv = spd_inverse(&m).unwrap();
        assert!((inv[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((inv[(1, 1)] - 0.25).abs() < 1e-15);
    }
}
