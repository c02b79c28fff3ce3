//! Small dense linear-algebra helpers on top of nalgebra.
//!
//! Rank decisions use singular values with a relative threshold of
//! `RANK_TOL * sigma_max`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

pub const RANK_TOL: f64 = 1e-10;

pub fn rank(m: &DMatrix<f64>) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOL * max).count()
}

/// Moore-Penrose inverse.
pub fn pinv(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return DMatrix::zeros(m.ncols(), m.nrows());
    }
    let svd = m.clone().svd(true, true);
    let max = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let mut out = DMatrix::zeros(m.ncols(), m.nrows());
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > RANK_TOL * max {
            out += (vt.row(k).transpose() / s) * u.column(k).transpose();
        }
    }
    out
}

/// Stacks matrices with equal column counts vertically.
pub fn vstack(parts: &[&DMatrix<f64>], ncols: usize) -> DMatrix<f64> {
    let rows: usize = parts.iter().map(|p| p.nrows()).sum();
    let mut out = DMatrix::zeros(rows, ncols);
    let mut r = 0;
    for p in parts {
        debug_assert_eq!(p.ncols(), ncols);
        out.rows_mut(r, p.nrows()).copy_from(p);
        r += p.nrows();
    }
    out
}

pub fn vstack_vec(parts: &[&DVector<f64>]) -> DVector<f64> {
    let n: usize = parts.iter().map(|p| p.len()).sum();
    let mut out = DVector::zeros(n);
    let mut r = 0;
    for p in parts {
        out.rows_mut(r, p.len()).copy_from(p);
        r += p.len();
    }
    out
}

/// Incremental Gram-Schmidt over rows. Returns the indices of the rows that
/// enlarge the span, scanning in order, together with an orthonormal basis.
fn greedy_row_basis(
    candidates: impl Iterator<Item = DVector<f64>>,
    mut basis: Vec<DVector<f64>>,
    scale: f64,
) -> (Vec<usize>, Vec<DVector<f64>>) {
    let mut picked = Vec::new();
    for (i, row) in candidates.enumerate() {
        let norm0 = row.norm();
        if norm0 <= RANK_TOL * scale.max(1e-300) {
            continue;
        }
        let mut v = row.clone();
        // two passes keep the basis orthonormal to working precision
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&v);
                v -= b * c;
            }
        }
        let norm = v.norm();
        if norm > 1e-8 * norm0 {
            basis.push(v / norm);
            picked.push(i);
        }
    }
    (picked, basis)
}

/// Indices of a maximal linearly independent subset of rows, scanning in order.
pub fn independent_rows(m: &DMatrix<f64>) -> Vec<usize> {
    let scale = m.amax();
    greedy_row_basis((0..m.nrows()).map(|i| m.row(i).transpose()), Vec::new(), scale).0
}

/// Orthonormal rows spanning the orthogonal complement of the row space of
/// `m`, obtained by completing the row space against the unit vectors in
/// index order.
pub fn complement_rows(m: &DMatrix<f64>, ncols: usize) -> DMatrix<f64> {
    let scale = if m.nrows() == 0 { 1.0 } else { m.amax() };
    let (_, basis) = greedy_row_basis((0..m.nrows()).map(|i| m.row(i).transpose()), Vec::new(), scale);
    let start = basis.len();
    let (_, full) = greedy_row_basis(
        (0..ncols).map(|i| {
            let mut e = DVector::zeros(ncols);
            e[i] = 1.0;
            e
        }),
        basis,
        1.0,
    );
    let extra = &full[start..];
    let mut out = DMatrix::zeros(extra.len(), ncols);
    for (r, v) in extra.iter().enumerate() {
        out.set_row(r, &v.transpose());
    }
    out
}

pub fn select_rows(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(idx.len(), m.ncols());
    for (r, &i) in idx.iter().enumerate() {
        out.set_row(r, &m.row(i));
    }
    out
}

pub fn select_cols(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), idx.len());
    for (c, &j) in idx.iter().enumerate() {
        out.set_column(c, &m.column(j));
    }
    out
}

pub fn submatrix(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |r, c| m[(rows[r], cols[c])])
}

pub fn subvector(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_iterator(idx.len(), idx.iter().map(|&i| v[i]))
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    let scale = m.amax().max(1.0);
    for i in 0..m.nrows() {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > tol * scale {
                return false;
            }
        }
    }
    true
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn cholesky(m: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    if m.nrows() != m.ncols() {
        return Err(Error::numerical("covariance matrix is not square"));
    }
    if !m.iter().all(|x| x.is_finite()) {
        return Err(Error::numerical("covariance matrix has non-finite entries"));
    }
    Cholesky::new(symmetrize(m)).ok_or_else(|| Error::numerical("covariance matrix is not positive definite"))
}

pub fn log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    let l = chol.l_dirty();
    (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>() * 2.0
}

/// Solves `L x = b` for lower-triangular `L` stored in the lower half.
pub fn forward_solve(l: &DMatrix<f64>, b: &[f64], out: &mut [f64]) {
    let n = b.len();
    for i in 0..n {
        let mut s = b[i];
        for j in 0..i {
            s -= l[(i, j)] * out[j];
        }
        out[i] = s / l[(i, i)];
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    DMatrix::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rank_of_dependent_rows() {
        let m = DMatrix::from_row_slice(
            3,
            4,
            &[
                1.0, 0.0, -1.0, 0.0, //
                0.0, 1.0, 0.0, -1.0, //
                1.0, 1.0, -1.0, -1.0,
            ],
        );
        assert_eq!(rank(&m), 2);
        assert_eq!(independent_rows(&m), vec![0, 1]);
    }

    #[test]
    fn complement_is_orthonormal_and_orthogonal() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, -1.0, 0.0, 0.0, 1.0, -1.0]);
        let d = complement_rows(&m, 3);
        assert_eq!(d.nrows(), 1);
        let prod = &m * d.transpose();
        assert!(prod.amax() < 1e-12);
        assert_relative_eq!(d.row(0).norm(), 1.0, epsilon = 1e-12);
        let s = 1.0 / 3f64.sqrt();
        assert_relative_eq!(d[(0, 0)].abs(), s, epsilon = 1e-12);
    }

    #[test]
    fn pinv_of_wide_matrix() {
        let m = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let p = pinv(&m);
        assert_relative_eq!(p[(0, 0)], 0.5, epsilon = 1e-14);
        assert_relative_eq!(p[(1, 0)], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn kron_shape_and_entries() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = DMatrix::identity(2, 2);
        let k = kron(&a, &b);
        assert_eq!(k.shape(), (4, 4));
        assert_eq!(k[(2, 0)], 3.0);
        assert_eq!(k[(3, 1)], 3.0);
        assert_eq!(k[(3, 0)], 0.0);
    }
}
