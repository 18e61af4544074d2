//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Eigenvalues (ascending) and matching eigenvector columns of a symmetric matrix.
pub fn sym_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let sym = (m + m.transpose()) * 0.5;
    let e = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| e.eigenvalues[a].total_cmp(&e.eigenvalues[b]));
    let vals = order.iter().map(|&i| e.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(n, n, |r, c| e.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

pub fn spectral_radius(vals: &[f64]) -> f64 {
    vals.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn signature(vals: &[f64]) -> i64 {
    vals.iter().map(|v| if *v > 0.0 { 1 } else if *v < 0.0 { -1 } else { 0 }).sum()
}

/// Singular values (descending) and the complete right singular vectors.
/// Wide input is padded with zero rows to make V square; tall input must go
/// through a square factor first (see `null_space`).
fn svd_right(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let (m, n) = a.shape();
    let k = m.max(n);
    let mut sq = DMatrix::zeros(k, k);
    sq.view_mut((0, 0), (m, n)).copy_from(a);
    let svd = sq.svd(false, true);
    let vt = svd.v_t.unwrap();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]));
    let s = order.iter().map(|&i| svd.singular_values[i]).collect();
    let vo = DMatrix::from_fn(k, k, |r, c| vt[(order[c], r)]);
    (s, vo)
}

fn rank_from(s: &[f64], rel: f64) -> usize {
    let smax = s.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > rel * smax).count()
}

pub const RANK_TOL: f64 = 1e-10;

pub fn rank(a: &DMatrix<f64>) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let (s, _) = svd_right(a);
    rank_from(&s, RANK_TOL)
}

/// Orthonormal basis of {x : A x = 0}.
pub fn null_space(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.ncols();
    if a.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    if a.nrows() > n {
        // same null space as the square triangular factor
        return square_null_space(&a.clone().qr().r());
    }
    square_null_space(a)
}

fn square_null_space(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.ncols();
    let (s, v) = svd_right(a);
    let r = rank_from(&s, RANK_TOL);
    v.view((0, r), (n, n - r)).into_owned()
}

/// Orthonormal basis of the column space of A, taken from the right singular
/// vectors of Aᵀ. nalgebra's left singular vectors lose accuracy on strongly
/// rank-deficient input; the right ones do not.
pub fn col_space(a: &DMatrix<f64>) -> DMatrix<f64> {
    let m = a.nrows();
    if a.ncols() == 0 || m == 0 {
        return DMatrix::zeros(m, 0);
    }
    let (s, v) = svd_right(&a.transpose());
    let r = rank_from(&s, RANK_TOL);
    v.view((0, 0), (m, r)).into_owned()
}

/// Orthonormal basis of the orthogonal complement of span(Q) inside span(within),
/// both given by orthonormal columns.
pub fn complement_within(q: &DMatrix<f64>, within: &DMatrix<f64>) -> DMatrix<f64> {
    if q.ncols() == 0 {
        return within.clone();
    }
    // coordinates of span(q) in the `within` basis
    let coords = within.transpose() * q;
    let ns = null_space(&coords.transpose());
    within * ns
}

/// Orthonormal basis of span(U) ∩ span(V), both with orthonormal columns in Rⁿ.
pub fn intersect(u: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
    let n = u.nrows();
    if u.ncols() == 0 || v.ncols() == 0 {
        return DMatrix::zeros(n, 0);
    }
    let vperp = complement_within(v, &DMatrix::identity(n, n));
    if vperp.ncols() == 0 {
        return u.clone();
    }
    let ns = null_space(&(vperp.transpose() * u));
    col_space(&(u * ns))
}

pub fn project(q: &DMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    if q.ncols() == 0 {
        return DVector::zeros(x.len());
    }
    q * (q.transpose() * x)
}

/// Minimum-norm solution of A x = b for a full-row-rank A.
pub fn min_norm_solve(a: &DMatrix<f64>, b: &[f64]) -> Option<DVector<f64>> {
    let aat = a * a.transpose();
    let y = aat.lu().solve(&DVector::from_column_slice(b))?;
    Some(a.transpose() * y)
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.abs()))
}

/// Determinant and eigen data of a symmetric matrix: (|det|, signature, eigenvalues).
pub fn sym_det_sign(m: &DMatrix<f64>) -> (f64, i64, Vec<f64>) {
    let (vals, _) = sym_eigen(m);
    let det = vals.iter().map(|v| v.abs()).product::<f64>();
    (det, signature(&vals), vals)
}
