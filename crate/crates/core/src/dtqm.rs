//! Discrete-time free particle: S = Σ p_i (q_{i+1} − q_i) − p_i²/2 with
//! positions q_1..q_n and momenta p_1..p_{n−1}; the base is (q_1, q_n).

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{FieldModel, Window};
use crate::poly::Polynomial;
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;

/// Field order: q_1..q_n, then p_1..p_{n−1}.
pub fn q_index(_n: usize, i: usize) -> usize {
    i - 1
}

pub fn p_index(n: usize, i: usize) -> usize {
    n + i - 1
}

pub fn build_dtqm(n: usize) -> Result<FieldModel> {
    if n < 2 {
        return Err(Error::Invalid("dtqm needs n ≥ 2".into()));
    }
    let nf = 2 * n - 1;
    let mut terms = Vec::new();
    for i in 1..n {
        let mut e = vec![0u32; nf];
        e[p_index(n, i)] = 1;
        e[q_index(n, i + 1)] = 1;
        terms.push((e.clone(), 1.0));
        e[q_index(n, i + 1)] = 0;
        e[q_index(n, i)] = 1;
        terms.push((e, -1.0));
        let mut e2 = vec![0u32; nf];
        e2[p_index(n, i)] = 2;
        terms.push((e2, -0.5));
    }
    let action = Polynomial::new(nf, terms)?;
    let mut proj = DMatrix::zeros(2, nf);
    proj[(0, q_index(n, 1))] = 1.0;
    proj[(1, q_index(n, n))] = 1.0;
    let mut vars: Vec<String> = (1..=n).map(|i| format!("q{i}")).collect();
    vars.extend((1..n).map(|i| format!("p{i}")));
    FieldModel::new(vars, proj, action, Polynomial::constant(nf, 1.0), Polynomial::constant(2, 1.0), Vec::new())
}

/// `build_dtqm` with a ball window of the given radius centred on the classical
/// solution for the base point (q1, qn).
pub fn build_dtqm_windowed(n: usize, q1: f64, qn: f64, radius: f64) -> Result<FieldModel> {
    let mut m = build_dtqm(n)?;
    m.windows.push(Window::ball(classical_solution(n, q1, qn), radius));
    m.validate()?;
    Ok(m)
}

/// Solution of the Euler–Lagrange equations q_{i+1} − q_i = p_i, p_{i−1} = p_i.
pub fn classical_solution(n: usize, q1: f64, qn: f64) -> Vec<f64> {
    let p = (qn - q1) / (n - 1) as f64;
    let mut x = vec![0.0; 2 * n - 1];
    for i in 1..=n {
        x[q_index(n, i)] = q1 + (i - 1) as f64 * p;
    }
    for i in 1..n {
        x[p_index(n, i)] = p;
    }
    x
}

/// Max residual of the Euler–Lagrange equations at x.
pub fn euler_lagrange_residual(n: usize, x: &[f64]) -> f64 {
    let mut r: f64 = 0.0;
    for i in 1..n {
        r = r.max((x[q_index(n, i + 1)] - x[q_index(n, i)] - x[p_index(n, i)]).abs());
    }
    for i in 2..n {
        r = r.max((x[p_index(n, i - 1)] - x[p_index(n, i)]).abs());
    }
    r
}

/// Signature of the fiber Hessian (the action is quadratic, so it is constant).
pub fn fiber_signature(n: usize) -> Result<i64> {
    let m = build_dtqm(n)?;
    let frame = m.fiber_frame(&[0.0, 0.0])?;
    let hess = m.action.taylor_at(&vec![0.0; 2 * n - 1], 2)?.0[2].as_matrix();
    let b = frame.basis.transpose() * hess * &frame.basis;
    Ok(linalg::signature(&linalg::sym_eigen(&b).0))
}

/// Closed-form Gaussian value of the fiber integral.
pub fn exact_propagator(n: usize, h: f64, q1: f64, qn: f64) -> Result<Complex64> {
    if !(h > 0.0) {
        return Err(Error::Invalid("h must be positive".into()));
    }
    let sigma = fiber_signature(n)? as f64;
    let k = (n - 1) as f64;
    let modulus = (2.0 * PI * h).powf((2 * n - 3) as f64 / 2.0) / k.sqrt();
    let s = (qn - q1).powi(2) / (2.0 * k);
    Ok(Complex64::from_polar(modulus, s / h + PI / 4.0 * sigma))
}

/// Boundary data on coordinates (p_1, q_1, p_{n−1}, q_n).
#[derive(Debug, Clone, PartialEq)]
pub struct DtqmBoundary {
    pub n: usize,
    /// α_x(v) = xᵀ A v, i.e. α = p_{n−1} dq_n − p_1 dq_1.
    pub alpha: DMatrix<f64>,
    /// ω = dα, ω(u, v) = uᵀ Ω v.
    pub omega: DMatrix<f64>,
    /// Columns spanning L_M = {p_1 = p_{n−1}, q_n = q_1 + (n−1) p_1}.
    pub lagrangian: DMatrix<f64>,
}

impl DtqmBoundary {
    pub fn contains(&self, v: &[f64]) -> bool {
        let (p1, q1, pn, qn) = (v[0], v[1], v[2], v[3]);
        (p1 - pn).abs() < 1e-12 * (1.0 + p1.abs()) && (qn - q1 - (self.n - 1) as f64 * p1).abs() < 1e-12 * (1.0 + qn.abs())
    }

    /// Max |ω(u, v)| over the Lagrangian basis.
    pub fn restricted_omega(&self) -> f64 {
        linalg::max_abs(&(self.lagrangian.transpose() * &self.omega * &self.lagrangian))
    }
}

pub fn boundary_structure(n: usize) -> Result<DtqmBoundary> {
    if n < 2 {
        return Err(Error::Invalid("dtqm needs n ≥ 2".into()));
    }
    let mut alpha = DMatrix::zeros(4, 4);
    alpha[(0, 1)] = -1.0;
    alpha[(2, 3)] = 1.0;
    let omega = &alpha - alpha.transpose();
    let lagrangian = DMatrix::from_column_slice(4, 2, &[1.0, 0.0, 1.0, (n - 1) as f64, 0.0, 1.0, 0.0, 1.0]);
    let b = DtqmBoundary { n, alpha, omega, lagrangian };
    let asym = linalg::max_abs(&(&b.omega + b.omega.transpose()));
    let det = b.omega.determinant();
    if asym != 0.0 || (det - 1.0).abs() > 1e-12 || linalg::rank(&b.lagrangian) != 2 || b.restricted_omega() > 1e-12 {
        return Err(Error::Invalid("boundary structure invariants fail".into()));
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes() {
        assert_eq!(build_dtqm(2).unwrap().n_fields(), 3);
        assert_eq!(build_dtqm(3).unwrap().n_fields(), 5);
        assert_eq!(build_dtqm(2).unwrap().fiber_dim(), 1);
    }

    #[test]
    fn lagrangian_contains_momentum_line() {
        let b = boundary_structure(5).unwrap();
        for p in [-1.0, 0.5, 3.0] {
            assert!(b.contains(&[p, 0.0, p, 4.0 * p]));
        }
        assert_eq!(b.omega.determinant(), 1.0);
    }
}
