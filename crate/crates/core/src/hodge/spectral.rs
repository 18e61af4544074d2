use super::CochainComplex;
use crate::error::{Error, Result};
use crate::linalg::{col_space, complement_within, max_abs, null_space, spectral_radius, sym_eigen};
use nalgebra::DMatrix;
use serde::Serialize;

/// Zero modes are eigenvalues below this fraction of the spectral radius.
pub const ZERO_MODE_REL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub enum Bc {
    None,
    /// Natural boundary conditions: the full cochain space. Same operator as `None`.
    Neumann,
    /// Cochains vanishing on the boundary.
    Dirichlet,
    /// Cochains whose restriction lies in the span of the given boundary cochains (raw coordinates).
    Subspace(DMatrix<f64>),
}

#[derive(Debug, Clone, Serialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub kernel_dim: usize,
    pub det_prime: f64,
    pub log_det_prime: f64,
    pub threshold: f64,
    /// Some eigenvalue sits within a factor 10 of the zero-mode threshold.
    pub ambiguous: bool,
}

/// Orthonormal-coordinate basis of {α ∈ C^i : π α ∈ span(L)}; `l` in raw boundary coordinates.
pub(crate) fn constrained_basis(cx: &CochainComplex, i: usize, l: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let nb = cx.boundary_cells[i].len();
    if l.nrows() != nb {
        return Err(Error::Dimension(format!("subspace has {} rows, boundary has {nb} cells in degree {i}", l.nrows())));
    }
    let lt = DMatrix::from_fn(nb, l.ncols(), |r, c| l[(r, c)] * cx.weights[i][cx.boundary_cells[i][r]].sqrt());
    let lq = col_space(&lt);
    let perp = complement_within(&lq, &DMatrix::identity(nb, nb));
    Ok(null_space(&(perp.transpose() * cx.restriction(i))))
}

fn full_laplacian(cx: &CochainComplex, i: usize) -> DMatrix<f64> {
    let d = cx.dt(i);
    let din = cx.dt_into(i);
    d.transpose() * d + &din * din.transpose()
}

/// Δ_i = d*d + dd* in orthonormal coordinates of the boundary-condition subspace.
pub fn laplacian(cx: &CochainComplex, i: usize, bc: &Bc) -> Result<DMatrix<f64>> {
    if i > cx.top() {
        return Err(Error::Dimension(format!("degree {i} out of range")));
    }
    let lap = full_laplacian(cx, i);
    let basis = match bc {
        Bc::None | Bc::Neumann => return Ok(lap),
        Bc::Dirichlet => constrained_basis(cx, i, &DMatrix::zeros(cx.boundary_cells[i].len(), 0))?,
        Bc::Subspace(l) => constrained_basis(cx, i, l)?,
    };
    Ok(basis.transpose() * lap * &basis)
}

pub fn det_prime(m: &DMatrix<f64>) -> Spectrum {
    let (vals, _) = sym_eigen(m);
    let radius = spectral_radius(&vals);
    let threshold = ZERO_MODE_REL * radius;
    let mut kernel_dim = 0;
    let mut log = 0.0;
    let mut ambiguous = false;
    for v in &vals {
        let a = v.abs();
        if a <= threshold {
            kernel_dim += 1;
        } else {
            log += a.ln();
        }
        if a > threshold / 10.0 && a < threshold * 10.0 {
            ambiguous = true;
        }
    }
    Spectrum { eigenvalues: vals, kernel_dim, det_prime: log.exp(), log_det_prime: log, threshold, ambiguous }
}

/// Spectrum of the Laplacian; without boundary conditions the kernel is
/// cross-checked against the integer-rank Betti number.
pub fn laplacian_spectrum(cx: &CochainComplex, i: usize, bc: &Bc) -> Result<Spectrum> {
    let s = det_prime(&laplacian(cx, i, bc)?);
    if matches!(bc, Bc::None | Bc::Neumann) {
        let exact = cx.betti_numbers()[i];
        if exact != s.kernel_dim {
            return Err(Error::KernelMismatch { degree: i, numeric: s.kernel_dim, exact });
        }
    }
    Ok(s)
}

#[derive(Debug, Clone, Serialize)]
pub struct TorsionReport {
    pub det_prime: [f64; 4],
    pub kernel_dims: [usize; 4],
    /// det′Δ₁^{1/4} det′Δ₂^{−1/2} det′Δ₃^{3/4}
    pub sqrt_torsion: f64,
    /// det′Δ₁^{1/4} det′Δ₂^{1/2} det′Δ₃^{3/4}, exponents taken literally without alternation
    pub unsigned_product: f64,
    /// det′Δ₀^{3/4} / det′Δ₁^{1/4}
    pub zero_one_form: f64,
    /// |sqrt_torsion − zero_one_form| / sqrt_torsion
    pub forms_residual: f64,
    /// Relative |det′Δ_i − det′Δ_{3−i}| for i = 0, 1, when checked against stars.
    pub duality_residuals: Option<[f64; 2]>,
    /// H¹ ≠ 0: the closed formula needs determinant-line conventions not fixed here.
    pub nontrivial_h1: bool,
    pub ambiguous: bool,
}

pub fn torsion(cx: &CochainComplex, check_stars: bool) -> Result<TorsionReport> {
    if cx.top() != 3 {
        return Err(Error::Complex(format!("torsion needs a 3-complex, got top degree {}", cx.top())));
    }
    if cx.has_boundary() {
        return Err(Error::Complex("torsion needs a closed complex (empty boundary marking)".into()));
    }
    if check_stars && cx.stars.is_none() {
        return Err(Error::MissingStars);
    }
    let mut det = [0.0; 4];
    let mut kernel_dims = [0; 4];
    let mut ambiguous = false;
    for i in 0..4 {
        let s = laplacian_spectrum(cx, i, &Bc::None)?;
        det[i] = s.det_prime;
        kernel_dims[i] = s.kernel_dim;
        ambiguous |= s.ambiguous;
    }
    let sqrt_torsion = det[1].powf(0.25) * det[2].powf(-0.5) * det[3].powf(0.75);
    let unsigned_product = det[1].powf(0.25) * det[2].powf(0.5) * det[3].powf(0.75);
    let zero_one_form = det[0].powf(0.75) / det[1].powf(0.25);
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs());
    let duality_residuals = check_stars.then(|| [rel(det[0], det[3]), rel(det[1], det[2])]);
    Ok(TorsionReport {
        det_prime: det,
        kernel_dims,
        sqrt_torsion,
        unsigned_product,
        zero_one_form,
        forms_residual: rel(sqrt_torsion, zero_one_form),
        duality_residuals,
        nontrivial_h1: kernel_dims[1] > 0,
        ambiguous,
    })
}

/// |Z| = C · T^{1/2}; the regularization constant C is supplied by the caller.
pub fn cs_modulus(cx: &CochainComplex, c: f64) -> Result<f64> {
    Ok(c * torsion(cx, false)?.sqrt_torsion)
}

#[derive(Debug, Clone, Serialize)]
pub struct DhatReport {
    /// max |D̂² − diag(Δ₁, d*d)| relative to the largest entry of the target
    pub block_residual: f64,
    pub det_prime_dhat: f64,
    pub det_prime_laplacians: f64,
    /// | |det′D̂|² − det′Δ₁·det′(d*d) | relative
    pub det_residual: f64,
    pub symmetric: bool,
    /// Signature of D̂ when it is symmetric.
    pub signature: Option<i64>,
}

pub fn dhat_identity_check(cx: &CochainComplex) -> Result<DhatReport> {
    let stars = cx.stars.as_ref().ok_or(Error::MissingStars)?;
    if cx.top() != 3 || cx.has_boundary() {
        return Err(Error::StarIncompatible("needs a closed 3-complex".into()));
    }
    cx.check_stars(stars)?;
    let (n0, n1) = (cx.dims[0], cx.dims[1]);
    let s2 = cx.star_tilde(2, &stars[2]);
    let d0 = cx.dt(0);
    let d1 = cx.dt(1);
    let mut op = DMatrix::zeros(n1 + n0, n1 + n0);
    op.view_mut((0, 0), (n1, n1)).copy_from(&(&s2 * &d1));
    op.view_mut((0, n1), (n1, n0)).copy_from(&d0);
    op.view_mut((n1, 0), (n0, n1)).copy_from(&d0.transpose());
    let sq = &op * &op;
    let mut target = DMatrix::zeros(n1 + n0, n1 + n0);
    let lap1 = full_laplacian(cx, 1);
    let dd0 = d0.transpose() * &d0;
    target.view_mut((0, 0), (n1, n1)).copy_from(&lap1);
    target.view_mut((n1, n1), (n0, n0)).copy_from(&dd0);
    let scale = max_abs(&target).max(1.0);
    let block_residual = max_abs(&(&sq - &target)) / scale;
    if block_residual > 1e-10 {
        return Err(Error::StarIncompatible(format!("∗d-hat squared is not block diagonal (residual {block_residual:e})")));
    }
    let sv = op.singular_values();
    let smax = sv.iter().fold(0.0f64, |a, v| a.max(*v));
    let log_dhat: f64 = sv.iter().filter(|v| **v > ZERO_MODE_REL.sqrt() * smax).map(|v| v.ln()).sum();
    let log_lap = det_prime(&lap1).log_det_prime + det_prime(&dd0).log_det_prime;
    let det_residual = ((2.0 * log_dhat - log_lap).exp() - 1.0).abs();
    let symmetric = max_abs(&(&op - op.transpose())) <= 1e-12 * scale;
    let signature = symmetric.then(|| {
        let (vals, _) = sym_eigen(&op);
        let thr = ZERO_MODE_REL.sqrt() * spectral_radius(&vals);
        vals.iter().map(|v| if *v > thr { 1 } else if *v < -thr { -1 } else { 0 }).sum()
    });
    Ok(DhatReport {
        block_residual,
        det_prime_dhat: log_dhat.exp(),
        det_prime_laplacians: log_lap.exp(),
        det_residual,
        symmetric,
        signature,
    })
}
