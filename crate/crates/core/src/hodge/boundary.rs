use super::CochainComplex;
use crate::error::{Error, Result};
use crate::linalg::{col_space, complement_within, max_abs, null_space, spectral_radius, sym_eigen};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

const SPLIT_TOL: f64 = 1e-10;

fn stack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols());
    m.view_mut((0, 0), a.shape()).copy_from(a);
    m.view_mut((a.nrows(), 0), b.shape()).copy_from(b);
    m
}

fn hcat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    m.view_mut((0, 0), a.shape()).copy_from(a);
    m.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    m
}

fn bdry_weight(cx: &CochainComplex, i: usize, r: usize) -> f64 {
    cx.weights[i][cx.boundary_cells[i][r]]
}

/// Raw boundary cochains (columns) to an orthonormal basis of their span in orthonormal coordinates.
fn bdry_tilde_basis(cx: &CochainComplex, i: usize, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let nb = cx.boundary_cells[i].len();
    if m.nrows() != nb {
        return Err(Error::Dimension(format!("expected {nb} rows for boundary cochains in degree {i}, got {}", m.nrows())));
    }
    Ok(col_space(&DMatrix::from_fn(nb, m.ncols(), |r, c| m[(r, c)] * bdry_weight(cx, i, r).sqrt())))
}

fn bdry_to_tilde(cx: &CochainComplex, i: usize, m: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)] * bdry_weight(cx, i, r).sqrt())
}

fn bdry_from_tilde(cx: &CochainComplex, i: usize, m: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)] / bdry_weight(cx, i, r).sqrt())
}

fn perp(q: &DMatrix<f64>) -> DMatrix<f64> {
    let n = q.nrows();
    complement_within(q, &DMatrix::identity(n, n))
}

/// Boundary subspaces L and L1, one basis per degree in raw boundary coordinates.
#[derive(Debug, Clone)]
pub struct BoundaryConditionPair {
    pub l: Vec<DMatrix<f64>>,
    pub l1: Vec<DMatrix<f64>>,
}

impl BoundaryConditionPair {
    /// L = L1 = 0 in every degree.
    pub fn zero(cx: &CochainComplex) -> Self {
        let z: Vec<_> = cx.boundary_cells.iter().map(|c| DMatrix::zeros(c.len(), 0)).collect();
        BoundaryConditionPair { l: z.clone(), l1: z }
    }

    /// L = L1 = all boundary cochains.
    pub fn full(cx: &CochainComplex) -> Self {
        let f: Vec<_> = cx.boundary_cells.iter().map(|c| DMatrix::identity(c.len(), c.len())).collect();
        BoundaryConditionPair { l: f.clone(), l1: f }
    }

    fn check(&self, cx: &CochainComplex) -> Result<()> {
        let n = cx.dims.len();
        if self.l.len() != n || self.l1.len() != n {
            return Err(Error::Dimension(format!("boundary condition pair needs {n} degrees")));
        }
        Ok(())
    }

    /// max over degrees of |proj_L d_∂(L1⊥)|: zero exactly when d_∂(L1⊥) ⊆ L⊥.
    pub fn compatibility_residual(&self, cx: &CochainComplex) -> Result<f64> {
        self.check(cx)?;
        if !cx.has_boundary() {
            return Ok(0.0);
        }
        let bc = cx.boundary_complex()?;
        let mut worst = 0.0f64;
        for i in 1..=bc.top() {
            let l = bdry_tilde_basis(cx, i, &self.l[i])?;
            let l1p = perp(&bdry_tilde_basis(cx, i - 1, &self.l1[i - 1])?);
            if l.ncols() == 0 || l1p.ncols() == 0 {
                continue;
            }
            worst = worst.max(max_abs(&(l.transpose() * bc.dt(i - 1) * l1p)));
        }
        Ok(worst)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HodgeSplit {
    pub exact: Vec<f64>,
    pub harmonic: Vec<f64>,
    pub coexact: Vec<f64>,
    pub harmonic_dim: usize,
    pub orthogonality_residual: f64,
    pub reassembly_residual: f64,
    pub harmonic_residual: f64,
    pub compatibility_residual: f64,
}

/// Constraint rows L_yᵀ S_i for "π α ⊥ L" in orthonormal coordinates.
fn orth_to(cx: &CochainComplex, i: usize, l_raw: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let l = bdry_tilde_basis(cx, i, l_raw)?;
    Ok(l.transpose() * cx.restriction(i))
}

/// Splits a raw i-cochain into dΩ_D(M, L1⊥) ⊕ harmonic ⊕ d*Ω_N(M, L).
pub fn hodge_split(cx: &CochainComplex, i: usize, form: &[f64], bcp: &BoundaryConditionPair) -> Result<HodgeSplit> {
    if i > cx.top() || form.len() != cx.dims[i] {
        return Err(Error::Dimension(format!("expected a {i}-cochain of length {}", cx.dims.get(i).copied().unwrap_or(0))))
    }
    let compat = bcp.compatibility_residual(cx)?;
    if compat > SPLIT_TOL {
        return Err(Error::Compatibility(compat));
    }
    let n = cx.dims[i];
    let exact = if i == 0 {
        DMatrix::zeros(n, 0)
    } else {
        // θ with π θ ∈ L1⊥, i.e. orthogonal to L1
        let theta = null_space(&orth_to(cx, i - 1, &bcp.l1[i - 1])?);
        col_space(&(cx.dt(i - 1) * theta))
    };
    let closed = null_space(&stack(&cx.dt(i), &orth_to(cx, i, &bcp.l[i])?));
    let leak = if exact.ncols() > 0 { max_abs(&(&exact - &closed * (closed.transpose() * &exact))) } else { 0.0 };
    if leak > SPLIT_TOL {
        return Err(Error::Compatibility(leak));
    }
    let harmonic = complement_within(&exact, &closed);
    let coexact = perp(&closed);
    let y = cx.to_tilde(i, &DVector::from_column_slice(form));
    let proj = |q: &DMatrix<f64>| crate::linalg::project(q, &y);
    let (pe, ph, pc) = (proj(&exact), proj(&harmonic), proj(&coexact));
    let norm = y.norm().max(f64::MIN_POSITIVE);
    let orthogonality_residual = [pe.dot(&ph), pe.dot(&pc), ph.dot(&pc)].iter().fold(0.0f64, |m, v| m.max(v.abs())) / (norm * norm);
    let reassembly_residual = (&pe + &ph + &pc - &y).amax();
    let lrows = orth_to(cx, i, &bcp.l[i])?;
    let mut harmonic_residual = (cx.dt(i) * &ph).amax().max((lrows * &ph).amax());
    if exact.ncols() > 0 {
        harmonic_residual = harmonic_residual.max((exact.transpose() * &ph).amax());
    }
    let raw = |v: &DVector<f64>| cx.from_tilde(i, v).iter().copied().collect();
    Ok(HodgeSplit {
        exact: raw(&pe),
        harmonic: raw(&ph),
        coexact: raw(&pc),
        harmonic_dim: harmonic.ncols(),
        orthogonality_residual,
        reassembly_residual,
        harmonic_residual,
        compatibility_residual: compat,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SliceReport {
    pub dim: usize,
    /// Dimension of the closed part Ω¹_D(M, I)_cl that Λ_I complements.
    pub closed_dim: usize,
    /// Raw 1-cochains spanning Λ_I, as columns.
    #[serde(skip)]
    pub basis: DMatrix<f64>,
    /// B(λ_a, λ_b) on the basis.
    #[serde(skip)]
    pub form: DMatrix<f64>,
    pub isotropy_residual: f64,
    pub symmetry_residual: f64,
    pub min_abs_eigenvalue: f64,
    pub spectral_radius: f64,
}

#[derive(Debug, Clone)]
pub struct SliceBasis {
    /// Raw 1-cochains spanning Λ_I, as columns.
    pub basis: DMatrix<f64>,
    pub closed_dim: usize,
    pub isotropy_residual: f64,
}

/// Λ_I: the orthogonal complement of the closed part inside Ω¹_D(M, I).
/// Checks that I is isotropic for the boundary pairing.
pub fn gauge_slice_basis(cx: &CochainComplex, i_raw: &DMatrix<f64>) -> Result<SliceBasis> {
    if cx.top() != 3 {
        return Err(Error::Complex("gauge slice needs a 3-complex".into()));
    }
    let nb1 = cx.boundary_cells[1].len();
    let iy = if nb1 == 0 { DMatrix::zeros(0, 0) } else { bdry_tilde_basis(cx, 1, i_raw)? };
    let isotropy_residual = if iy.ncols() > 0 {
        let j = cx
            .boundary_pairing_restricted()
            .ok_or_else(|| Error::Complex("boundary pairing required for a nonzero I".into()))?;
        let ir = bdry_from_tilde(cx, 1, &iy);
        let r = max_abs(&(ir.transpose() * &j * &ir));
        let scale = max_abs(&j).max(1.0);
        if r > 1e-12 * scale {
            return Err(Error::NotIsotropic(r));
        }
        r
    } else {
        0.0
    };
    let iperp = complement_within(&iy, &DMatrix::identity(nb1, nb1));
    let cons = iperp.transpose() * cx.restriction(1);
    let v = null_space(&cons);
    let closed = null_space(&stack(&cons, &cx.dt(1)));
    let lam = complement_within(&closed, &v);
    let n1 = cx.dims[1];
    let basis = DMatrix::from_fn(n1, lam.ncols(), |r, c| lam[(r, c)] / cx.weights[1][r].sqrt());
    Ok(SliceBasis { basis, closed_dim: closed.ncols(), isotropy_residual })
}

/// Λ_I with a certificate that B(α, β) = ∫ Wβ ∧ dWα is symmetric and
/// nondegenerate on it. A degenerate form is an error, never a warning.
pub fn gauge_slice_subspace(cx: &CochainComplex, i_raw: &DMatrix<f64>) -> Result<SliceReport> {
    let q = cx.wedge.as_ref().ok_or_else(|| Error::Complex("wedge pairing required".into()))?;
    let SliceBasis { basis, closed_dim, isotropy_residual } = gauge_slice_basis(cx, i_raw)?;
    let m = q * cx.d(1);
    let form = (basis.transpose() * m * &basis).transpose();
    let scale = max_abs(&form).max(f64::MIN_POSITIVE);
    let symmetry_residual = if form.is_empty() { 0.0 } else { max_abs(&(&form - form.transpose())) / scale };
    let (vals, _) = sym_eigen(&form);
    let radius = spectral_radius(&vals);
    let min_abs = vals.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if symmetry_residual > 1e-12 {
        return Err(Error::DegenerateForm(format!("B is not symmetric on Λ_I (residual {symmetry_residual:e})")));
    }
    if !vals.is_empty() && min_abs <= 1e-10 * radius {
        let k = vals.iter().filter(|v| v.abs() <= 1e-10 * radius).count();
        return Err(Error::DegenerateForm(format!(
            "{k} of {} eigenvalues below 1e-10 × spectral radius {radius:e}",
            vals.len()
        )));
    }
    Ok(SliceReport {
        dim: basis.ncols(),
        closed_dim,
        basis,
        form,
        isotropy_residual,
        symmetry_residual,
        min_abs_eigenvalue: if vals.is_empty() { 0.0 } else { min_abs },
        spectral_radius: radius,
    })
}

/// A splitting of the boundary harmonic 1-cochains into H₊ ⊕ H₋ (raw coordinates, columns).
#[derive(Debug, Clone)]
pub struct Splitting {
    pub plus: DMatrix<f64>,
    pub minus: DMatrix<f64>,
}

/// W-orthonormal basis of harmonic 1-cochains on the boundary (raw coordinates).
pub fn boundary_harmonic(cx: &CochainComplex) -> Result<DMatrix<f64>> {
    if !cx.has_boundary() {
        return Err(Error::NoBoundary);
    }
    Ok(bdry_from_tilde(cx, 1, &boundary_harmonic_tilde(cx)?))
}

fn boundary_harmonic_tilde(cx: &CochainComplex) -> Result<DMatrix<f64>> {
    let bc = cx.boundary_complex()?;
    if bc.top() < 1 {
        return Ok(DMatrix::zeros(cx.boundary_cells[1].len(), 0));
    }
    Ok(null_space(&stack(&bc.dt(1), &bc.dt(0).transpose())))
}

#[derive(Debug, Clone, Serialize)]
pub struct DnReport {
    #[serde(skip)]
    pub b_m: DMatrix<f64>,
    /// Coordinates of a basis of the reduced L_M in H₊ and H₋.
    #[serde(skip)]
    pub c_plus: DMatrix<f64>,
    #[serde(skip)]
    pub c_minus: DMatrix<f64>,
    pub harmonic_dim: usize,
    pub lm_dim: usize,
    /// max |B_M C₊ − C₋|
    pub residual: f64,
    /// Smallest singular value of C₊ relative to the largest.
    pub transversality: f64,
}

struct Coords {
    full: DMatrix<f64>,
    p: usize,
}

impl Coords {
    fn new(cx: &CochainComplex, split: &Splitting, h: &DMatrix<f64>) -> Result<Coords> {
        let nb1 = cx.boundary_cells[1].len();
        if split.plus.nrows() != nb1 || split.minus.nrows() != nb1 {
            return Err(Error::Dimension(format!("splitting vectors must have {nb1} entries")));
        }
        let full = hcat(&bdry_to_tilde(cx, 1, &split.plus), &bdry_to_tilde(cx, 1, &split.minus));
        let off = &full - h * (h.transpose() * &full);
        let scale = max_abs(&full).max(1.0);
        if max_abs(&off) > 1e-8 * scale {
            return Err(Error::Invalid("splitting vectors are not harmonic on the boundary".into()));
        }
        if full.ncols() != h.ncols() || crate::linalg::rank(&full) != h.ncols() {
            return Err(Error::Invalid(format!(
                "H₊ ⊕ H₋ must be a basis of the {}-dimensional boundary harmonic space",
                h.ncols()
            )));
        }
        Ok(Coords { full, p: split.plus.ncols() })
    }

    /// Coefficients (c₊, c₋) of columns lying in the harmonic space.
    fn solve(&self, y: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let c = self.full.clone().svd(true, true).solve(y, 1e-14).expect("svd solve");
        let q = c.nrows() - self.p;
        (c.rows(0, self.p).into_owned(), c.rows(self.p, q).into_owned())
    }
}

/// B_M with B_M [β]₊ = [β]₋ on the reduced Lagrangian L_M of boundary values of closed 1-cochains.
pub fn dn_operator(cx: &CochainComplex, split: &Splitting) -> Result<DnReport> {
    if !cx.has_boundary() {
        return Err(Error::NoBoundary);
    }
    let h = boundary_harmonic_tilde(cx)?;
    let coords = Coords::new(cx, split, &h)?;
    let z = null_space(&cx.dt(1));
    let restricted = cx.restriction(1) * z;
    let lm = col_space(&(&h * (h.transpose() * restricted)));
    let (c_plus, c_minus) = coords.solve(&lm);
    if c_plus.nrows() != c_plus.ncols() {
        return Err(Error::Transversality(format!("dim H₊ = {} but dim L_M = {}", c_plus.nrows(), c_plus.ncols())));
    }
    // σ_min(C₊) against the size of the whole coordinate block
    let transversality = if c_plus.is_empty() {
        1.0
    } else {
        let scale = stack(&c_plus, &c_minus).singular_values().max();
        c_plus.singular_values().min() / scale
    };
    if transversality <= 1e-10 {
        return Err(Error::Transversality(format!("A₊ is singular (relative singular value {transversality:e})")));
    }
    let inv = c_plus.clone().try_inverse().ok_or_else(|| Error::Transversality("A₊ is singular".into()))?;
    let b_m = &c_minus * inv;
    let residual = if c_minus.is_empty() { 0.0 } else { max_abs(&(&b_m * &c_plus - &c_minus)) };
    Ok(DnReport { b_m, c_plus, c_minus, harmonic_dim: h.ncols(), lm_dim: lm.ncols(), residual, transversality })
}

#[derive(Debug, Clone, Serialize)]
pub struct HjPhase {
    /// ⟨[a]₊, [a]₋⟩ on the boundary
    pub phase: f64,
    pub a_plus: Vec<f64>,
    pub a_minus: Vec<f64>,
    /// ⟨[a]₊, B_M h₊ʲ⟩ per basis vector of H₊
    pub linear_dn: Vec<f64>,
    /// ⟨h₊ʲ, [a]₋⟩ per basis vector of H₊
    pub linear_background: Vec<f64>,
    /// ⟨h₊ʲ, B_M h₊ᵏ⟩
    #[serde(skip)]
    pub quadratic: DMatrix<f64>,
    pub dn: DnReport,
}

/// Phase ⟨[a]₊, [a]₋⟩ of a boundary class and the coefficients of its
/// variation along [β] = [β]₊ + B_M[β]₊.
pub fn hj_phase(cx: &CochainComplex, split: &Splitting, a: &[f64]) -> Result<HjPhase> {
    let dn = dn_operator(cx, split)?;
    let j = cx.boundary_pairing_restricted().ok_or_else(|| Error::Complex("boundary pairing required".into()))?;
    let nb1 = cx.boundary_cells[1].len();
    if a.len() != nb1 {
        return Err(Error::Dimension(format!("background must have {nb1} entries")));
    }
    let bc = cx.boundary_complex()?;
    let ay = bdry_to_tilde(cx, 1, &DMatrix::from_column_slice(nb1, 1, a));
    if bc.top() >= 2 {
        let curv = (bc.dt(1) * &ay).amax();
        if curv > 1e-10 * ay.amax().max(1.0) {
            return Err(Error::Invalid(format!("background is not closed on the boundary (|da| = {curv:e})")));
        }
    }
    let h = boundary_harmonic_tilde(cx)?;
    let coords = Coords::new(cx, split, &h)?;
    let ah = &h * (h.transpose() * ay);
    let (cp, cm) = coords.solve(&ah);
    let a_plus = &split.plus * &cp;
    let a_minus = &split.minus * &cm;
    let pair = |u: &DMatrix<f64>, v: &DMatrix<f64>| (u.transpose() * &j * v)[(0, 0)];
    let phase = pair(&a_plus, &a_minus);
    let bh = &split.minus * &dn.b_m;
    let p = split.plus.ncols();
    let col = |m: &DMatrix<f64>, k: usize| m.columns(k, 1).into_owned();
    let linear_dn = (0..p).map(|k| pair(&a_plus, &col(&bh, k))).collect();
    let linear_background = (0..p).map(|k| pair(&col(&split.plus, k), &a_minus)).collect();
    let quadratic = DMatrix::from_fn(p, p, |r, c| pair(&col(&split.plus, r), &col(&bh, c)));
    Ok(HjPhase {
        phase,
        a_plus: cp.iter().copied().collect(),
        a_minus: cm.iter().copied().collect(),
        linear_dn,
        linear_background,
        quadratic,
        dn,
    })
}
