//! Cochain complexes with diagonal inner products: Laplacians and their
//! zeta-free determinants, torsion, Hodge decomposition with boundary
//! conditions, the gauge-slice subspace and the Dirichlet-to-Neumann analog.
//!
//! Internally everything is done in orthonormal coordinates y = W^{1/2} x,
//! where the adjoint d* becomes a plain transpose and boundary restriction is
//! still a coordinate selection. Public inputs and outputs use raw cochain
//! coordinates x.

mod boundary;
pub mod builders;
mod exact;
mod spectral;

pub use boundary::{
    boundary_harmonic, dn_operator, gauge_slice_basis, gauge_slice_subspace, hj_phase, hodge_split, BoundaryConditionPair, DnReport,
    HjPhase, HodgeSplit, SliceBasis, SliceReport, Splitting,
};
pub use exact::integer_rank;
pub use spectral::{
    cs_modulus, det_prime, dhat_identity_check, laplacian, laplacian_spectrum, torsion, Bc, DhatReport, Spectrum,
    TorsionReport,
};

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone)]
pub struct CochainComplex {
    pub dims: Vec<usize>,
    /// `boundary_ops[i]` is ∂_{i+1}: C_{i+1} → C_i, a dims[i] × dims[i+1] matrix.
    pub boundary_ops: Vec<DMatrix<i64>>,
    pub weights: Vec<Vec<f64>>,
    /// Sorted cell ids of the boundary subcomplex, per degree.
    pub boundary_cells: Vec<Vec<usize>>,
    /// `stars[i]`: C^i → C^{D−i}.
    pub stars: Option<Vec<DMatrix<f64>>>,
    /// Q[e, f] = ∫ W(e) ∧ W(f) for 1-cells e and 2-cells f.
    pub wedge: Option<DMatrix<f64>>,
    /// J[e, e'] = ∫_∂ W(e) ∧ W(e') on 1-cells; zero off the boundary.
    pub boundary_pairing: Option<DMatrix<f64>>,
}

const ADJOINT_TOL: f64 = 1e-12;

impl CochainComplex {
    pub fn new(dims: Vec<usize>, boundary_ops: Vec<DMatrix<i64>>, weights: Option<Vec<Vec<f64>>>) -> Result<Self> {
        let weights = weights.unwrap_or_else(|| dims.iter().map(|&n| vec![1.0; n]).collect());
        let nb = dims.len();
        let cx = CochainComplex {
            dims,
            boundary_ops,
            weights,
            boundary_cells: vec![Vec::new(); nb],
            stars: None,
            wedge: None,
            boundary_pairing: None,
        };
        cx.validate()?;
        Ok(cx)
    }

    pub fn top(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn has_boundary(&self) -> bool {
        self.boundary_cells.iter().any(|c| !c.is_empty())
    }

    pub fn validate(&self) -> Result<()> {
        let c = |m: String| Err(Error::Complex(m));
        if self.dims.is_empty() {
            return c("no degrees".into());
        }
        let dtop = self.top();
        if self.boundary_ops.len() != dtop {
            return c(format!("expected {dtop} boundary operators, got {}", self.boundary_ops.len()));
        }
        for (i, b) in self.boundary_ops.iter().enumerate() {
            if b.shape() != (self.dims[i], self.dims[i + 1]) {
                return c(format!("boundary operator {} has shape {:?}", i + 1, b.shape()));
            }
        }
        for i in 1..dtop {
            let prod = &self.boundary_ops[i - 1] * &self.boundary_ops[i];
            if prod.iter().any(|&v| v != 0) {
                return c(format!("∂∂ ≠ 0 between degrees {} and {}", i + 1, i - 1));
            }
        }
        if self.weights.len() != self.dims.len() {
            return c("one weight vector per degree required".into());
        }
        for (i, w) in self.weights.iter().enumerate() {
            if w.len() != self.dims[i] {
                return c(format!("weights in degree {i} have length {}", w.len()));
            }
            if let Some(v) = w.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
                return c(format!("nonpositive weight {v} in degree {i}"));
            }
        }
        if self.boundary_cells.len() != self.dims.len() {
            return c("boundary_cells must list every degree".into());
        }
        for (i, cells) in self.boundary_cells.iter().enumerate() {
            if cells.windows(2).any(|w| w[0] >= w[1]) || cells.last().is_some_and(|&m| m >= self.dims[i]) {
                return c(format!("boundary cells in degree {i} must be sorted, distinct and in range"));
            }
        }
        for i in 1..=dtop {
            let b = &self.boundary_ops[i - 1];
            for &cell in &self.boundary_cells[i] {
                for r in 0..b.nrows() {
                    if b[(r, cell)] != 0 && self.boundary_cells[i - 1].binary_search(&r).is_err() {
                        return c(format!("boundary marking is not a subcomplex: face {r} of {i}-cell {cell}"));
                    }
                }
            }
        }
        self.check_adjointness()?;
        if let Some(stars) = &self.stars {
            self.check_stars(stars)?;
        }
        if let Some(q) = &self.wedge {
            if dtop != 3 || q.shape() != (self.dims[1], self.dims[2]) {
                return c("wedge pairing needs a 3-complex and shape dims[1] × dims[2]".into());
            }
        }
        if let Some(j) = &self.boundary_pairing {
            if dtop < 1 || j.shape() != (self.dims[1], self.dims[1]) {
                return c("boundary pairing must be dims[1] × dims[1]".into());
            }
            let anti = crate::linalg::max_abs(&(j + j.transpose()));
            if anti > 1e-12 * crate::linalg::max_abs(j).max(1.0) {
                return c(format!("boundary pairing is not antisymmetric ({anti:e})"));
            }
            let bnd = &self.boundary_cells[1];
            for (r, cl, v) in triplets(j) {
                if v != 0.0 && (bnd.binary_search(&r).is_err() || bnd.binary_search(&cl).is_err()) {
                    return c("boundary pairing touches interior edges".into());
                }
            }
        }
        Ok(())
    }

    fn check_adjointness(&self) -> Result<()> {
        let mut rng = SplitMix(0x5eed);
        for i in 0..self.top() {
            let d = self.d(i);
            let a = DVector::from_fn(self.dims[i], |_, _| rng.unit());
            let b = DVector::from_fn(self.dims[i + 1], |_, _| rng.unit());
            let da = &d * &a;
            let lhs: f64 = (0..da.len()).map(|k| da[k] * b[k] * self.weights[i + 1][k]).sum();
            let dsb = self.d_star(i) * &b;
            let rhs: f64 = (0..dsb.len()).map(|k| a[k] * dsb[k] * self.weights[i][k]).sum();
            let scale = lhs.abs().max(rhs.abs()).max(1.0);
            if (lhs - rhs).abs() > ADJOINT_TOL * scale {
                return Err(Error::Complex(format!("adjointness fails in degree {i}: {lhs} vs {rhs}")));
            }
        }
        Ok(())
    }

    fn check_stars(&self, stars: &[DMatrix<f64>]) -> Result<()> {
        let dtop = self.top();
        if stars.len() != dtop + 1 {
            return Err(Error::StarIncompatible(format!("expected {} star operators", dtop + 1)));
        }
        for (i, s) in stars.iter().enumerate() {
            if s.shape() != (self.dims[dtop - i], self.dims[i]) {
                return Err(Error::StarIncompatible(format!("star in degree {i} has shape {:?}", s.shape())));
            }
            let st = self.star_tilde(i, s);
            let n = st.ncols();
            let orth = crate::linalg::max_abs(&(st.transpose() * &st - DMatrix::identity(n, n)));
            if orth > 1e-10 {
                return Err(Error::StarIncompatible(format!("star in degree {i} is not orthogonal ({orth:e})")));
            }
        }
        for (i, s) in stars.iter().enumerate() {
            let ss = &stars[dtop - i] * s;
            let n = ss.nrows();
            let plus = crate::linalg::max_abs(&(&ss - DMatrix::identity(n, n)));
            let minus = crate::linalg::max_abs(&(&ss + DMatrix::identity(n, n)));
            if n > 0 && plus.min(minus) > 1e-10 {
                return Err(Error::StarIncompatible(format!("∗∗ ≠ ±1 in degree {i}")));
            }
        }
        Ok(())
    }

    /// Coboundary d_i: C^i → C^{i+1}. Zero-sized at the ends of the complex.
    pub fn d(&self, i: usize) -> DMatrix<f64> {
        if i >= self.top() {
            return DMatrix::zeros(0, self.dims.get(i).copied().unwrap_or(0));
        }
        self.boundary_ops[i].transpose().map(|v| v as f64)
    }

    /// Formal adjoint d_i*: C^{i+1} → C^i.
    pub fn d_star(&self, i: usize) -> DMatrix<f64> {
        let d = self.d(i);
        let (r, c) = d.shape();
        DMatrix::from_fn(c, r, |a, b| d[(b, a)] * self.weights[i + 1][b] / self.weights[i][a])
    }

    /// d_i in orthonormal coordinates.
    pub(crate) fn dt(&self, i: usize) -> DMatrix<f64> {
        let d = self.d(i);
        let (r, c) = d.shape();
        DMatrix::from_fn(r, c, |a, b| d[(a, b)] * (self.weights[i + 1][a] / self.weights[i][b]).sqrt())
    }

    /// d_{i−1} in orthonormal coordinates (maps into degree i); empty for i = 0.
    pub(crate) fn dt_into(&self, i: usize) -> DMatrix<f64> {
        if i == 0 {
            DMatrix::zeros(self.dims[0], 0)
        } else {
            self.dt(i - 1)
        }
    }

    pub(crate) fn star_tilde(&self, i: usize, s: &DMatrix<f64>) -> DMatrix<f64> {
        let j = self.top() - i;
        DMatrix::from_fn(s.nrows(), s.ncols(), |a, b| s[(a, b)] * (self.weights[j][a] / self.weights[i][b]).sqrt())
    }

    /// Restriction to the boundary in orthonormal coordinates (a selection matrix).
    pub(crate) fn restriction(&self, i: usize) -> DMatrix<f64> {
        let cells = &self.boundary_cells[i];
        let mut s = DMatrix::zeros(cells.len(), self.dims[i]);
        for (r, &c) in cells.iter().enumerate() {
            s[(r, c)] = 1.0;
        }
        s
    }

    pub(crate) fn to_tilde(&self, i: usize, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(x.len(), |k, _| x[k] * self.weights[i][k].sqrt())
    }

    pub(crate) fn from_tilde(&self, i: usize, y: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(y.len(), |k, _| y[k] / self.weights[i][k].sqrt())
    }

    /// Boundary subcomplex, with cells renumbered in the order of `boundary_cells`.
    pub fn boundary_complex(&self) -> Result<CochainComplex> {
        let dtop = self.top();
        let mut top = dtop;
        while top > 0 && self.boundary_cells[top].is_empty() {
            top -= 1;
        }
        let dims: Vec<usize> = (0..=top).map(|i| self.boundary_cells[i].len()).collect();
        let ops = (1..=top)
            .map(|i| {
                let (rows, cols) = (&self.boundary_cells[i - 1], &self.boundary_cells[i]);
                DMatrix::from_fn(rows.len(), cols.len(), |a, b| self.boundary_ops[i - 1][(rows[a], cols[b])])
            })
            .collect();
        let weights = (0..=top)
            .map(|i| self.boundary_cells[i].iter().map(|&c| self.weights[i][c]).collect())
            .collect();
        CochainComplex::new(dims, ops, Some(weights))
    }

    /// Boundary pairing restricted to boundary 1-cochains (raw coordinates).
    pub fn boundary_pairing_restricted(&self) -> Option<DMatrix<f64>> {
        let j = self.boundary_pairing.as_ref()?;
        let cells = &self.boundary_cells[1];
        Some(DMatrix::from_fn(cells.len(), cells.len(), |a, b| j[(cells[a], cells[b])]))
    }

    /// Betti numbers from exact integer ranks of the boundary operators.
    pub fn betti_numbers(&self) -> Vec<usize> {
        let ranks: Vec<usize> = self.boundary_ops.iter().map(integer_rank).collect();
        (0..self.dims.len())
            .map(|i| {
                let r_out = if i < self.top() { ranks[i] } else { 0 };
                let r_in = if i > 0 { ranks[i - 1] } else { 0 };
                self.dims[i] - r_out - r_in
            })
            .collect()
    }

    /// Same complex with new weights. Stars that are no longer orthogonal for
    /// the new inner products are dropped.
    pub fn with_weights(&self, weights: Vec<Vec<f64>>) -> Result<CochainComplex> {
        let mut cx = self.clone();
        cx.weights = weights;
        if let Err(Error::StarIncompatible(_)) = cx.validate() {
            cx.stars = None;
        }
        cx.validate()?;
        Ok(cx)
    }
}

pub(crate) fn triplets(m: &DMatrix<f64>) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            if m[(r, c)] != 0.0 {
                out.push((r, c, m[(r, c)]));
            }
        }
    }
    out.sort_by_key(|t| (t.0, t.1));
    out
}

/// Deterministic generator for validation probes.
pub(crate) struct SplitMix(pub u64);

impl SplitMix {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in [−1, 1).
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 52) as f64 - 1.0
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubspaceSpec {
    pub degree: usize,
    /// Basis vectors in boundary-cell coordinates of that degree.
    pub columns: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ComplexFile {
    dims: Vec<usize>,
    boundary_ops: Vec<Vec<(usize, usize, i64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    boundary_cells: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stars: Option<Vec<Vec<(usize, usize, f64)>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    wedge: Option<Vec<(usize, usize, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    boundary_pairing: Option<Vec<(usize, usize, f64)>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    subspaces: BTreeMap<String, Vec<SubspaceSpec>>,
}

/// A loaded complex together with its named boundary subspaces
/// (`L`, `L1`, `I`, `H_plus`, `H_minus`), keyed by degree.
#[derive(Debug, Clone)]
pub struct ComplexDocument {
    pub complex: CochainComplex,
    pub subspaces: BTreeMap<String, BTreeMap<usize, DMatrix<f64>>>,
}

impl ComplexDocument {
    pub fn subspace(&self, name: &str, degree: usize) -> Option<&DMatrix<f64>> {
        self.subspaces.get(name)?.get(&degree)
    }

    pub fn to_json(&self) -> String {
        let cx = &self.complex;
        let dense = |m: &DMatrix<f64>| triplets(m);
        let file = ComplexFile {
            dims: cx.dims.clone(),
            boundary_ops: cx
                .boundary_ops
                .iter()
                .map(|b| {
                    let mut t = Vec::new();
                    for r in 0..b.nrows() {
                        for c in 0..b.ncols() {
                            if b[(r, c)] != 0 {
                                t.push((r, c, b[(r, c)]));
                            }
                        }
                    }
                    t
                })
                .collect(),
            weights: if cx.weights.iter().flatten().all(|&w| w == 1.0) { None } else { Some(cx.weights.clone()) },
            boundary_cells: cx.boundary_cells.clone(),
            stars: cx.stars.as_ref().map(|s| s.iter().map(dense).collect()),
            wedge: cx.wedge.as_ref().map(dense),
            boundary_pairing: cx.boundary_pairing.as_ref().map(dense),
            subspaces: self
                .subspaces
                .iter()
                .map(|(k, v)| {
                    let specs = v
                        .iter()
                        .map(|(&degree, m)| SubspaceSpec {
                            degree,
                            columns: m.column_iter().map(|c| c.iter().copied().collect()).collect(),
                        })
                        .collect();
                    (k.clone(), specs)
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("complex serializes")
    }
}

fn schema(key: &str, msg: impl Into<String>) -> Error {
    Error::Schema { key: key.into(), msg: msg.into() }
}

fn sparse_f64(key: &str, t: &[(usize, usize, f64)], rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    let mut m = DMatrix::zeros(rows, cols);
    for &(r, c, v) in t {
        if r >= rows || c >= cols {
            return Err(schema(key, format!("entry ({r}, {c}) outside {rows} × {cols}")));
        }
        m[(r, c)] += v;
    }
    Ok(m)
}

pub fn build_complex(text: &str) -> Result<ComplexDocument> {
    let f: ComplexFile = serde_json::from_str(text).map_err(|e| schema("<document>", e.to_string()))?;
    if f.dims.is_empty() {
        return Err(schema("dims", "at least one degree required"));
    }
    let dtop = f.dims.len() - 1;
    if f.boundary_ops.len() != dtop {
        return Err(schema("boundary_ops", format!("expected {dtop} operators")));
    }
    let mut ops = Vec::new();
    for (i, t) in f.boundary_ops.iter().enumerate() {
        let (rows, cols) = (f.dims[i], f.dims[i + 1]);
        let mut m = DMatrix::<i64>::zeros(rows, cols);
        for &(r, c, v) in t {
            if r >= rows || c >= cols {
                return Err(schema("boundary_ops", format!("entry ({r}, {c}) outside {rows} × {cols} in degree {}", i + 1)));
            }
            m[(r, c)] += v;
        }
        ops.push(m);
    }
    let mut boundary_cells = f.boundary_cells.clone();
    if boundary_cells.is_empty() {
        boundary_cells = vec![Vec::new(); f.dims.len()];
    }
    if boundary_cells.len() != f.dims.len() {
        return Err(schema("boundary_cells", "one list per degree"));
    }
    for c in &mut boundary_cells {
        c.sort_unstable();
    }
    let stars = match &f.stars {
        None => None,
        Some(s) => {
            if s.len() != f.dims.len() {
                return Err(schema("stars", "one operator per degree"));
            }
            Some(
                s.iter()
                    .enumerate()
                    .map(|(i, t)| sparse_f64("stars", t, f.dims[dtop - i], f.dims[i]))
                    .collect::<Result<Vec<_>>>()?,
            )
        }
    };
    let wedge = match &f.wedge {
        None => None,
        Some(t) if dtop >= 2 => Some(sparse_f64("wedge", t, f.dims[1], f.dims[2])?),
        Some(_) => return Err(schema("wedge", "needs degrees 1 and 2")),
    };
    let boundary_pairing = match &f.boundary_pairing {
        None => None,
        Some(t) if dtop >= 1 => Some(sparse_f64("boundary_pairing", t, f.dims[1], f.dims[1])?),
        Some(_) => return Err(schema("boundary_pairing", "needs degree 1")),
    };
    let weights = f.weights.clone().unwrap_or_else(|| f.dims.iter().map(|&n| vec![1.0; n]).collect());
    let complex = CochainComplex { dims: f.dims.clone(), boundary_ops: ops, weights, boundary_cells, stars, wedge, boundary_pairing };
    complex.validate()?;
    let mut subspaces = BTreeMap::new();
    for (name, specs) in &f.subspaces {
        let mut by_degree = BTreeMap::new();
        for s in specs {
            let key = format!("subspaces.{name}");
            if s.degree > dtop {
                return Err(schema(&key, format!("degree {} out of range", s.degree)));
            }
            let n = complex.boundary_cells[s.degree].len();
            if s.columns.iter().any(|c| c.len() != n) {
                return Err(schema(&key, format!("columns must have length {n} (boundary cells in degree {})", s.degree)));
            }
            let m = DMatrix::from_fn(n, s.columns.len(), |r, c| s.columns[c][r]);
            by_degree.insert(s.degree, m);
        }
        subspaces.insert(name.clone(), by_degree);
    }
    Ok(ComplexDocument { complex, subspaces })
}
