//! Fiber products of models over shared base coordinates, and the gluing
//! identities relating the factors' integrals and expansions to the glued ones.

use crate::critical::{find_critical_points, CriticalPoint};
use crate::error::{Error, Result};
use crate::graphs::WeightData;
use crate::linalg;
use crate::model::{FieldModel, Window};
use crate::oracle::{self, Integrand, OracleOptions, OracleResult};
use crate::par::Exec;
use crate::poly::Polynomial;
use crate::semiclassical::{self, AsymptoticSeries};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::PI;
use std::sync::Mutex;

/// Identification of base coordinates: `(i, j)` glues coordinate i of the
/// first factor's base to coordinate j of the second's.
#[derive(Debug, Clone, PartialEq)]
pub struct Shared {
    pub pairs: Vec<(usize, usize)>,
}

impl Shared {
    pub fn new(pairs: Vec<(usize, usize)>) -> Self {
        Shared { pairs }
    }

    /// Identify the whole base coordinate by coordinate.
    pub fn all(n: usize) -> Self {
        Shared { pairs: (0..n).map(|i| (i, i)).collect() }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// The glued model together with the maps back to the factors.
///
/// Glued fields are `z = (x, u, ξ₂)`: all fields x of the first factor, the
/// unshared base coordinates u of the second, and orthonormal fiber
/// coordinates ξ₂ of the second. The second factor's fields are `x' = T z`.
#[derive(Debug, Clone)]
pub struct FiberProduct {
    pub model: FieldModel,
    pub shared: Shared,
    pub residual1: Vec<usize>,
    pub residual2: Vec<usize>,
    pub n1: usize,
    pub second_map: DMatrix<f64>,
    pub second_kernel: DMatrix<f64>,
    pub second_projection: DMatrix<f64>,
    /// Volume factor dξ₁ db_shared = J dx on the glued fiber.
    pub jacobian: f64,
    pub base_density: f64,
}

impl FiberProduct {
    pub fn first_fields(&self, z: &[f64]) -> Vec<f64> {
        z[..self.n1].to_vec()
    }

    pub fn second_fields(&self, z: &[f64]) -> Vec<f64> {
        (&self.second_map * DVector::from_column_slice(z)).iter().copied().collect()
    }

    /// Glued point from a pair of factor points with matching shared coordinates.
    pub fn join(&self, x1: &[f64], x2: &[f64]) -> Vec<f64> {
        let b2 = &self.second_projection * DVector::from_column_slice(x2);
        let xi2 = self.second_kernel.transpose() * DVector::from_column_slice(x2);
        let mut z = x1.to_vec();
        z.extend(self.residual2.iter().map(|&j| b2[j]));
        z.extend(xi2.iter());
        z
    }

    /// Glued base point: unshared coordinates of b1, then of b2.
    pub fn glued_base(&self, b1: &[f64], b2: &[f64]) -> Vec<f64> {
        let mut b: Vec<f64> = self.residual1.iter().map(|&i| b1[i]).collect();
        b.extend(self.residual2.iter().map(|&j| b2[j]));
        b
    }

    /// Factor base points over a glued base point and shared values β.
    pub fn factor_bases(&self, b: &[f64], beta: &[f64], n1b: usize, n2b: usize) -> (Vec<f64>, Vec<f64>) {
        let mut b1 = vec![0.0; n1b];
        let mut b2 = vec![0.0; n2b];
        for (k, &i) in self.residual1.iter().enumerate() {
            b1[i] = b[k];
        }
        for (k, &j) in self.residual2.iter().enumerate() {
            b2[j] = b[self.residual1.len() + k];
        }
        for (k, &(i, j)) in self.shared.pairs.iter().enumerate() {
            b1[i] = beta[k];
            b2[j] = beta[k];
        }
        (b1, b2)
    }
}

fn constant_value(p: &Polynomial) -> Option<f64> {
    if p.degree() == 0 {
        Some(p.eval(&vec![0.0; p.arity()]))
    } else {
        None
    }
}

fn pinv_rows(p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if p.nrows() == 0 {
        return Ok(DMatrix::zeros(p.ncols(), 0));
    }
    let g = (p * p.transpose()).try_inverse().ok_or(Error::RankDeficient { rank: linalg::rank(p), expected: p.nrows() })?;
    Ok(p.transpose() * g)
}

fn select_rows(p: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), p.ncols(), |r, c| p[(rows[r], c)])
}

fn select_cols(p: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(p.nrows(), cols.len(), |r, c| p[(r, cols[c])])
}

fn hcat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    m.view_mut((0, 0), (a.nrows(), a.ncols())).copy_from(a);
    m.view_mut((0, a.ncols()), (b.nrows(), b.ncols())).copy_from(b);
    m
}

fn dominant_name(names: &[String], v: &[f64]) -> String {
    let k = (0..v.len()).max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()).then(b.cmp(&a))).unwrap_or(0);
    names.get(k).cloned().unwrap_or_else(|| format!("v{k}"))
}

/// Fiber product F₁ ×_B F₂ over the shared base coordinates.
///
/// Base densities must be constant and equal; the shared coordinates are
/// integrated against that constant and the glued model keeps it on its
/// residual base.
pub fn fiber_product(m1: &FieldModel, m2: &FieldModel, shared: &Shared) -> Result<FiberProduct> {
    let (n1b, n2b) = (m1.n_base(), m2.n_base());
    let mut seen1 = vec![false; n1b];
    let mut seen2 = vec![false; n2b];
    for &(i, j) in &shared.pairs {
        if i >= n1b || j >= n2b {
            return Err(Error::BaseMismatch(format!("pair ({i}, {j}) out of range for bases of size {n1b} and {n2b}")));
        }
        if seen1[i] || seen2[j] {
            return Err(Error::BaseMismatch(format!("coordinate repeated in pair ({i}, {j})")));
        }
        seen1[i] = true;
        seen2[j] = true;
    }
    let c1 = constant_value(&m1.base_density).ok_or_else(|| Error::BaseMismatch("first base density is not constant".into()))?;
    let c2 = constant_value(&m2.base_density).ok_or_else(|| Error::BaseMismatch("second base density is not constant".into()))?;
    if (c1 - c2).abs() > 1e-12 * c1.abs().max(c2.abs()) {
        return Err(Error::BaseMismatch(format!("base densities differ: {c1} vs {c2}")));
    }
    let residual1: Vec<usize> = (0..n1b).filter(|&i| !seen1[i]).collect();
    let residual2: Vec<usize> = (0..n2b).filter(|&j| !seen2[j]).collect();
    let (nf1, nf2) = (m1.n_fields(), m2.n_fields());
    let d2 = m2.fiber_dim();
    let nz = nf1 + residual2.len() + d2;
    let p1 = &m1.projection;
    let p2 = &m2.projection;

    // b2 as a linear function of z
    let mut e = DMatrix::zeros(n2b, nz);
    for &(i, j) in &shared.pairs {
        for c in 0..nf1 {
            e[(j, c)] = p1[(i, c)];
        }
    }
    for (k, &j) in residual2.iter().enumerate() {
        e[(j, nf1 + k)] = 1.0;
    }
    let k2 = m2.fiber_frame(&vec![0.0; n2b])?.basis;
    let mut t = pinv_rows(p2)? * e;
    for c in 0..d2 {
        for r in 0..nf2 {
            t[(r, nf1 + residual2.len() + c)] += k2[(r, c)];
        }
    }

    let mut projection = DMatrix::zeros(residual1.len() + residual2.len(), nz);
    for (r, &i) in residual1.iter().enumerate() {
        for c in 0..nf1 {
            projection[(r, c)] = p1[(i, c)];
        }
    }
    for k in 0..residual2.len() {
        projection[(residual1.len() + k, nf1 + k)] = 1.0;
    }

    let first: Vec<usize> = (0..nf1).collect();
    let action = m1.action.embed(nz, &first).add(&m2.action.compose_affine(&vec![0.0; nf2], &t)?);

    let p1u = select_rows(p1, &residual1);
    let p1s = select_rows(p1, &shared.pairs.iter().map(|p| p.0).collect::<Vec<_>>());
    let jacobian = if shared.is_empty() {
        1.0
    } else {
        let pi_v = DMatrix::identity(nf1, nf1) - pinv_rows(&p1u)? * &p1u;
        (&p1s * pi_v * p1s.transpose()).determinant().abs().sqrt()
    };
    let density = m1
        .density
        .embed(nz, &first)
        .mul(&m2.density.compose_affine(&vec![0.0; nf2], &t)?)
        .scale(c1 * jacobian);

    let mut windows = Vec::new();
    for w in &m1.windows {
        let a = w.axes_matrix(nf1);
        let mut big = DMatrix::zeros(a.nrows(), nz);
        big.view_mut((0, 0), (a.nrows(), nf1)).copy_from(&a);
        windows.push(Window { center: w.center.clone(), radius: w.radius, axes: Some(big) });
    }
    for w in &m2.windows {
        let a = w.axes_matrix(nf2);
        windows.push(Window { center: w.center.clone(), radius: w.radius, axes: Some(a * &t) });
    }

    let mut variables = m1.variables.clone();
    for &j in &residual2 {
        let row: Vec<f64> = p2.row(j).iter().copied().collect();
        variables.push(format!("{}'", dominant_name(&m2.variables, &row)));
    }
    for c in 0..d2 {
        let col: Vec<f64> = k2.column(c).iter().copied().collect();
        variables.push(format!("{}'", dominant_name(&m2.variables, &col)));
    }
    let n_base = projection.nrows();
    let model = FieldModel::new(variables, projection, action, density, Polynomial::constant(n_base, c1), windows)?;
    Ok(FiberProduct {
        model,
        shared: shared.clone(),
        residual1,
        residual2,
        n1: nf1,
        second_map: t,
        second_kernel: k2,
        second_projection: p2.clone(),
        jacobian,
        base_density: c1,
    })
}

/// Glued stationary-phase data at a pair of factor critical points.
#[derive(Debug, Clone)]
pub struct GluedExpansion {
    pub series: AsymptoticSeries,
    /// Hessian of b ↦ S₁(c₁(b)) + S₂(c₂(b)) in the shared coordinates.
    pub base_hessian: DMatrix<f64>,
    pub base_det_abs: f64,
    pub base_signature: i64,
    pub base_gradient: Vec<f64>,
    pub factor_det_abs: [f64; 2],
    pub factor_signature: [i64; 2],
    /// First-order response dξᵢ/dβ of each factor's critical point.
    pub tracking: [DMatrix<f64>; 2],
}

fn split_hessian(h: &DMatrix<f64>, fiber: std::ops::Range<usize>, base: std::ops::Range<usize>) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let b = h.view((fiber.start, fiber.start), (fiber.len(), fiber.len())).into_owned();
    let c = h.view((fiber.start, base.start), (fiber.len(), base.len())).into_owned();
    let a = h.view((base.start, base.start), (base.len(), base.len())).into_owned();
    (b, c, a)
}

fn checked_inverse(b: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64, i64)> {
    let (det, sig, vals) = linalg::sym_det_sign(b);
    let radius = linalg::spectral_radius(&vals);
    let min = vals.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if b.nrows() > 0 && min < 1e-8 * radius {
        return Err(Error::DegenerateHessian { min_abs: min, radius });
    }
    let inv = if b.nrows() == 0 { b.clone() } else { b.clone().try_inverse().ok_or(Error::DegenerateHessian { min_abs: min, radius })? };
    Ok((inv, det, sig))
}

/// Formal Gaussian integration over the shared base fluctuation.
///
/// Works in coordinates y = (ξ₁, β, ξ₂). The propagator is assembled from the
/// factor propagators and base edges, blockdiag(B₁⁻¹, 0, B₂⁻¹) + U W⁻¹ Uᵀ,
/// with W the base Hessian and U = (dξ₁/dβ, 1, dξ₂/dβ).
pub fn glue_expansions(
    fp: &FiberProduct,
    m1: &FieldModel,
    m2: &FieldModel,
    c1: &CriticalPoint,
    c2: &CriticalPoint,
    order: usize,
    exec: Exec,
) -> Result<GluedExpansion> {
    semiclassical::check_order(order, crate::graphs::PLAIN_CAP)?;
    let s = fp.shared.len();
    for &(i, j) in &fp.shared.pairs {
        let (a, b) = (c1.base[i], c2.base[j]);
        if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
            return Err(Error::BaseMismatch(format!("shared coordinate differs: {a} vs {b}")));
        }
    }
    let k1 = m1.fiber_frame(&c1.base)?.basis;
    let k2 = m2.fiber_frame(&c2.base)?.basis;
    let (d1, d2) = (k1.ncols(), k2.ncols());
    let q1 = select_cols(&pinv_rows(&m1.projection)?, &fp.shared.pairs.iter().map(|p| p.0).collect::<Vec<_>>());
    let q2 = select_cols(&pinv_rows(&m2.projection)?, &fp.shared.pairs.iter().map(|p| p.1).collect::<Vec<_>>());
    let mm1 = hcat(&k1, &q1);
    let mm2 = hcat(&q2, &k2);
    let s1 = m1.action.compose_affine(&c1.location, &mm1)?;
    let v1 = m1.density.compose_affine(&c1.location, &mm1)?;
    let s2 = m2.action.compose_affine(&c2.location, &mm2)?;
    let v2 = m2.density.compose_affine(&c2.location, &mm2)?;

    let h1 = s1.taylor_at(&vec![0.0; d1 + s], 2)?;
    let h2 = s2.taylor_at(&vec![0.0; s + d2], 2)?;
    let (b1, cc1, a1) = split_hessian(&h1.0[2].as_matrix(), 0..d1, d1..d1 + s);
    let (b2, cc2, a2) = split_hessian(&h2.0[2].as_matrix(), s..s + d2, 0..s);
    let (b1i, det1, sig1) = checked_inverse(&b1)?;
    let (b2i, det2, sig2) = checked_inverse(&b2)?;
    let r1 = -(&b1i * &cc1);
    let r2 = -(&b2i * &cc2);
    let w = &a1 + cc1.transpose() * &r1 + &a2 + cc2.transpose() * &r2;
    let w = (&w + w.transpose()) * 0.5;

    let g1: Vec<f64> = h1.0[1].data[d1..].to_vec();
    let g2: Vec<f64> = h2.0[1].data[..s].to_vec();
    let base_gradient: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| a + b).collect();
    let gnorm = base_gradient.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let gscale = 1.0 + w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if gnorm > 1e-8 * gscale {
        return Err(Error::Tracking(format!("shared base point is not critical for the glued action (gradient {gnorm:e})")));
    }

    let (wdet, wsig, wvals) = linalg::sym_det_sign(&w);
    let wrad = linalg::spectral_radius(&wvals);
    let wmin = wvals.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if s > 0 && wmin < 1e-8 * wrad.max(1e-300) {
        return Err(Error::DegenerateBase(wmin));
    }
    let wi = if s == 0 { w.clone() } else { w.clone().try_inverse().ok_or(Error::DegenerateBase(wmin))? };

    let dy = d1 + s + d2;
    let mut u = DMatrix::zeros(dy, s);
    u.view_mut((0, 0), (d1, s)).copy_from(&r1);
    u.view_mut((d1, 0), (s, s)).fill_with_identity();
    u.view_mut((d1 + s, 0), (d2, s)).copy_from(&r2);
    let mut prop = &u * &wi * u.transpose();
    {
        let mut blk = prop.view_mut((0, 0), (d1, d1));
        blk += &b1i;
    }
    {
        let mut blk = prop.view_mut((d1 + s, d1 + s), (d2, d2));
        blk += &b2i;
    }

    let map1: Vec<usize> = (0..d1 + s).collect();
    let map2: Vec<usize> = (d1..dy).collect();
    let action = s1.embed(dy, &map1).add(&s2.embed(dy, &map2));
    let density = v1.embed(dy, &map1).mul(&v2.embed(dy, &map2)).scale(fp.base_density);
    let zero = vec![0.0; dy];
    let data = WeightData {
        action: action.taylor_at(&zero, 2 * order + 2)?,
        special: density.taylor_at(&zero, 2 * order)?,
        ghost: vec![],
        boson_prop: prop,
        fermion_prop: None,
    };
    let (coefficients, contributions) = semiclassical::graph_sum(semiclassical::plain_graphs(order)?, &data, order, exec)?;
    let det = det1 * det2 * if s == 0 { 1.0 } else { wdet };
    let sig = sig1 + sig2 + if s == 0 { 0 } else { wsig };
    let series = AsymptoticSeries {
        location: fp.join(&c1.location, &c2.location),
        base: fp.glued_base(&c1.base, &c2.base),
        action_value: c1.action_value + c2.action_value,
        h_power: dy as f64 / 2.0,
        two_pi_power: dy as f64 / 2.0,
        phase: PI / 4.0 * sig as f64,
        det_factor: det.powf(-0.5),
        group_volume: 1.0,
        coefficients,
        contributions,
    };
    Ok(GluedExpansion {
        series,
        base_hessian: w,
        base_det_abs: if s == 0 { 1.0 } else { wdet },
        base_signature: if s == 0 { 0 } else { wsig },
        base_gradient,
        factor_det_abs: [det1, det2],
        factor_signature: [sig1, sig2],
        tracking: [r1, r2],
    })
}

/// Follow a critical point to a nearby base point: first-order prediction,
/// then Newton polish.
pub fn track_critical(model: &FieldModel, c: &CriticalPoint, b_new: &[f64]) -> Result<CriticalPoint> {
    if b_new.len() != model.n_base() {
        return Err(Error::Arity { expected: model.n_base(), got: b_new.len() });
    }
    let k = model.fiber_frame(&c.base)?.basis;
    let db = DVector::from_iterator(b_new.len(), b_new.iter().zip(&c.base).map(|(a, b)| a - b));
    let lift = pinv_rows(&model.projection)? * &db;
    let full = model.action.taylor_at(&c.location, 2)?.0[2].as_matrix();
    let (bi, _, _) = checked_inverse(&c.fiber_hessian)?;
    let dxi = -(&bi * (k.transpose() * &full * &lift));
    let pred = DVector::from_column_slice(&c.location) + &lift + &k * &dxi;
    let seed: Vec<f64> = pred.iter().copied().collect();
    let found = find_critical_points(model, b_new, std::slice::from_ref(&seed))?;
    let cp = found.into_iter().next().ok_or_else(|| Error::Tracking("no critical point near the prediction".into()))?;
    let jump: f64 = cp.location.iter().zip(&seed).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let step = db.norm();
    if jump > 10.0 * step * step.max(1e-3) + 1e-9 {
        return Err(Error::Tracking(format!("polished point moved {jump:e} from the prediction for a base step {step:e}")));
    }
    Ok(cp)
}

/// ρ Z₁(b₁(β)) Z₂(b₂(β)) as a function of the shared coordinates.
struct SharedIntegrand<'a> {
    fp: &'a FiberProduct,
    m1: &'a FieldModel,
    m2: &'a FieldModel,
    base: Vec<f64>,
    h: f64,
    inner: OracleOptions,
    worst: Mutex<(f64, Option<Error>)>,
}

impl Integrand for SharedIntegrand<'_> {
    fn dim(&self) -> usize {
        self.fp.shared.len()
    }

    fn eval(&self, beta: &[f64]) -> Complex64 {
        let (b1, b2) = self.fp.factor_bases(&self.base, beta, self.m1.n_base(), self.m2.n_base());
        let z1 = oracle::integrate_fiber(self.m1, &b1, self.h, &self.inner);
        let z2 = oracle::integrate_fiber(self.m2, &b2, self.h, &self.inner);
        match (z1, z2) {
            (Ok(z1), Ok(z2)) => {
                let err = z1.value.norm() * z2.error_bound + z2.value.norm() * z1.error_bound + z1.error_bound * z2.error_bound;
                let mut w = self.worst.lock().unwrap();
                w.0 = w.0.max(err * self.fp.base_density.abs());
                z1.value * z2.value * self.fp.base_density
            }
            (Err(e), _) | (_, Err(e)) => {
                let mut w = self.worst.lock().unwrap();
                if w.1.is_none() {
                    w.1 = Some(e);
                }
                Complex64::new(0.0, 0.0)
            }
        }
    }
}

/// Range of the shared coordinates over the glued model's windowed fiber.
fn shared_box(fp: &FiberProduct, b: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let frame = fp.model.fiber_frame(b)?;
    let (center, half) = fp.model.fiber_box(&frame)?;
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    for &(_, j) in &fp.shared.pairs {
        // the shared value is b₂[j] = (P₂ T z)[j]
        let row = fp.second_projection.row(j) * &fp.second_map;
        let mut mid = (&row * &frame.origin)[0];
        let mut rad = 0.0;
        for k in 0..frame.dim() {
            let coef = (&row * frame.basis.column(k))[0];
            mid += coef * center[k];
            rad += coef.abs() * half[k];
        }
        lo.push(mid - rad);
        hi.push(mid + rad);
    }
    Ok((lo, hi))
}

/// ∫ db ρ Z₁(b) Z₂(b) over the shared coordinates, by nested quadrature.
pub fn integrate_over_shared(
    fp: &FiberProduct,
    m1: &FieldModel,
    m2: &FieldModel,
    base: &[f64],
    h: f64,
    opts: &OracleOptions,
) -> Result<OracleResult> {
    let s = fp.shared.len();
    if s == 0 {
        let (b1, b2) = fp.factor_bases(base, &[], m1.n_base(), m2.n_base());
        let z1 = oracle::integrate_fiber(m1, &b1, h, opts)?;
        let z2 = oracle::integrate_fiber(m2, &b2, h, opts)?;
        let err = z1.value.norm() * z2.error_bound + z2.value.norm() * z1.error_bound;
        return Ok(OracleResult { value: z1.value * z2.value * fp.base_density, error_bound: err, nodes: z1.nodes + z2.nodes, boxes: 1 });
    }
    let (lo, hi) = shared_box(fp, base)?;
    let vol: f64 = lo.iter().zip(&hi).map(|(a, b)| b - a).product();
    let inner = OracleOptions { tol: opts.tol / (10.0 * vol.max(1.0)), budget: opts.budget, exec: Exec::Sequential };
    let f = SharedIntegrand { fp, m1, m2, base: base.to_vec(), h, inner, worst: Mutex::new((0.0, None)) };
    let center: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let half: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (b - a)).collect();
    let outer = OracleOptions { tol: 0.5 * opts.tol, budget: opts.budget, exec: opts.exec };
    let r = oracle::integrate_box(&f, &center, &half, &outer)?;
    let (worst, err) = f.worst.into_inner().unwrap();
    if let Some(e) = err {
        return Err(e);
    }
    Ok(OracleResult { value: r.value, error_bound: r.error_bound + vol * worst, nodes: r.nodes, boxes: r.boxes })
}

/// One itemized check in a gluing report.
#[derive(Debug, Clone, PartialEq)]
pub struct GluingCheck {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl GluingCheck {
    fn new(name: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        GluingCheck { name: name.into(), residual, tolerance, pass: residual <= tolerance }
    }
}

#[derive(Debug, Clone)]
pub struct GluingReport {
    pub checks: Vec<GluingCheck>,
    pub glued: GluedExpansion,
    pub direct: AsymptoticSeries,
}

impl GluingReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Inputs for `verify_gluing`.
#[derive(Debug, Clone)]
pub struct GluingSetup<'a> {
    pub m1: &'a FieldModel,
    pub m2: &'a FieldModel,
    pub shared: Shared,
    pub b1: Vec<f64>,
    pub b2: Vec<f64>,
    pub seeds1: Vec<Vec<f64>>,
    pub seeds2: Vec<Vec<f64>>,
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1e-300)
}

/// Exact Fubini identity at each h, determinant and signature identity, and
/// order-by-order agreement of glued and direct expansions.
pub fn verify_gluing(setup: &GluingSetup, order: usize, h_grid: &[f64], opts: &OracleOptions) -> Result<GluingReport> {
    let (m1, m2) = (setup.m1, setup.m2);
    let fp = fiber_product(m1, m2, &setup.shared)?;
    let first = |v: Vec<CriticalPoint>| v.into_iter().next().ok_or_else(|| Error::Tracking("no critical point from the seeds".into()));
    let c1 = first(find_critical_points(m1, &setup.b1, &setup.seeds1)?)?;
    let c2 = first(find_critical_points(m2, &setup.b2, &setup.seeds2)?)?;
    let glued = glue_expansions(&fp, m1, m2, &c1, &c2, order, opts.exec)?;
    let base = fp.glued_base(&c1.base, &c2.base);
    let seed = fp.join(&c1.location, &c2.location);
    let cz = first(find_critical_points(&fp.model, &base, &[seed])?)?;
    let direct = semiclassical::expand_plain_with(&fp.model, &cz, order, opts.exec)?;

    let mut checks = Vec::new();
    let sum = c1.action_value + c2.action_value;
    checks.push(GluingCheck::new("action additivity", (cz.action_value - sum).abs() / (1.0 + sum.abs()), 1e-12));
    let lhs = glued.factor_det_abs[0] * glued.factor_det_abs[1] * glued.base_det_abs;
    let rhs = cz.det_abs * fp.jacobian * fp.jacobian;
    checks.push(GluingCheck::new("determinant identity", (lhs - rhs).abs() / lhs.max(rhs), 1e-10));
    let sig = glued.factor_signature[0] + glued.factor_signature[1] + glued.base_signature;
    checks.push(GluingCheck::new("signature additivity", (sig - cz.signature).abs() as f64, 0.0));
    for k in 0..=order {
        let a = glued.series.coefficients[k] * glued.series.det_factor;
        let b = direct.coefficients[k] * direct.det_factor;
        let tol = if k == 0 { 1e-10 } else { 1e-8 };
        checks.push(GluingCheck::new(format!("diagram identity order {k}"), rel(a, b), tol));
    }

    if !fp.shared.is_empty() && fp.shared.len() <= 2 {
        let fd = base_hessian_fd(&fp, m1, m2, &c1, &c2, 1e-3)?;
        let diff = (&fd - &glued.base_hessian).abs().max();
        checks.push(GluingCheck::new("base Hessian by tracking", diff / (1.0 + glued.base_hessian.abs().max()), 1e-5));
    }

    for &h in h_grid {
        let iterated = integrate_over_shared(&fp, m1, m2, &base, h, opts)?;
        let whole = oracle::integrate_fiber(&fp.model, &base, h, opts)?;
        let gap = (iterated.value - whole.value).norm();
        let bound = iterated.error_bound + whole.error_bound;
        checks.push(GluingCheck::new(format!("Fubini h={h}"), gap, bound.max(1e-14)));
    }
    Ok(GluingReport { checks, glued, direct })
}

/// Second differences of S₁(c₁(b)) + S₂(c₂(b)) along the shared coordinates,
/// with the critical points tracked to each displaced base point.
pub fn base_hessian_fd(fp: &FiberProduct, m1: &FieldModel, m2: &FieldModel, c1: &CriticalPoint, c2: &CriticalPoint, step: f64) -> Result<DMatrix<f64>> {
    let s = fp.shared.len();
    let beta0: Vec<f64> = fp.shared.pairs.iter().map(|p| c1.base[p.0]).collect();
    let base = fp.glued_base(&c1.base, &c2.base);
    let value = |beta: &[f64]| -> Result<f64> {
        let (b1, b2) = fp.factor_bases(&base, beta, m1.n_base(), m2.n_base());
        Ok(track_critical(m1, c1, &b1)?.action_value + track_critical(m2, c2, &b2)?.action_value)
    };
    let at = |di: Option<(usize, f64)>, dj: Option<(usize, f64)>| -> Result<f64> {
        let mut b = beta0.clone();
        if let Some((i, d)) = di {
            b[i] += d;
        }
        if let Some((j, d)) = dj {
            b[j] += d;
        }
        value(&b)
    };
    let f0 = at(None, None)?;
    let mut w = DMatrix::zeros(s, s);
    for i in 0..s {
        let fp_ = at(Some((i, step)), None)?;
        let fm = at(Some((i, -step)), None)?;
        w[(i, i)] = (fp_ - 2.0 * f0 + fm) / (step * step);
        for j in 0..i {
            let pp = at(Some((i, step)), Some((j, step)))?;
            let pm = at(Some((i, step)), Some((j, -step)))?;
            let mp = at(Some((i, -step)), Some((j, step)))?;
            let mm = at(Some((i, -step)), Some((j, -step)))?;
            let v = (pp - pm - mp + mm) / (4.0 * step * step);
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
    }
    Ok(w)
}

/// Volume factor of the bulk gauge group of a glued model.
pub fn glued_group_volume(bulk1: f64, bulk2: f64, boundary: f64) -> f64 {
    bulk1 * bulk2 * boundary
}

/// Models agree coefficientwise after relabeling variables. Returns the map
/// from variables of `a` to variables of `b`. Windows are not compared;
/// projection rows are compared as a set.
pub fn find_isomorphism(a: &FieldModel, b: &FieldModel, tol: f64) -> Option<Vec<usize>> {
    let n = a.n_fields();
    if n != b.n_fields() || a.n_base() != b.n_base() {
        return None;
    }
    let sig = |m: &FieldModel, v: usize| -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for (p, tag) in [(&m.action, "S"), (&m.density, "v")] {
            for (e, c) in p.terms() {
                if e[v] > 0 {
                    let deg: u32 = e.iter().sum();
                    out.push(format!("{tag}{}:{deg}:{:.9}", e[v], c));
                }
            }
        }
        let mut col: Vec<String> = (0..m.n_base()).map(|r| format!("P{:.9}", m.projection[(r, v)])).collect();
        col.sort();
        out.extend(col);
        out.sort();
        out
    };
    let sa: Vec<Vec<String>> = (0..n).map(|v| sig(a, v)).collect();
    let sb: Vec<Vec<String>> = (0..n).map(|v| sig(b, v)).collect();
    let candidates: Vec<Vec<usize>> = (0..n).map(|i| (0..n).filter(|&k| sa[i] == sb[k]).collect()).collect();
    let mut map = vec![usize::MAX; n];
    let mut used = vec![false; n];
    if search(a, b, tol, &candidates, 0, &mut map, &mut used) {
        Some(map)
    } else {
        None
    }
}

fn search(a: &FieldModel, b: &FieldModel, tol: f64, cand: &[Vec<usize>], i: usize, map: &mut Vec<usize>, used: &mut Vec<bool>) -> bool {
    let n = map.len();
    if i == n {
        return same_under(a, b, map, tol);
    }
    for &k in &cand[i] {
        if used[k] {
            continue;
        }
        used[k] = true;
        map[i] = k;
        if search(a, b, tol, cand, i + 1, map, used) {
            return true;
        }
        used[k] = false;
    }
    false
}

fn same_under(a: &FieldModel, b: &FieldModel, map: &[usize], tol: f64) -> bool {
    let n = map.len();
    let close = |p: &Polynomial, q: &Polynomial| p.sub(q).max_abs_coeff() <= tol * (1.0 + q.max_abs_coeff());
    if !close(&a.action.embed(n, map), &b.action) || !close(&a.density.embed(n, map), &b.density) {
        return false;
    }
    let rows = |m: &FieldModel, perm: Option<&[usize]>| -> Vec<Vec<f64>> {
        let mut r: Vec<Vec<f64>> = (0..m.n_base())
            .map(|row| {
                let mut v = vec![0.0; n];
                for c in 0..n {
                    let t = perm.map(|p| p[c]).unwrap_or(c);
                    v[t] = m.projection[(row, c)];
                }
                v
            })
            .collect();
        r.sort_by(|x, y| x.iter().zip(y).map(|(p, q)| p.total_cmp(q)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
        r
    };
    let ra = rows(a, Some(map));
    let rb = rows(b, None);
    ra.iter().zip(&rb).all(|(x, y)| x.iter().zip(y).all(|(p, q)| (p - q).abs() <= tol))
}

/// Glue m1∘m2∘m3 both ways. `s12` pairs bases of m1 and m2, `s23` of m2 and
/// m3; the coordinates of m2 used in the two gluings must be disjoint.
pub fn associativity(m1: &FieldModel, m2: &FieldModel, m3: &FieldModel, s12: &Shared, s23: &Shared) -> Result<(FieldModel, FieldModel)> {
    let left12 = fiber_product(m1, m2, s12)?;
    let relabel_left: Result<Vec<(usize, usize)>> = s23
        .pairs
        .iter()
        .map(|&(j, k)| {
            let pos = left12.residual2.iter().position(|&r| r == j).ok_or_else(|| Error::BaseMismatch(format!("coordinate {j} of the middle factor is glued twice")))?;
            Ok((left12.residual1.len() + pos, k))
        })
        .collect();
    let left = fiber_product(&left12.model, m3, &Shared::new(relabel_left?))?;
    let right23 = fiber_product(m2, m3, s23)?;
    let relabel_right: Result<Vec<(usize, usize)>> = s12
        .pairs
        .iter()
        .map(|&(i, j)| {
            let pos = right23.residual1.iter().position(|&r| r == j).ok_or_else(|| Error::BaseMismatch(format!("coordinate {j} of the middle factor is glued twice")))?;
            Ok((i, pos))
        })
        .collect();
    let right = fiber_product(m1, &right23.model, &Shared::new(relabel_right?))?;
    Ok((left.model, right.model))
}
