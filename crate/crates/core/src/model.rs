//! Finite-dimensional field models: polynomial action, affine boundary fibration,
//! densities, support windows and optional gauge data.

use crate::error::{Error, Result};
use crate::linalg;
use crate::poly::{poly_det, Polynomial, PolynomialMap};
use nalgebra::{DMatrix, DVector};
use serde_json::{json, Map, Value};

/// Smooth compact cutoff: 1 on the inner half of the radius, 0 outside the radius.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub center: Vec<f64>,
    pub radius: f64,
    /// Linear map applied to the fields before measuring the distance; identity if absent.
    pub axes: Option<DMatrix<f64>>,
}

fn smooth_step(t: f64) -> f64 {
    // 1 for t <= 0, 0 for t >= 1
    if t <= 0.0 {
        return 1.0;
    }
    if t >= 1.0 {
        return 0.0;
    }
    let f = |s: f64| if s > 0.0 { (-1.0 / s).exp() } else { 0.0 };
    let a = f(1.0 - t);
    a / (a + f(t))
}

impl Window {
    pub fn ball(center: Vec<f64>, radius: f64) -> Self {
        Window { center, radius, axes: None }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn axes_matrix(&self, n: usize) -> DMatrix<f64> {
        self.axes.clone().unwrap_or_else(|| DMatrix::identity(n, n))
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let r2: f64 = match &self.axes {
            None => x.iter().zip(&self.center).map(|(a, c)| (a - c) * (a - c)).sum(),
            Some(a) => (0..a.nrows())
                .map(|i| {
                    let z: f64 = (0..a.ncols()).map(|j| a[(i, j)] * x[j]).sum();
                    (z - self.center[i]).powi(2)
                })
                .sum(),
        };
        let r = r2.sqrt();
        smooth_step(2.0 * r / self.radius - 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffineFrame {
    pub origin: DVector<f64>,
    /// N × d with orthonormal columns spanning ker P.
    pub basis: DMatrix<f64>,
}

impl AffineFrame {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn point(&self, xi: &[f64]) -> Vec<f64> {
        let x = &self.origin + &self.basis * DVector::from_column_slice(xi);
        x.iter().copied().collect()
    }

    pub fn coords(&self, x: &[f64]) -> Vec<f64> {
        let d = DVector::from_column_slice(x) - &self.origin;
        (self.basis.transpose() * d).iter().copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldModel {
    pub variables: Vec<String>,
    /// n_base × N, full row rank.
    pub projection: DMatrix<f64>,
    pub action: Polynomial,
    pub density: Polynomial,
    pub base_density: Polynomial,
    pub windows: Vec<Window>,
}

/// Boundary translation group acting by x ↦ x + Tγ with phase S(x+Tγ) − S(x) = c(Px, γ).
#[derive(Debug, Clone, PartialEq)]
pub struct Cocycle {
    pub translation: DMatrix<f64>,
    /// Polynomial in (b, γ), arity n_base + r.
    pub phase: Polynomial,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaugeStructure {
    pub generators: Vec<PolynomialMap>,
    pub conditions: PolynomialMap,
    pub group_volume: f64,
    pub cocycle: Option<Cocycle>,
}

impl GaugeStructure {
    pub fn n_gauge(&self) -> usize {
        self.generators.len()
    }

    /// L_φ(x)_{ab} = Σ_i l_a^i ∂_i φ_b as polynomials.
    pub fn ghost_polynomials(&self) -> Vec<Vec<Polynomial>> {
        let n = self.n_gauge();
        let arity = self.conditions.arity;
        let jac = self.conditions.jacobian();
        (0..n)
            .map(|a| {
                (0..n)
                    .map(|b| {
                        let mut acc = Polynomial::zero(arity);
                        for i in 0..arity {
                            acc = acc.add(&self.generators[a].components[i].mul(&jac[b][i]));
                        }
                        acc
                    })
                    .collect()
            })
            .collect()
    }

    pub fn ghost_matrix(&self, x: &[f64]) -> DMatrix<f64> {
        let g = self.ghost_polynomials();
        let n = self.n_gauge();
        DMatrix::from_fn(n, n, |a, b| g[a][b].eval(x))
    }

    /// Replace φ by f(φ) component-wise, f(t) = t + Σ c_k t^k.
    pub fn reparametrize_conditions(&self, higher: &[(u32, f64)]) -> GaugeStructure {
        let comps = self
            .conditions
            .components
            .iter()
            .map(|p| {
                let mut q = p.clone();
                for &(k, c) in higher {
                    q = q.add(&p.pow(k).scale(c));
                }
                q
            })
            .collect();
        GaugeStructure {
            conditions: PolynomialMap { arity: self.conditions.arity, components: comps },
            ..self.clone()
        }
    }
}

impl FieldModel {
    pub fn new(
        variables: Vec<String>,
        projection: DMatrix<f64>,
        action: Polynomial,
        density: Polynomial,
        base_density: Polynomial,
        windows: Vec<Window>,
    ) -> Result<Self> {
        let m = FieldModel { variables, projection, action, density, base_density, windows };
        m.validate()?;
        Ok(m)
    }

    pub fn n_fields(&self) -> usize {
        self.action.arity()
    }

    pub fn n_base(&self) -> usize {
        self.projection.nrows()
    }

    pub fn fiber_dim(&self) -> usize {
        self.n_fields() - self.n_base()
    }

    pub fn cutoff(&self, x: &[f64]) -> f64 {
        self.windows.iter().map(|w| w.value(x)).product()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_fields();
        if self.variables.len() != n {
            return Err(Error::Schema { key: "variables".into(), msg: format!("expected {n} names") });
        }
        if self.projection.ncols() != n {
            return Err(Error::Schema { key: "projection".into(), msg: format!("expected {n} columns") });
        }
        if self.density.arity() != n {
            return Err(Error::Schema { key: "density".into(), msg: format!("arity must be {n}") });
        }
        if self.base_density.arity() != self.n_base() {
            return Err(Error::Schema { key: "base_density".into(), msg: format!("arity must be {}", self.n_base()) });
        }
        let r = linalg::rank(&self.projection);
        if r != self.n_base() {
            return Err(Error::RankDeficient { rank: r, expected: self.n_base() });
        }
        for w in &self.windows {
            let rows = w.axes.as_ref().map(|a| a.nrows()).unwrap_or(n);
            if w.center.len() != rows || w.axes.as_ref().is_some_and(|a| a.ncols() != n) {
                return Err(Error::Schema { key: "support".into(), msg: "window dimensions do not match".into() });
            }
            if !(w.radius > 0.0) {
                return Err(Error::Schema { key: "support.radius".into(), msg: "radius must be positive".into() });
            }
        }
        self.check_density_positive()
    }

    /// Deterministic quasi-random probe of v on the window plateau.
    fn check_density_positive(&self) -> Result<()> {
        if self.windows.is_empty() {
            return Ok(());
        }
        let n = self.n_fields();
        let w = &self.windows[0];
        let a = w.axes_matrix(n);
        let ap = a.clone().pseudo_inverse(1e-12).map_err(|e| Error::Invalid(e.to_string()))?;
        for s in 1..=64 {
            let u: Vec<f64> = (0..w.dim()).map(|j| 2.0 * halton(s, PRIMES[j % PRIMES.len()]) - 1.0).collect();
            let z: Vec<f64> = w.center.iter().zip(&u).map(|(c, ui)| c + 0.5 * w.radius * ui / (w.dim() as f64).sqrt()).collect();
            let x = &ap * DVector::from_vec(z);
            let xs: Vec<f64> = x.iter().copied().collect();
            if self.cutoff(&xs) > 0.0 {
                let v = self.density.eval(&xs);
                if !(v > 0.0) {
                    return Err(Error::NonPositiveDensity { value: v, at: xs });
                }
            }
        }
        Ok(())
    }

    pub fn fiber_frame(&self, b: &[f64]) -> Result<AffineFrame> {
        if b.len() != self.n_base() {
            return Err(Error::Arity { expected: self.n_base(), got: b.len() });
        }
        let n = self.n_fields();
        let p = &self.projection;
        let origin = if self.n_base() == 0 {
            DVector::zeros(n)
        } else {
            linalg::min_norm_solve(p, b).ok_or(Error::RankDeficient { rank: 0, expected: self.n_base() })?
        };
        // Gram-Schmidt on the kernel projections of the unit vectors, in order.
        let kproj = if self.n_base() == 0 {
            DMatrix::identity(n, n)
        } else {
            let pinv = p.transpose() * (p * p.transpose()).try_inverse().ok_or(Error::RankDeficient { rank: 0, expected: self.n_base() })?;
            DMatrix::identity(n, n) - pinv * p
        };
        let mut cols: Vec<DVector<f64>> = Vec::new();
        for j in 0..n {
            let mut v = kproj.column(j).into_owned();
            for _ in 0..2 {
                for c in &cols {
                    let d = c.dot(&v);
                    v -= c * d;
                }
            }
            let nv = v.norm();
            if nv > 1e-8 {
                cols.push(v / nv);
            }
            if cols.len() == self.fiber_dim() {
                break;
            }
        }
        let basis = if cols.is_empty() { DMatrix::zeros(n, 0) } else { DMatrix::from_columns(&cols) };
        Ok(AffineFrame { origin, basis })
    }

    /// Action and density pulled back to fiber coordinates over b.
    pub fn on_fiber(&self, b: &[f64]) -> Result<FiberView> {
        let frame = self.fiber_frame(b)?;
        let o: Vec<f64> = frame.origin.iter().copied().collect();
        let action = self.action.compose_affine(&o, &frame.basis)?;
        let density = self.density.compose_affine(&o, &frame.basis)?;
        Ok(FiberView { frame, action, density })
    }

    /// Pull back along a polynomial change of variables x = f(u) on a model
    /// without base. `orientation` fixes the sign of det Df near the point of
    /// interest so that the density picks up |det Df|. Windows are dropped.
    pub fn pullback(&self, f: &PolynomialMap, orientation: f64) -> Result<FieldModel> {
        if self.n_base() != 0 {
            return Err(Error::Invalid("pullback requires a model without base".into()));
        }
        if f.len() != self.n_fields() || f.arity != self.n_fields() {
            return Err(Error::Arity { expected: self.n_fields(), got: f.len() });
        }
        let n = f.arity;
        let action = self.action.compose(&f.components)?;
        let jac = poly_det(&f.jacobian(), n);
        let density = self.density.compose(&f.components)?.mul(&jac).scale(orientation.signum());
        Ok(FieldModel {
            variables: (0..n).map(|i| format!("u{i}")).collect(),
            projection: DMatrix::zeros(0, n),
            action,
            density,
            base_density: Polynomial::constant(0, 1.0),
            windows: Vec::new(),
        })
    }

    /// Bounding box of the windowed region in fiber coordinates: (center, half widths).
    pub fn fiber_box(&self, frame: &AffineFrame) -> Result<(Vec<f64>, Vec<f64>)> {
        let d = frame.dim();
        let n = self.n_fields();
        if d == 0 {
            return Ok((Vec::new(), Vec::new()));
        }
        if self.windows.is_empty() {
            return Err(Error::Unbounded);
        }
        let mut g = DMatrix::zeros(d, d);
        let mut gv = DVector::zeros(d);
        let mut c = 0.0;
        let mut boxes: Vec<(DVector<f64>, DVector<f64>)> = Vec::new();
        for w in &self.windows {
            let a = w.axes_matrix(n);
            let m = &a * &frame.basis;
            let r = &a * &frame.origin - DVector::from_column_slice(&w.center);
            let s = 1.0 / (w.radius * w.radius);
            let gw = m.transpose() * &m;
            g += &gw * s;
            gv += m.transpose() * &r * s;
            c += r.dot(&r) * s;
            if let Some(inv) = gw.clone().try_inverse() {
                if linalg::rank(&gw) == d {
                    let xc = -(&inv * (m.transpose() * &r));
                    let rho2 = w.radius * w.radius - r.dot(&r) + (m.transpose() * &r).dot(&(&inv * (m.transpose() * &r)));
                    let hw = DVector::from_fn(d, |j, _| (rho2.max(0.0) * inv[(j, j)]).sqrt());
                    boxes.push((xc, hw));
                }
            }
        }
        if linalg::rank(&g) < d {
            return Err(Error::Unbounded);
        }
        let inv = g.clone().try_inverse().ok_or(Error::Unbounded)?;
        let xc = -(&inv * &gv);
        let rho2 = self.windows.len() as f64 - c + gv.dot(&(&inv * &gv));
        let mut lo: Vec<f64> = (0..d).map(|j| xc[j] - (rho2.max(0.0) * inv[(j, j)]).sqrt()).collect();
        let mut hi: Vec<f64> = (0..d).map(|j| xc[j] + (rho2.max(0.0) * inv[(j, j)]).sqrt()).collect();
        for (bc, bw) in &boxes {
            for j in 0..d {
                lo[j] = lo[j].max(bc[j] - bw[j]);
                hi[j] = hi[j].min(bc[j] + bw[j]);
            }
        }
        let center = (0..d).map(|j| 0.5 * (lo[j] + hi[j])).collect();
        let half = (0..d).map(|j| (0.5 * (hi[j] - lo[j])).max(0.0)).collect();
        Ok((center, half))
    }
}

#[derive(Debug, Clone)]
pub struct FiberView {
    pub frame: AffineFrame,
    pub action: Polynomial,
    pub density: Polynomial,
}

const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

fn halton(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

fn max_rel_coeff(p: &Polynomial, scale: f64) -> f64 {
    p.max_abs_coeff() / scale.max(1.0)
}

/// Checks bulk invariance, fiber tangency, and the cocycle identity.
pub fn validate_gauge(model: &FieldModel, g: &GaugeStructure) -> Result<()> {
    let n = model.n_fields();
    let k = g.n_gauge();
    if k == 0 || g.conditions.len() != k {
        return Err(Error::Schema { key: "gauge.conditions".into(), msg: format!("need {k} conditions, one per generator") });
    }
    if g.conditions.arity != n || g.generators.iter().any(|l| l.arity != n || l.len() != n) {
        return Err(Error::Schema { key: "gauge.generators".into(), msg: format!("each generator needs {n} components of arity {n}") });
    }
    if !(g.group_volume > 0.0) {
        return Err(Error::Schema { key: "gauge.group_volume".into(), msg: "must be positive".into() });
    }
    let scale = model.action.max_abs_coeff();
    for l in &g.generators {
        let mut res = Polynomial::zero(n);
        for i in 0..n {
            res = res.add(&l.components[i].mul(&model.action.deriv(i)));
        }
        if max_rel_coeff(&res, scale) > 1e-10 {
            return Err(Error::GaugeResidual { max_coeff: res.max_abs_coeff(), residual: res.to_text(&model.variables) });
        }
        for r in 0..model.n_base() {
            let mut t = Polynomial::zero(n);
            for i in 0..n {
                t = t.add(&l.components[i].scale(model.projection[(r, i)]));
            }
            if t.max_abs_coeff() > 1e-10 {
                return Err(Error::GaugeResidual {
                    max_coeff: t.max_abs_coeff(),
                    residual: format!("generator not tangent to fibers: P·l = {}", t.to_text(&model.variables)),
                });
            }
        }
    }
    if let Some(c) = &g.cocycle {
        validate_cocycle(model, c)?;
    }
    Ok(())
}

fn validate_cocycle(model: &FieldModel, c: &Cocycle) -> Result<()> {
    let n = model.n_fields();
    let nb = model.n_base();
    let r = c.translation.ncols();
    if c.translation.nrows() != n || c.phase.arity() != nb + r {
        return Err(Error::Schema { key: "gauge.cocycle".into(), msg: format!("translation must be {n}×r and phase arity n_base + r") });
    }
    // polynomial identity in (x, γ)
    let m = n + r;
    let shifted: Vec<Polynomial> = (0..n)
        .map(|i| {
            let mut row = vec![0.0; m];
            row[i] = 1.0;
            for j in 0..r {
                row[n + j] = c.translation[(i, j)];
            }
            Polynomial::affine(0.0, &row)
        })
        .collect();
    let lhs = model.action.compose(&shifted)?.sub(&model.action.embed(m, &(0..n).collect::<Vec<_>>()));
    let base: Vec<Polynomial> = (0..nb)
        .map(|q| {
            let mut row = vec![0.0; m];
            for i in 0..n {
                row[i] = model.projection[(q, i)];
            }
            Polynomial::affine(0.0, &row)
        })
        .chain((0..r).map(|j| Polynomial::var(m, n + j)))
        .collect();
    let rhs = c.phase.compose(&base)?;
    let res = lhs.sub(&rhs);
    if max_rel_coeff(&res, model.action.max_abs_coeff()) > 1e-10 {
        return Err(Error::GaugeResidual { max_coeff: res.max_abs_coeff(), residual: format!("cocycle: {}", res.to_text(&[])) });
    }
    // c(b, g+h) = c(b + PTh, g) + c(b, h) on sampled triples
    let pt = &model.projection * &c.translation;
    let mut worst: f64 = 0.0;
    for s in 1..=16u64 {
        let b: Vec<f64> = (0..nb).map(|j| 4.0 * halton(s, PRIMES[j % 8]) - 2.0).collect();
        let g1: Vec<f64> = (0..r).map(|j| 2.0 * halton(s + 17, PRIMES[(j + 3) % 8]) - 1.0).collect();
        let h1: Vec<f64> = (0..r).map(|j| 2.0 * halton(s + 41, PRIMES[(j + 5) % 8]) - 1.0).collect();
        let gh: Vec<f64> = g1.iter().zip(&h1).map(|(a, b)| a + b).collect();
        let bh: Vec<f64> = (0..nb).map(|q| b[q] + (0..r).map(|j| pt[(q, j)] * h1[j]).sum::<f64>()).collect();
        let ev = |bb: &[f64], gg: &[f64]| {
            let mut z = bb.to_vec();
            z.extend_from_slice(gg);
            c.phase.eval(&z)
        };
        let d = ev(&b, &gh) - ev(&bh, &g1) - ev(&b, &h1);
        worst = worst.max(d.abs());
    }
    if worst > 1e-10 {
        return Err(Error::Cocycle(worst));
    }
    Ok(())
}

// ---------- model file ----------

fn schema(key: &str, msg: impl Into<String>) -> Error {
    Error::Schema { key: key.into(), msg: msg.into() }
}

fn get<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| schema(key, "missing"))
}

fn as_f64(v: &Value, key: &str) -> Result<f64> {
    v.as_f64().ok_or_else(|| schema(key, "expected a number"))
}

fn as_vec(v: &Value, key: &str) -> Result<Vec<f64>> {
    v.as_array().ok_or_else(|| schema(key, "expected a list of numbers"))?.iter().map(|x| as_f64(x, key)).collect()
}

fn as_matrix(v: &Value, key: &str, ncols: usize) -> Result<DMatrix<f64>> {
    let rows = v.as_array().ok_or_else(|| schema(key, "expected a list of rows"))?;
    let mut data = Vec::new();
    for r in rows {
        let row = as_vec(r, key)?;
        if row.len() != ncols {
            return Err(schema(key, format!("each row needs {ncols} entries")));
        }
        data.extend(row);
    }
    Ok(DMatrix::from_row_slice(rows.len(), ncols, &data))
}

pub fn parse_polynomial(v: &Value, key: &str, arity: usize) -> Result<Polynomial> {
    let terms = v.as_array().ok_or_else(|| schema(key, "expected a list of {coeff, exp} terms"))?;
    let mut out = Vec::new();
    for t in terms {
        let o = t.as_object().ok_or_else(|| schema(key, "term must be an object"))?;
        let c = as_f64(get(o, "coeff").map_err(|_| schema(&format!("{key}.coeff"), "missing"))?, &format!("{key}.coeff"))?;
        let e = get(o, "exp").map_err(|_| schema(&format!("{key}.exp"), "missing"))?;
        let e = e.as_array().ok_or_else(|| schema(&format!("{key}.exp"), "expected integers"))?;
        let mut exps = Vec::new();
        for x in e {
            let k = x.as_u64().ok_or_else(|| schema(&format!("{key}.exp"), "exponents must be non-negative integers"))?;
            exps.push(k as u32);
        }
        if exps.len() != arity {
            return Err(schema(&format!("{key}.exp"), format!("expected {arity} exponents")));
        }
        out.push((exps, c));
    }
    Polynomial::new(arity, out)
}

pub fn polynomial_json(p: &Polynomial) -> Value {
    Value::Array(p.terms().iter().map(|(e, c)| json!({"coeff": c, "exp": e})).collect())
}

fn matrix_json(m: &DMatrix<f64>) -> Value {
    Value::Array((0..m.nrows()).map(|i| Value::Array((0..m.ncols()).map(|j| json!(m[(i, j)])).collect())).collect())
}

fn parse_window(v: &Value, n: usize) -> Result<Window> {
    let o = v.as_object().ok_or_else(|| schema("support", "expected an object"))?;
    let center = as_vec(get(o, "center").map_err(|_| schema("support.center", "missing"))?, "support.center")?;
    let radius = as_f64(get(o, "radius").map_err(|_| schema("support.radius", "missing"))?, "support.radius")?;
    let axes = match o.get("axes") {
        Some(a) => Some(as_matrix(a, "support.axes", n)?),
        None => None,
    };
    Ok(Window { center, radius, axes })
}

/// Parse and validate a model file.
pub fn load_model(text: &str) -> Result<(FieldModel, Option<GaugeStructure>)> {
    let root: Value = serde_json::from_str(text).map_err(|e| schema("<document>", e.to_string()))?;
    let o = root.as_object().ok_or_else(|| schema("<document>", "top level must be an object"))?;
    let n = get(o, "n_fields")?.as_u64().ok_or_else(|| schema("n_fields", "expected a non-negative integer"))? as usize;
    let variables = match o.get("variables") {
        Some(v) => v
            .as_array()
            .ok_or_else(|| schema("variables", "expected a list of names"))?
            .iter()
            .map(|s| s.as_str().map(String::from).ok_or_else(|| schema("variables", "names must be strings")))
            .collect::<Result<Vec<_>>>()?,
        None => (0..n).map(|i| format!("x{i}")).collect(),
    };
    let projection = as_matrix(get(o, "projection")?, "projection", n)?;
    let nb = projection.nrows();
    let action = parse_polynomial(get(o, "action")?, "action", n)?;
    let density = parse_polynomial(get(o, "density")?, "density", n)?;
    let base_density = match o.get("base_density") {
        Some(v) => parse_polynomial(v, "base_density", nb)?,
        None => return Err(schema("base_density", "missing")),
    };
    let windows = match o.get("support") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(ws)) => ws.iter().map(|w| parse_window(w, n)).collect::<Result<Vec<_>>>()?,
        Some(w) => vec![parse_window(w, n)?],
    };
    let model = FieldModel::new(variables, projection, action, density, base_density, windows)?;
    let gauge = match o.get("gauge") {
        None | Some(Value::Null) => None,
        Some(g) => {
            let go = g.as_object().ok_or_else(|| schema("gauge", "expected an object"))?;
            let gens = get(go, "generators").map_err(|_| schema("gauge.generators", "missing"))?;
            let gens = gens.as_array().ok_or_else(|| schema("gauge.generators", "expected a list of vector fields"))?;
            let mut generators = Vec::new();
            for gen in gens {
                let comps = gen.as_array().ok_or_else(|| schema("gauge.generators", "each generator is a list of polynomials"))?;
                let polys = comps.iter().map(|p| parse_polynomial(p, "gauge.generators", n)).collect::<Result<Vec<_>>>()?;
                generators.push(PolynomialMap::new(n, polys)?);
            }
            let conds = get(go, "conditions").map_err(|_| schema("gauge.conditions", "missing"))?;
            let conds = conds.as_array().ok_or_else(|| schema("gauge.conditions", "expected a list of polynomials"))?;
            let conditions = PolynomialMap::new(n, conds.iter().map(|p| parse_polynomial(p, "gauge.conditions", n)).collect::<Result<Vec<_>>>()?)?;
            let group_volume = as_f64(get(go, "group_volume").map_err(|_| schema("gauge.group_volume", "missing"))?, "gauge.group_volume")?;
            let cocycle = match go.get("cocycle") {
                None | Some(Value::Null) => None,
                Some(c) => {
                    let co = c.as_object().ok_or_else(|| schema("gauge.cocycle", "expected an object"))?;
                    let t = get(co, "translation").map_err(|_| schema("gauge.cocycle.translation", "missing"))?;
                    let rows = t.as_array().ok_or_else(|| schema("gauge.cocycle.translation", "expected rows"))?;
                    let r = rows.first().and_then(|x| x.as_array()).map(|x| x.len()).unwrap_or(0);
                    let translation = as_matrix(t, "gauge.cocycle.translation", r)?;
                    let phase = parse_polynomial(get(co, "phase").map_err(|_| schema("gauge.cocycle.phase", "missing"))?, "gauge.cocycle.phase", nb + r)?;
                    Some(Cocycle { translation, phase })
                }
            };
            let g = GaugeStructure { generators, conditions, group_volume, cocycle };
            validate_gauge(&model, &g)?;
            Some(g)
        }
    };
    Ok((model, gauge))
}

pub fn model_to_json(m: &FieldModel, g: Option<&GaugeStructure>) -> Value {
    let mut o = Map::new();
    o.insert("n_fields".into(), json!(m.n_fields()));
    o.insert("variables".into(), json!(m.variables));
    o.insert("projection".into(), matrix_json(&m.projection));
    o.insert("action".into(), polynomial_json(&m.action));
    o.insert("density".into(), polynomial_json(&m.density));
    o.insert("base_density".into(), polynomial_json(&m.base_density));
    if !m.windows.is_empty() {
        let ws: Vec<Value> = m
            .windows
            .iter()
            .map(|w| {
                let mut wo = Map::new();
                wo.insert("center".into(), json!(w.center));
                wo.insert("radius".into(), json!(w.radius));
                if let Some(a) = &w.axes {
                    wo.insert("axes".into(), matrix_json(a));
                }
                Value::Object(wo)
            })
            .collect();
        o.insert("support".into(), if ws.len() == 1 { ws[0].clone() } else { Value::Array(ws) });
    }
    if let Some(g) = g {
        let mut go = Map::new();
        go.insert(
            "generators".into(),
            Value::Array(g.generators.iter().map(|l| Value::Array(l.components.iter().map(polynomial_json).collect())).collect()),
        );
        go.insert("conditions".into(), Value::Array(g.conditions.components.iter().map(polynomial_json).collect()));
        go.insert("group_volume".into(), json!(g.group_volume));
        if let Some(c) = &g.cocycle {
            go.insert("cocycle".into(), json!({"translation": matrix_json(&c.translation), "phase": polynomial_json(&c.phase)}));
        }
        o.insert("gauge".into(), Value::Object(go));
    }
    Value::Object(o)
}
