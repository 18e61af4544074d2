//! Stationary-phase series: prefactor data plus graph-sum coefficients.

use crate::critical::{self, combined_action, CriticalPoint};
use crate::error::{Error, Result};
use crate::graphs::{self, FeynmanGraph, WeightData};
use crate::model::{Cocycle, FieldModel, GaugeStructure};
use crate::par::{self, Exec};
use crate::poly::{DerivativeTensors, Polynomial};
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;
use std::sync::OnceLock;

#[derive(Debug, Clone, PartialEq)]
pub struct GraphContribution {
    pub order: usize,
    pub graph: String,
    pub weight: Complex64,
    pub aut_order: u64,
    /// Contribution to the coefficient of h^order.
    pub term: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticSeries {
    pub location: Vec<f64>,
    pub base: Vec<f64>,
    pub action_value: f64,
    pub h_power: f64,
    pub two_pi_power: f64,
    /// π/4 times the signature.
    pub phase: f64,
    pub det_factor: f64,
    pub group_volume: f64,
    pub coefficients: Vec<Complex64>,
    pub contributions: Vec<GraphContribution>,
}

impl AsymptoticSeries {
    pub fn order(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn prefactor(&self, h: f64) -> Complex64 {
        let modulus = self.group_volume * (2.0 * PI).powf(self.two_pi_power) * h.powf(self.h_power) * self.det_factor;
        Complex64::from_polar(modulus, self.action_value / h + self.phase)
    }

    /// Prefactor times Σ_k a_k h^k.
    pub fn evaluate(&self, h: f64) -> Complex64 {
        self.evaluate_to(h, self.order())
    }

    pub fn evaluate_to(&self, h: f64, k: usize) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        let mut hk = 1.0;
        for a in self.coefficients.iter().take(k + 1) {
            s += a * hk;
            hk *= h;
        }
        self.prefactor(h) * s
    }

    /// Coefficients normalized by the non-exponential prefactor; comparable across coordinates.
    pub fn normalized_coefficients(&self) -> Vec<Complex64> {
        let pre = self.group_volume * (2.0 * PI).powf(self.two_pi_power) * self.det_factor;
        self.coefficients.iter().map(|a| a * pre * Complex64::from_polar(1.0, self.phase)).collect()
    }
}

pub fn evaluate(series: &AsymptoticSeries, h: f64) -> Complex64 {
    series.evaluate(h)
}

/// Plain graphs through `order`, enumerated once per order and cached.
pub fn plain_graphs(order: usize) -> Result<&'static [FeynmanGraph]> {
    check_order(order, graphs::PLAIN_CAP)?;
    static G: [OnceLock<Vec<FeynmanGraph>>; graphs::PLAIN_CAP + 1] = [const { OnceLock::new() }; graphs::PLAIN_CAP + 1];
    Ok(G[order].get_or_init(|| graphs::enumerate_plain(order).expect("within cap")))
}

pub fn gauge_graphs(order: usize) -> Result<&'static [FeynmanGraph]> {
    check_order(order, graphs::GAUGE_CAP)?;
    static G: [OnceLock<Vec<FeynmanGraph>>; graphs::GAUGE_CAP + 1] = [const { OnceLock::new() }; graphs::GAUGE_CAP + 1];
    Ok(G[order].get_or_init(|| graphs::enumerate_gauge(order).expect("within cap")))
}

fn nonzero_orders(t: &DerivativeTensors) -> Vec<bool> {
    t.0.iter().map(|x| x.data.iter().any(|v| *v != 0.0)).collect()
}

/// Whether some vertex tensor needed by `g` vanishes identically.
fn trivially_zero(g: &FeynmanGraph, action_nz: &[bool], special_nz: &[bool], ghost_nz: &[bool]) -> bool {
    (0..g.n_vertices()).any(|u| {
        let d = g.bos_degree(u) as usize;
        let nz = match g.flavors[u] {
            graphs::Flavor::Special => special_nz,
            graphs::Flavor::Action => action_nz,
            graphs::Flavor::Ghost => ghost_nz,
        };
        !nz.get(d).copied().unwrap_or(false)
    })
}

/// Sum graph contributions order by order, in the fixed graph order.
pub fn graph_sum(graphs: &[FeynmanGraph], data: &WeightData, order: usize, exec: Exec) -> Result<(Vec<Complex64>, Vec<GraphContribution>)> {
    let action_nz = nonzero_orders(&data.action);
    let special_nz = nonzero_orders(&data.special);
    let ghost_nz: Vec<bool> = if data.ghost.is_empty() {
        Vec::new()
    } else {
        let k = data.ghost[0][0].0.len();
        (0..k).map(|d| data.ghost.iter().flatten().any(|t| t.0[d].data.iter().any(|v| *v != 0.0))).collect()
    };
    let selected: Vec<&FeynmanGraph> = graphs
        .iter()
        .filter(|g| g.order() <= order && !trivially_zero(g, &action_nz, &special_nz, &ghost_nz))
        .collect();
    let weights = par::map(exec, &selected, |g| graphs::graph_weight(g, data));
    let mut coeffs = vec![Complex64::new(0.0, 0.0); order + 1];
    let mut contribs = Vec::new();
    for (g, w) in selected.iter().zip(weights) {
        let w = w?;
        let term = graphs::graph_factor(g) * w / g.aut_order as f64;
        coeffs[g.order()] += term;
        contribs.push(GraphContribution { order: g.order(), graph: g.to_text(), weight: w, aut_order: g.aut_order, term });
    }
    Ok((coeffs, contribs))
}

pub fn check_order(order: usize, cap: usize) -> Result<()> {
    if order > cap {
        return Err(Error::CapExceeded { order, cap });
    }
    Ok(())
}

fn inverse(b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if b.nrows() == 0 {
        return Ok(b.clone());
    }
    b.clone().try_inverse().ok_or(Error::DegenerateHessian { min_abs: 0.0, radius: 0.0 })
}

pub fn expand_plain(model: &FieldModel, c: &CriticalPoint, order: usize) -> Result<AsymptoticSeries> {
    expand_plain_with(model, c, order, Exec::default())
}

pub fn expand_plain_with(model: &FieldModel, c: &CriticalPoint, order: usize, exec: Exec) -> Result<AsymptoticSeries> {
    check_order(order, graphs::PLAIN_CAP)?;
    let view = model.on_fiber(&c.base)?;
    let xi = &c.fiber_coords;
    let action = view.action.taylor_at(xi, 2 * order + 2)?;
    let special = view.density.taylor_at(xi, 2 * order)?;
    let hess = action.0[2].as_matrix();
    let (det, sig, vals) = crate::linalg::sym_det_sign(&hess);
    let radius = crate::linalg::spectral_radius(&vals);
    if vals.iter().any(|v| v.abs() < 1e-8 * radius) {
        return Err(Error::DegenerateHessian { min_abs: vals.iter().fold(f64::INFINITY, |m, v| m.min(v.abs())), radius });
    }
    let data = WeightData { action, special, ghost: vec![], boson_prop: inverse(&hess)?, fermion_prop: None };
    let (coefficients, contributions) = graph_sum(plain_graphs(order)?, &data, order, exec)?;
    let d = view.frame.dim() as f64;
    Ok(AsymptoticSeries {
        location: c.location.clone(),
        base: c.base.clone(),
        action_value: c.action_value,
        h_power: d / 2.0,
        two_pi_power: d / 2.0,
        phase: PI / 4.0 * sig as f64,
        det_factor: det.powf(-0.5),
        group_volume: 1.0,
        coefficients,
        contributions,
    })
}

pub fn expand_gauge(model: &FieldModel, gauge: &GaugeStructure, c: &CriticalPoint, order: usize) -> Result<AsymptoticSeries> {
    expand_gauge_with(model, gauge, c, order, Exec::default())
}

/// Gauge-fixed expansion on (fiber coordinates, λ) with ghost vertices for det L_φ.
pub fn expand_gauge_with(model: &FieldModel, gauge: &GaugeStructure, c: &CriticalPoint, order: usize, exec: Exec) -> Result<AsymptoticSeries> {
    check_order(order, graphs::GAUGE_CAP)?;
    let gd = c.gauge.as_ref().ok_or_else(|| Error::Invalid("critical point lacks gauge data; use critical_slice_gauge".into()))?;
    let (frame, tot) = combined_action(model, gauge, &c.base)?;
    let d = frame.dim();
    let n = gauge.n_gauge();
    let dy = d + n;
    let mut y = c.fiber_coords.clone();
    y.extend(&gd.lambda);
    let lift = |p: &Polynomial| -> Result<Polynomial> {
        let o: Vec<f64> = frame.origin.iter().copied().collect();
        Ok(p.compose_affine(&o, &frame.basis)?.embed(dy, &(0..d).collect::<Vec<_>>()))
    };
    let action = tot.taylor_at(&y, 2 * order + 2)?;
    let special = lift(&model.density)?.taylor_at(&y, 2 * order)?;
    let ghost_polys = gauge.ghost_polynomials();
    let mut ghost = Vec::with_capacity(n);
    for row in &ghost_polys {
        let mut r = Vec::with_capacity(n);
        for p in row {
            r.push(lift(p)?.taylor_at(&y, 2 * order)?);
        }
        ghost.push(r);
    }
    let lc = &gd.ghost;
    let minus_il = lc.map(|x| Complex64::new(0.0, -x));
    let fprop = minus_il.try_inverse().ok_or(Error::SingularGhost(gd.ghost_det.abs()))?;
    let data = WeightData { action, special, ghost, boson_prop: inverse(&gd.block)?, fermion_prop: Some(fprop) };
    let (coefficients, contributions) = graph_sum(gauge_graphs(order)?, &data, order, exec)?;
    let e = (d as f64 - n as f64) / 2.0;
    Ok(AsymptoticSeries {
        location: c.location.clone(),
        base: c.base.clone(),
        action_value: c.action_value,
        h_power: e,
        two_pi_power: e,
        phase: PI / 4.0 * gd.block_signature as f64,
        det_factor: gd.block_det_abs.powf(-0.5) * gd.ghost_det.abs(),
        group_volume: gauge.group_volume,
        coefficients,
        contributions,
    })
}

/// Outcome of comparing the expansion at b with the one at the translated base point.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivarianceReport {
    pub base: Vec<f64>,
    pub moved_base: Vec<f64>,
    pub cocycle_value: f64,
    pub action_shift: f64,
    pub action_residual: f64,
    pub coefficient_residual: f64,
    pub prefactor_residual: f64,
    /// max over the probe h of |Z(γb)/Z(b) − exp(i c/h)|
    pub ratio_residual: f64,
    pub pass: bool,
}

/// Recompute the series at γ·b and check Z(γb) = Z(b) exp((i/h) c_∂(b, γ)) through order K.
pub fn equivariance_check(
    model: &FieldModel,
    gauge: Option<&GaugeStructure>,
    cocycle: &Cocycle,
    b: &[f64],
    gamma: &[f64],
    seeds: &[Vec<f64>],
    order: usize,
) -> Result<EquivarianceReport> {
    let r = cocycle.translation.ncols();
    if gamma.len() != r {
        return Err(Error::Arity { expected: r, got: gamma.len() });
    }
    let shift: Vec<f64> = (0..model.n_fields()).map(|i| (0..r).map(|j| cocycle.translation[(i, j)] * gamma[j]).sum()).collect();
    let moved_base: Vec<f64> = (0..model.n_base()).map(|q| b[q] + (0..model.n_fields()).map(|i| model.projection[(q, i)] * shift[i]).sum::<f64>()).collect();
    let moved_seeds: Vec<Vec<f64>> = seeds.iter().map(|s| s.iter().zip(&shift).map(|(a, t)| a + t).collect()).collect();
    // windows travel with the group
    let mut moved = model.clone();
    for w in &mut moved.windows {
        let a = w.axes_matrix(model.n_fields());
        let dz = &a * nalgebra::DVector::from_column_slice(&shift);
        for (c, z) in w.center.iter_mut().zip(dz.iter()) {
            *c += z;
        }
    }
    let series = |m: &FieldModel, base: &[f64], sd: &[Vec<f64>]| -> Result<AsymptoticSeries> {
        match gauge {
            Some(g) => {
                let cps = critical::critical_slice_gauge(m, g, base, sd)?;
                let c = cps.first().ok_or_else(|| Error::Tracking("no critical point".into()))?;
                expand_gauge(m, g, c, order)
            }
            None => {
                let cps = critical::find_critical_points(m, base, sd)?;
                let c = cps.first().ok_or_else(|| Error::Tracking("no critical point".into()))?;
                expand_plain(m, c, order)
            }
        }
    };
    let s0 = series(model, b, seeds)?;
    let s1 = series(&moved, &moved_base, &moved_seeds).map_err(|e| Error::Tracking(e.to_string()))?;
    let mut z = b.to_vec();
    z.extend_from_slice(gamma);
    let cval = cocycle.phase.eval(&z);
    let shift_s = s1.action_value - s0.action_value;
    let action_residual = (shift_s - cval).abs();
    let n0 = s0.normalized_coefficients();
    let n1 = s1.normalized_coefficients();
    let coefficient_residual = n0.iter().zip(&n1).map(|(a, b)| (a - b).norm() / a.norm().max(1.0)).fold(0.0, f64::max);
    let prefactor_residual = ((s1.det_factor - s0.det_factor) / s0.det_factor).abs() + (s1.phase - s0.phase).abs();
    let mut ratio_residual: f64 = 0.0;
    for h in [1.0, 0.5, 0.1] {
        let zr = s1.evaluate(h) / s0.evaluate(h);
        ratio_residual = ratio_residual.max((zr - Complex64::from_polar(1.0, cval / h)).norm());
    }
    let pass = action_residual < 1e-10 && coefficient_residual < 1e-8 && prefactor_residual < 1e-8 && ratio_residual < 1e-8;
    Ok(EquivarianceReport { base: b.to_vec(), moved_base, cocycle_value: cval, action_shift: shift_s, action_residual, coefficient_residual, prefactor_residual, ratio_residual, pass })
}
