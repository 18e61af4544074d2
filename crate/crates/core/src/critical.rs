//! Critical points of the action on fibers and on gauge slices.

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{FieldModel, GaugeStructure};
use crate::poly::Polynomial;
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub struct GaugeData {
    /// Lagrange multipliers at the critical point.
    pub lambda: Vec<f64>,
    /// Hessian of S + λ·φ in (fiber coordinates, λ).
    pub block: DMatrix<f64>,
    pub block_eigenvalues: Vec<f64>,
    pub block_det_abs: f64,
    pub block_signature: i64,
    pub ghost: DMatrix<f64>,
    pub ghost_det: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalPoint {
    pub location: Vec<f64>,
    pub base: Vec<f64>,
    pub fiber_coords: Vec<f64>,
    pub action_value: f64,
    pub fiber_hessian: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    pub det_abs: f64,
    pub signature: i64,
    pub gauge: Option<GaugeData>,
}

pub const MAX_ITER: usize = 100;
pub const DEDUP: f64 = 1e-6;

/// Damped Newton for ∇f = 0 on polynomial data. Returns the point and final gradient norm.
pub fn newton(f: &Polynomial, seed: &[f64]) -> Result<Vec<f64>> {
    let d = f.arity();
    if d == 0 {
        return Ok(Vec::new());
    }
    let grad = f.gradient();
    let hess: Vec<Vec<Polynomial>> = grad.iter().map(|g| g.gradient()).collect();
    let gvec = |x: &[f64]| DVector::from_iterator(d, grad.iter().map(|g| g.eval(x)));
    let mut x = seed.to_vec();
    let mut g = gvec(&x);
    let g0 = g.norm();
    let target = 1e-12 * (1.0 + g0);
    let accept = 1e-10 * (1.0 + g0);
    for _ in 0..MAX_ITER {
        if g.norm() <= target {
            break;
        }
        let h = DMatrix::from_fn(d, d, |i, j| hess[i][j].eval(&x));
        let step = match h.clone().lu().solve(&(-&g)) {
            Some(s) if s.iter().all(|v| v.is_finite()) => s,
            _ => h.pseudo_inverse(1e-14).map_err(|e| Error::Invalid(e.to_string()))? * (-&g),
        };
        let mut t = 1.0;
        let gn = g.norm();
        let mut moved = false;
        for _ in 0..40 {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a + t * s).collect();
            let gt = gvec(&trial);
            if gt.norm() < gn * (1.0 - 1e-4 * t) || gt.norm() <= target {
                x = trial;
                g = gt;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    if g.norm() <= accept {
        Ok(x)
    } else {
        Err(Error::NonConvergence { iterate: x, residual: g.norm() })
    }
}

fn check_nondegenerate(vals: &[f64]) -> Result<()> {
    let radius = linalg::spectral_radius(vals);
    let min_abs = vals.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if !vals.is_empty() && (radius == 0.0 || min_abs < 1e-8 * radius) {
        return Err(Error::DegenerateHessian { min_abs, radius });
    }
    Ok(())
}

/// Fiber Hessian at `c` over `b`, its |det| and signature.
pub fn hessian_fiber(model: &FieldModel, c: &[f64], b: &[f64]) -> Result<(DMatrix<f64>, f64, i64)> {
    let frame = model.fiber_frame(b)?;
    model.action.check_arity(c)?;
    let full = model.action.taylor_at(c, 2)?.0[2].as_matrix();
    let bc = frame.basis.transpose() * full * &frame.basis;
    let (det, sig, vals) = linalg::sym_det_sign(&bc);
    check_nondegenerate(&vals)?;
    Ok((bc, det, sig))
}

fn check_seed(model: &FieldModel, seed: &[f64]) -> Result<()> {
    model.action.check_arity(seed)?;
    if !model.windows.is_empty() && model.cutoff(seed) <= 0.0 {
        return Err(Error::SeedOutsideWindow(seed.to_vec()));
    }
    Ok(())
}

fn sort_dedup<T>(mut pts: Vec<(Vec<f64>, T)>, key: impl Fn(&T) -> Vec<f64>) -> Vec<T> {
    let mut out: Vec<(Vec<f64>, T)> = Vec::new();
    pts.sort_by(|a, b| {
        for (x, y) in a.0.iter().zip(&b.0) {
            match x.total_cmp(y) {
                std::cmp::Ordering::Equal => continue,
                o => return o,
            }
        }
        std::cmp::Ordering::Equal
    });
    for p in pts.drain(..) {
        let k = key(&p.1);
        let dup = out.iter().any(|q| {
            let kq = key(&q.1);
            kq.iter().zip(&k).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() < DEDUP
        });
        if !dup {
            out.push(p);
        }
    }
    out.into_iter().map(|p| p.1).collect()
}

pub fn find_critical_points(model: &FieldModel, b: &[f64], seeds: &[Vec<f64>]) -> Result<Vec<CriticalPoint>> {
    let view = model.on_fiber(b)?;
    let mut found = Vec::new();
    for s in seeds {
        check_seed(model, s)?;
        let xi0 = view.frame.coords(s);
        let xi = newton(&view.action, &xi0)?;
        let x = view.frame.point(&xi);
        let (hess, det, sig) = {
            let t = view.action.taylor_at(&xi, 2)?;
            let h = t.0[2].as_matrix();
            let (det, sig, vals) = linalg::sym_det_sign(&h);
            check_nondegenerate(&vals)?;
            (h, det, sig)
        };
        let (vals, _) = linalg::sym_eigen(&hess);
        let cp = CriticalPoint {
            action_value: model.action.eval(&x),
            location: x.clone(),
            base: b.to_vec(),
            fiber_coords: xi,
            fiber_hessian: hess,
            eigenvalues: vals,
            det_abs: det,
            signature: sig,
            gauge: None,
        };
        found.push((x, cp));
    }
    Ok(sort_dedup(found, |c| c.fiber_coords.clone()))
}

/// Combined action S + λ·φ on (fiber coordinates, λ).
pub fn combined_action(model: &FieldModel, gauge: &GaugeStructure, b: &[f64]) -> Result<(crate::model::AffineFrame, Polynomial)> {
    let view = model.on_fiber(b)?;
    let d = view.frame.dim();
    let n = gauge.n_gauge();
    let o: Vec<f64> = view.frame.origin.iter().copied().collect();
    let mut tot = view.action.embed(d + n, &(0..d).collect::<Vec<_>>());
    for (a, phi) in gauge.conditions.components.iter().enumerate() {
        let pf = phi.compose_affine(&o, &view.frame.basis)?.embed(d + n, &(0..d).collect::<Vec<_>>());
        tot = tot.add(&pf.mul(&Polynomial::var(d + n, d + a)));
    }
    Ok((view.frame, tot))
}

pub fn critical_slice_gauge(model: &FieldModel, gauge: &GaugeStructure, b: &[f64], seeds: &[Vec<f64>]) -> Result<Vec<CriticalPoint>> {
    let (frame, tot) = combined_action(model, gauge, b)?;
    let d = frame.dim();
    let n = gauge.n_gauge();
    let mut found = Vec::new();
    for s in seeds {
        check_seed(model, s)?;
        let mut y0 = frame.coords(s);
        y0.extend(std::iter::repeat(0.0).take(n));
        let y = newton(&tot, &y0)?;
        let xi = y[..d].to_vec();
        let x = frame.point(&xi);
        let block = tot.taylor_at(&y, 2)?.0[2].as_matrix();
        let (bdet, bsig, bvals) = linalg::sym_det_sign(&block);
        check_nondegenerate(&bvals)?;
        let ghost = gauge.ghost_matrix(&x);
        let gdet = ghost.determinant();
        let gscale = linalg::max_abs(&ghost).max(1e-300).powi(n as i32);
        if !(gdet.abs() > 1e-10 * gscale) || gdet == 0.0 {
            return Err(Error::SingularGhost(gdet.abs()));
        }
        let hess = block.view((0, 0), (d, d)).into_owned();
        let (vals, _) = linalg::sym_eigen(&hess);
        let det = vals.iter().map(|v| v.abs()).product();
        let cp = CriticalPoint {
            action_value: model.action.eval(&x),
            location: x.clone(),
            base: b.to_vec(),
            fiber_coords: xi,
            signature: linalg::signature(&vals),
            eigenvalues: vals,
            fiber_hessian: hess,
            det_abs: det,
            gauge: Some(GaugeData {
                lambda: y[d..].to_vec(),
                block,
                block_eigenvalues: bvals,
                block_det_abs: bdet,
                block_signature: bsig,
                ghost,
                ghost_det: gdet,
            }),
        };
        found.push((x, cp));
    }
    let pts = sort_dedup(found, |c| c.fiber_coords.clone());
    check_orbits(gauge, &pts)?;
    Ok(pts)
}

/// Heuristic: flow each point along single generators and look for another returned point.
fn check_orbits(gauge: &GaugeStructure, pts: &[CriticalPoint]) -> Result<()> {
    if pts.len() < 2 {
        return Ok(());
    }
    for (i, p) in pts.iter().enumerate() {
        for q in &pts[i + 1..] {
            if (p.action_value - q.action_value).abs() > 1e-8 * (1.0 + p.action_value.abs()) {
                continue;
            }
            for l in &gauge.generators {
                for dir in [1.0, -1.0] {
                    let mut x = p.location.clone();
                    let dt = 0.01 * dir;
                    for _ in 0..1000 {
                        x = rk4(l, &x, dt);
                        let dist = x.iter().zip(&q.location).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                        if dist < 1e-3 {
                            return Err(Error::DuplicateOrbit(p.location.clone(), q.location.clone()));
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

fn rk4(l: &crate::poly::PolynomialMap, x: &[f64], dt: f64) -> Vec<f64> {
    let add = |a: &[f64], b: &[f64], s: f64| a.iter().zip(b).map(|(u, v)| u + s * v).collect::<Vec<_>>();
    let k1 = l.eval(x);
    let k2 = l.eval(&add(x, &k1, dt / 2.0));
    let k3 = l.eval(&add(x, &k2, dt / 2.0));
    let k4 = l.eval(&add(x, &k3, dt));
    (0..x.len()).map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator() {
        let m = FieldModel::new(
            vec!["x".into()],
            DMatrix::zeros(0, 1),
            Polynomial::new(1, [(vec![2], 0.5)]).unwrap(),
            Polynomial::constant(1, 1.0),
            Polynomial::constant(0, 1.0),
            vec![],
        )
        .unwrap();
        let cps = find_critical_points(&m, &[], &[vec![0.7]]).unwrap();
        assert_eq!(cps.len(), 1);
        assert!(cps[0].location[0].abs() < 1e-14);
        assert_eq!(cps[0].signature, 1);
        assert!((cps[0].det_abs - 1.0).abs() < 1e-14);
    }

    #[test]
    fn degenerate_is_an_error() {
        let m = FieldModel::new(
            vec!["x".into()],
            DMatrix::zeros(0, 1),
            Polynomial::new(1, [(vec![3], 1.0)]).unwrap(),
            Polynomial::constant(1, 1.0),
            Polynomial::constant(0, 1.0),
            vec![],
        )
        .unwrap();
        let e = find_critical_points(&m, &[], &[vec![0.0]]).unwrap_err();
        assert!(matches!(e, Error::DegenerateHessian { .. }));
    }
}
