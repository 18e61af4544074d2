#![allow(dead_code)]

pub mod graph_oracle;
pub mod hodge_oracle;

use nalgebra::DMatrix;
use statphase::model::{FieldModel, GaugeStructure, Window};
use statphase::poly::{Polynomial, PolynomialMap};
use std::f64::consts::PI;

/// ((x² + y²) − 1)² scaled by `s`, as a polynomial in (x, y).
pub fn mexican_hat(s: f64) -> Polynomial {
    Polynomial::new(2, [(vec![4, 0], s), (vec![0, 4], s), (vec![2, 2], 2.0 * s), (vec![2, 0], -2.0 * s), (vec![0, 2], -2.0 * s), (vec![0, 0], s)]).unwrap()
}

/// S = (r² − 1)²/4 on R² with no base, window radius 2.4. The density r⁴
/// vanishes to second order at the fixed point r = 0, whose contribution
/// would otherwise sit at relative order h^{1/2}.
pub fn rotation_model() -> FieldModel {
    FieldModel::new(
        vec!["x".into(), "y".into()],
        DMatrix::zeros(0, 2),
        mexican_hat(0.25),
        Polynomial::new(2, [(vec![4, 0], 1.0), (vec![0, 4], 1.0), (vec![2, 2], 2.0)]).unwrap(),
        Polynomial::constant(0, 1.0),
        vec![Window::ball(vec![0.0, 0.0], 2.4)],
    )
    .unwrap()
}

/// Rotations with generator (−y, x), condition φ = y.
pub fn rotation_gauge(volume: f64) -> GaugeStructure {
    GaugeStructure {
        generators: vec![PolynomialMap::new(2, vec![Polynomial::var(2, 1).scale(-1.0), Polynomial::var(2, 0)]).unwrap()],
        conditions: PolynomialMap::new(2, vec![Polynomial::var(2, 1)]).unwrap(),
        group_volume: volume,
        cocycle: None,
    }
}

pub fn full_circle() -> f64 {
    2.0 * PI
}

/// Half of the rotation model: the whole plane is base, S = (r² − 1)²/8,
/// density r². Two halves glued over the plane give the rotation model.
pub fn rotation_half() -> FieldModel {
    FieldModel::new(
        vec!["x".into(), "y".into()],
        DMatrix::identity(2, 2),
        mexican_hat(0.125),
        Polynomial::new(2, [(vec![2, 0], 1.0), (vec![0, 2], 1.0)]).unwrap(),
        Polynomial::constant(2, 1.0),
        vec![Window::ball(vec![0.0, 0.0], 2.4)],
    )
    .unwrap()
}
