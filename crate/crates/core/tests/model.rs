mod common;

use nalgebra::DMatrix;
use serde_json::json;
use statphase::critical::{critical_slice_gauge, find_critical_points, hessian_fiber};
use statphase::dtqm;
use statphase::model::{load_model, model_to_json, validate_gauge, FieldModel, GaugeStructure};
use statphase::poly::{Polynomial, PolynomialMap};
use statphase::Error;

fn poly(terms: &[(f64, &[u32])]) -> serde_json::Value {
    json!(terms.iter().map(|(c, e)| json!({"coeff": c, "exp": e})).collect::<Vec<_>>())
}

#[test]
fn dtqm_file_round_trip() {
    let m = dtqm::build_dtqm(3).unwrap();
    let text = model_to_json(&m, None).to_string();
    let (back, g) = load_model(&text).unwrap();
    assert!(g.is_none());
    assert_eq!(back.n_fields(), 5);
    assert_eq!(back.n_base(), 2);
    assert_eq!(back, m);
}

#[test]
fn identity_projection_gives_point_fiber() {
    let doc = json!({
        "n_fields": 1,
        "projection": [[1.0]],
        "action": [],
        "density": poly(&[(1.0, &[0])]),
        "base_density": poly(&[(1.0, &[0])]),
    });
    let (m, _) = load_model(&doc.to_string()).unwrap();
    assert_eq!(m.fiber_dim(), 0);
    let f = m.fiber_frame(&[3.0]).unwrap();
    assert_eq!(f.dim(), 0);
    assert!((f.origin[0] - 3.0).abs() < 1e-15);
}

#[test]
fn rotation_model_loads_with_gauge() {
    let m = common::rotation_model();
    let g = common::rotation_gauge(common::full_circle());
    let text = model_to_json(&m, Some(&g)).to_string();
    let (back, gb) = load_model(&text).unwrap();
    assert_eq!(back, m);
    assert_eq!(gb.unwrap(), g);
}

#[test]
fn schema_errors_name_the_key() {
    let doc = json!({"n_fields": 1, "projection": [], "density": poly(&[(1.0, &[0])]), "base_density": poly(&[(1.0, &[])])});
    match load_model(&doc.to_string()) {
        Err(Error::Schema { key, .. }) => assert_eq!(key, "action"),
        other => panic!("{other:?}"),
    }
    let doc = json!({"n_fields": 1, "projection": [], "action": poly(&[(1.0, &[2, 1])]), "density": poly(&[(1.0, &[0])]), "base_density": poly(&[(1.0, &[])])});
    assert!(matches!(load_model(&doc.to_string()), Err(Error::Schema { .. })));
    assert!(matches!(load_model("[1, 2"), Err(Error::Schema { .. })));
}

#[test]
fn rank_deficient_projection_is_rejected() {
    let doc = json!({
        "n_fields": 2,
        "projection": [[1.0, 1.0], [2.0, 2.0]],
        "action": poly(&[(0.5, &[2, 0])]),
        "density": poly(&[(1.0, &[0, 0])]),
        "base_density": poly(&[(1.0, &[0, 0])]),
    });
    assert!(matches!(load_model(&doc.to_string()), Err(Error::RankDeficient { rank: 1, expected: 2 })));
}

#[test]
fn nonpositive_density_on_window_is_rejected() {
    let doc = json!({
        "n_fields": 1,
        "projection": [],
        "action": poly(&[(0.5, &[2])]),
        "density": poly(&[(1.0, &[1])]),
        "base_density": poly(&[(1.0, &[])]),
        "support": {"center": [0.0], "radius": 1.0},
    });
    assert!(matches!(load_model(&doc.to_string()), Err(Error::NonPositiveDensity { .. })));
}

#[test]
fn broken_gauge_reports_residual() {
    let m = common::rotation_model();
    let mut g = common::rotation_gauge(1.0);
    // (y, x) is not a symmetry of the Mexican hat
    g.generators[0] = PolynomialMap::new(2, vec![Polynomial::var(2, 1), Polynomial::var(2, 0)]).unwrap();
    match validate_gauge(&m, &g) {
        Err(Error::GaugeResidual { max_coeff, .. }) => assert!(max_coeff > 0.1),
        other => panic!("{other:?}"),
    }
}

#[test]
fn taylor_examples() {
    let cube = Polynomial::new(1, [(vec![3], 1.0)]).unwrap();
    let t = cube.taylor_at(&[1.0], 3).unwrap();
    let vals: Vec<f64> = t.0.iter().map(|x| x.data[0]).collect();
    assert_eq!(vals, vec![1.0, 3.0, 6.0, 6.0]);
    let f = Polynomial::new(2, [(vec![2, 1], 1.0)]).unwrap();
    let t = f.taylor_at(&[1.0, 2.0], 2).unwrap();
    assert_eq!(t.0[0].data, vec![2.0]);
    assert_eq!(t.0[1].data, vec![4.0, 1.0]);
    assert_eq!(t.0[2].data, vec![4.0, 2.0, 2.0, 0.0]);
    let m = dtqm::build_dtqm(3).unwrap();
    let t = m.action.taylor_at(&dtqm::classical_solution(3, 0.0, 1.0), 3).unwrap();
    assert!(t.0[3].data.iter().all(|&x| x == 0.0));
}

#[test]
fn fiber_frames() {
    let m = FieldModel::new(
        vec!["x".into(), "y".into()],
        DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        Polynomial::zero(2),
        Polynomial::constant(2, 1.0),
        Polynomial::constant(1, 1.0),
        vec![],
    )
    .unwrap();
    let f = m.fiber_frame(&[3.0]).unwrap();
    assert!((f.origin[0] - 3.0).abs() < 1e-12 && f.origin[1].abs() < 1e-12);
    assert!(f.basis[(0, 0)].abs() < 1e-12 && (f.basis[(1, 0)].abs() - 1.0).abs() < 1e-12);
    let d = dtqm::build_dtqm(3).unwrap();
    let f = d.fiber_frame(&[0.0, 1.0]).unwrap();
    assert_eq!(f.dim(), 3);
    let pb = &d.projection * &f.basis;
    assert!(pb.iter().all(|x| x.abs() < 1e-12));
    let gram = f.basis.transpose() * &f.basis;
    assert!((gram - DMatrix::identity(3, 3)).iter().all(|x| x.abs() < 1e-12));
    // S evaluated through fiber coordinates
    let x = dtqm::classical_solution(3, 0.0, 1.0);
    let xi = f.coords(&x);
    let back = f.point(&xi);
    assert!((d.action.eval(&back) - d.action.eval(&x)).abs() < 1e-12);
}

#[test]
fn dtqm_critical_point() {
    let m = dtqm::build_dtqm(3).unwrap();
    let c = &find_critical_points(&m, &[0.0, 1.0], &[vec![0.0, 0.2, 1.0, 0.1, 0.9]]).unwrap()[0];
    let want = [0.0, 0.5, 1.0, 0.5, 0.5];
    assert!(c.location.iter().zip(want).all(|(a, b)| (a - b).abs() < 1e-12));
    assert!((c.action_value - 0.25).abs() < 1e-12);
    assert!((c.det_abs - 2.0).abs() < 1e-12);
    assert_eq!(c.signature, -1);
    let mut ev = c.eigenvalues.clone();
    ev.sort_by(f64::total_cmp);
    assert!(ev.iter().zip([-2.0, -1.0, 1.0]).all(|(a, b)| (a - b).abs() < 1e-12));
    let (_, det, sig) = hessian_fiber(&m, &c.location, &[0.0, 1.0]).unwrap();
    assert!((det - 2.0).abs() < 1e-12 && sig == -1);
}

#[test]
fn simple_quadratics() {
    let m = FieldModel::new(vec!["x".into()], DMatrix::zeros(0, 1), Polynomial::new(1, [(vec![2], 0.5)]).unwrap(), Polynomial::constant(1, 1.0), Polynomial::constant(0, 1.0), vec![]).unwrap();
    let c = &find_critical_points(&m, &[], &[vec![0.7]]).unwrap()[0];
    assert!(c.location[0].abs() < 1e-12 && c.action_value.abs() < 1e-15);
    assert_eq!(c.signature, 1);
    let sum = Polynomial::new(3, [(vec![2, 0, 0], 0.5), (vec![0, 2, 0], 0.5), (vec![0, 0, 2], 0.5)]).unwrap();
    let m3 = FieldModel::new(vec!["a".into(), "b".into(), "c".into()], DMatrix::zeros(0, 3), sum, Polynomial::constant(3, 1.0), Polynomial::constant(0, 1.0), vec![]).unwrap();
    let c3 = &find_critical_points(&m3, &[], &[vec![0.1, 0.2, 0.3]]).unwrap()[0];
    assert!((c3.det_abs - 1.0).abs() < 1e-12 && c3.signature == 3);
}

#[test]
fn degenerate_hessian_is_an_error() {
    let m = FieldModel::new(vec!["x".into()], DMatrix::zeros(0, 1), Polynomial::new(1, [(vec![4], 1.0)]).unwrap(), Polynomial::constant(1, 1.0), Polynomial::constant(0, 1.0), vec![]).unwrap();
    assert!(matches!(find_critical_points(&m, &[], &[vec![0.0]]), Err(Error::DegenerateHessian { .. })));
}

#[test]
fn linear_change_keeps_density_ratio() {
    let m = FieldModel::new(
        vec!["x".into(), "y".into()],
        DMatrix::zeros(0, 2),
        Polynomial::new(2, [(vec![2, 0], 0.5), (vec![0, 2], -1.5), (vec![1, 1], 0.2), (vec![3, 0], 0.1)]).unwrap(),
        Polynomial::new(2, [(vec![0, 0], 2.0), (vec![1, 0], 1.0)]).unwrap(),
        Polynomial::constant(0, 1.0),
        vec![],
    )
    .unwrap();
    let c = &find_critical_points(&m, &[], &[vec![0.0, 0.0]]).unwrap()[0];
    let ratio = |m: &FieldModel, c: &statphase::critical::CriticalPoint| m.density.eval(&c.location) / c.det_abs.sqrt();
    let f = PolynomialMap::new(2, vec![Polynomial::affine(0.0, &[2.0, 0.5]), Polynomial::affine(0.0, &[-0.3, 0.7])]).unwrap();
    let det = 2.0 * 0.7 + 0.5 * 0.3;
    let pm = m.pullback(&f, det).unwrap();
    let cp = &find_critical_points(&pm, &[], &[vec![0.0, 0.0]]).unwrap()[0];
    assert!((cp.det_abs - c.det_abs * det * det).abs() < 1e-10 * c.det_abs);
    assert!((ratio(&m, c) - ratio(&pm, cp)).abs() < 1e-10);
    assert!((c.action_value - cp.action_value).abs() < 1e-12);
    assert_eq!(c.signature, cp.signature);
}

#[test]
fn translation_gauge_on_the_plane() {
    let m = FieldModel::new(
        vec!["x".into(), "y".into()],
        DMatrix::zeros(0, 2),
        Polynomial::new(2, [(vec![2, 0], 0.5), (vec![1, 1], -1.0), (vec![0, 2], 0.5)]).unwrap(),
        Polynomial::constant(2, 1.0),
        Polynomial::constant(0, 1.0),
        vec![],
    )
    .unwrap();
    let g = GaugeStructure {
        generators: vec![PolynomialMap::new(2, vec![Polynomial::constant(2, 1.0), Polynomial::constant(2, 1.0)]).unwrap()],
        conditions: PolynomialMap::new(2, vec![Polynomial::affine(0.0, &[1.0, 1.0])]).unwrap(),
        group_volume: 1.0,
        cocycle: None,
    };
    validate_gauge(&m, &g).unwrap();
    let c = &critical_slice_gauge(&m, &g, &[], &[vec![0.3, 0.1]]).unwrap()[0];
    assert!(c.location.iter().all(|x| x.abs() < 1e-12));
    let gd = c.gauge.as_ref().unwrap();
    assert!((gd.ghost_det - 2.0).abs() < 1e-12);
    // cubic reparametrization of the condition
    let g3 = g.reparametrize_conditions(&[(3, 0.3)]);
    let c3 = &critical_slice_gauge(&m, &g3, &[], &[vec![0.3, 0.1]]).unwrap()[0];
    let gd3 = c3.gauge.as_ref().unwrap();
    let r = |d: &statphase::critical::GaugeData| d.ghost_det / d.block_det_abs.sqrt();
    assert!((r(gd) - r(gd3)).abs() < 1e-10);
}

#[test]
fn singular_ghost_is_reported() {
    let m = common::rotation_model();
    let mut g = common::rotation_gauge(1.0);
    // φ = x does not cut the orbit transversally at (1, 0)
    g.conditions = PolynomialMap::new(2, vec![Polynomial::affine(-1.0, &[1.0, 0.0])]).unwrap();
    assert!(matches!(critical_slice_gauge(&m, &g, &[], &[vec![1.0, 0.0]]), Err(Error::SingularGhost(_)) | Err(Error::DegenerateHessian { .. })));
}
