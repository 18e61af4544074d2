use nalgebra::DMatrix;
use num_complex::Complex64;
use statphase::critical::find_critical_points;
use statphase::dtqm::{boundary_structure, build_dtqm, classical_solution, euler_lagrange_residual, exact_propagator, fiber_signature};
use statphase::model::{Cocycle, FieldModel};
use statphase::poly::Polynomial;
use statphase::semiclassical::{equivariance_check, expand_plain};
use std::f64::consts::{FRAC_PI_4, PI};

#[test]
fn sizes_and_actions() {
    let m2 = build_dtqm(2).unwrap();
    assert_eq!((m2.n_fields(), m2.n_base(), m2.fiber_dim()), (3, 2, 1));
    // S = p1 (q2 − q1) − p1²/2 at (q1, q2, p1) = (0.3, 1.1, 0.5)
    let want = 0.5 * (1.1 - 0.3) - 0.125;
    assert!((m2.action.eval(&[0.3, 1.1, 0.5]) - want).abs() < 1e-15);
    let m3 = build_dtqm(3).unwrap();
    assert_eq!((m3.n_fields(), m3.fiber_dim()), (5, 3));
    assert!(build_dtqm(1).is_err());
}

#[test]
fn series_equals_closed_form() {
    for n in 2..=5 {
        for (q1, qn) in [(0.0, 1.0), (0.4, -0.7), (0.2, 0.2)] {
            let m = build_dtqm(n).unwrap();
            let c = &find_critical_points(&m, &[q1, qn], &[classical_solution(n, q1, qn)]).unwrap()[0];
            assert!(euler_lagrange_residual(n, &c.location) < 1e-12);
            let s = expand_plain(&m, c, 2).unwrap();
            assert!(s.coefficients[1..].iter().all(|a| a.norm() < 1e-12));
            for h in [1.0, 0.1, 0.01] {
                let (a, b) = (s.evaluate(h), exact_propagator(n, h, q1, qn).unwrap());
                assert!((a - b).norm() < 1e-10 * b.norm(), "n={n}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn worked_example_values() {
    let z = exact_propagator(3, 1.0, 0.0, 1.0).unwrap();
    let want = Complex64::from_polar((2.0 * PI).powf(1.5) / 2f64.sqrt(), 0.25 - FRAC_PI_4);
    assert!((z - want).norm() < 1e-14 * want.norm());
    assert_eq!(fiber_signature(3).unwrap(), -1);
    // equal endpoints leave only the Maslov phase
    let z = exact_propagator(2, 0.3, 0.5, 0.5).unwrap();
    assert!((z.arg() - FRAC_PI_4 * fiber_signature(2).unwrap() as f64).abs() < 1e-14);
    // n = 2: phase (q2 − q1)²/(2h)
    let z = exact_propagator(2, 0.5, 0.0, 0.6).unwrap();
    let z0 = exact_propagator(2, 0.5, 0.0, 0.0).unwrap();
    assert!(((z / z0).arg() - 0.36).abs() < 1e-14);
}

#[test]
fn composition_of_propagators() {
    // ∫ K_2(q1, q) K_3(q, q3) dq over the real line equals K_4(q1, q3):
    // a Fresnel integral in q done in closed form
    let h = 0.3;
    let (q1, q3) = (0.2, 1.1);
    // phases: (q − q1)²/(2h) + (q3 − q)²/(4h) = (3/4h)(q − m)² + (q3 − q1)²/(6h)
    let k2 = |q: f64| exact_propagator(2, h, q1, q).unwrap();
    let k3 = |q: f64| exact_propagator(3, h, q, q3).unwrap();
    let m = (2.0 * q1 + q3) / 3.0;
    let gauss = Complex64::from_polar((PI * h / 0.75).sqrt(), FRAC_PI_4);
    let glued = k2(m) * k3(m) * gauss;
    let direct = exact_propagator(4, h, q1, q3).unwrap();
    assert!((glued - direct).norm() < 1e-12 * direct.norm(), "{glued} vs {direct}");
}

#[test]
fn boundary_symplectic_data() {
    for n in 2..=6 {
        let b = boundary_structure(n).unwrap();
        assert!((b.omega.determinant() - 1.0).abs() < 1e-12);
        assert!(b.restricted_omega() < 1e-12);
    }
    let b5 = boundary_structure(5).unwrap();
    for p in [-1.0, 0.3, 2.0] {
        assert!(b5.contains(&[p, 0.0, p, 4.0 * p]));
    }
    let b2 = boundary_structure(2).unwrap();
    assert!(b2.contains(&[0.7, 0.1, 0.7, 0.8]));
    assert!(!b2.contains(&[0.7, 0.1, 0.7, 0.9]));
}

#[test]
fn translation_equivariance() {
    let m = build_dtqm(3).unwrap();
    // shift every position by γ; momenta fixed
    let mut t = DMatrix::zeros(5, 1);
    for i in 0..3 {
        t[(i, 0)] = 1.0;
    }
    let cocycle = Cocycle { translation: t, phase: Polynomial::zero(3) };
    let seeds = vec![classical_solution(3, 0.0, 1.0)];
    let r = equivariance_check(&m, None, &cocycle, &[0.0, 1.0], &[0.4], &seeds, 2).unwrap();
    assert!(r.pass && r.ratio_residual < 1e-12, "{r:?}");
    let r0 = equivariance_check(&m, None, &cocycle, &[0.0, 1.0], &[0.0], &seeds, 2).unwrap();
    assert!(r0.pass && r0.cocycle_value == 0.0);
}

#[test]
fn linear_cocycle_phase() {
    // S = x²/2 + y²/2 with base x: shifting x by γ changes S by γb + γ²/2
    let m = FieldModel::new(
        vec!["x".into(), "y".into()],
        DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        Polynomial::new(2, [(vec![2, 0], 0.5), (vec![0, 2], 0.5), (vec![0, 4], 0.1)]).unwrap(),
        Polynomial::constant(2, 1.0),
        Polynomial::constant(1, 1.0),
        vec![],
    )
    .unwrap();
    let cocycle = Cocycle {
        translation: DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
        phase: Polynomial::new(2, [(vec![1, 1], 1.0), (vec![0, 2], 0.5)]).unwrap(),
    };
    let r = equivariance_check(&m, None, &cocycle, &[0.3], &[0.5], &[vec![0.3, 0.0]], 2).unwrap();
    assert!(r.pass && r.action_residual < 1e-10 && r.ratio_residual < 1e-10, "{r:?}");
    assert!((r.cocycle_value - (0.15 + 0.125)).abs() < 1e-14);
}
