use nalgebra::DMatrix;
use num_complex::Complex64;
use statphase::critical::find_critical_points;
use statphase::model::FieldModel;
use statphase::poly::Polynomial;
use statphase::semiclassical::expand_plain;

fn quartic(g: f64) -> FieldModel {
    FieldModel::new(
        vec!["x".into()],
        DMatrix::zeros(0, 1),
        Polynomial::new(1, [(vec![2], 0.5), (vec![4], g)]).unwrap(),
        Polynomial::constant(1, 1.0),
        Polynomial::constant(0, 1.0),
        vec![],
    )
    .unwrap()
}

#[test]
fn quartic_coefficients_match_gaussian_moments() {
    // a_k = Σ_m (ig)^m/m! ⟨x^{4m}⟩ restricted to h^k, ⟨x^{2j}⟩ = (2j−1)!! (ih)^j
    let g = 0.1;
    let m = quartic(g);
    let c = &find_critical_points(&m, &[], &[vec![0.2]]).unwrap()[0];
    let s = expand_plain(&m, c, 3).unwrap();
    let i = Complex64::new(0.0, 1.0);
    let expect = [Complex64::new(1.0, 0.0), -3.0 * i * g, Complex64::new(-52.5 * g * g, 0.0), 1732.5 * i * g * g * g];
    for (a, e) in s.coefficients.iter().zip(expect) {
        assert!((a - e).norm() < 1e-10 * e.norm().max(1.0), "{a} vs {e}");
    }
}

mod common;

use common::{full_circle, rotation_gauge, rotation_model};
use statphase::critical::critical_slice_gauge;
use statphase::model::{validate_gauge, GaugeStructure};
use statphase::oracle::{fit_slope, integrate_gauge_full, OracleOptions};
use statphase::poly::PolynomialMap;
use statphase::semiclassical::expand_gauge;
use std::f64::consts::{FRAC_PI_4, PI};

#[test]
fn quadratic_terminates() {
    let m = FieldModel::new(
        vec!["x".into()],
        DMatrix::zeros(0, 1),
        Polynomial::new(1, [(vec![2], 0.5)]).unwrap(),
        Polynomial::constant(1, 1.0),
        Polynomial::constant(0, 1.0),
        vec![],
    )
    .unwrap();
    let c = &find_critical_points(&m, &[], &[vec![0.3]]).unwrap()[0];
    let s = expand_plain(&m, c, 3).unwrap();
    assert!(s.coefficients[1..].iter().all(|a| a.norm() < 1e-14));
    let z = s.evaluate(0.1);
    let want = Complex64::from_polar((0.2 * PI).sqrt(), FRAC_PI_4);
    assert!((z - want).norm() < 1e-14);
}

#[test]
fn mixed_vertex_orders_match_moments() {
    // S(1 + ξ) for (x² − 1)²/4 is ξ² + ξ³ + ξ⁴/4; with density x the reduced
    // integral over u = x² is Gaussian, so every correction vanishes
    let m = FieldModel::new(
        vec!["x".into()],
        DMatrix::zeros(0, 1),
        Polynomial::new(1, [(vec![4], 0.25), (vec![2], -0.5), (vec![0], 0.25)]).unwrap(),
        Polynomial::var(1, 0),
        Polynomial::constant(0, 1.0),
        vec![],
    )
    .unwrap();
    let c = &find_critical_points(&m, &[], &[vec![0.9]]).unwrap()[0];
    let s = expand_plain(&m, c, 3).unwrap();
    for a in &s.coefficients[1..] {
        assert!(a.norm() < 1e-8, "{a}");
    }
    // constant density: a₁ = 3i/4, a₂ = −105/32, a₃ = −3465i/128
    let m1 = FieldModel { density: Polynomial::constant(1, 1.0), ..m };
    let s = expand_plain(&m1, c, 3).unwrap();
    let i = Complex64::new(0.0, 1.0);
    let want = [0.75 * i, Complex64::new(-105.0 / 32.0, 0.0), -3465.0 / 128.0 * i];
    for (a, w) in s.coefficients[1..].iter().zip(want) {
        assert!((a - w).norm() < 1e-9 * w.norm(), "{a} vs {w}");
    }
}

#[test]
fn rotation_model_gauge_data() {
    let m = rotation_model();
    let g = rotation_gauge(full_circle());
    validate_gauge(&m, &g).unwrap();
    let c = &critical_slice_gauge(&m, &g, &[], &[vec![0.9, 0.05]]).unwrap()[0];
    assert!((c.location[0] - 1.0).abs() < 1e-10 && c.location[1].abs() < 1e-10);
    assert!(c.action_value.abs() < 1e-12);
    let gd = c.gauge.as_ref().unwrap();
    assert!((gd.ghost_det - 1.0).abs() < 1e-9);
    assert!((gd.block_det_abs - 2.0).abs() < 1e-9);
    assert_eq!(gd.block_signature, 1);
}

#[test]
fn rotation_leading_term() {
    // |G| (2πh)^{1/2} |det B|^{−1/2} det L e^{iπ/4 sign B}, v(c) = 1
    let m = rotation_model();
    let g = rotation_gauge(full_circle());
    let c = &critical_slice_gauge(&m, &g, &[], &[vec![1.0, 0.0]]).unwrap()[0];
    let s = expand_gauge(&m, &g, c, 0).unwrap();
    for h in [0.3, 0.07] {
        let want = Complex64::from_polar(2.0 * PI * (2.0 * PI * h).sqrt() / 2f64.sqrt(), FRAC_PI_4);
        assert!((s.evaluate(h) - want).norm() < 1e-9 * want.norm());
    }
}

#[test]
fn rotation_series_against_full_integral() {
    // exact value π ∫ u² exp(i(u − 1)²/4h) du: the series is 1 + 2ih
    let m = rotation_model();
    let g = rotation_gauge(full_circle());
    let c = &critical_slice_gauge(&m, &g, &[], &[vec![1.0, 0.0]]).unwrap()[0];
    let opts = OracleOptions::new(1e-7);
    let hs = [0.2, 0.1, 0.05, 0.025];
    let oracle: Vec<Complex64> = hs.iter().map(|&h| integrate_gauge_full(&m, &g, &[], h, &opts).unwrap().value).collect();
    let s = expand_gauge(&m, &g, c, 2).unwrap();
    let i = Complex64::new(0.0, 1.0);
    assert!((s.coefficients[1] - 2.0 * i).norm() < 1e-9);
    assert!(s.coefficients[2].norm() < 1e-9);
    for (k, min_slope) in [(0, 1.0), (1, 2.0)] {
        let gaps: Vec<f64> = hs.iter().zip(&oracle).map(|(&h, o)| (s.evaluate_to(h, k) - o).norm() / o.norm()).collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
        let (slope, _) = fit_slope(&hs, &gaps);
        assert!(slope >= min_slope, "K={k} slope {slope}");
    }
}

fn cubic_condition(g: &GaugeStructure) -> GaugeStructure {
    g.reparametrize_conditions(&[(3, 0.3)])
}

#[test]
fn gauge_condition_independence() {
    let m = rotation_model();
    let g = rotation_gauge(full_circle());
    let g3 = cubic_condition(&g);
    let c = &critical_slice_gauge(&m, &g, &[], &[vec![1.0, 0.0]]).unwrap()[0];
    let c3 = &critical_slice_gauge(&m, &g3, &[], &[vec![1.0, 0.0]]).unwrap()[0];
    let ratio = |c: &statphase::critical::CriticalPoint| {
        let gd = c.gauge.as_ref().unwrap();
        gd.ghost_det / gd.block_det_abs.sqrt()
    };
    assert!((ratio(c) - ratio(c3)).abs() < 1e-10);
    let s = expand_gauge(&m, &g, c, 2).unwrap();
    let s3 = expand_gauge(&m, &g3, c3, 2).unwrap();
    for (a, b) in s.coefficients.iter().zip(&s3.coefficients) {
        assert!((a - b).norm() < 1e-8, "{a} vs {b}");
    }
}

#[test]
fn linear_gauge_on_quadratic_terminates() {
    // S = (y − x)²/2 is invariant under the diagonal shift, φ = x
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
        conditions: PolynomialMap::new(2, vec![Polynomial::var(2, 0)]).unwrap(),
        group_volume: 1.0,
        cocycle: None,
    };
    validate_gauge(&m, &g).unwrap();
    let c = &critical_slice_gauge(&m, &g, &[], &[vec![0.1, 0.2]]).unwrap()[0];
    let s = expand_gauge(&m, &g, c, 2).unwrap();
    assert!(s.coefficients[1..].iter().all(|a| a.norm() < 1e-12));
}

fn two_dim_anharmonic() -> FieldModel {
    FieldModel::new(
        vec!["x".into(), "y".into()],
        DMatrix::zeros(0, 2),
        Polynomial::new(2, [(vec![2, 0], 0.5), (vec![0, 2], -1.0), (vec![3, 0], 0.3), (vec![1, 2], 0.2), (vec![0, 4], 0.1), (vec![2, 2], 0.05)]).unwrap(),
        Polynomial::new(2, [(vec![0, 0], 1.0), (vec![1, 0], 0.5), (vec![0, 1], -0.3), (vec![1, 1], 1.0)]).unwrap(),
        Polynomial::constant(0, 1.0),
        vec![],
    )
    .unwrap()
}

#[test]
fn series_value_is_coordinate_invariant() {
    use rand::{Rng, SeedableRng};
    use statphase::poly::PolynomialMap;
    let m = two_dim_anharmonic();
    let c = &find_critical_points(&m, &[], &[vec![0.01, -0.01]]).unwrap()[0];
    assert!(c.location.iter().all(|v| v.abs() < 1e-12));
    let order = 2;
    let s = expand_plain(&m, c, order).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let mut done = 0;
    while done < 20 {
        // x = A u + quadratic + cubic, fixing the origin
        let mut a = DMatrix::<f64>::from_fn(2, 2, |i, j| if i == j { 1.0 } else { 0.0 } + rng.gen_range(-0.5..0.5));
        if done % 2 == 1 {
            a.swap_rows(0, 1);
        }
        let det = a.determinant();
        if det.abs() < 0.2 {
            continue;
        }
        done += 1;
        let comps = (0..2)
            .map(|i| {
                let mut terms = vec![(vec![1, 0], a[(i, 0)]), (vec![0, 1], a[(i, 1)])];
                for e in [[2, 0], [1, 1], [0, 2], [3, 0], [1, 2]] {
                    terms.push((e.to_vec(), rng.gen_range(-0.3..0.3)));
                }
                Polynomial::new(2, terms).unwrap()
            })
            .collect();
        let f = PolynomialMap::new(2, comps).unwrap();
        let pulled = m.pullback(&f, det).unwrap();
        let cp = &find_critical_points(&pulled, &[], &[vec![0.0, 0.0]]).unwrap()[0];
        let sp = expand_plain(&pulled, cp, order).unwrap();
        for h in [0.1, 0.03] {
            let (z0, z1) = (s.evaluate(h), sp.evaluate(h));
            assert!((z0 - z1).norm() < 1e-8 * z0.norm(), "h={h}: {z0} vs {z1}");
        }
    }
}
