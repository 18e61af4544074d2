use nalgebra::DMatrix;
use proptest::prelude::*;
use statphase::critical::find_critical_points;
use statphase::dtqm::{build_dtqm, classical_solution, exact_propagator};
use statphase::gluing::{fiber_product, Shared};
use statphase::hodge::{builders, hodge_split, laplacian_spectrum, Bc, BoundaryConditionPair};
use statphase::linalg;
use statphase::model::FieldModel;
use statphase::par::{self, Exec};
use statphase::poly::Polynomial;
use statphase::semiclassical::expand_plain;

fn poly2() -> impl Strategy<Value = Polynomial> {
    prop::collection::vec(((0u32..4, 0u32..4), -2.0..2.0f64), 1..6).prop_map(|ts| Polynomial::new(2, ts.into_iter().map(|((a, b), c)| (vec![a, b], c))).unwrap())
}

fn point2() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.5..1.5f64, 2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn product_evaluates_pointwise(p in poly2(), q in poly2(), x in point2()) {
        let lhs = p.mul(&q).eval(&x);
        let rhs = p.eval(&x) * q.eval(&x);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
    }

    #[test]
    fn taylor_tensors_are_symmetric(p in poly2(), x in point2()) {
        let t = p.taylor_at(&x, 3).unwrap();
        let t3 = &t.0[3];
        for i in 0..2 { for j in 0..2 { for k in 0..2 {
            let v = t3.get(&[i, j, k]);
            prop_assert_eq!(v, t3.get(&[j, i, k]));
            prop_assert_eq!(v, t3.get(&[k, j, i]));
        }}}
        prop_assert!((t.0[0].data[0] - p.eval(&x)).abs() <= 1e-12 * (1.0 + p.eval(&x).abs()));
    }

    #[test]
    fn composition_matches_substitution(p in poly2(), f in poly2(), g in poly2(), x in point2()) {
        let lhs = p.compose(&[f.clone(), g.clone()]).unwrap().eval(&x);
        let rhs = p.eval(&[f.eval(&x), g.eval(&x)]);
        prop_assert!((lhs - rhs).abs() <= 1e-8 * (1.0 + rhs.abs()));
    }

    #[test]
    fn quadratic_series_terminates(a in prop::collection::vec(-2.0..2.0f64, 9), n in 1usize..=3) {
        let m = DMatrix::from_fn(n, n, |i, j| a[3 * i + j] + a[3 * j + i] + if i == j { 3.0 * (1.0 - 2.0 * ((i % 2) as f64)) } else { 0.0 });
        prop_assume!(linalg::sym_eigen(&m).0.iter().all(|v| v.abs() > 0.1));
        let mut terms = Vec::new();
        for i in 0..n {
            for j in i..n {
                let mut e = vec![0u32; n];
                e[i] += 1;
                e[j] += 1;
                terms.push((e, if i == j { 0.5 * m[(i, i)] } else { m[(i, j)] }));
            }
        }
        let model = FieldModel::new((0..n).map(|i| format!("x{i}")).collect(), DMatrix::zeros(0, n), Polynomial::new(n, terms).unwrap(), Polynomial::constant(n, 1.0), Polynomial::constant(0, 1.0), vec![]).unwrap();
        let c = &find_critical_points(&model, &[], &[vec![0.1; n]]).unwrap()[0];
        let s = expand_plain(&model, c, 2).unwrap();
        prop_assert!(s.coefficients[1..].iter().all(|x| x.norm() < 1e-12));
    }

    #[test]
    fn dtqm_series_is_exact(n in 2usize..=4, q1 in -1.0..1.0f64, qn in -1.0..1.0f64, h in 0.01..1.0f64) {
        let m = build_dtqm(n).unwrap();
        let c = &find_critical_points(&m, &[q1, qn], &[classical_solution(n, q1, qn)]).unwrap()[0];
        let s = expand_plain(&m, c, 1).unwrap();
        let (a, b) = (s.evaluate(h), exact_propagator(n, h, q1, qn).unwrap());
        prop_assert!((a - b).norm() < 1e-10 * b.norm());
    }

    #[test]
    fn glued_action_is_additive(q1 in -1.0..1.0f64, q3 in -1.0..1.0f64) {
        let m = build_dtqm(2).unwrap();
        let fp = fiber_product(&m, &m, &Shared::new(vec![(1, 0)])).unwrap();
        let g = &fp.model;
        let seed = vec![0.0; g.n_fields()];
        let c = &find_critical_points(g, &[q1, q3], &[fp.join(&seed[..3], &[0.0; 3])]).unwrap()[0];
        let x1 = fp.first_fields(&c.location);
        let x2 = fp.second_fields(&c.location);
        let sum = m.action.eval(&x1) + m.action.eval(&x2);
        prop_assert!((c.action_value - sum).abs() < 1e-12);
        prop_assert!((c.action_value - (q3 - q1).powi(2) / 4.0).abs() < 1e-12);
    }

    #[test]
    fn null_space_is_orthonormal_kernel(a in prop::collection::vec(-1.0..1.0f64, 12), rows in 1usize..=4, r in 1usize..=2) {
        // rank ≤ r product of random factors
        let u = DMatrix::from_fn(rows, r, |i, j| a[(i * 3 + j) % 12]);
        let v = DMatrix::from_fn(r, 4, |i, j| a[(5 + i * 4 + j) % 12]);
        let m = &u * &v;
        let n = linalg::null_space(&m);
        prop_assert!((&m * &n).iter().all(|x| x.abs() < 1e-10));
        let g = n.transpose() * &n;
        prop_assert!((g - DMatrix::identity(n.ncols(), n.ncols())).iter().all(|x| x.abs() < 1e-10));
        prop_assert_eq!(n.ncols() + linalg::rank(&m), 4);
    }

    #[test]
    fn parallel_map_matches_sequential(xs in prop::collection::vec(-1e3..1e3f64, 0..200)) {
        let f = |x: &f64| x.sin() * x;
        let a = par::map(Exec::Parallel, &xs, f);
        let b = par::map(Exec::Sequential, &xs, f);
        prop_assert_eq!(par::tree_sum(&a).to_bits(), par::tree_sum(&b).to_bits());
    }

    #[test]
    fn weighted_cycle_kernel_and_split(w in prop::collection::vec(0.2..5.0f64, 14), form in prop::collection::vec(-1.0..1.0f64, 7)) {
        let cx = builders::cycle(7).unwrap().with_weights(vec![w[..7].to_vec(), w[7..].to_vec()]).unwrap();
        let s0 = laplacian_spectrum(&cx, 0, &Bc::None).unwrap();
        let s1 = laplacian_spectrum(&cx, 1, &Bc::None).unwrap();
        prop_assert_eq!((s0.kernel_dim, s1.kernel_dim), (1, 1));
        // d*d on 0-forms and dd* on 1-forms share nonzero spectrum
        prop_assert!((s0.log_det_prime - s1.log_det_prime).abs() < 1e-9);
        let split = hodge_split(&cx, 1, &form, &BoundaryConditionPair::zero(&cx)).unwrap();
        prop_assert!(split.orthogonality_residual < 1e-10 && split.reassembly_residual < 1e-12);
        prop_assert_eq!(split.harmonic_dim, 1);
    }
}
