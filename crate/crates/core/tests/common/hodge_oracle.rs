use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use statphase::hodge::builders::Cubical;
use statphase::hodge::{boundary_harmonic, BoundaryConditionPair, CochainComplex};
use statphase::linalg::{col_space, complement_within};

/// A random pair with d_∂(L1⊥) ⊆ L⊥ on a unit-weight complex.
pub fn random_compatible_pair(cx: &CochainComplex, rng: &mut ChaCha8Rng) -> BoundaryConditionPair {
    let bc = cx.boundary_complex().unwrap();
    let nb: Vec<usize> = cx.boundary_cells.iter().map(|c| c.len()).collect();
    let rand_mat = |rng: &mut ChaCha8Rng, r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0));
    let mut l1perp = Vec::new();
    for &n in &nb {
        let k = rng.gen_range(0..=n.min(3));
        l1perp.push(col_space(&rand_mat(rng, n, k)));
    }
    let mut l = Vec::new();
    for i in 0..nb.len() {
        let forced = if i >= 1 && i <= bc.top() { bc.d(i - 1) * &l1perp[i - 1] } else { DMatrix::zeros(nb[i], 0) };
        let k = rng.gen_range(0..=nb[i].min(2));
        let extra = rand_mat(rng, nb[i], k);
        let mut both = DMatrix::zeros(nb[i], forced.ncols() + extra.ncols());
        both.view_mut((0, 0), forced.shape()).copy_from(&forced);
        both.view_mut((0, forced.ncols()), extra.shape()).copy_from(&extra);
        let lperp = col_space(&both);
        l.push(complement_within(&lperp, &DMatrix::identity(nb[i], nb[i])));
    }
    let l1 = l1perp.iter().map(|q| complement_within(q, &DMatrix::identity(q.nrows(), q.nrows()))).collect();
    BoundaryConditionPair { l, l1 }
}

pub fn cycles(cub: &Cubical) -> (DVector<f64>, DVector<f64>) {
    let cx = &cub.complex;
    let bnd = &cx.boundary_cells[1];
    let nb = bnd.len();
    let n = cub.sizes[0] as i64;
    let put = |v: &mut DVector<f64>, axis: usize, p: [i64; 3], s: f64| {
        let e = cub.edge(axis, p).unwrap();
        v[bnd.binary_search(&e).unwrap()] += s;
    };
    let mut meridian = DVector::zeros(nb);
    for t in 0..n {
        put(&mut meridian, 0, [t, 0, 0], 1.0);
        put(&mut meridian, 1, [n, t, 0], 1.0);
        put(&mut meridian, 0, [t, n, 0], -1.0);
        put(&mut meridian, 1, [0, t, 0], -1.0);
    }
    let mut longitude = DVector::zeros(nb);
    for z in 0..cub.sizes[2] as i64 {
        put(&mut longitude, 2, [0, 0, z], 1.0);
    }
    (meridian, longitude)
}

/// Harmonic boundary classes dual to (meridian, longitude).
pub fn dual_harmonics(cub: &Cubical) -> (DMatrix<f64>, DMatrix<f64>) {
    let h = boundary_harmonic(&cub.complex).unwrap();
    assert_eq!(h.ncols(), 2);
    let (m, l) = cycles(cub);
    let p = DMatrix::from_fn(2, 2, |r, c| if r == 0 { m.dot(&h.column(c)) } else { l.dot(&h.column(c)) });
    let g = h * p.try_inverse().unwrap();
    (g.columns(0, 1).into_owned(), g.columns(1, 1).into_owned())
}

/// ∫_∂ α ∧ β from periods: the meridian meets the longitude once, positively.
pub fn intersection_oracle(cub: &Cubical, a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let (m, l) = cycles(cub);
    let per = |v: &DMatrix<f64>, c: &DVector<f64>| c.dot(&v.column(0));
    per(a, &m) * per(b, &l) - per(a, &l) * per(b, &m)
}
