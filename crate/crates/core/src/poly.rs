//! Sparse multivariate polynomials with exact differentiation.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use std::collections::{BTreeMap, HashMap};

#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    arity: usize,
    /// Sorted by exponent vector, no duplicate monomials, no zero coefficients.
    terms: Vec<(Vec<u32>, f64)>,
}

impl Polynomial {
    pub fn new(arity: usize, terms: impl IntoIterator<Item = (Vec<u32>, f64)>) -> Result<Self> {
        let mut acc: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        for (e, c) in terms {
            if e.len() != arity {
                return Err(Error::Arity { expected: arity, got: e.len() });
            }
            *acc.entry(e).or_insert(0.0) += c;
        }
        Ok(Self::from_map(arity, acc))
    }

    fn from_map(arity: usize, acc: BTreeMap<Vec<u32>, f64>) -> Self {
        let terms = acc.into_iter().filter(|(_, c)| *c != 0.0).collect();
        Polynomial { arity, terms }
    }

    pub fn zero(arity: usize) -> Self {
        Polynomial { arity, terms: Vec::new() }
    }

    pub fn constant(arity: usize, c: f64) -> Self {
        Self::from_map(arity, BTreeMap::from([(vec![0; arity], c)]))
    }

    pub fn var(arity: usize, i: usize) -> Self {
        let mut e = vec![0; arity];
        e[i] = 1;
        Polynomial { arity, terms: vec![(e, 1.0)] }
    }

    /// `c0 + Σ coeffs[i] x_i`
    pub fn affine(c0: f64, coeffs: &[f64]) -> Self {
        let n = coeffs.len();
        let mut acc = BTreeMap::new();
        acc.insert(vec![0; n], c0);
        for (i, &c) in coeffs.iter().enumerate() {
            let mut e = vec![0; n];
            e[i] = 1;
            acc.insert(e, c);
        }
        Self::from_map(n, acc)
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn terms(&self) -> &[(Vec<u32>, f64)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|(e, _)| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.iter().fold(0.0, |m, (_, c)| m.max(c.abs()))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.arity);
        let mut s = 0.0;
        for (e, c) in &self.terms {
            let mut t = *c;
            for (xi, &k) in x.iter().zip(e) {
                if k > 0 {
                    t *= xi.powi(k as i32);
                }
            }
            s += t;
        }
        s
    }

    pub fn check_arity(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.arity {
            return Err(Error::Arity { expected: self.arity, got: x.len() });
        }
        Ok(())
    }

    pub fn deriv(&self, i: usize) -> Self {
        let mut acc = BTreeMap::new();
        for (e, c) in &self.terms {
            if e[i] > 0 {
                let mut f = e.clone();
                f[i] -= 1;
                *acc.entry(f).or_insert(0.0) += c * e[i] as f64;
            }
        }
        Self::from_map(self.arity, acc)
    }

    pub fn gradient(&self) -> Vec<Polynomial> {
        (0..self.arity).map(|i| self.deriv(i)).collect()
    }

    pub fn add(&self, o: &Self) -> Self {
        assert_eq!(self.arity, o.arity, "polynomial arity mismatch");
        let mut acc: BTreeMap<Vec<u32>, f64> = self.terms.iter().cloned().collect();
        for (e, c) in &o.terms {
            *acc.entry(e.clone()).or_insert(0.0) += c;
        }
        Self::from_map(self.arity, acc)
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_map(self.arity, self.terms.iter().map(|(e, c)| (e.clone(), c * s)).collect())
    }

    pub fn mul(&self, o: &Self) -> Self {
        assert_eq!(self.arity, o.arity, "polynomial arity mismatch");
        let mut acc: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        for (e1, c1) in &self.terms {
            for (e2, c2) in &o.terms {
                let e: Vec<u32> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                *acc.entry(e).or_insert(0.0) += c1 * c2;
            }
        }
        Self::from_map(self.arity, acc)
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut r = Self::constant(self.arity, 1.0);
        for _ in 0..k {
            r = r.mul(self);
        }
        r
    }

    /// Substitute `x_i = subs[i](u)`; the result has the arity of the substitutes.
    pub fn compose(&self, subs: &[Polynomial]) -> Result<Self> {
        if subs.len() != self.arity {
            return Err(Error::Arity { expected: self.arity, got: subs.len() });
        }
        let m = subs.first().map(|p| p.arity).unwrap_or(0);
        if subs.iter().any(|p| p.arity != m) {
            return Err(Error::Dimension("substitutes have differing arity".into()));
        }
        let mut powers: Vec<Vec<Polynomial>> = subs.iter().map(|p| vec![Self::constant(m, 1.0), p.clone()]).collect();
        let mut out = Self::zero(m);
        for (e, c) in &self.terms {
            let mut t = Self::constant(m, *c);
            for (i, &k) in e.iter().enumerate() {
                let k = k as usize;
                while powers[i].len() <= k {
                    let next = powers[i].last().unwrap().mul(&subs[i]);
                    powers[i].push(next);
                }
                if k > 0 {
                    t = t.mul(&powers[i][k]);
                }
            }
            out = out.add(&t);
        }
        Ok(out)
    }

    /// Pull back along `x = origin + M u` where M is arity × d.
    pub fn compose_affine(&self, origin: &[f64], m: &DMatrix<f64>) -> Result<Self> {
        if origin.len() != self.arity || m.nrows() != self.arity {
            return Err(Error::Arity { expected: self.arity, got: origin.len() });
        }
        let subs: Vec<Polynomial> = (0..self.arity)
            .map(|i| {
                let row: Vec<f64> = (0..m.ncols()).map(|j| m[(i, j)]).collect();
                Polynomial::affine(origin[i], &row)
            })
            .collect();
        if m.ncols() == 0 {
            return Ok(Self::constant(0, self.eval(origin)));
        }
        self.compose(&subs)
    }

    /// Relabel variables into a larger space: variable i becomes `map[i]`.
    pub fn embed(&self, new_arity: usize, map: &[usize]) -> Self {
        let mut acc = BTreeMap::new();
        for (e, c) in &self.terms {
            let mut f = vec![0; new_arity];
            for (i, &k) in e.iter().enumerate() {
                f[map[i]] += k;
            }
            *acc.entry(f).or_insert(0.0) += c;
        }
        Self::from_map(new_arity, acc)
    }

    /// All symmetric derivative tensors of orders `0..=max_order` at `point`.
    pub fn taylor_at(&self, point: &[f64], max_order: usize) -> Result<DerivativeTensors> {
        self.check_arity(point)?;
        let n = self.arity;
        let mut memo: HashMap<Vec<u32>, f64> = HashMap::new();
        let mut tensors = Vec::with_capacity(max_order + 1);
        for k in 0..=max_order {
            let size = n.pow(k as u32);
            let mut data = vec![0.0; size];
            let mut idx = vec![0usize; k];
            for (flat, slot) in data.iter_mut().enumerate() {
                let mut r = flat;
                for j in (0..k).rev() {
                    idx[j] = r % n;
                    r /= n;
                }
                let mut alpha = vec![0u32; n];
                for &j in &idx {
                    alpha[j] += 1;
                }
                *slot = *memo.entry(alpha.clone()).or_insert_with(|| self.partial_at(&alpha, point));
            }
            tensors.push(Tensor { dim: n, order: k, data });
        }
        Ok(DerivativeTensors(tensors))
    }

    fn partial_at(&self, alpha: &[u32], x: &[f64]) -> f64 {
        let mut s = 0.0;
        'terms: for (e, c) in &self.terms {
            let mut t = *c;
            for j in 0..self.arity {
                if e[j] < alpha[j] {
                    continue 'terms;
                }
                for r in 0..alpha[j] {
                    t *= (e[j] - r) as f64;
                }
                let rest = e[j] - alpha[j];
                if rest > 0 {
                    t *= x[j].powi(rest as i32);
                }
            }
            s += t;
        }
        s
    }

    pub fn to_text(&self, names: &[String]) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let mut parts = Vec::new();
        for (e, c) in &self.terms {
            let mut mono = Vec::new();
            for (i, &k) in e.iter().enumerate() {
                let name = names.get(i).cloned().unwrap_or_else(|| format!("x{i}"));
                match k {
                    0 => {}
                    1 => mono.push(name),
                    _ => mono.push(format!("{name}^{k}")),
                }
            }
            if mono.is_empty() {
                parts.push(format!("{c}"));
            } else {
                parts.push(format!("{c}*{}", mono.join("*")));
            }
        }
        parts.join(" + ")
    }
}

/// Dense row-major tensor of shape dim^order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dim: usize,
    pub order: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn get(&self, idx: &[usize]) -> f64 {
        let mut f = 0;
        for &i in idx {
            f = f * self.dim + i;
        }
        self.data[f]
    }

    pub fn as_matrix(&self) -> DMatrix<f64> {
        assert_eq!(self.order, 2);
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeTensors(pub Vec<Tensor>);

impl DerivativeTensors {
    pub fn order(&self, k: usize) -> Option<&Tensor> {
        self.0.get(k)
    }

    pub fn max_order(&self) -> usize {
        self.0.len().saturating_sub(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialMap {
    pub arity: usize,
    pub components: Vec<Polynomial>,
}

impl PolynomialMap {
    pub fn new(arity: usize, components: Vec<Polynomial>) -> Result<Self> {
        if let Some(p) = components.iter().find(|p| p.arity() != arity) {
            return Err(Error::Arity { expected: arity, got: p.arity() });
        }
        Ok(PolynomialMap { arity, components })
    }

    pub fn identity(n: usize) -> Self {
        PolynomialMap { arity: n, components: (0..n).map(|i| Polynomial::var(n, i)).collect() }
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.components.iter().map(|p| p.eval(x)).collect()
    }

    pub fn jacobian(&self) -> Vec<Vec<Polynomial>> {
        self.components.iter().map(|p| p.gradient()).collect()
    }

    pub fn jacobian_at(&self, x: &[f64]) -> DMatrix<f64> {
        let jac = self.jacobian();
        DMatrix::from_fn(self.len(), self.arity, |i, j| jac[i][j].eval(x))
    }

    pub fn compose(&self, subs: &[Polynomial]) -> Result<Self> {
        let comps = self.components.iter().map(|p| p.compose(subs)).collect::<Result<Vec<_>>>()?;
        let arity = subs.first().map(|p| p.arity()).unwrap_or(0);
        Ok(PolynomialMap { arity, components: comps })
    }
}

/// Determinant of a square matrix of polynomials (cofactor expansion).
pub fn poly_det(m: &[Vec<Polynomial>], arity: usize) -> Polynomial {
    let n = m.len();
    match n {
        0 => Polynomial::constant(arity, 1.0),
        1 => m[0][0].clone(),
        _ => {
            let mut acc = Polynomial::zero(arity);
            for j in 0..n {
                let minor: Vec<Vec<Polynomial>> = m[1..]
                    .iter()
                    .map(|row| row.iter().enumerate().filter(|(c, _)| *c != j).map(|(_, p)| p.clone()).collect())
                    .collect();
                let term = m[0][j].mul(&poly_det(&minor, arity));
                acc = if j % 2 == 0 { acc.add(&term) } else { acc.sub(&term) };
            }
            acc
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_taylor() {
        let f = Polynomial::new(1, [(vec![3], 1.0)]).unwrap();
        let t = f.taylor_at(&[1.0], 3).unwrap();
        let vals: Vec<f64> = t.0.iter().map(|t| t.data[0]).collect();
        assert_eq!(vals, vec![1.0, 3.0, 6.0, 6.0]);
    }

    #[test]
    fn x2y_taylor() {
        let f = Polynomial::new(2, [(vec![2, 1], 1.0)]).unwrap();
        let t = f.taylor_at(&[1.0, 2.0], 2).unwrap();
        assert_eq!(t.0[0].data, vec![2.0]);
        assert_eq!(t.0[1].data, vec![4.0, 1.0]);
        assert_eq!(t.0[2].data, vec![4.0, 2.0, 2.0, 0.0]);
    }

    #[test]
    fn canonicalization_merges_and_drops() {
        let f = Polynomial::new(2, [(vec![1, 0], 2.0), (vec![1, 0], -2.0), (vec![0, 1], 1.0), (vec![0, 1], 1.0)]).unwrap();
        assert_eq!(f.terms(), &[(vec![0, 1], 2.0)]);
    }

    #[test]
    fn compose_square() {
        // (x+1)^2 with x = u - 1 gives u^2
        let f = Polynomial::new(1, [(vec![2], 1.0), (vec![1], 2.0), (vec![0], 1.0)]).unwrap();
        let g = f.compose(&[Polynomial::affine(-1.0, &[1.0])]).unwrap();
        assert_eq!(g.terms(), &[(vec![2], 1.0)]);
    }

    #[test]
    fn det_of_polynomial_matrix() {
        let x = Polynomial::var(2, 0);
        let y = Polynomial::var(2, 1);
        let one = Polynomial::constant(2, 1.0);
        let d = poly_det(&[vec![x.clone(), y.clone()], vec![one, x.clone()]], 2);
        assert_eq!(d, x.mul(&x).sub(&y));
    }
}
