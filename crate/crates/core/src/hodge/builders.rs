//! Standard complexes: cycles, paths, simplex boundaries and cubical grids.

use super::CochainComplex;
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// The n-gon: n vertices, n edges, edge j from vertex j to j+1.
pub fn cycle(n: usize) -> Result<CochainComplex> {
    let mut b = DMatrix::<i64>::zeros(n, n);
    for j in 0..n {
        b[((j + 1) % n, j)] += 1;
        b[(j, j)] -= 1;
    }
    CochainComplex::new(vec![n, n], vec![b], None)
}

/// Path with `n` vertices; the two end vertices form the boundary.
pub fn path(n: usize) -> Result<CochainComplex> {
    let mut b = DMatrix::<i64>::zeros(n, n - 1);
    for j in 0..n - 1 {
        b[(j + 1, j)] = 1;
        b[(j, j)] = -1;
    }
    let mut cx = CochainComplex::new(vec![n, n - 1], vec![b], None)?;
    cx.boundary_cells = vec![vec![0, n - 1], vec![]];
    cx.validate()?;
    Ok(cx)
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for v in start..n {
            cur.push(v);
            go(v + 1, n, k, cur, out);
            cur.pop();
        }
    }
    go(0, n, k, &mut cur, &mut out);
    out
}

/// Boundary of the n-simplex: all proper faces of {0..n}, a simplicial (n−1)-sphere.
pub fn simplex_boundary(n: usize) -> Result<CochainComplex> {
    let faces: Vec<Vec<Vec<usize>>> = (1..=n).map(|k| subsets(n + 1, k)).collect();
    let dims = faces.iter().map(|f| f.len()).collect();
    let ops = (1..n)
        .map(|d| {
            let (lo, hi) = (&faces[d - 1], &faces[d]);
            let mut b = DMatrix::<i64>::zeros(lo.len(), hi.len());
            for (c, s) in hi.iter().enumerate() {
                for j in 0..s.len() {
                    let mut f = s.clone();
                    f.remove(j);
                    let r = lo.binary_search(&f).expect("face present");
                    b[(r, c)] = if j % 2 == 0 { 1 } else { -1 };
                }
            }
            b
        })
        .collect();
    CochainComplex::new(dims, ops, None)
}

/// One cell per degree 0..3, all boundary maps zero, with identity stars.
pub fn toy() -> Result<CochainComplex> {
    let mut cx = CochainComplex::new(vec![1; 4], vec![DMatrix::zeros(1, 1); 3], None)?;
    cx.stars = Some(vec![DMatrix::identity(1, 1); 4]);
    cx.validate()?;
    Ok(cx)
}

/// Cubical complex on a 3d grid with `sizes[a]` segments per axis, each axis
/// optionally periodic. Cells are (axis mask, base corner), oriented by
/// ascending axes. Non-periodic faces form the boundary.
#[derive(Debug, Clone)]
pub struct Cubical {
    pub complex: CochainComplex,
    pub sizes: [usize; 3],
    pub periodic: [bool; 3],
    /// Cells in index order, per degree.
    pub cells: Vec<Vec<(u8, [usize; 3])>>,
}

fn masks_of_degree(d: usize) -> Vec<u8> {
    (0u8..8).filter(|m| m.count_ones() as usize == d).collect()
}

fn perm_sign(i: usize) -> f64 {
    // sign of (i, j, k) with j < k the other two axes
    if i == 1 {
        -1.0
    } else {
        1.0
    }
}

impl Cubical {
    fn extent(&self, mask: u8, a: usize) -> usize {
        if mask >> a & 1 == 1 || self.periodic[a] {
            self.sizes[a]
        } else {
            self.sizes[a] + 1
        }
    }

    /// Index of the cell (mask, p) in its degree, wrapping periodic axes.
    /// `None` when p leaves a non-periodic grid.
    pub fn index(&self, mask: u8, p: [i64; 3]) -> Option<usize> {
        let d = mask.count_ones() as usize;
        let mut offset = 0;
        for &m in &masks_of_degree(d) {
            if m == mask {
                break;
            }
            offset += (0..3).map(|a| self.extent(m, a)).product::<usize>();
        }
        let mut lin = 0;
        for a in (0..3).rev() {
            let e = self.extent(mask, a) as i64;
            let q = if self.periodic[a] { p[a].rem_euclid(self.sizes[a] as i64) } else { p[a] };
            if q < 0 || q >= e {
                return None;
            }
            lin = lin * e as usize + q as usize;
        }
        Some(offset + lin)
    }

    pub fn edge(&self, axis: usize, p: [i64; 3]) -> Option<usize> {
        self.index(1 << axis, p)
    }

    /// Meridian and longitude of a solid torus (periodic in z only), as
    /// boundary 1-chains in boundary-cell coordinates.
    pub fn boundary_cycles(&self) -> Result<(DVector<f64>, DVector<f64>)> {
        if self.periodic != [false, false, true] {
            return Err(Error::Complex("boundary cycles need a solid torus".into()));
        }
        let bnd = &self.complex.boundary_cells[1];
        let (nx, ny) = (self.sizes[0] as i64, self.sizes[1] as i64);
        let put = |v: &mut DVector<f64>, axis: usize, p: [i64; 3], s: f64| {
            let e = self.edge(axis, p).expect("edge inside the grid");
            v[bnd.binary_search(&e).expect("edge on the boundary")] += s;
        };
        let mut meridian = DVector::zeros(bnd.len());
        for t in 0..nx {
            put(&mut meridian, 0, [t, 0, 0], 1.0);
            put(&mut meridian, 0, [t, ny, 0], -1.0);
        }
        for t in 0..ny {
            put(&mut meridian, 1, [nx, t, 0], 1.0);
            put(&mut meridian, 1, [0, t, 0], -1.0);
        }
        let mut longitude = DVector::zeros(bnd.len());
        for z in 0..self.sizes[2] as i64 {
            put(&mut longitude, 2, [0, 0, z], 1.0);
        }
        Ok((meridian, longitude))
    }

    /// Harmonic boundary 1-cochains with periods (1, 0) and (0, 1) on
    /// (meridian, longitude).
    pub fn dual_boundary_harmonics(&self) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let (m, l) = self.boundary_cycles()?;
        let h = super::boundary_harmonic(&self.complex)?;
        if h.ncols() != 2 {
            return Err(Error::Complex(format!("expected 2 boundary harmonic classes, got {}", h.ncols())));
        }
        let p = DMatrix::from_fn(2, 2, |r, c| if r == 0 { m.dot(&h.column(c)) } else { l.dot(&h.column(c)) });
        let inv = p.try_inverse().ok_or_else(|| Error::Complex("period matrix is singular".into()))?;
        let g = h * inv;
        Ok((g.columns(0, 1).into_owned(), g.columns(1, 1).into_owned()))
    }

    pub fn new(sizes: [usize; 3], periodic: [bool; 3]) -> Result<Cubical> {
        let mut cub = Cubical {
            complex: CochainComplex::new(vec![1], vec![], None)?,
            sizes,
            periodic,
            cells: Vec::new(),
        };
        for d in 0..=3 {
            let mut list = Vec::new();
            for m in masks_of_degree(d) {
                let e: Vec<usize> = (0..3).map(|a| cub.extent(m, a)).collect();
                for z in 0..e[2] {
                    for y in 0..e[1] {
                        for x in 0..e[0] {
                            list.push((m, [x, y, z]));
                        }
                    }
                }
            }
            cub.cells.push(list);
        }
        let dims: Vec<usize> = cub.cells.iter().map(|c| c.len()).collect();
        let at = |p: [usize; 3]| p.map(|v| v as i64);
        let mut ops = Vec::new();
        for d in 1..=3 {
            let mut b = DMatrix::<i64>::zeros(dims[d - 1], dims[d]);
            for (c, &(m, p)) in cub.cells[d].iter().enumerate() {
                let axes: Vec<usize> = (0..3).filter(|a| m >> a & 1 == 1).collect();
                for (t, &a) in axes.iter().enumerate() {
                    let sign = if t % 2 == 0 { 1 } else { -1 };
                    let fm = m & !(1 << a);
                    let mut up = at(p);
                    up[a] += 1;
                    b[(cub.index(fm, up).expect("face in grid"), c)] += sign;
                    b[(cub.index(fm, at(p)).expect("face in grid"), c)] -= sign;
                }
            }
            ops.push(b);
        }
        let mut cx = CochainComplex::new(dims.clone(), ops, None)?;
        cx.boundary_cells = cub
            .cells
            .iter()
            .map(|list| {
                list.iter()
                    .enumerate()
                    .filter(|(_, (m, p))| {
                        (0..3).any(|a| !periodic[a] && m >> a & 1 == 0 && (p[a] == 0 || p[a] == sizes[a]))
                    })
                    .map(|(i, _)| i)
                    .collect()
            })
            .collect();

        // ∫ W(e) ∧ W(f) over each cube: an edge along i meets the two faces normal to i
        let mut q = DMatrix::zeros(dims[1], dims[2]);
        for &(_, p) in &cub.cells[3] {
            let p = at(p);
            for i in 0..3 {
                let (j, k) = match i {
                    0 => (1, 2),
                    1 => (0, 2),
                    _ => (0, 1),
                };
                for s in 0..2 {
                    let mut fp = p;
                    fp[i] += s;
                    let f = cub.index(7 & !(1 << i), fp).expect("face in grid");
                    for (u, v) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                        let mut ep = p;
                        ep[j] += u;
                        ep[k] += v;
                        let e = cub.edge(i, ep).expect("edge in grid");
                        q[(e, f)] += perm_sign(i) / 8.0;
                    }
                }
            }
        }
        cx.wedge = Some(q);

        // ∫_∂ W(e) ∧ W(e') with the outward-normal-first orientation
        let mut jm = DMatrix::zeros(dims[1], dims[1]);
        for &f in &cx.boundary_cells[2] {
            let (m, p) = cub.cells[2][f];
            let i = (0..3).find(|a| m >> a & 1 == 0).unwrap();
            let (j, k) = match i {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let outward = if p[i] == 0 { -1.0 } else { 1.0 };
            let sigma = outward * perm_sign(i) / 4.0;
            let p = at(p);
            for s in 0..2 {
                for t in 0..2 {
                    let mut pj = p;
                    pj[k] += s;
                    let mut pk = p;
                    pk[j] += t;
                    let ej = cub.edge(j, pj).unwrap();
                    let ek = cub.edge(k, pk).unwrap();
                    jm[(ej, ek)] += sigma;
                    jm[(ek, ej)] -= sigma;
                }
            }
        }
        cx.boundary_pairing = Some(jm);
        if periodic.iter().all(|&p| p) && sizes.iter().all(|&k| k == sizes[0] && k % 2 == 1) {
            cx.stars = Some(cub.reflection_stars());
        }
        cx.validate()?;
        cub.complex = cx;
        Ok(cub)
    }

    /// ∗(A, p) = ε(A) (Ā, p + e_A + h(1,1,1)) with k = 2h + 1: Poincaré duality
    /// followed by the half-period translation, which carries the dual grid onto
    /// the primal one when every side is odd.
    fn reflection_stars(&self) -> Vec<DMatrix<f64>> {
        let dims: Vec<usize> = self.cells.iter().map(|c| c.len()).collect();
        (0..=3)
            .map(|d| {
                let mut s = DMatrix::zeros(dims[3 - d], dims[d]);
                for (c, &(m, p)) in self.cells[d].iter().enumerate() {
                    let dual = 7 & !m;
                    let h = (self.sizes[0] / 2) as i64;
                    let q: [i64; 3] = std::array::from_fn(|a| p[a] as i64 + (m as i64 >> a & 1) + h);
                    let r = self.index(dual, q).unwrap();
                    s[(r, c)] = star_sign(m);
                }
                s
            })
            .collect()
    }
}

/// Sign of the shuffle (A, Ā) of the axes.
fn star_sign(mask: u8) -> f64 {
    let a: Vec<u8> = (0..3).filter(|x| mask >> x & 1 == 1).chain((0..3).filter(|x| mask >> x & 1 == 0)).collect();
    let inversions = (0..3).flat_map(|i| (i + 1..3).map(move |j| (i, j))).filter(|&(i, j)| a[i] > a[j]).count();
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// k × k × k periodic cubical grid with unit weights and reflection stars.
pub fn torus3(k: usize) -> Result<Cubical> {
    Cubical::new([k, k, k], [true; 3])
}

/// n × n square cross-section, periodic with `nz` segments along z.
pub fn solid_torus(n: usize, nz: usize) -> Result<Cubical> {
    Cubical::new([n, n, nz], [false, false, true])
}
