//! Feynman graphs: enumeration up to isomorphism, automorphism orders and
//! state-sum weights.
//!
//! A graph is stored as a symmetric multiplicity matrix over its vertices
//! (diagonal entries count self-loops) plus, for ghost vertices, the target of
//! the outgoing fermionic edge. Vertex 0 is the special vertex.

use crate::error::{Error, Result};
use crate::poly::{DerivativeTensors, Tensor};
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::collections::BTreeMap;

pub const PLAIN_CAP: usize = 3;
pub const GAUGE_CAP: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Flavor {
    Special,
    Action,
    Ghost,
}

impl Flavor {
    fn tag(self) -> char {
        match self {
            Flavor::Special => 'S',
            Flavor::Action => 'A',
            Flavor::Ghost => 'G',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeynmanGraph {
    pub flavors: Vec<Flavor>,
    pub mult: Vec<Vec<u32>>,
    pub fermion_next: Vec<Option<usize>>,
    pub aut_order: u64,
    code: Vec<u32>,
}

impl FeynmanGraph {
    /// Build from raw data; canonicalizes and computes the automorphism order.
    pub fn new(flavors: Vec<Flavor>, mult: Vec<Vec<u32>>, fermion_next: Vec<Option<usize>>) -> Result<Self> {
        let v = flavors.len();
        if v == 0 || flavors[0] != Flavor::Special || flavors[1..].contains(&Flavor::Special) {
            return Err(Error::Invalid("exactly one special vertex, at position 0".into()));
        }
        if mult.len() != v || mult.iter().any(|r| r.len() != v) || fermion_next.len() != v {
            return Err(Error::Dimension("graph arrays must be V×V and V".into()));
        }
        for i in 0..v {
            for j in 0..v {
                if mult[i][j] != mult[j][i] {
                    return Err(Error::Invalid("multiplicity matrix must be symmetric".into()));
                }
            }
        }
        let mut incoming = vec![0; v];
        for (i, f) in fermion_next.iter().enumerate() {
            match (flavors[i], f) {
                (Flavor::Ghost, Some(j)) if *j < v && flavors[*j] == Flavor::Ghost => incoming[*j] += 1,
                (Flavor::Ghost, _) => return Err(Error::Invalid("ghost vertex needs an outgoing fermionic edge to a ghost".into())),
                (_, Some(_)) => return Err(Error::Invalid("fermionic edges only between ghost vertices".into())),
                _ => {}
            }
        }
        if (0..v).any(|i| flavors[i] == Flavor::Ghost && incoming[i] != 1) {
            return Err(Error::Invalid("fermionic edges must form disjoint cycles".into()));
        }
        let g = FeynmanGraph { flavors, mult, fermion_next, aut_order: 0, code: Vec::new() };
        for i in 1..v {
            let d = g.bos_degree(i);
            if (g.flavors[i] == Flavor::Action && d < 3) || (g.flavors[i] == Flavor::Ghost && d < 1) {
                return Err(Error::Invalid(format!("vertex {i} has too small valency {d}")));
            }
        }
        Ok(canonicalize(&g, &class_perms(&g)))
    }

    pub fn n_vertices(&self) -> usize {
        self.flavors.len()
    }

    pub fn bos_degree(&self, v: usize) -> u32 {
        (0..self.n_vertices()).map(|w| if w == v { 2 * self.mult[v][v] } else { self.mult[v][w] }).sum()
    }

    pub fn n_action(&self) -> usize {
        self.flavors.iter().filter(|f| **f == Flavor::Action).count()
    }

    pub fn n_ghost(&self) -> usize {
        self.flavors.iter().filter(|f| **f == Flavor::Ghost).count()
    }

    pub fn n_bosonic_edges(&self) -> usize {
        let v = self.n_vertices();
        let mut e = 0;
        for i in 0..v {
            for j in i..v {
                e += self.mult[i][j] as usize;
            }
        }
        e
    }

    pub fn n_fermionic_edges(&self) -> usize {
        self.n_ghost()
    }

    pub fn fermion_loops(&self) -> usize {
        let v = self.n_vertices();
        let mut seen = vec![false; v];
        let mut loops = 0;
        for s in 0..v {
            if self.flavors[s] != Flavor::Ghost || seen[s] {
                continue;
            }
            loops += 1;
            let mut x = s;
            while !seen[x] {
                seen[x] = true;
                x = self.fermion_next[x].unwrap();
            }
        }
        loops
    }

    /// Parity of fermionic crossings; equals the number of fermionic loops mod 2.
    pub fn crossing_parity(&self) -> usize {
        self.fermion_loops() % 2
    }

    /// χ = (non-special vertices) − (all edges).
    pub fn euler_char(&self) -> i64 {
        (self.n_action() + self.n_ghost()) as i64 - (self.n_bosonic_edges() + self.n_fermionic_edges()) as i64
    }

    /// Power of h carried by the graph, −χ.
    pub fn order(&self) -> usize {
        (-self.euler_char()) as usize
    }

    /// Grading with per-element h factors: each bosonic propagator h, each
    /// action vertex 1/h, each fermionic propagator 1/h, each ghost vertex h.
    /// Returns (bosonic part, fermionic part); the fermionic part is always 0.
    pub fn h_power_detailed(&self) -> (i64, i64) {
        let bos = self.n_bosonic_edges() as i64 - self.n_action() as i64;
        let ferm = self.n_ghost() as i64 - self.n_fermionic_edges() as i64;
        (bos, ferm)
    }

    pub fn is_connected(&self) -> bool {
        let v = self.n_vertices();
        let mut seen = vec![false; v];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(x) = stack.pop() {
            for y in 0..v {
                let linked = self.mult[x][y] > 0 || self.fermion_next[x] == Some(y) || self.fermion_next[y] == Some(x);
                if linked && !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn code(&self) -> &[u32] {
        &self.code
    }

    pub fn to_text(&self) -> String {
        let v = self.n_vertices();
        let verts: Vec<String> = (0..v).map(|i| format!("{}:{}{}", i, self.flavors[i].tag(), self.bos_degree(i))).collect();
        let mut edges = Vec::new();
        for i in 0..v {
            for j in i..v {
                if self.mult[i][j] > 0 {
                    edges.push(format!("{i}-{j}x{}", self.mult[i][j]));
                }
            }
        }
        let ferm: Vec<String> = (0..v).filter_map(|i| self.fermion_next[i].map(|j| format!("{i}>{j}"))).collect();
        format!("V[{}] B[{}] F[{}] aut={}", verts.join(" "), edges.join(" "), ferm.join(" "), self.aut_order)
    }
}

/// All vertex permutations preserving flavor and bosonic degree (special fixed).
fn class_perms(g: &FeynmanGraph) -> Vec<Vec<usize>> {
    let v = g.n_vertices();
    let key = |i: usize| (g.flavors[i], g.bos_degree(i));
    let mut classes: BTreeMap<(Flavor, u32), Vec<usize>> = BTreeMap::new();
    for i in 0..v {
        classes.entry(key(i)).or_default().push(i);
    }
    let mut perms = vec![(0..v).collect::<Vec<usize>>()];
    for members in classes.values() {
        if members.len() < 2 {
            continue;
        }
        let sub = permutations(members.len());
        let mut next = Vec::with_capacity(perms.len() * sub.len());
        for p in &perms {
            for s in &sub {
                let mut q = p.clone();
                for (k, &m) in members.iter().enumerate() {
                    q[m] = members[s[k]];
                }
                next.push(q);
            }
        }
        perms = next;
    }
    perms
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Code of the graph relabeled by `p` (old vertex i goes to position p[i]).
fn relabeled_code(g: &FeynmanGraph, p: &[usize]) -> Vec<u32> {
    let v = g.n_vertices();
    let mut inv = vec![0; v];
    for (i, &pi) in p.iter().enumerate() {
        inv[pi] = i;
    }
    let mut code = Vec::with_capacity(v * (v + 3) / 2 + 2 * v);
    for i in 0..v {
        code.push(g.flavors[inv[i]] as u32);
        code.push(g.bos_degree(inv[i]));
    }
    for i in 0..v {
        for j in i..v {
            code.push(g.mult[inv[i]][inv[j]]);
        }
    }
    for i in 0..v {
        code.push(match g.fermion_next[inv[i]] {
            Some(t) => p[t] as u32 + 1,
            None => 0,
        });
    }
    code
}

fn canonicalize(g: &FeynmanGraph, perms: &[Vec<usize>]) -> FeynmanGraph {
    let mut best: Option<(Vec<u32>, &Vec<usize>)> = None;
    let mut count = 0u64;
    for p in perms {
        let c = relabeled_code(g, p);
        match &best {
            Some((b, _)) if c > *b => {}
            Some((b, _)) if c == *b => count += 1,
            _ => {
                best = Some((c, p));
                count = 1;
            }
        }
    }
    let (code, p) = best.unwrap();
    let v = g.n_vertices();
    let mut inv = vec![0; v];
    for (i, &pi) in p.iter().enumerate() {
        inv[pi] = i;
    }
    let flavors: Vec<Flavor> = (0..v).map(|i| g.flavors[inv[i]]).collect();
    let mult: Vec<Vec<u32>> = (0..v).map(|i| (0..v).map(|j| g.mult[inv[i]][inv[j]]).collect()).collect();
    let fermion_next: Vec<Option<usize>> = (0..v).map(|i| g.fermion_next[inv[i]].map(|t| p[t])).collect();
    let mut edge_sym = 1u64;
    for i in 0..v {
        edge_sym *= factorial(mult[i][i] as u64) * (1u64 << mult[i][i]);
        for j in i + 1..v {
            edge_sym *= factorial(mult[i][j] as u64);
        }
    }
    FeynmanGraph { flavors, mult, fermion_next, aut_order: count * edge_sym, code }
}

fn factorial(n: u64) -> u64 {
    (1..=n).product()
}

/// Exhaustive automorphism count (vertex permutations times edge symmetries).
pub fn automorphism_order(g: &FeynmanGraph) -> u64 {
    canonicalize(g, &class_perms(g)).aut_order
}

// ---------- enumeration ----------

fn nonincreasing(count: usize, min: u32, total_max: u32) -> Vec<Vec<u32>> {
    fn rec(count: usize, min: u32, cap: u32, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == count {
            out.push(cur.clone());
            return;
        }
        let remaining = (count - cur.len()) as u32;
        let hi = cap.min(left.saturating_sub(min * (remaining - 1)));
        for d in (min..=hi).rev() {
            cur.push(d);
            rec(count, min, d, left - d, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if (count as u32) * min <= total_max {
        rec(count, min, total_max, total_max, &mut Vec::new(), &mut out);
    }
    out
}

/// All symmetric multiplicity matrices with the prescribed degrees.
fn fill_matrices(deg: &[u32]) -> Vec<Vec<Vec<u32>>> {
    let v = deg.len();
    let mut out = Vec::new();
    let mut m = vec![vec![0u32; v]; v];
    let mut rem = deg.to_vec();
    fn rec(i: usize, j: usize, v: usize, m: &mut Vec<Vec<u32>>, rem: &mut Vec<u32>, out: &mut Vec<Vec<Vec<u32>>>) {
        if i == v {
            out.push(m.clone());
            return;
        }
        if j == v {
            if rem[i] == 0 {
                rec(i + 1, i + 1, v, m, rem, out);
            }
            return;
        }
        if j == i {
            for k in 0..=rem[i] / 2 {
                m[i][i] = k;
                rem[i] -= 2 * k;
                rec(i, j + 1, v, m, rem, out);
                rem[i] += 2 * k;
            }
            m[i][i] = 0;
        } else {
            if j == v - 1 {
                // last column must absorb the remainder of row i
                let k = rem[i];
                if k <= rem[j] {
                    m[i][j] = k;
                    m[j][i] = k;
                    rem[i] -= k;
                    rem[j] -= k;
                    rec(i, j + 1, v, m, rem, out);
                    rem[i] += k;
                    rem[j] += k;
                    m[i][j] = 0;
                    m[j][i] = 0;
                }
                return;
            }
            for k in 0..=rem[i].min(rem[j]) {
                m[i][j] = k;
                m[j][i] = k;
                rem[i] -= k;
                rem[j] -= k;
                rec(i, j + 1, v, m, rem, out);
                rem[i] += k;
                rem[j] += k;
            }
            m[i][j] = 0;
            m[j][i] = 0;
        }
    }
    rec(0, 0, v, &mut m, &mut rem, &mut out);
    out
}

fn enumerate(max_order: usize, gauge: bool) -> Vec<FeynmanGraph> {
    let mut found: BTreeMap<(usize, Vec<u32>), FeynmanGraph> = BTreeMap::new();
    for k in 0..=max_order {
        for ma in 0..=2 * k {
            let mg_max = if gauge { 2 * k - ma } else { 0 };
            for mg in 0..=mg_max {
                let eb = (ma + k) as u32;
                let total = 2 * eb;
                let sigmas: Vec<Vec<usize>> = if mg == 0 { vec![vec![]] } else { permutations(mg) };
                for ad in nonincreasing(ma, 3, total) {
                    let used: u32 = ad.iter().sum();
                    for gd in nonincreasing(mg, 1, total - used) {
                        let used2 = used + gd.iter().sum::<u32>();
                        let l = total - used2;
                        let mut deg = vec![l];
                        deg.extend(&ad);
                        deg.extend(&gd);
                        let mut flavors = vec![Flavor::Special];
                        flavors.extend(std::iter::repeat(Flavor::Action).take(ma));
                        flavors.extend(std::iter::repeat(Flavor::Ghost).take(mg));
                        let mats = fill_matrices(&deg);
                        if mats.is_empty() {
                            continue;
                        }
                        let mut perms: Option<Vec<Vec<usize>>> = None;
                        for sigma in &sigmas {
                            let mut next = vec![None; 1 + ma + mg];
                            for (gi, &s) in sigma.iter().enumerate() {
                                next[1 + ma + gi] = Some(1 + ma + s);
                            }
                            for m in &mats {
                                let raw = FeynmanGraph { flavors: flavors.clone(), mult: m.clone(), fermion_next: next.clone(), aut_order: 0, code: vec![] };
                                let perms = perms.get_or_insert_with(|| class_perms(&raw));
                                let g = canonicalize(&raw, perms);
                                found.entry((k, g.code.clone())).or_insert(g);
                            }
                        }
                    }
                }
            }
        }
    }
    found.into_values().collect()
}

/// All plain graphs (special and action vertices) with order −χ ≤ max_order,
/// sorted by (order, canonical code).
pub fn enumerate_plain(max_order: usize) -> Result<Vec<FeynmanGraph>> {
    if max_order > PLAIN_CAP {
        return Err(Error::CapExceeded { order: max_order, cap: PLAIN_CAP });
    }
    Ok(enumerate(max_order, false))
}

/// As `enumerate_plain` but with ghost vertices joined by oriented fermionic cycles.
pub fn enumerate_gauge(max_order: usize) -> Result<Vec<FeynmanGraph>> {
    if max_order > GAUGE_CAP {
        return Err(Error::CapExceeded { order: max_order, cap: GAUGE_CAP });
    }
    Ok(enumerate(max_order, true))
}

// ---------- weights ----------

/// Vertex tensors and propagators at a critical point.
#[derive(Debug, Clone)]
pub struct WeightData {
    /// Derivatives of the action (or combined action) in the bosonic coordinates.
    pub action: DerivativeTensors,
    /// Derivatives of the density.
    pub special: DerivativeTensors,
    /// ghost[a][b] = derivatives of L_ab; empty for plain models.
    pub ghost: Vec<Vec<DerivativeTensors>>,
    pub boson_prop: DMatrix<f64>,
    /// (−i L_φ(c))⁻¹
    pub fermion_prop: Option<DMatrix<Complex64>>,
}

impl WeightData {
    pub fn dim(&self) -> usize {
        self.boson_prop.nrows()
    }

    pub fn n_ghost(&self) -> usize {
        self.ghost.len()
    }
}

/// A dense complex tensor attached to one vertex, with one slot per leg.
struct VertexTensor {
    dims: Vec<usize>,
    data: Vec<Complex64>,
}

impl VertexTensor {
    fn from_real(t: &Tensor) -> Self {
        VertexTensor { dims: vec![t.dim; t.order], data: t.data.iter().map(|&x| Complex64::new(x, 0.0)).collect() }
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.dims.len()];
        for k in (0..self.dims.len().saturating_sub(1)).rev() {
            s[k] = s[k + 1] * self.dims[k + 1];
        }
        s
    }

    /// Replace slot `k` by Σ_j P[i][j] T[.., j, ..].
    fn contract_slot(&mut self, k: usize, p: &DMatrix<Complex64>) {
        let st = self.strides();
        let dk = self.dims[k];
        let mut out = vec![Complex64::new(0.0, 0.0); self.data.len()];
        for (flat, slot) in out.iter_mut().enumerate() {
            let i = (flat / st[k]) % dk;
            let base = flat - i * st[k];
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..dk {
                acc += p[(i, j)] * self.data[base + j * st[k]];
            }
            *slot = acc;
        }
        self.data = out;
    }
}

fn tensor_of(t: &DerivativeTensors, k: usize) -> Result<&Tensor> {
    t.order(k).ok_or(Error::MissingTensor(k))
}

/// F(Γ) = Σ over states of the product of vertex tensors and propagators.
pub fn graph_weight(g: &FeynmanGraph, data: &WeightData) -> Result<Complex64> {
    let v = g.n_vertices();
    let dim = data.dim();
    if data.boson_prop.ncols() != dim {
        return Err(Error::Dimension("bosonic propagator must be square".into()));
    }
    // legs per vertex: ghost vertices carry [in, out] fermionic slots first
    #[derive(Clone, Copy)]
    enum Leg {
        Bos(usize),
        Ferm(usize),
    }
    let mut legs: Vec<Vec<Leg>> = vec![Vec::new(); v];
    let mut n_edges = 0;
    let mut edge_dims = Vec::new();
    // fermionic edge from u (out) to w (in)
    let mut ferm_edge_of_tail = vec![usize::MAX; v];
    for u in 0..v {
        if let Some(_w) = g.fermion_next[u] {
            ferm_edge_of_tail[u] = n_edges;
            edge_dims.push(data.n_ghost());
            n_edges += 1;
        }
    }
    for u in 0..v {
        if g.flavors[u] == Flavor::Ghost {
            let pred = (0..v).find(|&p| g.fermion_next[p] == Some(u)).unwrap();
            legs[u].push(Leg::Ferm(ferm_edge_of_tail[pred]));
            legs[u].push(Leg::Ferm(ferm_edge_of_tail[u]));
        }
    }
    // bosonic edges: (edge id, tail vertex, head vertex)
    let mut bos_heads: Vec<(usize, usize)> = Vec::new();
    for i in 0..v {
        for j in i..v {
            for _ in 0..g.mult[i][j] {
                let e = n_edges;
                n_edges += 1;
                edge_dims.push(dim);
                legs[i].push(Leg::Bos(e));
                legs[j].push(Leg::Bos(e));
                bos_heads.push((e, j));
            }
        }
    }
    let bprop: DMatrix<Complex64> = data.boson_prop.map(|x| Complex64::new(x, 0.0));
    let mut tensors: Vec<VertexTensor> = Vec::with_capacity(v);
    for u in 0..v {
        let deg = g.bos_degree(u) as usize;
        let mut t = match g.flavors[u] {
            Flavor::Special => VertexTensor::from_real(tensor_of(&data.special, deg)?),
            Flavor::Action => VertexTensor::from_real(tensor_of(&data.action, deg)?),
            Flavor::Ghost => {
                let n = data.n_ghost();
                if n == 0 {
                    return Err(Error::Dimension("ghost vertex without ghost tensors".into()));
                }
                let inner = dim.pow(deg as u32);
                let mut dataz = Vec::with_capacity(n * n * inner);
                for a in 0..n {
                    for b in 0..n {
                        let tt = tensor_of(&data.ghost[a][b], deg)?;
                        dataz.extend(tt.data.iter().map(|&x| Complex64::new(0.0, x)));
                    }
                }
                let mut dims = vec![n, n];
                dims.extend(std::iter::repeat(dim).take(deg));
                VertexTensor { dims, data: dataz }
            }
        };
        // absorb propagators: bosonic edges at their head's last matching slot,
        // fermionic edges at the head's incoming slot
        for (k, leg) in legs[u].iter().enumerate() {
            match *leg {
                Leg::Ferm(_) => {
                    if k == 0 {
                        let p = data.fermion_prop.as_ref().ok_or(Error::Dimension("missing fermionic propagator".into()))?;
                        t.contract_slot(k, p);
                    }
                }
                Leg::Bos(e) => {
                    let is_head = bos_heads.iter().any(|&(id, h)| id == e && h == u);
                    let last = legs[u].iter().rposition(|l| matches!(l, Leg::Bos(x) if *x == e)).unwrap();
                    if is_head && k == last {
                        t.contract_slot(k, &bprop);
                    }
                }
            }
        }
        tensors.push(t);
    }
    let strides: Vec<Vec<usize>> = tensors.iter().map(|t| t.strides()).collect();
    let leg_edges: Vec<Vec<usize>> = legs.iter().map(|ls| ls.iter().map(|l| match l { Leg::Bos(e) | Leg::Ferm(e) => *e }).collect()).collect();
    let total: usize = edge_dims.iter().product();
    let mut idx = vec![0usize; n_edges];
    let mut sum = Complex64::new(0.0, 0.0);
    for _ in 0..total {
        let mut prod = Complex64::new(1.0, 0.0);
        for u in 0..v {
            let mut flat = 0;
            for (k, &e) in leg_edges[u].iter().enumerate() {
                flat += idx[e] * strides[u][k];
            }
            prod *= tensors[u].data[flat];
            if prod == Complex64::new(0.0, 0.0) {
                break;
            }
        }
        sum += prod;
        for e in (0..n_edges).rev() {
            idx[e] += 1;
            if idx[e] < edge_dims[e] {
                break;
            }
            idx[e] = 0;
        }
    }
    Ok(sum)
}

/// Phase and sign multiplying F(Γ)/|Aut Γ| in the coefficient of h^order:
/// i^{E_b + m_S} (−1)^{#fermionic loops}.
pub fn graph_factor(g: &FeynmanGraph) -> Complex64 {
    let p = (g.n_bosonic_edges() + g.n_action()) % 4;
    let ip = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0), Complex64::new(-1.0, 0.0), Complex64::new(0.0, -1.0)][p];
    if g.fermion_loops() % 2 == 1 {
        -ip
    } else {
        ip
    }
}
