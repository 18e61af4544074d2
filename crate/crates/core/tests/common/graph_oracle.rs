use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use statphase::graphs::{Flavor, FeynmanGraph, WeightData};
use statphase::poly::{DerivativeTensors, Polynomial};
use std::collections::{BTreeMap, BTreeSet};

/// All perfect matchings of `n` leg slots, as lists of pairs.
pub fn matchings(n: usize) -> Vec<Vec<(usize, usize)>> {
    fn go(free: &mut Vec<usize>, cur: &mut Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
        if free.is_empty() {
            out.push(cur.clone());
            return;
        }
        let a = free.remove(0);
        for k in 0..free.len() {
            let b = free.remove(k);
            cur.push((a, b));
            go(free, cur, out);
            cur.pop();
            free.insert(k, b);
        }
        free.insert(0, a);
    }
    let mut out = Vec::new();
    go(&mut (0..n).collect(), &mut Vec::new(), &mut out);
    out
}

pub fn all_perms(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in all_perms(n - 1) {
        for k in 0..n {
            let mut q = p.clone();
            q.insert(k, n - 1);
            out.push(q);
        }
    }
    out
}

/// Smallest flattened adjacency over all relabelings of the action vertices.
pub fn brute_key(m: &[Vec<u32>]) -> Vec<u32> {
    let v = m.len();
    all_perms(v - 1)
        .into_iter()
        .map(|p| {
            let mut full = vec![0];
            full.extend(p.iter().map(|x| x + 1));
            let mut key = Vec::new();
            for i in 0..v {
                for j in 0..v {
                    key.push(m[full[i]][full[j]]);
                }
            }
            key
        })
        .min()
        .unwrap()
}

pub fn double_factorial(n: i64) -> f64 {
    if n <= 0 {
        1.0
    } else {
        n as f64 * double_factorial(n - 2)
    }
}

pub fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Isomorphism classes of plain graphs of the given order, keyed by degree
/// profile (special degree, sorted action degrees).
pub fn brute_force_plain(order: usize) -> BTreeMap<(u32, Vec<u32>), BTreeSet<Vec<u32>>> {
    let mut out: BTreeMap<(u32, Vec<u32>), BTreeSet<Vec<u32>>> = BTreeMap::new();
    for ma in 0..=2 * order {
        let legs = 2 * (ma + order) as u32;
        // every tuple of action degrees, keep the sorted ones
        let mut tuples = vec![vec![]];
        for _ in 0..ma {
            tuples = tuples.into_iter().flat_map(|t: Vec<u32>| (3..=legs).map(move |d| [t.clone(), vec![d]].concat())).collect();
        }
        for ad in tuples.into_iter().filter(|t| t.windows(2).all(|w| w[0] >= w[1])) {
            let used: u32 = ad.iter().sum();
            if used > legs {
                continue;
            }
            let mut deg = vec![legs - used];
            deg.extend(&ad);
            let owner: Vec<usize> = deg.iter().enumerate().flat_map(|(v, &d)| std::iter::repeat(v).take(d as usize)).collect();
            let classes = out.entry((legs - used, ad.clone())).or_default();
            for mt in matchings(legs as usize) {
                let mut m = vec![vec![0u32; deg.len()]; deg.len()];
                for (a, b) in mt {
                    let (x, y) = (owner[a], owner[b]);
                    if x == y {
                        m[x][x] += 1;
                    } else {
                        m[x][y] += 1;
                        m[y][x] += 1;
                    }
                }
                classes.insert(brute_key(&m));
            }
        }
    }
    out
}

pub fn profile(g: &FeynmanGraph) -> (u32, Vec<u32>) {
    let mut ad: Vec<u32> = (1..g.n_vertices()).map(|v| g.bos_degree(v)).collect();
    ad.sort_unstable_by(|a, b| b.cmp(a));
    (g.bos_degree(0), ad)
}

pub fn g(flavors: Vec<Flavor>, mult: Vec<Vec<u32>>, next: Vec<Option<usize>>) -> FeynmanGraph {
    FeynmanGraph::new(flavors, mult, next).unwrap()
}

pub fn theta() -> FeynmanGraph {
    g(vec![Flavor::Special, Flavor::Action, Flavor::Action], vec![vec![0, 0, 0], vec![0, 0, 3], vec![0, 3, 0]], vec![None; 3])
}

pub fn dumbbell() -> FeynmanGraph {
    g(vec![Flavor::Special, Flavor::Action, Flavor::Action], vec![vec![0, 0, 0], vec![0, 1, 1], vec![0, 1, 1]], vec![None; 3])
}

pub fn random_poly(rng: &mut ChaCha8Rng, arity: usize, degree: u32) -> Polynomial {
    let mut terms = Vec::new();
    fn exps(arity: usize, left: u32) -> Vec<Vec<u32>> {
        if arity == 0 {
            return vec![vec![]];
        }
        (0..=left).flat_map(|e| exps(arity - 1, left - e).into_iter().map(move |mut t| {
            t.insert(0, e);
            t
        })).collect()
    }
    for e in exps(arity, degree) {
        terms.push((e, rng.gen_range(-1.0..1.0)));
    }
    Polynomial::new(arity, terms).unwrap()
}

pub fn random_data(rng: &mut ChaCha8Rng, n: usize, n_ghost: usize) -> WeightData {
    let at = vec![0.0; n];
    let action = random_poly(rng, n, 6).taylor_at(&at, 6).unwrap();
    let special = random_poly(rng, n, 6).taylor_at(&at, 6).unwrap();
    let ghost: Vec<Vec<DerivativeTensors>> = (0..n_ghost).map(|_| (0..n_ghost).map(|_| random_poly(rng, n, 4).taylor_at(&at, 4).unwrap()).collect()).collect();
    let p = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let boson_prop = &p + p.transpose();
    let fermion_prop = if n_ghost > 0 { Some(DMatrix::from_fn(n_ghost, n_ghost, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))) } else { None };
    WeightData { action, special, ghost, boson_prop, fermion_prop }
}

/// Sum over independent indices on every half-edge: vertex tensors at their
/// legs, B⁻¹ between the two ends of each bosonic edge, the fermionic
/// propagator from a ghost's outgoing slot to the next ghost's incoming slot.
pub fn naive_weight(gr: &FeynmanGraph, d: &WeightData) -> Complex64 {
    let v = gr.n_vertices();
    let n = d.dim();
    let ng = d.n_ghost();
    // half-edges: (vertex, range)
    let mut ranges = Vec::new();
    let mut bos_slots: Vec<Vec<usize>> = vec![Vec::new(); v];
    let mut bos_pairs = Vec::new();
    for i in 0..v {
        for j in i..v {
            for _ in 0..gr.mult[i][j] {
                let a = ranges.len();
                ranges.push(n);
                let b = ranges.len();
                ranges.push(n);
                bos_slots[i].push(a);
                bos_slots[j].push(b);
                bos_pairs.push((a, b));
            }
        }
    }
    let mut f_in = vec![usize::MAX; v];
    let mut f_out = vec![usize::MAX; v];
    for u in 0..v {
        if gr.flavors[u] == Flavor::Ghost {
            f_in[u] = ranges.len();
            ranges.push(ng);
            f_out[u] = ranges.len();
            ranges.push(ng);
        }
    }
    let total: usize = ranges.iter().product();
    let mut idx = vec![0; ranges.len()];
    let mut sum = Complex64::new(0.0, 0.0);
    for _ in 0..total {
        let mut prod = Complex64::new(1.0, 0.0);
        for u in 0..v {
            let legs: Vec<usize> = bos_slots[u].iter().map(|&s| idx[s]).collect();
            let k = legs.len();
            prod *= match gr.flavors[u] {
                Flavor::Special => Complex64::new(d.special.order(k).unwrap().get(&legs), 0.0),
                Flavor::Action => Complex64::new(d.action.order(k).unwrap().get(&legs), 0.0),
                Flavor::Ghost => Complex64::new(0.0, d.ghost[idx[f_in[u]]][idx[f_out[u]]].order(k).unwrap().get(&legs)),
            };
        }
        for &(a, b) in &bos_pairs {
            prod *= d.boson_prop[(idx[a], idx[b])];
        }
        for u in 0..v {
            if let Some(w) = gr.fermion_next[u] {
                prod *= d.fermion_prop.as_ref().unwrap()[(idx[f_out[u]], idx[f_in[w]])];
            }
        }
        sum += prod;
        for s in (0..idx.len()).rev() {
            idx[s] += 1;
            if idx[s] < ranges[s] {
                break;
            }
            idx[s] = 0;
        }
    }
    sum
}

pub fn legs(gr: &FeynmanGraph) -> usize {
    2 * gr.n_bosonic_edges() + 2 * gr.n_fermionic_edges()
}
