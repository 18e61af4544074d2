use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::DMatrix;
use statphase::critical::find_critical_points;
use statphase::model::{FieldModel, Window};
use statphase::oracle::{integrate_fiber, OracleOptions};
use statphase::par::Exec;
use statphase::poly::Polynomial;
use statphase::semiclassical::expand_plain_with;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

/// Three coupled anharmonic oscillators.
fn coupled(n: usize) -> FieldModel {
    let mut terms = Vec::new();
    for i in 0..n {
        let mut e = vec![0u32; n];
        e[i] = 2;
        terms.push((e.clone(), 0.5 + 0.1 * i as f64));
        e[i] = 4;
        terms.push((e.clone(), 0.05));
        e[i] = 3;
        terms.push((e, 0.1));
        let mut c = vec![0u32; n];
        c[i] = 1;
        c[(i + 1) % n] += 2;
        terms.push((c, 0.07));
    }
    FieldModel::new(
        (0..n).map(|i| format!("x{i}")).collect(),
        DMatrix::zeros(0, n),
        Polynomial::new(n, terms).unwrap(),
        Polynomial::new(n, [(vec![0; n], 1.0), (vec![1; n], 0.2)]).unwrap(),
        Polynomial::constant(0, 1.0),
        vec![Window::ball(vec![0.0; n], 3.0)],
    )
    .unwrap()
}

fn graph_sum(c: &mut Criterion) {
    let m = coupled(3);
    let cp = &find_critical_points(&m, &[], &[vec![0.0; 3]]).unwrap()[0];
    // warm the graph cache outside the timing loop
    expand_plain_with(&m, cp, 3, Exec::Sequential).unwrap();
    let mut g = c.benchmark_group("expand order 3");
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| b.iter(|| expand_plain_with(black_box(&m), cp, 3, exec).unwrap()));
    }
    g.finish();
}

fn oracle(c: &mut Criterion) {
    let m = coupled(2);
    let mut g = c.benchmark_group("oracle 2d");
    g.sample_size(10);
    for (name, exec) in MODES {
        let opts = OracleOptions { exec, ..OracleOptions::new(1e-8) };
        g.bench_with_input(BenchmarkId::from_parameter(name), &opts, |b, opts| b.iter(|| integrate_fiber(black_box(&m), &[], 0.1, opts).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, graph_sum, oracle);
criterion_main!(benches);
