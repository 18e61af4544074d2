//! Writes the sample models and complexes used by the CLI examples.
//!
//!     cargo run -p statphase --example make_data -- data

use nalgebra::DMatrix;
use statphase::dtqm::build_dtqm_windowed;
use statphase::hodge::builders::{cycle, path, solid_torus, torus3};
use statphase::hodge::{CochainComplex, ComplexDocument};
use statphase::model::{model_to_json, FieldModel, GaugeStructure, Window};
use statphase::poly::{Polynomial, PolynomialMap};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

fn mexican_hat(s: f64) -> Polynomial {
    Polynomial::new(2, [(vec![4, 0], s), (vec![0, 4], s), (vec![2, 2], 2.0 * s), (vec![2, 0], -2.0 * s), (vec![0, 2], -2.0 * s), (vec![0, 0], s)]).unwrap()
}

fn quartic() -> FieldModel {
    FieldModel::new(
        vec!["x".into()],
        DMatrix::zeros(0, 1),
        Polynomial::new(1, [(vec![2], 0.5), (vec![4], 0.1)]).unwrap(),
        Polynomial::constant(1, 1.0),
        Polynomial::constant(0, 1.0),
        vec![Window::ball(vec![0.0], 6.0)],
    )
    .unwrap()
}

fn rotation() -> (FieldModel, GaugeStructure) {
    let m = FieldModel::new(
        vec!["x".into(), "y".into()],
        DMatrix::zeros(0, 2),
        mexican_hat(0.25),
        Polynomial::new(2, [(vec![4, 0], 1.0), (vec![0, 4], 1.0), (vec![2, 2], 2.0)]).unwrap(),
        Polynomial::constant(0, 1.0),
        vec![Window::ball(vec![0.0, 0.0], 2.4)],
    )
    .unwrap();
    let g = GaugeStructure {
        generators: vec![PolynomialMap::new(2, vec![Polynomial::var(2, 1).scale(-1.0), Polynomial::var(2, 0)]).unwrap()],
        conditions: PolynomialMap::new(2, vec![Polynomial::var(2, 1)]).unwrap(),
        group_volume: 2.0 * PI,
        cocycle: None,
    };
    (m, g)
}

fn doc(complex: CochainComplex) -> ComplexDocument {
    ComplexDocument { complex, subspaces: BTreeMap::new() }
}

fn main() {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "data".into());
    let dir = Path::new(&dir);
    std::fs::create_dir_all(dir).expect("create output directory");
    let write = |name: &str, text: String| {
        std::fs::write(dir.join(name), text + "\n").expect("write file");
    };
    let pretty = |v: serde_json::Value| serde_json::to_string_pretty(&v).unwrap();

    write("dtqm2.json", pretty(model_to_json(&build_dtqm_windowed(2, 0.0, 1.0, 4.0).unwrap(), None)));
    write("dtqm3.json", pretty(model_to_json(&build_dtqm_windowed(3, 0.0, 1.0, 4.0).unwrap(), None)));
    write("quartic.json", pretty(model_to_json(&quartic(), None)));
    let (m, g) = rotation();
    write("rotation.json", pretty(model_to_json(&m, Some(&g))));

    write("cycle8.json", doc(cycle(8).unwrap()).to_json());
    write("path4.json", doc(path(4).unwrap()).to_json());
    write("torus3.json", doc(torus3(3).unwrap().complex).to_json());

    let st = solid_torus(3, 3).unwrap();
    let (mer, lon) = st.dual_boundary_harmonics().unwrap();
    let mut subspaces = BTreeMap::new();
    subspaces.insert("H_plus".to_string(), BTreeMap::from([(1, &lon + &mer * 0.5)]));
    subspaces.insert("H_minus".to_string(), BTreeMap::from([(1, mer)]));
    write("solid_torus.json", ComplexDocument { complex: st.complex, subspaces }.to_json());
}
