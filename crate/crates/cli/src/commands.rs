use crate::report::{cnum, list, num, Report, Status};
use crate::ModelArgs;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statphase::critical::{critical_slice_gauge, find_critical_points, CriticalPoint};
use statphase::dtqm::{boundary_structure, build_dtqm, classical_solution, euler_lagrange_residual, exact_propagator};
use statphase::gluing::{verify_gluing, GluingSetup, Shared};
use statphase::hodge::{self, Bc, BoundaryConditionPair, ComplexDocument, Splitting};
use statphase::model::{load_model, FieldModel, GaugeStructure};
use statphase::oracle::{self, OracleOptions, OrderOutcome};
use statphase::semiclassical::{expand_gauge, expand_plain, AsymptoticSeries};

pub enum Failure {
    Module(statphase::Error),
    Input(String),
}

impl From<statphase::Error> for Failure {
    fn from(e: statphase::Error) -> Self {
        Failure::Module(e)
    }
}

type Run = Result<(), Failure>;

fn parse_csv(key: &str, s: &str) -> Result<Vec<f64>, Failure> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|t| t.trim().parse::<f64>().map_err(|_| Failure::Input(format!("--{key}: cannot parse `{t}` as a number")))).collect()
}

fn parse_grid(s: &str) -> Result<Vec<f64>, Failure> {
    let h = parse_csv("h", s)?;
    if h.is_empty() || h.iter().any(|x| !(*x > 0.0)) {
        return Err(Failure::Input("--h: need positive values".into()));
    }
    Ok(h)
}

fn read(rep: &mut Report, label: &str, path: &str) -> Result<String, Failure> {
    let bytes = std::fs::read(path).map_err(|e| Failure::Input(format!("cannot read {path}: {e}")))?;
    rep.input(label, path, &bytes);
    String::from_utf8(bytes).map_err(|_| Failure::Input(format!("{path} is not UTF-8")))
}

struct Loaded {
    model: FieldModel,
    gauge: Option<GaugeStructure>,
}

fn load(rep: &mut Report, label: &str, path: &str) -> Result<Loaded, Failure> {
    let text = read(rep, label, path)?;
    let (model, gauge) = load_model(&text)?;
    Ok(Loaded { model, gauge })
}

fn base_or_zero(key: &str, s: Option<&str>, m: &FieldModel) -> Result<Vec<f64>, Failure> {
    match s {
        Some(s) => parse_csv(key, s),
        None => Ok(vec![0.0; m.n_base()]),
    }
}

fn seed_or_origin(key: &str, s: Option<&str>, m: &FieldModel, b: &[f64]) -> Result<Vec<f64>, Failure> {
    match s {
        Some(s) => parse_csv(key, s),
        None => {
            let frame = m.fiber_frame(b)?;
            Ok(frame.point(&vec![0.0; frame.dim()]))
        }
    }
}

fn critical(l: &Loaded, b: &[f64], seed: Vec<f64>) -> Result<CriticalPoint, Failure> {
    let found = match &l.gauge {
        Some(g) => critical_slice_gauge(&l.model, g, b, &[seed])?,
        None => find_critical_points(&l.model, b, &[seed])?,
    };
    found.into_iter().next().ok_or_else(|| Failure::Input("no critical point found from the seed".into()))
}

fn series(l: &Loaded, c: &CriticalPoint, order: usize) -> Result<AsymptoticSeries, Failure> {
    Ok(match &l.gauge {
        Some(g) => expand_gauge(&l.model, g, c, order)?,
        None => expand_plain(&l.model, c, order)?,
    })
}

fn report_point(rep: &mut Report, c: &CriticalPoint) {
    rep.section("critical point");
    rep.kv("base", list(&c.base));
    rep.kv("location", list(&c.location));
    rep.kv("action", num(c.action_value));
    rep.kv("fiber hessian |det|", num(c.det_abs));
    rep.kv("fiber hessian signature", c.signature);
    if let Some(g) = &c.gauge {
        rep.kv("lagrange multipliers", list(&g.lambda));
        rep.kv("gauge block |det|", num(g.block_det_abs));
    }
}

fn report_series(rep: &mut Report, s: &AsymptoticSeries) {
    rep.section("series");
    rep.kv("h power", num(s.h_power));
    rep.kv("2pi power", num(s.two_pi_power));
    rep.kv("phase", num(s.phase));
    rep.kv("determinant factor", num(s.det_factor));
    rep.kv("group volume", num(s.group_volume));
    for (k, a) in s.coefficients.iter().enumerate() {
        rep.kv(&format!("a{k}"), cnum(*a));
    }
    let last = s.coefficients.iter().rposition(|a| a.norm() > 1e-12 * s.coefficients[0].norm());
    rep.kv("last nonzero order", last.map_or("none".to_string(), |k| k.to_string()));
    rep.section("graphs");
    for g in &s.contributions {
        rep.line(&format!("order {} |Aut| {} term {} graph {}", g.order, g.aut_order, cnum(g.term), g.graph));
    }
}

pub fn expand(rep: &mut Report, m: &ModelArgs, order: usize, h: Option<&str>) -> Run {
    let l = load(rep, "model", &m.model)?;
    let b = base_or_zero("b", m.b.as_deref(), &l.model)?;
    let seed = seed_or_origin("x0", m.x0.as_deref(), &l.model, &b)?;
    rep.kv("order", order);
    rep.kv("gauge fixed", l.gauge.is_some());
    let c = critical(&l, &b, seed)?;
    report_point(rep, &c);
    let s = series(&l, &c, order)?;
    report_series(rep, &s);
    if let Some(h) = h {
        rep.section("values");
        for h in parse_grid(h)? {
            rep.line(&format!("h {} value {}", num(h), cnum(s.evaluate(h))));
        }
    }
    Ok(())
}

pub fn oracle(rep: &mut Report, m: &ModelArgs, h: &str, tol: f64) -> Run {
    let l = load(rep, "model", &m.model)?;
    let b = base_or_zero("b", m.b.as_deref(), &l.model)?;
    rep.kv("base", list(&b));
    rep.kv("tol", num(tol));
    let opts = OracleOptions::new(tol);
    rep.section("integrals");
    for h in parse_grid(h)? {
        let r = oracle::integrate_fiber(&l.model, &b, h, &opts)?;
        rep.line(&format!("h {} value {} error bound {} nodes {}", num(h), cnum(r.value), num(r.error_bound), r.nodes));
        if r.error_bound > tol * r.value.norm().max(tol) * 1e3 {
            rep.fail(Status::Inconclusive, &format!("error bound at h = {h} is loose"));
        }
    }
    Ok(())
}

pub fn order_check(rep: &mut Report, m: &ModelArgs, h: &str, order: usize, tol: f64) -> Run {
    let l = load(rep, "model", &m.model)?;
    let b = base_or_zero("b", m.b.as_deref(), &l.model)?;
    let seed = seed_or_origin("x0", m.x0.as_deref(), &l.model, &b)?;
    let grid = parse_grid(h)?;
    rep.kv("order", order);
    rep.kv("oracle tol", num(tol));
    let c = critical(&l, &b, seed)?;
    let s = series(&l, &c, order)?;
    let r = oracle::order_check(&s, &l.model, &b, &grid, order, tol, Default::default())?;
    rep.section("rows");
    for row in &r.rows {
        rep.line(&format!(
            "h {} series {} oracle {} oracle error {} gap {}",
            num(row.h),
            cnum(row.series),
            cnum(row.oracle),
            num(row.oracle_error),
            num(row.gap)
        ));
    }
    rep.section("outcome");
    let need = order as f64 + 0.5;
    match r.outcome {
        OrderOutcome::Exact => rep.kv("outcome", "exact to oracle precision"),
        OrderOutcome::Slope { slope, residual } => {
            rep.kv("slope", num(slope));
            rep.kv("fit residual", num(residual));
            rep.check(&format!("slope at least {need}"), (need - slope).max(0.0), 0.0);
        }
    }
    Ok(())
}

pub struct GlueArgs {
    pub m1: String,
    pub m2: String,
    pub shared: Option<String>,
    pub b1: Option<String>,
    pub b2: Option<String>,
    pub x1: Option<String>,
    pub x2: Option<String>,
    pub order: usize,
    pub h: Option<String>,
    pub tol: f64,
}

fn parse_shared(s: &str) -> Result<Shared, Failure> {
    let bad = || Failure::Input(format!("--shared: expected pairs i:j, got `{s}`"));
    let mut pairs = Vec::new();
    for t in s.split(',') {
        let (i, j) = t.trim().split_once(':').ok_or_else(bad)?;
        pairs.push((i.parse().map_err(|_| bad())?, j.parse().map_err(|_| bad())?));
    }
    Ok(Shared::new(pairs))
}

pub fn glue(rep: &mut Report, a: &GlueArgs) -> Run {
    let l1 = load(rep, "m1", &a.m1)?;
    let l2 = load(rep, "m2", &a.m2)?;
    if l1.gauge.is_some() || l2.gauge.is_some() {
        return Err(Failure::Input("glue works on models without gauge data".into()));
    }
    let shared = match &a.shared {
        Some(s) => parse_shared(s)?,
        None => {
            if l1.model.n_base() == 0 || l2.model.n_base() == 0 {
                return Err(Failure::Input("both models need a base to glue over".into()));
            }
            Shared::new(vec![(l1.model.n_base() - 1, 0)])
        }
    };
    let b1 = base_or_zero("b1", a.b1.as_deref(), &l1.model)?;
    let b2 = base_or_zero("b2", a.b2.as_deref(), &l2.model)?;
    let s1 = seed_or_origin("x1", a.x1.as_deref(), &l1.model, &b1)?;
    let s2 = seed_or_origin("x2", a.x2.as_deref(), &l2.model, &b2)?;
    let grid = match &a.h {
        Some(h) => parse_grid(h)?,
        None => Vec::new(),
    };
    rep.kv("order", a.order);
    rep.kv("shared", format!("{:?}", shared.pairs));
    let setup = GluingSetup { m1: &l1.model, m2: &l2.model, shared, b1, b2, seeds1: vec![s1], seeds2: vec![s2] };
    let r = verify_gluing(&setup, a.order, &grid, &OracleOptions::new(a.tol))?;
    rep.section("glued series");
    for (k, c) in r.glued.series.coefficients.iter().enumerate() {
        rep.kv(&format!("a{k} glued"), cnum(c * r.glued.series.det_factor));
        rep.kv(&format!("a{k} direct"), cnum(r.direct.coefficients[k] * r.direct.det_factor));
    }
    rep.section("checks");
    for c in &r.checks {
        rep.check(&c.name, c.residual, c.tolerance);
    }
    Ok(())
}

pub fn dtqm_demo(rep: &mut Report, n: usize, b: &str, h: &str, tol: f64) -> Run {
    let b = parse_csv("b", b)?;
    if b.len() != 2 {
        return Err(Failure::Input("--b: need the two endpoints q1,qn".into()));
    }
    let grid = parse_grid(h)?;
    rep.kv("n", n);
    let m = build_dtqm(n)?;
    rep.kv("fields", m.variables.join(", "));
    let x = classical_solution(n, b[0], b[1]);
    let c = find_critical_points(&m, &b, &[x])?.remove(0);
    report_point(rep, &c);
    rep.check("euler-lagrange residual", euler_lagrange_residual(n, &c.location), 1e-12);
    let s = expand_plain(&m, &c, 2)?;
    report_series(rep, &s);
    rep.section("series against closed form");
    for h in grid {
        let (a, e) = (s.evaluate(h), exact_propagator(n, h, b[0], b[1])?);
        rep.line(&format!("h {} series {} exact {}", num(h), cnum(a), cnum(e)));
        rep.check(&format!("relative gap at h = {}", num(h)), (a - e).norm() / e.norm(), tol);
    }
    let bd = boundary_structure(n)?;
    rep.section("boundary");
    rep.kv("omega determinant", num(bd.omega.determinant()));
    rep.check("omega on the lagrangian", bd.restricted_omega(), 1e-12);
    Ok(())
}

fn load_complex(rep: &mut Report, path: &str) -> Result<ComplexDocument, Failure> {
    let text = read(rep, "complex", path)?;
    Ok(hodge::build_complex(&text)?)
}

fn spectra(rep: &mut Report, cx: &hodge::CochainComplex) -> Result<(), Failure> {
    rep.section("spectra");
    rep.kv("dims", format!("{:?}", cx.dims));
    rep.kv("betti", format!("{:?}", cx.betti_numbers()));
    for i in 0..cx.dims.len() {
        let s = hodge::laplacian_spectrum(cx, i, &Bc::None)?;
        rep.line(&format!("degree {i} kernel {} det' {} ambiguous {}", s.kernel_dim, num(s.det_prime), s.ambiguous));
    }
    Ok(())
}

fn subspace_or_zero(doc: &ComplexDocument, name: &str, i: usize) -> DMatrix<f64> {
    doc.subspace(name, i).cloned().unwrap_or_else(|| DMatrix::zeros(doc.complex.boundary_cells[i].len(), 0))
}

pub fn hodge(rep: &mut Report, path: &str, degree: usize, seed: u64, tol: f64) -> Run {
    let doc = load_complex(rep, path)?;
    let cx = &doc.complex;
    if degree >= cx.dims.len() {
        return Err(Failure::Input(format!("--degree: complex has top degree {}", cx.top())));
    }
    rep.kv("degree", degree);
    rep.kv("seed", seed);
    spectra(rep, cx)?;
    let n = cx.dims.len();
    let bcp = BoundaryConditionPair {
        l: (0..n).map(|i| subspace_or_zero(&doc, "L", i)).collect(),
        l1: (0..n).map(|i| subspace_or_zero(&doc, "L1", i)).collect(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let form: Vec<f64> = (0..cx.dims[degree]).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let s = hodge::hodge_split(cx, degree, &form, &bcp)?;
    rep.section("split");
    rep.kv("harmonic dimension", s.harmonic_dim);
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    rep.kv("|exact|", num(norm(&s.exact)));
    rep.kv("|harmonic|", num(norm(&s.harmonic)));
    rep.kv("|coexact|", num(norm(&s.coexact)));
    rep.check("orthogonality", s.orthogonality_residual, tol);
    rep.check("reassembly", s.reassembly_residual, tol);
    rep.check("harmonic", s.harmonic_residual, tol);
    rep.check("boundary compatibility", s.compatibility_residual, tol);
    Ok(())
}

pub fn torsion(rep: &mut Report, path: &str, tol: f64) -> Run {
    let doc = load_complex(rep, path)?;
    let cx = &doc.complex;
    let stars = cx.stars.is_some();
    let t = hodge::torsion(cx, stars)?;
    rep.section("determinants");
    for i in 0..4 {
        rep.line(&format!("degree {i} kernel {} det' {}", t.kernel_dims[i], num(t.det_prime[i])));
    }
    rep.section("torsion");
    rep.kv("T^(1/2)", num(t.sqrt_torsion));
    rep.kv("from degrees 0 and 1", num(t.zero_one_form));
    rep.kv("non-alternating product", num(t.unsigned_product));
    rep.kv("nontrivial H1", t.nontrivial_h1);
    if t.nontrivial_h1 {
        rep.line("note: H1 is nontrivial; the value above omits any determinant-line normalization");
    }
    rep.kv("ambiguous zero modes", t.ambiguous);
    rep.check("two torsion forms agree", t.forms_residual, tol);
    if let Some(d) = t.duality_residuals {
        rep.check("det' duality degrees 0 and 3", d[0], tol);
        rep.check("det' duality degrees 1 and 2", d[1], tol);
        let dh = hodge::dhat_identity_check(cx)?;
        rep.kv("det' d-hat", num(dh.det_prime_dhat));
        rep.kv("d-hat signature", dh.signature.map_or("n/a".to_string(), |s| s.to_string()));
        rep.check("d-hat squared block form", dh.block_residual, 1e-10);
        rep.check("d-hat determinant identity", dh.det_residual, tol);
    } else {
        rep.line("note: no star operators; duality checks skipped");
    }
    Ok(())
}

pub fn dn(rep: &mut Report, path: &str, seed: u64, tol: f64) -> Run {
    let doc = load_complex(rep, path)?;
    let cx = &doc.complex;
    let get = |name: &str| doc.subspace(name, 1).cloned().ok_or_else(|| Failure::Input(format!("complex lacks subspace {name} in degree 1")));
    let split = Splitting { plus: get("H_plus")?, minus: get("H_minus")? };
    let r = hodge::dn_operator(cx, &split)?;
    rep.section("dirichlet-to-neumann");
    rep.kv("boundary harmonic dimension", r.harmonic_dim);
    rep.kv("L_M dimension", r.lm_dim);
    for i in 0..r.b_m.nrows() {
        let row: Vec<f64> = r.b_m.row(i).iter().copied().collect();
        rep.kv(&format!("B_M row {i}"), list(&row));
    }
    rep.kv("transversality", num(r.transversality));
    rep.check("B_M C+ = C-", r.residual, tol);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cp: Vec<f64> = (0..split.plus.ncols()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let cm: Vec<f64> = (0..split.minus.ncols()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let a = &split.plus * DMatrix::from_column_slice(cp.len(), 1, &cp) + &split.minus * DMatrix::from_column_slice(cm.len(), 1, &cm);
    let a: Vec<f64> = a.iter().copied().collect();
    let p = hodge::hj_phase(cx, &split, &a)?;
    rep.section("boundary phase");
    rep.kv("background coordinates (+)", list(&cp));
    rep.kv("background coordinates (-)", list(&cm));
    rep.kv("phase", num(p.phase));
    rep.kv("linear term through B_M", list(&p.linear_dn));
    rep.kv("linear term from background", list(&p.linear_background));
    Ok(())
}
