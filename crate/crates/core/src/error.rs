use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("schema violation at `{key}`: {msg}")]
    Schema { key: String, msg: String },
    #[error("arity mismatch: expected {expected}, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("projection has rank {rank}, expected {expected}")]
    RankDeficient { rank: usize, expected: usize },
    #[error("density is not positive on the support window (value {value} at {at:?})")]
    NonPositiveDensity { value: f64, at: Vec<f64> },
    #[error("gauge invariance residual {max_coeff:e} exceeds tolerance: {residual}")]
    GaugeResidual { max_coeff: f64, residual: String },
    #[error("cocycle identity fails with residual {0:e}")]
    Cocycle(f64),
    #[error("seed {0:?} lies outside the support window")]
    SeedOutsideWindow(Vec<f64>),
    #[error("Newton iteration did not converge: residual {residual:e} at {iterate:?}")]
    NonConvergence { iterate: Vec<f64>, residual: f64 },
    #[error("degenerate Hessian: smallest |eigenvalue| {min_abs:e} vs spectral radius {radius:e}")]
    DegenerateHessian { min_abs: f64, radius: f64 },
    #[error("ghost matrix L_phi is singular (|det| = {0:e})")]
    SingularGhost(f64),
    #[error("gauge slice meets an orbit more than once: {0:?} and {1:?}")]
    DuplicateOrbit(Vec<f64>, Vec<f64>),
    #[error("enumeration cap exceeded: order {order} > {cap}")]
    CapExceeded { order: usize, cap: usize },
    #[error("missing derivative tensor of order {0}")]
    MissingTensor(usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("oracle did not converge within {nodes} nodes: value {re}+{im}i, error bound {bound:e}")]
    OracleNonConvergence { re: f64, im: f64, bound: f64, nodes: usize },
    #[error("oracle inconclusive: {0}")]
    Inconclusive(String),
    #[error("unbounded integration domain: model declares no support window")]
    Unbounded,
    #[error("base mismatch: {0}")]
    BaseMismatch(String),
    #[error("critical point tracking failed: {0}")]
    Tracking(String),
    #[error("degenerate base Hessian (transversality fails): smallest |eigenvalue| {0:e}")]
    DegenerateBase(f64),
    #[error("invalid complex: {0}")]
    Complex(String),
    #[error("boundary condition compatibility fails with residual {0:e}")]
    Compatibility(f64),
    #[error("star operators incompatible: {0}")]
    StarIncompatible(String),
    #[error("missing star operators")]
    MissingStars,
    #[error("subspace is not isotropic: residual {0:e}")]
    NotIsotropic(f64),
    #[error("restricted form is degenerate: {0}")]
    DegenerateForm(String),
    #[error("complex has no boundary")]
    NoBoundary,
    #[error("transversality failure: {0}")]
    Transversality(String),
    #[error("kernel dimension {numeric} disagrees with integer rank count {exact} in degree {degree}")]
    KernelMismatch { degree: usize, numeric: usize, exact: usize },
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
