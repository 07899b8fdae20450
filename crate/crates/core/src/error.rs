use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("spacing must be positive (h = {h}, dt = {dt}, T = {t_final})")]
    BadSpacing { h: f64, dt: f64, t_final: f64 },
    #[error("invalid domain: {0}")]
    BadDomain(String),
    #[error("lattice has no interior node")]
    EmptyInterior,
    #[error("ray from {origin:?} along {direction:?} never leaves the domain")]
    NoIntersection {
        origin: Vec<f64>,
        direction: Vec<f64>,
    },
    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("need at least {needed} time slices, have {have}")]
    TooFewSlices { needed: usize, have: usize },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("field has {got} values, grid expects {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite value at node {0}")]
    NonFinite(usize),
    #[error("stencil arm at node {node} leaves the grid and no boundary data is available")]
    UnresolvableArm { node: usize },
    #[error("Legendre parameter must be positive, got {0}")]
    NonpositiveA(f64),
    #[error("field is not a parabolic potential (worst Levi margin {margin:e} at node {node})")]
    NotParabolicPotential { margin: f64, node: usize },
    #[error("quadratic fit is degenerate at node {node}")]
    DegenerateFit { node: usize },
    #[error("field is not semi-concave in t (constant {constant:e} exceeds bound {bound:e})")]
    NotSemiConcave { constant: f64, bound: f64 },
    #[error("mollifier support leaves [0, T]; values were clamped")]
    KernelOutOfRange,
    #[error("envelope iteration did not converge in {iterations} sweeps (last update {update:e})")]
    MaxIterExceeded { iterations: usize, update: f64 },
    #[error("empty family")]
    EmptyFamily,
    #[error("inner iteration failed at step {step}: residual {residual:e} after {iterations} iterations")]
    InnerDivergence {
        step: usize,
        iterations: usize,
        residual: f64,
    },
    #[error("g = {value:e} is not positive at interior node {node}")]
    DegenerateG { node: usize, value: f64 },
    #[error("negative density g = {value:e} at node {node}")]
    NegativeG { node: usize, value: f64 },
    #[error("F is not nondecreasing in r (drop {drop:e})")]
    NotMonotoneInR { drop: f64 },
    #[error("unknown case `{0}`")]
    UnknownCase(String),
    #[error("syntax error at offset {offset}: {message}")]
    SyntaxError { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("variable `{name}` is not allowed in {slot}")]
    ForbiddenVariable { name: String, slot: &'static str },
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
