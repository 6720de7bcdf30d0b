use crate::regions::Region;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },

    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),

    #[error("function `{name}` expects {expected} argument(s), got {got}")]
    ArityMismatch {
        name: String,
        expected: usize,
        got: usize,
    },

    #[error("field `{field}` is not 1-periodic in y{dir}: |f(x,y) - f(x,y+e)| = {deviation:.3e}")]
    NotPeriodic {
        field: String,
        dir: usize,
        deviation: f64,
    },

    #[error("non-finite value in field `{field}` at x={x:?}, y={y:?}")]
    NonFinite {
        field: String,
        x: Vec<f64>,
        y: Vec<f64>,
    },

    #[error("tensor index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("parameter point (alpha={alpha}, beta={beta}) lies in the {region:?} regime, which has no effective problem here")]
    UnsupportedRegion {
        alpha: f64,
        beta: f64,
        region: Region,
    },

    #[error("minimizer search did not converge after {0} Newton iterations")]
    MinSearchDiverged(usize),

    #[error("Hessian of the local average is not positive definite (smallest eigenvalue {0:.3e})")]
    IndefiniteHessian(f64),

    #[error("conjugate gradient stalled: relative residual {residual:.3e} after {iterations} iterations")]
    KrylovNonConvergence { residual: f64, iterations: usize },

    #[error("cell solution family is missing corrector {0}")]
    MissingCorrector(String),

    #[error("assembled tensor is not symmetric: deviation {0:.3e}")]
    AsymmetricTensor(f64),

    #[error("coercivity failure: smallest Rayleigh quotient {0:.3e}")]
    CoercivityFailure(f64),

    #[error("Cholesky factorization failed at pivot {0}: matrix not positive definite")]
    FactorizationFailure(usize),

    #[error("Lanczos did not converge {wanted} eigenpairs in {iterations} iterations")]
    LanczosNonConvergence { wanted: usize, iterations: usize },

    #[error("grid of {got} points per dimension under-resolves the microscale; need at least {needed}")]
    ResolutionTooCoarse { got: usize, needed: usize },

    #[error("rescaled grid has empty overlap with the domain")]
    EmptyOverlap,

    #[error("mass fraction {mass} not reachable; captured {captured:.6} inside the domain")]
    MassUnreachable { mass: f64, captured: f64 },

    #[error("oscillating factor has nonzero y-mean {0:.3e}")]
    NonzeroMean(f64),

    #[error("config error: {0}")]
    Config(String),

    #[error("{0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
