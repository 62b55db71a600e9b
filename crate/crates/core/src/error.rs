use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("point ({0}, {1}) is not inside the mesh")]
    PointNotFound(f64, f64),

    #[error("singular factorization: {0}")]
    SingularFactorization(String),

    #[error("linear solve residual {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    InaccurateSolve { residual: f64, tolerance: f64 },

    #[error("newton did not converge at step {step}: residual {residual:.3e} after {iterations} iterations")]
    NewtonDiverged {
        step: usize,
        iterations: usize,
        residual: f64,
    },

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("config parse error at line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    #[error("invalid value for `{field}`: {message}")]
    ConfigValue { field: String, message: String },

    #[error("harmonic basis construction found {found} generators, expected {expected}")]
    HarmonicDimension { found: usize, expected: usize },

    #[error("energy inequality violated at step {step}: increment {increment:.6e} > bound {bound:.6e}")]
    EnergyInequality {
        step: usize,
        increment: f64,
        bound: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
