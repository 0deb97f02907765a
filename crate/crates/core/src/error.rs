use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("degenerate geometry in cell {cell}: jacobian determinant {det:e}")]
    DegenerateCell { cell: usize, det: f64 },

    #[error("sparse factorization of the {block} block failed: {reason}")]
    SingularSystem { block: &'static str, reason: String },

    #[error(
        "splitting did not converge within {iterations} iterations \
         (flow update {flow_update:e}, mechanics update {mech_update:e})"
    )]
    NonConvergence {
        iterations: usize,
        flow_update: f64,
        mech_update: f64,
    },

    #[error("infinite coupling strength: storage coefficient is zero")]
    InfiniteCoupling,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("inconsistent configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
