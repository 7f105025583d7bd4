use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("electron and hole masses must be equal (m_e = {m_e}, m_h = {m_h})")]
    UnequalMasses { m_e: f64, m_h: f64 },

    #[error("lattice weight w{kappa:?} = {w} has no matching w at -kappa (found {w_neg})")]
    NonHermitianPotential { kappa: (i32, i32), w: f64, w_neg: f64 },

    #[error("unknown energy unit `{0}` (expected au, cm-1 or eV)")]
    UnknownUnit(String),

    #[error("Hilbert space dimension {dim} exceeds the cap {cap}: {advice}")]
    Dimension { dim: u128, cap: usize, advice: String },

    #[error("quadrature did not converge: change {residual:e} above tolerance {tolerance:e} ({context})")]
    Quadrature { residual: f64, tolerance: f64, context: String },

    #[error("basis mismatch: {0}")]
    BasisMismatch(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("block of dimension {dim} is above the dense threshold {threshold}; use eig_lowest")]
    DenseTooLarge { dim: usize, threshold: usize },

    #[error("iterative eigensolver did not converge after {iterations} iterations (worst residual {worst_residual:e})")]
    NoConvergence { iterations: usize, worst_residual: f64, best: Vec<f64> },

    #[error("assembled block is not Hermitian: max |H - H^T| = {0:e}")]
    NotHermitian(f64),

    #[error("state is not normalized (norm^2 = {0})")]
    NotNormalized(f64),

    #[error("configuration is not commensurate: {0}")]
    NotCommensurate(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("at K = ({kx}, {ky}): {source}")]
    AtK {
        kx: f64,
        ky: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn at_k(self, k: [f64; 2]) -> Self {
        Error::AtK { kx: k[0], ky: k[1], source: Box::new(self) }
    }
}
