use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("value out of supported range: {0}")]
    Bounds(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("singular denominator (condition estimate {cond:.3e})")]
    SingularDenominator { cond: f64 },
    #[error("singular diagonal block at step {step}")]
    SingularBlock { step: usize },
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("magnitude overflow: {0}")]
    Magnitude(String),
    #[error("series diverges at theta={theta} (radius estimate {radius})")]
    Divergence { theta: f64, radius: f64 },
    #[error("no feasible value: {0}")]
    Infeasible(String),
    #[error("assumption violated: {0}")]
    AssumptionViolation(String),
    #[error("strategy not applicable: {0}")]
    Strategy(String),
    #[error("layout error: {0}")]
    Layout(String),
    #[error("dimension {dim} exceeds cap {cap}")]
    Size { dim: usize, cap: usize },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("did not converge: {0}")]
    Convergence(String),
    #[error("case mismatch: {0}")]
    Classification(String),
    #[error("composition error: {0}")]
    Composition(String),
    #[error("search exhausted: {0}")]
    Search(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("unknown {kind} '{name}'")]
    Unknown { kind: &'static str, name: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
