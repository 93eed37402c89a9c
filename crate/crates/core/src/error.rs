use thiserror::Error;

/// Errors raised by the geometry, loop and solver layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("tangent vector is based at a different point (distance {0:.3e})")]
    BaseMismatch(f64),
    #[error("degenerate curve: velocity {0:.3e} below tolerance")]
    DegenerateCurve(f64),
    #[error("stereographic chart singular: point within {0:.3e} of the pole")]
    ChartSingularity(f64),
    #[error("value {value} outside the admissible range {range}")]
    OutOfRange { value: f64, range: &'static str },
    #[error("loop grid size {0} must be even and at least 16")]
    BadGridSize(usize),
    #[error("loop is not simple; {0} is only defined for simple loops")]
    NotSimple(&'static str),
    #[error("linear solve failed (condition estimate {condition:.3e})")]
    LinearSolve { condition: f64 },
    #[error("newton did not converge after {iters} iterations (residual {residual:.3e})")]
    NonConvergence { iters: usize, residual: f64 },
    #[error("loop collapsed: minimum speed ratio {0:.3e}")]
    Collapse(f64),
    #[error("poincare section degenerate: flow tangent to section (transversality {0:.3e})")]
    SectionDegenerate(f64),
    #[error("no admissible stereographic pole found after {0} tries")]
    NoAdmissiblePole(usize),
    #[error("curvature prescription not positive: certified infimum {0}")]
    NonPositivePrescription(f64),
    #[error("continuation corrector failed at t = {t}: {source}")]
    Corrector {
        t: f64,
        #[source]
        source: Box<Error>,
    },
    #[error("orbit search found {found} certified orbits, need at least 2")]
    SearchFailure {
        found: usize,
        statuses: Vec<String>,
    },
    #[error("invalid field term: {0}")]
    InvalidField(String),
    #[error("malformed loop data: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
