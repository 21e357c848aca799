use core::fmt;

/// Errors reported by the screening, covariance and solver stages.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A reduced problem was requested over an empty feature set.
    EmptyReducedProblem,
    /// A feature id was not part of the dictionary it was looked up in.
    UnknownFeature { id: u32 },
    /// The screening threshold removed every feature.
    LambdaEliminatesAll { lambda: f64, max_variance: f64 },
    /// Requested reduced size is outside `1..=n`.
    TargetOutOfRange { target: usize, n: usize },
    /// The solver was handed a matrix containing features with variance at
    /// most `lambda`; those must be screened out first.
    ScreeningRequired { lambda: f64, min_diagonal: f64 },
    /// A triangular factorization failed: the iterate (or an input that must
    /// be positive definite) is not.
    NotPositiveDefinite { sweep: usize, column: usize },
    /// The scalar stage could not bracket the root of its cubic.
    TauBracketFailure { r2: f64, c: f64, beta: f64 },
    /// The penalized objective decreased beyond slack during a sweep.
    AscentViolation {
        sweep: usize,
        previous: f64,
        current: f64,
    },
    /// The iterate trace is non-positive, so it cannot be normalized.
    NonPositiveTrace { trace: f64 },
    /// A configuration field fails its validity constraint.
    InvalidConfig(&'static str),
    /// An argument fails a documented precondition.
    InvalidInput(&'static str),
    /// Two containers that must agree in size do not.
    DimensionMismatch { expected: usize, got: usize },
    /// The brute-force reference was asked for an instance too large to
    /// enumerate.
    ProblemTooLarge { n: usize, limit: usize },
}

impl Error {
    /// True for failures of the numerical iteration itself, as opposed to
    /// infeasible or malformed requests.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite { .. }
                | Error::TauBracketFailure { .. }
                | Error::AscentViolation { .. }
                | Error::NonPositiveTrace { .. }
        )
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyReducedProblem => write!(f, "empty reduced problem"),
            Error::UnknownFeature { id } => write!(f, "feature id {id} not in corpus"),
            Error::LambdaEliminatesAll {
                lambda,
                max_variance,
            } => write!(
                f,
                "lambda eliminates all features (lambda = {lambda}, max variance = {max_variance})"
            ),
            Error::TargetOutOfRange { target, n } => {
                write!(f, "target size {target} out of range 1..={n}")
            }
            Error::ScreeningRequired {
                lambda,
                min_diagonal,
            } => write!(
                f,
                "run screening first: lambda = {lambda} is not below the smallest diagonal entry {min_diagonal}"
            ),
            Error::NotPositiveDefinite { sweep, column } => write!(
                f,
                "matrix not positive definite (sweep {sweep}, column {column})"
            ),
            Error::TauBracketFailure { r2, c, beta } => write!(
                f,
                "no sign change while bracketing the tau cubic (R2 = {r2}, c = {c}, beta = {beta})"
            ),
            Error::AscentViolation {
                sweep,
                previous,
                current,
            } => write!(
                f,
                "objective decreased during sweep {sweep}: {previous} -> {current}"
            ),
            Error::NonPositiveTrace { trace } => {
                write!(f, "cannot normalize iterate with trace {trace}")
            }
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::ProblemTooLarge { n, limit } => {
                write!(f, "instance of order {n} exceeds the enumeration limit {limit}")
            }
        }
    }
}

impl core::error::Error for Error {}
