use thiserror::Error;

/// Errors raised by the analysis library.
///
/// Verdict-like outcomes (a system that is not negative imaginary, an
/// unstable interconnection) are never errors; they are encoded in the
/// returned reports. Errors are reserved for misuse and numerical breakdown.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NiError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("eigenvalue iteration did not converge")]
    NonConvergence,

    #[error("spectrum is not real: max |Im| = {max_imag:e} exceeds {bound:e}")]
    ComplexSpectrum { max_imag: f64, bound: f64 },

    #[error("matrix is singular to working precision (reciprocal condition {rcond:e})")]
    SingularMatrix { rcond: f64 },

    #[error("s = {re}{im:+}j is a pole of the system")]
    PoleAtS { re: f64, im: f64 },

    #[error("interconnection is ill-posed: det(I - D*Dbar) = {det:e}")]
    IllPosed { det: f64 },

    #[error("state matrix is not Hurwitz (max real part {max_real:e})")]
    NonHurwitzA { max_real: f64 },

    #[error("realization is not minimal")]
    NonMinimal,

    #[error("operand `{0}` is not Hurwitz; the eigenvalue oracle refuses to decide")]
    NonStableOperand(&'static str),

    #[error("supposition violated: {0}")]
    SuppositionViolated(String),

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid certificate: {0}")]
    InvalidCertificate(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("DC gain max eigenvalue {0:e} is not positive")]
    NonPositiveDcGain(f64),

    #[error("generator gave up after {0} redraws")]
    GeneratorExhausted(usize),
}

pub type Result<T> = std::result::Result<T, NiError>;
