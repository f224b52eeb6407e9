use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("coefficients {coeffs:?} are not primitive (gcd = {gcd})")]
    NonPrimitive { coeffs: Vec<u64>, gcd: u64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("arithmetic overflow in {0}")]
    Overflow(&'static str),

    /// The congruence search hit its depth cap without a decision.
    #[error("undecided over Z_{p} at depth {depth} (cap {cap}); raise the cap")]
    Undecided { p: u64, depth: u32, cap: u32 },

    #[error("target {n} exceeds the global search cap {cap}")]
    AboveCap { n: String, cap: u64 },

    /// A step of a counterexample construction failed its own check.
    #[error("construction failed: {0}")]
    Construction(String),

    #[error("verification failed at n = {n}: {reason}")]
    Verification { n: u64, reason: String },
}
