use num_bigint::BigUint;
use thiserror::Error;

/// Errors produced by every operation in this crate.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// The gcd is kept because it is frequently a factor of the modulus.
    #[error("{value:x} is not invertible modulo {modulus:x} (gcd {gcd:x})")]
    NotInvertible {
        value: BigUint,
        modulus: BigUint,
        gcd: BigUint,
    },

    #[error("factorization failed after {trials} random bases")]
    FactorFailure { trials: usize },

    #[error("modulus of {modulus_bytes} bytes cannot wrap a {key_bytes}-byte session key")]
    KeyTooSmall {
        modulus_bytes: usize,
        key_bytes: usize,
    },

    #[error("session key unwrap failed: {0}")]
    Unwrap(&'static str),

    #[error("digest mismatch for tool block {keyname:?}")]
    DigestMismatch { keyname: String },

    #[error("no tool block with keyname {0:?}")]
    NoSuchToolBlock(String),

    #[error("bad CBC padding")]
    Padding,

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("attack inconsistent: {0}")]
    AttackInconsistent(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn inconsistent(msg: impl Into<String>) -> Self {
        Error::AttackInconsistent(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
