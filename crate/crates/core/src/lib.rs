//! Digital envelopes for hardware IP, white-box RSA decryptors built the way
//! commercial EDA tools hide their keys, and the attacks that pull the keys
//! back out of them.

pub mod envelope;
pub mod error;
pub mod keyfile;
pub mod numtheory;
pub mod text;
pub mod whitebox;

pub use error::{Error, Result};
pub use numtheory::{FactorPair, Nat, RsaPrivateKey, RsaPublicKey};
