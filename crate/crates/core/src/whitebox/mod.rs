//! White-box RSA decryptors and the key-extraction attacks against them.
//!
//! Each scheme hides the private exponent differently but still computes
//! `c^d mod N`, so each one implements [`RsaDecryptor`] and can stand in for
//! the plain key when opening an envelope.

mod matrix;
pub mod obfcrt;
pub mod splitkey;
pub mod window;

pub use matrix::ModMatrix;
pub use obfcrt::ObfCrtWhiteBox;
pub use splitkey::SplitKeyWhiteBox;
pub use window::{WindowSecrets, WindowWhiteBox};

use num_traits::One;
use rand_core::RngCore;

use crate::error::{Error, Result};
use crate::numtheory::{mod_inv, FactorPair, Nat, RsaDecryptor, RsaPrivateKey};
use crate::text::RecordReader;

/// Everything an attack pulls out of a white-box.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecoveredKey {
    /// Secret permutation, window scheme only.
    pub pi: Option<Vec<usize>>,
    /// Multiplicative randomizers `r_0..r_31` in natural order, window scheme only.
    pub rvec: Option<Vec<Nat>>,
    pub d: Nat,
    pub factors: FactorPair,
    pub phi: Nat,
}

impl RecoveredKey {
    pub fn new(d: Nat, factors: FactorPair) -> Self {
        let phi = factors.phi();
        Self {
            pi: None,
            rvec: None,
            d,
            factors,
            phi,
        }
    }

    /// The two checks every successful extraction must pass.
    pub fn verdicts(&self, n: &Nat, e: &Nat) -> Vec<(&'static str, bool)> {
        vec![
            ("ed≡1 mod Φ", (e * &self.d % &self.phi).is_one()),
            ("pq=N", &self.factors.product() == n),
        ]
    }

    pub fn to_private_key(&self, e: &Nat) -> Result<RsaPrivateKey> {
        RsaPrivateKey::from_parts(
            self.factors.product(),
            e.clone(),
            self.d.clone(),
            self.factors.p.clone(),
            self.factors.q.clone(),
        )
    }
}

/// Completes a recovery from the factorization, deriving `d = e^-1 mod phi`.
pub(crate) fn recovered_from_factors(n: &Nat, e: &Nat, factors: FactorPair) -> Result<RecoveredKey> {
    if &factors.product() != n || factors.p <= Nat::one() {
        return Err(Error::inconsistent("recovered factors do not multiply to N"));
    }
    let phi = factors.phi();
    let d = mod_inv(e, &phi).map_err(|_| Error::inconsistent("e is not invertible modulo phi"))?;
    Ok(RecoveredKey::new(d, factors))
}

/// A white-box file of any scheme.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WhiteBox {
    SplitKey(SplitKeyWhiteBox),
    ObfCrt(ObfCrtWhiteBox),
    Window(WindowWhiteBox),
}

impl WhiteBox {
    pub fn scheme(&self) -> &'static str {
        match self {
            WhiteBox::SplitKey(_) => splitkey::SCHEME,
            WhiteBox::ObfCrt(_) => obfcrt::SCHEME,
            WhiteBox::Window(_) => window::SCHEME,
        }
    }

    pub fn keyname(&self) -> &str {
        match self {
            WhiteBox::SplitKey(wb) => &wb.keyname,
            WhiteBox::ObfCrt(wb) => &wb.keyname,
            WhiteBox::Window(wb) => &wb.keyname,
        }
    }

    pub fn to_text(&self) -> String {
        match self {
            WhiteBox::SplitKey(wb) => wb.to_text(),
            WhiteBox::ObfCrt(wb) => wb.to_text(),
            WhiteBox::Window(wb) => wb.to_text(),
        }
    }

    /// Dispatches on the leading `scheme=` line.
    pub fn parse(text: &str) -> Result<Self> {
        let scheme = RecordReader::new(text)?.field("scheme")?;
        match scheme {
            splitkey::SCHEME => SplitKeyWhiteBox::parse(text).map(WhiteBox::SplitKey),
            obfcrt::SCHEME => ObfCrtWhiteBox::parse(text).map(WhiteBox::ObfCrt),
            window::SCHEME => WindowWhiteBox::parse(text).map(WhiteBox::Window),
            other => Err(Error::parse(1, format!("unknown scheme `{other}`"))),
        }
    }

    fn inner(&self) -> &dyn RsaDecryptor {
        match self {
            WhiteBox::SplitKey(wb) => wb,
            WhiteBox::ObfCrt(wb) => wb,
            WhiteBox::Window(wb) => wb,
        }
    }
}

impl RsaDecryptor for WhiteBox {
    fn modulus(&self) -> &Nat {
        self.inner().modulus()
    }

    fn decrypt_raw(&self, c: &Nat) -> Result<Nat> {
        self.inner().decrypt_raw(c)
    }
}

/// Key-extraction methods, named as on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackMethod {
    Auto,
    ChosenCiphertext,
    Matrix,
    Miller,
    Gcd,
}

impl AttackMethod {
    pub const ALL: [AttackMethod; 5] = [
        AttackMethod::Auto,
        AttackMethod::ChosenCiphertext,
        AttackMethod::Matrix,
        AttackMethod::Miller,
        AttackMethod::Gcd,
    ];

    pub fn token(self) -> &'static str {
        match self {
            AttackMethod::Auto => "auto",
            AttackMethod::ChosenCiphertext => "chosen-ciphertext",
            AttackMethod::Matrix => "matrix",
            AttackMethod::Miller => "miller",
            AttackMethod::Gcd => "gcd",
        }
    }

    pub fn from_token(token: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.token() == token)
    }

    /// `Auto` picks chosen-ciphertext for the window scheme.
    pub fn resolve(self, scheme: &str) -> Option<Self> {
        use AttackMethod::*;
        match (self, scheme) {
            (Auto | Miller, splitkey::SCHEME) => Some(Miller),
            (Auto | Gcd, obfcrt::SCHEME) => Some(Gcd),
            (Auto | ChosenCiphertext, window::SCHEME) => Some(ChosenCiphertext),
            (Matrix, window::SCHEME) => Some(Matrix),
            _ => None,
        }
    }
}

/// Runs `method` against `wb`. Returns the method actually used.
pub fn attack<R: RngCore + ?Sized>(
    wb: &WhiteBox,
    method: AttackMethod,
    e: &Nat,
    rng: &mut R,
) -> Result<(AttackMethod, RecoveredKey)> {
    let resolved = method.resolve(wb.scheme()).ok_or_else(|| {
        Error::domain(format!("method {} does not apply to scheme {}", method.token(), wb.scheme()))
    })?;
    let rec = match (wb, resolved) {
        (WhiteBox::SplitKey(w), _) => splitkey::splitkey_attack(w, e, rng)?,
        (WhiteBox::ObfCrt(w), _) => obfcrt::obfcrt_attack(w, e, rng)?,
        (WhiteBox::Window(w), AttackMethod::Matrix) => window::attack_matrix(w, e, rng)?,
        (WhiteBox::Window(w), _) => window::attack_chosen_ciphertext(w, e, rng)?,
    };
    Ok((resolved, rec))
}

pub(crate) fn check_ciphertext(c: &Nat, n: &Nat) -> Result<()> {
    if c >= n {
        return Err(Error::domain("ciphertext must be below N"));
    }
    Ok(())
}
