//! Split-key white-box: an extended exponent `d_l = d1*d2 + d3*2^32 + d4`,
//! congruent to `d` modulo `phi(N)`, stored only as its four shares.

use num_integer::Integer;
use num_traits::One;
use rand_core::RngCore;

use super::{check_ciphertext, RecoveredKey};
use crate::error::{Error, Result};
use crate::numtheory::random::{random_exact_bits, random_u32};
use crate::numtheory::{miller_factor, mod_inv, mod_pow, mod_sub, Nat, RsaDecryptor, RsaPrivateKey};
use crate::text::{RecordReader, RecordWriter};

pub const SCHEME: &str = "splitkey";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitKeyWhiteBox {
    pub keyname: String,
    pub n: Nat,
    pub d1: Nat,
    pub d2: Nat,
    pub d3: u32,
    pub d4: u32,
}

impl SplitKeyWhiteBox {
    /// `d1*d2 + d3*2^32 + d4`, over the integers.
    pub fn extended_exponent(&self) -> Nat {
        &self.d1 * &self.d2 + (Nat::from(self.d3) << 32u32) + Nat::from(self.d4)
    }

    pub fn to_text(&self) -> String {
        RecordWriter::new()
            .field("scheme", SCHEME)
            .field("keyname", &self.keyname)
            .hex("n", &self.n)
            .hex("d1", &self.d1)
            .hex("d2", &self.d2)
            .hex("d3", &Nat::from(self.d3))
            .hex("d4", &Nat::from(self.d4))
            .finish()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut r = RecordReader::new(text)?;
        r.literal("scheme", SCHEME)?;
        let keyname = r.name("keyname")?;
        let n = r.hex("n")?;
        let d1 = r.hex("d1")?;
        let d2 = r.hex("d2")?;
        let mut word = |name: &str| -> Result<u32> {
            let line = r.line_no();
            u32::try_from(r.hex(name)?).map_err(|_| Error::parse(line, format!("`{name}` exceeds 32 bits")))
        };
        let d3 = word("d3")?;
        let d4 = word("d4")?;
        r.end()?;
        if n < Nat::from(2u8) {
            return Err(Error::parse(3, "modulus below 2"));
        }
        Ok(Self { keyname, n, d1, d2, d3, d4 })
    }
}

impl RsaDecryptor for SplitKeyWhiteBox {
    fn modulus(&self) -> &Nat {
        &self.n
    }

    fn decrypt_raw(&self, c: &Nat) -> Result<Nat> {
        splitkey_decrypt(self, c)
    }
}

/// Draws `d3`, `d4` as 32-bit words and `d1` with the bit length of `N` and
/// coprime to `phi`, then solves for `d2 = (d - d3*2^32 - d4) / d1 mod phi`.
pub fn gen_splitkey<R: RngCore + ?Sized>(keyname: &str, key: &RsaPrivateKey, rng: &mut R) -> Result<SplitKeyWhiteBox> {
    let d3 = random_u32(rng);
    let d4 = random_u32(rng);
    let d1 = loop {
        let candidate = random_exact_bits(rng, key.n.bits());
        if candidate.gcd(&key.phi).is_one() {
            break candidate;
        }
    };
    let low = (Nat::from(d3) << 32u32) + Nat::from(d4);
    let target = mod_sub(&key.d, &low, &key.phi);
    let d2 = target * mod_inv(&d1, &key.phi)? % &key.phi;
    Ok(SplitKeyWhiteBox {
        keyname: keyname.to_owned(),
        n: key.n.clone(),
        d1,
        d2,
        d3,
        d4,
    })
}

pub fn splitkey_decrypt(wb: &SplitKeyWhiteBox, c: &Nat) -> Result<Nat> {
    check_ciphertext(c, &wb.n)?;
    mod_pow(c, &wb.extended_exponent(), &wb.n)
}

/// Factors `N` from the assembled extended exponent and reduces it to `d`.
pub fn splitkey_attack<R: RngCore + ?Sized>(wb: &SplitKeyWhiteBox, e: &Nat, rng: &mut R) -> Result<RecoveredKey> {
    let dl = wb.extended_exponent();
    let factors = miller_factor(&wb.n, e, &dl, rng)?;
    let phi = factors.phi();
    let d = &dl % &phi;
    if !(e * &d % &phi).is_one() {
        return Err(Error::inconsistent("reduced exponent does not invert e"));
    }
    Ok(RecoveredKey::new(d, factors))
}
