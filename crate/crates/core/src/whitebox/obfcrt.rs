//! Obfuscated CRT-RSA.
//!
//! The CRT exponents are split additively, each prime is replaced by a small
//! multiple `k*p = p1 - p2` that is only ever used through [`obf_mod`], and
//! the CRT parameter is stored as `g1 * (g2 + g3) mod N`.

use num_integer::Integer;
use num_traits::{One, Zero};
use rand_core::RngCore;

use super::{check_ciphertext, recovered_from_factors, RecoveredKey};
use crate::error::{Error, Result};
use crate::numtheory::random::{random_below, random_bits, random_index, random_range, random_unit};
use crate::numtheory::{crt_combine, crt_param, mod_inv, mod_pow, mod_sub, FactorPair, Nat, RsaDecryptor, RsaPrivateKey};
use crate::text::{RecordReader, RecordWriter};

pub const SCHEME: &str = "obfcrt";

/// Width of the subtracted shares `p2` and `q2`.
pub const SHARE_BITS: u64 = 256;

/// Each prime must be at least this wide so that `k*p` exceeds every
/// possible `p2`.
pub const MIN_FACTOR_BITS: u64 = SHARE_BITS;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObfCrtWhiteBox {
    pub keyname: String,
    pub n: Nat,
    pub dp1: Nat,
    pub dp2: Nat,
    pub dq1: Nat,
    pub dq2: Nat,
    pub p1: Nat,
    pub p2: Nat,
    pub q1: Nat,
    pub q2: Nat,
    pub g1: Nat,
    pub g2: Nat,
    pub g3: Nat,
}

const FIELDS: [&str; 11] = ["dp1", "dp2", "dq1", "dq2", "p1", "p2", "q1", "q2", "g1", "g2", "g3"];

impl ObfCrtWhiteBox {
    fn values(&self) -> [&Nat; 11] {
        [
            &self.dp1, &self.dp2, &self.dq1, &self.dq2, &self.p1, &self.p2, &self.q1, &self.q2, &self.g1, &self.g2,
            &self.g3,
        ]
    }

    /// The recombined CRT parameter `g1 * (g2 + g3) mod N`.
    pub fn gamma(&self) -> Nat {
        &self.g1 * (&self.g2 + &self.g3) % &self.n
    }

    pub fn to_text(&self) -> String {
        let mut w = RecordWriter::new();
        w.field("scheme", SCHEME).field("keyname", &self.keyname).hex("n", &self.n);
        for (name, value) in FIELDS.iter().zip(self.values()) {
            w.hex(name, value);
        }
        w.finish()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut r = RecordReader::new(text)?;
        r.literal("scheme", SCHEME)?;
        let keyname = r.name("keyname")?;
        let n = r.hex("n")?;
        let mut v = FIELDS.iter().map(|name| r.hex(name)).collect::<Result<Vec<_>>>()?.into_iter();
        r.end()?;
        let mut next = || v.next().expect("eleven fields");
        let wb = Self {
            keyname,
            n,
            dp1: next(),
            dp2: next(),
            dq1: next(),
            dq2: next(),
            p1: next(),
            p2: next(),
            q1: next(),
            q2: next(),
            g1: next(),
            g2: next(),
            g3: next(),
        };
        if wb.n < Nat::from(2u8) || wb.p1.is_zero() || wb.q1.is_zero() {
            return Err(Error::parse(3, "degenerate modulus or reduction share"));
        }
        Ok(wb)
    }
}

impl RsaDecryptor for ObfCrtWhiteBox {
    fn modulus(&self) -> &Nat {
        &self.n
    }

    fn decrypt_raw(&self, c: &Nat) -> Result<Nat> {
        obf_crt_exp(self, c)
    }
}

fn odd_multiplier<R: RngCore + ?Sized>(rng: &mut R) -> Nat {
    // odd values 3, 5, ..., 255
    Nat::from(3 + 2 * random_index(rng, 127))
}

pub fn gen_obfcrt<R: RngCore + ?Sized>(keyname: &str, key: &RsaPrivateKey, rng: &mut R) -> Result<ObfCrtWhiteBox> {
    if key.p.bits() < MIN_FACTOR_BITS || key.q.bits() < MIN_FACTOR_BITS {
        return Err(Error::domain(format!(
            "obfuscated CRT needs factors of at least {MIN_FACTOR_BITS} bits"
        )));
    }
    let n = &key.n;
    let k = odd_multiplier(rng);
    let l = odd_multiplier(rng);

    let dp = key.dp();
    let dq = key.dq();
    let dp1 = random_below(rng, &(&dp + 1u8));
    let dq1 = random_below(rng, &(&dq + 1u8));
    let dp2 = &dp - &dp1;
    let dq2 = &dq - &dq1;

    let p2 = random_bits(rng, SHARE_BITS);
    let q2 = random_bits(rng, SHARE_BITS);
    let p1 = &k * &key.p + &p2;
    let q1 = &l * &key.q + &q2;

    let gamma = crt_param(&key.p, &key.q)?;
    let g1 = random_unit(rng, n);
    let g2 = random_range(rng, &Nat::zero(), n);
    let g3 = mod_sub(&(gamma * mod_inv(&g1, n)?), &g2, n);

    Ok(ObfCrtWhiteBox {
        keyname: keyname.to_owned(),
        n: n.clone(),
        dp1,
        dp2,
        dq1,
        dq2,
        p1,
        p2,
        q1,
        q2,
        g1,
        g2,
        g3,
    })
}

/// `floor(a / p1) * p2 + a mod p1`, which equals `a - floor(a / p1) * (p1 - p2)`
/// and is therefore congruent to `a` modulo `p1 - p2`.
pub fn obf_mod_unreduced(a: &Nat, p1: &Nat, p2: &Nat) -> Result<Nat> {
    if p1.is_zero() {
        return Err(Error::domain("obf_mod: p1 must be positive"));
    }
    let (quot, rem) = a.div_rem(p1);
    Ok(quot * p2 + rem)
}

/// [`obf_mod_unreduced`] followed by a reduction modulo `N`. The result keeps
/// the residue of `a` modulo every common divisor of `p1 - p2` and `N`, in
/// particular modulo the hidden prime.
pub fn obf_mod(a: &Nat, p1: &Nat, p2: &Nat, n: &Nat) -> Result<Nat> {
    if n.is_zero() {
        return Err(Error::domain("obf_mod: modulus must be positive"));
    }
    Ok(obf_mod_unreduced(a, p1, p2)? % n)
}

pub fn obf_crt_exp(wb: &ObfCrtWhiteBox, c: &Nat) -> Result<Nat> {
    check_ciphertext(c, &wb.n)?;
    let n = &wb.n;
    let ap = mod_pow(c, &wb.dp1, n)? * mod_pow(c, &wb.dp2, n)? % n;
    let aq = mod_pow(c, &wb.dq1, n)? * mod_pow(c, &wb.dq2, n)? % n;
    let mp = obf_mod(&ap, &wb.p1, &wb.p2, n)?;
    let mq = obf_mod(&aq, &wb.q1, &wb.q2, n)?;
    Ok(crt_combine(&mp, &mq, &wb.gamma(), n))
}

/// `gcd(N, c^exp - m)` for the ciphertext `c = m^e mod N`.
///
/// With `exp = dp` the difference vanishes mod `p` for every `m`, since
/// `e * dp = 1 (mod p - 1)`. Using `m` itself in place of `c` would need
/// `dp = 1 (mod p - 1)`, which does not hold for real keys.
pub fn exponent_gcd(m: &Nat, e: &Nat, exp: &Nat, n: &Nat) -> Result<Nat> {
    let c = mod_pow(m, e, n)?;
    Ok(mod_sub(&mod_pow(&c, exp, n)?, m, n).gcd(n))
}

/// Reads the factorization off the recombined CRT parameter:
/// `p = gcd(gamma - 1, N)` and `q = gcd(gamma, N)`. The reduction shares and
/// the exponent halves are then checked against that factorization before
/// `d = e^-1 mod phi` is returned.
pub fn obfcrt_attack<R: RngCore + ?Sized>(wb: &ObfCrtWhiteBox, e: &Nat, rng: &mut R) -> Result<RecoveredKey> {
    let n = &wb.n;
    let gamma = wb.gamma();
    let p = mod_sub(&gamma, &Nat::one(), n).gcd(n);
    let q = gamma.gcd(n);
    if p.is_one() || q.is_one() || &p * &q != *n {
        return Err(Error::inconsistent("CRT parameter does not split N"));
    }

    let check_share = |hi: &Nat, lo: &Nat, factor: &Nat, label: &str| -> Result<()> {
        if hi <= lo || (hi - lo).gcd(n) != *factor {
            return Err(Error::inconsistent(format!("gcd(N, {label}) does not match")));
        }
        Ok(())
    };
    check_share(&wb.p1, &wb.p2, &p, "p1 - p2")?;
    check_share(&wb.q1, &wb.q2, &q, "q1 - q2")?;

    // p always divides the gcd. For a random m it is exactly p at real key
    // sizes; toy moduli can also pick up q, so only divisibility is required.
    let dp = &wb.dp1 + &wb.dp2;
    let dq = &wb.dq1 + &wb.dq2;
    let m = random_range(rng, &Nat::from(2u8), n);
    if !exponent_gcd(&m, e, &dp, n)?.is_multiple_of(&p) {
        return Err(Error::inconsistent("gcd(N, c^dp - m) is not a multiple of p"));
    }
    if !exponent_gcd(&m, e, &dq, n)?.is_multiple_of(&q) {
        return Err(Error::inconsistent("gcd(N, c^dq - m) is not a multiple of q"));
    }

    recovered_from_factors(n, e, FactorPair::new(p, q))
}
