//! Exact modular arithmetic over arbitrary-precision naturals, RSA key
//! material, and the reductions between RSA secrets and the factorization.

mod factor;
mod prime;
pub mod random;
mod rsa;

pub use factor::{miller_factor, miller_factor_bounded, MILLER_MAX_BASES};
pub use prime::{gen_prime, is_probable_prime, MILLER_RABIN_ROUNDS};
pub use rsa::{gen_rsa_keypair, FactorPair, RsaDecryptor, RsaPrivateKey, RsaPublicKey, MIN_KEY_BITS};

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Zero};

use crate::error::{Error, Result};

/// Nonnegative arbitrary-precision integer. Every scalar in the crate is one.
pub type Nat = BigUint;

fn check_modulus(modulus: &Nat) -> Result<()> {
    if *modulus < Nat::from(2u8) {
        return Err(Error::domain(format!("modulus {modulus:x} is below 2")));
    }
    Ok(())
}

/// `base^exp mod modulus`.
pub fn mod_pow(base: &Nat, exp: &Nat, modulus: &Nat) -> Result<Nat> {
    check_modulus(modulus)?;
    Ok(base.modpow(exp, modulus))
}

/// Inverse of `a` modulo `m`, in `(0, m)`.
///
/// On failure the error carries `gcd(a, m)`.
pub fn mod_inv(a: &Nat, m: &Nat) -> Result<Nat> {
    check_modulus(m)?;
    match a.modinv(m) {
        Some(x) if !x.is_zero() => Ok(x),
        _ => Err(Error::NotInvertible {
            value: a.clone(),
            modulus: m.clone(),
            gcd: a.gcd(m),
        }),
    }
}

pub fn gcd(a: &Nat, b: &Nat) -> Nat {
    a.gcd(b)
}

/// `(a - b) mod n` for any representatives `a`, `b`.
pub fn mod_sub(a: &Nat, b: &Nat, n: &Nat) -> Nat {
    let a = a % n;
    let b = b % n;
    if a >= b {
        a - b
    } else {
        a + n - b
    }
}

/// `(-a) mod n`.
pub fn mod_neg(a: &Nat, n: &Nat) -> Nat {
    mod_sub(&Nat::zero(), a, n)
}

pub fn is_unit(a: &Nat, n: &Nat) -> bool {
    !a.is_zero() && a.gcd(n).is_one()
}

/// The CRT parameter `gamma` with `gamma = 1 (mod p)` and `gamma = 0 (mod q)`.
pub fn crt_param(p: &Nat, q: &Nat) -> Result<Nat> {
    if p.is_zero() || q.is_zero() {
        return Err(Error::domain("crt_param: zero modulus"));
    }
    if !p.gcd(q).is_one() {
        return Err(Error::domain(format!("crt_param: {p:x} and {q:x} share a factor")));
    }
    if p.is_one() {
        return Ok(Nat::zero());
    }
    // q * (q^-1 mod p) is 0 mod q and 1 mod p.
    let q_inv = mod_inv(&(q % p), p)?;
    Ok(q * q_inv)
}

/// CRT-RSA exponentiation: `m_p = c^dp mod p`, `m_q = c^dq mod q`, then
/// `m = (m_p - m_q) * gamma + m_q mod N` with the subtraction taken in `Z_N`.
///
/// Inconsistent parameters are not detected.
pub fn crt_exp(
    c: &Nat,
    dp: &Nat,
    dq: &Nat,
    p: &Nat,
    q: &Nat,
    gamma: &Nat,
    n: &Nat,
) -> Result<Nat> {
    check_modulus(n)?;
    let mp = mod_pow(c, dp, p)?;
    let mq = mod_pow(c, dq, q)?;
    Ok(crt_combine(&mp, &mq, gamma, n))
}

pub(crate) fn crt_combine(mp: &Nat, mq: &Nat, gamma: &Nat, n: &Nat) -> Nat {
    (mod_sub(mp, mq, n) * gamma + mq) % n
}
