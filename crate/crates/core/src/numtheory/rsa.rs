use num_integer::Integer;
use num_traits::{One, Zero};
use rand_core::RngCore;

use super::prime::gen_prime;
use super::{mod_inv, mod_pow, Nat};
use crate::error::{Error, Result};

/// Smallest modulus size accepted by the key generator.
pub const MIN_KEY_BITS: u64 = 32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RsaPublicKey {
    pub n: Nat,
    pub e: Nat,
}

impl RsaPublicKey {
    pub fn new(n: Nat, e: Nat) -> Result<Self> {
        if n.is_even() || n <= Nat::from(3u8) {
            return Err(Error::domain("RSA modulus must be odd and greater than 3"));
        }
        if e <= Nat::one() || e >= n {
            return Err(Error::domain("public exponent must satisfy 1 < e < N"));
        }
        Ok(Self { n, e })
    }

    /// Byte length of the modulus.
    pub fn size(&self) -> usize {
        self.n.bits().div_ceil(8) as usize
    }

    /// Textbook RSA encryption `m^e mod N`.
    pub fn encrypt_raw(&self, m: &Nat) -> Result<Nat> {
        if m >= &self.n {
            return Err(Error::domain("message representative out of range"));
        }
        mod_pow(m, &self.e, &self.n)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RsaPrivateKey {
    pub n: Nat,
    pub e: Nat,
    pub d: Nat,
    pub p: Nat,
    pub q: Nat,
    pub phi: Nat,
}

impl RsaPrivateKey {
    /// Builds a key from its components, checking `N = pq` and
    /// `ed = 1 (mod phi)`. Primality of `p` and `q` is not re-tested.
    pub fn from_parts(n: Nat, e: Nat, d: Nat, p: Nat, q: Nat) -> Result<Self> {
        if p <= Nat::one() || q <= Nat::one() || &p * &q != n {
            return Err(Error::domain("RSA factors do not multiply to the modulus"));
        }
        let phi = (&p - 1u8) * (&q - 1u8);
        if d.is_zero() || d >= phi {
            return Err(Error::domain("private exponent must satisfy 0 < d < phi"));
        }
        if !(&e * &d % &phi).is_one() {
            return Err(Error::domain("e*d is not 1 modulo phi"));
        }
        RsaPublicKey::new(n.clone(), e.clone())?;
        Ok(Self { n, e, d, p, q, phi })
    }

    /// Derives `d = e^-1 mod phi` from the factors.
    pub fn from_factors(p: Nat, q: Nat, e: Nat) -> Result<Self> {
        let n = &p * &q;
        let phi = (&p - 1u8) * (&q - 1u8);
        let d = mod_inv(&e, &phi)?;
        Self::from_parts(n, e, d, p, q)
    }

    pub fn public_key(&self) -> RsaPublicKey {
        RsaPublicKey {
            n: self.n.clone(),
            e: self.e.clone(),
        }
    }

    pub fn factors(&self) -> FactorPair {
        FactorPair::new(self.p.clone(), self.q.clone())
    }

    pub fn dp(&self) -> Nat {
        &self.d % (&self.p - 1u8)
    }

    pub fn dq(&self) -> Nat {
        &self.d % (&self.q - 1u8)
    }
}


/// Anything that computes the RSA decryption map `c -> c^d mod N`, whether
/// from a plain private key or from a white-box representation of `d`.
pub trait RsaDecryptor {
    fn modulus(&self) -> &Nat;

    /// `c^d mod N` for `c < N`.
    fn decrypt_raw(&self, c: &Nat) -> Result<Nat>;
}

impl RsaDecryptor for RsaPrivateKey {
    fn modulus(&self) -> &Nat {
        &self.n
    }

    fn decrypt_raw(&self, c: &Nat) -> Result<Nat> {
        if c >= &self.n {
            return Err(Error::domain("ciphertext representative out of range"));
        }
        mod_pow(c, &self.d, &self.n)
    }
}

/// The two factors of a modulus, smaller one first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactorPair {
    pub p: Nat,
    pub q: Nat,
}

impl FactorPair {
    pub fn new(a: Nat, b: Nat) -> Self {
        if a <= b {
            Self { p: a, q: b }
        } else {
            Self { p: b, q: a }
        }
    }

    pub fn product(&self) -> Nat {
        &self.p * &self.q
    }

    /// `(p - 1)(q - 1)`.
    pub fn phi(&self) -> Nat {
        (&self.p - 1u8) * (&self.q - 1u8)
    }

    /// True when both pairs hold the same factors in either order.
    pub fn same_as(&self, p: &Nat, q: &Nat) -> bool {
        (&self.p == p && &self.q == q) || (&self.p == q && &self.q == p)
    }
}

/// Generates an RSA key whose modulus has exactly `bits` bits.
///
/// Both primes carry their two top bits set so the product never loses a
/// bit; primes with `gcd(e, prime - 1) != 1` are discarded.
pub fn gen_rsa_keypair<R: RngCore + ?Sized>(bits: u64, e: &Nat, rng: &mut R) -> Result<RsaPrivateKey> {
    if bits < MIN_KEY_BITS {
        return Err(Error::domain(format!("key size {bits} is below {MIN_KEY_BITS} bits")));
    }
    if e.is_even() || e < &Nat::from(3u8) {
        return Err(Error::domain("public exponent must be odd and at least 3"));
    }
    if e.bits() >= bits {
        return Err(Error::domain("public exponent too large for the key size"));
    }
    let p_bits = bits - bits / 2;
    let q_bits = bits / 2;
    let coprime = |cand: &Nat| e.gcd(&(cand - 1u8)).is_one();
    let p = gen_prime(p_bits, rng, coprime);
    let q = gen_prime(q_bits, rng, |c| coprime(c) && c != &p);
    let key = RsaPrivateKey::from_factors(p, q, e.clone())?;
    debug_assert_eq!(key.n.bits(), bits);
    Ok(key)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn toy_key() {
        let key = RsaPrivateKey::from_factors(Nat::from(7u8), Nat::from(11u8), Nat::from(7u8)).unwrap();
        assert_eq!(key.d, Nat::from(43u8));
        assert_eq!(key.phi, Nat::from(60u8));
        assert_eq!(key.dp(), Nat::from(1u8));
        assert_eq!(key.dq(), Nat::from(3u8));
    }

    #[test]
    fn from_parts_checks_invariants() {
        let n = |v: u32| Nat::from(v);
        assert!(RsaPrivateKey::from_parts(n(77), n(7), n(43), n(7), n(11)).is_ok());
        assert!(RsaPrivateKey::from_parts(n(77), n(7), n(44), n(7), n(11)).is_err());
        assert!(RsaPrivateKey::from_parts(n(78), n(7), n(43), n(7), n(11)).is_err());
        assert!(RsaPrivateKey::from_parts(n(77), n(7), n(103), n(7), n(11)).is_err());
    }

    #[test]
    fn keygen_sizes_and_determinism() {
        let e = Nat::from(65537u32);
        for (bits, seed) in [(32u64, 5u64), (33, 6), (64, 7), (512, 1)] {
            let a = gen_rsa_keypair(bits, &e, &mut ChaCha20Rng::seed_from_u64(seed)).unwrap();
            let b = gen_rsa_keypair(bits, &e, &mut ChaCha20Rng::seed_from_u64(seed)).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.n.bits(), bits);
            assert!((&a.e * &a.d % &a.phi).is_one());
        }
    }

    #[test]
    fn keygen_round_trip() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let key = gen_rsa_keypair(256, &Nat::from(3u8), &mut rng).unwrap();
        let pk = key.public_key();
        for m in [0u32, 1, 2, 12345, 0xdead_beef] {
            let m = Nat::from(m);
            let c = pk.encrypt_raw(&m).unwrap();
            assert_eq!(mod_pow(&c, &key.d, &key.n).unwrap(), m);
        }
    }

    #[test]
    fn keygen_rejects_bad_parameters() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        assert!(gen_rsa_keypair(31, &Nat::from(65537u32), &mut rng).is_err());
        assert!(gen_rsa_keypair(512, &Nat::from(4u8), &mut rng).is_err());
        assert!(gen_rsa_keypair(512, &Nat::from(1u8), &mut rng).is_err());
    }
}
