use num_integer::Integer;
use num_traits::One;
use rand_core::RngCore;

use super::random::random_range;
use super::{mod_pow, FactorPair, Nat};
use crate::error::{Error, Result};

/// Random bases tried by [`miller_factor`] before giving up.
pub const MILLER_MAX_BASES: usize = 128;

/// Factors `N` from any exponent `d` with `e*d = 1 (mod phi(N))`, which
/// includes every `d + k*phi(N)`.
pub fn miller_factor<R: RngCore + ?Sized>(n: &Nat, e: &Nat, d: &Nat, rng: &mut R) -> Result<FactorPair> {
    miller_factor_bounded(n, e, d, rng, MILLER_MAX_BASES).map(|(pair, _)| pair)
}

/// Like [`miller_factor`] with an explicit cap on random bases. Also returns
/// how many bases were drawn.
///
/// Write `e*d - 1 = 2^s * t` with `t` odd. For a random `g`, square `g^t`
/// until it reaches 1; the last value before 1, if not `-1`, is a nontrivial
/// square root of 1 and `gcd(x - 1, N)` splits `N`.
pub fn miller_factor_bounded<R: RngCore + ?Sized>(
    n: &Nat,
    e: &Nat,
    d: &Nat,
    rng: &mut R,
    max_bases: usize,
) -> Result<(FactorPair, usize)> {
    if *n <= Nat::from(3u8) {
        return Err(Error::domain("modulus too small to factor"));
    }
    if n.is_even() {
        return Ok((FactorPair::new(Nat::from(2u8), n >> 1u32), 0));
    }
    let ed = e * d;
    if ed <= Nat::one() {
        return Err(Error::domain("e*d - 1 must be positive"));
    }
    let k = ed - 1u8;
    let s = k.trailing_zeros().expect("k > 0");
    let t = &k >> s;

    let two = Nat::from(2u8);
    let n_minus_1 = n - 1u8;
    for trial in 1..=max_bases {
        let g = random_range(rng, &two, &n_minus_1);
        let common = g.gcd(n);
        if !common.is_one() {
            return Ok((FactorPair::new(common.clone(), n / common), trial));
        }
        let mut x = mod_pow(&g, &t, n)?;
        if x.is_one() {
            continue;
        }
        for _ in 0..s {
            let y = &x * &x % n;
            if y.is_one() {
                if x != n_minus_1 {
                    let p = (&x - 1u8).gcd(n);
                    debug_assert!(!p.is_one() && &p != n);
                    let q = n / &p;
                    return Ok((FactorPair::new(p, q), trial));
                }
                break;
            }
            x = y;
        }
    }
    Err(Error::FactorFailure { trials: max_bases })
}
