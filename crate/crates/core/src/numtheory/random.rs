//! Sampling of naturals from an injected byte source.
//!
//! Everything is built on `fill_bytes` so a seeded generator yields the same
//! values on every platform.

use num_bigint::BigUint;
use num_traits::Zero;
use rand_core::RngCore;

use super::{is_unit, Nat};

/// Uniform in `[0, 2^bits)`.
pub fn random_bits<R: RngCore + ?Sized>(rng: &mut R, bits: u64) -> Nat {
    if bits == 0 {
        return Nat::zero();
    }
    let nbytes = bits.div_ceil(8) as usize;
    let mut buf = vec![0u8; nbytes];
    rng.fill_bytes(&mut buf);
    let excess = (nbytes as u64 * 8 - bits) as u32;
    buf[0] &= 0xffu8 >> excess;
    BigUint::from_bytes_be(&buf)
}

/// Uniform with exactly `bits` significant bits (top bit set).
pub fn random_exact_bits<R: RngCore + ?Sized>(rng: &mut R, bits: u64) -> Nat {
    assert!(bits > 0, "bit length must be positive");
    let mut v = random_bits(rng, bits);
    v.set_bit(bits - 1, true);
    v
}

/// Uniform in `[0, bound)`; `bound` must be positive.
pub fn random_below<R: RngCore + ?Sized>(rng: &mut R, bound: &Nat) -> Nat {
    assert!(!bound.is_zero(), "empty range");
    let bits = bound.bits();
    loop {
        let v = random_bits(rng, bits);
        if &v < bound {
            return v;
        }
    }
}

/// Uniform in `[lo, hi)`.
pub fn random_range<R: RngCore + ?Sized>(rng: &mut R, lo: &Nat, hi: &Nat) -> Nat {
    assert!(lo < hi, "empty range");
    lo + random_below(rng, &(hi - lo))
}

/// Uniform over the units of `Z_n`.
pub fn random_unit<R: RngCore + ?Sized>(rng: &mut R, n: &Nat) -> Nat {
    loop {
        let v = random_below(rng, n);
        if is_unit(&v, n) {
            return v;
        }
    }
}

/// Uniform `u32`, little-endian from four bytes.
pub fn random_u32<R: RngCore + ?Sized>(rng: &mut R) -> u32 {
    let mut buf = [0u8; 4];
    rng.fill_bytes(&mut buf);
    u32::from_le_bytes(buf)
}

/// Uniform in `[0, bound)` for small bounds.
pub fn random_index<R: RngCore + ?Sized>(rng: &mut R, bound: usize) -> usize {
    random_below(rng, &Nat::from(bound)).try_into().expect("fits in usize")
}

/// Fisher-Yates shuffle of `0..len`.
pub fn random_permutation<R: RngCore + ?Sized>(rng: &mut R, len: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..len).collect();
    for i in (1..len).rev() {
        let j = random_index(rng, i + 1);
        v.swap(i, j);
    }
    v
}
