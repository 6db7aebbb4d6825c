use std::sync::OnceLock;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand_core::RngCore;

use super::random::{random_exact_bits, random_range};
use super::{mod_pow, Nat};

/// Rounds of Miller-Rabin applied to every generated prime.
pub const MILLER_RABIN_ROUNDS: usize = 64;

fn small_primes() -> &'static [u32] {
    static PRIMES: OnceLock<Vec<u32>> = OnceLock::new();
    PRIMES.get_or_init(|| {
        const LIMIT: usize = 2000;
        let mut sieve = vec![true; LIMIT];
        sieve[0] = false;
        sieve[1] = false;
        for i in 2..LIMIT {
            if sieve[i] {
                for j in (i * i..LIMIT).step_by(i) {
                    sieve[j] = false;
                }
            }
        }
        (0..LIMIT as u32).filter(|&i| sieve[i as usize]).collect()
    })
}

/// Miller-Rabin with `rounds` random bases drawn from `rng`, after trial
/// division by the primes below 2000.
pub fn is_probable_prime<R: RngCore + ?Sized>(n: &Nat, rounds: usize, rng: &mut R) -> bool {
    if let Some(small) = n.to_u32() {
        if small < 2 {
            return false;
        }
        if small < 2000 * 2000 {
            return small_primes()
                .iter()
                .take_while(|&&p| p * p <= small)
                .all(|&p| small % p != 0);
        }
    }
    for &p in small_primes() {
        if (n % p).is_zero() {
            return false;
        }
    }

    let one = BigUint::one();
    let n_minus_1 = n - &one;
    let s = n_minus_1.trailing_zeros().expect("n > 1");
    let t = &n_minus_1 >> s;
    let two = BigUint::from(2u8);

    'bases: for _ in 0..rounds {
        let a = random_range(rng, &two, &n_minus_1);
        let mut x = mod_pow(&a, &t, n).expect("n >= 2");
        if x.is_one() || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = &x * &x % n;
            if x == n_minus_1 {
                continue 'bases;
            }
        }
        return false;
    }
    true
}

/// A prime of exactly `bits` bits with its two top bits set, for which
/// `accept` holds. Bits below 3 are not supported.
pub fn gen_prime<R, F>(bits: u64, rng: &mut R, accept: F) -> Nat
where
    R: RngCore + ?Sized,
    F: Fn(&Nat) -> bool,
{
    assert!(bits >= 3, "prime size too small");
    loop {
        let mut candidate = random_exact_bits(rng, bits);
        candidate.set_bit(bits - 2, true);
        candidate.set_bit(0, true);
        if accept(&candidate) && is_probable_prime(&candidate, MILLER_RABIN_ROUNDS, rng) {
            return candidate;
        }
    }
}
