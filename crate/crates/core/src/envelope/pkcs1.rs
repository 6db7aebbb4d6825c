//! PKCS#1 v1.5 type-2 encryption padding for wrapping session keys.

use num_bigint::BigUint;
use num_traits::Zero;
use rand_core::RngCore;

use crate::error::{Error, Result};
use crate::numtheory::{RsaDecryptor, RsaPublicKey};

/// Fixed overhead of the padding: `00 02`, at least eight random bytes, `00`.
pub const PKCS1_OVERHEAD: usize = 11;

fn i2osp(x: &BigUint, len: usize) -> Option<Vec<u8>> {
    let bytes = if x.is_zero() { Vec::new() } else { x.to_bytes_be() };
    if bytes.len() > len {
        return None;
    }
    let mut out = vec![0u8; len - bytes.len()];
    out.extend_from_slice(&bytes);
    Some(out)
}

/// `RSAES-PKCS1-v1_5-ENCRYPT`: `00 02 PS 00 M` raised to `e`.
pub fn wrap<R: RngCore + ?Sized>(key: &RsaPublicKey, msg: &[u8], rng: &mut R) -> Result<Vec<u8>> {
    let k = key.size();
    if k < msg.len() + PKCS1_OVERHEAD {
        return Err(Error::KeyTooSmall {
            modulus_bytes: k,
            key_bytes: msg.len(),
        });
    }
    let ps_len = k - msg.len() - 3;
    let mut em = Vec::with_capacity(k);
    em.extend_from_slice(&[0x00, 0x02]);
    let mut ps = vec![0u8; ps_len];
    rng.fill_bytes(&mut ps);
    for b in ps.iter_mut() {
        while *b == 0 {
            let mut one = [0u8; 1];
            rng.fill_bytes(&mut one);
            *b = one[0];
        }
    }
    em.extend_from_slice(&ps);
    em.push(0x00);
    em.extend_from_slice(msg);

    let m = BigUint::from_bytes_be(&em);
    let c = key.encrypt_raw(&m)?;
    Ok(i2osp(&c, k).expect("c < N fits in k bytes"))
}

/// `RSAES-PKCS1-v1_5-DECRYPT` driven by any decryptor.
pub fn unwrap(decryptor: &dyn RsaDecryptor, ciphertext: &[u8]) -> Result<Vec<u8>> {
    let n = decryptor.modulus();
    let k = n.bits().div_ceil(8) as usize;
    if ciphertext.len() != k || k < PKCS1_OVERHEAD {
        return Err(Error::Unwrap("ciphertext length does not match the modulus"));
    }
    let c = BigUint::from_bytes_be(ciphertext);
    if &c >= n {
        return Err(Error::Unwrap("ciphertext representative out of range"));
    }
    let m = decryptor.decrypt_raw(&c)?;
    let em = i2osp(&m, k).ok_or(Error::Unwrap("decryption out of range"))?;
    if em[0] != 0x00 || em[1] != 0x02 {
        return Err(Error::Unwrap("bad padding header"));
    }
    let sep = em[2..]
        .iter()
        .position(|&b| b == 0)
        .ok_or(Error::Unwrap("missing padding separator"))?
        + 2;
    if sep - 2 < 8 {
        return Err(Error::Unwrap("padding string too short"));
    }
    Ok(em[sep + 1..].to_vec())
}
