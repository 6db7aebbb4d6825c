//! Keystore files for plain RSA keys.
//!
//! Private: `keyname`, `n`, `e`, `d`, `p`, `q`. Public: `keyname`, `n`, `e`.

use crate::error::{Error, Result};
use crate::numtheory::{RsaPrivateKey, RsaPublicKey};
use crate::text::{is_valid_keyname, RecordReader, RecordWriter};

pub fn write_private_key(keyname: &str, key: &RsaPrivateKey) -> String {
    debug_assert!(is_valid_keyname(keyname));
    RecordWriter::new()
        .field("keyname", keyname)
        .hex("n", &key.n)
        .hex("e", &key.e)
        .hex("d", &key.d)
        .hex("p", &key.p)
        .hex("q", &key.q)
        .finish()
}

pub fn write_public_key(keyname: &str, key: &RsaPublicKey) -> String {
    debug_assert!(is_valid_keyname(keyname));
    RecordWriter::new()
        .field("keyname", keyname)
        .hex("n", &key.n)
        .hex("e", &key.e)
        .finish()
}

pub fn parse_private_key(text: &str) -> Result<(String, RsaPrivateKey)> {
    let mut r = RecordReader::new(text)?;
    let keyname = r.name("keyname")?;
    let n = r.hex("n")?;
    let e = r.hex("e")?;
    let d = r.hex("d")?;
    let p = r.hex("p")?;
    let q = r.hex("q")?;
    r.end()?;
    let key = RsaPrivateKey::from_parts(n, e, d, p, q).map_err(|err| Error::parse(1, err.to_string()))?;
    Ok((keyname, key))
}

pub fn parse_public_key(text: &str) -> Result<(String, RsaPublicKey)> {
    let mut r = RecordReader::new(text)?;
    let keyname = r.name("keyname")?;
    let n = r.hex("n")?;
    let e = r.hex("e")?;
    r.end()?;
    let key = RsaPublicKey::new(n, e).map_err(|err| Error::parse(1, err.to_string()))?;
    Ok((keyname, key))
}
