//! The pragma-protected digital envelope: common rights, one tool block per
//! recipient carrying an RSA-wrapped copy of the session key and an HMAC over
//! the rights, and the AES-CBC encrypted IP.
//!
//! The HMAC covers the common block and the tool header only. The data block
//! carries no integrity protection at all, matching the envelope design being
//! modeled.

mod format;
pub mod pkcs1;

use std::collections::HashSet;

use aes::{Aes128, Aes256};
use cbc::cipher::block_padding::Pkcs7;
use cbc::cipher::{BlockDecryptMut, BlockEncryptMut, KeyIvInit};
use hmac::{Hmac, Mac};
use rand_core::RngCore;
use sha2::Sha256;

pub use format::{parse, serialize, BASE64_COLUMNS};

use crate::error::{Error, Result};
use crate::numtheory::{RsaDecryptor, RsaPublicKey};

pub const ENVELOPE_VERSION: u32 = 1;
pub const ENCRYPT_AGENT: &str = "ipvault";
pub const KEY_METHOD: &str = "rsa";
pub const DIGEST_METHOD: &str = "hmac-sha256";
pub const DIGEST_LEN: usize = 32;
pub const IV_LEN: usize = 16;

type HmacSha256 = Hmac<Sha256>;

/// A `name="value"` right. Names match `[a-z_][a-z0-9_]*`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Right {
    pub name: String,
    pub value: String,
}

impl Right {
    pub fn new(name: impl Into<String>, value: impl Into<String>) -> Result<Self> {
        let right = Self {
            name: name.into(),
            value: value.into(),
        };
        if !is_right_name(&right.name) {
            return Err(Error::domain(format!("invalid right name {:?}", right.name)));
        }
        if !is_valid_string(&right.value) {
            return Err(Error::domain("right value contains control characters"));
        }
        Ok(right)
    }
}

pub(crate) fn is_right_name(s: &str) -> bool {
    let mut bytes = s.bytes();
    matches!(bytes.next(), Some(b'a'..=b'z' | b'_'))
        && bytes.all(|b| matches!(b, b'a'..=b'z' | b'0'..=b'9' | b'_'))
}

pub(crate) fn is_valid_string(s: &str) -> bool {
    !s.chars().any(char::is_control)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CommonBlock {
    pub rights: Vec<Right>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToolBlock {
    pub keyowner: String,
    pub keyname: String,
    pub wrapped_session_key: Vec<u8>,
    pub rights: Vec<Right>,
    pub digest: [u8; DIGEST_LEN],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataMethod {
    Aes128Cbc,
    Aes256Cbc,
}

impl DataMethod {
    pub fn token(self) -> &'static str {
        match self {
            DataMethod::Aes128Cbc => "aes128-cbc",
            DataMethod::Aes256Cbc => "aes256-cbc",
        }
    }

    pub fn from_token(token: &str) -> Option<Self> {
        match token {
            "aes128-cbc" => Some(DataMethod::Aes128Cbc),
            "aes256-cbc" => Some(DataMethod::Aes256Cbc),
            _ => None,
        }
    }

    pub fn key_len(self) -> usize {
        match self {
            DataMethod::Aes128Cbc => 16,
            DataMethod::Aes256Cbc => 32,
        }
    }
}

/// IV followed by the CBC ciphertext.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataBlock {
    pub method: DataMethod,
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DigitalEnvelope {
    pub version: u32,
    pub encrypt_agent: String,
    pub common: CommonBlock,
    pub tools: Vec<ToolBlock>,
    pub data: DataBlock,
}

impl DigitalEnvelope {
    pub fn tool(&self, keyname: &str) -> Option<&ToolBlock> {
        self.tools.iter().find(|t| t.keyname == keyname)
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct SessionKey(Vec<u8>);

impl SessionKey {
    pub fn new(bytes: Vec<u8>) -> Result<Self> {
        if !matches!(bytes.len(), 16 | 32) {
            return Err(Error::domain("session key must be 16 or 32 bytes"));
        }
        Ok(Self(bytes))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl std::fmt::Debug for SessionKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SessionKey({} bytes)", self.0.len())
    }
}

/// One addressee of an envelope.
#[derive(Debug, Clone)]
pub struct Recipient {
    pub keyowner: String,
    pub keyname: String,
    pub public_key: RsaPublicKey,
    pub rights: Vec<Right>,
}

/// What a successful decryption hands back to the tool.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decrypted {
    pub plaintext: Vec<u8>,
    pub common: CommonBlock,
    pub tool_rights: Vec<Right>,
}

/// Bytes covered by a tool block's HMAC: the serialized common `control`
/// lines followed by the tool header (`key_keyowner` through its last
/// `control` line).
pub fn digest_input(common: &CommonBlock, tool: &ToolBlock) -> Vec<u8> {
    let mut out = String::new();
    format::write_common(&mut out, common);
    format::write_tool_header(&mut out, tool);
    out.into_bytes()
}

fn compute_digest(session: &SessionKey, common: &CommonBlock, tool: &ToolBlock) -> [u8; DIGEST_LEN] {
    let mut mac = HmacSha256::new_from_slice(session.as_bytes()).expect("HMAC accepts any key length");
    mac.update(&digest_input(common, tool));
    mac.finalize().into_bytes().into()
}

pub fn verify_digest(session: &SessionKey, common: &CommonBlock, tool: &ToolBlock) -> bool {
    let mut mac = HmacSha256::new_from_slice(session.as_bytes()).expect("HMAC accepts any key length");
    mac.update(&digest_input(common, tool));
    mac.verify_slice(&tool.digest).is_ok()
}

fn check_rights(rights: &[Right]) -> Result<()> {
    for r in rights {
        Right::new(r.name.clone(), r.value.clone())?;
    }
    Ok(())
}

/// Protects `plaintext` for every recipient under one fresh session key.
///
/// Randomness is drawn in a fixed order (session key, each recipient's
/// padding, IV) so a seeded source reproduces the envelope byte for byte.
pub fn encrypt_ip<R: RngCore + ?Sized>(
    plaintext: &[u8],
    common: &CommonBlock,
    recipients: &[Recipient],
    method: DataMethod,
    rng: &mut R,
) -> Result<DigitalEnvelope> {
    if plaintext.is_empty() {
        return Err(Error::domain("empty IP is not allowed"));
    }
    if recipients.is_empty() {
        return Err(Error::domain("at least one recipient is required"));
    }
    check_rights(&common.rights)?;
    let mut seen = HashSet::new();
    for r in recipients {
        if !crate::text::is_valid_keyname(&r.keyname) {
            return Err(Error::domain(format!("invalid keyname {:?}", r.keyname)));
        }
        if !seen.insert(r.keyname.as_str()) {
            return Err(Error::domain(format!("duplicate keyname {:?}", r.keyname)));
        }
        if !is_valid_string(&r.keyowner) {
            return Err(Error::domain("keyowner contains control characters"));
        }
        check_rights(&r.rights)?;
        let needed = method.key_len() + pkcs1::PKCS1_OVERHEAD;
        if r.public_key.size() < needed {
            return Err(Error::KeyTooSmall {
                modulus_bytes: r.public_key.size(),
                key_bytes: method.key_len(),
            });
        }
    }

    let mut key_bytes = vec![0u8; method.key_len()];
    rng.fill_bytes(&mut key_bytes);
    let session = SessionKey(key_bytes);

    let mut tools = Vec::with_capacity(recipients.len());
    for r in recipients {
        let wrapped = pkcs1::wrap(&r.public_key, session.as_bytes(), rng)?;
        let mut tool = ToolBlock {
            keyowner: r.keyowner.clone(),
            keyname: r.keyname.clone(),
            wrapped_session_key: wrapped,
            rights: r.rights.clone(),
            digest: [0u8; DIGEST_LEN],
        };
        tool.digest = compute_digest(&session, common, &tool);
        tools.push(tool);
    }

    let mut iv = [0u8; IV_LEN];
    rng.fill_bytes(&mut iv);
    let mut payload = iv.to_vec();
    payload.extend_from_slice(&cbc_encrypt(method, session.as_bytes(), &iv, plaintext));

    Ok(DigitalEnvelope {
        version: ENVELOPE_VERSION,
        encrypt_agent: ENCRYPT_AGENT.to_owned(),
        common: common.clone(),
        tools,
        data: DataBlock { method, payload },
    })
}

pub fn unwrap_session_key(tool: &ToolBlock, key: &dyn RsaDecryptor) -> Result<SessionKey> {
    let bytes = pkcs1::unwrap(key, &tool.wrapped_session_key)?;
    if !matches!(bytes.len(), 16 | 32) {
        return Err(Error::Unwrap("session key length is neither 16 nor 32 bytes"));
    }
    Ok(SessionKey(bytes))
}

/// Unwraps the session key of `keyname`'s tool block, checks that block's
/// digest, then decrypts the data block.
pub fn decrypt_ip(env: &DigitalEnvelope, key: &dyn RsaDecryptor, keyname: &str) -> Result<Decrypted> {
    let tool = env
        .tool(keyname)
        .ok_or_else(|| Error::NoSuchToolBlock(keyname.to_owned()))?;
    let session = unwrap_session_key(tool, key)?;
    if !verify_digest(&session, &env.common, tool) {
        return Err(Error::DigestMismatch {
            keyname: keyname.to_owned(),
        });
    }
    if session.as_bytes().len() != env.data.method.key_len() {
        return Err(Error::Unwrap("session key length does not match data_method"));
    }
    let plaintext = decrypt_data(&env.data, &session)?;
    Ok(Decrypted {
        plaintext,
        common: env.common.clone(),
        tool_rights: tool.rights.clone(),
    })
}

/// Decrypts the data block with an already recovered session key.
pub fn decrypt_data(data: &DataBlock, session: &SessionKey) -> Result<Vec<u8>> {
    if session.as_bytes().len() != data.method.key_len() {
        return Err(Error::domain("session key length does not match data_method"));
    }
    let (iv, ct) = data.payload.split_at(IV_LEN.min(data.payload.len()));
    if iv.len() != IV_LEN || ct.is_empty() || ct.len() % 16 != 0 {
        return Err(Error::Padding);
    }
    cbc_decrypt(data.method, session.as_bytes(), iv, ct)
}

pub(crate) fn cbc_encrypt(method: DataMethod, key: &[u8], iv: &[u8], plaintext: &[u8]) -> Vec<u8> {
    match method {
        DataMethod::Aes128Cbc => cbc::Encryptor::<Aes128>::new_from_slices(key, iv)
            .expect("key and IV lengths checked")
            .encrypt_padded_vec_mut::<Pkcs7>(plaintext),
        DataMethod::Aes256Cbc => cbc::Encryptor::<Aes256>::new_from_slices(key, iv)
            .expect("key and IV lengths checked")
            .encrypt_padded_vec_mut::<Pkcs7>(plaintext),
    }
}

pub(crate) fn cbc_decrypt(method: DataMethod, key: &[u8], iv: &[u8], ct: &[u8]) -> Result<Vec<u8>> {
    let out = match method {
        DataMethod::Aes128Cbc => cbc::Decryptor::<Aes128>::new_from_slices(key, iv)
            .expect("key and IV lengths checked")
            .decrypt_padded_vec_mut::<Pkcs7>(ct),
        DataMethod::Aes256Cbc => cbc::Decryptor::<Aes256>::new_from_slices(key, iv)
            .expect("key and IV lengths checked")
            .decrypt_padded_vec_mut::<Pkcs7>(ct),
    };
    out.map_err(|_| Error::Padding)
}
