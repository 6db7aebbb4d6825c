//! Canonical text forms shared by every on-disk format: lowercase hex
//! integers and LF-terminated `name=value` records in fixed field order.

use std::fmt::Write as _;

use num_bigint::BigUint;
use num_traits::Num;

use crate::error::{Error, Result};
use crate::numtheory::Nat;

/// Lowercase hex without leading zeros; zero is `"0"`.
pub fn to_hex(n: &Nat) -> String {
    format!("{n:x}")
}

/// Inverse of [`to_hex`]. Rejects uppercase digits, prefixes, signs and
/// leading zeros so every integer has exactly one spelling.
pub fn parse_hex(s: &str) -> Option<Nat> {
    if s.is_empty() || (s.len() > 1 && s.starts_with('0')) {
        return None;
    }
    if !s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
        return None;
    }
    BigUint::from_str_radix(s, 16).ok()
}

/// Builds a record file one field at a time.
#[derive(Debug, Default)]
pub struct RecordWriter {
    out: String,
}

impl RecordWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn field(&mut self, name: &str, value: &str) -> &mut Self {
        debug_assert!(!value.contains('\n'));
        let _ = writeln!(self.out, "{name}={value}");
        self
    }

    pub fn hex(&mut self, name: &str, value: &Nat) -> &mut Self {
        self.field(name, &to_hex(value))
    }

    pub fn hex_list(&mut self, name: &str, values: &[Nat]) -> &mut Self {
        let joined = values.iter().map(to_hex).collect::<Vec<_>>().join(",");
        self.field(name, &joined)
    }

    pub fn finish(&mut self) -> String {
        std::mem::take(&mut self.out)
    }
}

/// Reads a record file whose fields must appear in a fixed order.
#[derive(Debug)]
pub struct RecordReader<'a> {
    lines: Vec<&'a str>,
    pos: usize,
}

impl<'a> RecordReader<'a> {
    pub fn new(text: &'a str) -> Result<Self> {
        if text.is_empty() {
            return Err(Error::parse(1, "empty file"));
        }
        let Some(body) = text.strip_suffix('\n') else {
            return Err(Error::parse(text.lines().count(), "missing final newline"));
        };
        let lines: Vec<&str> = body.split('\n').collect();
        if let Some(i) = lines.iter().position(|l| l.ends_with('\r')) {
            return Err(Error::parse(i + 1, "CR line ending"));
        }
        Ok(Self { lines, pos: 0 })
    }

    /// 1-based number of the next line.
    pub fn line_no(&self) -> usize {
        self.pos + 1
    }

    pub fn peek_name(&self) -> Option<&'a str> {
        self.lines.get(self.pos).map(|l| l.split('=').next().unwrap_or(""))
    }

    pub fn is_done(&self) -> bool {
        self.pos >= self.lines.len()
    }

    pub fn field(&mut self, name: &str) -> Result<&'a str> {
        let line_no = self.line_no();
        let Some(line) = self.lines.get(self.pos) else {
            return Err(Error::parse(line_no, format!("expected field `{name}`, found end of file")));
        };
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::parse(line_no, format!("expected `{name}=...`")));
        };
        if key != name {
            return Err(Error::parse(line_no, format!("expected field `{name}`, found `{key}`")));
        }
        self.pos += 1;
        Ok(value)
    }

    /// Reads a field that must hold exactly `expected`.
    pub fn literal(&mut self, name: &str, expected: &str) -> Result<()> {
        let line_no = self.line_no();
        let value = self.field(name)?;
        if value != expected {
            return Err(Error::parse(line_no, format!("`{name}` must be `{expected}`, found `{value}`")));
        }
        Ok(())
    }

    /// A name field: nonempty, printable, no `=` or whitespace.
    pub fn name(&mut self, name: &str) -> Result<String> {
        let line_no = self.line_no();
        let value = self.field(name)?;
        if !is_valid_keyname(value) {
            return Err(Error::parse(line_no, format!("invalid `{name}` value `{value}`")));
        }
        Ok(value.to_owned())
    }

    pub fn hex(&mut self, name: &str) -> Result<Nat> {
        let line_no = self.line_no();
        let value = self.field(name)?;
        parse_hex(value).ok_or_else(|| Error::parse(line_no, format!("`{name}` is not canonical hex")))
    }

    pub fn hex_list(&mut self, name: &str) -> Result<Vec<Nat>> {
        let line_no = self.line_no();
        let value = self.field(name)?;
        value
            .split(',')
            .map(|v| parse_hex(v).ok_or_else(|| Error::parse(line_no, format!("`{name}` holds non-canonical hex `{v}`"))))
            .collect()
    }

    pub fn end(&self) -> Result<()> {
        if !self.is_done() {
            return Err(Error::parse(self.line_no(), "unexpected trailing field"));
        }
        Ok(())
    }
}

/// Keynames appear in file names and in envelope headers, so they are kept
/// to a conservative alphabet.
pub fn is_valid_keyname(s: &str) -> bool {
    !s.is_empty()
        && s.len() <= 128
        && s
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_' | b'.'))
        && !s.starts_with('.')
}
