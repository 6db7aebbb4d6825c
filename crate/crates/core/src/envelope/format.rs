//! Canonical text form of an envelope.
//!
//! ```text
//! `pragma protect begin_protected
//! `pragma protect version=1
//! `pragma protect encrypt_agent="ipvault"
//! `pragma protect control license="gold"            (common rights)
//! `pragma protect key_keyowner="Acme"               (one group per tool)
//! `pragma protect key_keyname="acme-key"
//! `pragma protect key_method="rsa"
//! `pragma protect control viewer="off"              (tool rights)
//! `pragma protect digest_method="hmac-sha256"
//! `pragma protect digest_block
//! <base64>
//! `pragma protect key_block
//! <base64>
//! `pragma protect data_method="aes128-cbc"
//! `pragma protect data_block
//! <base64>
//! `pragma protect end_protected
//! ```
//!
//! Base64 bodies are wrapped at exactly 64 columns. Strings are quoted with
//! `\"` and `\\` as the only escapes. Any input accepted by [`parse`]
//! re-serializes to the same bytes.

use std::fmt::Write as _;

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;

use super::{
    is_right_name, is_valid_string, CommonBlock, DataBlock, DataMethod, DigitalEnvelope, Right, ToolBlock,
    DIGEST_LEN, DIGEST_METHOD, IV_LEN, KEY_METHOD,
};
use crate::error::{Error, Result};
use crate::text::is_valid_keyname;

pub const BASE64_COLUMNS: usize = 64;
const PREFIX: &str = "`pragma protect ";

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        if matches!(ch, '"' | '\\') {
            out.push('\\');
        }
        out.push(ch);
    }
    out.push('"');
    out
}

fn write_rights(out: &mut String, rights: &[Right]) {
    for r in rights {
        let _ = writeln!(out, "{PREFIX}control {}={}", r.name, quote(&r.value));
    }
}

pub(super) fn write_common(out: &mut String, common: &CommonBlock) {
    write_rights(out, &common.rights);
}

pub(super) fn write_tool_header(out: &mut String, tool: &ToolBlock) {
    let _ = writeln!(out, "{PREFIX}key_keyowner={}", quote(&tool.keyowner));
    let _ = writeln!(out, "{PREFIX}key_keyname={}", quote(&tool.keyname));
    let _ = writeln!(out, "{PREFIX}key_method={}", quote(KEY_METHOD));
    write_rights(out, &tool.rights);
}

fn write_base64(out: &mut String, bytes: &[u8]) {
    let encoded = STANDARD.encode(bytes);
    for chunk in encoded.as_bytes().chunks(BASE64_COLUMNS) {
        out.push_str(std::str::from_utf8(chunk).expect("base64 is ASCII"));
        out.push('\n');
    }
}

pub fn serialize(env: &DigitalEnvelope) -> Vec<u8> {
    let mut out = String::new();
    let _ = writeln!(out, "{PREFIX}begin_protected");
    let _ = writeln!(out, "{PREFIX}version={}", env.version);
    let _ = writeln!(out, "{PREFIX}encrypt_agent={}", quote(&env.encrypt_agent));
    write_common(&mut out, &env.common);
    for tool in &env.tools {
        write_tool_header(&mut out, tool);
        let _ = writeln!(out, "{PREFIX}digest_method={}", quote(DIGEST_METHOD));
        let _ = writeln!(out, "{PREFIX}digest_block");
        write_base64(&mut out, &tool.digest);
        let _ = writeln!(out, "{PREFIX}key_block");
        write_base64(&mut out, &tool.wrapped_session_key);
    }
    let _ = writeln!(out, "{PREFIX}data_method={}", quote(env.data.method.token()));
    let _ = writeln!(out, "{PREFIX}data_block");
    write_base64(&mut out, &env.data.payload);
    let _ = writeln!(out, "{PREFIX}end_protected");
    out.into_bytes()
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Directive {
    Begin,
    Version(u32),
    EncryptAgent(String),
    Control(Right),
    KeyOwner(String),
    KeyName(String),
    KeyMethod(String),
    DigestMethod(String),
    DigestBlock,
    KeyBlock,
    DataMethod(String),
    DataBlock,
    End,
}

impl Directive {
    fn describe(&self) -> &'static str {
        match self {
            Directive::Begin => "begin_protected",
            Directive::Version(_) => "version",
            Directive::EncryptAgent(_) => "encrypt_agent",
            Directive::Control(_) => "control",
            Directive::KeyOwner(_) => "key_keyowner",
            Directive::KeyName(_) => "key_keyname",
            Directive::KeyMethod(_) => "key_method",
            Directive::DigestMethod(_) => "digest_method",
            Directive::DigestBlock => "digest_block",
            Directive::KeyBlock => "key_block",
            Directive::DataMethod(_) => "data_method",
            Directive::DataBlock => "data_block",
            Directive::End => "end_protected",
        }
    }
}

#[derive(Debug)]
enum Token<'a> {
    Directive(Directive),
    Base64(&'a str),
}

fn unquote(line_no: usize, s: &str) -> Result<String> {
    let inner = s
        .strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .filter(|_| s.len() >= 2)
        .ok_or_else(|| Error::parse(line_no, "expected a quoted string"))?;
    let mut out = String::with_capacity(inner.len());
    let mut chars = inner.chars();
    while let Some(ch) = chars.next() {
        match ch {
            '\\' => match chars.next() {
                Some(esc @ ('"' | '\\')) => out.push(esc),
                _ => return Err(Error::parse(line_no, "invalid escape in string")),
            },
            '"' => return Err(Error::parse(line_no, "unescaped quote in string")),
            c if c.is_control() => return Err(Error::parse(line_no, "control character in string")),
            c => out.push(c),
        }
    }
    Ok(out)
}

fn parse_directive(line_no: usize, rest: &str) -> Result<Directive> {
    let bare = match rest {
        "begin_protected" => Some(Directive::Begin),
        "end_protected" => Some(Directive::End),
        "digest_block" => Some(Directive::DigestBlock),
        "key_block" => Some(Directive::KeyBlock),
        "data_block" => Some(Directive::DataBlock),
        _ => None,
    };
    if let Some(d) = bare {
        return Ok(d);
    }
    if let Some(right) = rest.strip_prefix("control ") {
        let (name, value) = right
            .split_once('=')
            .ok_or_else(|| Error::parse(line_no, "control line without `=`"))?;
        if !is_right_name(name) {
            return Err(Error::parse(line_no, format!("invalid right name `{name}`")));
        }
        return Ok(Directive::Control(Right {
            name: name.to_owned(),
            value: unquote(line_no, value)?,
        }));
    }
    let (name, value) = rest
        .split_once('=')
        .ok_or_else(|| Error::parse(line_no, format!("unknown directive `{rest}`")))?;
    let directive = match name {
        "version" => {
            let canonical = !value.is_empty()
                && value.bytes().all(|b| b.is_ascii_digit())
                && (value == "0" || !value.starts_with('0'));
            let v = value
                .parse::<u32>()
                .ok()
                .filter(|_| canonical)
                .ok_or_else(|| Error::parse(line_no, "version must be a decimal integer"))?;
            Directive::Version(v)
        }
        "encrypt_agent" => Directive::EncryptAgent(unquote(line_no, value)?),
        "key_keyowner" => Directive::KeyOwner(unquote(line_no, value)?),
        "key_keyname" => Directive::KeyName(unquote(line_no, value)?),
        "key_method" => Directive::KeyMethod(unquote(line_no, value)?),
        "digest_method" => Directive::DigestMethod(unquote(line_no, value)?),
        "data_method" => Directive::DataMethod(unquote(line_no, value)?),
        _ => return Err(Error::parse(line_no, format!("unknown directive `{name}`"))),
    };
    Ok(directive)
}

fn tokenize(text: &str) -> Result<Vec<(usize, Token<'_>)>> {
    let Some(body) = text.strip_suffix('\n') else {
        return Err(Error::parse(text.split('\n').count().max(1), "missing final newline"));
    };
    body.split('\n')
        .enumerate()
        .map(|(i, line)| {
            let line_no = i + 1;
            if line.ends_with('\r') {
                return Err(Error::parse(line_no, "CR line ending"));
            }
            if line.starts_with('`') {
                let rest = line
                    .strip_prefix(PREFIX)
                    .ok_or_else(|| Error::parse(line_no, "expected `pragma protect"))?;
                Ok((line_no, Token::Directive(parse_directive(line_no, rest)?)))
            } else {
                Ok((line_no, Token::Base64(line)))
            }
        })
        .collect()
}

struct Parser<'a> {
    tokens: Vec<(usize, Token<'a>)>,
    pos: usize,
    eof_line: usize,
}

impl<'a> Parser<'a> {
    fn line(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.eof_line, |t| t.0)
    }

    fn peek(&self) -> Option<&Directive> {
        match self.tokens.get(self.pos) {
            Some((_, Token::Directive(d))) => Some(d),
            _ => None,
        }
    }

    fn next(&mut self, expected: &str) -> Result<(usize, Directive)> {
        let line = self.line();
        match self.tokens.get(self.pos) {
            None => Err(Error::parse(line, format!("unexpected end of file, expected {expected}"))),
            Some((_, Token::Base64(_))) => Err(Error::parse(line, format!("unexpected data line, expected {expected}"))),
            Some((_, Token::Directive(d))) => {
                let d = d.clone();
                self.pos += 1;
                Ok((line, d))
            }
        }
    }

    fn unexpected(line: usize, found: &Directive, expected: &str) -> Error {
        Error::parse(line, format!("found {}, expected {expected}", found.describe()))
    }

    fn expect_bare(&mut self, want: Directive) -> Result<()> {
        let (line, d) = self.next(want.describe())?;
        if d != want {
            return Err(Self::unexpected(line, &d, want.describe()));
        }
        Ok(())
    }

    fn base64_body(&mut self) -> Result<Vec<u8>> {
        let start = self.line();
        let mut encoded = String::new();
        let mut short_line: Option<usize> = None;
        while let Some((line, Token::Base64(text))) = self.tokens.get(self.pos) {
            if let Some(prev) = short_line {
                return Err(Error::parse(prev, "base64 line shorter than 64 columns before end of block"));
            }
            if text.len() > BASE64_COLUMNS {
                return Err(Error::parse(*line, format!("base64 line longer than {BASE64_COLUMNS} columns")));
            }
            if text.is_empty() {
                return Err(Error::parse(*line, "empty line in base64 block"));
            }
            if text.len() < BASE64_COLUMNS {
                short_line = Some(*line);
            }
            encoded.push_str(text);
            self.pos += 1;
        }
        if encoded.is_empty() {
            return Err(Error::parse(start, "empty base64 block"));
        }
        STANDARD
            .decode(&encoded)
            .map_err(|e| Error::parse(start, format!("bad base64: {e}")))
    }

    fn rights(&mut self) -> Vec<Right> {
        let mut rights = Vec::new();
        while let Some(Directive::Control(r)) = self.peek() {
            rights.push(r.clone());
            self.pos += 1;
        }
        rights
    }

    fn string(&mut self, what: &str) -> Result<(usize, String)> {
        let (line, d) = self.next(what)?;
        let value = match (&d, what) {
            (Directive::EncryptAgent(s), "encrypt_agent")
            | (Directive::KeyOwner(s), "key_keyowner")
            | (Directive::KeyName(s), "key_keyname")
            | (Directive::KeyMethod(s), "key_method")
            | (Directive::DigestMethod(s), "digest_method")
            | (Directive::DataMethod(s), "data_method") => s.clone(),
            _ => return Err(Self::unexpected(line, &d, what)),
        };
        Ok((line, value))
    }

    fn tool(&mut self) -> Result<ToolBlock> {
        let (_, keyowner) = self.string("key_keyowner")?;
        let (line, keyname) = self.string("key_keyname")?;
        if !is_valid_keyname(&keyname) {
            return Err(Error::parse(line, format!("invalid keyname {keyname:?}")));
        }
        let (line, method) = self.string("key_method")?;
        if method != KEY_METHOD {
            return Err(Error::parse(line, format!("unsupported key_method {method:?}")));
        }
        let rights = self.rights();
        let (line, digest_method) = self.string("digest_method")?;
        if digest_method != DIGEST_METHOD {
            return Err(Error::parse(line, format!("unsupported digest_method {digest_method:?}")));
        }
        self.expect_bare(Directive::DigestBlock)?;
        let line = self.line();
        let digest: [u8; DIGEST_LEN] = self
            .base64_body()?
            .try_into()
            .map_err(|_| Error::parse(line, format!("digest must be {DIGEST_LEN} bytes")))?;
        self.expect_bare(Directive::KeyBlock)?;
        let wrapped_session_key = self.base64_body()?;
        Ok(ToolBlock {
            keyowner,
            keyname,
            wrapped_session_key,
            rights,
            digest,
        })
    }

    fn envelope(&mut self) -> Result<DigitalEnvelope> {
        self.expect_bare(Directive::Begin)?;
        let (line, d) = self.next("version")?;
        let Directive::Version(version) = d else {
            return Err(Self::unexpected(line, &d, "version"));
        };
        let (_, encrypt_agent) = self.string("encrypt_agent")?;
        let common = CommonBlock { rights: self.rights() };

        let mut tools: Vec<ToolBlock> = Vec::new();
        while let Some(Directive::KeyOwner(_)) = self.peek() {
            let line = self.line();
            let tool = self.tool()?;
            if tools.iter().any(|t| t.keyname == tool.keyname) {
                return Err(Error::parse(line, format!("duplicate keyname {:?}", tool.keyname)));
            }
            tools.push(tool);
        }
        if tools.is_empty() {
            let line = self.line();
            return match self.peek() {
                Some(d) => Err(Self::unexpected(line, d, "key_keyowner")),
                None => Err(Error::parse(line, "unexpected end of file, expected key_keyowner")),
            };
        }

        let (line, token) = self.string("data_method")?;
        let method =
            DataMethod::from_token(&token).ok_or_else(|| Error::parse(line, format!("unsupported data_method {token:?}")))?;
        self.expect_bare(Directive::DataBlock)?;
        let line = self.line();
        let payload = self.base64_body()?;
        if payload.len() < IV_LEN + 16 || !(payload.len() - IV_LEN).is_multiple_of(16) {
            return Err(Error::parse(line, "data block must hold an IV and whole cipher blocks"));
        }
        self.expect_bare(Directive::End)?;
        if self.pos < self.tokens.len() {
            return Err(Error::parse(self.line(), "content after end_protected"));
        }
        Ok(DigitalEnvelope {
            version,
            encrypt_agent,
            common,
            tools,
            data: DataBlock { method, payload },
        })
    }
}

pub fn parse(bytes: &[u8]) -> Result<DigitalEnvelope> {
    let text = std::str::from_utf8(bytes).map_err(|e| {
        let line = bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1;
        Error::parse(line, "input is not UTF-8")
    })?;
    if text.is_empty() {
        return Err(Error::parse(1, "empty input"));
    }
    let tokens = tokenize(text)?;
    let eof_line = tokens.len() + 1;
    let env = Parser {
        tokens,
        pos: 0,
        eof_line,
    }
    .envelope()?;
    debug_assert!(is_valid_string(&env.encrypt_agent));
    Ok(env)
}
