//! Permuted-window white-box.
//!
//! Decryption runs fixed-window exponentiation over `w`-bit chunks of `d`
//! (`w = 5`, so tables of 32 powers). The chunks are stored permuted,
//! `dhat[i] = pi^-1(d_i)`, and the power table is replaced by
//! `chat[i] = r_{pi(i)} * c^{pi(i)}`, produced from the ciphertext by the
//! affine map `A*s + t` with `s_i = (alpha*c + beta)^i` and
//! `t = -c^32 * t'`. A constant `r = prod r_{d_i}^(-32^i)` cancels the
//! randomizers at the end.
//!
//! `A*M`, with `M` the binomial matrix sending `(1, c, .., c^32)` to `s`,
//! has row `i` equal to `r_{pi(i)} * e_{pi(i)}` followed by `t'_i`. Both
//! attacks below exploit that.

use num_traits::{One, Zero};
use rand_core::RngCore;

use super::{check_ciphertext, ModMatrix, RecoveredKey};
use crate::error::{Error, Result};
use crate::numtheory::random::{random_below, random_permutation, random_unit};
use crate::numtheory::{miller_factor, mod_inv, mod_neg, mod_pow, is_unit, Nat, RsaDecryptor, RsaPrivateKey};
use crate::text::{RecordReader, RecordWriter};

pub const SCHEME: &str = "window";
pub const SECRETS_SCHEME: &str = "window-secrets";

/// Window width of the deployed scheme.
pub const WINDOW_BITS: u32 = 5;

/// Largest width supported by the reduced-table variants.
pub const MAX_WINDOW_BITS: u32 = 5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowWhiteBox {
    pub keyname: String,
    pub n: Nat,
    /// Window width `w`; the table holds `2^w` entries.
    pub width: u32,
    /// `2^w x (2^w + 1)`.
    pub a: ModMatrix,
    pub tprime: Vec<Nat>,
    pub alpha: Nat,
    pub beta: Nat,
    /// Permuted chunks, least significant first.
    pub dhat: Vec<u8>,
    pub r_const: Nat,
}

/// Generator-side secrets. Never part of a white-box file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowSecrets {
    pub pi: Vec<usize>,
    pub rvec: Vec<Nat>,
    pub d: Nat,
}

fn table_len(width: u32) -> usize {
    1usize << width
}

fn check_width(width: u32) -> Result<()> {
    if !(1..=MAX_WINDOW_BITS).contains(&width) {
        return Err(Error::domain(format!("window width must be in 1..={MAX_WINDOW_BITS}")));
    }
    Ok(())
}

/// Number of chunks used for a modulus: `ceil(bits(N) / w)`.
pub fn chunk_count(n: &Nat, width: u32) -> usize {
    n.bits().div_ceil(width as u64) as usize
}

/// Splits `d` into `count` little-endian `width`-bit chunks.
pub fn chunk_exponent(d: &Nat, count: usize, width: u32) -> Result<Vec<u8>> {
    check_width(width)?;
    if d.bits() > count as u64 * width as u64 {
        return Err(Error::domain("exponent does not fit in the requested chunks"));
    }
    let mask = (1u64 << width) - 1;
    Ok((0..count)
        .map(|i| {
            let mut v = 0u64;
            for b in 0..width as u64 {
                if d.bit(i as u64 * width as u64 + b) {
                    v |= 1 << b;
                }
            }
            (v & mask) as u8
        })
        .collect())
}

/// Five-bit chunks, the deployed layout.
pub fn chunk_key(d: &Nat, count: usize) -> Result<Vec<u8>> {
    chunk_exponent(d, count, WINDOW_BITS)
}

/// `sum chunks[i] * 2^(w*i)`.
pub fn reassemble(chunks: &[u8], width: u32) -> Nat {
    chunks
        .iter()
        .rev()
        .fold(Nat::zero(), |acc, &c| (acc << width) + Nat::from(c))
}

/// Fixed-window exponentiation over a power table:
/// `m = table[d_k]`, then `m = m^(2^w) * table[d_i]` for `i = k-1 .. 0`.
pub fn window_exp(table: &[Nat], chunks: &[u8], n: &Nat) -> Result<Nat> {
    if !table.len().is_power_of_two() || table.len() < 2 || table.len() > table_len(MAX_WINDOW_BITS) {
        return Err(Error::domain("power table length must be 2^w"));
    }
    if n < &Nat::from(2u8) {
        return Err(Error::domain("modulus below 2"));
    }
    let width = table.len().trailing_zeros();
    if chunks.iter().any(|&c| c as usize >= table.len()) {
        return Err(Error::domain("chunk value exceeds the table"));
    }
    let Some((&top, rest)) = chunks.split_last() else {
        return Err(Error::domain("no chunks"));
    };
    let mut m = &table[top as usize] % n;
    for &chunk in rest.iter().rev() {
        for _ in 0..width {
            m = &m * &m % n;
        }
        m = m * &table[chunk as usize] % n;
    }
    Ok(m)
}

fn binomials(size: usize) -> Vec<Vec<u64>> {
    let mut rows: Vec<Vec<u64>> = Vec::with_capacity(size);
    for i in 0..size {
        let mut row = vec![1u64; i + 1];
        for j in 1..i {
            row[j] = rows[i - 1][j - 1] + rows[i - 1][j];
        }
        rows.push(row);
    }
    rows
}

/// Lower-triangular `M[i][j] = C(i, j) * alpha^j * beta^(i-j)` of the given
/// size, so that `M * (1, c, .., c^(size-1)) = ((alpha*c + beta)^i)_i`.
pub fn build_m_sized(alpha: &Nat, beta: &Nat, n: &Nat, size: usize) -> ModMatrix {
    let pow_table = |base: &Nat| {
        let mut v = Vec::with_capacity(size);
        let mut acc = Nat::one() % n;
        for _ in 0..size {
            v.push(acc.clone());
            acc = acc * base % n;
        }
        v
    };
    let alpha_pows = pow_table(&(alpha % n));
    let beta_pows = pow_table(&(beta % n));
    let binom = binomials(size);
    let mut m = ModMatrix::zeros(size, size, n);
    for i in 0..size {
        for j in 0..=i {
            m.set(i, j, Nat::from(binom[i][j]) * &alpha_pows[j] * &beta_pows[i - j]);
        }
    }
    m
}

/// The 33 x 33 matrix of the deployed scheme.
pub fn build_m(alpha: &Nat, beta: &Nat, n: &Nat) -> ModMatrix {
    build_m_sized(alpha, beta, n, table_len(WINDOW_BITS) + 1)
}

impl WindowWhiteBox {
    pub fn table_len(&self) -> usize {
        table_len(self.width)
    }

    fn m(&self) -> ModMatrix {
        build_m_sized(&self.alpha, &self.beta, &self.n, self.table_len() + 1)
    }

    pub fn to_text(&self) -> String {
        let dhat = self.dhat.iter().map(u8::to_string).collect::<Vec<_>>().join(",");
        let mut w = RecordWriter::new();
        w.field("scheme", SCHEME)
            .field("keyname", &self.keyname)
            .hex("n", &self.n)
            .hex("alpha", &self.alpha)
            .hex("beta", &self.beta)
            .hex("rconst", &self.r_const)
            .field("dhat", &dhat)
            .hex_list("tprime", &self.tprime);
        for i in 0..self.a.rows() {
            w.hex_list(&format!("a{i}"), self.a.row(i));
        }
        w.finish()
    }

    /// The window width is implied by the number of `tprime` entries.
    pub fn parse(text: &str) -> Result<Self> {
        let mut r = RecordReader::new(text)?;
        r.literal("scheme", SCHEME)?;
        let keyname = r.name("keyname")?;
        let n_line = r.line_no();
        let n = r.hex("n")?;
        if n < Nat::from(2u8) {
            return Err(Error::parse(n_line, "modulus below 2"));
        }
        let alpha = r.hex("alpha")?;
        let beta = r.hex("beta")?;
        let r_const = r.hex("rconst")?;
        let dhat_line = r.line_no();
        let dhat_text = r.field("dhat")?;
        let tprime_line = r.line_no();
        let tprime = r.hex_list("tprime")?;
        let len = tprime.len();
        if !len.is_power_of_two() || len < 2 || len > table_len(MAX_WINDOW_BITS) {
            return Err(Error::parse(tprime_line, "tprime length must be 2^w"));
        }
        let width = len.trailing_zeros();
        let dhat = dhat_text
            .split(',')
            .map(|v| {
                v.parse::<u8>()
                    .ok()
                    .filter(|&c| (c as usize) < len && (v == "0" || !v.starts_with('0')))
                    .ok_or_else(|| Error::parse(dhat_line, format!("bad dhat chunk `{v}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut rows = Vec::with_capacity(len);
        for i in 0..len {
            let line = r.line_no();
            let row = r.hex_list(&format!("a{i}"))?;
            if row.len() != len + 1 {
                return Err(Error::parse(line, format!("row a{i} must have {} entries", len + 1)));
            }
            rows.push(row);
        }
        r.end()?;
        let reduced = |v: &Nat| v < &n;
        if !(reduced(&alpha) && reduced(&beta) && reduced(&r_const) && tprime.iter().all(reduced)) {
            return Err(Error::parse(n_line, "value not reduced modulo N"));
        }
        let a = ModMatrix::from_rows(rows, &n).map_err(|e| Error::parse(tprime_line + 1, e.to_string()))?;
        Ok(Self {
            keyname,
            n,
            width,
            a,
            tprime,
            alpha,
            beta,
            dhat,
            r_const,
        })
    }
}

impl WindowSecrets {
    pub fn to_text(&self, keyname: &str) -> String {
        let pi = self.pi.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        RecordWriter::new()
            .field("scheme", SECRETS_SCHEME)
            .field("keyname", keyname)
            .field("pi", &pi)
            .hex_list("rvec", &self.rvec)
            .hex("d", &self.d)
            .finish()
    }

    pub fn parse(text: &str) -> Result<(String, Self)> {
        let mut r = RecordReader::new(text)?;
        r.literal("scheme", SECRETS_SCHEME)?;
        let keyname = r.name("keyname")?;
        let line = r.line_no();
        let pi = r
            .field("pi")?
            .split(',')
            .map(|v| v.parse::<usize>().map_err(|_| Error::parse(line, "bad permutation entry")))
            .collect::<Result<Vec<_>>>()?;
        let rvec = r.hex_list("rvec")?;
        let d = r.hex("d")?;
        r.end()?;
        if !is_permutation(&pi) || rvec.len() != pi.len() {
            return Err(Error::parse(line, "pi is not a permutation matching rvec"));
        }
        Ok((keyname, Self { pi, rvec, d }))
    }
}

fn is_permutation(pi: &[usize]) -> bool {
    let mut seen = vec![false; pi.len()];
    pi.iter().all(|&v| v < pi.len() && !std::mem::replace(&mut seen[v], true))
}

fn invert_permutation(pi: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; pi.len()];
    for (i, &v) in pi.iter().enumerate() {
        inv[v] = i;
    }
    inv
}

impl RsaDecryptor for WindowWhiteBox {
    fn modulus(&self) -> &Nat {
        &self.n
    }

    fn decrypt_raw(&self, c: &Nat) -> Result<Nat> {
        window_decrypt(self, c)
    }
}

/// Deployed-width generator with a uniformly random permutation and units.
pub fn gen_window<R: RngCore + ?Sized>(
    keyname: &str,
    key: &RsaPrivateKey,
    rng: &mut R,
) -> Result<(WindowWhiteBox, WindowSecrets)> {
    gen_window_sized(keyname, key, WINDOW_BITS, rng)
}

/// Generator for any supported width.
pub fn gen_window_sized<R: RngCore + ?Sized>(
    keyname: &str,
    key: &RsaPrivateKey,
    width: u32,
    rng: &mut R,
) -> Result<(WindowWhiteBox, WindowSecrets)> {
    check_width(width)?;
    let len = table_len(width);
    let pi = random_permutation(rng, len);
    let rvec = (0..len).map(|_| random_unit(rng, &key.n)).collect();
    gen_window_with(keyname, key, width, pi, rvec, rng)
}

/// Builds a white-box around a caller-chosen permutation and randomizer
/// vector; `alpha`, `beta` and `t'` are still drawn from `rng`.
///
/// The target `T` has row `i` equal to `r_{pi(i)} * e_{pi(i)}` followed by
/// `t'_i`, and `A = T * M^-1`.
pub fn gen_window_with<R: RngCore + ?Sized>(
    keyname: &str,
    key: &RsaPrivateKey,
    width: u32,
    pi: Vec<usize>,
    rvec: Vec<Nat>,
    rng: &mut R,
) -> Result<(WindowWhiteBox, WindowSecrets)> {
    check_width(width)?;
    let n = &key.n;
    let len = table_len(width);
    if n.bits() < len as u64 + width as u64 {
        return Err(Error::domain(format!(
            "modulus too small for a {len}-entry window table"
        )));
    }
    if pi.len() != len || !is_permutation(&pi) {
        return Err(Error::domain("pi is not a permutation of the table indices"));
    }
    if rvec.len() != len || !rvec.iter().all(|r| is_unit(r, n)) {
        return Err(Error::domain("randomizers must be units of Z_N"));
    }

    let alpha = random_unit(rng, n);
    let beta = random_below(rng, n);
    let tprime: Vec<Nat> = (0..len).map(|_| random_below(rng, n)).collect();

    let mut target = ModMatrix::zeros(len, len + 1, n);
    for i in 0..len {
        target.set(i, pi[i], rvec[pi[i]].clone());
        target.set(i, len, tprime[i].clone());
    }
    let m = build_m_sized(&alpha, &beta, n, len + 1);
    let a = target.mul(&m.inverse_lower_triangular()?)?;

    let chunks = chunk_exponent(&key.d, chunk_count(n, width), width)?;
    let pi_inv = invert_permutation(&pi);
    let dhat: Vec<u8> = chunks.iter().map(|&c| pi_inv[c as usize] as u8).collect();
    // prod r_{d_i}^(32^i) is exactly window_exp over the randomizers.
    let r_product = window_exp(&rvec, &chunks, n)?;
    let r_const = mod_inv(&r_product, n)?;

    let wb = WindowWhiteBox {
        keyname: keyname.to_owned(),
        n: n.clone(),
        width,
        a,
        tprime,
        alpha,
        beta,
        dhat,
        r_const,
    };
    let secrets = WindowSecrets {
        pi,
        rvec,
        d: key.d.clone(),
    };
    Ok((wb, secrets))
}

/// `A*s + t`, the randomized and permuted power table of `c`.
pub fn obfusc_precomp(wb: &WindowWhiteBox, c: &Nat) -> Result<Vec<Nat>> {
    check_ciphertext(c, &wb.n)?;
    let n = &wb.n;
    let len = wb.table_len();
    let x = (&wb.alpha * c + &wb.beta) % n;
    let mut s = Vec::with_capacity(len + 1);
    let mut acc = Nat::one() % n;
    for _ in 0..=len {
        s.push(acc.clone());
        acc = acc * &x % n;
    }
    let c_top = mod_pow(c, &Nat::from(len), n)?;
    let mut out = wb.a.mul_vec(&s)?;
    for (o, t) in out.iter_mut().zip(&wb.tprime) {
        let t = mod_neg(&(&c_top * t), n);
        *o = (&*o + t) % n;
    }
    Ok(out)
}

/// `r_const * window_exp(chat, dhat) mod N`.
pub fn window_decrypt(wb: &WindowWhiteBox, c: &Nat) -> Result<Nat> {
    let chat = obfusc_precomp(wb, c)?;
    Ok(window_exp(&chat, &wb.dhat, &wb.n)? * &wb.r_const % &wb.n)
}

/// Reads `pi` and the permuted randomizers off `A*M`. Each row must have a
/// single nonzero among the table columns and end in `t'_i`.
pub fn am_structure(wb: &WindowWhiteBox) -> Result<(Vec<usize>, Vec<Nat>)> {
    let len = wb.table_len();
    if wb.a.rows() != len || wb.a.cols() != len + 1 || wb.tprime.len() != len {
        return Err(Error::inconsistent("matrix shape does not match the window width"));
    }
    let am = wb.a.mul(&wb.m())?;
    let mut pi = Vec::with_capacity(len);
    let mut permuted_r = Vec::with_capacity(len);
    for i in 0..len {
        let row = am.row(i);
        let nonzero: Vec<usize> = (0..len).filter(|&j| !row[j].is_zero()).collect();
        let [col] = nonzero[..] else {
            return Err(Error::inconsistent(format!(
                "row {i} of A*M has {} nonzero table entries",
                nonzero.len()
            )));
        };
        if row[len] != wb.tprime[i] {
            return Err(Error::inconsistent(format!("row {i} of A*M does not end in t'")));
        }
        pi.push(col);
        permuted_r.push(row[col].clone());
    }
    if !is_permutation(&pi) {
        return Err(Error::inconsistent("recovered pi is not a permutation"));
    }
    Ok((pi, permuted_r))
}

/// Shared tail of both attacks: undo the permutation on the stored chunks
/// and factor `N` from the recovered `d`.
fn finish<R: RngCore + ?Sized>(
    wb: &WindowWhiteBox,
    e: &Nat,
    pi: Vec<usize>,
    permuted_r: Vec<Nat>,
    rng: &mut R,
) -> Result<RecoveredKey> {
    let mut rvec = vec![Nat::zero(); pi.len()];
    for (i, r) in permuted_r.into_iter().enumerate() {
        rvec[pi[i]] = r;
    }
    if wb.dhat.iter().any(|&c| c as usize >= pi.len()) {
        return Err(Error::inconsistent("dhat chunk outside the table"));
    }
    let chunks: Vec<u8> = wb.dhat.iter().map(|&c| pi[c as usize] as u8).collect();
    let d = reassemble(&chunks, wb.width);
    let factors = miller_factor(&wb.n, e, &d, rng)?;
    let phi = factors.phi();
    if d >= phi || !(e * &d % &phi).is_one() {
        return Err(Error::inconsistent("recovered exponent does not invert e"));
    }
    Ok(RecoveredKey {
        pi: Some(pi),
        rvec: Some(rvec),
        d,
        factors,
        phi,
    })
}

/// Runs the precomputation on `c = 1` and `c = 2`. The first gives
/// `r_{pi(i)}`, the quotient gives `2^{pi(i)}` unreduced since `2^31 < N`.
pub fn attack_chosen_ciphertext<R: RngCore + ?Sized>(
    wb: &WindowWhiteBox,
    e: &Nat,
    rng: &mut R,
) -> Result<RecoveredKey> {
    let len = wb.table_len();
    if wb.n.bits() < len as u64 {
        return Err(Error::domain("modulus too small: powers of two would wrap"));
    }
    let v1 = obfusc_precomp(wb, &Nat::one())?;
    let v2 = obfusc_precomp(wb, &Nat::from(2u8))?;
    let mut pi = Vec::with_capacity(len);
    for (i, (a, b)) in v1.iter().zip(&v2).enumerate() {
        let inv = mod_inv(a, &wb.n).map_err(|_| Error::inconsistent(format!("entry {i} of precomp(1) is not a unit")))?;
        let w = b * inv % &wb.n;
        let log = w.bits().saturating_sub(1);
        if w.is_zero() || w != Nat::one() << log || log >= len as u64 {
            return Err(Error::inconsistent(format!("entry {i} is not a power of two below 2^{len}")));
        }
        pi.push(log as usize);
    }
    if !is_permutation(&pi) {
        return Err(Error::inconsistent("recovered pi is not a permutation"));
    }
    finish(wb, e, pi, v1, rng)
}

/// Needs only `A`, `alpha` and `beta`: forms `A*M` and reads the structure.
pub fn attack_matrix<R: RngCore + ?Sized>(wb: &WindowWhiteBox, e: &Nat, rng: &mut R) -> Result<RecoveredKey> {
    let (pi, permuted_r) = am_structure(wb)?;
    finish(wb, e, pi, permuted_r, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numtheory::gen_rsa_keypair;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn key(bits: u64, seed: u64) -> RsaPrivateKey {
        gen_rsa_keypair(bits, &Nat::from(65537u32), &mut ChaCha20Rng::seed_from_u64(seed)).unwrap()
    }

    fn n(v: u64) -> Nat {
        Nat::from(v)
    }

    #[test]
    fn key_space_exceeds_2_117() {
        let fact: Nat = (1..=32u32).map(Nat::from).product();
        assert!(fact > Nat::one() << 117);
        assert!(fact < Nat::one() << 118);
    }

    #[test]
    fn m_examples() {
        let modulus = n(1_000_003);
        assert_eq!(build_m(&n(1), &n(0), &modulus), ModMatrix::identity(33, &modulus));
        let (alpha, beta) = (n(5), n(9));
        let m = build_m(&alpha, &beta, &modulus);
        assert!(m.is_lower_triangular());
        assert_eq!(&m.row(2)[..4], &[n(81), n(90), n(25), n(0)]);
        assert_eq!(m.get(32, 32), &mod_pow(&alpha, &n(32), &modulus).unwrap());
        // C(32, 16) fits comfortably in u64
        assert_eq!(binomials(33)[32][16], 601_080_390);
    }

    #[test]
    fn m_inverse_matches_closed_form() {
        // c = (x - beta) / alpha, so M^-1[i][j] = C(i,j) alpha^-i (-beta)^(i-j)
        let modulus = n(1_000_000_007);
        let (alpha, beta) = (n(123_456), n(987_654));
        let inv = build_m(&alpha, &beta, &modulus).inverse_lower_triangular().unwrap();
        let ai = mod_inv(&alpha, &modulus).unwrap();
        let nb = mod_neg(&beta, &modulus);
        for i in 0..33u64 {
            for j in 0..33u64 {
                let expect = if j > i {
                    n(0)
                } else {
                    let mut c = 1u64;
                    for k in 0..j {
                        c = c * (i - k) / (k + 1);
                    }
                    n(c) * mod_pow(&ai, &n(i), &modulus).unwrap() * mod_pow(&nb, &n(i - j), &modulus).unwrap()
                        % &modulus
                };
                assert_eq!(inv.get(i as usize, j as usize), &expect, "({i},{j})");
            }
        }
    }

    #[test]
    fn chunking() {
        let d = n(0b10110_00011_11111);
        assert_eq!(chunk_key(&d, 4).unwrap(), vec![31, 3, 22, 0]);
        assert_eq!(reassemble(&[31, 3, 22, 0], 5), d);
        assert!(chunk_key(&d, 2).is_err());
        let k = key(512, 1);
        assert_eq!(chunk_count(&k.n, 5), 103);
    }

    #[test]
    fn honest_table_window_exp() {
        let k = key(256, 2);
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for _ in 0..20 {
            let c = random_below(&mut rng, &k.n);
            let table: Vec<Nat> = (0..32u32).map(|i| mod_pow(&c, &n(i as u64), &k.n).unwrap()).collect();
            let chunks = chunk_key(&k.d, chunk_count(&k.n, 5)).unwrap();
            assert_eq!(window_exp(&table, &chunks, &k.n).unwrap(), mod_pow(&c, &k.d, &k.n).unwrap());
        }
    }

    #[test]
    fn trivial_mask_gives_plain_powers() {
        let k = key(128, 4);
        let pi: Vec<usize> = (0..32).collect();
        let ones = vec![n(1); 32];
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let (wb, _) = gen_window_with("t", &k, 5, pi, ones, &mut rng).unwrap();
        assert!(wb.r_const.is_one());
        let c = n(0xdead_beef);
        let out = obfusc_precomp(&wb, &c).unwrap();
        for (i, v) in out.iter().enumerate() {
            assert_eq!(v, &mod_pow(&c, &n(i as u64), &k.n).unwrap());
        }
        let v2 = obfusc_precomp(&wb, &n(2)).unwrap();
        assert_eq!(v2, (0..32).map(|i| Nat::one() << i).collect::<Vec<_>>());
        let rec = attack_chosen_ciphertext(&wb, &k.e, &mut rng).unwrap();
        assert_eq!(rec.pi.unwrap(), (0..32).collect::<Vec<_>>());
    }

    #[test]
    fn generated_instance() {
        let k = key(512, 6);
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let (wb, sec) = gen_window("w", &k, &mut rng).unwrap();
        assert_eq!(wb.dhat.len(), 103);

        let (pi, permuted_r) = am_structure(&wb).unwrap();
        assert_eq!(pi, sec.pi);
        for i in 0..32 {
            assert_eq!(permuted_r[i], sec.rvec[sec.pi[i]]);
        }

        let c = random_below(&mut rng, &k.n);
        let out = obfusc_precomp(&wb, &c).unwrap();
        for i in 0..32 {
            let expect = &sec.rvec[sec.pi[i]] * mod_pow(&c, &n(sec.pi[i] as u64), &k.n).unwrap() % &k.n;
            assert_eq!(out[i], expect);
        }
        assert_eq!(obfusc_precomp(&wb, &n(1)).unwrap(), permuted_r);

        let zero = obfusc_precomp(&wb, &n(0)).unwrap();
        for i in 0..32 {
            if sec.pi[i] == 0 {
                assert_eq!(zero[i], sec.rvec[0]);
            } else {
                assert!(zero[i].is_zero());
            }
        }

        // masked execution cancels exactly
        let chat = obfusc_precomp(&wb, &c).unwrap();
        let masked = window_exp(&chat, &wb.dhat, &k.n).unwrap();
        assert_eq!(masked * &wb.r_const % &k.n, mod_pow(&c, &k.d, &k.n).unwrap());

        for _ in 0..20 {
            let c = random_below(&mut rng, &k.n);
            assert_eq!(window_decrypt(&wb, &c).unwrap(), mod_pow(&c, &k.d, &k.n).unwrap());
        }
        assert!(window_decrypt(&wb, &n(1)).unwrap().is_one());
        assert!(matches!(window_decrypt(&wb, &k.n), Err(Error::Domain(_))));
        assert_eq!(wb.decrypt_raw(&c).unwrap(), k.decrypt_raw(&c).unwrap());

        for rec in [
            attack_chosen_ciphertext(&wb, &k.e, &mut rng).unwrap(),
            attack_matrix(&wb, &k.e, &mut rng).unwrap(),
        ] {
            assert_eq!(rec.pi.as_ref(), Some(&sec.pi));
            assert_eq!(rec.rvec.as_ref(), Some(&sec.rvec));
            assert_eq!(rec.d, k.d);
            assert!(rec.factors.same_as(&k.p, &k.q));
        }
    }

    #[test]
    fn seeded_generation_is_deterministic() {
        let k = key(256, 8);
        let a = gen_window("w", &k, &mut ChaCha20Rng::seed_from_u64(9)).unwrap();
        let b = gen_window("w", &k, &mut ChaCha20Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn text_round_trip() {
        let k = key(128, 10);
        let (wb, sec) = gen_window("w.1", &k, &mut ChaCha20Rng::seed_from_u64(11)).unwrap();
        let text = wb.to_text();
        assert_eq!(text.lines().count(), 8 + 32);
        assert!(text.starts_with("scheme=window\nkeyname=w.1\n"));
        assert_eq!(WindowWhiteBox::parse(&text).unwrap(), wb);
        let st = sec.to_text("w.1");
        assert_eq!(WindowSecrets::parse(&st).unwrap(), ("w.1".to_owned(), sec));

        let bad = text.replace("\na31=", "\na99=");
        assert!(matches!(WindowWhiteBox::parse(&bad), Err(Error::Parse { .. })));
        let bad = text.replacen("dhat=", "dhat=32,", 1);
        assert!(matches!(WindowWhiteBox::parse(&bad), Err(Error::Parse { line: 7, .. })));
    }

    #[test]
    fn corrupted_matrix_is_detected() {
        let k = key(512, 12);
        let mut rng = ChaCha20Rng::seed_from_u64(13);
        let (wb, _) = gen_window("w", &k, &mut rng).unwrap();
        for (i, j) in [(0, 0), (17, 5), (31, 32)] {
            let mut bad = wb.clone();
            let v = (bad.a.get(i, j) + 1u8) % &bad.n;
            bad.a.set(i, j, v);
            assert!(matches!(attack_matrix(&bad, &k.e, &mut rng), Err(Error::AttackInconsistent(_))));
            assert!(matches!(
                attack_chosen_ciphertext(&bad, &k.e, &mut rng),
                Err(Error::AttackInconsistent(_))
            ));
            // the output no longer has the form r_{pi(i)} c^{pi(i)} in row i
            let c = random_below(&mut rng, &k.n);
            assert_ne!(window_decrypt(&bad, &c).unwrap(), mod_pow(&c, &k.d, &k.n).unwrap());
        }
    }

    #[test]
    fn small_modulus_rejected() {
        let k = RsaPrivateKey::from_factors(n(7), n(11), n(7)).unwrap();
        let r = gen_window("t", &k, &mut ChaCha20Rng::seed_from_u64(1));
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    fn permutations(len: usize) -> Vec<Vec<usize>> {
        if len == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(len - 1) {
            for at in 0..len {
                let mut q = p.clone();
                q.insert(at, len - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn width_two_brute_force_agrees() {
        let perms = permutations(4);
        assert_eq!(perms.len(), 24);
        let mut rng = ChaCha20Rng::seed_from_u64(14);
        for seed in 0..10 {
            let k = key(64, 100 + seed);
            let (wb, sec) = gen_window_sized("t", &k, 2, &mut rng).unwrap();
            assert_eq!(wb.a.rows(), 4);
            assert_eq!(WindowWhiteBox::parse(&wb.to_text()).unwrap(), wb);
            let m = n(0x1234_5678_9abc) % &k.n;
            let ct = mod_pow(&m, &k.e, &k.n).unwrap();
            // every candidate pi whose exponent decrypts the probe
            let hits: Vec<Nat> = perms
                .iter()
                .map(|p| reassemble(&wb.dhat.iter().map(|&c| p[c as usize] as u8).collect::<Vec<_>>(), 2))
                .filter(|d| mod_pow(&ct, d, &k.n).unwrap() == m)
                .collect();
            assert!(!hits.is_empty());
            assert!(hits.iter().all(|d| d == &k.d));
            for rec in [
                attack_chosen_ciphertext(&wb, &k.e, &mut rng).unwrap(),
                attack_matrix(&wb, &k.e, &mut rng).unwrap(),
            ] {
                assert_eq!(rec.d, k.d);
                assert_eq!(rec.pi.unwrap(), sec.pi);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn window_exp_matches_mod_pow(seed in any::<u64>(), width in 1u32..=5) {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let modulus = random_below(&mut rng, &(Nat::one() << 200u32)) + 2u8;
            let c = random_below(&mut rng, &modulus);
            let d = random_below(&mut rng, &(Nat::one() << 190u32));
            let table: Vec<Nat> = (0..1u64 << width).map(|i| mod_pow(&c, &n(i), &modulus).unwrap()).collect();
            let chunks = chunk_exponent(&d, chunk_count(&modulus, width).max(1), width).unwrap();
            prop_assert_eq!(window_exp(&table, &chunks, &modulus).unwrap(), mod_pow(&c, &d, &modulus).unwrap());
        }

        #[test]
        fn m_maps_powers_to_shifted_powers(seed in any::<u64>()) {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let modulus = random_below(&mut rng, &(Nat::one() << 256u32)) + 2u8;
            let alpha = random_below(&mut rng, &modulus);
            let beta = random_below(&mut rng, &modulus);
            let c = random_below(&mut rng, &modulus);
            let m = build_m(&alpha, &beta, &modulus);
            let powers: Vec<Nat> = (0..33u64).map(|i| mod_pow(&c, &n(i), &modulus).unwrap()).collect();
            let x = (&alpha * &c + &beta) % &modulus;
            let s: Vec<Nat> = (0..33u64).map(|i| mod_pow(&x, &n(i), &modulus).unwrap()).collect();
            prop_assert_eq!(m.mul_vec(&powers).unwrap(), s);
        }
    }
}
