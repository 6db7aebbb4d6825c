use num_traits::Zero;

use crate::error::{Error, Result};
use crate::numtheory::{mod_inv, mod_neg, Nat};

/// Dense row-major matrix over `Z_N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Nat>,
    modulus: Nat,
}

impl ModMatrix {
    pub fn zeros(rows: usize, cols: usize, modulus: &Nat) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            entries: vec![Nat::zero(); rows * cols],
            modulus: modulus.clone(),
        }
    }

    pub fn identity(size: usize, modulus: &Nat) -> Self {
        let mut m = Self::zeros(size, size, modulus);
        for i in 0..size {
            m.set(i, i, Nat::from(1u8));
        }
        m
    }

    /// Entries must already be reduced.
    pub fn from_rows(rows: Vec<Vec<Nat>>, modulus: &Nat) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || cols == 0 {
            return Err(Error::domain("matrix dimensions must be positive"));
        }
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::domain("ragged matrix rows"));
        }
        let nrows = rows.len();
        let entries: Vec<Nat> = rows.into_iter().flatten().collect();
        if entries.iter().any(|v| v >= modulus) {
            return Err(Error::domain("matrix entry not reduced modulo N"));
        }
        Ok(Self {
            rows: nrows,
            cols,
            entries,
            modulus: modulus.clone(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn modulus(&self) -> &Nat {
        &self.modulus
    }

    pub fn get(&self, i: usize, j: usize) -> &Nat {
        assert!(i < self.rows && j < self.cols);
        &self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: Nat) {
        assert!(i < self.rows && j < self.cols);
        self.entries[i * self.cols + j] = value % &self.modulus;
    }

    pub fn row(&self, i: usize) -> &[Nat] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul(&self, other: &ModMatrix) -> Result<ModMatrix> {
        if self.cols != other.rows || self.modulus != other.modulus {
            return Err(Error::domain("matrix shapes or moduli do not match"));
        }
        let mut out = ModMatrix::zeros(self.rows, other.cols, &self.modulus);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = Nat::zero();
                for k in 0..self.cols {
                    let a = self.get(i, k);
                    if !a.is_zero() {
                        acc += a * other.get(k, j);
                    }
                }
                out.set(i, j, acc);
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[Nat]) -> Result<Vec<Nat>> {
        if v.len() != self.cols {
            return Err(Error::domain("vector length does not match matrix"));
        }
        Ok((0..self.rows)
            .map(|i| {
                let acc: Nat = self.row(i).iter().zip(v).map(|(a, b)| a * b).sum();
                acc % &self.modulus
            })
            .collect())
    }

    pub fn is_lower_triangular(&self) -> bool {
        (0..self.rows).all(|i| ((i + 1)..self.cols).all(|j| self.get(i, j).is_zero()))
    }

    /// Inverse of a square lower-triangular matrix by forward substitution.
    /// Every diagonal entry must be a unit.
    #[allow(clippy::needless_range_loop)]
    pub fn inverse_lower_triangular(&self) -> Result<ModMatrix> {
        if self.rows != self.cols || !self.is_lower_triangular() {
            return Err(Error::domain("matrix is not square lower-triangular"));
        }
        let n = self.rows;
        let diag_inv = (0..n)
            .map(|i| mod_inv(self.get(i, i), &self.modulus))
            .collect::<Result<Vec<_>>>()?;
        let mut inv = ModMatrix::zeros(n, n, &self.modulus);
        for j in 0..n {
            inv.set(j, j, diag_inv[j].clone());
            for i in (j + 1)..n {
                let mut acc = Nat::zero();
                for k in j..i {
                    acc += self.get(i, k) * inv.get(k, j);
                }
                let acc = acc % &self.modulus;
                inv.set(i, j, mod_neg(&acc, &self.modulus) * &diag_inv[i]);
            }
        }
        Ok(inv)
    }
}
