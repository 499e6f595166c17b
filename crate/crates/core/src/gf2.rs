//! Bit-packed linear algebra over GF(2).
//!
//! Bits are addressed by index only; the word layout behind [`BitVector`] is
//! not part of the public contract. Unused high bits of the last word are
//! always kept at zero so that word-wise equality, weight and parity are
//! exact.

use std::fmt;
use std::ops::{BitXor, BitXorAssign};

use crate::error::{Error, Result};

const WORD_BITS: usize = 64;

#[inline]
fn words_for(len: usize) -> usize {
    len.div_ceil(WORD_BITS)
}

/// A vector over GF(2).
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitVector {
    len: usize,
    words: Vec<u64>,
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            words: vec![0; words_for(len)],
        }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                v.set(i, true);
            }
        }
        v
    }

    /// Vector of length `len` with ones at `indices`.
    pub fn from_indices(len: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut v = Self::zeros(len);
        for i in indices {
            v.set(i, true);
        }
        v
    }

    /// Builds from little-endian packed words, masking any bits past `len`.
    pub fn from_words(len: usize, mut words: Vec<u64>) -> Self {
        words.resize(words_for(len), 0);
        let mut v = Self { len, words };
        v.mask_tail();
        v
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit {i} out of range for length {}", self.len);
        (self.words[i / WORD_BITS] >> (i % WORD_BITS)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit {i} out of range for length {}", self.len);
        let mask = 1u64 << (i % WORD_BITS);
        if value {
            self.words[i / WORD_BITS] |= mask;
        } else {
            self.words[i / WORD_BITS] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        assert!(i < self.len, "bit {i} out of range for length {}", self.len);
        self.words[i / WORD_BITS] ^= 1u64 << (i % WORD_BITS);
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Hamming weight.
    pub fn weight(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Parity of the overlap `|self ∧ other| mod 2`.
    pub fn dot(&self, other: &Self) -> bool {
        assert_eq!(self.len, other.len, "dot of vectors with different lengths");
        let ones: u32 = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones())
            .sum();
        ones & 1 == 1
    }

    pub fn xor_assign(&mut self, other: &Self) {
        assert_eq!(self.len, other.len, "xor of vectors with different lengths");
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    /// Indices of set bits in increasing order.
    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let tz = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(wi * WORD_BITS + tz)
                }
            })
        })
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.len).map(|i| self.get(i)).collect()
    }

    /// Concatenation `[self ; other]`.
    pub fn concat(&self, other: &Self) -> Self {
        let mut out = Self::zeros(self.len + other.len);
        for i in self.iter_ones() {
            out.set(i, true);
        }
        for i in other.iter_ones() {
            out.set(self.len + i, true);
        }
        out
    }

    /// Copy of bits `[start, start + len)`.
    pub fn slice(&self, start: usize, len: usize) -> Self {
        assert!(start + len <= self.len, "slice out of range");
        let mut out = Self::zeros(len);
        for i in 0..len {
            if self.get(start + i) {
                out.set(i, true);
            }
        }
        out
    }

    /// Bytes with bit `i` at byte `i / 8`, position `i % 8`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.len.div_ceil(8);
        let mut out = Vec::with_capacity(n);
        for b in 0..n {
            let w = self.words[b / 8];
            out.push((w >> ((b % 8) * 8)) as u8);
        }
        out
    }

    pub fn from_bytes(len: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != len.div_ceil(8) {
            return Err(Error::shape(format!(
                "{} bytes cannot hold exactly {len} bits",
                bytes.len()
            )));
        }
        let mut words = vec![0u64; words_for(len)];
        for (b, &byte) in bytes.iter().enumerate() {
            words[b / 8] |= (byte as u64) << ((b % 8) * 8);
        }
        let v = Self { len, words };
        let mut masked = v.clone();
        masked.mask_tail();
        if masked != v {
            return Err(Error::Format("bits set beyond vector length".into()));
        }
        Ok(v)
    }

    fn mask_tail(&mut self) {
        let rem = self.len % WORD_BITS;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVector[")?;
        for i in 0..self.len {
            write!(f, "{}", self.get(i) as u8)?;
        }
        write!(f, "]")
    }
}

impl BitXorAssign<&BitVector> for BitVector {
    fn bitxor_assign(&mut self, rhs: &BitVector) {
        self.xor_assign(rhs);
    }
}

impl BitXor<&BitVector> for &BitVector {
    type Output = BitVector;

    fn bitxor(self, rhs: &BitVector) -> BitVector {
        let mut out = self.clone();
        out.xor_assign(rhs);
        out
    }
}

/// A dense row-major matrix over GF(2).
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitMatrix {
    cols: usize,
    rows: Vec<BitVector>,
}

/// Reduced row-echelon form of a matrix together with the row operations
/// that produced it: `transform · original = reduced`.
#[derive(Clone, Debug)]
pub struct Echelon {
    pub reduced: BitMatrix,
    pub transform: BitMatrix,
    /// Pivot column of each of the first `rank` rows of `reduced`.
    pub pivots: Vec<usize>,
}

impl Echelon {
    pub fn rank(&self) -> usize {
        self.pivots.len()
    }
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            cols,
            rows: vec![BitVector::zeros(cols); rows],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    /// Builds from rows of 0/1 entries; every row must have the same length.
    pub fn from_dense<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut m = Self::zeros(rows.len(), cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::shape(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            for (j, &v) in r.iter().enumerate() {
                if v > 1 {
                    return Err(Error::param(format!("entry ({i},{j}) = {v} is not a bit")));
                }
                m.set(i, j, v == 1);
            }
        }
        Ok(m)
    }

    pub fn from_rows(cols: usize, rows: Vec<BitVector>) -> Result<Self> {
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != cols) {
            return Err(Error::shape(format!(
                "row {i} has length {}, expected {cols}",
                r.len()
            )));
        }
        Ok(Self { cols, rows })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows.len()
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.rows[i].get(j)
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        self.rows[i].set(j, value)
    }

    #[inline]
    pub fn flip(&mut self, i: usize, j: usize) {
        self.rows[i].flip(j)
    }

    #[inline]
    pub fn row(&self, i: usize) -> &BitVector {
        &self.rows[i]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &BitVector> {
        self.rows.iter()
    }

    pub fn column(&self, j: usize) -> BitVector {
        let mut v = BitVector::zeros(self.rows());
        for (i, r) in self.rows.iter().enumerate() {
            if r.get(j) {
                v.set(i, true);
            }
        }
        v
    }

    pub fn row_weight(&self, i: usize) -> usize {
        self.rows[i].weight()
    }

    pub fn col_weight(&self, j: usize) -> usize {
        self.rows.iter().filter(|r| r.get(j)).count()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows());
        for (i, r) in self.rows.iter().enumerate() {
            for j in r.iter_ones() {
                t.set(j, i, true);
            }
        }
        t
    }

    /// Kronecker product: entry `(i·b.rows + k, j·b.cols + l) = a[i,j]·b[k,l]`.
    pub fn kron(&self, b: &Self) -> Result<Self> {
        let rows = self
            .rows()
            .checked_mul(b.rows())
            .ok_or_else(|| Error::Size("kron row count overflows".into()))?;
        let cols = self
            .cols
            .checked_mul(b.cols)
            .ok_or_else(|| Error::Size("kron column count overflows".into()))?;
        let mut out = Self::zeros(rows, cols);
        for (i, arow) in self.rows.iter().enumerate() {
            for j in arow.iter_ones() {
                for (k, brow) in b.rows.iter().enumerate() {
                    let dst = &mut out.rows[i * b.rows() + k];
                    for l in brow.iter_ones() {
                        dst.set(j * b.cols + l, true);
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn matmul(&self, b: &Self) -> Result<Self> {
        if self.cols != b.rows() {
            return Err(Error::shape(format!(
                "matmul of {}x{} by {}x{}",
                self.rows(),
                self.cols,
                b.rows(),
                b.cols
            )));
        }
        let rows = self
            .rows
            .iter()
            .map(|arow| {
                let mut acc = BitVector::zeros(b.cols);
                for j in arow.iter_ones() {
                    acc.xor_assign(&b.rows[j]);
                }
                acc
            })
            .collect();
        Ok(Self { cols: b.cols, rows })
    }

    pub fn matvec(&self, v: &BitVector) -> Result<BitVector> {
        if self.cols != v.len() {
            return Err(Error::shape(format!(
                "matvec of {}x{} by vector of length {}",
                self.rows(),
                self.cols,
                v.len()
            )));
        }
        Ok(self.matvec_unchecked(v))
    }

    pub(crate) fn matvec_unchecked(&self, v: &BitVector) -> BitVector {
        let mut out = BitVector::zeros(self.rows());
        for (i, r) in self.rows.iter().enumerate() {
            if r.dot(v) {
                out.set(i, true);
            }
        }
        out
    }

    /// Block matrix from a grid of equally-sized-per-row/column blocks;
    /// `None` entries are zero blocks of the implied size.
    pub fn from_blocks(grid: &[Vec<Option<&BitMatrix>>]) -> Result<Self> {
        let nbr = grid.len();
        let nbc = grid.first().map_or(0, |r| r.len());
        let mut row_h = vec![None; nbr];
        let mut col_w = vec![None; nbc];
        for (bi, brow) in grid.iter().enumerate() {
            if brow.len() != nbc {
                return Err(Error::shape("ragged block grid"));
            }
            for (bj, blk) in brow.iter().enumerate() {
                if let Some(m) = blk {
                    for (slot, v) in [(&mut row_h[bi], m.rows()), (&mut col_w[bj], m.cols())] {
                        match slot {
                            None => *slot = Some(v),
                            Some(prev) if *prev != v => {
                                return Err(Error::shape("inconsistent block sizes"))
                            }
                            _ => {}
                        }
                    }
                }
            }
        }
        let row_h: Vec<usize> = row_h
            .into_iter()
            .map(|h| h.ok_or_else(|| Error::shape("block row with no sized block")))
            .collect::<Result<_>>()?;
        let col_w: Vec<usize> = col_w
            .into_iter()
            .map(|w| w.ok_or_else(|| Error::shape("block column with no sized block")))
            .collect::<Result<_>>()?;
        let mut out = Self::zeros(row_h.iter().sum(), col_w.iter().sum());
        let mut r0 = 0;
        for (bi, brow) in grid.iter().enumerate() {
            let mut c0 = 0;
            for (bj, blk) in brow.iter().enumerate() {
                if let Some(m) = blk {
                    for (i, r) in m.rows.iter().enumerate() {
                        for j in r.iter_ones() {
                            out.set(r0 + i, c0 + j, true);
                        }
                    }
                }
                c0 += col_w[bj];
            }
            r0 += row_h[bi];
        }
        Ok(out)
    }

    /// Gauss-Jordan elimination. Columns are scanned left to right; the pivot
    /// for each column is the lowest-index remaining row with that bit set.
    pub fn echelon(&self) -> Echelon {
        let mut reduced = self.clone();
        let mut transform = Self::identity(self.rows());
        let mut pivots = Vec::new();
        let mut rank = 0;
        for c in 0..self.cols {
            if rank == reduced.rows() {
                break;
            }
            let Some(p) = (rank..reduced.rows()).find(|&r| reduced.rows[r].get(c)) else {
                continue;
            };
            reduced.rows.swap(rank, p);
            transform.rows.swap(rank, p);
            let (prow, ptrans) = (reduced.rows[rank].clone(), transform.rows[rank].clone());
            for r in 0..reduced.rows() {
                if r != rank && reduced.rows[r].get(c) {
                    reduced.rows[r].xor_assign(&prow);
                    transform.rows[r].xor_assign(&ptrans);
                }
            }
            pivots.push(c);
            rank += 1;
        }
        Echelon {
            reduced,
            transform,
            pivots,
        }
    }

    pub fn rank(&self) -> usize {
        self.echelon().rank()
    }

    /// A matrix `D` with `self · D · s = s` for every `s` in the image
    /// (column space) of `self`.
    pub fn right_pseudo_inverse(&self) -> Self {
        let ech = self.echelon();
        let mut d = Self::zeros(self.cols, self.rows());
        for (i, &c) in ech.pivots.iter().enumerate() {
            d.rows[c] = ech.transform.rows[i].clone();
        }
        d
    }

    pub fn is_zero(&self) -> bool {
        self.rows.iter().all(BitVector::is_zero)
    }
}

impl fmt::Debug for BitMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BitMatrix {}x{}", self.rows(), self.cols)?;
        for r in &self.rows {
            for j in 0..self.cols {
                write!(f, "{}", r.get(j) as u8)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
