//! Exact linear algebra over the small prime fields GF(2), GF(3) and GF(7).
//!
//! Extension-field elements of GF(p^m) only ever appear through their m-tuple
//! coordinates, so everything here is plain mod-p vector and matrix algebra.
//! Elements are stored as `u8` in `[0, p)`.
//!
//! Matrices round-trip through a small text format: a header line `p rows cols`
//! followed by the row-major entries separated by whitespace.

use std::fmt;

use crate::error::{Error, Result};

/// A supported prime modulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FieldModulus(u8);

impl FieldModulus {
    pub const GF2: FieldModulus = FieldModulus(2);
    pub const GF3: FieldModulus = FieldModulus(3);
    pub const GF7: FieldModulus = FieldModulus(7);

    pub fn new(p: u32) -> Result<Self> {
        match p {
            2 => Ok(Self::GF2),
            3 => Ok(Self::GF3),
            7 => Ok(Self::GF7),
            _ => Err(Error::UnsupportedModulus(p)),
        }
    }

    #[inline]
    pub fn p(self) -> u8 {
        self.0
    }

    #[inline]
    pub fn order(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn add(self, a: u8, b: u8) -> u8 {
        ((a as u16 + b as u16) % self.0 as u16) as u8
    }

    #[inline]
    pub fn sub(self, a: u8, b: u8) -> u8 {
        self.add(a, self.neg(b))
    }

    #[inline]
    pub fn mul(self, a: u8, b: u8) -> u8 {
        ((a as u16 * b as u16) % self.0 as u16) as u8
    }

    #[inline]
    pub fn neg(self, a: u8) -> u8 {
        (self.0 - a % self.0) % self.0
    }

    /// Multiplicative inverse of a nonzero element.
    pub fn inv(self, a: u8) -> u8 {
        debug_assert!(!a.is_multiple_of(self.0), "zero has no inverse");
        (1..self.0).find(|&x| self.mul(a, x) == 1).unwrap_or(0)
    }

    /// Reduce an arbitrary integer into the field.
    #[inline]
    pub fn reduce(self, v: i64) -> u8 {
        v.rem_euclid(self.0 as i64) as u8
    }

    fn check(self, v: u32) -> Result<u8> {
        if v < self.0 as u32 {
            Ok(v as u8)
        } else {
            Err(Error::ElementOutOfRange {
                value: v,
                p: self.0,
            })
        }
    }
}

impl fmt::Display for FieldModulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GF({})", self.0)
    }
}

fn same_modulus(a: FieldModulus, b: FieldModulus) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::ModulusMismatch {
            left: a.p(),
            right: b.p(),
        })
    }
}

/// A vector over GF(p); also the m-tuple form of a GF(p^m) element.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FfVector {
    p: FieldModulus,
    elems: Vec<u8>,
}

impl FfVector {
    pub fn new(p: FieldModulus, elems: Vec<u8>) -> Result<Self> {
        for &e in &elems {
            p.check(e as u32)?;
        }
        Ok(Self { p, elems })
    }

    /// Build from arbitrary integers, reducing mod p.
    pub fn from_ints(p: FieldModulus, values: &[i64]) -> Self {
        Self {
            p,
            elems: values.iter().map(|&v| p.reduce(v)).collect(),
        }
    }

    /// Parse a digit string such as `"1021"`; separators `,`, `_` and spaces are skipped.
    pub fn from_digits(p: FieldModulus, digits: &str) -> Result<Self> {
        let elems = digits
            .chars()
            .filter(|c| !matches!(c, ',' | '_' | ' '))
            .map(|c| {
                c.to_digit(10)
                    .ok_or_else(|| Error::Parse {
                        line: 1,
                        msg: format!("not a digit: {c:?}"),
                    })
                    .and_then(|d| p.check(d))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { p, elems })
    }

    pub fn zeros(p: FieldModulus, len: usize) -> Self {
        Self {
            p,
            elems: vec![0; len],
        }
    }

    #[inline]
    pub fn modulus(&self) -> FieldModulus {
        self.p
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.elems.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[u8] {
        &self.elems
    }

    pub fn into_vec(self) -> Vec<u8> {
        self.elems
    }

    #[inline]
    pub fn get(&self, i: usize) -> u8 {
        self.elems[i]
    }

    pub fn is_zero(&self) -> bool {
        self.elems.iter().all(|&e| e == 0)
    }

    /// Digit-string rendering, e.g. `1021`.
    pub fn digits(&self) -> String {
        self.elems.iter().map(|e| char::from(b'0' + e)).collect()
    }

    fn check_conformable(&self, other: &FfVector, op: &'static str) -> Result<()> {
        same_modulus(self.p, other.p)?;
        if self.len() != other.len() {
            return Err(Error::dims(op, self.len(), other.len()));
        }
        Ok(())
    }

    pub fn add(&self, other: &FfVector) -> Result<FfVector> {
        self.check_conformable(other, "vector add")?;
        let p = self.p;
        Ok(FfVector {
            p,
            elems: self
                .elems
                .iter()
                .zip(&other.elems)
                .map(|(&a, &b)| p.add(a, b))
                .collect(),
        })
    }

    pub fn sub(&self, other: &FfVector) -> Result<FfVector> {
        self.add(&other.negate())
    }

    pub fn scale(&self, c: u8) -> FfVector {
        let p = self.p;
        let c = c % p.p();
        FfVector {
            p,
            elems: self.elems.iter().map(|&a| p.mul(a, c)).collect(),
        }
    }

    pub fn negate(&self) -> FfVector {
        let p = self.p;
        FfVector {
            p,
            elems: self.elems.iter().map(|&a| p.neg(a)).collect(),
        }
    }

    /// Concatenate several vectors over the same field.
    pub fn concat(parts: &[FfVector]) -> Result<FfVector> {
        let first = parts
            .first()
            .ok_or_else(|| Error::dims("concat", 0, "at least one part"))?;
        let mut elems = Vec::new();
        for part in parts {
            same_modulus(first.p, part.p)?;
            elems.extend_from_slice(&part.elems);
        }
        Ok(FfVector { p: first.p, elems })
    }

    pub fn slice(&self, start: usize, len: usize) -> FfVector {
        FfVector {
            p: self.p,
            elems: self.elems[start..start + len].to_vec(),
        }
    }

    /// Hamming distance to `other`.
    pub fn distance(&self, other: &FfVector) -> Result<usize> {
        self.check_conformable(other, "distance")?;
        Ok(self
            .elems
            .iter()
            .zip(&other.elems)
            .filter(|(a, b)| a != b)
            .count())
    }
}

impl fmt::Display for FfVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})_{}", self.digits(), self.p.p())
    }
}

/// Finite-field inner product `Σ uᵢ·vᵢ mod p`.
pub fn dot(u: &FfVector, v: &FfVector) -> Result<u8> {
    u.check_conformable(v, "dot")?;
    let p = u.p;
    let s: u32 = u
        .elems
        .iter()
        .zip(&v.elems)
        .map(|(&a, &b)| a as u32 * b as u32)
        .sum();
    Ok((s % p.p() as u32) as u8)
}

/// A dense row-major matrix over GF(p).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FfMatrix {
    p: FieldModulus,
    rows: usize,
    cols: usize,
    entries: Vec<u8>,
}

impl FfMatrix {
    pub fn new(p: FieldModulus, rows: usize, cols: usize, entries: Vec<u8>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::dims(
                "matrix literal",
                format!("{rows}x{cols}"),
                format!("{} entries", entries.len()),
            ));
        }
        for &e in &entries {
            p.check(e as u32)?;
        }
        Ok(Self {
            p,
            rows,
            cols,
            entries,
        })
    }

    /// Build from rows given as digit strings, e.g. `["11", "21"]`.
    pub fn from_digit_rows(p: FieldModulus, rows: &[&str]) -> Result<Self> {
        let vecs = rows
            .iter()
            .map(|r| FfVector::from_digits(p, r))
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(p, &vecs)
    }

    pub fn from_rows(p: FieldModulus, rows: &[FfVector]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut entries = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            same_modulus(p, r.p)?;
            if r.len() != cols {
                return Err(Error::dims("from_rows", cols, r.len()));
            }
            entries.extend_from_slice(&r.elems);
        }
        Ok(Self {
            p,
            rows: rows.len(),
            cols,
            entries,
        })
    }

    pub fn zeros(p: FieldModulus, rows: usize, cols: usize) -> Self {
        Self {
            p,
            rows,
            cols,
            entries: vec![0; rows * cols],
        }
    }

    pub fn identity(p: FieldModulus, n: usize) -> Self {
        let mut m = Self::zeros(p, n, n);
        for i in 0..n {
            m.entries[i * n + i] = 1;
        }
        m
    }

    #[inline]
    pub fn modulus(&self) -> FieldModulus {
        self.p
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> u8 {
        self.entries[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: u8) {
        self.entries[r * self.cols + c] = v % self.p.p();
    }

    pub fn entries(&self) -> &[u8] {
        &self.entries
    }

    pub fn row_slice(&self, r: usize) -> &[u8] {
        &self.entries[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row(&self, r: usize) -> FfVector {
        FfVector {
            p: self.p,
            elems: self.row_slice(r).to_vec(),
        }
    }

    pub fn row_vectors(&self) -> Vec<FfVector> {
        (0..self.rows).map(|r| self.row(r)).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&e| e == 0)
    }

    pub fn is_identity(&self) -> bool {
        self.rows == self.cols && *self == Self::identity(self.p, self.rows)
    }

    pub fn transpose(&self) -> FfMatrix {
        let mut t = Self::zeros(self.p, self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.entries[c * self.rows + r] = self.get(r, c);
            }
        }
        t
    }

    /// Rows `start..start + count`.
    pub fn row_block(&self, start: usize, count: usize) -> FfMatrix {
        FfMatrix {
            p: self.p,
            rows: count,
            cols: self.cols,
            entries: self.entries[start * self.cols..(start + count) * self.cols].to_vec(),
        }
    }

    /// Columns `start..start + count`.
    pub fn col_block(&self, start: usize, count: usize) -> FfMatrix {
        let mut out = Self::zeros(self.p, self.rows, count);
        for r in 0..self.rows {
            for c in 0..count {
                out.entries[r * count + c] = self.get(r, start + c);
            }
        }
        out
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hcat(&self, other: &FfMatrix) -> Result<FfMatrix> {
        same_modulus(self.p, other.p)?;
        if self.rows != other.rows {
            return Err(Error::dims("hcat", self.rows, other.rows));
        }
        let cols = self.cols + other.cols;
        let mut entries = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            entries.extend_from_slice(self.row_slice(r));
            entries.extend_from_slice(other.row_slice(r));
        }
        Ok(FfMatrix {
            p: self.p,
            rows: self.rows,
            cols,
            entries,
        })
    }

    fn zip_with(
        &self,
        other: &FfMatrix,
        op: &'static str,
        f: impl Fn(u8, u8) -> u8,
    ) -> Result<FfMatrix> {
        same_modulus(self.p, other.p)?;
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::dims(
                op,
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        Ok(FfMatrix {
            p: self.p,
            rows: self.rows,
            cols: self.cols,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &FfMatrix) -> Result<FfMatrix> {
        let p = self.p;
        self.zip_with(other, "matrix add", |a, b| p.add(a, b))
    }

    pub fn sub(&self, other: &FfMatrix) -> Result<FfMatrix> {
        let p = self.p;
        self.zip_with(other, "matrix sub", |a, b| p.sub(a, b))
    }

    pub fn scale(&self, c: u8) -> FfMatrix {
        let p = self.p;
        let c = c % p.p();
        FfMatrix {
            entries: self.entries.iter().map(|&a| p.mul(a, c)).collect(),
            ..self.clone()
        }
    }

    pub fn negate(&self) -> FfMatrix {
        let p = self.p;
        FfMatrix {
            entries: self.entries.iter().map(|&a| p.neg(a)).collect(),
            ..self.clone()
        }
    }

    /// Row vector times matrix: `v · self`.
    pub fn left_mul(&self, v: &FfVector) -> Result<FfVector> {
        same_modulus(self.p, v.p)?;
        if v.len() != self.rows {
            return Err(Error::dims("vector-matrix product", v.len(), self.rows));
        }
        let p = self.p.p() as u32;
        let mut acc = vec![0u32; self.cols];
        for (r, &coef) in v.elems.iter().enumerate() {
            if coef == 0 {
                continue;
            }
            for (a, &g) in acc.iter_mut().zip(self.row_slice(r)) {
                *a += coef as u32 * g as u32;
            }
        }
        Ok(FfVector {
            p: self.p,
            elems: acc.into_iter().map(|a| (a % p) as u8).collect(),
        })
    }

    /// Gaussian elimination with first-nonzero pivoting. Returns the reduced
    /// row echelon form and the pivot columns.
    pub fn rref(&self) -> (FfMatrix, Vec<usize>) {
        let p = self.p;
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut row = 0;
        for col in 0..m.cols {
            if row == m.rows {
                break;
            }
            let Some(pr) = (row..m.rows).find(|&r| m.get(r, col) != 0) else {
                continue;
            };
            if pr != row {
                for c in 0..m.cols {
                    m.entries.swap(pr * m.cols + c, row * m.cols + c);
                }
            }
            let inv = p.inv(m.get(row, col));
            for c in 0..m.cols {
                let v = p.mul(m.get(row, c), inv);
                m.set(row, c, v);
            }
            for r in 0..m.rows {
                if r == row {
                    continue;
                }
                let f = m.get(r, col);
                if f == 0 {
                    continue;
                }
                for c in 0..m.cols {
                    let v = p.sub(m.get(r, c), p.mul(f, m.get(row, c)));
                    m.set(r, c, v);
                }
            }
            pivots.push(col);
            row += 1;
        }
        (m, pivots)
    }

    /// Inverse of a square matrix, if it exists.
    pub fn inverse(&self) -> Option<FfMatrix> {
        if self.rows != self.cols {
            return None;
        }
        let aug = self
            .hcat(&FfMatrix::identity(self.p, self.rows))
            .expect("same modulus and rows");
        let (red, pivots) = aug.rref();
        if pivots.len() < self.rows || pivots[self.rows - 1] >= self.cols {
            return None;
        }
        Some(red.col_block(self.cols, self.cols))
    }

    /// Parse the `p rows cols` text format.
    pub fn parse(text: &str) -> Result<FfMatrix> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (hline, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "empty matrix text".into(),
        })?;
        let nums = parse_uints(header, hline)?;
        let [p, rows, cols] = nums[..] else {
            return Err(Error::Parse {
                line: hline,
                msg: format!("expected header `p rows cols`, got {header:?}"),
            });
        };
        let p = FieldModulus::new(p)?;
        let mut entries = Vec::with_capacity((rows * cols) as usize);
        let mut last_line = hline;
        for (ln, l) in lines {
            last_line = ln;
            for tok in l.split_whitespace() {
                // Allow packed digit rows like `1021` as well as `1 0 2 1`.
                if tok.len() > 1 && tok.chars().all(|c| c.is_ascii_digit()) && p.p() < 10 {
                    for c in tok.chars() {
                        entries.push(p.check(c.to_digit(10).unwrap_or(0))?);
                    }
                } else {
                    let v: u32 = tok.parse().map_err(|_| Error::Parse {
                        line: ln,
                        msg: format!("bad entry {tok:?}"),
                    })?;
                    entries.push(p.check(v)?);
                }
            }
        }
        if entries.len() != (rows * cols) as usize {
            return Err(Error::Parse {
                line: last_line,
                msg: format!("expected {} entries, found {}", rows * cols, entries.len()),
            });
        }
        FfMatrix::new(p, rows as usize, cols as usize, entries)
    }

    /// Render in the `p rows cols` text format, one row per line.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {} {}\n", self.p.p(), self.rows, self.cols);
        for r in 0..self.rows {
            let row: Vec<String> = self.row_slice(r).iter().map(|e| e.to_string()).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }
}

pub(crate) fn parse_uints(line: &str, ln: usize) -> Result<Vec<u32>> {
    line.split_whitespace()
        .map(|t| {
            t.parse::<u32>().map_err(|_| Error::Parse {
                line: ln,
                msg: format!("expected unsigned integer, got {t:?}"),
            })
        })
        .collect()
}

impl fmt::Display for FfMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.rows {
            let row: Vec<String> = self.row_slice(r).iter().map(|e| e.to_string()).collect();
            writeln!(f, "[{}]", row.join(" "))?;
        }
        Ok(())
    }
}

pub fn mat_mul(a: &FfMatrix, b: &FfMatrix) -> Result<FfMatrix> {
    same_modulus(a.p, b.p)?;
    if a.cols != b.rows {
        return Err(Error::dims(
            "mat_mul",
            format!("{}x{}", a.rows, a.cols),
            format!("{}x{}", b.rows, b.cols),
        ));
    }
    let mut out = Vec::with_capacity(a.rows * b.cols);
    for r in 0..a.rows {
        out.extend(b.left_mul(&a.row(r))?.elems);
    }
    Ok(FfMatrix {
        p: a.p,
        rows: a.rows,
        cols: b.cols,
        entries: out,
    })
}

pub fn rank(a: &FfMatrix) -> usize {
    a.rref().1.len()
}

pub fn kronecker(a: &FfMatrix, b: &FfMatrix) -> Result<FfMatrix> {
    same_modulus(a.p, b.p)?;
    let p = a.p;
    let rows = a.rows * b.rows;
    let cols = a.cols * b.cols;
    let mut out = FfMatrix::zeros(p, rows, cols);
    for ar in 0..a.rows {
        for ac in 0..a.cols {
            let s = a.get(ar, ac);
            for br in 0..b.rows {
                for bc in 0..b.cols {
                    out.entries[(ar * b.rows + br) * cols + ac * b.cols + bc] =
                        p.mul(s, b.get(br, bc));
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn g5() -> FfMatrix {
        FfMatrix::from_digit_rows(
            FieldModulus::GF2,
            &["11111111", "00001111", "00110011", "01010101"],
        )
        .unwrap()
    }

    fn t_no() -> FfMatrix {
        FfMatrix::from_digit_rows(FieldModulus::GF3, &["11", "21", "01"]).unwrap()
    }

    fn t_o2() -> FfMatrix {
        FfMatrix::from_digit_rows(FieldModulus::GF3, &["11", "21"]).unwrap()
    }

    #[test]
    fn identity_times_g_is_g() {
        let g = g5();
        assert_eq!(
            mat_mul(&FfMatrix::identity(FieldModulus::GF2, 4), &g).unwrap(),
            g
        );
    }

    #[test]
    fn row_combination_of_rm_generator() {
        let v = FfVector::from_digits(FieldModulus::GF2, "1100").unwrap();
        assert_eq!(g5().left_mul(&v).unwrap().digits(), "11110000");
    }

    #[test]
    fn all_ones_times_t_no_vanishes() {
        let v = FfVector::from_digits(FieldModulus::GF3, "111").unwrap();
        assert_eq!(t_no().left_mul(&v).unwrap().digits(), "00");
    }

    #[test]
    fn mat_mul_rejects_bad_shapes() {
        assert!(matches!(
            mat_mul(&g5(), &g5()),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            mat_mul(&FfMatrix::identity(FieldModulus::GF3, 4), &g5()),
            Err(Error::ModulusMismatch { .. })
        ));
    }

    #[test]
    fn ranks() {
        assert_eq!(rank(&g5()), 4);
        assert_eq!(rank(&FfMatrix::zeros(FieldModulus::GF3, 3, 5)), 0);
        assert_eq!(rank(&t_no()), 2);
    }

    #[test]
    fn kronecker_builds_ternary_orthogonal() {
        let t4 = kronecker(&t_o2(), &t_o2()).unwrap();
        let expected =
            FfMatrix::from_digit_rows(FieldModulus::GF3, &["1111", "2121", "2211", "1221"])
                .unwrap();
        assert_eq!(t4, expected);
        let one = FfMatrix::identity(FieldModulus::GF3, 1);
        assert_eq!(kronecker(&one, &t4).unwrap(), t4);
        let t8 = kronecker(&t_o2(), &t4).unwrap();
        let expected8 = FfMatrix::from_digit_rows(
            FieldModulus::GF3,
            &[
                "11111111", "21212121", "22112211", "12211221", "22221111", "12122121", "11222211",
                "21121221",
            ],
        )
        .unwrap();
        assert_eq!(t8, expected8);
    }

    #[test]
    fn dot_products() {
        let p = FieldModulus::GF3;
        let w = FfVector::from_digits(p, "1021").unwrap();
        assert_eq!(
            dot(&w, &FfVector::from_digits(p, "1111").unwrap()).unwrap(),
            1
        );
        assert_eq!(
            dot(&w, &FfVector::from_digits(p, "2121").unwrap()).unwrap(),
            1
        );
        assert_eq!(dot(&w, &FfVector::zeros(p, 4)).unwrap(), 0);
        assert!(dot(&w, &FfVector::zeros(p, 3)).is_err());
    }

    #[test]
    fn scale_negate_add() {
        let t = t_o2();
        assert_eq!(
            t.scale(2),
            FfMatrix::from_digit_rows(FieldModulus::GF3, &["22", "12"]).unwrap()
        );
        assert_eq!(t.negate().negate(), t);
        let t4 = kronecker(&t, &t).unwrap();
        assert!(t4.add(&t4.scale(2)).unwrap().is_zero());
        assert!(t.add(&g5()).is_err());
    }

    #[test]
    fn text_format_roundtrip_and_errors() {
        let m = t_no();
        assert_eq!(FfMatrix::parse(&m.to_text()).unwrap(), m);
        assert_eq!(FfMatrix::parse("3 3 2\n11\n21\n01\n").unwrap(), m);
        assert!(matches!(
            FfMatrix::parse("3 2 2\n1 1\n2"),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            FfMatrix::parse("5 1 1\n1"),
            Err(Error::UnsupportedModulus(5))
        ));
        assert!(matches!(
            FfMatrix::parse("2 1 2\n1 2"),
            Err(Error::ElementOutOfRange { value: 2, p: 2 })
        ));
    }

    #[test]
    fn inverse_of_small_matrices() {
        let t = t_o2();
        let inv = t.inverse().unwrap();
        assert!(mat_mul(&t, &inv).unwrap().is_identity());
        assert!(t_no().inverse().is_none());
        assert!(FfMatrix::zeros(FieldModulus::GF2, 2, 2).inverse().is_none());
    }

    fn modulus() -> impl Strategy<Value = FieldModulus> {
        prop_oneof![
            Just(FieldModulus::GF2),
            Just(FieldModulus::GF3),
            Just(FieldModulus::GF7)
        ]
    }

    fn matrix(p: FieldModulus, rows: usize, cols: usize) -> impl Strategy<Value = FfMatrix> {
        proptest::collection::vec(0..p.p(), rows * cols)
            .prop_map(move |e| FfMatrix::new(p, rows, cols, e).unwrap())
    }

    fn triple() -> impl Strategy<Value = (FfMatrix, FfMatrix, FfMatrix)> {
        (modulus(), 1usize..5, 1usize..5, 1usize..5, 1usize..5)
            .prop_flat_map(|(p, a, b, c, d)| (matrix(p, a, b), matrix(p, b, c), matrix(p, c, d)))
    }

    proptest! {
        #[test]
        fn mat_mul_is_associative((a, b, c) in triple()) {
            let left = mat_mul(&mat_mul(&a, &b).unwrap(), &c).unwrap();
            let right = mat_mul(&a, &mat_mul(&b, &c).unwrap()).unwrap();
            prop_assert_eq!(left, right);
        }

        #[test]
        fn mat_mul_distributes((a, b, _c) in triple(), seed in any::<u64>()) {
            let p = a.modulus();
            let mut s = seed;
            let entries: Vec<u8> = (0..b.rows() * b.cols()).map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 33) % p.p() as u64) as u8
            }).collect();
            let b2 = FfMatrix::new(p, b.rows(), b.cols(), entries).unwrap();
            let lhs = mat_mul(&a, &b.add(&b2).unwrap()).unwrap();
            let rhs = mat_mul(&a, &b).unwrap().add(&mat_mul(&a, &b2).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn rank_bounds_and_row_permutation(
            (p, rows, cols) in (modulus(), 1usize..7, 1usize..7),
            seed in any::<u64>(),
        ) {
            let mut s = seed;
            let mut next = || { s = s.wrapping_mul(6364136223846793005).wrapping_add(1); (s >> 33) as usize };
            let entries: Vec<u8> = (0..rows * cols).map(|_| (next() % p.order()) as u8).collect();
            let a = FfMatrix::new(p, rows, cols, entries).unwrap();
            let r = rank(&a);
            prop_assert!(r <= rows.min(cols));
            let mut order: Vec<usize> = (0..rows).collect();
            for i in (1..rows).rev() { order.swap(i, next() % (i + 1)); }
            let permuted = FfMatrix::from_rows(p, &order.iter().map(|&i| a.row(i)).collect::<Vec<_>>()).unwrap();
            prop_assert_eq!(rank(&permuted), r);
            prop_assert_eq!(rank(&FfMatrix::identity(p, rows)), rows);
        }

        #[test]
        fn kronecker_rank_multiplies(
            (a, b) in (modulus(), 1usize..4, 1usize..4, 1usize..4, 1usize..4)
                .prop_flat_map(|(p, r1, c1, r2, c2)| (matrix(p, r1, c1), matrix(p, r2, c2)))
        ) {
            let k = kronecker(&a, &b).unwrap();
            prop_assert_eq!(rank(&k), rank(&a) * rank(&b));
        }

        #[test]
        fn negation_is_additive_inverse(a in modulus().prop_flat_map(|p| matrix(p, 3, 4))) {
            prop_assert!(a.add(&a.negate()).unwrap().is_zero());
            if a.modulus() == FieldModulus::GF3 {
                prop_assert_eq!(a.scale(2), a.negate());
            }
        }
    }
}
