//! Arithmetic in GF(2^w) for w in {4, 8, 16} and dense linear algebra over it.
//!
//! Elements are plain `u16` values whose bits are the coefficients of a
//! polynomial over GF(2). Addition is XOR; multiplication and inversion go
//! through log/antilog tables built once per [`Field`]. Tables are immutable
//! after construction, so a `Field` can be shared freely between threads.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A field element. Only the low `w` bits are ever set.
pub type Elem = u16;

/// Field width plus reduction polynomial.
///
/// `poly` holds the low `w` bits of the polynomial; the leading `x^w` term is
/// implicit. `x^4 + x^3 + 1` is therefore `FieldDesc { w: 4, poly: 0b1001 }`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FieldDesc {
    pub w: u8,
    pub poly: u32,
}

impl FieldDesc {
    /// GF(16) with `x^4 + x^3 + 1`.
    pub const GF16: FieldDesc = FieldDesc { w: 4, poly: 0x9 };
    /// GF(256) with `x^8 + x^4 + x^3 + x^2 + 1`.
    pub const GF256: FieldDesc = FieldDesc { w: 8, poly: 0x1d };
    /// GF(65536) with `x^16 + x^12 + x^3 + x + 1`.
    pub const GF65536: FieldDesc = FieldDesc { w: 16, poly: 0x100b };

    /// GF(2), only useful for exercising degenerate cases.
    pub const GF2: FieldDesc = FieldDesc { w: 1, poly: 0x1 };

    /// Widths 4, 8 and 16 are the storage widths; 1 and 2 are accepted for
    /// arithmetic only.
    pub fn new(w: u8, poly: u32) -> Result<Self> {
        if !matches!(w, 1 | 2 | 4 | 8 | 16) {
            return Err(Error::UnsupportedWidth(w));
        }
        if poly >> w != 0 || !is_irreducible(poly | (1 << w), w as u32) {
            return Err(Error::ReduciblePolynomial { w, poly });
        }
        Ok(FieldDesc { w, poly })
    }

    /// The default polynomial for a supported width.
    pub fn default_for(w: u8) -> Result<Self> {
        match w {
            4 => Ok(Self::GF16),
            8 => Ok(Self::GF256),
            16 => Ok(Self::GF65536),
            _ => Err(Error::UnsupportedWidth(w)),
        }
    }

    /// Full polynomial including the leading term.
    pub fn full_poly(&self) -> u32 {
        self.poly | (1 << self.w)
    }

    pub fn order(&self) -> u32 {
        1 << self.w
    }

    /// Human-readable polynomial, e.g. `x^4+x^3+1`.
    pub fn poly_string(&self) -> String {
        let full = self.full_poly();
        let mut terms = Vec::new();
        for bit in (0..=self.w as u32).rev() {
            if full >> bit & 1 == 1 {
                terms.push(match bit {
                    0 => "1".to_string(),
                    1 => "x".to_string(),
                    _ => format!("x^{bit}"),
                });
            }
        }
        terms.join("+")
    }
}

impl fmt::Display for FieldDesc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GF(2^{}) mod {}", self.w, self.poly_string())
    }
}

/// Carry-less product of two polynomials over GF(2).
pub(crate) fn clmul(a: u64, b: u64) -> u64 {
    let mut acc = 0;
    for bit in 0..64 {
        if b >> bit & 1 == 1 {
            acc ^= a << bit;
        }
    }
    acc
}

fn degree(p: u64) -> i32 {
    63 - p.leading_zeros() as i32
}

/// Remainder of `a` divided by `m` over GF(2).
pub(crate) fn poly_rem(mut a: u64, m: u64) -> u64 {
    let dm = degree(m);
    while a != 0 && degree(a) >= dm {
        a ^= m << (degree(a) - dm);
    }
    a
}

/// Trial division by every polynomial of degree 1..=w/2.
fn is_irreducible(full: u32, w: u32) -> bool {
    if degree(full as u64) != w as i32 {
        return false;
    }
    for d in 1..=w / 2 {
        for low in 0..(1u64 << d) {
            let divisor = (1u64 << d) | low;
            if poly_rem(full as u64, divisor) == 0 {
                return false;
            }
        }
    }
    true
}

/// GF(2^w) with precomputed log/antilog tables.
#[derive(Clone)]
pub struct Field {
    desc: FieldDesc,
    // exp is doubled so exp[log a + log b] needs no reduction.
    exp: Vec<Elem>,
    log: Vec<u32>,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field").field("desc", &self.desc).finish()
    }
}

impl Field {
    pub fn new(desc: FieldDesc) -> Result<Self> {
        let desc = FieldDesc::new(desc.w, desc.poly)?;
        let q = desc.order() as usize;
        let full = desc.full_poly() as u64;
        let slow_mul = |a: u64, b: u64| poly_rem(clmul(a, b), full);

        // An irreducible polynomial need not be primitive, so search for a generator.
        let generator = (2..q as u64)
            .find(|&g| {
                let mut x = 1u64;
                for step in 1..q {
                    x = slow_mul(x, g);
                    if x == 1 {
                        return step == q - 1;
                    }
                }
                false
            })
            .unwrap_or(1);

        let mut exp = vec![0 as Elem; 2 * q];
        let mut log = vec![0u32; q];
        let mut x = 1u64;
        for (i, e) in exp.iter_mut().enumerate().take(q - 1) {
            *e = x as Elem;
            log[x as usize] = i as u32;
            x = slow_mul(x, generator);
        }
        for i in q - 1..2 * q {
            exp[i] = exp[i - (q - 1)];
        }
        Ok(Field { desc, exp, log })
    }

    pub fn with_width(w: u8) -> Result<Self> {
        Field::new(FieldDesc::default_for(w)?)
    }

    pub fn desc(&self) -> FieldDesc {
        self.desc
    }

    pub fn w(&self) -> u8 {
        self.desc.w
    }

    pub fn order(&self) -> u32 {
        self.desc.order()
    }

    /// Validates a raw value as an element of this field.
    pub fn elem(&self, value: u32) -> Result<Elem> {
        if value < self.order() {
            Ok(value as Elem)
        } else {
            Err(Error::ElementOutOfRange { w: self.desc.w, value })
        }
    }

    #[inline]
    pub fn add(&self, a: Elem, b: Elem) -> Elem {
        a ^ b
    }

    #[inline]
    pub fn mul(&self, a: Elem, b: Elem) -> Elem {
        if a == 0 || b == 0 {
            0
        } else {
            self.exp[(self.log[a as usize] + self.log[b as usize]) as usize]
        }
    }

    pub fn inv(&self, a: Elem) -> Result<Elem> {
        if a == 0 {
            return Err(Error::DivisionByZero { w: self.desc.w });
        }
        let q1 = self.order() - 1;
        Ok(self.exp[((q1 - self.log[a as usize]) % q1) as usize])
    }

    pub fn div(&self, a: Elem, b: Elem) -> Result<Elem> {
        Ok(self.mul(a, self.inv(b)?))
    }

    /// Uniform nonzero element.
    pub fn random_nonzero<R: Rng + ?Sized>(&self, rng: &mut R) -> Elem {
        rng.gen_range(1..self.order()) as Elem
    }

    /// Uniform element.
    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> Elem {
        rng.gen_range(0..self.order()) as Elem
    }

    /// `dst[i] ^= c * src[i]`
    pub fn mul_add_slice(&self, dst: &mut [Elem], src: &[Elem], c: Elem) {
        debug_assert_eq!(dst.len(), src.len());
        if c == 0 {
            return;
        }
        if c == 1 {
            dst.iter_mut().zip(src).for_each(|(d, s)| *d ^= s);
            return;
        }
        let lc = self.log[c as usize];
        for (d, &s) in dst.iter_mut().zip(src) {
            if s != 0 {
                *d ^= self.exp[(self.log[s as usize] + lc) as usize];
            }
        }
    }

    /// `row[i] *= c`
    pub fn scale_slice(&self, row: &mut [Elem], c: Elem) {
        if c == 1 {
            return;
        }
        for v in row.iter_mut() {
            *v = self.mul(*v, c);
        }
    }
}

/// Dense row-major matrix over a [`Field`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Elem>,
}

impl FieldMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        FieldMatrix { rows, cols, data: vec![0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<Elem>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!("{} entries for a {rows}x{cols} matrix", data.len())));
        }
        Ok(FieldMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<Elem>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Ok(FieldMatrix { rows: rows.len(), cols, data: rows.concat() })
    }

    pub fn random<R: Rng + ?Sized>(field: &Field, rows: usize, cols: usize, rng: &mut R) -> Self {
        let data = (0..rows * cols).map(|_| field.random(rng)).collect();
        FieldMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[Elem] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [Elem] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[Elem] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<Elem> {
        self.data
    }

    pub fn mul(&self, field: &Field, other: &FieldMatrix) -> Result<FieldMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = FieldMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for t in 0..self.cols {
                let c = self[(i, t)];
                if c != 0 {
                    let (src, dst) = (other.row(t), &mut out.data[i * other.cols..(i + 1) * other.cols]);
                    field.mul_add_slice(dst, src, c);
                }
            }
        }
        Ok(out)
    }

    /// Solves `self * x = rhs` by Gauss-Jordan elimination. `rhs` may carry
    /// several right-hand-side columns.
    pub fn solve(&self, field: &Field, rhs: &FieldMatrix) -> Result<FieldMatrix> {
        if self.rows != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "solve needs a square matrix, got {}x{}",
                self.rows, self.cols
            )));
        }
        if rhs.rows != self.rows {
            return Err(Error::DimensionMismatch(format!("rhs has {} rows, matrix has {}", rhs.rows, self.rows)));
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut b = rhs.clone();
        for col in 0..n {
            let pivot = (col..n).find(|&r| a[(r, col)] != 0).ok_or(Error::SingularMatrix)?;
            a.swap_rows(col, pivot);
            b.swap_rows(col, pivot);
            let inv = field.inv(a[(col, col)])?;
            field.scale_slice(a.row_mut(col), inv);
            field.scale_slice(b.row_mut(col), inv);
            for r in 0..n {
                let factor = a[(r, col)];
                if r != col && factor != 0 {
                    a.eliminate(field, r, col, factor);
                    b.eliminate(field, r, col, factor);
                }
            }
        }
        Ok(b)
    }

    pub fn inverse(&self, field: &Field) -> Result<FieldMatrix> {
        self.solve(field, &FieldMatrix::identity(self.rows))
    }

    /// Rank by forward elimination.
    pub fn rank(&self, field: &Field) -> usize {
        let mut a = self.clone();
        let mut rank = 0;
        for col in 0..a.cols {
            if rank == a.rows {
                break;
            }
            let Some(pivot) = (rank..a.rows).find(|&r| a[(r, col)] != 0) else {
                continue;
            };
            a.swap_rows(rank, pivot);
            let inv = field.inv(a[(rank, col)]).expect("pivot is nonzero");
            field.scale_slice(&mut a.row_mut(rank)[col..], inv);
            for r in rank + 1..a.rows {
                let factor = a[(r, col)];
                if factor != 0 {
                    let (top, bottom) = a.data.split_at_mut(r * a.cols);
                    let src = &top[rank * a.cols + col..(rank + 1) * a.cols];
                    field.mul_add_slice(&mut bottom[col..a.cols], src, factor);
                }
            }
            rank += 1;
        }
        rank
    }

    fn swap_rows(&mut self, i: usize, j: usize) {
        if i != j {
            for c in 0..self.cols {
                self.data.swap(i * self.cols + c, j * self.cols + c);
            }
        }
    }

    // row r -= factor * row src
    fn eliminate(&mut self, field: &Field, r: usize, src: usize, factor: Elem) {
        let cols = self.cols;
        let (lo, hi) = (r.min(src), r.max(src));
        let (head, tail) = self.data.split_at_mut(hi * cols);
        let (dst, s) = if r < src {
            (&mut head[lo * cols..(lo + 1) * cols], &tail[..cols])
        } else {
            (&mut tail[..cols], &head[lo * cols..(lo + 1) * cols] as &[Elem])
        };
        field.mul_add_slice(dst, s, factor);
    }
}

impl std::ops::Index<(usize, usize)> for FieldMatrix {
    type Output = Elem;

    fn index(&self, (r, c): (usize, usize)) -> &Elem {
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for FieldMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Elem {
        &mut self.data[r * self.cols + c]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gf16() -> Field {
        Field::new(FieldDesc::GF16).unwrap()
    }

    // Schoolbook multiply + long division, independent of the tables.
    fn oracle_mul(desc: FieldDesc, a: Elem, b: Elem) -> Elem {
        let mut product = 0u32;
        for bit in 0..desc.w {
            if b >> bit & 1 == 1 {
                product ^= (a as u32) << bit;
            }
        }
        let full = desc.full_poly();
        for bit in (desc.w as u32..2 * desc.w as u32).rev() {
            if product >> bit & 1 == 1 {
                product ^= full << (bit - desc.w as u32);
            }
        }
        product as Elem
    }

    #[test]
    fn add_examples() {
        let f = gf16();
        assert_eq!(f.add(0x3, 0x3), 0x0);
        assert_eq!(f.add(0x0, 0x9), 0x9);
        assert_eq!(f.add(0x5, 0xA), 0xF);
    }

    #[test]
    fn mul_examples() {
        let f = gf16();
        assert_eq!(f.mul(0x1, 0x2), 0x2);
        assert_eq!(f.mul(0x0, 0x7), 0x0);
        assert_eq!(oracle_mul(FieldDesc::GF16, 0x2, 0x8), 0x9);
        assert_eq!(f.mul(0x2, 0x8), 0x9);
    }

    #[test]
    fn inv_examples() {
        let f = gf16();
        assert_eq!(f.inv(0x1).unwrap(), 0x1);
        let brute = (1..16).find(|&y| oracle_mul(FieldDesc::GF16, 0x2, y) == 1).unwrap();
        assert_eq!(brute, 0xC);
        assert_eq!(f.inv(0x2).unwrap(), 0xC);
        assert_eq!(f.inv(0x0), Err(Error::DivisionByZero { w: 4 }));
    }

    #[test]
    fn table_mul_matches_long_division() {
        for desc in [FieldDesc::GF16, FieldDesc::GF256] {
            let f = Field::new(desc).unwrap();
            let q = desc.order() as Elem;
            for a in 0..q {
                for b in 0..q {
                    assert_eq!(f.mul(a, b), oracle_mul(desc, a, b), "{desc}: {a} * {b}");
                }
            }
        }
        let f = Field::new(FieldDesc::GF65536).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20_000 {
            let (a, b) = (f.random(&mut rng), f.random(&mut rng));
            assert_eq!(f.mul(a, b), oracle_mul(FieldDesc::GF65536, a, b));
        }
    }

    #[test]
    fn rejects_bad_descriptors() {
        assert_eq!(FieldDesc::new(5, 0x5), Err(Error::UnsupportedWidth(5)));
        assert_eq!(FieldDesc::default_for(2), Err(Error::UnsupportedWidth(2)));
        let gf2 = Field::new(FieldDesc::GF2).unwrap();
        assert_eq!((gf2.mul(1, 1), gf2.inv(1).unwrap(), gf2.add(1, 1)), (1, 1, 0));
        let gf4 = Field::new(FieldDesc::new(2, 0x3).unwrap()).unwrap();
        assert_eq!(gf4.mul(2, 3), 1);
        // x^4 + 1 = (x + 1)^4
        assert!(matches!(FieldDesc::new(4, 0x1), Err(Error::ReduciblePolynomial { .. })));
        // x^4 + x^2 + 1 = (x^2 + x + 1)^2
        assert!(matches!(FieldDesc::new(4, 0x5), Err(Error::ReduciblePolynomial { .. })));
        assert!(FieldDesc::new(4, 0x9).is_ok());
        assert!(FieldDesc::new(4, 0x3).is_ok());
        assert_eq!(FieldDesc::GF16.poly_string(), "x^4+x^3+1");
    }

    #[test]
    fn non_primitive_polynomial_still_works() {
        // x^4 + x^3 + x^2 + x + 1 is irreducible but x has order 5.
        let f = Field::new(FieldDesc { w: 4, poly: 0xf }).unwrap();
        for a in 1..16 {
            assert_eq!(f.mul(a, f.inv(a).unwrap()), 1);
            for b in 0..16 {
                assert_eq!(f.mul(a, b), oracle_mul(f.desc(), a, b));
            }
        }
    }

    #[test]
    fn elem_range_check() {
        let f = gf16();
        assert_eq!(f.elem(15).unwrap(), 15);
        assert!(f.elem(16).is_err());
    }

    #[test]
    fn solve_examples() {
        let f = gf16();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rhs = FieldMatrix::random(&f, 4, 3, &mut rng);
        assert_eq!(FieldMatrix::identity(4).solve(&f, &rhs).unwrap(), rhs);

        let a = FieldMatrix::from_rows(&[vec![0x7]]).unwrap();
        let b = FieldMatrix::from_rows(&[vec![0x5]]).unwrap();
        let x = a.solve(&f, &b).unwrap();
        assert_eq!(x[(0, 0)], f.mul(f.inv(0x7).unwrap(), 0x5));

        let mut found = 0;
        while found < 5 {
            let m = FieldMatrix::random(&f, 8, 8, &mut rng);
            if m.rank(&f) < 8 {
                assert_eq!(m.solve(&f, &rhs_of(&f, 8, &mut rng)), Err(Error::SingularMatrix));
                continue;
            }
            let x0 = FieldMatrix::random(&f, 8, 1, &mut rng);
            let b = m.mul(&f, &x0).unwrap();
            assert_eq!(m.solve(&f, &b).unwrap(), x0);
            found += 1;
        }
    }

    fn rhs_of(f: &Field, n: usize, rng: &mut ChaCha8Rng) -> FieldMatrix {
        FieldMatrix::random(f, n, 1, rng)
    }

    #[test]
    fn solve_rejects_bad_shapes() {
        let f = gf16();
        let m = FieldMatrix::zeros(2, 3);
        assert!(matches!(m.solve(&f, &FieldMatrix::zeros(2, 1)), Err(Error::DimensionMismatch(_))));
        let m = FieldMatrix::identity(2);
        assert!(matches!(m.solve(&f, &FieldMatrix::zeros(3, 1)), Err(Error::DimensionMismatch(_))));
    }

    // Determinant by cofactor expansion, used as an independent rank witness.
    fn det_by_minors(f: &Field, m: &FieldMatrix) -> Elem {
        let n = m.rows();
        if n == 1 {
            return m[(0, 0)];
        }
        let mut acc = 0;
        for c in 0..n {
            let mut minor = Vec::new();
            for r in 1..n {
                minor.push((0..n).filter(|&cc| cc != c).map(|cc| m[(r, cc)]).collect::<Vec<_>>());
            }
            let minor = FieldMatrix::from_rows(&minor).unwrap();
            acc ^= f.mul(m[(0, c)], det_by_minors(f, &minor));
        }
        acc
    }

    #[test]
    fn rank_examples() {
        let f = gf16();
        assert_eq!(FieldMatrix::zeros(3, 3).rank(&f), 0);
        assert_eq!(FieldMatrix::identity(4).rank(&f), 4);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let mut m = FieldMatrix::random(&f, 4, 4, &mut rng);
            let dup = m.row(1).to_vec();
            m.row_mut(3).copy_from_slice(&dup);
            assert_eq!(det_by_minors(&f, &m), 0);
            assert!(m.rank(&f) <= 3);
            let full = FieldMatrix::random(&f, 4, 4, &mut rng);
            assert_eq!(full.rank(&f) == 4, det_by_minors(&f, &full) != 0);
        }
    }
}
