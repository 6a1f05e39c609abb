//! Exact integer matrices sized for the attack's 5x6 systems.
//!
//! Entries grow large but stay bounded: for a 500-bit prime the right-hand
//! side reaches about p^3 (roughly 1500 bits) and the 5x5 determinant a few
//! thousand bits. Bareiss elimination keeps every intermediate value at the
//! size of a minor determinant, so no windowed arithmetic is needed.

use crate::nt::{gcd, mod_reduce};
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::ops::{Index, IndexMut};

/// Dense row-major matrix of arbitrary-precision integers.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    #[serde(with = "crate::jsonio::dec_vec")]
    entries: Vec<BigInt>,
}

impl IntMatrix {
    pub fn zero(rows: usize, cols: usize) -> Self {
        IntMatrix {
            rows,
            cols,
            entries: vec![BigInt::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zero(n, n);
        for i in 0..n {
            m[(i, i)] = BigInt::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> BigInt) -> Self {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        IntMatrix {
            rows,
            cols,
            entries,
        }
    }

    pub fn from_rows(data: Vec<Vec<BigInt>>) -> Self {
        let rows = data.len();
        let cols = data.first().map_or(0, Vec::len);
        assert!(data.iter().all(|r| r.len() == cols), "ragged rows");
        IntMatrix {
            rows,
            cols,
            entries: data.into_iter().flatten().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, j: usize) -> Vec<BigInt> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    /// New matrix keeping only the listed columns, in the given order.
    pub fn select_columns(&self, js: &[usize]) -> IntMatrix {
        IntMatrix::from_fn(self.rows, js.len(), |i, k| self[(i, js[k])].clone())
    }

    pub fn mul(&self, rhs: &IntMatrix) -> IntMatrix {
        assert_eq!(self.cols, rhs.rows, "dimension mismatch");
        IntMatrix::from_fn(self.rows, rhs.cols, |i, j| {
            (0..self.cols).map(|k| &self[(i, k)] * &rhs[(k, j)]).sum()
        })
    }

    pub fn mul_vec(&self, v: &[BigInt]) -> Vec<BigInt> {
        assert_eq!(self.cols, v.len(), "dimension mismatch");
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| &self[(i, j)] * &v[j]).sum())
            .collect()
    }

    /// Determinant by one-step Bareiss fraction-free elimination.
    /// Every interior division is exact; intermediates are minor determinants.
    pub fn det_bareiss(&self) -> BigInt {
        assert_eq!(self.rows, self.cols, "determinant needs a square matrix");
        let n = self.rows;
        if n == 0 {
            return BigInt::one();
        }
        let mut a = self.clone();
        let mut sign = 1i32;
        let mut prev = BigInt::one();
        for k in 0..n - 1 {
            if a[(k, k)].is_zero() {
                let Some(swap) = (k + 1..n).find(|&i| !a[(i, k)].is_zero()) else {
                    return BigInt::zero();
                };
                for j in 0..n {
                    let tmp = a[(k, j)].clone();
                    a[(k, j)] = a[(swap, j)].clone();
                    a[(swap, j)] = tmp;
                }
                sign = -sign;
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let num = &a[(i, j)] * &a[(k, k)] - &a[(i, k)] * &a[(k, j)];
                    debug_assert!((&num % &prev).is_zero(), "Bareiss division must be exact");
                    a[(i, j)] = num / &prev;
                }
                a[(i, k)] = BigInt::zero();
            }
            prev = a[(k, k)].clone();
        }
        let det = a[(n - 1, n - 1)].clone();
        if sign < 0 {
            -det
        } else {
            det
        }
    }

    /// Adjugate matrix: `self * adjugate = det * I`, for any square matrix.
    pub fn adjugate(&self) -> IntMatrix {
        assert_eq!(self.rows, self.cols, "adjugate needs a square matrix");
        let n = self.rows;
        if n == 0 {
            return IntMatrix::zero(0, 0);
        }
        if n == 1 {
            return IntMatrix::identity(1);
        }
        IntMatrix::from_fn(n, n, |j, i| {
            let minor = IntMatrix::from_fn(n - 1, n - 1, |r, c| {
                let rr = if r < i { r } else { r + 1 };
                let cc = if c < j { c } else { c + 1 };
                self[(rr, cc)].clone()
            });
            let d = minor.det_bareiss();
            if (i + j) % 2 == 1 {
                -d
            } else {
                d
            }
        })
    }

    /// Smith normal form `U * self * V = S` with unimodular `U`, `V` and a
    /// nonnegative diagonal `S` whose entries divide their successors.
    pub fn smith_normal_form(&self) -> SnfDecomposition {
        let (r, c) = (self.rows, self.cols);
        let mut s = self.clone();
        let mut u = IntMatrix::identity(r);
        let mut v = IntMatrix::identity(c);
        let mut t = 0;
        'pivot: while t < r.min(c) {
            loop {
                let mut best: Option<(usize, usize)> = None;
                for i in t..r {
                    for j in t..c {
                        if !s[(i, j)].is_zero()
                            && best.is_none_or(|(bi, bj)| {
                                s[(i, j)].magnitude() < s[(bi, bj)].magnitude()
                            })
                        {
                            best = Some((i, j));
                        }
                    }
                }
                let Some((pi, pj)) = best else {
                    break 'pivot;
                };
                swap_rows(&mut s, &mut u, t, pi);
                swap_cols(&mut s, &mut v, t, pj);
                let mut dirty = false;
                for i in t + 1..r {
                    if !s[(i, t)].is_zero() {
                        let q = &s[(i, t)] / &s[(t, t)];
                        if !q.is_zero() {
                            row_sub(&mut s, &mut u, i, t, &q);
                        }
                        dirty |= !s[(i, t)].is_zero();
                    }
                }
                for j in t + 1..c {
                    if !s[(t, j)].is_zero() {
                        let q = &s[(t, j)] / &s[(t, t)];
                        if !q.is_zero() {
                            col_sub(&mut s, &mut v, j, t, &q);
                        }
                        dirty |= !s[(t, j)].is_zero();
                    }
                }
                if dirty {
                    continue;
                }
                let straggler = (t + 1..r)
                    .flat_map(|i| (t + 1..c).map(move |j| (i, j)))
                    .find(|&(i, j)| !(&s[(i, j)] % &s[(t, t)]).is_zero());
                match straggler {
                    Some((i, _)) => row_add(&mut s, &mut u, t, i),
                    None => break,
                }
            }
            if s[(t, t)].is_negative() {
                negate_row(&mut s, &mut u, t);
            }
            t += 1;
        }
        SnfDecomposition { u, s, v }
    }
}

fn swap_rows(s: &mut IntMatrix, u: &mut IntMatrix, a: usize, b: usize) {
    if a == b {
        return;
    }
    for j in 0..s.cols {
        s.entries.swap(a * s.cols + j, b * s.cols + j);
    }
    for j in 0..u.cols {
        u.entries.swap(a * u.cols + j, b * u.cols + j);
    }
}

fn swap_cols(s: &mut IntMatrix, v: &mut IntMatrix, a: usize, b: usize) {
    if a == b {
        return;
    }
    for i in 0..s.rows {
        s.entries.swap(i * s.cols + a, i * s.cols + b);
    }
    for i in 0..v.rows {
        v.entries.swap(i * v.cols + a, i * v.cols + b);
    }
}

/// `row_i -= q * row_t` on `s`, mirrored on `u`.
fn row_sub(s: &mut IntMatrix, u: &mut IntMatrix, i: usize, t: usize, q: &BigInt) {
    for j in 0..s.cols {
        let d = &s[(i, j)] - q * &s[(t, j)];
        s[(i, j)] = d;
    }
    for j in 0..u.cols {
        let d = &u[(i, j)] - q * &u[(t, j)];
        u[(i, j)] = d;
    }
}

/// `col_j -= q * col_t` on `s`, mirrored on `v`.
fn col_sub(s: &mut IntMatrix, v: &mut IntMatrix, j: usize, t: usize, q: &BigInt) {
    for i in 0..s.rows {
        let d = &s[(i, j)] - q * &s[(i, t)];
        s[(i, j)] = d;
    }
    for i in 0..v.rows {
        let d = &v[(i, j)] - q * &v[(i, t)];
        v[(i, j)] = d;
    }
}

/// `row_t += row_b` on `s`, mirrored on `u`.
fn row_add(s: &mut IntMatrix, u: &mut IntMatrix, t: usize, b: usize) {
    for j in 0..s.cols {
        let d = &s[(t, j)] + &s[(b, j)];
        s[(t, j)] = d;
    }
    for j in 0..u.cols {
        let d = &u[(t, j)] + &u[(b, j)];
        u[(t, j)] = d;
    }
}

fn negate_row(s: &mut IntMatrix, u: &mut IntMatrix, t: usize) {
    for j in 0..s.cols {
        let d = -s[(t, j)].clone();
        s[(t, j)] = d;
    }
    for j in 0..u.cols {
        let d = -u[(t, j)].clone();
        u[(t, j)] = d;
    }
}

impl Index<(usize, usize)> for IntMatrix {
    type Output = BigInt;

    fn index(&self, (i, j): (usize, usize)) -> &BigInt {
        assert!(i < self.rows && j < self.cols, "index out of bounds");
        &self.entries[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for IntMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut BigInt {
        assert!(i < self.rows && j < self.cols, "index out of bounds");
        &mut self.entries[i * self.cols + j]
    }
}

impl std::fmt::Debug for IntMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "IntMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|j| self[(i, j)].to_string()).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        write!(f, "]")
    }
}

/// Result of `smith_normal_form`: `u * m * v = s`.
#[derive(Clone, Debug)]
pub struct SnfDecomposition {
    pub u: IntMatrix,
    pub s: IntMatrix,
    pub v: IntMatrix,
}

impl SnfDecomposition {
    /// Diagonal of `s` (the elementary divisors), zeros included.
    pub fn divisors(&self) -> Vec<BigInt> {
        (0..self.s.rows().min(self.s.cols()))
            .map(|i| self.s[(i, i)].clone())
            .collect()
    }
}

/// Outcome of the mod-`m` kernel search.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum KernelOutcome {
    /// `v` with `M v = 0 (mod m)` and `v != 0 (mod m)`, entries in `[0, m)`.
    Vector(Vec<BigInt>),
    /// The columns are independent modulo `m`: only the trivial kernel.
    FullRank,
}

/// Nontrivial kernel vector of `mat` modulo `m >= 2`, if one exists.
///
/// Taken from the Smith form: with elementary divisors `s_1 | ... | s_c`
/// (zero-padded when `cols > rows`), a kernel vector exists iff
/// `g = gcd(s_c, m) > 1`, and `(m/g)` times the last column of `V` is one.
/// The result is re-verified by multiplication before it is returned.
pub fn kernel_vector_mod(mat: &IntMatrix, m: &BigInt) -> KernelOutcome {
    assert!(m >= &BigInt::from(2), "modulus must be at least 2");
    let c = mat.cols();
    assert!(c > 0, "matrix must have at least one column");
    let snf = mat.smith_normal_form();
    let d_last = if c - 1 < mat.rows() {
        snf.s[(c - 1, c - 1)].clone()
    } else {
        BigInt::zero()
    };
    let g = gcd(&d_last, m);
    if g.is_one() {
        return KernelOutcome::FullRank;
    }
    let scale = m / &g;
    let v: Vec<BigInt> = snf
        .v
        .column(c - 1)
        .iter()
        .map(|e| mod_reduce(&(e * &scale), m))
        .collect();
    let product = mat.mul_vec(&v);
    assert!(
        product.iter().all(|e| mod_reduce(e, m).is_zero()),
        "kernel construction must satisfy M v = 0 (mod m)"
    );
    assert!(
        v.iter().any(|e| !e.is_zero()),
        "kernel vector must be nonzero modulo m"
    );
    KernelOutcome::Vector(v)
}
