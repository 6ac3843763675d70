use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Dense row-major integer matrix.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<i64>>", into = "Vec<Vec<i64>>")]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<i64>,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1;
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<i64>>) -> Result<Self> {
        let nrows = rows.len();
        if nrows == 0 {
            return Err(invalid("matrix has no rows"));
        }
        let ncols = rows[0].len();
        if ncols == 0 {
            return Err(invalid("matrix has no columns"));
        }
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(invalid("ragged matrix rows"));
        }
        Ok(Self { rows: nrows, cols: ncols, data: rows.into_iter().flatten().collect() })
    }

    /// Parses whitespace-separated integers, one matrix row per non-empty line.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<i64>()
                        .map_err(|e| Error::Parse(format!("line {}: {tok:?}: {e}", lineno + 1)))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::from_rows(rows)
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[i64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<i64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn swap_rows(&mut self, a: usize, b: usize) {
        if a != b {
            for j in 0..self.cols {
                self.data.swap(a * self.cols + j, b * self.cols + j);
            }
        }
    }

    pub fn swap_cols(&mut self, a: usize, b: usize) {
        if a != b {
            for i in 0..self.rows {
                self.data.swap(i * self.cols + a, i * self.cols + b);
            }
        }
    }

    /// Matrix norm induced by the sup norm on vectors: the largest row ℓ1-sum.
    pub fn row_norm(&self) -> Result<i64> {
        let mut best = 0i64;
        for i in 0..self.rows {
            let s = l1(self.row(i))?;
            best = best.max(s);
        }
        Ok(best)
    }

    pub fn checked_mul(&self, rhs: &IntMatrix) -> Result<IntMatrix> {
        if self.cols != rhs.rows {
            return Err(invalid("matrix dimensions do not agree"));
        }
        let mut out = IntMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for j in 0..rhs.cols {
                let mut acc = 0i64;
                for l in 0..self.cols {
                    let p = self[(i, l)]
                        .checked_mul(rhs[(l, j)])
                        .ok_or(Error::Overflow("matrix product"))?;
                    acc = acc.checked_add(p).ok_or(Error::Overflow("matrix product"))?;
                }
                out[(i, j)] = acc;
            }
        }
        Ok(out)
    }

    /// Exact determinant by fraction-free (Bareiss) elimination in 128-bit arithmetic.
    pub fn determinant(&self) -> Result<i128> {
        if self.rows != self.cols {
            return Err(invalid("determinant of a non-square matrix"));
        }
        let n = self.rows;
        let mut a: Vec<Vec<i128>> =
            (0..n).map(|i| self.row(i).iter().map(|&v| v as i128).collect()).collect();
        let mut sign = 1i128;
        let mut prev = 1i128;
        for k in 0..n {
            if a[k][k] == 0 {
                match (k + 1..n).find(|&i| a[i][k] != 0) {
                    Some(p) => {
                        a.swap(k, p);
                        sign = -sign;
                    }
                    None => return Ok(0),
                }
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let lhs = a[i][j].checked_mul(a[k][k]).ok_or(Error::Overflow("determinant"))?;
                    let rhs = a[i][k].checked_mul(a[k][j]).ok_or(Error::Overflow("determinant"))?;
                    a[i][j] = lhs.checked_sub(rhs).ok_or(Error::Overflow("determinant"))? / prev;
                }
            }
            prev = a[k][k];
        }
        Ok(sign * a[n - 1][n - 1])
    }

    /// Exact inverse of a unimodular matrix through its adjugate.
    pub fn unimodular_inverse(&self) -> Result<IntMatrix> {
        let det = self.determinant()?;
        if det.abs() != 1 {
            return Err(invalid(format!("matrix is not unimodular (det = {det})")));
        }
        let n = self.rows;
        if n == 1 {
            return Ok(IntMatrix { rows: 1, cols: 1, data: vec![det as i64] });
        }
        let mut inv = IntMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                // inv[i][j] = cofactor(j, i) / det
                let minor = self.minor(j, i);
                let c = minor.determinant()?;
                let signed = if (i + j) % 2 == 0 { c } else { -c };
                let v = signed * det;
                inv[(i, j)] = i64::try_from(v).map_err(|_| Error::Overflow("cofactor"))?;
            }
        }
        Ok(inv)
    }

    fn minor(&self, skip_row: usize, skip_col: usize) -> IntMatrix {
        let mut data = Vec::with_capacity((self.rows - 1) * (self.cols - 1));
        for i in (0..self.rows).filter(|&i| i != skip_row) {
            for j in (0..self.cols).filter(|&j| j != skip_col) {
                data.push(self[(i, j)]);
            }
        }
        IntMatrix { rows: self.rows - 1, cols: self.cols - 1, data }
    }

    pub fn to_bigint(&self) -> Vec<Vec<BigInt>> {
        (0..self.rows).map(|i| self.row(i).iter().map(|&v| BigInt::from(v)).collect()).collect()
    }
}

impl std::ops::Index<(usize, usize)> for IntMatrix {
    type Output = i64;
    fn index(&self, (i, j): (usize, usize)) -> &i64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for IntMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut i64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries((0..self.rows).map(|i| self.row(i))).finish()
    }
}

impl TryFrom<Vec<Vec<i64>>> for IntMatrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<i64>>) -> Result<Self> {
        Self::from_rows(rows)
    }
}

impl From<IntMatrix> for Vec<Vec<i64>> {
    fn from(m: IntMatrix) -> Self {
        m.to_rows()
    }
}

pub(crate) fn l1(v: &[i64]) -> Result<i64> {
    v.iter().try_fold(0i64, |acc, &x| {
        let a = x.checked_abs().ok_or(Error::Overflow("l1 norm"))?;
        acc.checked_add(a).ok_or(Error::Overflow("l1 norm"))
    })
}

pub(crate) fn bigint_product(a: &[Vec<BigInt>], b: &[Vec<BigInt>]) -> Vec<Vec<BigInt>> {
    let inner = b.len();
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| (0..inner).fold(BigInt::zero(), |acc, l| acc + &row[l] * &b[l][j]))
                .collect()
        })
        .collect()
}

/// Determinant over arbitrary-precision integers (Bareiss).
pub(crate) fn bigint_determinant(m: &[Vec<BigInt>]) -> BigInt {
    let n = m.len();
    if n == 0 {
        return BigInt::one();
    }
    let mut a = m.to_vec();
    let mut negate = false;
    let mut prev = BigInt::one();
    for k in 0..n {
        if a[k][k].is_zero() {
            match (k + 1..n).find(|&i| !a[i][k].is_zero()) {
                Some(p) => {
                    a.swap(k, p);
                    negate = !negate;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (&a[i][j] * &a[k][k] - &a[i][k] * &a[k][j]) / &prev;
            }
        }
        prev = a[k][k].clone();
    }
    let d = a[n - 1][n - 1].clone();
    if negate {
        -d
    } else {
        d
    }
}

pub(crate) fn bigint_is_unit(x: &BigInt) -> bool {
    x.abs().is_one()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn determinant_small_cases() {
        let m = IntMatrix::from_rows(vec![vec![2, 3], vec![-1, -1]]).unwrap();
        assert_eq!(m.determinant().unwrap(), 1);
        let m = IntMatrix::from_rows(vec![vec![0, 1, 0], vec![1, 0, 0], vec![0, 0, 1]]).unwrap();
        assert_eq!(m.determinant().unwrap(), -1);
        let m = IntMatrix::from_rows(vec![vec![1, 2], vec![2, 4]]).unwrap();
        assert_eq!(m.determinant().unwrap(), 0);
    }

    #[test]
    fn inverse_by_cofactors() {
        let m = IntMatrix::from_rows(vec![vec![2, 3], vec![-1, -1]]).unwrap();
        let inv = m.unimodular_inverse().unwrap();
        assert_eq!(inv.to_rows(), vec![vec![-1, -3], vec![1, 2]]);
        assert_eq!(m.checked_mul(&inv).unwrap(), IntMatrix::identity(2));
    }

    #[test]
    fn parse_text_rows() {
        let m = IntMatrix::parse_text("2 0\n# comment\n\n0 4\n").unwrap();
        assert_eq!(m.to_rows(), vec![vec![2, 0], vec![0, 4]]);
        assert!(IntMatrix::parse_text("1 2\n3\n").is_err());
        assert!(IntMatrix::parse_text("1 x\n").is_err());
    }

    #[test]
    fn bigint_det_matches_exact() {
        let m = IntMatrix::from_rows(vec![vec![3, 1, 4], vec![1, 5, 9], vec![2, 6, 5]]).unwrap();
        assert_eq!(bigint_determinant(&m.to_bigint()), BigInt::from(m.determinant().unwrap()));
    }
}
