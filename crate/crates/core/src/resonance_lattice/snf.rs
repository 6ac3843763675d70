use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::matrix::{bigint_determinant, bigint_is_unit, bigint_product};
use super::{unimodular_completion, IntMatrix, IntegerVector};
use crate::error::{invalid, Error, Result};

/// L = B·Δ·A with B ∈ GL(r, ℤ), A ∈ GL(n, ℤ) and Δ = diag(d_1, …, d_r) padded
/// with zero columns.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmithDecomposition {
    pub left: IntMatrix,
    pub invariant_factors: Vec<i64>,
    pub right: IntMatrix,
}

impl SmithDecomposition {
    pub fn rank(&self) -> usize {
        self.invariant_factors.len()
    }

    /// The r×n diagonal factor Δ.
    pub fn diagonal(&self) -> IntMatrix {
        let mut d = IntMatrix::zeros(self.rank(), self.right.nrows());
        for (i, &f) in self.invariant_factors.iter().enumerate() {
            d[(i, i)] = f;
        }
        d
    }

    /// B·Δ·A in arbitrary precision.
    pub fn reconstruct(&self) -> Vec<Vec<BigInt>> {
        let bd = bigint_product(&self.left.to_bigint(), &self.diagonal().to_bigint());
        bigint_product(&bd, &self.right.to_bigint())
    }

    /// Checks every defining property against `l`: exact reconstruction, the
    /// divisibility chain, positive factors, and |det B| = |det A| = 1.
    pub fn verify(&self, l: &IntMatrix) -> bool {
        let chain = self.invariant_factors.iter().all(|&d| d > 0)
            && self.invariant_factors.windows(2).all(|w| w[1] % w[0] == 0);
        chain
            && self.reconstruct() == l.to_bigint()
            && bigint_is_unit(&bigint_determinant(&self.left.to_bigint()))
            && bigint_is_unit(&bigint_determinant(&self.right.to_bigint()))
    }
}

/// Smith normal form of a full-row-rank r×n integer matrix.
///
/// Rank-one inputs k = g·k' are decomposed as (1)·(g 0 … 0)·A with A the
/// bounded completion of k'. Larger ranks reduce to column Hermite form, then
/// run pivoting elimination that keeps L = B·D·A invariant while D is driven
/// to diagonal form, and finally shrink B and A.
pub fn smith_normal_form(l: &IntMatrix) -> Result<SmithDecomposition> {
    let (r, n) = (l.nrows(), l.ncols());
    if r > n {
        return Err(invalid(format!("{r}×{n} matrix cannot have full row rank")));
    }
    if r == 1 {
        return rank_one(l.row(0));
    }

    // Elimination runs in arbitrary precision and only the final factors must
    // fit in 64 bits. Transform size depends on the pivot order, so an
    // overflow is retried on cyclically permuted rows and columns.
    let mut last = Error::Overflow("Smith normal form");
    for attempt in 0..SNF_ATTEMPTS {
        let shifts = (attempt / n % r, attempt % n);
        let w = eliminate(l, shifts)?;
        match narrow(&w, r) {
            Ok(s) => return Ok(s),
            Err(e @ Error::Overflow(_)) => last = e,
            Err(e) => return Err(e),
        }
    }
    Err(last)
}

const SNF_ATTEMPTS: usize = 12;

/// Runs the elimination on P_r·L·P_c for cyclic shifts (sr, sc), with the
/// permutations folded into the initial transforms.
fn eliminate(l: &IntMatrix, (sr, sc): (usize, usize)) -> Result<Work> {
    let (r, n) = (l.nrows(), l.ncols());
    let src = l.to_bigint();
    let mut w = Work {
        left: vec![vec![BigInt::zero(); r]; r],
        d: (0..r).map(|i| (0..n).map(|j| src[(i + sr) % r][(j + sc) % n].clone()).collect()).collect(),
        right: vec![vec![BigInt::zero(); n]; n],
    };
    for i in 0..r {
        w.left[(i + sr) % r][i] = BigInt::one();
    }
    for j in 0..n {
        w.right[j][(j + sc) % n] = BigInt::one();
    }
    w.hermite_columns(r, n)?;
        for t in 0..r {
            loop {
                let (pi, pj) = w
                    .smallest_pivot(t)
                    .ok_or_else(|| invalid("matrix is rank-deficient over ℚ"))?;
                w.swap_rows(t, pi);
                w.swap_cols(t, pj);
                let p = w.d[t][t].clone();

                let mut cleared = true;
                for i in t + 1..r {
                    let q = nearest_quotient(&w.d[i][t], &p);
                    if !q.is_zero() {
                        w.add_row(i, t, &-q);
                    }
                    cleared &= w.d[i][t].is_zero();
                }
                for j in t + 1..n {
                    let q = nearest_quotient(&w.d[t][j], &p);
                    if !q.is_zero() {
                        w.add_col(j, t, &-q);
                    }
                    cleared &= w.d[t][j].is_zero();
                }
                if !cleared {
                    continue;
                }

                let offender = (t + 1..r).find(|&i| (t + 1..n).any(|j| !(&w.d[i][j] % &p).is_zero()));
                if let Some(i) = offender {
                    w.add_row(t, i, &BigInt::one());
                    continue;
                }
                if p.is_negative() {
                    w.negate_row(t);
                }
                break;
            }
        }
    w.size_reduce(r, n);
    Ok(w)
}

fn narrow(w: &Work, r: usize) -> Result<SmithDecomposition> {
    let narrow = |m: &[Vec<BigInt>]| -> Result<IntMatrix> {
        let rows = m
            .iter()
            .map(|row| row.iter().map(|v| v.to_i64().ok_or(Error::Overflow("Smith normal form"))).collect())
            .collect::<Result<Vec<Vec<i64>>>>()?;
        IntMatrix::from_rows(rows)
    };
    let invariant_factors = (0..r)
        .map(|i| w.d[i][i].to_i64().ok_or(Error::Overflow("Smith normal form")))
        .collect::<Result<_>>()?;
    Ok(SmithDecomposition { left: narrow(&w.left)?, invariant_factors, right: narrow(&w.right)? })
}

/// a/b rounded to the nearest integer.
fn nearest_quotient(a: &BigInt, b: &BigInt) -> BigInt {
    let (q, r) = a.div_mod_floor(b);
    let twice: BigInt = &r * 2;
    // r carries the sign of b, so the nearer multiple is the next one up
    if twice.abs() > b.abs() {
        q + 1
    } else {
        q
    }
}

fn rank_one(row: &[i64]) -> Result<SmithDecomposition> {
    let k = IntegerVector::new(row.to_vec())?;
    if k.is_zero() {
        return Err(invalid("matrix is rank-deficient over ℚ"));
    }
    let g = k.content();
    let reduced = IntegerVector::new(row.iter().map(|&c| c / g).collect())?;
    let completion = unimodular_completion(&reduced, reduced.l1_norm()?)?;
    Ok(SmithDecomposition {
        left: IntMatrix::identity(1),
        invariant_factors: vec![g],
        right: completion.matrix,
    })
}

/// Working triple with L = left · d · right at all times.
struct Work {
    left: Vec<Vec<BigInt>>,
    d: Vec<Vec<BigInt>>,
    right: Vec<Vec<BigInt>>,
}

impl Work {
    fn smallest_pivot(&self, t: usize) -> Option<(usize, usize)> {
        let mut best: Option<(usize, usize, BigInt)> = None;
        for i in t..self.d.len() {
            for j in t..self.d[i].len() {
                let v = self.d[i][j].abs();
                if !v.is_zero() && best.as_ref().is_none_or(|(_, _, b)| v < *b) {
                    best = Some((i, j, v));
                }
            }
        }
        best.map(|(i, j, _)| (i, j))
    }

    /// Column-style Hermite form: d becomes lower triangular with positive
    /// diagonal and 0 ≤ d_ij < d_ii left of it. Column operations alone keep
    /// the entries bounded by the diagonal, which tames growth in the later
    /// two-sided elimination.
    fn hermite_columns(&mut self, r: usize, n: usize) -> Result<()> {
        for i in 0..r {
            loop {
                let pivot = (i..n)
                    .filter(|&j| !self.d[i][j].is_zero())
                    .min_by(|&a, &b| self.d[i][a].abs().cmp(&self.d[i][b].abs()))
                    .ok_or_else(|| invalid("matrix is rank-deficient over ℚ"))?;
                self.swap_cols(i, pivot);
                let p = self.d[i][i].clone();
                let mut done = true;
                for j in i + 1..n {
                    let q = nearest_quotient(&self.d[i][j], &p);
                    if !q.is_zero() {
                        self.add_col(j, i, &-q);
                    }
                    done &= self.d[i][j].is_zero();
                }
                if done {
                    break;
                }
            }
            if self.d[i][i].is_negative() {
                self.negate_col(i);
            }
            for j in 0..i {
                let q = self.d[i][j].div_floor(&self.d[i][i]);
                if !q.is_zero() {
                    self.add_col(j, i, &-q);
                }
            }
        }
        Ok(())
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        self.d.swap(a, b);
        for row in &mut self.left {
            row.swap(a, b);
        }
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        for row in &mut self.d {
            row.swap(a, b);
        }
        self.right.swap(a, b);
    }

    fn negate_col(&mut self, j: usize) {
        for row in &mut self.d {
            row[j] = -&row[j];
        }
        for v in &mut self.right[j] {
            *v = -&*v;
        }
    }

    fn negate_row(&mut self, i: usize) {
        for v in &mut self.d[i] {
            *v = -&*v;
        }
        for row in &mut self.left {
            row[i] = -&row[i];
        }
    }

    /// row_i(d) += c·row_j(d); compensated by col_j(left) −= c·col_i(left).
    fn add_row(&mut self, i: usize, j: usize, c: &BigInt) {
        for col in 0..self.d[i].len() {
            let add = c * &self.d[j][col];
            self.d[i][col] += add;
        }
        for row in &mut self.left {
            let sub = c * &row[i];
            row[j] -= sub;
        }
    }

    /// col_i(d) += c·col_j(d); compensated by row_j(right) −= c·row_i(right).
    fn add_col(&mut self, i: usize, j: usize, c: &BigInt) {
        for row in &mut self.d {
            let add = c * &row[j];
            row[i] += add;
        }
        for b in 0..self.right[j].len() {
            let sub = c * &self.right[i][b];
            self.right[j][b] -= sub;
        }
    }

    /// Shrinks the transforms without touching the diagonal. Only B carries
    /// freedom: the first r rows of A equal Δ⁻¹B⁻¹L and the rest complete a
    /// basis. For a < b with ρ = d_b/d_a (integral by the divisibility chain)
    ///   col_b(B) −= c·col_a(B), row_a(A) += cρ·row_b(A)
    ///   col_a(B) −= cρ·col_b(B), row_b(A) += c·row_a(A)
    /// preserve B·Δ·A, as do swaps inside a block of equal factors. B is LLL
    /// reduced under those moves; rows j ≥ r of A are then reduced freely.
    fn size_reduce(&mut self, r: usize, n: usize) {
        for _ in 0..SIZE_REDUCTION_ROUNDS {
            let mut changed = self.lll_left(r);
            for b in 1..r {
                for a in 0..b {
                    let rho = &self.d[b][b] / &self.d[a][a];
                    let y: Vec<BigInt> = column(&self.left, b).iter().map(|v| v * &rho).collect();
                    let c = reduce_coefficient(&column(&self.left, a), &y);
                    if !c.is_zero() {
                        self.shear_up(a, b, &c);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        for _ in 0..SIZE_REDUCTION_ROUNDS {
            let mut changed = false;
            for j in r..n {
                for i in 0..n {
                    if i == j {
                        continue;
                    }
                    let c = reduce_coefficient(&self.right[j], &self.right[i]);
                    if c.is_zero() {
                        continue;
                    }
                    for k in 0..n {
                        let sub = &c * &self.right[i][k];
                        self.right[j][k] -= sub;
                    }
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
    }

    /// col_b(B) −= c·col_a(B), row_a(A) += cρ·row_b(A), a < b.
    fn shear_down(&mut self, b: usize, a: usize, c: &BigInt) {
        let cr = c * (&self.d[b][b] / &self.d[a][a]);
        for row in &mut self.left {
            let sub = c * &row[a];
            row[b] -= sub;
        }
        let rb = self.right[b].clone();
        for (x, y) in self.right[a].iter_mut().zip(&rb) {
            *x += &cr * y;
        }
    }

    /// col_a(B) −= cρ·col_b(B), row_b(A) += c·row_a(A), a < b.
    fn shear_up(&mut self, a: usize, b: usize, c: &BigInt) {
        let cr = c * (&self.d[b][b] / &self.d[a][a]);
        for row in &mut self.left {
            let sub = &cr * &row[b];
            row[a] -= sub;
        }
        let ra = self.right[a].clone();
        for (x, y) in self.right[b].iter_mut().zip(&ra) {
            *x += c * y;
        }
    }

    /// LLL on the columns of B; swaps only inside blocks of equal factors.
    fn lll_left(&mut self, r: usize) -> bool {
        let mut changed = false;
        let mut k = 1;
        let mut steps = 0;
        while k < r && steps < LLL_STEP_LIMIT {
            steps += 1;
            for j in (0..k).rev() {
                let (mu, _) = gram_schmidt(&self.left, r);
                let c = mu[k][j].round().to_integer();
                if !c.is_zero() {
                    self.shear_down(k, j, &c);
                    changed = true;
                }
            }
            let (mu, norms) = gram_schmidt(&self.left, r);
            let lovasz = (BigRational::new(3.into(), 4.into()) - &mu[k][k - 1] * &mu[k][k - 1]) * &norms[k - 1];
            if self.d[k - 1][k - 1] == self.d[k][k] && norms[k] < lovasz {
                // swapping both ways leaves the equal diagonal entries in place
                self.swap_rows(k - 1, k);
                self.swap_cols(k - 1, k);
                changed = true;
                k = (k - 1).max(1);
            } else {
                k += 1;
            }
        }
        changed
    }
}

const SIZE_REDUCTION_ROUNDS: usize = 64;
const LLL_STEP_LIMIT: usize = 10_000;

/// Gram–Schmidt coefficients μ and squared norms of the first r columns of m.
fn gram_schmidt(m: &[Vec<BigInt>], r: usize) -> (Vec<Vec<BigRational>>, Vec<BigRational>) {
    let cols: Vec<Vec<BigRational>> =
        (0..r).map(|j| m.iter().map(|row| BigRational::from_integer(row[j].clone())).collect()).collect();
    let dot = |x: &[BigRational], y: &[BigRational]| -> BigRational { x.iter().zip(y).map(|(a, b)| a * b).sum() };
    let mut star: Vec<Vec<BigRational>> = Vec::with_capacity(r);
    let mut norms: Vec<BigRational> = Vec::with_capacity(r);
    let mut mu = vec![vec![BigRational::zero(); r]; r];
    for k in 0..r {
        let mut v = cols[k].clone();
        for j in 0..k {
            if norms[j].is_zero() {
                continue;
            }
            mu[k][j] = dot(&cols[k], &star[j]) / &norms[j];
            for (x, s) in v.iter_mut().zip(&star[j]) {
                *x -= &mu[k][j] * s;
            }
        }
        norms.push(dot(&v, &v));
        star.push(v);
    }
    (mu, norms)
}

fn column(m: &[Vec<BigInt>], j: usize) -> Vec<BigInt> {
    m.iter().map(|row| row[j].clone()).collect()
}

/// round(⟨x, y⟩/⟨y, y⟩), or zero when subtracting it would not shrink x.
fn reduce_coefficient(x: &[BigInt], y: &[BigInt]) -> BigInt {
    let xy: BigInt = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let yy: BigInt = y.iter().map(|a| a * a).sum();
    if yy.is_zero() {
        return BigInt::zero();
    }
    let c = nearest_quotient(&xy, &yy);
    let reduced: BigInt = x.iter().zip(y).map(|(a, b)| { let v = a - &c * b; &v * &v }).sum();
    let before: BigInt = x.iter().map(|a| a * a).sum();
    if reduced < before { c } else { BigInt::zero() }
}
