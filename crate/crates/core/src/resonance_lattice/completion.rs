use num_integer::Integer;
use serde::{Deserialize, Serialize};

use super::{extended_gcd_bounded, is_primitive, IntMatrix, IntegerVector};
use crate::error::{invalid, precondition, Error, Result};

/// A unimodular matrix whose first row is a prescribed primitive vector.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnimodularCompletion {
    pub matrix: IntMatrix,
    pub inverse: IntMatrix,
    pub determinant: i64,
    /// |A|: largest row ℓ1-sum of the matrix.
    pub row_norm: i64,
    /// |A⁻¹|: largest row ℓ1-sum of the inverse.
    pub inverse_norm: i64,
}

/// Upper bounds on Lochak's constants of the rank-one module generated by `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleConstants {
    /// Bound on c_Λ, realised as |A⁻¹|.
    pub c_upper: i64,
    /// Bound on c'_Λ, realised as |A|.
    pub c_prime_upper: i64,
}

/// Completes the primitive vector `k` (with |k|₁ ≤ `bound`) to a matrix of
/// GL(n, ℤ) whose rows all have ℓ1-norm at most `bound`.
///
/// The construction is inductive on n. Write k = (k_*, k_s) where k_s is the
/// last component, or the first one when the leading n−1 components vanish.
/// With d = gcd(k_*), the primitive vector k_*/d is completed in dimension
/// n−1, and the extra row (−v·k_*/d, u) uses Bézout coefficients of
/// u·d + v·k_s = 1 with |u| ≤ |k_s| and |v| ≤ d. Expanding along the split
/// column gives det = ±det of the (n−1)-dimensional completion.
pub fn unimodular_completion(k: &IntegerVector, bound: i64) -> Result<UnimodularCompletion> {
    if bound < 1 {
        return Err(invalid(format!("bound K must be ≥ 1, got {bound}")));
    }
    if !is_primitive(k)? {
        return Err(invalid(format!("{k:?} is not primitive")));
    }
    let norm = k.l1_norm()?;
    if norm > bound {
        return Err(precondition(format!("|k|₁ = {norm} exceeds K = {bound}")));
    }

    let rows = complete(k.components())?;
    let matrix = IntMatrix::from_rows(rows)?;
    let det = matrix.determinant()?;
    if det.abs() != 1 {
        return Err(Error::Internal(format!("completion of {k:?} has determinant {det}")));
    }
    if matrix.row(0) != k.components() {
        return Err(Error::Internal(format!("completion of {k:?} lost its first row")));
    }
    let row_norm = matrix.row_norm()?;
    if row_norm > bound {
        return Err(Error::Internal(format!("completion of {k:?} has norm {row_norm} > {bound}")));
    }
    let inverse = matrix.unimodular_inverse()?;
    let inverse_norm = inverse.row_norm()?;
    if (inverse_norm as u128) > factorial_power_bound(k.dim(), bound) {
        return Err(Error::Internal(format!(
            "inverse of the completion of {k:?} has norm {inverse_norm} above n!·K^(n-1)"
        )));
    }
    Ok(UnimodularCompletion { matrix, inverse, determinant: det as i64, row_norm, inverse_norm })
}

/// Upper bounds (|A⁻¹|, |A|) on c_Λ and c'_Λ from the bounded completion.
pub fn module_constants(k: &IntegerVector, bound: i64) -> Result<ModuleConstants> {
    let c = unimodular_completion(k, bound)?;
    Ok(ModuleConstants { c_upper: c.inverse_norm, c_prime_upper: c.row_norm })
}

/// n!·K^(n−1), saturating at u128::MAX.
pub(crate) fn factorial_power_bound(n: usize, bound: i64) -> u128 {
    let mut acc: u128 = 1;
    for i in 2..=n as u128 {
        acc = acc.saturating_mul(i);
    }
    for _ in 1..n {
        acc = acc.saturating_mul(bound as u128);
    }
    acc
}

fn complete(k: &[i64]) -> Result<Vec<Vec<i64>>> {
    let n = k.len();
    if n == 1 {
        // k = (±1)
        return Ok(vec![vec![k[0]]]);
    }

    let (split, rest): (usize, Vec<usize>) = if k[..n - 1].iter().any(|&c| c != 0) {
        (n - 1, (0..n - 1).collect())
    } else {
        (0, (1..n).collect())
    };
    let head: Vec<i64> = rest.iter().map(|&i| k[i]).collect();
    let d = head.iter().fold(0i64, |g, &c| g.gcd(&c));
    let reduced: Vec<i64> = head.iter().map(|&c| c / d).collect();
    let sub = complete(&reduced)?;

    let tail = k[split];
    let (g, u, v) = extended_gcd_bounded(d, tail)?;
    debug_assert_eq!(g, 1);

    let mut out = vec![vec![0i64; n]; n];
    out[0] = k.to_vec();
    for (r, sub_row) in sub.iter().enumerate().skip(1) {
        for (p, &i) in rest.iter().enumerate() {
            out[r][i] = sub_row[p];
        }
    }
    for (p, &i) in rest.iter().enumerate() {
        out[n - 1][i] = v
            .checked_mul(reduced[p])
            .and_then(i64::checked_neg)
            .ok_or(Error::Overflow("unimodular completion"))?;
    }
    out[n - 1][split] = u;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(v: &[i64]) -> IntegerVector {
        IntegerVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn one_dimensional() {
        let c = unimodular_completion(&iv(&[1]), 1).unwrap();
        assert_eq!(c.matrix.to_rows(), vec![vec![1]]);
        let c = unimodular_completion(&iv(&[-1]), 3).unwrap();
        assert_eq!(c.matrix.to_rows(), vec![vec![-1]]);
        assert_eq!(c.inverse.to_rows(), vec![vec![-1]]);
    }

    #[test]
    fn canonical_vector_gives_identity() {
        let c = unimodular_completion(&iv(&[1, 0, 0]), 1).unwrap();
        assert_eq!(c.matrix, IntMatrix::identity(3));
    }

    #[test]
    fn two_three() {
        let c = unimodular_completion(&iv(&[2, 3]), 5).unwrap();
        assert_eq!(c.matrix.to_rows(), vec![vec![2, 3], vec![-1, -1]]);
        assert_eq!(c.inverse.to_rows(), vec![vec![-1, -3], vec![1, 2]]);
        assert_eq!(c.row_norm, 5);
        assert_eq!(c.inverse_norm, 4);
    }

    #[test]
    fn constants_examples() {
        let mc = module_constants(&iv(&[1, 0]), 1).unwrap();
        assert_eq!((mc.c_upper, mc.c_prime_upper), (1, 1));
        let mc = module_constants(&iv(&[2, 3]), 5).unwrap();
        assert_eq!((mc.c_upper, mc.c_prime_upper), (4, 5));
        assert!(mc.c_upper <= 10);
    }

    #[test]
    fn leading_block_zero_uses_other_split() {
        let c = unimodular_completion(&iv(&[0, 0, -1]), 1).unwrap();
        assert_eq!(c.matrix.row(0), &[0, 0, -1]);
        assert_eq!(c.determinant.abs(), 1);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(unimodular_completion(&iv(&[2, 4]), 10), Err(Error::InvalidArgument(_))));
        assert!(matches!(unimodular_completion(&iv(&[2, 3]), 4), Err(Error::Precondition(_))));
        assert!(matches!(unimodular_completion(&iv(&[0, 0]), 4), Err(Error::InvalidArgument(_))));
        assert!(matches!(unimodular_completion(&iv(&[1]), 0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn factorial_power() {
        assert_eq!(factorial_power_bound(3, 10), 600);
        assert_eq!(factorial_power_bound(1, 7), 1);
        assert_eq!(factorial_power_bound(40, i64::MAX), u128::MAX);
    }

    /// Exhaustive search over 2×2 integer matrices with entries bounded by K.
    #[test]
    fn two_three_against_exhaustive_oracle() {
        let k = [2i64, 3];
        let bound = 5i64;
        let mut found = false;
        for a in -bound..=bound {
            for b in -bound..=bound {
                if a.abs() + b.abs() <= bound && k[0] * b - k[1] * a == 1 {
                    found = true;
                }
            }
        }
        assert!(found);
        let c = unimodular_completion(&iv(&k), bound).unwrap();
        let second = c.matrix.row(1);
        assert_eq!((k[0] * second[1] - k[1] * second[0]).abs(), 1);
    }
}
