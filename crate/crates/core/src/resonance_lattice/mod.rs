//! Exact integer arithmetic on resonance modules of ℤⁿ.
//!
//! All integer routines use checked 64-bit arithmetic (128-bit inside
//! determinants) and report [`Error::Overflow`] instead of wrapping.

mod completion;
mod gcd;
mod matrix;
mod module;
mod rational;
mod snf;

use std::fmt;

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub use completion::{module_constants, unimodular_completion, ModuleConstants, UnimodularCompletion};
pub use gcd::extended_gcd_bounded;
pub use matrix::IntMatrix;
pub use module::{module_volume, ResonanceModule};
pub use rational::rational_in_interval;
pub use snf::{smith_normal_form, SmithDecomposition};

/// A vector of ℤⁿ, n ≥ 1. Its norm is the ℓ1 norm.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<i64>", into = "Vec<i64>")]
pub struct IntegerVector(Vec<i64>);

impl IntegerVector {
    pub fn new(components: Vec<i64>) -> Result<Self> {
        if components.is_empty() {
            return Err(invalid("integer vector must have at least one component"));
        }
        Ok(Self(components))
    }

    /// The i-th canonical basis vector of ℤⁿ.
    pub fn unit(n: usize, i: usize) -> Self {
        let mut c = vec![0; n];
        c[i] = 1;
        Self(c)
    }

    pub fn components(&self) -> &[i64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    pub fn l1_norm(&self) -> Result<i64> {
        matrix::l1(&self.0)
    }

    /// Non-negative gcd of all components (0 for the zero vector).
    pub fn content(&self) -> i64 {
        self.0.iter().fold(0i64, |g, &c| g.gcd(&c))
    }

    /// Representative of {k, −k} whose first nonzero component is positive.
    pub fn canonical(&self) -> Self {
        match self.0.iter().find(|&&c| c != 0) {
            Some(&c) if c < 0 => Self(self.0.iter().map(|&x| -x).collect()),
            _ => self.clone(),
        }
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.0.iter().zip(x).map(|(&k, &v)| k as f64 * v).sum()
    }
}

impl fmt::Debug for IntegerVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl TryFrom<Vec<i64>> for IntegerVector {
    type Error = Error;
    fn try_from(v: Vec<i64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<IntegerVector> for Vec<i64> {
    fn from(v: IntegerVector) -> Self {
        v.0
    }
}

/// True iff the components of `k` are coprime.
pub fn is_primitive(k: &IntegerVector) -> Result<bool> {
    if k.is_zero() {
        return Err(invalid("the zero vector is neither primitive nor imprimitive"));
    }
    Ok(k.content() == 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(v: &[i64]) -> IntegerVector {
        IntegerVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn primitive_examples() {
        assert!(is_primitive(&iv(&[2, 3])).unwrap());
        assert!(!is_primitive(&iv(&[2, 4])).unwrap());
        assert!(is_primitive(&iv(&[0, 0, 1])).unwrap());
        assert!(matches!(is_primitive(&iv(&[0, 0])), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn canonical_sign() {
        assert_eq!(iv(&[0, -2, 1]).canonical(), iv(&[0, 2, -1]));
        assert_eq!(iv(&[1, -1]).canonical(), iv(&[1, -1]));
    }

    #[test]
    fn l1_norm_and_overflow() {
        assert_eq!(iv(&[3, -4, 0]).l1_norm().unwrap(), 7);
        assert!(iv(&[i64::MAX, 1]).l1_norm().is_err());
        assert!(iv(&[i64::MIN]).l1_norm().is_err());
        assert!(IntegerVector::new(vec![]).is_err());
    }
}
