use serde::{Deserialize, Serialize};

use super::{smith_normal_form, IntMatrix, IntegerVector};
use crate::error::{invalid, Result};

/// A rank-r submodule of ℤⁿ given by r generating rows, each of ℓ1-norm at
/// most the declared order K.
///
/// K is caller-supplied metadata: only |row|₁ ≤ K is checked, not minimality.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResonanceModule {
    basis: IntMatrix,
    order: i64,
}

impl ResonanceModule {
    pub fn new(basis: IntMatrix, order: i64) -> Result<Self> {
        if order < 1 {
            return Err(invalid(format!("module order K must be ≥ 1, got {order}")));
        }
        for i in 0..basis.nrows() {
            let norm = super::matrix::l1(basis.row(i))?;
            if norm > order {
                return Err(invalid(format!("generator {i} has ℓ1-norm {norm} > K = {order}")));
            }
        }
        // Rank-one modules are named by the generator with positive leading entry.
        let basis = if basis.nrows() == 1 {
            let k = IntegerVector::new(basis.row(0).to_vec())?.canonical();
            IntMatrix::from_rows(vec![k.into()])?
        } else {
            basis
        };
        let module = Self { basis, order };
        if module.gram_determinant()? == 0 {
            return Err(invalid("generators are linearly dependent over ℚ"));
        }
        Ok(module)
    }

    pub fn rank_one(k: IntegerVector, order: i64) -> Result<Self> {
        Self::new(IntMatrix::from_rows(vec![k.into()])?, order)
    }

    pub fn rank(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn order(&self) -> i64 {
        self.order
    }

    pub fn basis(&self) -> &IntMatrix {
        &self.basis
    }

    /// det(M·Mᵀ) for the r×n basis matrix M, exactly.
    pub fn gram_determinant(&self) -> Result<i128> {
        let r = self.rank();
        let mut gram = IntMatrix::zeros(r, r);
        for i in 0..r {
            for j in 0..r {
                let mut acc = 0i64;
                for (a, b) in self.basis.row(i).iter().zip(self.basis.row(j)) {
                    acc = a
                        .checked_mul(*b)
                        .and_then(|p| acc.checked_add(p))
                        .ok_or(crate::error::Error::Overflow("Gram matrix"))?;
                }
                gram[(i, j)] = acc;
            }
        }
        gram.determinant()
    }

    /// |Λ| = √det(M·Mᵀ).
    pub fn volume(&self) -> Result<f64> {
        Ok((self.gram_determinant()? as f64).sqrt())
    }

    /// A module is maximal iff all its invariant factors equal one.
    pub fn is_maximal(&self) -> Result<bool> {
        Ok(smith_normal_form(&self.basis)?.invariant_factors.iter().all(|&d| d == 1))
    }
}

pub fn module_volume(module: &ResonanceModule) -> Result<f64> {
    module.volume()
}
