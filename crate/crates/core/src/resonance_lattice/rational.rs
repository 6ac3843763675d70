use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};

use crate::error::{invalid, precondition, Error, Result};

/// A reduced fraction p/q lying in [x − l/2, x + l/2] ∩ [−1, 1] with
/// |p| + q < 6/l.
///
/// Requires x ∈ [−1, 1] and 0 < l ≤ 2. q is the smallest integer ≥ 1/l and
/// p is ⌊qx⌋, or ⌊qx⌋ + 1 when the fractional part of qx exceeds one half;
/// the pair is then reduced. Floating inputs are converted to exact dyadic
/// rationals, so membership and the size bound hold exactly.
pub fn rational_in_interval(x: f64, l: f64) -> Result<(i64, i64)> {
    if !x.is_finite() || !l.is_finite() {
        return Err(invalid("x and l must be finite"));
    }
    if l <= 0.0 {
        return Err(invalid(format!("interval length must be positive, got {l}")));
    }
    let xr = exact(x)?;
    let lr = exact(l)?;
    let half = BigRational::new(BigInt::from(1), BigInt::from(2));
    let lo = &xr - &lr * &half;
    let hi = &xr + &lr * &half;
    let one = BigRational::one();
    if xr < -one.clone() || xr > one {
        return Err(precondition(format!("centre {x} is outside [-1, 1]")));
    }
    if lr > BigRational::from_integer(BigInt::from(2)) {
        return Err(precondition(format!("interval length {l} exceeds 2")));
    }

    let q = lr.recip().ceil().to_integer();
    let qx = BigRational::from_integer(q.clone()) * &xr;
    let floor = qx.floor();
    let p = if &qx - &floor <= half { floor.to_integer() } else { floor.to_integer() + 1 };

    let g = p.gcd(&q);
    let (p, q) = (p / &g, q / &g);

    let frac = BigRational::new(p.clone(), q.clone());
    let size = BigRational::from_integer(p.abs() + &q);
    let six_over_l = BigRational::from_integer(BigInt::from(6)) / &lr;
    if frac < lo || frac > hi || frac.abs() > one || size >= six_over_l {
        return Err(Error::Internal(format!("rational {p}/{q} misses the interval or bound")));
    }
    let narrow = |z: &BigInt| z.to_i64().ok_or(Error::Overflow("rational approximation"));
    Ok((narrow(&p)?, narrow(&q)?))
}

fn exact(v: f64) -> Result<BigRational> {
    BigRational::from_float(v).ok_or_else(|| invalid(format!("{v} is not representable")))
}
