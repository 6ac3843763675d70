use crate::error::{invalid, Error, Result};

/// Bézout coefficients with the Euclidean size bounds.
///
/// Returns `(d, u, v)` with `u·x + v·y = d = gcd(x, y) > 0`, `|u| ≤ |y|/d` and
/// `|v| ≤ |x|/d`. When one argument is zero the bound on its partner
/// coefficient is vacuous and that coefficient is ±1.
pub fn extended_gcd_bounded(x: i64, y: i64) -> Result<(i64, i64, i64)> {
    if x == 0 && y == 0 {
        return Err(invalid("gcd(0, 0) is undefined"));
    }
    let (x, y) = (x as i128, y as i128);
    if y == 0 {
        return finish(x.abs(), x.signum(), 0);
    }
    if x == 0 {
        return finish(y.abs(), 0, y.signum());
    }

    let (mut r0, mut r1) = (x, y);
    let (mut u0, mut u1) = (1i128, 0i128);
    while r1 != 0 {
        let q = r0.div_euclid(r1);
        (r0, r1) = (r1, r0 - q * r1);
        (u0, u1) = (u1, u0 - q * u1);
    }
    let (d, mut u) = if r0 < 0 { (-r0, -u0) } else { (r0, u0) };

    // Shift u into the window of smallest magnitude; v follows from the identity.
    let period = (y / d).abs();
    u = u.rem_euclid(period);
    if 2 * u > period {
        u -= period;
    }
    let mut v = (d - u * x) / y;
    if v.abs() > x.abs() / d {
        // The other representative of the window boundary.
        let alt = if u > 0 { u - period } else { u + period };
        let alt_v = (d - alt * x) / y;
        if alt.abs() <= period && alt_v.abs() <= x.abs() / d {
            u = alt;
            v = alt_v;
        }
    }
    finish(d, u, v)
}

fn finish(d: i128, u: i128, v: i128) -> Result<(i64, i64, i64)> {
    let narrow = |z: i128| i64::try_from(z).map_err(|_| Error::Overflow("extended gcd"));
    Ok((narrow(d)?, narrow(u)?, narrow(v)?))
}
