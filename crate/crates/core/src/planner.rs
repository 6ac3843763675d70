//! Exponent and threshold calculus for the stability theorems.
//!
//! Exponent algebra is exact (arbitrary-precision rationals); only the final
//! bound evaluations use floating point.

use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, precondition, Error, Result};

/// Exact rational, serialized as a "p/q" string.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Exact(pub BigRational);

impl Exact {
    pub fn new(p: i64, q: i64) -> Self {
        Self(BigRational::new(BigInt::from(p), BigInt::from(q)))
    }

    pub fn integer(v: i64) -> Self {
        Self(BigRational::from_integer(BigInt::from(v)))
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }
}

impl std::fmt::Display for Exact {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.0.numer(), self.0.denom())
    }
}

impl FromStr for Exact {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let parsed = if s.contains('/') {
            BigRational::from_str(s).ok()
        } else {
            BigInt::from_str(s).ok().map(BigRational::from_integer)
        };
        parsed.map(Self).ok_or_else(|| Error::Parse(format!("{s:?} is not a rational p/q")))
    }
}

impl Serialize for Exact {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Exact {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The unspecified "stable constants" of the threshold conditions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannerConstants {
    pub c_smalln1: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub rho0: f64,
    #[serde(rename = "K0")]
    pub k0: f64,
    pub eps0: f64,
    /// True while the values are defaults rather than derived constants.
    pub placeholder: bool,
}

impl Default for PlannerConstants {
    fn default() -> Self {
        Self { c_smalln1: 1.0, c: 1.0, rho0: 1.0, k0: 1.0, eps0: 1.0, placeholder: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub name: String,
    pub satisfied: bool,
    /// left side / right side; satisfied iff < 1.
    pub margin: f64,
}

impl Threshold {
    fn strict(name: &str, lhs: f64, rhs: f64) -> Self {
        let margin = if lhs == 0.0 { 0.0 } else { lhs / rhs };
        Self { name: name.into(), satisfied: lhs < rhs, margin }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticPlan {
    pub n: u32,
    pub gamma: Exact,
    pub delta: Exact,
    pub a_gamma: Exact,
    #[serde(rename = "K0")]
    pub k0: f64,
    pub eps0: f64,
    pub thresholds: Vec<Threshold>,
    pub constants: PlannerConstants,
}

fn rat(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

fn int(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

/// a_γ = (1 − 2γ)/(2(n−1)), δ = γ/(n−1), for 0 < γ ≤ 1/(2n).
pub fn analytic_exponents(n: u32, gamma: &Exact) -> Result<AnalyticPlan> {
    if n < 2 {
        return Err(invalid(format!("n must be ≥ 2, got {n}")));
    }
    let g = &gamma.0;
    let m = int(n as i64 - 1);
    if !g.is_positive() || *g > rat(1, 2 * n as i64) {
        return Err(precondition(format!("γ = {gamma} outside (0, 1/(2n)] for n = {n}")));
    }
    let a = (BigRational::one() - int(2) * g) / (int(2) * &m);
    let delta = g / &m;
    if *g > a || a < rat(1, 2 * n as i64) || a >= rat(1, 2 * (n as i64 - 1)) {
        return Err(Error::Internal(format!("exponent range violated for n = {n}, γ = {gamma}")));
    }
    let constants = PlannerConstants::default();
    Ok(AnalyticPlan {
        n,
        gamma: gamma.clone(),
        delta: Exact(delta),
        a_gamma: Exact(a),
        k0: constants.k0,
        eps0: constants.eps0,
        thresholds: Vec::new(),
        constants,
    })
}

impl AnalyticPlan {
    /// Fills the threshold checks for K = choose_K(ε) under `constants`.
    pub fn with_thresholds(mut self, eps: f64, constants: PlannerConstants) -> Result<Self> {
        let k = choose_k(eps, constants.eps0, constants.k0, self.gamma.to_f64())?;
        self.thresholds = check_thresholds_analytic(eps, k, self.n, &constants)?;
        self.k0 = constants.k0;
        self.eps0 = constants.eps0;
        self.constants = constants;
        Ok(self)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GevreyPlan {
    pub n: u32,
    pub alpha: Exact,
    pub gamma: Exact,
    pub delta: Exact,
    pub a_gamma: Exact,
    pub b_gamma: Exact,
    /// 1/(2α(n−1)) − a_γ, which equals δ/α.
    pub time_deficit: Exact,
    /// Whether γ ≤ b_γ, so that max{ε^γ, ε^{b_γ}} = ε^γ.
    pub gamma_le_b: bool,
    pub constants: PlannerConstants,
}

/// a_γ = (1 − 5γ(n−1)²)/(2α(n−1)), b_γ = (1 − γ(n−1)(3n−1))/(2(n−1)),
/// δ = (5/2)γ(n−1), for 0 < γ ≤ 1/(5(n−1)²).
pub fn gevrey_exponents(n: u32, alpha: &Exact, gamma: &Exact) -> Result<GevreyPlan> {
    if n < 2 {
        return Err(invalid(format!("n must be ≥ 2, got {n}")));
    }
    if alpha.0 < BigRational::one() {
        return Err(precondition(format!("α = {alpha} must be ≥ 1")));
    }
    let g = &gamma.0;
    let m = int(n as i64 - 1);
    let upper = BigRational::one() / (int(5) * &m * &m);
    if !g.is_positive() || *g > upper {
        return Err(precondition(format!("γ = {gamma} outside (0, 1/(5(n−1)²)] for n = {n}")));
    }
    let two_m = int(2) * &m;
    let a = (BigRational::one() - int(5) * g * &m * &m) / (&alpha.0 * &two_m);
    let b = (BigRational::one() - g * &m * int(3 * n as i64 - 1)) / &two_m;
    let delta = rat(5, 2) * g * &m;
    let b_lo = int(n as i64 - 2) / (int(5) * &m * &m);
    let b_hi = BigRational::one() / &two_m;
    if b < b_lo || b > b_hi || a.is_negative() {
        return Err(Error::Internal(format!("b_γ range violated for n = {n}, γ = {gamma}")));
    }
    let deficit = BigRational::one() / (&alpha.0 * &two_m) - &a;
    Ok(GevreyPlan {
        n,
        alpha: alpha.clone(),
        gamma: gamma.clone(),
        gamma_le_b: *g <= b,
        delta: Exact(delta),
        a_gamma: Exact(a),
        b_gamma: Exact(b),
        time_deficit: Exact(deficit),
        constants: PlannerConstants::default(),
    })
}

/// εK^{2n} < c_smalln1, K⁻¹ < C·ρ₀/6 and εK < 3.
pub fn check_thresholds_analytic(eps: f64, k: f64, n: u32, constants: &PlannerConstants) -> Result<Vec<Threshold>> {
    if !(eps >= 0.0) || !(k >= 1.0) {
        return Err(invalid(format!("need ε ≥ 0 and K ≥ 1, got ({eps}, {k})")));
    }
    Ok(vec![
        Threshold::strict("smalln1", eps * k.powi(2 * n as i32), constants.c_smalln1),
        Threshold::strict("smalln2_K", 1.0 / k, constants.c * constants.rho0 / 6.0),
        Threshold::strict("smalln2_epsK", eps * k, 3.0),
    ])
}

/// εK^{5(n−1)²} < c.
pub fn check_threshold_gevrey(eps: f64, k: f64, n: u32, c: f64) -> Result<Threshold> {
    if !(eps >= 0.0) || !(k >= 1.0) || n < 2 {
        return Err(invalid(format!("need ε ≥ 0, K ≥ 1, n ≥ 2, got ({eps}, {k}, {n})")));
    }
    let m = (n - 1) as i32;
    Ok(Threshold::strict("smalln1_gevrey", eps * k.powi(5 * m * m), c))
}

/// (εΛ²)^{1/(2(n−r))} and its reciprocal.
pub fn poschel_bounds(eps: f64, volume_sq: f64, n: u32, r: u32) -> Result<(f64, f64)> {
    if r >= n {
        return Err(invalid(format!("rank r = {r} must be < n = {n}")));
    }
    if !(eps >= 0.0) || !(volume_sq >= 1.0) {
        return Err(invalid(format!("need ε ≥ 0 and |Λ|² ≥ 1, got ({eps}, {volume_sq})")));
    }
    let p = 1.0 / (2.0 * (n - r) as f64);
    let x = eps * volume_sq;
    Ok((x.powf(p), x.powf(-p)))
}

/// c^{3/2}·c'·ε^{1/(2(n−r))} and (c^{5(n−r)}·ε)^{−1/(2α(n−r))}.
pub fn marco_sauzin_bounds(eps: f64, c_up: f64, c_prime_up: f64, n: u32, r: u32, alpha: f64) -> Result<(f64, f64)> {
    if r >= n {
        return Err(invalid(format!("rank r = {r} must be < n = {n}")));
    }
    if !(eps >= 0.0) || !(c_up >= 1.0) || !(c_prime_up >= 1.0) || !(alpha >= 1.0) {
        return Err(invalid("need ε ≥ 0, c, c' ≥ 1 and α ≥ 1"));
    }
    let d = (n - r) as f64;
    let radius = c_up.powf(1.5) * c_prime_up * eps.powf(1.0 / (2.0 * d));
    let time = (c_up.powf(5.0 * d) * eps).powf(-1.0 / (2.0 * alpha * d));
    Ok((radius, time))
}

/// Exponent of K in radius^{2(n−1)} once c = n!K^{n−1} and c' = K are
/// substituted into the rank-one radius bound.
pub fn marco_sauzin_k_exponent(n: u32) -> Exact {
    let m = int(n as i64 - 1);
    // radius ∝ c^{3/2}·c' = K^{(3/2)(n−1) + 1}
    let per_radius = rat(3, 2) * &m + BigRational::one();
    Exact(per_radius * int(2) * m)
}

/// K = K₀·(ε₀/ε)^γ.
pub fn choose_k(eps: f64, eps0: f64, k0: f64, gamma: f64) -> Result<f64> {
    if !(eps > 0.0) || eps > eps0 {
        return Err(precondition(format!("need 0 < ε ≤ ε₀, got ε = {eps}, ε₀ = {eps0}")));
    }
    if !(k0 > 0.0) || !(gamma >= 0.0) {
        return Err(invalid("need K₀ > 0 and γ ≥ 0"));
    }
    Ok(k0 * (eps0 / eps).powf(gamma))
}

impl Exact {
    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(p: i64, d: i64) -> Exact {
        Exact::new(p, d)
    }

    #[test]
    fn analytic_examples() {
        let p = analytic_exponents(3, &q(1, 6)).unwrap();
        assert_eq!((p.a_gamma.clone(), p.delta.clone()), (q(1, 6), q(1, 12)));
        let p = analytic_exponents(4, &q(1, 24)).unwrap();
        assert_eq!((p.a_gamma.clone(), p.delta.clone()), (q(11, 72), q(1, 72)));
        assert!(p.delta <= q(1, 24));
        // γ → 0⁺
        let p = analytic_exponents(3, &q(1, 1_000_000_000)).unwrap();
        assert!((p.a_gamma.to_f64() - 0.25).abs() < 1e-9);
        assert!(matches!(analytic_exponents(3, &q(1, 5)), Err(Error::Precondition(_))));
        assert!(matches!(analytic_exponents(3, &q(0, 1)), Err(Error::Precondition(_))));
    }

    #[test]
    fn gevrey_examples() {
        let p = gevrey_exponents(3, &q(1, 1), &q(1, 20)).unwrap();
        assert_eq!((p.a_gamma.clone(), p.delta.clone()), (q(0, 1), q(1, 4)));
        assert_eq!(p.b_gamma, q(1, 20));
        let p = gevrey_exponents(3, &q(2, 1), &q(1, 40)).unwrap();
        assert_eq!((p.a_gamma.clone(), p.b_gamma.clone()), (q(1, 16), q(3, 20)));
        assert_eq!(p.time_deficit, q(1, 16));
        assert!(matches!(gevrey_exponents(3, &q(1, 1), &q(1, 19)), Err(Error::Precondition(_))));
        assert!(matches!(gevrey_exponents(3, &q(1, 2), &q(1, 40)), Err(Error::Precondition(_))));
    }

    #[test]
    fn rational_strings() {
        let p = analytic_exponents(3, &q(1, 6)).unwrap();
        let v = serde_json::to_value(&p).unwrap();
        assert_eq!(v["a_gamma"], "1/6");
        assert_eq!(v["delta"], "1/12");
        assert_eq!(v["constants"]["placeholder"], true);
        assert_eq!("1/40".parse::<Exact>().unwrap(), q(1, 40));
        assert_eq!("2".parse::<Exact>().unwrap(), q(2, 1));
        assert!("x/2".parse::<Exact>().is_err());
    }

    #[test]
    fn threshold_examples() {
        let c = PlannerConstants::default();
        for k in [1.0, 7.0, 1e3] {
            let t = check_thresholds_analytic(0.0, k, 3, &PlannerConstants { c: 12.0, ..c }).unwrap();
            assert!(t.iter().all(|t| t.satisfied));
        }
        let t = check_thresholds_analytic(1e-6, 10.0, 3, &c).unwrap();
        assert!(!t[0].satisfied);
        let t = check_thresholds_analytic(0.1, 1.0, 3, &PlannerConstants { c: 12.0, ..c }).unwrap();
        assert!(t[1].satisfied);

        assert!(check_threshold_gevrey(0.0, 5.0, 3, 1.0).unwrap().satisfied);
        assert!(!check_threshold_gevrey(2f64.powi(-20), 2.0, 3, 1.0).unwrap().satisfied);
        let t = check_threshold_gevrey(1e-3, 3.0, 2, 1.0).unwrap();
        assert!(t.satisfied && (t.margin - 0.243).abs() < 1e-12);
    }

    #[test]
    fn poschel_examples() {
        assert_eq!(poschel_bounds(0.0, 1.0, 3, 1).unwrap().0, 0.0);
        let (r, t) = poschel_bounds(1e-4, 1.0, 3, 1).unwrap();
        assert!((r - 0.1).abs() < 1e-15);
        assert!((r * t - 1.0).abs() < 1e-15);
        assert!(poschel_bounds(1e-4, 1.0, 3, 3).is_err());
        for k in 1..20 {
            let kk = (k * k) as f64;
            for v2 in [1.0, 0.5 * kk, kk] {
                if v2 < 1.0 {
                    continue;
                }
                let r = poschel_bounds(1e-5, v2, 4, 1).unwrap().0;
                assert!(r <= (1e-5 * kk).powf(1.0 / 6.0) * (1.0 + 1e-15));
            }
        }
    }

    #[test]
    fn marco_sauzin_examples() {
        assert_eq!(marco_sauzin_bounds(0.0, 8.0, 2.0, 3, 1, 1.0).unwrap().0, 0.0);
        let (r, _) = marco_sauzin_bounds(1e-6, 8.0, 2.0, 3, 1, 1.0).unwrap();
        // 8^{3/2}·2·10^{-3/2} = 32·√2·10^{-3/2}
        let oracle = 32.0 * 2f64.sqrt() * 10f64.powf(-1.5);
        assert!((r - oracle).abs() < 1e-13 * oracle);
        assert!((r - 1.4311).abs() < 1e-4);
        for n in 2..=6 {
            assert_eq!(marco_sauzin_k_exponent(n), Exact::integer((n as i64 - 1) * (3 * n as i64 - 1)));
        }
        assert!(marco_sauzin_bounds(1e-6, 8.0, 2.0, 3, 3, 1.0).is_err());
    }

    #[test]
    fn choose_k_examples() {
        assert_eq!(choose_k(0.3, 0.3, 5.0, 0.25).unwrap(), 5.0);
        let k = choose_k(1.0 / 64.0, 1.0, 3.0, 1.0 / 6.0).unwrap();
        assert!((k - 6.0).abs() < 1e-14);
        let a = choose_k(1e-3, 1.0, 1.0, 0.2).unwrap();
        let b = choose_k(5e-4, 1.0, 1.0, 0.2).unwrap();
        assert!((b / a - 2f64.powf(0.2)).abs() < 1e-14);
        assert!(matches!(choose_k(2.0, 1.0, 1.0, 0.2), Err(Error::Precondition(_))));
    }

    proptest! {
        #[test]
        fn choose_k_nonincreasing(e1 in 1e-9f64..1.0, e2 in 1e-9f64..1.0, g in 0.0f64..0.5) {
            let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
            prop_assert!(choose_k(lo, 1.0, 2.0, g).unwrap() >= choose_k(hi, 1.0, 2.0, g).unwrap());
        }

        #[test]
        fn bounds_monotone_in_eps(e1 in 1e-12f64..1e-1, e2 in 1e-12f64..1e-1, n in 2u32..6, alpha in 1.0f64..3.0) {
            let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
            let (r_lo, t_lo) = poschel_bounds(lo, 4.0, n, 1).unwrap();
            let (r_hi, t_hi) = poschel_bounds(hi, 4.0, n, 1).unwrap();
            prop_assert!(r_lo <= r_hi && t_lo >= t_hi);
            let (r_lo, t_lo) = marco_sauzin_bounds(lo, 3.0, 2.0, n, 1, alpha).unwrap();
            let (r_hi, t_hi) = marco_sauzin_bounds(hi, 3.0, 2.0, n, 1, alpha).unwrap();
            prop_assert!(r_lo <= r_hi && t_lo >= t_hi);
        }

        #[test]
        fn analytic_identity(n in 2u32..7, num in 1i64..1000) {
            let gamma = Exact::new(num, 2 * n as i64 * 1000);
            let p = analytic_exponents(n, &gamma).unwrap();
            prop_assert_eq!(p.a_gamma.0, rat(1, 2 * (n as i64 - 1)) - p.delta.0);
        }
    }
}
