//! Near-integrable systems H = h + ε·f with a quadratic integrable part and a
//! trigonometric-polynomial perturbation, plus certified constants and norms.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::symmetric_eigenvalues;
use crate::resonance_lattice::IntegerVector;

pub const SCHEMA_VERSION: u32 = 1;
const TWO_PI: f64 = 2.0 * PI;

/// h(I) = ½·IᵀQI + ω₀·I.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegrableModel {
    q: Vec<Vec<f64>>,
    omega0: Vec<f64>,
}

impl IntegrableModel {
    pub fn new(q: Vec<Vec<f64>>, omega0: Vec<f64>) -> Result<Self> {
        let n = omega0.len();
        if n == 0 {
            return Err(invalid("model dimension must be ≥ 1"));
        }
        if q.len() != n || q.iter().any(|row| row.len() != n) {
            return Err(invalid(format!("Q must be {n}×{n}")));
        }
        if q.iter().flatten().chain(&omega0).any(|v| !v.is_finite()) {
            return Err(invalid("model coefficients must be finite"));
        }
        let scale = q.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            for j in 0..i {
                if (q[i][j] - q[j][i]).abs() > 1e-12 * scale.max(1.0) {
                    return Err(invalid(format!("Q is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { q, omega0 })
    }

    /// h(I) = ½|I|², the canonical convex model.
    pub fn isotropic(n: usize) -> Self {
        let q = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        Self { q, omega0: vec![0.0; n] }
    }

    pub fn dim(&self) -> usize {
        self.omega0.len()
    }

    pub fn hessian(&self) -> &[Vec<f64>] {
        &self.q
    }

    pub fn omega0(&self) -> &[f64] {
        &self.omega0
    }

    pub fn energy(&self, action: &[f64]) -> f64 {
        let n = self.dim();
        let mut quad = 0.0;
        for i in 0..n {
            let qi: f64 = (0..n).map(|j| self.q[i][j] * action[j]).sum();
            quad += action[i] * qi;
        }
        0.5 * quad + dot(&self.omega0, action)
    }

    /// ω(I) = ∇h(I) = QI + ω₀.
    pub fn frequency(&self, action: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.frequency_into(action, &mut out);
        out
    }

    pub fn frequency_into(&self, action: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.omega0[i] + dot(&self.q[i], action);
        }
    }
}

/// Polynomial of total degree ≤ 2 in the actions:
/// c(I) = constant + linear·I + IᵀAI.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    #[serde(default)]
    pub constant: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub linear: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub quadratic: Vec<Vec<f64>>,
}

impl Coefficient {
    pub fn constant(c: f64) -> Self {
        Self { constant: c, ..Self::default() }
    }

    pub fn is_constant(&self) -> bool {
        self.linear.iter().all(|&v| v == 0.0) && self.quadratic.iter().flatten().all(|&v| v == 0.0)
    }

    fn validate(&self, n: usize) -> Result<()> {
        if !self.linear.is_empty() && self.linear.len() != n {
            return Err(invalid(format!("linear coefficient must have length {n}")));
        }
        if !self.quadratic.is_empty()
            && (self.quadratic.len() != n || self.quadratic.iter().any(|r| r.len() != n))
        {
            return Err(invalid(format!("quadratic coefficient must be {n}×{n}")));
        }
        let values = std::iter::once(&self.constant).chain(&self.linear).chain(self.quadratic.iter().flatten());
        if values.into_iter().any(|v| !v.is_finite()) {
            return Err(invalid("coefficient entries must be finite"));
        }
        Ok(())
    }

    pub fn value(&self, action: &[f64]) -> f64 {
        let mut v = self.constant;
        if !self.linear.is_empty() {
            v += dot(&self.linear, action);
        }
        for (i, row) in self.quadratic.iter().enumerate() {
            v += action[i] * dot(row, action);
        }
        v
    }

    /// Adds `scale·∇c(I)` to `out`.
    fn add_gradient(&self, action: &[f64], scale: f64, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut g = self.linear.get(i).copied().unwrap_or(0.0);
            if !self.quadratic.is_empty() {
                for j in 0..action.len() {
                    g += (self.quadratic[i][j] + self.quadratic[j][i]) * action[j];
                }
            }
            *o += scale * g;
        }
    }

    /// ∂²c/∂I_i∂I_j = A_ij + A_ji.
    fn second(&self, i: usize, j: usize) -> f64 {
        if self.quadratic.is_empty() {
            0.0
        } else {
            self.quadratic[i][j] + self.quadratic[j][i]
        }
    }

    fn linear_l1(&self) -> f64 {
        self.linear.iter().map(|v| v.abs()).sum()
    }

    fn quadratic_l1(&self) -> f64 {
        self.quadratic.iter().flatten().map(|v| v.abs()).sum()
    }

    /// Upper bound of |c| over the complex sup-ball of radius `r`.
    pub fn sup_bound(&self, r: f64) -> f64 {
        self.constant.abs() + r * self.linear_l1() + r * r * self.quadratic_l1()
    }
}

/// One Fourier mode c(I)·cos(2π k·θ + φ).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub k: IntegerVector,
    pub coeff: Coefficient,
    #[serde(default)]
    pub phase: f64,
}

impl Mode {
    pub fn new(k: Vec<i64>, coeff: Coefficient, phase: f64) -> Result<Self> {
        Ok(Self { k: IntegerVector::new(k)?, coeff, phase })
    }

    /// cos(2π θ₁·k₁ + … + φ) with constant amplitude.
    pub fn cosine(k: Vec<i64>, amplitude: f64) -> Result<Self> {
        Self::new(k, Coefficient::constant(amplitude), 0.0)
    }

    fn angle(&self, theta: &[f64]) -> f64 {
        TWO_PI * self.k.dot(theta) + self.phase
    }
}

/// f(θ, I) = Σ c_k(I)·cos(2π k·θ + φ_k).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Perturbation {
    pub modes: Vec<Mode>,
}

impl Perturbation {
    pub fn new(modes: Vec<Mode>) -> Self {
        Self { modes }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        for m in &self.modes {
            if m.k.dim() != n {
                return Err(invalid(format!("mode {:?} does not have dimension {n}", m.k)));
            }
            if !m.phase.is_finite() {
                return Err(invalid("mode phase must be finite"));
            }
            m.k.l1_norm()?;
            m.coeff.validate(n)?;
        }
        Ok(())
    }

    pub fn value(&self, theta: &[f64], action: &[f64]) -> f64 {
        self.modes.iter().map(|m| m.coeff.value(action) * m.angle(theta).cos()).sum()
    }

    /// Adds `scale·∂f/∂θ` to `out`.
    pub fn add_grad_theta(&self, theta: &[f64], action: &[f64], scale: f64, out: &mut [f64]) {
        for m in &self.modes {
            let w = -scale * TWO_PI * m.coeff.value(action) * m.angle(theta).sin();
            for (o, &k) in out.iter_mut().zip(m.k.components()) {
                *o += w * k as f64;
            }
        }
    }

    /// Adds `scale·∂f/∂I` to `out`.
    pub fn add_grad_action(&self, theta: &[f64], action: &[f64], scale: f64, out: &mut [f64]) {
        for m in &self.modes {
            if m.coeff.is_constant() {
                continue;
            }
            m.coeff.add_gradient(action, scale * m.angle(theta).cos(), out);
        }
    }

    /// Second derivatives as (f_θθ, f_θI, f_II), each n×n, with (f_θI)_ij = ∂²f/∂θ_i∂I_j.
    pub fn second_derivatives(&self, theta: &[f64], action: &[f64]) -> [Vec<Vec<f64>>; 3] {
        let n = theta.len();
        let mut tt = vec![vec![0.0; n]; n];
        let mut ti = vec![vec![0.0; n]; n];
        let mut ii = vec![vec![0.0; n]; n];
        for m in &self.modes {
            let a = m.angle(theta);
            let (s, c) = a.sin_cos();
            let cv = m.coeff.value(action);
            let mut grad = vec![0.0; n];
            m.coeff.add_gradient(action, 1.0, &mut grad);
            let k = m.k.components();
            for i in 0..n {
                for j in 0..n {
                    tt[i][j] -= cv * c * TWO_PI * TWO_PI * (k[i] * k[j]) as f64;
                    ti[i][j] -= s * TWO_PI * k[i] as f64 * grad[j];
                    ii[i][j] += c * m.coeff.second(i, j);
                }
            }
        }
        [tt, ti, ii]
    }

    /// Σ_k sup_{|I|∞ ≤ r} |c_k(I)|: a bound on sup |f| over 𝕋ⁿ × B(0, r).
    pub fn real_sup_bound(&self, r: f64) -> f64 {
        self.modes.iter().map(|m| m.coeff.sup_bound(r)).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Regularity {
    Analytic { s: f64 },
    Gevrey { alpha: f64, #[serde(rename = "L")] l: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifiedConstants {
    pub m: f64,
    #[serde(rename = "M")]
    pub big_m: f64,
}

/// H = h + ε·f on 𝕋ⁿ × B(0, R) together with its regularity class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SystemSpecDoc", into = "SystemSpecDoc")]
pub struct SystemSpec {
    pub h: IntegrableModel,
    pub f: Perturbation,
    pub epsilon: f64,
    pub radius: f64,
    pub regularity: Regularity,
    pub certified: Option<CertifiedConstants>,
}

impl SystemSpec {
    pub fn new(
        h: IntegrableModel,
        f: Perturbation,
        epsilon: f64,
        radius: f64,
        regularity: Regularity,
    ) -> Result<Self> {
        let spec = Self { h, f, epsilon, radius, regularity, certified: None };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        let n = self.h.dim();
        self.f.validate(n)?;
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(invalid(format!("epsilon must be ≥ 0, got {}", self.epsilon)));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(invalid(format!("R must be > 0, got {}", self.radius)));
        }
        match self.regularity {
            Regularity::Analytic { s } if !(s > 0.0) => {
                return Err(invalid(format!("analytic width s must be > 0, got {s}")))
            }
            Regularity::Gevrey { alpha, l } if !(alpha >= 1.0 && l > 0.0) => {
                return Err(invalid(format!("Gevrey class needs α ≥ 1 and L > 0, got ({alpha}, {l})")))
            }
            _ => {}
        }
        if let Some(c) = self.certified {
            if !(c.m > 0.0 && c.big_m > 0.0) {
                return Err(invalid("certified m and M must be positive"));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Self { epsilon, ..self.clone() }
    }

    /// H(θ, I) = h(I) + ε·f(θ, I).
    pub fn hamiltonian(&self, theta: &[f64], action: &[f64]) -> f64 {
        self.h.energy(action) + self.epsilon * self.f.value(theta, action)
    }

    /// Norm of f (unscaled by ε) in the declared regularity class.
    pub fn perturbation_norm(&self) -> Result<f64> {
        match self.regularity {
            Regularity::Analytic { s } => analytic_norm_bound(&self.f, s, self.radius),
            Regularity::Gevrey { alpha, l } => gevrey_norm(&self.f, alpha, l, 1e-12, self.radius),
        }
    }

    /// Copy whose perturbation has unit norm in the declared class, so that
    /// the size of ε·f is exactly ε.
    pub fn normalized(&self) -> Result<Self> {
        let norm = self.perturbation_norm()?;
        if norm == 0.0 {
            return Ok(self.clone());
        }
        let mut out = self.clone();
        for m in &mut out.f.modes {
            m.coeff.constant /= norm;
            m.coeff.linear.iter_mut().for_each(|v| *v /= norm);
            m.coeff.quadratic.iter_mut().flatten().for_each(|v| *v /= norm);
        }
        Ok(out)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Serialize, Deserialize)]
struct SystemSpecDoc {
    schema_version: u32,
    n: usize,
    #[serde(rename = "Q")]
    q: Vec<Vec<f64>>,
    omega0: Vec<f64>,
    modes: Vec<Mode>,
    epsilon: f64,
    #[serde(rename = "R")]
    radius: f64,
    regularity: Regularity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    certified: Option<CertifiedConstants>,
}

impl TryFrom<SystemSpecDoc> for SystemSpec {
    type Error = Error;
    fn try_from(doc: SystemSpecDoc) -> Result<Self> {
        if doc.schema_version != SCHEMA_VERSION {
            return Err(invalid(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                doc.schema_version
            )));
        }
        if doc.omega0.len() != doc.n {
            return Err(invalid(format!("omega0 has length {}, n = {}", doc.omega0.len(), doc.n)));
        }
        let h = IntegrableModel::new(doc.q, doc.omega0)?;
        let spec = Self {
            h,
            f: Perturbation::new(doc.modes),
            epsilon: doc.epsilon,
            radius: doc.radius,
            regularity: doc.regularity,
            certified: doc.certified,
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl From<SystemSpec> for SystemSpecDoc {
    fn from(s: SystemSpec) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            n: s.h.dim(),
            q: s.h.q,
            omega0: s.h.omega0,
            modes: s.f.modes,
            epsilon: s.epsilon,
            radius: s.radius,
            regularity: s.regularity,
            certified: s.certified,
        }
    }
}

/// Result of sampling the quasi-convexity constant over a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QcCertificate {
    pub m_lower: f64,
    pub grid_per_axis: usize,
    pub points: usize,
    /// Always "sampled": the minimum is taken over grid points only.
    pub method: String,
}

/// Samples min over I of the smallest eigenvalue of ∇²h restricted to ∇h(I)⊥
/// on a regular grid of the sup-ball around `center`.
///
/// For n = 1 the orthogonal complement is trivial and `m_lower` is +∞.
pub fn qc_certificate(
    model: &IntegrableModel,
    center: &[f64],
    radius: f64,
    grid_per_axis: usize,
) -> Result<QcCertificate> {
    let n = model.dim();
    if center.len() != n {
        return Err(invalid(format!("center must have length {n}")));
    }
    if grid_per_axis == 0 {
        return Err(invalid("grid_per_axis must be ≥ 1"));
    }
    if !(radius >= 0.0) {
        return Err(invalid("radius must be ≥ 0"));
    }
    let axis: Vec<f64> = if grid_per_axis == 1 {
        vec![0.0]
    } else {
        (0..grid_per_axis)
            .map(|i| -radius + 2.0 * radius * i as f64 / (grid_per_axis - 1) as f64)
            .collect()
    };

    let total = grid_per_axis.pow(n as u32);
    let mut m_lower = f64::INFINITY;
    let mut idx = vec![0usize; n];
    for _ in 0..total {
        let point: Vec<f64> = (0..n).map(|i| center[i] + axis[idx[i]]).collect();
        let omega = model.frequency(&point);
        let basis = orthogonal_complement(&omega).ok_or_else(|| Error::DegenerateGradient { at: point.clone() })?;
        if !basis.is_empty() {
            let projected = project(model.hessian(), &basis);
            let lambda = symmetric_eigenvalues(&projected)[0];
            if lambda <= 0.0 {
                return Err(Error::NotQuasiConvex { at: point, eigenvalue: lambda });
            }
            m_lower = m_lower.min(lambda);
        }
        for d in idx.iter_mut() {
            *d += 1;
            if *d < grid_per_axis {
                break;
            }
            *d = 0;
        }
    }
    Ok(QcCertificate { m_lower, grid_per_axis, points: total, method: "sampled".into() })
}

/// Orthonormal basis of ω⊥ by Gram–Schmidt over the canonical basis, skipping
/// the index of the largest |ω_j|. None when ω = 0.
pub(crate) fn orthogonal_complement(omega: &[f64]) -> Option<Vec<Vec<f64>>> {
    let norm = dot(omega, omega).sqrt();
    if !(norm > 0.0) {
        return None;
    }
    let n = omega.len();
    let skip = sup_index(omega);
    let mut frame: Vec<Vec<f64>> = vec![omega.iter().map(|v| v / norm).collect()];
    for i in (0..n).filter(|&i| i != skip) {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        for b in &frame {
            let c = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
        let len = dot(&v, &v).sqrt();
        v.iter_mut().for_each(|x| *x /= len);
        frame.push(v);
    }
    frame.remove(0);
    Some(frame)
}

fn project(q: &[Vec<f64>], basis: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = q.len();
    basis
        .iter()
        .map(|u| {
            basis
                .iter()
                .map(|v| (0..n).map(|a| u[a] * (0..n).map(|b| q[a][b] * v[b]).sum::<f64>()).sum())
                .collect()
        })
        .collect()
}

/// Closed-form bound M on derivatives of order 1 to 3 of h over the sup-ball.
pub fn deriv_bound(model: &IntegrableModel, center: &[f64], radius: f64) -> Result<f64> {
    let n = model.dim();
    if center.len() != n {
        return Err(invalid(format!("center must have length {n}")));
    }
    let grad_center = model.frequency(center);
    let q = model.hessian();
    let first = (0..n)
        .map(|i| grad_center[i].abs() + radius * q[i].iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0f64, f64::max);
    let second = q.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    // third derivatives of a quadratic vanish
    Ok(first.max(second))
}

/// Σ_k sup|c_k| · e^{2π s |k|₁} over the complex strip of width s around
/// 𝕋ⁿ × B(0, R). Always ≥ |f|_s.
pub fn analytic_norm_bound(f: &Perturbation, s: f64, action_radius: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(invalid(format!("analytic width must be > 0, got {s}")));
    }
    let mut total = 0.0;
    for m in &f.modes {
        let k1 = m.k.l1_norm()? as f64;
        total += m.coeff.sup_bound(action_radius + s) * (TWO_PI * s * k1).exp();
    }
    Ok(total)
}

/// Gevrey norm Σ_l L^{|l|α} (l!)^{-α} sup|∂^l f| over 𝕋ⁿ × B(0, R), summed
/// mode by mode.
///
/// For each mode the angular part factorizes into one-dimensional series
/// Σ_j x^j/(j!)^α with x = 2π|k_i|L^α, truncated once the geometric tail
/// bound drops below `tol` times the partial sum. Action derivatives stop at
/// order two.
pub fn gevrey_norm(f: &Perturbation, alpha: f64, l: f64, tol: f64, action_radius: f64) -> Result<f64> {
    if !(alpha >= 1.0) || !(l > 0.0) {
        return Err(invalid(format!("need α ≥ 1 and L > 0, got ({alpha}, {l})")));
    }
    if !(tol > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    let la = l.powf(alpha);
    let mut total = 0.0;
    for m in &f.modes {
        let n = m.k.dim();
        let per_factor_tol = tol / (n as f64 + 1.0);
        let mut angular = 1.0;
        for &k in m.k.components() {
            angular *= factorial_series(TWO_PI * (k.unsigned_abs() as f64) * la, alpha, per_factor_tol)?;
        }
        total += action_series(&m.coeff, la, alpha, action_radius) * angular;
    }
    Ok(total)
}

/// Σ_j x^j / (j!)^α with tail-bounded truncation.
pub(crate) fn factorial_series(x: f64, alpha: f64, tol: f64) -> Result<f64> {
    const MAX_TERMS: usize = 1_000_000;
    let mut term = 1.0;
    let mut sum = 1.0;
    for j in 0..MAX_TERMS {
        let ratio = x / ((j + 1) as f64).powf(alpha);
        if ratio < 1.0 && term * ratio / (1.0 - ratio) <= tol * sum {
            return Ok(sum);
        }
        term *= ratio;
        sum += term;
    }
    Err(Error::Internal(format!("series Σ x^j/(j!)^α did not converge for x = {x}, α = {alpha}")))
}

/// Σ over action multi-indices |l| ≤ 2 of L^{|l|α}(l!)^{-α} sup|∂^l c|.
fn action_series(c: &Coefficient, la: f64, alpha: f64, r: f64) -> f64 {
    let n = c.linear.len().max(c.quadratic.len());
    let mut total = c.sup_bound(r);
    if c.is_constant() {
        return total;
    }
    for i in 0..n {
        // ∂_i c = b_i + Σ_j (A_ij + A_ji) I_j, maximised over the box
        let b = c.linear.get(i).copied().unwrap_or(0.0);
        let slope: f64 = (0..n).map(|j| c.second(i, j).abs()).sum();
        total += la * (b.abs() + r * slope);
    }
    let two_fact = 2f64.powf(alpha);
    for i in 0..n {
        for j in i..n {
            let d = c.second(i, j).abs();
            total += la * la * if i == j { d / two_fact } else { d };
        }
    }
    total
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Index j of the first component with |ω_j| = |ω|∞.
pub fn sup_index(omega: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in omega.iter().enumerate() {
        if v.abs() > omega[best].abs() {
            best = i;
        }
    }
    best
}

pub fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn diag(d: &[f64]) -> IntegrableModel {
        let n = d.len();
        let q = (0..n).map(|i| (0..n).map(|j| if i == j { d[i] } else { 0.0 }).collect()).collect();
        IntegrableModel::new(q, vec![0.0; n]).unwrap()
    }

    fn cos_mode(k: Vec<i64>) -> Perturbation {
        Perturbation::new(vec![Mode::cosine(k, 1.0).unwrap()])
    }

    #[test]
    fn rejects_asymmetric_hessian() {
        assert!(IntegrableModel::new(vec![vec![1.0, 2.0], vec![0.0, 1.0]], vec![0.0, 0.0]).is_err());
        assert!(IntegrableModel::new(vec![vec![1.0]], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn qc_identity_is_one() {
        let h = IntegrableModel::isotropic(3);
        let cert = qc_certificate(&h, &[1.0, 0.5, -0.2], 0.1, 3).unwrap();
        assert!((cert.m_lower - 1.0).abs() < 1e-14);
        assert_eq!(cert.points, 27);
        assert_eq!(cert.method, "sampled");
    }

    #[test]
    fn qc_linear_model_fails() {
        let h = IntegrableModel::new(vec![vec![0.0; 2]; 2], vec![1.0, 0.0]).unwrap();
        assert!(matches!(qc_certificate(&h, &[0.0, 0.0], 1.0, 3), Err(Error::NotQuasiConvex { .. })));
    }

    #[test]
    fn qc_vanishing_gradient() {
        let h = IntegrableModel::isotropic(2);
        assert!(matches!(qc_certificate(&h, &[0.0, 0.0], 1.0, 3), Err(Error::DegenerateGradient { .. })));
    }

    /// Independent route: dense eigen-decomposition of the bordered Hessian
    /// restricted through an SVD-derived complement.
    #[test]
    fn qc_diag_one_four_against_dense_oracle() {
        let h = diag(&[1.0, 4.0]);
        let cert = qc_certificate(&h, &[2.0, 1.0], 0.1, 5).unwrap();
        assert!(cert.m_lower >= 1.0 && cert.m_lower <= 4.0);

        let mut oracle_min = f64::INFINITY;
        for i in 0..5 {
            for j in 0..5 {
                let p = [2.0 - 0.1 + 0.05 * i as f64, 1.0 - 0.1 + 0.05 * j as f64];
                let w = h.frequency(&p);
                // in 2D the complement is spanned by (-w2, w1)
                let len = (w[0] * w[0] + w[1] * w[1]).sqrt();
                let v = DMatrix::from_row_slice(2, 1, &[-w[1] / len, w[0] / len]);
                let q = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 4.0]);
                let proj = v.transpose() * q * v;
                oracle_min = oracle_min.min(proj[(0, 0)]);
            }
        }
        assert!((cert.m_lower - oracle_min).abs() < 1e-12, "{} vs {}", cert.m_lower, oracle_min);
    }

    #[test]
    fn qc_scaling_homogeneity() {
        let base = IntegrableModel::new(vec![vec![2.0, 0.5, 0.0], vec![0.5, 1.0, 0.2], vec![0.0, 0.2, 3.0]], vec![0.3, 0.1, -0.4]).unwrap();
        let scaled = IntegrableModel::new(
            base.hessian().iter().map(|r| r.iter().map(|v| 2.5 * v).collect()).collect(),
            base.omega0().iter().map(|v| 2.5 * v).collect(),
        )
        .unwrap();
        let a = qc_certificate(&base, &[1.0, 1.0, 1.0], 0.2, 4).unwrap().m_lower;
        let b = qc_certificate(&scaled, &[1.0, 1.0, 1.0], 0.2, 4).unwrap().m_lower;
        assert!((b - 2.5 * a).abs() < 1e-12 * b);
    }

    #[test]
    fn deriv_bound_examples() {
        let h = IntegrableModel::new(vec![vec![0.0; 2]; 2], vec![1.0, 0.0]).unwrap();
        assert_eq!(deriv_bound(&h, &[0.3, 0.3], 2.0).unwrap(), 1.0);

        let h = IntegrableModel::isotropic(2);
        assert_eq!(deriv_bound(&h, &[0.0, 0.0], 1.0).unwrap(), 1.0);
        // sampling oracle over the ball
        let mut sampled = 0.0f64;
        for i in 0..=20 {
            for j in 0..=20 {
                let p = [-1.0 + 0.1 * i as f64, -1.0 + 0.1 * j as f64];
                sampled = sampled.max(crate::model::sup_norm(&h.frequency(&p)));
            }
        }
        assert!(sampled <= 1.0 + 1e-12);

        assert_eq!(deriv_bound(&diag(&[1.0, 4.0]), &[2.0, 1.0], 0.0).unwrap(), 4.0);
    }

    #[test]
    fn analytic_bound_examples() {
        let c = Perturbation::new(vec![Mode::new(vec![0, 0], Coefficient::constant(-2.5), 0.0).unwrap()]);
        assert_eq!(analytic_norm_bound(&c, 0.3, 1.0).unwrap(), 2.5);
        assert_eq!(analytic_norm_bound(&Perturbation::zero(), 0.3, 1.0).unwrap(), 0.0);

        let s = 0.2;
        let f = cos_mode(vec![1, 0]);
        let bound = analytic_norm_bound(&f, s, 1.0).unwrap();
        assert!((bound - (TWO_PI * s).exp()).abs() < 1e-12);
        // numeric sup of |cos(2π(x + iy))| on the boundary |y| = s
        let mut numeric = 0.0f64;
        for i in 0..1000 {
            let a = TWO_PI * i as f64 / 1000.0;
            let b = TWO_PI * s;
            let modulus = (a.cos().powi(2) * b.cosh().powi(2) + a.sin().powi(2) * b.sinh().powi(2)).sqrt();
            numeric = numeric.max(modulus);
        }
        assert!((numeric - (TWO_PI * s).cosh()).abs() < 1e-9);
        assert!(bound >= numeric);
    }

    #[test]
    fn analytic_bound_subadditive() {
        let f1 = cos_mode(vec![1, -1]);
        let f2 = Perturbation::new(vec![Mode::new(vec![0, 2], Coefficient { constant: 0.5, linear: vec![1.0, 0.0], quadratic: vec![] }, 0.3).unwrap()]);
        let mut both = f1.clone();
        both.modes.extend(f2.modes.clone());
        let s = 0.1;
        let lhs = analytic_norm_bound(&both, s, 1.0).unwrap();
        let rhs = analytic_norm_bound(&f1, s, 1.0).unwrap() + analytic_norm_bound(&f2, s, 1.0).unwrap();
        assert!(lhs <= rhs * (1.0 + 1e-15));
    }

    #[test]
    fn gevrey_constant_and_exponential() {
        let c = Perturbation::new(vec![Mode::new(vec![0, 0], Coefficient::constant(3.0), 0.0).unwrap()]);
        for (a, l) in [(1.0, 0.5), (2.0, 3.0), (1.5, 1.0)] {
            assert_eq!(gevrey_norm(&c, a, l, 1e-12, 1.0).unwrap(), 3.0);
        }
        let f = cos_mode(vec![1]);
        for l in [0.1, 0.5, 1.0] {
            let g = gevrey_norm(&f, 1.0, l, 1e-13, 1.0).unwrap();
            let exact = (TWO_PI * l).exp();
            assert!((g - exact).abs() <= 1e-12 * exact, "{g} vs {exact}");
        }
    }

    #[test]
    fn gevrey_alpha_two_against_reverse_summation() {
        let f = cos_mode(vec![1]);
        let g = gevrey_norm(&f, 2.0, 1.0, 1e-12, 1.0).unwrap();
        // 50 terms, computed with exact factorials and summed smallest first
        let x = TWO_PI;
        let mut terms = Vec::new();
        for j in 0..50u32 {
            let fact: f64 = (1..=j).map(f64::from).product();
            terms.push(x.powi(j as i32) / (fact * fact));
        }
        let oracle: f64 = terms.iter().rev().sum();
        assert!((g - oracle).abs() <= 1e-12 * oracle, "{g} vs {oracle}");
    }

    #[test]
    fn gevrey_matches_analytic_at_alpha_one() {
        let f = Perturbation::new(vec![Mode::cosine(vec![1, -1, 0], 0.7).unwrap(), Mode::cosine(vec![0, 1, -1], 0.3).unwrap()]);
        let l = 0.25;
        let g = gevrey_norm(&f, 1.0, l, 1e-13, 1.0).unwrap();
        let a = analytic_norm_bound(&f, l, 1.0).unwrap();
        assert!((g - a).abs() <= 1e-12 * a);
    }

    #[test]
    fn gevrey_monotonicity() {
        let f = cos_mode(vec![2, 1]);
        let mut prev = 0.0;
        for l in [0.1, 0.2, 0.4, 0.8, 1.0] {
            let g = gevrey_norm(&f, 1.5, l, 1e-12, 1.0).unwrap();
            assert!(g >= prev);
            prev = g;
        }
        let mut prev = f64::INFINITY;
        for a in [1.0, 1.5, 2.0, 3.0] {
            let g = gevrey_norm(&f, a, 0.7, 1e-12, 1.0).unwrap();
            assert!(g <= prev);
            prev = g;
        }
    }

    #[test]
    fn spec_json_round_trip_and_schema() {
        let spec = SystemSpec::new(
            IntegrableModel::isotropic(2),
            cos_mode(vec![1, -1]),
            1e-3,
            2.0,
            Regularity::Gevrey { alpha: 2.0, l: 0.5 },
        )
        .unwrap();
        let text = spec.to_json().unwrap();
        assert!(text.contains("\"schema_version\": 1"));
        assert!(text.contains("\"L\": 0.5"));
        let back = SystemSpec::from_json(&text).unwrap();
        assert_eq!(back, spec);

        let missing = text.replace("\"schema_version\": 1,", "");
        assert!(SystemSpec::from_json(&missing).is_err());
        let wrong = text.replace("\"schema_version\": 1", "\"schema_version\": 9");
        assert!(SystemSpec::from_json(&wrong).is_err());
    }

    #[test]
    fn normalized_perturbation_has_unit_norm() {
        let spec = SystemSpec::new(
            IntegrableModel::isotropic(2),
            Perturbation::new(vec![Mode::cosine(vec![1, 0], 3.0).unwrap()]),
            1e-2,
            1.0,
            Regularity::Analytic { s: 0.1 },
        )
        .unwrap();
        let unit = spec.normalized().unwrap();
        assert!((unit.perturbation_norm().unwrap() - 1.0).abs() < 1e-14);
        assert!(unit.epsilon * unit.perturbation_norm().unwrap() <= unit.epsilon);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let f = Perturbation::new(vec![
            Mode::new(vec![1, -2], Coefficient { constant: 0.4, linear: vec![0.3, -0.1], quadratic: vec![vec![0.2, 0.1], vec![0.0, -0.3]] }, 0.7).unwrap(),
            Mode::cosine(vec![0, 1], 1.1).unwrap(),
        ]);
        let theta = [0.13, 0.71];
        let action = [0.4, -0.25];
        let hstep = 1e-6;
        let mut gt = vec![0.0; 2];
        let mut gi = vec![0.0; 2];
        f.add_grad_theta(&theta, &action, 1.0, &mut gt);
        f.add_grad_action(&theta, &action, 1.0, &mut gi);
        for i in 0..2 {
            let mut tp = theta;
            let mut tm = theta;
            tp[i] += hstep;
            tm[i] -= hstep;
            let fd = (f.value(&tp, &action) - f.value(&tm, &action)) / (2.0 * hstep);
            assert!((fd - gt[i]).abs() < 1e-7, "θ{i}: {fd} vs {}", gt[i]);
            let mut ap = action;
            let mut am = action;
            ap[i] += hstep;
            am[i] -= hstep;
            let fd = (f.value(&theta, &ap) - f.value(&theta, &am)) / (2.0 * hstep);
            assert!((fd - gi[i]).abs() < 1e-7, "I{i}: {fd} vs {}", gi[i]);
        }
        let [tt, ti, ii] = f.second_derivatives(&theta, &action);
        for j in 0..2 {
            let mut tp = theta;
            let mut tm = theta;
            tp[j] += hstep;
            tm[j] -= hstep;
            let mut ap = action;
            let mut am = action;
            ap[j] += hstep;
            am[j] -= hstep;
            let (mut a, mut b) = (vec![0.0; 2], vec![0.0; 2]);
            f.add_grad_theta(&tp, &action, 1.0, &mut a);
            f.add_grad_theta(&tm, &action, 1.0, &mut b);
            for i in 0..2 {
                assert!(((a[i] - b[i]) / (2.0 * hstep) - tt[i][j]).abs() < 1e-5);
            }
            let (mut a, mut b) = (vec![0.0; 2], vec![0.0; 2]);
            f.add_grad_theta(&theta, &ap, 1.0, &mut a);
            f.add_grad_theta(&theta, &am, 1.0, &mut b);
            for i in 0..2 {
                assert!(((a[i] - b[i]) / (2.0 * hstep) - ti[i][j]).abs() < 1e-5);
            }
            let (mut a, mut b) = (vec![0.0; 2], vec![0.0; 2]);
            f.add_grad_action(&theta, &ap, 1.0, &mut a);
            f.add_grad_action(&theta, &am, 1.0, &mut b);
            for i in 0..2 {
                assert!(((a[i] - b[i]) / (2.0 * hstep) - ii[i][j]).abs() < 1e-5);
            }
        }
    }
}
