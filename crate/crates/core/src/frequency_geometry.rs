//! Frequency-space geometry: the frequency map, the iso-energetic map, small
//! divisors, membership in R_K, and resonance crossings along sampled paths.

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::smallest_singular_value;
use crate::model::{sup_index, sup_norm, IntegrableModel};
use crate::resonance_lattice::{rational_in_interval, IntegerVector};

/// Default cap on the number of integer vectors small_divisor may visit.
pub const DEFAULT_ENUMERATION_BUDGET: u128 = 50_000_000;

/// Residual accepted after bisection, relative to |ω|∞.
pub const RELATIVE_RESIDUAL_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyPoint {
    pub omega: Vec<f64>,
    pub sup_index: usize,
}

impl FrequencyPoint {
    pub fn new(omega: Vec<f64>) -> Result<Self> {
        if omega.is_empty() || omega.iter().any(|v| !v.is_finite()) {
            return Err(invalid("frequency must be a finite non-empty vector"));
        }
        if omega.iter().all(|&v| v == 0.0) {
            return Err(Error::DegenerateGradient { at: omega });
        }
        let sup_index = sup_index(&omega);
        Ok(Self { omega, sup_index })
    }

    pub fn at(model: &IntegrableModel, action: &[f64]) -> Result<Self> {
        Self::new(model.frequency(action))
    }

    /// r_i = ω_i / |ω|∞ ∈ [−1, 1].
    pub fn ratio(&self, i: usize) -> f64 {
        self.omega[i] / self.omega[self.sup_index].abs()
    }
}

/// Ψ_h(I, λ) = (h(I), λ·∇h(I)).
pub fn psi_h(model: &IntegrableModel, action: &[f64], lambda: f64) -> Result<(f64, Vec<f64>)> {
    if !(lambda > 0.0) {
        return Err(invalid(format!("λ must be > 0, got {lambda}")));
    }
    check_len(model, action)?;
    let omega = model.frequency(action).into_iter().map(|w| lambda * w).collect();
    Ok((model.energy(action), omega))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Nondegeneracy {
    pub sigma_min: f64,
    pub nondegenerate: bool,
}

/// Smallest singular value of dΨ_h(v, u) = (ω·v, uω + λ∇²h·v).
pub fn psi_h_nondegenerate(model: &IntegrableModel, action: &[f64], lambda: f64, tol: f64) -> Result<Nondegeneracy> {
    if !(lambda > 0.0) {
        return Err(invalid(format!("λ must be > 0, got {lambda}")));
    }
    check_len(model, action)?;
    let jac = psi_jacobian(model, action, lambda);
    let sigma_min = smallest_singular_value(&jac);
    Ok(Nondegeneracy { sigma_min, nondegenerate: sigma_min > tol })
}

pub(crate) fn psi_jacobian(model: &IntegrableModel, action: &[f64], lambda: f64) -> Vec<Vec<f64>> {
    let n = model.dim();
    let omega = model.frequency(action);
    let q = model.hessian();
    let mut jac = vec![vec![0.0; n + 1]; n + 1];
    jac[0][..n].copy_from_slice(&omega);
    for i in 0..n {
        for j in 0..n {
            jac[i + 1][j] = lambda * q[i][j];
        }
        jac[i + 1][n] = omega[i];
    }
    jac
}

fn check_len(model: &IntegrableModel, action: &[f64]) -> Result<()> {
    if action.len() != model.dim() {
        return Err(invalid(format!("action has length {}, model has n = {}", action.len(), model.dim())));
    }
    Ok(())
}

/// Number of k ∈ ℤⁿ with |k|₁ ≤ K: Σ_i 2^i·C(n,i)·C(K,i).
pub fn lattice_ball_size(n: usize, order: i64) -> u128 {
    let mut total: u128 = 0;
    for i in 0..=n.min(order.max(0) as usize) {
        let term = binomial(n as u128, i as u128)
            .saturating_mul(binomial(order as u128, i as u128))
            .saturating_mul(1u128 << i.min(127));
        total = total.saturating_add(term);
    }
    total
}

fn binomial(n: u128, k: u128) -> u128 {
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

/// Minimises |k·ω| over canonical primitive k with 0 < |k|₁ ≤ K.
///
/// Vectors are visited in increasing lexicographic order and only a strictly
/// smaller value replaces the incumbent, so ties go to the lexicographically
/// smallest k.
pub fn small_divisor(omega: &[f64], order: i64) -> Result<(IntegerVector, f64)> {
    small_divisor_with_budget(omega, order, DEFAULT_ENUMERATION_BUDGET)
}

pub fn small_divisor_with_budget(omega: &[f64], order: i64, budget: u128) -> Result<(IntegerVector, f64)> {
    FrequencyPoint::new(omega.to_vec())?;
    if order < 1 {
        return Err(invalid(format!("K must be ≥ 1, got {order}")));
    }
    let required = lattice_ball_size(omega.len(), order);
    if required > budget {
        return Err(Error::BudgetExceeded { required, budget });
    }
    let mut scan = Scan { omega, k: vec![0; omega.len()], best: None };
    scan.visit(0, order, 0.0, false, 0);
    let (k, value) = scan.best.ok_or_else(|| Error::Internal("no primitive vector visited".into()))?;
    Ok((IntegerVector::new(k)?, value))
}

struct Scan<'a> {
    omega: &'a [f64],
    k: Vec<i64>,
    best: Option<(Vec<i64>, f64)>,
}

impl Scan<'_> {
    fn visit(&mut self, i: usize, remaining: i64, partial: f64, started: bool, content: i64) {
        if i == self.omega.len() {
            if started && content == 1 {
                let value = partial.abs();
                if self.best.as_ref().is_none_or(|(_, b)| value < *b) {
                    self.best = Some((self.k.clone(), value));
                }
            }
            return;
        }
        // the first nonzero component is positive
        let lo = if started { -remaining } else { 0 };
        for c in lo..=remaining {
            self.k[i] = c;
            let next = partial + c as f64 * self.omega[i];
            self.visit(i + 1, remaining - c.abs(), next, started || c != 0, content.gcd(&c));
        }
        self.k[i] = 0;
    }
}

/// The small-divisor minimiser when its value is at most tol·|ω|∞.
pub fn in_rk(omega: &[f64], order: i64, tol: f64) -> Result<Option<IntegerVector>> {
    let (k, value) = small_divisor(omega, order)?;
    Ok((value <= tol * sup_norm(omega)).then_some(k))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonanceEvent {
    #[serde(rename = "t")]
    pub time: f64,
    pub k: IntegerVector,
    pub residual: f64,
    pub bracket: (f64, f64),
    /// The sup-norm index differs at the two ends of the bracket.
    #[serde(default)]
    pub index_switch: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    /// Minimal range of r_i over a window that forces a rational crossing.
    pub l: f64,
    /// Window length in samples.
    pub window: usize,
    /// Bisection tolerance on t.
    pub bisection_tol: f64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self { l: 0.05, window: 50, bisection_tol: 1e-10 }
    }
}

/// A window over which r_i sweeps an interval of length ≥ l, with the
/// rational p/q it must cross.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowCertificate {
    pub coordinate: usize,
    pub start: f64,
    pub end: f64,
    pub p: i64,
    pub q: i64,
}

/// Times at which the interpolated path ω(t) crosses a simple resonance
/// q·ω_i − p·ω_j = 0 with j a sup-norm index and |p| + q < K.
///
/// ω is interpolated linearly between samples. Every coprime p/q in [−1, 1]
/// allowed by the order is tested in each bracket, so all such crossings are
/// found (not only those forced by a window certificate). Exact zeros at a
/// sample count when the neighbouring samples have strictly opposite signs.
pub fn detect_crossings(samples: &[(f64, Vec<f64>)], order: i64) -> Result<Vec<ResonanceEvent>> {
    detect_crossings_with(samples, order, &DetectionConfig::default())
}

pub fn detect_crossings_with(
    samples: &[(f64, Vec<f64>)],
    order: i64,
    config: &DetectionConfig,
) -> Result<Vec<ResonanceEvent>> {
    validate_samples(samples)?;
    if order < 1 {
        return Err(invalid(format!("K must be ≥ 1, got {order}")));
    }
    if !(config.bisection_tol > 0.0) {
        return Err(invalid("bisection tolerance must be positive"));
    }
    let fractions = coprime_fractions(order);
    let n = samples.first().map_or(0, |s| s.1.len());
    let sups: Vec<usize> = samples.iter().map(|(_, w)| sup_index(w)).collect();

    let mut events: Vec<ResonanceEvent> = Vec::new();
    let mut k = vec![0i64; n];
    for b in 0..samples.len().saturating_sub(1) {
        let (ta, wa) = (&samples[b].0, &samples[b].1);
        let (tb, wb) = (&samples[b + 1].0, &samples[b + 1].1);
        let switch = sups[b] != sups[b + 1];
        let js: &[usize] = if switch { &[sups[b], sups[b + 1]] } else { &[sups[b]] };
        for (slot, &j) in js.iter().enumerate() {
            let sign = if slot == 0 { wa[j].signum() } else { wb[j].signum() } as i64;
            for i in (0..n).filter(|&i| i != j) {
                for &(p, q) in &fractions {
                    k.iter_mut().for_each(|c| *c = 0);
                    k[i] = q;
                    k[j] = -p * sign;
                    let ga = dot_i(&k, wa);
                    let gb = dot_i(&k, wb);
                    let time = if ga * gb < 0.0 {
                        bisect(&k, (*ta, wa), (*tb, wb), config.bisection_tol)
                    } else if gb == 0.0 && ga != 0.0 && b + 2 < samples.len() {
                        let gc = dot_i(&k, &samples[b + 2].1);
                        if ga * gc < 0.0 {
                            *tb
                        } else {
                            continue;
                        }
                    } else {
                        continue;
                    };
                    let omega = interpolate((*ta, wa), (*tb, wb), time);
                    let kv = IntegerVector::new(k.clone())?.canonical();
                    push_unique(
                        &mut events,
                        ResonanceEvent {
                            time,
                            residual: dot_i(kv.components(), &omega).abs(),
                            k: kv,
                            bracket: (*ta, *tb),
                            index_switch: switch,
                        },
                    );
                }
            }
        }
    }
    events.sort_by(|a, b| a.time.total_cmp(&b.time).then_with(|| a.k.cmp(&b.k)));
    Ok(events)
}

/// Windows in which r_i = ω_i/|ω|∞ sweeps a range of length ≥ l, paired with
/// the rational the path must cross.
pub fn window_certificates(samples: &[(f64, Vec<f64>)], config: &DetectionConfig) -> Result<Vec<WindowCertificate>> {
    validate_samples(samples)?;
    if !(config.l > 0.0 && config.l <= 2.0) || config.window < 2 {
        return Err(invalid("window certificates need 0 < l ≤ 2 and window ≥ 2"));
    }
    let n = samples.first().map_or(0, |s| s.1.len());
    let stride = (config.window / 2).max(1);
    let mut out = Vec::new();
    let mut start = 0;
    while start + 1 < samples.len() {
        let end = (start + config.window).min(samples.len());
        for i in 0..n {
            let (lo, hi) = samples[start..end].iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, w)| {
                let r = w[i] / sup_norm(w);
                (lo.min(r), hi.max(r))
            });
            if hi - lo >= config.l {
                let (p, q) = rational_in_interval(0.5 * (lo + hi), config.l)?;
                out.push(WindowCertificate { coordinate: i, start: samples[start].0, end: samples[end - 1].0, p, q });
            }
        }
        if end == samples.len() {
            break;
        }
        start += stride;
    }
    Ok(out)
}

fn validate_samples(samples: &[(f64, Vec<f64>)]) -> Result<()> {
    let n = samples.first().map_or(0, |s| s.1.len());
    for (idx, (t, w)) in samples.iter().enumerate() {
        if w.len() != n || n == 0 {
            return Err(invalid(format!("sample {idx} has dimension {}, expected {n}", w.len())));
        }
        if !t.is_finite() || w.iter().any(|v| !v.is_finite()) {
            return Err(invalid(format!("sample {idx} is not finite")));
        }
        if w.iter().all(|&v| v == 0.0) {
            return Err(Error::DegenerateGradient { at: w.clone() });
        }
        if idx > 0 && !(samples[idx - 1].0 < *t) {
            return Err(invalid(format!("sample times must be strictly increasing (at index {idx})")));
        }
    }
    Ok(())
}

/// Coprime (p, q) with q ≥ 1, |p| ≤ q and |p| + q < K.
fn coprime_fractions(order: i64) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    for q in 1..order {
        for p in -q..=q {
            if p.abs() + q < order && p.gcd(&q) == 1 {
                out.push((p, q));
            }
        }
    }
    out
}

fn bisect(k: &[i64], a: (f64, &[f64]), b: (f64, &[f64]), tol: f64) -> f64 {
    let (mut lo, mut hi) = (a.0, b.0);
    let g_lo = dot_i(k, a.1);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let w = interpolate(a, b, mid);
        let g = dot_i(k, &w);
        if g == 0.0 {
            return mid;
        }
        if (g < 0.0) == (g_lo < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
        let m = 0.5 * (lo + hi);
        let wm = interpolate(a, b, m);
        if hi - lo <= tol && dot_i(k, &wm).abs() <= RELATIVE_RESIDUAL_TOL * sup_norm(&wm) {
            return m;
        }
    }
    0.5 * (lo + hi)
}

fn interpolate(a: (f64, &[f64]), b: (f64, &[f64]), t: f64) -> Vec<f64> {
    let s = (t - a.0) / (b.0 - a.0);
    a.1.iter().zip(b.1).map(|(x, y)| x + s * (y - x)).collect()
}

fn dot_i(k: &[i64], w: &[f64]) -> f64 {
    k.iter().zip(w).map(|(&c, &x)| c as f64 * x).sum()
}

fn push_unique(events: &mut Vec<ResonanceEvent>, e: ResonanceEvent) {
    let dup = events.iter().any(|o| o.k == e.k && (o.time - e.time).abs() <= 1e-9);
    if !dup {
        events.push(e);
    }
}

/// One JSON object per line.
pub fn events_to_json_lines(events: &[ResonanceEvent]) -> Result<String> {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e)?);
        out.push('\n');
    }
    Ok(out)
}
