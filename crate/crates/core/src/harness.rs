//! ε-grid scans over ensembles of initial conditions, confinement-exponent
//! fitting, and persisted outputs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{integrate_observed, sha256_hex, Control, IntegratorConfig, State};
use crate::error::{invalid, Error, Result};
use crate::frequency_geometry::detect_crossings;
use crate::model::{IntegrableModel, Mode, Perturbation, Regularity, SystemSpec};

pub const THREADS_ENV: &str = "NEKHORO_THREADS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialCondition {
    pub theta: Vec<f64>,
    #[serde(rename = "I")]
    pub action: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialConditions {
    Explicit(Vec<InitialCondition>),
    /// Actions uniform in B(0, R/2), angles uniform in [0, 1)ⁿ.
    Random { count: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub spec: SystemSpec,
    pub eps_grid: Vec<f64>,
    pub initial_conditions: InitialConditions,
    pub t_max: f64,
    pub rho: f64,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(rename = "K_detect")]
    pub k_detect: i64,
    /// Worker count; None means available parallelism.
    #[serde(default)]
    pub parallelism: Option<usize>,
}

impl ScanConfig {
    /// The n = 3 convex benchmark: h = ½|I|², f = cos 2πθ₁ + cos 2π(θ₁−θ₂) +
    /// cos 2π(θ₂−θ₃), R = 2, 20 random initial conditions, t_max = 10⁴.
    pub fn benchmark() -> Self {
        Self {
            spec: benchmark_spec(1e-2),
            eps_grid: vec![1e-2, 1e-3, 1e-4],
            initial_conditions: InitialConditions::Random { count: 20, seed: 20_240_601 },
            t_max: 1e4,
            rho: 0.1,
            integrator: IntegratorConfig { sample_stride: 100, ..Default::default() },
            k_detect: 5,
            parallelism: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.eps_grid.is_empty() {
            return Err(invalid("eps_grid is empty"));
        }
        if self.eps_grid.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
            return Err(invalid("eps_grid entries must be finite and ≥ 0"));
        }
        if self.eps_grid.windows(2).any(|w| w[0] <= w[1]) {
            return Err(invalid("eps_grid must be strictly decreasing"));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) || !(self.rho > 0.0) {
            return Err(invalid("t_max and rho must be positive"));
        }
        if self.k_detect < 1 {
            return Err(invalid("K_detect must be ≥ 1"));
        }
        if self.parallelism == Some(0) {
            return Err(invalid("parallelism must be ≥ 1"));
        }
        self.integrator.validate()?;
        let n = self.spec.dim();
        let half = 0.5 * self.spec.radius;
        if let InitialConditions::Explicit(ics) = &self.initial_conditions {
            for (j, ic) in ics.iter().enumerate() {
                if ic.theta.len() != n || ic.action.len() != n {
                    return Err(invalid(format!("initial condition {j} does not have dimension {n}")));
                }
                if ic.action.iter().any(|v| !(v.abs() <= half)) {
                    return Err(invalid(format!("initial action {j} lies outside B(0, R/2)")));
                }
            }
        }
        Ok(())
    }

    pub fn seed(&self) -> Option<u64> {
        match self.initial_conditions {
            InitialConditions::Random { seed, .. } => Some(seed),
            InitialConditions::Explicit(_) => None,
        }
    }

    /// The ensemble, generating random members from hash(seed, index).
    pub fn initial_states(&self) -> Result<Vec<State>> {
        let n = self.spec.dim();
        let half = 0.5 * self.spec.radius;
        match &self.initial_conditions {
            InitialConditions::Explicit(ics) => {
                ics.iter().map(|ic| State::new(ic.theta.clone(), ic.action.clone(), 0.0)).collect()
            }
            InitialConditions::Random { count, seed } => (0..*count)
                .map(|j| {
                    let mut rng = cell_rng(*seed, j as u64);
                    let action = (0..n).map(|_| rng.random_range(-half..half)).collect();
                    let theta = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
                    State::new(theta, action, 0.0)
                })
                .collect(),
        }
    }

    /// sha256 of the canonical JSON form, with the worker count left out
    /// since it does not affect results.
    pub fn hash(&self) -> Result<String> {
        let canonical = Self { parallelism: None, ..self.clone() };
        Ok(sha256_hex(serde_json::to_string(&canonical)?.as_bytes()))
    }
}

pub fn benchmark_spec(eps: f64) -> SystemSpec {
    let modes = [[1, 0, 0], [1, -1, 0], [0, 1, -1]]
        .into_iter()
        .map(|k| Mode::cosine(k.to_vec(), 1.0).expect("benchmark modes are valid"))
        .collect();
    SystemSpec::new(IntegrableModel::isotropic(3), Perturbation::new(modes), eps, 2.0, Regularity::Analytic { s: 0.1 })
        .expect("benchmark spec is valid")
}

fn cell_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(index.to_le_bytes());
    ChaCha8Rng::from_seed(hasher.finalize().into())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub eps: f64,
    pub ic_index: usize,
    /// max_t |I(t) − I₀|∞
    pub max_drift: f64,
    pub escape_time: Option<f64>,
    pub crossing_count: Option<usize>,
    /// max_t |h(I(t)) − h(I₀)|
    pub max_h_variation: f64,
    /// max_t |H(t) − H(0)|, the measured integrator drift
    pub max_energy_error: f64,
    pub error: Option<String>,
}

impl CellRecord {
    /// |h(I(t)) − h(I₀)| ≤ 2ε‖f‖ + measured energy drift.
    pub fn conservation_holds(&self, f_norm: f64) -> bool {
        self.max_h_variation <= 2.0 * self.eps * f_norm + self.max_energy_error
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub a_fit: f64,
    pub c_fit: f64,
    /// Standard error of the slope.
    pub stderr: f64,
    /// Residual standard error of the regression.
    pub residual_stderr: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanManifest {
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub version: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub records: Vec<CellRecord>,
    pub fitted_exponent: Option<Fit>,
    /// sup-norm bound of the unscaled perturbation over 𝕋ⁿ × B(0, R).
    pub f_sup_bound: f64,
    pub manifest: ScanManifest,
}

impl ScanResult {
    /// (ε, median max-drift) in grid order, over cells without errors.
    pub fn median_drifts(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, Vec<f64>)> = Vec::new();
        for r in self.records.iter().filter(|r| r.error.is_none()) {
            match out.last_mut() {
                Some((e, v)) if *e == r.eps => v.push(r.max_drift),
                _ => out.push((r.eps, vec![r.max_drift])),
            }
        }
        out.into_iter().map(|(e, v)| (e, median(v))).collect()
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m == 0 {
        f64::NAN
    } else if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// Worker count: NEKHORO_THREADS, then the config, then available parallelism.
pub fn worker_count(config: &ScanConfig) -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&v| v > 0)
        .or(config.parallelism)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

pub fn run_scan(config: &ScanConfig) -> Result<ScanResult> {
    config.validate()?;
    let workers = worker_count(config);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    run_scan_in(config, &pool)
}

fn run_scan_in(config: &ScanConfig, pool: &rayon::ThreadPool) -> Result<ScanResult> {
    let initial = config.initial_states()?;
    let cells: Vec<(f64, usize)> =
        config.eps_grid.iter().flat_map(|&e| (0..initial.len()).map(move |j| (e, j))).collect();
    // collect() on an indexed parallel iterator keeps cell order
    let records: Vec<CellRecord> =
        pool.install(|| cells.par_iter().map(|&(eps, j)| run_cell(config, eps, j, &initial[j])).collect());
    let mut result = ScanResult {
        records,
        fitted_exponent: None,
        f_sup_bound: config.spec.f.real_sup_bound(config.spec.radius),
        manifest: ScanManifest { config_sha256: config.hash()?, seed: config.seed(), version: crate::VERSION.into() },
    };
    result.fitted_exponent = fit_confinement(&result).ok();
    Ok(result)
}

fn run_cell(config: &ScanConfig, eps: f64, ic_index: usize, initial: &State) -> CellRecord {
    let spec = config.spec.with_epsilon(eps);
    let rho = config.rho;
    let i0 = initial.action.clone();
    let drift = |s: &State| s.action.iter().zip(&i0).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let mut escape = None;
    let outcome = integrate_observed(&spec, initial, config.t_max, &config.integrator, |prev, next| {
        if escape.is_none() {
            let (d0, d1) = (drift(prev), drift(next));
            if d1 >= rho {
                let s = if d1 > d0 { (rho - d0) / (d1 - d0) } else { 1.0 };
                escape = Some(prev.t + s.clamp(0.0, 1.0) * (next.t - prev.t));
            }
        }
        Control::Continue
    });
    let mut record = CellRecord {
        eps,
        ic_index,
        max_drift: 0.0,
        escape_time: None,
        crossing_count: None,
        max_h_variation: 0.0,
        max_energy_error: 0.0,
        error: None,
    };
    let traj = match outcome {
        Ok(t) => t,
        Err(Error::IntegrationFailure { t, reason, partial }) => {
            record.error = Some(format!("integration failed at t = {t}: {reason}"));
            *partial
        }
        Err(e) => {
            record.error = Some(e.to_string());
            return record;
        }
    };
    record.max_drift = traj.stats.max_action_drift;
    record.max_h_variation = traj.stats.max_h_variation;
    record.max_energy_error = traj.stats.max_energy_error;
    record.escape_time = escape;
    match detect_crossings(&traj.frequency_samples(&spec), config.k_detect) {
        Ok(events) => record.crossing_count = Some(events.len()),
        Err(e) if record.error.is_none() => record.error = Some(format!("crossing detection: {e}")),
        Err(_) => {}
    }
    record
}

/// Least-squares slope of log(median drift) against log ε.
pub fn fit_confinement(result: &ScanResult) -> Result<Fit> {
    fit_power_law(&result.median_drifts())
}

/// Fits y = c·x^a on points with x, y > 0.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<Fit> {
    let pts: Vec<(f64, f64)> =
        points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 3 {
        return Err(Error::NotFittable(format!("{} usable grid points, need ≥ 3 with nonzero drift", pts.len())));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::NotFittable("all ε values coincide".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let residual_stderr = (ssr / (m - 2.0)).sqrt();
    Ok(Fit {
        a_fit: slope,
        c_fit: intercept.exp(),
        stderr: residual_stderr / sxx.sqrt(),
        residual_stderr,
        points: pts.len(),
    })
}

const CSV_HEADER: [&str; 8] =
    ["eps", "ic_index", "max_drift", "escape_time", "crossing_count", "max_h_variation", "max_energy_error", "error"];

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes scan.csv, summary.json, drift_vs_eps.svg and manifest.json into
/// `out_dir`, overwriting earlier outputs.
pub fn emit_outputs(result: &ScanResult, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let paths: Vec<PathBuf> =
        ["scan.csv", "summary.json", "drift_vs_eps.svg", "manifest.json"].iter().map(|f| out_dir.join(f)).collect();

    let mut w = csv::Writer::from_path(&paths[0])?;
    w.write_record(CSV_HEADER)?;
    for r in &result.records {
        w.write_record([
            fmt(r.eps),
            r.ic_index.to_string(),
            fmt(r.max_drift),
            r.escape_time.map(fmt).unwrap_or_default(),
            r.crossing_count.map(|c| c.to_string()).unwrap_or_default(),
            fmt(r.max_h_variation),
            fmt(r.max_energy_error),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;

    let summary = serde_json::json!({
        "cells": result.records.len(),
        "failed_cells": result.records.iter().filter(|r| r.error.is_some()).count(),
        "escapes": result.records.iter().filter(|r| r.escape_time.is_some()).count(),
        "median_drift": result.median_drifts().iter().map(|(e, d)| serde_json::json!({"eps": e, "median_max_drift": d})).collect::<Vec<_>>(),
        "fit": result.fitted_exponent,
        "f_sup_bound": result.f_sup_bound,
        "conservation_violations": result.records.iter().filter(|r| r.error.is_none() && !r.conservation_holds(result.f_sup_bound)).count(),
    });
    fs::write(&paths[1], serde_json::to_string_pretty(&summary)? + "\n")?;
    fs::write(&paths[2], render_svg(result))?;
    fs::write(&paths[3], serde_json::to_string_pretty(&result.manifest)? + "\n")?;
    Ok(paths)
}

/// Reads back the per-cell records written by [`emit_outputs`].
pub fn read_scan_csv(path: &Path) -> Result<Vec<CellRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    if r.headers()?.iter().ne(CSV_HEADER) {
        return Err(Error::Parse(format!("{} does not have the scan.csv header", path.display())));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("{s:?}: {e}")));
    let int = |s: &str| s.parse::<usize>().map_err(|e| Error::Parse(format!("{s:?}: {e}")));
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        out.push(CellRecord {
            eps: num(&rec[0])?,
            ic_index: int(&rec[1])?,
            max_drift: num(&rec[2])?,
            escape_time: if rec[3].is_empty() { None } else { Some(num(&rec[3])?) },
            crossing_count: if rec[4].is_empty() { None } else { Some(int(&rec[4])?) },
            max_h_variation: num(&rec[5])?,
            max_energy_error: num(&rec[6])?,
            error: if rec[7].is_empty() { None } else { Some(rec[7].to_string()) },
        });
    }
    Ok(out)
}

fn render_svg(result: &ScanResult) -> String {
    const W: f64 = 640.0;
    const H: f64 = 420.0;
    const PAD: f64 = 60.0;
    let pts: Vec<(f64, f64)> = result
        .records
        .iter()
        .filter(|r| r.error.is_none() && r.eps > 0.0 && r.max_drift > 0.0)
        .map(|r| (r.eps.log10(), r.max_drift.log10()))
        .collect();
    let medians: Vec<(f64, f64)> =
        result.median_drifts().into_iter().filter(|(e, d)| *e > 0.0 && *d > 0.0).map(|(e, d)| (e.log10(), d.log10())).collect();

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<line x1="{PAD}" y1="{y}" x2="{x}" y2="{y}" stroke="black"/><line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{y}" stroke="black"/>"#,
        x = W - PAD,
        y = H - PAD
    );
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">log10 ε</text>"#, W / 2.0, H - 15.0);
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{}" text-anchor="middle" font-size="14" transform="rotate(-90 18 {})">log10 max drift</text>"#,
        H / 2.0,
        H / 2.0
    );

    if pts.is_empty() {
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">no data</text>"#, W / 2.0, H / 2.0);
        svg.push_str("</svg>\n");
        return svg;
    }
    let (mut x0, mut x1, mut y0, mut y1) = pts.iter().fold(
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |(a, b, c, d), (x, y)| (a.min(*x), b.max(*x), c.min(*y), d.max(*y)),
    );
    if x1 - x0 < 1e-9 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 < 1e-9 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    for (label, v) in [(x0, x0), (x1, x1)] {
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{}" text-anchor="middle" font-size="11">{label:.2}</text>"#, sx(v), H - PAD + 16.0);
    }
    for (label, v) in [(y0, y0), (y1, y1)] {
        let _ = writeln!(svg, r#"<text x="{}" y="{:.2}" text-anchor="end" font-size="11">{label:.2}</text>"#, PAD - 6.0, sy(v) + 4.0);
    }
    for (x, y) in &pts {
        let _ = writeln!(svg, r##"<circle cx="{:.2}" cy="{:.2}" r="3" fill="#4a7bd0" fill-opacity="0.6"/>"##, sx(*x), sy(*y));
    }
    for (x, y) in &medians {
        let _ = writeln!(svg, r##"<rect x="{:.2}" y="{:.2}" width="8" height="8" fill="#d0412b"/>"##, sx(*x) - 4.0, sy(*y) - 4.0);
    }
    if let Some(fit) = &result.fitted_exponent {
        let line = |x: f64| fit.c_fit.log10() + fit.a_fit * x;
        let _ = writeln!(
            svg,
            r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#d0412b" stroke-dasharray="6 4"/>"##,
            sx(x0),
            sy(line(x0)),
            sx(x1),
            sy(line(x1))
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="13">slope {:.4} ± {:.4}</text>"#,
            PAD + 10.0,
            PAD - 20.0,
            fit.a_fit,
            fit.stderr
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::RngCore;

    fn small_config() -> ScanConfig {
        ScanConfig {
            eps_grid: vec![1e-2, 1e-3, 0.0],
            initial_conditions: InitialConditions::Random { count: 3, seed: 11 },
            t_max: 20.0,
            integrator: IntegratorConfig { sample_stride: 10, ..Default::default() },
            parallelism: Some(2),
            ..ScanConfig::benchmark()
        }
    }

    fn record(eps: f64, drift: f64, j: usize) -> CellRecord {
        CellRecord {
            eps,
            ic_index: j,
            max_drift: drift,
            escape_time: None,
            crossing_count: Some(0),
            max_h_variation: 0.0,
            max_energy_error: 0.0,
            error: None,
        }
    }

    fn synthetic(points: &[(f64, f64)]) -> ScanResult {
        ScanResult {
            records: points.iter().enumerate().map(|(j, &(e, d))| record(e, d, j)).collect(),
            fitted_exponent: None,
            f_sup_bound: 0.0,
            manifest: ScanManifest { config_sha256: String::new(), seed: None, version: crate::VERSION.into() },
        }
    }

    #[test]
    fn integrable_cells_do_not_drift() {
        let cfg = ScanConfig { eps_grid: vec![0.0], ..small_config() };
        let res = run_scan(&cfg).unwrap();
        assert_eq!(res.records.len(), 3);
        for r in &res.records {
            assert!(r.max_drift <= 1e-12 && r.escape_time.is_none() && r.error.is_none());
        }
    }

    #[test]
    fn serial_and_parallel_agree_bitwise() {
        let cfg = small_config();
        let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let parallel = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = run_scan_in(&cfg, &serial).unwrap();
        let b = run_scan_in(&cfg, &parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.records.len(), cfg.eps_grid.len() * 3);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&run_scan(&cfg).unwrap()).unwrap());
    }

    #[test]
    fn initial_conditions_in_half_ball() {
        let cfg = ScanConfig { initial_conditions: InitialConditions::Random { count: 200, seed: 3 }, ..small_config() };
        for s in cfg.initial_states().unwrap() {
            assert!(s.action.iter().all(|v| v.abs() <= 1.0));
            assert!(s.theta.iter().all(|v| (0.0..1.0).contains(v)));
        }
        let other = ScanConfig { parallelism: Some(7), ..cfg.clone() };
        assert_eq!(cfg.hash().unwrap(), other.hash().unwrap());
    }

    #[test]
    fn config_validation() {
        assert!(ScanConfig { eps_grid: vec![1e-3, 1e-2], ..small_config() }.validate().is_err());
        let bad = InitialConditions::Explicit(vec![InitialCondition { theta: vec![0.0; 3], action: vec![1.5, 0.0, 0.0] }]);
        assert!(ScanConfig { initial_conditions: bad, ..small_config() }.validate().is_err());
        let json = serde_json::to_string(&small_config()).unwrap();
        let back: ScanConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, small_config());
    }

    #[test]
    fn exact_power_law() {
        let pts: Vec<(f64, f64)> = [1e-2, 1e-3, 1e-4, 1e-5].iter().map(|&e: &f64| (e, e.powf(0.25))).collect();
        let fit = fit_confinement(&synthetic(&pts)).unwrap();
        assert!((fit.a_fit - 0.25).abs() <= 1e-12);
        assert!((fit.c_fit - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn noisy_power_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<(f64, f64)> = (0..12)
            .map(|i| {
                let e = 10f64.powf(-1.0 - 0.3 * i as f64);
                let noise = (rng.next_u64() as f64 / u64::MAX as f64) * 2.0 - 1.0;
                (e, 3.0 * e.sqrt() * (1.0 + 0.01 * noise))
            })
            .collect();
        let fit = fit_power_law(&pts).unwrap();
        assert!((fit.a_fit - 0.5).abs() <= 0.02);
    }

    #[test]
    fn degenerate_fits_rejected() {
        let zero = synthetic(&[(1e-2, 0.0), (1e-3, 0.0), (1e-4, 0.0)]);
        assert!(matches!(fit_confinement(&zero), Err(Error::NotFittable(_))));
        assert!(matches!(fit_power_law(&[(1e-2, 1.0), (1e-3, 0.5)]), Err(Error::NotFittable(_))));
    }

    #[test]
    fn empty_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let res = synthetic(&[]);
        emit_outputs(&res, dir.path()).unwrap();
        let csv = fs::read_to_string(dir.path().join("scan.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1);
        let svg = fs::read_to_string(dir.path().join("drift_vs_eps.svg")).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(read_scan_csv(&dir.path().join("scan.csv")).unwrap().is_empty());
    }

    #[test]
    fn outputs_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut res = synthetic(&[(1e-2, 0.1 / 3.0), (1e-3, 2.0f64.sqrt() * 1e-3), (1e-4, 1e-5 / 7.0)]);
        res.records[1].escape_time = Some(12.345678901234567);
        res.records[2].error = Some("integration failed, twice".into());
        res.fitted_exponent = fit_confinement(&res).ok();
        emit_outputs(&res, dir.path()).unwrap();
        let back = read_scan_csv(&dir.path().join("scan.csv")).unwrap();
        assert_eq!(back.len(), 3);
        assert_eq!(back, res.records);
        // idempotent overwrite
        let first = fs::read(dir.path().join("summary.json")).unwrap();
        emit_outputs(&res, dir.path()).unwrap();
        assert_eq!(first, fs::read(dir.path().join("summary.json")).unwrap());
    }

    #[test]
    fn scan_outputs_reproducible() {
        let cfg = small_config();
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        emit_outputs(&run_scan(&cfg).unwrap(), a.path()).unwrap();
        emit_outputs(&run_scan(&cfg).unwrap(), b.path()).unwrap();
        for f in ["scan.csv", "summary.json", "drift_vs_eps.svg", "manifest.json"] {
            assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
        }
    }
}
