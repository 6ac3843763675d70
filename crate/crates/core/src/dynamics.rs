//! Implicit-midpoint integration of Hamilton's equations on 𝕋ⁿ × B(0, R).

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::model::{sup_norm, SystemSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub theta: Vec<f64>,
    #[serde(rename = "I")]
    pub action: Vec<f64>,
    pub t: f64,
}

impl State {
    /// θ is wrapped into [0, 1).
    pub fn new(theta: Vec<f64>, action: Vec<f64>, t: f64) -> Result<Self> {
        if theta.len() != action.len() || theta.is_empty() {
            return Err(invalid("theta and I must have the same positive length"));
        }
        if theta.iter().chain(&action).chain([&t]).any(|v| !v.is_finite()) {
            return Err(invalid("state must be finite"));
        }
        Ok(Self { theta: theta.into_iter().map(wrap).collect(), action, t })
    }

    pub fn dim(&self) -> usize {
        self.action.len()
    }
}

/// x mod 1 in [0, 1).
pub fn wrap(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub step: f64,
    /// Sup-norm tolerance on the implicit update, relative to max(1, |z|∞).
    pub newton_tol: f64,
    pub newton_max_iters: usize,
    pub sample_stride: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { step: 1e-2, newton_tol: 1e-13, newton_max_iters: 50, sample_stride: 1 }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(invalid(format!("step must be > 0, got {}", self.step)));
        }
        if !(self.newton_tol >= 4.0 * f64::EPSILON) {
            return Err(invalid(format!("newton_tol {} is below machine precision", self.newton_tol)));
        }
        if self.newton_max_iters == 0 || self.sample_stride == 0 {
            return Err(invalid("newton_max_iters and sample_stride must be ≥ 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExitReason {
    DomainExit,
    MaxTime,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exit {
    pub time: f64,
    pub reason: ExitReason,
}

/// Running maxima over every step, not only the recorded samples.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStats {
    pub steps: u64,
    /// max |I(t) − I₀|∞
    pub max_action_drift: f64,
    /// max |H(t) − H₀|
    pub max_energy_error: f64,
    /// max |h(I(t)) − h(I₀)|
    pub max_h_variation: f64,
    pub newton_fallbacks: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<State>,
    pub energy_log: Vec<(f64, f64)>,
    pub exit: Option<Exit>,
    pub stats: TrajectoryStats,
}

impl Trajectory {
    pub fn final_state(&self) -> Option<&State> {
        self.samples.last()
    }

    /// (t, ∇h(I)) along the samples.
    pub fn frequency_samples(&self, spec: &SystemSpec) -> Vec<(f64, Vec<f64>)> {
        self.samples.iter().map(|s| (s.t, spec.h.frequency(&s.action))).collect()
    }

    /// Columns t, theta_1..theta_n, I_1..I_n, H.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let n = self.samples.first().map_or(0, State::dim);
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("theta_{i}")));
        header.extend((1..=n).map(|i| format!("I_{i}")));
        header.push("H".into());
        w.write_record(&header)?;
        for (s, (_, h)) in self.samples.iter().zip(&self.energy_log) {
            let mut row = vec![fmt(s.t)];
            row.extend(s.theta.iter().map(|v| fmt(*v)));
            row.extend(s.action.iter().map(|v| fmt(*v)));
            row.push(fmt(*h));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Inverse of [`Trajectory::write_csv`]; exit and stats are not stored.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        let cols = header.len();
        if cols < 4 || (cols - 2) % 2 != 0 || &header[0] != "t" || &header[cols - 1] != "H" {
            return Err(Error::Parse("trajectory CSV needs columns t, theta_1..n, I_1..n, H".into()));
        }
        let n = (cols - 2) / 2;
        let mut out = Trajectory::default();
        for rec in r.records() {
            let rec = rec?;
            let v: Vec<f64> = rec
                .iter()
                .map(|x| x.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{x:?}: {e}"))))
                .collect::<Result<_>>()?;
            out.samples.push(State { theta: v[1..=n].to_vec(), action: v[n + 1..=2 * n].to_vec(), t: v[0] });
            out.energy_log.push((v[0], v[cols - 1]));
        }
        Ok(out)
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// dθ = ∇h(I) + ε∂f/∂I, dI = −ε∂f/∂θ.
pub fn vector_field(spec: &SystemSpec, state: &State) -> (Vec<f64>, Vec<f64>) {
    let n = state.dim();
    let (mut dtheta, mut di) = (vec![0.0; n], vec![0.0; n]);
    field_into(spec, &state.theta, &state.action, &mut dtheta, &mut di);
    (dtheta, di)
}

fn field_into(spec: &SystemSpec, theta: &[f64], action: &[f64], dtheta: &mut [f64], di: &mut [f64]) {
    spec.h.frequency_into(action, dtheta);
    di.iter_mut().for_each(|v| *v = 0.0);
    if spec.epsilon != 0.0 {
        spec.f.add_grad_action(theta, action, spec.epsilon, dtheta);
        spec.f.add_grad_theta(theta, action, -spec.epsilon, di);
    }
}

/// Jacobian of the vector field with respect to (θ, I), 2n×2n.
pub fn field_jacobian(spec: &SystemSpec, theta: &[f64], action: &[f64]) -> DMatrix<f64> {
    let n = theta.len();
    let eps = spec.epsilon;
    let [tt, ti, ii] = spec.f.second_derivatives(theta, action);
    let q = spec.h.hessian();
    DMatrix::from_fn(2 * n, 2 * n, |r, c| match (r < n, c < n) {
        (true, true) => eps * ti[c][r],
        (true, false) => q[r][c - n] + eps * ii[r][c - n],
        (false, true) => -eps * tt[r - n][c],
        (false, false) => -eps * ti[r - n][c - n],
    })
}

/// Reusable buffers so that the fixed-point loop does not allocate.
struct Stepper {
    n: usize,
    z0: Vec<f64>,
    z1: Vec<f64>,
    next: Vec<f64>,
    mid: Vec<f64>,
    field: Vec<f64>,
    fallbacks: u64,
}

impl Stepper {
    fn new(n: usize) -> Self {
        Self {
            n,
            z0: vec![0.0; 2 * n],
            z1: vec![0.0; 2 * n],
            next: vec![0.0; 2 * n],
            mid: vec![0.0; 2 * n],
            field: vec![0.0; 2 * n],
            fallbacks: 0,
        }
    }

    fn eval(&mut self, spec: &SystemSpec) {
        let n = self.n;
        let (theta, action) = self.mid.split_at(n);
        let (dt, di) = self.field.split_at_mut(n);
        field_into(spec, theta, action, dt, di);
    }

    fn set_mid(&mut self) {
        for ((m, a), b) in self.mid.iter_mut().zip(&self.z0).zip(&self.z1) {
            *m = 0.5 * (a + b);
        }
    }

    /// Solves z1 = z0 + h·F((z0 + z1)/2) in place, θ unwrapped.
    fn solve(&mut self, spec: &SystemSpec, h: f64, config: &IntegratorConfig) -> std::result::Result<(), String> {
        // explicit Euler predictor
        self.mid.copy_from_slice(&self.z0);
        self.eval(spec);
        for i in 0..2 * self.n {
            self.z1[i] = self.z0[i] + h * self.field[i];
        }

        let mut prev = f64::INFINITY;
        let mut growth = 0;
        for _ in 0..config.newton_max_iters {
            let change = self.fixed_point_sweep(spec, h);
            if !change.is_finite() {
                break;
            }
            if change <= config.newton_tol * self.scale() {
                // one polishing sweep drives the residual to round-off
                self.fixed_point_sweep(spec, h);
                return Ok(());
            }
            growth = if change >= prev { growth + 1 } else { 0 };
            if growth >= 2 {
                break;
            }
            prev = change;
        }
        self.fallbacks += 1;
        self.newton(spec, h, config)
    }

    fn scale(&self) -> f64 {
        sup_norm(&self.z1).max(1.0)
    }

    fn fixed_point_sweep(&mut self, spec: &SystemSpec, h: f64) -> f64 {
        self.set_mid();
        self.eval(spec);
        let mut change = 0.0f64;
        for i in 0..2 * self.n {
            self.next[i] = self.z0[i] + h * self.field[i];
            change = change.max((self.next[i] - self.z1[i]).abs());
        }
        self.z1.copy_from_slice(&self.next);
        change
    }

    fn newton(&mut self, spec: &SystemSpec, h: f64, config: &IntegratorConfig) -> std::result::Result<(), String> {
        let n = self.n;
        let mut last = f64::NAN;
        for _ in 0..config.newton_max_iters {
            self.set_mid();
            self.eval(spec);
            let residual = DVector::from_fn(2 * n, |i, _| self.z1[i] - self.z0[i] - h * self.field[i]);
            let jac = field_jacobian(spec, &self.mid[..n], &self.mid[n..]);
            let g = DMatrix::<f64>::identity(2 * n, 2 * n) - jac * (0.5 * h);
            let delta = g.lu().solve(&residual).ok_or("singular Newton matrix")?;
            for i in 0..2 * n {
                self.z1[i] -= delta[i];
            }
            last = delta.amax();
            if !last.is_finite() {
                return Err("Newton iteration diverged".into());
            }
            if last <= config.newton_tol * self.scale() {
                return Ok(());
            }
        }
        Err(format!("no convergence after {} Newton iterations (last update {last:e})", config.newton_max_iters))
    }

    fn load(&mut self, state: &State) {
        self.z0[..self.n].copy_from_slice(&state.theta);
        self.z0[self.n..].copy_from_slice(&state.action);
    }
}

/// One implicit-midpoint step of length `config.step`.
pub fn step_midpoint(spec: &SystemSpec, state: &State, config: &IntegratorConfig) -> Result<State> {
    step_midpoint_by(spec, state, config.step, config)
}

/// One implicit-midpoint step of signed length `h`; negative h steps backwards.
pub fn step_midpoint_by(spec: &SystemSpec, state: &State, h: f64, config: &IntegratorConfig) -> Result<State> {
    config.validate()?;
    check_state(spec, state)?;
    let mut s = Stepper::new(state.dim());
    s.load(state);
    s.solve(spec, h, config).map_err(|reason| Error::IntegrationFailure {
        t: state.t,
        reason,
        partial: Box::default(),
    })?;
    let n = state.dim();
    Ok(State {
        theta: s.z1[..n].iter().map(|&v| wrap(v)).collect(),
        action: s.z1[n..].to_vec(),
        t: state.t + h,
    })
}

fn check_state(spec: &SystemSpec, state: &State) -> Result<()> {
    if state.dim() != spec.dim() || state.theta.len() != state.dim() {
        return Err(invalid(format!("state dimension {} does not match n = {}", state.dim(), spec.dim())));
    }
    Ok(())
}

/// What the observer wants after each step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

/// Integrates from `initial` to `t_max`, stopping early when |I|∞ ≥ R.
pub fn integrate(spec: &SystemSpec, initial: &State, t_max: f64, config: &IntegratorConfig) -> Result<Trajectory> {
    integrate_observed(spec, initial, t_max, config, |_, _| Control::Continue)
}

/// As [`integrate`], calling `observer(previous, current)` after every step.
pub fn integrate_observed<F>(
    spec: &SystemSpec,
    initial: &State,
    t_max: f64,
    config: &IntegratorConfig,
    mut observer: F,
) -> Result<Trajectory>
where
    F: FnMut(&State, &State) -> Control,
{
    config.validate()?;
    check_state(spec, initial)?;
    if !t_max.is_finite() || t_max < initial.t {
        return Err(invalid(format!("t_max = {t_max} precedes the initial time {}", initial.t)));
    }
    if sup_norm(&initial.action) >= spec.radius {
        return Err(invalid(format!("initial action lies outside B(0, R = {})", spec.radius)));
    }

    let n = spec.dim();
    let t0 = initial.t;
    let steps = (((t_max - t0) / config.step) - 1e-9).ceil().max(0.0) as u64;
    let h0 = spec.h.energy(&initial.action);
    let e0 = spec.hamiltonian(&initial.theta, &initial.action);

    let mut traj = Trajectory::default();
    traj.samples.push(initial.clone());
    traj.energy_log.push((t0, e0));

    let mut stepper = Stepper::new(n);
    let mut current = initial.clone();
    let mut exit = ExitReason::MaxTime;
    for k in 1..=steps {
        let t_next = if k == steps { t_max } else { t0 + k as f64 * config.step };
        stepper.load(&current);
        if let Err(reason) = stepper.solve(spec, t_next - current.t, config) {
            traj.stats.newton_fallbacks = stepper.fallbacks;
            return Err(Error::IntegrationFailure { t: current.t, reason, partial: Box::new(traj) });
        }
        let next = State {
            theta: stepper.z1[..n].iter().map(|&v| wrap(v)).collect(),
            action: stepper.z1[n..].to_vec(),
            t: t_next,
        };

        let energy = spec.hamiltonian(&next.theta, &next.action);
        let stats = &mut traj.stats;
        stats.steps = k;
        let drift = next.action.iter().zip(&initial.action).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        stats.max_action_drift = stats.max_action_drift.max(drift);
        stats.max_energy_error = stats.max_energy_error.max((energy - e0).abs());
        stats.max_h_variation = stats.max_h_variation.max((spec.h.energy(&next.action) - h0).abs());

        let left = sup_norm(&next.action) >= spec.radius;
        let stop = observer(&current, &next) == Control::Stop;
        let last = k == steps || left || stop;
        if k % config.sample_stride as u64 == 0 || last {
            traj.energy_log.push((next.t, energy));
            traj.samples.push(next.clone());
        }
        current = next;
        if left {
            exit = ExitReason::DomainExit;
        }
        if last {
            break;
        }
    }
    traj.stats.newton_fallbacks = stepper.fallbacks;
    traj.exit = Some(Exit { time: current.t, reason: exit });
    Ok(traj)
}

/// First time with |I(t) − I₀|∞ ≥ ρ, linearly interpolated between steps.
pub fn escape_time(
    spec: &SystemSpec,
    initial: &State,
    rho: f64,
    t_max: f64,
    config: &IntegratorConfig,
) -> Result<Option<f64>> {
    if !(rho > 0.0) {
        return Err(invalid(format!("ρ must be > 0, got {rho}")));
    }
    let i0 = initial.action.clone();
    let drift = |s: &State| s.action.iter().zip(&i0).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let mut found = None;
    integrate_observed(spec, initial, t_max, config, |prev, next| {
        let (d0, d1) = (drift(prev), drift(next));
        if d1 >= rho {
            let s = if d1 > d0 { (rho - d0) / (d1 - d0) } else { 1.0 };
            found = Some(prev.t + s.clamp(0.0, 1.0) * (next.t - prev.t));
            Control::Stop
        } else {
            Control::Continue
        }
    })?;
    Ok(found)
}

/// Provenance for a simulation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub spec_sha256: String,
    pub config: IntegratorConfig,
    pub initial: State,
    pub t_max: f64,
    pub version: String,
}

impl RunManifest {
    pub fn new(spec: &SystemSpec, config: &IntegratorConfig, initial: &State, t_max: f64) -> Result<Self> {
        Ok(Self {
            spec_sha256: sha256_hex(serde_json::to_string(spec)?.as_bytes()),
            config: *config,
            initial: initial.clone(),
            t_max,
            version: crate::VERSION.to_string(),
        })
    }
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
