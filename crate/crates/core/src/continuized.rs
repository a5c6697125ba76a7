//! Continuized Nesterov acceleration, plain gradient descent, and an explicit
//! Euler simulator of the underlying jump process used as a validation oracle.
//!
//! The continuous process mixes `w` and `z` through a linear ODE between
//! Poisson jump times and takes gradient steps at each jump. Its exact
//! discretization is
//!
//! ```text
//! v_k     = w_k + tau_k (z_k - w_k)
//! w_{k+1} = v_k - gamma(T_{k+1}) grad f(v_k)
//! z_{k+1} = z_k + tau'_k (v_k - z_k) - gamma'(T_{k+1}) grad f(v_k)
//! ```
//!
//! where `(tau_k, tau'_k)` integrate the ODE over `[T_k, T_{k+1})`.

use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::event_clock::JumpSchedule;
use crate::objectives::{Metered, Objective};
use crate::trace::{RunTrace, TraceRow};

/// Gap above which a run is declared divergent.
pub const DIVERGENCE_GAP: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepParams {
    pub tau: f64,
    pub tau_prime: f64,
    pub gamma: f64,
    pub gamma_prime: f64,
}

/// Parameter family of a continuized method, in both continuous form
/// (`eta`, `eta'`, `gamma`, `gamma'` as functions of time) and the closed-form
/// mixing coefficients over an inter-jump interval.
pub trait ContinuizedParams {
    fn eta(&self, t: f64) -> f64;
    fn eta_prime(&self, t: f64) -> f64;
    fn gamma(&self, t: f64) -> f64;
    fn gamma_prime(&self, t: f64) -> f64;

    /// `(tau_k, tau'_k)` for the interval `[t_k, t_next)`.
    fn mixing(&self, t_k: f64, t_next: f64) -> (f64, f64);

    /// Everything needed for the step from `t_k` to `t_next`, with step sizes
    /// taken at the jump `t_next`.
    fn step(&self, t_k: f64, t_next: f64) -> StepParams {
        let (tau, tau_prime) = self.mixing(t_k, t_next);
        StepParams {
            tau,
            tau_prime,
            gamma: self.gamma(t_next),
            gamma_prime: self.gamma_prime(t_next),
        }
    }

    fn describe(&self) -> Vec<(String, f64)>;
}

/// `eta_t = 2/(rho t)`, `eta'_t = 0`, `gamma_t = 1/L`, `gamma'_t = rho t/(2L)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasarSchedule {
    pub rho: f64,
    pub l: f64,
}

impl QuasarSchedule {
    pub fn new(rho: f64, l: f64) -> Result<Self> {
        positive("rho", rho)?;
        positive("L", l)?;
        Ok(Self { rho, l })
    }
}

impl ContinuizedParams for QuasarSchedule {
    fn eta(&self, t: f64) -> f64 {
        2.0 / (self.rho * t)
    }
    fn eta_prime(&self, _t: f64) -> f64 {
        0.0
    }
    fn gamma(&self, _t: f64) -> f64 {
        1.0 / self.l
    }
    fn gamma_prime(&self, t: f64) -> f64 {
        self.rho * t / (2.0 * self.l)
    }
    fn mixing(&self, t_k: f64, t_next: f64) -> (f64, f64) {
        // t_k = 0 gives 0^(2/rho) = 0, so the first step jumps straight to z_0.
        (1.0 - (t_k / t_next).powf(2.0 / self.rho), 0.0)
    }
    fn describe(&self) -> Vec<(String, f64)> {
        vec![("rho".into(), self.rho), ("L".into(), self.l)]
    }
}

/// `eta = sqrt(mu/L)`, `eta' = rho sqrt(mu/L)`, `gamma = 1/L`, `gamma' = 1/sqrt(mu L)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrongQuasarSchedule {
    pub rho: f64,
    pub mu: f64,
    pub l: f64,
}

impl StrongQuasarSchedule {
    pub fn new(rho: f64, mu: f64, l: f64) -> Result<Self> {
        positive("rho", rho)?;
        positive("mu", mu)?;
        positive("L", l)?;
        Ok(Self { rho, mu, l })
    }

    pub fn rate(&self) -> f64 {
        (self.mu / self.l).sqrt()
    }
}

impl ContinuizedParams for StrongQuasarSchedule {
    fn eta(&self, _t: f64) -> f64 {
        self.rate()
    }
    fn eta_prime(&self, _t: f64) -> f64 {
        self.rho * self.rate()
    }
    fn gamma(&self, _t: f64) -> f64 {
        1.0 / self.l
    }
    fn gamma_prime(&self, _t: f64) -> f64 {
        1.0 / (self.mu * self.l).sqrt()
    }
    fn mixing(&self, t_k: f64, t_next: f64) -> (f64, f64) {
        coupled_mixing(self.rate(), self.rho * self.rate(), t_next - t_k)
    }
    fn describe(&self) -> Vec<(String, f64)> {
        vec![
            ("rho".into(), self.rho),
            ("mu".into(), self.mu),
            ("L".into(), self.l),
        ]
    }
}

/// Mixing coefficients of `dw = a (z - w) dt`, `dz = b (w - z) dt` over a
/// step `dt`: `tau = a/(a+b) (1 - e)` and `tau' = b (1 - e) / (b + a e)` with
/// `e = exp(-(a+b) dt)`.
pub(crate) fn coupled_mixing(a: f64, b: f64, dt: f64) -> (f64, f64) {
    let s = a + b;
    let one_minus_e = -(-s * dt).exp_m1();
    let e = 1.0 - one_minus_e;
    let tau = a / s * one_minus_e;
    let tau_prime = b * one_minus_e / (b + a * e);
    (tau, tau_prime)
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("must be positive and finite, got {v}")))
    }
}

/// Step parameters of the quasar schedule exactly as tabulated per index:
/// `gamma' = rho T_k / (2L)`. The run loop applies `gamma'` at `T_{k+1}`.
pub fn quasar_step_params(rho: f64, l: f64, t_k: f64, t_next: f64) -> Result<StepParams> {
    let s = QuasarSchedule::new(rho, l)?;
    if !(t_k >= 0.0 && t_k < t_next) {
        return Err(Error::NonIncreasingTimes { t_k, t_next });
    }
    let (tau, tau_prime) = s.mixing(t_k, t_next);
    Ok(StepParams {
        tau,
        tau_prime,
        gamma: s.gamma(t_k),
        gamma_prime: s.gamma_prime(t_k),
    })
}

pub fn strong_quasar_step_params(rho: f64, mu: f64, l: f64, dt: f64) -> Result<StepParams> {
    let s = StrongQuasarSchedule::new(rho, mu, l)?;
    if !(dt >= 0.0) {
        return Err(invalid("dT", "must be nonnegative"));
    }
    Ok(s.step(0.0, dt))
}

/// Options shared by all deterministic runners.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub k_max: usize,
    pub w_star: Option<DVector<f64>>,
    /// Optimal value; defaults to `f(w_star)` when `w_star` is given, else 0.
    pub f_star: Option<f64>,
    /// Record a trace row every this many iterations (the last is always kept).
    pub record_every: usize,
    /// Stop before the gradient-call count would exceed this.
    pub grad_budget: Option<u64>,
    pub keep_states: bool,
    /// Record wall time; off makes traces byte-reproducible.
    pub timing: bool,
    pub seed: u64,
}

impl RunOptions {
    pub fn new(k_max: usize) -> Self {
        Self {
            k_max,
            w_star: None,
            f_star: None,
            record_every: 1,
            grad_budget: None,
            keep_states: false,
            timing: false,
            seed: 0,
        }
    }

    pub fn with_reference(mut self, w_star: DVector<f64>) -> Self {
        self.w_star = Some(w_star);
        self
    }

    pub fn with_f_star(mut self, f_star: f64) -> Self {
        self.f_star = Some(f_star);
        self
    }

    pub fn with_budget(mut self, grad_calls: u64) -> Self {
        self.grad_budget = Some(grad_calls);
        self
    }

    pub fn keeping_states(mut self) -> Self {
        self.keep_states = true;
        self
    }

    pub fn with_timing(mut self, on: bool) -> Self {
        self.timing = on;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn record_every(mut self, every: usize) -> Self {
        self.record_every = every.max(1);
        self
    }
}

/// `(w_k, z_k)` at time `T_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct IterState {
    pub k: usize,
    pub t_k: f64,
    pub w: DVector<f64>,
    pub z: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: RunTrace,
    pub w: DVector<f64>,
    pub z: DVector<f64>,
    /// Populated only with [`RunOptions::keeping_states`].
    pub states: Vec<IterState>,
}

/// Records rows, states and divergence for one run.
pub(crate) struct Recorder<'a, O: Objective + ?Sized> {
    obj: &'a O,
    opts: &'a RunOptions,
    f_star: f64,
    start: Instant,
    pub trace: RunTrace,
    pub states: Vec<IterState>,
}

impl<'a, O: Objective + ?Sized> Recorder<'a, O> {
    pub fn new(obj: &'a O, opts: &'a RunOptions, algo: &str, params: Vec<(String, f64)>) -> Self {
        let f_star = opts
            .f_star
            .or_else(|| opts.w_star.as_ref().map(|ws| obj.value(ws)))
            .unwrap_or(0.0);
        Self {
            obj,
            opts,
            f_star,
            start: Instant::now(),
            trace: RunTrace::new(algo, opts.seed, params),
            states: Vec::new(),
        }
    }

    /// Checks the iterate, records a trace row if due (or `force`), and keeps
    /// the state when requested.
    pub fn observe(&mut self, k: usize, t_k: f64, grad_calls: u64, w: &DVector<f64>, z: &DVector<f64>, force: bool) -> Result<()> {
        self.row(k, t_k, grad_calls, w, z, force)?;
        if self.opts.keep_states {
            self.states.push(IterState {
                k,
                t_k,
                w: w.clone(),
                z: z.clone(),
            });
        }
        Ok(())
    }

    /// Makes sure the final iterate appears in the trace.
    pub fn close(&mut self, k: usize, t_k: f64, grad_calls: u64, w: &DVector<f64>, z: &DVector<f64>) -> Result<()> {
        if self.trace.rows.last().map(|r| r.k) != Some(k) {
            self.row(k, t_k, grad_calls, w, z, true)?;
        }
        Ok(())
    }

    fn row(&mut self, k: usize, t_k: f64, grad_calls: u64, w: &DVector<f64>, z: &DVector<f64>, force: bool) -> Result<()> {
        let finite = w.iter().chain(z.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(self.diverged(k));
        }
        if !(force || k.is_multiple_of(self.opts.record_every) || k == self.opts.k_max) {
            return Ok(());
        }
        let gap = self.obj.value(w) - self.f_star;
        if !(gap <= DIVERGENCE_GAP) {
            return Err(self.diverged(k));
        }
        let dist = self.opts.w_star.as_ref().map_or(f64::NAN, |ws| (w - ws).norm());
        let time_s = if self.opts.timing {
            self.start.elapsed().as_secs_f64()
        } else {
            0.0
        };
        self.trace.rows.push(TraceRow {
            k,
            t_k,
            grad_calls,
            time_s,
            f_gap: gap,
            dist,
        });
        Ok(())
    }

    /// The caller fills in `last_w` via [`with_last_w`].
    fn diverged(&mut self, k: usize) -> Error {
        Error::Diverged {
            iteration: k,
            last_w: Vec::new(),
            trace: Box::new(std::mem::take(&mut self.trace)),
        }
    }
}

fn check_dims(d: usize, v: &DVector<f64>) -> Result<()> {
    if v.len() != d {
        Err(Error::DimensionMismatch {
            expected: d,
            got: v.len(),
        })
    } else {
        Ok(())
    }
}

/// Runs the discretized continuized method for `opts.k_max` jumps of
/// `schedule` (or until the gradient budget is used).
pub fn continuized_run<O, P>(
    algo: &str,
    obj: &O,
    w0: &DVector<f64>,
    z0: &DVector<f64>,
    schedule: &JumpSchedule,
    params: &P,
    opts: &RunOptions,
) -> Result<RunOutput>
where
    O: Objective + ?Sized,
    P: ContinuizedParams + ?Sized,
{
    let d = obj.dim();
    check_dims(d, w0)?;
    check_dims(d, z0)?;
    if schedule.len() < opts.k_max {
        return Err(Error::ScheduleTooShort {
            required: opts.k_max,
            available: schedule.len(),
        });
    }
    let metered = Metered::new(obj);
    let mut rec = Recorder::new(obj, opts, algo, params.describe());
    let mut w = w0.clone();
    let mut z = z0.clone();
    let mut last_w = w.clone();
    rec.observe(0, schedule.time(0), 0, &w, &z, true)?;
    let mut k_done = 0;
    for k in 0..opts.k_max {
        if let Some(b) = opts.grad_budget {
            if metered.counter().grad_calls + 1 > b {
                break;
            }
        }
        let (t_k, t_next) = (schedule.time(k), schedule.time(k + 1));
        let p = params.step(t_k, t_next);
        let v = &w + (&z - &w) * p.tau;
        let g = metered.gradient(&v);
        let z_next = &z + (&v - &z) * p.tau_prime - &g * p.gamma_prime;
        w = v - g * p.gamma;
        z = z_next;
        k_done = k + 1;
        if let Err(e) = rec.observe(k_done, t_next, metered.counter().grad_calls, &w, &z, false) {
            return Err(with_last_w(e, &last_w));
        }
        last_w.copy_from(&w);
    }
    rec.close(k_done, schedule.time(k_done), metered.counter().grad_calls, &w, &z)?;
    let mut trace = rec.trace;
    trace.func_calls = metered.counter().func_calls;
    Ok(RunOutput {
        trace,
        w,
        z,
        states: rec.states,
    })
}

pub(crate) fn with_last_w(e: Error, last_w: &DVector<f64>) -> Error {
    match e {
        Error::Diverged { iteration, trace, .. } => Error::Diverged {
            iteration,
            last_w: last_w.iter().copied().collect(),
            trace,
        },
        other => other,
    }
}

/// `w_{k+1} = w_k - step grad f(w_k)`; `T_k` is reported as `k`.
pub fn gd_run<O: Objective + ?Sized>(obj: &O, w0: &DVector<f64>, step: f64, opts: &RunOptions) -> Result<RunOutput> {
    check_dims(obj.dim(), w0)?;
    if !(step >= 0.0 && step.is_finite()) {
        return Err(invalid("step", "must be nonnegative and finite"));
    }
    let metered = Metered::new(obj);
    let mut rec = Recorder::new(obj, opts, "gd", vec![("step".into(), step)]);
    let mut w = w0.clone();
    let mut last_w = w.clone();
    rec.observe(0, 0.0, 0, &w, &w, true)?;
    let mut k_done = 0;
    for k in 0..opts.k_max {
        if let Some(b) = opts.grad_budget {
            if metered.counter().grad_calls + 1 > b {
                break;
            }
        }
        let g = metered.gradient(&w);
        w.axpy(-step, &g, 1.0);
        k_done = k + 1;
        if let Err(e) = rec.observe(k_done, k_done as f64, metered.counter().grad_calls, &w, &w, false) {
            return Err(with_last_w(e, &last_w));
        }
        last_w.copy_from(&w);
    }
    rec.close(k_done, k_done as f64, metered.counter().grad_calls, &w, &w)?;
    let mut trace = rec.trace;
    trace.func_calls = metered.counter().func_calls;
    Ok(RunOutput {
        trace,
        z: w.clone(),
        w,
        states: rec.states,
    })
}

/// Integrates the continuous process with explicit Euler steps of size at
/// most `dt`, landing exactly on every jump time, and applies the gradient
/// jumps there. Returns `(w, z)` at the origin and right after each of the
/// first `k_max` jumps.
pub fn simulate_continuized_euler<O, P>(
    obj: &O,
    w0: &DVector<f64>,
    z0: &DVector<f64>,
    schedule: &JumpSchedule,
    params: &P,
    dt: f64,
    k_max: usize,
) -> Result<Vec<(DVector<f64>, DVector<f64>)>>
where
    O: Objective + ?Sized,
    P: ContinuizedParams + ?Sized,
{
    if !(dt > 0.0) {
        return Err(invalid("dt", "must be positive"));
    }
    if schedule.len() < k_max {
        return Err(Error::ScheduleTooShort {
            required: k_max,
            available: schedule.len(),
        });
    }
    check_dims(obj.dim(), w0)?;
    check_dims(obj.dim(), z0)?;
    let mut w = w0.clone();
    let mut z = z0.clone();
    let mut path = Vec::with_capacity(k_max + 1);
    path.push((w.clone(), z.clone()));
    let mut t = schedule.time(0);
    for k in 1..=k_max {
        let t_jump = schedule.time(k);
        let steps = ((t_jump - t) / dt).ceil().max(1.0) as usize;
        let h = (t_jump - t) / steps as f64;
        for i in 0..steps {
            let s = t + i as f64 * h;
            let diff = &z - &w;
            let a = params.eta(s) * h;
            let b = params.eta_prime(s) * h;
            w.axpy(a, &diff, 1.0);
            z.axpy(-b, &diff, 1.0);
        }
        t = t_jump;
        let g = obj.gradient(&w);
        w.axpy(-params.gamma(t), &g, 1.0);
        z.axpy(-params.gamma_prime(t), &g, 1.0);
        path.push((w.clone(), z.clone()));
    }
    Ok(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationReport {
    pub dt: f64,
    pub jumps: usize,
    /// `max_k ||(w_k, z_k) - (w(T_k), z(T_k))|| / ||(w_k, z_k)||` over the
    /// jump times, with the continuous process integrated by Euler steps.
    pub max_rel_error: f64,
}

/// Compares the exact discrete iterates with an Euler integration of the
/// continuized process at each of the first `k_max` jump times.
pub fn discretization_error<O, P>(
    obj: &O,
    w0: &DVector<f64>,
    z0: &DVector<f64>,
    schedule: &JumpSchedule,
    params: &P,
    dt: f64,
    k_max: usize,
) -> Result<DiscretizationReport>
where
    O: Objective + ?Sized,
    P: ContinuizedParams + ?Sized,
{
    let path = simulate_continuized_euler(obj, w0, z0, schedule, params, dt, k_max)?;
    let out = continuized_run("continuized", obj, w0, z0, schedule, params, &RunOptions::new(k_max).keeping_states())?;
    let mut worst: f64 = 0.0;
    for (s, (w, z)) in out.states.iter().zip(&path).skip(1) {
        let err = ((&s.w - w).norm_squared() + (&s.z - z).norm_squared()).sqrt();
        let scale = (s.w.norm_squared() + s.z.norm_squared()).sqrt();
        worst = worst.max(err / scale.max(f64::MIN_POSITIVE));
    }
    Ok(DiscretizationReport {
        dt,
        jumps: k_max,
        max_rel_error: worst,
    })
}

/// `exp(rho sqrt(mu/L) T_k) (f(w_k) - f* + mu/2 ||z_k - w*||^2)` per state.
pub fn lyapunov_monitor_strong<O: Objective + ?Sized>(
    obj: &O,
    states: &[IterState],
    schedule: &StrongQuasarSchedule,
    w_star: &DVector<f64>,
    f_star: f64,
) -> Vec<f64> {
    let r = schedule.rho * schedule.rate();
    states
        .iter()
        .map(|s| {
            let a = (r * s.t_k).exp();
            a * (obj.value(&s.w) - f_star) + 0.5 * schedule.mu * a * (&s.z - w_star).norm_squared()
        })
        .collect()
}

/// `rho^2 T_k^2 / (4L) (f(w_k) - f*) + 1/2 ||z_k - w*||^2` per state.
pub fn lyapunov_monitor_quasar<O: Objective + ?Sized>(
    obj: &O,
    states: &[IterState],
    schedule: &QuasarSchedule,
    w_star: &DVector<f64>,
    f_star: f64,
) -> Vec<f64> {
    states
        .iter()
        .map(|s| {
            let a = (schedule.rho * s.t_k).powi(2) / (4.0 * schedule.l);
            a * (obj.value(&s.w) - f_star) + 0.5 * (&s.z - w_star).norm_squared()
        })
        .collect()
}
