//! Stochastic GLMtron and its continuized acceleration, both driven by one
//! stochastic pseudo-gradient `g(w; xi) = (sigma(w.x) - y) x` per iteration.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::continuized::{coupled_mixing, ContinuizedParams, StepParams};
use crate::error::{invalid, Error, Result};
use crate::event_clock::{build_schedule, JumpSchedule, SeededRng};
use crate::objectives::{estimate_glm_constants, GlmProblem};
use crate::trace::{RecoveryRow, RecoveryTrace};

/// Distance above which a recovery run is declared divergent.
pub const DIVERGENCE_DIST: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlmtronParams {
    pub mu: f64,
    pub r2: f64,
    pub kappa_tilde: f64,
}

impl GlmtronParams {
    /// Rejects `kappa_tilde > R^2 / mu` (beyond a `1e-9` relative slack),
    /// which no valid set of constants can produce.
    pub fn new(mu: f64, r2: f64, kappa_tilde: f64) -> Result<Self> {
        for (name, v) in [("mu", mu), ("R2", r2), ("kappa_tilde", kappa_tilde)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("must be positive and finite, got {v}")));
            }
        }
        let kappa = r2 / mu;
        if kappa_tilde > kappa * (1.0 + 1e-9) {
            return Err(invalid(
                "kappa_tilde",
                format!("{kappa_tilde} exceeds R2/mu = {kappa}"),
            ));
        }
        Ok(Self { mu, r2, kappa_tilde })
    }

    /// Estimates the constants at `w_ref` from `mc_samples` Gaussian draws.
    pub fn estimate(problem: &GlmProblem, w_ref: &DVector<f64>, mc_samples: usize, rng: &mut SeededRng) -> Result<Self> {
        let c = estimate_glm_constants(problem, w_ref, mc_samples, rng)?;
        Self::new(c.mu, c.r2, c.kappa_tilde)
    }

    /// `sqrt(mu / (kappa_tilde R^2))`.
    pub fn rate(&self) -> f64 {
        (self.mu / (self.kappa_tilde * self.r2)).sqrt()
    }
}

impl ContinuizedParams for GlmtronParams {
    fn eta(&self, _t: f64) -> f64 {
        self.rate()
    }
    fn eta_prime(&self, _t: f64) -> f64 {
        self.rate()
    }
    fn gamma(&self, _t: f64) -> f64 {
        1.0 / self.r2
    }
    fn gamma_prime(&self, _t: f64) -> f64 {
        1.0 / (self.mu * self.kappa_tilde * self.r2).sqrt()
    }
    fn mixing(&self, t_k: f64, t_next: f64) -> (f64, f64) {
        coupled_mixing(self.rate(), self.rate(), t_next - t_k)
    }
    fn describe(&self) -> Vec<(String, f64)> {
        vec![
            ("mu".into(), self.mu),
            ("R2".into(), self.r2),
            ("kappa_tilde".into(), self.kappa_tilde),
        ]
    }
}

/// With `e = exp(-2 sqrt(mu/(kappa_tilde R^2)) dT)`: `tau = (1-e)/2`,
/// `tau' = (1-e)/(1+e)`, `gamma = 1/R^2`, `gamma' = 1/sqrt(mu kappa_tilde R^2)`.
pub fn accel_glmtron_step_params(p: &GlmtronParams, dt: f64) -> Result<StepParams> {
    if !(dt >= 0.0) {
        return Err(invalid("dT", "must be nonnegative"));
    }
    Ok(p.step(0.0, dt))
}

#[derive(Debug, Clone)]
pub struct RecoveryOptions {
    pub k_max: usize,
    pub record_every: usize,
    /// Stop as soon as the distance drops to this value.
    pub stop_at: Option<f64>,
    pub keep_states: bool,
    pub seed: u64,
}

impl RecoveryOptions {
    pub fn new(k_max: usize) -> Self {
        Self {
            k_max,
            record_every: 1,
            stop_at: None,
            keep_states: false,
            seed: 0,
        }
    }

    pub fn stop_at(mut self, dist: f64) -> Self {
        self.stop_at = Some(dist);
        self
    }

    pub fn record_every(mut self, every: usize) -> Self {
        self.record_every = every.max(1);
        self
    }

    pub fn keeping_states(mut self) -> Self {
        self.keep_states = true;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// `(T_k, w_k, z_k)` of a recovery run.
pub type RecoveryState = (f64, DVector<f64>, DVector<f64>);

#[derive(Debug, Clone)]
pub struct RecoveryOutput {
    pub trace: RecoveryTrace,
    pub w: DVector<f64>,
    pub z: DVector<f64>,
    pub states: Vec<RecoveryState>,
}

/// Adds `scale * g(w; xi_i)` to `target`.
fn add_pseudo_gradient(problem: &GlmProblem, w: &DVector<f64>, i: usize, scale: f64, targets: &mut [(&mut DVector<f64>, f64)]) {
    let row = problem.x.row(i);
    let z = row.dot(&w.transpose());
    let r = problem.link.eval(z) - problem.y[i];
    if r == 0.0 {
        return;
    }
    for (t, coef) in targets.iter_mut() {
        let c = scale * *coef * r;
        for (tj, xj) in t.iter_mut().zip(row.iter()) {
            *tj += c * xj;
        }
    }
}

struct RecoveryRecorder<'a> {
    opts: &'a RecoveryOptions,
    w_star: &'a DVector<f64>,
    trace: RecoveryTrace,
    states: Vec<RecoveryState>,
}

impl<'a> RecoveryRecorder<'a> {
    fn new(opts: &'a RecoveryOptions, problem: &'a GlmProblem, algo: &str) -> Self {
        Self {
            opts,
            w_star: &problem.w_star,
            trace: RecoveryTrace {
                algo: algo.into(),
                seed: opts.seed,
                link_alpha: problem.link.increase_alpha(),
                rows: Vec::new(),
            },
            states: Vec::new(),
        }
    }

    /// Returns `Ok(true)` when the run should stop early.
    fn observe(&mut self, k: usize, t_k: f64, w: &DVector<f64>, z: &DVector<f64>) -> Result<bool> {
        let dist = (w - self.w_star).norm();
        if !(dist <= DIVERGENCE_DIST) || z.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                iteration: k,
                last_w: Vec::new(),
                trace: Box::default(),
            });
        }
        let hit = self.opts.stop_at.is_some_and(|s| dist <= s);
        if k.is_multiple_of(self.opts.record_every) || k == self.opts.k_max || hit {
            self.trace.rows.push(RecoveryRow {
                k,
                t_k,
                pg_calls: k as u64,
                dist,
            });
        }
        if self.opts.keep_states {
            self.states.push((t_k, w.clone(), z.clone()));
        }
        Ok(hit)
    }
}

/// `w <- w - step g(w; xi)` with `xi` uniform over the samples.
pub fn glmtron_run(
    problem: &GlmProblem,
    w0: &DVector<f64>,
    step: f64,
    rng: &mut SeededRng,
    opts: &RecoveryOptions,
) -> Result<RecoveryOutput> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(invalid("step", "must be positive and finite"));
    }
    check_dim(problem, w0)?;
    let mut rec = RecoveryRecorder::new(opts, problem, "glmtron");
    let mut w = w0.clone();
    let n = problem.n();
    let mut stop = rec.observe(0, 0.0, &w, &w)?;
    let mut k = 0;
    while k < opts.k_max && !stop {
        let i = rng.index(n);
        let snapshot = w.clone();
        add_pseudo_gradient(problem, &snapshot, i, -step, &mut [(&mut w, 1.0)]);
        k += 1;
        stop = rec.observe(k, k as f64, &w, &w).map_err(|e| fill_last(e, &snapshot, &rec.trace))?;
    }
    Ok(RecoveryOutput {
        trace: rec.trace,
        z: w.clone(),
        w,
        states: rec.states,
    })
}

/// Continuized acceleration with one pseudo-gradient per jump of `schedule`.
pub fn accel_glmtron_run(
    problem: &GlmProblem,
    w0: &DVector<f64>,
    z0: &DVector<f64>,
    params: &GlmtronParams,
    schedule: &JumpSchedule,
    rng: &mut SeededRng,
    opts: &RecoveryOptions,
) -> Result<RecoveryOutput> {
    check_dim(problem, w0)?;
    check_dim(problem, z0)?;
    if schedule.len() < opts.k_max {
        return Err(Error::ScheduleTooShort {
            required: opts.k_max,
            available: schedule.len(),
        });
    }
    let mut rec = RecoveryRecorder::new(opts, problem, "accel-glmtron");
    let n = problem.n();
    let mut w = w0.clone();
    let mut z = z0.clone();
    let mut stop = rec.observe(0, schedule.time(0), &w, &z)?;
    let mut k = 0;
    while k < opts.k_max && !stop {
        let (t_k, t_next) = (schedule.time(k), schedule.time(k + 1));
        let p = params.step(t_k, t_next);
        let v = &w + (&z - &w) * p.tau;
        // z <- z + tau' (v - z), then both take the pseudo-gradient at v
        z.axpy(p.tau_prime, &(&v - &z), 1.0);
        let last = std::mem::replace(&mut w, v.clone());
        let i = rng.index(n);
        add_pseudo_gradient(problem, &v, i, -1.0, &mut [(&mut w, p.gamma), (&mut z, p.gamma_prime)]);
        k += 1;
        stop = rec.observe(k, t_next, &w, &z).map_err(|e| fill_last(e, &last, &rec.trace))?;
    }
    Ok(RecoveryOutput {
        trace: rec.trace,
        w,
        z,
        states: rec.states,
    })
}

fn fill_last(e: Error, last_w: &DVector<f64>, _trace: &RecoveryTrace) -> Error {
    match e {
        Error::Diverged { iteration, .. } => Error::Diverged {
            iteration,
            last_w: last_w.iter().copied().collect(),
            trace: Box::default(),
        },
        other => other,
    }
}

fn check_dim(problem: &GlmProblem, v: &DVector<f64>) -> Result<()> {
    if v.len() != problem.d() {
        return Err(Error::DimensionMismatch {
            expected: problem.d(),
            got: v.len(),
        });
    }
    Ok(())
}

/// `exp(rate T_k) (1/2 ||w_k - w*||^2 + mu/2 ||z_k - w*||^2_{H^-1})` with the
/// metric `H` held fixed (typically `H(w_0)`).
pub fn lyapunov_monitor_glm(
    states: &[RecoveryState],
    params: &GlmtronParams,
    h: &DMatrix<f64>,
    w_star: &DVector<f64>,
) -> Result<Vec<f64>> {
    let chol = h.clone().cholesky().ok_or(Error::RankDeficient {
        min_eigenvalue: crate::linalg::lambda_min(h),
    })?;
    let rate = params.rate();
    Ok(states
        .iter()
        .map(|(t, w, z)| {
            let dz = z - w_star;
            let h_inv_dz = chol.solve(&dz);
            (rate * t).exp() * (0.5 * (w - w_star).norm_squared() + 0.5 * params.mu * dz.dot(&h_inv_dz))
        })
        .collect())
}

/// Ranking of a recovery configuration across runs: median iterations to
/// reach the target (runs that miss count as `k_max + 1`), then median final
/// distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryScore {
    pub median_hit: f64,
    pub median_final_dist: f64,
}

impl RecoveryScore {
    pub fn from_traces(traces: &[RecoveryTrace], target: f64, k_max: usize) -> Self {
        let mut hits: Vec<f64> = traces
            .iter()
            .map(|t| t.first_hit(target).map_or(k_max as f64 + 1.0, |k| k as f64))
            .collect();
        let mut finals: Vec<f64> = traces.iter().map(|t| t.final_dist()).collect();
        Self {
            median_hit: median(&mut hits),
            median_final_dist: median(&mut finals),
        }
    }

    pub fn diverged() -> Self {
        Self {
            median_hit: f64::INFINITY,
            median_final_dist: f64::INFINITY,
        }
    }

    pub fn better_than(&self, other: &Self) -> bool {
        (self.median_hit, self.median_final_dist) < (other.median_hit, other.median_final_dist)
    }
}

/// Median with NaN sorted last; `NaN` for an empty slice.
pub fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

const SCHEDULE_STREAM_SALT: u64 = 0x5c4e_d01e_0000_0001;

/// Grid used to tune both recovery methods: `{1, 2, 5} x 10^q`, `q` in `-2..=4`.
pub fn recovery_grid() -> Vec<f64> {
    (-2..=4)
        .flat_map(|q| [1.0, 2.0, 5.0].map(|m| m * 10f64.powi(q)))
        .collect()
}

/// GLMtron steps `1/R^2` for `R^2` on the grid.
pub fn glmtron_step_candidates(grid: &[f64]) -> Vec<f64> {
    grid.iter().map(|r2| 1.0 / r2).collect()
}

/// Every `(mu, R^2, kappa_tilde)` on the grid with `mu < R^2` and
/// `kappa_tilde <= R^2/mu`.
pub fn accel_candidates(grid: &[f64]) -> Vec<GlmtronParams> {
    let mut out = Vec::new();
    for &mu in grid {
        for &r2 in grid.iter().filter(|&&r2| r2 > mu) {
            out.extend(grid.iter().filter_map(|&kt| GlmtronParams::new(mu, r2, kt).ok()));
        }
    }
    out
}

/// Protocol shared by the recovery experiments. Run `r` draws its sample
/// indices from `(master_seed, config_id, r)`, the same stream for every
/// candidate and both methods; the accelerated method's jump schedule comes
/// from a separate stream.
#[derive(Debug, Clone)]
pub struct RecoveryProtocol {
    pub k_max: usize,
    pub runs: usize,
    pub target: f64,
    pub master_seed: u64,
    pub config_id: u64,
    /// End each run once it reaches `target` (tuning); off to record full traces.
    pub stop_at_target: bool,
    schedules: Vec<JumpSchedule>,
}

enum Method<'a> {
    Glmtron(f64),
    Accel(&'a GlmtronParams),
}

impl RecoveryProtocol {
    pub fn new(k_max: usize, runs: usize, target: f64, master_seed: u64, config_id: u64) -> Result<Self> {
        let schedules = (0..runs)
            .map(|r| {
                let mut rng = SeededRng::for_run(master_seed, config_id ^ SCHEDULE_STREAM_SALT, r as u64);
                build_schedule(&mut rng, k_max)
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            k_max,
            runs,
            target,
            master_seed,
            config_id,
            stop_at_target: true,
            schedules,
        })
    }

    fn run(&self, problem: &GlmProblem, w0: &DVector<f64>, method: &Method, r: usize, k_max: usize) -> Result<RecoveryOutput> {
        let mut rng = SeededRng::for_run(self.master_seed, self.config_id, r as u64);
        let mut opts = RecoveryOptions::new(k_max).with_seed(r as u64);
        if self.stop_at_target {
            opts = opts.stop_at(self.target);
        }
        match method {
            Method::Glmtron(step) => glmtron_run(problem, w0, *step, &mut rng, &opts),
            Method::Accel(p) => accel_glmtron_run(problem, w0, w0, p, &self.schedules[r], &mut rng, &opts),
        }
    }

    /// All runs at the full budget; `None` if any run diverges.
    fn traces(&self, problem: &GlmProblem, w0: &DVector<f64>, method: &Method) -> Option<Vec<RecoveryTrace>> {
        (0..self.runs)
            .map(|r| self.run(problem, w0, method, r, self.k_max).ok().map(|o| o.trace))
            .collect()
    }

    pub fn glmtron_traces(&self, problem: &GlmProblem, w0: &DVector<f64>, step: f64) -> Option<Vec<RecoveryTrace>> {
        self.traces(problem, w0, &Method::Glmtron(step))
    }

    pub fn accel_traces(&self, problem: &GlmProblem, w0: &DVector<f64>, params: &GlmtronParams) -> Option<Vec<RecoveryTrace>> {
        self.traces(problem, w0, &Method::Accel(params))
    }

    /// Cheap screen against the current best median: runs are capped at
    /// `floor(best)` iterations and the candidate is dropped once more than
    /// half of them miss, since its median can then no longer beat `best`.
    fn may_beat(&self, problem: &GlmProblem, w0: &DVector<f64>, method: &Method, best: f64) -> bool {
        let cap = (best.floor() as usize).min(self.k_max);
        let mut misses = 0;
        for r in 0..self.runs {
            match self.run(problem, w0, method, r, cap) {
                Ok(o) if o.trace.first_hit(self.target).is_some() => {}
                Ok(_) => {
                    misses += 1;
                    if 2 * misses > self.runs {
                        return false;
                    }
                }
                Err(_) => return false,
            }
        }
        true
    }

    fn tune<'a, C>(
        &self,
        problem: &GlmProblem,
        w0: &DVector<f64>,
        candidates: &'a [C],
        method: impl Fn(&'a C) -> Method<'a>,
    ) -> Option<(&'a C, RecoveryScore)> {
        let mut best: Option<(&C, RecoveryScore)> = None;
        for c in candidates {
            let m = method(c);
            if let Some((_, b)) = &best {
                if !self.may_beat(problem, w0, &m, b.median_hit) {
                    continue;
                }
            }
            let Some(traces) = self.traces(problem, w0, &m) else { continue };
            let sc = RecoveryScore::from_traces(&traces, self.target, self.k_max);
            if best.as_ref().is_none_or(|(_, b)| sc.better_than(b)) {
                best = Some((c, sc));
            }
        }
        best
    }

    /// Best GLMtron step by median iterations to the target (first wins ties).
    pub fn tune_glmtron_step(&self, problem: &GlmProblem, w0: &DVector<f64>, steps: &[f64]) -> Option<(f64, RecoveryScore)> {
        self.tune(problem, w0, steps, |s| Method::Glmtron(*s)).map(|(s, sc)| (*s, sc))
    }

    /// Best accelerated configuration by the same score (first wins ties).
    pub fn tune_accel(
        &self,
        problem: &GlmProblem,
        w0: &DVector<f64>,
        candidates: &[GlmtronParams],
    ) -> Option<(GlmtronParams, RecoveryScore)> {
        self.tune(problem, w0, candidates, Method::Accel).map(|(p, sc)| (*p, sc))
    }
}
