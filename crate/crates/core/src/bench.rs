//! Benchmark harness: grid search over `(L, mu, rho)`, multi-run averaging
//! and CSV/JSON report emission.
//!
//! Every run is addressed by `(master_seed, config_id, run_index)`, so a
//! sweep is reproducible regardless of how work is split across threads.
//! Thread count is capped by the `QUASAR_OPT_WORKERS` environment variable.

use std::fmt;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::continuized::{continuized_run, gd_run, QuasarSchedule, RunOptions, RunOutput, StrongQuasarSchedule};
use crate::error::{Error, Result};
use crate::event_clock::{build_schedule, stable_id, JumpSchedule, SeededRng};
use crate::glmtron::{
    accel_candidates, glmtron_step_candidates, recovery_grid, GlmtronParams, RecoveryProtocol, RecoveryScore,
};
use crate::hss::{hss_agd_quasar, hss_agd_strong, HssOptions};
use crate::objectives::{empirical_objective, generate_problem, initial_point, GlmProblem, LinkFunction, Objective};
use crate::trace::{write_recovery_traces, write_run_traces, RecoveryTrace, RunTrace, TraceRow};

pub const WORKERS_ENV: &str = "QUASAR_OPT_WORKERS";

const PROBLEM_STREAM: u64 = u64::MAX;
const INIT_STREAM: u64 = u64::MAX - 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub q_min: i32,
    pub q_max: i32,
    pub rho_set: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            q_min: -2,
            q_max: 4,
            rho_set: vec![0.01, 0.1, 0.5],
        }
    }
}

impl GridSpec {
    /// `10^q` and `5 10^q` for each `q`, ascending. Values are parsed from
    /// decimal literals so that e.g. `0.01` is the nearest double.
    pub fn values(&self) -> Vec<f64> {
        (self.q_min..=self.q_max)
            .flat_map(|q| [format!("1e{q}"), format!("5e{q}")])
            .map(|s| s.parse().expect("float literal"))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    #[serde(rename = "L")]
    pub l: f64,
    /// `NaN` when the algorithm does not use it.
    pub mu: f64,
    pub rho: f64,
}

/// All `(L, mu, rho)` with `L > mu`, ordered by `L`, then `mu`, then `rho`.
pub fn expand_grid(spec: &GridSpec) -> Result<Vec<GridPoint>> {
    let values = spec.values();
    let mut rhos = spec.rho_set.clone();
    rhos.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    for &l in &values {
        for &mu in values.iter().filter(|&&mu| l > mu) {
            out.extend(rhos.iter().map(|&rho| GridPoint { l, mu, rho }));
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyGrid);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algo {
    Gd,
    ContinuizedQuasar,
    ContinuizedStrong,
    HssStrong,
    HssQuasar,
    Glmtron,
    AccelGlmtron,
}

impl Algo {
    pub const ALL: [Algo; 7] = [
        Algo::Gd,
        Algo::ContinuizedQuasar,
        Algo::ContinuizedStrong,
        Algo::HssStrong,
        Algo::HssQuasar,
        Algo::Glmtron,
        Algo::AccelGlmtron,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algo::Gd => "gd",
            Algo::ContinuizedQuasar => "continuized-quasar",
            Algo::ContinuizedStrong => "continuized-strong",
            Algo::HssStrong => "hss-strong",
            Algo::HssQuasar => "hss-quasar",
            Algo::Glmtron => "glmtron",
            Algo::AccelGlmtron => "accel-glmtron",
        }
    }

    /// Runs differ from one another only for these.
    pub fn is_stochastic(self) -> bool {
        matches!(
            self,
            Algo::ContinuizedQuasar | Algo::ContinuizedStrong | Algo::Glmtron | Algo::AccelGlmtron
        )
    }

    pub fn is_recovery(self) -> bool {
        matches!(self, Algo::Glmtron | Algo::AccelGlmtron)
    }

    fn uses_mu(self) -> bool {
        matches!(self, Algo::ContinuizedStrong | Algo::HssStrong)
    }

    fn uses_rho(self) -> bool {
        !matches!(self, Algo::Gd)
    }

    /// Grid tuples the algorithm distinguishes, in grid order, with unused
    /// coordinates set to `NaN`.
    pub fn tuples(self, grid: &[GridPoint]) -> Vec<GridPoint> {
        let mut out: Vec<GridPoint> = Vec::new();
        for p in grid {
            let q = GridPoint {
                l: p.l,
                mu: if self.uses_mu() { p.mu } else { f64::NAN },
                rho: if self.uses_rho() { p.rho } else { f64::NAN },
            };
            let same = |a: f64, b: f64| a == b || (a.is_nan() && b.is_nan());
            if !out.iter().any(|o| same(o.l, q.l) && same(o.mu, q.mu) && same(o.rho, q.rho)) {
                out.push(q);
            }
        }
        out
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algo::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreMetric {
    /// Mean over runs of the final `f(w) - f*`.
    #[default]
    FinalGap,
    /// Mean over runs of the average recorded `f(w) - f*`.
    Auc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub link: String,
    #[serde(default)]
    pub alpha: Option<f64>,
    pub n: usize,
    pub d: usize,
    pub algorithms: Vec<Algo>,
    /// Iteration budget; defaults to 3000 for deterministic and 10^4 for
    /// stochastic methods, or to `grad_budget` when that is set.
    #[serde(default)]
    pub iterations: Option<usize>,
    #[serde(default)]
    pub grad_budget: Option<u64>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    /// Runs used to score grid tuples; defaults to `runs`.
    #[serde(default)]
    pub score_runs: Option<usize>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub score: ScoreMetric,
    /// Target accuracy of `hss-quasar`.
    #[serde(default = "default_eps")]
    pub eps: f64,
    /// Record wall time; off by default so reports are byte-reproducible.
    #[serde(default)]
    pub timing: bool,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    /// Distance at which recovery runs count as done.
    #[serde(default = "default_recovery_target")]
    pub recovery_target: f64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn default_runs() -> usize {
    10
}
fn default_eps() -> f64 {
    1e-6
}
fn default_record_every() -> usize {
    1
}
fn default_recovery_target() -> f64 {
    1e-3
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn new(link: &str, alpha: Option<f64>, n: usize, d: usize, algorithms: Vec<Algo>) -> Self {
        Self {
            link: link.into(),
            alpha,
            n,
            d,
            algorithms,
            iterations: None,
            grad_budget: None,
            runs: default_runs(),
            score_runs: None,
            master_seed: 0,
            grid: GridSpec::default(),
            score: ScoreMetric::default(),
            eps: default_eps(),
            timing: false,
            record_every: default_record_every(),
            recovery_target: default_recovery_target(),
            output: default_output(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.into()));
        if self.runs == 0 {
            return fail("runs must be at least 1");
        }
        if self.score_runs.is_some_and(|s| s == 0 || s > self.runs) {
            return fail("score_runs must be in 1..=runs");
        }
        if self.n == 0 || self.d == 0 {
            return fail("n and d must be positive");
        }
        if self.algorithms.is_empty() {
            return fail("no algorithms selected");
        }
        if self.record_every == 0 {
            return fail("record_every must be positive");
        }
        if self.iterations == Some(0) || self.grad_budget == Some(0) {
            return fail("budgets must be positive");
        }
        self.link_function()?;
        Ok(())
    }

    pub fn link_function(&self) -> Result<LinkFunction> {
        LinkFunction::parse(&self.link, self.alpha)
    }

    /// FNV-1a of the canonical JSON encoding, with the output path excluded.
    pub fn config_id(&self) -> u64 {
        let mut c = self.clone();
        c.output = PathBuf::new();
        stable_id(serde_json::to_string(&c).expect("config serializes").as_bytes())
    }

    pub fn k_max(&self, algo: Algo) -> usize {
        self.iterations.unwrap_or_else(|| match self.grad_budget {
            Some(b) => b as usize,
            None if algo.is_stochastic() => 10_000,
            None => 3_000,
        })
    }

    fn runs_for(&self, algo: Algo, scoring: bool) -> usize {
        if !algo.is_stochastic() {
            1
        } else if scoring {
            self.score_runs.unwrap_or(self.runs)
        } else {
            self.runs
        }
    }

    /// The synthetic problem and initial point shared by every run.
    pub fn problem(&self) -> Result<(GlmProblem, DVector<f64>)> {
        let problem = generate_problem(&mut SeededRng::new(self.master_seed, PROBLEM_STREAM), self.n, self.d, self.link_function()?)?;
        Ok((problem, standard_initial_point(self.master_seed, self.d)))
    }
}

/// Initial point `1e-2 N(0, I)` drawn from the stream reserved for it.
pub fn standard_initial_point(master_seed: u64, d: usize) -> DVector<f64> {
    initial_point(&mut SeededRng::new(master_seed, INIT_STREAM), d)
}

/// Thread pool sized by `QUASAR_OPT_WORKERS` when set to a positive integer.
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = std::env::var(WORKERS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if n > 0 {
            b = b.num_threads(n);
        }
    }
    b.build().map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Runs one optimization algorithm at one grid point. `schedule` is required
/// for the continuized methods.
pub fn run_once<O: Objective + ?Sized>(
    algo: Algo,
    obj: &O,
    w0: &DVector<f64>,
    point: &GridPoint,
    eps: f64,
    schedule: Option<&JumpSchedule>,
    opts: &RunOptions,
) -> Result<RunOutput> {
    let need_schedule = || schedule.ok_or_else(|| Error::Config(format!("{algo} needs a jump schedule")));
    match algo {
        Algo::Gd => gd_run(obj, w0, 1.0 / point.l, opts),
        Algo::ContinuizedQuasar => {
            let p = QuasarSchedule::new(point.rho, point.l)?;
            continuized_run(algo.name(), obj, w0, w0, need_schedule()?, &p, opts)
        }
        Algo::ContinuizedStrong => {
            let p = StrongQuasarSchedule::new(point.rho, point.mu, point.l)?;
            continuized_run(algo.name(), obj, w0, w0, need_schedule()?, &p, opts)
        }
        Algo::HssStrong => hss_agd_strong(obj, w0, w0, point.rho, point.mu, point.l, opts, HssOptions::default()),
        Algo::HssQuasar => hss_agd_quasar(obj, w0, w0, point.rho, point.l, eps, opts, HssOptions::default()),
        Algo::Glmtron | Algo::AccelGlmtron => Err(Error::Config(format!("{algo} is a recovery method"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridScore {
    pub algo: Algo,
    pub point: GridPoint,
    /// `+inf` when any scoring run diverged.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgoResult {
    pub algo: Algo,
    pub best: GridPoint,
    pub score: f64,
    /// One trace per run at `best`; runs that diverged are absent.
    pub traces: Vec<RunTrace>,
    pub diverged_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryResult {
    pub algo: Algo,
    pub best_params: Vec<(String, f64)>,
    pub score: RecoveryScore,
    pub traces: Vec<RecoveryTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResults {
    pub config: ExperimentConfig,
    pub config_id: u64,
    pub grid_scores: Vec<GridScore>,
    pub algorithms: Vec<AlgoResult>,
    pub recovery: Vec<RecoveryResult>,
}

impl ExperimentResults {
    pub fn algo(&self, algo: Algo) -> Option<&AlgoResult> {
        self.algorithms.iter().find(|r| r.algo == algo)
    }

    pub fn recovery(&self, algo: Algo) -> Option<&RecoveryResult> {
        self.recovery.iter().find(|r| r.algo == algo)
    }
}

struct Sweep<'a> {
    cfg: &'a ExperimentConfig,
    config_id: u64,
    problem: &'a GlmProblem,
    w0: &'a DVector<f64>,
}

impl Sweep<'_> {
    fn schedule(&self, algo: Algo, run: usize) -> Result<Option<JumpSchedule>> {
        if !matches!(algo, Algo::ContinuizedQuasar | Algo::ContinuizedStrong) {
            return Ok(None);
        }
        let mut rng = SeededRng::for_run(self.cfg.master_seed, self.config_id, run as u64);
        build_schedule(&mut rng, self.cfg.k_max(algo)).map(Some)
    }

    fn options(&self, algo: Algo, run: usize, record_every: usize) -> RunOptions {
        let mut o = RunOptions::new(self.cfg.k_max(algo))
            .with_reference(self.problem.w_star.clone())
            .with_timing(self.cfg.timing)
            .with_seed(run as u64)
            .record_every(record_every);
        if let Some(b) = self.cfg.grad_budget {
            o = o.with_budget(b);
        }
        o
    }

    fn run(&self, algo: Algo, point: &GridPoint, run: usize, schedule: Option<&JumpSchedule>, record_every: usize) -> Result<RunTrace> {
        let obj = empirical_objective(self.problem);
        let opts = self.options(algo, run, record_every);
        run_once(algo, &obj, self.w0, point, self.cfg.eps, schedule, &opts).map(|o| o.trace)
    }

    fn score_of(&self, trace: &RunTrace) -> f64 {
        match self.cfg.score {
            ScoreMetric::FinalGap => trace.final_f_gap(),
            ScoreMetric::Auc => trace.rows.iter().map(|r| r.f_gap).sum::<f64>() / trace.rows.len().max(1) as f64,
        }
    }
}

/// Sweeps every selected algorithm over the grid, picks the best tuple per
/// algorithm (ties go to smaller `L`, then `mu`, then `rho`) and re-runs it
/// for all runs. Recovery methods are tuned with the recovery protocol.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResults> {
    cfg.validate()?;
    let grid = expand_grid(&cfg.grid)?;
    let (problem, w0) = cfg.problem()?;
    let sweep = Sweep {
        cfg,
        config_id: cfg.config_id(),
        problem: &problem,
        w0: &w0,
    };
    let pool = worker_pool()?;
    pool.install(|| {
        let opt_algos: Vec<Algo> = cfg.algorithms.iter().copied().filter(|a| !a.is_recovery()).collect();
        let score_every = match cfg.score {
            ScoreMetric::FinalGap => usize::MAX,
            ScoreMetric::Auc => cfg.record_every,
        };

        // (algo, run) -> schedule, shared by every tuple
        let schedules: Vec<(Algo, usize, Option<JumpSchedule>)> = opt_algos
            .iter()
            .flat_map(|&a| (0..cfg.runs_for(a, false)).map(move |r| (a, r)))
            .map(|(a, r)| sweep.schedule(a, r).map(|s| (a, r, s)))
            .collect::<Result<_>>()?;
        let schedule_for = |a: Algo, r: usize| {
            schedules
                .iter()
                .find(|(sa, sr, _)| *sa == a && *sr == r)
                .and_then(|(_, _, s)| s.as_ref())
        };

        let jobs: Vec<(Algo, GridPoint, usize)> = opt_algos
            .iter()
            .flat_map(|&a| {
                let runs = cfg.runs_for(a, true);
                a.tuples(&grid).into_iter().flat_map(move |p| (0..runs).map(move |r| (a, p, r)))
            })
            .collect();
        let scores: Vec<f64> = jobs
            .par_iter()
            .map(|(a, p, r)| {
                sweep
                    .run(*a, p, *r, schedule_for(*a, *r), score_every)
                    .map_or(f64::INFINITY, |t| sweep.score_of(&t))
            })
            .collect();

        let mut grid_scores: Vec<GridScore> = Vec::new();
        for ((a, p, r), s) in jobs.iter().zip(&scores) {
            if *r == 0 {
                grid_scores.push(GridScore {
                    algo: *a,
                    point: *p,
                    score: 0.0,
                });
            }
            let g = grid_scores.last_mut().expect("run 0 comes first");
            g.score += s / cfg.runs_for(*a, true) as f64;
        }
        for g in &mut grid_scores {
            if g.score.is_nan() {
                g.score = f64::INFINITY;
            }
        }

        let algorithms = opt_algos
            .par_iter()
            .map(|&a| {
                let best = grid_scores
                    .iter()
                    .filter(|g| g.algo == a)
                    .fold(None::<&GridScore>, |b, g| match b {
                        Some(b) if !(g.score < b.score) => Some(b),
                        _ => Some(g),
                    })
                    .expect("every algorithm has tuples");
                let outcomes: Vec<Result<RunTrace>> = (0..cfg.runs_for(a, false))
                    .into_par_iter()
                    .map(|r| sweep.run(a, &best.point, r, schedule_for(a, r), cfg.record_every))
                    .collect();
                let diverged_runs = outcomes.iter().filter(|o| o.is_err()).count();
                AlgoResult {
                    algo: a,
                    best: best.point,
                    score: best.score,
                    traces: outcomes.into_iter().filter_map(Result::ok).collect(),
                    diverged_runs,
                }
            })
            .collect();

        let recovery = cfg
            .algorithms
            .iter()
            .copied()
            .filter(|a| a.is_recovery())
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&a| run_recovery(cfg, sweep.config_id, &problem, &w0, a))
            .collect::<Result<Vec<_>>>()?;

        Ok(ExperimentResults {
            config: cfg.clone(),
            config_id: sweep.config_id,
            grid_scores,
            algorithms,
            recovery,
        })
    })
}

fn run_recovery(cfg: &ExperimentConfig, config_id: u64, problem: &GlmProblem, w0: &DVector<f64>, algo: Algo) -> Result<RecoveryResult> {
    let k_max = cfg.k_max(algo);
    let proto = RecoveryProtocol::new(k_max, cfg.runs, cfg.recovery_target, cfg.master_seed, config_id)?;
    let grid = recovery_grid();
    let none = || Error::Config(format!("{algo}: every grid candidate diverged"));
    let mut full = proto.clone();
    full.stop_at_target = false;
    let (best_params, score, traces) = match algo {
        Algo::Glmtron => {
            let (step, score) = proto.tune_glmtron_step(problem, w0, &glmtron_step_candidates(&grid)).ok_or_else(none)?;
            let traces = full.glmtron_traces(problem, w0, step).ok_or_else(none)?;
            (vec![("step".to_string(), step)], score, traces)
        }
        _ => {
            let (p, score) = proto.tune_accel(problem, w0, &accel_candidates(&grid)).ok_or_else(none)?;
            let traces = full.accel_traces(problem, w0, &p).ok_or_else(none)?;
            let best_params: Vec<(String, f64)> = describe_glmtron(&p);
            (best_params, score, traces)
        }
    };
    Ok(RecoveryResult {
        algo,
        best_params,
        score,
        traces,
    })
}

fn describe_glmtron(p: &GlmtronParams) -> Vec<(String, f64)> {
    vec![
        ("mu".into(), p.mu),
        ("R2".into(), p.r2),
        ("kappa_tilde".into(), p.kappa_tilde),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Iteration,
    GradCalls,
    TimeS,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::Iteration, Axis::GradCalls, Axis::TimeS];

    pub fn name(self) -> &'static str {
        match self {
            Axis::Iteration => "iteration",
            Axis::GradCalls => "grad_calls",
            Axis::TimeS => "time_s",
        }
    }

    fn key(self, r: &TraceRow) -> f64 {
        match self {
            Axis::Iteration => r.k as f64,
            Axis::GradCalls => r.grad_calls as f64,
            Axis::TimeS => r.time_s,
        }
    }
}

/// Averages runs at each value of `axis` taken by any run. A run contributes
/// its last row at or before that value (runs that have not started there
/// are skipped). The result's `seed` is the number of runs averaged; it has
/// no rows for the time axis when timing was off.
pub fn average_on_axis(traces: &[RunTrace], axis: Axis) -> RunTrace {
    let algo = traces.first().map_or_else(String::new, |t| t.algo.clone());
    let mut out = RunTrace::new(algo, traces.len() as u64, Vec::new());
    let untimed = traces.iter().flat_map(|t| &t.rows).all(|r| r.time_s == 0.0);
    if traces.is_empty() || (axis == Axis::TimeS && untimed) {
        return out;
    }
    let mut points: Vec<f64> = traces.iter().flat_map(|t| t.rows.iter().map(|r| axis.key(r))).collect();
    points.sort_by(f64::total_cmp);
    points.dedup();
    for x in points {
        let rows: Vec<&TraceRow> = traces
            .iter()
            .filter_map(|t| {
                let i = t.rows.partition_point(|r| axis.key(r) <= x);
                i.checked_sub(1).map(|i| &t.rows[i])
            })
            .collect();
        let m = rows.len() as f64;
        let mean = |f: &dyn Fn(&TraceRow) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / m;
        out.rows.push(TraceRow {
            k: mean(&|r| r.k as f64).round() as usize,
            t_k: mean(&|r| r.t_k),
            grad_calls: mean(&|r| r.grad_calls as f64).round() as u64,
            time_s: mean(&|r| r.time_s),
            f_gap: mean(&|r| r.f_gap),
            dist: mean(&|r| r.dist),
        });
    }
    out
}

#[derive(Serialize)]
struct Summary<'a> {
    config_id: u64,
    master_seed: u64,
    algorithms: Vec<SummaryEntry<'a>>,
    recovery: Vec<RecoverySummary<'a>>,
}

#[derive(Serialize)]
struct SummaryEntry<'a> {
    algo: Algo,
    best: &'a GridPoint,
    score: f64,
    final_f_gap: Vec<f64>,
    diverged_runs: usize,
}

#[derive(Serialize)]
struct RecoverySummary<'a> {
    algo: Algo,
    best_params: &'a [(String, f64)],
    median_hit: f64,
    median_final_dist: f64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    config_id: u64,
    config: &'a ExperimentConfig,
    files: Vec<String>,
}

/// Writes the report under `out_dir` and returns the written paths:
/// `traces/<algo>.csv` (every run at the best tuple), `<algo>_<axis>.csv`
/// (run averages), `grid_scores.csv`, `summary.json` and `manifest.json`.
pub fn emit_report(results: &ExperimentResults, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir.join("traces"))?;
    let mut files: Vec<String> = Vec::new();
    let create = |rel: &str| -> Result<BufWriter<File>> { Ok(BufWriter::new(File::create(out_dir.join(rel))?)) };

    for r in &results.algorithms {
        let rel = format!("traces/{}.csv", r.algo);
        write_run_traces(&r.traces, create(&rel)?)?;
        files.push(rel);
        for axis in Axis::ALL {
            let rel = format!("{}_{}.csv", r.algo, axis.name());
            average_on_axis(&r.traces, axis).write_csv(create(&rel)?)?;
            files.push(rel);
        }
    }
    for r in &results.recovery {
        let rel = format!("traces/{}.csv", r.algo);
        write_recovery_traces(&r.traces, create(&rel)?)?;
        files.push(rel);
    }

    let mut w = csv::Writer::from_writer(create("grid_scores.csv")?);
    w.write_record(["algo", "L", "mu", "rho", "score"])?;
    for g in &results.grid_scores {
        w.write_record([
            g.algo.name().to_string(),
            g.point.l.to_string(),
            g.point.mu.to_string(),
            g.point.rho.to_string(),
            g.score.to_string(),
        ])?;
    }
    w.flush()?;
    files.push("grid_scores.csv".into());

    let summary = Summary {
        config_id: results.config_id,
        master_seed: results.config.master_seed,
        algorithms: results
            .algorithms
            .iter()
            .map(|r| SummaryEntry {
                algo: r.algo,
                best: &r.best,
                score: r.score,
                final_f_gap: r.traces.iter().map(RunTrace::final_f_gap).collect(),
                diverged_runs: r.diverged_runs,
            })
            .collect(),
        recovery: results
            .recovery
            .iter()
            .map(|r| RecoverySummary {
                algo: r.algo,
                best_params: &r.best_params,
                median_hit: r.score.median_hit,
                median_final_dist: r.score.median_final_dist,
            })
            .collect(),
    };
    serde_json::to_writer_pretty(create("summary.json")?, &summary)?;
    files.push("summary.json".into());

    let manifest = Manifest {
        config_id: results.config_id,
        config: &results.config,
        files: files.clone(),
    };
    serde_json::to_writer_pretty(create("manifest.json")?, &manifest)?;
    files.push("manifest.json".into());
    Ok(files.into_iter().map(|f| out_dir.join(f)).collect())
}
