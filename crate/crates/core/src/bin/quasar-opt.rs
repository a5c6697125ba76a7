use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde_json::json;

use quasar_opt::bench::{emit_report, run_experiment, run_once, standard_initial_point, Algo, ExperimentConfig, GridPoint};
use quasar_opt::continuized::{discretization_error, QuasarSchedule, RunOptions, StrongQuasarSchedule};
use quasar_opt::event_clock::{build_schedule, JumpSchedule, SeededRng};
use quasar_opt::glmtron::{accel_glmtron_run, glmtron_run, GlmtronParams, RecoveryOptions};
use quasar_opt::objectives::{empirical_objective, read_problem, write_problem, GlmProblem, Quadratic};
use quasar_opt::quasar_analysis::{
    check_one_point_convex, check_pl, check_qg, check_quasar, check_strong_quasar, estimate_rho, sample_ball,
};
use quasar_opt::{Error, Result};

#[derive(Parser)]
#[command(name = "quasar-opt", version, about = "Continuized acceleration benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic GLM problem (CSV + JSON sidecar).
    Generate {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one algorithm and write its trace.
    Run(RunArgs),
    /// Grid sweep described by a TOML config.
    Grid {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Sample points around w* and certify a growth property (JSON on stdout).
    Check(CheckArgs),
    /// Compare the exact discretization with an Euler integration on a 2-D quadratic.
    VerifyDiscretization(VerifyArgs),
}

#[derive(Args)]
struct ProblemArgs {
    /// Read the problem from this CSV instead of generating one.
    #[arg(long)]
    problem: Option<PathBuf>,
    #[arg(long, default_value = "logistic")]
    link: String,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 50)]
    d: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ProblemArgs {
    fn load(&self) -> Result<(GlmProblem, DVector<f64>)> {
        match &self.problem {
            Some(path) => {
                let (p, _) = read_problem(path)?;
                let w0 = standard_initial_point(self.seed, p.d());
                Ok((p, w0))
            }
            None => {
                let mut cfg = ExperimentConfig::new(&self.link, self.alpha, self.n, self.d, Vec::new());
                cfg.master_seed = self.seed;
                cfg.problem()
            }
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_parser = parse_algo)]
    algo: Algo,
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long = "L", default_value_t = 1.0)]
    l: f64,
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    #[arg(long, default_value_t = 3000)]
    iters: usize,
    /// Gradient-call budget.
    #[arg(long)]
    budget: Option<u64>,
    /// GLMtron step; defaults to 1/R2.
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    r2: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long, default_value_t = 1)]
    runs: usize,
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum PropertyArg {
    Quasar,
    StrongQuasar,
    OnePoint,
    Pl,
    Qg,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long, value_enum)]
    property: PropertyArg,
    #[command(flatten)]
    problem: ProblemArgs,
    /// Estimated from the sample when omitted for `quasar`.
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    cv: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    points: usize,
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScheduleArg {
    Strong,
    Quasar,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value = "strong")]
    schedule: ScheduleArg,
    #[arg(long = "L", default_value_t = 1.0)]
    l: f64,
    #[arg(long, default_value_t = 0.01)]
    mu: f64,
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    #[arg(long, default_value_t = 1e-4)]
    dt: f64,
    #[arg(long, default_value_t = 20)]
    jumps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_algo(s: &str) -> std::result::Result<Algo, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn write_manifest(dir: &Path, value: serde_json::Value) -> Result<()> {
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&value)?)?;
    Ok(())
}

fn required(name: &str, v: Option<f64>) -> Result<f64> {
    v.ok_or_else(|| Error::Config(format!("--{name} is required here")))
}

fn generate(args: &ProblemArgs, out: &Path) -> Result<()> {
    let (p, _) = args.load()?;
    fs::create_dir_all(out)?;
    let csv = out.join("problem.csv");
    let side = write_problem(&p, Some(args.seed), &csv)?;
    write_manifest(out, json!({ "command": "generate", "seed": args.seed, "files": [csv, side] }))?;
    println!("{}", csv.display());
    Ok(())
}

fn run(a: &RunArgs) -> Result<()> {
    let (problem, w0) = a.problem.load()?;
    fs::create_dir_all(&a.out)?;
    let path = a.out.join("trace.csv");
    let file = fs::File::create(&path)?;
    let seed = a.problem.seed;
    let summary = if a.algo.is_recovery() {
        let est = match (a.mu, a.r2, a.kappa, a.step) {
            (Some(mu), Some(r2), Some(kt), _) => Some(GlmtronParams::new(mu, r2, kt)?),
            (.., Some(_)) if a.algo == Algo::Glmtron => None,
            _ => {
                let e = GlmtronParams::estimate(&problem, &w0, 10 * problem.n(), &mut SeededRng::new(seed, 1))?;
                Some(GlmtronParams::new(a.mu.unwrap_or(e.mu), a.r2.unwrap_or(e.r2), a.kappa.unwrap_or(e.kappa_tilde))?)
            }
        };
        let mut traces = Vec::new();
        for r in 0..a.runs {
            let mut rng = SeededRng::for_run(seed, 0, r as u64);
            let opts = RecoveryOptions::new(a.iters).with_seed(r as u64);
            let out = match (&est, a.algo) {
                (_, Algo::Glmtron) => {
                    let step = a.step.or(est.map(|e| 1.0 / e.r2)).expect("estimated when no step is given");
                    glmtron_run(&problem, &w0, step, &mut rng, &opts)?
                }
                (Some(p), _) => {
                    let sched = build_schedule(&mut SeededRng::for_run(seed, 1, r as u64), a.iters)?;
                    accel_glmtron_run(&problem, &w0, &w0, p, &sched, &mut rng, &opts)?
                }
                (None, _) => unreachable!("accelerated runs always have constants"),
            };
            traces.push(out.trace);
        }
        quasar_opt::trace::write_recovery_traces(&traces, file)?;
        json!({ "final_dist": traces.iter().map(|t| t.final_dist()).collect::<Vec<_>>(), "params": est })
    } else {
        let obj = empirical_objective(&problem);
        let point = GridPoint {
            l: a.l,
            mu: a.mu.unwrap_or(f64::NAN),
            rho: a.rho,
        };
        let mut traces = Vec::new();
        for r in 0..a.runs {
            let sched: Option<JumpSchedule> = match a.algo {
                Algo::ContinuizedQuasar | Algo::ContinuizedStrong => {
                    Some(build_schedule(&mut SeededRng::for_run(seed, 0, r as u64), a.iters)?)
                }
                _ => None,
            };
            let mut opts = RunOptions::new(a.iters)
                .with_reference(problem.w_star.clone())
                .with_timing(a.timing)
                .with_seed(r as u64);
            if let Some(b) = a.budget {
                opts = opts.with_budget(b);
            }
            traces.push(run_once(a.algo, &obj, &w0, &point, a.eps, sched.as_ref(), &opts)?.trace);
        }
        quasar_opt::trace::write_run_traces(&traces, file)?;
        json!({ "final_f_gap": traces.iter().map(|t| t.final_f_gap()).collect::<Vec<_>>() })
    };
    write_manifest(&a.out, json!({ "command": "run", "algo": a.algo, "seed": seed, "files": [path], "summary": summary }))?;
    println!("{}", serde_json::to_string(&summary)?);
    Ok(())
}

fn grid(config: &Path, out: Option<PathBuf>, seed: Option<u64>) -> Result<()> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(o) = out {
        cfg.output = o;
    }
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    let results = run_experiment(&cfg)?;
    for f in emit_report(&results, &cfg.output)? {
        println!("{}", f.display());
    }
    Ok(())
}

fn check(a: &CheckArgs) -> Result<()> {
    let (problem, _) = a.problem.load()?;
    let obj = empirical_objective(&problem);
    let ws = &problem.w_star;
    let points = sample_ball(&mut SeededRng::new(a.problem.seed, 2), ws, a.radius, a.points);
    let report = match a.property {
        PropertyArg::Quasar => {
            let rho = match a.rho {
                Some(r) => r,
                None => estimate_rho(&obj, ws, &points)?,
            };
            check_quasar(&obj, ws, rho, &points, a.tol)?
        }
        PropertyArg::StrongQuasar => {
            check_strong_quasar(&obj, ws, required("rho", a.rho)?, required("mu", a.mu)?, &points, a.tol)?
        }
        PropertyArg::OnePoint => check_one_point_convex(&obj, ws, required("cv", a.cv)?, &points, a.tol)?,
        PropertyArg::Pl => check_pl(&obj, 0.0, required("nu", a.nu)?, &points, a.tol)?,
        PropertyArg::Qg => check_qg(&obj, ws, required("nu", a.nu)?, &points, a.tol)?,
    };
    let text = serde_json::to_string_pretty(&report)?;
    match &a.out {
        Some(p) => fs::write(p, &text)?,
        None => println!("{text}"),
    }
    Ok(())
}

fn verify(a: &VerifyArgs) -> Result<()> {
    let center = DVector::from_vec(vec![1.0, -0.5]);
    let obj = Quadratic::conditioned(a.mu, a.l, center);
    let w0 = DVector::from_vec(vec![-1.0, 2.0]);
    let base = build_schedule(&mut SeededRng::new(a.seed, 0), a.jumps)?;
    let reports = match a.schedule {
        ScheduleArg::Strong => {
            let p = StrongQuasarSchedule::new(a.rho, a.mu, a.l)?;
            [a.dt, a.dt / 2.0].map(|dt| discretization_error(&obj, &w0, &w0, &base, &p, dt, a.jumps))
        }
        ScheduleArg::Quasar => {
            // The quasar coefficients blow up at t = 0, so start the clock at 1.
            let p = QuasarSchedule::new(a.rho, a.l)?;
            let sched = base.shifted(1.0);
            [a.dt, a.dt / 2.0].map(|dt| discretization_error(&obj, &w0, &w0, &sched, &p, dt, a.jumps))
        }
    };
    let [r1, r2] = reports;
    let (r1, r2) = (r1?, r2?);
    let out = json!({ "reports": [r1, r2], "halving_ratio": r1.max_rel_error / r2.max_rel_error });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate { problem, out } => generate(problem, out),
        Command::Run(a) => run(a),
        Command::Grid { config, out, seed } => grid(config, out.clone(), *seed),
        Command::Check(a) => check(a),
        Command::VerifyDiscretization(a) => verify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
