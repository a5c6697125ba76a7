//! A small grid sweep over GD and the continuized method on a logistic GLM,
//! written out as CSV traces plus a summary.
//!
//! The output directory is the first argument (default `grid_out`).

use std::path::PathBuf;

use quasar_opt::bench::{emit_report, run_experiment, Algo, ExperimentConfig, GridSpec};

fn main() -> quasar_opt::Result<()> {
    let out = std::env::args().nth(1).map_or_else(|| PathBuf::from("grid_out"), PathBuf::from);
    let mut cfg = ExperimentConfig::new("logistic", None, 200, 10, vec![Algo::Gd, Algo::ContinuizedStrong]);
    cfg.iterations = Some(500);
    cfg.runs = 3;
    cfg.record_every = 50;
    cfg.grid = GridSpec {
        q_min: -2,
        q_max: 0,
        ..GridSpec::default()
    };
    let results = run_experiment(&cfg)?;
    for r in &results.algorithms {
        println!("{:<20} best L {} mu {} rho {}: final gap {:.3e}", r.algo, r.best.l, r.best.mu, r.best.rho, r.score);
    }
    for path in emit_report(&results, &out)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
