//! Stochastic GLMtron against its continuized acceleration on a Leaky-ReLU
//! GLM, both tuned over the same small grid.
//!
//! Pass the Leaky-ReLU slope as the first argument (default 0.5).

use quasar_opt::event_clock::SeededRng;
use quasar_opt::glmtron::{accel_candidates, glmtron_step_candidates, RecoveryProtocol};
use quasar_opt::objectives::{generate_problem, initial_point, LinkFunction};

fn main() -> quasar_opt::Result<()> {
    let alpha: f64 = std::env::args().nth(1).map_or(Ok(0.5), |s| s.parse()).expect("alpha must be a number");
    let problem = generate_problem(&mut SeededRng::new(7, 1), 500, 20, LinkFunction::leaky_relu(alpha)?)?;
    let w0 = initial_point(&mut SeededRng::new(7, 2), 20);
    let grid = [0.1, 1.0, 10.0, 100.0];
    let protocol = RecoveryProtocol::new(10_000, 5, 1e-3, 1, 0)?;

    match protocol.tune_glmtron_step(&problem, &w0, &glmtron_step_candidates(&grid)) {
        Some((step, score)) => println!("glmtron       step {step:.4}: median iterations to 1e-3 = {}", score.median_hit),
        None => println!("glmtron: every step diverged"),
    }
    match protocol.tune_accel(&problem, &w0, &accel_candidates(&grid)) {
        Some((p, score)) => println!(
            "accel-glmtron mu {} R2 {} kappa {}: median iterations to 1e-3 = {}",
            p.mu, p.r2, p.kappa_tilde, score.median_hit
        ),
        None => println!("accel-glmtron: every candidate diverged"),
    }
    Ok(())
}
