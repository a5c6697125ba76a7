//! One binary line search in isolation, then the line-search AGD baseline
//! against the continuized method on a logistic GLM, counting gradient calls.

use nalgebra::DVector;
use quasar_opt::continuized::{continuized_run, RunOptions, StrongQuasarSchedule};
use quasar_opt::event_clock::{build_schedule, SeededRng};
use quasar_opt::hss::{binary_line_search, hss_agd_strong, HssOptions, LineSearchQuery, DEFAULT_MAX_BISECT};
use quasar_opt::objectives::{empirical_objective, generate_problem, initial_point, LinkFunction, Quadratic};

fn main() -> quasar_opt::Result<()> {
    let f = Quadratic::new(DVector::from_vec(vec![1.0, 4.0]), DVector::from_vec(vec![1.0, 0.0]));
    let q = LineSearchQuery::new(DVector::from_vec(vec![3.0, 1.0]), DVector::from_vec(vec![-2.0, 0.5]), 0.1, 2.0, 0.0)?;
    let ls = binary_line_search(&f, &q, 4.0, DEFAULT_MAX_BISECT)?;
    println!(
        "alpha {:.6} via {:?} after {} bisections, exit residual {:.2e}",
        ls.alpha,
        ls.exit,
        ls.bisections,
        q.exit_residual(&f, ls.alpha)
    );

    let problem = generate_problem(&mut SeededRng::new(5, 0), 500, 20, LinkFunction::logistic())?;
    let obj = empirical_objective(&problem);
    let w0 = initial_point(&mut SeededRng::new(5, 1), 20);
    let (rho, mu, l) = (0.5, 0.01, 0.5);
    let opts = RunOptions::new(2000).with_reference(problem.w_star.clone()).with_budget(2000).record_every(2000);
    let hss = hss_agd_strong(&obj, &w0, &w0, rho, mu, l, &opts, HssOptions::default())?;
    let schedule = build_schedule(&mut SeededRng::new(5, 2), 2000)?;
    let cont = continuized_run("continuized-strong", &obj, &w0, &w0, &schedule, &StrongQuasarSchedule::new(rho, mu, l)?, &opts)?;
    for out in [&hss, &cont] {
        let last = out.trace.last().expect("trace has rows");
        println!("{:<20} iterations {:>5}  grad calls {:>5}  f-gap {:.3e}", out.trace.algo, last.k, last.grad_calls, last.f_gap);
    }
    Ok(())
}
