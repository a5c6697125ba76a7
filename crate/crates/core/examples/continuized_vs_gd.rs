//! Continuized acceleration against gradient descent on an ill-conditioned
//! quadratic, at equal gradient calls.

use nalgebra::DVector;
use quasar_opt::continuized::{continuized_run, gd_run, QuasarSchedule, RunOptions, StrongQuasarSchedule};
use quasar_opt::event_clock::{build_schedule, SeededRng};
use quasar_opt::objectives::Quadratic;

fn main() -> quasar_opt::Result<()> {
    let (mu, l) = (0.01, 1.0);
    let center = DVector::from_vec(vec![1.0, -1.0, 0.5, 2.0]);
    let f = Quadratic::new(DVector::from_vec(vec![mu, 0.1, 0.5, l]), center.clone());
    let w0 = DVector::zeros(4);
    let k = 200;
    let opts = RunOptions::new(k).with_reference(center).record_every(50);
    let schedule = build_schedule(&mut SeededRng::new(3, 0), k)?;

    let gd = gd_run(&f, &w0, 1.0 / l, &opts)?;
    let quasar = continuized_run("continuized-quasar", &f, &w0, &w0, &schedule, &QuasarSchedule::new(1.0, l)?, &opts)?;
    let strong = continuized_run(
        "continuized-strong",
        &f,
        &w0,
        &w0,
        &schedule,
        &StrongQuasarSchedule::new(1.0, mu, l)?,
        &opts,
    )?;
    for out in [&gd, &quasar, &strong] {
        let gaps: Vec<String> = out.trace.rows.iter().map(|r| format!("{:.2e}", r.f_gap)).collect();
        println!("{:<20} grad calls {:>4}  f-gap every 50: {}", out.trace.algo, out.trace.grad_calls(), gaps.join(" "));
    }
    Ok(())
}
