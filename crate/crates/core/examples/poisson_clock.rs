//! Draws a few Poisson jump schedules and compares their empirical moments
//! with the Exponential(1) model.

use quasar_opt::event_clock::{build_schedule, SeededRng};

fn main() -> quasar_opt::Result<()> {
    let k = 100;
    let runs = 2000;
    let mut ends = Vec::with_capacity(runs);
    for r in 0..runs {
        let mut rng = SeededRng::for_run(42, 0, r as u64);
        ends.push(build_schedule(&mut rng, k)?.time(k));
    }
    let mean = ends.iter().sum::<f64>() / runs as f64;
    let var = ends.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (runs - 1) as f64;
    println!("T_{k} over {runs} schedules: mean {mean:.2} (expect {k}), var {var:.2} (expect {k})");

    let schedule = build_schedule(&mut SeededRng::new(42, 7), 5)?;
    println!("first jumps: {:?}", schedule.times());
    let replay = build_schedule(&mut SeededRng::new(42, 7), 5)?;
    println!("replay identical: {}", schedule == replay);
    Ok(())
}
