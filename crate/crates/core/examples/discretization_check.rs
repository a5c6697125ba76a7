//! Compares the discrete continuized iterates with an Euler integration of the
//! underlying jump process, at two step sizes.

use nalgebra::DVector;
use quasar_opt::continuized::{discretization_error, StrongQuasarSchedule};
use quasar_opt::event_clock::{build_schedule, SeededRng};
use quasar_opt::objectives::Quadratic;

fn main() -> quasar_opt::Result<()> {
    let (mu, l) = (0.01, 1.0);
    let f = Quadratic::conditioned(mu, l, DVector::from_vec(vec![1.0, -0.5]));
    let w0 = DVector::from_vec(vec![-1.0, 2.0]);
    let schedule = build_schedule(&mut SeededRng::new(0, 0), 20)?;
    let params = StrongQuasarSchedule::new(1.0, mu, l)?;
    let coarse = discretization_error(&f, &w0, &w0, &schedule, &params, 1e-4, 20)?;
    let fine = discretization_error(&f, &w0, &w0, &schedule, &params, 5e-5, 20)?;
    println!("dt {:e}: max rel error {:.3e}", coarse.dt, coarse.max_rel_error);
    println!("dt {:e}: max rel error {:.3e}", fine.dt, fine.max_rel_error);
    println!("halving ratio {:.3}", coarse.max_rel_error / fine.max_rel_error);
    Ok(())
}
