use nalgebra::DVector;
use quasar_opt::continuized::{
    continuized_run, discretization_error, gd_run, lyapunov_monitor_strong, simulate_continuized_euler,
    ContinuizedParams, QuasarSchedule, RunOptions, StrongQuasarSchedule,
};
use quasar_opt::event_clock::{build_schedule, JumpSchedule, SeededRng};
use quasar_opt::objectives::{FnObjective, Metered, Objective, Quadratic};
use quasar_opt::Error;

fn zero_objective(d: usize) -> impl Objective {
    FnObjective::new(d, |_: &DVector<f64>| 0.0, move |_: &DVector<f64>| DVector::zeros(d))
}

fn schedule(seed: u64, k: usize) -> JumpSchedule {
    build_schedule(&mut SeededRng::new(seed, 0), k).unwrap()
}

/// `dw = eta (z - w) dt` with `z` frozen and no gradient steps.
struct Relaxation(f64);

impl ContinuizedParams for Relaxation {
    fn eta(&self, _t: f64) -> f64 {
        self.0
    }
    fn eta_prime(&self, _t: f64) -> f64 {
        0.0
    }
    fn gamma(&self, _t: f64) -> f64 {
        0.0
    }
    fn gamma_prime(&self, _t: f64) -> f64 {
        0.0
    }
    fn mixing(&self, t_k: f64, t_next: f64) -> (f64, f64) {
        (1.0 - (-self.0 * (t_next - t_k)).exp(), 0.0)
    }
    fn describe(&self) -> Vec<(String, f64)> {
        vec![("eta".into(), self.0)]
    }
}

#[test]
fn zero_gradient_mixes_toward_z0() {
    let f = zero_objective(3);
    let w0 = DVector::from_vec(vec![1.0, 2.0, 3.0]);
    let z0 = DVector::from_vec(vec![-1.0, 0.0, 1.0]);
    let s = schedule(1, 50);
    let out = continuized_run("c", &f, &w0, &z0, &s, &StrongQuasarSchedule::new(0.0001, 1.0, 4.0).unwrap(), &RunOptions::new(50).keeping_states())
        .unwrap();
    let mut last = f64::INFINITY;
    for st in &out.states {
        let gap = (&st.w - &z0).norm();
        assert!(gap <= last + 1e-15);
        last = gap;
    }
    assert!(last < 1e-2 * (&w0 - &z0).norm());
    let out = continuized_run("c", &f, &w0, &z0, &s, &Relaxation(0.3), &RunOptions::new(50).keeping_states()).unwrap();
    assert!(out.states.iter().all(|st| st.z == z0));
}

#[test]
fn strong_step_solves_isotropic_quadratic() {
    let l = 3.0;
    let w_star = DVector::from_vec(vec![0.5, -2.0]);
    let f = Quadratic::new(DVector::from_element(2, l), w_star.clone());
    let w0 = DVector::from_vec(vec![4.0, 1.0]);
    let out = continuized_run("c", &f, &w0, &w0, &schedule(2, 1), &StrongQuasarSchedule::new(1.0, l, l).unwrap(), &RunOptions::new(1))
        .unwrap();
    assert!((out.w - w_star).norm() < 1e-14);
}

#[test]
fn one_gradient_call_per_iteration() {
    let f = Quadratic::conditioned(0.01, 1.0, DVector::from_vec(vec![1.0, 2.0, 3.0]));
    let metered = Metered::new(&f);
    let w0 = DVector::zeros(3);
    let k = 300;
    let out = continuized_run(
        "c",
        &metered,
        &w0,
        &w0,
        &schedule(3, k),
        &QuasarSchedule::new(0.5, 1.0).unwrap(),
        &RunOptions::new(k).with_reference(f.center.clone()),
    )
    .unwrap();
    assert_eq!(metered.counter().grad_calls, k as u64);
    for r in &out.trace.rows {
        assert_eq!(r.grad_calls, r.k as u64);
    }
}

#[test]
fn gd_examples() {
    let f = Quadratic::isotropic(3, 1.0);
    let w0 = DVector::from_vec(vec![1.0, -2.0, 0.5]);
    assert_eq!(gd_run(&f, &w0, 1.0, &RunOptions::new(1)).unwrap().w, DVector::zeros(3));
    let still = gd_run(&f, &w0, 0.0, &RunOptions::new(5)).unwrap();
    assert!(still.trace.rows.iter().all(|r| r.f_gap == still.trace.rows[0].f_gap));
    let one = Quadratic::isotropic(1, 1.0);
    let x0 = DVector::from_element(1, 2.0);
    let out = gd_run(&one, &x0, 0.1, &RunOptions::new(10)).unwrap();
    assert!((out.w[0] - 2.0 * 0.9f64.powi(10)).abs() < 1e-15);
}

#[test]
fn divergence_keeps_last_finite_state() {
    let f = Quadratic::isotropic(2, 1.0);
    let w0 = DVector::from_element(2, 1.0);
    match gd_run(&f, &w0, 10.0, &RunOptions::new(1000)) {
        Err(Error::Diverged { iteration, last_w, trace }) => {
            assert!(iteration > 0);
            assert!(last_w.iter().all(|v| v.is_finite()));
            assert!(!trace.rows.is_empty());
        }
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn euler_relaxation_matches_closed_form() {
    let eta = 0.7;
    let f = zero_objective(2);
    let w0 = DVector::from_vec(vec![2.0, -1.0]);
    let z0 = DVector::from_vec(vec![0.0, 1.0]);
    let s = schedule(4, 10);
    let path = simulate_continuized_euler(&f, &w0, &z0, &s, &Relaxation(eta), 1e-4, 10).unwrap();
    for (k, (w, z)) in path.iter().enumerate() {
        let e = (-eta * s.time(k)).exp();
        let exact = &w0 * e + &z0 * (1.0 - e);
        assert!((w - &exact).norm() <= 1e-4 * exact.norm(), "k {k}");
        assert_eq!(z, &z0);
    }
}

#[test]
fn final_gap_matches_refined_euler_oracle() {
    let f = Quadratic::conditioned(0.01, 1.0, DVector::from_vec(vec![1.0, -0.5]));
    let w0 = DVector::from_vec(vec![-1.0, 2.0]);
    let k = 200;
    // quasar step sizes are singular at t = 0, so the clock starts at 1
    let s = schedule(0, k).shifted(1.0);
    let params = QuasarSchedule::new(1.0, 1.0).unwrap();
    let out = continuized_run("c", &f, &w0, &w0, &s, &params, &RunOptions::new(k).with_reference(f.center.clone())).unwrap();
    let dt = 1e-3;
    let coarse = simulate_continuized_euler(&f, &w0, &w0, &s, &params, dt, k).unwrap();
    let fine = simulate_continuized_euler(&f, &w0, &w0, &s, &params, dt / 2.0, k).unwrap();
    let extrapolated = &fine[k].0 * 2.0 - &coarse[k].0;
    let oracle = f.value(&extrapolated);
    let gap = out.trace.final_f_gap();
    assert!(gap > 1e-9);
    assert!((gap - oracle).abs() <= 1e-6 * gap, "gap {gap} oracle {oracle}");
}

#[test]
fn quasar_discretization_converges_linearly() {
    let f = Quadratic::conditioned(0.01, 1.0, DVector::from_vec(vec![1.0, -0.5]));
    let w0 = DVector::from_vec(vec![-1.0, 2.0]);
    let s = schedule(0, 20).shifted(1.0);
    let params = QuasarSchedule::new(1.0, 1.0).unwrap();
    let a = discretization_error(&f, &w0, &w0, &s, &params, 1e-4, 20).unwrap();
    let b = discretization_error(&f, &w0, &w0, &s, &params, 5e-5, 20).unwrap();
    assert!(a.max_rel_error <= 1e-4);
    let ratio = a.max_rel_error / b.max_rel_error;
    assert!((ratio - 2.0).abs() < 0.1, "ratio {ratio}");
}

#[test]
fn quasar_schedule_beats_gd_when_ill_conditioned() {
    let d = 10;
    let k = 200;
    let curvature = DVector::from_fn(d, |i, _| 10f64.powf(-2.0 + 2.0 * i as f64 / (d - 1) as f64));
    let mut wins = 0;
    for seed in 0..10 {
        let center = SeededRng::new(seed, 1).normal_vector(d);
        let f = Quadratic::new(curvature.clone(), center.clone());
        let w0 = DVector::zeros(d);
        let opts = RunOptions::new(k).with_reference(center);
        let gd = gd_run(&f, &w0, 1.0, &opts).unwrap().trace.final_f_gap();
        let acc = continuized_run("c", &f, &w0, &w0, &schedule(seed, k), &QuasarSchedule::new(1.0, 1.0).unwrap(), &opts)
            .unwrap()
            .trace
            .final_f_gap();
        if acc < gd {
            wins += 1;
        }
    }
    assert!(wins > 5, "continuized won {wins} of 10");
}

#[test]
fn strong_lyapunov_at_origin_and_solution() {
    let (mu, l) = (0.1, 1.0);
    let w_star = DVector::from_vec(vec![1.0, 1.0]);
    let f = Quadratic::conditioned(mu, l, w_star.clone());
    let w0 = DVector::from_vec(vec![0.0, 3.0]);
    let z0 = DVector::from_vec(vec![2.0, -1.0]);
    let sched = StrongQuasarSchedule::new(1.0, mu, l).unwrap();
    let out = continuized_run("c", &f, &w0, &z0, &schedule(5, 3), &sched, &RunOptions::new(3).keeping_states()).unwrap();
    let phi = lyapunov_monitor_strong(&f, &out.states, &sched, &w_star, 0.0);
    let expected = f.value(&w0) + 0.5 * mu * (&z0 - &w_star).norm_squared();
    assert!((phi[0] - expected).abs() < 1e-14);
    let at_star = continuized_run("c", &f, &w_star, &w_star, &schedule(5, 3), &sched, &RunOptions::new(3).keeping_states()).unwrap();
    assert!(lyapunov_monitor_strong(&f, &at_star.states, &sched, &w_star, 0.0).iter().all(|v| v.abs() < 1e-20));
}

#[test]
fn strong_lyapunov_ensemble_is_nonincreasing() {
    let (mu, l) = (0.01, 1.0);
    let w_star = DVector::from_vec(vec![1.0, -0.5]);
    let f = Quadratic::conditioned(mu, l, w_star.clone());
    let w0 = DVector::from_vec(vec![-1.0, 2.0]);
    let sched = StrongQuasarSchedule::new(1.0, mu, l).unwrap();
    let k = 100;
    let seeds = 1000;
    let checkpoints: Vec<usize> = (0..=k).step_by(10).collect();
    let phis: Vec<Vec<f64>> = (0..seeds)
        .map(|seed| {
            let s = build_schedule(&mut SeededRng::for_run(17, 0, seed), k).unwrap();
            let out = continuized_run("c", &f, &w0, &w0, &s, &sched, &RunOptions::new(k).keeping_states()).unwrap();
            let phi = lyapunov_monitor_strong(&f, &out.states, &sched, &w_star, 0.0);
            checkpoints.iter().map(|&j| phi[j]).collect()
        })
        .collect();
    for j in 1..checkpoints.len() {
        let diffs: Vec<f64> = phis.iter().map(|p| p[j] - p[j - 1]).collect();
        let n = diffs.len() as f64;
        let mean = diffs.iter().sum::<f64>() / n;
        let se = (diffs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
        assert!(mean <= 2.0 * se, "k {}: mean change {mean} se {se}", checkpoints[j]);
    }
}
