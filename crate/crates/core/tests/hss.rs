mod common;

use common::{bisection_start, honours_exit_test, random_query, smallest_passing, wavy_quadratic, CLIFFS};
use nalgebra::DVector;
use proptest::prelude::*;
use quasar_opt::bench::{Algo, ExperimentConfig};
use quasar_opt::continuized::{continuized_run, RunOptions, StrongQuasarSchedule};
use quasar_opt::event_clock::{build_schedule, SeededRng};
use quasar_opt::hss::{
    binary_line_search, hss_agd_quasar, hss_agd_strong, theta_sequence, HssOptions, LineSearchExit, LineSearchQuery,
    DEFAULT_MAX_BISECT,
};
use quasar_opt::objectives::{empirical_objective, FnObjective, Quadratic};

#[test]
fn early_exits() {
    let f = Quadratic::isotropic(2, 1.0);
    let q = LineSearchQuery::new(DVector::zeros(2), DVector::from_vec(vec![1.0, -2.0]), 0.3, 1.0, 0.0).unwrap();
    let out = binary_line_search(&f, &q, 1.0, DEFAULT_MAX_BISECT).unwrap();
    assert_eq!((out.alpha, out.exit), (1.0, LineSearchExit::One));

    let q = LineSearchQuery::new(DVector::from_vec(vec![1.0, 0.0]), DVector::zeros(2), 0.0, 0.0, 0.0).unwrap();
    let out = binary_line_search(&f, &q, 1.0, DEFAULT_MAX_BISECT).unwrap();
    assert_eq!((out.alpha, out.exit), (0.0, LineSearchExit::Zero));

    let same = DVector::from_vec(vec![0.4, 0.4]);
    let q = LineSearchQuery::new(same.clone(), same, 1.0, 1.0, 0.0).unwrap();
    assert_eq!(binary_line_search(&f, &q, 1.0, DEFAULT_MAX_BISECT).unwrap().alpha, 1.0);
}

#[test]
fn accepted_guess_is_returned() {
    let f = Quadratic::isotropic(1, 1.0);
    let q = LineSearchQuery::new(DVector::from_element(1, 1.0), DVector::from_element(1, -1.0), 0.0, 1.0, 0.0)
        .unwrap()
        .with_guess(0.5)
        .unwrap();
    let out = binary_line_search(&f, &q, 1.0, DEFAULT_MAX_BISECT).unwrap();
    assert_eq!((out.alpha, out.exit), (0.5, LineSearchExit::Guess));
    assert!(q.exit_residual(&f, 0.5) <= 0.0);
}

#[test]
fn one_dimensional_searches_pass_exit_test() {
    let mut bisected = 0;
    for seed in 0..200u64 {
        let mut rng = SeededRng::new(seed, 7);
        let a = 3.0 * rng.uniform_open_closed();
        let k = 0.5 + 2.5 * rng.uniform_open_closed();
        let f = FnObjective::new(
            1,
            move |w: &DVector<f64>| 0.5 * w[0] * w[0] + a * (k * w[0]).sin() / k,
            move |w: &DVector<f64>| DVector::from_element(1, w[0] + a * (k * w[0]).cos()),
        );
        let q = LineSearchQuery::new(
            DVector::from_element(1, 8.0 * rng.uniform_open_closed() - 4.0),
            DVector::from_element(1, 8.0 * rng.uniform_open_closed() - 4.0),
            0.5,
            2.0,
            0.0,
        )
        .unwrap();
        let out = binary_line_search(&f, &q, 1.0 + a * k, DEFAULT_MAX_BISECT).unwrap();
        assert!(!out.capped);
        assert!(honours_exit_test(&f, &q, &out), "seed {seed}");
        bisected += usize::from(out.bisections > 0);
    }
    assert!(bisected > 0);
}

#[test]
fn cliff_searches_find_the_passing_band() {
    for cliff in CLIFFS {
        let f = cliff.objective();
        let q = cliff.query();
        let l = cliff.smoothness();
        let out = binary_line_search(f.as_ref(), &q, l, DEFAULT_MAX_BISECT).unwrap();
        assert_eq!(out.exit, LineSearchExit::Bisection);
        let oracle = smallest_passing(f.as_ref(), &q, bisection_start(&q, l), 100_000).unwrap();
        assert!((out.alpha - oracle).abs() <= 1e-3, "{cliff:?}: alpha {} oracle {oracle}", out.alpha);
    }
}

#[test]
fn theta_recursion() {
    let t = theta_sequence(10_000);
    assert!((t[0] - 0.6180339887498949).abs() < 1e-15);
    let t1 = t[0] / 2.0 * ((t[0] * t[0] + 4.0).sqrt() - t[0]);
    assert!((t[1] - t1).abs() < 1e-15);
    assert!((t[1] - 0.45588678010286654).abs() < 1e-14);
    assert!(t.windows(2).all(|p| p[1] < p[0]) && t.iter().all(|&v| v > 0.0));
}

#[test]
fn zero_gradient_keeps_gap() {
    let f = FnObjective::new(2, |_: &DVector<f64>| 1.0, |_: &DVector<f64>| DVector::zeros(2));
    let w0 = DVector::from_vec(vec![1.0, 0.0]);
    let z0 = DVector::from_vec(vec![0.0, 1.0]);
    let opts = RunOptions::new(20).with_f_star(0.0);
    let out = hss_agd_strong(&f, &w0, &z0, 1.0, 0.1, 1.0, &opts, HssOptions::default()).unwrap();
    assert!(out.trace.rows.iter().all(|r| r.f_gap == 1.0));
}

#[test]
fn strong_rate_on_conditioned_quadratic() {
    let (mu, l) = (0.01, 1.0);
    let d = 6;
    let curvature = DVector::from_fn(d, |i, _| 10f64.powf(-2.0 + 2.0 * i as f64 / (d - 1) as f64));
    let center = SeededRng::new(1, 0).normal_vector(d);
    let f = Quadratic::new(curvature, center.clone());
    let w0 = DVector::zeros(d);
    let opts = RunOptions::new(400).with_reference(center);
    let out = hss_agd_strong(&f, &w0, &w0, 1.0, mu, l, &opts, HssOptions::default()).unwrap();
    let rows: Vec<_> = out.trace.rows.iter().filter(|r| r.f_gap > 1e-24 && r.k >= 20).collect();
    let xs: Vec<f64> = rows.iter().map(|r| r.grad_calls as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.f_gap.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    let reference = -(mu / l).sqrt();
    assert!(slope <= reference / 2.0 && slope >= reference * 2.0, "slope {slope} vs {reference}");

    let increases = out.trace.rows.windows(2).skip(1).filter(|p| p[1].f_gap > p[0].f_gap * (1.0 + 1e-12)).count();
    if increases > 0 {
        eprintln!("hss-strong: f increased on {increases} of {} iterations", out.trace.rows.len() - 2);
    }
}

#[test]
fn line_search_costs_extra_gradient_calls() {
    let cfg = ExperimentConfig::new("logistic", None, 1000, 50, vec![Algo::HssStrong]);
    let (problem, w0) = cfg.problem().unwrap();
    let obj = empirical_objective(&problem);
    let k = 200;
    let opts = RunOptions::new(k).with_reference(problem.w_star.clone());
    let (rho, mu, l) = (0.5, 0.01, 0.05);
    let hss = hss_agd_strong(&obj, &w0, &w0, rho, mu, l, &opts, HssOptions::default()).unwrap();
    let schedule = build_schedule(&mut SeededRng::new(0, 0), k).unwrap();
    let cont = continuized_run("c", &obj, &w0, &w0, &schedule, &StrongQuasarSchedule::new(rho, mu, l).unwrap(), &opts).unwrap();
    assert_eq!(cont.trace.grad_calls(), k as u64);
    assert!(hss.trace.grad_calls() > cont.trace.grad_calls(), "hss {} calls", hss.trace.grad_calls());

    let quasar = hss_agd_quasar(&obj, &w0, &w0, rho, l, 1e-8, &opts, HssOptions::default()).unwrap();
    assert!(quasar.trace.grad_calls() >= k as u64);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn searches_pass_exit_test_or_flag(seed in any::<u64>()) {
        let (f, l) = wavy_quadratic(seed);
        let q = random_query(seed);
        let out = binary_line_search(f.as_ref(), &q, l, DEFAULT_MAX_BISECT).unwrap();
        prop_assert!(honours_exit_test(f.as_ref(), &q, &out));
    }
}
