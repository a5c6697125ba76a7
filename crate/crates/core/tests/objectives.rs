use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use quasar_opt::event_clock::SeededRng;
use quasar_opt::linalg::lambda_max;
use quasar_opt::objectives::{
    empirical_objective, estimate_glm_constants, generate_problem, initial_point, pseudo_gradient,
    read_problem, second_moment, secant_matrix, write_problem, GlmProblem, LinkFunction, Objective,
};

fn links() -> Vec<LinkFunction> {
    vec![
        LinkFunction::identity(),
        LinkFunction::logistic(),
        LinkFunction::relu(),
        LinkFunction::leaky_relu(0.3).unwrap(),
        LinkFunction::quadratic(),
    ]
}

fn problem(link: LinkFunction, n: usize, d: usize, seed: u64) -> GlmProblem {
    generate_problem(&mut SeededRng::new(seed, 0), n, d, link).unwrap()
}

/// Central differences, skipped (`None`) when a coordinate step would move
/// some `w.x_i` across a kink of the link.
fn finite_difference(p: &GlmProblem, w: &DVector<f64>, h: f64) -> Option<DVector<f64>> {
    let obj = empirical_objective(p);
    let z = &p.x * w;
    let row_max = (0..p.n()).map(|i| p.x.row(i).abs().max()).collect::<Vec<_>>();
    for (zi, m) in z.iter().zip(&row_max) {
        if p.link.kinks().iter().any(|k| (zi - k).abs() <= (h * m).max(1e-3)) {
            return None;
        }
    }
    Some(DVector::from_fn(w.len(), |j, _| {
        let mut a = w.clone();
        let mut b = w.clone();
        a[j] += h;
        b[j] -= h;
        (obj.value(&a) - obj.value(&b)) / (2.0 * h)
    }))
}

#[test]
fn labels_are_realizable() {
    for link in links() {
        let p = problem(link, 300, 8, 1);
        let obj = empirical_objective(&p);
        assert!(obj.value(&p.w_star) <= 1e-30, "{link}");
        assert!(obj.gradient(&p.w_star).norm() <= 1e-14, "{link}");
    }
}

#[test]
fn initial_point_scale() {
    let d = 50;
    let norms: Vec<f64> = (0..200).map(|s| initial_point(&mut SeededRng::new(s, 0), d).norm()).collect();
    let mean = norms.iter().sum::<f64>() / norms.len() as f64;
    // 0.01 sqrt(d)
    assert!((mean - 0.0707).abs() < 0.00707, "mean norm {mean}");
}

#[test]
fn mean_pseudo_gradient_is_gradient_for_identity() {
    let p = problem(LinkFunction::identity(), 200, 6, 4);
    let obj = empirical_objective(&p);
    let w = DVector::from_fn(6, |j, _| j as f64 * 0.3 - 0.7);
    let mut avg = DVector::zeros(6);
    for i in 0..p.n() {
        avg += pseudo_gradient(&p, &w, i).unwrap();
    }
    avg /= p.n() as f64;
    assert!((avg - obj.gradient(&w)).norm() < 1e-12);
}

#[test]
fn pseudo_gradient_rejects_bad_index() {
    let p = problem(LinkFunction::identity(), 5, 2, 0);
    assert!(pseudo_gradient(&p, &DVector::zeros(2), 5).is_err());
}

#[test]
fn identity_constants_in_one_dimension() {
    let p = problem(LinkFunction::identity(), 100, 1, 3);
    let c = estimate_glm_constants(&p, &DVector::from_element(1, 0.2), 100_000, &mut SeededRng::new(3, 1)).unwrap();
    assert!((c.mu - 1.0).abs() < 0.02, "mu {}", c.mu);
    // E[x^4] / E[x^2] = 3 for a standard normal
    assert!((c.r2 - 3.0).abs() < 0.2, "R2 {}", c.r2);
    assert!(c.kappa_tilde <= c.r2 / c.mu * (1.0 + 1e-9));
}

#[test]
fn kappa_tilde_never_exceeds_kappa() {
    for (i, link) in [LinkFunction::identity(), LinkFunction::leaky_relu(0.1).unwrap(), LinkFunction::leaky_relu(0.5).unwrap()]
        .into_iter()
        .enumerate()
    {
        let p = problem(link, 200, 5, i as u64);
        let w = initial_point(&mut SeededRng::new(i as u64, 9), 5);
        let c = estimate_glm_constants(&p, &w, 2000, &mut SeededRng::new(i as u64, 10)).unwrap();
        assert!(c.kappa_tilde <= c.r2 / c.mu * (1.0 + 1e-9), "{link}: {c:?}");
    }
}

#[test]
fn problem_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let p = problem(LinkFunction::leaky_relu(0.25).unwrap(), 40, 3, 8);
    let path = dir.path().join("problem.csv");
    write_problem(&p, Some(8), &path).unwrap();
    let header = std::fs::read_to_string(&path).unwrap();
    assert_eq!(header.lines().next().unwrap(), "j,x_1,x_2,x_3,y");
    let (q, meta) = read_problem(&path).unwrap();
    assert_eq!(meta.seed, Some(8));
    assert_eq!(q.link, p.link);
    let bits = |m: &DMatrix<f64>| m.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&q.x), bits(&p.x));
    assert_eq!(q.y.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), p.y.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    assert_eq!(q.w_star, p.w_star);
}

#[test]
fn smoothness_of_identity_glm_is_gram_lambda_max() {
    let p = problem(LinkFunction::identity(), 300, 4, 6);
    let obj = empirical_objective(&p);
    let pairs = quasar_opt::quasar_analysis::sample_pairs(&mut SeededRng::new(6, 1), &p.w_star, 2.0, 2000);
    let est = quasar_opt::quasar_analysis::estimate_smoothness_l(&obj, &pairs);
    let exact = lambda_max(&second_moment(&p));
    assert!(est <= exact * (1.0 + 1e-12));
    assert!(est >= 0.9 * exact, "estimate {est} vs {exact}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn gradients_match_finite_differences(seed in 0u64..1000, scale in 0.1f64..2.0) {
        for link in links() {
            let p = problem(link, 60, 4, seed);
            let w = &p.w_star + initial_point(&mut SeededRng::new(seed, 1), 4) * (100.0 * scale);
            let Some(fd) = finite_difference(&p, &w, 1e-6) else { continue };
            let g = empirical_objective(&p).gradient(&w);
            let rel = (&g - &fd).norm() / g.norm().max(1e-8);
            prop_assert!(rel < 1e-5, "{} rel error {}", link, rel);
        }
    }

    #[test]
    fn expected_pseudo_gradient_correlates(seed in 0u64..1000, scale in 0.1f64..3.0) {
        for link in [LinkFunction::identity(), LinkFunction::logistic(), LinkFunction::relu(), LinkFunction::leaky_relu(0.2).unwrap()] {
            let p = problem(link, 80, 3, seed);
            let w = &p.w_star + SeededRng::new(seed, 2).normal_vector(3) * scale;
            let diff = &w - &p.w_star;
            let mean: f64 = (0..p.n()).map(|i| pseudo_gradient(&p, &w, i).unwrap().dot(&diff)).sum::<f64>() / p.n() as f64;
            let quad = diff.dot(&(secant_matrix(&p, &w) * &diff));
            prop_assert!((mean - quad).abs() <= 1e-10 * (1.0 + quad.abs()), "{} {} vs {}", link, mean, quad);
            prop_assert!(quad >= -1e-12);
            if link.increase_alpha() > 0.0 {
                prop_assert!(quad > 0.0);
            }
        }
    }
}
