//! Certifies quasar convexity, quadratic growth and the strong-quasar constant
//! they imply for a Leaky-ReLU GLM.

use quasar_opt::event_clock::SeededRng;
use quasar_opt::objectives::{empirical_objective, generate_problem, initial_point, LinkFunction};
use quasar_opt::quasar_analysis::{
    check_qg, check_quasar, check_strong_quasar, estimate_rho, glm_qg_constant, glm_quasar_constant,
    qg_to_strong_quasar, sample_ball, second_moment_lambda_min,
};

fn main() -> quasar_opt::Result<()> {
    let alpha = 0.5;
    let link = LinkFunction::leaky_relu(alpha)?;
    let problem = generate_problem(&mut SeededRng::new(1, 0), 2000, 10, link)?;
    let obj = empirical_objective(&problem);
    let w_star = &problem.w_star;
    let w0 = initial_point(&mut SeededRng::new(1, 1), 10);
    let points = sample_ball(&mut SeededRng::new(1, 2), &w0, 3.0, 1000);

    let rho_theory = glm_quasar_constant(alpha, 1.0)?;
    let rho_hat = estimate_rho(&obj, w_star, &points)?;
    println!("rho: theory {rho_theory}, sampled {rho_hat:.4}");
    println!("quasar({rho_theory}) holds: {}", check_quasar(&obj, w_star, rho_theory, &points, None)?.holds);

    let (lam, se) = second_moment_lambda_min(&problem, 200, &mut SeededRng::new(1, 3));
    let nu = glm_qg_constant(alpha, lam - 3.0 * se)?;
    println!("lambda_min {lam:.4} (se {se:.4}), qg({nu:.4}) holds: {}", check_qg(&obj, w_star, nu, &points, None)?.holds);

    let (rho, mu) = qg_to_strong_quasar(rho_theory, nu, 0.5)?;
    let strong = check_strong_quasar(&obj, w_star, rho, mu, &points, None)?;
    println!("strong-quasar({rho}, {mu:.4}) holds: {}, tightest mu on sample {:.4}", strong.holds, strong.estimated_constant);
    Ok(())
}
