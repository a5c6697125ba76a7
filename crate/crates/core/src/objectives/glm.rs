use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{LinkFunction, Objective};
use crate::error::{invalid, Error, Result};
use crate::event_clock::SeededRng;
use crate::linalg;

/// Realizable GLM dataset: `y_i = sigma(w_star . x_i)` for every row `x_i` of `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct GlmProblem {
    /// `n x d`, one sample per row.
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub w_star: DVector<f64>,
    pub link: LinkFunction,
}

impl GlmProblem {
    /// Builds a problem from features and a generating vector, labelling every
    /// row exactly.
    pub fn from_features(x: DMatrix<f64>, w_star: DVector<f64>, link: LinkFunction) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(invalid("x", "need n >= 1 and d >= 1"));
        }
        if w_star.len() != x.ncols() {
            return Err(Error::DimensionMismatch {
                expected: x.ncols(),
                got: w_star.len(),
            });
        }
        let y = (&x * &w_star).map(|z| link.eval(z));
        Ok(Self { x, y, w_star, link })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn sample(&self, i: usize) -> DVector<f64> {
        self.x.row(i).transpose()
    }

    /// Mean of `||x_i||^2` over the rows.
    pub fn mean_sq_norm(&self) -> f64 {
        self.x.norm_squared() / self.n() as f64
    }
}

/// Draws `w_star ~ N(0, I_d)`, then `n` rows `x_i ~ N(0, I_d)`, and labels them.
pub fn generate_problem(
    rng: &mut SeededRng,
    n: usize,
    d: usize,
    link: LinkFunction,
) -> Result<GlmProblem> {
    if n == 0 || d == 0 {
        return Err(invalid("n/d", "need n >= 1 and d >= 1"));
    }
    let w_star = rng.normal_vector(d);
    let mut x = DMatrix::zeros(n, d);
    for i in 0..n {
        for j in 0..d {
            x[(i, j)] = rng.standard_normal();
        }
    }
    GlmProblem::from_features(x, w_star, link)
}

/// `w_0 = 0.01 * zeta`, `zeta ~ N(0, I_d)`.
pub fn initial_point(rng: &mut SeededRng, d: usize) -> DVector<f64> {
    rng.normal_vector(d) * 1e-2
}

/// Empirical square loss `f(w) = (1/n) sum 1/2 (sigma(w.x_i) - y_i)^2`.
#[derive(Debug, Clone, Copy)]
pub struct GlmObjective<'a> {
    problem: &'a GlmProblem,
}

pub fn empirical_objective(problem: &GlmProblem) -> GlmObjective<'_> {
    GlmObjective { problem }
}

impl GlmObjective<'_> {
    pub fn problem(&self) -> &GlmProblem {
        self.problem
    }
}

impl Objective for GlmObjective<'_> {
    fn dim(&self) -> usize {
        self.problem.d()
    }

    fn value(&self, w: &DVector<f64>) -> f64 {
        let p = self.problem;
        let z = &p.x * w;
        let sse: f64 = z
            .iter()
            .zip(p.y.iter())
            .map(|(&zi, &yi)| {
                let r = p.link.eval(zi) - yi;
                r * r
            })
            .sum();
        0.5 * sse / p.n() as f64
    }

    fn gradient(&self, w: &DVector<f64>) -> DVector<f64> {
        self.value_and_gradient(w).1
    }

    fn value_and_gradient(&self, w: &DVector<f64>) -> (f64, DVector<f64>) {
        let p = self.problem;
        let n = p.n() as f64;
        let mut z = &p.x * w;
        let mut sse = 0.0;
        for (zi, &yi) in z.iter_mut().zip(p.y.iter()) {
            let (s, ds) = p.link.eval_and_deriv(*zi);
            let r = s - yi;
            sse += r * r;
            *zi = r * ds / n;
        }
        (0.5 * sse / n, p.x.tr_mul(&z))
    }
}

/// `g(w; xi_i) = (sigma(w.x_i) - y_i) x_i`.
pub fn pseudo_gradient(problem: &GlmProblem, w: &DVector<f64>, sample_index: usize) -> Result<DVector<f64>> {
    if sample_index >= problem.n() {
        return Err(Error::IndexOutOfRange {
            index: sample_index,
            len: problem.n(),
        });
    }
    let row = problem.x.row(sample_index);
    let z = row.dot(&w.transpose());
    let r = problem.link.eval(z) - problem.y[sample_index];
    Ok(row.transpose() * r)
}

/// `(1/n) X^T X` of the problem's own rows.
pub fn second_moment(problem: &GlmProblem) -> DMatrix<f64> {
    problem.x.tr_mul(&problem.x) / problem.n() as f64
}

/// Empirical `H(w) = (1/n) sum psi(w.x_i, w*.x_i) x_i x_i^T` on the problem rows.
pub fn secant_matrix(problem: &GlmProblem, w: &DVector<f64>) -> DMatrix<f64> {
    let a = &problem.x * w;
    let b = &problem.x * &problem.w_star;
    let psi = DVector::from_fn(problem.n(), |i, _| problem.link.secant(a[i], b[i]));
    weighted_gram(&problem.x, &psi)
}

/// `(1/m) X^T diag(weights) X`.
fn weighted_gram(x: &DMatrix<f64>, weights: &DVector<f64>) -> DMatrix<f64> {
    let mut scaled = x.clone();
    for (mut row, &wt) in scaled.row_iter_mut().zip(weights.iter()) {
        row *= wt;
    }
    let mut g = x.tr_mul(&scaled) / x.nrows() as f64;
    linalg::symmetrize(&mut g);
    g
}

/// Monte-Carlo estimates of the constants governing accelerated GLMtron.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlmConstants {
    /// `alpha * theta`.
    pub mu: f64,
    /// Smallest scalar with `E[psi^2 ||x||^2 x x^T] <= R^2 H(w)`.
    pub r2: f64,
    /// Smallest scalar with `E[psi^2 ||x||^2_{H^-1} x x^T] <= kappa_tilde H(w)`.
    pub kappa_tilde: f64,
    /// `lambda_min` of the sample second moment.
    pub theta: f64,
}

/// Estimates `(mu, R^2, kappa_tilde)` at the reference point `w_ref` from
/// `mc_samples` fresh Gaussian draws, all quantities sharing the same sample.
pub fn estimate_glm_constants(
    problem: &GlmProblem,
    w_ref: &DVector<f64>,
    mc_samples: usize,
    rng: &mut SeededRng,
) -> Result<GlmConstants> {
    let d = problem.d();
    let alpha = problem.link.increase_alpha();
    if !(alpha > 0.0) {
        return Err(invalid(
            "link",
            format!("{} has no positive increase constant; supply mu, R2 and kappa_tilde", problem.link),
        ));
    }
    if mc_samples < d {
        return Err(invalid("mc_samples", format!("need at least d = {d} samples")));
    }
    if w_ref.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: w_ref.len(),
        });
    }

    let mut x = DMatrix::zeros(mc_samples, d);
    for i in 0..mc_samples {
        for j in 0..d {
            x[(i, j)] = rng.standard_normal();
        }
    }
    let ones = DVector::from_element(mc_samples, 1.0);
    let s = weighted_gram(&x, &ones);
    let theta = linalg::lambda_min(&s);
    if !(theta > 0.0) {
        return Err(Error::RankDeficient {
            min_eigenvalue: theta,
        });
    }
    let mu = alpha * theta;

    let a = &x * w_ref;
    let b = &x * &problem.w_star;
    let psi = DVector::from_fn(mc_samples, |i, _| problem.link.secant(a[i], b[i]));
    let h = weighted_gram(&x, &psi);

    let sq_norms = DVector::from_fn(mc_samples, |i, _| x.row(i).norm_squared());
    let m = weighted_gram(&x, &psi.zip_map(&sq_norms, |p, q| p * p * q));
    let r2 = linalg::relative_lambda_max(&m, &h)?;

    let h_inv = h
        .clone()
        .cholesky()
        .ok_or(Error::RankDeficient {
            min_eigenvalue: linalg::lambda_min(&h),
        })?
        .inverse();
    let xh = &x * &h_inv;
    let h_norms = DVector::from_fn(mc_samples, |i, _| xh.row(i).dot(&x.row(i)));
    let k = weighted_gram(&x, &psi.zip_map(&h_norms, |p, q| p * p * q));
    let kappa_tilde = linalg::relative_lambda_max(&k, &h)?;

    debug_assert!(kappa_tilde <= r2 / mu * (1.0 + 1e-8), "kappa_tilde {kappa_tilde} > R2/mu {}", r2 / mu);
    Ok(GlmConstants {
        mu,
        r2,
        kappa_tilde,
        theta,
    })
}
