//! Sampling-based certification of quasar convexity and related growth
//! conditions, and the closed-form conversions between their constants.
//!
//! Every check evaluates a margin at each sampled point (nonnegative means the
//! inequality holds there) and reports the smallest one. Certification is
//! only as strong as the point set: nothing here is a global guarantee.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::event_clock::SeededRng;
use crate::linalg;
use crate::objectives::{GlmProblem, Objective};

/// `(rho, mu, L)` bundle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasarConstants {
    pub rho: f64,
    pub mu: f64,
    #[serde(rename = "L")]
    pub l: f64,
}

impl QuasarConstants {
    pub fn new(rho: f64, mu: f64, l: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(invalid("rho", "must be positive and finite"));
        }
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(invalid("mu", "must be nonnegative and finite"));
        }
        if !(l > 0.0 && l.is_finite()) {
            return Err(invalid("L", "must be positive and finite"));
        }
        Ok(Self { rho, mu, l })
    }

    /// Strong certificates are analysed for `rho <= 1`; larger values are
    /// allowed but flagged.
    pub fn outside_strong_regime(&self) -> bool {
        self.mu > 0.0 && self.rho > 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Property {
    Quasar,
    StrongQuasar,
    OnePoint,
    Pl,
    Qg,
    Coherence,
    GenSmooth,
}

impl Property {
    pub fn name(self) -> &'static str {
        match self {
            Property::Quasar => "quasar",
            Property::StrongQuasar => "strong-quasar",
            Property::OnePoint => "one-point",
            Property::Pl => "pl",
            Property::Qg => "qg",
            Property::Coherence => "coherence",
            Property::GenSmooth => "gen-smooth",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertReport {
    pub property: Property,
    pub holds: bool,
    /// Tightest constant supported by the sampled points; `NaN` when no point
    /// is informative.
    pub estimated_constant: f64,
    pub worst_point: Vec<f64>,
    pub worst_margin: f64,
    pub points_tested: usize,
    pub tolerance: f64,
    pub margins: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// `1e-9 * (1 + scale)`.
pub fn default_tol(scale: f64) -> f64 {
    1e-9 * (1.0 + scale.abs())
}

struct PointEval {
    /// `f(w) - f*`
    gap: f64,
    /// `<grad f(w), w - w*>`
    inner: f64,
    /// `||w - w*||^2`
    dist2: f64,
    grad2: f64,
}

fn evaluate<O: Objective + ?Sized>(obj: &O, w_star: &DVector<f64>, f_star: f64, w: &DVector<f64>) -> PointEval {
    let (f, g) = obj.value_and_gradient(w);
    let diff = w - w_star;
    PointEval {
        gap: f - f_star,
        inner: g.dot(&diff),
        dist2: diff.norm_squared(),
        grad2: g.norm_squared(),
    }
}

fn check_nonempty(points: &[DVector<f64>]) -> Result<()> {
    if points.is_empty() {
        Err(invalid("points", "need at least one point"))
    } else {
        Ok(())
    }
}

/// Shared driver: `margin(i, e)` gives `(margin, magnitude)` at point `i` and
/// `ratio(e)` the per-point constant estimate (skipped when `None`); the
/// reported constant is the minimum ratio.
fn certify<O: Objective + ?Sized>(
    property: Property,
    obj: &O,
    w_star: &DVector<f64>,
    f_star: f64,
    points: &[DVector<f64>],
    tol: Option<f64>,
    margin: impl Fn(usize, &PointEval) -> (f64, f64),
    ratio: impl Fn(&PointEval) -> Option<f64>,
) -> Result<CertReport> {
    check_nonempty(points)?;
    let mut margins = Vec::with_capacity(points.len());
    let mut scale: f64 = 0.0;
    let mut worst = (f64::INFINITY, 0usize);
    let mut est = f64::INFINITY;
    for (i, w) in points.iter().enumerate() {
        if w.len() != w_star.len() {
            return Err(Error::DimensionMismatch {
                expected: w_star.len(),
                got: w.len(),
            });
        }
        let e = evaluate(obj, w_star, f_star, w);
        let (m, mag) = margin(i, &e);
        scale = scale.max(mag);
        if m < worst.0 || (m.is_nan() && !worst.0.is_nan()) {
            worst = (m, i);
        }
        if let Some(r) = ratio(&e) {
            est = est.min(r);
        }
        margins.push(m);
    }
    let tolerance = tol.unwrap_or_else(|| default_tol(scale));
    Ok(CertReport {
        property,
        holds: worst.0 >= -tolerance,
        estimated_constant: if est.is_finite() { est } else { f64::NAN },
        worst_point: points[worst.1].iter().copied().collect(),
        worst_margin: worst.0,
        points_tested: points.len(),
        tolerance,
        margins,
        warnings: Vec::new(),
    })
}

fn gap_floor(f_star: f64) -> f64 {
    1e-12 * (1.0 + f_star.abs())
}

/// Margin `<grad f(w), w - w*> - rho (f(w) - f*)`.
pub fn check_quasar<O: Objective + ?Sized>(
    obj: &O,
    w_star: &DVector<f64>,
    rho: f64,
    points: &[DVector<f64>],
    tol: Option<f64>,
) -> Result<CertReport> {
    if !(rho > 0.0) {
        return Err(invalid("rho", "must be positive"));
    }
    let f_star = obj.value(w_star);
    let eps = gap_floor(f_star);
    certify(
        Property::Quasar,
        obj,
        w_star,
        f_star,
        points,
        tol,
        |_, e| (e.inner - rho * e.gap, e.inner.abs().max(rho * e.gap.abs())),
        |e| (e.gap > eps).then(|| e.inner / e.gap),
    )
}

/// Largest `rho` for which the quasar inequality holds on every point with
/// `f(w) > f* + eps_f`, clipped below at zero.
pub fn estimate_rho<O: Objective + ?Sized>(obj: &O, w_star: &DVector<f64>, points: &[DVector<f64>]) -> Result<f64> {
    check_nonempty(points)?;
    let f_star = obj.value(w_star);
    let eps = gap_floor(f_star);
    let mut best = f64::INFINITY;
    let mut used = 0usize;
    for w in points {
        let e = evaluate(obj, w_star, f_star, w);
        if e.gap > eps {
            best = best.min(e.inner / e.gap);
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::InsufficientSample { threshold: eps });
    }
    Ok(best.max(0.0))
}

/// Margin `<grad f(w), w - w*>/rho - (f(w) - f*) - mu/2 ||w - w*||^2`.
pub fn check_strong_quasar<O: Objective + ?Sized>(
    obj: &O,
    w_star: &DVector<f64>,
    rho: f64,
    mu: f64,
    points: &[DVector<f64>],
    tol: Option<f64>,
) -> Result<CertReport> {
    if !(rho > 0.0) {
        return Err(invalid("rho", "must be positive"));
    }
    if !(mu > 0.0) {
        return Err(invalid("mu", "must be positive"));
    }
    let f_star = obj.value(w_star);
    let mut report = certify(
        Property::StrongQuasar,
        obj,
        w_star,
        f_star,
        points,
        tol,
        |_, e| {
            let a = e.inner / rho;
            let b = 0.5 * mu * e.dist2;
            (a - e.gap - b, a.abs().max(e.gap.abs()).max(b))
        },
        |e| (e.dist2 > 0.0).then(|| 2.0 * (e.inner / rho - e.gap) / e.dist2),
    )?;
    if rho > 1.0 {
        report
            .warnings
            .push(format!("rho = {rho} lies outside the analysed range (0, 1]"));
    }
    Ok(report)
}

/// Margin `<grad f(w), w - w*> - C_v ||w - w*||^2`.
pub fn check_one_point_convex<O: Objective + ?Sized>(
    obj: &O,
    w_star: &DVector<f64>,
    c_v: f64,
    points: &[DVector<f64>],
    tol: Option<f64>,
) -> Result<CertReport> {
    let f_star = obj.value(w_star);
    certify(
        Property::OnePoint,
        obj,
        w_star,
        f_star,
        points,
        tol,
        |_, e| (e.inner - c_v * e.dist2, e.inner.abs().max(c_v.abs() * e.dist2)),
        |e| (e.dist2 > 0.0).then(|| e.inner / e.dist2),
    )
}

/// Margin `||grad f(w)||^2 - 2 nu (f(w) - f*)`.
pub fn check_pl<O: Objective + ?Sized>(
    obj: &O,
    f_star: f64,
    nu: f64,
    points: &[DVector<f64>],
    tol: Option<f64>,
) -> Result<CertReport> {
    check_nonempty(points)?;
    // The PL inequality does not reference w*; the first point stands in so
    // the shared driver can compute distances it then ignores.
    let anchor = points[0].clone();
    let eps = gap_floor(f_star);
    certify(
        Property::Pl,
        obj,
        &anchor,
        f_star,
        points,
        tol,
        |_, e| (e.grad2 - 2.0 * nu * e.gap, e.grad2.max(2.0 * nu.abs() * e.gap.abs())),
        |e| (e.gap > eps).then(|| e.grad2 / (2.0 * e.gap)),
    )
}

/// Margin `f(w) - f* - nu/2 ||w - w*||^2`.
pub fn check_qg<O: Objective + ?Sized>(
    obj: &O,
    w_star: &DVector<f64>,
    nu: f64,
    points: &[DVector<f64>],
    tol: Option<f64>,
) -> Result<CertReport> {
    let f_star = obj.value(w_star);
    certify(
        Property::Qg,
        obj,
        w_star,
        f_star,
        points,
        tol,
        |_, e| {
            let b = 0.5 * nu * e.dist2;
            (e.gap - b, e.gap.abs().max(b.abs()))
        },
        |e| (e.dist2 > 0.0).then(|| 2.0 * e.gap / e.dist2),
    )
}

/// A function `h(w, w*) >= 0` with coherence constant `C_v` and generalized
/// smoothness constant `C_l`.
pub struct CoherenceWitness<H> {
    pub h: H,
    pub c_v: f64,
    pub c_l: f64,
}

impl<H> CoherenceWitness<H>
where
    H: Fn(&DVector<f64>, &DVector<f64>) -> f64,
{
    pub fn new(h: H, c_v: f64, c_l: f64) -> Result<Self> {
        if !(c_v > 0.0 && c_l > 0.0) {
            return Err(invalid("C_v/C_l", "both must be positive"));
        }
        Ok(Self { h, c_v, c_l })
    }

    pub fn rho(&self) -> f64 {
        self.c_v / self.c_l
    }

    /// Checks `<grad f, w - w*> >= C_v h` and `f - f* <= C_l h` on `points`,
    /// along with `h >= 0` and `h(w*, w*) = 0`.
    pub fn verify<O: Objective + ?Sized>(
        &self,
        obj: &O,
        w_star: &DVector<f64>,
        points: &[DVector<f64>],
        tol: Option<f64>,
    ) -> Result<(CertReport, CertReport)> {
        let f_star = obj.value(w_star);
        let at_star = (self.h)(w_star, w_star);
        let hs: Vec<f64> = points.iter().map(|w| (self.h)(w, w_star)).collect();
        let mut coherence = certify(
            Property::Coherence,
            obj,
            w_star,
            f_star,
            points,
            tol,
            |i, e| {
                let b = self.c_v * hs[i];
                (e.inner - b, e.inner.abs().max(b.abs()))
            },
            |_| None,
        )?;
        let smooth = certify(
            Property::GenSmooth,
            obj,
            w_star,
            f_star,
            points,
            tol,
            |i, e| {
                let b = self.c_l * hs[i];
                (b - e.gap, e.gap.abs().max(b.abs()))
            },
            |_| None,
        )?;
        if at_star.abs() > coherence.tolerance {
            coherence.holds = false;
            coherence.warnings.push(format!("h(w*, w*) = {at_star}"));
        }
        if let Some(neg) = hs.iter().find(|&&v| v < 0.0) {
            coherence.holds = false;
            coherence.warnings.push(format!("h < 0 at a sampled point ({neg})"));
        }
        Ok((coherence, smooth))
    }
}

/// `rho = C_v / C_l`.
pub fn coherence_to_quasar(c_v: f64, c_l: f64) -> Result<f64> {
    if !(c_v > 0.0 && c_l > 0.0) {
        return Err(invalid("C_v/C_l", "both must be positive"));
    }
    Ok(c_v / c_l)
}

/// `rho = 2 alpha^2 / L0^2` for an `alpha`-increasing, `L0`-Lipschitz link.
pub fn glm_quasar_constant(alpha: f64, l0: f64) -> Result<f64> {
    if !(alpha > 0.0 && l0 > 0.0) {
        return Err(invalid("alpha/L0", "both must be positive"));
    }
    Ok(2.0 * alpha * alpha / (l0 * l0))
}

/// One-point convexity plus `rho_hat`-quasar convexity give
/// `(rho_hat / theta, 2 C_v (theta - 1) / rho_hat)`-strong quasar convexity
/// for any `theta > 1`.
pub fn one_point_to_strong_quasar(rho_hat: f64, c_v: f64, theta: f64) -> Result<(f64, f64)> {
    if !(theta > 1.0) {
        return Err(invalid("theta", format!("need theta > 1, got {theta}")));
    }
    if !(rho_hat > 0.0 && c_v > 0.0) {
        return Err(invalid("rho_hat/C_v", "both must be positive"));
    }
    Ok((rho_hat / theta, 2.0 * c_v * (theta - 1.0) / rho_hat))
}

/// QG plus `rho_hat`-quasar convexity give
/// `(rho_hat theta, nu (1 - theta) / theta)`-strong quasar convexity for
/// `0 < theta < 1`.
pub fn qg_to_strong_quasar(rho_hat: f64, nu: f64, theta: f64) -> Result<(f64, f64)> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(invalid("theta", format!("need 0 < theta < 1, got {theta}")));
    }
    if !(rho_hat > 0.0 && nu > 0.0) {
        return Err(invalid("rho_hat/nu", "both must be positive"));
    }
    Ok((rho_hat * theta, nu * (1.0 - theta) / theta))
}

/// `nu = alpha^2 lambda_min`.
pub fn glm_qg_constant(alpha: f64, lambda_min: f64) -> Result<f64> {
    if !(alpha > 0.0 && lambda_min > 0.0) {
        return Err(invalid("alpha/lambda_min", "both must be positive"));
    }
    Ok(alpha * alpha * lambda_min)
}

/// Tolerance for the strong-quasar check implied by the one-point route, given
/// the tolerances of the two premises.
pub fn one_point_route_tol(rho_hat: f64, theta: f64, tol_one_point: f64, tol_quasar: f64) -> f64 {
    ((theta - 1.0) * tol_one_point + tol_quasar) / rho_hat
}

/// Same for the QG route.
pub fn qg_route_tol(rho_hat: f64, theta: f64, tol_qg: f64, tol_quasar: f64) -> f64 {
    tol_quasar / (rho_hat * theta) + (1.0 - theta) * tol_qg / theta
}

/// Generalized smoothness constant of the ReLU GLM, `1/2 mean ||x_i||^2`.
pub fn relu_gen_smooth_constant(problem: &GlmProblem) -> f64 {
    0.5 * problem.mean_sq_norm()
}

/// `max E[((w + w*)^T x)^2 ||x||^2]` over the balls of radius `radius` around
/// `w*` and `-w*`, sampled at both centers plus `mc_points` antithetic pairs on
/// each sphere. Directions depend only on `rng`, so for a fixed seed the
/// estimate is nondecreasing in `radius`.
pub fn phase_retrieval_cr(problem: &GlmProblem, radius: f64, mc_points: usize, rng: &mut SeededRng) -> Result<f64> {
    if !(radius >= 0.0) {
        return Err(invalid("radius", "must be nonnegative"));
    }
    let x = &problem.x;
    let weights = DVector::from_fn(problem.n(), |i, _| x.row(i).norm_squared());
    let m = weighted_gram(x, &weights);
    let quad = |u: &DVector<f64>| u.dot(&(&m * u));
    let ws = &problem.w_star;
    let mut best = quad(&(ws * 2.0)).max(0.0);
    for _ in 0..mc_points {
        let v = unit_direction(rng, problem.d());
        for center_sign in [1.0, -1.0] {
            for s in [1.0, -1.0] {
                let w = ws * center_sign + &v * (s * radius);
                best = best.max(quad(&(w + ws)));
            }
        }
    }
    Ok(best)
}

fn weighted_gram(x: &DMatrix<f64>, weights: &DVector<f64>) -> DMatrix<f64> {
    let mut scaled = x.clone();
    for (mut row, &wt) in scaled.row_iter_mut().zip(weights.iter()) {
        row *= wt;
    }
    let mut g = x.tr_mul(&scaled) / x.nrows() as f64;
    linalg::symmetrize(&mut g);
    g
}

/// `max ||grad f(a) - grad f(b)|| / ||a - b||` over the given pairs.
pub fn estimate_smoothness_l<O: Objective + ?Sized>(obj: &O, pairs: &[(DVector<f64>, DVector<f64>)]) -> f64 {
    pairs
        .iter()
        .filter_map(|(a, b)| {
            let gap = (a - b).norm();
            (gap > 0.0).then(|| (obj.gradient(a) - obj.gradient(b)).norm() / gap)
        })
        .fold(0.0, f64::max)
}

fn unit_direction(rng: &mut SeededRng, d: usize) -> DVector<f64> {
    loop {
        let v = rng.normal_vector(d);
        let n = v.norm();
        if n > 0.0 {
            return v / n;
        }
    }
}

/// `count` points uniform in the ball of radius `radius` around `center`.
pub fn sample_ball(rng: &mut SeededRng, center: &DVector<f64>, radius: f64, count: usize) -> Vec<DVector<f64>> {
    let d = center.len();
    (0..count)
        .map(|_| {
            let dir = unit_direction(rng, d);
            let r = radius * rng.uniform_open_closed().powf(1.0 / d as f64);
            center + dir * r
        })
        .collect()
}

/// Pairs of points drawn from the same ball, for smoothness estimation.
pub fn sample_pairs(
    rng: &mut SeededRng,
    center: &DVector<f64>,
    radius: f64,
    count: usize,
) -> Vec<(DVector<f64>, DVector<f64>)> {
    (0..count)
        .map(|_| {
            let mut two = sample_ball(rng, center, radius, 2);
            let b = two.pop().unwrap_or_else(|| center.clone());
            let a = two.pop().unwrap_or_else(|| center.clone());
            (a, b)
        })
        .collect()
}

/// `lambda_min` of the sample second moment together with a bootstrap
/// standard error over `replicates` row resamples.
pub fn second_moment_lambda_min(problem: &GlmProblem, replicates: usize, rng: &mut SeededRng) -> (f64, f64) {
    let n = problem.n();
    let lam = linalg::lambda_min(&(problem.x.tr_mul(&problem.x) / n as f64));
    if replicates < 2 {
        return (lam, 0.0);
    }
    let mut counts = DVector::zeros(n);
    let mut draws = Vec::with_capacity(replicates);
    for _ in 0..replicates {
        counts.fill(0.0);
        for _ in 0..n {
            counts[rng.index(n)] += 1.0;
        }
        draws.push(linalg::lambda_min(&weighted_gram(&problem.x, &counts)));
    }
    let mean = draws.iter().sum::<f64>() / replicates as f64;
    let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (replicates - 1) as f64;
    (lam, var.sqrt())
}
