//! Objectives and oracles shared by several test targets.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use quasar_opt::event_clock::SeededRng;
use quasar_opt::hss::{LineSearchOutcome, LineSearchQuery};
use quasar_opt::linalg::lambda_max;
use quasar_opt::objectives::{FnObjective, Objective};

pub type BoxedObjective = Box<dyn Objective>;

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// A plateau of height `h` dropping at `u0` (steepness `k`) into a smoothed
/// V `s sqrt((u - u0)^2 + delta^2)`. On the segment from `z = 0` to `w = 1`
/// the line-search exit test only passes in a band of width about `10/k`
/// around the drop.
#[derive(Debug, Clone, Copy)]
pub struct Cliff {
    pub h: f64,
    pub k: f64,
    pub u0: f64,
    pub s: f64,
    pub delta: f64,
}

pub const CLIFFS: [Cliff; 10] = [
    Cliff { h: 2.0, k: 2e4, u0: 0.8, s: 1.0, delta: 1e-4 },
    Cliff { h: 2.0, k: 3e4, u0: 0.85, s: 1.0, delta: 1e-4 },
    Cliff { h: 3.0, k: 2e4, u0: 0.75, s: 1.5, delta: 1e-4 },
    Cliff { h: 2.0, k: 2e4, u0: 0.9, s: 1.0, delta: 1e-4 },
    Cliff { h: 2.0, k: 2.5e4, u0: 0.77, s: 1.0, delta: 1e-4 },
    Cliff { h: 3.0, k: 2e4, u0: 0.83, s: 2.0, delta: 1e-4 },
    Cliff { h: 4.0, k: 2e4, u0: 0.8, s: 2.0, delta: 1e-4 },
    Cliff { h: 2.0, k: 5e4, u0: 0.88, s: 1.0, delta: 1e-4 },
    Cliff { h: 2.5, k: 3e4, u0: 0.78, s: 1.2, delta: 1e-4 },
    Cliff { h: 2.0, k: 2e4, u0: 0.93, s: 1.0, delta: 1e-4 },
];

impl Cliff {
    pub fn objective(self) -> BoxedObjective {
        let Cliff { h, k, u0, s, delta } = self;
        Box::new(FnObjective::new(
            1,
            move |w: &DVector<f64>| {
                let u = w[0];
                h * logistic(-k * (u - u0)) + s * ((u - u0).powi(2) + delta * delta).sqrt()
            },
            move |w: &DVector<f64>| {
                let u = w[0];
                let sg = logistic(-k * (u - u0));
                DVector::from_element(1, -h * k * sg * (1.0 - sg) + s * (u - u0) / ((u - u0).powi(2) + delta * delta).sqrt())
            },
        ))
    }

    /// Bound on `|f''|`: the logistic's second derivative peaks at `1/(6 sqrt 3)`.
    pub fn smoothness(self) -> f64 {
        self.h * self.k * self.k / (6.0 * 3f64.sqrt()) + self.s / self.delta
    }

    pub fn query(self) -> LineSearchQuery {
        LineSearchQuery::new(DVector::from_element(1, 1.0), DVector::from_element(1, 0.0), 0.5, 2.0, 0.0).unwrap()
    }
}

/// `1/2 u^T A u + a sum_i sin(k u_i)/k` with a random SPD `A`, and its
/// smoothness bound `lambda_max(A) + a k`.
pub fn wavy_quadratic(seed: u64) -> (BoxedObjective, f64) {
    let mut rng = SeededRng::new(seed, 40);
    let r = DMatrix::from_fn(2, 2, |_, _| rng.standard_normal());
    let a_mat = r.transpose() * r + DMatrix::identity(2, 2) * 0.1;
    let amp = 2.0 * rng.uniform_open_closed();
    let freq = 0.5 + 2.5 * rng.uniform_open_closed();
    let l = lambda_max(&a_mat) + amp * freq;
    let a2 = a_mat.clone();
    let f = FnObjective::new(
        2,
        move |w: &DVector<f64>| 0.5 * w.dot(&(&a_mat * w)) + amp * w.iter().map(|u| (freq * u).sin()).sum::<f64>() / freq,
        move |w: &DVector<f64>| &a2 * w + w.map(|u| amp * (freq * u).cos()),
    );
    (Box::new(f), l)
}

/// A random query for [`wavy_quadratic`].
pub fn random_query(seed: u64) -> LineSearchQuery {
    let mut rng = SeededRng::new(seed, 41);
    let w = rng.normal_vector(2) * 2.0;
    let z = rng.normal_vector(2) * 2.0;
    let b = rng.uniform_open_closed();
    let c = 5.0 * rng.uniform_open_closed();
    let eps = if rng.uniform_open_closed() < 0.5 { 0.0 } else { 0.1 * rng.uniform_open_closed() };
    LineSearchQuery::new(w, z, b, c, eps).unwrap()
}

/// The search contract: the returned `alpha` passes the exit test (up to
/// rounding in re-evaluating it) unless the bisection cap was hit.
pub fn honours_exit_test<O: Objective + ?Sized>(obj: &O, q: &LineSearchQuery, out: &LineSearchOutcome) -> bool {
    if out.capped {
        return true;
    }
    let scale = q.c * obj.value(&q.w).abs() + q.c * obj.value(&q.point(out.alpha)).abs() + (&q.w - &q.z).norm_squared() * (1.0 + q.b);
    (0.0..=1.0).contains(&out.alpha) && q.exit_residual(obj, out.alpha) <= 1e-12 * (1.0 + scale)
}

/// Smallest point of an `n`-point grid on `[0, upper]` passing the exit test.
pub fn smallest_passing<O: Objective + ?Sized>(obj: &O, q: &LineSearchQuery, upper: f64, n: usize) -> Option<f64> {
    (0..n)
        .map(|i| upper * i as f64 / (n - 1) as f64)
        .find(|&a| q.exit_residual(obj, a) <= 0.0)
}

/// `1 - (eps + p) / (L ||w - z||^2)`, the start of the bisection.
pub fn bisection_start(q: &LineSearchQuery, l: f64) -> f64 {
    let nd2 = (&q.w - &q.z).norm_squared();
    (1.0 - (q.eps_tilde + q.b * nd2) / (l * nd2)).clamp(0.0, 1.0)
}
