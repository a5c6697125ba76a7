//! Objectives: link functions, GLM square-loss risks, pseudo-gradients and
//! synthetic data, plus a few closed-form test functions.

mod glm;
mod io;
mod link;

use std::cell::Cell;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

pub use glm::{
    empirical_objective, estimate_glm_constants, generate_problem, initial_point,
    pseudo_gradient, second_moment, secant_matrix, GlmConstants, GlmObjective, GlmProblem,
};
pub use io::{read_problem, write_problem, ProblemMeta};
pub use link::{LinkFunction, LinkKind};

/// A differentiable function of a `d`-vector.
pub trait Objective {
    fn dim(&self) -> usize;

    fn value(&self, w: &DVector<f64>) -> f64;

    fn gradient(&self, w: &DVector<f64>) -> DVector<f64>;

    fn value_and_gradient(&self, w: &DVector<f64>) -> (f64, DVector<f64>) {
        (self.value(w), self.gradient(w))
    }

    /// Known smoothness constant, if any.
    fn smoothness(&self) -> Option<f64> {
        None
    }
}

impl<T: Objective + ?Sized> Objective for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, w: &DVector<f64>) -> f64 {
        (**self).value(w)
    }
    fn gradient(&self, w: &DVector<f64>) -> DVector<f64> {
        (**self).gradient(w)
    }
    fn value_and_gradient(&self, w: &DVector<f64>) -> (f64, DVector<f64>) {
        (**self).value_and_gradient(w)
    }
    fn smoothness(&self) -> Option<f64> {
        (**self).smoothness()
    }
}

/// Gradient and function evaluation counts charged to one run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCounter {
    pub grad_calls: u64,
    pub func_calls: u64,
}

impl EvalCounter {
    pub fn add(&mut self, other: EvalCounter) {
        self.grad_calls += other.grad_calls;
        self.func_calls += other.func_calls;
    }
}

/// Wraps an objective and counts every evaluation made through it.
///
/// A combined value-and-gradient call is charged as one of each.
pub struct Metered<'a, O: Objective + ?Sized> {
    inner: &'a O,
    grads: Cell<u64>,
    funcs: Cell<u64>,
}

impl<'a, O: Objective + ?Sized> Metered<'a, O> {
    pub fn new(inner: &'a O) -> Self {
        Self {
            inner,
            grads: Cell::new(0),
            funcs: Cell::new(0),
        }
    }

    pub fn counter(&self) -> EvalCounter {
        EvalCounter {
            grad_calls: self.grads.get(),
            func_calls: self.funcs.get(),
        }
    }

    pub fn inner(&self) -> &'a O {
        self.inner
    }
}

impl<O: Objective + ?Sized> Objective for Metered<'_, O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn value(&self, w: &DVector<f64>) -> f64 {
        self.funcs.set(self.funcs.get() + 1);
        self.inner.value(w)
    }

    fn gradient(&self, w: &DVector<f64>) -> DVector<f64> {
        self.grads.set(self.grads.get() + 1);
        self.inner.gradient(w)
    }

    fn value_and_gradient(&self, w: &DVector<f64>) -> (f64, DVector<f64>) {
        self.funcs.set(self.funcs.get() + 1);
        self.grads.set(self.grads.get() + 1);
        self.inner.value_and_gradient(w)
    }

    fn smoothness(&self) -> Option<f64> {
        self.inner.smoothness()
    }
}

/// Separable quadratic `f(w) = 1/2 sum_i h_i (w_i - c_i)^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic {
    pub curvature: DVector<f64>,
    pub center: DVector<f64>,
}

impl Quadratic {
    pub fn new(curvature: DVector<f64>, center: DVector<f64>) -> Self {
        assert_eq!(curvature.len(), center.len());
        Self { curvature, center }
    }

    /// `c/2 ||w||^2` in dimension `d`.
    pub fn isotropic(d: usize, c: f64) -> Self {
        Self::new(DVector::from_element(d, c), DVector::zeros(d))
    }

    /// Curvatures spread geometrically from `mu` to `l`, minimizer at `center`.
    pub fn conditioned(mu: f64, l: f64, center: DVector<f64>) -> Self {
        let d = center.len();
        let curvature = if d == 1 {
            DVector::from_element(1, l)
        } else {
            DVector::from_fn(d, |i, _| {
                let s = i as f64 / (d - 1) as f64;
                mu * (l / mu).powf(s)
            })
        };
        Self::new(curvature, center)
    }

    pub fn minimizer(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn min_curvature(&self) -> f64 {
        self.curvature.min()
    }
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, w: &DVector<f64>) -> f64 {
        0.5 * self
            .curvature
            .iter()
            .zip(w.iter().zip(self.center.iter()))
            .map(|(h, (x, c))| h * (x - c) * (x - c))
            .sum::<f64>()
    }

    fn gradient(&self, w: &DVector<f64>) -> DVector<f64> {
        (w - &self.center).component_mul(&self.curvature)
    }

    fn smoothness(&self) -> Option<f64> {
        Some(self.curvature.max())
    }
}

/// Objective assembled from closures.
pub struct FnObjective<F, G> {
    dim: usize,
    f: F,
    g: G,
    smoothness: Option<f64>,
}

impl<F, G> FnObjective<F, G>
where
    F: Fn(&DVector<f64>) -> f64,
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    pub fn new(dim: usize, f: F, g: G) -> Self {
        Self {
            dim,
            f,
            g,
            smoothness: None,
        }
    }

    pub fn with_smoothness(mut self, l: f64) -> Self {
        self.smoothness = Some(l);
        self
    }
}

impl<F, G> Objective for FnObjective<F, G>
where
    F: Fn(&DVector<f64>) -> f64,
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, w: &DVector<f64>) -> f64 {
        (self.f)(w)
    }
    fn gradient(&self, w: &DVector<f64>) -> DVector<f64> {
        (self.g)(w)
    }
    fn smoothness(&self) -> Option<f64> {
        self.smoothness
    }
}
