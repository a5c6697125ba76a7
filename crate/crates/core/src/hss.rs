//! Accelerated gradient descent with a binary line search on the mixing
//! coefficient, for strongly quasar-convex and quasar-convex objectives.
//!
//! Every function and gradient evaluation made by the line search is charged
//! to the run, so gradient-call counts reflect the true cost per iteration.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::continuized::{with_last_w, Recorder, RunOptions, RunOutput};
use crate::error::{invalid, Error, Result};
use crate::objectives::{Metered, Objective};

pub const DEFAULT_MAX_BISECT: usize = 100;

/// Inputs of one line search between `w` (at `alpha = 1`) and `z` (at
/// `alpha = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct LineSearchQuery {
    pub w: DVector<f64>,
    pub z: DVector<f64>,
    pub b: f64,
    pub c: f64,
    pub eps_tilde: f64,
    pub guess: Option<f64>,
}

impl LineSearchQuery {
    pub fn new(w: DVector<f64>, z: DVector<f64>, b: f64, c: f64, eps_tilde: f64) -> Result<Self> {
        if w.len() != z.len() {
            return Err(Error::DimensionMismatch {
                expected: w.len(),
                got: z.len(),
            });
        }
        for (name, v) in [("b", b), ("c", c), ("eps_tilde", eps_tilde)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(name, "must be nonnegative and finite"));
            }
        }
        Ok(Self {
            w,
            z,
            b,
            c,
            eps_tilde,
            guess: None,
        })
    }

    pub fn with_guess(mut self, guess: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&guess) {
            return Err(invalid("guess", "must lie in [0, 1]"));
        }
        self.guess = Some(guess);
        Ok(self)
    }

    /// `alpha w + (1 - alpha) z`.
    pub fn point(&self, alpha: f64) -> DVector<f64> {
        &self.z + (&self.w - &self.z) * alpha
    }

    /// `c g(alpha) + alpha (g'(alpha) - alpha p) - c g(1) - eps_tilde`; the
    /// search accepts `alpha` when this is `<= 0`.
    pub fn exit_residual<O: Objective + ?Sized>(&self, obj: &O, alpha: f64) -> f64 {
        let d = &self.w - &self.z;
        let p = self.b * d.norm_squared();
        let (ga, grad) = obj.value_and_gradient(&self.point(alpha));
        let g1 = obj.value(&self.w);
        self.c * ga + alpha * (grad.dot(&d) - alpha * p) - self.c * g1 - self.eps_tilde
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineSearchExit {
    Guess,
    One,
    Zero,
    Bisection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineSearchOutcome {
    pub alpha: f64,
    pub exit: LineSearchExit,
    pub bisections: usize,
    /// The bisection loop hit `max_bisect` before the exit test passed.
    pub capped: bool,
    /// Gradient at `alpha w + (1 - alpha) z` if the search computed it.
    pub grad_at_alpha: Option<DVector<f64>>,
}

/// Binary search for the mixing coefficient `alpha` in `[0, 1]`.
pub fn binary_line_search<O: Objective + ?Sized>(
    obj: &O,
    q: &LineSearchQuery,
    l: f64,
    max_bisect: usize,
) -> Result<LineSearchOutcome> {
    if !(l > 0.0) {
        return Err(invalid("L", "must be positive"));
    }
    let d = &q.w - &q.z;
    let nd2 = d.norm_squared();
    let p = q.b * nd2;
    let eval = |alpha: f64| {
        let (v, g) = obj.value_and_gradient(&q.point(alpha));
        let slope = g.dot(&d);
        (v, slope, g)
    };
    let done = |alpha: f64, exit, bisections, capped, grad| LineSearchOutcome {
        alpha,
        exit,
        bisections,
        capped,
        grad_at_alpha: grad,
    };

    let (g1, dg1, grad1) = eval(1.0);
    if let Some(guess) = q.guess {
        let (gg, dgg, grad) = eval(guess);
        if q.c * gg + guess * (dgg - guess * p) <= q.c * g1 + q.eps_tilde {
            return Ok(done(guess, LineSearchExit::Guess, 0, false, Some(grad)));
        }
    }
    if dg1 <= q.eps_tilde + p {
        return Ok(done(1.0, LineSearchExit::One, 0, false, Some(grad1)));
    }
    if q.c == 0.0 || obj.value(&q.z) <= g1 + q.eps_tilde / q.c {
        return Ok(done(0.0, LineSearchExit::Zero, 0, false, None));
    }

    let rhs = q.c * g1 + q.eps_tilde;
    let tau = (1.0 - (q.eps_tilde + p) / (l * nd2)).clamp(0.0, 1.0);
    let (mut lo, mut hi, mut alpha) = (0.0, tau, tau);
    let (g_tau, mut dga, mut grad) = eval(tau);
    let mut ga = g_tau;
    let mut n = 0;
    while q.c * ga + alpha * (dga - alpha * p) > rhs {
        if n == max_bisect {
            return Ok(done(alpha, LineSearchExit::Bisection, n, true, Some(grad)));
        }
        alpha = 0.5 * (lo + hi);
        (ga, dga, grad) = eval(alpha);
        n += 1;
        if ga <= g_tau {
            hi = alpha;
        } else {
            lo = alpha;
        }
    }
    Ok(done(alpha, LineSearchExit::Bisection, n, false, Some(grad)))
}

/// `theta_k = theta_{k-1}/2 (sqrt(theta_{k-1}^2 + 4) - theta_{k-1})` from
/// `theta_{-1} = 1`; returns `theta_0 .. theta_{n-1}`.
pub fn theta_sequence(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut theta: f64 = 1.0;
    for _ in 0..n {
        theta = next_theta(theta);
        out.push(theta);
    }
    out
}

fn next_theta(prev: f64) -> f64 {
    // Same value as prev/2 (sqrt(prev^2 + 4) - prev), without the cancellation.
    2.0 * prev / ((prev * prev + 4.0).sqrt() + prev)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HssOptions {
    pub max_bisect: usize,
}

impl Default for HssOptions {
    fn default() -> Self {
        Self {
            max_bisect: DEFAULT_MAX_BISECT,
        }
    }
}

/// Per-step coefficients of one HSS variant.
struct Variant {
    b: f64,
    c: f64,
    eps_tilde: f64,
    tau_prime: f64,
    gamma: f64,
    gamma_prime: f64,
}

fn hss_loop<O: Objective + ?Sized>(
    algo: &str,
    params: Vec<(String, f64)>,
    obj: &O,
    w0: &DVector<f64>,
    z0: &DVector<f64>,
    l: f64,
    opts: &RunOptions,
    hss: HssOptions,
    mut variant: impl FnMut(usize) -> Variant,
) -> Result<RunOutput> {
    let d = obj.dim();
    for v in [w0, z0] {
        if v.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: v.len(),
            });
        }
    }
    let metered = Metered::new(obj);
    let mut rec = Recorder::new(obj, opts, algo, params);
    let mut w = w0.clone();
    let mut z = z0.clone();
    rec.observe(0, 0.0, 0, &w, &z, true)?;
    let mut k_done = 0;
    let mut counted = metered.counter();
    for k in 0..opts.k_max {
        let var = variant(k);
        let q = LineSearchQuery {
            w: w.clone(),
            z: z.clone(),
            b: var.b,
            c: var.c,
            eps_tilde: var.eps_tilde,
            guess: None,
        };
        let ls = binary_line_search(&metered, &q, l, hss.max_bisect)?;
        let v = q.point(ls.alpha);
        let g = match ls.grad_at_alpha {
            Some(g) => g,
            None => metered.gradient(&v),
        };
        let now = metered.counter();
        if let Some(b) = opts.grad_budget {
            if now.grad_calls > b {
                break;
            }
        }
        counted = now;
        let z_next = &z + (&v - &z) * var.tau_prime - &g * var.gamma_prime;
        let w_next = v - g * var.gamma;
        let last_w = std::mem::replace(&mut w, w_next);
        z = z_next;
        k_done = k + 1;
        if let Err(e) = rec.observe(k_done, k_done as f64, now.grad_calls, &w, &z, false) {
            return Err(with_last_w(e, &last_w));
        }
    }
    rec.close(k_done, k_done as f64, counted.grad_calls, &w, &z)?;
    let mut trace = rec.trace;
    trace.func_calls = counted.func_calls;
    Ok(RunOutput {
        trace,
        w,
        z,
        states: rec.states,
    })
}

/// Line-search AGD for `(rho, mu)`-strongly quasar-convex `L`-smooth `f`.
///
/// The `z` update mixes toward `v` with `tau' = rho sqrt(mu/L)`.
pub fn hss_agd_strong<O: Objective + ?Sized>(
    obj: &O,
    w0: &DVector<f64>,
    z0: &DVector<f64>,
    rho: f64,
    mu: f64,
    l: f64,
    opts: &RunOptions,
    hss: HssOptions,
) -> Result<RunOutput> {
    for (name, v) in [("rho", rho), ("mu", mu), ("L", l)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(invalid(name, "must be positive and finite"));
        }
    }
    let params = vec![("rho".into(), rho), ("mu".into(), mu), ("L".into(), l)];
    let fixed = Variant {
        b: rho * mu / 2.0,
        c: (l / mu).sqrt(),
        eps_tilde: 0.0,
        tau_prime: rho * (mu / l).sqrt(),
        gamma: 1.0 / l,
        gamma_prime: 1.0 / (mu * l).sqrt(),
    };
    hss_loop("hss-strong", params, obj, w0, z0, l, opts, hss, |_| Variant { ..fixed })
}

/// Line-search AGD for `rho`-quasar-convex `L`-smooth `f`, targeting accuracy
/// `eps`.
///
/// The `z` step at iteration `k` is `rho / (L theta_k)`.
pub fn hss_agd_quasar<O: Objective + ?Sized>(
    obj: &O,
    w0: &DVector<f64>,
    z0: &DVector<f64>,
    rho: f64,
    l: f64,
    eps: f64,
    opts: &RunOptions,
    hss: HssOptions,
) -> Result<RunOutput> {
    for (name, v) in [("rho", rho), ("L", l), ("eps", eps)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(invalid(name, "must be positive and finite"));
        }
    }
    let params = vec![("rho".into(), rho), ("L".into(), l), ("eps".into(), eps)];
    let mut theta = 1.0;
    hss_loop("hss-quasar", params, obj, w0, z0, l, opts, hss, |_| {
        theta = next_theta(theta);
        Variant {
            b: 0.0,
            c: rho * (1.0 / theta - 1.0),
            eps_tilde: rho * eps / 2.0,
            tau_prime: 0.0,
            gamma: 1.0 / l,
            gamma_prime: rho / (l * theta),
        }
    })
}
