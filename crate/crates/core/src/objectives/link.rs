use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LinkKind {
    Identity,
    Logistic,
    Relu,
    LeakyRelu { alpha: f64 },
    Quadratic,
}

/// Scalar link `sigma` of a generalized linear model.
///
/// The derivative at a kink follows the subgradient convention: ReLU has
/// `sigma'(0) = 0` and Leaky-ReLU has `sigma'(0) = alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkFunction {
    kind: LinkKind,
    /// User-supplied increase constant. Only meaningful for the logistic link,
    /// which is `alpha`-increasing only on bounded inputs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    increase_override: Option<f64>,
}

impl LinkFunction {
    pub fn identity() -> Self {
        Self::from_kind(LinkKind::Identity)
    }

    pub fn logistic() -> Self {
        Self::from_kind(LinkKind::Logistic)
    }

    pub fn relu() -> Self {
        Self::from_kind(LinkKind::Relu)
    }

    pub fn quadratic() -> Self {
        Self::from_kind(LinkKind::Quadratic)
    }

    /// `max(alpha z, z)` with `0 < alpha <= 1`.
    pub fn leaky_relu(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(invalid("alpha", format!("leaky ReLU needs 0 < alpha <= 1, got {alpha}")));
        }
        Ok(Self::from_kind(LinkKind::LeakyRelu { alpha }))
    }

    fn from_kind(kind: LinkKind) -> Self {
        Self {
            kind,
            increase_override: None,
        }
    }

    /// Supplies the increase constant for a link that has none globally
    /// (logistic on a bounded region).
    pub fn with_increase_alpha(mut self, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(invalid("increase_alpha", "must be positive"));
        }
        self.increase_override = Some(alpha);
        Ok(self)
    }

    /// Parses a CLI/config name: `identity`, `logistic`, `relu`, `leaky_relu`
    /// (alpha required) or `quadratic`.
    pub fn parse(name: &str, alpha: Option<f64>) -> Result<Self> {
        match name.to_ascii_lowercase().replace('-', "_").as_str() {
            "identity" | "linear" => Ok(Self::identity()),
            "logistic" | "sigmoid" => Ok(Self::logistic()),
            "relu" => Ok(Self::relu()),
            "leaky_relu" | "leakyrelu" => {
                Self::leaky_relu(alpha.ok_or_else(|| invalid("alpha", "leaky_relu needs --alpha"))?)
            }
            "quadratic" | "phase_retrieval" => Ok(Self::quadratic()),
            other => Err(invalid("link", format!("unknown link `{other}`"))),
        }
    }

    pub fn kind(&self) -> LinkKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            LinkKind::Identity => "identity",
            LinkKind::Logistic => "logistic",
            LinkKind::Relu => "relu",
            LinkKind::LeakyRelu { .. } => "leaky_relu",
            LinkKind::Quadratic => "quadratic",
        }
    }

    /// Shape parameter (leaky slope), if the link has one.
    pub fn shape_alpha(&self) -> Option<f64> {
        match self.kind {
            LinkKind::LeakyRelu { alpha } => Some(alpha),
            _ => None,
        }
    }

    #[inline]
    pub fn eval(&self, z: f64) -> f64 {
        match self.kind {
            LinkKind::Identity => z,
            LinkKind::Logistic => logistic(z),
            LinkKind::Relu => z.max(0.0),
            LinkKind::LeakyRelu { alpha } => {
                if z > 0.0 {
                    z
                } else {
                    alpha * z
                }
            }
            LinkKind::Quadratic => z * z,
        }
    }

    #[inline]
    pub fn deriv(&self, z: f64) -> f64 {
        match self.kind {
            LinkKind::Identity => 1.0,
            LinkKind::Logistic => {
                let s = logistic(z);
                s * (1.0 - s)
            }
            LinkKind::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            LinkKind::LeakyRelu { alpha } => {
                if z > 0.0 {
                    1.0
                } else {
                    alpha
                }
            }
            LinkKind::Quadratic => 2.0 * z,
        }
    }

    /// `(sigma(z), sigma'(z))` with one exponential for the logistic link.
    #[inline]
    pub fn eval_and_deriv(&self, z: f64) -> (f64, f64) {
        match self.kind {
            LinkKind::Logistic => {
                let s = logistic(z);
                (s, s * (1.0 - s))
            }
            _ => (self.eval(z), self.deriv(z)),
        }
    }

    /// Lipschitz constant `L_0`; `None` when unbounded.
    pub fn lipschitz(&self) -> Option<f64> {
        match self.kind {
            LinkKind::Identity | LinkKind::Relu | LinkKind::LeakyRelu { .. } => Some(1.0),
            LinkKind::Logistic => Some(0.25),
            LinkKind::Quadratic => None,
        }
    }

    /// Global lower bound on `sigma'`, `0` if the link is not increasing.
    pub fn increase_alpha(&self) -> f64 {
        if let Some(a) = self.increase_override {
            return a;
        }
        match self.kind {
            LinkKind::Identity => 1.0,
            LinkKind::LeakyRelu { alpha } => alpha,
            LinkKind::Logistic | LinkKind::Relu | LinkKind::Quadratic => 0.0,
        }
    }

    /// Points where `sigma` is not differentiable.
    pub fn kinks(&self) -> &'static [f64] {
        match self.kind {
            LinkKind::Relu | LinkKind::LeakyRelu { .. } => &[0.0],
            _ => &[],
        }
    }

    /// Secant slope `psi(a, b) = (sigma(a) - sigma(b)) / (a - b)`, with
    /// `psi(a, a) = sigma'(a)`.
    pub fn secant(&self, a: f64, b: f64) -> f64 {
        match self.kind {
            LinkKind::Identity => 1.0,
            LinkKind::Quadratic => a + b,
            LinkKind::Relu | LinkKind::LeakyRelu { .. } => {
                if a == b || (a > 0.0) == (b > 0.0) {
                    self.deriv(a)
                } else {
                    (self.eval(a) - self.eval(b)) / (a - b)
                }
            }
            LinkKind::Logistic => {
                let gap = a - b;
                if gap.abs() <= 1e-6 * (1.0 + a.abs().max(b.abs())) {
                    self.deriv(0.5 * (a + b))
                } else {
                    (self.eval(a) - self.eval(b)) / gap
                }
            }
        }
    }
}

impl fmt::Display for LinkFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            LinkKind::LeakyRelu { alpha } => write!(f, "leaky_relu({alpha})"),
            _ => f.write_str(self.name()),
        }
    }
}

#[inline]
fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_links() -> Vec<LinkFunction> {
        vec![
            LinkFunction::identity(),
            LinkFunction::logistic(),
            LinkFunction::relu(),
            LinkFunction::leaky_relu(0.3).unwrap(),
            LinkFunction::quadratic(),
        ]
    }

    #[test]
    fn leaky_relu_constants() {
        let l = LinkFunction::leaky_relu(0.5).unwrap();
        assert_eq!(l.eval(2.0), 2.0);
        assert_eq!(l.eval(-2.0), -1.0);
        assert_eq!(l.lipschitz(), Some(1.0));
        assert_eq!(l.increase_alpha(), 0.5);
        assert!(LinkFunction::leaky_relu(0.0).is_err());
        assert!(LinkFunction::leaky_relu(1.5).is_err());
    }

    #[test]
    fn logistic_constants() {
        let l = LinkFunction::logistic();
        assert_eq!(l.lipschitz(), Some(0.25));
        assert_eq!(l.increase_alpha(), 0.0);
        assert_eq!(l.with_increase_alpha(0.01).unwrap().increase_alpha(), 0.01);
        assert!((l.eval(0.0) - 0.5).abs() < 1e-15);
        assert!(l.eval(-800.0) >= 0.0 && l.eval(800.0) <= 1.0);
    }

    #[test]
    fn relu_kink_convention() {
        assert_eq!(LinkFunction::relu().deriv(0.0), 0.0);
        assert_eq!(LinkFunction::leaky_relu(0.2).unwrap().deriv(0.0), 0.2);
    }

    #[test]
    fn derivative_matches_central_differences() {
        let pts = [-3.1, -1.7, -0.4, 0.25, 0.9, 2.2, 4.0];
        for link in all_links() {
            for &z in &pts {
                let h = 1e-6;
                let fd = (link.eval(z + h) - link.eval(z - h)) / (2.0 * h);
                let d = link.deriv(z);
                assert!(
                    (fd - d).abs() <= 1e-6 * (1.0 + d.abs()),
                    "{link} at {z}: {fd} vs {d}"
                );
            }
        }
    }

    #[test]
    fn secant_matches_definition() {
        for link in all_links() {
            for &(a, b) in &[(1.0, -2.0), (0.3, 0.7), (-1.5, -0.2), (2.0, 2.0)] {
                let psi = link.secant(a, b);
                let expected = if a == b {
                    link.deriv(a)
                } else {
                    (link.eval(a) - link.eval(b)) / (a - b)
                };
                assert!((psi - expected).abs() < 1e-9, "{link} ({a},{b})");
            }
        }
    }

    #[test]
    fn parse_names() {
        assert_eq!(LinkFunction::parse("logistic", None).unwrap(), LinkFunction::logistic());
        assert!(LinkFunction::parse("leaky-relu", None).is_err());
        assert_eq!(
            LinkFunction::parse("leaky-relu", Some(0.1)).unwrap().increase_alpha(),
            0.1
        );
        assert!(LinkFunction::parse("tanh", None).is_err());
    }
}
