//! Activation functions with exact first and second derivatives and their
//! Gaussian moments.
//!
//! Every activation here is C² with Lipschitz derivatives. The moment
//! `E[phi'(rho)]` over a standard normal `rho` is the quantity that separates
//! the robustness regimes: it vanishes for even activations (`square`) and is
//! nonzero for `tanh`, which is exactly what the interaction-matrix prediction
//! keys on. Moments are computed by deterministic Gauss-Hermite quadrature so
//! repeated runs agree bit-for-bit.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::quadrature::GaussHermite;

/// Quadrature order used for cached moments. At this order a further doubling
/// moves the tanh moment by ~1e-13.
pub const DEFAULT_QUAD_ORDER: usize = 128;

/// Minimum quadrature order accepted by the moment contract.
pub const MIN_QUAD_ORDER: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActivationKind {
    Tanh,
    Square,
    /// Softplus family `ln(1 + exp(beta x)) / beta`; a C² surrogate for ReLU.
    SmoothRelu { beta: f64 },
    Identity,
}

/// Gaussian moments of the activation derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    /// `E[phi'(rho)]`, `rho ~ N(0,1)`.
    pub mean_d1: f64,
    /// `E[phi'(rho)]^2`.
    pub mean_d1_sq: f64,
}

#[derive(Debug, Clone)]
pub struct Activation {
    kind: ActivationKind,
    cached_moments: OnceLock<Moments>,
}

impl PartialEq for Activation {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl Activation {
    pub fn new(kind: ActivationKind) -> Self {
        Activation { kind, cached_moments: OnceLock::new() }
    }

    pub fn tanh() -> Self {
        Self::new(ActivationKind::Tanh)
    }

    pub fn square() -> Self {
        Self::new(ActivationKind::Square)
    }

    pub fn identity() -> Self {
        Self::new(ActivationKind::Identity)
    }

    pub fn smooth_relu(beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "smoothrelu softness must be finite and positive, got {beta}"
            )));
        }
        Ok(Self::new(ActivationKind::SmoothRelu { beta }))
    }

    /// Parse the CLI/config name: `tanh | square | smoothrelu[:<beta>] | identity`.
    pub fn parse(name: &str) -> Result<Self> {
        match name.trim() {
            "tanh" => Ok(Self::tanh()),
            "square" => Ok(Self::square()),
            "identity" => Ok(Self::identity()),
            "smoothrelu" => Self::smooth_relu(1.0),
            s if s.starts_with("smoothrelu:") => {
                let beta = s["smoothrelu:".len()..].parse::<f64>().map_err(|_| {
                    Error::InvalidArgument(format!("bad smoothrelu softness in {s:?}"))
                })?;
                Self::smooth_relu(beta)
            }
            s => Err(Error::InvalidArgument(format!(
                "unknown activation {s:?} (expected tanh | square | smoothrelu:<beta> | identity)"
            ))),
        }
    }

    pub fn kind(&self) -> ActivationKind {
        self.kind
    }

    pub fn name(&self) -> String {
        match self.kind {
            ActivationKind::Tanh => "tanh".into(),
            ActivationKind::Square => "square".into(),
            ActivationKind::SmoothRelu { beta } => format!("smoothrelu:{beta}"),
            ActivationKind::Identity => "identity".into(),
        }
    }

    /// Whether `phi(-x) = phi(x)`, the NTK theorem hypothesis.
    pub fn is_even(&self) -> bool {
        matches!(self.kind, ActivationKind::Square)
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self.kind {
            ActivationKind::Tanh => x.tanh(),
            ActivationKind::Square => x * x,
            ActivationKind::SmoothRelu { beta } => softplus(beta * x) / beta,
            ActivationKind::Identity => x,
        }
    }

    pub fn eval_d1(&self, x: f64) -> f64 {
        match self.kind {
            ActivationKind::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            ActivationKind::Square => 2.0 * x,
            ActivationKind::SmoothRelu { beta } => sigmoid(beta * x),
            ActivationKind::Identity => 1.0,
        }
    }

    pub fn eval_d2(&self, x: f64) -> f64 {
        match self.kind {
            ActivationKind::Tanh => {
                let t = x.tanh();
                -2.0 * t * (1.0 - t * t)
            }
            ActivationKind::Square => 2.0,
            ActivationKind::SmoothRelu { beta } => {
                let s = sigmoid(beta * x);
                beta * s * (1.0 - s)
            }
            ActivationKind::Identity => 0.0,
        }
    }

    pub fn map(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        m.map(|x| self.eval(x))
    }

    pub fn map_d1(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        m.map(|x| self.eval_d1(x))
    }

    pub fn map_vec_d1(&self, v: &DVector<f64>) -> DVector<f64> {
        v.map(|x| self.eval_d1(x))
    }

    pub fn map_vec_d2(&self, v: &DVector<f64>) -> DVector<f64> {
        v.map(|x| self.eval_d2(x))
    }

    /// `E[phi'(rho)]` over `rho ~ N(0,1)` by Gauss-Hermite quadrature.
    pub fn gaussian_mean_d1(&self, quad_order: usize) -> Result<f64> {
        if quad_order < MIN_QUAD_ORDER {
            return Err(Error::InvalidArgument(format!(
                "quadrature order {quad_order} below minimum {MIN_QUAD_ORDER} \
                 required by the moment contract"
            )));
        }
        let gh = GaussHermite::new(quad_order)?;
        Ok(gh.expect(|x| self.eval_d1(x)))
    }

    /// Cached moments at [`DEFAULT_QUAD_ORDER`]. Once computed, later calls
    /// return the identical value.
    pub fn moments(&self) -> Moments {
        *self.cached_moments.get_or_init(|| {
            let m1 = self
                .gaussian_mean_d1(DEFAULT_QUAD_ORDER)
                .expect("default order is valid");
            Moments { mean_d1: m1, mean_d1_sq: m1 * m1 }
        })
    }
}

fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}
