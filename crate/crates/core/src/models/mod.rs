//! Model containers: random-feature and NTK regression models with frozen
//! first-layer weights and trained coefficients.
//!
//! Weight matrices are stored transposed (d x k) so that the hot paths
//! (pre-activations `x W^T`, gradients `W^T diag(...) v`) run without
//! materializing transposes.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::activations::Activation;
use crate::error::{Error, Result};

mod io;
mod ntk;
mod rf;

pub use io::{load_model, save_model};
pub use ntk::NtkModel;
pub use rf::RfModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Rf,
    Ntk,
}

impl ModelKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "rf" => Ok(ModelKind::Rf),
            "ntk" => Ok(ModelKind::Ntk),
            other => Err(Error::InvalidArgument(format!(
                "unknown model kind {other:?} (expected rf | ntk)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Rf => "rf",
            ModelKind::Ntk => "ntk",
        }
    }
}

/// Frozen first-layer weights, entries i.i.d. N(0, 1/d), stored as d x k.
pub(crate) fn sample_weights_t(d: usize, k: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let std = 1.0 / (d as f64).sqrt();
    DMatrix::from_fn(d, k, |_, _| std * rng.sample::<f64, _>(StandardNormal))
}

/// Either model behind one dispatching surface.
#[derive(Debug, Clone)]
pub enum Model {
    Rf(RfModel),
    Ntk(NtkModel),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Rf(_) => ModelKind::Rf,
            Model::Ntk(_) => ModelKind::Ntk,
        }
    }

    pub fn k(&self) -> usize {
        match self {
            Model::Rf(m) => m.k(),
            Model::Ntk(m) => m.k(),
        }
    }

    pub fn d(&self) -> usize {
        match self {
            Model::Rf(m) => m.d(),
            Model::Ntk(m) => m.d(),
        }
    }

    /// Parameter count: k for RF, 2kd for NTK.
    pub fn p(&self) -> usize {
        match self {
            Model::Rf(m) => m.k(),
            Model::Ntk(m) => 2 * m.k() * m.d(),
        }
    }

    pub fn activation(&self) -> &Activation {
        match self {
            Model::Rf(m) => m.activation(),
            Model::Ntk(m) => m.activation(),
        }
    }

    pub fn is_fitted(&self) -> bool {
        match self {
            Model::Rf(m) => m.is_fitted(),
            Model::Ntk(m) => m.is_fitted(),
        }
    }

    pub fn n_train(&self) -> Option<usize> {
        match self {
            Model::Rf(m) => m.n_train(),
            Model::Ntk(m) => m.n_train(),
        }
    }

    pub fn predict(&self, z: &DVector<f64>) -> Result<f64> {
        match self {
            Model::Rf(m) => m.predict(z),
            Model::Ntk(m) => m.predict(z),
        }
    }

    pub fn input_gradient(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        match self {
            Model::Rf(m) => m.input_gradient(z),
            Model::Ntk(m) => m.input_gradient(z),
        }
    }
}

pub(crate) fn check_dim(name: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::DimensionMismatch(format!("{name}: got {got}, expected {want}")));
    }
    Ok(())
}

pub fn save_model_to(model: &Model, path: &Path) -> Result<()> {
    io::save_model(model, path)
}
