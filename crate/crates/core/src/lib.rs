//! Min-norm random-feature and NTK regression with adversarial sensitivity
//! analysis.
//!
//! The library fits over-parameterized generalized linear models by min-norm
//! interpolation and measures how sensitive the fitted function is to
//! adversarial input perturbations, `S(z) = ||z|| ||∇_z f(z)||`. Two model
//! families are provided: random features `phi(Vx)^T theta` and the NTK
//! linearization of a two-layer network with duplicated ± blocks. The
//! analysis module decomposes the sensitivity into kernel spectra and the
//! interaction matrix between the test-point feature Jacobian and the
//! centered training features, and the experiments module reruns the scaling
//! sweeps (sensitivity vs. width, tanh vs. square activations) at desk scale.

pub mod activations;
pub mod analysis;
pub mod data;
pub mod error;
pub mod experiments;
pub mod models;
pub mod quadrature;
pub mod rng;
pub mod solver;

pub use activations::{Activation, ActivationKind, Moments};
pub use data::{Dataset, GroundTruth, LabelSpec, PreprocessMode, Provenance};
pub use error::{Error, Result};
pub use models::{Model, ModelKind, NtkModel, RfModel};
pub use solver::{CenteredFeatures, FitReport, KernelSystem, NuEstimator};
