//! Random-feature model `f(x) = phi(V x)^T theta` with frozen `V`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::activations::Activation;
use crate::error::{Error, Result};
use crate::rng::{self, Purpose};

use super::{check_dim, sample_weights_t};

#[derive(Debug, Clone)]
pub struct RfModel {
    /// `V^T`, shape d x k; column l is the l-th random feature direction.
    v_t: DMatrix<f64>,
    activation: Activation,
    theta: Option<DVector<f64>>,
    n_train: Option<usize>,
    weight_seed: Option<u64>,
}

impl RfModel {
    pub fn from_rng(k: usize, d: usize, activation: Activation, rng: &mut impl Rng) -> Self {
        RfModel {
            v_t: sample_weights_t(d, k, rng),
            activation,
            theta: None,
            n_train: None,
            weight_seed: None,
        }
    }

    /// Draw `V` from the weight stream of `seed`.
    pub fn from_seed(k: usize, d: usize, activation: Activation, seed: u64) -> Self {
        let mut rng = rng::stream(seed, Purpose::Weights, &[]);
        let mut m = Self::from_rng(k, d, activation, &mut rng);
        m.weight_seed = Some(seed);
        m
    }

    pub(crate) fn from_parts(
        v_t: DMatrix<f64>,
        activation: Activation,
        theta: Option<DVector<f64>>,
        n_train: Option<usize>,
        weight_seed: Option<u64>,
    ) -> Self {
        RfModel { v_t, activation, theta, n_train, weight_seed }
    }

    pub fn k(&self) -> usize {
        self.v_t.ncols()
    }

    pub fn d(&self) -> usize {
        self.v_t.nrows()
    }

    pub fn activation(&self) -> &Activation {
        &self.activation
    }

    /// `V^T` (d x k).
    pub fn v_t(&self) -> &DMatrix<f64> {
        &self.v_t
    }

    pub fn theta(&self) -> Option<&DVector<f64>> {
        self.theta.as_ref()
    }

    pub fn n_train(&self) -> Option<usize> {
        self.n_train
    }

    pub fn weight_seed(&self) -> Option<u64> {
        self.weight_seed
    }

    pub fn is_fitted(&self) -> bool {
        self.theta.is_some()
    }

    pub(crate) fn set_fit(&mut self, theta: DVector<f64>, n_train: usize) {
        self.theta = Some(theta);
        self.n_train = Some(n_train);
    }

    fn theta_ref(&self) -> Result<&DVector<f64>> {
        self.theta.as_ref().ok_or(Error::UnfittedModel)
    }

    /// Feature matrix `phi(X V^T)`, shape n x k.
    pub fn features(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_dim("feature input dim", x.ncols(), self.d())?;
        Ok(self.activation.map(&(x * &self.v_t)))
    }

    /// Pre-activations `V z` of a single point.
    pub fn preactivations(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("input dim", z.len(), self.d())?;
        Ok(self.v_t.tr_mul(z))
    }

    /// `∇_z f(z) = V^T diag(phi'(Vz)) theta`.
    pub fn input_gradient(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        let theta = self.theta_ref()?;
        let vz = self.preactivations(z)?;
        let scaled = self.activation.map_vec_d1(&vz).component_mul(theta);
        Ok(&self.v_t * scaled)
    }

    pub fn predict(&self, z: &DVector<f64>) -> Result<f64> {
        let theta = self.theta_ref()?;
        let vz = self.preactivations(z)?;
        Ok(vz.map(|t| self.activation.eval(t)).dot(theta))
    }

    /// Predictions on the rows of `x`.
    pub fn predict_batch(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        let theta = self.theta_ref()?;
        Ok(self.features(x)? * theta)
    }
}
