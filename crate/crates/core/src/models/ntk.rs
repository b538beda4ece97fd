//! NTK regression model: the linearization of a 2k-neuron two-layer network
//! at a symmetric initialization `W^2_0 = W^1_0`, which zeroes the initial
//! output. The duplicated ±feature blocks make every inner product twice the
//! single-block one, so kernels and gradients carry a factor 2 and features
//! are never materialized outside the explicit test-support path.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::activations::Activation;
use crate::error::{Error, Result};
use crate::rng::{self, Purpose};

use super::{check_dim, sample_weights_t};

/// Largest parameter count for which explicit features may be materialized.
pub const EXPLICIT_FEATURE_LIMIT: usize = 10_000;

#[derive(Debug, Clone)]
pub struct NtkModel {
    /// `W_0^T`, shape d x k.
    w_t: DMatrix<f64>,
    activation: Activation,
    /// Dual coefficients `K^{-1} Y` after fitting.
    alpha: Option<DVector<f64>>,
    /// Training inputs, retained for dual-form prediction.
    x_train: Option<DMatrix<f64>>,
    /// Cached `phi'(X W^T)` of the training inputs.
    g_train: Option<DMatrix<f64>>,
    weight_seed: Option<u64>,
}

impl NtkModel {
    /// Construct with the even-activation check of the NTK theory.
    pub fn from_rng(k: usize, d: usize, activation: Activation, rng: &mut impl Rng) -> Result<Self> {
        Self::from_rng_with(k, d, activation, rng, false)
    }

    /// `allow_uneven` is the escape hatch for reproducing the tanh curves,
    /// which the theory does not certify.
    pub fn from_rng_with(
        k: usize,
        d: usize,
        activation: Activation,
        rng: &mut impl Rng,
        allow_uneven: bool,
    ) -> Result<Self> {
        if !allow_uneven && !activation.is_even() {
            return Err(Error::UnevenActivation(activation.name()));
        }
        Ok(NtkModel {
            w_t: sample_weights_t(d, k, rng),
            activation,
            alpha: None,
            x_train: None,
            g_train: None,
            weight_seed: None,
        })
    }

    pub fn from_seed(
        k: usize,
        d: usize,
        activation: Activation,
        seed: u64,
        allow_uneven: bool,
    ) -> Result<Self> {
        let mut rng = rng::stream(seed, Purpose::Weights, &[]);
        let mut m = Self::from_rng_with(k, d, activation, &mut rng, allow_uneven)?;
        m.weight_seed = Some(seed);
        Ok(m)
    }

    pub(crate) fn from_parts(
        w_t: DMatrix<f64>,
        activation: Activation,
        alpha: Option<DVector<f64>>,
        x_train: Option<DMatrix<f64>>,
        weight_seed: Option<u64>,
    ) -> Self {
        let g_train = match (&alpha, &x_train) {
            (Some(_), Some(x)) => Some((x * &w_t).map(|t| activation.eval_d1(t))),
            _ => None,
        };
        NtkModel { w_t, activation, alpha, x_train, g_train, weight_seed }
    }

    pub fn k(&self) -> usize {
        self.w_t.ncols()
    }

    pub fn d(&self) -> usize {
        self.w_t.nrows()
    }

    /// Parameter count `p = 2kd`.
    pub fn p(&self) -> usize {
        2 * self.k() * self.d()
    }

    pub fn activation(&self) -> &Activation {
        &self.activation
    }

    pub fn w_t(&self) -> &DMatrix<f64> {
        &self.w_t
    }

    pub fn alpha(&self) -> Option<&DVector<f64>> {
        self.alpha.as_ref()
    }

    pub fn x_train(&self) -> Option<&DMatrix<f64>> {
        self.x_train.as_ref()
    }

    pub fn n_train(&self) -> Option<usize> {
        self.x_train.as_ref().map(|x| x.nrows())
    }

    pub fn weight_seed(&self) -> Option<u64> {
        self.weight_seed
    }

    pub fn is_fitted(&self) -> bool {
        self.alpha.is_some()
    }

    pub(crate) fn set_fit(&mut self, alpha: DVector<f64>, x_train: DMatrix<f64>) {
        self.g_train = Some(self.activation.map_d1(&(&x_train * &self.w_t)));
        self.alpha = Some(alpha);
        self.x_train = Some(x_train);
    }

    /// `phi'(X W^T)`, shape n x k.
    pub fn derivative_features(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_dim("input dim", x.ncols(), self.d())?;
        Ok(self.activation.map_d1(&(x * &self.w_t)))
    }

    /// Closed-form kernel `K = 2 (X X^T ∘ G G^T)` with `G = phi'(X W^T)`.
    pub fn kernel(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let g = self.derivative_features(x)?;
        let mut k = x * x.transpose();
        k.component_mul_assign(&(&g * g.transpose()));
        k *= 2.0;
        Ok(k)
    }

    /// The d x N matrix `∇_z Phi(z)^T Phi(X)^T`, expanded by the chain rule:
    /// `2 X^T diag(phi'(XW^T) phi'(Wz)) + 2 W^T diag(phi''(Wz)) phi'(XW^T)^T diag(Xz)`.
    pub fn gradient_cross(&self, z: &DVector<f64>, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_dim("input dim", z.len(), self.d())?;
        let g = self.derivative_features(x)?;
        let wz = self.w_t.tr_mul(z);
        let u = &g * self.activation.map_vec_d1(&wz);
        let xz = x * z;

        let mut term1 = x.transpose();
        for (i, mut col) in term1.column_iter_mut().enumerate() {
            col *= 2.0 * u[i];
        }

        let mut gt = g.transpose();
        for (i, mut col) in gt.column_iter_mut().enumerate() {
            col *= xz[i];
        }
        let d2 = self.activation.map_vec_d2(&wz);
        for (l, mut row) in gt.row_iter_mut().enumerate() {
            row *= d2[l];
        }
        Ok(term1 + 2.0 * (&self.w_t * gt))
    }

    fn fitted(&self) -> Result<(&DVector<f64>, &DMatrix<f64>, &DMatrix<f64>)> {
        match (&self.alpha, &self.x_train, &self.g_train) {
            (Some(a), Some(x), Some(g)) => Ok((a, x, g)),
            _ => Err(Error::UnfittedModel),
        }
    }

    /// Dual-form gradient `∇_z f(z) = (∇_z Phi(z)^T Phi(X)^T) alpha`, computed
    /// in matrix-vector form without the d x N intermediate.
    pub fn input_gradient(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        let (alpha, x, g) = self.fitted()?;
        check_dim("input dim", z.len(), self.d())?;
        let wz = self.w_t.tr_mul(z);
        let u = g * self.activation.map_vec_d1(&wz);
        let xz = x * z;
        let term1 = x.tr_mul(&u.component_mul(alpha)) * 2.0;
        let s = g.tr_mul(&xz.component_mul(alpha));
        let term2 = (&self.w_t * self.activation.map_vec_d2(&wz).component_mul(&s)) * 2.0;
        Ok(term1 + term2)
    }

    /// Dual-form prediction `f(z) = k_z^T alpha`,
    /// `(k_z)_i = 2 (z^T x_i)(phi'(Wz)^T phi'(W x_i))`.
    pub fn predict(&self, z: &DVector<f64>) -> Result<f64> {
        let (alpha, x, g) = self.fitted()?;
        check_dim("input dim", z.len(), self.d())?;
        let wz = self.w_t.tr_mul(z);
        let u = g * self.activation.map_vec_d1(&wz);
        let xz = x * z;
        Ok(2.0 * xz.component_mul(&u).dot(alpha))
    }

    /// Training predictions `K alpha` from the cached kernel pieces.
    pub fn predict_train(&self) -> Result<DVector<f64>> {
        let (alpha, x, _) = self.fitted()?;
        Ok(self.kernel(x)? * alpha)
    }

    /// Explicit feature matrix `[x ⊗ phi'(Wx), -x ⊗ phi'(Wx)]`, one row per
    /// input row; test-support path, refused beyond `EXPLICIT_FEATURE_LIMIT`
    /// parameters.
    pub fn explicit_features(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_dim("input dim", x.ncols(), self.d())?;
        let (k, d) = (self.k(), self.d());
        let p = 2 * k * d;
        if p > EXPLICIT_FEATURE_LIMIT {
            return Err(Error::InvalidArgument(format!(
                "explicit NTK features need p = {p} > {EXPLICIT_FEATURE_LIMIT}; \
                 use the dual form"
            )));
        }
        let g = self.derivative_features(x)?;
        let n = x.nrows();
        let mut out = DMatrix::zeros(n, p);
        for r in 0..n {
            for i in 0..d {
                for j in 0..k {
                    let v = x[(r, i)] * g[(r, j)];
                    out[(r, i * k + j)] = v;
                    out[(r, k * d + i * k + j)] = -v;
                }
            }
        }
        Ok(out)
    }
}
