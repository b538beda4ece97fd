//! Kernel assembly, factorization and min-norm interpolation.
//!
//! The min-norm interpolator is `theta* = Phi^T K^{-1} Y` (primal, RF) or the
//! dual coefficients `alpha = K^{-1} Y` (NTK). Kernels are factored by
//! Cholesky with an escalating jitter ladder relative to the mean diagonal;
//! the jitter actually used and the extremal eigenvalues are always reported.
//! Jitter is a numerical device only, never a modeling ridge.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::Rng;

use crate::activations::DEFAULT_QUAD_ORDER;
use crate::data::{sample_hypercube, sample_sphere_gaussian, Dataset, Provenance};
use crate::error::{Error, Result};
use crate::models::{Model, NtkModel, RfModel};
use crate::quadrature::GaussHermite;
use crate::rng::{self, Purpose};

/// Relative jitter ladder applied to the mean diagonal.
const JITTER_LADDER: [f64; 4] = [0.0, 1e-12, 1e-10, 1e-8];

/// Relative asymmetry tolerated in kernel inputs.
const SYMMETRY_TOL: f64 = 1e-10;

/// A factored symmetric kernel with its spectral summary.
pub struct KernelSystem {
    k: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    jitter_used: f64,
    lambda_min: f64,
    lambda_max: f64,
}

impl KernelSystem {
    /// Check symmetry, estimate the extremal eigenvalues, then factor with
    /// the jitter ladder.
    pub fn factor(k: DMatrix<f64>) -> Result<KernelSystem> {
        check_symmetric(&k)?;
        let (lambda_min, lambda_max) = spectrum_unchecked(&k);
        let n = k.nrows();
        let mean_diag = k.diagonal().mean().abs().max(f64::MIN_POSITIVE);
        for rel in JITTER_LADDER {
            let jitter = rel * mean_diag;
            let mut shifted = k.clone();
            if jitter > 0.0 {
                for i in 0..n {
                    shifted[(i, i)] += jitter;
                }
            }
            if let Some(chol) = Cholesky::new(shifted) {
                return Ok(KernelSystem { k, chol, jitter_used: jitter, lambda_min, lambda_max });
            }
        }
        Err(Error::SingularKernel {
            lambda_min,
            max_jitter: JITTER_LADDER[JITTER_LADDER.len() - 1] * mean_diag,
        })
    }

    pub fn n(&self) -> usize {
        self.k.nrows()
    }

    pub fn kernel(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn jitter_used(&self) -> f64 {
        self.jitter_used
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    pub fn condition(&self) -> f64 {
        if self.lambda_min <= 0.0 {
            f64::INFINITY
        } else {
            self.lambda_max / self.lambda_min
        }
    }

    /// Solve `K s = b` with one step of iterative refinement.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut s = self.chol.solve(b);
        let r = b - &self.k * &s;
        s += self.chol.solve(&r);
        s
    }

    /// Solve `K S = B` column-wise with one refinement step.
    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut s = self.chol.solve(b);
        let r = b - &self.k * &s;
        s += self.chol.solve(&r);
        s
    }

    /// Relative residual of a solve, `||K s - b|| / ||b||`.
    pub fn residual_rel(&self, s: &DVector<f64>, b: &DVector<f64>) -> f64 {
        let bn = b.norm();
        if bn == 0.0 {
            return 0.0;
        }
        (&self.k * s - b).norm() / bn
    }
}

fn check_symmetric(k: &DMatrix<f64>) -> Result<()> {
    if k.nrows() != k.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "kernel must be square, got {}x{}",
            k.nrows(),
            k.ncols()
        )));
    }
    let norm = k.norm();
    if norm == 0.0 {
        return Ok(());
    }
    let asym = (k - k.transpose()).norm();
    if asym > SYMMETRY_TOL * norm {
        return Err(Error::InvalidArgument(format!(
            "matrix is not symmetric: relative asymmetry {:.3e}",
            asym / norm
        )));
    }
    Ok(())
}

fn spectrum_unchecked(k: &DMatrix<f64>) -> (f64, f64) {
    let eig = SymmetricEigen::new(k.clone());
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in eig.eigenvalues.iter() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

/// Extremal eigenvalues of a symmetric matrix by full eigendecomposition.
pub fn spectrum(k: &DMatrix<f64>) -> Result<(f64, f64)> {
    check_symmetric(k)?;
    Ok(spectrum_unchecked(k))
}

/// Outcome of a min-norm fit.
#[derive(Debug, Clone, Copy)]
pub struct FitReport {
    pub jitter_used: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub condition: f64,
    pub train_residual_rel: f64,
}

/// Fit `theta* = Phi^T K^{-1} Y` on the dataset rows.
pub fn fit_rf(model: &mut RfModel, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<FitReport> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} rows vs {} labels",
            x.nrows(),
            y.len()
        )));
    }
    let phi = model.features(x)?;
    let system = KernelSystem::factor(&phi * phi.transpose())?;
    let s = system.solve(y);
    let theta = phi.tr_mul(&s);
    let yn = y.norm();
    let train_residual_rel = if yn == 0.0 { 0.0 } else { (&phi * &theta - y).norm() / yn };
    model.set_fit(theta, x.nrows());
    Ok(report(&system, train_residual_rel))
}

/// Fit the dual coefficients `alpha = K^{-1} Y`.
pub fn fit_ntk(model: &mut NtkModel, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<FitReport> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} rows vs {} labels",
            x.nrows(),
            y.len()
        )));
    }
    let system = KernelSystem::factor(model.kernel(x)?)?;
    let alpha = system.solve(y);
    let train_residual_rel = system.residual_rel(&alpha, y);
    model.set_fit(alpha, x.clone());
    Ok(report(&system, train_residual_rel))
}

pub fn fit(model: &mut Model, data: &Dataset) -> Result<FitReport> {
    match model {
        Model::Rf(m) => fit_rf(m, &data.x, &data.y),
        Model::Ntk(m) => fit_ntk(m, &data.x, &data.y),
    }
}

fn report(system: &KernelSystem, train_residual_rel: f64) -> FitReport {
    FitReport {
        jitter_used: system.jitter_used(),
        lambda_min: system.lambda_min(),
        lambda_max: system.lambda_max(),
        condition: system.condition(),
        train_residual_rel,
    }
}

/// How the mean feature `nu = E_x[phi(Vx)]` is estimated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NuEstimator {
    /// Average `phi(Vx)` over fresh antithetic ± pairs from the provenance.
    MonteCarlo { samples: usize, seed: u64 },
    /// `nu_l = E_rho[phi(||V_l|| rho)]`, valid for sphere-Gaussian data where
    /// `v^T x` is centered with variance `||v||^2`.
    GaussianClosedForm,
}

impl NuEstimator {
    /// The defaults used by the analysis paths: closed form on the sphere,
    /// Monte Carlo with 10 N fresh samples elsewhere.
    pub fn default_for(provenance: Provenance, n: usize, seed: u64) -> Result<NuEstimator> {
        match provenance {
            Provenance::SphereGaussian => Ok(NuEstimator::GaussianClosedForm),
            Provenance::Hypercube => Ok(NuEstimator::MonteCarlo { samples: 10 * n, seed }),
            other => Err(Error::EstimatorMismatch(format!(
                "no mean-feature estimator for {} data",
                other.name()
            ))),
        }
    }
}

/// Features with their estimated mean removed, `Phi - 1 nu^T`.
#[derive(Debug, Clone)]
pub struct CenteredFeatures {
    pub phi_tilde: DMatrix<f64>,
    pub nu: DVector<f64>,
    pub estimator: NuEstimator,
}

impl CenteredFeatures {
    /// Centered kernel `Phi_tilde Phi_tilde^T`.
    pub fn kernel(&self) -> DMatrix<f64> {
        &self.phi_tilde * self.phi_tilde.transpose()
    }
}

pub fn center_features(
    model: &RfModel,
    phi: &DMatrix<f64>,
    provenance: Provenance,
    estimator: NuEstimator,
) -> Result<CenteredFeatures> {
    if phi.ncols() != model.k() {
        return Err(Error::DimensionMismatch(format!(
            "feature matrix has {} columns, model has k = {}",
            phi.ncols(),
            model.k()
        )));
    }
    let nu = match estimator {
        NuEstimator::GaussianClosedForm => {
            if provenance != Provenance::SphereGaussian {
                return Err(Error::EstimatorMismatch(format!(
                    "closed-form nu requires sphere-Gaussian data, got {}",
                    provenance.name()
                )));
            }
            let gh = GaussHermite::new(DEFAULT_QUAD_ORDER)?;
            let act = model.activation();
            DVector::from_fn(model.k(), |l, _| {
                let c = model.v_t().column(l).norm();
                gh.expect(|rho| act.eval(c * rho))
            })
        }
        NuEstimator::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(Error::InvalidArgument("MonteCarlo needs samples >= 1".into()));
            }
            let mut mc_rng = rng::stream(seed, Purpose::NuEstimate, &[]);
            monte_carlo_nu(model, provenance, samples, &mut mc_rng)?
        }
    };
    let mut phi_tilde = phi.clone();
    for mut row in phi_tilde.row_iter_mut() {
        row -= nu.transpose();
    }
    Ok(CenteredFeatures { phi_tilde, nu, estimator })
}

fn monte_carlo_nu(
    model: &RfModel,
    provenance: Provenance,
    samples: usize,
    rng: &mut impl Rng,
) -> Result<DVector<f64>> {
    let d = model.d();
    let half = samples.div_ceil(2);
    let draws = match provenance {
        Provenance::SphereGaussian => sample_sphere_gaussian(half, d, rng)?,
        Provenance::Hypercube => sample_hypercube(half, d, rng)?,
        other => {
            return Err(Error::EstimatorMismatch(format!(
                "MonteCarlo nu needs a synthetic provenance, got {}",
                other.name()
            )))
        }
    };
    // Antithetic ± pairs keep the estimate exactly zero for odd activations.
    let plus = model.features(&draws)?;
    let minus = model.features(&(-draws))?;
    let total = 2.0 * half as f64;
    let ones = DVector::from_element(half, 1.0);
    Ok((plus.tr_mul(&ones) + minus.tr_mul(&ones)) / total)
}
