//! Config-driven sweeps over (model, activation, N, k) grids.
//!
//! Each grid point runs `trials` independent repetitions: draw data (or
//! subsample the real-data pool), draw weights, fit the min-norm
//! interpolator, average the sensitivity over fresh test points. Every
//! stream is derived from `(master_seed, N, k, trial)`, so results are
//! byte-identical regardless of thread count or scheduling.

use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::activations::Activation;
use crate::analysis::{sensitivity, theory_rates};
use crate::data::{
    make_labels, sample_hypercube, sample_sphere_gaussian, Dataset, LabelSpec, PreprocessMode,
    Provenance,
};
use crate::error::{Error, Result};
use crate::models::{Model, ModelKind, NtkModel, RfModel};
use crate::rng::{self, Purpose};
use crate::solver;

mod config;
mod csv;

pub use config::parse_config;
pub use csv::{emit_csv, parse_csv};

/// Where sweep data comes from.
#[derive(Debug, Clone)]
pub enum SweepSource {
    SphereGaussian,
    Hypercube,
    /// Ingested two-class image pool; trials subsample it without replacement.
    Pool(Dataset),
}

impl SweepSource {
    fn provenance(&self) -> Provenance {
        match self {
            SweepSource::SphereGaussian => Provenance::SphereGaussian,
            SweepSource::Hypercube => Provenance::Hypercube,
            SweepSource::Pool(ds) => ds.provenance,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub model: ModelKind,
    pub activation: Activation,
    pub d: usize,
    pub n_list: Vec<usize>,
    pub k_list: Vec<usize>,
    pub trials: usize,
    pub test_points: usize,
    pub label_spec: LabelSpec,
    pub source: SweepSource,
    pub master_seed: u64,
    pub mode: PreprocessMode,
    /// Escape hatch allowing odd activations in the NTK model.
    pub allow_uneven: bool,
}

impl SweepConfig {
    /// Desk-scale default grid for a model/activation pair: the sphere data
    /// protocol at d = 200 with the k ranges in which the respective theorems
    /// operate (k >> N, d for RF; k = O(d) for NTK).
    pub fn desk_default(model: ModelKind, activation: Activation, master_seed: u64) -> SweepConfig {
        let k_list = match model {
            ModelKind::Rf => vec![800, 1600, 3200, 6400, 12800],
            ModelKind::Ntk => vec![8, 16, 32, 64, 128],
        };
        SweepConfig {
            model,
            activation,
            d: 200,
            n_list: vec![100, 200],
            k_list,
            trials: 10,
            test_points: 10,
            label_spec: LabelSpec::noise(1.0),
            source: SweepSource::SphereGaussian,
            master_seed,
            mode: PreprocessMode::Assumption1,
            allow_uneven: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if self.test_points < 1 {
            return Err(Error::Config("test_points must be >= 1".into()));
        }
        if self.n_list.is_empty() || self.k_list.is_empty() {
            return Err(Error::Config("n_list and k_list must be non-empty".into()));
        }
        if self.n_list.iter().any(|&n| n == 0) || self.k_list.iter().any(|&k| k == 0) {
            return Err(Error::Config("grid values must be positive".into()));
        }
        if !self.k_list.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config("k_list must be strictly increasing".into()));
        }
        if self.d < 2 {
            return Err(Error::Config("d must be >= 2".into()));
        }
        self.label_spec.validate(self.d).map_err(|e| Error::Config(e.to_string()))?;
        if self.model == ModelKind::Ntk && !self.activation.is_even() && !self.allow_uneven {
            return Err(Error::Config(format!(
                "NTK with the odd activation {} requires allow_uneven",
                self.activation.name()
            )));
        }
        if let SweepSource::Pool(pool) = &self.source {
            if pool.dim() != self.d {
                return Err(Error::Config(format!(
                    "pool dimension {} does not match configured d = {}",
                    pool.dim(),
                    self.d
                )));
            }
            let need = self.n_list.iter().max().unwrap() + self.test_points;
            if pool.n() < need {
                return Err(Error::Config(format!(
                    "pool has {} rows, need {} (max N + test points)",
                    pool.n(),
                    need
                )));
            }
        }
        Ok(())
    }

    /// Flat key-value echo of the configuration, one `key = value` per line.
    pub fn echo(&self) -> String {
        let source = match &self.source {
            SweepSource::SphereGaussian => "sphere-gaussian".to_string(),
            SweepSource::Hypercube => "hypercube".to_string(),
            SweepSource::Pool(ds) => ds.provenance.name(),
        };
        let ground_truth = match &self.label_spec.ground_truth {
            crate::data::GroundTruth::Zero => "zero".to_string(),
            crate::data::GroundTruth::LinearUnit(_) => "linear".to_string(),
            crate::data::GroundTruth::Constant(c) => format!("constant:{c}"),
        };
        format!(
            "model = {}\nactivation = {}\nd = {}\nn_list = {}\nk_list = {}\ntrials = {}\n\
             test_points = {}\nground_truth = {}\nnoise_std = {}\ndata = {}\nmode = {}\n\
             master_seed = {}\nallow_uneven = {}\n",
            self.model.name(),
            self.activation.name(),
            self.d,
            join(&self.n_list),
            join(&self.k_list),
            self.trials,
            self.test_points,
            ground_truth,
            self.label_spec.noise_std,
            source,
            self.mode.name(),
            self.master_seed,
            self.allow_uneven,
        )
    }
}

fn join(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Aggregated outcome of one grid point.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub n: usize,
    pub d: usize,
    pub k: usize,
    /// Parameter count: k for RF, 2kd for NTK.
    pub p: usize,
    pub mean_sensitivity: f64,
    pub std_sensitivity: f64,
    pub mean_lambda_min: f64,
    /// Fraction of successful trials that needed jitter.
    pub jitter_rate: f64,
    pub theory_rate: f64,
    /// Trials whose kernel stayed singular through the jitter ladder.
    pub failed_trials: usize,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub model: ModelKind,
    pub activation: Activation,
    pub config_echo: String,
    pub wall_time_secs: f64,
}

impl SweepResult {
    /// `(k, mean_sensitivity)` pairs of one sample size, in k order.
    pub fn points_for_n(&self, n: usize) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.n == n)
            .map(|r| (r.k as f64, r.mean_sensitivity))
            .collect()
    }
}

struct TrialOutcome {
    sensitivity: f64,
    lambda_min: f64,
    jittered: bool,
}

/// Run the full grid. Grid points and trials execute in parallel; per-trial
/// seeds derive from `(master_seed, N, k, trial)`, so the aggregation is
/// independent of scheduling.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let start = Instant::now();
    let tasks: Vec<(usize, usize)> = cfg
        .n_list
        .iter()
        .flat_map(|&n| cfg.k_list.iter().map(move |&k| (n, k)))
        .collect();

    let outcomes: Vec<Result<Vec<Option<TrialOutcome>>>> = tasks
        .par_iter()
        .map(|&(n, k)| {
            (0..cfg.trials)
                .into_par_iter()
                .map(|trial| run_trial(cfg, n, k, trial as u64))
                .collect()
        })
        .collect();

    let mut rows = Vec::with_capacity(tasks.len());
    for (&(n, k), trials) in tasks.iter().zip(outcomes) {
        let trials = trials?;
        let failed_trials = trials.iter().filter(|t| t.is_none()).count();
        let ok: Vec<TrialOutcome> = trials.into_iter().flatten().collect();
        let m = ok.len() as f64;
        let (mean_sensitivity, std_sensitivity, mean_lambda_min, jitter_rate) = if ok.is_empty() {
            (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
        } else {
            let mean = ok.iter().map(|t| t.sensitivity).sum::<f64>() / m;
            let var = if ok.len() > 1 {
                ok.iter().map(|t| (t.sensitivity - mean).powi(2)).sum::<f64>() / (m - 1.0)
            } else {
                0.0
            };
            (
                mean,
                var.sqrt(),
                ok.iter().map(|t| t.lambda_min).sum::<f64>() / m,
                ok.iter().filter(|t| t.jittered).count() as f64 / m,
            )
        };
        let p = match cfg.model {
            ModelKind::Rf => k,
            ModelKind::Ntk => 2 * k * cfg.d,
        };
        rows.push(SweepRow {
            n,
            d: cfg.d,
            k,
            p,
            mean_sensitivity,
            std_sensitivity,
            mean_lambda_min,
            jitter_rate,
            theory_rate: theory_rates(cfg.model, n, cfg.d, k),
            failed_trials,
        });
    }
    Ok(SweepResult {
        rows,
        model: cfg.model,
        activation: cfg.activation.clone(),
        config_echo: cfg.echo(),
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

/// One (N, k, trial) cell. `Ok(None)` flags a singular kernel; other errors
/// abort the sweep.
fn run_trial(cfg: &SweepConfig, n: usize, k: usize, trial: u64) -> Result<Option<TrialOutcome>> {
    let ids = [n as u64, k as u64, trial];
    let seed = cfg.master_seed;
    let (x, y, test_points) = draw_trial_data(cfg, n, &ids)?;

    let mut weights_rng = rng::stream(seed, Purpose::Weights, &ids);
    let mut model = match cfg.model {
        ModelKind::Rf => {
            Model::Rf(RfModel::from_rng(k, cfg.d, cfg.activation.clone(), &mut weights_rng))
        }
        ModelKind::Ntk => Model::Ntk(NtkModel::from_rng_with(
            k,
            cfg.d,
            cfg.activation.clone(),
            &mut weights_rng,
            cfg.allow_uneven,
        )?),
    };
    let report = match solver::fit(&mut model, &Dataset {
        x,
        y,
        provenance: cfg.source.provenance(),
        mode: cfg.mode,
        label_spec: Some(cfg.label_spec.clone()),
    }) {
        Ok(r) => r,
        Err(Error::SingularKernel { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };

    let mut acc = 0.0;
    for z in &test_points {
        acc += sensitivity(&model, z)?.sensitivity;
    }
    Ok(Some(TrialOutcome {
        sensitivity: acc / test_points.len() as f64,
        lambda_min: report.lambda_min,
        jittered: report.jitter_used > 0.0,
    }))
}

/// Training rows, labels and fresh test points for one trial.
fn draw_trial_data(
    cfg: &SweepConfig,
    n: usize,
    ids: &[u64],
) -> Result<(DMatrix<f64>, DVector<f64>, Vec<DVector<f64>>)> {
    let seed = cfg.master_seed;
    match &cfg.source {
        SweepSource::SphereGaussian | SweepSource::Hypercube => {
            let mut data_rng = rng::stream(seed, Purpose::Data, ids);
            let x = match cfg.source {
                SweepSource::SphereGaussian => sample_sphere_gaussian(n, cfg.d, &mut data_rng)?,
                _ => sample_hypercube(n, cfg.d, &mut data_rng)?,
            };
            let mut noise_rng = rng::stream(seed, Purpose::Labels, ids);
            let y = make_labels(&x, &cfg.label_spec, &mut noise_rng)?;
            let mut z_rng = rng::stream(seed, Purpose::TestPoints, ids);
            let zs = match cfg.source {
                SweepSource::SphereGaussian => {
                    sample_sphere_gaussian(cfg.test_points, cfg.d, &mut z_rng)?
                }
                _ => sample_hypercube(cfg.test_points, cfg.d, &mut z_rng)?,
            };
            let test_points = (0..cfg.test_points).map(|i| zs.row(i).transpose()).collect();
            Ok((x, y, test_points))
        }
        SweepSource::Pool(pool) => {
            // Subsample without replacement, reshuffled per trial; test
            // points come from the rows left out of training.
            let mut shuffle_rng = rng::stream(seed, Purpose::Shuffle, ids);
            let mut idx: Vec<usize> = (0..pool.n()).collect();
            idx.shuffle(&mut shuffle_rng);
            let train = &idx[..n];
            let test = &idx[n..n + cfg.test_points];
            let x = DMatrix::from_fn(n, pool.dim(), |i, j| pool.x[(train[i], j)]);
            let y = DVector::from_fn(n, |i, _| pool.y[train[i]]);
            let test_points = test.iter().map(|&i| pool.x.row(i).transpose()).collect();
            Ok((x, y, test_points))
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SlopeFit {
    pub slope: f64,
    pub r2: f64,
}

/// Least-squares slope of `log(value)` against `log(k)`.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "slope fit needs >= 3 grid points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|&(k, v)| k <= 0.0 || v <= 0.0 || !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "slope is undefined for non-positive or non-finite values".into(),
        ));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xm).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let syy: f64 = ys.iter().map(|y| (y - ym).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("all k values coincide".into()));
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(SlopeFit { slope, r2 })
}

/// Write the sweep as CSV (see [`csv::emit_csv`] for the format).
pub fn write_csv(result: &SweepResult, path: &Path) -> Result<()> {
    emit_csv(result, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tiny_cfg() -> SweepConfig {
        SweepConfig {
            model: ModelKind::Rf,
            activation: Activation::tanh(),
            d: 8,
            n_list: vec![6],
            k_list: vec![16, 32],
            trials: 2,
            test_points: 2,
            label_spec: LabelSpec::noise(1.0),
            source: SweepSource::SphereGaussian,
            master_seed: 3,
            mode: PreprocessMode::Assumption1,
            allow_uneven: false,
        }
    }

    #[test]
    fn sweep_covers_grid_once_in_order() {
        let res = run_sweep(&tiny_cfg()).unwrap();
        let cells: Vec<(usize, usize)> = res.rows.iter().map(|r| (r.n, r.k)).collect();
        assert_eq!(cells, vec![(6, 16), (6, 32)]);
        for row in &res.rows {
            assert!(row.std_sensitivity >= 0.0);
            assert_eq!(row.p, row.k);
            assert_relative_eq!(
                row.theory_rate,
                theory_rates(ModelKind::Rf, row.n, row.d, row.k)
            );
        }
    }

    #[test]
    fn sweep_rerun_is_bit_identical() {
        let a = run_sweep(&tiny_cfg()).unwrap();
        let b = run_sweep(&tiny_cfg()).unwrap();
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!(ra.mean_sensitivity.to_bits(), rb.mean_sensitivity.to_bits());
            assert_eq!(ra.std_sensitivity.to_bits(), rb.std_sensitivity.to_bits());
            assert_eq!(ra.mean_lambda_min.to_bits(), rb.mean_lambda_min.to_bits());
        }
    }

    #[test]
    fn trivial_grid_zero_labels_zero_sensitivity() {
        let mut cfg = tiny_cfg();
        cfg.activation = Activation::identity();
        cfg.label_spec = LabelSpec::noise(0.0);
        cfg.n_list = vec![2];
        cfg.k_list = vec![4];
        cfg.d = 2;
        cfg.trials = 1;
        cfg.test_points = 1;
        let res = run_sweep(&cfg).unwrap();
        assert_eq!(res.rows[0].mean_sensitivity, 0.0);
        assert_eq!(res.rows[0].std_sensitivity, 0.0);
    }

    #[test]
    fn config_validation_catches_bad_grids() {
        let mut cfg = tiny_cfg();
        cfg.k_list = vec![32, 16];
        assert!(cfg.validate().is_err());
        let mut cfg = tiny_cfg();
        cfg.trials = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = tiny_cfg();
        cfg.model = ModelKind::Ntk;
        cfg.allow_uneven = false;
        assert!(cfg.validate().is_err());
        cfg.allow_uneven = true;
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn pool_sweep_subsamples_without_replacement() {
        let mut data_rng = rng::stream(5, Purpose::Data, &[]);
        let mut noise_rng = rng::stream(5, Purpose::Labels, &[]);
        let pool = Dataset::synthetic(
            Provenance::SphereGaussian,
            30,
            6,
            LabelSpec::noise(1.0),
            &mut data_rng,
            &mut noise_rng,
        )
        .unwrap();
        let cfg = SweepConfig {
            model: ModelKind::Rf,
            activation: Activation::tanh(),
            d: 6,
            n_list: vec![10],
            k_list: vec![24],
            trials: 2,
            test_points: 3,
            label_spec: LabelSpec::noise(1.0),
            source: SweepSource::Pool(pool),
            master_seed: 6,
            mode: PreprocessMode::Assumption1,
            allow_uneven: false,
        };
        let res = run_sweep(&cfg).unwrap();
        assert_eq!(res.rows.len(), 1);
        assert!(res.rows[0].mean_sensitivity.is_finite());
    }

    #[test]
    fn slope_fit_exact_power_law() {
        let pts: Vec<(f64, f64)> =
            [100.0, 200.0, 400.0, 800.0].iter().map(|&k: &f64| (k, k.powf(-0.5))).collect();
        let fit = fit_loglog_slope(&pts).unwrap();
        assert!((fit.slope + 0.5).abs() <= 1e-12);
        assert!((fit.r2 - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn slope_fit_constant_series() {
        let pts = vec![(10.0, 2.0), (20.0, 2.0), (40.0, 2.0)];
        let fit = fit_loglog_slope(&pts).unwrap();
        assert_eq!(fit.slope, 0.0);
    }

    #[test]
    fn slope_fit_rejects_bad_input() {
        assert!(fit_loglog_slope(&[(1.0, 1.0), (2.0, 2.0)]).is_err());
        assert!(fit_loglog_slope(&[(1.0, 1.0), (2.0, 0.0), (3.0, 2.0)]).is_err());
    }
}
