//! Data sampling and ingestion.
//!
//! Synthetic samplers produce rows on the sqrt(d)-sphere (Gaussian directions)
//! or on the ±1 hypercube, both mean-zero and Lipschitz-concentrated. Image
//! data (MNIST, CIFAR-10 two-class subsets) can be kept in the figure
//! convention (pixels in [0,1]) or pushed onto the sphere with per-feature
//! centering (`Assumption1` mode).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

mod cifar;
mod container;
mod idx;

pub use cifar::ingest_cifar10;
pub use container::{load_dataset, save_dataset};
pub use idx::ingest_mnist;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    SphereGaussian,
    Hypercube,
    Mnist { class_a: u8, class_b: u8 },
    Cifar10 { class_a: u8, class_b: u8 },
}

impl Provenance {
    pub fn is_synthetic(&self) -> bool {
        matches!(self, Provenance::SphereGaussian | Provenance::Hypercube)
    }

    pub fn name(&self) -> String {
        match self {
            Provenance::SphereGaussian => "sphere-gaussian".into(),
            Provenance::Hypercube => "hypercube".into(),
            Provenance::Mnist { class_a, class_b } => format!("mnist:{class_a},{class_b}"),
            Provenance::Cifar10 { class_a, class_b } => format!("cifar10:{class_a},{class_b}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PreprocessMode {
    /// Pixel values scaled to [0,1], as in the figure protocol.
    PaperFigures,
    /// Additionally per-feature centered and row-rescaled to norm sqrt(d).
    Assumption1,
}

impl PreprocessMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "paper-figures" | "paperfigures" => Ok(PreprocessMode::PaperFigures),
            "assumption1" => Ok(PreprocessMode::Assumption1),
            other => Err(Error::InvalidArgument(format!(
                "unknown preprocess mode {other:?} (expected paper-figures | assumption1)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PreprocessMode::PaperFigures => "paper-figures",
            PreprocessMode::Assumption1 => "assumption1",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GroundTruth {
    Zero,
    /// `g(x) = beta^T x / sqrt(d)` for a unit direction `beta`.
    LinearUnit(DVector<f64>),
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelSpec {
    pub ground_truth: GroundTruth,
    /// Standard deviation of the i.i.d. Gaussian label noise.
    pub noise_std: f64,
}

impl LabelSpec {
    pub fn noise(noise_std: f64) -> Self {
        LabelSpec { ground_truth: GroundTruth::Zero, noise_std }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "noise_std must be finite and >= 0, got {}",
                self.noise_std
            )));
        }
        if let GroundTruth::LinearUnit(beta) = &self.ground_truth {
            if beta.len() != d {
                return Err(Error::DimensionMismatch(format!(
                    "LinearUnit direction has dim {}, data dim {d}",
                    beta.len()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub provenance: Provenance,
    pub mode: PreprocessMode,
    /// How labels were generated, when synthetic. Image datasets carry class
    /// labels instead.
    pub label_spec: Option<LabelSpec>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    /// Assemble a synthetic dataset from one of the built-in samplers.
    pub fn synthetic(
        provenance: Provenance,
        n: usize,
        d: usize,
        spec: LabelSpec,
        data_rng: &mut impl Rng,
        noise_rng: &mut impl Rng,
    ) -> Result<Dataset> {
        let x = match provenance {
            Provenance::SphereGaussian => sample_sphere_gaussian(n, d, data_rng)?,
            Provenance::Hypercube => sample_hypercube(n, d, data_rng)?,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "{} is not a synthetic provenance",
                    other.name()
                )))
            }
        };
        let y = make_labels(&x, &spec, noise_rng)?;
        Ok(Dataset {
            x,
            y,
            provenance,
            mode: PreprocessMode::Assumption1,
            label_spec: Some(spec),
        })
    }
}

/// Rows i.i.d. standard Gaussian, rescaled to the sphere of radius sqrt(d).
pub fn sample_sphere_gaussian(n: usize, d: usize, rng: &mut impl Rng) -> Result<DMatrix<f64>> {
    check_sampler_args(n, d)?;
    let mut x = DMatrix::from_fn(n, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let radius = (d as f64).sqrt();
    for mut row in x.row_iter_mut() {
        let norm = row.norm();
        if norm == 0.0 {
            // Probability-zero draw; resampling would break stream alignment.
            return Err(Error::InvalidArgument("degenerate zero Gaussian draw".into()));
        }
        row *= radius / norm;
    }
    Ok(x)
}

/// Rows i.i.d. uniform on the ±1 hypercube vertices; row norms are sqrt(d).
pub fn sample_hypercube(n: usize, d: usize, rng: &mut impl Rng) -> Result<DMatrix<f64>> {
    check_sampler_args(n, d)?;
    Ok(DMatrix::from_fn(n, d, |_, _| if rng.random::<bool>() { 1.0 } else { -1.0 }))
}

fn check_sampler_args(n: usize, d: usize) -> Result<()> {
    if n < 1 {
        return Err(Error::InvalidArgument("sample count must be >= 1".into()));
    }
    if d < 2 {
        return Err(Error::InvalidArgument(format!(
            "input dimension must be >= 2 (sphere degenerate), got {d}"
        )));
    }
    Ok(())
}

/// `y_i = g(x_i) + eps_i` with `eps_i ~ N(0, noise_std^2)`.
pub fn make_labels(x: &DMatrix<f64>, spec: &LabelSpec, rng: &mut impl Rng) -> Result<DVector<f64>> {
    spec.validate(x.ncols())?;
    let sqrt_d = (x.ncols() as f64).sqrt();
    let mut y = match &spec.ground_truth {
        GroundTruth::Zero => DVector::zeros(x.nrows()),
        GroundTruth::LinearUnit(beta) => (x * beta) / sqrt_d,
        GroundTruth::Constant(c) => DVector::from_element(x.nrows(), *c),
    };
    if spec.noise_std > 0.0 {
        for v in y.iter_mut() {
            *v += spec.noise_std * rng.sample::<f64, _>(StandardNormal);
        }
    }
    Ok(y)
}

/// Scale raw pixel rows to [0,1]; in `Assumption1` mode also subtract the
/// per-feature mean of the selected rows and rescale rows to norm sqrt(d).
pub(crate) fn preprocess_pixels(
    raw: Vec<Vec<u8>>,
    d: usize,
    mode: PreprocessMode,
) -> Result<DMatrix<f64>> {
    let n = raw.len();
    let mut x = DMatrix::from_fn(n, d, |i, j| raw[i][j] as f64 / 255.0);
    if mode == PreprocessMode::Assumption1 {
        let means: Vec<f64> = (0..d).map(|j| x.column(j).mean()).collect();
        for j in 0..d {
            x.column_mut(j).add_scalar_mut(-means[j]);
        }
        let radius = (d as f64).sqrt();
        for (i, mut row) in x.row_iter_mut().enumerate() {
            let norm = row.norm();
            if norm == 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "row {i} equals the feature mean; cannot rescale to the sphere"
                )));
            }
            row *= radius / norm;
        }
    }
    Ok(x)
}

/// ±1 labels for a two-class subset, +1 for `class_a`.
pub(crate) fn two_class_labels(selected: &[u8], class_a: u8) -> DVector<f64> {
    DVector::from_iterator(
        selected.len(),
        selected.iter().map(|&c| if c == class_a { 1.0 } else { -1.0 }),
    )
}

pub(crate) fn check_classes(class_a: u8, class_b: u8, max: u8) -> Result<()> {
    if class_a == class_b {
        return Err(Error::InvalidArgument(format!(
            "the two classes must differ, got {class_a} and {class_b}"
        )));
    }
    if class_a > max || class_b > max {
        return Err(Error::InvalidArgument(format!(
            "class labels must be 0..={max}, got {class_a}, {class_b}"
        )));
    }
    Ok(())
}

/// Pick the first `n_per_class` indices of each class, in file order.
pub(crate) fn select_two_classes(
    labels: &[u8],
    class_a: u8,
    class_b: u8,
    n_per_class: usize,
) -> Result<(Vec<usize>, Vec<u8>)> {
    let mut idx = Vec::with_capacity(2 * n_per_class);
    let mut got_a = 0usize;
    let mut got_b = 0usize;
    for (i, &c) in labels.iter().enumerate() {
        if c == class_a && got_a < n_per_class {
            idx.push(i);
            got_a += 1;
        } else if c == class_b && got_b < n_per_class {
            idx.push(i);
            got_b += 1;
        }
        if got_a == n_per_class && got_b == n_per_class {
            break;
        }
    }
    if got_a < n_per_class || got_b < n_per_class {
        return Err(Error::InsufficientSamples(format!(
            "requested {n_per_class} per class, found {got_a} of class {class_a} \
             and {got_b} of class {class_b}"
        )));
    }
    let selected = idx.iter().map(|&i| labels[i]).collect();
    Ok((idx, selected))
}
