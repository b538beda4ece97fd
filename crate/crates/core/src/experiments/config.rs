//! Flat key-value sweep configuration files.
//!
//! Grammar: one `key = value` per line; `#` starts a comment; blank lines are
//! ignored; keys may appear once. Lists are comma-separated integers.
//!
//! ```text
//! # RF desk-scale sweep
//! model = rf
//! activation = tanh
//! d = 200
//! n_list = 100,200
//! k_list = 800,1600,3200,6400,12800
//! trials = 10
//! test_points = 10
//! ground_truth = zero          # zero | linear | constant:<c>
//! noise_std = 1.0
//! data = sphere-gaussian       # sphere-gaussian | hypercube | mnist | cifar10
//! # data_path = ./mnist        # required for image data
//! # classes = 3,5
//! # n_per_class = 400
//! mode = assumption1           # paper-figures | assumption1
//! master_seed = 42
//! allow_uneven = false
//! ```

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use nalgebra::DVector;

use crate::activations::Activation;
use crate::data::{ingest_cifar10, ingest_mnist, GroundTruth, LabelSpec, PreprocessMode};
use crate::error::{Error, Result};
use crate::models::ModelKind;

use super::{SweepConfig, SweepSource};

fn parse_pairs(text: &str) -> Result<HashMap<String, String>> {
    let mut map = HashMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected `key = value`, got {raw:?}", lineno + 1))
        })?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if map.insert(key.clone(), value).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key {key:?}", lineno + 1)));
        }
    }
    Ok(map)
}

fn req<'a>(map: &'a HashMap<String, String>, key: &str) -> Result<&'a str> {
    map.get(key).map(String::as_str).ok_or_else(|| Error::Config(format!("missing key {key:?}")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.parse().map_err(|_| Error::Config(format!("{key}: bad integer {v:?}")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<usize>> {
    v.split(',').map(|s| parse_usize(key, s.trim())).collect()
}

/// Parse and materialize a sweep configuration (ingesting the image pool when
/// one is configured).
pub fn parse_config(path: &Path) -> Result<SweepConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let map = parse_pairs(&text)?;

    const KNOWN: [&str; 15] = [
        "model",
        "activation",
        "d",
        "n_list",
        "k_list",
        "trials",
        "test_points",
        "ground_truth",
        "noise_std",
        "data",
        "data_path",
        "classes",
        "n_per_class",
        "mode",
        "master_seed",
    ];
    for key in map.keys() {
        if !KNOWN.contains(&key.as_str()) && key != "allow_uneven" {
            return Err(Error::Config(format!("unknown key {key:?}")));
        }
    }

    let model = ModelKind::parse(req(&map, "model")?)?;
    let activation = Activation::parse(req(&map, "activation")?)?;
    let d = parse_usize("d", req(&map, "d")?)?;
    let n_list = parse_list("n_list", req(&map, "n_list")?)?;
    let k_list = parse_list("k_list", req(&map, "k_list")?)?;
    let trials = match map.get("trials") {
        Some(v) => parse_usize("trials", v)?,
        None => 20,
    };
    let test_points = match map.get("test_points") {
        Some(v) => parse_usize("test_points", v)?,
        None => 10,
    };
    let noise_std = match map.get("noise_std") {
        Some(v) => v.parse::<f64>().map_err(|_| Error::Config(format!("noise_std: {v:?}")))?,
        None => 1.0,
    };
    let ground_truth = match map.get("ground_truth").map(String::as_str) {
        None | Some("zero") => GroundTruth::Zero,
        Some("linear") => {
            let mut beta = DVector::zeros(d);
            if d > 0 {
                beta[0] = 1.0;
            }
            GroundTruth::LinearUnit(beta)
        }
        Some(s) if s.starts_with("constant:") => {
            let c = s["constant:".len()..]
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("ground_truth: {s:?}")))?;
            GroundTruth::Constant(c)
        }
        Some(s) => return Err(Error::Config(format!("ground_truth: unknown value {s:?}"))),
    };
    let data_kind = map.get("data").map(String::as_str).unwrap_or("sphere-gaussian");
    let mode = match map.get("mode") {
        Some(v) => PreprocessMode::parse(v)?,
        None => match data_kind {
            "mnist" | "cifar10" => PreprocessMode::PaperFigures,
            _ => PreprocessMode::Assumption1,
        },
    };
    let source = match data_kind {
        "sphere-gaussian" => SweepSource::SphereGaussian,
        "hypercube" => SweepSource::Hypercube,
        "mnist" | "cifar10" => {
            let data_path = Path::new(req(&map, "data_path")?);
            let classes = parse_list("classes", req(&map, "classes")?)?;
            if classes.len() != 2 || classes.iter().any(|&c| c > 9) {
                return Err(Error::Config("classes must be two digits 0..=9".into()));
            }
            let n_per_class = parse_usize("n_per_class", req(&map, "n_per_class")?)?;
            let (a, b) = (classes[0] as u8, classes[1] as u8);
            let pool = if data_kind == "mnist" {
                ingest_mnist(data_path, a, b, n_per_class, mode)?
            } else {
                ingest_cifar10(data_path, a, b, n_per_class, mode)?
            };
            SweepSource::Pool(pool)
        }
        other => return Err(Error::Config(format!("data: unknown source {other:?}"))),
    };
    let master_seed = match map.get("master_seed") {
        Some(v) => v.parse::<u64>().map_err(|_| Error::Config(format!("master_seed: {v:?}")))?,
        None => 0,
    };
    let allow_uneven = match map.get("allow_uneven").map(String::as_str) {
        None => false,
        Some("true") => true,
        Some("false") => false,
        Some(s) => return Err(Error::Config(format!("allow_uneven: expected true/false, got {s:?}"))),
    };

    let cfg = SweepConfig {
        model,
        activation,
        d,
        n_list,
        k_list,
        trials,
        test_points,
        label_spec: LabelSpec { ground_truth, noise_std },
        source,
        master_seed,
        mode,
        allow_uneven,
    };
    cfg.validate()?;
    Ok(cfg)
}
