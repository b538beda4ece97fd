//! Binary dataset container with bit-exact round-trips.
//!
//! Layout (little-endian): magic `MSDS`, version u32, provenance tag (+class
//! bytes), mode tag, optional label spec, n and d as u64, then X row-major and
//! Y as raw f64 bits.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

use super::{Dataset, GroundTruth, LabelSpec, PreprocessMode, Provenance};

const MAGIC: &[u8; 4] = b"MSDS";
const VERSION: u32 = 1;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::format(self.path, "unexpected end of file"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    let mut out = Vec::with_capacity(64 + 8 * ds.x.len() + 8 * ds.y.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    match ds.provenance {
        Provenance::SphereGaussian => out.push(0),
        Provenance::Hypercube => out.push(1),
        Provenance::Mnist { class_a, class_b } => {
            out.push(2);
            out.push(class_a);
            out.push(class_b);
        }
        Provenance::Cifar10 { class_a, class_b } => {
            out.push(3);
            out.push(class_a);
            out.push(class_b);
        }
    }
    out.push(match ds.mode {
        PreprocessMode::PaperFigures => 0,
        PreprocessMode::Assumption1 => 1,
    });
    match &ds.label_spec {
        None => out.push(0),
        Some(spec) => {
            out.push(1);
            match &spec.ground_truth {
                GroundTruth::Zero => out.push(0),
                GroundTruth::LinearUnit(beta) => {
                    out.push(1);
                    out.extend_from_slice(&(beta.len() as u64).to_le_bytes());
                    for v in beta.iter() {
                        out.extend_from_slice(&v.to_le_bytes());
                    }
                }
                GroundTruth::Constant(c) => {
                    out.push(2);
                    out.extend_from_slice(&c.to_le_bytes());
                }
            }
            out.extend_from_slice(&spec.noise_std.to_le_bytes());
        }
    }
    out.extend_from_slice(&(ds.n() as u64).to_le_bytes());
    out.extend_from_slice(&(ds.dim() as u64).to_le_bytes());
    for i in 0..ds.n() {
        for j in 0..ds.dim() {
            out.extend_from_slice(&ds.x[(i, j)].to_le_bytes());
        }
    }
    for v in ds.y.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut c = Cursor { bytes: &bytes, pos: 0, path };
    if c.take(4)? != MAGIC {
        return Err(Error::format(path, "not a minsense dataset file"));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(Error::format(path, format!("unsupported dataset version {version}")));
    }
    let provenance = match c.u8()? {
        0 => Provenance::SphereGaussian,
        1 => Provenance::Hypercube,
        2 => Provenance::Mnist { class_a: c.u8()?, class_b: c.u8()? },
        3 => Provenance::Cifar10 { class_a: c.u8()?, class_b: c.u8()? },
        t => return Err(Error::format(path, format!("unknown provenance tag {t}"))),
    };
    let mode = match c.u8()? {
        0 => PreprocessMode::PaperFigures,
        1 => PreprocessMode::Assumption1,
        t => return Err(Error::format(path, format!("unknown mode tag {t}"))),
    };
    let label_spec = match c.u8()? {
        0 => None,
        1 => {
            let ground_truth = match c.u8()? {
                0 => GroundTruth::Zero,
                1 => {
                    let len = c.u64()? as usize;
                    let mut beta = DVector::zeros(len);
                    for i in 0..len {
                        beta[i] = c.f64()?;
                    }
                    GroundTruth::LinearUnit(beta)
                }
                2 => GroundTruth::Constant(c.f64()?),
                t => return Err(Error::format(path, format!("unknown ground-truth tag {t}"))),
            };
            Some(LabelSpec { ground_truth, noise_std: c.f64()? })
        }
        t => return Err(Error::format(path, format!("bad label-spec flag {t}"))),
    };
    let n = c.u64()? as usize;
    let d = c.u64()? as usize;
    let mut x = DMatrix::zeros(n, d);
    for i in 0..n {
        for j in 0..d {
            x[(i, j)] = c.f64()?;
        }
    }
    let mut y = DVector::zeros(n);
    for i in 0..n {
        y[i] = c.f64()?;
    }
    if c.pos != bytes.len() {
        return Err(Error::format(path, "trailing bytes after payload"));
    }
    Ok(Dataset { x, y, provenance, mode, label_spec })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    #[test]
    fn round_trip_is_bit_exact() {
        let mut data_rng = stream(3, Purpose::Data, &[]);
        let mut noise_rng = stream(3, Purpose::Labels, &[]);
        let ds = Dataset::synthetic(
            Provenance::SphereGaussian,
            7,
            5,
            LabelSpec::noise(0.3),
            &mut data_rng,
            &mut noise_rng,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ds.bin");
        save_dataset(&ds, &p).unwrap();
        let back = load_dataset(&p).unwrap();
        assert_eq!(back.provenance, ds.provenance);
        assert_eq!(back.mode, ds.mode);
        assert_eq!(back.label_spec, ds.label_spec);
        for (a, b) in ds.x.iter().zip(back.x.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for (a, b) in ds.y.iter().zip(back.y.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn rejects_foreign_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("junk.bin");
        fs::write(&p, b"not a dataset").unwrap();
        assert!(load_dataset(&p).is_err());
    }
}
