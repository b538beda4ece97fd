//! Binary model container. Header carries kind, k, d, activation name and the
//! weight seed; matrices are raw little-endian f64 bits, so save/load
//! round-trips are bit-exact.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::activations::Activation;
use crate::error::{Error, Result};

use super::{Model, NtkModel, RfModel};

const MAGIC: &[u8; 4] = b"MSMD";
const VERSION: u32 = 1;

fn push_matrix(out: &mut Vec<u8>, m: &DMatrix<f64>) {
    out.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
    for v in m.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn push_vector(out: &mut Vec<u8>, v: &DVector<f64>) {
    out.extend_from_slice(&(v.len() as u64).to_le_bytes());
    for x in v.iter() {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let name = model.activation().name();
    out.push(name.len() as u8);
    out.extend_from_slice(name.as_bytes());
    match model {
        Model::Rf(m) => {
            out.push(0);
            push_seed(&mut out, m.weight_seed());
            push_matrix(&mut out, m.v_t());
            match m.theta() {
                None => out.push(0),
                Some(theta) => {
                    out.push(1);
                    out.extend_from_slice(&(m.n_train().unwrap_or(0) as u64).to_le_bytes());
                    push_vector(&mut out, theta);
                }
            }
        }
        Model::Ntk(m) => {
            out.push(1);
            push_seed(&mut out, m.weight_seed());
            push_matrix(&mut out, m.w_t());
            match (m.alpha(), m.x_train()) {
                (Some(alpha), Some(x)) => {
                    out.push(1);
                    push_vector(&mut out, alpha);
                    push_matrix(&mut out, x);
                }
                _ => out.push(0),
            }
        }
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))
}

fn push_seed(out: &mut Vec<u8>, seed: Option<u64>) {
    match seed {
        Some(s) => {
            out.push(1);
            out.extend_from_slice(&s.to_le_bytes());
        }
        None => out.push(0),
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::format(self.path, "unexpected end of model file"));
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

    fn matrix(&mut self) -> Result<DMatrix<f64>> {
        let rows = self.u64()? as usize;
        let cols = self.u64()? as usize;
        let mut m = DMatrix::zeros(rows, cols);
        for v in m.iter_mut() {
            *v = self.f64()?;
        }
        Ok(m)
    }

    fn vector(&mut self) -> Result<DVector<f64>> {
        let len = self.u64()? as usize;
        let mut v = DVector::zeros(len);
        for x in v.iter_mut() {
            *x = self.f64()?;
        }
        Ok(v)
    }

    fn seed(&mut self) -> Result<Option<u64>> {
        match self.u8()? {
            0 => Ok(None),
            1 => Ok(Some(self.u64()?)),
            t => Err(Error::format(self.path, format!("bad seed flag {t}"))),
        }
    }
}

pub fn load_model(path: &Path) -> Result<Model> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader { bytes: &bytes, pos: 0, path };
    if r.take(4)? != MAGIC {
        return Err(Error::format(path, "not a minsense model file"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::format(path, format!("unsupported model version {version}")));
    }
    let name_len = r.u8()? as usize;
    let name = std::str::from_utf8(r.take(name_len)?)
        .map_err(|_| Error::format(path, "activation name is not utf-8"))?;
    let activation = Activation::parse(name)?;
    let kind = r.u8()?;
    let seed = r.seed()?;
    match kind {
        0 => {
            let v_t = r.matrix()?;
            let (theta, n_train) = match r.u8()? {
                0 => (None, None),
                1 => {
                    let n = r.u64()? as usize;
                    (Some(r.vector()?), Some(n))
                }
                t => return Err(Error::format(path, format!("bad fit flag {t}"))),
            };
            Ok(Model::Rf(RfModel::from_parts(v_t, activation, theta, n_train, seed)))
        }
        1 => {
            let w_t = r.matrix()?;
            let (alpha, x_train) = match r.u8()? {
                0 => (None, None),
                1 => {
                    let alpha = r.vector()?;
                    let x = r.matrix()?;
                    (Some(alpha), Some(x))
                }
                t => return Err(Error::format(path, format!("bad fit flag {t}"))),
            };
            Ok(Model::Ntk(NtkModel::from_parts(w_t, activation, alpha, x_train, seed)))
        }
        t => Err(Error::format(path, format!("unknown model kind tag {t}"))),
    }
}
