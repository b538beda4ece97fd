//! MNIST IDX file parsing (big-endian dims, uint8 payload).

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::{
    check_classes, preprocess_pixels, select_two_classes, two_class_labels, Dataset,
    PreprocessMode, Provenance,
};

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

/// Parsed IDX tensor: uint8 payload plus its dimensions.
struct IdxTensor {
    dims: Vec<usize>,
    data: Vec<u8>,
}

fn parse_idx(path: &Path, expected_magic: u32) -> Result<IdxTensor> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 4 {
        return Err(Error::format(path, "file shorter than the 4-byte magic"));
    }
    let magic = u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
    if magic != expected_magic {
        return Err(Error::format(
            path,
            format!("bad magic number {magic:#010x}, expected {expected_magic:#010x}"),
        ));
    }
    // Magic layout: two zero bytes, dtype (0x08 = u8), dimension count.
    let ndims = bytes[3] as usize;
    let header = 4 + 4 * ndims;
    if bytes.len() < header {
        return Err(Error::format(path, "truncated dimension header"));
    }
    let dims: Vec<usize> = (0..ndims)
        .map(|i| {
            let o = 4 + 4 * i;
            u32::from_be_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]) as usize
        })
        .collect();
    let expected_len: usize = dims.iter().product();
    let data = bytes[header..].to_vec();
    if data.len() != expected_len {
        return Err(Error::format(
            path,
            format!("payload is {} bytes, dimensions require {expected_len}", data.len()),
        ));
    }
    Ok(IdxTensor { dims, data })
}

fn find_file(dir: &Path, candidates: &[&str]) -> Result<PathBuf> {
    for name in candidates {
        let p = dir.join(name);
        if p.is_file() {
            return Ok(p);
        }
    }
    Err(Error::format(
        dir,
        format!("none of the expected files found: {}", candidates.join(", ")),
    ))
}

/// Load a two-class MNIST subset from a directory holding the standard
/// `train-images-idx3-ubyte` / `train-labels-idx1-ubyte` pair.
pub fn ingest_mnist(
    path: &Path,
    class_a: u8,
    class_b: u8,
    n_per_class: usize,
    mode: PreprocessMode,
) -> Result<Dataset> {
    check_classes(class_a, class_b, 9)?;
    let (images_path, labels_path) = if path.is_dir() {
        (
            find_file(path, &["train-images-idx3-ubyte", "train-images.idx3-ubyte"])?,
            find_file(path, &["train-labels-idx1-ubyte", "train-labels.idx1-ubyte"])?,
        )
    } else {
        return Err(Error::format(path, "expected a directory with MNIST IDX files"));
    };

    let images = parse_idx(&images_path, IMAGE_MAGIC)?;
    let labels = parse_idx(&labels_path, LABEL_MAGIC)?;
    if images.dims.len() != 3 {
        return Err(Error::format(&images_path, "image tensor must be 3-dimensional"));
    }
    let (count, rows, cols) = (images.dims[0], images.dims[1], images.dims[2]);
    if labels.dims != [count] {
        return Err(Error::format(
            &labels_path,
            format!("{} labels for {count} images", labels.data.len()),
        ));
    }
    let d = rows * cols;

    let (indices, selected_labels) =
        select_two_classes(&labels.data, class_a, class_b, n_per_class)?;
    let raw: Vec<Vec<u8>> =
        indices.iter().map(|&i| images.data[i * d..(i + 1) * d].to_vec()).collect();
    let x = preprocess_pixels(raw, d, mode)?;
    let y = two_class_labels(&selected_labels, class_a);
    Ok(Dataset {
        x,
        y,
        provenance: Provenance::Mnist { class_a, class_b },
        mode,
        label_spec: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    /// Write a tiny synthetic IDX pair: `n` images sized rows x cols.
    fn write_idx(dir: &Path, labels: &[u8], rows: usize, cols: usize) {
        let n = labels.len();
        let mut img = vec![0u8, 0, 8, 3];
        for dim in [n, rows, cols] {
            img.extend_from_slice(&(dim as u32).to_be_bytes());
        }
        for (i, &lab) in labels.iter().enumerate() {
            // Deterministic pixel pattern keyed on the index and label.
            for p in 0..rows * cols {
                img.push(((i * 31 + p * 7 + lab as usize * 13) % 256) as u8);
            }
        }
        let mut lab = vec![0u8, 0, 8, 1];
        lab.extend_from_slice(&(n as u32).to_be_bytes());
        lab.extend_from_slice(labels);
        fs::File::create(dir.join("train-images-idx3-ubyte"))
            .unwrap()
            .write_all(&img)
            .unwrap();
        fs::File::create(dir.join("train-labels-idx1-ubyte"))
            .unwrap()
            .write_all(&lab)
            .unwrap();
    }

    #[test]
    fn parses_and_scales() {
        let dir = tempfile::tempdir().unwrap();
        write_idx(dir.path(), &[3, 5, 3, 5, 5, 3, 1], 4, 4);
        let ds = ingest_mnist(dir.path(), 3, 5, 2, PreprocessMode::PaperFigures).unwrap();
        assert_eq!(ds.n(), 4);
        assert_eq!(ds.dim(), 16);
        assert!(ds.x.iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert_eq!(ds.y.iter().filter(|&&v| v == 1.0).count(), 2);
        assert_eq!(ds.y.iter().filter(|&&v| v == -1.0).count(), 2);
    }

    #[test]
    fn assumption1_rows_on_sphere() {
        let dir = tempfile::tempdir().unwrap();
        write_idx(dir.path(), &[3, 5, 3, 5], 5, 5);
        let ds = ingest_mnist(dir.path(), 3, 5, 2, PreprocessMode::Assumption1).unwrap();
        let radius = 5.0;
        for row in ds.x.row_iter() {
            assert!((row.norm() - radius).abs() <= 1e-9 * radius);
        }
    }

    #[test]
    fn bad_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_idx(dir.path(), &[3, 5], 2, 2);
        // Corrupt the images magic.
        let p = dir.path().join("train-images-idx3-ubyte");
        let mut bytes = fs::read(&p).unwrap();
        bytes[2] = 9;
        fs::write(&p, bytes).unwrap();
        let err = ingest_mnist(dir.path(), 3, 5, 1, PreprocessMode::PaperFigures).unwrap_err();
        assert!(err.to_string().contains("magic"));
    }

    #[test]
    fn insufficient_class_count_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_idx(dir.path(), &[3, 5, 3], 2, 2);
        let err = ingest_mnist(dir.path(), 3, 5, 2, PreprocessMode::PaperFigures).unwrap_err();
        assert!(matches!(err, Error::InsufficientSamples(_)));
    }

    #[test]
    fn same_classes_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(ingest_mnist(dir.path(), 4, 4, 1, PreprocessMode::PaperFigures).is_err());
    }
}
