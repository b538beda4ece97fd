//! CIFAR-10 binary batch reader (3073-byte records: 1 label + 3072 pixels).

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::{
    check_classes, preprocess_pixels, select_two_classes, two_class_labels, Dataset,
    PreprocessMode, Provenance,
};

const RECORD_LEN: usize = 3073;
const PIXELS: usize = 3072;

fn batch_files(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| Error::io(path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("data_batch") && n.ends_with(".bin"))
            })
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(Error::format(path, "no data_batch_*.bin files in directory"));
        }
        return Ok(files);
    }
    Err(Error::format(path, "path is neither a batch file nor a directory"))
}

/// Load a two-class CIFAR-10 subset from a batch file or a directory of
/// `data_batch_*.bin` files.
pub fn ingest_cifar10(
    path: &Path,
    class_a: u8,
    class_b: u8,
    n_per_class: usize,
    mode: PreprocessMode,
) -> Result<Dataset> {
    check_classes(class_a, class_b, 9)?;
    let mut labels = Vec::new();
    let mut pixels: Vec<Vec<u8>> = Vec::new();
    for file in batch_files(path)? {
        let bytes = fs::read(&file).map_err(|e| Error::io(&file, e))?;
        if bytes.is_empty() || bytes.len() % RECORD_LEN != 0 {
            return Err(Error::format(
                &file,
                format!("length {} is not a positive multiple of {RECORD_LEN}", bytes.len()),
            ));
        }
        for record in bytes.chunks_exact(RECORD_LEN) {
            let label = record[0];
            if label > 9 {
                return Err(Error::format(&file, format!("label byte {label} outside 0..=9")));
            }
            labels.push(label);
            pixels.push(record[1..].to_vec());
        }
    }
    let (indices, selected_labels) = select_two_classes(&labels, class_a, class_b, n_per_class)?;
    let raw: Vec<Vec<u8>> = indices.iter().map(|&i| std::mem::take(&mut pixels[i])).collect();
    let x = preprocess_pixels(raw, PIXELS, mode)?;
    let y = two_class_labels(&selected_labels, class_a);
    Ok(Dataset {
        x,
        y,
        provenance: Provenance::Cifar10 { class_a, class_b },
        mode,
        label_spec: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_batch(path: &Path, labels: &[u8]) {
        let mut bytes = Vec::with_capacity(labels.len() * RECORD_LEN);
        for (i, &lab) in labels.iter().enumerate() {
            bytes.push(lab);
            for p in 0..PIXELS {
                bytes.push(((i * 17 + p) % 256) as u8);
            }
        }
        fs::File::create(path).unwrap().write_all(&bytes).unwrap();
    }

    #[test]
    fn reads_two_classes_from_file() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("data_batch_1.bin");
        write_batch(&file, &[0, 7, 2, 7, 2, 2]);
        let ds = ingest_cifar10(&file, 2, 7, 2, PreprocessMode::PaperFigures).unwrap();
        assert_eq!(ds.n(), 4);
        assert_eq!(ds.dim(), 3072);
        assert!(ds.x.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn directory_of_batches() {
        let dir = tempfile::tempdir().unwrap();
        write_batch(&dir.path().join("data_batch_1.bin"), &[1, 3]);
        write_batch(&dir.path().join("data_batch_2.bin"), &[3, 1]);
        let ds = ingest_cifar10(dir.path(), 1, 3, 2, PreprocessMode::Assumption1).unwrap();
        assert_eq!(ds.n(), 4);
        let radius = (3072f64).sqrt();
        for row in ds.x.row_iter() {
            assert!((row.norm() - radius).abs() <= 1e-9 * radius);
        }
    }

    #[test]
    fn bad_record_length_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("data_batch_1.bin");
        fs::write(&file, vec![0u8; RECORD_LEN + 1]).unwrap();
        let err = ingest_cifar10(&file, 0, 1, 1, PreprocessMode::PaperFigures).unwrap_err();
        assert!(err.to_string().contains("multiple"));
    }

    #[test]
    fn bad_label_byte_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("data_batch_1.bin");
        let mut bytes = vec![0u8; RECORD_LEN];
        bytes[0] = 10;
        fs::write(&file, bytes).unwrap();
        let err = ingest_cifar10(&file, 0, 1, 1, PreprocessMode::PaperFigures).unwrap_err();
        assert!(err.to_string().contains("label byte"));
    }
}
