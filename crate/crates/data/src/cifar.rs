//! CIFAR-10 binary batches: 3073-byte records of one label byte followed by
//! 3072 pixel bytes (channel-major R, G, B; row-major within each channel).

use std::path::Path;

use crate::{Dataset, Error, Result, Split};

pub const CIFAR_RECORD_BYTES: usize = 3073;
const CIFAR_PIXELS: usize = 3072;

/// Loads and concatenates one or more batch files in the given order.
pub fn load_cifar10(batch_paths: &[&Path], split: Split) -> Result<Dataset> {
    let mut pixels = Vec::new();
    let mut labels = Vec::new();
    for path in batch_paths {
        let bytes = std::fs::read(path)?;
        if bytes.len() % CIFAR_RECORD_BYTES != 0 {
            return Err(Error::Parse {
                path: path.display().to_string(),
                detail: format!(
                    "file size {} is not a multiple of the {CIFAR_RECORD_BYTES}-byte record",
                    bytes.len()
                ),
                offset: bytes.len() - bytes.len() % CIFAR_RECORD_BYTES,
            });
        }
        for record in bytes.chunks_exact(CIFAR_RECORD_BYTES) {
            labels.push(record[0]);
            pixels.extend(record[1..].iter().map(|b| *b as f64 / 255.0));
        }
    }
    debug_assert_eq!(pixels.len(), labels.len() * CIFAR_PIXELS);
    Dataset::new(pixels, 3, 32, 32, labels, split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_batch(records: &[(u8, Vec<u8>)]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for (label, pixels) in records {
            f.write_all(&[*label]).unwrap();
            f.write_all(pixels).unwrap();
        }
        f.flush().unwrap();
        f
    }

    #[test]
    fn record_count_is_file_size_over_record_size() {
        let records: Vec<(u8, Vec<u8>)> = (0..3)
            .map(|i| (i as u8, vec![i as u8; CIFAR_PIXELS]))
            .collect();
        let f = write_batch(&records);
        let d = load_cifar10(&[f.path()], Split::Train).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.sample_dims(), (3, 32, 32));
    }

    #[test]
    fn label_byte_is_the_class() {
        let f = write_batch(&[(9, vec![0; CIFAR_PIXELS])]);
        let d = load_cifar10(&[f.path()], Split::Test).unwrap();
        assert_eq!(d.label(0), 9);
    }

    #[test]
    fn partial_record_is_rejected() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(&vec![0u8; CIFAR_RECORD_BYTES + 10]).unwrap();
        f.flush().unwrap();
        assert!(matches!(
            load_cifar10(&[f.path()], Split::Train),
            Err(Error::Parse { .. })
        ));
    }
}
