//! IDX container parsing and serialization.
//!
//! Byte layout: 4-byte big-endian magic, then one 4-byte big-endian size per
//! dimension, then the payload as unsigned bytes. Images use magic
//! 0x00000803 with dims (count, rows, cols); labels use 0x00000801 with one
//! dim. Pixels normalize as value/255 in f64; serialization inverts that
//! exactly, so a load/store round trip is byte-identical.

use std::path::Path;

use crate::{Dataset, Error, Result, Split};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a str,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Parse {
                path: self.path.to_string(),
                detail: format!(
                    "truncated while reading {what}: wanted {n} bytes, {} remain",
                    self.bytes.len() - self.pos
                ),
                offset: self.pos,
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32_be(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_be_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Parse {
                path: self.path.to_string(),
                detail: format!("{} unexpected trailing bytes", self.bytes.len() - self.pos),
                offset: self.pos,
            });
        }
        Ok(())
    }
}

fn parse_images(bytes: &[u8], path: &str) -> Result<(Vec<f64>, usize, usize, usize)> {
    let mut c = Cursor { bytes, pos: 0, path };
    let magic = c.u32_be("magic")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Parse {
            path: path.to_string(),
            detail: format!("bad images magic {magic:#010x} (expected {IDX_IMAGES_MAGIC:#010x})"),
            offset: 0,
        });
    }
    let count = c.u32_be("image count")? as usize;
    let rows = c.u32_be("row count")? as usize;
    let cols = c.u32_be("column count")? as usize;
    let payload = c.take(count * rows * cols, "pixel payload")?;
    c.finish()?;
    let pixels = payload.iter().map(|b| *b as f64 / 255.0).collect();
    Ok((pixels, count, rows, cols))
}

fn parse_labels(bytes: &[u8], path: &str) -> Result<Vec<u8>> {
    let mut c = Cursor { bytes, pos: 0, path };
    let magic = c.u32_be("magic")?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::Parse {
            path: path.to_string(),
            detail: format!("bad labels magic {magic:#010x} (expected {IDX_LABELS_MAGIC:#010x})"),
            offset: 0,
        });
    }
    let count = c.u32_be("label count")? as usize;
    let payload = c.take(count, "label payload")?.to_vec();
    c.finish()?;
    Ok(payload)
}

/// Parses an image/label pair already read into memory.
pub fn load_idx_bytes(
    image_bytes: &[u8],
    label_bytes: &[u8],
    name: &str,
    split: Split,
) -> Result<Dataset> {
    let (pixels, count, rows, cols) = parse_images(image_bytes, name)?;
    let labels = parse_labels(label_bytes, name)?;
    if labels.len() != count {
        return Err(Error::CountMismatch {
            images: count,
            labels: labels.len(),
        });
    }
    if count == 0 {
        // preserve the advertised geometry even for an empty container
        return Dataset::new(Vec::new(), 1, rows.max(1), cols.max(1), Vec::new(), split);
    }
    Dataset::new(pixels, 1, rows, cols, labels, split)
}

/// Loads an IDX image file plus its label file.
pub fn load_idx(images_path: &Path, labels_path: &Path, split: Split) -> Result<Dataset> {
    let image_bytes = std::fs::read(images_path)?;
    let label_bytes = std::fs::read(labels_path)?;
    load_idx_bytes(
        &image_bytes,
        &label_bytes,
        &images_path.display().to_string(),
        split,
    )
}

/// Serializes a single-channel dataset back to IDX bytes. Pixels invert the
/// exact value/255 normalization, so loading the output reproduces the input
/// files byte for byte.
pub fn dataset_to_idx_bytes(dataset: &Dataset) -> Result<(Vec<u8>, Vec<u8>)> {
    let (channels, height, width) = dataset.sample_dims();
    if channels != 1 {
        return Err(Error::Invalid {
            detail: format!("IDX serialization is single-channel; dataset has {channels}"),
        });
    }
    let mut images = Vec::with_capacity(16 + dataset.len() * height * width);
    images.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    images.extend_from_slice(&(dataset.len() as u32).to_be_bytes());
    images.extend_from_slice(&(height as u32).to_be_bytes());
    images.extend_from_slice(&(width as u32).to_be_bytes());
    for i in 0..dataset.len() {
        for &p in dataset.image(i) {
            images.push((p * 255.0).round() as u8);
        }
    }
    let mut labels = Vec::with_capacity(8 + dataset.len());
    labels.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    labels.extend_from_slice(&(dataset.len() as u32).to_be_bytes());
    labels.extend_from_slice(dataset.labels());
    Ok((images, labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image_file(count: u32, rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
        b.extend_from_slice(&count.to_be_bytes());
        b.extend_from_slice(&rows.to_be_bytes());
        b.extend_from_slice(&cols.to_be_bytes());
        b.extend_from_slice(pixels);
        b
    }

    fn label_file(labels: &[u8]) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
        b.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        b.extend_from_slice(labels);
        b
    }

    #[test]
    fn wrong_magic_on_labels_is_rejected() {
        let images = image_file(1, 2, 2, &[0, 1, 2, 3]);
        // feed the images magic where labels are expected
        let bad_labels = image_file(1, 2, 2, &[0, 1, 2, 3]);
        let err = load_idx_bytes(&images, &bad_labels, "labels", Split::Train).unwrap_err();
        assert!(err.to_string().contains("bad labels magic"), "{err}");
    }

    #[test]
    fn empty_count_file_loads_as_empty_dataset() {
        let images = image_file(0, 28, 28, &[]);
        let labels = label_file(&[]);
        let d = load_idx_bytes(&images, &labels, "empty", Split::Test).unwrap();
        assert_eq!(d.len(), 0);
    }

    #[test]
    fn count_mismatch_is_rejected() {
        let images = image_file(2, 1, 1, &[5, 9]);
        let labels = label_file(&[1]);
        assert!(matches!(
            load_idx_bytes(&images, &labels, "mismatch", Split::Train),
            Err(Error::CountMismatch { .. })
        ));
    }

    #[test]
    fn truncation_reports_the_byte_offset() {
        let mut images = image_file(2, 2, 2, &[1, 2, 3, 4, 5, 6, 7, 8]);
        images.truncate(18);
        let labels = label_file(&[0, 1]);
        match load_idx_bytes(&images, &labels, "trunc", Split::Train) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 16),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn normalization_is_exactly_value_over_255() {
        let images = image_file(1, 1, 4, &[0, 51, 128, 255]);
        let labels = label_file(&[3]);
        let d = load_idx_bytes(&images, &labels, "norm", Split::Train).unwrap();
        assert_eq!(
            d.image(0),
            &[0.0, 51.0 / 255.0, 128.0 / 255.0, 255.0 / 255.0]
        );
    }

    #[test]
    fn round_trip_reproduces_input_bytes() {
        let pixels: Vec<u8> = (0..=255u8).collect();
        let images = image_file(16, 4, 4, &pixels);
        let labels = label_file(&(0..16).map(|i| i % 10).collect::<Vec<u8>>());
        let d = load_idx_bytes(&images, &labels, "rt", Split::Train).unwrap();
        let (out_images, out_labels) = dataset_to_idx_bytes(&d).unwrap();
        assert_eq!(out_images, images);
        assert_eq!(out_labels, labels);
    }
}
