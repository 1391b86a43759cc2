//! Dataset ingestion: IDX files (MNIST/FashionMNIST layout), CIFAR-10 binary
//! batches, deterministic stratified subsets, and a synthetic blob dataset
//! for desk-scale runs. Loading is file-based only; nothing downloads.

mod cifar;
mod idx;
mod subset;
mod synthetic;

pub use cifar::load_cifar10;
pub use idx::{dataset_to_idx_bytes, load_idx, load_idx_bytes, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use subset::subset;
pub use synthetic::synthetic;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {detail} (byte offset {offset})")]
    Parse {
        path: String,
        detail: String,
        offset: usize,
    },

    #[error("images hold {images} samples but labels hold {labels}")]
    CountMismatch { images: usize, labels: usize },

    #[error("requested {n} samples from a dataset of {available}")]
    SubsetTooLarge { n: usize, available: usize },

    #[error("label {label} outside [0, 10) at sample {index}")]
    BadLabel { label: u8, index: usize },

    #[error("invalid request: {detail}")]
    Invalid { detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which half of an experiment a dataset feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// Immutable in-memory dataset: flat f64 pixels in [0, 1] (exactly raw/255)
/// and one label byte in [0, 10) per sample.
#[derive(Debug, Clone)]
pub struct Dataset {
    images: Vec<f64>,
    channels: usize,
    height: usize,
    width: usize,
    labels: Vec<u8>,
    split: Split,
}

impl Dataset {
    pub fn new(
        images: Vec<f64>,
        channels: usize,
        height: usize,
        width: usize,
        labels: Vec<u8>,
        split: Split,
    ) -> Result<Self> {
        let sample = channels * height * width;
        if sample == 0 || images.len() != labels.len() * sample {
            return Err(Error::Invalid {
                detail: format!(
                    "pixel buffer of {} does not hold {} samples of {}x{}x{}",
                    images.len(),
                    labels.len(),
                    channels,
                    height,
                    width
                ),
            });
        }
        for (index, &label) in labels.iter().enumerate() {
            if label >= 10 {
                return Err(Error::BadLabel { label, index });
            }
        }
        Ok(Dataset {
            images,
            channels,
            height,
            width,
            labels,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sample_dims(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn sample_len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn image(&self, i: usize) -> &[f64] {
        let s = self.sample_len();
        &self.images[i * s..(i + 1) * s]
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// Copies the given samples into one flat batch buffer, in index order.
    pub fn gather(&self, indices: &[usize]) -> (Vec<f64>, Vec<usize>) {
        let s = self.sample_len();
        let mut pixels = Vec::with_capacity(indices.len() * s);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            pixels.extend_from_slice(self.image(i));
            labels.push(self.labels[i] as usize);
        }
        (pixels, labels)
    }

    /// Per-class sample counts (10 bins).
    pub fn label_histogram(&self) -> [usize; 10] {
        let mut hist = [0usize; 10];
        for &l in &self.labels {
            hist[l as usize] += 1;
        }
        hist
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }
}
