//! Experiment configuration: a flat key=value text file plus command-line
//! overrides. Unknown keys are rejected; every field except `method`,
//! `dataset`, and `architecture` has a documented default.
//!
//! Keys and defaults:
//!
//! | key               | default | meaning                                      |
//! |-------------------|---------|----------------------------------------------|
//! | method            | —       | qt, classical, or qcml                       |
//! | dataset           | —       | mnist, fashion_mnist, cifar10, synthetic     |
//! | architecture      | —       | target (or qcml_*) architecture id           |
//! | n_block           | 16      | circuit blocks (qt/qcml)                     |
//! | mapping_dims      | auto    | comma list, first must be N+1, last 1        |
//! | epochs            | 50      | training epochs (0 = evaluate nothing)       |
//! | batch_size        | 128     | minibatch size, last partial batch kept      |
//! | learning_rate     | 1e-4    | Adam step size                               |
//! | seed              | 42      | master seed (init, shuffling, synthetic data)|
//! | scale_mode        | raw     | probability column scaling: raw or pow2      |
//! | subset            | none    | stratified train-subset size                 |
//! | synthetic_train   | 1000    | synthetic train samples                      |
//! | synthetic_test    | 200     | synthetic test samples                       |
//! | synthetic_classes | 10      | synthetic class count (2..=10)               |
//! | theta_hist        | false   | emit theta_hist.csv (64 bins)                |

use std::collections::BTreeMap;
use std::path::Path;

use qt_mapping::ScaleMode;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Qt,
    Classical,
    Qcml,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Qt => "qt",
            Method::Classical => "classical",
            Method::Qcml => "qcml",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetId {
    Mnist,
    FashionMnist,
    Cifar10,
    Synthetic,
}

impl DatasetId {
    pub fn as_str(&self) -> &'static str {
        match self {
            DatasetId::Mnist => "mnist",
            DatasetId::FashionMnist => "fashion_mnist",
            DatasetId::Cifar10 => "cifar10",
            DatasetId::Synthetic => "synthetic",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub method: Method,
    pub dataset: DatasetId,
    pub architecture: String,
    pub n_block: usize,
    pub mapping_dims: Option<Vec<usize>>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub scale_mode: ScaleMode,
    pub subset: Option<usize>,
    pub synthetic_train: usize,
    pub synthetic_test: usize,
    pub synthetic_classes: usize,
    pub theta_hist: bool,
}

fn config_err(field: &str, detail: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        detail: detail.into(),
    }
}

const KNOWN_KEYS: &[&str] = &[
    "method",
    "dataset",
    "architecture",
    "n_block",
    "mapping_dims",
    "epochs",
    "batch_size",
    "learning_rate",
    "seed",
    "scale_mode",
    "subset",
    "synthetic_train",
    "synthetic_test",
    "synthetic_classes",
    "theta_hist",
];

/// Parses `key = value` lines (# starts a comment) into a raw map,
/// rejecting unknown and duplicate keys.
fn parse_pairs(text: &str, source: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(config_err(
                "syntax",
                format!("{source}:{}: expected key=value, got '{line}'", lineno + 1),
            ));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(config_err(&key, format!("{source}: unknown key")));
        }
        if map.insert(key.clone(), value).is_some() {
            return Err(config_err(&key, format!("{source}: duplicate key")));
        }
    }
    Ok(map)
}

fn take_parse<T: std::str::FromStr>(
    map: &BTreeMap<String, String>,
    key: &str,
    default: T,
) -> Result<T> {
    match map.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|_| config_err(key, format!("cannot parse '{v}'"))),
    }
}

/// Loads a config file and applies `key=value` overrides on top.
pub fn load_config(path: &Path, overrides: &[(String, String)]) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
        field: "config".into(),
        detail: format!("{}: {e}", path.display()),
    })?;
    let mut map = parse_pairs(&text, &path.display().to_string())?;
    for (key, value) in overrides {
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(config_err(key, "override names no existing config field"));
        }
        map.insert(key.clone(), value.clone());
    }
    config_from_map(map)
}

/// Builds a config from raw text without a file (used by tests).
pub fn config_from_str(text: &str, overrides: &[(String, String)]) -> Result<ExperimentConfig> {
    let mut map = parse_pairs(text, "<inline>")?;
    for (key, value) in overrides {
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(config_err(key, "override names no existing config field"));
        }
        map.insert(key.clone(), value.clone());
    }
    config_from_map(map)
}

fn config_from_map(map: BTreeMap<String, String>) -> Result<ExperimentConfig> {
    let method = match map.get("method").map(String::as_str) {
        Some("qt") => Method::Qt,
        Some("classical") => Method::Classical,
        Some("qcml") => Method::Qcml,
        Some(other) => return Err(config_err("method", format!("unknown method '{other}'"))),
        None => return Err(config_err("method", "mandatory key missing")),
    };
    let dataset = match map.get("dataset").map(String::as_str) {
        Some("mnist") => DatasetId::Mnist,
        Some("fashion_mnist") => DatasetId::FashionMnist,
        Some("cifar10") => DatasetId::Cifar10,
        Some("synthetic") => DatasetId::Synthetic,
        Some(other) => return Err(config_err("dataset", format!("unknown dataset '{other}'"))),
        None => return Err(config_err("dataset", "mandatory key missing")),
    };
    let architecture = map
        .get("architecture")
        .cloned()
        .ok_or_else(|| config_err("architecture", "mandatory key missing"))?;

    let mapping_dims = match map.get("mapping_dims") {
        None => None,
        Some(v) if v == "auto" => None,
        Some(v) => {
            let dims: std::result::Result<Vec<usize>, _> =
                v.split(',').map(|d| d.trim().parse()).collect();
            Some(dims.map_err(|_| config_err("mapping_dims", format!("cannot parse '{v}'")))?)
        }
    };
    let scale_mode = match map.get("scale_mode").map(String::as_str) {
        None | Some("raw") => ScaleMode::Raw,
        Some("pow2") => ScaleMode::Pow2,
        Some(other) => {
            return Err(config_err(
                "scale_mode",
                format!("expected raw or pow2, got '{other}'"),
            ))
        }
    };
    let subset = match map.get("subset") {
        None => None,
        Some(v) => Some(
            v.parse::<usize>()
                .map_err(|_| config_err("subset", format!("cannot parse '{v}'")))?,
        ),
    };
    let theta_hist = match map.get("theta_hist").map(String::as_str) {
        None | Some("false") => false,
        Some("true") => true,
        Some(other) => {
            return Err(config_err(
                "theta_hist",
                format!("expected true or false, got '{other}'"),
            ))
        }
    };

    let cfg = ExperimentConfig {
        method,
        dataset,
        architecture,
        n_block: take_parse(&map, "n_block", 16)?,
        mapping_dims,
        epochs: take_parse(&map, "epochs", 50)?,
        batch_size: take_parse(&map, "batch_size", 128)?,
        learning_rate: take_parse(&map, "learning_rate", 1e-4)?,
        seed: take_parse(&map, "seed", 42)?,
        scale_mode,
        subset,
        synthetic_train: take_parse(&map, "synthetic_train", 1000)?,
        synthetic_test: take_parse(&map, "synthetic_test", 200)?,
        synthetic_classes: take_parse(&map, "synthetic_classes", 10)?,
        theta_hist,
    };
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(config_err("batch_size", "must be at least 1"));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(config_err("learning_rate", "must be finite and non-negative"));
        }
        if matches!(self.method, Method::Qt | Method::Qcml) && self.n_block == 0 {
            return Err(config_err("n_block", "must be at least 1 for qt/qcml"));
        }
        if let Some(n) = self.subset {
            if n == 0 {
                return Err(config_err("subset", "must be at least 1"));
            }
        }
        if !(2..=10).contains(&self.synthetic_classes) {
            return Err(config_err("synthetic_classes", "must be in 2..=10"));
        }
        if self.synthetic_train == 0 || self.synthetic_test == 0 {
            return Err(config_err("synthetic_train", "sizes must be at least 1"));
        }
        let is_qcml_arch = self.architecture.starts_with("qcml_");
        match self.method {
            Method::Qcml if !is_qcml_arch => {
                return Err(config_err(
                    "architecture",
                    format!(
                        "method qcml needs a qcml_* architecture, got '{}'",
                        self.architecture
                    ),
                ))
            }
            Method::Qt | Method::Classical if is_qcml_arch => {
                return Err(config_err(
                    "architecture",
                    format!(
                        "method {} cannot use qcml architecture '{}'",
                        self.method.as_str(),
                        self.architecture
                    ),
                ))
            }
            _ => {}
        }
        Ok(())
    }

    /// The mapping dimensions to use: configured, or the per-architecture
    /// default (the published stacks for the CNN targets, a small tanh net
    /// otherwise).
    pub fn mapping_dims_for(&self, num_qubits: usize) -> Vec<usize> {
        if let Some(dims) = &self.mapping_dims {
            return dims.clone();
        }
        match self.architecture.as_str() {
            "mnist_cnn" => vec![14, 4, 20, 4, 1],
            "cifar_cnn" => vec![20, 40, 200, 40, 1],
            _ => vec![num_qubits + 1, 4, 1],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> &'static str {
        "method = qt\ndataset = mnist\narchitecture = mnist_cnn\n"
    }

    #[test]
    fn minimal_config_gets_documented_defaults() {
        let cfg = config_from_str(minimal(), &[]).unwrap();
        assert_eq!(cfg.epochs, 50);
        assert_eq!(cfg.batch_size, 128);
        assert_eq!(cfg.learning_rate, 1e-4);
        assert_eq!(cfg.n_block, 16);
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.scale_mode, ScaleMode::Raw);
        assert!(cfg.mapping_dims.is_none());
        assert_eq!(cfg.mapping_dims_for(13), vec![14, 4, 20, 4, 1]);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = config_from_str("method = qt\nfoo = 1\n", &[]).unwrap_err();
        assert!(err.to_string().contains("foo"), "{err}");
    }

    #[test]
    fn unknown_override_is_rejected() {
        let err = config_from_str(minimal(), &[("foo".into(), "1".into())]).unwrap_err();
        assert!(err.to_string().contains("foo"), "{err}");
    }

    #[test]
    fn overrides_take_precedence() {
        let cfg = config_from_str(minimal(), &[("n_block".into(), "121".into())]).unwrap();
        assert_eq!(cfg.n_block, 121);
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "# experiment\nmethod = qt # inline comment\n\ndataset = mnist\narchitecture = mnist_cnn\n";
        assert!(config_from_str(text, &[]).is_ok());
    }

    #[test]
    fn missing_mandatory_key_is_an_error() {
        let err = config_from_str("method = qt\ndataset = mnist\n", &[]).unwrap_err();
        assert!(err.to_string().contains("architecture"), "{err}");
    }

    #[test]
    fn qcml_method_requires_qcml_architecture() {
        let err = config_from_str(
            "method = qcml\ndataset = mnist\narchitecture = mnist_cnn\n",
            &[],
        )
        .unwrap_err();
        assert!(err.to_string().contains("qcml"), "{err}");
        assert!(config_from_str(
            "method = qcml\ndataset = mnist\narchitecture = qcml_mnist\nn_block = 13\n",
            &[],
        )
        .is_ok());
    }

    #[test]
    fn epochs_zero_is_a_valid_degenerate_run() {
        let cfg = config_from_str(minimal(), &[("epochs".into(), "0".into())]).unwrap();
        assert_eq!(cfg.epochs, 0);
    }
}
