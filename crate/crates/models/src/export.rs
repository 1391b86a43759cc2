//! The `.qtmd` model container: a self-describing binary holding the flat
//! trained weights at 32-bit precision plus a provenance block, so a trained
//! classifier can be shipped and run with no training or circuit code.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic "QTMD" | version u16 | arch-id len u32 + UTF-8 | M u64 |
//! theta as f32 × M | provenance len u32 + UTF-8 JSON | CRC32 of everything before
//! ```

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::arch::architecture_by_id;
use crate::target::{inject, TargetModel};
use crate::{Error, Result};

pub const QTMD_MAGIC: &[u8; 4] = b"QTMD";
pub const QTMD_VERSION: u16 = 1;

/// Run description embedded in the export; never affects inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_block: Option<usize>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_train_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_test_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_train_acc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_test_acc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelExport {
    pub architecture_id: String,
    pub theta: Vec<f32>,
    pub provenance: Provenance,
}

impl ModelExport {
    /// Casts 64-bit training weights down to the 32-bit storage precision.
    pub fn from_theta(architecture_id: &str, theta: &[f64], provenance: Provenance) -> Self {
        ModelExport {
            architecture_id: architecture_id.to_string(),
            theta: theta.iter().map(|v| *v as f32).collect(),
            provenance,
        }
    }

    /// Weights widened back to f64 for the forward kernels.
    pub fn theta_f64(&self) -> Vec<f64> {
        self.theta.iter().map(|v| *v as f64).collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let arch = self.architecture_id.as_bytes();
        let prov = serde_json::to_string(&self.provenance).expect("provenance serializes");
        let mut out = Vec::with_capacity(4 + 2 + 4 + arch.len() + 8 + self.theta.len() * 4 + 4);
        out.extend_from_slice(QTMD_MAGIC);
        out.extend_from_slice(&QTMD_VERSION.to_le_bytes());
        out.extend_from_slice(&(arch.len() as u32).to_le_bytes());
        out.extend_from_slice(arch);
        out.extend_from_slice(&(self.theta.len() as u64).to_le_bytes());
        for v in &self.theta {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let prov_bytes = prov.as_bytes();
        out.extend_from_slice(&(prov_bytes.len() as u32).to_le_bytes());
        out.extend_from_slice(prov_bytes);
        let checksum = crc32fast::hash(&out);
        out.extend_from_slice(&checksum.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic = r.take(4)?;
        if magic != QTMD_MAGIC {
            return Err(Error::Format {
                detail: format!("bad magic {magic:02x?} at offset 0"),
            });
        }
        let version = u16::from_le_bytes(r.take(2)?.try_into().unwrap());
        if version != QTMD_VERSION {
            return Err(Error::Format {
                detail: format!("unsupported version {version} (expected {QTMD_VERSION})"),
            });
        }
        let arch_len = u32::from_le_bytes(r.take(4)?.try_into().unwrap()) as usize;
        let architecture_id = String::from_utf8(r.take(arch_len)?.to_vec()).map_err(|e| {
            Error::Format {
                detail: format!("architecture id is not UTF-8: {e}"),
            }
        })?;
        let m = u64::from_le_bytes(r.take(8)?.try_into().unwrap()) as usize;
        let mut theta = Vec::with_capacity(m);
        let theta_bytes = r.take(m * 4)?;
        for chunk in theta_bytes.chunks_exact(4) {
            theta.push(f32::from_le_bytes(chunk.try_into().unwrap()));
        }
        let prov_len = u32::from_le_bytes(r.take(4)?.try_into().unwrap()) as usize;
        let prov_bytes = r.take(prov_len)?;
        let provenance: Provenance = serde_json::from_slice(prov_bytes)?;
        let body_end = r.pos;
        let stored = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
        if r.pos != bytes.len() {
            return Err(Error::Format {
                detail: format!("{} trailing bytes after checksum", bytes.len() - r.pos),
            });
        }
        let computed = crc32fast::hash(&bytes[..body_end]);
        if stored != computed {
            return Err(Error::ChecksumMismatch { stored, computed });
        }
        Ok(ModelExport {
            architecture_id,
            theta,
            provenance,
        })
    }

    /// Writes via a temp file in the same directory plus rename, so readers
    /// never observe a truncated export.
    pub fn write_atomic(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes();
        write_atomic_bytes(path, &bytes)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::from_bytes(&bytes)
    }
}

/// Temp-file-then-rename write used for every run artifact.
pub fn write_atomic_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp_path = std::path::PathBuf::from(tmp);
    {
        let mut f = std::fs::File::create(&tmp_path)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp_path, path)?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Format {
                detail: format!(
                    "truncated file: wanted {n} bytes at offset {}, only {} remain",
                    self.pos,
                    self.bytes.len() - self.pos
                ),
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }
}

/// Loads an export and binds it to its architecture. This path never touches
/// circuit code: it lives in a crate with no quantum dependency.
pub fn import_model(path: &Path) -> Result<TargetModel> {
    let export = ModelExport::read(path)?;
    import_export(&export)
}

/// In-memory variant of [`import_model`].
pub fn import_export(export: &ModelExport) -> Result<TargetModel> {
    let spec = architecture_by_id(&export.architecture_id)?;
    if export.theta.len() != spec.param_count() {
        return Err(Error::ThetaLength {
            expected: spec.param_count(),
            got: export.theta.len(),
        });
    }
    inject(&export.theta_f64(), &spec)
}
