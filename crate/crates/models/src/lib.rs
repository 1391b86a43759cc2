//! Target classical architectures, the deterministic flat-parameter layout,
//! forward passes, classification loss, and the `.qtmd` export container.
//!
//! This crate deliberately has no dependency on any circuit simulation:
//! importing an export and running inference is a purely classical path.

mod arch;
mod export;
mod target;

pub use arch::{
    architecture_by_id, cifar_cnn_spec, layout, mnist_cnn_spec, synth_mlp_spec, toy_mlp32_spec,
    Activation, ArchitectureSpec, InputShape, LayerSpec, LayoutEntry, ParamLayout,
};
pub use export::{
    import_export, import_model, write_atomic_bytes, ModelExport, Provenance, QTMD_MAGIC,
    QTMD_VERSION,
};
pub use target::{accuracy, build_model_graph, cross_entropy, inject, TargetModel};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown architecture id '{id}'")]
    UnknownArchitecture { id: String },

    #[error("theta length {got} does not match architecture parameter count {expected}")]
    ThetaLength { expected: usize, got: usize },

    #[error("bad architecture: {detail}")]
    BadArchitecture { detail: String },

    #[error("malformed model file: {detail}")]
    Format { detail: String },

    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },

    #[error(transparent)]
    Graph(#[from] qt_diffcore::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
