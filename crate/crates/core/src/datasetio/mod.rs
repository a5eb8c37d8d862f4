//! On-disk formats: tensor blobs, dataset directories and checkpoints.

pub mod blob;
pub mod checkpoint;
pub mod dataset;

pub use blob::{decode_blob, encode_blob, read_blob, read_blob_as, write_blob, write_u8_blob, Blob};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, ManifestEntry, CHECKPOINT_VERSION};
pub use dataset::{read_dataset, validate_dataset, Dataset, DatasetMeta, DatasetWriter, SceneEntry, ValidationReport, Violation};

use std::path::Path;

use crate::error::{Error, Result};

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::json(path, e))
}

pub(crate) fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::json(path, e))?;
    bytes.push(b'\n');
    write_bytes(path, &bytes)
}
