use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{DType, ParamSet, Real};

use super::blob::{decode_blob, encode_blob, payload_offset, Blob};
use super::{read_bytes, read_json, write_bytes, write_json};

pub const CHECKPOINT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
const PARAM_DIR: &str = "params";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: DType,
    pub trainable: bool,
    pub blob: String,
    pub crc32: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    /// Last training stage that wrote this checkpoint; 0 for a fresh init.
    stage: u8,
    model_config: serde_json::Value,
    params: Vec<ManifestEntry>,
}

/// Parameters plus the provenance recorded alongside them.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<F> {
    pub stage: u8,
    pub model_config: serde_json::Value,
    pub params: ParamSet<F>,
}

fn blob_name(param: &str) -> String {
    let safe: String = param
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '_' || c == '-' { c } else { '_' })
        .collect();
    format!("{PARAM_DIR}/{safe}.bin")
}

pub fn save_checkpoint<F: Real>(ckpt: &Checkpoint<F>, dir: &Path) -> Result<()> {
    let params_dir = dir.join(PARAM_DIR);
    std::fs::create_dir_all(&params_dir).map_err(|e| Error::io(&params_dir, e))?;
    let mut entries = Vec::with_capacity(ckpt.params.len());
    for p in ckpt.params.iter() {
        let bytes = encode_blob(&p.tensor)?;
        let offset = payload_offset(&bytes).expect("encoded header");
        let blob = blob_name(&p.name);
        write_bytes(&dir.join(&blob), &bytes)?;
        entries.push(ManifestEntry {
            name: p.name.clone(),
            shape: p.tensor.dims().to_vec(),
            dtype: F::DTYPE,
            trainable: p.trainable,
            blob,
            crc32: crc32fast::hash(&bytes[offset..]),
        });
    }
    let manifest = Manifest {
        format_version: CHECKPOINT_VERSION,
        stage: ckpt.stage,
        model_config: ckpt.model_config.clone(),
        params: entries,
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)
}

/// Loads and verifies every parameter; floating blobs are converted to `F`.
pub fn load_checkpoint<F: Real>(dir: &Path) -> Result<Checkpoint<F>> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest: Manifest = read_json(&manifest_path)?;
    if manifest.format_version != CHECKPOINT_VERSION {
        return Err(Error::format(&manifest_path, format!("unsupported version {}", manifest.format_version)));
    }
    let mut params = ParamSet::new();
    for e in &manifest.params {
        let path = dir.join(&e.blob);
        if !path.is_file() {
            return Err(Error::format(&path, format!("missing blob for parameter {}", e.name)));
        }
        let bytes = read_bytes(&path)?;
        let blob = decode_blob(&bytes, &path)?;
        if blob.dims() != e.shape.as_slice() {
            return Err(Error::Dimension(format!(
                "parameter {}: manifest shape {:?} but blob holds {:?}",
                e.name,
                e.shape,
                blob.dims()
            )));
        }
        if blob.dtype() != e.dtype {
            return Err(Error::format(&path, format!("parameter {}: dtype differs from manifest", e.name)));
        }
        let offset = payload_offset(&bytes).expect("decoded header");
        let crc = crc32fast::hash(&bytes[offset..]);
        if crc != e.crc32 {
            return Err(Error::format(
                &path,
                format!("parameter {}: checksum {crc:08x} != manifest {:08x}", e.name, e.crc32),
            ));
        }
        let tensor = match blob {
            Blob::F32(t) => t.cast(),
            Blob::F64(t) => t.cast(),
            Blob::U8 { .. } => return Err(Error::format(&path, format!("parameter {} is not floating", e.name))),
        };
        params.insert(e.name.clone(), tensor, e.trainable)?;
    }
    Ok(Checkpoint { stage: manifest.stage, model_config: manifest.model_config, params })
}
