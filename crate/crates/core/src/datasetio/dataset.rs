use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modality::{MultispectralPatch, SarPatch, MS_BANDS, PATCH_SIZE, SAR_CHANNELS};
use crate::numerics::Tensor;
use crate::synthdata::{
    count_components, is_human_class, Category, DialogueRecord, GeneratorConfig, LandCoverMap, SceneRecord, Split,
    AGB_MAX,
};

use super::blob::{read_blob, write_blob, write_u8_blob, Blob};
use super::{read_json, write_json};

pub const DATASET_VERSION: u32 = 1;
pub const SCENES_FILE: &str = "scenes.jsonl";
pub const DIALOGUES_FILE: &str = "dialogues.jsonl";
pub const META_FILE: &str = "meta.json";
const BLOB_DIR: &str = "blobs";

/// One line of `scenes.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneEntry {
    pub scene_id: u64,
    pub seed: u64,
    pub split: Split,
    pub agb: f64,
    pub patch_count: usize,
    pub human_activity: bool,
    pub class_names: Vec<String>,
    pub ms_blob: String,
    pub sar_blob: String,
    pub landcover_blob: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub format_version: u32,
    pub seed: u64,
    pub generator: GeneratorConfig,
    pub scene_count: usize,
    pub dialogue_count: usize,
}

/// Streams scenes into a dataset directory; `meta.json` is written by
/// `finish` and marks the directory complete.
pub struct DatasetWriter {
    dir: PathBuf,
    cfg: GeneratorConfig,
    scenes: BufWriter<File>,
    dialogues: BufWriter<File>,
    scene_count: usize,
    dialogue_count: usize,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_line<T: Serialize>(out: &mut BufWriter<File>, path: &Path, value: &T) -> Result<()> {
    serde_json::to_writer(&mut *out, value).map_err(|e| Error::json(path, e))?;
    out.write_all(b"\n").map_err(|e| Error::io(path, e))
}

impl DatasetWriter {
    pub fn create(dir: &Path, cfg: &GeneratorConfig) -> Result<Self> {
        let blobs = dir.join(BLOB_DIR);
        std::fs::create_dir_all(&blobs).map_err(|e| Error::io(&blobs, e))?;
        let meta = dir.join(META_FILE);
        if meta.exists() {
            std::fs::remove_file(&meta).map_err(|e| Error::io(&meta, e))?;
        }
        Ok(DatasetWriter {
            dir: dir.to_path_buf(),
            cfg: cfg.clone(),
            scenes: create(&dir.join(SCENES_FILE))?,
            dialogues: create(&dir.join(DIALOGUES_FILE))?,
            scene_count: 0,
            dialogue_count: 0,
        })
    }

    pub fn append(&mut self, scene: &SceneRecord, dialogues: &[DialogueRecord]) -> Result<()> {
        let stem = format!("{BLOB_DIR}/{:06}", scene.scene_id);
        let entry = SceneEntry {
            scene_id: scene.scene_id,
            seed: scene.seed,
            split: scene.split,
            agb: scene.agb,
            patch_count: scene.patch_count,
            human_activity: scene.human_activity,
            class_names: scene.land_cover.class_names.clone(),
            ms_blob: format!("{stem}_ms.bin"),
            sar_blob: format!("{stem}_sar.bin"),
            landcover_blob: format!("{stem}_landcover.bin"),
        };
        let f32s = |v: &[f64]| v.iter().map(|&x| x as f32).collect::<Vec<f32>>();
        let ms = Tensor::new(vec![MS_BANDS, PATCH_SIZE, PATCH_SIZE], f32s(scene.ms.values()))?;
        let sar = Tensor::new(vec![SAR_CHANNELS, PATCH_SIZE, PATCH_SIZE], f32s(scene.sar.values()))?;
        write_blob(&ms, &self.dir.join(&entry.ms_blob))?;
        write_blob(&sar, &self.dir.join(&entry.sar_blob))?;
        write_u8_blob(&[PATCH_SIZE, PATCH_SIZE], &scene.land_cover.grid, &self.dir.join(&entry.landcover_blob))?;
        let path = self.dir.join(SCENES_FILE);
        write_line(&mut self.scenes, &path, &entry)?;
        let path = self.dir.join(DIALOGUES_FILE);
        for d in dialogues {
            write_line(&mut self.dialogues, &path, d)?;
        }
        self.scene_count += 1;
        self.dialogue_count += dialogues.len();
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.scenes.flush().map_err(|e| Error::io(self.dir.join(SCENES_FILE), e))?;
        self.dialogues.flush().map_err(|e| Error::io(self.dir.join(DIALOGUES_FILE), e))?;
        let meta = DatasetMeta {
            format_version: DATASET_VERSION,
            seed: self.cfg.seed,
            generator: self.cfg.clone(),
            scene_count: self.scene_count,
            dialogue_count: self.dialogue_count,
        };
        write_json(&self.dir.join(META_FILE), &meta)
    }
}

/// A fully loaded dataset.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub scenes: Vec<SceneRecord>,
    pub dialogues: Vec<DialogueRecord>,
    index: HashMap<(u64, Category), usize>,
}

impl Dataset {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &SceneRecord> {
        self.scenes.iter().filter(move |s| s.split == split)
    }

    pub fn dialogue(&self, scene_id: u64, category: Category) -> Option<&DialogueRecord> {
        self.index.get(&(scene_id, category)).map(|&i| &self.dialogues[i])
    }

    pub fn class_names(&self) -> &[String] {
        self.scenes.first().map(|s| s.land_cover.class_names.as_slice()).unwrap_or(&[])
    }
}

fn read_lines<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<std::result::Result<T, String>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| format!("line {}: {e}", n + 1)));
    }
    Ok(out)
}

fn load_float_blob(path: &Path, dims: &[usize]) -> std::result::Result<Vec<f64>, String> {
    match read_blob(path).map_err(|e| e.to_string())? {
        Blob::F32(t) if t.dims() == dims => Ok(t.to_f64_vec()),
        Blob::F64(t) if t.dims() == dims => Ok(t.into_values()),
        other => Err(format!("{}: expected float blob {dims:?}, found {:?} {:?}", path.display(), other.dtype(), other.dims())),
    }
}

fn load_scene(dir: &Path, e: &SceneEntry) -> std::result::Result<SceneRecord, String> {
    let ms = load_float_blob(&dir.join(&e.ms_blob), &[MS_BANDS, PATCH_SIZE, PATCH_SIZE])?;
    let sar = load_float_blob(&dir.join(&e.sar_blob), &[SAR_CHANNELS, PATCH_SIZE, PATCH_SIZE])?;
    let lc_path = dir.join(&e.landcover_blob);
    let grid = match read_blob(&lc_path).map_err(|e| e.to_string())? {
        Blob::U8 { dims, values } if dims == [PATCH_SIZE, PATCH_SIZE] => values,
        other => return Err(format!("{}: expected u8 blob 25x25, found {:?} {:?}", lc_path.display(), other.dtype(), other.dims())),
    };
    Ok(SceneRecord {
        scene_id: e.scene_id,
        seed: e.seed,
        split: e.split,
        land_cover: LandCoverMap::new(grid, e.class_names.clone()).map_err(|e| e.to_string())?,
        ms: MultispectralPatch::new(ms).map_err(|e| e.to_string())?,
        sar: SarPatch::new(sar).map_err(|e| e.to_string())?,
        agb: e.agb,
        patch_count: e.patch_count,
        human_activity: e.human_activity,
    })
}

/// Loads a complete dataset directory.
pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let meta: DatasetMeta = read_json(&dir.join(META_FILE))?;
    let scenes_path = dir.join(SCENES_FILE);
    let mut scenes = Vec::new();
    for entry in read_lines::<SceneEntry>(&scenes_path)? {
        let entry = entry.map_err(|m| Error::format(&scenes_path, m))?;
        scenes.push(load_scene(dir, &entry).map_err(|m| Error::format(&scenes_path, format!("scene {}: {m}", entry.scene_id)))?);
    }
    let dialogues_path = dir.join(DIALOGUES_FILE);
    let mut dialogues = Vec::new();
    let mut index = HashMap::new();
    for d in read_lines::<DialogueRecord>(&dialogues_path)? {
        let d = d.map_err(|m| Error::format(&dialogues_path, m))?;
        index.insert((d.scene_id, d.category), dialogues.len());
        dialogues.push(d);
    }
    Ok(Dataset { meta, scenes, dialogues, index })
}

/// A single failed check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub scene_id: Option<u64>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.scene_id {
            Some(id) => write!(f, "scene {id}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub scenes_checked: usize,
    pub dialogues_checked: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, scene_id: Option<u64>, message: impl Into<String>) {
        self.violations.push(Violation { scene_id, message: message.into() });
    }
}

/// Checks structure and re-derives ground truth from stored land-cover
/// maps. Only reads; an unreadable index file is an error, everything else
/// is reported as a violation.
pub fn validate_dataset(dir: &Path) -> Result<ValidationReport> {
    let mut report = ValidationReport::default();
    if !dir.is_dir() {
        return Err(Error::Precondition(format!("{} is not a directory", dir.display())));
    }
    let meta = match read_json::<DatasetMeta>(&dir.join(META_FILE)) {
        Ok(m) => Some(m),
        Err(e) => {
            report.push(None, format!("meta.json unreadable (incomplete write?): {e}"));
            None
        }
    };
    let mut ids = HashSet::new();
    for entry in read_lines::<SceneEntry>(&dir.join(SCENES_FILE))? {
        let e = match entry {
            Ok(e) => e,
            Err(m) => {
                report.push(None, format!("{SCENES_FILE} {m}"));
                continue;
            }
        };
        report.scenes_checked += 1;
        let id = Some(e.scene_id);
        if !ids.insert(e.scene_id) {
            report.push(id, "duplicate scene_id");
        }
        for rel in [&e.ms_blob, &e.sar_blob, &e.landcover_blob] {
            if !dir.join(rel).is_file() {
                report.push(id, format!("missing blob {}", dir.join(rel).display()));
            }
        }
        if !(0.0..=AGB_MAX).contains(&e.agb) {
            report.push(id, format!("agb {} outside [0, {AGB_MAX}]", e.agb));
        }
        let scene = match load_scene(dir, &e) {
            Ok(s) => s,
            Err(m) => {
                if [&e.ms_blob, &e.sar_blob, &e.landcover_blob].iter().all(|r| dir.join(r).is_file()) {
                    report.push(id, m);
                }
                continue;
            }
        };
        let count = count_components(&scene.land_cover.grid, PATCH_SIZE, PATCH_SIZE);
        if count != e.patch_count {
            report.push(id, format!("patch_count {} but the land-cover map has {count}", e.patch_count));
        }
        let flags: Option<Vec<bool>> = e.class_names.iter().map(|n| is_human_class(n)).collect();
        match flags {
            None => report.push(id, "unknown class name"),
            Some(flags) => {
                let human = scene.land_cover.class_counts().iter().zip(&flags).any(|(&n, &h)| n > 0 && h);
                if human != e.human_activity {
                    report.push(id, format!("human_activity {} but the land-cover map implies {human}", e.human_activity));
                }
            }
        }
    }
    let mut seen = HashSet::new();
    for d in read_lines::<DialogueRecord>(&dir.join(DIALOGUES_FILE))? {
        let d = match d {
            Ok(d) => d,
            Err(m) => {
                report.push(None, format!("{DIALOGUES_FILE} {m}"));
                continue;
            }
        };
        report.dialogues_checked += 1;
        let id = Some(d.scene_id);
        if !ids.contains(&d.scene_id) {
            report.push(id, "dialogue refers to an unknown scene");
        }
        if let Err(e) = d.validate() {
            report.push(id, e.to_string());
        }
        if !seen.insert((d.scene_id, d.category)) {
            report.push(id, format!("duplicate {} dialogue", d.category.as_str()));
        }
    }
    for &sid in &ids {
        for c in Category::ALL {
            if !seen.contains(&(sid, c)) {
                report.push(Some(sid), format!("missing {} dialogue", c.as_str()));
            }
        }
    }
    if let Some(meta) = meta {
        if meta.scene_count != report.scenes_checked || meta.dialogue_count != report.dialogues_checked {
            report.push(None, "meta.json counts disagree with the index files");
        }
    }
    report.violations.sort_by_key(|v| v.scene_id);
    Ok(report)
}
