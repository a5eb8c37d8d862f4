use std::collections::HashSet;
use std::path::Path;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::datasetio::DatasetWriter;
use crate::error::{Error, Result};
use crate::modality::{MultispectralPatch, SarPatch, MS_BANDS, PATCH_PIXELS, SAR_CHANNELS};

use super::classes::{default_profiles, ClassProfile, MAX_CLASSES};
use super::dialogue::{make_dialogues, DialogueRecord};
use super::landcover::{compute_agb, count_patches, generate_land_cover, human_activity, LandCoverMap};
use super::templates::TemplateSuite;
use super::{derive_seed, seeded};

const TAG_LANDCOVER: u64 = 1;
const TAG_RENDER: u64 = 2;
const TAG_AGB: u64 = 3;
const TAG_DIALOGUE: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// A generated scene and its analytic ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneRecord {
    pub scene_id: u64,
    pub seed: u64,
    pub split: Split,
    pub land_cover: LandCoverMap,
    pub ms: MultispectralPatch,
    pub sar: SarPatch,
    pub agb: f64,
    pub patch_count: usize,
    pub human_activity: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n_train: usize,
    pub n_test: usize,
    pub classes: usize,
    pub seed: u64,
    pub smoothness: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig { n_train: 2000, n_test: 400, classes: 6, seed: 42, smoothness: 14.0 }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_train == 0 || self.n_test == 0 {
            return Err(Error::Config("train and test scene counts must be at least 1".into()));
        }
        if !(2..=MAX_CLASSES).contains(&self.classes) {
            return Err(Error::Config(format!("class count must be in [2, {MAX_CLASSES}], got {}", self.classes)));
        }
        if !(self.smoothness > 0.0) || !self.smoothness.is_finite() {
            return Err(Error::Config(format!("smoothness must be positive, got {}", self.smoothness)));
        }
        Ok(())
    }

    pub fn scene_ids(&self) -> impl Iterator<Item = (u64, Split)> {
        let n_train = self.n_train as u64;
        (0..n_train)
            .map(|id| (id, Split::Train))
            .chain((n_train..n_train + self.n_test as u64).map(|id| (id, Split::Test)))
    }
}

/// Per-cell sensor values from the class profiles, rounded to `f32`
/// precision so stored blobs reproduce them exactly.
pub fn render_scene(map: &LandCoverMap, profiles: &[ClassProfile], seed: u64) -> Result<(MultispectralPatch, SarPatch)> {
    if profiles.len() < map.num_classes() {
        return Err(Error::Precondition(format!(
            "{} profiles for {} classes",
            profiles.len(),
            map.num_classes()
        )));
    }
    let mut rng = seeded(seed);
    let unit = Normal::new(0.0, 1.0).unwrap();
    let mut ms = vec![0.0; MS_BANDS * PATCH_PIXELS];
    let mut sar = vec![0.0; SAR_CHANNELS * PATCH_PIXELS];
    let clamp = |v: f64| v.max(0.0) as f32 as f64;
    for (cell, &class) in map.grid.iter().enumerate() {
        let p = &profiles[class as usize];
        for b in 0..MS_BANDS {
            let z: f64 = unit.sample(&mut rng);
            ms[b * PATCH_PIXELS + cell] = clamp(p.reflectance[b] + p.reflectance_noise * z);
        }
        for c in 0..SAR_CHANNELS {
            let z: f64 = unit.sample(&mut rng);
            sar[c * PATCH_PIXELS + cell] = clamp(p.backscatter[c] + p.backscatter_noise * z);
        }
    }
    Ok((MultispectralPatch::new(ms)?, SarPatch::new(sar)?))
}

/// Builds one scene and its four dialogues from the global seed and scene id.
pub fn generate_scene(cfg: &GeneratorConfig, scene_id: u64, split: Split) -> Result<(SceneRecord, Vec<DialogueRecord>)> {
    let profiles = default_profiles(cfg.classes);
    let seed = derive_seed(cfg.seed, scene_id);
    let land_cover = generate_land_cover(derive_seed(seed, TAG_LANDCOVER), &profiles, cfg.smoothness)?;
    let (ms, sar) = render_scene(&land_cover, &profiles, derive_seed(seed, TAG_RENDER))?;
    let agb = compute_agb(&land_cover, &profiles, derive_seed(seed, TAG_AGB))?;
    let scene = SceneRecord {
        scene_id,
        seed,
        split,
        patch_count: count_patches(&land_cover),
        human_activity: human_activity(&land_cover, &profiles),
        land_cover,
        ms,
        sar,
        agb,
    };
    let dialogues = make_dialogues(&scene, &TemplateSuite::default(), derive_seed(seed, TAG_DIALOGUE))?;
    Ok((scene, dialogues))
}

/// Generates every scene and writes the dataset directory.
pub fn build_dataset(cfg: &GeneratorConfig, dir: &Path) -> Result<()> {
    cfg.validate()?;
    let mut writer = DatasetWriter::create(dir, cfg)?;
    let mut ids = HashSet::new();
    for (id, split) in cfg.scene_ids() {
        if !ids.insert(id) {
            return Err(Error::Internal(format!("scene id {id} generated twice")));
        }
        let (scene, dialogues) = generate_scene(cfg, id, split)?;
        writer.append(&scene, &dialogues)?;
    }
    writer.finish()
}
