//! Procedural scenes with exact ground truth and templated dialogues.

pub mod classes;
pub mod dialogue;
pub mod landcover;
pub mod scene;
pub mod templates;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use classes::{class_vocabulary, default_profiles, is_human_class, ClassProfile, MAX_CLASSES};
pub use dialogue::{make_dialogues, DialogueRecord};
pub use landcover::{
    agb_with_noise, compute_agb, count_components, count_patches, generate_land_cover, human_activity, LandCoverMap,
    AGB_MAX,
};
pub use scene::{build_dataset, generate_scene, render_scene, GeneratorConfig, SceneRecord, Split};
pub use templates::{Category, TemplateSuite};

/// Mixes a tag into a seed (splitmix64 finalizer over both words).
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(mix(seed) ^ tag.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

pub(crate) fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
