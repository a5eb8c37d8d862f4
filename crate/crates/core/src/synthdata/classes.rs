use serde::{Deserialize, Serialize};

use crate::modality::{MS_BANDS, SAR_CHANNELS};

/// Sensor and biomass signature of one land-cover class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassProfile {
    pub name: String,
    pub reflectance: [f64; MS_BANDS],
    pub reflectance_noise: f64,
    pub backscatter: [f64; SAR_CHANNELS],
    pub backscatter_noise: f64,
    /// Biomass density in Mg/ha.
    pub biomass_density: f64,
    pub human_activity: bool,
    /// Added to the class's random field before the per-cell argmax.
    pub field_offset: f64,
}

struct Row {
    name: &'static str,
    refl: [f64; MS_BANDS],
    sar: [f64; SAR_CHANNELS],
    rho: f64,
    human: bool,
    offset: f64,
}

const REFLECTANCE_NOISE: f64 = 0.008;
const BACKSCATTER_NOISE: f64 = 0.01;

// Offsets calibrated so that with six classes and smoothness 6 every class
// covers between 5% and 40% of cells, and built-up classes stay minorities.
const VOCABULARY: [Row; 11] = [
    Row {
        name: "Closed forest, evergreen needleleaf forest",
        refl: [0.02, 0.025, 0.04, 0.025, 0.07, 0.18, 0.22, 0.25, 0.26, 0.08, 0.003, 0.12, 0.06],
        sar: [0.15, 0.05],
        rho: 450.0,
        human: false,
        offset: 0.15,
    },
    Row {
        name: "Shrubs",
        refl: [0.04, 0.05, 0.07, 0.07, 0.12, 0.20, 0.23, 0.26, 0.27, 0.09, 0.004, 0.22, 0.14],
        sar: [0.10, 0.03],
        rho: 90.0,
        human: false,
        offset: 0.05,
    },
    Row {
        name: "Herbaceous vegetation",
        refl: [0.03, 0.04, 0.08, 0.05, 0.13, 0.28, 0.33, 0.36, 0.38, 0.12, 0.004, 0.24, 0.13],
        sar: [0.07, 0.015],
        rho: 35.0,
        human: false,
        offset: 0.05,
    },
    Row {
        name: "Cultivated and Managed Vegetation/Agriculture (Cropland)",
        refl: [0.05, 0.06, 0.10, 0.09, 0.15, 0.25, 0.29, 0.32, 0.33, 0.11, 0.005, 0.28, 0.18],
        sar: [0.08, 0.02],
        rho: 25.0,
        human: true,
        offset: -0.4,
    },
    Row {
        name: "Urban / built up",
        refl: [0.10, 0.12, 0.14, 0.16, 0.17, 0.18, 0.19, 0.20, 0.21, 0.07, 0.006, 0.24, 0.21],
        sar: [0.30, 0.08],
        rho: 5.0,
        human: true,
        offset: -0.4,
    },
    Row {
        name: "Permanent water bodies",
        refl: [0.06, 0.06, 0.05, 0.03, 0.02, 0.015, 0.012, 0.01, 0.009, 0.003, 0.001, 0.005, 0.003],
        sar: [0.005, 0.001],
        rho: 0.0,
        human: false,
        offset: 0.05,
    },
    Row {
        name: "Open forest, deciduous broadleaf forest",
        refl: [0.03, 0.035, 0.06, 0.04, 0.09, 0.22, 0.27, 0.30, 0.31, 0.10, 0.004, 0.17, 0.09],
        sar: [0.12, 0.04],
        rho: 220.0,
        human: false,
        offset: 0.0,
    },
    Row {
        name: "Herbaceous wetland",
        refl: [0.04, 0.045, 0.06, 0.05, 0.08, 0.15, 0.17, 0.19, 0.20, 0.07, 0.003, 0.10, 0.05],
        sar: [0.06, 0.02],
        rho: 60.0,
        human: false,
        offset: 0.0,
    },
    Row {
        name: "Bare / sparse vegetation",
        refl: [0.12, 0.14, 0.18, 0.22, 0.24, 0.26, 0.27, 0.28, 0.29, 0.10, 0.008, 0.36, 0.30],
        sar: [0.03, 0.006],
        rho: 8.0,
        human: false,
        offset: 0.0,
    },
    Row {
        name: "Moss and lichen",
        refl: [0.06, 0.07, 0.09, 0.10, 0.13, 0.17, 0.19, 0.21, 0.22, 0.08, 0.005, 0.20, 0.14],
        sar: [0.04, 0.01],
        rho: 15.0,
        human: false,
        offset: 0.0,
    },
    Row {
        name: "Snow and ice",
        refl: [0.80, 0.82, 0.80, 0.78, 0.76, 0.72, 0.70, 0.68, 0.66, 0.30, 0.05, 0.10, 0.08],
        sar: [0.02, 0.004],
        rho: 0.0,
        human: false,
        offset: 0.0,
    },
];

/// Largest supported class count.
pub const MAX_CLASSES: usize = VOCABULARY.len();

/// Every class name the generator can emit, in vocabulary order.
pub fn class_vocabulary() -> Vec<&'static str> {
    VOCABULARY.iter().map(|r| r.name).collect()
}

/// The first `c` profiles of the fixed vocabulary.
pub fn default_profiles(c: usize) -> Vec<ClassProfile> {
    VOCABULARY
        .iter()
        .take(c)
        .map(|r| ClassProfile {
            name: r.name.to_string(),
            reflectance: r.refl,
            reflectance_noise: REFLECTANCE_NOISE,
            backscatter: r.sar,
            backscatter_noise: BACKSCATTER_NOISE,
            biomass_density: r.rho,
            human_activity: r.human,
            field_offset: r.offset,
        })
        .collect()
}

/// Human-activity flag of a class name from the fixed vocabulary.
pub fn is_human_class(name: &str) -> Option<bool> {
    VOCABULARY.iter().find(|r| r.name == name).map(|r| r.human)
}
