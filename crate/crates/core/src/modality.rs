//! Pseudo-RGB views of multispectral and SAR patches.
//!
//! A 13-band multispectral patch is split into five fixed three-band
//! composites; a dual-polarization SAR patch becomes a three-channel image
//! whose third channel is the pixel-wise mean of the two polarizations. Every
//! channel is min-max stretched onto `[0, 255]` independently.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spatial extent of every patch.
pub const PATCH_SIZE: usize = 25;
pub const PATCH_PIXELS: usize = PATCH_SIZE * PATCH_SIZE;
pub const MS_BANDS: usize = 13;
pub const SAR_CHANNELS: usize = 2;

/// Sentinel-2 band names in storage order (B8A sits between B08 and B09).
pub const BAND_NAMES: [&str; MS_BANDS] = [
    "B01", "B02", "B03", "B04", "B05", "B06", "B07", "B08", "B8A", "B09", "B10", "B11", "B12",
];

pub fn band_index(name: &str) -> Option<usize> {
    BAND_NAMES.iter().position(|b| *b == name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ViewTag {
    RedEdge,
    Geology,
    NaturalColor,
    ColorInfrared,
    ShortWaveInfrared,
    SarComposite,
}

impl ViewTag {
    pub const ALL: [ViewTag; 6] = [
        ViewTag::RedEdge,
        ViewTag::Geology,
        ViewTag::NaturalColor,
        ViewTag::ColorInfrared,
        ViewTag::ShortWaveInfrared,
        ViewTag::SarComposite,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// The five multispectral composites, in output order.
pub const BAND_GROUPS: [(ViewTag, [&str; 3]); 5] = [
    (ViewTag::RedEdge, ["B05", "B06", "B07"]),
    (ViewTag::Geology, ["B12", "B11", "B02"]),
    (ViewTag::NaturalColor, ["B04", "B03", "B02"]),
    (ViewTag::ColorInfrared, ["B08", "B04", "B03"]),
    (ViewTag::ShortWaveInfrared, ["B12", "B08", "B04"]),
];

/// Band indices of each composite.
pub fn band_group_indices() -> [(ViewTag, [usize; 3]); 5] {
    BAND_GROUPS.map(|(tag, names)| (tag, names.map(|n| band_index(n).expect("fixed table"))))
}

/// `13 × 25 × 25` surface reflectance, band-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MultispectralPatch {
    values: Vec<f64>,
}

impl MultispectralPatch {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() != MS_BANDS * PATCH_PIXELS {
            return Err(Error::Dimension(format!(
                "multispectral patch needs {} values, got {}",
                MS_BANDS * PATCH_PIXELS,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Precondition("reflectance must be finite and non-negative".into()));
        }
        Ok(MultispectralPatch { values })
    }

    pub fn band(&self, b: usize) -> &[f64] {
        &self.values[b * PATCH_PIXELS..(b + 1) * PATCH_PIXELS]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// `2 × 25 × 25` linear backscatter.
#[derive(Debug, Clone, PartialEq)]
pub struct SarPatch {
    values: Vec<f64>,
}

impl SarPatch {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() != SAR_CHANNELS * PATCH_PIXELS {
            return Err(Error::Dimension(format!(
                "SAR patch needs {} values, got {}",
                SAR_CHANNELS * PATCH_PIXELS,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Precondition("backscatter must be finite and non-negative".into()));
        }
        Ok(SarPatch { values })
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.values[c * PATCH_PIXELS..(c + 1) * PATCH_PIXELS]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Three byte-range channels plus the composite they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoRgbView {
    pub channels: [Vec<f64>; 3],
    pub tag: ViewTag,
}

impl PseudoRgbView {
    /// Channel-major `3 × 25 × 25` values.
    pub fn flat(&self) -> Vec<f64> {
        self.channels.concat()
    }
}

/// Affine stretch of `[min, max]` onto `[0, 255]`. A constant channel maps to zeros.
pub fn normalize_to_byte(channel: &[f64]) -> Vec<f64> {
    let (lo, hi) = channel
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(hi > lo) {
        return vec![0.0; channel.len()];
    }
    let scale = 255.0 / (hi - lo);
    channel
        .iter()
        .map(|&v| ((v - lo) * scale).clamp(0.0, 255.0))
        .collect()
}

/// The five multispectral composites in table order.
pub fn recombine_ms(ms: &MultispectralPatch) -> Vec<PseudoRgbView> {
    band_group_indices()
        .iter()
        .map(|(tag, idx)| PseudoRgbView {
            channels: idx.map(|b| normalize_to_byte(ms.band(b))),
            tag: *tag,
        })
        .collect()
}

/// Polarization 1, polarization 2, and their raw mean, each stretched.
pub fn sar_to_pseudo_rgb(sar: &SarPatch) -> PseudoRgbView {
    let p1 = sar.channel(0);
    let p2 = sar.channel(1);
    let mean: Vec<f64> = p1.iter().zip(p2).map(|(a, b)| (a + b) / 2.0).collect();
    PseudoRgbView {
        channels: [normalize_to_byte(p1), normalize_to_byte(p2), normalize_to_byte(&mean)],
        tag: ViewTag::SarComposite,
    }
}

/// True-colour rendering from B04, B03, B02.
pub fn ms_to_rgb(ms: &MultispectralPatch) -> PseudoRgbView {
    PseudoRgbView {
        channels: [3, 2, 1].map(|b| normalize_to_byte(ms.band(b))),
        tag: ViewTag::NaturalColor,
    }
}

/// All six model inputs: five multispectral composites then the SAR composite.
pub fn scene_views(ms: &MultispectralPatch, sar: &SarPatch) -> Vec<PseudoRgbView> {
    let mut views = recombine_ms(ms);
    views.push(sar_to_pseudo_rgb(sar));
    views
}
