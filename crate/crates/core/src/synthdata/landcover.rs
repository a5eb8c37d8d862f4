use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modality::{PATCH_PIXELS, PATCH_SIZE};

use super::classes::ClassProfile;
use super::seeded;

/// Per-cell class indices over the 25×25 grid, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandCoverMap {
    pub grid: Vec<u8>,
    pub class_names: Vec<String>,
}

impl LandCoverMap {
    pub fn new(grid: Vec<u8>, class_names: Vec<String>) -> Result<Self> {
        if class_names.len() < 2 {
            return Err(Error::Precondition("a land-cover map needs at least two classes".into()));
        }
        if grid.len() != PATCH_PIXELS {
            return Err(Error::Dimension(format!("land-cover grid needs {PATCH_PIXELS} cells, got {}", grid.len())));
        }
        if let Some(bad) = grid.iter().find(|&&c| c as usize >= class_names.len()) {
            return Err(Error::Precondition(format!("class index {bad} outside [0, {})", class_names.len())));
        }
        Ok(LandCoverMap { grid, class_names })
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for &c in &self.grid {
            counts[c as usize] += 1;
        }
        counts
    }

    pub fn class_fractions(&self) -> Vec<f64> {
        self.class_counts()
            .into_iter()
            .map(|c| c as f64 / PATCH_PIXELS as f64)
            .collect()
    }

    /// Most frequent class; ties go to the lower index.
    pub fn modal_class(&self) -> usize {
        let counts = self.class_counts();
        let mut best = 0;
        for (i, &c) in counts.iter().enumerate() {
            if c > counts[best] {
                best = i;
            }
        }
        best
    }

    pub fn modal_class_name(&self) -> &str {
        &self.class_names[self.modal_class()]
    }
}

/// Classes from `C` smoothed random fields: each field is a value-noise
/// lattice with spacing `smoothness` cells, bilinearly interpolated; a cell
/// takes the class whose field (plus its offset) is largest.
pub fn generate_land_cover(seed: u64, profiles: &[ClassProfile], smoothness: f64) -> Result<LandCoverMap> {
    let c = profiles.len();
    if c < 2 {
        return Err(Error::Precondition(format!("need at least two classes, got {c}")));
    }
    if c > u8::MAX as usize {
        return Err(Error::Precondition("too many classes".into()));
    }
    if !(smoothness > 0.0) || !smoothness.is_finite() {
        return Err(Error::Precondition(format!("smoothness must be positive, got {smoothness}")));
    }
    let mut rng = seeded(seed);
    let mut best = vec![f64::NEG_INFINITY; PATCH_PIXELS];
    let mut grid = vec![0u8; PATCH_PIXELS];
    for (class, profile) in profiles.iter().enumerate() {
        let field = value_noise(&mut rng, smoothness);
        for (i, v) in field.into_iter().enumerate() {
            let v = v + profile.field_offset;
            if v > best[i] {
                best[i] = v;
                grid[i] = class as u8;
            }
        }
    }
    LandCoverMap::new(grid, profiles.iter().map(|p| p.name.clone()).collect())
}

fn value_noise(rng: &mut ChaCha8Rng, spacing: f64) -> Vec<f64> {
    let cells = ((PATCH_SIZE - 1) as f64 / spacing).ceil() as usize + 2;
    let side = cells + 1;
    let lattice: Vec<f64> = (0..side * side).map(|_| StandardNormal.sample(rng)).collect();
    let phase_y: f64 = rng.gen();
    let phase_x: f64 = rng.gen();
    let mut out = Vec::with_capacity(PATCH_PIXELS);
    for y in 0..PATCH_SIZE {
        let u = y as f64 / spacing + phase_y;
        let y0 = u.floor() as usize;
        let fy = u - y0 as f64;
        for x in 0..PATCH_SIZE {
            let v = x as f64 / spacing + phase_x;
            let x0 = v.floor() as usize;
            let fx = v - x0 as f64;
            let at = |r: usize, c: usize| lattice[r * side + c];
            out.push(
                at(y0, x0) * (1.0 - fy) * (1.0 - fx)
                    + at(y0, x0 + 1) * (1.0 - fy) * fx
                    + at(y0 + 1, x0) * fy * (1.0 - fx)
                    + at(y0 + 1, x0 + 1) * fy * fx,
            );
        }
    }
    out
}

/// Number of 4-connected regions of equal class.
pub fn count_patches(map: &LandCoverMap) -> usize {
    count_components(&map.grid, PATCH_SIZE, PATCH_SIZE)
}

/// Flood-fill component count on a row-major `rows × cols` grid.
pub fn count_components(grid: &[u8], rows: usize, cols: usize) -> usize {
    assert_eq!(grid.len(), rows * cols, "grid length");
    let n = cols;
    let mut seen = vec![false; grid.len()];
    let mut stack = Vec::new();
    let mut count = 0;
    for start in 0..grid.len() {
        if seen[start] {
            continue;
        }
        count += 1;
        let class = grid[start];
        seen[start] = true;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (r, c) = (i / n, i % n);
            let mut visit = |j: usize| {
                if !seen[j] && grid[j] == class {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if r > 0 {
                visit(i - n);
            }
            if r + 1 < rows {
                visit(i + n);
            }
            if c > 0 {
                visit(i - 1);
            }
            if c + 1 < n {
                visit(i + 1);
            }
        }
    }
    count
}

/// True when any cell belongs to a human-activity class.
pub fn human_activity(map: &LandCoverMap, profiles: &[ClassProfile]) -> bool {
    map.class_counts()
        .iter()
        .zip(profiles)
        .any(|(&n, p)| n > 0 && p.human_activity)
}

pub const AGB_MAX: f64 = 500.0;
const AGB_NOISE_SD: f64 = 0.05;
const AGB_NOISE_CLAMP: f64 = 0.15;

/// Cell-fraction-weighted biomass density scaled by `1 + noise`, clamped to `[0, 500]`.
pub fn agb_with_noise(map: &LandCoverMap, profiles: &[ClassProfile], noise: f64) -> f64 {
    let clean: f64 = map
        .class_fractions()
        .iter()
        .zip(profiles)
        .map(|(f, p)| f * p.biomass_density)
        .sum();
    (clean * (1.0 + noise)).clamp(0.0, AGB_MAX)
}

/// Biomass with seeded multiplicative noise `ε ~ N(0, 0.05)` clamped to ±0.15.
pub fn compute_agb(map: &LandCoverMap, profiles: &[ClassProfile], seed: u64) -> Result<f64> {
    if profiles.len() < map.num_classes() {
        return Err(Error::Precondition(format!(
            "{} profiles for {} classes",
            profiles.len(),
            map.num_classes()
        )));
    }
    let mut rng = seeded(seed);
    let eps: f64 = Normal::new(0.0, AGB_NOISE_SD).unwrap().sample(&mut rng);
    Ok(agb_with_noise(map, profiles, eps.clamp(-AGB_NOISE_CLAMP, AGB_NOISE_CLAMP)))
}
