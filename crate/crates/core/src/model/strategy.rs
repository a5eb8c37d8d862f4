use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which encoder layers contribute tokens to the regression branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenStrategy {
    LastLayer,
    HalfLayers,
    HalfLayersDeep,
    AllLayers,
}

impl TokenStrategy {
    /// Table order.
    pub const ALL: [TokenStrategy; 4] = [
        TokenStrategy::LastLayer,
        TokenStrategy::HalfLayers,
        TokenStrategy::HalfLayersDeep,
        TokenStrategy::AllLayers,
    ];

    pub fn label(self) -> &'static str {
        match self {
            TokenStrategy::LastLayer => "Last layer",
            TokenStrategy::HalfLayers => "Half layers",
            TokenStrategy::HalfLayersDeep => "Half layers (deep)",
            TokenStrategy::AllLayers => "All layer",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TokenStrategy::LastLayer => "last",
            TokenStrategy::HalfLayers => "half",
            TokenStrategy::HalfLayersDeep => "half-deep",
            TokenStrategy::AllLayers => "all",
        }
    }

    /// 1-based layer indices, shallow to deep.
    pub fn layers(self, depth: usize) -> Result<Vec<usize>> {
        if depth < 2 || depth % 2 != 0 {
            return Err(Error::Config(format!("encoder depth must be even and at least 2, got {depth}")));
        }
        Ok(match self {
            TokenStrategy::LastLayer => vec![depth],
            TokenStrategy::HalfLayers => vec![depth / 2, depth],
            TokenStrategy::HalfLayersDeep => vec![depth - 1, depth],
            TokenStrategy::AllLayers => (1..=depth).collect(),
        })
    }
}

impl fmt::Display for TokenStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TokenStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "last" | "last-layer" => Ok(TokenStrategy::LastLayer),
            "half" | "half-layers" => Ok(TokenStrategy::HalfLayers),
            "half-deep" | "half-layers-deep" => Ok(TokenStrategy::HalfLayersDeep),
            "all" | "all-layers" => Ok(TokenStrategy::AllLayers),
            other => Err(Error::Config(format!("unknown token strategy {other:?}; expected last, half, half-deep or all"))),
        }
    }
}
