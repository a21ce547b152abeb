//! Removal-attack detectors and their TPR/TNR evaluation.

pub mod azimuth;
pub mod eval;
pub mod shadow;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sensor_model::Scan;

pub use azimuth::{azimuth_gap_detect, AzimuthDetector, AzimuthGap, AzimuthGapReport};
pub use eval::{evaluate, run_scene, summarize, Evaluation, SceneRun};
pub use shadow::{fake_shadow_detect, object_shadow_associate, shadow_regions, Association, FakeShadowDetector, ShadowParams, ShadowRegion, ShadowReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Attack,
    Benign,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Azimuth,
    Fsd,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Azimuth => "azimuth",
            Method::Fsd => "fsd",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "azimuth" => Ok(Method::Azimuth),
            "fsd" | "shadow" => Ok(Method::Fsd),
            _ => Err(Error::unknown("detection method", s)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Evidence {
    Azimuth(AzimuthGapReport),
    Shadow(ShadowReport),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionVerdict {
    pub method: Method,
    pub is_attack: bool,
    pub evidence: Evidence,
}

impl DetectionVerdict {
    /// Evidence kind agrees with the method that produced it.
    pub fn is_consistent(&self) -> bool {
        matches!(
            (self.method, &self.evidence),
            (Method::Azimuth, Evidence::Azimuth(_)) | (Method::Fsd, Evidence::Shadow(_))
        )
    }
}

/// A per-scan decision procedure. Implementations must be pure so scenes
/// can be evaluated concurrently.
pub trait Detector: Sync {
    fn method(&self) -> Method;
    fn detect(&self, scan: &Scan) -> Result<DetectionVerdict>;
}
