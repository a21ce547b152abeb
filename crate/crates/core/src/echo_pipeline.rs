//! Echo selection and the sensor → middleware → framework filter cascade.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sensor_model::Scan;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Echo {
    pub range_m: f64,
    pub intensity: f64,
    /// Provenance for simulation bookkeeping; filters ignore it.
    pub spoofed: bool,
}

impl Echo {
    pub fn genuine(range_m: f64, intensity: f64) -> Self {
        Self {
            range_m,
            intensity,
            spoofed: false,
        }
    }

    pub fn spoofed(range_m: f64, intensity: f64) -> Self {
        Self {
            range_m,
            intensity,
            spoofed: true,
        }
    }

    fn same_measurement(&self, other: &Echo) -> bool {
        self.range_m == other.range_m && self.intensity == other.intensity
    }
}

/// Echoes received by one channel at one azimuth. Two-return sensors keep
/// at most two.
#[derive(Debug, Clone, PartialEq)]
pub struct EchoColumn {
    pub channel: usize,
    pub azimuth_deg: f64,
    echoes: Vec<Echo>,
}

impl EchoColumn {
    pub const MAX_ECHOES: usize = 2;

    pub fn new(channel: usize, azimuth_deg: f64, echoes: Vec<Echo>) -> Result<Self> {
        if echoes.len() > Self::MAX_ECHOES {
            return Err(Error::InvalidConfig(format!(
                "{} echoes in one column, at most {} supported",
                echoes.len(),
                Self::MAX_ECHOES
            )));
        }
        if let Some(e) = echoes.iter().find(|e| !(e.range_m > 0.0)) {
            return Err(Error::InvalidConfig(format!("echo range {} must be positive", e.range_m)));
        }
        Ok(Self {
            channel,
            azimuth_deg,
            echoes,
        })
    }

    pub fn echoes(&self) -> &[Echo] {
        &self.echoes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReturnMode {
    Strongest,
    Last,
    Dual,
}

impl ReturnMode {
    pub const ALL: [ReturnMode; 3] = [ReturnMode::Strongest, ReturnMode::Last, ReturnMode::Dual];
}

impl std::str::FromStr for ReturnMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strongest" => Ok(Self::Strongest),
            "last" => Ok(Self::Last),
            "dual" => Ok(Self::Dual),
            other => Err(Error::unknown("return mode", other)),
        }
    }
}

/// Receiver saturation: an echo at or above `dominance_threshold` masks
/// every other echo in its column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturationPolicy {
    pub dominance_threshold: f64,
}

impl SaturationPolicy {
    pub fn new(dominance_threshold: f64) -> Result<Self> {
        if !(dominance_threshold > 0.0 && dominance_threshold <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "dominance threshold {dominance_threshold} outside (0, 1]"
            )));
        }
        Ok(Self { dominance_threshold })
    }
}

impl Default for SaturationPolicy {
    fn default() -> Self {
        Self {
            dominance_threshold: 0.95,
        }
    }
}

fn strongest(echoes: &[Echo]) -> Echo {
    // first echo wins ties
    *echoes
        .iter()
        .reduce(|best, e| if e.intensity > best.intensity { e } else { best })
        .expect("non-empty")
}

fn last(echoes: &[Echo]) -> Echo {
    *echoes
        .iter()
        .reduce(|best, e| if e.range_m > best.range_m { e } else { best })
        .expect("non-empty")
}

pub fn select_returns(column: &EchoColumn, mode: ReturnMode, policy: &SaturationPolicy) -> Vec<Echo> {
    let echoes = column.echoes();
    if echoes.is_empty() {
        return Vec::new();
    }
    if echoes.iter().any(|e| e.intensity >= policy.dominance_threshold) {
        return vec![strongest(echoes)];
    }
    match mode {
        ReturnMode::Strongest => vec![strongest(echoes)],
        ReturnMode::Last => vec![last(echoes)],
        ReturnMode::Dual => {
            let mut out: Vec<Echo> = Vec::with_capacity(echoes.len());
            for e in echoes {
                if !out.iter().any(|o| o.same_measurement(e)) {
                    out.push(*e);
                }
            }
            out
        }
    }
}

/// Inclusive axis-aligned bounds in the sensor frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Roi {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub z: (f64, f64),
}

impl Roi {
    pub fn contains(&self, x: f64, y: f64, z: f64) -> bool {
        (self.x.0..=self.x.1).contains(&x) && (self.y.0..=self.y.1).contains(&y) && (self.z.0..=self.z.1).contains(&z)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterChain {
    pub sensor_mot_m: f64,
    pub middleware_mot_m: f64,
    pub framework_mot_m: f64,
    #[serde(default)]
    pub roi: Option<Roi>,
}

/// One row of the published default-threshold table, in meters.
struct ThresholdRow {
    sensor: &'static str,
    internal: f64,
    recommended: Option<f64>,
    ros: f64,
    apollo: f64,
    autoware: f64,
}

// Only the VLP-16 internal threshold was measured; for the other sensors the
// ROS driver default stands in for the firmware floor.
const THRESHOLDS: &[ThresholdRow] = &[
    ThresholdRow { sensor: "vlp16", internal: 0.40, recommended: Some(1.00), ros: 0.40, apollo: 0.90, autoware: 0.40 },
    ThresholdRow { sensor: "vlp32c", internal: 0.40, recommended: Some(1.00), ros: 0.40, apollo: 0.40, autoware: 0.40 },
    ThresholdRow { sensor: "hdl64", internal: 0.40, recommended: Some(0.90), ros: 0.40, apollo: 0.90, autoware: 2.00 },
    ThresholdRow { sensor: "vls128", internal: 0.40, recommended: None, ros: 0.40, apollo: 0.90, autoware: 0.90 },
    ThresholdRow { sensor: "rs", internal: 0.20, recommended: Some(0.40), ros: 0.20, apollo: 0.00, autoware: 0.20 },
    ThresholdRow { sensor: "c16", internal: 0.15, recommended: Some(0.50), ros: 0.15, apollo: 0.30, autoware: 0.15 },
];

impl FilterChain {
    pub fn new(sensor_mot_m: f64, middleware_mot_m: f64, framework_mot_m: f64) -> Result<Self> {
        let chain = Self {
            sensor_mot_m,
            middleware_mot_m,
            framework_mot_m,
            roi: None,
        };
        chain.validate()?;
        Ok(chain)
    }

    pub fn with_roi(mut self, roi: Roi) -> Self {
        self.roi = Some(roi);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.sensor_mot_m, self.middleware_mot_m, self.framework_mot_m];
        if all.iter().any(|t| !(*t >= 0.0)) {
            return Err(Error::InvalidConfig(format!("thresholds must be >= 0, got {all:?}")));
        }
        Ok(())
    }

    /// Preset named `<sensor>-<stack>`, e.g. `vlp16-apollo`. Stacks are
    /// `apollo`, `autoware` and `ros` (driver only, no framework threshold).
    pub fn preset(name: &str) -> Result<Self> {
        let (sensor, stack) = name.split_once('-').ok_or_else(|| Error::unknown("filter chain preset", name))?;
        let row = THRESHOLDS
            .iter()
            .find(|r| r.sensor == sensor)
            .ok_or_else(|| Error::unknown("filter chain preset", name))?;
        let framework = match stack {
            "apollo" => row.apollo,
            "autoware" => row.autoware,
            "ros" => 0.0,
            _ => return Err(Error::unknown("filter chain preset", name)),
        };
        Self::new(row.internal, row.ros, framework)
    }

    pub fn preset_names() -> Vec<String> {
        THRESHOLDS
            .iter()
            .flat_map(|r| ["apollo", "autoware", "ros"].map(|s| format!("{}-{}", r.sensor, s)))
            .collect()
    }

    /// Manufacturer-recommended threshold for a preset's sensor, metadata only.
    pub fn recommended_mot(sensor: &str) -> Option<f64> {
        THRESHOLDS.iter().find(|r| r.sensor == sensor).and_then(|r| r.recommended)
    }
}

/// The effective spoofing-region width: the largest threshold in the chain.
pub fn spoofing_region_width(chain: &FilterChain) -> f64 {
    chain.sensor_mot_m.max(chain.middleware_mot_m).max(chain.framework_mot_m)
}

/// Drops every point strictly closer than the spoofing-region width.
pub fn apply_mot_filter(scan: &Scan, chain: &FilterChain) -> Scan {
    let width = spoofing_region_width(chain);
    scan.with_points(scan.points.iter().filter(|p| p.range_m >= width).copied().collect())
}

pub fn apply_roi_filter(scan: &Scan, chain: &FilterChain) -> Scan {
    match &chain.roi {
        None => scan.clone(),
        Some(roi) => scan.with_points(
            scan.points
                .iter()
                .filter(|p| roi.contains(p.x, p.y, p.z))
                .copied()
                .collect(),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensor_model::CloudPoint;
    use proptest::prelude::*;

    fn column(echoes: Vec<Echo>) -> EchoColumn {
        EchoColumn::new(0, 0.0, echoes).unwrap()
    }

    #[test]
    fn select_by_mode() {
        let policy = SaturationPolicy::default();
        let col = column(vec![Echo::genuine(5.0, 0.8), Echo::genuine(20.0, 0.2)]);
        assert_eq!(select_returns(&col, ReturnMode::Strongest, &policy), vec![Echo::genuine(5.0, 0.8)]);
        assert_eq!(select_returns(&col, ReturnMode::Last, &policy), vec![Echo::genuine(20.0, 0.2)]);
        assert_eq!(select_returns(&col, ReturnMode::Dual, &policy).len(), 2);
        assert!(select_returns(&column(vec![]), ReturnMode::Dual, &policy).is_empty());
    }

    #[test]
    fn dominant_spoof_masks_genuine_in_dual_mode() {
        let policy = SaturationPolicy::default();
        let col = column(vec![Echo::spoofed(0.3, 1.0), Echo::genuine(4.0, 0.5)]);
        let out = select_returns(&col, ReturnMode::Dual, &policy);
        assert_eq!(out, vec![Echo::spoofed(0.3, 1.0)]);
        // and the survivor is then discarded by the Apollo chain
        let chain = FilterChain::preset("vlp16-apollo").unwrap();
        assert!(out[0].range_m < spoofing_region_width(&chain));
    }

    #[test]
    fn dual_deduplicates_identical_echoes() {
        let policy = SaturationPolicy::default();
        let col = column(vec![Echo::genuine(5.0, 0.5), Echo::genuine(5.0, 0.5)]);
        assert_eq!(select_returns(&col, ReturnMode::Dual, &policy).len(), 1);
    }

    #[test]
    fn column_rejects_third_echo_and_bad_range() {
        let e = Echo::genuine(1.0, 0.5);
        assert!(EchoColumn::new(0, 0.0, vec![e, e, e]).is_err());
        assert!(EchoColumn::new(0, 0.0, vec![Echo::genuine(0.0, 0.5)]).is_err());
        assert!(SaturationPolicy::new(0.0).is_err());
    }

    #[test]
    fn published_spoofing_widths() {
        let w = |name| spoofing_region_width(&FilterChain::preset(name).unwrap());
        assert_eq!(w("vlp16-apollo"), 0.90);
        assert_eq!(w("vlp16-autoware"), 0.40);
        assert_eq!(w("hdl64-autoware"), 2.00);
        assert_eq!(w("vlp16-ros"), 0.40);
        assert_eq!(spoofing_region_width(&FilterChain::new(0.40, 0.0, 0.0).unwrap()), 0.40);
        assert_eq!(FilterChain::preset("vlp16-apollo").unwrap(), FilterChain::new(0.40, 0.40, 0.90).unwrap());
        assert!(FilterChain::preset("vlp16-carla").is_err());
        assert!(FilterChain::preset("nothing").is_err());
        assert_eq!(FilterChain::recommended_mot("vlp16"), Some(1.0));
        for name in FilterChain::preset_names() {
            FilterChain::preset(&name).unwrap();
        }
    }

    fn scan_at(ranges: &[f64]) -> Scan {
        Scan::new(
            ranges
                .iter()
                .map(|&r| CloudPoint::from_xyz(r, 0.0, 0.0, 0.5, 0, 0.0))
                .collect(),
            "test",
            0,
        )
    }

    #[test]
    fn mot_filter_boundary() {
        let apollo = FilterChain::preset("vlp16-apollo").unwrap();
        let out = apply_mot_filter(&scan_at(&[0.35, 0.90, 0.899_999, 3.0]), &apollo);
        let ranges: Vec<f64> = out.points.iter().map(|p| p.range_m).collect();
        assert_eq!(ranges, vec![0.90, 3.0]);
        assert!(apply_mot_filter(&Scan::default(), &apollo).is_empty());
    }

    #[test]
    fn roi_filter() {
        let chain = FilterChain::preset("vlp16-apollo").unwrap();
        let scan = Scan::new(
            vec![
                CloudPoint::from_xyz(-5.0, 0.0, 0.0, 0.5, 0, 0.0),
                CloudPoint::from_xyz(5.0, 0.0, 0.5, 0.5, 0, 0.0),
            ],
            "t",
            0,
        );
        assert_eq!(apply_roi_filter(&scan, &chain), scan);
        let roi = Roi { x: (0.0, 70.0), y: (-40.0, 40.0), z: (-3.0, 1.0) };
        let out = apply_roi_filter(&scan, &chain.with_roi(roi));
        assert_eq!(out.len(), 1);
        assert_eq!(out.points[0].z, 0.5);
    }

    fn echo_strategy() -> impl Strategy<Value = Echo> {
        (0.05f64..50.0, 0.0f64..0.94, any::<bool>()).prop_map(|(r, i, s)| Echo { range_m: r, intensity: i, spoofed: s })
    }

    proptest! {
        #[test]
        fn width_is_max(a in 0.0f64..5.0, b in 0.0f64..5.0, c in 0.0f64..5.0) {
            let chain = FilterChain::new(a, b, c).unwrap();
            let brute = [a, b, c].into_iter().fold(f64::MIN, |m, v| if v > m { v } else { m });
            prop_assert_eq!(spoofing_region_width(&chain), brute);
        }

        #[test]
        fn mot_filter_idempotent_and_monotone(
            ranges in proptest::collection::vec(0.01f64..5.0, 0..60),
            t in 0.0f64..3.0, bump in 0.0f64..2.0
        ) {
            let scan = scan_at(&ranges);
            let chain = FilterChain::new(t, 0.0, 0.0).unwrap();
            let once = apply_mot_filter(&scan, &chain);
            prop_assert_eq!(&apply_mot_filter(&once, &chain), &once);
            let raised = FilterChain::new(t, t + bump, 0.0).unwrap();
            prop_assert!(apply_mot_filter(&scan, &raised).len() <= once.len());
        }

        #[test]
        fn dual_is_superset(a in echo_strategy(), b in echo_strategy()) {
            let policy = SaturationPolicy::default();
            let col = EchoColumn::new(0, 0.0, vec![a, b]).unwrap();
            let dual = select_returns(&col, ReturnMode::Dual, &policy);
            for mode in [ReturnMode::Strongest, ReturnMode::Last] {
                for e in select_returns(&col, mode, &policy) {
                    prop_assert!(dual.iter().any(|d| d.same_measurement(&e)));
                }
            }
        }

        #[test]
        fn spoofed_flag_never_changes_filters(ranges in proptest::collection::vec(0.01f64..5.0, 0..60), t in 0.0f64..3.0) {
            let scan = scan_at(&ranges);
            let mut flipped = scan.clone();
            for p in &mut flipped.points {
                p.spoofed = !p.spoofed;
            }
            let chain = FilterChain::new(t, 0.0, 0.0).unwrap();
            let a: Vec<f64> = apply_mot_filter(&scan, &chain).points.iter().map(|p| p.range_m).collect();
            let b: Vec<f64> = apply_mot_filter(&flipped, &chain).points.iter().map(|p| p.range_m).collect();
            prop_assert_eq!(a, b);
        }
    }
}
