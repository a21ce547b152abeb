//! Geometry and timing of a spinning LiDAR.
//!
//! Frame convention: x forward, y left, z up. Azimuth is `atan2(y, x)` in
//! degrees, counterclockwise, normalized to `[0, 360)`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance (degrees) used when deciding whether an azimuth sits on an
/// interval boundary.
pub const AZIMUTH_EPS_DEG: f64 = 1e-6;

/// Wraps any finite angle into `[0, 360)`.
pub fn wrap_deg(angle: f64) -> f64 {
    let wrapped = angle.rem_euclid(360.0);
    // rem_euclid of a tiny negative value rounds up to exactly 360.0
    if wrapped >= 360.0 {
        0.0
    } else {
        wrapped
    }
}

/// Signed angular difference `to - from`, mapped into `[-180, 180)`.
pub fn signed_delta_deg(from: f64, to: f64) -> f64 {
    let d = wrap_deg(to - from);
    if d >= 180.0 {
        d - 360.0
    } else {
        d
    }
}

pub fn azimuth_of(x: f64, y: f64) -> f64 {
    wrap_deg(y.atan2(x).to_degrees())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorConfig {
    #[serde(default = "default_sensor_id")]
    pub id: String,
    pub channel_count: usize,
    pub vertical_angles_deg: Vec<f64>,
    pub azimuth_resolution_deg: f64,
    pub rotation_period_ms: f64,
    pub firing_cycle_us: f64,
    pub firing_period_us: f64,
    pub receive_window_ns: f64,
    pub max_range_m: f64,
    pub internal_mot_m: f64,
    pub recommended_mot_m: f64,
}

fn default_sensor_id() -> String {
    "custom".to_owned()
}

impl SensorConfig {
    /// Velodyne VLP-16: 16 channels over ±15°, 0.2° columns, 55.296 µs
    /// firing cycle, 40 cm internal threshold (100 cm recommended).
    ///
    /// The rotation period is 100 ms (10 scans/s); the physical
    /// experiments never state their RPM.
    pub fn vlp16() -> Self {
        Self {
            id: "vlp16".to_owned(),
            channel_count: 16,
            vertical_angles_deg: (0..16).map(|i| -15.0 + 2.0 * i as f64).collect(),
            azimuth_resolution_deg: 0.2,
            rotation_period_ms: 100.0,
            firing_cycle_us: 55.296,
            firing_period_us: 2.304,
            receive_window_ns: 667.0,
            max_range_m: 100.0,
            internal_mot_m: 0.40,
            recommended_mot_m: 1.00,
        }
    }

    /// HDL-64-like sensor: 64 channels evenly spread over [-24.9°, +2°],
    /// 0.1° columns at 10 scans/s.
    pub fn hdl64() -> Self {
        let step = (2.0 - -24.9) / 63.0;
        Self {
            id: "hdl64".to_owned(),
            channel_count: 64,
            vertical_angles_deg: (0..64).map(|i| -24.9 + step * i as f64).collect(),
            azimuth_resolution_deg: 0.1,
            rotation_period_ms: 100.0,
            firing_cycle_us: 27.648,
            firing_period_us: 0.432,
            receive_window_ns: 667.0,
            max_range_m: 120.0,
            internal_mot_m: 0.40,
            recommended_mot_m: 0.90,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "vlp16" => Ok(Self::vlp16()),
            "hdl64" => Ok(Self::hdl64()),
            other => Err(Error::unknown("sensor preset", other)),
        }
    }

    /// Resolves a preset name, or loads a JSON file when `name_or_path`
    /// names an existing file.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        let path = Path::new(name_or_path);
        if path.is_file() {
            Self::from_path(path)
        } else {
            Self::preset(name_or_path)
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.channel_count == 0 {
            return bad("channel_count must be positive".into());
        }
        if self.vertical_angles_deg.len() != self.channel_count {
            return bad(format!(
                "{} vertical angles for {} channels",
                self.vertical_angles_deg.len(),
                self.channel_count
            ));
        }
        if self
            .vertical_angles_deg
            .windows(2)
            .any(|w| !(w[1] > w[0]))
        {
            return bad("vertical angles must be strictly increasing".into());
        }
        if !(self.azimuth_resolution_deg > 0.0 && self.azimuth_resolution_deg <= 360.0) {
            return bad("azimuth_resolution_deg must be in (0, 360]".into());
        }
        if !(0.0 < self.internal_mot_m
            && self.internal_mot_m <= self.recommended_mot_m
            && self.recommended_mot_m <= self.max_range_m)
        {
            return bad("expected 0 < internal_mot_m <= recommended_mot_m <= max_range_m".into());
        }
        Ok(())
    }

    /// Number of firing columns in one rotation.
    pub fn columns(&self) -> usize {
        (360.0 / self.azimuth_resolution_deg).round() as usize
    }

    /// Index of the channel whose elevation is closest to `elevation_deg`.
    pub fn nearest_channel(&self, elevation_deg: f64) -> usize {
        // angles are sorted, so a binary search finds the neighbours
        let angles = &self.vertical_angles_deg;
        let idx = angles.partition_point(|&a| a < elevation_deg);
        if idx == 0 {
            0
        } else if idx == angles.len() {
            angles.len() - 1
        } else if (elevation_deg - angles[idx - 1]) <= (angles[idx] - elevation_deg) {
            idx - 1
        } else {
            idx
        }
    }
}

/// Returns per degree of azimuth when every channel fires once per column.
pub fn points_per_degree(config: &SensorConfig) -> f64 {
    config.channel_count as f64 / config.azimuth_resolution_deg
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloudPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub intensity: f64,
    pub channel: usize,
    pub azimuth_deg: f64,
    pub range_m: f64,
    pub timestamp_us: f64,
    /// Simulation provenance. Filters never read it.
    #[serde(default)]
    pub spoofed: bool,
}

impl CloudPoint {
    /// Builds a point from Cartesian coordinates; range and azimuth are
    /// derived. Intensity is clamped into `[0, 1]`.
    pub fn from_xyz(x: f64, y: f64, z: f64, intensity: f64, channel: usize, timestamp_us: f64) -> Self {
        Self {
            x,
            y,
            z,
            intensity: intensity.clamp(0.0, 1.0),
            channel,
            azimuth_deg: azimuth_of(x, y),
            range_m: (x * x + y * y + z * z).sqrt(),
            timestamp_us,
            spoofed: false,
        }
    }

    pub fn horizontal_range(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn elevation_deg(&self) -> f64 {
        self.z.atan2(self.horizontal_range()).to_degrees()
    }

    /// Same direction, different range.
    pub fn at_range(&self, range_m: f64) -> Self {
        let scale = if self.range_m > 0.0 { range_m / self.range_m } else { 0.0 };
        Self {
            x: self.x * scale,
            y: self.y * scale,
            z: self.z * scale,
            range_m,
            ..*self
        }
    }
}

/// One rotation of returns.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scan {
    pub points: Vec<CloudPoint>,
    pub config_id: String,
    pub frame_id: u64,
}

impl Scan {
    pub fn new(points: Vec<CloudPoint>, config_id: impl Into<String>, frame_id: u64) -> Self {
        Self {
            points,
            config_id: config_id.into(),
            frame_id,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Copy of this scan with the given points, keeping the identifiers.
    pub fn with_points(&self, points: Vec<CloudPoint>) -> Self {
        Self {
            points,
            config_id: self.config_id.clone(),
            frame_id: self.frame_id,
        }
    }

    pub fn validate(&self, config: &SensorConfig) -> Result<()> {
        match self.points.iter().find(|p| p.channel >= config.channel_count) {
            Some(p) => Err(Error::InvalidConfig(format!(
                "point channel {} >= channel_count {}",
                p.channel, config.channel_count
            ))),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectClass {
    Pedestrian,
    Vehicle,
    Other,
}

/// Oriented box. `l` runs along the heading (yaw about +z), `w` across it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box3D {
    pub center: [f64; 3],
    pub l: f64,
    pub w: f64,
    pub h: f64,
    pub yaw: f64,
    pub class: ObjectClass,
}

impl Box3D {
    pub fn new(center: [f64; 3], lwh: [f64; 3], yaw: f64, class: ObjectClass) -> Result<Self> {
        let [l, w, h] = lwh;
        if !(l > 0.0 && w > 0.0 && h > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "box dimensions must be positive, got {l} x {w} x {h}"
            )));
        }
        Ok(Self {
            center,
            l,
            w,
            h,
            yaw,
            class,
        })
    }

    /// Coordinates of a world point in the box frame (centered, unrotated).
    pub fn to_local(&self, x: f64, y: f64, z: f64) -> [f64; 3] {
        let (s, c) = self.yaw.sin_cos();
        let dx = x - self.center[0];
        let dy = y - self.center[1];
        [c * dx + s * dy, -s * dx + c * dy, z - self.center[2]]
    }

    pub fn contains(&self, x: f64, y: f64, z: f64, margin: f64) -> bool {
        let [u, v, w] = self.to_local(x, y, z);
        u.abs() <= self.l / 2.0 + margin
            && v.abs() <= self.w / 2.0 + margin
            && w.abs() <= self.h / 2.0 + margin
    }

    pub fn contains_point(&self, p: &CloudPoint, margin: f64) -> bool {
        self.contains(p.x, p.y, p.z, margin)
    }

    /// The four ground-footprint corners, counterclockwise.
    pub fn footprint(&self) -> [[f64; 2]; 4] {
        let (s, c) = self.yaw.sin_cos();
        let (hl, hw) = (self.l / 2.0, self.w / 2.0);
        [(hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)].map(|(u, v)| {
            [self.center[0] + c * u - s * v, self.center[1] + s * u + c * v]
        })
    }

    /// All eight corners.
    pub fn corners(&self) -> [[f64; 3]; 8] {
        let fp = self.footprint();
        let (lo, hi) = (self.center[2] - self.h / 2.0, self.center[2] + self.h / 2.0);
        let mut out = [[0.0; 3]; 8];
        for (i, [x, y]) in fp.into_iter().enumerate() {
            out[i] = [x, y, lo];
            out[i + 4] = [x, y, hi];
        }
        out
    }

    pub fn horizontal_distance(&self) -> f64 {
        self.center[0].hypot(self.center[1])
    }
}

/// A wrap-aware azimuth interval `[start, start + width)`.
///
/// Membership tolerates [`AZIMUTH_EPS_DEG`] of rounding on both ends, so a
/// column that sits on `start` is inside and one on `start + width` is out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AzimuthInterval {
    pub start_deg: f64,
    pub width_deg: f64,
}

impl AzimuthInterval {
    pub fn new(start_deg: f64, width_deg: f64) -> Self {
        Self {
            start_deg: wrap_deg(start_deg),
            width_deg: width_deg.clamp(0.0, 360.0),
        }
    }

    pub fn centered(center_deg: f64, width_deg: f64) -> Self {
        Self::new(center_deg - width_deg / 2.0, width_deg)
    }

    pub fn empty() -> Self {
        Self::new(0.0, 0.0)
    }

    pub fn is_empty(&self) -> bool {
        self.width_deg <= 0.0
    }

    pub fn min_deg(&self) -> f64 {
        self.start_deg
    }

    pub fn max_deg(&self) -> f64 {
        wrap_deg(self.start_deg + self.width_deg)
    }

    pub fn center_deg(&self) -> f64 {
        wrap_deg(self.start_deg + self.width_deg / 2.0)
    }

    /// Offset of `azimuth` from `start` in `[0, 360)`, with values just below
    /// `start` snapped to zero.
    pub fn offset_of(&self, azimuth_deg: f64) -> f64 {
        let d = wrap_deg(azimuth_deg - self.start_deg);
        if d > 360.0 - AZIMUTH_EPS_DEG {
            0.0
        } else {
            d
        }
    }

    pub fn contains(&self, azimuth_deg: f64) -> bool {
        if self.is_empty() {
            return false;
        }
        if self.width_deg >= 360.0 {
            return true;
        }
        self.offset_of(azimuth_deg) < self.width_deg - AZIMUTH_EPS_DEG
    }

    /// Closed-interval membership, for extents that must include both ends.
    pub fn covers(&self, azimuth_deg: f64) -> bool {
        self.width_deg >= 360.0 || self.offset_of(azimuth_deg) <= self.width_deg + AZIMUTH_EPS_DEG
    }

    /// Whether `other` lies entirely inside `self` (closed on both ends).
    pub fn covers_interval(&self, other: &AzimuthInterval) -> bool {
        if self.width_deg >= 360.0 {
            return true;
        }
        let start = self.offset_of(other.start_deg);
        start + other.width_deg <= self.width_deg + AZIMUTH_EPS_DEG
    }

    pub fn overlaps(&self, other: &AzimuthInterval) -> bool {
        if self.is_empty() || other.is_empty() {
            return false;
        }
        self.covers(other.start_deg) || other.covers(self.start_deg)
    }
}

/// Smallest arc containing every azimuth in `azimuths`, or `None` when the
/// slice is empty.
pub fn smallest_arc(azimuths: &[f64]) -> Option<AzimuthInterval> {
    if azimuths.is_empty() {
        return None;
    }
    let mut sorted: Vec<f64> = azimuths.iter().map(|&a| wrap_deg(a)).collect();
    sorted.sort_by(f64::total_cmp);
    // the arc is the complement of the largest gap between neighbours
    let n = sorted.len();
    let mut best_gap = sorted[0] + 360.0 - sorted[n - 1];
    let mut best_end = 0;
    for i in 1..n {
        let gap = sorted[i] - sorted[i - 1];
        if gap > best_gap {
            best_gap = gap;
            best_end = i;
        }
    }
    Some(AzimuthInterval::new(sorted[best_end], 360.0 - best_gap))
}

/// Returns `(range_m, azimuth_deg, elevation_deg)`.
pub fn cartesian_to_spherical(x: f64, y: f64, z: f64) -> Result<(f64, f64, f64)> {
    let range = (x * x + y * y + z * z).sqrt();
    if !(range.is_finite() && range > 0.0) {
        return Err(Error::UndefinedDirection);
    }
    let elevation = z.atan2(x.hypot(y)).to_degrees();
    Ok((range, azimuth_of(x, y), elevation))
}

pub fn spherical_to_cartesian(range_m: f64, azimuth_deg: f64, elevation_deg: f64) -> [f64; 3] {
    let (sa, ca) = azimuth_deg.to_radians().sin_cos();
    let (se, ce) = elevation_deg.to_radians().sin_cos();
    [range_m * ce * ca, range_m * ce * sa, range_m * se]
}

/// Azimuth interval covering the box footprint as seen from `origin`.
pub fn angular_extent(target: &Box3D, origin: [f64; 3]) -> Result<AzimuthInterval> {
    let [u, v, _] = target.to_local(origin[0], origin[1], origin[2]);
    if u.abs() <= target.l / 2.0 && v.abs() <= target.w / 2.0 {
        return Err(Error::AmbiguousExtent);
    }
    let azimuths = target
        .footprint()
        .map(|[x, y]| azimuth_of(x - origin[0], y - origin[1]));
    Ok(smallest_arc(&azimuths).expect("four corners"))
}

/// A full rotation with every channel returning at its fixed range.
///
/// Columns are emitted in azimuth order; within a column channels ascend.
pub fn synthesize_ring_scan(config: &SensorConfig, ranges_by_channel: &[f64], intensity: f64) -> Result<Scan> {
    config.validate()?;
    if ranges_by_channel.len() != config.channel_count {
        return Err(Error::InvalidConfig(format!(
            "{} ranges for {} channels",
            ranges_by_channel.len(),
            config.channel_count
        )));
    }
    for (channel, &r) in ranges_by_channel.iter().enumerate() {
        if !(r > config.internal_mot_m && r <= config.max_range_m) {
            return Err(Error::RangeOutOfBounds {
                channel,
                range_m: r,
                min_m: config.internal_mot_m,
                max_m: config.max_range_m,
            });
        }
    }
    let columns = config.columns();
    let mut points = Vec::with_capacity(columns * config.channel_count);
    for col in 0..columns {
        let azimuth = col as f64 * config.azimuth_resolution_deg;
        let t0 = col as f64 * config.firing_cycle_us;
        for (channel, (&r, &el)) in ranges_by_channel
            .iter()
            .zip(&config.vertical_angles_deg)
            .enumerate()
        {
            let [x, y, z] = spherical_to_cartesian(r, azimuth, el);
            let t = t0 + channel as f64 * config.firing_period_us;
            points.push(CloudPoint::from_xyz(x, y, z, intensity, channel, t));
        }
    }
    Ok(Scan::new(points, config.id.clone(), 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn spherical_axis_cases() {
        let (r, az, el) = cartesian_to_spherical(1.0, 0.0, 0.0).unwrap();
        assert_eq!((r, az, el), (1.0, 0.0, 0.0));
        let (r, az, el) = cartesian_to_spherical(0.0, 1.0, 0.0).unwrap();
        assert_eq!((r, az, el), (1.0, 90.0, 0.0));
        let (r, az, _) = cartesian_to_spherical(3.0, 4.0, 0.0).unwrap();
        assert_abs_diff_eq!(r, 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(az, 53.130_102_354_155_98, epsilon = 1e-9);
        assert!(matches!(
            cartesian_to_spherical(0.0, 0.0, 0.0),
            Err(Error::UndefinedDirection)
        ));
    }

    #[test]
    fn spherical_to_cartesian_cases() {
        let p = spherical_to_cartesian(1.0, 0.0, 0.0);
        assert_eq!(p, [1.0, 0.0, 0.0]);
        let p = spherical_to_cartesian(2.0, 180.0, 0.0);
        assert_abs_diff_eq!(p[0], -2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], 0.0, epsilon = 1e-12);
        let p = spherical_to_cartesian(5.0, 53.130_102_354_155_98, 0.0);
        assert_abs_diff_eq!(p[0], 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(p[1], 4.0, epsilon = 1e-9);
    }

    #[test]
    fn negative_zero_azimuth_wraps_to_zero() {
        assert_eq!(azimuth_of(1.0, -1e-300), 0.0);
        assert_eq!(wrap_deg(-1e-15), 0.0);
        assert_eq!(wrap_deg(360.0), 0.0);
    }

    fn corner_oracle(target: &Box3D) -> f64 {
        // widest pairwise angle between the four corners seen from the origin
        let fp = target.footprint();
        let mut best: f64 = 0.0;
        for a in &fp {
            for b in &fp {
                let dot = a[0] * b[0] + a[1] * b[1];
                let cross = a[0] * b[1] - a[1] * b[0];
                best = best.max(cross.atan2(dot).abs().to_degrees());
            }
        }
        best
    }

    #[test]
    fn angular_extent_square_at_ten_meters() {
        let b = Box3D::new([10.0, 0.0, 0.0], [2.0, 2.0, 1.0], 0.0, ObjectClass::Other).unwrap();
        let ext = angular_extent(&b, [0.0; 3]).unwrap();
        // corners (9, ±1) bound the view: 2 atan(1/9)
        let expected = 2.0 * (1.0f64 / 9.0).atan().to_degrees();
        assert_abs_diff_eq!(ext.width_deg, expected, epsilon = 1e-9);
        assert_abs_diff_eq!(ext.width_deg, 12.680_383_491_819_79, epsilon = 1e-9);
        assert_abs_diff_eq!(ext.width_deg, corner_oracle(&b), epsilon = 1e-9);
    }

    #[test]
    fn angular_extent_degenerate_and_wrap() {
        let tiny = Box3D::new([10.0, 0.0, 0.0], [1e-9, 1e-9, 1.0], 0.0, ObjectClass::Other).unwrap();
        assert!(angular_extent(&tiny, [0.0; 3]).unwrap().width_deg < 1e-6);

        let az = 359.0f64.to_radians();
        let b = Box3D::new([10.0 * az.cos(), 10.0 * az.sin(), 0.0], [1.0, 1.0, 1.0], 0.3, ObjectClass::Other).unwrap();
        let ext = angular_extent(&b, [0.0; 3]).unwrap();
        assert!(ext.width_deg < 10.0, "got the complement: {ext:?}");
        assert_abs_diff_eq!(ext.width_deg, corner_oracle(&b), epsilon = 1e-9);
        assert!(ext.covers(359.0));
        assert!(ext.covers(0.5) || ext.covers(358.0));
    }

    #[test]
    fn angular_extent_rejects_inside_origin() {
        let b = Box3D::new([0.5, 0.0, 0.0], [2.0, 2.0, 1.0], 0.0, ObjectClass::Vehicle).unwrap();
        assert!(matches!(angular_extent(&b, [0.0; 3]), Err(Error::AmbiguousExtent)));
    }

    #[test]
    fn points_per_degree_examples() {
        assert_eq!(points_per_degree(&SensorConfig::vlp16()), 80.0);
        let mut c = SensorConfig::vlp16();
        c.channel_count = 64;
        c.azimuth_resolution_deg = 0.1;
        assert_abs_diff_eq!(points_per_degree(&c), 640.0, epsilon = 1e-9);
        c.channel_count = 1;
        c.azimuth_resolution_deg = 1.0;
        assert_eq!(points_per_degree(&c), 1.0);
    }

    #[test]
    fn per_degree_identity() {
        for config in [SensorConfig::vlp16(), SensorConfig::hdl64()] {
            let per_column = points_per_degree(&config) * 360.0 * config.azimuth_resolution_deg / 360.0;
            assert_abs_diff_eq!(per_column, config.channel_count as f64, epsilon = 1e-9);
        }
    }

    #[test]
    fn ring_scan_counts() {
        let config = SensorConfig::vlp16();
        let scan = synthesize_ring_scan(&config, &[10.0; 16], 0.5).unwrap();
        assert_eq!(scan.len(), 28_800);
        assert!(scan.validate(&config).is_ok());
        assert_abs_diff_eq!(scan.points[16].timestamp_us, config.firing_cycle_us, epsilon = 1e-12);

        let mut single = SensorConfig::vlp16();
        single.channel_count = 1;
        single.vertical_angles_deg = vec![0.0];
        single.azimuth_resolution_deg = 1.0;
        assert_eq!(synthesize_ring_scan(&single, &[5.0], 0.5).unwrap().len(), 360);

        let err = synthesize_ring_scan(&config, &[0.3; 16], 0.5).unwrap_err();
        assert!(matches!(err, Error::RangeOutOfBounds { .. }));
    }

    #[test]
    fn config_validation() {
        let mut c = SensorConfig::vlp16();
        c.vertical_angles_deg.swap(0, 1);
        assert!(c.validate().is_err());
        let mut c = SensorConfig::vlp16();
        c.internal_mot_m = 2.0;
        assert!(c.validate().is_err());
        let json = serde_json::to_string(&SensorConfig::vlp16()).unwrap();
        assert_eq!(SensorConfig::from_json_str(&json).unwrap(), SensorConfig::vlp16());
        assert!(SensorConfig::preset("nope").is_err());
    }

    #[test]
    fn nearest_channel_picks_closest() {
        let c = SensorConfig::vlp16();
        assert_eq!(c.nearest_channel(-20.0), 0);
        assert_eq!(c.nearest_channel(0.9), 8);
        assert_eq!(c.nearest_channel(1.1), 8);
        assert_eq!(c.nearest_channel(2.2), 9);
        assert_eq!(c.nearest_channel(40.0), 15);
    }

    #[test]
    fn interval_membership_is_half_open() {
        let i = AzimuthInterval::centered(100.0, 4.0);
        assert!(i.contains(98.0));
        assert!(i.contains(101.8));
        assert!(!i.contains(102.0));
        let wrapped = AzimuthInterval::centered(1.0, 4.0);
        assert_abs_diff_eq!(wrapped.min_deg(), 359.0, epsilon = 1e-12);
        assert_abs_diff_eq!(wrapped.max_deg(), 3.0, epsilon = 1e-12);
        assert!(wrapped.contains(359.5) && wrapped.contains(0.0) && wrapped.contains(2.9));
        assert!(!wrapped.contains(3.0) && !wrapped.contains(358.9));
        assert!(!AzimuthInterval::centered(10.0, 0.0).contains(10.0));
    }

    proptest! {
        #[test]
        fn spherical_round_trip(x in -200.0f64..200.0, y in -200.0f64..200.0, z in -50.0f64..50.0) {
            prop_assume!(x * x + y * y + z * z > 1e-6);
            let (r, az, el) = cartesian_to_spherical(x, y, z).unwrap();
            prop_assert!((0.0..360.0).contains(&az));
            prop_assert!((-90.0..=90.0).contains(&el));
            let [x2, y2, z2] = spherical_to_cartesian(r, az, el);
            prop_assert!((x - x2).abs() < 1e-9 && (y - y2).abs() < 1e-9 && (z - z2).abs() < 1e-9);
        }

        #[test]
        fn extent_scale_invariant_and_bounded(
            dist in 2.0f64..60.0, bearing in 0.0f64..360.0,
            l in 0.2f64..5.0, w in 0.2f64..3.0, yaw in -3.2f64..3.2, k in 0.1f64..10.0
        ) {
            let (s, c) = bearing.to_radians().sin_cos();
            let b = Box3D::new([dist * c, dist * s, 0.0], [l, w, 1.5], yaw, ObjectClass::Vehicle).unwrap();
            prop_assume!(angular_extent(&b, [0.0; 3]).is_ok());
            let e1 = angular_extent(&b, [0.0; 3]).unwrap();
            let scaled = Box3D::new([dist * c * k, dist * s * k, 0.0], [l * k, w * k, 1.5], yaw, ObjectClass::Vehicle).unwrap();
            let e2 = angular_extent(&scaled, [0.0; 3]).unwrap();
            prop_assert!((e1.width_deg - e2.width_deg).abs() < 1e-6);
            prop_assert!(e1.width_deg <= 180.0);
            prop_assert!((e1.width_deg - corner_oracle(&b)).abs() < 1e-6);
        }
    }
}
