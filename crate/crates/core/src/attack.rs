//! Physical removal attack synthesis.
//!
//! A spoofer injects one strong echo per affected column at `spoof_range_m`.
//! The receiver keeps the dominant echo, and the filter cascade then drops it
//! when it lies inside the spoofing region, taking the genuine return with it.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::echo_pipeline::{
    select_returns, spoofing_region_width, Echo, EchoColumn, FilterChain, ReturnMode, SaturationPolicy,
};
use crate::error::{Error, Result};
use crate::sensor_model::{
    points_per_degree, signed_delta_deg, smallest_arc, AzimuthInterval, Box3D, Scan, SensorConfig,
};

/// Slack when deciding whether a point belongs to a target box.
pub const TARGET_MARGIN_M: f64 = 1e-3;

const OUTDOOR_CAPACITY_JSON: &str = include_str!("../data/outdoor_capacity.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackMode {
    Ideal,
    CapabilityLimited,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub center_azimuth_deg: f64,
    pub attack_angle_deg: f64,
    pub spoof_range_m: f64,
    pub spoof_intensity: f64,
    pub mode: AttackMode,
    pub spoofer_distance_m: f64,
}

impl AttackSpec {
    /// Full-strength removal at 20 cm, inside every published spoofing region.
    pub fn ideal(center_azimuth_deg: f64, attack_angle_deg: f64) -> Self {
        Self {
            center_azimuth_deg,
            attack_angle_deg,
            spoof_range_m: 0.20,
            spoof_intensity: 1.0,
            mode: AttackMode::Ideal,
            spoofer_distance_m: 2.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=360.0).contains(&self.attack_angle_deg) {
            return Err(Error::InvalidConfig(format!(
                "attack angle {} outside [0, 360]",
                self.attack_angle_deg
            )));
        }
        if !(self.spoof_range_m > 0.0) {
            return Err(Error::InvalidConfig("spoof range must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.spoof_intensity) {
            return Err(Error::InvalidConfig("spoof intensity outside [0, 1]".into()));
        }
        Ok(())
    }
}

/// What the victim does with the echoes it receives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Receiver {
    pub chain: FilterChain,
    pub policy: SaturationPolicy,
    pub return_mode: ReturnMode,
}

impl Receiver {
    pub fn new(chain: FilterChain, return_mode: ReturnMode) -> Self {
        Self {
            chain,
            policy: SaturationPolicy::default(),
            return_mode,
        }
    }

    /// VLP-16 behind Apollo in the default strongest-return mode.
    pub fn vlp16_apollo() -> Self {
        Self::new(FilterChain::preset("vlp16-apollo").expect("built-in preset"), ReturnMode::Strongest)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapabilityModel {
    pub max_stable_angle_deg: f64,
    pub removal_rate_pts_per_deg: f64,
    /// `(spoofer_distance_m, max_removable_points)`, distances increasing.
    /// Empty means unlimited.
    pub distance_capacity: Vec<(f64, f64)>,
    pub daylight_factor: f64,
}

#[derive(Deserialize)]
struct CapacityCurve {
    points: Vec<(f64, f64)>,
}

impl CapabilityModel {
    /// Unlimited capacity with the linear removal rate of `config`.
    pub fn unlimited(config: &SensorConfig) -> Self {
        Self {
            max_stable_angle_deg: 45.0,
            removal_rate_pts_per_deg: points_per_degree(config),
            distance_capacity: Vec::new(),
            daylight_factor: 1.0,
        }
    }

    /// Linear removal rate of `config` with the shipped outdoor capacity curve.
    /// The curve is an approximate reading of a plot, not measured data.
    pub fn outdoor(config: &SensorConfig) -> Self {
        let curve: CapacityCurve = serde_json::from_str(OUTDOOR_CAPACITY_JSON).expect("bundled curve parses");
        Self {
            distance_capacity: curve.points,
            ..Self::unlimited(config)
        }
    }

    pub fn with_capacity_file(mut self, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        let curve: CapacityCurve = serde_json::from_str(&text)?;
        self.distance_capacity = curve.points;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.distance_capacity.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::InvalidConfig("capacity distances must be strictly increasing".into()));
        }
        if self.distance_capacity.iter().any(|&(_, c)| !(c >= 0.0)) {
            return Err(Error::InvalidConfig("capacities must be non-negative".into()));
        }
        if !(self.daylight_factor > 0.0 && self.daylight_factor <= 1.0) {
            return Err(Error::InvalidConfig("daylight factor outside (0, 1]".into()));
        }
        Ok(())
    }

    /// Removable points at a spoofer distance, interpolated linearly and
    /// held constant past either end of the curve.
    pub fn capacity(&self, spoofer_distance_m: f64) -> f64 {
        let pts = &self.distance_capacity;
        let Some(first) = pts.first() else {
            return f64::INFINITY;
        };
        let last = pts[pts.len() - 1];
        if spoofer_distance_m <= first.0 {
            return first.1;
        }
        if spoofer_distance_m >= last.0 {
            return last.1;
        }
        let i = pts.partition_point(|&(d, _)| d <= spoofer_distance_m);
        let (d0, c0) = pts[i - 1];
        let (d1, c1) = pts[i];
        c0 + (c1 - c0) * (spoofer_distance_m - d0) / (d1 - d0)
    }

    pub fn effective_capacity(&self, spoofer_distance_m: f64) -> f64 {
        self.capacity(spoofer_distance_m) * self.daylight_factor
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AttackResult {
    /// Indices into the input scan of genuine points that did not survive.
    pub removed_point_ids: Vec<usize>,
    /// Spoofed points that made it through the receiver.
    pub injected_points: Vec<crate::sensor_model::CloudPoint>,
    /// Indices of input points whose column the spoofer reached.
    pub affected_point_ids: Vec<usize>,
    /// Per requested target; `None` when the target had no points.
    pub removal_percentages: Vec<Option<f64>>,
}

pub fn attack_sector(spec: &AttackSpec) -> AzimuthInterval {
    AzimuthInterval::centered(spec.center_azimuth_deg, spec.attack_angle_deg)
}

/// Lateral width `2 d sin(Δθ / 2)` swept by the attack sector at distance `d`.
pub fn chord_length(target_distance_m: f64, attack_angle_deg: f64) -> f64 {
    2.0 * target_distance_m * (attack_angle_deg.to_radians() / 2.0).sin()
}

pub fn expected_removed_points(cap: &CapabilityModel, attack_angle_deg: f64, spoofer_distance_m: f64) -> f64 {
    let linear = cap.removal_rate_pts_per_deg * attack_angle_deg.max(0.0).min(cap.max_stable_angle_deg);
    linear.min(cap.effective_capacity(spoofer_distance_m))
}

/// Indices of genuine points inside `target`.
pub fn target_point_ids(scan: &Scan, target: &Box3D) -> Vec<usize> {
    scan.points
        .iter()
        .enumerate()
        .filter(|(_, p)| !p.spoofed && target.contains_point(p, TARGET_MARGIN_M))
        .map(|(i, _)| i)
        .collect()
}

fn count_target_points(scan: &Scan, target: &Box3D) -> usize {
    scan.points
        .iter()
        .filter(|p| !p.spoofed && target.contains_point(p, TARGET_MARGIN_M))
        .count()
}

pub fn removal_percentage(before: &Scan, after: &Scan, target: &Box3D) -> Result<f64> {
    if before.frame_id != after.frame_id {
        return Err(Error::InvalidConfig(format!(
            "frames differ: {} vs {}",
            before.frame_id, after.frame_id
        )));
    }
    let n_before = count_target_points(before, target);
    if n_before == 0 {
        return Err(Error::UndefinedRatio);
    }
    let n_after = count_target_points(after, target).min(n_before);
    Ok(100.0 * (n_before - n_after) as f64 / n_before as f64)
}

/// Picks the columns a capability-limited spoofer reaches: whole columns,
/// nearest the sector center first, until the point budget would overflow.
fn limited_selection(scan: &Scan, in_sector: &[usize], center_deg: f64, budget: f64) -> Vec<usize> {
    // columns keyed by azimuth quantized to a thousandth of a degree
    let mut columns: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for &i in in_sector {
        let key = (scan.points[i].azimuth_deg * 1e3).round() as i64;
        columns.entry(key).or_default().push(i);
    }
    let mut ordered: Vec<(f64, i64, Vec<usize>)> = columns
        .into_iter()
        .map(|(key, ids)| (signed_delta_deg(center_deg, key as f64 / 1e3), key, ids))
        .collect();
    ordered.sort_by(|a, b| a.0.abs().total_cmp(&b.0.abs()).then(a.0.total_cmp(&b.0)).then(a.1.cmp(&b.1)));

    let mut chosen = Vec::new();
    for (_, _, ids) in ordered {
        if (chosen.len() + ids.len()) as f64 > budget {
            break;
        }
        chosen.extend(ids);
    }
    chosen.sort_unstable();
    chosen
}

/// Applies the attack to `scan`.
///
/// Every column the spoofer reaches receives a spoofed echo; the receiver
/// then selects returns and the filter cascade drops anything inside the
/// spoofing region. Columns the spoofer does not reach pass through as
/// captured.
pub fn synthesize(
    scan: &Scan,
    spec: &AttackSpec,
    receiver: &Receiver,
    cap: &CapabilityModel,
    targets: &[Box3D],
) -> Result<(Scan, AttackResult)> {
    spec.validate()?;
    let width = match spec.mode {
        AttackMode::Ideal => spec.attack_angle_deg,
        AttackMode::CapabilityLimited => spec.attack_angle_deg.min(cap.max_stable_angle_deg),
    };
    let sector = AzimuthInterval::centered(spec.center_azimuth_deg, width);
    let percentages = |after: &Scan| {
        targets
            .iter()
            .map(|t| removal_percentage(scan, after, t).ok())
            .collect::<Vec<_>>()
    };
    if sector.is_empty() {
        let out = scan.clone();
        let removal_percentages = percentages(&out);
        return Ok((
            out,
            AttackResult {
                removal_percentages,
                ..Default::default()
            },
        ));
    }

    let in_sector: Vec<usize> = (0..scan.len())
        .filter(|&i| sector.contains(scan.points[i].azimuth_deg))
        .collect();
    let affected = match spec.mode {
        AttackMode::Ideal => in_sector,
        AttackMode::CapabilityLimited => limited_selection(
            scan,
            &in_sector,
            spec.center_azimuth_deg,
            cap.effective_capacity(spec.spoofer_distance_m),
        ),
    };

    let width_m = spoofing_region_width(&receiver.chain);
    let spoof = Echo::spoofed(spec.spoof_range_m, spec.spoof_intensity);
    let mut points = Vec::with_capacity(scan.len());
    let mut removed = Vec::new();
    let mut injected = Vec::new();
    let mut next_affected = affected.iter().peekable();

    for (i, p) in scan.points.iter().enumerate() {
        if next_affected.peek() != Some(&&i) {
            points.push(*p);
            continue;
        }
        next_affected.next();
        let genuine = Echo::genuine(p.range_m, p.intensity);
        let column = EchoColumn::new(p.channel, p.azimuth_deg, vec![genuine, spoof])?;
        let mut genuine_kept = false;
        for echo in select_returns(&column, receiver.return_mode, &receiver.policy) {
            if echo.range_m < width_m {
                continue;
            }
            if echo.spoofed {
                let mut q = p.at_range(echo.range_m);
                q.intensity = echo.intensity;
                q.spoofed = true;
                points.push(q);
                injected.push(q);
            } else {
                genuine_kept = true;
                points.push(*p);
            }
        }
        if !genuine_kept {
            removed.push(i);
        }
    }

    let out = scan.with_points(points);
    let removal_percentages = percentages(&out);
    Ok((
        out,
        AttackResult {
            removed_point_ids: removed,
            injected_points: injected,
            affected_point_ids: affected,
            removal_percentages,
        },
    ))
}

/// Smallest multiple of `step_deg` whose sector, centered on the target's
/// points, removes all of them under an ideal attack.
pub fn min_attack_angle(scan: &Scan, target: &Box3D, step_deg: f64) -> Result<f64> {
    if !(step_deg > 0.0) {
        return Err(Error::InvalidConfig("step must be positive".into()));
    }
    let ids = target_point_ids(scan, target);
    if ids.is_empty() {
        return Err(Error::NoTargetPoints);
    }
    let azimuths: Vec<f64> = ids.iter().map(|&i| scan.points[i].azimuth_deg).collect();
    let center = smallest_arc(&azimuths).expect("non-empty").center_deg();
    // each return is attacked independently, so the target's own points suffice
    let scan = &scan.with_points(ids.iter().map(|&i| scan.points[i]).collect());
    let receiver = Receiver::vlp16_apollo();
    let cap = CapabilityModel {
        max_stable_angle_deg: 360.0,
        removal_rate_pts_per_deg: 0.0,
        distance_capacity: Vec::new(),
        daylight_factor: 1.0,
    };
    let max_steps = (360.0 / step_deg).ceil() as usize;
    for k in 1..=max_steps {
        let angle = (k as f64 * step_deg).min(360.0);
        let spec = AttackSpec::ideal(center, angle);
        let (after, _) = synthesize(scan, &spec, &receiver, &cap, &[])?;
        if removal_percentage(scan, &after, target)? >= 100.0 {
            return Ok(angle);
        }
    }
    Ok(360.0)
}
