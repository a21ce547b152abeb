use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::ExperimentReport;
use crate::attack::{min_attack_angle, removal_percentage, synthesize, target_point_ids, AttackMode, AttackSpec, CapabilityModel, Receiver};
use crate::defense::{object_shadow_associate, run_scene, summarize, Evaluation, SceneRun, shadow::obstacle_points, shadow_regions, AzimuthDetector, Detector, FakeShadowDetector, Method};
use crate::echo_pipeline::{FilterChain, ReturnMode};
use crate::error::{Error, FormatError, Position, Result};
use crate::io::{self, KittiDataset, TraceFormat};
use crate::kinematics::{removal_window, simulate, Outcome, ScenarioConfig, Timeline};
use crate::laser_safety::{safety_report, LaserParams};
use crate::perception::{euclidean_cluster, ClusterParams};
use crate::scene::SceneGenerator;
use crate::sensor_model::{points_per_degree, smallest_arc, synthesize_ring_scan, AzimuthInterval, Box3D, ObjectClass, Scan, SensorConfig};

fn receiver_for(sensor: &SensorConfig, stack: &str) -> Result<Receiver> {
    Ok(Receiver::new(FilterChain::preset(&format!("{}-{stack}", sensor.id))?, ReturnMode::Strongest))
}

// ---------------------------------------------------------------- capability

/// Removed-point counts on a dense ring for each attack angle. With a
/// spoofer distance, a capability-limited column is added.
pub fn cmd_capability(sensor: &SensorConfig, stack: &str, angles_deg: &[f64], spoofer_distance_m: Option<f64>) -> Result<ExperimentReport> {
    sensor.validate()?;
    let receiver = receiver_for(sensor, stack)?;
    let range = (sensor.internal_mot_m + sensor.max_range_m) / 2.0;
    let ring = synthesize_ring_scan(sensor, &vec![range.min(10.0).max(sensor.internal_mot_m * 2.0); sensor.channel_count], 0.5)?;
    let unlimited = CapabilityModel::unlimited(sensor);
    let limited = CapabilityModel::outdoor(sensor);
    let rate = points_per_degree(sensor);

    let mut report = ExperimentReport::new(
        "capability",
        json!({"sensor": sensor, "stack": stack, "angles_deg": angles_deg, "spoofer_distance_m": spoofer_distance_m}),
        &["attack_angle_deg", "removed_ideal", "expected_ideal", "removed_limited"],
        vec![],
    );
    let mut exact = true;
    for &angle in angles_deg {
        let spec = AttackSpec::ideal(0.0, angle);
        let (_, ideal) = synthesize(&ring, &spec, &receiver, &unlimited, &[])?;
        let expected = (rate * angle).round();
        exact &= ideal.removed_point_ids.len() as f64 == expected;
        let limited_count = match spoofer_distance_m {
            Some(d) => {
                let spec = AttackSpec {
                    mode: AttackMode::CapabilityLimited,
                    spoofer_distance_m: d,
                    ..spec
                };
                Some(synthesize(&ring, &spec, &receiver, &limited, &[])?.1.removed_point_ids.len())
            }
            None => None,
        };
        report.push(vec![json!(angle), json!(ideal.removed_point_ids.len()), json!(expected), json!(limited_count)]);
    }
    report.summary = json!({"points_per_degree": rate, "ideal_matches_linear_law": exact});
    Ok(report)
}

// ------------------------------------------------------------------- attack

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Campaign {
    pub sensor: String,
    pub stack: String,
    pub step_deg: f64,
    pub pedestrians: usize,
    pub vehicles: usize,
    pub seed: u64,
    pub target_range_m: (f64, f64),
    /// Dataset sample ids to draw targets from; all samples when absent.
    pub scenes: Option<Vec<String>>,
}

impl Default for Campaign {
    fn default() -> Self {
        Self {
            sensor: "hdl64".into(),
            stack: "apollo".into(),
            step_deg: 1.0,
            pedestrians: 40,
            vehicles: 40,
            seed: 1,
            target_range_m: (6.0, 28.0),
            scenes: None,
        }
    }
}

impl Campaign {
    pub fn from_path(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&io::read_text(path)?)?)
    }
}

/// One attack target with the scan it sits in.
#[derive(Debug, Clone)]
pub struct TargetCase {
    pub scene: String,
    pub scan: Scan,
    pub target: Box3D,
}

#[derive(Debug, Clone)]
enum Source {
    Synthetic { generator: SceneGenerator, seed: u64 },
    Dataset(KittiDataset),
}

#[derive(Debug, Clone)]
struct TargetRef {
    scene: String,
    index: u64,
    class: ObjectClass,
    target: Option<Box3D>,
}

/// Attack targets, loaded one at a time so that only the scans in flight
/// are held in memory.
#[derive(Debug, Clone)]
pub struct Targets {
    sensor: SensorConfig,
    source: Source,
    refs: Vec<TargetRef>,
}

impl Targets {
    /// Synthetic scenes, one target of `classes[k].0` per generator index
    /// `classes[k].1`.
    pub fn synthetic(sensor: &SensorConfig, seed: u64, target_range_m: (f64, f64), classes: &[(ObjectClass, u64)]) -> Self {
        let mut generator = SceneGenerator::new(sensor.clone());
        generator.target_range_m = target_range_m;
        Self {
            sensor: sensor.clone(),
            source: Source::Synthetic { generator, seed },
            refs: classes
                .iter()
                .map(|&(class, index)| TargetRef {
                    scene: format!("synthetic-{index}"),
                    index,
                    class,
                    target: None,
                })
                .collect(),
        }
    }

    /// The campaign's synthetic targets: pedestrians first, then vehicles.
    pub fn for_campaign(campaign: &Campaign, sensor: &SensorConfig) -> Self {
        let classes: Vec<(ObjectClass, u64)> = (0..campaign.pedestrians as u64)
            .map(|i| (ObjectClass::Pedestrian, i))
            .chain((0..campaign.vehicles as u64).map(|i| (ObjectClass::Vehicle, 100_000 + i)))
            .collect();
        Self::synthetic(sensor, campaign.seed, campaign.target_range_m, &classes)
    }

    /// Labelled pedestrians and vehicles in range with at least one point,
    /// in sample order, up to the campaign's per-class counts. Unreadable
    /// samples are skipped and listed in `soft`.
    pub fn from_dataset(campaign: &Campaign, sensor: &SensorConfig, dataset: &KittiDataset, soft: &mut Vec<String>) -> Result<Self> {
        let ids = match &campaign.scenes {
            Some(ids) => ids.clone(),
            None => dataset.sample_ids()?,
        };
        let mut refs = Vec::new();
        let (mut peds, mut cars) = (0, 0);
        for id in ids {
            if peds >= campaign.pedestrians && cars >= campaign.vehicles {
                break;
            }
            let loaded = dataset
                .scan(&id, sensor)
                .and_then(|s| Ok((s, dataset.labels(&id)?, dataset.calibration(&id)?)));
            let (scan, labels, calib) = match loaded {
                Ok(v) => v,
                Err(e) => {
                    soft.push(format!("{id}: {e}"));
                    continue;
                }
            };
            for rec in labels {
                let Some(class) = rec.object_class() else { continue };
                let slot = match class {
                    ObjectClass::Pedestrian if peds < campaign.pedestrians => &mut peds,
                    ObjectClass::Vehicle if cars < campaign.vehicles => &mut cars,
                    _ => continue,
                };
                let Ok(target) = io::label_to_lidar_box(&rec, &calib) else { continue };
                let d = target.horizontal_distance();
                if d < campaign.target_range_m.0 || d > campaign.target_range_m.1 || target_point_ids(&scan, &target).is_empty() {
                    continue;
                }
                *slot += 1;
                refs.push(TargetRef {
                    scene: id.clone(),
                    index: 0,
                    class,
                    target: Some(target),
                });
            }
        }
        Ok(Self {
            sensor: sensor.clone(),
            source: Source::Dataset(dataset.clone()),
            refs,
        })
    }

    pub fn len(&self) -> usize {
        self.refs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.refs.is_empty()
    }

    pub fn scene(&self, k: usize) -> &str {
        &self.refs[k].scene
    }

    pub fn load(&self, k: usize) -> Result<TargetCase> {
        let r = &self.refs[k];
        match &self.source {
            Source::Synthetic { generator, seed } => {
                let scene = generator.generate(*seed, r.index, Some(r.class));
                Ok(TargetCase {
                    scene: r.scene.clone(),
                    scan: scene.scan,
                    target: scene.target.expect("requested a target"),
                })
            }
            Source::Dataset(dataset) => Ok(TargetCase {
                scene: r.scene.clone(),
                scan: dataset.scan(&r.scene, &self.sensor)?,
                target: r.target.expect("dataset targets carry their box"),
            }),
        }
    }
}

/// Azimuth arc covered by the target's points.
pub fn target_extent(scan: &Scan, target: &Box3D) -> Option<AzimuthInterval> {
    let az: Vec<f64> = target_point_ids(scan, target).iter().map(|&i| scan.points[i].azimuth_deg).collect();
    smallest_arc(&az)
}

fn cluster_present(scan: &Scan, target: &Box3D) -> bool {
    let near: Vec<_> = scan
        .points
        .iter()
        .filter(|p| !p.spoofed && target.contains_point(p, 0.25))
        .copied()
        .collect();
    !euclidean_cluster(&scan.with_points(near), ClusterParams::default()).is_empty()
}

/// Spoofer able to cover any sector.
fn unbounded_capability(sensor: &SensorConfig) -> CapabilityModel {
    CapabilityModel {
        max_stable_angle_deg: 360.0,
        ..CapabilityModel::unlimited(sensor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetOutcome {
    pub scene: String,
    pub class: ObjectClass,
    pub distance_m: f64,
    pub extent_deg: f64,
    pub min_attack_angle_deg: f64,
    /// `(angle, removal %, cluster present)` for each step up to the minimum.
    pub sweep: Vec<(f64, f64, bool)>,
}

pub fn attack_target(case: &TargetCase, step_deg: f64, receiver: &Receiver) -> Result<TargetOutcome> {
    let extent = target_extent(&case.scan, &case.target).ok_or(Error::NoTargetPoints)?;
    let min_angle = min_attack_angle(&case.scan, &case.target, step_deg)?;
    let cap = unbounded_capability(&SensorConfig::vlp16());
    // returns are attacked one by one, so the neighbourhood of the box is enough
    let local = case
        .scan
        .with_points(case.scan.points.iter().filter(|p| case.target.contains_point(p, 0.25)).copied().collect());
    let mut sweep = Vec::new();
    let steps = (min_angle / step_deg).round() as usize;
    for k in 1..=steps {
        let angle = k as f64 * step_deg;
        let (after, _) = synthesize(&local, &AttackSpec::ideal(extent.center_deg(), angle), receiver, &cap, &[])?;
        let rp = removal_percentage(&local, &after, &case.target)?;
        sweep.push((angle, rp, cluster_present(&after, &case.target)));
    }
    Ok(TargetOutcome {
        scene: case.scene.clone(),
        class: case.target.class,
        distance_m: case.target.horizontal_distance(),
        extent_deg: extent.width_deg,
        min_attack_angle_deg: min_angle,
        sweep,
    })
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn cmd_attack(campaign: &Campaign, dataset: Option<&KittiDataset>) -> Result<ExperimentReport> {
    let sensor = SensorConfig::resolve(&campaign.sensor)?;
    let receiver = receiver_for(&sensor, &campaign.stack)?;
    if !(campaign.step_deg > 0.0) {
        return Err(Error::InvalidConfig("step_deg must be positive".into()));
    }
    let mut soft = Vec::new();
    let targets = match dataset {
        Some(d) => Targets::from_dataset(campaign, &sensor, d, &mut soft)?,
        None => Targets::for_campaign(campaign, &sensor),
    };
    let outcomes: Vec<Result<TargetOutcome>> = (0..targets.len())
        .into_par_iter()
        .map(|k| attack_target(&targets.load(k)?, campaign.step_deg, &receiver))
        .collect();

    let inputs = dataset.map(|d| vec![d.root.display().to_string()]).unwrap_or_default();
    let mut report = ExperimentReport::new(
        "attack",
        serde_json::to_value(campaign)?,
        &["scene", "target", "class", "distance_m", "extent_deg", "attack_angle_deg", "removal_pct", "cluster_present", "min_attack_angle_deg"],
        inputs,
    );
    let mut per_class: [(Vec<f64>, &str); 2] = [(Vec::new(), "pedestrian"), (Vec::new(), "vehicle")];
    for (t, outcome) in outcomes.into_iter().enumerate() {
        let o = match outcome {
            Ok(o) => o,
            Err(e) => {
                report.soft_failures.push(format!("{}: {e}", targets.scene(t)));
                continue;
            }
        };
        let bucket = usize::from(o.class != ObjectClass::Pedestrian);
        per_class[bucket].0.push(o.min_attack_angle_deg);
        for &(angle, rp, present) in &o.sweep {
            report.push(vec![
                json!(o.scene),
                json!(t),
                json!(o.class),
                json!(o.distance_m),
                json!(o.extent_deg),
                json!(angle),
                json!(rp),
                json!(present),
                json!(o.min_attack_angle_deg),
            ]);
        }
    }
    report.soft_failures.extend(soft);
    let mut summary = serde_json::Map::new();
    for (angles, name) in &per_class {
        summary.insert(
            name.to_string(),
            json!({"targets": angles.len(), "mean_min_attack_angle_deg": mean(angles)}),
        );
    }
    report.summary = Value::Object(summary);
    Ok(report)
}

// ------------------------------------------------------------------- defend

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DefendArgs {
    pub sensor: String,
    pub stack: String,
    /// Attack scenes; each has an unattacked benign twin.
    pub scenes: usize,
    /// Attack angles cycle through `min..=max` in whole degrees.
    pub angle_range_deg: (u32, u32),
    /// Use each target's full-removal angle instead of cycling.
    pub full_removal: bool,
    pub seed: u64,
    pub gap_threshold_deg: f64,
    pub volume_threshold_m3: f64,
    /// Azimuth span watched by the gap detector; full circle when absent.
    pub roi: Option<AzimuthInterval>,
}

impl Default for DefendArgs {
    fn default() -> Self {
        Self {
            sensor: "hdl64".into(),
            stack: "apollo".into(),
            scenes: 500,
            angle_range_deg: (1, 22),
            full_removal: false,
            seed: 2,
            gap_threshold_deg: 1.0,
            volume_threshold_m3: 15.0,
            roi: None,
        }
    }
}

impl DefendArgs {
    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.angle_range_deg;
        if lo == 0 || hi < lo {
            return Err(Error::InvalidConfig(format!("angle range {lo}..={hi} is empty or starts at 0")));
        }
        Ok(())
    }

    /// Synthetic scenes alternate pedestrian and vehicle targets; dataset
    /// targets split the same way.
    pub fn targets(&self, dataset: Option<&KittiDataset>, soft: &mut Vec<String>) -> Result<Targets> {
        let sensor = SensorConfig::resolve(&self.sensor)?;
        match dataset {
            Some(d) => {
                let campaign = Campaign {
                    sensor: self.sensor.clone(),
                    pedestrians: self.scenes.div_ceil(2),
                    vehicles: self.scenes / 2,
                    ..Default::default()
                };
                Targets::from_dataset(&campaign, &sensor, d, soft)
            }
            None => {
                let classes: Vec<(ObjectClass, u64)> = (0..self.scenes as u64)
                    .map(|i| (if i % 2 == 0 { ObjectClass::Pedestrian } else { ObjectClass::Vehicle }, i))
                    .collect();
                Ok(Targets::synthetic(&sensor, self.seed, Campaign::default().target_range_m, &classes))
            }
        }
    }
}

/// Attack applied to `case` as scene number `i`.
pub fn attack_case(case: &TargetCase, i: usize, args: &DefendArgs, receiver: &Receiver) -> Result<Scan> {
    let extent = target_extent(&case.scan, &case.target).ok_or(Error::NoTargetPoints)?;
    let angle = if args.full_removal {
        min_attack_angle(&case.scan, &case.target, 1.0)?
    } else {
        let (lo, hi) = args.angle_range_deg;
        (lo + (i as u32) % (hi - lo + 1)) as f64
    };
    let cap = unbounded_capability(&SensorConfig::resolve(&args.sensor)?);
    Ok(synthesize(&case.scan, &AttackSpec::ideal(extent.center_deg(), angle), receiver, &cap, &[])?.0)
}

/// Matched clusters and clusters on one scan.
pub fn association_counts(scan: &Scan, detector: &FakeShadowDetector) -> Result<(usize, usize)> {
    let mut regions = shadow_regions(scan, &detector.shadow)?;
    let (obstacles, _) = obstacle_points(scan, &detector.shadow);
    let clusters = euclidean_cluster(&obstacles, detector.cluster);
    let a = object_shadow_associate(&obstacles, &clusters, &mut regions, &detector.shadow);
    Ok((a.cluster_to_region.iter().filter(|m| m.is_some()).count(), clusters.len()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefenseRun {
    pub evaluation: Evaluation,
    /// Matched over detected clusters, pooled across benign scenes.
    pub association_rate: Option<f64>,
    pub soft_failures: Vec<String>,
}

/// Runs `detector` over every target's benign scan and its attacked twin.
/// Scenes are built, scored and dropped in parallel. With `shadows`, the
/// object-shadow association rate of the benign scans is pooled as well.
pub fn run_defense(detector: &dyn Detector, args: &DefendArgs, dataset: Option<&KittiDataset>, shadows: Option<&FakeShadowDetector>) -> Result<DefenseRun> {
    args.validate()?;
    let sensor = SensorConfig::resolve(&args.sensor)?;
    let receiver = receiver_for(&sensor, &args.stack)?;
    let mut soft = Vec::new();
    let targets = args.targets(dataset, &mut soft)?;

    struct Scored {
        runs: Vec<SceneRun>,
        association: Option<(usize, usize)>,
        soft: Vec<String>,
    }
    let scored: Vec<Scored> = (0..targets.len())
        .into_par_iter()
        .map(|k| {
            let mut out = Scored {
                runs: Vec::new(),
                association: None,
                soft: Vec::new(),
            };
            let case = match targets.load(k) {
                Ok(c) => c,
                Err(e) => {
                    out.soft.push(format!("{}: {e}", targets.scene(k)));
                    return out;
                }
            };
            out.runs.push(run_scene(detector, &case.scan, false));
            if let Some(fsd) = shadows {
                match association_counts(&case.scan, fsd) {
                    Ok(c) => out.association = Some(c),
                    Err(e) => out.soft.push(format!("{}: association: {e}", case.scene)),
                }
            }
            match attack_case(&case, k, args, &receiver) {
                Ok(attacked) => out.runs.push(run_scene(detector, &attacked, true)),
                Err(e) => out.soft.push(format!("{}: attack: {e}", case.scene)),
            }
            out
        })
        .collect();

    let (mut matched, mut clusters) = (0, 0);
    let mut runs = Vec::new();
    for s in scored {
        runs.extend(s.runs);
        soft.extend(s.soft);
        if let Some((m, c)) = s.association {
            matched += m;
            clusters += c;
        }
    }
    Ok(DefenseRun {
        evaluation: summarize(detector.method(), &runs)?,
        association_rate: (clusters > 0).then(|| matched as f64 / clusters as f64),
        soft_failures: soft,
    })
}

pub fn cmd_defend(method: Method, args: &DefendArgs, dataset: Option<&KittiDataset>) -> Result<ExperimentReport> {
    let fsd = FakeShadowDetector {
        volume_threshold_m3: args.volume_threshold_m3,
        ..Default::default()
    };
    let azimuth = AzimuthDetector {
        gap_threshold_deg: args.gap_threshold_deg,
        roi: args.roi,
    };
    let run = match method {
        Method::Azimuth => run_defense(&azimuth, args, dataset, None)?,
        Method::Fsd => run_defense(&fsd, args, dataset, Some(&fsd))?,
    };
    let e = &run.evaluation;
    let inputs = dataset.map(|d| vec![d.root.display().to_string()]).unwrap_or_default();
    let mut params = serde_json::to_value(args)?;
    params["method"] = json!(method.as_str());
    let mut report = ExperimentReport::new(
        "defend",
        params,
        &["method", "benign_scenes", "attack_scenes", "tpr", "tnr", "mean_runtime_ms", "p95_runtime_ms", "errors"],
        inputs,
    );
    report.push(vec![
        json!(method.as_str()),
        json!(e.benign_scenes),
        json!(e.attack_scenes),
        json!(e.tpr),
        json!(e.tnr),
        json!(e.mean_runtime_ms),
        json!(e.p95_runtime_ms),
        json!(e.errors),
    ]);
    report.summary = json!({"evaluation": e, "association_rate": run.association_rate});
    report.soft_failures = run.soft_failures;
    Ok(report)
}

// ----------------------------------------------------------------- simulate

pub const GRID_HEADER: &str = "class,lateral_m,attack_start_distance_m,attack_angle_deg";

/// Scenario rows `class,lateral_m,attack_start_distance_m,attack_angle_deg`
/// applied on top of `base`. Blank lines and `#` comments are skipped.
pub fn read_scenario_grid(text: &str, base: &ScenarioConfig) -> Result<Vec<ScenarioConfig>> {
    let mut out = Vec::new();
    let mut header_seen = false;
    for (i, line) in text.lines().enumerate() {
        let pos = Position::Line(i + 1);
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header_seen {
            if line != GRID_HEADER {
                return Err(FormatError::new(pos, format!("expected header `{GRID_HEADER}`")).into());
            }
            header_seen = true;
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 4 {
            return Err(FormatError::new(pos, format!("expected 4 fields, found {}", f.len())).into());
        }
        let class = match f[0] {
            "pedestrian" => ObjectClass::Pedestrian,
            "vehicle" => ObjectClass::Vehicle,
            other => return Err(FormatError::new(pos, format!("unknown obstacle class `{other}`")).into()),
        };
        let num = |k: usize, name: &str| -> Result<f64> {
            f[k].parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| FormatError::new(pos, format!("`{name}` is not a number: {:?}", f[k])).into())
        };
        let fresh = ScenarioConfig::new(class, num(1, "lateral_m")?, num(2, "attack_start_distance_m")?, num(3, "attack_angle_deg")?);
        let cfg = ScenarioConfig {
            v_max_mps: base.v_max_mps,
            accel_mps2: base.accel_mps2,
            decel_mps2: base.decel_mps2,
            stop_margin_m: base.stop_margin_m,
            ..fresh
        };
        cfg.validate().map_err(|e| FormatError::new(pos, e.to_string()))?;
        out.push(cfg);
    }
    Ok(out)
}

/// The approach grid: 5° and 10° attacks from 10-50 m, three lateral
/// positions, both obstacle classes.
pub fn default_scenario_grid() -> String {
    let mut text = format!("{GRID_HEADER}\n");
    for class in ["pedestrian", "vehicle"] {
        for angle in [5, 10] {
            for start in [10, 20, 30, 40, 50] {
                for lateral in ["-2.0", "-1.0", "0.0", "1.0", "2.0"] {
                    text.push_str(&format!("{class},{lateral},{start},{angle}\n"));
                }
            }
        }
    }
    text
}

pub fn cmd_simulate(scenarios: &[ScenarioConfig], dt_s: f64, source: Option<&Path>) -> Result<(ExperimentReport, Vec<Timeline>)> {
    let runs: Vec<Result<(Timeline, f64)>> = scenarios
        .par_iter()
        .map(|cfg| Ok((simulate(cfg, dt_s)?, removal_window(cfg)?)))
        .collect();
    let inputs = source.map(|p| vec![p.display().to_string()]).unwrap_or_default();
    let mut report = ExperimentReport::new(
        "simulate",
        json!({"scenarios": scenarios, "dt_s": dt_s}),
        &[
            "scenario", "class", "lateral_m", "attack_start_distance_m", "attack_angle_deg", "removal_window", "outcome",
            "impact_speed_mps", "stop_position_m", "reappear_speed_mps", "reappear_gap_m",
        ],
        inputs,
    );
    let mut timelines = Vec::new();
    let mut collisions = 0;
    for (k, (cfg, run)) in scenarios.iter().zip(runs).enumerate() {
        let (tl, window) = run?;
        let (outcome, impact, stop) = match tl.outcome {
            Outcome::Stopped { position_m } => ("stopped", None, Some(position_m)),
            Outcome::Collision { speed_at_impact_mps } => {
                collisions += 1;
                ("collision", Some(speed_at_impact_mps), None)
            }
        };
        report.push(vec![
            json!(k),
            json!(cfg.obstacle.class),
            json!(cfg.obstacle.center[1]),
            json!(cfg.attack_start_distance_m),
            json!(cfg.attack_angle_deg),
            json!(window),
            json!(outcome),
            json!(impact),
            json!(stop),
            json!(tl.reappearance.map(|r| r.speed_mps)),
            json!(tl.reappearance.map(|r| r.gap_m)),
        ]);
        timelines.push(tl);
    }
    report.summary = json!({"scenarios": scenarios.len(), "collisions": collisions});
    Ok((report, timelines))
}

/// Timelines as CSV: `scenario,t,position_m,speed_mps,obstacle_perceived`.
pub fn timelines_csv(timelines: &[Timeline]) -> String {
    let mut out = String::from("scenario,t,position_m,speed_mps,obstacle_perceived\n");
    for (k, tl) in timelines.iter().enumerate() {
        for s in &tl.samples {
            out.push_str(&format!("{k},{},{},{},{}\n", s.t, s.position_m, s.speed_mps, s.obstacle_perceived));
        }
    }
    out
}

// ------------------------------------------------------------------- safety

pub fn cmd_safety(params: &LaserParams) -> Result<ExperimentReport> {
    let r = safety_report(params)?;
    let mut report = ExperimentReport::new("safety", serde_json::to_value(params)?, &["quantity", "value", "unit", "note"], vec![]);
    for row in &r.rows {
        report.push(vec![json!(row.quantity), json!(row.value), json!(row.unit), json!(row.note)]);
    }
    report.summary = json!({"footnotes": r.footnotes});
    Ok(report)
}

// -------------------------------------------------------------------- parse

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputKind {
    Velodyne,
    Labels,
    Calib,
    Packet,
    Csv,
    Pcd,
}

impl std::str::FromStr for InputKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "velodyne" | "bin" => Ok(InputKind::Velodyne),
            "labels" | "label" => Ok(InputKind::Labels),
            "calib" => Ok(InputKind::Calib),
            "packet" => Ok(InputKind::Packet),
            "csv" => Ok(InputKind::Csv),
            "pcd" => Ok(InputKind::Pcd),
            _ => Err(Error::unknown("input kind", s)),
        }
    }
}

impl InputKind {
    /// Guess from the file name and its parent directory.
    pub fn infer(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?;
        let parent = path.parent().and_then(|p| p.file_name()).and_then(|n| n.to_str()).unwrap_or("");
        match ext {
            "bin" => Some(InputKind::Velodyne),
            "csv" => Some(InputKind::Csv),
            "pcd" => Some(InputKind::Pcd),
            "pkt" | "packet" => Some(InputKind::Packet),
            "txt" if parent.starts_with("calib") => Some(InputKind::Calib),
            "txt" => Some(InputKind::Labels),
            _ => None,
        }
    }
}

fn scan_summary(scan: &Scan) -> Value {
    json!({"points": scan.len(), "frame": scan.frame_id})
}

/// Reads and validates one input file, summarizing its contents.
pub fn cmd_parse(path: &Path, kind: Option<InputKind>, sensor: &SensorConfig) -> Result<ExperimentReport> {
    let kind = kind
        .or_else(|| InputKind::infer(path))
        .ok_or_else(|| Error::InvalidConfig(format!("cannot tell the format of {}", path.display())))?;
    let mut report = ExperimentReport::new(
        "parse",
        json!({"kind": kind, "sensor": sensor.id}),
        &["kind", "items"],
        vec![path.display().to_string()],
    );
    let (items, summary) = match kind {
        InputKind::Velodyne => {
            let s = io::read_pointcloud_bin(&io::read_bytes(path)?, sensor, 0)?;
            (s.len(), scan_summary(&s))
        }
        InputKind::Labels => {
            let recs = io::read_labels(&io::read_text(path)?)?;
            let targetable = recs.iter().filter(|r| r.is_targetable()).count();
            (recs.len(), json!({"labels": recs.len(), "targetable": targetable}))
        }
        InputKind::Calib => {
            let c = io::read_calibration(&io::read_text(path)?)?;
            (1, json!({"projection": c.projection.as_slice()}))
        }
        InputKind::Packet => {
            let r = io::parse_raw_packet(&io::read_bytes(path)?)?;
            (r.len(), json!({"returns": r}))
        }
        InputKind::Csv | InputKind::Pcd => {
            let format = if kind == InputKind::Csv { TraceFormat::Csv } else { TraceFormat::Pcd };
            let s = io::read_scan(&io::read_bytes(path)?, format)?;
            (s.len(), scan_summary(&s))
        }
    };
    report.push(vec![json!(kind), json!(items)]);
    report.summary = summary;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn capability_sweep_is_linear() {
        let angles: Vec<f64> = (0..=45).map(f64::from).collect();
        let r = cmd_capability(&SensorConfig::vlp16(), "apollo", &angles, Some(10.0)).unwrap();
        for (k, row) in r.rows.iter().enumerate() {
            assert_eq!(row[1].as_u64().unwrap(), 80 * k as u64);
            assert!(row[3].as_u64().unwrap() <= row[1].as_u64().unwrap());
        }
        assert_eq!(r.summary["ideal_matches_linear_law"], json!(true));
    }

    #[test]
    fn empty_campaign_is_empty_report() {
        let c = Campaign {
            pedestrians: 0,
            vehicles: 0,
            ..Default::default()
        };
        let r = cmd_attack(&c, None).unwrap();
        assert!(r.rows.is_empty());
        assert!(r.soft_failures.is_empty());
    }

    #[test]
    fn grid_parses_and_reports_lines() {
        let base = ScenarioConfig::default();
        let grid = read_scenario_grid(&default_scenario_grid(), &base).unwrap();
        assert_eq!(grid.len(), 100);
        let bad = format!("{GRID_HEADER}\npedestrian,0,30,10\nvehicle,0,abc,5\n");
        let err = read_scenario_grid(&bad, &base).unwrap_err();
        assert!(matches!(err, Error::Format(FormatError { position: Position::Line(3), .. })), "{err}");
        let bad = format!("{GRID_HEADER}\ncyclist,0,30,10\n");
        assert!(read_scenario_grid(&bad, &base).is_err());
    }

    #[test]
    fn simulate_examples() {
        let no_attack = ScenarioConfig::new(ObjectClass::Pedestrian, 0.0, 30.0, 0.0);
        let attack = ScenarioConfig::new(ObjectClass::Pedestrian, 0.0, 30.0, 10.0);
        let (r, tl) = cmd_simulate(&[no_attack, attack], 0.01, None).unwrap();
        assert_eq!(r.rows[0][6], json!("stopped"));
        assert_eq!(r.rows[1][6], json!("collision"));
        assert!(timelines_csv(&tl).lines().count() > tl.len());
    }

    #[test]
    fn safety_defaults() {
        let r = cmd_safety(&LaserParams::default()).unwrap();
        assert_eq!(r.rows[0][0], json!("pulse_energy"));
        assert!((r.rows[0][1].as_f64().unwrap() - 2.8e-6).abs() < 1e-18);
    }

    #[test]
    fn reports_are_deterministic() {
        let angles = [1.0, 2.0, 3.0];
        let a = cmd_capability(&SensorConfig::vlp16(), "apollo", &angles, None).unwrap();
        let b = cmd_capability(&SensorConfig::vlp16(), "apollo", &angles, None).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    }

    #[test]
    fn unknown_method_and_kind() {
        assert!("svf".parse::<Method>().is_err());
        assert!("ply".parse::<InputKind>().is_err());
    }
}
