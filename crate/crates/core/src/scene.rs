//! Ray-cast synthetic scenes: a flat ground plane plus oriented boxes, seen
//! by a spinning LiDAR at the origin. Used wherever real dataset scans are
//! not available.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::sensor_model::{angular_extent, AzimuthInterval, Box3D, CloudPoint, ObjectClass, Scan, SensorConfig};

/// Typical sensor mounting height above the road, in meters.
pub const SENSOR_HEIGHT_M: f64 = 1.73;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub bbox: Box3D,
    pub reflectivity: f64,
    /// Probability that a ray hitting this object produces a return.
    pub return_probability: f64,
}

impl SceneObject {
    pub fn solid(bbox: Box3D) -> Self {
        Self {
            bbox,
            reflectivity: 0.5,
            return_probability: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    /// Height of the ground plane in the sensor frame; `None` for no ground.
    pub ground_z: Option<f64>,
    pub ground_reflectivity: f64,
    pub objects: Vec<SceneObject>,
}

impl Default for World {
    fn default() -> Self {
        Self {
            ground_z: Some(-SENSOR_HEIGHT_M),
            ground_reflectivity: 0.3,
            objects: Vec::new(),
        }
    }
}

impl World {
    /// Box resting on the ground with its footprint centered at `(x, y)`.
    pub fn grounded_box(&self, x: f64, y: f64, lwh: [f64; 3], yaw: f64, class: ObjectClass) -> Box3D {
        let base = self.ground_z.unwrap_or(-SENSOR_HEIGHT_M);
        Box3D::new([x, y, base + lwh[2] / 2.0], lwh, yaw, class).expect("positive dimensions")
    }

    pub fn add(&mut self, bbox: Box3D) -> &mut Self {
        self.objects.push(SceneObject::solid(bbox));
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RaycastParams {
    /// Independent per-ray probability of a missing return.
    pub dropout: f64,
    /// Standard deviation of additive range noise (uniform approximation).
    pub range_noise_m: f64,
}

impl Default for RaycastParams {
    fn default() -> Self {
        Self {
            dropout: 0.0,
            range_noise_m: 0.0,
        }
    }
}

/// Entry distance of the ray `t * dir` into `b`, if it enters in front of
/// the origin. Rays starting inside the box are ignored.
fn ray_box(b: &Box3D, dir: [f64; 3]) -> Option<f64> {
    let (s, c) = b.yaw.sin_cos();
    let o = b.to_local(0.0, 0.0, 0.0);
    let d = [c * dir[0] + s * dir[1], -s * dir[0] + c * dir[1], dir[2]];
    let half = [b.l / 2.0, b.w / 2.0, b.h / 2.0];
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    for k in 0..3 {
        if d[k].abs() < 1e-15 {
            if o[k].abs() > half[k] {
                return None;
            }
            continue;
        }
        let t1 = (-half[k] - o[k]) / d[k];
        let t2 = (half[k] - o[k]) / d[k];
        let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        t_near = t_near.max(lo);
        t_far = t_far.min(hi);
        if t_near > t_far {
            return None;
        }
    }
    (t_near > 0.0).then_some(t_near)
}

/// Casts every (column, channel) ray of one rotation.
pub fn raycast_scan(world: &World, config: &SensorConfig, params: &RaycastParams, rng: &mut impl Rng, frame_id: u64) -> Scan {
    let columns = config.columns();
    let res = config.azimuth_resolution_deg;
    let elevations: Vec<(f64, f64)> = config.vertical_angles_deg.iter().map(|e| e.to_radians().sin_cos()).collect();

    // broad phase: which objects can a column see at all
    let extents: Vec<Option<AzimuthInterval>> = world
        .objects
        .iter()
        .map(|o| angular_extent(&o.bbox, [0.0; 3]).ok())
        .collect();

    let mut points = Vec::with_capacity(columns * config.channel_count);
    let mut candidates = Vec::new();
    for col in 0..columns {
        let az = col as f64 * res;
        let (sa, ca) = az.to_radians().sin_cos();
        candidates.clear();
        for (i, ext) in extents.iter().enumerate() {
            // an object wrapped around the origin is always a candidate
            let visible = ext.is_none_or(|e| {
                AzimuthInterval::new(e.start_deg - res, e.width_deg + 2.0 * res).covers(az)
            });
            if visible {
                candidates.push(i);
            }
        }
        let t0 = col as f64 * config.firing_cycle_us;
        for (channel, &(se, ce)) in elevations.iter().enumerate() {
            let dir = [ce * ca, ce * sa, se];
            let mut best = f64::INFINITY;
            let mut hit: Option<(f64, f64)> = None;
            if let Some(gz) = world.ground_z {
                if dir[2] < 0.0 {
                    let t = gz / dir[2];
                    best = t;
                    hit = Some((world.ground_reflectivity, 1.0));
                }
            }
            for &i in &candidates {
                let obj = &world.objects[i];
                if let Some(t) = ray_box(&obj.bbox, dir) {
                    if t < best {
                        best = t;
                        hit = Some((obj.reflectivity, obj.return_probability));
                    }
                }
            }
            let Some((reflectivity, p_return)) = hit else {
                continue;
            };
            if best <= config.internal_mot_m || best > config.max_range_m {
                continue;
            }
            if params.dropout > 0.0 && rng.gen::<f64>() < params.dropout {
                continue;
            }
            if p_return < 1.0 && rng.gen::<f64>() >= p_return {
                continue;
            }
            let mut range = best;
            if params.range_noise_m > 0.0 {
                // uniform noise with the requested standard deviation
                range += (rng.gen::<f64>() - 0.5) * params.range_noise_m * 12f64.sqrt();
            }
            let t = t0 + channel as f64 * config.firing_period_us;
            points.push(CloudPoint::from_xyz(
                range * dir[0],
                range * dir[1],
                range * dir[2],
                reflectivity,
                channel,
                t,
            ));
        }
    }
    Scan::new(points, config.id.clone(), frame_id)
}

pub const PEDESTRIAN_LWH: [f64; 3] = [0.8, 0.6, 1.75];
pub const VEHICLE_LWH: [f64; 3] = [4.2, 1.8, 1.55];

/// A generated scene with its designated attack target.
#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub world: World,
    pub target: Option<Box3D>,
    pub scan: Scan,
}

/// Random street scenes: buildings, parked and moving cars, pedestrians,
/// poles, with an unoccluded target obstacle at 6-28 m when requested.
#[derive(Debug, Clone)]
pub struct SceneGenerator {
    pub config: SensorConfig,
    pub raycast: RaycastParams,
    /// Rough number of clutter objects per scene.
    pub clutter: usize,
    /// Share of clutter objects with dark, partially absorbing surfaces.
    pub dark_fraction: f64,
    pub target_range_m: (f64, f64),
}

impl SceneGenerator {
    pub fn new(config: SensorConfig) -> Self {
        Self {
            config,
            raycast: RaycastParams {
                dropout: 0.02,
                range_noise_m: 0.01,
            },
            clutter: 24,
            dark_fraction: 0.15,
            target_range_m: (6.0, 28.0),
        }
    }

    fn target_box(&self, world: &World, rng: &mut ChaCha8Rng, class: ObjectClass) -> Box3D {
        let lwh = match class {
            ObjectClass::Pedestrian => PEDESTRIAN_LWH,
            _ => VEHICLE_LWH,
        };
        let dist = rng.gen_range(self.target_range_m.0..=self.target_range_m.1);
        let bearing = rng.gen_range(-50.0f64..50.0).to_radians();
        let yaw = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        world.grounded_box(dist * bearing.cos(), dist * bearing.sin(), lwh, yaw, class)
    }

    fn clutter_box(&self, world: &World, rng: &mut ChaCha8Rng) -> Box3D {
        let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let x = rng.gen_range(-60.0..60.0);
        match rng.gen_range(0..10) {
            0 | 1 => {
                let lwh = [rng.gen_range(8.0..30.0), rng.gen_range(4.0..10.0), rng.gen_range(4.0..15.0)];
                world.grounded_box(x, side * rng.gen_range(12.0..20.0), lwh, rng.gen_range(-0.05..0.05), ObjectClass::Other)
            }
            2..=4 => world.grounded_box(x, side * rng.gen_range(4.0..6.5), VEHICLE_LWH, rng.gen_range(-0.2..0.2), ObjectClass::Vehicle),
            5 => world.grounded_box(x, side * rng.gen_range(1.0..2.5), VEHICLE_LWH, rng.gen_range(-0.05..0.05), ObjectClass::Vehicle),
            6 | 7 => world.grounded_box(
                x,
                side * rng.gen_range(6.0..10.0),
                PEDESTRIAN_LWH,
                rng.gen_range(-3.1..3.1),
                ObjectClass::Pedestrian,
            ),
            _ => world.grounded_box(x, side * rng.gen_range(5.0..9.0), [0.3, 0.3, 4.0], 0.0, ObjectClass::Other),
        }
    }

    fn footprint_radius(b: &Box3D) -> f64 {
        b.l.hypot(b.w) / 2.0
    }

    fn clashes(a: &Box3D, b: &Box3D) -> bool {
        let d = (a.center[0] - b.center[0]).hypot(a.center[1] - b.center[1]);
        d < Self::footprint_radius(a) + Self::footprint_radius(b) + 0.3
    }

    /// Builds scene number `index` of the stream seeded by `seed`.
    pub fn generate(&self, seed: u64, index: u64, target: Option<ObjectClass>) -> SyntheticScene {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut world = World::default();
        let target_box = target.map(|class| self.target_box(&world, &mut rng, class));
        let target_view = target_box.and_then(|b| angular_extent(&b, [0.0; 3]).ok());

        if let Some(b) = target_box {
            world.objects.push(SceneObject::solid(b));
        }
        let mut placed = 0;
        let mut attempts = 0;
        while placed < self.clutter && attempts < self.clutter * 20 {
            attempts += 1;
            let b = self.clutter_box(&world, &mut rng);
            // keep clear of the ego vehicle
            if b.horizontal_distance() < Self::footprint_radius(&b) + 2.5 {
                continue;
            }
            if world.objects.iter().any(|o| Self::clashes(&o.bbox, &b)) {
                continue;
            }
            // nothing may stand between the sensor and the target
            if let (Some(t), Some(view)) = (target_box, target_view) {
                let occludes = angular_extent(&b, [0.0; 3]).map_or(true, |e| e.overlaps(&view))
                    && b.horizontal_distance() - Self::footprint_radius(&b) < t.horizontal_distance() + Self::footprint_radius(&t);
                if occludes {
                    continue;
                }
            }
            let dark = rng.gen_bool(self.dark_fraction);
            world.objects.push(SceneObject {
                bbox: b,
                reflectivity: if dark { 0.05 } else { rng.gen_range(0.2..0.9) },
                return_probability: if dark { 0.5 } else { 1.0 },
            });
            placed += 1;
        }
        let scan = raycast_scan(&world, &self.config, &self.raycast, &mut rng, index);
        SyntheticScene {
            world,
            target: target_box,
            scan,
        }
    }
}
