//! Straight-road approach to a static obstacle while a removal attack hides
//! it: the AV follows a speed plan that stops short of whatever it sees and
//! speeds up toward its cruise speed when the road looks clear.
//!
//! The route runs along +x from the origin at y = 0; the AV is a point at
//! its sensor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{PEDESTRIAN_LWH, SENSOR_HEIGHT_M, VEHICLE_LWH};
use crate::sensor_model::{angular_extent, azimuth_of, AzimuthInterval, Box3D, ObjectClass};

/// 32 km/h.
pub const DEFAULT_V_MAX_MPS: f64 = 8.889;
/// Distance at which the unhindered AV reaches cruise speed.
pub const CRUISE_REACHED_AT_M: f64 = 46.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub v_max_mps: f64,
    pub accel_mps2: f64,
    pub decel_mps2: f64,
    /// Planned standstill gap in front of a perceived obstacle.
    pub stop_margin_m: f64,
    /// Route position of the obstacle's reference point.
    pub obstacle_distance_m: f64,
    /// AV-to-obstacle gap at which the spoofer switches on.
    pub attack_start_distance_m: f64,
    pub attack_angle_deg: f64,
    /// Spoofer location in world coordinates.
    pub spoofer_position: [f64; 2],
    /// Obstacle box relative to its route point: `center[0]` is an
    /// along-route offset, `center[1]` the lateral position.
    pub obstacle: Box3D,
}

fn obstacle_box(class: ObjectClass, lateral_m: f64) -> Box3D {
    let [l, w, h] = match class {
        ObjectClass::Vehicle => VEHICLE_LWH,
        _ => PEDESTRIAN_LWH,
    };
    Box3D {
        center: [0.0, lateral_m, h / 2.0 - SENSOR_HEIGHT_M],
        l,
        w,
        h,
        yaw: 0.0,
        class,
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::new(ObjectClass::Pedestrian, 0.0, 30.0, 10.0)
    }
}

impl ScenarioConfig {
    /// Obstacle 70 m ahead at `lateral_m`, spoofer 10 m behind it on the
    /// same line.
    pub fn new(class: ObjectClass, lateral_m: f64, attack_start_distance_m: f64, attack_angle_deg: f64) -> Self {
        let obstacle_distance_m = 70.0;
        Self {
            v_max_mps: DEFAULT_V_MAX_MPS,
            accel_mps2: DEFAULT_V_MAX_MPS * DEFAULT_V_MAX_MPS / (2.0 * CRUISE_REACHED_AT_M),
            decel_mps2: 3.0,
            stop_margin_m: 10.0,
            obstacle_distance_m,
            attack_start_distance_m,
            attack_angle_deg,
            spoofer_position: [obstacle_distance_m + 10.0, lateral_m],
            obstacle: obstacle_box(class, lateral_m),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("v_max_mps", self.v_max_mps),
            ("accel_mps2", self.accel_mps2),
            ("decel_mps2", self.decel_mps2),
            ("obstacle_distance_m", self.obstacle_distance_m),
            ("attack_start_distance_m", self.attack_start_distance_m),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.stop_margin_m.is_finite() && self.stop_margin_m >= 0.0) {
            return Err(Error::InvalidConfig("stop_margin_m must be non-negative".into()));
        }
        if !(self.attack_angle_deg.is_finite() && (0.0..=360.0).contains(&self.attack_angle_deg)) {
            return Err(Error::InvalidConfig(format!(
                "attack_angle_deg must lie in [0, 360], got {}",
                self.attack_angle_deg
            )));
        }
        if self.attack_start_distance_m > self.obstacle_distance_m {
            return Err(Error::InvalidConfig(
                "attack_start_distance_m exceeds obstacle_distance_m".into(),
            ));
        }
        if !(self.obstacle.l > 0.0 && self.obstacle.w > 0.0 && self.obstacle.h > 0.0) {
            return Err(Error::InvalidConfig("obstacle dimensions must be positive".into()));
        }
        if self.near_face_x() <= self.stop_margin_m {
            return Err(Error::InvalidConfig("obstacle sits inside the stop margin at the start".into()));
        }
        Ok(())
    }

    pub fn obstacle_world(&self) -> Box3D {
        let mut b = self.obstacle;
        b.center[0] += self.obstacle_distance_m;
        b
    }

    /// Route position where the AV would touch the obstacle.
    pub fn near_face_x(&self) -> f64 {
        let b = self.obstacle_world();
        b.footprint().iter().map(|c| c[0]).fold(f64::INFINITY, f64::min)
    }

    fn sector_from(&self, x: f64) -> AzimuthInterval {
        let center = azimuth_of(self.spoofer_position[0] - x, self.spoofer_position[1]);
        AzimuthInterval::centered(center, self.attack_angle_deg)
    }

    /// Whether the attack sector, seen from route position `x`, covers the
    /// obstacle's whole extent.
    pub fn hidden_from(&self, x: f64) -> bool {
        if self.attack_angle_deg <= 0.0 {
            return false;
        }
        match angular_extent(&self.obstacle_world(), [x, 0.0, 0.0]) {
            Ok(extent) => self.sector_from(x).covers_interval(&extent),
            Err(_) => false,
        }
    }
}

/// True when an AV at `v_mps`, braking at `decel_mps2` from `d_m` away,
/// cannot stop in time.
pub fn collision_verdict(v_mps: f64, d_m: f64, decel_mps2: f64) -> bool {
    if v_mps <= 0.0 {
        return false;
    }
    if decel_mps2 <= 0.0 {
        return true;
    }
    d_m < v_mps * v_mps / (2.0 * decel_mps2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub position_m: f64,
    pub speed_mps: f64,
    pub obstacle_perceived: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Outcome {
    Stopped { position_m: f64 },
    Collision { speed_at_impact_mps: f64 },
}

/// AV state the first time the obstacle is seen again after being hidden.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reappearance {
    pub t: f64,
    pub speed_mps: f64,
    pub gap_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timeline {
    pub samples: Vec<Sample>,
    pub outcome: Outcome,
    /// The last time the obstacle came back into view; a wide sector can
    /// hide it more than once on approach.
    pub reappearance: Option<Reappearance>,
    /// Position and speed when the final braking phase began.
    pub braking_start: Option<(f64, f64)>,
    /// Time with the obstacle hidden, summed over steps.
    pub hidden_time_s: f64,
}

impl Timeline {
    pub fn route_time_s(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    pub fn is_collision(&self) -> bool {
        matches!(self.outcome, Outcome::Collision { .. })
    }
}

/// Exact constant-acceleration step with speed clamped to `[0, v_max]`.
fn advance(x: f64, v: f64, a: f64, dt: f64, v_max: f64) -> (f64, f64) {
    if a > 0.0 {
        let t_cap = (v_max - v).max(0.0) / a;
        if t_cap >= dt {
            (x + v * dt + 0.5 * a * dt * dt, v + a * dt)
        } else {
            (x + v * t_cap + 0.5 * a * t_cap * t_cap + v_max * (dt - t_cap), v_max)
        }
    } else if a < 0.0 {
        let t_stop = v / -a;
        if t_stop <= dt {
            (x + v * v / (-2.0 * a), 0.0)
        } else {
            (x + v * dt + 0.5 * a * dt * dt, v + a * dt)
        }
    } else {
        (x + v * dt, v)
    }
}

const MAX_ROUTE_TIME_S: f64 = 3600.0;

pub fn simulate(cfg: &ScenarioConfig, dt_s: f64) -> Result<Timeline> {
    cfg.validate()?;
    if !(dt_s.is_finite() && dt_s > 0.0) {
        return Err(Error::InvalidConfig(format!("dt must be positive, got {dt_s}")));
    }
    let near = cfg.near_face_x();
    let stop_x = near - cfg.stop_margin_m;
    let (mut t, mut x, mut v) = (0.0f64, 0.0f64, 0.0f64);
    let mut attack_on = false;
    let mut was_hidden = false;
    let mut braking = false;
    let mut samples = Vec::new();
    let mut reappearance = None;
    let mut braking_start = None;
    let mut hidden_time_s = 0.0;

    loop {
        if !attack_on && cfg.attack_angle_deg > 0.0 && near - x <= cfg.attack_start_distance_m {
            attack_on = true;
        }
        let perceived = !(attack_on && cfg.hidden_from(x));
        samples.push(Sample {
            t,
            position_m: x,
            speed_mps: v,
            obstacle_perceived: perceived,
        });
        if perceived && was_hidden {
            reappearance = Some(Reappearance {
                t,
                speed_mps: v,
                gap_m: near - x,
            });
        }
        was_hidden = !perceived;
        if t > 0.0 && v == 0.0 && braking {
            return Ok(Timeline {
                samples,
                outcome: Outcome::Stopped { position_m: x },
                reappearance,
                braking_start,
                hidden_time_s,
            });
        }
        if t > MAX_ROUTE_TIME_S {
            return Err(Error::InvalidConfig("route did not terminate".into()));
        }

        let a = if !perceived {
            braking = false;
            braking_start = None;
            cfg.accel_mps2
        } else {
            if !braking {
                // brake now if one more step of speeding up would overrun the stop point
                let (x1, v1) = advance(x, v, cfg.accel_mps2, dt_s, cfg.v_max_mps);
                if x1 + v1 * v1 / (2.0 * cfg.decel_mps2) >= stop_x || x >= stop_x {
                    braking = true;
                    braking_start = Some((x, v));
                }
            }
            if braking {
                -cfg.decel_mps2
            } else {
                cfg.accel_mps2
            }
        };
        let (x1, v1) = advance(x, v, a, dt_s, cfg.v_max_mps);
        if !perceived {
            hidden_time_s += dt_s;
        }
        if x1 >= near {
            // contact inside this step
            let impact = (v * v + 2.0 * a * (near - x)).max(0.0).sqrt().min(cfg.v_max_mps);
            let dt_hit = if impact + v > 0.0 { 2.0 * (near - x) / (impact + v) } else { dt_s };
            samples.push(Sample {
                t: t + dt_hit.min(dt_s),
                position_m: near,
                speed_mps: impact,
                obstacle_perceived: perceived,
            });
            return Ok(Timeline {
                samples,
                outcome: Outcome::Collision {
                    speed_at_impact_mps: impact,
                },
                reappearance,
                braking_start,
                hidden_time_s,
            });
        }
        t += dt_s;
        x = x1;
        v = v1;
    }
}

/// Share of the attacked run's route time during which the obstacle is
/// hidden.
pub fn removal_window(cfg: &ScenarioConfig) -> Result<f64> {
    let timeline = simulate(cfg, 0.01)?;
    let total = timeline.route_time_s();
    Ok(if total > 0.0 {
        (timeline.hidden_time_s / total).clamp(0.0, 1.0)
    } else {
        0.0
    })
}
