//! KITTI object-detection layout: `velodyne/*.bin` point clouds,
//! `label_2/*.txt` camera-frame labels and `calib/*.txt` matrices.

use std::path::{Path, PathBuf};

use nalgebra::{Matrix3x4, Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use super::{read_bytes, read_text};
use crate::error::{Error, FormatError, Position, Result};
use crate::perception::Calibration;
use crate::sensor_model::{Box3D, CloudPoint, ObjectClass, Scan, SensorConfig};

const RECORD_LEN: usize = 16;

/// Little-endian `f32` quadruples `x, y, z, reflectance`.
pub fn read_pointcloud_bin(bytes: &[u8], config: &SensorConfig, frame_id: u64) -> Result<Scan> {
    if !bytes.len().is_multiple_of(RECORD_LEN) {
        let whole = bytes.len() - bytes.len() % RECORD_LEN;
        return Err(FormatError::new(
            Position::Offset(whole),
            format!("{} trailing bytes after the last 16-byte record", bytes.len() - whole),
        )
        .into());
    }
    let mut points = Vec::with_capacity(bytes.len() / RECORD_LEN);
    for (k, rec) in bytes.chunks_exact(RECORD_LEN).enumerate() {
        let f = |i: usize| f32::from_le_bytes(rec[4 * i..4 * i + 4].try_into().expect("4 bytes")) as f64;
        let (x, y, z, r) = (f(0), f(1), f(2), f(3));
        if ![x, y, z, r].iter().all(|v| v.is_finite()) {
            return Err(FormatError::new(Position::Offset(k * RECORD_LEN), "non-finite value in point record").into());
        }
        let mut p = CloudPoint::from_xyz(x, y, z, r, 0, 0.0);
        p.channel = config.nearest_channel(p.elevation_deg());
        points.push(p);
    }
    Ok(Scan::new(points, config.id.clone(), frame_id))
}

pub fn write_pointcloud_bin(scan: &Scan) -> Vec<u8> {
    let mut out = Vec::with_capacity(scan.len() * RECORD_LEN);
    for p in &scan.points {
        for v in [p.x, p.y, p.z, p.intensity] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub class: String,
    pub truncation: f64,
    pub occlusion: i32,
    pub alpha: f64,
    /// left, top, right, bottom in pixels.
    pub bbox_2d: [f64; 4],
    /// h, w, l in metres.
    pub dimensions: [f64; 3],
    /// Bottom-center in the rectified camera frame.
    pub location: [f64; 3],
    pub rotation_y: f64,
}

impl LabelRecord {
    pub fn object_class(&self) -> Option<ObjectClass> {
        match self.class.as_str() {
            "Pedestrian" | "Person_sitting" => Some(ObjectClass::Pedestrian),
            "Car" | "Van" | "Truck" | "Tram" => Some(ObjectClass::Vehicle),
            "DontCare" => None,
            _ => Some(ObjectClass::Other),
        }
    }

    pub fn is_targetable(&self) -> bool {
        self.object_class().is_some()
    }
}

const LABEL_FIELDS: usize = 15;
const LABEL_NAMES: [&str; LABEL_FIELDS] = [
    "type", "truncated", "occluded", "alpha", "left", "top", "right", "bottom", "height", "width", "length", "x", "y",
    "z", "rotation_y",
];

pub fn read_labels(text: &str) -> Result<Vec<LabelRecord>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let pos = Position::Line(i + 1);
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != LABEL_FIELDS {
            return Err(FormatError::new(pos, format!("expected {LABEL_FIELDS} fields, found {}", fields.len())).into());
        }
        let num = |k: usize| -> Result<f64> {
            fields[k]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| FormatError::new(pos, format!("field `{}` is not a number: {:?}", LABEL_NAMES[k], fields[k])).into())
        };
        let occlusion = fields[2]
            .parse::<i32>()
            .map_err(|_| FormatError::new(pos, format!("field `occluded` is not an integer: {:?}", fields[2])))?;
        let rec = LabelRecord {
            class: fields[0].to_string(),
            truncation: num(1)?,
            occlusion,
            alpha: num(3)?,
            bbox_2d: [num(4)?, num(5)?, num(6)?, num(7)?],
            dimensions: [num(8)?, num(9)?, num(10)?],
            location: [num(11)?, num(12)?, num(13)?],
            rotation_y: num(14)?,
        };
        if rec.is_targetable() && !rec.dimensions.iter().all(|&d| d > 0.0) {
            return Err(FormatError::new(pos, "object dimensions must be positive").into());
        }
        out.push(rec);
    }
    Ok(out)
}

/// Parses `P2`, `R0_rect` and `Tr_velo_to_cam`; other keys are ignored.
pub fn read_calibration(text: &str) -> Result<Calibration> {
    let mut p2 = None;
    let mut r0 = None;
    let mut tr = None;
    let mut lines = 0;
    for (i, line) in text.lines().enumerate() {
        lines = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let pos = Position::Line(i + 1);
        let Some((key, rest)) = line.split_once(':') else {
            return Err(FormatError::new(pos, "expected `key: values`").into());
        };
        let values: Vec<f64> = rest
            .split_whitespace()
            .map(|v| v.parse::<f64>().ok().filter(|x| x.is_finite()))
            .collect::<Option<_>>()
            .ok_or_else(|| FormatError::new(pos, format!("non-numeric value in `{key}`")))?;
        let expect = |n: usize| -> Result<()> {
            if values.len() == n {
                Ok(())
            } else {
                Err(FormatError::new(pos, format!("`{key}` needs {n} values, found {}", values.len())).into())
            }
        };
        match key.trim() {
            "P2" => {
                expect(12)?;
                p2 = Some(Matrix3x4::from_row_slice(&values));
            }
            "R0_rect" => {
                expect(9)?;
                let mut m = Matrix4::identity();
                for r in 0..3 {
                    for c in 0..3 {
                        m[(r, c)] = values[3 * r + c];
                    }
                }
                r0 = Some(m);
            }
            "Tr_velo_to_cam" => {
                expect(12)?;
                let mut m = Matrix4::identity();
                for r in 0..3 {
                    for c in 0..4 {
                        m[(r, c)] = values[4 * r + c];
                    }
                }
                tr = Some(m);
            }
            _ => {}
        }
    }
    let missing = |name: &str| FormatError::new(Position::Line(lines + 1), format!("missing `{name}`"));
    Calibration::new(
        p2.ok_or_else(|| missing("P2"))?,
        r0.ok_or_else(|| missing("R0_rect"))?,
        tr.ok_or_else(|| missing("Tr_velo_to_cam"))?,
    )
}

fn transform(m: &Matrix4<f64>, p: [f64; 3], w: f64) -> [f64; 3] {
    let v = m * Vector4::new(p[0], p[1], p[2], w);
    [v.x, v.y, v.z]
}

/// Label box in the LiDAR frame. The heading follows the label's x axis
/// rotated by `rotation_y` about the camera's vertical.
pub fn label_to_lidar_box(rec: &LabelRecord, calib: &Calibration) -> Result<Box3D> {
    let class = rec
        .object_class()
        .ok_or_else(|| Error::InvalidConfig(format!("`{}` labels are not targetable", rec.class)))?;
    let to_lidar = calib.rect_to_lidar();
    let [h, w, l] = rec.dimensions;
    let bottom = transform(&to_lidar, rec.location, 1.0);
    let heading = transform(&to_lidar, [rec.rotation_y.cos(), 0.0, -rec.rotation_y.sin()], 0.0);
    Box3D::new(
        [bottom[0], bottom[1], bottom[2] + h / 2.0],
        [l, w, h],
        heading[1].atan2(heading[0]),
        class,
    )
}

/// Inverse of [`label_to_lidar_box`] for the geometric fields.
pub fn lidar_box_to_label(b: &Box3D, class: &str, calib: &Calibration) -> LabelRecord {
    let to_rect = calib.lidar_to_rect();
    let location = transform(&to_rect, [b.center[0], b.center[1], b.center[2] - b.h / 2.0], 1.0);
    let heading = transform(&to_rect, [b.yaw.cos(), b.yaw.sin(), 0.0], 0.0);
    LabelRecord {
        class: class.to_string(),
        truncation: 0.0,
        occlusion: 0,
        alpha: 0.0,
        bbox_2d: [0.0; 4],
        dimensions: [b.h, b.w, b.l],
        location,
        rotation_y: (-heading[2]).atan2(heading[0]),
    }
}

/// A dataset directory in the KITTI object layout.
#[derive(Debug, Clone)]
pub struct KittiDataset {
    pub root: PathBuf,
}

impl KittiDataset {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    fn path(&self, dir: &str, id: &str, ext: &str) -> PathBuf {
        self.root.join(dir).join(format!("{id}.{ext}"))
    }

    /// Sample ids with a point cloud, sorted.
    pub fn sample_ids(&self) -> Result<Vec<String>> {
        let dir = self.root.join("velodyne");
        let entries = std::fs::read_dir(&dir).map_err(|e| Error::file(&dir, e))?;
        let mut ids: Vec<String> = entries
            .filter_map(|e| e.ok())
            .filter_map(|e| {
                let p = e.path();
                (p.extension().and_then(|x| x.to_str()) == Some("bin"))
                    .then(|| p.file_stem().and_then(|s| s.to_str()).map(str::to_string))
                    .flatten()
            })
            .collect();
        ids.sort();
        Ok(ids)
    }

    pub fn scan(&self, id: &str, config: &SensorConfig) -> Result<Scan> {
        let path = self.path("velodyne", id, "bin");
        let frame = id.parse::<u64>().unwrap_or(0);
        read_pointcloud_bin(&read_bytes(&path)?, config, frame).map_err(|e| with_path(&path, e))
    }

    pub fn labels(&self, id: &str) -> Result<Vec<LabelRecord>> {
        let path = self.path("label_2", id, "txt");
        read_labels(&read_text(&path)?).map_err(|e| with_path(&path, e))
    }

    pub fn calibration(&self, id: &str) -> Result<Calibration> {
        let path = self.path("calib", id, "txt");
        read_calibration(&read_text(&path)?).map_err(|e| with_path(&path, e))
    }
}

fn with_path(path: &Path, e: Error) -> Error {
    match e {
        Error::Format(f) => Error::InvalidConfig(format!("{}: {f}", path.display())),
        other => other,
    }
}
