//! Non-learned stand-ins for the perception stack: euclidean clustering as
//! the detection signal, and the camera/LiDAR overlap check used by
//! semantic fusion.

use std::collections::HashMap;

use nalgebra::{Matrix3x4, Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sensor_model::{Box3D, Scan};

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    /// Ascending indices into the clustered scan.
    pub point_ids: Vec<usize>,
    pub centroid: [f64; 3],
    pub aabb_min: [f64; 3],
    pub aabb_max: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub tolerance_m: f64,
    pub min_points: usize,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self {
            tolerance_m: 0.5,
            min_points: 5,
        }
    }
}

type Cell = (i64, i64, i64);

fn cell_of(p: [f64; 3], size: f64) -> Cell {
    (
        (p[0] / size).floor() as i64,
        (p[1] / size).floor() as i64,
        (p[2] / size).floor() as i64,
    )
}

/// Connected components under a radius graph; components smaller than
/// `min_points` are dropped. Clusters come out ordered by their smallest
/// point id.
pub fn euclidean_cluster(scan: &Scan, params: ClusterParams) -> Vec<Cluster> {
    let n = scan.len();
    if n == 0 || !(params.tolerance_m > 0.0) {
        return Vec::new();
    }
    let tol = params.tolerance_m;
    let tol2 = tol * tol;
    let xyz: Vec<[f64; 3]> = scan.points.iter().map(|p| [p.x, p.y, p.z]).collect();
    let mut grid: HashMap<Cell, Vec<usize>> = HashMap::new();
    for (i, &p) in xyz.iter().enumerate() {
        grid.entry(cell_of(p, tol)).or_default().push(i);
    }

    let mut visited = vec![false; n];
    let mut clusters = Vec::new();
    let mut stack = Vec::new();
    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        visited[seed] = true;
        stack.push(seed);
        let mut members = Vec::new();
        while let Some(i) = stack.pop() {
            members.push(i);
            let (cx, cy, cz) = cell_of(xyz[i], tol);
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        let Some(bucket) = grid.get(&(cx + dx, cy + dy, cz + dz)) else {
                            continue;
                        };
                        for &j in bucket {
                            if visited[j] {
                                continue;
                            }
                            let d2 = (0..3).map(|k| (xyz[i][k] - xyz[j][k]).powi(2)).sum::<f64>();
                            if d2 <= tol2 {
                                visited[j] = true;
                                stack.push(j);
                            }
                        }
                    }
                }
            }
        }
        if members.len() >= params.min_points {
            members.sort_unstable();
            clusters.push(build_cluster(members, &xyz));
        }
    }
    clusters
}

fn build_cluster(point_ids: Vec<usize>, xyz: &[[f64; 3]]) -> Cluster {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    let mut sum = [0.0; 3];
    for &i in &point_ids {
        for k in 0..3 {
            lo[k] = lo[k].min(xyz[i][k]);
            hi[k] = hi[k].max(xyz[i][k]);
            sum[k] += xyz[i][k];
        }
    }
    let n = point_ids.len() as f64;
    Cluster {
        point_ids,
        centroid: sum.map(|s| s / n),
        aabb_min: lo,
        aabb_max: hi,
    }
}

/// Image-space box in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box2D {
    pub left: f64,
    pub top: f64,
    pub right: f64,
    pub bottom: f64,
}

impl Box2D {
    pub fn new(left: f64, top: f64, right: f64, bottom: f64) -> Result<Self> {
        if !(left < right && top < bottom) {
            return Err(Error::InvalidConfig(format!(
                "degenerate 2D box ({left}, {top}, {right}, {bottom})"
            )));
        }
        Ok(Self { left, top, right, bottom })
    }

    pub fn area(&self) -> f64 {
        (self.right - self.left) * (self.bottom - self.top)
    }

    pub fn intersection(&self, other: &Box2D) -> f64 {
        let w = self.right.min(other.right) - self.left.max(other.left);
        let h = self.bottom.min(other.bottom) - self.top.max(other.top);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    pub fn iou(&self, other: &Box2D) -> f64 {
        let inter = self.intersection(other);
        inter / (self.area() + other.area() - inter)
    }

    /// Intersection over the smaller of the two areas.
    pub fn over_min(&self, other: &Box2D) -> f64 {
        self.intersection(other) / self.area().min(other.area())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapMeasure {
    Iou,
    OverMin,
}

pub fn fusion_check(lidar_box: &Box2D, camera_box: &Box2D, overlap_threshold: f64, mode: OverlapMeasure) -> bool {
    let overlap = match mode {
        OverlapMeasure::Iou => lidar_box.iou(camera_box),
        OverlapMeasure::OverMin => lidar_box.over_min(camera_box),
    };
    overlap >= overlap_threshold
}

/// Camera calibration in the usual dataset layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    /// Rectified camera → image.
    pub projection: Matrix3x4<f64>,
    /// Rectification, padded to 4×4.
    pub rectification: Matrix4<f64>,
    /// LiDAR → camera, padded to 4×4.
    pub lidar_to_camera: Matrix4<f64>,
}

impl Calibration {
    pub fn new(projection: Matrix3x4<f64>, rectification: Matrix4<f64>, lidar_to_camera: Matrix4<f64>) -> Result<Self> {
        let all_finite = projection.iter().chain(rectification.iter()).chain(lidar_to_camera.iter()).all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidConfig("calibration contains non-finite values".into()));
        }
        if lidar_to_camera.try_inverse().is_none() || rectification.try_inverse().is_none() {
            return Err(Error::InvalidConfig("calibration transform is not invertible".into()));
        }
        Ok(Self {
            projection,
            rectification,
            lidar_to_camera,
        })
    }

    pub fn identity() -> Self {
        Self {
            projection: Matrix3x4::identity(),
            rectification: Matrix4::identity(),
            lidar_to_camera: Matrix4::identity(),
        }
    }

    /// LiDAR frame → rectified camera frame.
    pub fn lidar_to_rect(&self) -> Matrix4<f64> {
        self.rectification * self.lidar_to_camera
    }

    /// Rectified camera frame → LiDAR frame.
    pub fn rect_to_lidar(&self) -> Matrix4<f64> {
        self.lidar_to_rect().try_inverse().expect("validated invertible")
    }
}

pub fn project_to_image(target: &Box3D, calib: &Calibration) -> Result<Box2D> {
    let to_rect = calib.lidar_to_rect();
    let mut left = f64::INFINITY;
    let mut right = f64::NEG_INFINITY;
    let mut top = f64::INFINITY;
    let mut bottom = f64::NEG_INFINITY;
    for [x, y, z] in target.corners() {
        let cam = to_rect * Vector4::new(x, y, z, 1.0);
        if !(cam.z > 0.0) {
            return Err(Error::BehindCamera);
        }
        let img = calib.projection * cam;
        let (u, v) = (img.x / img.z, img.y / img.z);
        left = left.min(u);
        right = right.max(u);
        top = top.min(v);
        bottom = bottom.max(v);
    }
    Box2D::new(left, top, right, bottom)
}
