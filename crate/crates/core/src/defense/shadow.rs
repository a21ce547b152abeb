//! Fake shadow detection: ground that the sensor should have seen but did
//! not, which no detected object accounts for.
//!
//! The ground plane is discretized into square cells. A cell is shadow when
//! no return falls into it and it lies behind the nearest above-ground
//! return of its azimuth bin, up to the first ground return beyond that
//! occluder. A bin without any return is occluded from the typical first
//! ground ring outward; removal attacks leave exactly such bins.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::{DetectionVerdict, Detector, Evidence, Method};
use crate::error::{Error, Result};
use crate::perception::{euclidean_cluster, Cluster, ClusterParams};
use crate::scene::SENSOR_HEIGHT_M;
use crate::sensor_model::{azimuth_of, smallest_arc, AzimuthInterval, Scan};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShadowParams {
    pub ground_z_m: f64,
    /// Returns up to this far above the ground plane count as ground.
    pub ground_tolerance_m: f64,
    pub cell_m: f64,
    pub max_range_m: f64,
    pub height_band_m: f64,
    pub azimuth_bin_deg: f64,
}

impl Default for ShadowParams {
    fn default() -> Self {
        Self {
            ground_z_m: -SENSOR_HEIGHT_M,
            ground_tolerance_m: 0.25,
            cell_m: 0.2,
            max_range_m: 70.0,
            height_band_m: 2.0,
            azimuth_bin_deg: 0.5,
        }
    }
}

impl ShadowParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("ground_tolerance_m", self.ground_tolerance_m),
            ("cell_m", self.cell_m),
            ("max_range_m", self.max_range_m),
            ("height_band_m", self.height_band_m),
            ("azimuth_bin_deg", self.azimuth_bin_deg),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.ground_z_m.is_finite() {
            return Err(Error::InvalidConfig("ground_z_m must be finite".into()));
        }
        if self.azimuth_bin_deg > 360.0 {
            return Err(Error::InvalidConfig("azimuth_bin_deg exceeds a full turn".into()));
        }
        Ok(())
    }

    pub fn cell_volume_m3(&self) -> f64 {
        self.cell_m * self.cell_m * self.height_band_m
    }

    fn is_ground(&self, z: f64) -> bool {
        z <= self.ground_z_m + self.ground_tolerance_m
    }

    fn bins(&self) -> usize {
        (360.0 / self.azimuth_bin_deg).ceil() as usize
    }

    fn bin_of(&self, azimuth_deg: f64) -> usize {
        ((azimuth_deg / self.azimuth_bin_deg) as usize).min(self.bins() - 1)
    }

    fn half_cells(&self) -> i64 {
        (self.max_range_m / self.cell_m).ceil() as i64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShadowRegion {
    /// Ground cells as `(ix, iy)`; cell `(ix, iy)` spans
    /// `[ix·cell, (ix+1)·cell) × [iy·cell, (iy+1)·cell)`.
    pub cells: Vec<(i64, i64)>,
    pub volume_m3: f64,
    pub associated_cluster: Option<usize>,
    /// Azimuths of the cell centers.
    pub arc: AzimuthInterval,
    /// Smallest horizontal range of a cell center.
    pub near_range_m: f64,
}

fn cell_center(ix: i64, iy: i64, cell: f64) -> (f64, f64) {
    ((ix as f64 + 0.5) * cell, (iy as f64 + 0.5) * cell)
}

/// Dense boolean grid over `[-max_range, max_range)²`.
struct Grid {
    half: i64,
    side: usize,
    cells: Vec<bool>,
}

impl Grid {
    fn new(half: i64) -> Self {
        let side = (2 * half) as usize;
        Self {
            half,
            side,
            cells: vec![false; side * side],
        }
    }

    fn index(&self, ix: i64, iy: i64) -> Option<usize> {
        let (u, v) = (ix + self.half, iy + self.half);
        if u < 0 || v < 0 || u >= self.side as i64 || v >= self.side as i64 {
            return None;
        }
        Some(v as usize * self.side + u as usize)
    }

    fn get(&self, ix: i64, iy: i64) -> bool {
        self.index(ix, iy).is_some_and(|i| self.cells[i])
    }

    fn set(&mut self, ix: i64, iy: i64, value: bool) {
        if let Some(i) = self.index(ix, iy) {
            self.cells[i] = value;
        }
    }
}

/// Unoccupied ground cells behind occluders, before grouping.
fn shadow_grid(scan: &Scan, params: &ShadowParams) -> Result<Grid> {
    params.validate()?;
    let bins = params.bins();
    let mut occluder = vec![f64::INFINITY; bins];
    let mut ground_start = vec![f64::INFINITY; bins];
    let mut seen = vec![false; bins];
    let mut occupied = Grid::new(params.half_cells());
    let mut above = Grid::new(params.half_cells());
    let mut any_ground = false;

    for p in &scan.points {
        let r = p.horizontal_range();
        if r > params.max_range_m || r == 0.0 {
            continue;
        }
        let b = params.bin_of(p.azimuth_deg);
        seen[b] = true;
        let (ix, iy) = ((p.x / params.cell_m).floor() as i64, (p.y / params.cell_m).floor() as i64);
        occupied.set(ix, iy, true);
        if params.is_ground(p.z) {
            any_ground = true;
            ground_start[b] = ground_start[b].min(r);
        } else {
            occluder[b] = occluder[b].min(r);
            above.set(ix, iy, true);
        }
    }
    if !any_ground {
        return Err(Error::InsufficientData("no ground returns within range".into()));
    }

    // first ground return beyond each occluder closes its shadow; returns
    // within a cell of the occluder, or next to anything above ground, are
    // the base of an object (a side seen at a grazing angle has a long one)
    let mut shadow_end = vec![params.max_range_m; bins];
    for p in &scan.points {
        let r = p.horizontal_range();
        if r > params.max_range_m || !params.is_ground(p.z) {
            continue;
        }
        let (ix, iy) = ((p.x / params.cell_m).floor() as i64, (p.y / params.cell_m).floor() as i64);
        let base = (-1..=1).any(|dx| (-1..=1).any(|dy| above.get(ix + dx, iy + dy)));
        let b = params.bin_of(p.azimuth_deg);
        if !base && r > occluder[b] + params.cell_m && r < shadow_end[b] {
            shadow_end[b] = r;
        }
    }

    let mut starts: Vec<f64> = ground_start.iter().copied().filter(|r| r.is_finite()).collect();
    starts.sort_by(f64::total_cmp);
    let typical_start = starts[starts.len() / 2];

    let intervals: Vec<Option<(f64, f64)>> = (0..bins)
        .map(|b| {
            if occluder[b].is_finite() {
                Some((occluder[b], shadow_end[b]))
            } else if !seen[b] {
                Some((typical_start, params.max_range_m))
            } else {
                None
            }
        })
        .collect();

    let half = params.half_cells();
    let mut shadow = Grid::new(half);
    for iy in -half..half {
        for ix in -half..half {
            let (x, y) = cell_center(ix, iy, params.cell_m);
            let r = x.hypot(y);
            if r > params.max_range_m {
                continue;
            }
            let Some((lo, hi)) = intervals[params.bin_of(azimuth_of(x, y))] else {
                continue;
            };
            if r > lo && r < hi && !occupied.get(ix, iy) {
                shadow.set(ix, iy, true);
            }
        }
    }
    Ok(shadow)
}

fn regions_from_grid(grid: &Grid, params: &ShadowParams) -> Vec<ShadowRegion> {
    let mut visited = vec![false; grid.cells.len()];
    let mut regions = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..grid.cells.len() {
        if !grid.cells[start] || visited[start] {
            continue;
        }
        visited[start] = true;
        queue.push_back(start);
        let mut cells = Vec::new();
        while let Some(i) = queue.pop_front() {
            let ix = (i % grid.side) as i64 - grid.half;
            let iy = (i / grid.side) as i64 - grid.half;
            cells.push((ix, iy));
            for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                if let Some(j) = grid.index(ix + dx, iy + dy) {
                    if grid.cells[j] && !visited[j] {
                        visited[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        cells.sort_unstable_by_key(|&(ix, iy)| (iy, ix));
        let centers: Vec<(f64, f64)> = cells.iter().map(|&(ix, iy)| cell_center(ix, iy, params.cell_m)).collect();
        let azimuths: Vec<f64> = centers.iter().map(|&(x, y)| azimuth_of(x, y)).collect();
        let near = centers.iter().map(|&(x, y)| x.hypot(y)).fold(f64::INFINITY, f64::min);
        regions.push(ShadowRegion {
            volume_m3: cells.len() as f64 * params.cell_volume_m3(),
            cells,
            associated_cluster: None,
            arc: smallest_arc(&azimuths).expect("region has cells"),
            near_range_m: near,
        });
    }
    regions
}

/// Connected (4-neighbour) shadow regions of the scan.
pub fn shadow_regions(scan: &Scan, params: &ShadowParams) -> Result<Vec<ShadowRegion>> {
    let grid = shadow_grid(scan, params)?;
    Ok(regions_from_grid(&grid, params))
}

/// Above-ground returns within range, as a scan of their own plus the
/// original indices.
pub fn obstacle_points(scan: &Scan, params: &ShadowParams) -> (Scan, Vec<usize>) {
    let ids: Vec<usize> = (0..scan.len())
        .filter(|&i| {
            let p = &scan.points[i];
            !params.is_ground(p.z) && p.horizontal_range() <= params.max_range_m
        })
        .collect();
    let points = ids.iter().map(|&i| scan.points[i]).collect();
    (scan.with_points(points), ids)
}

/// Azimuth extent and nearest horizontal range of a cluster.
fn cluster_view(scan: &Scan, cluster: &Cluster) -> (AzimuthInterval, f64) {
    let azimuths: Vec<f64> = cluster.point_ids.iter().map(|&i| scan.points[i].azimuth_deg).collect();
    let near = cluster
        .point_ids
        .iter()
        .map(|&i| scan.points[i].horizontal_range())
        .fold(f64::INFINITY, f64::min);
    (smallest_arc(&azimuths).unwrap_or_else(AzimuthInterval::empty), near)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Association {
    /// Region index per cluster.
    pub cluster_to_region: Vec<Option<usize>>,
    /// Matched clusters over clusters; `None` without clusters.
    pub rate: Option<f64>,
}

/// Farthest cell of `region` per azimuth bin.
fn far_edges(region: &ShadowRegion, params: &ShadowParams) -> HashMap<usize, f64> {
    let mut edge = HashMap::new();
    for &(ix, iy) in &region.cells {
        let (x, y) = cell_center(ix, iy, params.cell_m);
        let r = x.hypot(y);
        edge.entry(params.bin_of(azimuth_of(x, y)))
            .and_modify(|e: &mut f64| *e = e.max(r))
            .or_insert(r);
    }
    edge
}

/// Azimuth bins holding at least one of the cluster's points.
fn cluster_bins(scan: &Scan, cluster: &Cluster, params: &ShadowParams) -> Vec<usize> {
    let mut bins: Vec<usize> = cluster.point_ids.iter().map(|&i| params.bin_of(scan.points[i].azimuth_deg)).collect();
    bins.sort_unstable();
    bins.dedup();
    bins
}

/// Matches each cluster of `scan` to the nearest shadow region reaching
/// behind it: some cell of the region shares an azimuth bin with the
/// cluster and lies farther out. This is the frustum test that also marks
/// shadow as explained. Comparing against a region's overall near edge
/// fails once neighbouring shadows merge.
pub fn object_shadow_associate(
    scan: &Scan,
    clusters: &[Cluster],
    shadows: &mut [ShadowRegion],
    params: &ShadowParams,
) -> Association {
    let edges: Vec<HashMap<usize, f64>> = shadows.iter().map(|s| far_edges(s, params)).collect();
    let mut cluster_to_region = Vec::with_capacity(clusters.len());
    for (c, cluster) in clusters.iter().enumerate() {
        let (_, near) = cluster_view(scan, cluster);
        let bins = cluster_bins(scan, cluster, params);
        let best = shadows
            .iter()
            .enumerate()
            .filter(|(i, _)| bins.iter().any(|b| edges[*i].get(b).is_some_and(|&far| far > near)))
            .min_by(|a, b| a.1.near_range_m.total_cmp(&b.1.near_range_m))
            .map(|(i, _)| i);
        if let Some(i) = best {
            shadows[i].associated_cluster.get_or_insert(c);
        }
        cluster_to_region.push(best);
    }
    let rate = (!clusters.is_empty())
        .then(|| cluster_to_region.iter().filter(|m| m.is_some()).count() as f64 / clusters.len() as f64);
    Association { cluster_to_region, rate }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShadowReport {
    pub region_count: usize,
    pub cluster_count: usize,
    pub shadow_volume_m3: f64,
    /// Shadow volume outside every cluster's frustum.
    pub residual_volume_m3: f64,
    pub volume_threshold_m3: f64,
    pub association_rate: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FakeShadowDetector {
    pub shadow: ShadowParams,
    pub cluster: ClusterParams,
    pub volume_threshold_m3: f64,
}

impl Default for FakeShadowDetector {
    fn default() -> Self {
        Self {
            shadow: ShadowParams::default(),
            cluster: ClusterParams::default(),
            volume_threshold_m3: 15.0,
        }
    }
}

impl FakeShadowDetector {
    pub fn report(&self, scan: &Scan) -> Result<ShadowReport> {
        let params = &self.shadow;
        let grid = shadow_grid(scan, params)?;
        let mut regions = regions_from_grid(&grid, params);

        let (obstacles, _) = obstacle_points(scan, params);
        let clusters = euclidean_cluster(&obstacles, self.cluster);
        let association = object_shadow_associate(&obstacles, &clusters, &mut regions, params);

        // each cluster explains the ground behind it in the bins its points
        // fall into plus one bin either side; `explained_from[b]` is the
        // nearest such range per bin
        let bins = params.bins();
        let mut explained_from = vec![f64::INFINITY; bins];
        for c in &clusters {
            let (_, near) = cluster_view(&obstacles, c);
            for b in cluster_bins(&obstacles, c, params) {
                for k in [b + bins - 1, b, b + 1] {
                    let e = &mut explained_from[k % bins];
                    *e = e.min(near - params.cell_m);
                }
            }
        }
        let mut shadow_cells = 0usize;
        let mut residual_cells = 0usize;
        for region in &regions {
            for &(ix, iy) in &region.cells {
                shadow_cells += 1;
                let (x, y) = cell_center(ix, iy, params.cell_m);
                if x.hypot(y) < explained_from[params.bin_of(azimuth_of(x, y))] {
                    residual_cells += 1;
                }
            }
        }
        Ok(ShadowReport {
            region_count: regions.len(),
            cluster_count: clusters.len(),
            shadow_volume_m3: shadow_cells as f64 * params.cell_volume_m3(),
            residual_volume_m3: residual_cells as f64 * params.cell_volume_m3(),
            volume_threshold_m3: self.volume_threshold_m3,
            association_rate: association.rate,
        })
    }
}

impl Detector for FakeShadowDetector {
    fn method(&self) -> Method {
        Method::Fsd
    }

    fn detect(&self, scan: &Scan) -> Result<DetectionVerdict> {
        let report = self.report(scan)?;
        Ok(DetectionVerdict {
            method: Method::Fsd,
            // strictly above the threshold
            is_attack: report.residual_volume_m3 > report.volume_threshold_m3,
            evidence: Evidence::Shadow(report),
        })
    }
}

pub fn fake_shadow_detect(scan: &Scan, volume_threshold_m3: f64) -> Result<DetectionVerdict> {
    FakeShadowDetector {
        volume_threshold_m3,
        ..Default::default()
    }
    .detect(scan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::{synthesize, AttackSpec, CapabilityModel, Receiver};
    use crate::scene::{raycast_scan, RaycastParams, SceneGenerator, World};
    use crate::sensor_model::{angular_extent, Box3D, CloudPoint, ObjectClass, SensorConfig};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scan_of(world: &World) -> Scan {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        raycast_scan(world, &SensorConfig::hdl64(), &RaycastParams::default(), &mut rng, 0)
    }

    fn block(world: &World, x: f64, y: f64) -> Box3D {
        world.grounded_box(x, y, [1.0, 2.0, 2.0], 0.0, ObjectClass::Other)
    }

    /// Independent oracle: walks rays from the sensor through the block's
    /// silhouette and reports whether a ground cell is hidden.
    fn hidden_by(b: &Box3D, x: f64, y: f64) -> bool {
        let r = x.hypot(y);
        let steps = (r / 0.05) as usize;
        (1..steps).any(|k| {
            let t = k as f64 / steps as f64;
            b.contains(t * x, t * y, b.center[2], 0.0)
        })
    }

    #[test]
    fn ground_only_has_no_shadow() {
        let regions = shadow_regions(&scan_of(&World::default()), &ShadowParams::default()).unwrap();
        assert!(regions.is_empty());
    }

    #[test]
    fn block_casts_one_shadow_behind_it() {
        let mut world = World::default();
        let b = block(&world, 10.0, 0.0);
        world.add(b);
        let params = ShadowParams::default();
        let regions = shadow_regions(&scan_of(&world), &params).unwrap();
        assert_eq!(regions.len(), 1);
        let region = &regions[0];
        let extent = angular_extent(&b, [0.0; 3]).unwrap();
        let padded = AzimuthInterval::new(extent.start_deg - params.azimuth_bin_deg, extent.width_deg + 2.0 * params.azimuth_bin_deg);
        assert!(padded.covers_interval(&region.arc));
        assert!(region.near_range_m >= 9.5);
        // most cells are geometrically hidden by the block
        let hidden = region
            .cells
            .iter()
            .filter(|&&(ix, iy)| {
                let (x, y) = cell_center(ix, iy, params.cell_m);
                hidden_by(&b, x, y)
            })
            .count();
        assert!(hidden as f64 >= 0.8 * region.cells.len() as f64, "{hidden} of {}", region.cells.len());
        assert!((region.volume_m3 - region.cells.len() as f64 * 0.08).abs() < 1e-9);
    }

    #[test]
    fn two_blocks_two_shadows() {
        let mut world = World::default();
        let a = block(&world, 10.0, 0.0);
        let b = block(&world, -12.0, 5.0);
        world.add(a).add(b);
        let regions = shadow_regions(&scan_of(&world), &ShadowParams::default()).unwrap();
        assert_eq!(regions.len(), 2);
        assert!(!regions[0].arc.overlaps(&regions[1].arc));
        let cells: std::collections::HashSet<_> = regions[0].cells.iter().collect();
        assert!(regions[1].cells.iter().all(|c| !cells.contains(c)));
    }

    #[test]
    fn no_ground_is_an_error() {
        let scan = Scan::new(vec![CloudPoint::from_xyz(10.0, 0.0, 0.5, 0.5, 0, 0.0)], "t", 0);
        assert!(matches!(
            shadow_regions(&scan, &ShadowParams::default()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn object_with_shadow_is_associated() {
        let mut world = World::default();
        world.add(block(&world, 10.0, 0.0));
        let scan = scan_of(&world);
        let params = ShadowParams::default();
        let mut regions = shadow_regions(&scan, &params).unwrap();
        let (obstacles, _) = obstacle_points(&scan, &params);
        let clusters = euclidean_cluster(&obstacles, ClusterParams::default());
        assert_eq!(clusters.len(), 1);
        let assoc = object_shadow_associate(&obstacles, &clusters, &mut regions, &params);
        assert_eq!(assoc.rate, Some(1.0));
        assert_eq!(regions[0].associated_cluster, Some(0));
    }

    #[test]
    fn object_behind_a_merged_shadow_is_associated() {
        let mut world = World::default();
        let (a, b) = (block(&world, 10.0, 0.0), block(&world, 20.0, 3.2));
        world.add(a).add(b);
        let scan = scan_of(&world);
        let params = ShadowParams::default();
        let mut regions = shadow_regions(&scan, &params).unwrap();
        // the two shadows touch, and the joint region reaches back to the near block
        assert_eq!(regions.len(), 1);
        assert!(regions[0].near_range_m < 10.0);
        let (obstacles, _) = obstacle_points(&scan, &params);
        let clusters = euclidean_cluster(&obstacles, ClusterParams::default());
        assert_eq!(clusters.len(), 2);
        let assoc = object_shadow_associate(&obstacles, &clusters, &mut regions, &params);
        assert_eq!(assoc.rate, Some(1.0));
    }

    #[test]
    fn object_at_max_range_is_unmatched() {
        let mut world = World::default();
        // near face at 69.95 m: no cell center lies between it and max range
        world.add(block(&world, 70.45, 0.0));
        let scan = scan_of(&world);
        let params = ShadowParams::default();
        let mut regions = shadow_regions(&scan, &params).unwrap();
        let (obstacles, _) = obstacle_points(&scan, &params);
        let clusters = euclidean_cluster(&obstacles, ClusterParams::default());
        // lower rings are over half a metre apart at this range, so the block may split
        assert!(!clusters.is_empty());
        let assoc = object_shadow_associate(&obstacles, &clusters, &mut regions, &params);
        assert_eq!(assoc.rate, Some(0.0));
    }

    fn vehicle_scene() -> (Scan, Box3D) {
        let mut world = World::default();
        let car = world.grounded_box(12.0, 3.0, crate::scene::VEHICLE_LWH, 0.3, ObjectClass::Vehicle);
        world.add(car);
        world.add(block(&world, -15.0, -4.0));
        (scan_of(&world), car)
    }

    #[test]
    fn explained_shadows_are_benign() {
        let (scan, _) = vehicle_scene();
        let verdict = fake_shadow_detect(&scan, 15.0).unwrap();
        assert!(verdict.is_consistent());
        assert!(!verdict.is_attack);
        let Evidence::Shadow(report) = verdict.evidence else { unreachable!() };
        assert!(report.shadow_volume_m3 > 15.0);
        assert!(report.residual_volume_m3 < 1.0);
    }

    /// Grid oracle for the emptied sector: cells whose center lies in the
    /// sector, between the first ground ring and max range.
    fn sector_volume(sector: &AzimuthInterval, near: f64, params: &ShadowParams) -> f64 {
        let half = params.half_cells();
        let mut n = 0usize;
        for iy in -half..half {
            for ix in -half..half {
                let (x, y) = cell_center(ix, iy, params.cell_m);
                let r = x.hypot(y);
                if r > near + 1.0 && r < params.max_range_m - 1.0 && sector.covers(azimuth_of(x, y)) {
                    n += 1;
                }
            }
        }
        n as f64 * params.cell_volume_m3()
    }

    #[test]
    fn removed_vehicle_sector_is_flagged() {
        let (scan, car) = vehicle_scene();
        let center = angular_extent(&car, [0.0; 3]).unwrap().center_deg();
        let spec = AttackSpec::ideal(center, 24.0);
        let cap = CapabilityModel::unlimited(&SensorConfig::hdl64());
        let (attacked, _) = synthesize(&scan, &spec, &Receiver::vlp16_apollo(), &cap, &[]).unwrap();
        let verdict = fake_shadow_detect(&attacked, 15.0).unwrap();
        assert!(verdict.is_attack);
        let Evidence::Shadow(report) = verdict.evidence else { unreachable!() };
        // the interior of the sector (one bin in from each edge) is all residual
        let params = ShadowParams::default();
        let inner = AzimuthInterval::centered(center, 24.0 - 2.0 * params.azimuth_bin_deg);
        let lower = sector_volume(&inner, 4.0, &params);
        assert!(lower > 10.0 * 15.0);
        assert!(report.residual_volume_m3 >= lower, "{} < {lower}", report.residual_volume_m3);
    }

    #[test]
    fn residual_at_threshold_is_benign() {
        let (scan, car) = vehicle_scene();
        let center = angular_extent(&car, [0.0; 3]).unwrap().center_deg();
        let cap = CapabilityModel::unlimited(&SensorConfig::hdl64());
        let (attacked, _) = synthesize(&scan, &AttackSpec::ideal(center, 3.0), &Receiver::vlp16_apollo(), &cap, &[]).unwrap();
        let report = FakeShadowDetector::default().report(&attacked).unwrap();
        assert!(report.residual_volume_m3 > 0.0);
        assert!(!fake_shadow_detect(&attacked, report.residual_volume_m3).unwrap().is_attack);
        assert!(fake_shadow_detect(&attacked, report.residual_volume_m3 - 1e-9).unwrap().is_attack);
    }

    fn rotated(scan: &Scan, angle_deg: f64) -> Scan {
        let (s, c) = angle_deg.to_radians().sin_cos();
        let points = scan
            .points
            .iter()
            .map(|p| {
                let mut q = CloudPoint::from_xyz(c * p.x - s * p.y, s * p.x + c * p.y, p.z, p.intensity, p.channel, p.timestamp_us);
                q.spoofed = p.spoofed;
                q
            })
            .collect();
        scan.with_points(points)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]

        #[test]
        fn verdict_is_rotation_equivariant(index in 0u64..1000, angle in 0.0f64..360.0, attack in any::<bool>()) {
            let gen = SceneGenerator::new(SensorConfig::hdl64());
            let scene = gen.generate(11, index, Some(ObjectClass::Vehicle));
            let scan = if attack {
                let t = scene.target.unwrap();
                let center = angular_extent(&t, [0.0; 3]).unwrap().center_deg();
                let cap = CapabilityModel::unlimited(&SensorConfig::hdl64());
                synthesize(&scene.scan, &AttackSpec::ideal(center, 24.0), &Receiver::vlp16_apollo(), &cap, &[]).unwrap().0
            } else {
                scene.scan.clone()
            };
            let detector = FakeShadowDetector::default();
            let a = detector.report(&scan).unwrap();
            let b = detector.report(&rotated(&scan, angle)).unwrap();
            // verdicts agree whenever the residual is not within discretization noise of the threshold
            let margin = 0.25 * detector.volume_threshold_m3;
            if (a.residual_volume_m3 - detector.volume_threshold_m3).abs() > margin {
                prop_assert_eq!(
                    a.residual_volume_m3 > detector.volume_threshold_m3,
                    b.residual_volume_m3 > detector.volume_threshold_m3
                );
            }
        }
    }
}
