//! Azimuth-gap detection: a removal attack leaves a contiguous span of
//! azimuths with no returns at any elevation.

use serde::{Deserialize, Serialize};

use super::{DetectionVerdict, Detector, Evidence, Method, Verdict};
use crate::error::{Error, Result};
use crate::sensor_model::{AzimuthInterval, Scan};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AzimuthGap {
    /// Azimuth of the last return before the gap.
    pub start_azimuth_deg: f64,
    pub extent_deg: f64,
}

impl AzimuthGap {
    pub fn center_deg(&self) -> f64 {
        crate::sensor_model::wrap_deg(self.start_azimuth_deg + self.extent_deg / 2.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AzimuthGapReport {
    pub gaps: Vec<AzimuthGap>,
    pub verdict: Verdict,
}

/// Bucket width used to avoid a full sort. Must stay well below any
/// threshold it serves.
const BUCKET_DEG: f64 = 0.01;

/// Consecutive differences above `threshold` over sorted offsets within a span.
fn gaps_from_sorted(offsets: &[f64], span_deg: f64, full_circle: bool, threshold: f64) -> Vec<(f64, f64)> {
    let mut gaps = Vec::new();
    for w in offsets.windows(2) {
        let d = w[1] - w[0];
        if d > threshold {
            gaps.push((w[0], d));
        }
    }
    let (first, last) = (offsets[0], offsets[offsets.len() - 1]);
    if full_circle {
        let d = first + 360.0 - last;
        if d > threshold {
            gaps.push((last, d));
        }
    } else {
        if first > threshold {
            gaps.push((0.0, first));
        }
        if span_deg - last > threshold {
            gaps.push((last, span_deg - last));
        }
    }
    gaps
}

/// Sorted-order gap scan using per-bucket min/max instead of sorting every
/// azimuth. Exact for thresholds above the bucket width.
fn gaps_bucketed(offsets: impl Iterator<Item = f64>, span_deg: f64, full_circle: bool, threshold: f64) -> Vec<(f64, f64)> {
    let buckets = (span_deg / BUCKET_DEG).ceil() as usize + 1;
    let mut lo = vec![f64::INFINITY; buckets];
    let mut hi = vec![f64::NEG_INFINITY; buckets];
    for off in offsets {
        let b = ((off / BUCKET_DEG) as usize).min(buckets - 1);
        if off < lo[b] {
            lo[b] = off;
        }
        if off > hi[b] {
            hi[b] = off;
        }
    }
    // the bucket extremes carry every consecutive difference that can exceed the threshold
    let mut extremes = Vec::new();
    for b in 0..buckets {
        if lo[b].is_finite() {
            extremes.push(lo[b]);
            if hi[b] > lo[b] {
                extremes.push(hi[b]);
            }
        }
    }
    if extremes.is_empty() {
        return Vec::new();
    }
    gaps_from_sorted(&extremes, span_deg, full_circle, threshold)
}

/// Reference implementation: collect, sort, scan.
pub fn gaps_by_sorting(azimuths: &[f64], threshold_deg: f64) -> Vec<(f64, f64)> {
    let mut sorted = azimuths.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.is_empty() {
        return Vec::new();
    }
    gaps_from_sorted(&sorted, 360.0, true, threshold_deg)
}

pub fn azimuth_gap_detect(scan: &Scan, gap_threshold_deg: f64, roi: Option<AzimuthInterval>) -> Result<AzimuthGapReport> {
    if scan.is_empty() {
        return Err(Error::InsufficientData("scan has no returns".into()));
    }
    let full = roi.is_none_or(|r| r.width_deg >= 360.0);
    let span = if full { 360.0 } else { roi.expect("partial roi").width_deg };
    let start = if full { 0.0 } else { roi.expect("partial roi").start_deg };

    let offsets = scan.points.iter().filter_map(|p| {
        if full {
            Some(p.azimuth_deg)
        } else {
            let r = roi.expect("partial roi");
            r.covers(p.azimuth_deg).then(|| r.offset_of(p.azimuth_deg).min(span))
        }
    });
    let mut raw = if gap_threshold_deg > 5.0 * BUCKET_DEG {
        gaps_bucketed(offsets, span, full, gap_threshold_deg)
    } else {
        let mut sorted: Vec<f64> = offsets.collect();
        sorted.sort_by(f64::total_cmp);
        if sorted.is_empty() {
            Vec::new()
        } else {
            gaps_from_sorted(&sorted, span, full, gap_threshold_deg)
        }
    };
    if raw.is_empty() && !full && !scan.points.iter().any(|p| roi.expect("partial roi").covers(p.azimuth_deg)) {
        // nothing at all inside the watched span
        raw.push((0.0, span));
    }
    let mut gaps: Vec<AzimuthGap> = raw
        .into_iter()
        .map(|(off, extent)| AzimuthGap {
            start_azimuth_deg: crate::sensor_model::wrap_deg(start + off),
            extent_deg: extent,
        })
        .collect();
    gaps.sort_by(|a, b| a.start_azimuth_deg.total_cmp(&b.start_azimuth_deg));
    let verdict = if gaps.is_empty() { Verdict::Benign } else { Verdict::Attack };
    Ok(AzimuthGapReport { gaps, verdict })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AzimuthDetector {
    pub gap_threshold_deg: f64,
    pub roi: Option<AzimuthInterval>,
}

impl Default for AzimuthDetector {
    fn default() -> Self {
        Self {
            gap_threshold_deg: 1.0,
            roi: None,
        }
    }
}

impl Detector for AzimuthDetector {
    fn method(&self) -> Method {
        Method::Azimuth
    }

    fn detect(&self, scan: &Scan) -> Result<DetectionVerdict> {
        let report = azimuth_gap_detect(scan, self.gap_threshold_deg, self.roi)?;
        Ok(DetectionVerdict {
            method: Method::Azimuth,
            is_attack: report.verdict == Verdict::Attack,
            evidence: Evidence::Azimuth(report),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::{synthesize, AttackSpec, CapabilityModel, Receiver};
    use crate::sensor_model::{synthesize_ring_scan, SensorConfig};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn ring() -> Scan {
        synthesize_ring_scan(&SensorConfig::vlp16(), &[10.0; 16], 0.5).unwrap()
    }

    fn attacked(center: f64, angle: f64) -> Scan {
        let cap = CapabilityModel::unlimited(&SensorConfig::vlp16());
        synthesize(&ring(), &AttackSpec::ideal(center, angle), &Receiver::vlp16_apollo(), &cap, &[])
            .unwrap()
            .0
    }

    #[test]
    fn full_ring_is_benign() {
        let report = azimuth_gap_detect(&ring(), 1.0, None).unwrap();
        assert_eq!(report.verdict, Verdict::Benign);
        assert!(report.gaps.is_empty());
    }

    #[test]
    fn attack_gap_located() {
        let report = azimuth_gap_detect(&attacked(100.0, 4.0), 1.0, None).unwrap();
        assert_eq!(report.verdict, Verdict::Attack);
        assert_eq!(report.gaps.len(), 1);
        let gap = report.gaps[0];
        assert_abs_diff_eq!(gap.start_azimuth_deg, 97.8, epsilon = 1e-6);
        assert!((gap.extent_deg - 4.0).abs() <= 0.2 + 1e-9);
        assert_abs_diff_eq!(gap.center_deg(), 99.9, epsilon = 1e-6);
    }

    #[test]
    fn wrap_gap_is_single() {
        let scan = ring();
        let kept: Vec<_> = scan
            .points
            .iter()
            .filter(|p| !(p.azimuth_deg > 359.0 + 1e-6 || p.azimuth_deg < 2.0 - 1e-6))
            .copied()
            .collect();
        let report = azimuth_gap_detect(&scan.with_points(kept), 1.0, None).unwrap();
        assert_eq!(report.gaps.len(), 1);
        assert_abs_diff_eq!(report.gaps[0].extent_deg, 3.0, epsilon = 1e-6);
        assert_abs_diff_eq!(report.gaps[0].start_azimuth_deg, 359.0, epsilon = 1e-6);
    }

    #[test]
    fn empty_scan_is_an_error() {
        assert!(matches!(
            azimuth_gap_detect(&Scan::default(), 1.0, None),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn roi_limits_the_search() {
        let scan = attacked(100.0, 4.0);
        let front = AzimuthInterval::centered(0.0, 90.0);
        assert_eq!(azimuth_gap_detect(&scan, 1.0, Some(front)).unwrap().verdict, Verdict::Benign);
        let side = AzimuthInterval::centered(90.0, 90.0);
        let report = azimuth_gap_detect(&scan, 1.0, Some(side)).unwrap();
        assert_eq!(report.gaps.len(), 1);
        assert_abs_diff_eq!(report.gaps[0].start_azimuth_deg, 97.8, epsilon = 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn bucketed_matches_sorting(azimuths in proptest::collection::vec(0.0f64..360.0, 1..400), threshold in 0.5f64..20.0) {
            let scan = Scan::new(
                azimuths.iter().map(|a| {
                    let r = a.to_radians();
                    crate::sensor_model::CloudPoint::from_xyz(5.0 * r.cos(), 5.0 * r.sin(), 0.0, 0.5, 0, 0.0)
                }).collect(),
                "t", 0,
            );
            let derived: Vec<f64> = scan.points.iter().map(|p| p.azimuth_deg).collect();
            let mut oracle = gaps_by_sorting(&derived, threshold);
            oracle.sort_by(|a, b| a.0.total_cmp(&b.0));
            let report = azimuth_gap_detect(&scan, threshold, None).unwrap();
            prop_assert_eq!(report.gaps.len(), oracle.len());
            for (g, (s, e)) in report.gaps.iter().zip(&oracle) {
                prop_assert!((g.start_azimuth_deg - s).abs() < 1e-9);
                prop_assert!((g.extent_deg - e).abs() < 1e-9);
            }
        }

        #[test]
        fn flags_every_attack_wider_than_threshold_plus_step(center in 0u32..360, extra in 0.0f64..20.0) {
            let angle = 1.0 + 0.2 + 1e-3 + extra;
            let report = azimuth_gap_detect(&attacked(center as f64, angle), 1.0, None).unwrap();
            prop_assert_eq!(report.verdict, Verdict::Attack);
            prop_assert_eq!(report.gaps.len(), 1);
            // k removed columns leave a gap of (k + 1) steps, and a half-open sector
            // of width `angle` holds floor or ceil of angle / step columns
            let extent = report.gaps[0].extent_deg;
            prop_assert!(extent > angle - 1e-9 && extent < angle + 0.4 + 1e-9, "{}", extent);
        }
    }
}
