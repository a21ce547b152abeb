//! Scan traces: a CSV table and a PCD-style file with an ASCII header and
//! little-endian binary records. Both keep full `f64` precision, so
//! reading and re-writing a trace reproduces it byte for byte.

use std::fmt::Write as _;

use crate::error::{Error, FormatError, Position, Result};
use crate::sensor_model::{CloudPoint, Scan};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceFormat {
    Csv,
    Pcd,
}

impl std::str::FromStr for TraceFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(TraceFormat::Csv),
            "pcd" | "pcd-like" => Ok(TraceFormat::Pcd),
            _ => Err(Error::unknown("trace format", s)),
        }
    }
}

pub const CSV_HEADER: &str = "frame,channel,azimuth_deg,x,y,z,intensity,range_m";

pub fn write_scan(scan: &Scan, format: TraceFormat) -> Vec<u8> {
    match format {
        TraceFormat::Csv => write_csv(scan),
        TraceFormat::Pcd => write_pcd(scan),
    }
}

pub fn read_scan(bytes: &[u8], format: TraceFormat) -> Result<Scan> {
    match format {
        TraceFormat::Csv => read_csv(bytes),
        TraceFormat::Pcd => read_pcd(bytes),
    }
}

fn write_csv(scan: &Scan) -> Vec<u8> {
    let mut out = String::with_capacity(64 * (scan.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for p in &scan.points {
        // `{}` on f64 prints the shortest text that parses back exactly
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            scan.frame_id, p.channel, p.azimuth_deg, p.x, p.y, p.z, p.intensity, p.range_m
        );
    }
    out.into_bytes()
}

fn point(x: f64, y: f64, z: f64, intensity: f64, channel: usize, azimuth_deg: f64, range_m: f64) -> CloudPoint {
    CloudPoint {
        x,
        y,
        z,
        intensity,
        channel,
        azimuth_deg,
        range_m,
        timestamp_us: 0.0,
        spoofed: false,
    }
}

fn read_csv(bytes: &[u8]) -> Result<Scan> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let header = reader
        .headers()
        .map_err(|e| FormatError::new(Position::Line(1), e.to_string()))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != CSV_HEADER {
        return Err(FormatError::new(Position::Line(1), format!("header `{header}`, expected `{CSV_HEADER}`")).into());
    }
    let mut points = Vec::new();
    let mut frame = None;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            FormatError::new(Position::Line(line), e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let pos = Position::Line(line);
        if record.len() != 8 {
            return Err(FormatError::new(pos, format!("expected 8 fields, found {}", record.len())).into());
        }
        let float = |k: usize| -> Result<f64> {
            record[k]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| FormatError::new(pos, format!("column {} is not a finite number: {:?}", k + 1, &record[k])).into())
        };
        let f: u64 = record[0]
            .parse()
            .map_err(|_| FormatError::new(pos, format!("frame is not an integer: {:?}", &record[0])))?;
        if *frame.get_or_insert(f) != f {
            return Err(FormatError::new(pos, "rows belong to different frames").into());
        }
        let channel: usize = record[1]
            .parse()
            .map_err(|_| FormatError::new(pos, format!("channel is not an integer: {:?}", &record[1])))?;
        points.push(point(float(3)?, float(4)?, float(5)?, float(6)?, channel, float(2)?, float(7)?));
    }
    Ok(Scan::new(points, "", frame.unwrap_or(0)))
}

const PCD_RECORD: usize = 7 * 8 - 4;

fn write_pcd(scan: &Scan) -> Vec<u8> {
    let n = scan.len();
    let mut out = format!(
        "# pralab trace v1\n\
         FIELDS x y z intensity channel azimuth_deg range_m\n\
         SIZE 8 8 8 8 4 8 8\n\
         TYPE F F F F U F F\n\
         COUNT 1 1 1 1 1 1 1\n\
         WIDTH {n}\n\
         HEIGHT 1\n\
         VIEWPOINT 0 0 0 1 0 0 0\n\
         POINTS {n}\n\
         FRAME {}\n\
         SENSOR {}\n\
         DATA binary\n",
        scan.frame_id,
        if scan.config_id.is_empty() { "-" } else { &scan.config_id },
    )
    .into_bytes();
    out.reserve(n * PCD_RECORD);
    for p in &scan.points {
        for v in [p.x, p.y, p.z, p.intensity] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(p.channel as u32).to_le_bytes());
        out.extend_from_slice(&p.azimuth_deg.to_le_bytes());
        out.extend_from_slice(&p.range_m.to_le_bytes());
    }
    out
}

const FIXED_HEADER: [&str; 5] = [
    "# pralab trace v1",
    "FIELDS x y z intensity channel azimuth_deg range_m",
    "SIZE 8 8 8 8 4 8 8",
    "TYPE F F F F U F F",
    "COUNT 1 1 1 1 1 1 1",
];

fn read_pcd(bytes: &[u8]) -> Result<Scan> {
    let mut lines = Vec::new();
    let mut at = 0;
    while lines.len() < 12 {
        let Some(end) = bytes[at..].iter().position(|&b| b == b'\n') else {
            return Err(FormatError::new(Position::Line(lines.len() + 1), "header ends early").into());
        };
        let line = std::str::from_utf8(&bytes[at..at + end])
            .map_err(|_| FormatError::new(Position::Line(lines.len() + 1), "header is not text"))?;
        lines.push(line);
        at += end + 1;
    }
    for (i, want) in FIXED_HEADER.iter().enumerate() {
        if lines[i] != *want {
            return Err(FormatError::new(Position::Line(i + 1), format!("expected `{want}`")).into());
        }
    }
    let value = |i: usize, key: &str| -> Result<&str> {
        lines[i]
            .strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(' '))
            .ok_or_else(|| FormatError::new(Position::Line(i + 1), format!("expected `{key} ...`")).into())
    };
    let count = |i: usize, key: &str| -> Result<usize> {
        value(i, key)?
            .parse()
            .map_err(|_| FormatError::new(Position::Line(i + 1), format!("`{key}` is not a count")).into())
    };
    let width = count(5, "WIDTH")?;
    if value(6, "HEIGHT")? != "1" {
        return Err(FormatError::new(Position::Line(7), "HEIGHT must be 1").into());
    }
    if lines[7] != "VIEWPOINT 0 0 0 1 0 0 0" {
        return Err(FormatError::new(Position::Line(8), "unsupported VIEWPOINT").into());
    }
    let n = count(8, "POINTS")?;
    if n != width {
        return Err(FormatError::new(Position::Line(9), format!("POINTS {n} disagrees with WIDTH {width}")).into());
    }
    let frame: u64 = value(9, "FRAME")?
        .parse()
        .map_err(|_| FormatError::new(Position::Line(10), "FRAME is not an integer"))?;
    let sensor = value(10, "SENSOR")?;
    if lines[11] != "DATA binary" {
        return Err(FormatError::new(Position::Line(12), "expected `DATA binary`").into());
    }

    let data = &bytes[at..];
    if data.len() != n * PCD_RECORD {
        return Err(FormatError::new(
            Position::Offset(at + data.len().min(n * PCD_RECORD)),
            format!("{} data bytes for {n} points, expected {}", data.len(), n * PCD_RECORD),
        )
        .into());
    }
    let mut points = Vec::with_capacity(n);
    for (k, rec) in data.chunks_exact(PCD_RECORD).enumerate() {
        let f = |o: usize| f64::from_le_bytes(rec[o..o + 8].try_into().expect("8 bytes"));
        let values = [f(0), f(8), f(16), f(24), f(36), f(44)];
        if !values.iter().all(|v| v.is_finite()) {
            return Err(FormatError::new(Position::Offset(at + k * PCD_RECORD), "non-finite value in record").into());
        }
        let channel = u32::from_le_bytes(rec[32..36].try_into().expect("4 bytes")) as usize;
        points.push(point(values[0], values[1], values[2], values[3], channel, values[4], values[5]));
    }
    Ok(Scan::new(points, if sensor == "-" { "" } else { sensor }, frame))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensor_model::{synthesize_ring_scan, SensorConfig};
    use proptest::prelude::*;

    fn ring() -> Scan {
        let mut s = synthesize_ring_scan(&SensorConfig::vlp16(), &[7.25; 16], 0.37).unwrap();
        s.frame_id = 42;
        s
    }

    #[test]
    fn ring_round_trips_byte_identical() {
        for format in [TraceFormat::Csv, TraceFormat::Pcd] {
            let scan = ring();
            assert_eq!(scan.len(), 28_800);
            let bytes = write_scan(&scan, format);
            let back = read_scan(&bytes, format).unwrap();
            assert_eq!(back.frame_id, 42);
            assert_eq!(write_scan(&back, format), bytes);
            for (a, b) in scan.points.iter().zip(&back.points) {
                assert_eq!((a.x, a.y, a.z, a.intensity, a.channel), (b.x, b.y, b.z, b.intensity, b.channel));
            }
        }
    }

    #[test]
    fn empty_scan_is_header_only() {
        let empty = Scan::default();
        assert_eq!(write_scan(&empty, TraceFormat::Csv), format!("{CSV_HEADER}\n").into_bytes());
        let pcd = write_scan(&empty, TraceFormat::Pcd);
        assert!(pcd.ends_with(b"DATA binary\n"));
        assert!(read_scan(&pcd, TraceFormat::Pcd).unwrap().is_empty());
    }

    #[test]
    fn corrupted_header() {
        let mut bytes = write_scan(&ring(), TraceFormat::Pcd);
        bytes[3] = b'X';
        assert!(matches!(
            read_scan(&bytes, TraceFormat::Pcd),
            Err(Error::Format(FormatError { position: Position::Line(1), .. }))
        ));
        let csv = b"frame,channel,azimuth,x,y,z,intensity,range_m\n".to_vec();
        assert!(matches!(
            read_scan(&csv, TraceFormat::Csv),
            Err(Error::Format(FormatError { position: Position::Line(1), .. }))
        ));
    }

    #[test]
    fn unknown_tag() {
        assert!(matches!("ply".parse::<TraceFormat>(), Err(Error::Unknown { .. })));
    }

    #[test]
    fn channels_rederive_after_round_trip() {
        let config = SensorConfig::vlp16();
        let back = read_scan(&write_scan(&ring(), TraceFormat::Csv), TraceFormat::Csv).unwrap();
        assert!(back.points.iter().all(|p| config.nearest_channel(p.elevation_deg()) == p.channel));
    }

    fn arbitrary_scan() -> impl Strategy<Value = Scan> {
        (
            proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3, -1e2f64..1e2, 0.0f64..=1.0, 0usize..128), 0..60),
            any::<u64>(),
        )
            .prop_map(|(pts, frame)| {
                let points = pts.into_iter().map(|(x, y, z, i, c)| CloudPoint::from_xyz(x, y, z, i, c, 0.0)).collect();
                Scan::new(points, "vlp16", frame)
            })
    }

    proptest! {
        #[test]
        fn read_inverts_write(scan in arbitrary_scan()) {
            for format in [TraceFormat::Csv, TraceFormat::Pcd] {
                let back = read_scan(&write_scan(&scan, format), format).unwrap();
                prop_assert_eq!(back.len(), scan.len());
                if !scan.is_empty() {
                    prop_assert_eq!(back.frame_id, scan.frame_id);
                }
                for (a, b) in scan.points.iter().zip(&back.points) {
                    prop_assert_eq!(a, b);
                }
            }
        }

        #[test]
        fn truncation_is_rejected(scan in arbitrary_scan(), cut in 1usize..64) {
            prop_assume!(!scan.is_empty());
            let bytes = write_scan(&scan, TraceFormat::Pcd);
            let cut = cut.min(bytes.len());
            prop_assert!(read_scan(&bytes[..bytes.len() - cut], TraceFormat::Pcd).is_err());
        }
    }
}
