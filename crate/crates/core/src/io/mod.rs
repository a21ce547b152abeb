//! Readers and writers: dataset files, raw sensor packets, and the tool's
//! own scan traces.

pub mod kitti;
pub mod packet;
pub mod trace;

use std::path::Path;

use crate::error::{Error, Result};

pub use kitti::{
    label_to_lidar_box, lidar_box_to_label, read_calibration, read_labels, read_pointcloud_bin, write_pointcloud_bin,
    KittiDataset, LabelRecord,
};
pub use packet::{encode_raw_packet, parse_raw_packet, PacketReturn, RawBlock, RawPacket, PACKET_LEN};
pub use trace::{read_scan, write_scan, TraceFormat};

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::file(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::file(path, e))
}
