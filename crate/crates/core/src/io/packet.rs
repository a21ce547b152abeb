//! Single-return sensor data packets.
//!
//! Layout: 12 blocks of 100 bytes (flag `FF EE`, azimuth in hundredths of a
//! degree as LE `u16`, then 32 × (LE `u16` distance in 2 mm units, `u8`
//! intensity)), a LE `u32` timestamp in microseconds and 2 factory bytes.
//! Blocks are numbered from 0.

use serde::{Deserialize, Serialize};

use crate::error::{FormatError, Position, Result};

pub const PACKET_LEN: usize = 1206;
pub const BLOCKS: usize = 12;
pub const SLOTS: usize = 32;
const BLOCK_LEN: usize = 4 + 3 * SLOTS;
const FLAG: [u8; 2] = [0xFF, 0xEE];
pub const DISTANCE_UNIT_M: f64 = 0.002;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacketReturn {
    /// Slot index within the block, 0..32.
    pub channel: usize,
    pub azimuth_deg: f64,
    pub range_m: f64,
    /// Raw intensity scaled by 1/255.
    pub intensity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RawBlock {
    pub azimuth_hundredths: u16,
    /// `(distance in 2 mm units, intensity)` per slot.
    pub slots: [(u16, u8); SLOTS],
}

impl Default for RawBlock {
    fn default() -> Self {
        Self {
            azimuth_hundredths: 0,
            slots: [(0, 0); SLOTS],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawPacket {
    pub blocks: [RawBlock; BLOCKS],
    pub timestamp_us: u32,
    pub factory: [u8; 2],
}

impl RawPacket {
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != PACKET_LEN {
            return Err(FormatError::new(
                Position::Offset(bytes.len().min(PACKET_LEN)),
                format!("packet is {} bytes, expected {PACKET_LEN}", bytes.len()),
            )
            .into());
        }
        let mut blocks = [RawBlock::default(); BLOCKS];
        for (index, block) in blocks.iter_mut().enumerate() {
            let offset = index * BLOCK_LEN;
            let raw = &bytes[offset..offset + BLOCK_LEN];
            if raw[..2] != FLAG {
                return Err(FormatError::new(
                    Position::Block { index, offset },
                    format!("block flag {:02X}{:02X}, expected FFEE", raw[0], raw[1]),
                )
                .into());
            }
            let azimuth = u16::from_le_bytes([raw[2], raw[3]]);
            if azimuth >= 36_000 {
                return Err(FormatError::new(
                    Position::Block { index, offset: offset + 2 },
                    format!("azimuth {azimuth} exceeds 35999 hundredths of a degree"),
                )
                .into());
            }
            block.azimuth_hundredths = azimuth;
            for (s, slot) in block.slots.iter_mut().enumerate() {
                let at = 4 + 3 * s;
                *slot = (u16::from_le_bytes([raw[at], raw[at + 1]]), raw[at + 2]);
            }
        }
        let tail = BLOCKS * BLOCK_LEN;
        Ok(Self {
            blocks,
            timestamp_us: u32::from_le_bytes(bytes[tail..tail + 4].try_into().expect("4 bytes")),
            factory: [bytes[tail + 4], bytes[tail + 5]],
        })
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(PACKET_LEN);
        for b in &self.blocks {
            out.extend_from_slice(&FLAG);
            out.extend_from_slice(&b.azimuth_hundredths.to_le_bytes());
            for &(d, i) in &b.slots {
                out.extend_from_slice(&d.to_le_bytes());
                out.push(i);
            }
        }
        out.extend_from_slice(&self.timestamp_us.to_le_bytes());
        out.extend_from_slice(&self.factory);
        out
    }

    /// Non-empty returns in block order; zero distance means no return.
    pub fn returns(&self) -> Vec<PacketReturn> {
        let mut out = Vec::new();
        for b in &self.blocks {
            let azimuth_deg = b.azimuth_hundredths as f64 / 100.0;
            for (channel, &(d, i)) in b.slots.iter().enumerate() {
                if d == 0 {
                    continue;
                }
                out.push(PacketReturn {
                    channel,
                    azimuth_deg,
                    range_m: d as f64 * DISTANCE_UNIT_M,
                    intensity: i as f64 / 255.0,
                });
            }
        }
        out
    }
}

pub fn parse_raw_packet(bytes: &[u8]) -> Result<Vec<PacketReturn>> {
    Ok(RawPacket::decode(bytes)?.returns())
}

pub fn encode_raw_packet(blocks: &[RawBlock; BLOCKS], timestamp_us: u32, factory: [u8; 2]) -> Vec<u8> {
    RawPacket {
        blocks: *blocks,
        timestamp_us,
        factory,
    }
    .encode()
}
