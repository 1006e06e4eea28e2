//! CIFAR-10 binary batches: fixed 3073-byte records, one label byte
//! followed by 1024 red, 1024 green and 1024 blue pixel bytes.

use crate::error::{Error, Result};

pub const CIFAR_PIXELS: usize = 3 * 32 * 32;
pub const CIFAR_RECORD: usize = 1 + CIFAR_PIXELS;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CifarRecord {
    pub label: u8,
    /// Channel-major pixels.
    pub pixels: Vec<u8>,
}

pub fn parse_cifar10_batch(bytes: &[u8]) -> Result<Vec<CifarRecord>> {
    if bytes.len() % CIFAR_RECORD != 0 {
        return Err(Error::Format(format!(
            "CIFAR-10 batch of {} bytes is not a multiple of the {CIFAR_RECORD}-byte record size",
            bytes.len()
        )));
    }
    bytes
        .chunks_exact(CIFAR_RECORD)
        .enumerate()
        .map(|(i, rec)| {
            if rec[0] > 9 {
                return Err(Error::Validation(format!(
                    "record {i} has label {} outside 0..=9",
                    rec[0]
                )));
            }
            Ok(CifarRecord {
                label: rec[0],
                pixels: rec[1..].to_vec(),
            })
        })
        .collect()
}

pub fn encode_cifar10_batch(records: &[CifarRecord]) -> Vec<u8> {
    let mut out = Vec::with_capacity(records.len() * CIFAR_RECORD);
    for r in records {
        out.push(r.label);
        out.extend_from_slice(&r.pixels);
    }
    out
}
