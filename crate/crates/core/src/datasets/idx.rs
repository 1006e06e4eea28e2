//! IDX containers as used by MNIST and FashionMNIST (big-endian headers,
//! unsigned-byte payloads).

use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

/// Raw IDX image block: `count` images of `rows x cols` bytes each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn image_len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let n = self.image_len();
        &self.pixels[i * n..(i + 1) * n]
    }
}

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    let chunk = bytes.get(at..at + 4).ok_or(Error::Truncated {
        expected: at + 4,
        actual: bytes.len(),
    })?;
    Ok(u32::from_be_bytes(chunk.try_into().expect("4 bytes")))
}

fn expect_magic(bytes: &[u8], want: u32, what: &str) -> Result<()> {
    let magic = be_u32(bytes, 0)?;
    if magic != want {
        return Err(Error::Format(format!(
            "{what}: magic number {magic:#010x} ({magic}), expected {want:#010x} ({want})"
        )));
    }
    Ok(())
}

fn expect_len(bytes: &[u8], expected: usize) -> Result<()> {
    match bytes.len() {
        n if n < expected => Err(Error::Truncated { expected, actual: n }),
        n if n > expected => Err(Error::Format(format!(
            "{} unexpected trailing bytes (expected {expected} total)",
            n - expected
        ))),
        _ => Ok(()),
    }
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    expect_magic(bytes, IMAGES_MAGIC, "IDX images")?;
    let count = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let payload = count
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or_else(|| Error::Format("IDX image dimensions overflow".into()))?;
    expect_len(bytes, 16 + payload)?;
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: bytes[16..].to_vec(),
    })
}

/// Class labels; every byte must be a digit class in `0..=9`.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    expect_magic(bytes, LABELS_MAGIC, "IDX labels")?;
    let count = be_u32(bytes, 4)? as usize;
    expect_len(bytes, 8 + count)?;
    let labels = bytes[8..].to_vec();
    if let Some((i, &bad)) = labels.iter().enumerate().find(|(_, &l)| l > 9) {
        return Err(Error::Validation(format!("label {bad} at index {i} is outside 0..=9")));
    }
    Ok(labels)
}

pub fn encode_idx_images(images: &IdxImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    for v in [IMAGES_MAGIC, images.count as u32, images.rows as u32, images.cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}
