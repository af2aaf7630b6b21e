//! IDX image/label ingestion (the MNIST container format).
//!
//! Big-endian layout: a 4-byte magic (0x00000803 for 3-D image tensors,
//! 0x00000801 for 1-D label vectors), one 4-byte big-endian size per
//! dimension, then the raw unsigned bytes.

use std::fs;
use std::path::Path;

use dyncopy_core::Error;

use crate::{CliError, CliResult};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

/// How raw pixel bytes map to network inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PixelEncoding {
    /// byte/127.5 - 1, range [-1, 1].
    PlusMinus,
    /// byte/255, range [0, 1].
    ZeroOne,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdxData {
    pub images: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub rows: usize,
    pub cols: usize,
}

fn be_u32(bytes: &[u8], offset: usize, what: &str) -> CliResult<u32> {
    let slice = bytes
        .get(offset..offset + 4)
        .ok_or_else(|| CliError::Core(Error::Format(format!("truncated {what}"))))?;
    Ok(u32::from_be_bytes(slice.try_into().unwrap()))
}

/// Parse paired IDX image and label files into labeled input vectors.
pub fn read_idx(
    images_path: &Path,
    labels_path: &Path,
    encoding: PixelEncoding,
) -> CliResult<IdxData> {
    let img = fs::read(images_path)?;
    let lab = fs::read(labels_path)?;

    let magic = be_u32(&img, 0, "image magic")?;
    if magic != IMAGE_MAGIC {
        return Err(CliError::Core(Error::Format(format!(
            "image magic {magic:#010x}, expected {IMAGE_MAGIC:#010x}"
        ))));
    }
    let count = be_u32(&img, 4, "image count")? as usize;
    let rows = be_u32(&img, 8, "image rows")? as usize;
    let cols = be_u32(&img, 12, "image cols")? as usize;
    let pixels = rows * cols;
    let payload = &img[16..];
    if payload.len() != count * pixels {
        return Err(CliError::Core(Error::Format(format!(
            "image payload holds {} bytes, header promises {}",
            payload.len(),
            count * pixels
        ))));
    }

    let magic = be_u32(&lab, 0, "label magic")?;
    if magic != LABEL_MAGIC {
        return Err(CliError::Core(Error::Format(format!(
            "label magic {magic:#010x}, expected {LABEL_MAGIC:#010x}"
        ))));
    }
    let label_count = be_u32(&lab, 4, "label count")? as usize;
    if label_count != count {
        return Err(CliError::Core(Error::Format(format!(
            "{count} images but {label_count} labels"
        ))));
    }
    let labels = &lab[8..];
    if labels.len() != count {
        return Err(CliError::Core(Error::Format(format!(
            "label payload holds {} bytes, header promises {count}",
            labels.len()
        ))));
    }

    let scale = |byte: u8| match encoding {
        PixelEncoding::PlusMinus => byte as f64 / 127.5 - 1.0,
        PixelEncoding::ZeroOne => byte as f64 / 255.0,
    };
    let images = payload
        .chunks_exact(pixels)
        .map(|chunk| chunk.iter().map(|&b| scale(b)).collect())
        .collect();
    Ok(IdxData {
        images,
        labels: labels.to_vec(),
        rows,
        cols,
    })
}

/// Write raw byte images and labels in IDX layout; the inverse of
/// [`read_idx`] up to the pixel scaling.
pub fn write_idx(
    images: &[Vec<u8>],
    labels: &[u8],
    rows: usize,
    cols: usize,
    images_path: &Path,
    labels_path: &Path,
) -> CliResult<()> {
    assert_eq!(images.len(), labels.len());
    let mut img = Vec::with_capacity(16 + images.len() * rows * cols);
    img.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    img.extend_from_slice(&(images.len() as u32).to_be_bytes());
    img.extend_from_slice(&(rows as u32).to_be_bytes());
    img.extend_from_slice(&(cols as u32).to_be_bytes());
    for image in images {
        assert_eq!(image.len(), rows * cols);
        img.extend_from_slice(image);
    }
    fs::write(images_path, img)?;

    let mut lab = Vec::with_capacity(8 + labels.len());
    lab.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    lab.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    lab.extend_from_slice(labels);
    fs::write(labels_path, lab)?;
    Ok(())
}
