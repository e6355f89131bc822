//! IDX files as used by MNIST: big-endian magic word, then big-endian
//! `u32` dimensions, then unsigned bytes. Gzipped files are inflated
//! transparently.

use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use super::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;
const MNIST_CLASSES: usize = 10;

/// Decoded image block: `count` images of `rows x cols` bytes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format(format!("truncated idx header at byte {offset}")))
}

fn expect_magic(bytes: &[u8], magic: u32) -> Result<()> {
    let found = read_u32(bytes, 0)?;
    if found != magic {
        return Err(Error::Format(format!(
            "bad idx magic 0x{found:08x}, expected 0x{magic:08x}"
        )));
    }
    Ok(())
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    expect_magic(bytes, IMAGES_MAGIC)?;
    let count = read_u32(bytes, 4)? as usize;
    let rows = read_u32(bytes, 8)? as usize;
    let cols = read_u32(bytes, 12)? as usize;
    let need = count * rows * cols;
    let body = &bytes[16..];
    if body.len() < need {
        return Err(Error::Format(format!(
            "truncated idx image data: {} of {need} bytes",
            body.len()
        )));
    }
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: body[..need].to_vec(),
    })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    expect_magic(bytes, LABELS_MAGIC)?;
    let count = read_u32(bytes, 4)? as usize;
    let body = &bytes[8..];
    if body.len() < count {
        return Err(Error::Format(format!(
            "truncated idx label data: {} of {count} bytes",
            body.len()
        )));
    }
    Ok(body[..count].to_vec())
}

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::Format(format!("{}: bad gzip stream: {e}", path.display())))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

/// Loads an image/label file pair: pixels scaled by `1/255` and flattened,
/// labels one-hot over 10 classes.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let images = parse_idx_images(&read_maybe_gz(images_path.as_ref())?)?;
    let labels = parse_idx_labels(&read_maybe_gz(labels_path.as_ref())?)?;
    idx_dataset(&images, &labels)
}

pub(crate) fn idx_dataset(images: &IdxImages, labels: &[u8]) -> Result<Dataset> {
    if images.count != labels.len() {
        return Err(Error::invalid(format!(
            "{} images but {} labels",
            images.count,
            labels.len()
        )));
    }
    if let Some(bad) = labels.iter().find(|&&l| l as usize >= MNIST_CLASSES) {
        return Err(Error::invalid(format!("label {bad} outside 0..10")));
    }
    let d = images.rows * images.cols;
    let values = images
        .pixels
        .iter()
        .map(|&p| f64::from(p) / 255.0)
        .collect();
    let features = Matrix::from_vec(images.count, d, values)?;
    let labels: Vec<usize> = labels.iter().map(|&l| l as usize).collect();
    Dataset::from_labels(features, &labels, MNIST_CLASSES)
}
