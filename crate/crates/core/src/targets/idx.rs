//! Reader and writer for the IDX image/label format (big-endian headers,
//! raw unsigned bytes).

use std::path::Path;

use thiserror::Error;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Error)]
pub enum IdxError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("wrong magic number {found:#010x}, expected {expected:#010x}")]
    BadMagic { expected: u32, found: u32 },
    #[error("truncated file: needed {needed} bytes, found {found}")]
    Truncated { needed: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    /// `count * rows * cols` pixels, image-major.
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn count(&self) -> usize {
        self.pixels.len().checked_div(self.rows * self.cols).unwrap_or(0)
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let size = self.rows * self.cols;
        &self.pixels[i * size..(i + 1) * size]
    }

    /// Pixels scaled to `[0, 1]`.
    pub fn scaled(&self, i: usize) -> Vec<f64> {
        self.image(i).iter().map(|&p| f64::from(p) / 255.0).collect()
    }

    /// Pixels scaled to `[0, 1]` and thresholded at 0.5.
    pub fn binarized(&self, i: usize) -> Vec<f64> {
        self.image(i)
            .iter()
            .map(|&p| f64::from(f64::from(p) / 255.0 > 0.5))
            .collect()
    }
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32, IdxError> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(IdxError::Truncated {
            needed: offset + 4,
            found: bytes.len(),
        })
}

fn check_magic(bytes: &[u8], expected: u32) -> Result<(), IdxError> {
    let found = read_u32(bytes, 0)?;
    if found != expected {
        return Err(IdxError::BadMagic { expected, found });
    }
    Ok(())
}

fn body(bytes: &[u8], header: usize, len: usize) -> Result<&[u8], IdxError> {
    bytes.get(header..header + len).ok_or(IdxError::Truncated {
        needed: header + len,
        found: bytes.len(),
    })
}

pub fn parse_images(bytes: &[u8]) -> Result<IdxImages, IdxError> {
    check_magic(bytes, IMAGE_MAGIC)?;
    let count = read_u32(bytes, 4)? as usize;
    let rows = read_u32(bytes, 8)? as usize;
    let cols = read_u32(bytes, 12)? as usize;
    let pixels = body(bytes, 16, count * rows * cols)?.to_vec();
    Ok(IdxImages { rows, cols, pixels })
}

pub fn parse_labels(bytes: &[u8]) -> Result<Vec<u8>, IdxError> {
    check_magic(bytes, LABEL_MAGIC)?;
    let count = read_u32(bytes, 4)? as usize;
    Ok(body(bytes, 8, count)?.to_vec())
}

pub fn read_images(path: impl AsRef<Path>) -> Result<IdxImages, IdxError> {
    parse_images(&std::fs::read(path)?)
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<u8>, IdxError> {
    parse_labels(&std::fs::read(path)?)
}

pub fn encode_images(images: &IdxImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    out.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    out.extend_from_slice(&(images.count() as u32).to_be_bytes());
    out.extend_from_slice(&(images.rows as u32).to_be_bytes());
    out.extend_from_slice(&(images.cols as u32).to_be_bytes());
    out.extend_from_slice(&images.pixels);
    out
}

pub fn encode_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Two-class logistic-regression data: images of `positive` get label +1,
/// images of `negative` get -1; pixels scaled to `[0, 1]` with a trailing
/// bias entry of 1.
pub fn two_class_subset(
    images: &IdxImages,
    labels: &[u8],
    positive: u8,
    negative: u8,
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rows = Vec::new();
    let mut ys = Vec::new();
    for (i, &label) in labels.iter().enumerate().take(images.count()) {
        let y = if label == positive {
            1.0
        } else if label == negative {
            -1.0
        } else {
            continue;
        };
        let mut row = images.scaled(i);
        row.push(1.0);
        rows.push(row);
        ys.push(y);
    }
    (rows, ys)
}

/// Binarized images, at most `per_class` of each label, in file order.
pub fn balanced_binarized(images: &IdxImages, labels: &[u8], per_class: usize) -> Vec<Vec<f64>> {
    let mut seen = [0usize; 256];
    let mut out = Vec::new();
    for (i, &label) in labels.iter().enumerate().take(images.count()) {
        if seen[label as usize] < per_class {
            seen[label as usize] += 1;
            out.push(images.binarized(i));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> (IdxImages, Vec<u8>) {
        let images = IdxImages {
            rows: 2,
            cols: 2,
            pixels: vec![0, 255, 128, 127, 10, 20, 30, 40, 255, 255, 0, 0],
        };
        (images, vec![2, 7, 3])
    }

    #[test]
    fn round_trip() {
        let (images, labels) = sample();
        assert_eq!(parse_images(&encode_images(&images)).unwrap(), images);
        assert_eq!(parse_labels(&encode_labels(&labels)).unwrap(), labels);
    }

    #[test]
    fn wrong_magic_and_truncation_are_distinct() {
        let (images, labels) = sample();
        let bytes = encode_images(&images);
        assert!(matches!(
            parse_labels(&bytes),
            Err(IdxError::BadMagic { expected: LABEL_MAGIC, found: IMAGE_MAGIC })
        ));
        assert!(matches!(
            parse_images(&bytes[..bytes.len() - 1]),
            Err(IdxError::Truncated { .. })
        ));
        assert!(matches!(parse_labels(&encode_labels(&labels)[..6]), Err(IdxError::Truncated { .. })));
    }

    #[test]
    fn binarize_threshold() {
        let (images, _) = sample();
        assert_eq!(images.binarized(0), vec![0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn class_filters() {
        let (images, labels) = sample();
        let (rows, ys) = two_class_subset(&images, &labels, 2, 7);
        assert_eq!(ys, vec![1.0, -1.0]);
        assert_eq!(rows[0].len(), 5);
        assert_eq!(rows[0][4], 1.0);
        assert_eq!(balanced_binarized(&images, &labels, 1).len(), 3);
    }
}
