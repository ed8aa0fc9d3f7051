//! Inspecting IDX files and cutting balanced subsets out of them.

use std::fs;
use std::path::Path;

use legrad_core::targets::idx::{self, IdxError, IdxImages};

#[derive(Debug, Clone, PartialEq)]
pub struct IdxSummary {
    pub images: usize,
    pub rows: usize,
    pub cols: usize,
    /// Image count for each label value 0..=9 (larger labels are ignored).
    pub per_label: [usize; 10],
}

impl std::fmt::Display for IdxSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "images={} rows={} cols={}", self.images, self.rows, self.cols)?;
        for (label, n) in self.per_label.iter().enumerate() {
            writeln!(f, "label {label}: {n}")?;
        }
        Ok(())
    }
}

/// Reads an image/label pair and checks the counts agree.
pub fn load(images: &Path, labels: &Path) -> Result<(IdxImages, Vec<u8>), IdxError> {
    let images = idx::read_images(images)?;
    let labels = idx::read_labels(labels)?;
    if images.count() != labels.len() {
        return Err(IdxError::Truncated {
            needed: images.count(),
            found: labels.len(),
        });
    }
    Ok((images, labels))
}

pub fn summarize(images: &IdxImages, labels: &[u8]) -> IdxSummary {
    let mut per_label = [0; 10];
    for &l in labels {
        if let Some(n) = per_label.get_mut(l as usize) {
            *n += 1;
        }
    }
    IdxSummary {
        images: images.count(),
        rows: images.rows,
        cols: images.cols,
        per_label,
    }
}

/// The first `per_class` images of each label 0..=9, in file order.
pub fn balanced_subset(images: &IdxImages, labels: &[u8], per_class: usize) -> (IdxImages, Vec<u8>) {
    let mut taken = [0usize; 10];
    let mut pixels = Vec::new();
    let mut kept = Vec::new();
    for (i, &l) in labels.iter().enumerate().take(images.count()) {
        if let Some(n) = taken.get_mut(l as usize) {
            if *n < per_class {
                *n += 1;
                pixels.extend_from_slice(images.image(i));
                kept.push(l);
            }
        }
    }
    let subset = IdxImages {
        rows: images.rows,
        cols: images.cols,
        pixels,
    };
    (subset, kept)
}

pub fn write_subset(images: &IdxImages, labels: &[u8], out_images: &Path, out_labels: &Path) -> Result<(), IdxError> {
    fs::write(out_images, idx::encode_images(images))?;
    fs::write(out_labels, idx::encode_labels(labels))?;
    Ok(())
}
