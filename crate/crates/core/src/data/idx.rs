//! IDX container reader (the MNIST distribution format).
//!
//! Layout: a big-endian `u32` magic (`0x00000803` for `u8` images with three
//! dimensions, `0x00000801` for `u8` labels with one), one big-endian `u32`
//! per dimension, then the raw bytes.

use std::fs;
use std::path::Path;

use super::{Dataset, Provenance};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

struct Reader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::Truncated {
                path: self.path.to_path_buf(),
                missing: end - self.bytes.len(),
            });
        }
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn expect_magic(r: &mut Reader<'_>, expected: u32) -> Result<()> {
    let found = r.u32()?;
    if found != expected {
        return Err(Error::BadMagic {
            path: r.path.to_path_buf(),
            found,
            expected,
        });
    }
    Ok(())
}

/// Reads an image/label file pair. Pixels are scaled to `[0, 1]` and each
/// image is flattened row-major into one input row.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let (ip, lp) = (images_path.as_ref(), labels_path.as_ref());
    let image_bytes = read_file(ip)?;
    let label_bytes = read_file(lp)?;

    let mut r = Reader {
        path: ip,
        bytes: &image_bytes,
        pos: 0,
    };
    expect_magic(&mut r, IDX_IMAGES_MAGIC)?;
    let n = r.u32()? as usize;
    let rows = r.u32()? as usize;
    let cols = r.u32()? as usize;
    let pixels = r.take(n * rows * cols)?;

    let mut r = Reader {
        path: lp,
        bytes: &label_bytes,
        pos: 0,
    };
    expect_magic(&mut r, IDX_LABELS_MAGIC)?;
    let n_labels = r.u32()? as usize;
    if n_labels != n {
        return Err(Error::CountMismatch {
            images: n,
            labels: n_labels,
        });
    }
    let labels: Vec<usize> = r.take(n)?.iter().map(|&b| b as usize).collect();

    let data = pixels.iter().map(|&p| p as f64 / 255.0).collect();
    let classes = labels.iter().max().map_or(2, |&m| (m + 1).max(2));
    Dataset::new(
        Tensor::matrix(n, rows * cols, data)?,
        labels,
        classes,
        Provenance::IdxFiles,
        0,
    )
}

/// Encodes `u8` images (each `rows × cols`) as an IDX image file.
pub fn write_idx_images(
    path: impl AsRef<Path>,
    rows: u32,
    cols: u32,
    images: &[Vec<u8>],
) -> Result<()> {
    let mut out = Vec::new();
    out.extend(IDX_IMAGES_MAGIC.to_be_bytes());
    out.extend((images.len() as u32).to_be_bytes());
    out.extend(rows.to_be_bytes());
    out.extend(cols.to_be_bytes());
    for img in images {
        out.extend(img);
    }
    fs::write(path.as_ref(), out).map_err(|e| Error::io(path.as_ref(), e))
}

pub fn write_idx_labels(path: impl AsRef<Path>, labels: &[u8]) -> Result<()> {
    let mut out = Vec::new();
    out.extend(IDX_LABELS_MAGIC.to_be_bytes());
    out.extend((labels.len() as u32).to_be_bytes());
    out.extend(labels);
    fs::write(path.as_ref(), out).map_err(|e| Error::io(path.as_ref(), e))
}
