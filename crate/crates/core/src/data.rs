//! IDX image ingestion, deterministic splitting and batching.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

pub const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
pub const IMAGE_ROWS: usize = 28;
pub const IMAGE_COLS: usize = 28;
pub const PIXELS: usize = IMAGE_ROWS * IMAGE_COLS;
const HEADER_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DatasetKind {
    Mnist,
    FashionMnist,
}

/// `N × 784` pixels in `[0, 1]`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageDataset {
    source: DatasetKind,
    pixels: Vec<f64>,
}

impl ImageDataset {
    pub fn from_rows(source: DatasetKind, rows: &[Vec<f64>]) -> Result<Self> {
        let mut pixels = Vec::with_capacity(rows.len() * PIXELS);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != PIXELS {
                return Err(Error::contract(format!(
                    "image {i} has {} pixels, expected {PIXELS}",
                    r.len()
                )));
            }
            if r.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::contract(format!("image {i} has pixels outside [0, 1]")));
            }
            pixels.extend_from_slice(r);
        }
        Ok(ImageDataset { source, pixels })
    }

    pub fn source(&self) -> DatasetKind {
        self.source
    }

    pub fn len(&self) -> usize {
        self.pixels.len() / PIXELS
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn image(&self, i: usize) -> &[f64] {
        &self.pixels[i * PIXELS..(i + 1) * PIXELS]
    }

    pub fn images(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.pixels.chunks_exact(PIXELS)
    }

    /// New dataset holding the given rows, in the given order.
    pub fn subset(&self, indices: &[usize]) -> ImageDataset {
        let mut pixels = Vec::with_capacity(indices.len() * PIXELS);
        for &i in indices {
            pixels.extend_from_slice(self.image(i));
        }
        ImageDataset {
            source: self.source,
            pixels,
        }
    }
}

/// Serialize 28×28 byte images as an (uncompressed) IDX3 file.
pub fn encode_idx_images(images: &[Vec<u8>]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + images.len() * PIXELS);
    out.extend_from_slice(&IDX_IMAGE_MAGIC.to_be_bytes());
    out.extend_from_slice(&(images.len() as u32).to_be_bytes());
    out.extend_from_slice(&(IMAGE_ROWS as u32).to_be_bytes());
    out.extend_from_slice(&(IMAGE_COLS as u32).to_be_bytes());
    for img in images {
        assert_eq!(img.len(), PIXELS, "IDX images must be 28x28");
        out.extend_from_slice(img);
    }
    out
}

/// Parse IDX3 image bytes (already decompressed).
pub fn parse_idx_images(bytes: &[u8], path: &Path, source: DatasetKind) -> Result<ImageDataset> {
    let fmt_err = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    if bytes.len() < HEADER_LEN {
        return Err(fmt_err(format!(
            "truncated header: need {HEADER_LEN} bytes, file has {}",
            bytes.len()
        )));
    }
    let word = |i: usize| u32::from_be_bytes(bytes[4 * i..4 * i + 4].try_into().expect("4 bytes"));
    let magic = word(0);
    if magic != IDX_IMAGE_MAGIC {
        return Err(fmt_err(format!(
            "expected image magic 0x{IDX_IMAGE_MAGIC:08x}, found 0x{magic:08x}"
        )));
    }
    let (n, rows, cols) = (word(1) as usize, word(2) as usize, word(3) as usize);
    if rows != IMAGE_ROWS || cols != IMAGE_COLS {
        return Err(fmt_err(format!(
            "expected {IMAGE_ROWS}x{IMAGE_COLS} images, header says {rows}x{cols}"
        )));
    }
    let expected = HEADER_LEN + n * PIXELS;
    if bytes.len() < expected {
        return Err(fmt_err(format!(
            "truncated payload: header declares {n} images ending at byte offset {expected}, data ends at offset {}",
            bytes.len()
        )));
    }
    if bytes.len() > expected {
        return Err(fmt_err(format!(
            "{} trailing bytes after offset {expected}",
            bytes.len() - expected
        )));
    }
    let pixels = bytes[HEADER_LEN..].iter().map(|&b| b as f64 / 255.0).collect();
    Ok(ImageDataset { source, pixels })
}

/// Load an IDX3 image file, transparently gunzipping `0x1f 0x8b` content.
pub fn load_idx_images(path: &Path, source: DatasetKind) -> Result<ImageDataset> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bytes = if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::Format {
                path: path.to_path_buf(),
                message: format!("corrupt gzip stream: {e}"),
            })?;
        out
    } else {
        raw
    };
    parse_idx_images(&bytes, path, source)
}

/// Locate the standard train / test image files inside a dataset directory.
pub fn standard_files(dir: &Path) -> (Option<PathBuf>, Option<PathBuf>) {
    let find = |stem: &str| {
        [format!("{stem}.gz"), stem.to_string()]
            .into_iter()
            .map(|f| dir.join(f))
            .find(|p| p.is_file())
    };
    (find("train-images-idx3-ubyte"), find("t10k-images-idx3-ubyte"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// `(train, val, test)`; non-negative, summing to 1.
    pub fractions: [f64; 3],
    pub shuffle_seed: u64,
    pub caps: [Option<usize>; 3],
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            fractions: [0.9, 0.1, 0.0],
            shuffle_seed: 0,
            caps: [Some(2000), Some(500), Some(500)],
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if self.fractions.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(Error::Config(format!(
                "split.fractions must be non-negative, got {:?}",
                self.fractions
            )));
        }
        let sum: f64 = self.fractions.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split.fractions must sum to 1, got {sum} from {:?}",
                self.fractions
            )));
        }
        Ok(())
    }
}

/// Index partition `(train, val, test)` of `0..n`.
///
/// Shuffles with `spec.shuffle_seed`, slices contiguously (val and test sizes are
/// `round(n · fraction)`, train takes the remainder), then applies caps.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<[Vec<usize>; 3]> {
    spec.validate()?;
    if n < 3 {
        return Err(Error::contract(format!("need at least 3 samples to split, got {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut Rng::seed_from_u64(spec.shuffle_seed));
    let n_val = (n as f64 * spec.fractions[1]).round() as usize;
    let n_test = (n as f64 * spec.fractions[2]).round() as usize;
    let n_train = n
        .checked_sub(n_val + n_test)
        .ok_or_else(|| Error::contract("split sizes exceed dataset size"))?;
    let mut parts = [
        order[..n_train].to_vec(),
        order[n_train..n_train + n_val].to_vec(),
        order[n_train + n_val..].to_vec(),
    ];
    for (i, part) in parts.iter_mut().enumerate() {
        if let Some(cap) = spec.caps[i] {
            part.truncate(cap);
        }
        if part.is_empty() && spec.fractions[i] > 0.0 {
            return Err(Error::contract(format!(
                "split {} is empty although fraction {} was requested for {n} samples",
                ["train", "val", "test"][i],
                spec.fractions[i]
            )));
        }
    }
    Ok(parts)
}

pub fn split(dataset: &ImageDataset, spec: &SplitSpec) -> Result<(ImageDataset, ImageDataset, ImageDataset)> {
    let [tr, va, te] = split_indices(dataset.len(), spec)?;
    Ok((dataset.subset(&tr), dataset.subset(&va), dataset.subset(&te)))
}

/// Per-epoch shuffled index batches over `0..len`; the last batch may be short.
pub fn batches(len: usize, batch_size: usize, epoch_seed: u64) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::contract("batch_size must be at least 1"));
    }
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(&mut Rng::seed_from_u64(epoch_seed));
    Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
}
