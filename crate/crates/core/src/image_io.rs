//! Grayscale image loading and COIL-20 directory scanning.
//!
//! Pixels are stored row-major as `f64` in `[0, 1]` (8-bit value / 255).
//! Row index is the first moment coordinate for the Legendre and Zernike
//! grids; Hu moments use column = x, row = y.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageFormat, ImageReader};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Square grayscale image with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    side: usize,
    pixels: Vec<f64>,
    pub id: String,
    pub class_label: usize,
}

impl GrayImage {
    /// Builds an image from row-major pixels. Fails unless `pixels.len() == side²`
    /// and every value lies in `[0, 1]`.
    pub fn new(side: usize, pixels: Vec<f64>) -> Result<Self> {
        if side == 0 {
            return Err(Error::InvalidImage("side must be positive".into()));
        }
        if pixels.len() != side * side {
            return Err(Error::InvalidImage(format!(
                "expected {} pixels for side {side}, got {}",
                side * side,
                pixels.len()
            )));
        }
        if let Some(v) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidImage(format!(
                "intensity {v} outside [0, 1]"
            )));
        }
        Ok(Self {
            side,
            pixels,
            id: String::new(),
            class_label: 0,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let side = rows.len();
        if rows.iter().any(|r| r.len() != side) {
            return Err(Error::InvalidImage("rows do not form a square".into()));
        }
        Self::new(side, rows.concat())
    }

    pub fn from_u8(side: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(side, bytes.iter().map(|&b| f64::from(b) / 255.0).collect())
    }

    pub fn filled(side: usize, value: f64) -> Result<Self> {
        Self::new(side, vec![value; side * side])
    }

    pub fn with_label(mut self, id: impl Into<String>, class_label: usize) -> Self {
        self.id = id.into();
        self.class_label = class_label;
        self
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.side + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.pixels[row * self.side..(row + 1) * self.side]
    }

    /// Quarter turn counter-clockwise; an exact pixel permutation.
    pub fn rotate90(&self) -> Self {
        let n = self.side;
        let mut out = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                out[(n - 1 - c) * n + r] = self.get(r, c);
            }
        }
        Self {
            side: n,
            pixels: out,
            id: self.id.clone(),
            class_label: self.class_label,
        }
    }

    pub fn to_u8(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }
}

/// Loads an 8-bit grayscale PGM (P5) or PNG file.
pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    match reader.format() {
        Some(ImageFormat::Png) | Some(ImageFormat::Pnm) => {}
        _ => return Err(Error::UnsupportedFormat(path.to_path_buf())),
    }
    let decoded = reader.decode().map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let (width, height) = (decoded.width(), decoded.height());
    let luma = match decoded {
        DynamicImage::ImageLuma8(buf) => buf,
        _ => return Err(Error::NotGrayscale(path.to_path_buf())),
    };
    if width != height {
        return Err(Error::NonSquare {
            path: path.to_path_buf(),
            width,
            height,
        });
    }
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let class_label = parse_coil_name(&stem).map(|(k, _)| k - 1).unwrap_or(0);
    Ok(GrayImage::from_u8(width as usize, luma.as_raw())?.with_label(stem, class_label))
}

/// Writes a binary 8-bit PGM.
pub fn save_pgm(image: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = format!("P5\n{} {}\n255\n", image.side(), image.side()).into_bytes();
    bytes.extend_from_slice(&image.to_u8());
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes an 8-bit grayscale PNG.
pub fn save_png(image: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let side = image.side() as u32;
    let buf = image::GrayImage::from_raw(side, side, image.to_u8())
        .ok_or_else(|| Error::InvalidImage("buffer size".into()))?;
    buf.save_with_format(path, ImageFormat::Png)
        .map_err(|e| Error::Decode {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
}

/// One image of a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub id: String,
    #[serde(rename = "class")]
    pub class_label: usize,
    #[serde(skip)]
    pub angle: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub class_count: usize,
    /// Common per-class image count; the smallest class size when counts differ.
    pub per_class_count: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct ScanOptions {
    /// Require exactly 20 classes of 72 images each.
    pub strict: bool,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self { strict: false }
    }
}

pub const COIL20_CLASSES: usize = 20;
pub const COIL20_VIEWS: usize = 72;

/// Parses `obj<k>__<angle>`; returns `(k, angle)` with `k >= 1`.
fn parse_coil_name(stem: &str) -> Option<(usize, u32)> {
    let rest = stem.strip_prefix("obj")?;
    let (k, angle) = rest.split_once("__")?;
    let k: usize = k.parse().ok()?;
    let angle: u32 = angle.parse().ok()?;
    (k >= 1).then_some((k, angle))
}

/// Scans a COIL-20 style directory (`obj<k>__<angle>.png|pgm`).
///
/// Entries are sorted by `(class, angle)` so the result does not depend on
/// filesystem order. Classes must be contiguous from `obj1`; a class size
/// other than 72 is a warning unless `strict` is set.
pub fn scan_coil20(root: impl AsRef<Path>, opts: ScanOptions) -> Result<DatasetManifest> {
    let root = root.as_ref();
    let mut by_key: BTreeMap<(usize, u32), PathBuf> = BTreeMap::new();
    for entry in fs::read_dir(root).map_err(|e| Error::io(root, e))? {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        let path = entry.path();
        let ext = path
            .extension()
            .map(|e| e.to_string_lossy().to_ascii_lowercase());
        if !matches!(ext.as_deref(), Some("png") | Some("pgm")) {
            continue;
        }
        let Some(stem) = path.file_stem().map(|s| s.to_string_lossy().into_owned()) else {
            continue;
        };
        let Some((k, angle)) = parse_coil_name(&stem) else {
            log::debug!("skipping {}", path.display());
            continue;
        };
        if let Some(prev) = by_key.insert((k - 1, angle), path.clone()) {
            return Err(Error::Dataset(format!(
                "duplicate view obj{k}__{angle}: {} and {}",
                prev.display(),
                path.display()
            )));
        }
    }
    if by_key.is_empty() {
        return Err(Error::Dataset(format!(
            "no obj<k>__<angle> images found in {}",
            root.display()
        )));
    }

    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for (class, _) in by_key.keys() {
        *counts.entry(*class).or_default() += 1;
    }
    let class_count = counts.keys().next_back().map_or(0, |c| c + 1);
    let missing: Vec<usize> = (0..class_count).filter(|c| !counts.contains_key(c)).collect();
    if !missing.is_empty() {
        return Err(Error::Dataset(format!(
            "missing classes: {}",
            missing
                .iter()
                .map(|c| format!("obj{}", c + 1))
                .collect::<Vec<_>>()
                .join(", ")
        )));
    }
    if opts.strict && class_count != COIL20_CLASSES {
        return Err(Error::Dataset(format!(
            "expected {COIL20_CLASSES} classes, found {class_count}"
        )));
    }
    for (class, &n) in &counts {
        if n != COIL20_VIEWS {
            let msg = format!("class obj{} has {n} images, expected {COIL20_VIEWS}", class + 1);
            if opts.strict {
                return Err(Error::Dataset(msg));
            }
            log::warn!("{msg}");
        }
    }
    let per_class_count = counts.values().copied().min().unwrap_or(0);

    let entries = by_key
        .into_iter()
        .map(|((class_label, angle), path)| ManifestEntry {
            id: format!("obj{}__{angle}", class_label + 1),
            path,
            class_label,
            angle,
        })
        .collect();
    Ok(DatasetManifest {
        entries,
        class_count,
        per_class_count,
    })
}

impl DatasetManifest {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// JSON array of `{path, id, class}` objects.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.entries)?)
    }

    /// Loads every image in manifest order, labelled from the manifest.
    pub fn load_all(&self) -> Result<Vec<GrayImage>> {
        use rayon::prelude::*;
        self.entries
            .par_iter()
            .map(|e| Ok(load_image(&e.path)?.with_label(e.id.clone(), e.class_label)))
            .collect()
    }
}
