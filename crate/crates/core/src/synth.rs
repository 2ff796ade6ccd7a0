//! Synthetic COIL-style datasets: each class is a lobed planar shape with
//! an intensity gradient, rendered at evenly spaced in-plane rotations.
//! Used by tests and as a stand-in where pixel content does not matter
//! (timing).

use std::f64::consts::PI;
use std::path::Path;

use crate::error::Result;
use crate::image_io::{save_pgm, save_png, GrayImage};

/// Renders class `class` rotated by `angle` radians on a `side×side` grid
/// with 2×2 supersampling.
pub fn render_view(class: usize, angle: f64, side: usize) -> GrayImage {
    let lobes = 2.0 + (class % 5) as f64;
    let depth = 0.12 + 0.06 * (class / 5) as f64;
    let base = 0.55 + 0.03 * (class % 3) as f64;
    let tilt = 0.25 * (class % 4) as f64;
    let shade = 0.3 + 0.15 * (class % 4) as f64;
    let mut px = vec![0.0; side * side];
    let ss = 2;
    for r in 0..side {
        for c in 0..side {
            let mut acc = 0.0;
            for sr in 0..ss {
                for sc in 0..ss {
                    let x = -1.0 + (c as f64 + (sc as f64 + 0.5) / ss as f64) * 2.0 / side as f64;
                    let y = 1.0 - (r as f64 + (sr as f64 + 0.5) / ss as f64) * 2.0 / side as f64;
                    // rotate sample point into the object frame
                    let (s, co) = (-angle).sin_cos();
                    let (u, v) = (co * x - s * y, s * x + co * y);
                    let rho = (u * u + v * v).sqrt();
                    let theta = v.atan2(u);
                    let edge = base * (1.0 + depth * (lobes * theta + tilt).cos());
                    if rho <= edge {
                        let g = 0.5 + 0.5 * (u * shade - v * (1.0 - shade));
                        acc += (0.35 + 0.6 * g.clamp(0.0, 1.0)) * (1.0 - 0.3 * rho / edge);
                    }
                }
            }
            px[r * side + c] = (acc / (ss * ss) as f64).clamp(0.0, 1.0);
        }
    }
    GrayImage::new(side, px).expect("rendered pixels in range")
}

/// `classes × views` images labelled `obj<k>__<view>`, in `(class, view)` order.
/// Pixels are quantized to 8 bits so they match what a file round-trip gives.
pub fn synthetic_dataset(classes: usize, views: usize, side: usize) -> Vec<GrayImage> {
    use rayon::prelude::*;
    (0..classes * views)
        .into_par_iter()
        .map(|k| {
            let (class, view) = (k / views, k % views);
            let img = render_view(class, 2.0 * PI * view as f64 / views as f64, side);
            GrayImage::from_u8(side, &img.to_u8())
                .expect("quantized")
                .with_label(format!("obj{}__{view}", class + 1), class)
        })
        .collect()
}

/// Writes images as `<id>.pgm` or `<id>.png` under `dir`.
pub fn write_dataset(dir: &Path, images: &[GrayImage], png: bool) -> Result<()> {
    for img in images {
        if png {
            save_png(img, dir.join(format!("{}.png", img.id)))?;
        } else {
            save_pgm(img, dir.join(format!("{}.pgm", img.id)))?;
        }
    }
    Ok(())
}
