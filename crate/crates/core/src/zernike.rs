//! Zernike moment magnitudes on the unit disk.
//!
//! Pixel centers use the same `[-1, 1]²` grid as the Legendre module
//! (row index → x, column index → y); centers with `ρ > 1` are dropped.
//! `A_nm = (n+1)/π · Σ f(x,y) R_nm(ρ) e^{−jmθ} ΔxΔy` with `θ = atan2(y, x)`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::feature::{FeatureVector, Method};
use crate::image_io::GrayImage;
use crate::legendre::pixel_center;

/// Number of `(n, m)` pairs with `0 <= m <= n <= order` and `n − m` even.
pub fn zm_feature_count(order: usize) -> usize {
    zm_pairs(order).count()
}

/// Feature order: ascending `n`, then ascending `m >= 0`.
pub fn zm_pairs(order: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..=order).flat_map(|n| (n % 2..=n).step_by(2).map(move |m| (n, m)))
}

fn factorial(k: usize) -> u128 {
    (1..=k as u128).product()
}

/// Integer coefficients of `R_nm`, highest power first: entry `s` multiplies `ρ^{n−2s}`.
fn radial_coefficients(n: usize, m: usize) -> Vec<f64> {
    let half_plus = (n + m) / 2;
    let half_minus = (n - m) / 2;
    (0..=half_minus)
        .map(|s| {
            let mag = factorial(n - s)
                / (factorial(s) * factorial(half_plus - s) * factorial(half_minus - s));
            let mag = mag as f64;
            if s % 2 == 0 {
                mag
            } else {
                -mag
            }
        })
        .collect()
}

fn validate(n: usize, m: i64) -> Result<usize> {
    let am = m.unsigned_abs() as usize;
    if am > n || (n - am) % 2 != 0 {
        return Err(Error::InvalidZernikeIndex { n, m });
    }
    Ok(am)
}

fn eval_radial(coeffs: &[f64], n: usize, rho: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(s, c)| c * rho.powi((n - 2 * s) as i32))
        .sum()
}

/// Radial polynomial `R_nm(ρ)`.
pub fn zernike_radial(n: usize, m: i64, rho: f64) -> Result<f64> {
    let am = validate(n, m)?;
    debug_assert!((0.0..=1.0).contains(&rho));
    Ok(eval_radial(&radial_coefficients(n, am), n, rho))
}

/// Number of pixel centers outside the unit disk for an `side×side` grid.
pub fn excluded_pixel_count(side: usize) -> usize {
    disk_pixels(side).filter(|p| p.is_none()).count()
}

fn disk_pixels(side: usize) -> impl Iterator<Item = Option<(usize, f64, f64)>> {
    (0..side * side).map(move |k| {
        let x = pixel_center(k / side, side);
        let y = pixel_center(k % side, side);
        let rho = (x * x + y * y).sqrt();
        (rho <= 1.0).then(|| (k, rho, y.atan2(x)))
    })
}

/// Complex moment `A_nm` for any valid `(n, m)`, including `m < 0`.
/// Evaluated from scratch; use [`ZernikeBasis`] for bulk extraction.
pub fn zm_complex(image: &GrayImage, n: usize, m: i64) -> Result<Complex64> {
    let am = validate(n, m)?;
    let side = image.side();
    let coeffs = radial_coefficients(n, am);
    let area = (2.0 / side as f64).powi(2);
    let mut acc = Complex64::new(0.0, 0.0);
    for (k, rho, theta) in disk_pixels(side).flatten() {
        let r = eval_radial(&coeffs, n, rho);
        acc += image.pixels()[k] * r * Complex64::from_polar(1.0, -(m as f64) * theta);
    }
    Ok(acc * ((n + 1) as f64 / PI * area))
}

/// Conjugated basis values `R_nm(ρ) e^{−jmθ}` at every in-disk pixel center.
#[derive(Debug, Clone)]
pub struct ZernikeBasis {
    order: usize,
    side: usize,
    pixels: Vec<usize>,
    /// One row per `(n, m)` pair in feature order, already scaled by `(n+1)/π · ΔxΔy`.
    values: Vec<Complex64>,
}

impl ZernikeBasis {
    pub fn build(order: usize, side: usize) -> Self {
        assert!(side >= 1, "side must be positive");
        let disk: Vec<(usize, f64, f64)> = disk_pixels(side).flatten().collect();
        let area = (2.0 / side as f64).powi(2);
        let mut values = Vec::with_capacity(zm_feature_count(order) * disk.len());
        for (n, m) in zm_pairs(order) {
            let coeffs = radial_coefficients(n, m);
            let scale = (n + 1) as f64 / PI * area;
            values.extend(disk.iter().map(|&(_, rho, theta)| {
                Complex64::from_polar(scale * eval_radial(&coeffs, n, rho), -(m as f64) * theta)
            }));
        }
        Self {
            order,
            side,
            pixels: disk.into_iter().map(|(k, _, _)| k).collect(),
            values,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// Complex moments `A_nm` for `m >= 0` in feature order.
    pub fn complex_moments(&self, image: &GrayImage) -> Result<Vec<Complex64>> {
        if image.side() != self.side {
            return Err(Error::SideMismatch {
                kernel: self.side,
                image: image.side(),
            });
        }
        let f: Vec<f64> = self.pixels.iter().map(|&k| image.pixels()[k]).collect();
        Ok(self
            .values
            .chunks_exact(self.pixels.len().max(1))
            .take(zm_feature_count(self.order))
            .map(|row| {
                row.iter()
                    .zip(&f)
                    .fold(Complex64::new(0.0, 0.0), |acc, (v, &fv)| acc + v * fv)
            })
            .collect())
    }

    pub fn moments(&self, image: &GrayImage) -> Result<FeatureVector> {
        let values = self
            .complex_moments(image)?
            .into_iter()
            .map(|a| a.norm())
            .collect();
        Ok(FeatureVector::new(Method::Zm, self.order, values))
    }
}

/// Zernike magnitudes `|A_nm|` up to `order` using a fresh basis.
pub fn zm_compute(image: &GrayImage, order: usize) -> Result<FeatureVector> {
    ZernikeBasis::build(order, image.side()).moments(image)
}
