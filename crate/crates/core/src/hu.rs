//! Geometric moments and Hu's seven invariants.
//!
//! Coordinates are zero-based pixel indices with x = column and y = row.
//! Normalization is `η_pq = μ_pq / μ_00^γ`, `γ = (p+q)/2 + 1`. The seven
//! invariants:
//!
//! ```text
//! φ1 = η20 + η02
//! φ2 = (η20 − η02)² + 4η11²
//! φ3 = (η30 − 3η12)² + (3η21 − η03)²
//! φ4 = (η30 + η12)² + (η21 + η03)²
//! φ5 = (η30 − 3η12)(η30 + η12)[(η30 + η12)² − 3(η21 + η03)²]
//!    + (3η21 − η03)(η21 + η03)[3(η30 + η12)² − (η21 + η03)²]
//! φ6 = (η20 − η02)[(η30 + η12)² − (η21 + η03)²] + 4η11(η30 + η12)(η21 + η03)
//! φ7 = (3η21 − η03)(η30 + η12)[(η30 + η12)² − 3(η21 + η03)²]
//!    − (η30 − 3η12)(η21 + η03)[3(η30 + η12)² − (η21 + η03)²]
//! ```
//!
//! φ7 changes sign under reflection.

use crate::error::{Error, Result};
use crate::feature::{FeatureVector, Method};
use crate::image_io::GrayImage;

/// `m_pq = Σ x^p y^q f(x, y)`.
pub fn raw_moment(image: &GrayImage, p: u32, q: u32) -> f64 {
    let n = image.side();
    let mut acc = 0.0;
    for row in 0..n {
        let yq = (row as f64).powi(q as i32);
        for col in 0..n {
            acc += (col as f64).powi(p as i32) * yq * image.get(row, col);
        }
    }
    acc
}

/// Centroid `(x̄, ȳ)`; fails on an all-zero image.
pub fn centroid(image: &GrayImage) -> Result<(f64, f64)> {
    let m00 = raw_moment(image, 0, 0);
    if m00 <= 0.0 {
        return Err(Error::DegenerateImage);
    }
    Ok((raw_moment(image, 1, 0) / m00, raw_moment(image, 0, 1) / m00))
}

/// `μ_pq = Σ (x − x̄)^p (y − ȳ)^q f(x, y)`.
pub fn central_moment(image: &GrayImage, p: u32, q: u32) -> Result<f64> {
    let (xbar, ybar) = centroid(image)?;
    let n = image.side();
    let mut acc = 0.0;
    for row in 0..n {
        let dy = (row as f64 - ybar).powi(q as i32);
        for col in 0..n {
            acc += (col as f64 - xbar).powi(p as i32) * dy * image.get(row, col);
        }
    }
    Ok(acc)
}

/// Normalized central moments `η_pq` for `p + q <= 3`, indexed `[p][q]`.
fn normalized_moments(image: &GrayImage) -> Result<[[f64; 4]; 4]> {
    let (xbar, ybar) = centroid(image)?;
    let n = image.side();
    let mut mu = [[0.0; 4]; 4];
    for row in 0..n {
        let dy = row as f64 - ybar;
        for col in 0..n {
            let f = image.get(row, col);
            if f == 0.0 {
                continue;
            }
            let dx = col as f64 - xbar;
            let xs = [1.0, dx, dx * dx, dx * dx * dx];
            let ys = [1.0, dy, dy * dy, dy * dy * dy];
            for p in 0..4 {
                for q in 0..4 - p {
                    mu[p][q] += xs[p] * ys[q] * f;
                }
            }
        }
    }
    let mu00 = mu[0][0];
    let mut eta = [[0.0; 4]; 4];
    for p in 0..4 {
        for q in 0..4 - p {
            let gamma = (p + q) as f64 / 2.0 + 1.0;
            eta[p][q] = mu[p][q] / mu00.powf(gamma);
        }
    }
    Ok(eta)
}

/// Hu's seven moment invariants `(φ1, …, φ7)`.
pub fn hu_invariants(image: &GrayImage) -> Result<FeatureVector> {
    let e = normalized_moments(image)?;
    let (n20, n02, n11) = (e[2][0], e[0][2], e[1][1]);
    let (n30, n03, n21, n12) = (e[3][0], e[0][3], e[2][1], e[1][2]);

    let a = n30 + n12;
    let b = n21 + n03;
    let c = n30 - 3.0 * n12;
    let d = 3.0 * n21 - n03;

    let phi = vec![
        n20 + n02,
        (n20 - n02).powi(2) + 4.0 * n11 * n11,
        c * c + d * d,
        a * a + b * b,
        c * a * (a * a - 3.0 * b * b) + d * b * (3.0 * a * a - b * b),
        (n20 - n02) * (a * a - b * b) + 4.0 * n11 * a * b,
        d * a * (a * a - 3.0 * b * b) - c * b * (3.0 * a * a - b * b),
    ];
    Ok(FeatureVector::new(Method::Mi, 0, phi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pattern(side: usize, offset: (usize, usize)) -> GrayImage {
        // An asymmetric L-shaped blob with graded intensity.
        let mut px = vec![0.0; side * side];
        let shape = [
            (0, 0, 1.0),
            (1, 0, 0.8),
            (2, 0, 0.6),
            (3, 0, 0.9),
            (3, 1, 0.5),
            (3, 2, 0.7),
            (1, 1, 0.2),
            (0, 3, 0.1),
        ];
        for (r, c, v) in shape {
            px[(r + offset.0) * side + c + offset.1] = v;
        }
        GrayImage::new(side, px).unwrap()
    }

    #[test]
    fn raw_moments_examples() {
        let zero = GrayImage::filled(4, 0.0).unwrap();
        assert_eq!(raw_moment(&zero, 2, 1), 0.0);

        let delta = GrayImage::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(raw_moment(&delta, 0, 0), 1.0);
        assert_eq!(raw_moment(&delta, 1, 0), 0.0);
        assert_eq!(raw_moment(&delta, 0, 1), 0.0);
    }

    #[test]
    fn center_pixel_fixture() {
        // f = 1.0 at center of 3x3 (value 2 would exceed [0,1]; scale by 2 below).
        let img = GrayImage::from_rows(&[
            vec![0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0],
        ])
        .unwrap();
        assert_eq!(2.0 * raw_moment(&img, 0, 0), 2.0);
        assert_eq!(2.0 * raw_moment(&img, 1, 0), 2.0);
        assert_eq!(2.0 * raw_moment(&img, 1, 1), 2.0);
        assert_eq!(central_moment(&img, 2, 0).unwrap(), 0.0);
    }

    #[test]
    fn raw_moment_matches_brute_force() {
        let img = pattern(8, (2, 3));
        for p in 0..4u32 {
            for q in 0..4u32 {
                let mut acc = 0.0;
                for y in 0..8 {
                    for x in 0..8 {
                        acc += (x as f64).powi(p as i32)
                            * (y as f64).powi(q as i32)
                            * img.pixels()[y * 8 + x];
                    }
                }
                assert_eq!(raw_moment(&img, p, q), acc);
            }
        }
    }

    #[test]
    fn first_central_moments_vanish() {
        let img = pattern(9, (1, 4));
        assert!(central_moment(&img, 1, 0).unwrap().abs() < 1e-10);
        assert!(central_moment(&img, 0, 1).unwrap().abs() < 1e-10);
    }

    #[test]
    fn degenerate_image_rejected() {
        let zero = GrayImage::filled(5, 0.0).unwrap();
        assert!(matches!(central_moment(&zero, 1, 1), Err(Error::DegenerateImage)));
        assert!(matches!(hu_invariants(&zero), Err(Error::DegenerateImage)));
    }

    #[test]
    fn translation_invariance() {
        let a = pattern(12, (0, 0));
        let b = pattern(12, (5, 7));
        for p in 0..4 {
            for q in 0..4 - p {
                let (ma, mb) = (
                    central_moment(&a, p, q).unwrap(),
                    central_moment(&b, p, q).unwrap(),
                );
                assert!((ma - mb).abs() < 1e-9);
            }
        }
        let (ha, hb) = (hu_invariants(&a).unwrap(), hu_invariants(&b).unwrap());
        for (x, y) in ha.values.iter().zip(&hb.values) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn rotation_invariance() {
        let img = pattern(10, (3, 2));
        let base = hu_invariants(&img).unwrap();
        let mut rot = img.clone();
        for _ in 0..3 {
            rot = rot.rotate90();
            let h = hu_invariants(&rot).unwrap();
            for k in 0..6 {
                assert!((base.values[k] - h.values[k]).abs() < 1e-8, "phi{}", k + 1);
            }
            assert!((base.values[6].abs() - h.values[6].abs()).abs() < 1e-8);
        }
    }

    #[test]
    fn mirror_flips_phi7() {
        let img = pattern(8, (1, 1));
        let n = img.side();
        let mut px = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                px[r * n + (n - 1 - c)] = img.get(r, c);
            }
        }
        let m = GrayImage::new(n, px).unwrap();
        let (a, b) = (hu_invariants(&img).unwrap(), hu_invariants(&m).unwrap());
        assert!(a.values[6].abs() > 1e-6);
        assert!((a.values[6] + b.values[6]).abs() < 1e-10);
    }

    #[test]
    fn upsampling_keeps_phi1() {
        // Graded asymmetric blob of ~70 pixels.
        let n = 16;
        let px = (0..n * n)
            .map(|k| {
                let (r, c) = ((k / n) as f64 - 7.0, (k % n) as f64 - 6.0);
                if r * r / 30.0 + c * c / 12.0 <= 1.0 {
                    0.4 + 0.5 * ((r + c) / 12.0).abs().min(1.0)
                } else {
                    0.0
                }
            })
            .collect();
        let img = GrayImage::new(n, px).unwrap();
        let mut up = vec![0.0; 4 * n * n];
        for r in 0..2 * n {
            for c in 0..2 * n {
                up[r * 2 * n + c] = img.get(r / 2, c / 2);
            }
        }
        let up = GrayImage::new(2 * n, up).unwrap();
        let (a, b) = (hu_invariants(&img).unwrap(), hu_invariants(&up).unwrap());
        let rel = (a.values[0] - b.values[0]).abs() / a.values[0];
        assert!(rel < 5e-2, "rel = {rel}");
    }

    #[test]
    fn symmetric_cross_has_no_eta11() {
        let n = 9;
        let mut px = vec![0.0; n * n];
        for k in 0..n {
            px[4 * n + k] = 1.0;
            px[k * n + 4] = 1.0;
        }
        for k in 2..7 {
            px[4 * n + k] = 0.6;
        }
        px[4 * n + 4] = 1.0;
        let img = GrayImage::new(n, px).unwrap();
        let eta = normalized_moments(&img).unwrap();
        assert!(eta[1][1].abs() < 1e-12);
        let h = hu_invariants(&img).unwrap();
        assert!((h.values[1] - (eta[2][0] - eta[0][2]).powi(2)).abs() < 1e-10);
        assert_eq!(h.dim(), 7);
    }
}
