//! Exact Legendre moments.
//!
//! The image is treated as piecewise constant over an `N×N` grid of cells
//! covering `[-1, 1]²`. Each moment kernel entry is the normalized integral
//! of `P_p` over one cell, evaluated in closed form from the antiderivative
//! `∫P_p = (P_{p+1} − P_{p−1}) / (2p+1)`, which reduces to
//!
//! ```text
//! I_p(x_i) = (2p+1)/(2p+2) · [x·P_p(x) − P_{p−1}(x)] from U_i to U_{i+1}
//! ```
//!
//! so moments are exact up to floating-point rounding. Moments are
//! accumulated separably: first per-row 1D moments, then across rows.

use crate::error::{Error, Result};
use crate::feature::{FeatureVector, Method};
use crate::image_io::GrayImage;

/// `P_p(x)` by the three-term (Bonnet) recurrence.
pub fn legendre_poly(p: usize, x: f64) -> f64 {
    debug_assert!((-1.0..=1.0).contains(&x), "x = {x} outside [-1, 1]");
    match p {
        0 => 1.0,
        1 => x,
        _ => {
            let (mut prev, mut cur) = (1.0, x);
            for k in 1..p {
                let next = ((2 * k + 1) as f64 * x * cur - k as f64 * prev) / (k + 1) as f64;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// `P_0(x) ..= P_order(x)` in one recurrence sweep.
pub fn legendre_all(order: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(order + 1);
    out.push(1.0);
    if order >= 1 {
        out.push(x);
    }
    for k in 1..order {
        let next = ((2 * k + 1) as f64 * x * out[k] - k as f64 * out[k - 1]) / (k + 1) as f64;
        out.push(next);
    }
    out
}

/// Number of moments with `p + q <= g`.
pub fn elm_feature_count(g: usize) -> usize {
    (g + 1) * (g + 2) / 2
}

/// `(p, q)` pairs in feature order: ascending `p + q`, then ascending `p`.
pub fn elm_pairs(g: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..=g).flat_map(|s| (0..=s).map(move |p| (p, s - p)))
}

/// Position of `(p, q)` in the feature vector.
pub fn elm_index(p: usize, q: usize) -> usize {
    let s = p + q;
    s * (s + 1) / 2 + p
}

/// Pixel-center coordinate `x_i = −1 + (i + ½)Δx` for zero-based `i`.
#[inline]
pub fn pixel_center(i: usize, side: usize) -> f64 {
    -1.0 + (i as f64 + 0.5) * 2.0 / side as f64
}

/// Cell boundary `U_i = −1 + iΔx`, `i = 0..=side`.
#[inline]
pub fn cell_boundary(i: usize, side: usize) -> f64 {
    if i == side {
        1.0
    } else {
        -1.0 + i as f64 * 2.0 / side as f64
    }
}

/// Per-cell moment weights `table[p][i]` for `p <= order`, `i < side`.
#[derive(Debug, Clone, PartialEq)]
pub struct LegendreKernel {
    order: usize,
    side: usize,
    table: Vec<f64>,
}

impl LegendreKernel {
    /// Exact kernel: `table[p][i] = (2p+1)/2 · ∫_{U_i}^{U_{i+1}} P_p(x) dx`.
    pub fn build(order: usize, side: usize) -> Self {
        assert!(side >= 1, "side must be positive");
        // F_p(x) = x·P_p(x) − P_{p−1}(x) at every cell boundary.
        let boundary: Vec<Vec<f64>> = (0..=side)
            .map(|b| legendre_all(order, cell_boundary(b, side)))
            .collect();
        let mut table = vec![0.0; (order + 1) * side];
        table[..side].fill(1.0 / side as f64);
        for p in 1..=order {
            let scale = (2 * p + 1) as f64 / (2 * p + 2) as f64;
            let f = |b: usize| {
                let x = cell_boundary(b, side);
                x * boundary[b][p] - boundary[b][p - 1]
            };
            let row = &mut table[p * side..(p + 1) * side];
            let mut lo = f(0);
            for (i, slot) in row.iter_mut().enumerate() {
                let hi = f(i + 1);
                *slot = scale * (hi - lo);
                lo = hi;
            }
        }
        Self { order, side, table }
    }

    /// Zeroth-order (midpoint) approximation `(2p+1)/2 · P_p(x_i) · Δx`.
    /// Only useful as a contrast to [`LegendreKernel::build`].
    pub fn approximate(order: usize, side: usize) -> Self {
        assert!(side >= 1, "side must be positive");
        let dx = 2.0 / side as f64;
        let mut table = vec![0.0; (order + 1) * side];
        for i in 0..side {
            let polys = legendre_all(order, pixel_center(i, side));
            for (p, v) in polys.into_iter().enumerate() {
                table[p * side + i] = (2 * p + 1) as f64 / 2.0 * v * dx;
            }
        }
        Self { order, side, table }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn row(&self, p: usize) -> &[f64] {
        &self.table[p * self.side..(p + 1) * self.side]
    }

    #[inline]
    pub fn get(&self, p: usize, i: usize) -> f64 {
        self.table[p * self.side + i]
    }

    fn check(&self, image: &GrayImage, g: usize) -> Result<()> {
        if image.side() != self.side {
            return Err(Error::SideMismatch {
                kernel: self.side,
                image: image.side(),
            });
        }
        if g > self.order {
            return Err(Error::OrderTooLarge {
                requested: g,
                available: self.order,
            });
        }
        Ok(())
    }

    /// All moments with `p + q <= g`, computed separably.
    ///
    /// Pass one forms the 1D moment of each row, `Y[i][q] = Σ_j I_q(y_j) f(i, j)`;
    /// pass two combines rows, `L[p][q] = Σ_i I_p(x_i) Y[i][q]`.
    pub fn moments(&self, image: &GrayImage, g: usize) -> Result<FeatureVector> {
        self.check(image, g)?;
        let n = self.side;
        let mut row_moments = vec![0.0; n * (g + 1)];
        for i in 0..n {
            let row = image.row(i);
            for q in 0..=g {
                let kq = self.row(q);
                let mut acc = 0.0;
                for j in 0..n {
                    acc += kq[j] * row[j];
                }
                row_moments[i * (g + 1) + q] = acc;
            }
        }
        let mut values = vec![0.0; elm_feature_count(g)];
        for (p, q) in elm_pairs(g) {
            let kp = self.row(p);
            let mut acc = 0.0;
            for i in 0..n {
                acc += kp[i] * row_moments[i * (g + 1) + q];
            }
            values[elm_index(p, q)] = acc;
        }
        Ok(FeatureVector::new(Method::Elm, g, values))
    }

    /// Direct double sum `Σ_i Σ_j I_p(x_i) I_q(y_j) f(i, j)`; quadratic per
    /// moment, kept for cross-checking [`LegendreKernel::moments`].
    pub fn moments_direct(&self, image: &GrayImage, g: usize) -> Result<FeatureVector> {
        self.check(image, g)?;
        let n = self.side;
        let mut values = vec![0.0; elm_feature_count(g)];
        for (p, q) in elm_pairs(g) {
            let (kp, kq) = (self.row(p), self.row(q));
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    acc += kp[i] * kq[j] * image.get(i, j);
                }
            }
            values[elm_index(p, q)] = acc;
        }
        Ok(FeatureVector::new(Method::Elm, g, values))
    }
}

/// Exact Legendre moments of total order `<= g` using a fresh kernel.
/// Prefer holding a [`LegendreKernel`] when processing many images.
pub fn elm_compute(image: &GrayImage, g: usize) -> Result<FeatureVector> {
    LegendreKernel::build(g, image.side()).moments(image, g)
}

/// Midpoint-rule Legendre moments.
pub fn elm_approximate(image: &GrayImage, g: usize) -> Result<FeatureVector> {
    LegendreKernel::approximate(g, image.side()).moments(image, g)
}

/// Evaluates `Σ L_pq P_p(x_i) P_q(y_j)` at every pixel center; row-major.
pub fn elm_reconstruct(features: &FeatureVector, side: usize) -> Result<Vec<f64>> {
    let len = features.values.len();
    let g = (0..).find(|&g| elm_feature_count(g) >= len).unwrap_or(0);
    if elm_feature_count(g) != len {
        return Err(Error::InvalidArgument(format!(
            "{len} is not a triangular Legendre feature count"
        )));
    }
    let polys: Vec<Vec<f64>> = (0..side)
        .map(|i| legendre_all(g, pixel_center(i, side)))
        .collect();
    let mut out = vec![0.0; side * side];
    for i in 0..side {
        for j in 0..side {
            let mut acc = 0.0;
            for (p, q) in elm_pairs(g) {
                acc += features.values[elm_index(p, q)] * polys[i][p] * polys[j][q];
            }
            out[i * side + j] = acc;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn checker() -> GrayImage {
        GrayImage::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
    }

    fn lcg_image(side: usize, seed: u64) -> GrayImage {
        let mut s = seed;
        let px = (0..side * side)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (s >> 11) as f64 / (1u64 << 53) as f64
            })
            .collect();
        GrayImage::new(side, px).unwrap()
    }

    #[test]
    fn poly_examples() {
        assert_eq!(legendre_poly(0, 0.3), 1.0);
        for p in 0..20 {
            assert!((legendre_poly(p, 1.0) - 1.0).abs() < 1e-14);
        }
        // P_3(x) = (5x³ − 3x)/2 from Rodrigues' formula.
        let rodrigues = |x: f64| (5.0 * x * x * x - 3.0 * x) / 2.0;
        assert!((legendre_poly(3, 0.5) - rodrigues(0.5)).abs() < 1e-15);
        assert!((legendre_poly(3, 0.5) + 0.4375).abs() < 1e-15);
    }

    #[test]
    fn legendre_all_matches_single() {
        let all = legendre_all(12, -0.37);
        for (p, v) in all.iter().enumerate() {
            assert_eq!(*v, legendre_poly(p, -0.37));
        }
        assert_eq!(legendre_all(0, 0.2), vec![1.0]);
    }

    #[test]
    fn kernel_p1_n2() {
        // (3/2)∫x dx over [−1,0] and [0,1].
        let k = LegendreKernel::build(1, 2);
        assert_eq!(k.row(0), &[0.5, 0.5]);
        assert!((k.get(1, 0) + 0.75).abs() < 1e-15);
        assert!((k.get(1, 1) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn kernel_zero_row_is_one_over_n() {
        let k = LegendreKernel::build(5, 4);
        assert_eq!(k.row(0), &[0.25; 4]);
    }

    #[test]
    fn kernel_rows_sum_to_zero() {
        let k = LegendreKernel::build(6, 128);
        for p in 1..=6 {
            let s: f64 = k.row(p).iter().sum();
            assert!(s.abs() < 1e-12, "p={p} sum={s}");
        }
        let s0: f64 = k.row(0).iter().sum();
        assert!((s0 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn kernel_matches_gauss_quadrature() {
        // 5-point Gauss–Legendre per cell is exact for degree ≤ 9.
        let nodes = [
            (0.0, 128.0 / 225.0),
            (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
            (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
            (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
            (0.906_179_845_938_664, 0.236_926_885_056_189_1),
        ];
        let side = 7;
        let k = LegendreKernel::build(9, side);
        for p in 0..=9 {
            for i in 0..side {
                let (a, b) = (cell_boundary(i, side), cell_boundary(i + 1, side));
                let (mid, half) = ((a + b) / 2.0, (b - a) / 2.0);
                let integral: f64 = nodes
                    .iter()
                    .map(|(t, w)| w * half * legendre_poly(p, mid + half * t))
                    .sum();
                let expect = (2 * p + 1) as f64 / 2.0 * integral;
                assert!((k.get(p, i) - expect).abs() < 1e-13, "p={p} i={i}");
            }
        }
    }

    #[test]
    fn constant_image_only_l00() {
        for side in [1, 3, 8, 33] {
            let img = GrayImage::filled(side, 0.7).unwrap();
            let f = elm_compute(&img, 3).unwrap();
            assert!((f.values[0] - 0.7).abs() < 1e-12);
            for v in &f.values[1..] {
                assert!(v.abs() < 1e-12, "side={side} v={v}");
            }
        }
    }

    #[test]
    fn checker_l11() {
        let f = elm_compute(&checker(), 2).unwrap();
        assert!((f.values[elm_index(1, 1)] + 1.125).abs() < 1e-15);
        assert_eq!(f.values.len(), 6);
    }

    #[test]
    fn feature_lengths() {
        let dims: Vec<usize> = (4..=9).map(elm_feature_count).collect();
        assert_eq!(dims, vec![15, 21, 28, 36, 45, 55]);
        let f = elm_compute(&lcg_image(16, 3), 9).unwrap();
        assert_eq!(f.dim(), 55);
    }

    #[test]
    fn index_follows_pair_order() {
        for (k, (p, q)) in elm_pairs(10).enumerate() {
            assert_eq!(elm_index(p, q), k);
        }
        let first: Vec<_> = elm_pairs(2).collect();
        assert_eq!(first, vec![(0, 0), (0, 1), (1, 0), (0, 2), (1, 1), (2, 0)]);
    }

    #[test]
    fn separable_equals_direct() {
        for (side, seed) in [(5, 1), (16, 2), (31, 3)] {
            let img = lcg_image(side, seed);
            let k = LegendreKernel::build(8, side);
            let a = k.moments(&img, 8).unwrap();
            let b = k.moments_direct(&img, 8).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!((x - y).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn side_and_order_errors() {
        let k = LegendreKernel::build(4, 8);
        assert!(matches!(
            k.moments(&lcg_image(4, 1), 2),
            Err(Error::SideMismatch { .. })
        ));
        assert!(matches!(
            k.moments(&lcg_image(8, 1), 5),
            Err(Error::OrderTooLarge { .. })
        ));
    }

    #[test]
    fn reconstruct_constant_and_zero() {
        let img = GrayImage::filled(9, 0.4).unwrap();
        let f = elm_compute(&img, 4).unwrap();
        for v in elm_reconstruct(&f, 9).unwrap() {
            assert!((v - 0.4).abs() < 1e-10);
        }
        let zero = FeatureVector::new(Method::Elm, 3, vec![0.0; 10]);
        assert!(elm_reconstruct(&zero, 5).unwrap().iter().all(|&v| v == 0.0));
        let bad = FeatureVector::new(Method::Elm, 3, vec![0.0; 7]);
        assert!(elm_reconstruct(&bad, 5).is_err());
    }

    #[test]
    fn reconstruction_improves_with_order() {
        // Smooth blob: reconstruction error should shrink as the order grows.
        let side = 32;
        let px: Vec<f64> = (0..side * side)
            .map(|k| {
                let (x, y) = (pixel_center(k / side, side), pixel_center(k % side, side));
                (-(4.0 * (x - 0.2).powi(2) + 6.0 * (y + 0.1).powi(2))).exp()
            })
            .collect();
        let img = GrayImage::new(side, px).unwrap();
        let rmse = |g| {
            let rec = elm_reconstruct(&elm_compute(&img, g).unwrap(), side).unwrap();
            let se: f64 = rec.iter().zip(img.pixels()).map(|(a, b)| (a - b).powi(2)).sum();
            (se / (side * side) as f64).sqrt()
        };
        let errs: Vec<f64> = (4..=9).map(rmse).collect();
        assert!(errs[5] < errs[0]);
        for w in errs.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{errs:?}");
        }
    }

    #[test]
    fn approximation_exact_up_to_bilinear() {
        let img = GrayImage::filled(6, 0.3).unwrap();
        let a = elm_approximate(&img, 0).unwrap();
        assert!((a.values[0] - 0.3).abs() < 1e-12);

        // The midpoint rule integrates P_1(x)P_1(y) exactly, so the two
        // agree on L_11; they split at degree 2 (exact I_2 = 0 on both cells,
        // midpoint gives 5/2·P_2(±½) = −0.3125).
        let exact = elm_compute(&checker(), 2).unwrap();
        let approx = elm_approximate(&checker(), 2).unwrap();
        assert!((exact.values[elm_index(1, 1)] - approx.values[elm_index(1, 1)]).abs() < 1e-15);
        assert!(exact.values[elm_index(2, 0)].abs() < 1e-15);
        assert!((approx.values[elm_index(2, 0)] + 0.3125).abs() < 1e-15);
    }

    #[test]
    fn approximation_error_grows_with_order() {
        let img = lcg_image(12, 9);
        let max_err = |g| {
            let e = elm_compute(&img, g).unwrap();
            let a = elm_approximate(&img, g).unwrap();
            e.values
                .iter()
                .zip(&a.values)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
        };
        assert!(max_err(9) > max_err(4));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn parity(p in 0usize..=12, x in -1.0f64..=1.0) {
                let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
                prop_assert!((legendre_poly(p, -x) - sign * legendre_poly(p, x)).abs() <= 1e-14);
            }

            #[test]
            fn kernel_rows_sum_to_zero_any_side(order in 1usize..=10, side in 1usize..=200) {
                let k = LegendreKernel::build(order, side);
                for p in 1..=order {
                    let s: f64 = k.row(p).iter().sum();
                    prop_assert!(s.abs() < 1e-12);
                }
            }
        }
    }
}
