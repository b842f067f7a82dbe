//! Canny edge detection: Gaussian smoothing, Sobel gradients, non-maximum
//! suppression over four quantized directions, and hysteresis.

use std::collections::VecDeque;
use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imaging::{BinaryMask, GrayImage};

/// Fixed-point scale of the quantized Gaussian kernel.
const KERNEL_SCALE: u64 = 1 << 16;

/// Per-pixel Sobel response.
#[derive(Clone, Debug)]
pub struct GradientField {
    width: u32,
    height: u32,
    gx: Vec<f64>,
    gy: Vec<f64>,
    magnitude: Vec<f64>,
    direction: Vec<f64>,
}

impl GradientField {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    fn idx(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }

    pub fn gx(&self, x: u32, y: u32) -> f64 {
        self.gx[self.idx(x, y)]
    }

    pub fn gy(&self, x: u32, y: u32) -> f64 {
        self.gy[self.idx(x, y)]
    }

    pub fn magnitude(&self, x: u32, y: u32) -> f64 {
        self.magnitude[self.idx(x, y)]
    }

    /// Gradient angle in `(-pi, pi]`.
    pub fn direction(&self, x: u32, y: u32) -> f64 {
        self.direction[self.idx(x, y)]
    }

    pub fn max_magnitude(&self) -> f64 {
        self.magnitude.iter().copied().fold(0.0, f64::max)
    }

    /// Every component multiplied by `k > 0`.
    pub fn scaled(&self, k: f64) -> GradientField {
        let mul = |v: &[f64]| v.iter().map(|a| a * k).collect::<Vec<_>>();
        GradientField {
            width: self.width,
            height: self.height,
            gx: mul(&self.gx),
            gy: mul(&self.gy),
            magnitude: mul(&self.magnitude),
            direction: self.direction.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeMap {
    pub mask: BinaryMask,
}

impl EdgeMap {
    pub fn width(&self) -> u32 {
        self.mask.width()
    }

    pub fn height(&self) -> u32 {
        self.mask.height()
    }

    pub fn count(&self) -> usize {
        self.mask.count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CannyParams {
    pub sigma: f64,
    /// Weak threshold as a fraction of the maximum gradient magnitude.
    pub low: f64,
    /// Strong threshold as a fraction of the maximum gradient magnitude.
    pub high: f64,
}

impl Default for CannyParams {
    fn default() -> Self {
        Self {
            sigma: 1.4,
            low: 0.1,
            high: 0.25,
        }
    }
}

impl CannyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidSigma(self.sigma));
        }
        if !(0.0 <= self.low && self.low < self.high && self.high <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "canny thresholds need 0 <= low < high <= 1, got low={} high={}",
                self.low, self.high
            )));
        }
        Ok(())
    }
}

/// Integer Gaussian taps for offsets `-radius..=radius`, summing to
/// exactly [`KERNEL_SCALE`].
fn gaussian_kernel(sigma: f64) -> Vec<u64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let weights: Vec<f64> = (-radius..=radius)
        .map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    let mut taps: Vec<u64> = weights
        .iter()
        .map(|w| (w / total * KERNEL_SCALE as f64).round() as u64)
        .collect();
    let sum: u64 = taps.iter().sum();
    let center = radius as usize;
    taps[center] = taps[center] + KERNEL_SCALE - sum;
    taps
}

/// Separable Gaussian blur with replicated borders.
///
/// Kernel radius is `ceil(3 sigma)`. Both passes accumulate in integers and
/// the result is rounded once at the end.
pub fn gaussian_blur(img: &GrayImage, sigma: f64) -> Result<GrayImage> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidSigma(sigma));
    }
    let taps = gaussian_kernel(sigma);
    let radius = (taps.len() / 2) as i64;
    let (w, h) = (img.width() as usize, img.height() as usize);
    if w == 0 || h == 0 {
        return Ok(img.clone());
    }
    let src = img.data();

    let mut horiz = vec![0u64; w * h];
    horiz.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let line = &src[y * w..(y + 1) * w];
        for (x, out) in row.iter_mut().enumerate() {
            let mut acc = 0u64;
            for (k, &t) in taps.iter().enumerate() {
                let sx = (x as i64 + k as i64 - radius).clamp(0, w as i64 - 1) as usize;
                acc += t * line[sx] as u64;
            }
            *out = acc;
        }
    });

    let denom = KERNEL_SCALE * KERNEL_SCALE;
    let mut out = vec![0u8; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, px) in row.iter_mut().enumerate() {
            let mut acc = 0u64;
            for (k, &t) in taps.iter().enumerate() {
                let sy = (y as i64 + k as i64 - radius).clamp(0, h as i64 - 1) as usize;
                acc += t * horiz[sy * w + x];
            }
            *px = ((acc + denom / 2) / denom).min(255) as u8;
        }
    });
    GrayImage::new(img.width(), img.height(), out)
}

/// 3x3 Sobel gradients with replicated borders.
///
/// `gx` is positive where intensity rises to the right and `gy` where it
/// rises downward.
pub fn sobel_gradients(img: &GrayImage) -> Result<GradientField> {
    let (w, h) = (img.width(), img.height());
    if w < 3 || h < 3 {
        return Err(Error::ImageTooSmall(w, h));
    }
    let n = w as usize * h as usize;
    let at = |x: i64, y: i64| -> f64 {
        let cx = x.clamp(0, w as i64 - 1) as u32;
        let cy = y.clamp(0, h as i64 - 1) as u32;
        img.get(cx, cy) as f64
    };
    let mut gx = Vec::with_capacity(n);
    let mut gy = Vec::with_capacity(n);
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let dx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            let dy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
            gx.push(dx);
            gy.push(dy);
        }
    }
    let magnitude = gx.iter().zip(&gy).map(|(a, b)| a.hypot(*b)).collect();
    let direction = gx
        .iter()
        .zip(&gy)
        .map(|(&a, &b)| {
            let t = b.atan2(a);
            if t <= -PI {
                PI
            } else {
                t
            }
        })
        .collect();
    Ok(GradientField {
        width: w,
        height: h,
        gx,
        gy,
        magnitude,
        direction,
    })
}

/// Neighbor step along the gradient direction, quantized to 0, 45, 90 or 135
/// degrees.
fn quantized_step(direction: f64) -> (i64, i64) {
    let mut deg = direction.to_degrees() % 180.0;
    if deg < 0.0 {
        deg += 180.0;
    }
    if !(22.5..157.5).contains(&deg) {
        (1, 0)
    } else if deg < 67.5 {
        (1, 1)
    } else if deg < 112.5 {
        (0, 1)
    } else {
        (-1, 1)
    }
}

/// Non-maximum suppression and hysteresis on a precomputed gradient field.
pub fn edges_from_gradients(grads: &GradientField, low: f64, high: f64) -> EdgeMap {
    let (w, h) = (grads.width, grads.height);
    let mut mask = BinaryMask::new(w, h);
    let max_mag = grads.max_magnitude();
    if max_mag <= 0.0 {
        return EdgeMap { mask };
    }
    let weak_t = low * max_mag;
    let strong_t = high * max_mag;
    let mag_at = |x: i64, y: i64| -> f64 {
        let cx = x.clamp(0, w as i64 - 1) as u32;
        let cy = y.clamp(0, h as i64 - 1) as u32;
        grads.magnitude(cx, cy)
    };

    // 0 = suppressed, 1 = weak, 2 = strong
    let mut class = vec![0u8; w as usize * h as usize];
    let mut queue = VecDeque::new();
    for y in 0..h {
        for x in 0..w {
            let m = grads.magnitude(x, y);
            if m <= 0.0 || m < weak_t {
                continue;
            }
            let (sx, sy) = quantized_step(grads.direction(x, y));
            let behind = mag_at(x as i64 - sx, y as i64 - sy);
            let ahead = mag_at(x as i64 + sx, y as i64 + sy);
            // Asymmetric comparison keeps exactly one pixel of a plateau pair.
            if m > behind && m >= ahead {
                let i = y as usize * w as usize + x as usize;
                if m >= strong_t {
                    class[i] = 2;
                    queue.push_back((x, y));
                } else {
                    class[i] = 1;
                }
            }
        }
    }

    while let Some((x, y)) = queue.pop_front() {
        mask.set(x, y, true);
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                let nx = x as i64 + dx;
                let ny = y as i64 + dy;
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let i = ny as usize * w as usize + nx as usize;
                if class[i] == 1 {
                    class[i] = 2;
                    queue.push_back((nx as u32, ny as u32));
                }
            }
        }
    }
    EdgeMap { mask }
}

/// Canny detector returning the edge map together with the gradient field
/// of the smoothed image, which the circle search reuses.
pub fn canny_with_gradients(img: &GrayImage, p: &CannyParams) -> Result<(EdgeMap, GradientField)> {
    p.validate()?;
    if img.width() < 3 || img.height() < 3 {
        return Err(Error::ImageTooSmall(img.width(), img.height()));
    }
    let blurred = gaussian_blur(img, p.sigma)?;
    let grads = sobel_gradients(&blurred)?;
    let edges = edges_from_gradients(&grads, p.low, p.high);
    Ok((edges, grads))
}

pub fn canny(img: &GrayImage, p: &CannyParams) -> Result<EdgeMap> {
    canny_with_gradients(img, p).map(|(e, _)| e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn step_image(w: u32, h: u32, at: u32) -> GrayImage {
        GrayImage::from_fn(w, h, |x, _| if x < at { 0 } else { 255 })
    }

    #[test]
    fn blur_of_constant_is_constant() {
        let img = GrayImage::filled(9, 7, 93);
        assert_eq!(gaussian_blur(&img, 1.7).unwrap(), img);
    }

    #[test]
    fn blur_impulse_peak_matches_kernel() {
        // Hand oracle: 1-D taps exp(-k^2/2) for k in -3..=3, normalized.
        let w: Vec<f64> = (-3i32..=3).map(|k| (-(k * k) as f64 / 2.0).exp()).collect();
        let peak = w[3] / w.iter().sum::<f64>();
        let expected = (255.0 * peak * peak).round() as u8;
        assert_eq!(expected, 41);
        let img = GrayImage::from_fn(15, 15, |x, y| if x == 7 && y == 7 { 255 } else { 0 });
        let b = gaussian_blur(&img, 1.0).unwrap();
        assert_eq!(b.get(7, 7), expected);
    }

    #[test]
    fn blur_semigroup() {
        let img = GrayImage::from_fn(
            40,
            40,
            |x, y| {
                if (x / 8 + y / 8) % 2 == 0 {
                    30
                } else {
                    220
                }
            },
        );
        let s = 1.5;
        let twice = gaussian_blur(&gaussian_blur(&img, s).unwrap(), s).unwrap();
        let once = gaussian_blur(&img, s * 2f64.sqrt()).unwrap();
        let dev = twice
            .data()
            .iter()
            .zip(once.data())
            .map(|(a, b)| (*a as i32 - *b as i32).abs())
            .max()
            .unwrap();
        assert!(dev <= 2, "max deviation {dev}");
    }

    #[test]
    fn blur_rejects_bad_sigma() {
        let img = GrayImage::filled(4, 4, 0);
        assert!(matches!(
            gaussian_blur(&img, 0.0),
            Err(Error::InvalidSigma(_))
        ));
        assert!(gaussian_blur(&img, -1.0).is_err());
    }

    #[test]
    fn sobel_constant_and_steps() {
        let g = sobel_gradients(&GrayImage::filled(5, 5, 77)).unwrap();
        assert_eq!(g.max_magnitude(), 0.0);

        let g = sobel_gradients(&step_image(10, 6, 5)).unwrap();
        for y in 0..6 {
            assert_eq!(g.gx(4, y), 1020.0);
            assert_eq!(g.gx(5, y), 1020.0);
            assert_eq!(g.gx(2, y), 0.0);
            assert_eq!(g.gy(4, y), 0.0);
        }

        let horiz = GrayImage::from_fn(6, 10, |_, y| if y < 5 { 0 } else { 255 });
        let g = sobel_gradients(&horiz).unwrap();
        assert_eq!(g.gx(3, 4), 0.0);
        assert_eq!(g.gy(3, 4), 1020.0);
        assert!((g.direction(3, 4) - PI / 2.0).abs() < 1e-12);
        let flipped = GrayImage::from_fn(6, 10, |_, y| if y < 5 { 255 } else { 0 });
        let g = sobel_gradients(&flipped).unwrap();
        assert!((g.direction(3, 4) + PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn sobel_needs_three_pixels() {
        assert!(matches!(
            sobel_gradients(&GrayImage::filled(2, 5, 0)),
            Err(Error::ImageTooSmall(2, 5))
        ));
    }

    #[test]
    fn direction_range_and_magnitude() {
        let img = GrayImage::from_fn(12, 12, |x, y| ((x * 37 + y * 91) % 251) as u8);
        let g = sobel_gradients(&img).unwrap();
        for y in 0..12 {
            for x in 0..12 {
                let d = g.direction(x, y);
                assert!(d > -PI && d <= PI);
                assert!((g.magnitude(x, y) - g.gx(x, y).hypot(g.gy(x, y))).abs() < 1e-6);
            }
        }
        // gx < 0, gy = -0.0 would give atan2 = -pi without normalization
        let left_bright = step_image(6, 6, 3);
        let inv = GrayImage::from_fn(6, 6, |x, y| 255 - left_bright.get(x, y));
        let g = sobel_gradients(&inv).unwrap();
        assert_eq!(g.direction(2, 2), PI);
    }

    #[test]
    fn canny_constant_is_empty() {
        let e = canny(&GrayImage::filled(20, 20, 128), &CannyParams::default()).unwrap();
        assert_eq!(e.count(), 0);
    }

    #[test]
    fn canny_vertical_step_is_single_chain() {
        let img = step_image(30, 20, 15);
        let p = CannyParams {
            sigma: 1.0,
            low: 0.1,
            high: 0.3,
        };
        let e = canny(&img, &p).unwrap();
        let mut cols = std::collections::BTreeSet::new();
        for y in 0..20 {
            let row: Vec<u32> = (0..30).filter(|&x| e.mask.get(x, y)).collect();
            assert_eq!(row.len(), 1, "row {y}: {row:?}");
            cols.insert(row[0]);
        }
        assert_eq!(cols.len(), 1);
        let c = *cols.iter().next().unwrap();
        assert!(c == 14 || c == 15);
    }

    /// Anti-aliased disc by 4x4 supersampling.
    fn disc_image(size: u32, cx: f64, cy: f64, r: f64) -> GrayImage {
        GrayImage::from_fn(size, size, |x, y| {
            let mut inside = 0;
            for sy in 0..4 {
                for sx in 0..4 {
                    let px = x as f64 - 0.375 + sx as f64 * 0.25;
                    let py = y as f64 - 0.375 + sy as f64 * 0.25;
                    if (px - cx).hypot(py - cy) <= r {
                        inside += 1;
                    }
                }
            }
            (40.0 + 160.0 * inside as f64 / 16.0).round() as u8
        })
    }

    #[test]
    fn canny_disc_edges_hug_the_circle() {
        let (cx, cy, r) = (50.0, 50.0, 30.0);
        let img = disc_image(100, cx, cy, r);
        let e = canny(&img, &CannyParams::default()).unwrap();
        let pts: Vec<(f64, f64)> = e.mask.points().map(|(x, y)| (x as f64, y as f64)).collect();
        for &(x, y) in &pts {
            let d = ((x - cx).hypot(y - cy) - r).abs();
            assert!(d <= 1.5, "edge pixel ({x},{y}) off circle by {d}");
        }
        let covered = (0..360)
            .filter(|&deg| {
                let t = (deg as f64).to_radians();
                let (qx, qy) = (cx + r * t.cos(), cy + r * t.sin());
                pts.iter().any(|&(x, y)| (x - qx).hypot(y - qy) <= 1.5)
            })
            .count();
        assert!(covered >= 324, "covered {covered}/360");
    }

    #[test]
    fn canny_invariants_on_texture() {
        let img = disc_image(64, 30.3, 33.1, 17.0);
        let p = CannyParams::default();
        let (e, g) = canny_with_gradients(&img, &p).unwrap();
        let max = g.max_magnitude();
        for (x, y) in e.mask.points() {
            assert!(g.magnitude(x, y) >= p.low * max);
        }
        // every 8-connected component holds a strong pixel
        let mut seen = BinaryMask::new(64, 64);
        for (x, y) in e.mask.points() {
            if seen.get(x, y) {
                continue;
            }
            let mut stack = vec![(x, y)];
            seen.set(x, y, true);
            let mut has_strong = false;
            while let Some((px, py)) = stack.pop() {
                has_strong |= g.magnitude(px, py) >= p.high * max;
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let (nx, ny) = (px as i64 + dx, py as i64 + dy);
                        if e.mask.get_signed(nx, ny) && !seen.get(nx as u32, ny as u32) {
                            seen.set(nx as u32, ny as u32, true);
                            stack.push((nx as u32, ny as u32));
                        }
                    }
                }
            }
            assert!(has_strong);
        }
    }

    #[test]
    fn canny_rejects_bad_params() {
        let img = GrayImage::filled(8, 8, 0);
        let bad = CannyParams {
            sigma: 1.0,
            low: 0.3,
            high: 0.3,
        };
        assert!(matches!(canny(&img, &bad), Err(Error::InvalidParams(_))));
        let bad = CannyParams {
            sigma: 0.0,
            ..Default::default()
        };
        assert!(matches!(canny(&img, &bad), Err(Error::InvalidSigma(_))));
        assert!(matches!(
            canny(&GrayImage::filled(2, 8, 0), &CannyParams::default()),
            Err(Error::ImageTooSmall(..))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn edges_ignore_intensity_offset(seed in 0u64..1000, k in 0u8..60) {
            let img = GrayImage::from_fn(24, 24, |x, y| {
                let v = (x as u64 * 7 + y as u64 * 13 + seed * 31) % 97;
                if ((x as i64 - 12).pow(2) + (y as i64 - 11).pow(2)) < 50 { 100 + v as u8 } else { 20 + (v / 3) as u8 }
            });
            let shifted = GrayImage::from_fn(24, 24, |x, y| img.get(x, y) + k);
            let p = CannyParams::default();
            prop_assert_eq!(canny(&img, &p).unwrap(), canny(&shifted, &p).unwrap());
        }

        #[test]
        fn edges_ignore_gradient_scale(seed in 0u64..1000, pow in 0i32..6) {
            let img = GrayImage::from_fn(20, 20, |x, y| ((x as u64 * 11 + y as u64 * 5 + seed) % 200) as u8);
            let g = sobel_gradients(&gaussian_blur(&img, 1.0).unwrap()).unwrap();
            let k = 2f64.powi(pow - 2);
            prop_assert_eq!(
                edges_from_gradients(&g, 0.1, 0.25),
                edges_from_gradients(&g.scaled(k), 0.1, 0.25)
            );
        }
    }
}
