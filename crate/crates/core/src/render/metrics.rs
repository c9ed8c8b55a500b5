//! Image metrics: L1, SSIM / D-SSIM, PSNR.
//!
//! Metrics operate on RGB float images with values in [0, 1]; use
//! [`FloatImage::from_render`] to compare rendered frames. SSIM follows the
//! standard single-scale recipe: 11x11 Gaussian window (sigma 1.5),
//! K1 = 0.01, K2 = 0.03 on unit dynamic range, per-channel then averaged,
//! valid windows only.

use crate::error::{Error, Result};
use crate::render::RenderImage;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 1e-4; // (0.01 * L)^2, L = 1
pub const SSIM_C2: f64 = 9e-4; // (0.03 * L)^2

/// Value reported for PSNR when the images are identical (mse = 0).
pub const PSNR_SENTINEL_DB: f64 = 99.0;

/// RGB image with f64 channels in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct FloatImage {
    width: usize,
    height: usize,
    /// Row-major, 3 channels interleaved.
    data: Vec<f64>,
}

impl FloatImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::LengthMismatch {
                expected: width * height * 3,
                got: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn uniform(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height * 3],
        }
    }

    /// RGB channels of a rendered frame scaled to [0, 1]; alpha is ignored.
    pub fn from_render(img: &RenderImage) -> Self {
        let mut data = Vec::with_capacity((img.width() * img.height()) as usize * 3);
        for p in img.rgba() {
            data.push(p[0] as f64 / 255.0);
            data.push(p[1] as f64 / 255.0);
            data.push(p[2] as f64 / 255.0);
        }
        Self {
            width: img.width() as usize,
            height: img.height() as usize,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * 3 + c]
    }

    fn check_same_dims(&self, other: &Self) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::LengthMismatch {
                expected: self.data.len(),
                got: other.data.len(),
            });
        }
        Ok(())
    }
}

/// Mean absolute difference over all pixels and channels.
pub fn l1_loss(a: &FloatImage, b: &FloatImage) -> Result<f64> {
    a.check_same_dims(b)?;
    let n = a.data.len();
    if n == 0 {
        return Ok(0.0);
    }
    let sum: f64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x - y).abs())
        .sum();
    Ok(sum / n as f64)
}

/// Mean squared error over all pixels and channels.
pub fn mse(a: &FloatImage, b: &FloatImage) -> Result<f64> {
    a.check_same_dims(b)?;
    let n = a.data.len();
    if n == 0 {
        return Ok(0.0);
    }
    let sum: f64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sum / n as f64)
}

/// Peak signal-to-noise ratio in dB for unit dynamic range. Identical
/// images report [`PSNR_SENTINEL_DB`].
pub fn psnr(a: &FloatImage, b: &FloatImage) -> Result<f64> {
    let m = mse(a, b)?;
    if m == 0.0 {
        return Ok(PSNR_SENTINEL_DB);
    }
    Ok(-10.0 * m.log10())
}

/// Mean SSIM over the valid window positions of all three channels.
pub fn ssim(a: &FloatImage, b: &FloatImage) -> Result<f64> {
    a.check_same_dims(b)?;
    if a.width < SSIM_WINDOW || a.height < SSIM_WINDOW {
        return Err(Error::InvalidArgument(format!(
            "image {}x{} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window",
            a.width, a.height
        )));
    }
    let weights = gaussian_window();
    let half = SSIM_WINDOW / 2;
    let mut total = 0.0f64;
    let mut count = 0u64;
    for c in 0..3 {
        for wy in half..a.height - half {
            for wx in half..a.width - half {
                let (mut mu_x, mut mu_y) = (0.0, 0.0);
                let (mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0);
                for j in 0..SSIM_WINDOW {
                    for i in 0..SSIM_WINDOW {
                        let w = weights[j * SSIM_WINDOW + i];
                        let x = a.get(wx + i - half, wy + j - half, c);
                        let y = b.get(wx + i - half, wy + j - half, c);
                        mu_x += w * x;
                        mu_y += w * y;
                        xx += w * x * x;
                        yy += w * y * y;
                        xy += w * x * y;
                    }
                }
                let var_x = xx - mu_x * mu_x;
                let var_y = yy - mu_y * mu_y;
                let cov = xy - mu_x * mu_y;
                let num = (2.0 * (mu_x * mu_y) + SSIM_C1) * (2.0 * cov + SSIM_C2);
                let den = (mu_x * mu_x + mu_y * mu_y + SSIM_C1) * (var_x + var_y + SSIM_C2);
                total += num / den;
                count += 1;
            }
        }
    }
    Ok(total / count as f64)
}

/// Structural dissimilarity `(1 - ssim) / 2`, the training-loss form.
pub fn dssim(a: &FloatImage, b: &FloatImage) -> Result<f64> {
    Ok((1.0 - ssim(a, b)?) / 2.0)
}

/// Normalized 11x11 Gaussian weights, sigma 1.5.
fn gaussian_window() -> Vec<f64> {
    let half = (SSIM_WINDOW / 2) as f64;
    let mut w = Vec::with_capacity(SSIM_WINDOW * SSIM_WINDOW);
    for j in 0..SSIM_WINDOW {
        for i in 0..SSIM_WINDOW {
            let dx = i as f64 - half;
            let dy = j as f64 - half;
            w.push((-(dx * dx + dy * dy) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp());
        }
    }
    let sum: f64 = w.iter().sum();
    for v in &mut w {
        *v /= sum;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn random_image(w: usize, h: usize, seed: u64) -> FloatImage {
        let mut rng = SplitMix64::new(seed);
        let data = (0..w * h * 3).map(|_| rng.next_f64()).collect();
        FloatImage::new(w, h, data).unwrap()
    }

    #[test]
    fn identical_images_are_perfect() {
        let img = random_image(32, 24, 5);
        assert_eq!(l1_loss(&img, &img).unwrap(), 0.0);
        assert_eq!(ssim(&img, &img).unwrap(), 1.0);
        assert_eq!(psnr(&img, &img).unwrap(), PSNR_SENTINEL_DB);
        assert_eq!(dssim(&img, &img).unwrap(), 0.0);
    }

    #[test]
    fn uniform_shift_l1_exact() {
        let a = FloatImage::uniform(16, 16, 0.25);
        let b = FloatImage::uniform(16, 16, 0.75);
        assert_eq!(l1_loss(&a, &b).unwrap(), 0.5);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let a = FloatImage::uniform(8, 8, 0.0);
        let b = FloatImage::uniform(8, 9, 0.0);
        assert!(l1_loss(&a, &b).is_err());
        assert!(ssim(&a, &b).is_err());
    }

    #[test]
    fn ssim_needs_window_sized_image() {
        let a = FloatImage::uniform(8, 8, 0.3);
        assert!(ssim(&a, &a).is_err());
    }

    #[test]
    fn ssim_in_range_and_sensitive() {
        let a = random_image(32, 32, 1);
        let b = random_image(32, 32, 2);
        let s = ssim(&a, &b).unwrap();
        assert!((-1.0..1.0).contains(&s));
        let p = psnr(&a, &b).unwrap();
        assert!(p > 0.0 && p < 20.0, "psnr of independent noise was {p}");
    }

    // Direct-formula references that deliberately use the centered-moment
    // formulation and plain loops.
    fn ssim_reference(a: &FloatImage, b: &FloatImage) -> f64 {
        let half = SSIM_WINDOW / 2;
        let weights = gaussian_window();
        let mut vals = Vec::new();
        for c in 0..3 {
            for wy in half..a.height() - half {
                for wx in half..a.width() - half {
                    let mut mu_x = 0.0;
                    let mut mu_y = 0.0;
                    for j in 0..SSIM_WINDOW {
                        for i in 0..SSIM_WINDOW {
                            let w = weights[j * SSIM_WINDOW + i];
                            mu_x += w * a.get(wx + i - half, wy + j - half, c);
                            mu_y += w * b.get(wx + i - half, wy + j - half, c);
                        }
                    }
                    let (mut var_x, mut var_y, mut cov) = (0.0, 0.0, 0.0);
                    for j in 0..SSIM_WINDOW {
                        for i in 0..SSIM_WINDOW {
                            let w = weights[j * SSIM_WINDOW + i];
                            let dx = a.get(wx + i - half, wy + j - half, c) - mu_x;
                            let dy = b.get(wx + i - half, wy + j - half, c) - mu_y;
                            var_x += w * dx * dx;
                            var_y += w * dy * dy;
                            cov += w * dx * dy;
                        }
                    }
                    let num = (2.0 * mu_x * mu_y + SSIM_C1) * (2.0 * cov + SSIM_C2);
                    let den =
                        (mu_x * mu_x + mu_y * mu_y + SSIM_C1) * (var_x + var_y + SSIM_C2);
                    vals.push(num / den);
                }
            }
        }
        vals.iter().sum::<f64>() / vals.len() as f64
    }

    #[test]
    fn metrics_match_reference_formulas() {
        let a = random_image(64, 64, 21);
        let b = random_image(64, 64, 22);

        let l1_ref: f64 = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (x - y).abs())
            .sum::<f64>()
            / a.data().len() as f64;
        assert!((l1_loss(&a, &b).unwrap() - l1_ref).abs() < 1e-6);

        let mse_ref: f64 = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            / a.data().len() as f64;
        let psnr_ref = -10.0 * mse_ref.log10();
        assert!((psnr(&a, &b).unwrap() - psnr_ref).abs() < 1e-6);

        let ssim_ref = ssim_reference(&a, &b);
        assert!((ssim(&a, &b).unwrap() - ssim_ref).abs() < 1e-6);
    }

    #[test]
    fn l1_decomposes_over_disjoint_cores() {
        // The L1 of the full frame equals the area-weighted sum of per-core
        // L1 values: losses scoped to tile cores supervise exactly the same
        // signal as a full-frame loss.
        use crate::partition::PixelRect;
        let a = random_image(64, 48, 31);
        let b = random_image(64, 48, 32);
        let full = l1_loss(&a, &b).unwrap();

        let crop = |img: &FloatImage, r: &PixelRect| -> FloatImage {
            let mut data = Vec::new();
            for y in r.y0..r.y1() {
                for x in r.x0..r.x1() {
                    for c in 0..3 {
                        data.push(img.get(x as usize, y as usize, c));
                    }
                }
            }
            FloatImage::new(r.w as usize, r.h as usize, data).unwrap()
        };

        let mut weighted = 0.0;
        for (x0, y0, w, h) in [(0, 0, 32, 24), (32, 0, 32, 24), (0, 24, 32, 24), (32, 24, 32, 24)]
        {
            let r = PixelRect { x0, y0, w, h };
            let part = l1_loss(&crop(&a, &r), &crop(&b, &r)).unwrap();
            weighted += part * (w * h) as f64 / (64.0 * 48.0);
        }
        assert!((full - weighted).abs() < 1e-12);
    }
}
