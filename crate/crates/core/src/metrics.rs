//! Image-quality metrics over display-normalized magnitude maps.
//!
//! Comparisons mirror how reconstructions are actually displayed: each
//! image is reduced to 20 log10(|E| / peak), clipped at a dynamic range,
//! and affinely mapped to the 0..255 gray scale. RMSE, PSNR, SSIM, and
//! the histogram entropy all operate on that scale, so every metric is
//! invariant to global complex scaling of the raw fields.

use crate::{Error, ImageField, Result};

/// Display dynamic range used when none is configured, dB.
pub const DEFAULT_DYNAMIC_RANGE_DB: f64 = 15.0;
/// Histogram resolution used when none is configured.
pub const DEFAULT_ENTROPY_BINS: usize = 256;
/// PSNR reported for (near-)identical images instead of infinity, dB.
pub const PSNR_CAP_DB: f64 = 99.0;

const SSIM_WINDOW: usize = 8;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;
const SSIM_L: f64 = 255.0;

/// Similarity of a test image against a baseline, plus the test image's
/// own histogram entropy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    /// Root mean squared difference on the 0..255 display scale.
    pub rmse: f64,
    /// 20 log10(255 / rmse), capped at PSNR_CAP_DB.
    pub psnr_db: f64,
    /// Mean windowed structural similarity, in [-1, 1].
    pub ssim: f64,
    /// Histogram entropy of the test image's display map, bits.
    pub entropy_bits: f64,
}

/// Normalized display map: |E|/peak in dB, clipped to [-dynamic_range, 0]
/// and mapped affinely onto [0, 255]. Fails on an identically zero image.
pub fn display_map(image: &ImageField, dynamic_range_db: f64) -> Result<Vec<f64>> {
    if !(dynamic_range_db > 0.0) {
        return Err(Error::InvalidInput(format!(
            "dynamic range must be positive, got {dynamic_range_db}"
        )));
    }
    let peak = image.max_abs();
    if peak == 0.0 {
        return Err(Error::FlatImage);
    }
    Ok(image
        .values()
        .iter()
        .map(|v| {
            let mag = v.norm();
            let db = if mag > 0.0 {
                (20.0 * (mag / peak).log10()).max(-dynamic_range_db)
            } else {
                -dynamic_range_db
            };
            (db + dynamic_range_db) / dynamic_range_db * 255.0
        })
        .collect())
}

fn check_same_grid(a: &ImageField, b: &ImageField) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::GridMismatch);
    }
    let (ga, gb) = (a.grid(), b.grid());
    if ga.rect_meta() != gb.rect_meta() {
        return Err(Error::GridMismatch);
    }
    for (pa, pb) in ga.positions().iter().zip(gb.positions()) {
        if pa != pb {
            return Err(Error::GridMismatch);
        }
    }
    Ok(())
}

/// RMSE, PSNR, and SSIM of `test` against `baseline` on the display scale,
/// plus the entropy of the test map at the default bin count.
pub fn compare_images(
    test: &ImageField,
    baseline: &ImageField,
    dynamic_range_db: f64,
) -> Result<MetricsReport> {
    check_same_grid(test, baseline)?;
    let t = display_map(test, dynamic_range_db)?;
    let b = display_map(baseline, dynamic_range_db)?;

    let mse = t
        .iter()
        .zip(&b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / t.len() as f64;
    let rmse = mse.sqrt();
    let psnr_db = if rmse < 255.0 * 10f64.powf(-PSNR_CAP_DB / 20.0) {
        PSNR_CAP_DB
    } else {
        20.0 * (255.0 / rmse).log10()
    };

    // layout for the sliding window; non-rectangular grids count as one row
    let (n_x, n_z) = match test.grid().rect_meta() {
        Some(m) => (m.n_x, m.n_z),
        None => (t.len(), 1),
    };
    let ssim = ssim_mean(&t, &b, n_x, n_z);

    let entropy_bits = entropy_of_map(&t, DEFAULT_ENTROPY_BINS);
    Ok(MetricsReport {
        rmse,
        psnr_db,
        ssim,
        entropy_bits,
    })
}

/// Mean SSIM over all 8x8 windows at stride 1 (window shrinks to the
/// image when an axis is smaller than 8).
fn ssim_mean(t: &[f64], b: &[f64], n_x: usize, n_z: usize) -> f64 {
    let wx = SSIM_WINDOW.min(n_x);
    let wz = SSIM_WINDOW.min(n_z);
    let c1 = (SSIM_K1 * SSIM_L) * (SSIM_K1 * SSIM_L);
    let c2 = (SSIM_K2 * SSIM_L) * (SSIM_K2 * SSIM_L);
    let count = (wx * wz) as f64;
    let mut total = 0.0;
    let mut windows = 0usize;
    for z0 in 0..=(n_z - wz) {
        for x0 in 0..=(n_x - wx) {
            let mut sum_t = 0.0;
            let mut sum_b = 0.0;
            let mut sum_tt = 0.0;
            let mut sum_bb = 0.0;
            let mut sum_tb = 0.0;
            for dz in 0..wz {
                let row = (z0 + dz) * n_x + x0;
                for dx in 0..wx {
                    let x = t[row + dx];
                    let y = b[row + dx];
                    sum_t += x;
                    sum_b += y;
                    sum_tt += x * x;
                    sum_bb += y * y;
                    sum_tb += x * y;
                }
            }
            let mu_t = sum_t / count;
            let mu_b = sum_b / count;
            let var_t = sum_tt / count - mu_t * mu_t;
            let var_b = sum_bb / count - mu_b * mu_b;
            let cov = sum_tb / count - mu_t * mu_b;
            let s = ((2.0 * mu_t * mu_b + c1) * (2.0 * cov + c2))
                / ((mu_t * mu_t + mu_b * mu_b + c1) * (var_t + var_b + c2));
            total += s;
            windows += 1;
        }
    }
    total / windows as f64
}

/// Histogram entropy of a display map in bits, over `bins` equal-width
/// bins spanning [0, 255].
pub(crate) fn entropy_of_map(map: &[f64], bins: usize) -> f64 {
    let mut counts = vec![0u64; bins];
    for &v in map {
        let idx = ((v / 255.0 * bins as f64).floor() as usize).min(bins - 1);
        counts[idx] += 1;
    }
    let total = map.len() as f64;
    let mut h = 0.0;
    for &c in &counts {
        if c > 0 {
            let p = c as f64 / total;
            h -= p * p.log2();
        }
    }
    h
}

/// Histogram entropy of an image's display map (default dynamic range),
/// in bits. A zero image carries no information and yields 0.
pub fn image_entropy(image: &ImageField, bins: usize) -> Result<f64> {
    if bins < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 bins, got {bins}"
        )));
    }
    match display_map(image, DEFAULT_DYNAMIC_RANGE_DB) {
        Ok(map) => Ok(entropy_of_map(&map, bins)),
        Err(Error::FlatImage) => Ok(0.0),
        Err(e) => Err(e),
    }
}
