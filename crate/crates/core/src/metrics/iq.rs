//! Pixel-wise image-quality metrics: MSE, PSNR and SSIM.

use crate::error::{invalid, shape, Result};
use crate::grid::ImageGrid;

use super::roc::z_for_level;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IqMetrics {
    pub mse: f64,
    /// `+∞` when the images are identical.
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IqReport {
    /// Dynamic range used for PSNR and the SSIM constants.
    pub max: f64,
    pub ensemble_mse: f64,
    pub psnr: f64,
    pub ssim: f64,
    pub per_image: Vec<IqMetrics>,
}

/// `max − min` over every pixel of the reference ensemble.
pub fn dynamic_range<'a>(images: impl IntoIterator<Item = &'a ImageGrid>) -> f64 {
    let (lo, hi) = images.into_iter().fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), img| {
        let (a, b) = img.min_max();
        (lo.min(a), hi.max(b))
    });
    if hi >= lo {
        (hi - lo) as f64
    } else {
        0.0
    }
}

pub fn mse(reference: &ImageGrid, test: &ImageGrid) -> Result<f64> {
    reference.check_same_dims(test)?;
    let s: f64 = reference
        .as_slice()
        .iter()
        .zip(test.as_slice())
        .map(|(&a, &b)| {
            let d = a as f64 - b as f64;
            d * d
        })
        .sum();
    Ok(s / reference.len() as f64)
}

pub fn psnr(mse: f64, max: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (max * max / mse).log10()
    }
}

fn ssim_window() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as i64;
    let g: Vec<f64> = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()).collect();
    let total: f64 = g.iter().sum();
    g.into_iter().map(|v| v / total).collect()
}

/// Valid-region separable filtering with the 1-D kernel `k`.
fn filter_valid(values: &[f64], w: usize, h: usize, k: &[f64]) -> (Vec<f64>, usize, usize) {
    let n = k.len();
    let (ow, oh) = (w + 1 - n, h + 1 - n);
    let mut tmp = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            tmp[y * ow + x] = (0..n).map(|t| k[t] * values[y * w + x + t]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..n).map(|t| k[t] * tmp[(y + t) * ow + x]).sum();
        }
    }
    (out, ow, oh)
}

/// Mean local SSIM over every position where the 11×11 Gaussian window
/// (σ = 1.5) fits inside the image.
pub fn ssim(reference: &ImageGrid, test: &ImageGrid, max: f64) -> Result<f64> {
    reference.check_same_dims(test)?;
    let (w, h) = reference.dims();
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(shape(
            format!("images of at least {SSIM_WINDOW}x{SSIM_WINDOW}"),
            format!("{w}x{h}"),
        ));
    }
    if !(max.is_finite() && max > 0.0) {
        return Err(invalid(format!("dynamic range must be positive, got {max}")));
    }
    let c1 = (0.01 * max).powi(2);
    let c2 = (0.03 * max).powi(2);
    let k = ssim_window();
    let a: Vec<f64> = reference.as_slice().iter().map(|&v| v as f64).collect();
    let b: Vec<f64> = test.as_slice().iter().map(|&v| v as f64).collect();
    let prod = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(x, y)| x * y).collect::<Vec<f64>>();
    let (mu_a, ow, oh) = filter_valid(&a, w, h, &k);
    let (mu_b, _, _) = filter_valid(&b, w, h, &k);
    let (aa, _, _) = filter_valid(&prod(&a, &a), w, h, &k);
    let (bb, _, _) = filter_valid(&prod(&b, &b), w, h, &k);
    let (ab, _, _) = filter_valid(&prod(&a, &b), w, h, &k);
    let mut total = 0.0;
    for i in 0..ow * oh {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = aa[i] - ma * ma;
        let vb = bb[i] - mb * mb;
        let cov = ab[i] - ma * mb;
        total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    Ok(total / (ow * oh) as f64)
}

pub fn iq_metrics(reference: &ImageGrid, test: &ImageGrid, max: f64) -> Result<IqMetrics> {
    let m = mse(reference, test)?;
    Ok(IqMetrics {
        mse: m,
        psnr: psnr(m, max),
        ssim: ssim(reference, test, max)?,
    })
}

/// Per-image metrics and ensemble summaries; ensemble PSNR is computed from
/// the ensemble MSE.
pub fn iq_report(references: &[ImageGrid], tests: &[ImageGrid], max: f64) -> Result<IqReport> {
    if references.len() != tests.len() {
        return Err(shape(format!("{} test images", references.len()), tests.len()));
    }
    if references.is_empty() {
        return Err(invalid("image-quality report needs at least one image"));
    }
    let per_image = references
        .iter()
        .zip(tests)
        .map(|(r, t)| iq_metrics(r, t, max))
        .collect::<Result<Vec<_>>>()?;
    let n = per_image.len() as f64;
    let ensemble_mse = per_image.iter().map(|m| m.mse).sum::<f64>() / n;
    Ok(IqReport {
        max,
        ensemble_mse,
        psnr: psnr(ensemble_mse, max),
        ssim: per_image.iter().map(|m| m.ssim).sum::<f64>() / n,
        per_image,
    })
}

/// Mean of paired differences with a normal-approximation interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairedDifference {
    pub mean: f64,
    pub ci: (f64, f64),
}

pub fn paired_difference(a: &[f64], b: &[f64], level: f64) -> Result<PairedDifference> {
    if a.len() != b.len() {
        return Err(shape(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(crate::Error::InsufficientSamples { needed: 2, got: a.len() });
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let half = z_for_level(level)? * (var / n).sqrt();
    Ok(PairedDifference {
        mean,
        ci: (mean - half, mean + half),
    })
}
