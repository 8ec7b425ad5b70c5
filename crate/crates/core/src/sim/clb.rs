//! Clustered lumpy backgrounds.
//!
//! A background is a sum of anisotropic blobs `exp(-α‖R_θ r‖^β / L(R_θ r))`
//! where `L(v)` is the radius of the ellipse with half-axes `Lx`, `Ly` in the
//! direction of `v`. Blobs come in Poisson-many clusters with uniformly
//! placed centres; blob counts per cluster are Poisson and blob offsets
//! Gaussian around the cluster centre.

use rand::Rng as _;
use rand_distr::{Distribution, Normal, Poisson};

use crate::error::{invalid, Result};
use crate::grid::{ImageGrid, Window};
use crate::rng;

/// Truncated blob tails stay below this fraction of the blob peak.
pub const TAIL_FRACTION: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct ClbParams {
    pub mean_clusters: f64,
    pub mean_blobs_per_cluster: f64,
    pub lx: f64,
    pub ly: f64,
    pub alpha: f64,
    pub beta: f64,
    pub cluster_spread: f64,
    pub width: usize,
    pub height: usize,
}

impl Default for ClbParams {
    fn default() -> Self {
        Self::table1(128, 128)
    }
}

impl ClbParams {
    /// The mammographic-texture parameter set (K̄=150, N̄=20, Lx=5, Ly=2,
    /// α=2.1, β=0.5, σ=12).
    pub fn table1(width: usize, height: usize) -> Self {
        Self {
            mean_clusters: 150.0,
            mean_blobs_per_cluster: 20.0,
            lx: 5.0,
            ly: 2.0,
            alpha: 2.1,
            beta: 0.5,
            cluster_spread: 12.0,
            width,
            height,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("mean_clusters", self.mean_clusters),
            ("mean_blobs_per_cluster", self.mean_blobs_per_cluster),
            ("lx", self.lx),
            ("ly", self.ly),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("cluster_spread", self.cluster_spread),
        ];
        for (name, v) in named {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("CLB parameter {name} must be positive, got {v}")));
            }
        }
        if self.width == 0 || self.height == 0 {
            return Err(invalid(format!(
                "CLB dimensions must be at least 1x1, got {}x{}",
                self.width, self.height
            )));
        }
        Ok(())
    }

    /// Distance beyond which a blob is below [`TAIL_FRACTION`] of its peak in
    /// every direction.
    pub fn support_radius(&self) -> f64 {
        (TAIL_FRACTION.recip().ln() * self.lx.max(self.ly) / self.alpha).powf(self.beta.recip())
    }
}

/// One sampled blob: centre in field-of-view pixel coordinates (pixel
/// centres at integers) and rotation angle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Blob {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

/// Draws the blob list of one background realization.
pub fn sample_blobs(params: &ClbParams, rng: &mut rng::Rng) -> Result<Vec<Blob>> {
    params.validate()?;
    let clusters = Poisson::new(params.mean_clusters).map_err(|e| invalid(e.to_string()))?;
    let per_cluster =
        Poisson::new(params.mean_blobs_per_cluster).map_err(|e| invalid(e.to_string()))?;
    let offset = Normal::new(0.0, params.cluster_spread).map_err(|e| invalid(e.to_string()))?;

    let k = clusters.sample(rng) as usize;
    let mut blobs = Vec::with_capacity(k * params.mean_blobs_per_cluster as usize);
    for _ in 0..k {
        let cx = rng.gen::<f64>() * params.width as f64 - 0.5;
        let cy = rng.gen::<f64>() * params.height as f64 - 0.5;
        let n = per_cluster.sample(rng) as usize;
        for _ in 0..n {
            let x = cx + offset.sample(rng);
            let y = cy + offset.sample(rng);
            let theta = rng.gen::<f64>() * std::f64::consts::TAU;
            blobs.push(Blob { x, y, theta });
        }
    }
    Ok(blobs)
}

/// Evaluates the blob sum at the pixel centres covered by `window`.
pub fn render_blobs(params: &ClbParams, blobs: &[Blob], window: Window) -> ImageGrid {
    let (w, h) = (window.width, window.height);
    let mut out = vec![0.0f32; w * h];
    if w == 0 || h == 0 {
        return ImageGrid::zeros(w, h);
    }
    #[cfg(target_arch = "x86_64")]
    {
        if is_x86_feature_detected!("avx2") {
            // SAFETY: the CPU supports AVX2, checked just above.
            unsafe { accumulate_blobs_avx2(params, blobs, window, &mut out) };
            return ImageGrid::from_vec(w, h, out).expect("blob sums are finite");
        }
    }
    accumulate_blobs(params, blobs, window, &mut out);
    ImageGrid::from_vec(w, h, out).expect("blob sums are finite")
}

/// Same arithmetic as [`accumulate_blobs`], compiled for 8-wide vectors.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn accumulate_blobs_avx2(params: &ClbParams, blobs: &[Blob], window: Window, out: &mut [f32]) {
    accumulate_blobs(params, blobs, window, out)
}

#[inline(always)]
fn accumulate_blobs(params: &ClbParams, blobs: &[Blob], window: Window, out: &mut [f32]) {
    let (w, h) = (window.width, window.height);
    let radius = params.support_radius();
    let radius2 = (radius * radius).min(f32::MAX as f64) as f32;
    let inv_lx2 = (params.lx * params.lx).recip();
    let inv_ly2 = (params.ly * params.ly).recip();
    let alpha = params.alpha as f32;
    let half_beta = (params.beta * 0.5) as f32;
    let quarter_power = params.beta == 0.5;
    let mut dxs = vec![0.0f32; w];

    for blob in blobs {
        // blob centre relative to the window origin
        let bx = blob.x - window.x0 as f64;
        let by = blob.y - window.y0 as f64;
        let x_lo = (bx - radius).ceil().max(0.0);
        let x_hi = (bx + radius).floor().min(w as f64 - 1.0);
        let y_lo = (by - radius).ceil().max(0.0);
        let y_hi = (by + radius).floor().min(h as f64 - 1.0);
        if x_lo > x_hi || y_lo > y_hi {
            continue;
        }
        let (x_lo, x_hi, y_lo, y_hi) = (x_lo as usize, x_hi as usize, y_lo as usize, y_hi as usize);

        // quadratic form of the rotated offset: q = vx²/Lx² + vy²/Ly²
        let (s, c) = blob.theta.sin_cos();
        let qa = (c * c * inv_lx2 + s * s * inv_ly2) as f32;
        let qb = (2.0 * c * s * (inv_ly2 - inv_lx2)) as f32;
        let qc = (s * s * inv_lx2 + c * c * inv_ly2) as f32;
        let cx = bx as f32;
        let dxs = &mut dxs[..=x_hi - x_lo];
        for (k, d) in dxs.iter_mut().enumerate() {
            *d = (x_lo + k) as f32 - cx;
        }

        for yy in y_lo..=y_hi {
            let dy = yy as f32 - by as f32;
            let dy2 = dy * dy;
            let qb_dy = qb * dy;
            let qc_dy2 = qc * dy2;
            let row = &mut out[yy * w + x_lo..=yy * w + x_hi];
            if quarter_power {
                for (px, &dx) in row.iter_mut().zip(dxs.iter()) {
                    let q = dx * (qa * dx + qb_dy) + qc_dy2;
                    let r2 = dx * dx + dy2;
                    // ‖v‖^β / L(v) = sqrt(q / r²) · r^½ = sqrt(q / r)
                    let e = -alpha * (q / r2.sqrt().max(f32::MIN_POSITIVE)).sqrt();
                    let v = exp_nonpositive(e);
                    *px += if r2 <= radius2 { v } else { 0.0 };
                }
            } else {
                for (px, &dx) in row.iter_mut().zip(dxs.iter()) {
                    let q = dx * (qa * dx + qb_dy) + qc_dy2;
                    let r2 = dx * dx + dy2;
                    let e = -alpha * (q / r2.max(f32::MIN_POSITIVE)).sqrt() * r2.powf(half_beta);
                    let v = exp_nonpositive(e);
                    *px += if r2 <= radius2 { v } else { 0.0 };
                }
            }
        }
    }
}

/// Full-field background for `seed`.
pub fn generate_clb(params: &ClbParams, seed: u64) -> Result<ImageGrid> {
    generate_clb_window(params, seed, Window::full(params.width, params.height))
}

/// The `window` portion of the background [`generate_clb`] would produce for
/// `seed`; blobs are placed over the whole field of view.
pub fn generate_clb_window(params: &ClbParams, seed: u64, window: Window) -> Result<ImageGrid> {
    let mut r = rng::rng(seed);
    let blobs = sample_blobs(params, &mut r)?;
    Ok(render_blobs(params, &blobs, window))
}

/// `exp(x)` for `x <= 0`, accurate to about 2e-7 relative. Written without
/// branches so the blob loops vectorize.
#[inline(always)]
fn exp_nonpositive(x: f32) -> f32 {
    const LOG2_E: f32 = std::f32::consts::LOG2_E;
    const LN2_HI: f32 = 0.693_145_75;
    const LN2_LO: f32 = 1.428_606_8e-6;
    const ROUND: f32 = 12_582_912.0; // 1.5 * 2^23
    let x = x.max(-87.0);
    let n = (x * LOG2_E + ROUND) - ROUND;
    let r = x - n * LN2_HI - n * LN2_LO;
    let p = 1.0
        + r * (1.0
            + r * (0.5
                + r * (1.0 / 6.0
                    + r * (1.0 / 24.0 + r * (1.0 / 120.0 + r * (1.0 / 720.0 + r * (1.0 / 5040.0)))))));
    let scale = f32::from_bits(((n as i32).wrapping_add(127) as u32) << 23);
    p * scale
}
