//! Measurement operators: Gaussian blur, 2× resampling and mixed
//! Poisson–Gaussian noise.

use rand_distr::{Distribution, Normal, Poisson};

use crate::error::{invalid, shape, Result};
use crate::grid::ImageGrid;
use crate::rng;

/// Blur applied to form the low-resolution measurement.
pub const DEFAULT_MEASUREMENT_BLUR: f64 = 1.5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    /// Poisson scale: the Poisson part has mean `x` and variance `sigma_p²·x`.
    pub sigma_p: f64,
    pub sigma_g: f64,
}

impl NoiseSpec {
    pub const NONE: NoiseSpec = NoiseSpec {
        sigma_p: 0.0,
        sigma_g: 0.0,
    };

    pub fn rayleigh() -> Self {
        Self {
            sigma_p: 0.013,
            sigma_g: 0.35,
        }
    }

    pub fn mc() -> Self {
        Self {
            sigma_p: 1e-4,
            sigma_g: 1e-3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_p.is_finite() && self.sigma_p >= 0.0) {
            return Err(invalid(format!("sigma_p must be non-negative, got {}", self.sigma_p)));
        }
        if !(self.sigma_g.is_finite() && self.sigma_g >= 0.0) {
            return Err(invalid(format!("sigma_g must be non-negative, got {}", self.sigma_g)));
        }
        Ok(())
    }

    pub fn is_none(&self) -> bool {
        self.sigma_p == 0.0 && self.sigma_g == 0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DegradationSpec {
    pub blur_sigma: f64,
    pub downsample_factor: u32,
    pub upsample_after: bool,
    pub noise: NoiseSpec,
}

impl DegradationSpec {
    /// Blur then noise, no resampling.
    pub fn rayleigh() -> Self {
        Self {
            blur_sigma: DEFAULT_MEASUREMENT_BLUR,
            downsample_factor: 1,
            upsample_after: false,
            noise: NoiseSpec::rayleigh(),
        }
    }

    /// Blur, 2× decimation, noise, bilinear 2× upsampling.
    pub fn mc() -> Self {
        Self {
            blur_sigma: DEFAULT_MEASUREMENT_BLUR,
            downsample_factor: 2,
            upsample_after: true,
            noise: NoiseSpec::mc(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.blur_sigma.is_finite() && self.blur_sigma >= 0.0) {
            return Err(invalid(format!("blur sigma must be non-negative, got {}", self.blur_sigma)));
        }
        if !matches!(self.downsample_factor, 1 | 2) {
            return Err(invalid(format!(
                "downsample factor must be 1 or 2, got {}",
                self.downsample_factor
            )));
        }
        self.noise.validate()
    }

    /// Dimensions of the measurement of a `width`×`height` object.
    pub fn output_dims(&self, width: usize, height: usize) -> (usize, usize) {
        if self.downsample_factor == 2 && !self.upsample_after {
            (width / 2, height / 2)
        } else {
            (width, height)
        }
    }
}

/// Normalized sampled Gaussian of radius `ceil(4σ)`; `[1.0]` for `σ = 0`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma == 0.0 {
        return vec![1.0];
    }
    let radius = (4.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    k
}

/// Symmetric (edge-duplicating) reflection of `i` into `0..n`.
#[inline]
pub(crate) fn mirror_index(i: i64, n: usize) -> usize {
    let n = n as i64;
    let period = 2 * n;
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}

/// Separable Gaussian blur with mirrored borders.
pub fn gaussian_blur(img: &ImageGrid, sigma: f64) -> Result<ImageGrid> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(invalid(format!("blur sigma must be non-negative, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as i64;
    let (w, h) = img.dims();
    let src = img.as_slice();

    let mut tmp = vec![0.0f64; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (t, &kv) in k.iter().enumerate() {
                acc += kv * row[mirror_index(x as i64 + t as i64 - r, w)] as f64;
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (t, &kv) in k.iter().enumerate() {
                acc += kv * tmp[mirror_index(y as i64 + t as i64 - r, h) * w + x];
            }
            out[y * w + x] = acc as f32;
        }
    }
    ImageGrid::from_vec(w, h, out)
}

/// 2×2 block mean.
pub fn downsample2(img: &ImageGrid) -> Result<ImageGrid> {
    let (w, h) = img.dims();
    if w % 2 != 0 || h % 2 != 0 {
        return Err(shape("even dimensions", format!("{w}x{h}")));
    }
    Ok(ImageGrid::from_fn(w / 2, h / 2, |x, y| {
        let s = img.get(2 * x, 2 * y) as f64
            + img.get(2 * x + 1, 2 * y) as f64
            + img.get(2 * x, 2 * y + 1) as f64
            + img.get(2 * x + 1, 2 * y + 1) as f64;
        (s / 4.0) as f32
    }))
}

/// Bilinear 2× upsampling with pixel centres aligned (output pixel `X` samples
/// the input at `(X + 0.5)/2 − 0.5`), clamped at the borders.
pub fn upsample2(img: &ImageGrid) -> ImageGrid {
    let (w, h) = img.dims();
    let taps = |out: usize, n: usize| -> (usize, usize, f64) {
        let pos = (out as f64 + 0.5) / 2.0 - 0.5;
        let p = pos.clamp(0.0, (n - 1) as f64);
        let i0 = p.floor() as usize;
        let i1 = (i0 + 1).min(n - 1);
        (i0, i1, p - i0 as f64)
    };
    ImageGrid::from_fn(2 * w, 2 * h, |x, y| {
        let (x0, x1, fx) = taps(x, w);
        let (y0, y1, fy) = taps(y, h);
        let top = img.get(x0, y0) as f64 * (1.0 - fx) + img.get(x1, y0) as f64 * fx;
        let bottom = img.get(x0, y1) as f64 * (1.0 - fx) + img.get(x1, y1) as f64 * fx;
        (top * (1.0 - fy) + bottom * fy) as f32
    })
}

/// Noise realization plus the number of negative pixels whose Poisson rate
/// was clamped to zero.
#[derive(Clone, Debug)]
pub struct NoisyImage {
    pub image: ImageGrid,
    pub clamped: u64,
}

/// `σ_p²·Poisson(x/σ_p²) + N(0, σ_g²)` per pixel.
pub fn apply_noise_counted(img: &ImageGrid, noise: &NoiseSpec, seed: u64) -> Result<NoisyImage> {
    noise.validate()?;
    if noise.is_none() {
        return Ok(NoisyImage {
            image: img.clone(),
            clamped: 0,
        });
    }
    let mut r = rng::rng(seed);
    let gauss = Normal::new(0.0, noise.sigma_g).map_err(|e| invalid(e.to_string()))?;
    let scale = noise.sigma_p * noise.sigma_p;
    let mut clamped = 0u64;
    let mut values = Vec::with_capacity(img.len());
    for &x in img.as_slice() {
        let x = x as f64;
        let mut y = x;
        if noise.sigma_p > 0.0 {
            if x < 0.0 {
                clamped += 1;
            }
            let rate = x.max(0.0) / scale;
            y = if rate > 0.0 {
                let p = Poisson::new(rate).map_err(|e| invalid(e.to_string()))?;
                scale * p.sample(&mut r)
            } else {
                0.0
            };
        }
        if noise.sigma_g > 0.0 {
            y += gauss.sample(&mut r);
        }
        values.push(y as f32);
    }
    Ok(NoisyImage {
        image: ImageGrid::from_vec(img.width(), img.height(), values)?,
        clamped,
    })
}

pub fn apply_noise(img: &ImageGrid, noise: &NoiseSpec, seed: u64) -> Result<ImageGrid> {
    apply_noise_counted(img, noise, seed).map(|n| n.image)
}

/// Blur, optional decimation, noise, optional upsampling, in that order.
pub fn degrade(img: &ImageGrid, spec: &DegradationSpec, seed: u64) -> Result<ImageGrid> {
    spec.validate()?;
    let mut x = gaussian_blur(img, spec.blur_sigma)?;
    if spec.downsample_factor == 2 {
        x = downsample2(&x)?;
    }
    x = apply_noise(&x, &spec.noise, seed)?;
    if spec.downsample_factor == 2 && spec.upsample_after {
        x = upsample2(&x);
    }
    Ok(x)
}
