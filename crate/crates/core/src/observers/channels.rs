use std::f64::consts::{FRAC_PI_2, LN_2, PI};

use crate::error::{invalid, shape, Result};
use crate::grid::ImageGrid;
use crate::linalg::{dot, Matrix};

use super::linear::{hotelling_template, rho_template, LinearTemplate, TemplateKind};
use super::stats::CovarianceEstimate;

/// Center frequencies in cycles per pixel.
pub const GABOR_FREQUENCIES: [f64; 6] = [3.0 / 256.0, 3.0 / 128.0, 3.0 / 64.0, 3.0 / 32.0, 3.0 / 16.0, 3.0 / 8.0];
pub const GABOR_ORIENTATIONS: usize = 5;
pub const GABOR_PHASES: [f64; 2] = [0.0, FRAC_PI_2];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaborParams {
    pub frequency: f64,
    pub orientation: f64,
    pub phase: f64,
    /// Full width at half maximum of the Gaussian envelope, in pixels.
    pub width: f64,
}

impl GaborParams {
    /// `exp(−4 ln2 (x²+y²)/w²)·cos(2πν(x cosθ + y sinθ) + φ)`.
    pub fn value(&self, x: f64, y: f64) -> f64 {
        let envelope = (-4.0 * LN_2 * (x * x + y * y) / (self.width * self.width)).exp();
        let arg = 2.0 * PI * self.frequency * (x * self.orientation.cos() + y * self.orientation.sin()) + self.phase;
        envelope * arg.cos()
    }
}

/// Envelope width giving a one-octave bandwidth at `frequency`.
pub fn gabor_width(frequency: f64) -> f64 {
    3.0 * 4.0 * LN_2 / (2.0 * PI * frequency)
}

/// Channel profiles sampled on a patch; row `i` of `matrix` is channel `i`.
#[derive(Clone, Debug)]
pub struct GaborChannelSet {
    pub params: Vec<GaborParams>,
    pub width: usize,
    pub height: usize,
    pub matrix: Matrix,
}

impl GaborChannelSet {
    /// Samples each profile at pixel centers measured from the patch
    /// center.
    pub fn from_params(params: Vec<GaborParams>, width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 || params.is_empty() {
            return Err(invalid("channel set needs a non-empty patch and at least one channel"));
        }
        let (cx, cy) = ((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0);
        let n = width * height;
        let mut matrix = Matrix::zeros(params.len(), n);
        for (c, p) in params.iter().enumerate() {
            for y in 0..height {
                for x in 0..width {
                    matrix.data[c * n + y * width + x] = p.value(x as f64 - cx, y as f64 - cy);
                }
            }
        }
        if matrix.data.iter().any(|v| !v.is_finite()) {
            return Err(invalid("channel profile is not finite"));
        }
        Ok(Self {
            params,
            width,
            height,
            matrix,
        })
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn channel(&self, i: usize) -> &[f64] {
        self.matrix.row(i)
    }
}

/// Six passbands × five orientations × two phases.
pub fn gabor_channels(width: usize, height: usize) -> Result<GaborChannelSet> {
    let mut params = Vec::with_capacity(60);
    for &frequency in &GABOR_FREQUENCIES {
        for k in 0..GABOR_ORIENTATIONS {
            for &phase in &GABOR_PHASES {
                params.push(GaborParams {
                    frequency,
                    orientation: 2.0 * PI * k as f64 / GABOR_ORIENTATIONS as f64,
                    phase,
                    width: gabor_width(frequency),
                });
            }
        }
    }
    GaborChannelSet::from_params(params, width, height)
}

/// `v = T·f`.
pub fn channelize_vector(channels: &GaborChannelSet, x: &[f64]) -> Result<Vec<f64>> {
    let n = channels.width * channels.height;
    if x.len() != n {
        return Err(shape(n, x.len()));
    }
    Ok((0..channels.len()).map(|i| dot(channels.channel(i), x)).collect())
}

pub fn channelize(channels: &GaborChannelSet, img: &ImageGrid) -> Result<Vec<f64>> {
    if img.dims() != (channels.width, channels.height) {
        return Err(shape(
            format!("{}x{}", channels.width, channels.height),
            format!("{}x{}", img.width(), img.height()),
        ));
    }
    let x: Vec<f64> = img.as_slice().iter().map(|&v| v as f64).collect();
    channelize_vector(channels, &x)
}

/// `w = K_v⁻¹Δv̄` over channel outputs, or its truncated form when
/// `regularization` gives a threshold.
pub fn cho_template(stats: &CovarianceEstimate, regularization: Option<f64>) -> Result<LinearTemplate> {
    let t = match regularization {
        None => hotelling_template(stats)?,
        Some(lambda) => rho_template(stats, lambda)?,
    };
    let rank = match t.kind {
        TemplateKind::Regularized { rank, .. } => rank,
        _ => stats.dim(),
    };
    Ok(LinearTemplate {
        weights: t.weights,
        kind: TemplateKind::Channelized {
            lambda: regularization,
            rank,
        },
    })
}
