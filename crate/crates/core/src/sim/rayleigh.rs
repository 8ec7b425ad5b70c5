//! Rayleigh discrimination signals: two points (H0) versus a line (H1).

use crate::error::{invalid, shape, Result};
use crate::grid::{ImageGrid, Window};

pub const DEFAULT_SIGNAL_BLUR: f64 = 1.375;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Hypothesis {
    /// Two impulses `L - 2` pixels apart.
    Pair,
    /// A horizontal line of `L` pixels.
    Line,
}

impl Hypothesis {
    pub fn from_label(label: u8) -> Self {
        if label == 0 {
            Hypothesis::Pair
        } else {
            Hypothesis::Line
        }
    }
}

/// How the per-pixel amplitude of the line relates to the pair amplitude.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LineAmplitude {
    /// Every line pixel carries the pair's per-point amplitude.
    #[default]
    PerPixel,
    /// Line pixels share the pair's total mass `2a`.
    MassMatched,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RayleighSignalSpec {
    pub length: u32,
    pub blur_sigma: f64,
    pub amplitude: f64,
    pub line_amplitude: LineAmplitude,
}

impl RayleighSignalSpec {
    pub fn new(length: u32, amplitude: f64) -> Self {
        Self {
            length,
            blur_sigma: DEFAULT_SIGNAL_BLUR,
            amplitude,
            line_amplitude: LineAmplitude::PerPixel,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.length < 3 {
            return Err(invalid(format!("signal length must be at least 3, got {}", self.length)));
        }
        if !(self.blur_sigma.is_finite() && self.blur_sigma > 0.0) {
            return Err(invalid(format!("signal blur must be positive, got {}", self.blur_sigma)));
        }
        if !(self.amplitude.is_finite() && self.amplitude > 0.0) {
            return Err(invalid(format!("signal amplitude must be positive, got {}", self.amplitude)));
        }
        Ok(())
    }

    /// Horizontal offsets from the signal centre and weights of the impulses
    /// making up the unblurred signal.
    pub fn impulses(&self, hypothesis: Hypothesis) -> Vec<(f64, f64)> {
        let l = self.length as f64;
        let a = self.amplitude;
        match hypothesis {
            Hypothesis::Pair => {
                let half = (l - 2.0) / 2.0;
                vec![(-half, a), (half, a)]
            }
            Hypothesis::Line => {
                let w = match self.line_amplitude {
                    LineAmplitude::PerPixel => a,
                    LineAmplitude::MassMatched => 2.0 * a / l,
                };
                (0..self.length).map(|k| (k as f64 - (l - 1.0) / 2.0, w)).collect()
            }
        }
    }
}

/// Signal of `hypothesis` centred in a `width`×`height` image.
pub fn make_rayleigh_signal(
    spec: &RayleighSignalSpec,
    hypothesis: Hypothesis,
    width: usize,
    height: usize,
) -> Result<ImageGrid> {
    make_rayleigh_signal_window(spec, hypothesis, (width, height), Window::full(width, height))
}

/// The `window` portion of a signal centred in a field of view of `fov` size.
pub fn make_rayleigh_signal_window(
    spec: &RayleighSignalSpec,
    hypothesis: Hypothesis,
    fov: (usize, usize),
    window: Window,
) -> Result<ImageGrid> {
    spec.validate()?;
    let points = signal_points(spec, hypothesis, fov);
    render_point_sources(fov, window, &points, spec.blur_sigma)
}

/// Impulses `(x, y, weight)` of the unblurred signal. Horizontally they
/// are centred on the geometric centre of the field of view; vertically
/// they sit on pixel row `height / 2`, so the pair of an odd-length signal
/// falls exactly on two pixels.
pub fn signal_points(
    spec: &RayleighSignalSpec,
    hypothesis: Hypothesis,
    fov: (usize, usize),
) -> Vec<(f64, f64, f64)> {
    let cx = (fov.0 as f64 - 1.0) / 2.0;
    let cy = (fov.1 / 2) as f64;
    spec.impulses(hypothesis)
        .into_iter()
        .map(|(dx, w)| (cx + dx, cy, w))
        .collect()
}

/// Renders weighted impulses at `(x, y, weight)` (field-of-view pixel
/// coordinates), each convolved with a unit-mass sampled Gaussian of
/// standard deviation `sigma`.
///
/// `sigma == 0` places unblurred impulses, splitting sub-pixel positions
/// bilinearly between neighbours. Fails if any impulse's support leaves the
/// field of view, since its mass would no longer be preserved.
pub fn render_point_sources(
    fov: (usize, usize),
    window: Window,
    points: &[(f64, f64, f64)],
    sigma: f64,
) -> Result<ImageGrid> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(invalid(format!("blur sigma must be non-negative, got {sigma}")));
    }
    let mut out = vec![0.0f64; window.len()];
    for &(px, py, weight) in points {
        let xs = axis_weights(px, sigma);
        let ys = axis_weights(py, sigma);
        let (x_first, y_first) = (xs.0, ys.0);
        let x_last = x_first + xs.1.len() as i64 - 1;
        let y_last = y_first + ys.1.len() as i64 - 1;
        if x_first < 0 || y_first < 0 || x_last >= fov.0 as i64 || y_last >= fov.1 as i64 {
            return Err(shape(
                format!("signal support within {}x{}", fov.0, fov.1),
                format!("pixels [{x_first}, {x_last}]x[{y_first}, {y_last}]"),
            ));
        }
        for (j, &wy) in ys.1.iter().enumerate() {
            let y = y_first + j as i64 - window.y0;
            if y < 0 || y >= window.height as i64 {
                continue;
            }
            for (i, &wx) in xs.1.iter().enumerate() {
                let x = x_first + i as i64 - window.x0;
                if x < 0 || x >= window.width as i64 {
                    continue;
                }
                out[y as usize * window.width + x as usize] += weight * wx * wy;
            }
        }
    }
    ImageGrid::from_vec(window.width, window.height, out.into_iter().map(|v| v as f32).collect())
}

/// First pixel index and normalized 1-D weights of an impulse at `pos`.
fn axis_weights(pos: f64, sigma: f64) -> (i64, Vec<f64>) {
    if sigma == 0.0 {
        let lo = pos.floor();
        let frac = pos - lo;
        if frac == 0.0 {
            return (lo as i64, vec![1.0]);
        }
        return (lo as i64, vec![1.0 - frac, frac]);
    }
    let radius = (4.0 * sigma).ceil();
    let first = (pos - radius).floor() as i64;
    let last = (pos + radius).ceil() as i64;
    let mut w: Vec<f64> = (first..=last)
        .map(|i| {
            let d = i as f64 - pos;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    (first, w)
}
