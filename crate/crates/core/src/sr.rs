//! SRCNN super-resolvers of configurable depth.

use crate::error::{invalid, shape, Result};
use crate::grid::ImageGrid;
use crate::nn::{self, Conv2d, Layer, Loss, Network, Target, Tensor, TrainConfig, TrainData, TrainOutcome};
use crate::rng::{derive_seed, tag};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SrcnnSpec {
    pub n_layers: usize,
    pub first_kernel: usize,
    pub other_kernel: usize,
    pub hidden_filters: usize,
}

impl Default for SrcnnSpec {
    fn default() -> Self {
        Self::with_depth(3)
    }
}

impl SrcnnSpec {
    pub fn with_depth(n_layers: usize) -> Self {
        Self {
            n_layers,
            first_kernel: 9,
            other_kernel: 5,
            hidden_filters: 32,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=8).contains(&self.n_layers) {
            return Err(invalid(format!("SRCNN depth must be in 2..=8, got {}", self.n_layers)));
        }
        if self.first_kernel % 2 == 0 || self.other_kernel % 2 == 0 {
            return Err(invalid("SRCNN kernels must be odd"));
        }
        if self.hidden_filters == 0 {
            return Err(invalid("SRCNN needs at least one hidden filter"));
        }
        Ok(())
    }

    /// Pixels of context each output pixel depends on, per side.
    pub fn receptive_radius(&self) -> usize {
        self.first_kernel / 2 + (self.n_layers - 1) * (self.other_kernel / 2)
    }
}

/// `conv(k1, 1→F) + ReLU`, `(n−2) × [conv(k, F→F) + ReLU]`, `conv(k, F→1)`,
/// wrapped in fixed input/output normalization layers (identity until
/// [`set_normalization`] is called).
pub fn build_srcnn(spec: &SrcnnSpec, seed: u64) -> Result<Network<f32>> {
    spec.validate()?;
    let f = spec.hidden_filters;
    let mut layers = vec![
        Layer::Affine { scale: 1.0, shift: 0.0 },
        Layer::Conv(Conv2d::zeros(1, f, spec.first_kernel)?),
        Layer::Relu,
    ];
    for _ in 0..spec.n_layers - 2 {
        layers.push(Layer::Conv(Conv2d::zeros(f, f, spec.other_kernel)?));
        layers.push(Layer::Relu);
    }
    layers.push(Layer::Conv(Conv2d::zeros(f, 1, spec.other_kernel)?));
    layers.push(Layer::Affine { scale: 1.0, shift: 0.0 });
    let mut net = Network::new(1, layers);
    net.init_he(derive_seed(seed, tag("srcnn"), spec.n_layers as u64));
    Ok(net)
}

/// Standardizes inputs with `(x − mean)/std` and maps outputs back with
/// `y·std + mean`.
pub fn set_normalization(net: &mut Network<f32>, mean: f64, std: f64) -> Result<()> {
    if !(std.is_finite() && std > 0.0 && mean.is_finite()) {
        return Err(invalid(format!("normalization needs finite mean and positive std, got {mean}, {std}")));
    }
    let n = net.layers.len();
    match (net.layers.first(), net.layers.last()) {
        (Some(Layer::Affine { .. }), Some(Layer::Affine { .. })) if n >= 2 => {}
        _ => return Err(invalid("network has no normalization layers")),
    }
    net.layers[0] = Layer::Affine {
        scale: 1.0 / std,
        shift: -mean / std,
    };
    net.layers[n - 1] = Layer::Affine { scale: std, shift: mean };
    Ok(())
}

/// Mean and standard deviation over every pixel of `images`.
pub fn pixel_stats<'a>(images: impl IntoIterator<Item = &'a ImageGrid>) -> (f64, f64) {
    let (mut n, mut s, mut s2) = (0.0, 0.0, 0.0);
    for img in images {
        for &v in img.as_slice() {
            let v = v as f64;
            n += 1.0;
            s += v;
            s2 += v * v;
        }
    }
    if n < 2.0 {
        return (s, 1.0);
    }
    let mean = s / n;
    let var = ((s2 - n * mean * mean) / (n - 1.0)).max(0.0);
    (mean, var.sqrt().max(f64::MIN_POSITIVE))
}

/// Paired low/high-resolution images, optionally served as random square
/// patches (a fresh position per epoch).
pub struct PairedImages {
    pub inputs: Vec<ImageGrid>,
    pub targets: Vec<ImageGrid>,
    pub patch: Option<usize>,
    pub seed: u64,
}

impl PairedImages {
    pub fn new(inputs: Vec<ImageGrid>, targets: Vec<ImageGrid>, patch: Option<usize>, seed: u64) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(shape(format!("{} targets", inputs.len()), targets.len()));
        }
        for (a, b) in inputs.iter().zip(&targets) {
            a.check_same_dims(b)?;
            if let Some(p) = patch {
                if p == 0 || p > a.width() || p > a.height() {
                    return Err(shape(format!("patch within {}x{}", a.width(), a.height()), p));
                }
            }
        }
        Ok(Self {
            inputs,
            targets,
            patch,
            seed,
        })
    }
}

impl TrainData<f32> for PairedImages {
    fn len(&self) -> usize {
        self.inputs.len()
    }

    fn sample(&self, index: usize, epoch: usize) -> Result<(Tensor<f32>, Target<f32>)> {
        let (x, y) = (&self.inputs[index], &self.targets[index]);
        match self.patch {
            None => Ok((Tensor::from_image(x), Target::Image(Tensor::from_image(y)))),
            Some(p) => {
                let h = derive_seed(derive_seed(self.seed, tag("patch"), epoch as u64), 0, index as u64);
                let x0 = (h % (x.width() - p + 1) as u64) as usize;
                let y0 = ((h >> 32) % (x.height() - p + 1) as u64) as usize;
                Ok((
                    Tensor::from_image(&x.crop(x0, y0, p, p)?),
                    Target::Image(Tensor::from_image(&y.crop(x0, y0, p, p)?)),
                ))
            }
        }
    }
}

/// Minimizes the ensemble MSE between `S(input)` and target, keeping the
/// snapshot with the lowest validation MSE.
pub fn train_sr(
    net: Network<f32>,
    train: &PairedImages,
    validation: &PairedImages,
    config: &TrainConfig,
) -> Result<TrainOutcome<f32>> {
    if config.loss != Loss::Mse {
        return Err(invalid("super-resolution networks are trained with the MSE loss"));
    }
    nn::train(net, train, validation, config)
}

/// One forward pass; the output has the input's dimensions.
pub fn super_resolve(net: &Network<f32>, img: &ImageGrid) -> Result<ImageGrid> {
    if net.input_channels != 1 {
        return Err(shape("single-channel network", net.input_channels));
    }
    let out = net.forward(&Tensor::from_image(img))?;
    if out.channels != 1 || out.height != img.height() || out.width != img.width() {
        return Err(shape(
            format!("1x{}x{}", img.height(), img.width()),
            format!("{}x{}x{}", out.channels, out.height, out.width),
        ));
    }
    out.to_image()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count(net: &Network<f32>, name: &str) -> usize {
        net.layers.iter().filter(|l| l.name() == name).count()
    }

    #[test]
    fn two_layer_structure() {
        let net = build_srcnn(&SrcnnSpec::with_depth(2), 1).unwrap();
        assert_eq!(count(&net, "conv"), 2);
        assert_eq!(count(&net, "relu"), 1);
    }

    #[test]
    fn three_layer_parameter_count() {
        let net = build_srcnn(&SrcnnSpec::with_depth(3), 1).unwrap();
        let want = 9 * 9 * 32 + 32 + 5 * 5 * 32 * 32 + 32 + 5 * 5 * 32 + 1;
        assert_eq!(want, 29_057);
        assert_eq!(net.param_count(), want);
    }

    #[test]
    fn depth_range() {
        for d in 2..=8 {
            let net = build_srcnn(&SrcnnSpec::with_depth(d), 0).unwrap();
            assert_eq!(count(&net, "conv"), d);
        }
        assert!(build_srcnn(&SrcnnSpec::with_depth(1), 0).is_err());
        assert!(build_srcnn(&SrcnnSpec::with_depth(9), 0).is_err());
    }

    #[test]
    fn zero_last_layer_gives_constant_bias() {
        let mut net = build_srcnn(&SrcnnSpec { hidden_filters: 4, ..SrcnnSpec::with_depth(2) }, 2).unwrap();
        let n = net.layers.len();
        if let Layer::Conv(c) = &mut net.layers[n - 2] {
            c.weight.iter_mut().for_each(|w| *w = 0.0);
            c.bias[0] = 0.75;
        }
        let img = ImageGrid::from_fn(12, 10, |x, y| (x * y) as f32);
        let out = super_resolve(&net, &img).unwrap();
        assert_eq!(out.dims(), (12, 10));
        assert!(out.as_slice().iter().all(|&v| v == 0.75));
        assert_eq!(super_resolve(&net, &img).unwrap(), out);
    }

    #[test]
    fn normalization_round_trips_constant_output() {
        let mut net = build_srcnn(&SrcnnSpec { hidden_filters: 2, ..SrcnnSpec::with_depth(2) }, 2).unwrap();
        set_normalization(&mut net, 10.0, 2.0).unwrap();
        let n = net.layers.len();
        if let Layer::Conv(c) = &mut net.layers[n - 2] {
            c.weight.iter_mut().for_each(|w| *w = 0.0);
        }
        let out = super_resolve(&net, &ImageGrid::filled(11, 11, 3.0)).unwrap();
        assert!(out.as_slice().iter().all(|&v| v == 10.0));
    }

    #[test]
    fn patches_are_cut_consistently() {
        let a = ImageGrid::from_fn(16, 16, |x, y| (x + 16 * y) as f32);
        let data = PairedImages::new(vec![a.clone()], vec![a], Some(5), 7).unwrap();
        let (x, Target::Image(y)) = data.sample(0, 3).unwrap() else { panic!() };
        assert_eq!(x, y);
        assert_eq!(x.dims(), (1, 5, 5));
        assert!(PairedImages::new(vec![ImageGrid::zeros(4, 4)], vec![ImageGrid::zeros(4, 4)], Some(5), 0).is_err());
    }
}
