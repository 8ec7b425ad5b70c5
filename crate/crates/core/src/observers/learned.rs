use crate::error::{invalid, shape, Result};
use crate::grid::ImageGrid;
use crate::nn::sigmoid;
use crate::nn::{Conv2d, Dense, Layer, Network, ResidualBlock, Target, Tensor, TrainData};
use crate::rng::{derive_seed, tag};

use super::linear::LinearTemplate;

pub const ALLOWED_BLOCKS: [usize; 4] = [2, 4, 6, 8];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObserverInit {
    Random,
    /// Seed the first convolution from a regularized Hotelling template.
    RhoTemplate,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LearnedObserverSpec {
    pub residual_blocks: usize,
    pub filters: usize,
    pub kernel: usize,
    pub init: ObserverInit,
}

impl LearnedObserverSpec {
    pub fn new(residual_blocks: usize, init: ObserverInit) -> Self {
        Self {
            residual_blocks,
            filters: 32,
            kernel: 3,
            init,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !ALLOWED_BLOCKS.contains(&self.residual_blocks) {
            return Err(invalid(format!(
                "residual block count must be one of {ALLOWED_BLOCKS:?}, got {}",
                self.residual_blocks
            )));
        }
        if self.filters == 0 || self.kernel % 2 == 0 {
            return Err(invalid("observer needs filters > 0 and an odd kernel"));
        }
        Ok(())
    }
}

/// A linear template laid out on its image grid.
pub fn template_image(template: &LinearTemplate, width: usize, height: usize) -> Result<ImageGrid> {
    if template.len() != width * height {
        return Err(shape(width * height, template.len()));
    }
    ImageGrid::from_vec(width, height, template.weights.iter().map(|&w| w as f32).collect())
}

/// `affine → conv(k, 1→F) → ReLU → blocks × residual → global average pool →
/// dense(F→1) → sigmoid`.
///
/// With template initialization, output channel 0 of the first convolution
/// takes the central `k×k` patch of the template, rescaled to the norm a
/// He-initialized kernel has on average; all other weights are He-normal.
/// The second convolution of every residual block is scaled by
/// `1/√blocks` so the stack starts close to the identity.
pub fn build_learned_observer(
    spec: &LearnedObserverSpec,
    rho_template: Option<&ImageGrid>,
    seed: u64,
) -> Result<Network<f32>> {
    spec.validate()?;
    let (f, k) = (spec.filters, spec.kernel);
    let mut layers = vec![
        Layer::Affine { scale: 1.0, shift: 0.0 },
        Layer::Conv(Conv2d::zeros(1, f, k)?),
        Layer::Relu,
    ];
    for _ in 0..spec.residual_blocks {
        layers.push(Layer::Residual(ResidualBlock::zeros(f, k)?));
    }
    layers.push(Layer::GlobalAvgPool);
    layers.push(Layer::Dense(Dense::zeros(f, 1)?));
    layers.push(Layer::Sigmoid);
    let mut net = Network::new(1, layers);
    net.init_he(derive_seed(seed, tag("observer"), spec.residual_blocks as u64));

    let damp = 1.0 / (spec.residual_blocks as f32).sqrt();
    for layer in &mut net.layers {
        if let Layer::Residual(r) = layer {
            r.conv2.weight.iter_mut().for_each(|w| *w *= damp);
        }
    }

    match (spec.init, rho_template) {
        (ObserverInit::Random, _) => {}
        (ObserverInit::RhoTemplate, None) => {
            return Err(invalid("template initialization requested without a template"));
        }
        (ObserverInit::RhoTemplate, Some(t)) => {
            if t.width() < k || t.height() < k {
                return Err(shape(format!("template of at least {k}x{k}"), format!("{}x{}", t.width(), t.height())));
            }
            let patch = t.crop((t.width() - k) / 2, (t.height() - k) / 2, k, k)?;
            let norm = patch.as_slice().iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt();
            if !(norm.is_finite() && norm > 0.0) {
                return Err(invalid("template center is zero or not finite"));
            }
            let scale = 2f64.sqrt() / norm;
            if let Layer::Conv(c) = &mut net.layers[1] {
                for (w, &v) in c.weight[..k * k].iter_mut().zip(patch.as_slice()) {
                    *w = (v as f64 * scale) as f32;
                }
            }
        }
    }
    Ok(net)
}

/// Standardizes observer inputs with `(x − mean)/std`.
pub fn set_input_normalization(net: &mut Network<f32>, mean: f64, std: f64) -> Result<()> {
    if !(std.is_finite() && std > 0.0 && mean.is_finite()) {
        return Err(invalid(format!("normalization needs finite mean and positive std, got {mean}, {std}")));
    }
    match net.layers.first_mut() {
        Some(l @ Layer::Affine { .. }) => {
            *l = Layer::Affine {
                scale: 1.0 / std,
                shift: -mean / std,
            };
            Ok(())
        }
        _ => Err(invalid("network has no input normalization layer")),
    }
}

fn check_input(net: &Network<f32>, img: &ImageGrid) -> Result<Tensor<f32>> {
    if net.input_channels != 1 {
        return Err(shape("single-channel network", net.input_channels));
    }
    let out = net.output_dims(img.height(), img.width())?;
    if out != (1, 1, 1) {
        return Err(shape("scalar output", format!("{out:?}")));
    }
    Ok(Tensor::from_image(img))
}

/// Sigmoid output in (0, 1), used as the test statistic. The sigmoid is
/// applied in f64 to the network's logit, which postpones saturation.
pub fn score_learned(net: &Network<f32>, img: &ImageGrid) -> Result<f64> {
    let z = score_learned_logit(net, img)?;
    Ok(match net.layers.last() {
        Some(Layer::Sigmoid) => sigmoid(z),
        _ => z,
    })
}

/// The pre-sigmoid output. It ranks images exactly as [`score_learned`]
/// does but does not saturate, so it is the better input for ROC analysis.
pub fn score_learned_logit(net: &Network<f32>, img: &ImageGrid) -> Result<f64> {
    let x = check_input(net, img)?;
    let depth = match net.layers.last() {
        Some(Layer::Sigmoid) => net.layers.len() - 1,
        _ => net.layers.len(),
    };
    Ok(net.forward_upto(&x, depth)?.data[0] as f64)
}

/// One of the four flip variants: identity, horizontal, vertical, both.
pub fn flip_variant(img: &ImageGrid, variant: usize) -> ImageGrid {
    match variant % 4 {
        0 => img.clone(),
        1 => img.flip_horizontal(),
        2 => img.flip_vertical(),
        _ => img.flip_horizontal().flip_vertical(),
    }
}

/// Labeled images served for cross-entropy training, optionally expanded
/// four-fold by flips.
pub struct LabeledImages<'a> {
    pub images: &'a [ImageGrid],
    pub labels: &'a [u8],
    pub flips: bool,
}

impl<'a> LabeledImages<'a> {
    pub fn new(images: &'a [ImageGrid], labels: &'a [u8], flips: bool) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(shape(format!("{} labels", images.len()), labels.len()));
        }
        Ok(Self { images, labels, flips })
    }
}

impl TrainData<f32> for LabeledImages<'_> {
    fn len(&self) -> usize {
        self.images.len() * if self.flips { 4 } else { 1 }
    }

    fn sample(&self, index: usize, _epoch: usize) -> Result<(Tensor<f32>, Target<f32>)> {
        let n = self.images.len();
        let img = flip_variant(&self.images[index % n], index / n);
        Ok((Tensor::from_image(&img), Target::Label(self.labels[index % n] as f64)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(blocks: usize) -> LearnedObserverSpec {
        LearnedObserverSpec {
            filters: 4,
            ..LearnedObserverSpec::new(blocks, ObserverInit::Random)
        }
    }

    #[test]
    fn block_count_sets_skip_connections() {
        for b in ALLOWED_BLOCKS {
            let net = build_learned_observer(&small(b), None, 1).unwrap();
            assert_eq!(net.layers.iter().filter(|l| l.name() == "residual").count(), b);
        }
        assert!(build_learned_observer(&small(3), None, 1).is_err());
    }

    #[test]
    fn zero_network_scores_one_half() {
        let mut net = build_learned_observer(&small(2), None, 1).unwrap();
        for p in net.params_mut() {
            p.iter_mut().for_each(|v| *v = 0.0);
        }
        for s in [0.0f32, 3.0, -7.0] {
            let img = ImageGrid::from_fn(9, 9, |x, y| s * (x as f32 - y as f32));
            assert_eq!(score_learned(&net, &img).unwrap(), 0.5);
            assert_eq!(score_learned_logit(&net, &img).unwrap(), 0.0);
        }
    }

    #[test]
    fn template_seeds_first_kernel() {
        let t = ImageGrid::from_fn(7, 7, |x, y| if x == 3 && y == 3 { -2.0 } else { 0.0 });
        let spec = LearnedObserverSpec {
            init: ObserverInit::RhoTemplate,
            ..small(2)
        };
        let net = build_learned_observer(&spec, Some(&t), 1).unwrap();
        let Layer::Conv(c) = &net.layers[1] else { panic!() };
        assert!((c.weight[4] + 2f32.sqrt()).abs() < 1e-6);
        assert!(c.weight[..9].iter().enumerate().all(|(i, &w)| i == 4 || w == 0.0));
        assert!(build_learned_observer(&spec, None, 1).is_err());
        assert!(build_learned_observer(&spec, Some(&ImageGrid::zeros(2, 2)), 1).is_err());
    }

    #[test]
    fn flips_expand_the_set() {
        let imgs = vec![ImageGrid::from_fn(3, 2, |x, y| (x + 3 * y) as f32)];
        let labels = vec![1];
        let d = LabeledImages::new(&imgs, &labels, true).unwrap();
        assert_eq!(d.len(), 4);
        let (x, t) = d.sample(3, 0).unwrap();
        assert_eq!(t, Target::Label(1.0));
        assert_eq!(x.data, vec![5.0, 4.0, 3.0, 2.0, 1.0, 0.0]);
    }
}
