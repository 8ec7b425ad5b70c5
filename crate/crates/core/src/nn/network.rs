use rand_distr::{Distribution, Normal};

use crate::error::{invalid, Error, Result};
use crate::rng::{self, derive_seed, tag};

use super::layers::Layer;
use super::tensor::{Real, Tensor};

/// An ordered stack of layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Network<T> {
    pub input_channels: usize,
    pub layers: Vec<Layer<T>>,
}

/// Per-layer inputs recorded by [`Network::forward_cached`].
#[derive(Clone, Debug)]
pub struct ForwardCache<T> {
    inputs: Vec<Tensor<T>>,
    hidden: Vec<Option<Tensor<T>>>,
    param_shapes: Vec<usize>,
}

impl<T> ForwardCache<T> {
    /// Number of leading layers the cache covers.
    pub fn depth(&self) -> usize {
        self.inputs.len()
    }
}

/// Parameter gradients (one `f64` vector per parameter tensor, in
/// [`Network::params`] order) and the gradient with respect to the input.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T> {
    pub params: Vec<Vec<f64>>,
    pub input: Option<Tensor<T>>,
}

impl<T: Real> Gradients<T> {
    pub fn zeros_like(net: &Network<T>) -> Self {
        Self {
            params: net.params().iter().map(|p| vec![0.0; p.len()]).collect(),
            input: None,
        }
    }

    /// Adds `scale·other` to the parameter gradients.
    pub fn accumulate(&mut self, other: &Gradients<T>, scale: f64) {
        for (a, b) in self.params.iter_mut().zip(&other.params) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.params.iter().flatten().all(|&v| v == 0.0)
    }
}

impl<T: Real> Network<T> {
    pub fn new(input_channels: usize, layers: Vec<Layer<T>>) -> Self {
        Self {
            input_channels,
            layers,
        }
    }

    pub fn params(&self) -> Vec<&[T]> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut [T]> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    fn param_shapes(&self) -> Vec<usize> {
        self.params().iter().map(|p| p.len()).collect()
    }

    /// Output shape for an input of `height`×`width`, checking every layer.
    pub fn output_dims(&self, height: usize, width: usize) -> Result<(usize, usize, usize)> {
        let mut d = (self.input_channels, height, width);
        for l in &self.layers {
            d = l.output_dims(d)?;
        }
        Ok(d)
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.forward_upto(x, self.layers.len())
    }

    /// Output of the first `depth` layers.
    pub fn forward_upto(&self, x: &Tensor<T>, depth: usize) -> Result<Tensor<T>> {
        let mut a = x.clone();
        for l in &self.layers[..depth] {
            a = l.forward(&a)?.0;
        }
        Ok(a)
    }

    /// Forward through the first `depth` layers, recording what backward
    /// needs.
    pub fn forward_cached(&self, x: &Tensor<T>, depth: usize) -> Result<(Tensor<T>, ForwardCache<T>)> {
        if depth > self.layers.len() {
            return Err(invalid(format!("depth {depth} exceeds {} layers", self.layers.len())));
        }
        let mut inputs = Vec::with_capacity(depth);
        let mut hidden = Vec::with_capacity(depth);
        let mut a = x.clone();
        for l in &self.layers[..depth] {
            let (y, h) = l.forward(&a)?;
            inputs.push(std::mem::replace(&mut a, y));
            hidden.push(h);
        }
        Ok((
            a,
            ForwardCache {
                inputs,
                hidden,
                param_shapes: self.param_shapes(),
            },
        ))
    }

    /// Reverse-mode gradients through the layers `cache` covers, given the
    /// gradient of the loss with respect to their output.
    pub fn backward(&self, cache: &ForwardCache<T>, grad_out: &Tensor<T>, need_input: bool) -> Result<Gradients<T>> {
        if cache.inputs.is_empty() && !self.layers.is_empty() || cache.param_shapes != self.param_shapes() {
            return Err(Error::MissingCache);
        }
        let depth = cache.depth();
        let mut per_layer: Vec<Vec<Vec<T>>> = vec![Vec::new(); depth];
        let mut g = grad_out.clone();
        let mut input_grad = None;
        for i in (0..depth).rev() {
            let layer = &self.layers[i];
            let need = need_input || i > 0;
            let lg = layer.backward(&cache.inputs[i], cache.hidden[i].as_ref(), &g, need)?;
            per_layer[i] = lg.params;
            match lg.input {
                Some(dx) if i > 0 => g = dx,
                Some(dx) => input_grad = Some(dx),
                None => {}
            }
        }
        let mut params = Vec::with_capacity(cache.param_shapes.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let n = layer.params().len();
            if i < depth {
                params.extend(per_layer[i].iter().map(|p| p.iter().map(|v| v.as_f64()).collect::<Vec<f64>>()));
            } else {
                params.extend(layer.params().iter().map(|p| vec![0.0; p.len()]));
            }
            debug_assert!(i >= depth || per_layer[i].len() == n);
        }
        Ok(Gradients {
            params,
            input: input_grad,
        })
    }

    pub fn cast<U: Real>(&self) -> Network<U> {
        Network {
            input_channels: self.input_channels,
            layers: self.layers.iter().map(|l| l.cast()).collect(),
        }
    }

    /// He-normal weights (std `sqrt(2/fan_in)`) and zero biases, each
    /// tensor drawn from its own derived seed.
    pub fn init_he(&mut self, seed: u64) {
        let mut index = 0u64;
        for layer in &mut self.layers {
            let fans: Vec<usize> = match layer {
                Layer::Conv(c) => vec![c.in_channels * c.kernel * c.kernel],
                Layer::Residual(r) => vec![
                    r.conv1.in_channels * r.conv1.kernel * r.conv1.kernel,
                    r.conv2.in_channels * r.conv2.kernel * r.conv2.kernel,
                ],
                Layer::Dense(d) => vec![d.inputs],
                _ => vec![],
            };
            let mut params = layer.params_mut();
            for (k, fan_in) in fans.into_iter().enumerate() {
                let std = (2.0 / fan_in as f64).sqrt();
                let normal = Normal::new(0.0, std).expect("positive std");
                let mut r = rng::rng(derive_seed(seed, tag("init"), index));
                index += 1;
                for w in params[2 * k].iter_mut() {
                    *w = T::of_f64(normal.sample(&mut r));
                }
                params[2 * k + 1].iter_mut().for_each(|b| *b = T::zero());
            }
        }
    }
}
