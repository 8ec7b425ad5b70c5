use crate::error::{invalid, shape, Result};

use super::tensor::{Real, Tensor};

/// Same-size (zero padded), stride-1 cross-correlation with bias.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d<T> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    /// `[out][in][ky][kx]`.
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

/// Gradients of one conv layer for one sample.
pub(crate) struct ConvGrads<T> {
    pub weight: Vec<T>,
    pub bias: Vec<T>,
    pub input: Option<Tensor<T>>,
}

impl<T: Real> Conv2d<T> {
    pub fn zeros(in_channels: usize, out_channels: usize, kernel: usize) -> Result<Self> {
        if in_channels == 0 || out_channels == 0 || kernel % 2 == 0 {
            return Err(invalid(format!(
                "conv needs positive channel counts and an odd kernel, got {in_channels}->{out_channels}, k={kernel}"
            )));
        }
        Ok(Self {
            in_channels,
            out_channels,
            kernel,
            weight: vec![T::zero(); out_channels * in_channels * kernel * kernel],
            bias: vec![T::zero(); out_channels],
        })
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    fn patch_len(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        if x.channels != self.in_channels {
            return Err(shape(format!("{} input channels", self.in_channels), x.channels));
        }
        let hw = x.plane();
        let mut out = Tensor::zeros(self.out_channels, x.height, x.width);
        for (o, &b) in self.bias.iter().enumerate() {
            out.data[o * hw..(o + 1) * hw].fill(b);
        }
        let cols = im2col(x, self.kernel);
        let p = self.patch_len();
        T::gemm(
            self.out_channels,
            p,
            hw,
            T::one(),
            &self.weight,
            (p as isize, 1),
            &cols,
            (hw as isize, 1),
            T::one(),
            &mut out.data,
            (hw as isize, 1),
        );
        Ok(out)
    }

    pub(crate) fn backward(&self, x: &Tensor<T>, dy: &Tensor<T>, need_input: bool) -> Result<ConvGrads<T>> {
        if dy.channels != self.out_channels || dy.height != x.height || dy.width != x.width {
            return Err(shape(
                format!("{}x{}x{} upstream gradient", self.out_channels, x.height, x.width),
                format!("{}x{}x{}", dy.channels, dy.height, dy.width),
            ));
        }
        let hw = x.plane();
        let p = self.patch_len();
        let cols = im2col(x, self.kernel);
        let mut weight = vec![T::zero(); self.weight.len()];
        // dW = dY · colsᵀ
        T::gemm(
            self.out_channels,
            hw,
            p,
            T::one(),
            &dy.data,
            (hw as isize, 1),
            &cols,
            (1, hw as isize),
            T::zero(),
            &mut weight,
            (p as isize, 1),
        );
        let bias = (0..self.out_channels)
            .map(|o| T::of_f64(dy.data[o * hw..(o + 1) * hw].iter().map(|v| v.as_f64()).sum()))
            .collect();
        let input = if need_input {
            let mut dcols = vec![T::zero(); p * hw];
            // dcols = Wᵀ · dY
            T::gemm(
                p,
                self.out_channels,
                hw,
                T::one(),
                &self.weight,
                (1, p as isize),
                &dy.data,
                (hw as isize, 1),
                T::zero(),
                &mut dcols,
                (hw as isize, 1),
            );
            Some(col2im(&dcols, x.channels, x.height, x.width, self.kernel))
        } else {
            None
        };
        Ok(ConvGrads { weight, bias, input })
    }
}

/// Rows indexed by `(channel, ky, kx)`, columns by output pixel.
fn im2col<T: Real>(x: &Tensor<T>, k: usize) -> Vec<T> {
    let (c, h, w) = x.dims();
    let hw = h * w;
    let pad = (k / 2) as isize;
    let mut cols = vec![T::zero(); c * k * k * hw];
    for ch in 0..c {
        let src = &x.data[ch * hw..(ch + 1) * hw];
        for ky in 0..k {
            for kx in 0..k {
                let row = ((ch * k + ky) * k + kx) * hw;
                let dx = kx as isize - pad;
                let x_lo = (-dx).max(0) as usize;
                let x_hi = (w as isize - dx).min(w as isize).max(0) as usize;
                if x_lo >= x_hi {
                    continue;
                }
                for y in 0..h {
                    let sy = y as isize + ky as isize - pad;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let s0 = sy as usize * w;
                    let dst = &mut cols[row + y * w + x_lo..row + y * w + x_hi];
                    let s = (s0 as isize + x_lo as isize + dx) as usize;
                    dst.copy_from_slice(&src[s..s + (x_hi - x_lo)]);
                }
            }
        }
    }
    cols
}

fn col2im<T: Real>(cols: &[T], c: usize, h: usize, w: usize, k: usize) -> Tensor<T> {
    let hw = h * w;
    let pad = (k / 2) as isize;
    let mut out = Tensor::zeros(c, h, w);
    for ch in 0..c {
        let dst = &mut out.data[ch * hw..(ch + 1) * hw];
        for ky in 0..k {
            for kx in 0..k {
                let row = ((ch * k + ky) * k + kx) * hw;
                let dx = kx as isize - pad;
                let x_lo = (-dx).max(0) as usize;
                let x_hi = (w as isize - dx).min(w as isize).max(0) as usize;
                if x_lo >= x_hi {
                    continue;
                }
                for y in 0..h {
                    let sy = y as isize + ky as isize - pad;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let s = (sy as usize * w) as isize + x_lo as isize + dx;
                    let src = &cols[row + y * w + x_lo..row + y * w + x_hi];
                    for (d, &v) in dst[s as usize..s as usize + (x_hi - x_lo)].iter_mut().zip(src) {
                        *d = *d + v;
                    }
                }
            }
        }
    }
    out
}

/// `x + conv2(relu(conv1(x)))`.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualBlock<T> {
    pub conv1: Conv2d<T>,
    pub conv2: Conv2d<T>,
}

impl<T: Real> ResidualBlock<T> {
    pub fn zeros(channels: usize, kernel: usize) -> Result<Self> {
        Ok(Self {
            conv1: Conv2d::zeros(channels, channels, kernel)?,
            conv2: Conv2d::zeros(channels, channels, kernel)?,
        })
    }

    pub fn channels(&self) -> usize {
        self.conv1.in_channels
    }
}

/// Fully connected layer over the flattened input.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<T> {
    pub inputs: usize,
    pub outputs: usize,
    /// `[out][in]`.
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Dense<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Result<Self> {
        if inputs == 0 || outputs == 0 {
            return Err(invalid("dense layer needs positive sizes"));
        }
        Ok(Self {
            inputs,
            outputs,
            weight: vec![T::zero(); inputs * outputs],
            bias: vec![T::zero(); outputs],
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Layer<T> {
    Conv(Conv2d<T>),
    Relu,
    Residual(ResidualBlock<T>),
    GlobalAvgPool,
    Dense(Dense<T>),
    Sigmoid,
    /// Fixed `scale·x + shift`, used for input/output normalization.
    Affine { scale: f64, shift: f64 },
}

pub(crate) struct LayerGrads<T> {
    pub params: Vec<Vec<T>>,
    pub input: Option<Tensor<T>>,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl<T: Real> Layer<T> {
    pub fn name(&self) -> &'static str {
        match self {
            Layer::Conv(_) => "conv",
            Layer::Relu => "relu",
            Layer::Residual(_) => "residual",
            Layer::GlobalAvgPool => "global_avg_pool",
            Layer::Dense(_) => "dense",
            Layer::Sigmoid => "sigmoid",
            Layer::Affine { .. } => "affine",
        }
    }

    pub fn params(&self) -> Vec<&[T]> {
        match self {
            Layer::Conv(c) => vec![&c.weight, &c.bias],
            Layer::Residual(r) => vec![&r.conv1.weight, &r.conv1.bias, &r.conv2.weight, &r.conv2.bias],
            Layer::Dense(d) => vec![&d.weight, &d.bias],
            _ => vec![],
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut [T]> {
        match self {
            Layer::Conv(c) => vec![&mut c.weight, &mut c.bias],
            Layer::Residual(r) => vec![
                &mut r.conv1.weight,
                &mut r.conv1.bias,
                &mut r.conv2.weight,
                &mut r.conv2.bias,
            ],
            Layer::Dense(d) => vec![&mut d.weight, &mut d.bias],
            _ => vec![],
        }
    }

    /// Output shape for an input of shape `(c, h, w)`.
    pub fn output_dims(&self, (c, h, w): (usize, usize, usize)) -> Result<(usize, usize, usize)> {
        match self {
            Layer::Conv(conv) => {
                if c != conv.in_channels {
                    return Err(shape(format!("{} channels", conv.in_channels), c));
                }
                Ok((conv.out_channels, h, w))
            }
            Layer::Residual(r) => {
                if c != r.channels() || r.conv1.out_channels != r.conv2.in_channels || r.conv2.out_channels != c {
                    return Err(shape(format!("{} channels", r.channels()), c));
                }
                Ok((c, h, w))
            }
            Layer::GlobalAvgPool => Ok((c, 1, 1)),
            Layer::Dense(d) => {
                if c * h * w != d.inputs {
                    return Err(shape(format!("{} dense inputs", d.inputs), c * h * w));
                }
                Ok((d.outputs, 1, 1))
            }
            Layer::Relu | Layer::Sigmoid | Layer::Affine { .. } => Ok((c, h, w)),
        }
    }

    /// Output plus the residual block's hidden activation, if any.
    pub(crate) fn forward(&self, x: &Tensor<T>) -> Result<(Tensor<T>, Option<Tensor<T>>)> {
        match self {
            Layer::Conv(c) => Ok((c.forward(x)?, None)),
            Layer::Relu => Ok((map(x, |v| v.max(T::zero())), None)),
            Layer::Residual(r) => {
                let mut hidden = r.conv1.forward(x)?;
                hidden.data.iter_mut().for_each(|v| *v = v.max(T::zero()));
                let mut y = r.conv2.forward(&hidden)?;
                if y.dims() != x.dims() {
                    return Err(shape(format!("{:?}", x.dims()), format!("{:?}", y.dims())));
                }
                y.data.iter_mut().zip(&x.data).for_each(|(a, &b)| *a = *a + b);
                Ok((y, Some(hidden)))
            }
            Layer::GlobalAvgPool => {
                let hw = x.plane();
                let data = (0..x.channels)
                    .map(|c| {
                        let s: f64 = x.data[c * hw..(c + 1) * hw].iter().map(|v| v.as_f64()).sum();
                        T::of_f64(s / hw as f64)
                    })
                    .collect();
                Ok((Tensor::vector(data), None))
            }
            Layer::Dense(d) => {
                if x.len() != d.inputs {
                    return Err(shape(format!("{} dense inputs", d.inputs), x.len()));
                }
                let mut out = d.bias.clone();
                T::gemm(
                    d.outputs,
                    d.inputs,
                    1,
                    T::one(),
                    &d.weight,
                    (d.inputs as isize, 1),
                    &x.data,
                    (1, 1),
                    T::one(),
                    &mut out,
                    (1, 1),
                );
                Ok((Tensor::vector(out), None))
            }
            Layer::Sigmoid => Ok((map(x, |v| T::of_f64(sigmoid(v.as_f64()))), None)),
            Layer::Affine { scale, shift } => {
                let (s, b) = (T::of_f64(*scale), T::of_f64(*shift));
                Ok((map(x, |v| s * v + b), None))
            }
        }
    }

    pub(crate) fn backward(
        &self,
        x: &Tensor<T>,
        hidden: Option<&Tensor<T>>,
        dy: &Tensor<T>,
        need_input: bool,
    ) -> Result<LayerGrads<T>> {
        match self {
            Layer::Conv(c) => {
                let g = c.backward(x, dy, need_input)?;
                Ok(LayerGrads {
                    params: vec![g.weight, g.bias],
                    input: g.input,
                })
            }
            Layer::Relu => Ok(LayerGrads {
                params: vec![],
                input: Some(zip(x, dy, |xv, g| if xv > T::zero() { g } else { T::zero() })?),
            }),
            Layer::Residual(r) => {
                let hidden = hidden.ok_or(crate::Error::MissingCache)?;
                let g2 = r.conv2.backward(hidden, dy, true)?;
                let dh = g2.input.expect("requested input gradient");
                let dh = zip(hidden, &dh, |a, g| if a > T::zero() { g } else { T::zero() })?;
                let g1 = r.conv1.backward(x, &dh, need_input)?;
                let input = g1.input.map(|mut dx| {
                    dx.data.iter_mut().zip(&dy.data).for_each(|(a, &b)| *a = *a + b);
                    dx
                });
                Ok(LayerGrads {
                    params: vec![g1.weight, g1.bias, g2.weight, g2.bias],
                    input,
                })
            }
            Layer::GlobalAvgPool => {
                if dy.len() != x.channels {
                    return Err(shape(x.channels, dy.len()));
                }
                let hw = x.plane();
                let mut dx = Tensor::zeros(x.channels, x.height, x.width);
                let inv = T::of_f64(1.0 / hw as f64);
                for c in 0..x.channels {
                    dx.data[c * hw..(c + 1) * hw].fill(dy.data[c] * inv);
                }
                Ok(LayerGrads {
                    params: vec![],
                    input: Some(dx),
                })
            }
            Layer::Dense(d) => {
                if dy.len() != d.outputs || x.len() != d.inputs {
                    return Err(shape(format!("{}->{}", d.inputs, d.outputs), format!("{}->{}", x.len(), dy.len())));
                }
                let mut weight = vec![T::zero(); d.weight.len()];
                for o in 0..d.outputs {
                    let g = dy.data[o];
                    for (w, &xv) in weight[o * d.inputs..(o + 1) * d.inputs].iter_mut().zip(&x.data) {
                        *w = g * xv;
                    }
                }
                let input = need_input.then(|| {
                    let mut dx = x.clone();
                    for i in 0..d.inputs {
                        let s: f64 = (0..d.outputs)
                            .map(|o| d.weight[o * d.inputs + i].as_f64() * dy.data[o].as_f64())
                            .sum();
                        dx.data[i] = T::of_f64(s);
                    }
                    dx
                });
                Ok(LayerGrads {
                    params: vec![weight, dy.data.clone()],
                    input,
                })
            }
            Layer::Sigmoid => Ok(LayerGrads {
                params: vec![],
                input: Some(zip(x, dy, |xv, g| {
                    let s = sigmoid(xv.as_f64());
                    g * T::of_f64(s * (1.0 - s))
                })?),
            }),
            Layer::Affine { scale, .. } => {
                let s = T::of_f64(*scale);
                Ok(LayerGrads {
                    params: vec![],
                    input: Some(map(dy, |g| g * s)),
                })
            }
        }
    }

    pub fn cast<U: Real>(&self) -> Layer<U> {
        let c = |v: &[T]| v.iter().map(|x| U::of_f64(x.as_f64())).collect::<Vec<U>>();
        let conv = |k: &Conv2d<T>| Conv2d {
            in_channels: k.in_channels,
            out_channels: k.out_channels,
            kernel: k.kernel,
            weight: c(&k.weight),
            bias: c(&k.bias),
        };
        match self {
            Layer::Conv(k) => Layer::Conv(conv(k)),
            Layer::Relu => Layer::Relu,
            Layer::Residual(r) => Layer::Residual(ResidualBlock {
                conv1: conv(&r.conv1),
                conv2: conv(&r.conv2),
            }),
            Layer::GlobalAvgPool => Layer::GlobalAvgPool,
            Layer::Dense(d) => Layer::Dense(Dense {
                inputs: d.inputs,
                outputs: d.outputs,
                weight: c(&d.weight),
                bias: c(&d.bias),
            }),
            Layer::Sigmoid => Layer::Sigmoid,
            Layer::Affine { scale, shift } => Layer::Affine {
                scale: *scale,
                shift: *shift,
            },
        }
    }
}

fn map<T: Real>(x: &Tensor<T>, f: impl Fn(T) -> T) -> Tensor<T> {
    Tensor {
        channels: x.channels,
        height: x.height,
        width: x.width,
        data: x.data.iter().map(|&v| f(v)).collect(),
    }
}

fn zip<T: Real>(x: &Tensor<T>, y: &Tensor<T>, f: impl Fn(T, T) -> T) -> Result<Tensor<T>> {
    if x.len() != y.len() {
        return Err(shape(x.len(), y.len()));
    }
    Ok(Tensor {
        channels: x.channels,
        height: x.height,
        width: x.width,
        data: x.data.iter().zip(&y.data).map(|(&a, &b)| f(a, b)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_conv(x: &Tensor<f64>, c: &Conv2d<f64>) -> Tensor<f64> {
        let (ci, h, w) = x.dims();
        let k = c.kernel as isize;
        let p = k / 2;
        let mut out = Tensor::zeros(c.out_channels, h, w);
        for o in 0..c.out_channels {
            for y in 0..h as isize {
                for xx in 0..w as isize {
                    let mut acc = c.bias[o];
                    for i in 0..ci {
                        for ky in 0..k {
                            for kx in 0..k {
                                let (sy, sx) = (y + ky - p, xx + kx - p);
                                if sy < 0 || sx < 0 || sy >= h as isize || sx >= w as isize {
                                    continue;
                                }
                                let wv = c.weight[((o * ci + i) * c.kernel + ky as usize) * c.kernel + kx as usize];
                                acc += wv * x.data[(i * h + sy as usize) * w + sx as usize];
                            }
                        }
                    }
                    out.data[(o * h + y as usize) * w + xx as usize] = acc;
                }
            }
        }
        out
    }

    fn pseudo(i: usize) -> f64 {
        ((i as f64 * 12.9898).sin() * 43758.5453).fract()
    }

    #[test]
    fn conv_matches_nested_loops() {
        let mut c = Conv2d::<f64>::zeros(3, 4, 3).unwrap();
        c.weight.iter_mut().enumerate().for_each(|(i, w)| *w = pseudo(i));
        c.bias.iter_mut().enumerate().for_each(|(i, b)| *b = pseudo(i + 1000));
        let x = Tensor::from_vec(3, 5, 7, (0..105).map(|i| pseudo(i + 77)).collect()).unwrap();
        let got = c.forward(&x).unwrap();
        let want = naive_conv(&x, &c);
        for (a, b) in got.data.iter().zip(&want.data) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn identity_kernel_passes_input() {
        let mut c = Conv2d::<f32>::zeros(1, 1, 1).unwrap();
        c.weight[0] = 1.0;
        let x = Tensor::from_vec(1, 3, 4, (0..12).map(|v| v as f32).collect()).unwrap();
        assert_eq!(c.forward(&x).unwrap(), x);
    }

    #[test]
    fn impulse_reveals_flipped_kernel() {
        let mut c = Conv2d::<f64>::zeros(1, 1, 3).unwrap();
        c.weight = (1..=9).map(|v| v as f64).collect();
        let mut x = Tensor::zeros(1, 5, 5);
        x.data[12] = 1.0;
        let y = c.forward(&x).unwrap();
        // cross-correlation: the response around the impulse is the kernel rotated 180°
        for dy in 0..3 {
            for dx in 0..3 {
                assert_eq!(y.data[(1 + dy) * 5 + 1 + dx], c.weight[(2 - dy) * 3 + (2 - dx)]);
            }
        }
    }

    #[test]
    fn channel_mismatch_is_an_error() {
        let c = Conv2d::<f32>::zeros(2, 1, 3).unwrap();
        assert!(c.forward(&Tensor::zeros(1, 4, 4)).is_err());
        assert!(Conv2d::<f32>::zeros(1, 1, 2).is_err());
    }

    #[test]
    fn zeroed_block_is_identity() {
        let r = Layer::Residual(ResidualBlock::<f32>::zeros(2, 3).unwrap());
        let x = Tensor::from_vec(2, 3, 3, (0..18).map(|v| v as f32 - 9.0).collect()).unwrap();
        assert_eq!(r.forward(&x).unwrap().0, x);
    }

    #[test]
    fn relu_gradient_is_masked() {
        let x = Tensor::<f64>::vector(vec![-1.0, 0.5, -0.0, 2.0]);
        let dy = Tensor::vector(vec![1.0; 4]);
        let g = Layer::Relu.backward(&x, None, &dy, true).unwrap();
        assert_eq!(g.input.unwrap().data, vec![0.0, 1.0, 0.0, 1.0]);
        let (y, _) = Layer::<f64>::Relu.forward(&x).unwrap();
        assert!(y.data.iter().all(|&v| v >= 0.0));
    }
}
