use std::fmt::Debug;

use num_traits::Float;

use crate::error::{invalid, shape, Result};
use crate::grid::ImageGrid;

/// Scalar type a network computes in.
pub trait Real: Float + Default + Debug + Send + Sync + std::iter::Sum + 'static {
    fn of_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;

    /// `C = α·A·B + β·C` with explicit (row, column) strides.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        a_strides: (isize, isize),
        b: &[Self],
        b_strides: (isize, isize),
        beta: Self,
        c: &mut [Self],
        c_strides: (isize, isize),
    );
}

fn reach(rows: usize, cols: usize, (rs, cs): (isize, isize)) -> usize {
    if rows == 0 || cols == 0 {
        0
    } else {
        (rows - 1) * rs as usize + (cols - 1) * cs as usize + 1
    }
}

macro_rules! real_impl {
    ($t:ty, $gemm:path) => {
        impl Real for $t {
            #[inline]
            fn of_f64(v: f64) -> Self {
                v as $t
            }

            #[inline]
            fn as_f64(self) -> f64 {
                self as f64
            }

            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: &[Self],
                a_strides: (isize, isize),
                b: &[Self],
                b_strides: (isize, isize),
                beta: Self,
                c: &mut [Self],
                c_strides: (isize, isize),
            ) {
                if m == 0 || n == 0 {
                    return;
                }
                assert!(a.len() >= reach(m, k, a_strides));
                assert!(b.len() >= reach(k, n, b_strides));
                assert!(c.len() >= reach(m, n, c_strides));
                // SAFETY: the assertions above bound every index the strides reach.
                unsafe {
                    $gemm(
                        m,
                        k,
                        n,
                        alpha,
                        a.as_ptr(),
                        a_strides.0,
                        a_strides.1,
                        b.as_ptr(),
                        b_strides.0,
                        b_strides.1,
                        beta,
                        c.as_mut_ptr(),
                        c_strides.0,
                        c_strides.1,
                    );
                }
            }
        }
    };
}

real_impl!(f32, matrixmultiply::sgemm);
real_impl!(f64, matrixmultiply::dgemm);

/// Activations of one sample: `channels`×`height`×`width`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![T::zero(); channels * height * width],
        }
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(invalid("tensor dimensions must be positive"));
        }
        if data.len() != channels * height * width {
            return Err(shape(format!("{channels}x{height}x{width} values"), data.len()));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    /// A length-`n` vector as an `n`×1×1 tensor.
    pub fn vector(data: Vec<T>) -> Self {
        Self {
            channels: data.len(),
            height: 1,
            width: 1,
            data,
        }
    }

    pub fn from_image(img: &ImageGrid) -> Self {
        Self {
            channels: 1,
            height: img.height(),
            width: img.width(),
            data: img.as_slice().iter().map(|&v| T::of_f64(v as f64)).collect(),
        }
    }

    /// Channel 0 as an image.
    pub fn to_image(&self) -> Result<ImageGrid> {
        let plane = self.height * self.width;
        ImageGrid::from_vec(
            self.width,
            self.height,
            self.data[..plane].iter().map(|v| v.as_f64() as f32).collect(),
        )
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn plane(&self) -> usize {
        self.height * self.width
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor {
            channels: self.channels,
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|v| U::of_f64(v.as_f64())).collect(),
        }
    }
}
