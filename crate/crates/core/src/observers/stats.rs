use crate::error::{invalid, Error, Result};
use crate::grid::ImageGrid;
use crate::linalg::{CovarianceAccumulator, Matrix, SymmetricEigen};

/// Class-conditional first and second moments of an observer's input.
#[derive(Clone, Debug)]
pub struct CovarianceEstimate {
    pub mean0: Vec<f64>,
    pub mean1: Vec<f64>,
    /// `mean1 − mean0`.
    pub mean_diff: Vec<f64>,
    /// `½(K₀ + K₁)`.
    pub covariance: Matrix,
    pub eigen: SymmetricEigen,
    pub counts: (usize, usize),
}

impl CovarianceEstimate {
    pub fn dim(&self) -> usize {
        self.mean_diff.len()
    }

    /// `σ₁/σ_n`; infinite when the smallest singular value is zero.
    pub fn condition_number(&self) -> f64 {
        let s = self.eigen.singular_values();
        match (s.first(), s.last()) {
            (Some(&a), Some(&b)) if b > 0.0 => a / b,
            _ => f64::INFINITY,
        }
    }
}

/// Streaming two-class moment accumulator. Partial accumulators built with
/// the same shift merge exactly, so samples can be split across threads.
#[derive(Clone, Debug)]
pub struct StatsAccumulator {
    classes: [CovarianceAccumulator; 2],
}

impl StatsAccumulator {
    pub fn new(n: usize) -> Self {
        Self {
            classes: [CovarianceAccumulator::new(n), CovarianceAccumulator::new(n)],
        }
    }

    pub fn with_shift(shift: Vec<f64>) -> Self {
        Self {
            classes: [
                CovarianceAccumulator::with_shift(shift.clone()),
                CovarianceAccumulator::with_shift(shift),
            ],
        }
    }

    pub fn dim(&self) -> usize {
        self.classes[0].dim()
    }

    pub fn counts(&self) -> (usize, usize) {
        (self.classes[0].count(), self.classes[1].count())
    }

    pub fn push(&mut self, label: u8, sample: &[f64]) -> Result<()> {
        self.class_mut(label)?.push(sample)
    }

    pub fn push_f32(&mut self, label: u8, sample: &[f32]) -> Result<()> {
        self.class_mut(label)?.push_f32(sample)
    }

    fn class_mut(&mut self, label: u8) -> Result<&mut CovarianceAccumulator> {
        self.classes
            .get_mut(label as usize)
            .ok_or_else(|| invalid(format!("labels are 0 or 1, got {label}")))
    }

    pub fn merge(&mut self, other: StatsAccumulator) -> Result<()> {
        let [a, b] = other.classes;
        self.classes[0].merge(a)?;
        self.classes[1].merge(b)
    }

    pub fn finish(self) -> Result<CovarianceEstimate> {
        let [c0, c1] = self.classes;
        let counts = (c0.count(), c1.count());
        for got in [counts.0, counts.1] {
            if got < 2 {
                return Err(Error::InsufficientSamples { needed: 2, got });
            }
        }
        let (mean0, k0) = c0.finish()?;
        let (mean1, k1) = c1.finish()?;
        let mean_diff = mean1.iter().zip(&mean0).map(|(a, b)| a - b).collect();
        let mut covariance = k0;
        for (a, b) in covariance.data.iter_mut().zip(&k1.data) {
            *a = 0.5 * (*a + b);
        }
        let eigen = SymmetricEigen::new(&covariance)?;
        Ok(CovarianceEstimate {
            mean0,
            mean1,
            mean_diff,
            covariance,
            eigen,
            counts,
        })
    }
}

/// Moments of two classes of sample vectors.
pub fn estimate_stats(class0: &[Vec<f64>], class1: &[Vec<f64>]) -> Result<CovarianceEstimate> {
    let n = class0.first().or(class1.first()).map_or(0, Vec::len);
    let mut acc = StatsAccumulator::new(n);
    for x in class0 {
        acc.push(0, x)?;
    }
    for x in class1 {
        acc.push(1, x)?;
    }
    acc.finish()
}

/// Moments of two classes of images, vectorized row-major.
pub fn estimate_image_stats<'a>(
    class0: impl IntoIterator<Item = &'a ImageGrid>,
    class1: impl IntoIterator<Item = &'a ImageGrid>,
) -> Result<CovarianceEstimate> {
    let mut acc: Option<StatsAccumulator> = None;
    for (label, class) in [(0u8, class0.into_iter().collect::<Vec<_>>()), (1, class1.into_iter().collect())] {
        for img in class {
            acc.get_or_insert_with(|| StatsAccumulator::new(img.len()))
                .push_f32(label, img.as_slice())?;
        }
    }
    acc.ok_or(Error::InsufficientSamples { needed: 2, got: 0 })?.finish()
}

pub fn image_vector(img: &ImageGrid) -> Vec<f64> {
    img.as_slice().iter().map(|&v| v as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn identical_samples_give_zero_covariance() {
        let a = vec![vec![1.0, 2.0], vec![1.0, 2.0]];
        let b = vec![vec![4.0, -1.0], vec![4.0, -1.0]];
        let s = estimate_stats(&a, &b).unwrap();
        assert!(s.covariance.data.iter().all(|&v| v == 0.0));
        assert_eq!(s.mean_diff, vec![3.0, -3.0]);
    }

    #[test]
    fn too_few_samples() {
        let a = vec![vec![1.0]];
        let b = vec![vec![1.0], vec![2.0]];
        assert!(matches!(estimate_stats(&a, &b), Err(Error::InsufficientSamples { got: 1, .. })));
    }

    #[test]
    fn isotropic_gaussian_recovers_scaled_identity() {
        let n = 16;
        let normal = Normal::new(0.0, 2.0).unwrap();
        let mut r = rng::rng(11);
        let mut draw = |k: usize| (0..k).map(|_| (0..n).map(|_| normal.sample(&mut r)).collect()).collect::<Vec<Vec<f64>>>();
        let a = draw(25_000);
        let b = draw(25_000);
        let s = estimate_stats(&a, &b).unwrap();
        for i in 0..n {
            for j in 0..n {
                let v = s.covariance.get(i, j);
                if i == j {
                    assert!((v - 4.0).abs() < 0.15, "{v}");
                } else {
                    assert!(v.abs() < 0.15, "{v}");
                }
            }
        }
        assert!(s.covariance.max_asymmetry() < 1e-10);
        let sv = s.eigen.singular_values();
        assert!(sv.windows(2).all(|w| w[0] >= w[1]));
        assert!(s.eigen.values.iter().all(|&l| l >= -1e-8 * sv[0]));
    }

    #[test]
    fn split_accumulation_merges_exactly() {
        let xs: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64).sin() + 100.0, (i as f64 * 0.3).cos()]).collect();
        let shift = vec![100.0, 0.0];
        let mut whole = StatsAccumulator::with_shift(shift.clone());
        let mut left = StatsAccumulator::with_shift(shift.clone());
        let mut right = StatsAccumulator::with_shift(shift);
        for (i, x) in xs.iter().enumerate() {
            let label = (i % 2) as u8;
            whole.push(label, x).unwrap();
            if i < 17 { left.push(label, x).unwrap() } else { right.push(label, x).unwrap() }
        }
        left.merge(right).unwrap();
        let (a, b) = (whole.finish().unwrap(), left.finish().unwrap());
        for (x, y) in a.covariance.data.iter().zip(&b.covariance.data) {
            assert!((x - y).abs() < 1e-12);
        }
        assert_eq!(a.counts, (20, 20));
    }
}
