//! Empirical ROC analysis: Mann–Whitney AUC with midranks, DeLong variance
//! and confidence intervals, and the paired DeLong comparison.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{invalid, shape, Error, Result};

/// Confidence level used when none is given.
pub const DEFAULT_LEVEL: f64 = 0.95;

#[derive(Clone, Debug, PartialEq)]
pub struct RocResult {
    pub auc: f64,
    pub variance: f64,
    pub ci: (f64, f64),
    pub level: f64,
    pub n0: usize,
    pub n1: usize,
}

/// Two-sided standard-normal quantile for `level`.
pub fn z_for_level(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(invalid(format!("confidence level must lie in (0, 1), got {level}")));
    }
    let n = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(n.inverse_cdf(1.0 - (1.0 - level) / 2.0))
}

fn standard_normal_cdf(x: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("standard normal").cdf(x)
}

fn check_nonempty(s0: &[f64], s1: &[f64]) -> Result<()> {
    if s0.is_empty() {
        return Err(Error::EmptyClass(0));
    }
    if s1.is_empty() {
        return Err(Error::EmptyClass(1));
    }
    if s0.iter().chain(s1).any(|v| v.is_nan()) {
        return Err(invalid("scores contain NaN"));
    }
    Ok(())
}

/// 1-based midranks of `values` (ties share the mean of their ranks).
fn midranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 averaged
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Structural components: for each class-1 score the fraction of class-0
/// scores below it (ties count ½), and for each class-0 score the fraction
/// of class-1 scores above it.
fn components(s0: &[f64], s1: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (n0, n1) = (s0.len(), s1.len());
    let all: Vec<f64> = s0.iter().chain(s1).copied().collect();
    let r_all = midranks(&all);
    let r0 = midranks(s0);
    let r1 = midranks(s1);
    let v10 = (0..n1).map(|j| (r_all[n0 + j] - r1[j]) / n0 as f64).collect();
    let v01 = (0..n0).map(|i| 1.0 - (r_all[i] - r0[i]) / n1 as f64).collect();
    (v10, v01)
}

/// Mann–Whitney AUC, `P(s1 > s0) + ½·P(s1 = s0)`.
pub fn auc(scores0: &[f64], scores1: &[f64]) -> Result<f64> {
    check_nonempty(scores0, scores1)?;
    let (n0, n1) = (scores0.len(), scores1.len());
    let all: Vec<f64> = scores0.iter().chain(scores1).copied().collect();
    let r = midranks(&all);
    let r1: f64 = r[n0..].iter().sum();
    // U is a multiple of ½, exact in f64 for any realistic sample size
    let u = r1 - (n1 * (n1 + 1)) as f64 / 2.0;
    Ok(u / (n0 as f64 * n1 as f64))
}

fn sample_cov(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (n - 1.0)
}

/// AUC with its DeLong variance and a normal-approximation confidence
/// interval clipped to `[0, 1]`.
pub fn delong_ci(scores0: &[f64], scores1: &[f64], level: f64) -> Result<RocResult> {
    check_nonempty(scores0, scores1)?;
    let (n0, n1) = (scores0.len(), scores1.len());
    if n0 < 2 || n1 < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: n0.min(n1),
        });
    }
    let z = z_for_level(level)?;
    let a = auc(scores0, scores1)?;
    let (v10, v01) = components(scores0, scores1);
    let variance = (sample_cov(&v10, &v10) / n1 as f64 + sample_cov(&v01, &v01) / n0 as f64).max(0.0);
    let half = z * variance.sqrt();
    Ok(RocResult {
        auc: a,
        variance,
        ci: ((a - half).max(0.0), (a + half).min(1.0)),
        level,
        n0,
        n1,
    })
}

/// Paired DeLong test of two observers scored on the same images.
#[derive(Clone, Debug, PartialEq)]
pub struct AucComparison {
    pub auc_a: f64,
    pub auc_b: f64,
    /// `auc_a − auc_b`.
    pub difference: f64,
    pub std_error: f64,
    pub z: f64,
    pub p_value: f64,
    pub significant: bool,
}

/// Compares observer A (`a0`, `a1`) with observer B (`b0`, `b1`); the
/// `i`-th score of each class must come from the same image for both.
pub fn auc_compare(a0: &[f64], a1: &[f64], b0: &[f64], b1: &[f64], alpha: f64) -> Result<AucComparison> {
    if a0.len() != b0.len() || a1.len() != b1.len() {
        return Err(shape(
            format!("{}+{} paired scores", a0.len(), a1.len()),
            format!("{}+{}", b0.len(), b1.len()),
        ));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    check_nonempty(a0, a1)?;
    let (n0, n1) = (a0.len(), a1.len());
    if n0 < 2 || n1 < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: n0.min(n1),
        });
    }
    let auc_a = auc(a0, a1)?;
    let auc_b = auc(b0, b1)?;
    let (va10, va01) = components(a0, a1);
    let (vb10, vb01) = components(b0, b1);
    let var = (sample_cov(&va10, &va10) + sample_cov(&vb10, &vb10) - 2.0 * sample_cov(&va10, &vb10)) / n1 as f64
        + (sample_cov(&va01, &va01) + sample_cov(&vb01, &vb01) - 2.0 * sample_cov(&va01, &vb01)) / n0 as f64;
    let difference = auc_a - auc_b;
    let std_error = var.max(0.0).sqrt();
    let z = if std_error > 0.0 {
        difference / std_error
    } else if difference == 0.0 {
        0.0
    } else {
        difference.signum() * f64::INFINITY
    };
    let p_value = 2.0 * (1.0 - standard_normal_cdf(z.abs()));
    Ok(AucComparison {
        auc_a,
        auc_b,
        difference,
        std_error,
        z,
        p_value,
        significant: p_value < alpha,
    })
}

/// Empirical ROC operating points `(FPR, TPR)` from `(0, 0)` to `(1, 1)`,
/// one per distinct threshold.
pub fn roc_curve(scores0: &[f64], scores1: &[f64]) -> Result<Vec<(f64, f64)>> {
    check_nonempty(scores0, scores1)?;
    let mut thresholds: Vec<f64> = scores0.iter().chain(scores1).copied().collect();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let (n0, n1) = (scores0.len() as f64, scores1.len() as f64);
    let mut points = vec![(0.0, 0.0)];
    for t in thresholds {
        let fp = scores0.iter().filter(|&&s| s >= t).count() as f64;
        let tp = scores1.iter().filter(|&&s| s >= t).count() as f64;
        points.push((fp / n0, tp / n1));
    }
    Ok(points)
}
