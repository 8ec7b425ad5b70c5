use crate::error::{invalid, shape, Error, Result};
use crate::linalg::{dot, gemm_f64};
use crate::metrics::roc;

use super::stats::CovarianceEstimate;

/// Above this condition number the plain Hotelling template is refused.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Clone, Debug, PartialEq)]
pub enum TemplateKind {
    Hotelling,
    /// Truncated spectral inverse keeping `rank` components.
    Regularized { lambda: f64, rank: usize },
    /// Template over Gabor channel outputs, optionally truncated.
    Channelized { lambda: Option<f64>, rank: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearTemplate {
    pub weights: Vec<f64>,
    pub kind: TemplateKind,
}

impl LinearTemplate {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// `wᵀx`.
pub fn score_linear(template: &LinearTemplate, x: &[f64]) -> Result<f64> {
    if x.len() != template.len() {
        return Err(shape(template.len(), x.len()));
    }
    Ok(dot(&template.weights, x))
}

/// Spectral solve of `K·w = Δf̄` over the leading `rank` eigenpairs.
fn spectral_solve(stats: &CovarianceEstimate, rank: usize) -> Vec<f64> {
    let coeffs = spectral_coefficients(stats, rank);
    stats.eigen.combine(&coeffs, rank)
}

/// `(u_iᵀΔf̄)/λ_i` for the leading `rank` eigenpairs.
fn spectral_coefficients(stats: &CovarianceEstimate, rank: usize) -> Vec<f64> {
    (0..rank)
        .map(|i| dot(stats.eigen.vectors.row(i), &stats.mean_diff) / stats.eigen.values[i])
        .collect()
}

/// `w = K⁻¹Δf̄`.
pub fn hotelling_template(stats: &CovarianceEstimate) -> Result<LinearTemplate> {
    let condition = stats.condition_number();
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned { condition });
    }
    Ok(LinearTemplate {
        weights: spectral_solve(stats, stats.dim()),
        kind: TemplateKind::Hotelling,
    })
}

/// Number of components kept at threshold `lambda`: the largest `P` with
/// `σ_P ≥ λσ₁` (exactly zero singular values are never kept).
pub fn rho_rank(singular_values: &[f64], lambda: f64) -> usize {
    let Some(&s1) = singular_values.first() else {
        return 0;
    };
    let cut = lambda * s1;
    singular_values.iter().take_while(|&&s| s > 0.0 && s >= cut).count()
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(invalid(format!("threshold must lie in [0, 1], got {lambda}")));
    }
    Ok(())
}

/// Truncated spectral inverse `w = Σ_{i≤P} σ_i⁻¹ u_i v_iᵀ Δf̄`.
pub fn rho_template(stats: &CovarianceEstimate, lambda: f64) -> Result<LinearTemplate> {
    check_lambda(lambda)?;
    let rank = rho_rank(&stats.eigen.singular_values(), lambda);
    if rank == 0 {
        return Err(Error::AllTruncated { lambda });
    }
    Ok(LinearTemplate {
        weights: spectral_solve(stats, rank),
        kind: TemplateKind::Regularized { lambda, rank },
    })
}

/// `per_decade` log-spaced points per decade from `lo` to `hi` inclusive.
pub fn lambda_grid(lo: f64, hi: f64, per_decade: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && hi <= 1.0) || per_decade == 0 {
        return Err(invalid(format!("bad threshold grid {lo}..{hi} ({per_decade}/decade)")));
    }
    let decades = (hi / lo).log10();
    let steps = (decades * per_decade as f64).round() as usize;
    let (a, b) = (lo.log10(), hi.log10());
    Ok((0..=steps)
        .map(|k| {
            if steps == 0 {
                lo
            } else {
                10f64.powf(a + (b - a) * k as f64 / steps as f64)
            }
        })
        .collect())
}

/// The default search grid, `10⁻⁹ … 10⁻⁴` at six points per decade.
pub fn default_lambda_grid() -> Vec<f64> {
    lambda_grid(1e-9, 1e-4, 6).expect("static grid")
}

#[derive(Clone, Debug)]
pub struct LambdaScore {
    pub lambda: f64,
    pub rank: usize,
    /// `None` when every component is truncated.
    pub auc: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct LambdaSelection {
    pub lambda: f64,
    pub template: LinearTemplate,
    pub scores: Vec<LambdaScore>,
}

/// Picks the threshold with the highest validation AUC (ties go to the
/// smaller threshold). Validation vectors are projected onto the eigenbasis
/// once; each candidate is then a prefix sum over components.
pub fn select_rho_lambda(
    stats: &CovarianceEstimate,
    validation0: &[Vec<f64>],
    validation1: &[Vec<f64>],
    grid: &[f64],
) -> Result<LambdaSelection> {
    if grid.is_empty() {
        return Err(invalid("threshold grid is empty"));
    }
    for &l in grid {
        check_lambda(l)?;
    }
    if validation0.is_empty() {
        return Err(Error::EmptyClass(0));
    }
    if validation1.is_empty() {
        return Err(Error::EmptyClass(1));
    }
    let n = stats.dim();
    let sv = stats.eigen.singular_values();
    let ranks: Vec<usize> = grid.iter().map(|&l| rho_rank(&sv, l)).collect();
    let max_rank = ranks.iter().copied().max().unwrap_or(0);

    let samples: Vec<&Vec<f64>> = validation0.iter().chain(validation1).collect();
    let m = samples.len();
    let mut x = Vec::with_capacity(m * n);
    for s in &samples {
        if s.len() != n {
            return Err(shape(n, s.len()));
        }
        x.extend_from_slice(s);
    }
    // proj (m × max_rank) = X (m × n) · U_kᵀ, U rows are eigenvectors
    let mut proj = vec![0.0; m * max_rank];
    gemm_f64(
        m,
        n,
        max_rank,
        1.0,
        &x,
        (n as isize, 1),
        &stats.eigen.vectors.data,
        (1, n as isize),
        0.0,
        &mut proj,
        (max_rank as isize, 1),
    );
    drop(x);
    let coeffs = spectral_coefficients(stats, max_rank);

    let mut by_rank: Vec<usize> = ranks.iter().copied().filter(|&r| r > 0).collect();
    by_rank.sort_unstable();
    by_rank.dedup();
    let mut auc_of_rank = std::collections::HashMap::new();
    let mut scores = vec![0.0; m];
    let mut done = 0;
    for &r in &by_rank {
        for (j, s) in scores.iter_mut().enumerate() {
            let row = &proj[j * max_rank..(j + 1) * max_rank];
            *s += (done..r).map(|i| coeffs[i] * row[i]).sum::<f64>();
        }
        done = r;
        let (s0, s1) = scores.split_at(validation0.len());
        auc_of_rank.insert(r, roc::auc(s0, s1)?);
    }

    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| grid[a].total_cmp(&grid[b]));
    let mut best: Option<(usize, f64)> = None;
    for &k in &order {
        if let Some(&a) = auc_of_rank.get(&ranks[k]) {
            if best.map_or(true, |(_, b)| a > b) {
                best = Some((k, a));
            }
        }
    }
    let Some((k, _)) = best else {
        return Err(Error::AllTruncated {
            lambda: grid.iter().copied().fold(f64::INFINITY, f64::min),
        });
    };
    let scores = grid
        .iter()
        .zip(&ranks)
        .map(|(&lambda, &rank)| LambdaScore {
            lambda,
            rank,
            auc: auc_of_rank.get(&rank).copied(),
        })
        .collect();
    Ok(LambdaSelection {
        lambda: grid[k],
        template: rho_template(stats, grid[k])?,
        scores,
    })
}
