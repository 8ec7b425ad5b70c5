//! The three studies: signal length, SRCNN depth and observer capacity.
//!
//! Every image comes from a seed stream named after its purpose, so the
//! training, validation, covariance and test sets are disjoint and adding
//! an observer never changes the data another one sees.

pub mod capacity;
pub mod data;
pub mod eval;
pub mod rayleigh;

use sriq_core::metrics::{paired_difference, PairedDifference, DEFAULT_LEVEL};
use sriq_core::nn::TrainOutcome;
use sriq_core::rng::{derive_seed, tag};
use sriq_core::sim::PreparedTask;
use sriq_core::sr::{build_srcnn, pixel_stats, set_normalization, train_sr, PairedImages};

use crate::config::Config;
use crate::error::Result;
use crate::report::{Outcome, Report, ReportRow, Resolution, SpectrumTable};

use self::data::{measure, BackgroundCache, Stream};
use self::eval::ResolutionResult;

pub use capacity::run_capacity_study;
pub use rayleigh::{run_depth_study, run_signal_length_study};

/// Per-image SR minus LR differences against the HR reference.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IqComparison {
    pub sweep_value: f64,
    pub seed: u64,
    pub mse: PairedDifference,
    pub ssim: PairedDifference,
}

#[derive(Clone, Debug, Default)]
pub struct StudyOutput {
    pub report: Report,
    pub iq_comparisons: Vec<IqComparison>,
    pub spectra: Option<SpectrumTable>,
}

/// Receives progress messages and the report after each sweep value.
pub trait Progress {
    fn note(&mut self, _message: &str) {}
    fn partial(&mut self, _report: &Report) {}
}

/// Ignores all progress.
pub struct Quiet;

impl Progress for Quiet {}

/// Trains an SRCNN of `depth` layers to map LR work windows to HR ones.
/// The training stream is shared by every sweep value of a study, so the
/// networks differ only through the task and the architecture.
pub fn train_srcnn(
    cfg: &Config,
    task: &PreparedTask,
    depth: usize,
    repeat: u64,
    cache: &mut BackgroundCache,
) -> Result<TrainOutcome<f32>> {
    let train = Stream::new(cfg.seed, "sr-train", repeat, cfg.sr.train_images);
    let val = Stream::new(cfg.seed, "sr-val", repeat, cfg.sr.val_images);
    let pairs = |s: &Stream, cache: &mut BackgroundCache| -> Result<(Vec<_>, Vec<_>)> {
        let (mut lr, mut hr) = (Vec::new(), Vec::new());
        for range in s.chunks() {
            let mut m = measure(task, s, range, cache)?;
            lr.append(&mut m.lr);
            hr.append(&mut m.hr);
        }
        Ok((lr, hr))
    };
    let (lr, hr) = pairs(&train, cache)?;
    let (val_lr, val_hr) = pairs(&val, cache)?;

    let seed = derive_seed(
        derive_seed(cfg.seed, tag("srcnn"), repeat),
        tag("depth"),
        depth as u64,
    );
    let mut net = build_srcnn(&cfg.srcnn_spec(depth), seed)?;
    let (mean, std) = pixel_stats(&lr);
    set_normalization(&mut net, mean, std)?;
    let train_set = PairedImages::new(lr, hr, cfg.sr.patch, seed)?;
    let val_set = PairedImages::new(val_lr, val_hr, None, seed)?;
    Ok(train_sr(
        net,
        &train_set,
        &val_set,
        &cfg.sr_train_config(seed),
    )?)
}

/// Report rows of evaluated resolutions.
pub fn rows_for(
    study: &str,
    sweep_value: f64,
    seed: u64,
    results: &[ResolutionResult],
) -> Vec<ReportRow> {
    results
        .iter()
        .flat_map(|r| {
            r.cells.iter().map(move |(kind, outcome)| ReportRow {
                study: study.to_string(),
                sweep_value,
                resolution: r.resolution,
                observer: kind.name().to_string(),
                outcome: outcome.clone(),
                iq: r.iq,
                seed,
            })
        })
        .collect()
}

fn failed_rows(
    study: &str,
    sweep_value: f64,
    seed: u64,
    resolution: Resolution,
    observers: impl IntoIterator<Item = String>,
    reason: &str,
) -> Vec<ReportRow> {
    observers
        .into_iter()
        .map(|observer| ReportRow {
            study: study.to_string(),
            sweep_value,
            resolution,
            observer,
            outcome: Outcome::Failed(reason.to_string()),
            iq: None,
            seed,
        })
        .collect()
}

/// SR against LR per test image, when both were evaluated.
fn compare_iq(
    sweep_value: f64,
    seed: u64,
    results: &[ResolutionResult],
) -> Result<Option<IqComparison>> {
    let per = |res: Resolution| {
        results
            .iter()
            .find(|r| r.resolution == res)
            .and_then(|r| r.per_image.as_ref())
    };
    let (Some((lr_mse, lr_ssim)), Some((sr_mse, sr_ssim))) =
        (per(Resolution::Lr), per(Resolution::Sr))
    else {
        return Ok(None);
    };
    Ok(Some(IqComparison {
        sweep_value,
        seed,
        mse: paired_difference(sr_mse, lr_mse, DEFAULT_LEVEL)?,
        ssim: paired_difference(sr_ssim, lr_ssim, DEFAULT_LEVEL)?,
    }))
}
