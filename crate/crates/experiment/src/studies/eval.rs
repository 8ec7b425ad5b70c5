//! Observer construction and testing on one task.

use std::collections::BTreeMap;

use rayon::prelude::*;
use sriq_core::metrics::{delong_ci, dynamic_range, iq_report, DEFAULT_LEVEL};
use sriq_core::nn::{self, Network, TrainConfig};
use sriq_core::observers::{
    build_learned_observer, channelize, cho_template, gabor_channels, image_vector, lambda_grid,
    score_learned_logit, score_linear, select_rho_lambda, set_input_normalization, template_image,
    CovarianceEstimate, GaborChannelSet, LabeledImages, LearnedObserverSpec, LinearTemplate,
    ObserverInit, StatsAccumulator, TemplateKind,
};
use sriq_core::rng::{derive_seed, tag};
use sriq_core::sim::PreparedTask;
use sriq_core::sr::pixel_stats;
use sriq_core::ImageGrid;

use crate::config::{Config, ObserverKind};
use crate::error::Result;
use crate::report::{IqSummary, Outcome, Resolution};

use super::data::{measure, stream_views, views, BackgroundCache, Stream, Views};

/// The image streams behind one evaluation.
#[derive(Clone, Copy, Debug)]
pub struct EvalStreams {
    pub cov: Stream,
    pub lambda_val: Stream,
    pub test: Stream,
    pub obs_train: Stream,
    pub obs_val: Stream,
}

impl EvalStreams {
    pub fn new(cfg: &Config, repeat: u64) -> Self {
        let o = &cfg.observers;
        Self {
            cov: Stream::balanced(cfg.seed, "cov", repeat, o.cov_per_class),
            lambda_val: Stream::balanced(cfg.seed, "lambda-val", repeat, o.lambda_val_per_class),
            test: Stream::balanced(cfg.seed, "test", repeat, o.test_per_class),
            obs_train: Stream::new(cfg.seed, "obs-train", repeat, o.learned.train_images),
            obs_val: Stream::new(cfg.seed, "obs-val", repeat, o.learned.val_images),
        }
    }
}

/// Results for one resolution.
#[derive(Clone, Debug)]
pub struct ResolutionResult {
    pub resolution: Resolution,
    pub cells: Vec<(ObserverKind, Outcome)>,
    /// Against the HR test images; absent for HR itself.
    pub iq: Option<IqSummary>,
    /// Per-image MSE and SSIM against HR, in test-set order.
    pub per_image: Option<(Vec<f64>, Vec<f64>)>,
    /// Covariance singular values and the rank the RHO kept.
    pub spectrum: Option<(Vec<f64>, usize)>,
}

fn split_by_label(scores: &[f64], labels: &[u8]) -> (Vec<f64>, Vec<f64>) {
    let s0 = scores
        .iter()
        .zip(labels)
        .filter(|p| *p.1 == 0)
        .map(|p| *p.0)
        .collect();
    let s1 = scores
        .iter()
        .zip(labels)
        .filter(|p| *p.1 != 0)
        .map(|p| *p.0)
        .collect();
    (s0, s1)
}

/// AUC and DeLong interval of the scores.
pub fn auc_outcome(scores: &[f64], labels: &[u8]) -> Result<Outcome> {
    let (s0, s1) = split_by_label(scores, labels);
    let r = delong_ci(&s0, &s1, DEFAULT_LEVEL)?;
    Ok(Outcome::Auc {
        auc: r.auc,
        ci_lo: r.ci.0,
        ci_hi: r.ci.1,
    })
}

fn failed(e: impl std::fmt::Display) -> Outcome {
    Outcome::Failed(e.to_string())
}

pub fn linear_scores(template: &LinearTemplate, images: &[ImageGrid]) -> Result<Vec<f64>> {
    Ok(images
        .par_iter()
        .map(|g| score_linear(template, &image_vector(g)))
        .collect::<sriq_core::Result<Vec<_>>>()?)
}

pub fn channel_scores(
    template: &LinearTemplate,
    channels: &GaborChannelSet,
    images: &[ImageGrid],
) -> Result<Vec<f64>> {
    Ok(images
        .par_iter()
        .map(|g| score_linear(template, &channelize(channels, g)?))
        .collect::<sriq_core::Result<Vec<_>>>()?)
}

/// Images of one labeled set.
#[derive(Clone, Copy)]
pub struct Labeled<'a> {
    pub images: &'a [ImageGrid],
    pub labels: &'a [u8],
}

impl<'a> Labeled<'a> {
    pub fn of(v: &'a Views, r: Resolution) -> Self {
        Self {
            images: v.get(r),
            labels: &v.labels,
        }
    }

    pub fn take(self, n: usize) -> Self {
        let n = n.min(self.images.len());
        Self {
            images: &self.images[..n],
            labels: &self.labels[..n],
        }
    }
}

/// Trains a residual-network observer with cross-entropy, keeping the
/// epoch with the best validation AUC.
pub fn train_learned(
    spec: &LearnedObserverSpec,
    template: Option<&ImageGrid>,
    train: Labeled<'_>,
    val: Labeled<'_>,
    flips: bool,
    config: &TrainConfig,
) -> Result<Network<f32>> {
    let mut net = build_learned_observer(spec, template, config.seed)?;
    let (mean, std) = pixel_stats(train.images);
    set_input_normalization(&mut net, mean, std)?;
    let train_set = LabeledImages::new(train.images, train.labels, flips)?;
    let val_set = LabeledImages::new(val.images, val.labels, false)?;
    Ok(nn::train(net, &train_set, &val_set, config)?.network)
}

/// Logit scores of a learned observer.
pub fn learned_scores(net: &Network<f32>, images: &[ImageGrid]) -> Result<Vec<f64>> {
    Ok(images
        .par_iter()
        .map(|g| score_learned_logit(net, g))
        .collect::<sriq_core::Result<Vec<_>>>()?)
}

/// [`train_learned`], then the AUC of the test logits.
pub fn train_and_test_learned(
    spec: &LearnedObserverSpec,
    template: Option<&ImageGrid>,
    train: Labeled<'_>,
    val: Labeled<'_>,
    test: Labeled<'_>,
    flips: bool,
    config: &TrainConfig,
) -> Result<Outcome> {
    let net = train_learned(spec, template, train, val, flips, config)?;
    let scores = learned_scores(&net, test.images)?;
    auc_outcome(&scores, test.labels)
}

fn finish_all(accs: BTreeMap<Resolution, StatsAccumulator>) -> StatsByResolution {
    accs.into_iter()
        .map(|(r, a)| (r, a.finish().map_err(|e| e.to_string())))
        .collect()
}

fn class_vectors(images: &[ImageGrid], labels: &[u8]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut c0 = Vec::new();
    let mut c1 = Vec::new();
    for (g, &l) in images.iter().zip(labels) {
        if l == 0 {
            c0.push(image_vector(g));
        } else {
            c1.push(image_vector(g));
        }
    }
    (c0, c1)
}

type StatsByResolution = BTreeMap<Resolution, Result<CovarianceEstimate, String>>;

/// Class statistics of the covariance stream per resolution, of the pixels
/// and, with a channel set, of the channel outputs. A failed estimate is
/// kept as its message so only the observers that need it fail.
pub fn collect_stats(
    task: &PreparedTask,
    cov: &Stream,
    sr: Option<&Network<f32>>,
    resolutions: &[Resolution],
    pixels: bool,
    channels: Option<&GaborChannelSet>,
    cache: &mut BackgroundCache,
) -> Result<(StatsByResolution, StatsByResolution)> {
    let mut pixel_accs: BTreeMap<Resolution, StatsAccumulator> = BTreeMap::new();
    let mut channel_accs: BTreeMap<Resolution, StatsAccumulator> = BTreeMap::new();
    if !pixels && channels.is_none() {
        return Ok((BTreeMap::new(), BTreeMap::new()));
    }
    for range in cov.chunks() {
        let v = views(task, measure(task, cov, range, cache)?, sr, resolutions)?;
        for &r in resolutions {
            let imgs = v.get(r);
            if pixels {
                let acc = pixel_accs
                    .entry(r)
                    .or_insert_with(|| StatsAccumulator::with_shift(image_vector(&imgs[0])));
                for (g, &l) in imgs.iter().zip(&v.labels) {
                    acc.push_f32(l, g.as_slice())?;
                }
            }
            if let Some(chs) = channels {
                let vecs = imgs
                    .par_iter()
                    .map(|g| channelize(chs, g))
                    .collect::<sriq_core::Result<Vec<_>>>()?;
                let acc = channel_accs
                    .entry(r)
                    .or_insert_with(|| StatsAccumulator::with_shift(vecs[0].clone()));
                for (x, &l) in vecs.iter().zip(&v.labels) {
                    acc.push(l, x)?;
                }
            }
        }
    }
    Ok((finish_all(pixel_accs), finish_all(channel_accs)))
}

/// RHO template with the threshold of highest validation AUC.
pub fn fit_rho(
    stats: &CovarianceEstimate,
    validation: Labeled<'_>,
    grid: &[f64],
) -> Result<LinearTemplate> {
    let (v0, v1) = class_vectors(validation.images, validation.labels);
    Ok(select_rho_lambda(stats, &v0, &v1, grid)?.template)
}

/// What to evaluate.
pub struct EvalPlan<'a> {
    pub cfg: &'a Config,
    pub roster: &'a [ObserverKind],
    pub resolutions: &'a [Resolution],
    pub streams: EvalStreams,
    /// Parent seed of the learned observers' initialization and shuffling.
    pub learned_seed: u64,
}

/// Builds every observer in the roster from the covariance and validation
/// streams and tests it, for each resolution. Failures of a single
/// observer become failed cells; data problems are returned as errors.
pub fn evaluate(
    plan: &EvalPlan<'_>,
    task: &PreparedTask,
    sr: Option<&Network<f32>>,
    cache: &mut BackgroundCache,
) -> Result<Vec<ResolutionResult>> {
    let cfg = plan.cfg;
    let o = &cfg.observers;
    let has = |k: ObserverKind| plan.roster.contains(&k);
    let template_init = has(ObserverKind::Learned)
        && cfg.learned_spec(o.learned.blocks).init == ObserverInit::RhoTemplate;
    let need_pixel_stats = has(ObserverKind::Rho) || template_init;
    let (cw, ch) = task.spec().crop_dims;
    let channels = if has(ObserverKind::Cho) {
        Some(gabor_channels(cw, ch)?)
    } else {
        None
    };

    let (pixel_stats_by_res, channel_stats_by_res) = collect_stats(
        task,
        &plan.streams.cov,
        sr,
        plan.resolutions,
        need_pixel_stats,
        channels.as_ref(),
        cache,
    )?;

    let lambda_views = if need_pixel_stats {
        Some(stream_views(
            task,
            &plan.streams.lambda_val,
            sr,
            plan.resolutions,
            cache,
        )?)
    } else {
        None
    };
    let grid = lambda_grid(o.lambda_range.0, o.lambda_range.1, o.lambda_per_decade)?;

    let mut test_res: Vec<Resolution> = plan.resolutions.to_vec();
    if !test_res.contains(&Resolution::Hr) {
        test_res.insert(0, Resolution::Hr);
    }
    let test = stream_views(task, &plan.streams.test, sr, &test_res, cache)?;
    let (learn_train, learn_val) = if has(ObserverKind::Learned) {
        (
            Some(stream_views(
                task,
                &plan.streams.obs_train,
                sr,
                plan.resolutions,
                cache,
            )?),
            Some(stream_views(
                task,
                &plan.streams.obs_val,
                sr,
                plan.resolutions,
                cache,
            )?),
        )
    } else {
        (None, None)
    };
    let hr_test = test.get(Resolution::Hr);
    let range = dynamic_range(hr_test);

    let mut results = Vec::new();
    for (ri, &r) in plan.resolutions.iter().enumerate() {
        let test_images = test.get(r);
        let mut spectrum = None;

        // regularized Hotelling template, also the learned observer's seed
        let rho: Option<Result<LinearTemplate, String>> = need_pixel_stats.then(|| {
            let stats = pixel_stats_by_res
                .get(&r)
                .expect("accumulated above")
                .as_ref()
                .map_err(Clone::clone)?;
            let lv = lambda_views
                .as_ref()
                .expect("built with the pixel statistics");
            let t = fit_rho(stats, Labeled::of(lv, r), &grid).map_err(|e| e.to_string())?;
            if let TemplateKind::Regularized { rank, .. } = t.kind {
                spectrum = Some((stats.eigen.singular_values(), rank));
            }
            Ok(t)
        });

        let mut cells = Vec::new();
        for &kind in plan.roster {
            let outcome = match kind {
                ObserverKind::Rho => match rho.as_ref().expect("computed for the RHO") {
                    Ok(t) => linear_scores(t, test_images)
                        .and_then(|s| auc_outcome(&s, &test.labels))
                        .unwrap_or_else(failed),
                    Err(e) => failed(e),
                },
                ObserverKind::Cho => {
                    let chs = channels.as_ref().expect("built for the CHO");
                    match channel_stats_by_res.get(&r).expect("accumulated above") {
                        Ok(stats) => cho_template(stats, o.cho_lambda)
                            .map_err(Into::into)
                            .and_then(|t| channel_scores(&t, chs, test_images))
                            .and_then(|s| auc_outcome(&s, &test.labels))
                            .unwrap_or_else(failed),
                        Err(e) => failed(e),
                    }
                }
                ObserverKind::Learned => {
                    let spec = cfg.learned_spec(o.learned.blocks);
                    let template = match (&spec.init, &rho) {
                        (ObserverInit::RhoTemplate, Some(Ok(t))) => Some(template_image(t, cw, ch)),
                        (ObserverInit::RhoTemplate, Some(Err(e))) => Some(Err(
                            sriq_core::Error::InvalidParameter(format!("no RHO template: {e}")),
                        )),
                        _ => None,
                    };
                    let train_cfg = cfg.learned_train_config(derive_seed(
                        plan.learned_seed,
                        tag("learned"),
                        ri as u64,
                    ));
                    match template.transpose() {
                        Ok(t) => train_and_test_learned(
                            &spec,
                            t.as_ref(),
                            Labeled::of(
                                learn_train
                                    .as_ref()
                                    .expect("generated for the learned observer"),
                                r,
                            ),
                            Labeled::of(
                                learn_val
                                    .as_ref()
                                    .expect("generated for the learned observer"),
                                r,
                            ),
                            Labeled::of(&test, r),
                            o.learned.flips,
                            &train_cfg,
                        )
                        .unwrap_or_else(failed),
                        Err(e) => failed(e),
                    }
                }
            };
            cells.push((kind, outcome));
        }

        let (iq, per_image) = if r == Resolution::Hr {
            (None, None)
        } else {
            let rep = iq_report(hr_test, test_images, range)?;
            (
                Some(IqSummary {
                    mse: rep.ensemble_mse,
                    psnr: rep.psnr,
                    ssim: rep.ssim,
                }),
                Some((
                    rep.per_image.iter().map(|m| m.mse).collect(),
                    rep.per_image.iter().map(|m| m.ssim).collect(),
                )),
            )
        };
        results.push(ResolutionResult {
            resolution: r,
            cells,
            iq,
            per_image,
            spectrum,
        });
    }
    Ok(results)
}
