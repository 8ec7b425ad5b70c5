//! Learned observers of several capacities trained on growing datasets of
//! the microcalcification task.

use sriq_core::metrics::{dynamic_range, iq_report};
use sriq_core::observers::ObserverInit;
use sriq_core::rng::{derive_seed, tag};

use crate::config::Config;
use crate::error::Result;
use crate::report::{IqSummary, Outcome, ReportRow, Resolution};

use super::data::{stream_views, BackgroundCache, Stream, DEFAULT_CACHE_BYTES};
use super::eval::{train_and_test_learned, Labeled};
use super::{failed_rows, train_srcnn, Progress, StudyOutput};

pub const CAPACITY_STUDY: &str = "mc-capacity";

pub fn observer_name(blocks: usize) -> String {
    format!("resnet-{blocks}")
}

/// For each repeat, (block count, training-set size) cell and resolution:
/// trains a randomly initialized residual-network observer with flip
/// augmentation and tests it. The cells are the full grid unless listed
/// explicitly. Smaller training sets are prefixes of the largest, and the
/// row seed identifies the repeat.
pub fn run_capacity_study(cfg: &Config, progress: &mut dyn Progress) -> Result<StudyOutput> {
    cfg.validate()?;
    let c = &cfg.mc_capacity;
    let task = cfg.mc_task().prepare()?;
    let mut cache = BackgroundCache::new(DEFAULT_CACHE_BYTES);
    let mut out = StudyOutput::default();
    let cells = c.cell_list();
    let max_size = cells.iter().map(|c| c.1).max().unwrap_or(0);

    for repeat in 0..c.repeats as u64 {
        let seed = derive_seed(cfg.seed, tag("repeat"), repeat);
        let mut resolutions = c.resolutions.clone();
        let sr = if resolutions.contains(&Resolution::Sr) {
            progress.note(&format!("repeat {repeat}: training SRCNN"));
            match train_srcnn(cfg, &task, cfg.sr.depth, repeat, &mut cache) {
                Ok(t) => Some(Ok(t.network)),
                Err(e) => {
                    resolutions.retain(|&r| r != Resolution::Sr);
                    Some(Err(e))
                }
            }
        } else {
            None
        };
        let net = sr.as_ref().and_then(|r| r.as_ref().ok());

        progress.note(&format!("repeat {repeat}: generating observer data"));
        let train = stream_views(
            &task,
            &Stream::new(cfg.seed, "obs-train", repeat, max_size),
            net,
            &resolutions,
            &mut cache,
        )?;
        let val = stream_views(
            &task,
            &Stream::new(cfg.seed, "obs-val", repeat, c.val_images),
            net,
            &resolutions,
            &mut cache,
        )?;
        let mut test_res = resolutions.clone();
        if !test_res.contains(&Resolution::Hr) {
            test_res.push(Resolution::Hr);
        }
        let test = stream_views(
            &task,
            &Stream::balanced(cfg.seed, "test", repeat, c.test_per_class),
            net,
            &test_res,
            &mut cache,
        )?;
        let hr_test = test.get(Resolution::Hr);
        let range = dynamic_range(hr_test);
        let mut iq = Vec::new();
        for &r in &resolutions {
            let summary = if r == Resolution::Hr {
                None
            } else {
                let rep = iq_report(hr_test, test.get(r), range)?;
                Some(IqSummary {
                    mse: rep.ensemble_mse,
                    psnr: rep.psnr,
                    ssim: rep.ssim,
                })
            };
            iq.push((r, summary));
        }

        for &(blocks, size) in &cells {
            let mut spec = cfg.learned_spec(blocks);
            spec.init = ObserverInit::Random;
            {
                for &(r, summary) in &iq {
                    progress.note(&format!(
                        "repeat {repeat}: {} on {size} {r} images",
                        observer_name(blocks)
                    ));
                    let cell = derive_seed(
                        derive_seed(seed, tag("learned"), blocks as u64),
                        size as u64,
                        r as u64,
                    );
                    let train_cfg = cfg.learned_train_config(cell);
                    let outcome = train_and_test_learned(
                        &spec,
                        None,
                        Labeled::of(&train, r).take(size),
                        Labeled::of(&val, r),
                        Labeled::of(&test, r),
                        cfg.observers.learned.flips,
                        &train_cfg,
                    )
                    .unwrap_or_else(|e| Outcome::Failed(e.to_string()));
                    out.report.push(ReportRow {
                        study: CAPACITY_STUDY.to_string(),
                        sweep_value: size as f64,
                        resolution: r,
                        observer: observer_name(blocks),
                        outcome,
                        iq: summary,
                        seed,
                    });
                }
                if let Some(Err(e)) = &sr {
                    out.report.rows.extend(failed_rows(
                        CAPACITY_STUDY,
                        size as f64,
                        seed,
                        Resolution::Sr,
                        [observer_name(blocks)],
                        &format!("SRCNN training failed: {e}"),
                    ));
                }
                progress.partial(&out.report);
            }
        }
    }
    Ok(out)
}
