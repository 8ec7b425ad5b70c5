//! Signal-length and SRCNN-depth studies on the Rayleigh task.

use sriq_core::rng::{derive_seed, tag};

use crate::config::{Config, ObserverKind};
use crate::error::Result;
use crate::report::{Resolution, SpectrumTable};

use super::data::{BackgroundCache, DEFAULT_CACHE_BYTES};
use super::eval::{evaluate, EvalPlan, EvalStreams};
use super::{compare_iq, failed_rows, rows_for, train_srcnn, Progress, StudyOutput};

pub const LENGTH_STUDY: &str = "rayleigh-length";
pub const DEPTH_STUDY: &str = "srcnn-depth";

/// For each signal length: trains an SRCNN and evaluates every observer in
/// the roster on HR, LR and SR images. The background streams are the same
/// for every length.
pub fn run_signal_length_study(cfg: &Config, progress: &mut dyn Progress) -> Result<StudyOutput> {
    cfg.validate()?;
    let roster = &cfg.observers.roster;
    let mut out = StudyOutput::default();
    let mut cache = BackgroundCache::new(DEFAULT_CACHE_BYTES);
    for &length in &cfg.rayleigh_length.lengths {
        let value = f64::from(length);
        let task = cfg.rayleigh_task(length).prepare()?;
        progress.note(&format!("L = {length}: training SRCNN"));
        let sr = train_srcnn(cfg, &task, cfg.sr.depth, 0, &mut cache);
        let mut resolutions = vec![Resolution::Hr, Resolution::Lr];
        if sr.is_ok() {
            resolutions.push(Resolution::Sr);
        }
        progress.note(&format!("L = {length}: evaluating observers"));
        let plan = EvalPlan {
            cfg,
            roster,
            resolutions: &resolutions,
            streams: EvalStreams::new(cfg, 0),
            learned_seed: derive_seed(cfg.seed, tag("learned"), u64::from(length)),
        };
        let results = evaluate(
            &plan,
            &task,
            sr.as_ref().ok().map(|o| &o.network),
            &mut cache,
        )?;
        out.report
            .rows
            .extend(rows_for(LENGTH_STUDY, value, cfg.seed, &results));
        match &sr {
            Ok(_) => out
                .iq_comparisons
                .extend(compare_iq(value, cfg.seed, &results)?),
            Err(e) => out.report.rows.extend(failed_rows(
                LENGTH_STUDY,
                value,
                cfg.seed,
                Resolution::Sr,
                roster.iter().map(|k| k.name().to_string()),
                &format!("SRCNN training failed: {e}"),
            )),
        }
        progress.partial(&out.report);
    }
    Ok(out)
}

/// Trains SRCNNs of each depth on one Rayleigh task. HR and LR do not
/// depend on the network, so they are evaluated once and repeated on every
/// depth's rows. The spectra table holds the SR covariance singular values
/// the RHO retained at each depth.
pub fn run_depth_study(cfg: &Config, progress: &mut dyn Progress) -> Result<StudyOutput> {
    cfg.validate()?;
    let d = &cfg.srcnn_depth;
    let task = cfg.rayleigh_task(d.length).prepare()?;
    let mut cache = BackgroundCache::new(DEFAULT_CACHE_BYTES);
    let plan = |resolutions| EvalPlan {
        cfg,
        roster: &d.observers,
        resolutions,
        streams: EvalStreams::new(cfg, 0),
        learned_seed: derive_seed(cfg.seed, tag("learned"), 0),
    };
    progress.note("evaluating HR and LR");
    let base = evaluate(
        &plan(&[Resolution::Hr, Resolution::Lr]),
        &task,
        None,
        &mut cache,
    )?;

    let mut out = StudyOutput::default();
    let mut spectra = SpectrumTable::default();
    for &depth in &d.depths {
        let value = depth as f64;
        out.report
            .rows
            .extend(rows_for(DEPTH_STUDY, value, cfg.seed, &base));
        progress.note(&format!("depth {depth}: training SRCNN"));
        match train_srcnn(cfg, &task, depth, 0, &mut cache) {
            Ok(trained) => {
                progress.note(&format!("depth {depth}: evaluating observers"));
                let sr = evaluate(
                    &plan(&[Resolution::Sr]),
                    &task,
                    Some(&trained.network),
                    &mut cache,
                )?;
                out.report
                    .rows
                    .extend(rows_for(DEPTH_STUDY, value, cfg.seed, &sr));
                let mut both = base.clone();
                both.extend(sr.iter().cloned());
                out.iq_comparisons
                    .extend(compare_iq(value, cfg.seed, &both)?);
                if let Some((values, rank)) = sr.iter().find_map(|r| r.spectrum.as_ref()) {
                    spectra.rows.extend(
                        values
                            .iter()
                            .take(*rank)
                            .enumerate()
                            .map(|(i, &s)| (value, i, s)),
                    );
                }
            }
            Err(e) => out.report.rows.extend(failed_rows(
                DEPTH_STUDY,
                value,
                cfg.seed,
                Resolution::Sr,
                d.observers
                    .iter()
                    .map(|k: &ObserverKind| k.name().to_string()),
                &format!("SRCNN training failed: {e}"),
            )),
        }
        progress.partial(&out.report);
    }
    out.spectra = Some(spectra);
    Ok(out)
}
