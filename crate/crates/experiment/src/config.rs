//! Study configuration files.
//!
//! A config is TOML with one table per concern. Every key is optional;
//! missing keys take desk-scale defaults and unknown keys are rejected.
//!
//! ```toml
//! seed = 7
//!
//! [rayleigh]
//! amplitude = 1.2
//! work = [48, 48]
//! crop = [32, 32]
//!
//! [rayleigh_length]
//! lengths = [5, 7, 9]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sriq_core::degrade::{DegradationSpec, NoiseSpec, DEFAULT_MEASUREMENT_BLUR};
use sriq_core::nn::{Loss, TrainConfig};
use sriq_core::observers::{LearnedObserverSpec, ObserverInit, ALLOWED_BLOCKS};
use sriq_core::sim::rayleigh::DEFAULT_SIGNAL_BLUR;
use sriq_core::sim::{
    ClbParams, LineAmplitude, McSignalSpec, McSource, RayleighSignalSpec, SyntheticMcParams,
    TaskKind, TaskSpec,
};
use sriq_core::sr::SrcnnSpec;

use crate::error::{file_error, ExperimentError, Result};
use crate::report::Resolution;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObserverKind {
    Rho,
    Cho,
    Learned,
}

impl ObserverKind {
    pub fn name(self) -> &'static str {
        match self {
            ObserverKind::Rho => "RHO",
            ObserverKind::Cho => "CHO",
            ObserverKind::Learned => "learned",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LineAmplitudeConfig {
    #[default]
    PerPixel,
    MassMatched,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitConfig {
    Random,
    #[default]
    Rho,
}

/// Clustered lumpy background parameters (the field of view is set by the
/// task's `field`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClbConfig {
    pub mean_clusters: f64,
    pub mean_blobs_per_cluster: f64,
    pub lx: f64,
    pub ly: f64,
    pub alpha: f64,
    pub beta: f64,
    pub cluster_spread: f64,
}

impl Default for ClbConfig {
    fn default() -> Self {
        let p = ClbParams::default();
        Self {
            mean_clusters: p.mean_clusters,
            mean_blobs_per_cluster: p.mean_blobs_per_cluster,
            lx: p.lx,
            ly: p.ly,
            alpha: p.alpha,
            beta: p.beta,
            cluster_spread: p.cluster_spread,
        }
    }
}

impl ClbConfig {
    pub fn params(&self, field: (usize, usize)) -> ClbParams {
        ClbParams {
            mean_clusters: self.mean_clusters,
            mean_blobs_per_cluster: self.mean_blobs_per_cluster,
            lx: self.lx,
            ly: self.ly,
            alpha: self.alpha,
            beta: self.beta,
            cluster_spread: self.cluster_spread,
            width: field.0,
            height: field.1,
        }
    }
}

/// The Rayleigh discrimination task. The signal length is set by the study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RayleighTaskConfig {
    /// Field of view the backgrounds are defined over.
    pub field: (usize, usize),
    /// Simulated window, centred in the field of view.
    pub work: (usize, usize),
    /// Observer crop, centred in the work window.
    pub crop: (usize, usize),
    pub amplitude: f64,
    pub signal_blur: f64,
    pub line_amplitude: LineAmplitudeConfig,
    pub blur_sigma: f64,
    pub sigma_p: f64,
    pub sigma_g: f64,
    pub clb: ClbConfig,
}

impl Default for RayleighTaskConfig {
    fn default() -> Self {
        let noise = NoiseSpec::rayleigh();
        Self {
            field: (128, 128),
            work: (128, 128),
            crop: (64, 64),
            amplitude: 1.2,
            signal_blur: DEFAULT_SIGNAL_BLUR,
            line_amplitude: LineAmplitudeConfig::PerPixel,
            blur_sigma: DEFAULT_MEASUREMENT_BLUR,
            sigma_p: noise.sigma_p,
            sigma_g: noise.sigma_g,
            clb: ClbConfig::default(),
        }
    }
}

/// Synthetic microcalcification clusters, used when no library directory
/// is configured.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticClusterConfig {
    pub size: usize,
    pub disk_radius: f64,
    pub blob_count: (u32, u32),
    pub blob_sigma: (f64, f64),
    pub peak: (f64, f64),
    pub library_size: usize,
    pub library_seed: u64,
}

impl Default for SyntheticClusterConfig {
    fn default() -> Self {
        let p = SyntheticMcParams::default();
        let McSource::Synthetic {
            library_size, seed, ..
        } = McSource::default()
        else {
            unreachable!("the default cluster source is synthetic")
        };
        Self {
            size: p.size,
            disk_radius: p.disk_radius,
            blob_count: p.blob_count,
            blob_sigma: p.blob_sigma,
            peak: p.peak,
            library_size,
            library_seed: seed,
        }
    }
}

/// The microcalcification-cluster detection task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McTaskConfig {
    pub field: (usize, usize),
    pub work: (usize, usize),
    pub crop: (usize, usize),
    pub contrast: (f64, f64),
    pub rotation: (f64, f64),
    /// Side of the centre crop taken from each rotated cluster image.
    pub cluster_crop: usize,
    /// Directory of cluster images; synthetic clusters when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub library: Option<PathBuf>,
    pub synthetic: SyntheticClusterConfig,
    pub blur_sigma: f64,
    pub sigma_p: f64,
    pub sigma_g: f64,
    pub clb: ClbConfig,
}

impl Default for McTaskConfig {
    fn default() -> Self {
        let s = McSignalSpec::default();
        let noise = NoiseSpec::mc();
        Self {
            field: (128, 128),
            work: (128, 128),
            crop: (128, 128),
            contrast: s.contrast,
            rotation: s.rotation,
            cluster_crop: s.crop_size,
            library: None,
            synthetic: SyntheticClusterConfig::default(),
            blur_sigma: DEFAULT_MEASUREMENT_BLUR,
            sigma_p: noise.sigma_p,
            sigma_g: noise.sigma_g,
            clb: ClbConfig::default(),
        }
    }
}

/// SRCNN architecture and training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SrConfig {
    pub depth: usize,
    pub filters: usize,
    pub first_kernel: usize,
    pub other_kernel: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Train on random square patches of this side instead of whole images.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub patch: Option<usize>,
    pub train_images: usize,
    pub val_images: usize,
}

impl Default for SrConfig {
    fn default() -> Self {
        let s = SrcnnSpec::default();
        Self {
            depth: s.n_layers,
            filters: s.hidden_filters,
            first_kernel: s.first_kernel,
            other_kernel: s.other_kernel,
            epochs: 20,
            batch_size: 64,
            learning_rate: 1e-4,
            patch: None,
            train_images: 2000,
            val_images: 500,
        }
    }
}

/// Learned (residual network) observer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnedConfig {
    pub blocks: usize,
    pub filters: usize,
    pub kernel: usize,
    pub init: InitConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub train_images: usize,
    pub val_images: usize,
    /// Expand the training set four-fold with flips.
    pub flips: bool,
}

impl Default for LearnedConfig {
    fn default() -> Self {
        Self {
            blocks: 2,
            filters: 32,
            kernel: 3,
            init: InitConfig::Rho,
            epochs: 20,
            batch_size: 32,
            learning_rate: 1e-3,
            train_images: 2000,
            val_images: 500,
            flips: true,
        }
    }
}

/// Observer roster and the image counts used to build and test observers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObserverConfig {
    pub roster: Vec<ObserverKind>,
    /// Images per class for covariance estimation.
    pub cov_per_class: usize,
    /// Images per class for selecting the truncation threshold.
    pub lambda_val_per_class: usize,
    pub test_per_class: usize,
    pub lambda_range: (f64, f64),
    pub lambda_per_decade: usize,
    /// Truncation threshold for the channelized observer; plain inverse
    /// when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cho_lambda: Option<f64>,
    pub learned: LearnedConfig,
}

impl Default for ObserverConfig {
    fn default() -> Self {
        Self {
            roster: vec![ObserverKind::Rho, ObserverKind::Cho, ObserverKind::Learned],
            cov_per_class: 10_000,
            lambda_val_per_class: 1000,
            test_per_class: 4000,
            lambda_range: (1e-9, 1e-4),
            lambda_per_decade: 6,
            cho_lambda: None,
            learned: LearnedConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LengthStudyConfig {
    pub lengths: Vec<u32>,
}

impl Default for LengthStudyConfig {
    fn default() -> Self {
        Self {
            lengths: vec![5, 6, 7, 8, 9],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DepthStudyConfig {
    pub depths: Vec<usize>,
    pub length: u32,
    pub observers: Vec<ObserverKind>,
}

impl Default for DepthStudyConfig {
    fn default() -> Self {
        Self {
            depths: (2..=8).collect(),
            length: 7,
            observers: vec![ObserverKind::Rho, ObserverKind::Cho],
        }
    }
}

/// Learned observers across capacities and training-set sizes. Architecture
/// and optimizer settings other than the block count come from
/// `[observers.learned]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CapacityStudyConfig {
    pub blocks: Vec<usize>,
    /// Training images per observer (both classes together, before flips).
    pub train_sizes: Vec<usize>,
    pub resolutions: Vec<Resolution>,
    pub val_images: usize,
    pub test_per_class: usize,
    /// Independent repetitions, each with its own data and networks.
    pub repeats: usize,
    /// `(blocks, train size)` pairs to run instead of the full grid.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub cells: Vec<(usize, usize)>,
}

impl CapacityStudyConfig {
    /// The `(blocks, train size)` cells to run, in order.
    pub fn cell_list(&self) -> Vec<(usize, usize)> {
        if !self.cells.is_empty() {
            return self.cells.clone();
        }
        self.blocks
            .iter()
            .flat_map(|&b| self.train_sizes.iter().map(move |&n| (b, n)))
            .collect()
    }
}

impl Default for CapacityStudyConfig {
    fn default() -> Self {
        Self {
            blocks: ALLOWED_BLOCKS.to_vec(),
            train_sizes: vec![500, 1000, 2000, 5000],
            resolutions: vec![Resolution::Hr, Resolution::Lr, Resolution::Sr],
            val_images: 500,
            test_per_class: 2000,
            repeats: 1,
            cells: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub rayleigh: RayleighTaskConfig,
    pub mc: McTaskConfig,
    pub sr: SrConfig,
    pub observers: ObserverConfig,
    pub rayleigh_length: LengthStudyConfig,
    pub srcnn_depth: DepthStudyConfig,
    pub mc_capacity: CapacityStudyConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 20_240_601,
            rayleigh: RayleighTaskConfig::default(),
            mc: McTaskConfig::default(),
            sr: SrConfig::default(),
            observers: ObserverConfig::default(),
            rayleigh_length: LengthStudyConfig::default(),
            srcnn_depth: DepthStudyConfig::default(),
            mc_capacity: CapacityStudyConfig::default(),
        }
    }
}

/// 1-based line of byte offset `pos`.
fn line_of(text: &str, pos: usize) -> usize {
    text[..pos.min(text.len())]
        .bytes()
        .filter(|&b| b == b'\n')
        .count()
        + 1
}

impl Config {
    /// Parses and validates a config.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| ExperimentError::Parse {
            line: e.span().map_or(1, |s| line_of(text, s.start)),
            message: e.message().trim().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(file_error(path))?;
        Self::parse(&text)
    }

    /// Fully expanded TOML; parsing it gives back an equal config.
    pub fn emit(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Checks every section and reports all problems at once.
    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        let mut check = |ok: bool, msg: String| {
            if !ok {
                errors.push(msg);
            }
        };
        check(
            self.seed <= i64::MAX as u64,
            format!("seed must be at most {}, got {}", i64::MAX, self.seed),
        );

        let mut lengths = self.rayleigh_length.lengths.clone();
        lengths.push(self.srcnn_depth.length);
        lengths.sort_unstable();
        lengths.dedup();
        for l in lengths {
            if let Err(e) = self.rayleigh_task(l).validate() {
                errors.push(format!("rayleigh (L = {l}): {e}"));
            }
        }
        if let Err(e) = self.mc_task().validate() {
            errors.push(format!("mc: {e}"));
        }

        let sr = &self.sr;
        let mut depths = self.srcnn_depth.depths.clone();
        depths.push(sr.depth);
        for d in depths {
            if let Err(e) = self.srcnn_spec(d).validate() {
                errors.push(format!("sr: {e}"));
            }
        }
        let mut check = |ok: bool, msg: String| {
            if !ok {
                errors.push(msg);
            }
        };
        check(sr.epochs >= 1, "sr.epochs must be at least 1".into());
        check(
            sr.batch_size >= 1,
            "sr.batch_size must be at least 1".into(),
        );
        check(
            sr.learning_rate.is_finite() && sr.learning_rate > 0.0,
            format!(
                "sr.learning_rate must be positive, got {}",
                sr.learning_rate
            ),
        );
        check(
            sr.train_images >= 2,
            format!(
                "sr.train_images must be at least 2, got {}",
                sr.train_images
            ),
        );
        check(
            sr.val_images >= 1,
            "sr.val_images must be at least 1".into(),
        );
        if let Some(p) = sr.patch {
            let limit = self
                .rayleigh
                .work
                .0
                .min(self.rayleigh.work.1)
                .min(self.mc.work.0)
                .min(self.mc.work.1);
            check(
                p >= 1 && p <= limit,
                format!("sr.patch must lie in 1..={limit} (the smallest work window), got {p}"),
            );
        }

        let o = &self.observers;
        check(!o.roster.is_empty(), "observers.roster is empty".into());
        check(
            !has_duplicates(&o.roster),
            "observers.roster lists an observer twice".into(),
        );
        check(
            o.cov_per_class >= 2,
            format!(
                "observers.cov_per_class must be at least 2, got {}",
                o.cov_per_class
            ),
        );
        check(
            o.lambda_val_per_class >= 1,
            "observers.lambda_val_per_class must be at least 1".into(),
        );
        check(
            o.test_per_class >= 2,
            format!(
                "observers.test_per_class must be at least 2, got {}",
                o.test_per_class
            ),
        );
        let (lo, hi) = o.lambda_range;
        check(
            lo > 0.0 && lo <= hi && hi <= 1.0,
            format!("observers.lambda_range must satisfy 0 < lo <= hi <= 1, got [{lo}, {hi}]"),
        );
        check(
            o.lambda_per_decade >= 1,
            "observers.lambda_per_decade must be at least 1".into(),
        );
        if let Some(l) = o.cho_lambda {
            check(
                (0.0..=1.0).contains(&l),
                format!("observers.cho_lambda must lie in [0, 1], got {l}"),
            );
        }
        let lc = &o.learned;
        if let Err(e) = self.learned_spec(lc.blocks).validate() {
            errors.push(format!("observers.learned: {e}"));
        }
        let mut check = |ok: bool, msg: String| {
            if !ok {
                errors.push(msg);
            }
        };
        check(
            lc.epochs >= 1,
            "observers.learned.epochs must be at least 1".into(),
        );
        check(
            lc.batch_size >= 1,
            "observers.learned.batch_size must be at least 1".into(),
        );
        check(
            lc.learning_rate.is_finite() && lc.learning_rate > 0.0,
            format!(
                "observers.learned.learning_rate must be positive, got {}",
                lc.learning_rate
            ),
        );
        check(
            lc.train_images >= 4,
            format!(
                "observers.learned.train_images must be at least 4, got {}",
                lc.train_images
            ),
        );
        check(
            lc.val_images >= 4,
            format!(
                "observers.learned.val_images must be at least 4, got {}",
                lc.val_images
            ),
        );

        check(
            !self.rayleigh_length.lengths.is_empty(),
            "rayleigh_length.lengths is empty".into(),
        );
        let d = &self.srcnn_depth;
        check(!d.depths.is_empty(), "srcnn_depth.depths is empty".into());
        check(
            !d.observers.is_empty(),
            "srcnn_depth.observers is empty".into(),
        );
        check(
            !has_duplicates(&d.observers),
            "srcnn_depth.observers lists an observer twice".into(),
        );
        check(
            !d.observers.contains(&ObserverKind::Learned),
            "srcnn_depth.observers supports only rho and cho".into(),
        );

        let c = &self.mc_capacity;
        check(!c.blocks.is_empty(), "mc_capacity.blocks is empty".into());
        for b in &c.blocks {
            check(
                ALLOWED_BLOCKS.contains(b),
                format!("mc_capacity.blocks: {b} is not one of {ALLOWED_BLOCKS:?}"),
            );
        }
        check(
            !c.train_sizes.is_empty(),
            "mc_capacity.train_sizes is empty".into(),
        );
        for n in &c.train_sizes {
            check(
                *n >= 4,
                format!("mc_capacity.train_sizes: {n} is below the minimum of 4"),
            );
        }
        check(
            !c.resolutions.is_empty(),
            "mc_capacity.resolutions is empty".into(),
        );
        check(
            !has_duplicates(&c.resolutions),
            "mc_capacity.resolutions lists a resolution twice".into(),
        );
        check(
            c.val_images >= 4,
            format!(
                "mc_capacity.val_images must be at least 4, got {}",
                c.val_images
            ),
        );
        check(
            c.test_per_class >= 2,
            format!(
                "mc_capacity.test_per_class must be at least 2, got {}",
                c.test_per_class
            ),
        );
        check(
            c.repeats >= 1,
            "mc_capacity.repeats must be at least 1".into(),
        );
        for (b, n) in &c.cells {
            check(
                ALLOWED_BLOCKS.contains(b) && *n >= 4,
                format!("mc_capacity.cells: ({b}, {n}) needs blocks in {ALLOWED_BLOCKS:?} and at least 4 images"),
            );
        }

        if errors.is_empty() {
            Ok(())
        } else {
            Err(ExperimentError::Invalid(errors))
        }
    }

    pub fn rayleigh_task(&self, length: u32) -> TaskSpec {
        let r = &self.rayleigh;
        TaskSpec {
            kind: TaskKind::Rayleigh(RayleighSignalSpec {
                length,
                blur_sigma: r.signal_blur,
                amplitude: r.amplitude,
                line_amplitude: match r.line_amplitude {
                    LineAmplitudeConfig::PerPixel => LineAmplitude::PerPixel,
                    LineAmplitudeConfig::MassMatched => LineAmplitude::MassMatched,
                },
            }),
            clb: r.clb.params(r.field),
            degradation: DegradationSpec {
                blur_sigma: r.blur_sigma,
                downsample_factor: 1,
                upsample_after: false,
                noise: NoiseSpec {
                    sigma_p: r.sigma_p,
                    sigma_g: r.sigma_g,
                },
            },
            work_dims: r.work,
            crop_dims: r.crop,
        }
    }

    pub fn mc_task(&self) -> TaskSpec {
        let m = &self.mc;
        let s = &m.synthetic;
        let source = match &m.library {
            Some(dir) => McSource::Library(dir.clone()),
            None => McSource::Synthetic {
                params: SyntheticMcParams {
                    size: s.size,
                    disk_radius: s.disk_radius,
                    blob_count: s.blob_count,
                    blob_sigma: s.blob_sigma,
                    peak: s.peak,
                },
                library_size: s.library_size,
                seed: s.library_seed,
            },
        };
        TaskSpec {
            kind: TaskKind::Mc(McSignalSpec {
                source,
                contrast: m.contrast,
                rotation: m.rotation,
                crop_size: m.cluster_crop,
            }),
            clb: m.clb.params(m.field),
            degradation: DegradationSpec {
                blur_sigma: m.blur_sigma,
                downsample_factor: 2,
                upsample_after: true,
                noise: NoiseSpec {
                    sigma_p: m.sigma_p,
                    sigma_g: m.sigma_g,
                },
            },
            work_dims: m.work,
            crop_dims: m.crop,
        }
    }

    pub fn srcnn_spec(&self, depth: usize) -> SrcnnSpec {
        SrcnnSpec {
            n_layers: depth,
            first_kernel: self.sr.first_kernel,
            other_kernel: self.sr.other_kernel,
            hidden_filters: self.sr.filters,
        }
    }

    pub fn sr_train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.sr.learning_rate,
            batch_size: self.sr.batch_size,
            epochs: self.sr.epochs,
            loss: Loss::Mse,
            seed,
            on_the_fly_noise: false,
        }
    }

    pub fn learned_spec(&self, blocks: usize) -> LearnedObserverSpec {
        let l = &self.observers.learned;
        LearnedObserverSpec {
            residual_blocks: blocks,
            filters: l.filters,
            kernel: l.kernel,
            init: match l.init {
                InitConfig::Random => ObserverInit::Random,
                InitConfig::Rho => ObserverInit::RhoTemplate,
            },
        }
    }

    pub fn learned_train_config(&self, seed: u64) -> TrainConfig {
        let l = &self.observers.learned;
        TrainConfig {
            learning_rate: l.learning_rate,
            batch_size: l.batch_size,
            epochs: l.epochs,
            loss: Loss::Bce,
            seed,
            on_the_fly_noise: false,
        }
    }
}

fn has_duplicates<T: PartialEq>(items: &[T]) -> bool {
    items
        .iter()
        .enumerate()
        .any(|(i, a)| items[..i].contains(a))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn invalid_messages(text: &str) -> Vec<String> {
        match Config::parse(text) {
            Err(ExperimentError::Invalid(m)) => m,
            other => panic!("expected validation errors, got {other:?}"),
        }
    }

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(Config::parse("").unwrap(), Config::default());
    }

    #[test]
    fn signal_length_bound() {
        assert!(Config::parse("[rayleigh_length]\nlengths = [4]\n").is_ok());
        let msgs = invalid_messages("[rayleigh_length]\nlengths = [2]\n");
        assert_eq!(msgs.len(), 1);
        assert!(msgs[0].contains("at least 3"), "{msgs:?}");
    }

    #[test]
    fn unknown_key_reports_its_line() {
        let err = Config::parse("seed = 3\n\n[sr]\ndepth = 3\nfliters = 8\n").unwrap_err();
        match err {
            ExperimentError::Parse { line, message } => {
                assert_eq!(line, 5);
                assert!(message.contains("fliters"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let err = Config::parse("seed = \"x\"\n").unwrap_err();
        assert!(matches!(err, ExperimentError::Parse { line: 1, .. }));
    }

    #[test]
    fn all_problems_are_listed() {
        let msgs = invalid_messages(
            "[sr]\ndepth = 9\nepochs = 0\n[observers]\nroster = []\ntest_per_class = 1\n",
        );
        assert_eq!(msgs.len(), 4, "{msgs:?}");
    }

    #[test]
    fn emitted_config_reparses_equal() {
        let mut cfg = Config::default();
        cfg.seed = 99;
        cfg.rayleigh.amplitude = 0.1 + 0.2;
        cfg.sr.patch = Some(24);
        cfg.observers.cho_lambda = Some(1e-7);
        cfg.mc.library = Some(PathBuf::from("clusters"));
        cfg.mc_capacity.resolutions = vec![Resolution::Lr, Resolution::Sr];
        let text = cfg.emit().unwrap();
        let back: Config = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(
            Config::parse(&Config::default().emit().unwrap()).unwrap(),
            Config::default()
        );
    }

    #[test]
    fn tasks_follow_the_config() {
        let cfg = Config::parse("[rayleigh]\namplitude = 2.5\nwork = [48, 48]\ncrop = [32, 32]\n")
            .unwrap();
        let t = cfg.rayleigh_task(6);
        assert_eq!(t.work_dims, (48, 48));
        let TaskKind::Rayleigh(s) = &t.kind else {
            panic!()
        };
        assert_eq!((s.length, s.amplitude), (6, 2.5));
        assert_eq!(cfg.mc_task().degradation.downsample_factor, 2);
    }
}
