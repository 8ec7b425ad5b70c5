//! Binary detection tasks and labeled image ensembles.

use rayon::prelude::*;

use crate::degrade::{self, DegradationSpec};
use crate::error::{invalid, shape, Result};
use crate::grid::{ImageGrid, Window};
use crate::rng::{derive_seed, tag};
use crate::sim::clb::{self, ClbParams};
use crate::sim::mc::{self, ClusterLibrary, McSignalSpec};
use crate::sim::rayleigh::{self, Hypothesis, RayleighSignalSpec};

#[derive(Clone, Debug, PartialEq)]
pub enum TaskKind {
    Rayleigh(RayleighSignalSpec),
    Mc(McSignalSpec),
}

/// Everything needed to simulate both classes of a detection task.
///
/// Images are simulated over `work_dims`, a window centred in the
/// `clb.width`×`clb.height` field of view; observers read the central
/// `crop_dims` of it. The margin between the two keeps blur and network
/// border effects out of the observer's view.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub clb: ClbParams,
    pub degradation: DegradationSpec,
    pub work_dims: (usize, usize),
    pub crop_dims: (usize, usize),
}

impl TaskSpec {
    pub fn rayleigh(length: u32, amplitude: f64) -> Self {
        Self {
            kind: TaskKind::Rayleigh(RayleighSignalSpec::new(length, amplitude)),
            clb: ClbParams::table1(128, 128),
            degradation: DegradationSpec::rayleigh(),
            work_dims: (128, 128),
            crop_dims: (64, 64),
        }
    }

    pub fn mc() -> Self {
        Self {
            kind: TaskKind::Mc(McSignalSpec::default()),
            clb: ClbParams::table1(128, 128),
            degradation: DegradationSpec::mc(),
            work_dims: (128, 128),
            crop_dims: (128, 128),
        }
    }

    pub fn fov(&self) -> (usize, usize) {
        (self.clb.width, self.clb.height)
    }

    pub fn validate(&self) -> Result<()> {
        self.clb.validate()?;
        self.degradation.validate()?;
        let (fw, fh) = self.fov();
        let (ww, wh) = self.work_dims;
        let (cw, ch) = self.crop_dims;
        if cw == 0 || ch == 0 || cw > ww || ch > wh || ww > fw || wh > fh {
            return Err(invalid(format!(
                "need 0 < crop {cw}x{ch} <= work window {ww}x{wh} <= field of view {fw}x{fh}"
            )));
        }
        if self.degradation.downsample_factor == 2 && (ww % 2 != 0 || wh % 2 != 0) {
            return Err(invalid(format!("work window {ww}x{wh} must be even for 2x decimation")));
        }
        match &self.kind {
            TaskKind::Rayleigh(s) => s.validate(),
            TaskKind::Mc(s) => {
                s.validate()?;
                if s.crop_size < fw.max(fh) {
                    return Err(invalid(format!(
                        "MC crop {} must cover the {fw}x{fh} field of view",
                        s.crop_size
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn work_window(&self) -> Window {
        let (fw, fh) = self.fov();
        Window::centered(fw, fh, self.work_dims.0, self.work_dims.1)
    }

    /// Validates and caches signal templates / the cluster library.
    pub fn prepare(&self) -> Result<PreparedTask> {
        self.validate()?;
        let window = self.work_window();
        let signal = match &self.kind {
            TaskKind::Rayleigh(s) => PreparedSignal::Rayleigh([
                rayleigh::make_rayleigh_signal_window(s, Hypothesis::Pair, self.fov(), window)?,
                rayleigh::make_rayleigh_signal_window(s, Hypothesis::Line, self.fov(), window)?,
            ]),
            TaskKind::Mc(s) => PreparedSignal::Mc(ClusterLibrary::from_source(&s.source)?),
        };
        Ok(PreparedTask {
            spec: self.clone(),
            window,
            signal,
        })
    }
}

#[derive(Clone, Debug)]
enum PreparedSignal {
    Rayleigh([ImageGrid; 2]),
    Mc(ClusterLibrary),
}

/// Per-image seeds, all derived from one image seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ImageSeeds {
    pub background: u64,
    pub signal: u64,
    pub hr_noise: u64,
    pub lr_noise: u64,
}

impl ImageSeeds {
    pub fn new(image_seed: u64) -> Self {
        Self {
            background: derive_seed(image_seed, tag("bg"), 0),
            signal: derive_seed(image_seed, tag("signal"), 0),
            hr_noise: derive_seed(image_seed, tag("hrnoise"), 0),
            lr_noise: derive_seed(image_seed, tag("lrnoise"), 0),
        }
    }

    /// Fresh noise seeds for a later pass over the same object.
    pub fn renoised(&self, pass: u64) -> Self {
        Self {
            hr_noise: derive_seed(self.hr_noise, tag("pass"), pass),
            lr_noise: derive_seed(self.lr_noise, tag("pass"), pass),
            ..*self
        }
    }
}

/// A validated task ready for simulation.
#[derive(Clone, Debug)]
pub struct PreparedTask {
    spec: TaskSpec,
    window: Window,
    signal: PreparedSignal,
}

impl PreparedTask {
    pub fn spec(&self) -> &TaskSpec {
        &self.spec
    }

    pub fn work_dims(&self) -> (usize, usize) {
        self.spec.work_dims
    }

    pub fn background(&self, seed: u64) -> Result<ImageGrid> {
        clb::generate_clb_window(&self.spec.clb, seed, self.window)
    }

    /// Noise-free object `f_label` over the work window built on `background`.
    pub fn object_from_background(&self, background: &ImageGrid, label: u8, signal_seed: u64) -> Result<ImageGrid> {
        match &self.signal {
            PreparedSignal::Rayleigh(signals) => background.add(&signals[usize::from(label != 0)]),
            PreparedSignal::Mc(library) => {
                if label == 0 {
                    return Ok(background.clone());
                }
                let TaskKind::Mc(spec) = &self.spec.kind else {
                    unreachable!("MC library without MC task")
                };
                let draw = mc::sample_mc_signal(spec, library, signal_seed)?;
                // the signal covers the field of view; cut out the work window
                let (fw, fh) = self.spec.fov();
                let full = draw.signal.center_crop(fw, fh)?;
                let part = full.crop(
                    self.window.x0 as usize,
                    self.window.y0 as usize,
                    self.window.width,
                    self.window.height,
                )?;
                mc::apply_mc(background, &part, draw.contrast)
            }
        }
    }

    pub fn object(&self, label: u8, seeds: &ImageSeeds) -> Result<ImageGrid> {
        let bg = self.background(seeds.background)?;
        self.object_from_background(&bg, label, seeds.signal)
    }

    /// `f + n`.
    pub fn measure_hr(&self, object: &ImageGrid, seeds: &ImageSeeds) -> Result<ImageGrid> {
        degrade::apply_noise(object, &self.spec.degradation.noise, seeds.hr_noise)
    }

    /// Degraded measurement of `object`.
    pub fn measure_lr(&self, object: &ImageGrid, seeds: &ImageSeeds) -> Result<ImageGrid> {
        degrade::degrade(object, &self.spec.degradation, seeds.lr_noise)
    }

    /// Observer crop of a work-window image.
    pub fn crop(&self, img: &ImageGrid) -> Result<ImageGrid> {
        let (cw, ch) = self.spec.crop_dims;
        img.center_crop(cw, ch)
    }
}

/// Images with binary labels, all of one size.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabeledSet {
    pub images: Vec<ImageGrid>,
    pub labels: Vec<u8>,
}

impl LabeledSet {
    pub fn new(images: Vec<ImageGrid>, labels: Vec<u8>) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(shape(format!("{} labels", images.len()), labels.len()));
        }
        if let Some(first) = images.first() {
            for img in &images {
                first.check_same_dims(img)?;
            }
        }
        if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
            return Err(invalid(format!("labels must be 0 or 1, found {bad}")));
        }
        Ok(Self { images, labels })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn dims(&self) -> Option<(usize, usize)> {
        self.images.first().map(|i| i.dims())
    }

    pub fn class(&self, label: u8) -> impl Iterator<Item = &ImageGrid> {
        self.images.iter().zip(&self.labels).filter(move |(_, &l)| l == label).map(|(i, _)| i)
    }

    pub fn count(&self, label: u8) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn map_images(&self, f: impl Fn(&ImageGrid) -> Result<ImageGrid> + Sync + Send) -> Result<Self> {
        let images = self.images.par_iter().map(f).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            images,
            labels: self.labels.clone(),
        })
    }
}

/// Label of image `index` in a class-interleaved ensemble.
pub fn ensemble_label(index: usize) -> u8 {
    (index % 2) as u8
}

/// Seed of image `index` in the ensemble drawn from `seed`.
pub fn ensemble_image_seed(seed: u64, index: usize) -> u64 {
    derive_seed(seed, tag("image"), index as u64)
}

/// `n_per_class` noisy HR images of each class, alternating labels 0, 1.
pub fn generate_ensemble(task: &TaskSpec, n_per_class: usize, seed: u64) -> Result<LabeledSet> {
    if n_per_class == 0 {
        return Err(invalid("n_per_class must be at least 1"));
    }
    let prepared = task.prepare()?;
    let images = (0..2 * n_per_class)
        .into_par_iter()
        .map(|i| {
            let seeds = ImageSeeds::new(ensemble_image_seed(seed, i));
            let object = prepared.object(ensemble_label(i), &seeds)?;
            prepared.measure_hr(&object, &seeds)
        })
        .collect::<Result<Vec<_>>>()?;
    let labels = (0..2 * n_per_class).map(ensemble_label).collect();
    LabeledSet::new(images, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::mc::{McSource, SyntheticMcParams};

    fn small_rayleigh() -> TaskSpec {
        let mut t = TaskSpec::rayleigh(7, 5.0);
        t.clb = ClbParams::table1(48, 48);
        t.work_dims = (32, 32);
        t.crop_dims = (16, 16);
        t
    }

    #[test]
    fn one_per_class_gives_two_labels() {
        let set = generate_ensemble(&small_rayleigh(), 1, 3).unwrap();
        assert_eq!(set.labels, vec![0, 1]);
        assert_eq!(set.dims(), Some((32, 32)));
    }

    #[test]
    fn classes_are_balanced_and_images_distinct() {
        let set = generate_ensemble(&small_rayleigh(), 6, 8).unwrap();
        assert_eq!(set.count(0), 6);
        assert_eq!(set.count(1), 6);
        for i in 0..set.len() {
            for j in i + 1..set.len() {
                assert_ne!(set.images[i], set.images[j]);
            }
        }
    }

    #[test]
    fn ensemble_is_reproducible() {
        let a = generate_ensemble(&small_rayleigh(), 2, 21).unwrap();
        let b = generate_ensemble(&small_rayleigh(), 2, 21).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn work_window_object_matches_full_field() {
        let t = small_rayleigh();
        let p = t.prepare().unwrap();
        let seeds = ImageSeeds::new(99);
        let obj = p.object(1, &seeds).unwrap();
        let bg = clb::generate_clb(&t.clb, seeds.background).unwrap();
        let TaskKind::Rayleigh(s) = &t.kind else { unreachable!() };
        let sig = rayleigh::make_rayleigh_signal(s, Hypothesis::Line, 48, 48).unwrap();
        let full = bg.add(&sig).unwrap().crop(8, 8, 32, 32).unwrap();
        for (a, b) in obj.as_slice().iter().zip(full.as_slice()) {
            assert!((a - b).abs() <= 1e-5 * b.abs().max(1.0));
        }
    }

    #[test]
    fn mc_task_inserts_only_for_class_one() {
        let mut t = TaskSpec::mc();
        t.clb = ClbParams::table1(64, 64);
        t.work_dims = (32, 32);
        t.crop_dims = (32, 32);
        t.kind = TaskKind::Mc(McSignalSpec {
            source: McSource::Synthetic {
                params: SyntheticMcParams {
                    size: 100,
                    ..SyntheticMcParams::default()
                },
                library_size: 2,
                seed: 4,
            },
            crop_size: 64,
            ..McSignalSpec::default()
        });
        let p = t.prepare().unwrap();
        let seeds = ImageSeeds::new(5);
        let bg = p.background(seeds.background).unwrap();
        assert_eq!(p.object(0, &seeds).unwrap(), bg);
        let f1 = p.object(1, &seeds).unwrap();
        assert!(f1.sum() > bg.sum());
        assert_eq!(p.measure_lr(&f1, &seeds).unwrap().dims(), (32, 32));
    }

    #[test]
    fn invalid_geometry_is_rejected() {
        let mut t = small_rayleigh();
        t.crop_dims = (40, 40);
        assert!(t.validate().is_err());
        let mut t = small_rayleigh();
        t.work_dims = (64, 64);
        assert!(t.validate().is_err());
        assert!(generate_ensemble(&small_rayleigh(), 0, 1).is_err());
    }
}
