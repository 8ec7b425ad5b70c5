//! Seed-partitioned image streams and the views observers see.

use std::collections::{BTreeMap, HashMap};
use std::ops::Range;

use rayon::prelude::*;
use sriq_core::nn::Network;
use sriq_core::rng::{derive_seed, tag};
use sriq_core::sim::task::{ensemble_image_seed, ensemble_label};
use sriq_core::sim::{ImageSeeds, PreparedTask};
use sriq_core::sr::super_resolve;
use sriq_core::ImageGrid;

use crate::error::Result;
use crate::report::Resolution;

/// Images processed together when a stream is consumed piecewise.
pub const CHUNK: usize = 256;

/// Backgrounds are kept for reuse across sweep values up to this size.
pub const DEFAULT_CACHE_BYTES: usize = 1 << 30;

/// A disjoint sequence of images. Image `i` has label `i mod 2` and seeds
/// derived from the stream seed, which is itself derived from the master
/// seed and the stream's purpose.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Stream {
    pub seed: u64,
    pub count: usize,
}

impl Stream {
    pub fn new(master: u64, purpose: &str, repeat: u64, count: usize) -> Self {
        Self {
            seed: derive_seed(master, tag(purpose), repeat),
            count,
        }
    }

    /// Image count for `per_class` images of each label.
    pub fn balanced(master: u64, purpose: &str, repeat: u64, per_class: usize) -> Self {
        Self::new(master, purpose, repeat, 2 * per_class)
    }

    pub fn image_seeds(&self, index: usize) -> ImageSeeds {
        ImageSeeds::new(ensemble_image_seed(self.seed, index))
    }

    pub fn label(index: usize) -> u8 {
        ensemble_label(index)
    }

    pub fn chunks(&self) -> impl Iterator<Item = Range<usize>> {
        let n = self.count;
        (0..n).step_by(CHUNK).map(move |s| s..(s + CHUNK).min(n))
    }
}

/// Backgrounds keyed by stream and index. Backgrounds do not depend on the
/// signal, so one cache serves every sweep value of a study as long as the
/// background model and work window stay fixed.
pub struct BackgroundCache {
    budget: usize,
    used: usize,
    store: HashMap<(u64, usize), ImageGrid>,
}

impl BackgroundCache {
    pub fn new(budget_bytes: usize) -> Self {
        Self {
            budget: budget_bytes,
            used: 0,
            store: HashMap::new(),
        }
    }

    pub fn cached(&self) -> usize {
        self.store.len()
    }

    /// Backgrounds of `range`, generating whatever is not cached.
    pub fn backgrounds(
        &mut self,
        task: &PreparedTask,
        stream: &Stream,
        range: Range<usize>,
    ) -> Result<Vec<ImageGrid>> {
        let missing: Vec<usize> = range
            .clone()
            .filter(|i| !self.store.contains_key(&(stream.seed, *i)))
            .collect();
        let fresh = missing
            .par_iter()
            .map(|&i| task.background(stream.image_seeds(i).background))
            .collect::<sriq_core::Result<Vec<_>>>()?;
        let mut fresh: HashMap<usize, ImageGrid> = missing.into_iter().zip(fresh).collect();
        let mut out = Vec::with_capacity(range.len());
        for i in range {
            let key = (stream.seed, i);
            match self.store.get(&key) {
                Some(bg) => out.push(bg.clone()),
                None => {
                    let bg = fresh.remove(&i).expect("generated above");
                    let bytes = bg.len() * 4;
                    if self.used + bytes <= self.budget {
                        self.used += bytes;
                        self.store.insert(key, bg.clone());
                    }
                    out.push(bg);
                }
            }
        }
        Ok(out)
    }
}

/// Noisy HR and degraded LR measurements over the work window.
pub struct Measured {
    pub labels: Vec<u8>,
    pub hr: Vec<ImageGrid>,
    pub lr: Vec<ImageGrid>,
}

pub fn measure(
    task: &PreparedTask,
    stream: &Stream,
    range: Range<usize>,
    cache: &mut BackgroundCache,
) -> Result<Measured> {
    let backgrounds = cache.backgrounds(task, stream, range.clone())?;
    let pairs = range
        .clone()
        .into_par_iter()
        .zip(backgrounds.par_iter())
        .map(|(i, bg)| {
            let seeds = stream.image_seeds(i);
            let object = task.object_from_background(bg, Stream::label(i), seeds.signal)?;
            Ok((
                task.measure_hr(&object, &seeds)?,
                task.measure_lr(&object, &seeds)?,
            ))
        })
        .collect::<sriq_core::Result<Vec<_>>>()?;
    let (hr, lr) = pairs.into_iter().unzip();
    Ok(Measured {
        labels: range.map(Stream::label).collect(),
        hr,
        lr,
    })
}

/// Observer-crop images of one batch, per resolution.
pub struct Views {
    pub labels: Vec<u8>,
    pub images: BTreeMap<Resolution, Vec<ImageGrid>>,
}

impl Views {
    pub fn empty(resolutions: &[Resolution]) -> Self {
        Self {
            labels: Vec::new(),
            images: resolutions.iter().map(|&r| (r, Vec::new())).collect(),
        }
    }

    pub fn get(&self, r: Resolution) -> &[ImageGrid] {
        self.images.get(&r).map_or(&[], |v| v.as_slice())
    }

    pub fn append(&mut self, mut other: Views) {
        self.labels.append(&mut other.labels);
        for (r, imgs) in self.images.iter_mut() {
            if let Some(mut more) = other.images.remove(r) {
                imgs.append(&mut more);
            }
        }
    }
}

/// Crops the requested resolutions; SR views need a network.
pub fn views(
    task: &PreparedTask,
    measured: Measured,
    sr: Option<&Network<f32>>,
    resolutions: &[Resolution],
) -> Result<Views> {
    let mut images = BTreeMap::new();
    for &r in resolutions {
        let crops = match r {
            Resolution::Hr => measured
                .hr
                .par_iter()
                .map(|g| task.crop(g))
                .collect::<sriq_core::Result<Vec<_>>>()?,
            Resolution::Lr => measured
                .lr
                .par_iter()
                .map(|g| task.crop(g))
                .collect::<sriq_core::Result<Vec<_>>>()?,
            Resolution::Sr => {
                let net = sr.ok_or_else(|| {
                    sriq_core::Error::InvalidParameter("SR views need a trained network".into())
                })?;
                measured
                    .lr
                    .par_iter()
                    .map(|g| task.crop(&super_resolve(net, g)?))
                    .collect::<sriq_core::Result<Vec<_>>>()?
            }
        };
        images.insert(r, crops);
    }
    Ok(Views {
        labels: measured.labels,
        images,
    })
}

/// All views of a stream, built chunk by chunk.
pub fn stream_views(
    task: &PreparedTask,
    stream: &Stream,
    sr: Option<&Network<f32>>,
    resolutions: &[Resolution],
    cache: &mut BackgroundCache,
) -> Result<Views> {
    let mut all = Views::empty(resolutions);
    for range in stream.chunks() {
        let m = measure(task, stream, range, cache)?;
        all.append(views(task, m, sr, resolutions)?);
    }
    Ok(all)
}
