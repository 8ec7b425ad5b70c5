//! Microcalcification clusters and their multiplicative insertion,
//! `f1 = f_b ⊙ (c·s + 1)`.

use std::path::{Path, PathBuf};

use rand::Rng as _;

use crate::error::{invalid, shape, Error, Result};
use crate::grid::ImageGrid;
use crate::rng::{self, derive_seed, tag};
use crate::sim::rayleigh::render_point_sources;
use crate::Window;

#[derive(Clone, Debug, PartialEq)]
pub struct McSignalSpec {
    pub source: McSource,
    pub contrast: (f64, f64),
    /// Rotation angle range in degrees.
    pub rotation: (f64, f64),
    pub crop_size: usize,
}

impl Default for McSignalSpec {
    fn default() -> Self {
        Self {
            source: McSource::default(),
            contrast: (0.05, 0.06),
            rotation: (0.0, 360.0),
            crop_size: 128,
        }
    }
}

impl McSignalSpec {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.contrast;
        if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo <= hi) {
            return Err(invalid(format!("contrast range must satisfy 0 < lo <= hi, got [{lo}, {hi}]")));
        }
        let (a, b) = self.rotation;
        if !(a.is_finite() && b.is_finite() && a <= b) {
            return Err(invalid(format!("rotation range [{a}, {b}] is not ordered")));
        }
        if self.crop_size == 0 {
            return Err(invalid("MC crop size must be positive"));
        }
        if let McSource::Synthetic { params, library_size, .. } = &self.source {
            params.validate()?;
            if *library_size == 0 {
                return Err(Error::EmptyLibrary);
            }
            if self.crop_size > params.size {
                return Err(invalid(format!(
                    "MC crop {} exceeds synthetic cluster size {}",
                    self.crop_size, params.size
                )));
            }
        }
        Ok(())
    }
}

/// Where cluster images come from.
#[derive(Clone, Debug, PartialEq)]
pub enum McSource {
    /// Directory of grayscale PNG (8 or 16 bit) or raw little-endian `f32`
    /// files (`.raw`/`.f32`, square); values are normalized to `[0, 1]`.
    Library(PathBuf),
    /// A library of seeded synthetic clusters.
    Synthetic {
        params: SyntheticMcParams,
        library_size: usize,
        seed: u64,
    },
}

impl Default for McSource {
    fn default() -> Self {
        McSource::Synthetic {
            params: SyntheticMcParams::default(),
            library_size: 11,
            seed: 0x4D43,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticMcParams {
    pub size: usize,
    pub disk_radius: f64,
    /// Inclusive range of calcifications per cluster.
    pub blob_count: (u32, u32),
    pub blob_sigma: (f64, f64),
    pub peak: (f64, f64),
}

impl Default for SyntheticMcParams {
    fn default() -> Self {
        Self {
            size: 200,
            disk_radius: 12.0,
            blob_count: (5, 15),
            blob_sigma: (0.5, 1.5),
            peak: (0.6, 1.0),
        }
    }
}

impl SyntheticMcParams {
    pub fn validate(&self) -> Result<()> {
        if self.size == 0 {
            return Err(invalid("synthetic cluster size must be positive"));
        }
        let reach = self.disk_radius + 4.0 * self.blob_sigma.1 + 2.0;
        if !(self.disk_radius.is_finite() && self.disk_radius > 0.0) || reach > self.size as f64 / 2.0 {
            return Err(invalid(format!(
                "degenerate disk radius {} for a {}-pixel cluster",
                self.disk_radius, self.size
            )));
        }
        let (s0, s1) = self.blob_sigma;
        if !(s0 > 0.0 && s0 <= s1) {
            return Err(invalid(format!("blob sigma range [{s0}, {s1}] is invalid")));
        }
        let (p0, p1) = self.peak;
        if !(0.0 < p0 && p0 <= p1 && p1 <= 1.0) {
            return Err(invalid(format!("blob peak range [{p0}, {p1}] must lie in (0, 1]")));
        }
        if self.blob_count.0 > self.blob_count.1 {
            return Err(invalid("blob count range is reversed"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McBlob {
    pub x: f64,
    pub y: f64,
    pub sigma: f64,
    /// Integrated intensity of the blob as rendered.
    pub mass: f64,
}

#[derive(Clone, Debug)]
pub struct SyntheticCluster {
    pub image: ImageGrid,
    pub blobs: Vec<McBlob>,
}

/// A seeded stand-in for a segmented calcification cluster: small Gaussian
/// spots scattered in a disk at the image centre, scaled into `[0, 1]`.
pub fn synth_mc_cluster(params: &SyntheticMcParams, seed: u64) -> Result<SyntheticCluster> {
    params.validate()?;
    let mut r = rng::rng(seed);
    let n = r.gen_range(params.blob_count.0..=params.blob_count.1) as usize;
    let c = (params.size as f64 - 1.0) / 2.0;
    let mut blobs = Vec::with_capacity(n);
    for _ in 0..n {
        // uniform over the disk
        let rad = params.disk_radius * r.gen::<f64>().sqrt();
        let phi = r.gen::<f64>() * std::f64::consts::TAU;
        let sigma = r.gen_range(params.blob_sigma.0..=params.blob_sigma.1);
        let peak = r.gen_range(params.peak.0..=params.peak.1);
        blobs.push(McBlob {
            x: c + rad * phi.cos(),
            y: c + rad * phi.sin(),
            sigma,
            mass: peak * std::f64::consts::TAU * sigma * sigma,
        });
    }
    let fov = (params.size, params.size);
    let mut image = render_blobs(fov, &blobs)?;
    let (_, max) = image.min_max();
    if max > 1.0 {
        let scale = 1.0 / max as f64;
        for b in &mut blobs {
            b.mass *= scale;
        }
        image = render_blobs(fov, &blobs)?;
    }
    Ok(SyntheticCluster { image, blobs })
}

fn render_blobs(fov: (usize, usize), blobs: &[McBlob]) -> Result<ImageGrid> {
    let mut out = ImageGrid::zeros(fov.0, fov.1);
    for b in blobs {
        let one = render_point_sources(fov, Window::full(fov.0, fov.1), &[(b.x, b.y, b.mass)], b.sigma)?;
        out = out.add(&one)?;
    }
    Ok(out)
}

/// The set of cluster images insertion draws from.
#[derive(Clone, Debug)]
pub struct ClusterLibrary {
    clusters: Vec<ImageGrid>,
}

impl ClusterLibrary {
    pub fn from_images(clusters: Vec<ImageGrid>) -> Result<Self> {
        if clusters.is_empty() {
            return Err(Error::EmptyLibrary);
        }
        Ok(Self { clusters })
    }

    pub fn synthetic(params: &SyntheticMcParams, count: usize, seed: u64) -> Result<Self> {
        let clusters = (0..count)
            .map(|i| synth_mc_cluster(params, derive_seed(seed, tag("mclib"), i as u64)).map(|c| c.image))
            .collect::<Result<Vec<_>>>()?;
        Self::from_images(clusters)
    }

    pub fn from_source(source: &McSource) -> Result<Self> {
        match source {
            McSource::Library(dir) => Self::load_dir(dir),
            McSource::Synthetic {
                params,
                library_size,
                seed,
            } => Self::synthetic(params, *library_size, *seed),
        }
    }

    /// Loads every PNG / raw-`f32` file in `dir`, in file-name order.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                matches!(
                    p.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref(),
                    Some("png" | "raw" | "f32")
                )
            })
            .collect();
        paths.sort();
        let clusters = paths.iter().map(|p| load_cluster(p)).collect::<Result<Vec<_>>>()?;
        Self::from_images(clusters)
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn get(&self, index: usize) -> &ImageGrid {
        &self.clusters[index]
    }
}

fn load_cluster(path: &Path) -> Result<ImageGrid> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    if ext == "png" {
        let img = image::open(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        let sixteen = matches!(
            img.color(),
            image::ColorType::L16 | image::ColorType::La16 | image::ColorType::Rgb16 | image::ColorType::Rgba16
        );
        let (w, h) = (img.width() as usize, img.height() as usize);
        let values: Vec<f32> = if sixteen {
            img.to_luma16().into_raw().into_iter().map(|v| v as f32 / 65535.0).collect()
        } else {
            img.to_luma8().into_raw().into_iter().map(|v| v as f32 / 255.0).collect()
        };
        return ImageGrid::from_vec(w, h, values);
    }
    let bytes = std::fs::read(path)?;
    if bytes.len() % 4 != 0 {
        return Err(Error::Format(format!("{}: length is not a multiple of 4", path.display())));
    }
    let values: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    let side = (values.len() as f64).sqrt().round() as usize;
    if side * side != values.len() || side == 0 {
        return Err(Error::Format(format!("{}: raw cluster is not square", path.display())));
    }
    let (lo, hi) = values.iter().fold((f32::INFINITY, f32::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    ImageGrid::from_vec(side, side, values.into_iter().map(|v| (v - lo) / span).collect())
}

/// Rotates about the image centre with bilinear interpolation; samples
/// falling outside the source are zero.
pub fn rotate_zero_pad(img: &ImageGrid, degrees: f64) -> ImageGrid {
    let (w, h) = img.dims();
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let (s, c) = degrees.to_radians().sin_cos();
    let sample = |x: f64, y: f64| -> f64 {
        let (x0, y0) = (x.floor(), y.floor());
        let (fx, fy) = (x - x0, y - y0);
        let mut acc = 0.0;
        for (dx, wx) in [(0i64, 1.0 - fx), (1, fx)] {
            for (dy, wy) in [(0i64, 1.0 - fy), (1, fy)] {
                let (xi, yi) = (x0 as i64 + dx, y0 as i64 + dy);
                if wx * wy == 0.0 || xi < 0 || yi < 0 || xi >= w as i64 || yi >= h as i64 {
                    continue;
                }
                acc += wx * wy * img.get(xi as usize, yi as usize) as f64;
            }
        }
        acc
    };
    ImageGrid::from_fn(w, h, |x, y| {
        let (dx, dy) = (x as f64 - cx, y as f64 - cy);
        // inverse rotation maps output pixels back into the source
        let sx = c * dx + s * dy + cx;
        let sy = -s * dx + c * dy + cy;
        sample(sx, sy) as f32
    })
}

/// One random draw of the inserted signal.
#[derive(Clone, Debug)]
pub struct McRealization {
    pub signal: ImageGrid,
    pub contrast: f64,
    pub cluster_index: usize,
    pub angle_degrees: f64,
}

pub fn sample_mc_signal(spec: &McSignalSpec, library: &ClusterLibrary, seed: u64) -> Result<McRealization> {
    spec.validate()?;
    if library.is_empty() {
        return Err(Error::EmptyLibrary);
    }
    let mut r = rng::rng(seed);
    let cluster_index = r.gen_range(0..library.len());
    let (a0, a1) = spec.rotation;
    let angle_degrees = if a1 > a0 { r.gen_range(a0..a1) } else { a0 };
    let (c0, c1) = spec.contrast;
    let contrast = if c1 > c0 { r.gen_range(c0..=c1) } else { c0 };
    let source = library.get(cluster_index);
    if spec.crop_size > source.width() || spec.crop_size > source.height() {
        return Err(shape(
            format!("crop no larger than {}x{}", source.width(), source.height()),
            format!("{0}x{0}", spec.crop_size),
        ));
    }
    let signal = rotate_zero_pad(source, angle_degrees).center_crop(spec.crop_size, spec.crop_size)?;
    Ok(McRealization {
        signal,
        contrast,
        cluster_index,
        angle_degrees,
    })
}

/// `background ⊙ (contrast·signal + 1)`.
pub fn apply_mc(background: &ImageGrid, signal: &ImageGrid, contrast: f64) -> Result<ImageGrid> {
    let c = contrast as f32;
    background.zip_map(signal, |b, s| b * (c * s + 1.0))
}

pub fn insert_mc_cluster(
    background: &ImageGrid,
    spec: &McSignalSpec,
    library: &ClusterLibrary,
    seed: u64,
) -> Result<ImageGrid> {
    let draw = sample_mc_signal(spec, library, seed)?;
    apply_mc(background, &draw.signal, draw.contrast)
}
