//! Labeled image files.
//!
//! Layout, little-endian: magic `TBIQ`, `u32` version, `u64` image count,
//! `u32` width, `u32` height, one label byte per image, then the pixels of
//! every image in row-major order as `f32`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use sriq_core::sim::LabeledSet;
use sriq_core::ImageGrid;

use crate::error::{file_error, ExperimentError, Result};

const MAGIC: &[u8; 4] = b"TBIQ";
const VERSION: u32 = 1;
const FIXED_HEADER: u64 = 24;

fn format_error(msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Format(msg.into())
}

/// Size in bytes of a file holding `count` images of `width`×`height`.
pub fn file_size(count: usize, width: usize, height: usize) -> u64 {
    FIXED_HEADER + count as u64 + (count * width * height) as u64 * 4
}

pub fn write_dataset(w: &mut impl Write, set: &LabeledSet) -> Result<()> {
    let (width, height) = set.dims().unwrap_or((0, 0));
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(set.len() as u64).to_le_bytes())?;
    w.write_all(&(width as u32).to_le_bytes())?;
    w.write_all(&(height as u32).to_le_bytes())?;
    w.write_all(&set.labels)?;
    for img in &set.images {
        let bytes: Vec<u8> = img
            .as_slice()
            .iter()
            .flat_map(|v| v.to_le_bytes())
            .collect();
        w.write_all(&bytes)?;
    }
    Ok(())
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => {
            format_error(format!("truncated file while reading {what}"))
        }
        _ => ExperimentError::Io(e),
    })
}

fn read_u32(r: &mut impl Read, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_dataset(r: &mut impl Read) -> Result<LabeledSet> {
    let mut magic = [0u8; 4];
    read_exact(r, &mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(format_error(format!(
            "bad magic {magic:?}, expected {MAGIC:?}"
        )));
    }
    let version = read_u32(r, "version")?;
    if version != VERSION {
        return Err(format_error(format!(
            "unsupported version {version}, expected {VERSION}"
        )));
    }
    let mut b = [0u8; 8];
    read_exact(r, &mut b, "image count")?;
    let count = usize::try_from(u64::from_le_bytes(b))
        .map_err(|_| format_error("image count overflows"))?;
    let width = read_u32(r, "width")? as usize;
    let height = read_u32(r, "height")? as usize;
    let pixels = width
        .checked_mul(height)
        .ok_or_else(|| format_error("image dimensions overflow"))?;
    if count > 0 && pixels == 0 {
        return Err(format_error("images have zero size"));
    }

    let mut labels = vec![0u8; count];
    read_exact(r, &mut labels, "labels")?;
    let mut images = Vec::with_capacity(count);
    let mut buf = vec![0u8; pixels * 4];
    for i in 0..count {
        read_exact(r, &mut buf, &format!("image {i}"))?;
        let values = buf
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        images.push(ImageGrid::from_vec(width, height, values)?);
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(format_error("trailing bytes after the last image"));
    }
    Ok(LabeledSet::new(images, labels)?)
}

pub fn save_dataset(path: &Path, set: &LabeledSet) -> Result<()> {
    let f = File::create(path).map_err(file_error(path))?;
    let mut w = BufWriter::new(f);
    write_dataset(&mut w, set)?;
    w.flush().map_err(file_error(path))
}

pub fn load_dataset(path: &Path) -> Result<LabeledSet> {
    let f = File::open(path).map_err(file_error(path))?;
    read_dataset(&mut BufReader::new(f))
}
