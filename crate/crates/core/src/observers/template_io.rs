//! Linear templates on disk.
//!
//! Layout (little-endian): magic `LTPL`, `u32` version, a kind byte
//! (0 Hotelling, 1 regularized, 2 channelized), `f64` threshold (NaN when
//! absent), `u64` kept rank, `u64` length, then the weights as `f32`.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::linear::{LinearTemplate, TemplateKind};

const MAGIC: &[u8; 4] = b"LTPL";
const VERSION: u32 = 1;

pub fn write_template(w: &mut impl Write, template: &LinearTemplate) -> Result<()> {
    let (kind, lambda, rank) = match template.kind {
        TemplateKind::Hotelling => (0u8, f64::NAN, template.len()),
        TemplateKind::Regularized { lambda, rank } => (1, lambda, rank),
        TemplateKind::Channelized { lambda, rank } => (2, lambda.unwrap_or(f64::NAN), rank),
    };
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[kind])?;
    w.write_all(&lambda.to_le_bytes())?;
    w.write_all(&(rank as u64).to_le_bytes())?;
    w.write_all(&(template.len() as u64).to_le_bytes())?;
    for &v in &template.weights {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    Ok(())
}

fn read_array<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)
        .map_err(|e| Error::Format(format!("truncated template: {e}")))?;
    Ok(b)
}

pub fn read_template(mut r: impl Read) -> Result<LinearTemplate> {
    if &read_array::<4>(&mut r)? != MAGIC {
        return Err(Error::Format("not a template file".into()));
    }
    let version = u32::from_le_bytes(read_array(&mut r)?);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported template version {version}")));
    }
    let [kind] = read_array::<1>(&mut r)?;
    let lambda = f64::from_le_bytes(read_array(&mut r)?);
    let rank = u64::from_le_bytes(read_array(&mut r)?) as usize;
    let len = u64::from_le_bytes(read_array(&mut r)?) as usize;
    let kind = match kind {
        0 => TemplateKind::Hotelling,
        1 => TemplateKind::Regularized { lambda, rank },
        2 => TemplateKind::Channelized {
            lambda: (!lambda.is_nan()).then_some(lambda),
            rank,
        },
        k => return Err(Error::Format(format!("unknown template kind {k}"))),
    };
    let mut weights = Vec::with_capacity(len.min(1 << 24));
    for _ in 0..len {
        weights.push(f32::from_le_bytes(read_array(&mut r)?) as f64);
    }
    Ok(LinearTemplate { weights, kind })
}

pub fn save_template(path: &Path, template: &LinearTemplate) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_template(&mut f, template)?;
    f.flush()?;
    Ok(())
}

pub fn load_template(path: &Path) -> Result<LinearTemplate> {
    read_template(std::io::BufReader::new(std::fs::File::open(path)?))
}
