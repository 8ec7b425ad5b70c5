//! Binary network checkpoints.
//!
//! Layout (little-endian): magic `OLNN`, `u32` version, `u32` input
//! channels, `u32` layer count, one descriptor per layer (a tag byte plus
//! its shape fields), `u64` parameter count, the parameters as `f32`, then a
//! flag byte and, when set, the Adam step count, learning rate and both
//! moment vectors as `f32`.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::adam::Adam;
use super::layers::{Conv2d, Dense, Layer, ResidualBlock};
use super::network::Network;

const MAGIC: &[u8; 4] = b"OLNN";
const VERSION: u32 = 1;

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub network: Network<f32>,
    pub optimizer: Option<Adam>,
}

fn fmt(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

pub fn write_checkpoint(w: &mut impl Write, net: &Network<f32>, optimizer: Option<&Adam>) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(net.input_channels as u32).to_le_bytes())?;
    w.write_all(&(net.layers.len() as u32).to_le_bytes())?;
    for layer in &net.layers {
        match layer {
            Layer::Conv(c) => {
                w.write_all(&[1])?;
                for v in [c.in_channels, c.out_channels, c.kernel] {
                    w.write_all(&(v as u32).to_le_bytes())?;
                }
            }
            Layer::Relu => w.write_all(&[2])?,
            Layer::Residual(r) => {
                w.write_all(&[3])?;
                for v in [r.channels(), r.conv1.kernel] {
                    w.write_all(&(v as u32).to_le_bytes())?;
                }
            }
            Layer::GlobalAvgPool => w.write_all(&[4])?,
            Layer::Dense(d) => {
                w.write_all(&[5])?;
                for v in [d.inputs, d.outputs] {
                    w.write_all(&(v as u32).to_le_bytes())?;
                }
            }
            Layer::Sigmoid => w.write_all(&[6])?,
            Layer::Affine { scale, shift } => {
                w.write_all(&[7])?;
                w.write_all(&scale.to_le_bytes())?;
                w.write_all(&shift.to_le_bytes())?;
            }
        }
    }
    w.write_all(&(net.param_count() as u64).to_le_bytes())?;
    for p in net.params() {
        write_f32s(w, p.iter().copied())?;
    }
    match optimizer {
        None => w.write_all(&[0])?,
        Some(a) => {
            w.write_all(&[1])?;
            w.write_all(&a.t.to_le_bytes())?;
            w.write_all(&a.learning_rate.to_le_bytes())?;
            for moments in [&a.m, &a.v] {
                for t in moments {
                    write_f32s(w, t.iter().map(|&v| v as f32))?;
                }
            }
        }
    }
    Ok(())
}

fn write_f32s(w: &mut impl Write, values: impl Iterator<Item = f32>) -> Result<()> {
    let bytes: Vec<u8> = values.flat_map(|v| v.to_le_bytes()).collect();
    w.write_all(&bytes)?;
    Ok(())
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.inner.read_exact(&mut b).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                fmt("checkpoint is truncated")
            } else {
                Error::Io(e)
            }
        })?;
        Ok(b)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes::<1>()?[0])
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.bytes()?) as usize)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let mut buf = vec![0u8; n * 4];
        self.inner
            .read_exact(&mut buf)
            .map_err(|_| fmt("checkpoint is truncated"))?;
        Ok(buf.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect())
    }
}

pub fn read_checkpoint(r: impl Read) -> Result<Checkpoint> {
    let mut r = Reader { inner: r };
    if &r.bytes::<4>()? != MAGIC {
        return Err(fmt("not a network checkpoint (bad magic)"));
    }
    let version = r.u32()?;
    if version != VERSION as usize {
        return Err(fmt(format!("unsupported checkpoint version {version}")));
    }
    let input_channels = r.u32()?;
    let n_layers = r.u32()?;
    let mut layers = Vec::with_capacity(n_layers.min(4096));
    for _ in 0..n_layers {
        let layer = match r.u8()? {
            1 => {
                let (i, o, k) = (r.u32()?, r.u32()?, r.u32()?);
                Layer::Conv(Conv2d::zeros(i, o, k)?)
            }
            2 => Layer::Relu,
            3 => {
                let (c, k) = (r.u32()?, r.u32()?);
                Layer::Residual(ResidualBlock::zeros(c, k)?)
            }
            4 => Layer::GlobalAvgPool,
            5 => {
                let (i, o) = (r.u32()?, r.u32()?);
                Layer::Dense(Dense::zeros(i, o)?)
            }
            6 => Layer::Sigmoid,
            7 => Layer::Affine {
                scale: r.f64()?,
                shift: r.f64()?,
            },
            t => return Err(fmt(format!("unknown layer tag {t}"))),
        };
        layers.push(layer);
    }
    let mut network = Network::new(input_channels, layers);
    let count = r.u64()? as usize;
    if count != network.param_count() {
        return Err(fmt(format!(
            "parameter count {count} does not match the layer list ({})",
            network.param_count()
        )));
    }
    for p in network.params_mut() {
        let values = r.f32s(p.len())?;
        p.copy_from_slice(&values);
    }
    let optimizer = match r.u8()? {
        0 => None,
        1 => {
            let mut adam = Adam::new(&network, 0.0)?;
            adam.t = r.u64()?;
            adam.learning_rate = r.f64()?;
            let sizes: Vec<usize> = network.params().iter().map(|p| p.len()).collect();
            for k in 0..2 {
                for (i, &n) in sizes.iter().enumerate() {
                    let v: Vec<f64> = r.f32s(n)?.into_iter().map(f64::from).collect();
                    if k == 0 {
                        adam.m[i] = v;
                    } else {
                        adam.v[i] = v;
                    }
                }
            }
            Some(adam)
        }
        f => return Err(fmt(format!("bad optimizer flag {f}"))),
    };
    Ok(Checkpoint { network, optimizer })
}

pub fn save_checkpoint(path: &Path, net: &Network<f32>, optimizer: Option<&Adam>) -> Result<()> {
    let mut buf = Vec::new();
    write_checkpoint(&mut buf, net, optimizer)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path)?;
    read_checkpoint(bytes.as_slice())
}
