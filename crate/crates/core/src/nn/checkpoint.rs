//! Binary weight checkpoints.
//!
//! Layout, all integers and reals little-endian:
//!
//! ```text
//! b"AEMODEL1"
//! u64 layer count L
//! L x (u64 in_dim, u64 out_dim)
//! L x (weights: out_dim * in_dim f64 row-major, bias: out_dim f64)
//! ```
//!
//! Column spans are not stored; they come from the data schema on load.

use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

use super::autoencoder::{AutoencoderModel, Dense};
use super::linalg::Matrix;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"AEMODEL1";

fn io_err(e: std::io::Error) -> Error {
    Error::io("<checkpoint>", e)
}

pub fn write_checkpoint<W: Write>(model: &AutoencoderModel, mut out: W) -> Result<()> {
    out.write_all(MAGIC).map_err(io_err)?;
    let layers = model.layers();
    out.write_all(&(layers.len() as u64).to_le_bytes()).map_err(io_err)?;
    for layer in layers {
        out.write_all(&(layer.in_dim() as u64).to_le_bytes()).map_err(io_err)?;
        out.write_all(&(layer.out_dim() as u64).to_le_bytes()).map_err(io_err)?;
    }
    for layer in layers {
        for v in layer.weight.as_slice().iter().chain(&layer.bias) {
            out.write_all(&v.to_le_bytes()).map_err(io_err)?;
        }
    }
    out.flush().map_err(io_err)
}

fn read_u64<R: Read>(input: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    input
        .read_exact(&mut buf)
        .map_err(|_| Error::Format("truncated checkpoint".into()))?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64s<R: Read>(input: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    input
        .read_exact(&mut buf)
        .map_err(|_| Error::Format("truncated checkpoint".into()))?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn read_checkpoint<R: Read>(mut input: R, spans: Vec<Range<usize>>) -> Result<AutoencoderModel> {
    let mut magic = [0u8; 8];
    input
        .read_exact(&mut magic)
        .map_err(|_| Error::Format("truncated checkpoint".into()))?;
    if &magic != MAGIC {
        return Err(Error::Format("not an AEMODEL1 checkpoint".into()));
    }
    let count = read_u64(&mut input)? as usize;
    if count > 1024 {
        return Err(Error::Format(format!("implausible layer count {count}")));
    }
    let mut dims = Vec::with_capacity(count);
    for _ in 0..count {
        dims.push((read_u64(&mut input)? as usize, read_u64(&mut input)? as usize));
    }
    let mut layers = Vec::with_capacity(count);
    for (in_dim, out_dim) in dims {
        let weight = read_f64s(&mut input, in_dim * out_dim)?;
        let bias = read_f64s(&mut input, out_dim)?;
        layers.push(Dense {
            weight: Matrix::from_vec(out_dim, in_dim, weight),
            bias,
        });
    }
    AutoencoderModel::from_layers(layers, spans)
}

pub fn save_checkpoint(model: &AutoencoderModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_checkpoint(model, std::io::BufWriter::new(file))
}

pub fn load_checkpoint(path: impl AsRef<Path>, spans: Vec<Range<usize>>) -> Result<AutoencoderModel> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(std::io::BufReader::new(file), spans)
}
