//! FEDAE binary model container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! b"FEDAE" | version: u32 | layer_count: u32 |
//!   per layer: fan_in: u32 | fan_out: u32 | weight (row-major f64) | bias (f64)
//! ```

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::model::{AutoencoderModel, LayerWeights};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 5] = b"FEDAE";
pub const FORMAT_VERSION: u32 = 1;

pub fn write_model<W: Write>(model: &AutoencoderModel, mut out: W) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&(model.layers().len() as u32).to_le_bytes())?;
    for layer in model.layers() {
        out.write_all(&(layer.fan_in() as u32).to_le_bytes())?;
        out.write_all(&(layer.fan_out() as u32).to_le_bytes())?;
        // iter() walks a standard-layout array in row-major order
        for v in layer.weight.iter().chain(layer.bias.iter()) {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn to_bytes(model: &AutoencoderModel) -> Vec<u8> {
    let mut buf = Vec::with_capacity(13 + model.param_count() * 8 + model.layers().len() * 8);
    write_model(model, &mut buf).expect("writing to a Vec cannot fail");
    buf
}

fn read_exact<R: Read>(input: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    input.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => {
            Error::Format(format!("truncated while reading {what}"))
        }
        _ => Error::Io(e),
    })
}

fn read_u32<R: Read>(input: &mut R, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(input, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64s<R: Read>(input: &mut R, n: usize, what: &str) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; n * 8];
    read_exact(input, &mut bytes, what)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

pub fn read_model<R: Read>(mut input: R) -> Result<AutoencoderModel> {
    let mut magic = [0u8; 5];
    read_exact(&mut input, &mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic, not a FEDAE file".into()));
    }
    let version = read_u32(&mut input, "version")?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported format version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let count = read_u32(&mut input, "layer count")? as usize;
    // Each layer needs at least 8 header bytes; guards against absurd counts.
    if count > 4096 {
        return Err(Error::Format(format!("implausible layer count {count}")));
    }
    let mut layers = Vec::with_capacity(count);
    for i in 0..count {
        let fan_in = read_u32(&mut input, "layer header")? as usize;
        let fan_out = read_u32(&mut input, "layer header")? as usize;
        let weights = read_f64s(&mut input, fan_in * fan_out, &format!("layer {i} weights"))?;
        let bias = read_f64s(&mut input, fan_out, &format!("layer {i} bias"))?;
        layers.push(LayerWeights {
            weight: Array2::from_shape_vec((fan_in, fan_out), weights)
                .expect("length matches shape"),
            bias: Array1::from(bias),
        });
    }
    let mut trailing = [0u8; 1];
    if input.read(&mut trailing)? != 0 {
        return Err(Error::Format("trailing bytes after last layer".into()));
    }
    AutoencoderModel::from_layers(layers)
}

pub fn from_bytes(bytes: &[u8]) -> Result<AutoencoderModel> {
    read_model(bytes)
}

pub fn save(model: &AutoencoderModel, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_model(model, std::io::BufWriter::new(file))
}

pub fn load(path: &Path) -> Result<AutoencoderModel> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let file = std::fs::File::open(path)?;
    read_model(std::io::BufReader::new(file))
}
