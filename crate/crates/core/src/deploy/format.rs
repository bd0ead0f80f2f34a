//! `TSCQ` quantized model files.
//!
//! Layout: magic, u32 version, model config, class names, metadata pairs,
//! then a tensor table. Each entry is a name, a dtype tag (0 = f32,
//! 1 = i8), the shape, and for i8 an f32 scale before the raw bytes.

use std::collections::BTreeMap;
use std::path::Path;

use super::{is_linear_weight, QTensor, QuantizedParams};
use crate::model::bytes::{Reader, Writer};
use crate::model::{read_config, read_strings, write_config, write_strings, ModelParams, Tensor};
use crate::{Error, Result};

pub const QUANTIZED_MAGIC: &[u8; 4] = b"TSCQ";
pub const QUANTIZED_VERSION: u32 = 1;

const DTYPE_F32: u8 = 0;
const DTYPE_I8: u8 = 1;

/// Quantized weights plus the labels and settings needed for inference.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedModel {
    pub params: QuantizedParams,
    pub class_names: Vec<String>,
    pub metadata: BTreeMap<String, String>,
}

fn write_shape(w: &mut Writer, shape: &[usize]) {
    w.u32(shape.len() as u32);
    for &d in shape {
        w.u32(d as u32);
    }
}

pub fn encode_quantized(m: &QuantizedModel) -> Vec<u8> {
    let p = &m.params;
    let mut w = Writer::default();
    w.bytes(QUANTIZED_MAGIC);
    w.u32(QUANTIZED_VERSION);
    write_config(&mut w, p.config());
    write_strings(&mut w, &m.class_names);
    w.u32(m.metadata.len() as u32);
    for (k, v) in &m.metadata {
        w.str(k);
        w.str(v);
    }
    let all: Vec<_> = p.float.learnable().into_iter().chain(p.float.buffers()).collect();
    w.u32(all.len() as u32);
    let mut q = p.weights.iter();
    for (name, t) in all {
        w.str(&name);
        if is_linear_weight(&name) {
            let (_, qt) = q.next().expect("one quantized tensor per linear weight");
            w.u8(DTYPE_I8);
            write_shape(&mut w, &qt.shape);
            w.f32(qt.scale);
            w.bytes(&qt.data.iter().map(|&v| v as u8).collect::<Vec<u8>>());
        } else {
            w.u8(DTYPE_F32);
            write_shape(&mut w, &t.shape);
            w.f32s(&t.data);
        }
    }
    w.buf
}

fn read_entry(r: &mut Reader, name: &str, shape: &[usize], want: u8) -> Result<()> {
    let found = r.str()?;
    if found != name {
        return Err(r.err(&format!("expected tensor `{name}`, found `{found}`")));
    }
    let dtype = r.u8()?;
    if dtype != want {
        return Err(r.err(&format!("tensor `{name}` has dtype tag {dtype}, expected {want}")));
    }
    let nd = r.u32()? as usize;
    let dims = (0..nd).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
    if dims != shape {
        return Err(r.err(&format!("tensor `{name}` has shape {dims:?}, config implies {shape:?}")));
    }
    Ok(())
}

pub fn decode_quantized(data: &[u8]) -> Result<QuantizedModel> {
    let mut r = Reader::new(data, "quantized model");
    if r.take(4)? != QUANTIZED_MAGIC {
        return Err(Error::Checkpoint("bad magic, not a quantized model".into()));
    }
    let version = r.u32()?;
    if version != QUANTIZED_VERSION {
        return Err(Error::Version {
            found: version,
            expected: QUANTIZED_VERSION,
        });
    }
    let cfg = read_config(&mut r)?;
    let class_names = read_strings(&mut r)?;
    let mut metadata = BTreeMap::new();
    for _ in 0..r.u32()? {
        let k = r.str()?;
        metadata.insert(k, r.str()?);
    }
    let mut float = ModelParams::<f32>::zeros(&cfg)?;
    let count = r.u32()? as usize;
    let expected = float.learnable().len() + float.buffers().len();
    if count != expected {
        return Err(r.err(&format!("{count} tensors stored, config implies {expected}")));
    }
    let mut weights = Vec::new();
    let tensors: Vec<(String, &mut Tensor<f32>)> = float.learnable_mut();
    for (name, t) in tensors {
        if is_linear_weight(&name) {
            read_entry(&mut r, &name, &t.shape, DTYPE_I8)?;
            let scale = r.f32()?;
            if !(scale > 0.0) || !scale.is_finite() {
                return Err(r.err(&format!("tensor `{name}` has invalid scale {scale}")));
            }
            let data: Vec<i8> = r.take(t.numel())?.iter().map(|&b| b as i8).collect();
            if data.iter().any(|&v| v == i8::MIN) {
                return Err(r.err(&format!("tensor `{name}` holds -128")));
            }
            weights.push((
                name,
                QTensor {
                    shape: t.shape.clone(),
                    data,
                    scale,
                },
            ));
            t.data = Vec::new();
        } else {
            read_entry(&mut r, &name, &t.shape, DTYPE_F32)?;
            t.data = r.f32s(t.numel())?;
        }
    }
    for (name, t) in float.buffers_mut() {
        read_entry(&mut r, &name, &t.shape, DTYPE_F32)?;
        t.data = r.f32s(t.numel())?;
    }
    r.finish()?;
    Ok(QuantizedModel {
        params: QuantizedParams { float, weights },
        class_names,
        metadata,
    })
}

pub fn save_quantized(m: &QuantizedModel, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_quantized(m))?;
    Ok(())
}

pub fn load_quantized(path: impl AsRef<Path>) -> Result<QuantizedModel> {
    let path = path.as_ref();
    let data = std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingPath(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    decode_quantized(&data)
}

impl QuantizedModel {
    /// Quantizes a checkpoint, keeping its labels and metadata.
    pub fn from_checkpoint(ck: &crate::model::Checkpoint) -> Result<Self> {
        Ok(QuantizedModel {
            params: super::quantize_dynamic(&ck.params)?,
            class_names: ck.class_names.clone(),
            metadata: ck.metadata.clone(),
        })
    }
}
