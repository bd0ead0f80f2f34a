use std::collections::BTreeMap;
use std::path::Path;

use super::bytes::{Reader, Writer};
use super::config::{InputMode, ModelConfig};
use super::params::ModelParams;
use super::tensor::Tensor;
use crate::train::OptState;
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"TSCK";
pub const CHECKPOINT_VERSION: u32 = 1;

/// A trained (or in-training) model with everything needed to resume.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams<f32>,
    pub opt: Option<OptState>,
    /// Optimizer steps taken.
    pub step: u64,
    /// Completed epochs.
    pub epoch: u64,
    pub class_names: Vec<String>,
    /// Free-form settings (feature pipeline, window length, ...).
    pub metadata: BTreeMap<String, String>,
}

impl Checkpoint {
    pub fn new(params: ModelParams<f32>, class_names: Vec<String>) -> Self {
        Checkpoint {
            params,
            opt: None,
            step: 0,
            epoch: 0,
            class_names,
            metadata: BTreeMap::new(),
        }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.params.config
    }
}

pub(crate) fn write_config(w: &mut Writer, c: &ModelConfig) {
    w.u8(match c.input_mode {
        InputMode::Continuous => 0,
        InputMode::Tokens => 1,
    });
    for v in [c.input_dim, c.seq_len, c.hidden, c.layers, c.heads, c.classes] {
        w.u32(v as u32);
    }
    w.u8(c.use_positional as u8);
    w.u8(c.share_layers as u8);
    w.f64(c.dropout);
}

pub(crate) fn read_config(r: &mut Reader) -> Result<ModelConfig> {
    let input_mode = match r.u8()? {
        0 => InputMode::Continuous,
        1 => InputMode::Tokens,
        _ => return Err(r.err("unknown input mode")),
    };
    let mut dims = [0usize; 6];
    for d in &mut dims {
        *d = r.u32()? as usize;
    }
    let cfg = ModelConfig {
        input_mode,
        input_dim: dims[0],
        seq_len: dims[1],
        hidden: dims[2],
        layers: dims[3],
        heads: dims[4],
        classes: dims[5],
        use_positional: r.u8()? != 0,
        share_layers: r.u8()? != 0,
        dropout: r.f64()?,
    };
    cfg.validate()?;
    Ok(cfg)
}

pub(crate) fn write_strings(w: &mut Writer, items: &[String]) {
    w.u32(items.len() as u32);
    for s in items {
        w.str(s);
    }
}

pub(crate) fn read_strings(r: &mut Reader) -> Result<Vec<String>> {
    let n = r.u32()? as usize;
    (0..n).map(|_| r.str()).collect()
}

fn write_tensor(w: &mut Writer, name: &str, t: &Tensor<f32>) {
    w.str(name);
    w.u32(t.shape.len() as u32);
    for &d in &t.shape {
        w.u32(d as u32);
    }
    w.f32s(&t.data);
}

fn read_into(r: &mut Reader, name: &str, dst: &mut Tensor<f32>) -> Result<()> {
    let found = r.str()?;
    if found != name {
        return Err(r.err(&format!("expected tensor `{name}`, found `{found}`")));
    }
    let nd = r.u32()? as usize;
    let dims = (0..nd).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
    if dims != dst.shape {
        return Err(r.err(&format!("tensor `{name}` has shape {dims:?}, config implies {:?}", dst.shape)));
    }
    dst.data = r.f32s(dst.numel())?;
    Ok(())
}

/// Named tensor table: learnable tensors then buffers.
pub(crate) fn write_params(w: &mut Writer, p: &ModelParams<f32>) {
    let all: Vec<_> = p.learnable().into_iter().chain(p.buffers()).collect();
    w.u32(all.len() as u32);
    for (name, t) in all {
        write_tensor(w, &name, t);
    }
}

pub(crate) fn read_params(r: &mut Reader, cfg: &ModelConfig) -> Result<ModelParams<f32>> {
    let mut p = ModelParams::<f32>::zeros(cfg)?;
    let count = r.u32()? as usize;
    let expected = p.learnable().len() + p.buffers().len();
    if count != expected {
        return Err(r.err(&format!("{count} tensors stored, config implies {expected}")));
    }
    for (name, t) in p.learnable_mut() {
        read_into(r, &name, t)?;
    }
    for (name, t) in p.buffers_mut() {
        read_into(r, &name, t)?;
    }
    Ok(p)
}

pub fn encode_checkpoint(ck: &Checkpoint) -> Vec<u8> {
    let mut w = Writer::default();
    w.bytes(CHECKPOINT_MAGIC);
    w.u32(CHECKPOINT_VERSION);
    write_config(&mut w, ck.config());
    write_strings(&mut w, &ck.class_names);
    w.u32(ck.metadata.len() as u32);
    for (k, v) in &ck.metadata {
        w.str(k);
        w.str(v);
    }
    write_params(&mut w, &ck.params);
    match &ck.opt {
        None => w.u8(0),
        Some(opt) => {
            w.u8(1);
            w.u64(opt.step);
            w.u32(opt.m.len() as u32);
            for t in opt.m.iter().chain(&opt.v) {
                w.f32s(&t.data);
            }
        }
    }
    w.u64(ck.step);
    w.u64(ck.epoch);
    w.buf
}

pub fn decode_checkpoint(data: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader::new(data, "checkpoint");
    if r.take(4)? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic, not a model checkpoint".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let cfg = read_config(&mut r)?;
    let class_names = read_strings(&mut r)?;
    let mut metadata = BTreeMap::new();
    for _ in 0..r.u32()? {
        let k = r.str()?;
        metadata.insert(k, r.str()?);
    }
    let params = read_params(&mut r, &cfg)?;
    let opt = match r.u8()? {
        0 => None,
        1 => {
            let step = r.u64()?;
            let n = r.u32()? as usize;
            let shapes: Vec<Vec<usize>> = params.learnable().iter().map(|(_, t)| t.shape.clone()).collect();
            if n != shapes.len() {
                return Err(r.err("optimizer state does not match parameter table"));
            }
            let read_set = |r: &mut Reader| -> Result<Vec<Tensor<f32>>> {
                shapes
                    .iter()
                    .map(|s| Ok(Tensor::from_vec(s, r.f32s(s.iter().product())?)))
                    .collect()
            };
            let m = read_set(&mut r)?;
            let v = read_set(&mut r)?;
            Some(OptState { m, v, step })
        }
        _ => return Err(r.err("bad optimizer flag")),
    };
    let step = r.u64()?;
    let epoch = r.u64()?;
    r.finish()?;
    Ok(Checkpoint {
        params,
        opt,
        step,
        epoch,
        class_names,
        metadata,
    })
}

pub fn save_checkpoint(ck: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_checkpoint(ck))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let data = std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingPath(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    decode_checkpoint(&data)
}
