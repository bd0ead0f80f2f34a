//! `TSCV` vocabulary files: magic, u32 curve_len, u32 resolution, u32 top_k,
//! u8 mode, u32 count, then `count` records of `curve_len` bytes in rank order.

use std::io::{Read, Write};

use super::{CurveMode, CurveSpec, CurveVocab};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"TSCV";

pub fn write_vocab<W: Write>(mut w: W, vocab: &CurveVocab) -> Result<()> {
    let spec = &vocab.spec;
    w.write_all(MAGIC)?;
    w.write_all(&(spec.curve_len as u32).to_le_bytes())?;
    w.write_all(&spec.resolution.to_le_bytes())?;
    w.write_all(&(spec.top_k as u32).to_le_bytes())?;
    w.write_all(&[spec.mode.code()])?;
    w.write_all(&(vocab.curves.len() as u32).to_le_bytes())?;
    for c in &vocab.curves {
        w.write_all(c)?;
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|_| Error::data(format!("vocab file truncated reading {what}")))?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_vocab<R: Read>(mut r: R) -> Result<CurveVocab> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::data("vocab file truncated in magic"))?;
    if &magic != MAGIC {
        return Err(Error::data("bad vocab file magic"));
    }
    let curve_len = read_u32(&mut r, "curve length")? as usize;
    let resolution = read_u32(&mut r, "resolution")?;
    let top_k = read_u32(&mut r, "top_k")? as usize;
    let mut mode = [0u8; 1];
    r.read_exact(&mut mode)
        .map_err(|_| Error::data("vocab file truncated reading mode"))?;
    let spec = CurveSpec {
        curve_len,
        resolution,
        top_k,
        mode: CurveMode::from_code(mode[0])?,
    };
    spec.validate()?;
    let count = read_u32(&mut r, "count")? as usize;
    let mut curves = Vec::with_capacity(count.min(1 << 20));
    for i in 0..count {
        let mut c = vec![0u8; curve_len];
        r.read_exact(&mut c)
            .map_err(|_| Error::data(format!("vocab file truncated in record {i}")))?;
        curves.push(c.into_boxed_slice());
    }
    CurveVocab::from_ranked(spec, curves)
}

pub fn save_vocab(path: impl AsRef<std::path::Path>, vocab: &CurveVocab) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_vocab(&mut w, vocab)?;
    w.flush()?;
    Ok(())
}

pub fn load_vocab(path: impl AsRef<std::path::Path>) -> Result<CurveVocab> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingPath(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    read_vocab(std::io::BufReader::new(f))
}
