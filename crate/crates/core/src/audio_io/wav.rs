//! RIFF/WAVE reading and writing (PCM16 and IEEE float32, mono or stereo).

use std::fs;
use std::path::Path;

use super::AudioClip;
use crate::{Error, Result};

const FORMAT_PCM: u16 = 1;
const FORMAT_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Decode {
                offset: self.pos,
                msg: format!("unexpected end of file reading {what}"),
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

struct Format {
    tag: u16,
    channels: u16,
    sample_rate: u32,
    bits: u16,
}

/// Decodes a WAV byte buffer into a mono clip.
///
/// PCM16 samples are divided by 32768; stereo is mixed down by the mean of
/// the two channels. The header sample rate is kept as is.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioClip> {
    let mut cur = Cursor { bytes, pos: 0 };
    let riff = cur.take(4, "RIFF tag")?;
    if riff != b"RIFF" {
        return Err(Error::Decode {
            offset: 0,
            msg: "missing RIFF tag".into(),
        });
    }
    cur.u32("RIFF size")?;
    let wave = cur.take(4, "WAVE tag")?;
    if wave != b"WAVE" {
        return Err(Error::Decode {
            offset: 8,
            msg: "missing WAVE tag".into(),
        });
    }

    let mut format: Option<Format> = None;
    loop {
        let chunk_start = cur.pos;
        let id = cur.take(4, "chunk id")?;
        let size = cur.u32("chunk size")? as usize;
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(Error::Decode {
                        offset: chunk_start,
                        msg: format!("fmt chunk too small ({size} bytes)"),
                    });
                }
                let body = cur.take(size, "fmt chunk")?;
                let mut tag = u16::from_le_bytes([body[0], body[1]]);
                let channels = u16::from_le_bytes([body[2], body[3]]);
                let sample_rate = u32::from_le_bytes([body[4], body[5], body[6], body[7]]);
                let bits = u16::from_le_bytes([body[14], body[15]]);
                if tag == FORMAT_EXTENSIBLE {
                    if size < 26 {
                        return Err(Error::Decode {
                            offset: chunk_start,
                            msg: "extensible fmt chunk missing subformat".into(),
                        });
                    }
                    tag = u16::from_le_bytes([body[24], body[25]]);
                }
                format = Some(Format {
                    tag,
                    channels,
                    sample_rate,
                    bits,
                });
            }
            b"data" => {
                let fmt = format.ok_or_else(|| Error::Decode {
                    offset: chunk_start,
                    msg: "data chunk before fmt chunk".into(),
                })?;
                // Tolerate a data size running past EOF (streamed writers).
                let avail = size.min(bytes.len() - cur.pos);
                let body = cur.take(avail, "data chunk")?;
                return decode_samples(body, &fmt, chunk_start);
            }
            _ => {
                cur.take(size + (size & 1), "chunk body")?;
            }
        }
        if size & 1 == 1 && id == b"fmt " {
            cur.take(1, "pad byte")?;
        }
    }
}

fn decode_samples(body: &[u8], fmt: &Format, offset: usize) -> Result<AudioClip> {
    if fmt.channels == 0 || fmt.channels > 2 {
        return Err(Error::UnsupportedFormat(format!(
            "{} channels (only mono and stereo are supported)",
            fmt.channels
        )));
    }
    if fmt.sample_rate == 0 {
        return Err(Error::Decode {
            offset,
            msg: "sample rate is zero".into(),
        });
    }
    let interleaved: Vec<f32> = match (fmt.tag, fmt.bits) {
        (FORMAT_PCM, 16) => body
            .chunks_exact(2)
            .map(|b| i16::from_le_bytes([b[0], b[1]]) as f32 / 32768.0)
            .collect(),
        (FORMAT_FLOAT, 32) => body
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect(),
        (tag, bits) => {
            return Err(Error::UnsupportedFormat(format!(
                "format tag {tag} with {bits} bits per sample"
            )))
        }
    };
    if let Some(i) = interleaved.iter().position(|s| !s.is_finite()) {
        return Err(Error::Decode {
            offset: offset + 8 + i * 4,
            msg: "non-finite float sample".into(),
        });
    }
    let samples = if fmt.channels == 2 {
        interleaved
            .chunks_exact(2)
            .map(|lr| 0.5 * (lr[0] + lr[1]))
            .collect()
    } else {
        interleaved
    };
    Ok(AudioClip::new(samples, fmt.sample_rate))
}

/// Encodes a clip as mono PCM16. Samples are scaled by 32768 and clamped.
pub fn encode_wav(clip: &AudioClip) -> Vec<u8> {
    let data_len = clip.samples.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&clip.sample_rate.to_le_bytes());
    out.extend_from_slice(&(clip.sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in &clip.samples {
        let v = (s as f64 * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingPath(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    Ok(decode_wav(&bytes)?.with_source(path.display().to_string()))
}

pub fn write_wav(path: impl AsRef<Path>, clip: &AudioClip) -> Result<()> {
    fs::write(path, encode_wav(clip))?;
    Ok(())
}
