use std::io::{Read, Write};

use super::mel::{mel_power, power_to_db};
use super::{FeatureKind, FeatureMatrix, SpectrogramConfig};
use crate::{AudioClip, Error, Result};

/// Orthonormal DCT-II basis, `n_out x n_in`, row-major.
pub fn dct_matrix(n_in: usize, n_out: usize) -> Vec<f64> {
    let mut m = vec![0.0; n_out * n_in];
    let n = n_in as f64;
    for k in 0..n_out {
        let s = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
        for i in 0..n_in {
            m[k * n_in + i] =
                s * (std::f64::consts::PI * k as f64 * (2 * i + 1) as f64 / (2.0 * n)).cos();
        }
    }
    m
}

/// Applies the orthonormal DCT-II to each row of a log-mel matrix.
pub fn mfcc_from_log_mel(log_mel: &[f64], n_mels: usize, n_coeffs: usize) -> Vec<f64> {
    let dct = dct_matrix(n_mels, n_coeffs);
    let dct = &dct;
    log_mel
        .chunks_exact(n_mels)
        .flat_map(|frame| {
            (0..n_coeffs).map(move |k| {
                dct[k * n_mels..(k + 1) * n_mels]
                    .iter()
                    .zip(frame)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
            })
        })
        .collect()
}

/// MFCCs: DCT-II of the log-mel spectrum, first `n_coeffs` coefficients.
///
/// The log-mel step always uses dB scaling regardless of `cfg.log_scale`.
pub fn mfcc(samples: &[f32], cfg: &SpectrogramConfig, n_coeffs: usize) -> Result<FeatureMatrix> {
    if n_coeffs == 0 || n_coeffs > cfg.n_mels {
        return Err(Error::config(format!(
            "n_coeffs {n_coeffs} must be in 1..={}",
            cfg.n_mels
        )));
    }
    let mut mel = mel_power(samples, cfg)?;
    power_to_db(&mut mel);
    let coeffs = mfcc_from_log_mel(&mel, cfg.n_mels, n_coeffs);
    Ok(FeatureMatrix::new(
        cfg.num_frames(samples.len()),
        n_coeffs,
        coeffs.into_iter().map(|v| v as f32).collect(),
        FeatureKind::Mfcc,
        cfg.sample_rate as f32 / cfg.hop_length as f32,
    ))
}

/// Keeps frames `0, n, 2n, ...`; output has `ceil(L / n)` rows.
pub fn downsample_columns(f: &FeatureMatrix, n: usize) -> Result<FeatureMatrix> {
    if n == 0 {
        return Err(Error::config("downsample factor must be at least 1"));
    }
    let rows: Vec<usize> = (0..f.rows).step_by(n).collect();
    let mut data = Vec::with_capacity(rows.len() * f.cols);
    for &r in &rows {
        data.extend_from_slice(f.row(r));
    }
    Ok(FeatureMatrix::new(
        rows.len(),
        f.cols,
        data,
        f.kind,
        f.frame_rate / n as f32,
    ))
}

/// Lays the first `l * d` samples out row-major as an `l x d` matrix.
pub fn reshape_amplitudes(clip: &AudioClip, l: usize, d: usize) -> Result<FeatureMatrix> {
    let need = l * d;
    if l == 0 || d == 0 {
        return Err(Error::config("reshape dimensions must be positive"));
    }
    if clip.samples.len() < need {
        return Err(Error::data(format!(
            "reshape to {l}x{d} needs {need} samples, clip has {}",
            clip.samples.len()
        )));
    }
    Ok(FeatureMatrix::new(
        l,
        d,
        clip.samples[..need].to_vec(),
        FeatureKind::AmplitudeReshape,
        clip.sample_rate as f32 / d as f32,
    ))
}

/// Min-max scales the whole matrix into [0, 1]; constant matrices become 0.
pub fn normalize01(f: &FeatureMatrix) -> FeatureMatrix {
    let (lo, hi) = f
        .data
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    let data = if f.data.is_empty() || range <= 0.0 {
        vec![0.0; f.data.len()]
    } else {
        f.data.iter().map(|&v| ((v - lo) / range).clamp(0.0, 1.0)).collect()
    };
    FeatureMatrix { data, ..f.clone() }
}

const FEATURE_MAGIC: &[u8; 4] = b"TSFM";

/// Writes `TSFM | u32 L | u32 F | u8 kind | f32 LE row-major`.
pub fn write_features<W: Write>(mut w: W, f: &FeatureMatrix) -> Result<()> {
    w.write_all(FEATURE_MAGIC)?;
    w.write_all(&(f.rows as u32).to_le_bytes())?;
    w.write_all(&(f.cols as u32).to_le_bytes())?;
    w.write_all(&[f.kind.code()])?;
    for v in &f.data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Reads a `TSFM` dump. The frame rate is not stored and comes back as 0.
pub fn read_features<R: Read>(mut r: R) -> Result<FeatureMatrix> {
    let mut head = [0u8; 13];
    r.read_exact(&mut head)
        .map_err(|_| Error::data("feature file truncated in header"))?;
    if &head[..4] != FEATURE_MAGIC {
        return Err(Error::data("bad feature file magic"));
    }
    let rows = u32::from_le_bytes(head[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize;
    let kind = FeatureKind::from_code(head[12])?;
    let mut bytes = vec![0u8; rows * cols * 4];
    r.read_exact(&mut bytes)
        .map_err(|_| Error::data("feature file truncated in payload"))?;
    let data = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    Ok(FeatureMatrix::new(rows, cols, data, kind, 0.0))
}
