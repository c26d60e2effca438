//! Minimal WAV ingestion: mono 16-bit PCM only.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

fn u16_at(bytes: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([bytes[at], bytes[at + 1]])
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
}

/// Reads a mono 16-bit PCM WAV file and scales samples to `[-1, 1)` by
/// dividing by 32768.
pub fn read_wav_mono16(path: &Path) -> Result<Vec<f64>> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        bail!("{}: not a RIFF/WAVE file", path.display());
    }

    let mut fmt: Option<(u16, u16, u16)> = None; // (format tag, channels, bits)
    let mut data: Option<&[u8]> = None;
    let mut at = 12;
    while at + 8 <= bytes.len() {
        let id = &bytes[at..at + 4];
        let size = u32_at(&bytes, at + 4) as usize;
        let body_start = at + 8;
        let body_end = body_start.checked_add(size).filter(|&e| e <= bytes.len());
        let Some(body_end) = body_end else {
            bail!("{}: truncated chunk {:?}", path.display(), id);
        };
        match id {
            b"fmt " => {
                if size < 16 {
                    bail!("{}: fmt chunk too short", path.display());
                }
                fmt = Some((
                    u16_at(&bytes, body_start),
                    u16_at(&bytes, body_start + 2),
                    u16_at(&bytes, body_start + 14),
                ));
            }
            b"data" => data = Some(&bytes[body_start..body_end]),
            _ => {}
        }
        // Chunks are word-aligned.
        at = body_end + size % 2;
    }

    let (tag, channels, bits) = fmt.context("missing fmt chunk")?;
    if tag != 1 {
        bail!("{}: only PCM (format 1) is supported, got {tag}", path.display());
    }
    if channels != 1 {
        bail!("{}: only mono is supported, got {channels} channels", path.display());
    }
    if bits != 16 {
        bail!("{}: only 16-bit samples are supported, got {bits}", path.display());
    }
    let data = data.context("missing data chunk")?;
    Ok(data
        .chunks_exact(2)
        .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / 32768.0)
        .collect())
}

/// Writes a mono 16-bit PCM WAV (used by tests and for round-tripping
/// reconstructions back to audio).
pub fn write_wav_mono16(path: &Path, samples: &[f64], sample_rate: u32) -> Result<()> {
    let mut pcm = Vec::with_capacity(samples.len() * 2);
    for &s in samples {
        let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        pcm.extend_from_slice(&v.to_le_bytes());
    }
    let data_len = pcm.len() as u32;
    let mut out = Vec::with_capacity(44 + pcm.len());
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    out.extend_from_slice(&pcm);
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}
