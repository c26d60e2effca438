//! Signal and model file formats.
//!
//! Signals are header-less little-endian IEEE-754 doubles. Mixtures use the
//! plain-text `weight mean variance` row format from the core crate.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use ampud_core::gm::GaussianMixture;
use anyhow::{Context, Result};

pub fn read_f64le(path: &Path) -> Result<Vec<f64>> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .with_context(|| format!("reading {}", path.display()))?;
    anyhow::ensure!(
        bytes.len() % 8 == 0,
        "{}: length {} is not a multiple of 8",
        path.display(),
        bytes.len()
    );
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn write_f64le(path: &Path, data: &[f64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(data.len() * 8);
    for v in data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::File::create(path)
        .and_then(|mut f| f.write_all(&bytes))
        .with_context(|| format!("writing {}", path.display()))
}

pub fn read_gm(path: &Path) -> Result<GaussianMixture> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    GaussianMixture::from_text(&text)
        .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

pub fn write_gm(path: &Path, gm: &GaussianMixture) -> Result<()> {
    fs::write(path, gm.to_text()).with_context(|| format!("writing {}", path.display()))
}

/// dB values are printed with four decimals; infinities keep their textual
/// form so exact recoveries stay recognizable.
pub fn fmt_db(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.4}")
    }
}
