//! Flat `key = value` experiment configuration.
//!
//! Resolution order is: built-in defaults, then the config file, then
//! explicit command-line flags. The fully resolved configuration is echoed
//! into the output directory so every run is reproducible from that file
//! plus nothing else.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ampud_core::amp::{Damping, UdAmpConfig};
use ampud_core::gm::GaussianMixture;
use ampud_core::source::{IidSourceSpec, MarkovSourceSpec, SignalModel};
use ampud_core::ud::{UdConfig, UdVariant};
use anyhow::{bail, Context, Result};

/// Parsed key-value file plus override layer.
#[derive(Debug, Clone, Default)]
pub struct ConfigMap {
    values: BTreeMap<String, String>,
}

impl ConfigMap {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("config line {}: expected `key = value`, got `{raw}`", lineno + 1);
            };
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(ConfigMap { values })
    }

    pub fn set(&mut self, key: &str, value: String) {
        self.values.insert(key.to_string(), value);
    }

    /// Sets the key only when the flag was actually given.
    pub fn set_opt<T: ToString>(&mut self, key: &str, value: &Option<T>) {
        if let Some(v) = value {
            self.set(key, v.to_string());
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.values.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse::<T>()
                .map_err(|_| anyhow::anyhow!("config key `{key}`: cannot parse `{v}`")),
        }
    }

    pub fn get_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| anyhow::anyhow!("config key `{key}`: cannot parse `{v}`")),
        }
    }

    pub fn get_list_f64(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.values.get(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| anyhow::anyhow!("config key `{key}`: bad number `{t}`"))
                })
                .collect(),
        }
    }

    /// Records the effective value so the echoed config is complete.
    pub fn echo_back(&mut self, key: &str, value: String) {
        self.values.insert(key.to_string(), value);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.values {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

/// Source selection shared by the subcommands.
#[derive(Debug, Clone)]
pub struct SourceConfig {
    pub name: String,
    pub model: SignalModel,
}

/// Builds the signal model from `source` plus its parameter keys. Defaults
/// follow the standard test sources: the sparse Markov chains with 3% (or
/// 30% for the Rademacher one) occupancy and the 0.03-sparse Laplace.
pub fn resolve_source(map: &ConfigMap) -> Result<SourceConfig> {
    let name = map.raw("source").unwrap_or("sparse-laplace").to_string();
    let model = match name.as_str() {
        "mgauss" => {
            let p01 = map.get("p01", 3.0 / 970.0)?;
            let p10 = map.get("p10", 0.1)?;
            let mu = map.get("mu_x", 0.0)?;
            let var = map.get("sigma_x_sq", 1.0)?;
            SignalModel::Markov(MarkovSourceSpec::mgauss(p01, p10, mu, var).map_err(anyhow::Error::msg)?)
        }
        "munif" => {
            let p01 = map.get("p01", 3.0 / 970.0)?;
            let p10 = map.get("p10", 0.1)?;
            let lo = map.get("unif_lo", 0.0)?;
            let hi = map.get("unif_hi", 1.0)?;
            SignalModel::Markov(MarkovSourceSpec::munif(p01, p10, lo, hi).map_err(anyhow::Error::msg)?)
        }
        "mrad" => {
            let p01 = map.get("p01", 3.0 / 70.0)?;
            let p10 = map.get("p10", 0.1)?;
            SignalModel::Markov(MarkovSourceSpec::mrad(p01, p10).map_err(anyhow::Error::msg)?)
        }
        "m4" => {
            let err = map.get("error_prob", 0.03)?;
            SignalModel::Markov(MarkovSourceSpec::m4(err).map_err(anyhow::Error::msg)?)
        }
        "sparse-laplace" => {
            let sparsity = map.get("sparsity", 0.03)?;
            SignalModel::Iid(IidSourceSpec::sparse_laplace(sparsity).map_err(anyhow::Error::msg)?)
        }
        other => {
            if let Some(path) = other.strip_prefix("gm:") {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading mixture {path}"))?;
                let gm = GaussianMixture::from_text(&text).map_err(anyhow::Error::msg)?;
                SignalModel::Iid(IidSourceSpec::ExplicitGm(gm))
            } else {
                bail!("unknown source `{other}`");
            }
        }
    };
    Ok(SourceConfig { name, model })
}

/// Universal-denoiser and AMP settings from the map, starting from the
/// variant's standard defaults.
pub fn resolve_ud_amp(map: &ConfigMap) -> Result<UdAmpConfig> {
    let variant = match map.raw("variant").unwrap_or("ud1") {
        "ud1" => UdVariant::Ud1,
        "ud2" => UdVariant::Ud2,
        other => bail!("unknown variant `{other}` (expected ud1 or ud2)"),
    };
    let mut cfg = UdAmpConfig::for_variant(variant);
    cfg.ud = resolve_ud(map, variant)?;
    cfg.t_max = map.get("t_max", cfg.t_max)?;
    match map.raw("damping") {
        None => {}
        Some("adaptive") => cfg.damping = Damping::adaptive_default(),
        Some(v) => {
            let lambda: f64 = v
                .parse()
                .map_err(|_| anyhow::anyhow!("damping: expected `adaptive` or a number, got `{v}`"))?;
            cfg.damping = Damping::fixed(lambda).map_err(anyhow::Error::msg)?;
        }
    }
    Ok(cfg)
}

pub fn resolve_ud(map: &ConfigMap, variant: UdVariant) -> Result<UdConfig> {
    let mut ud = match variant {
        UdVariant::Ud1 => UdConfig::ud1(),
        UdVariant::Ud2 => UdConfig::ud2(),
    };
    ud.k = map.get("k", ud.k)?;
    ud.b1 = map.get("b1", ud.b1)?;
    ud.b2 = map.get("b2", ud.b2)?;
    ud.l_init = map.get("l_init", ud.l_init)?;
    ud.min_fit = map.get("min_fit", ud.min_fit)?;
    ud.kl_stop = map.get("kl_stop", ud.kl_stop)?;
    ud.kl_samples = map.get("kl_samples", ud.kl_samples)?;
    Ok(ud)
}

/// Echoes every effective setting back into the map for provenance.
pub fn echo_ud_amp(map: &mut ConfigMap, cfg: &UdAmpConfig) {
    map.echo_back(
        "variant",
        match cfg.ud.variant {
            UdVariant::Ud1 => "ud1".into(),
            UdVariant::Ud2 => "ud2".into(),
        },
    );
    map.echo_back("k", cfg.ud.k.to_string());
    map.echo_back("b1", cfg.ud.b1.to_string());
    map.echo_back("b2", cfg.ud.b2.to_string());
    map.echo_back("l_init", cfg.ud.l_init.to_string());
    map.echo_back("min_fit", cfg.ud.min_fit.to_string());
    map.echo_back("kl_stop", cfg.ud.kl_stop.to_string());
    map.echo_back("kl_samples", cfg.ud.kl_samples.to_string());
    map.echo_back("t_max", cfg.t_max.to_string());
    map.echo_back(
        "damping",
        match cfg.damping {
            Damping::Fixed { lambda } => lambda.to_string(),
            Damping::Adaptive { .. } => "adaptive".into(),
        },
    );
}

/// Default in-memory budget for caching the dense measurement matrix.
pub const DEFAULT_MATRIX_BUDGET_MB: usize = 1600;

pub fn matrix_budget_bytes(map: &ConfigMap) -> Result<usize> {
    Ok(map.get("matrix_budget_mb", DEFAULT_MATRIX_BUDGET_MB)? * 1024 * 1024)
}

pub fn out_dir(map: &ConfigMap, default: &str) -> PathBuf {
    PathBuf::from(map.raw("out_dir").unwrap_or(default))
}
