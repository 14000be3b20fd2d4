//! The single pipeline configuration file (TOML) and its environment overrides.
//!
//! Every key has a default, unknown keys are rejected, and any key can be
//! overridden with `VESSELTREE_<SECTION>__<KEY>=<value>`, where the value is
//! read as a TOML literal (falling back to a plain string).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filtering::FilterConfig;
use crate::geodesic::GeodesicConfig;
use crate::phantom::{NoiseSpec, PhantomKind, PhantomParams};
use crate::slogs::DictionaryConfig;

pub const CONFIG_VERSION: u32 = 1;
pub const ENV_PREFIX: &str = "VESSELTREE_";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhantomSource {
    Tube,
    Helix,
    Bifurcation,
    Kissing,
    Hcp,
    /// Random bifurcating tree.
    Tree,
}

impl PhantomSource {
    pub fn shape(self) -> Option<PhantomKind> {
        Some(match self {
            PhantomSource::Tube => PhantomKind::Tube,
            PhantomSource::Helix => PhantomKind::Helix,
            PhantomSource::Bifurcation => PhantomKind::Bifurcation,
            PhantomSource::Kissing => PhantomKind::Kissing,
            PhantomSource::Hcp => PhantomKind::Hcp,
            PhantomSource::Tree => return None,
        })
    }
}

impl std::str::FromStr for PhantomSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "tree" {
            return Ok(PhantomSource::Tree);
        }
        let kind: PhantomKind = s.parse().map_err(|_| Error::Config {
            field: "phantom.kind".into(),
            reason: format!("unknown phantom kind `{s}`"),
        })?;
        Ok(match kind {
            PhantomKind::Tube => PhantomSource::Tube,
            PhantomKind::Helix => PhantomSource::Helix,
            PhantomKind::Bifurcation => PhantomSource::Bifurcation,
            PhantomKind::Kissing => PhantomSource::Kissing,
            PhantomKind::Hcp => PhantomSource::Hcp,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseLevel {
    #[serde(rename = "none")]
    None,
    N1,
    N2,
}

impl NoiseLevel {
    pub fn spec(self) -> NoiseSpec {
        match self {
            NoiseLevel::None => NoiseSpec::NONE,
            NoiseLevel::N1 => NoiseSpec::N1,
            NoiseLevel::N2 => NoiseSpec::N2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NoiseLevel::None => "none",
            NoiseLevel::N1 => "N1",
            NoiseLevel::N2 => "N2",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhantomConfig {
    pub kind: PhantomSource,
    pub noise: NoiseLevel,
    /// Terminal count of generated trees.
    pub n_terminals: usize,
    pub shape: PhantomParams,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        PhantomConfig { kind: PhantomSource::Tube, noise: NoiseLevel::None, n_terminals: 8, shape: PhantomParams::default() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IoConfig {
    /// Input of `filter` (a volume), `extract` (a filter output directory)
    /// or `eval` (a tree graph).
    pub input: Option<PathBuf>,
    /// Ground-truth graph for `eval`.
    pub gt: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    /// Per-scale maps and the distance and region volumes.
    pub debug_dumps: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub version: u32,
    pub rng_seed: u64,
    /// Block-level filtering threads; outputs do not depend on it.
    pub workers: usize,
    /// Evaluation tolerance in voxels.
    pub rho: f64,
    pub dictionary: DictionaryConfig,
    pub filter: FilterConfig,
    pub geodesic: GeodesicConfig,
    pub phantom: PhantomConfig,
    pub io: IoConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            version: CONFIG_VERSION,
            rng_seed: 1,
            workers: 1,
            rho: 2.0,
            dictionary: DictionaryConfig::default(),
            filter: FilterConfig::default(),
            geodesic: GeodesicConfig::default(),
            phantom: PhantomConfig::default(),
            io: IoConfig::default(),
        }
    }
}

fn as_config(e: Error) -> Error {
    match e {
        Error::InvalidParameter { field, reason } => Error::Config { field, reason },
        other => other,
    }
}

impl PipelineConfig {
    /// Parses TOML text, applies `overrides` (dotted key, raw value) and validates.
    pub fn from_toml(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut table: toml::Table =
            text.parse().map_err(|e: toml::de::Error| Error::Config { field: "<file>".into(), reason: one_line(&e.to_string()) })?;
        for (key, raw) in overrides {
            set_key(&mut table, key, raw)?;
        }
        let cfg: PipelineConfig = serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| {
            let path = e.path().to_string();
            Error::Config { field: path, reason: one_line(&e.into_inner().to_string()) }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path` (or starts from defaults) and applies the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
            None => String::new(),
        };
        Self::from_toml(&text, &env_overrides(std::env::vars()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config { field: "version".into(), reason: format!("expected {CONFIG_VERSION}, got {}", self.version) });
        }
        if self.workers == 0 {
            return Err(Error::Config { field: "workers".into(), reason: "must be at least 1".into() });
        }
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return Err(Error::Config { field: "rho".into(), reason: format!("{} must be non-negative", self.rho) });
        }
        if !(3..=30).contains(&self.phantom.n_terminals) {
            return Err(Error::Config {
                field: "phantom.n_terminals".into(),
                reason: format!("{} not in [3, 30]", self.phantom.n_terminals),
            });
        }
        self.dictionary.validate().map_err(as_config)?;
        self.filter.validate(self.dictionary.support).map_err(|e| as_config(prefix(e, "filter")))?;
        self.geodesic.validate().map_err(as_config)?;
        self.phantom.shape.validate().map_err(|e| as_config(prefix(e, "phantom.shape")))?;
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Rewrites `phantom.x` style fields to `<section>.x` where a module
/// validator named only its own prefix.
fn prefix(e: Error, section: &str) -> Error {
    match e {
        Error::InvalidParameter { field, reason } => {
            let leaf = field.rsplit('.').next().unwrap_or(&field).to_string();
            Error::InvalidParameter { field: format!("{section}.{leaf}"), reason }
        }
        other => other,
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// `VESSELTREE_FILTER__QUANTILE=0.9` becomes `("filter.quantile", "0.9")`.
pub fn env_overrides(vars: impl Iterator<Item = (String, String)>) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = vars
        .filter_map(|(k, v)| {
            let rest = k.strip_prefix(ENV_PREFIX)?;
            Some((rest.to_lowercase().split("__").collect::<Vec<_>>().join("."), v))
        })
        .collect();
    out.sort();
    out
}

fn set_key(table: &mut toml::Table, key: &str, raw: &str) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config { field: key.into(), reason: "malformed override key".into() });
    }
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config { field: key.into(), reason: format!("`{p}` is not a section") })?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(r: Result<PipelineConfig>) -> String {
        match r {
            Err(Error::Config { field, .. }) => field,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn defaults_round_trip() {
        let cfg = PipelineConfig::from_toml("", &[]).unwrap();
        assert_eq!(cfg, PipelineConfig::default());
        let back = PipelineConfig::from_toml(&cfg.to_toml(), &[]).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn sections_and_overrides() {
        let text = "rng_seed = 7\n[filter]\nquantile = 0.95\n[phantom]\nkind = \"tree\"\nnoise = \"N2\"\n";
        let cfg = PipelineConfig::from_toml(text, &[("geodesic.epsilon_c".into(), "0.01".into())]).unwrap();
        assert_eq!((cfg.rng_seed, cfg.filter.quantile, cfg.geodesic.epsilon_c), (7, 0.95, 0.01));
        assert_eq!((cfg.phantom.kind, cfg.phantom.noise), (PhantomSource::Tree, NoiseLevel::N2));
        let over = env_overrides(
            vec![("VESSELTREE_FILTER__QUANTILE".to_string(), "0.9".to_string()), ("HOME".into(), "/".into())].into_iter(),
        );
        assert_eq!(over, vec![("filter.quantile".to_string(), "0.9".to_string())]);
        let cfg = PipelineConfig::from_toml(text, &over).unwrap();
        assert_eq!(cfg.filter.quantile, 0.9);
        let path = PipelineConfig::from_toml("", &[("io.output_dir".into(), "/tmp/x y".into())]).unwrap();
        assert_eq!(path.io.output_dir, Some(PathBuf::from("/tmp/x y")));
    }

    #[test]
    fn bad_configs_name_their_field() {
        assert_eq!(field(PipelineConfig::from_toml("[filter]\nquantil = 0.9\n", &[])), "filter.quantil");
        assert_eq!(field(PipelineConfig::from_toml("[filter]\nquantile = \"x\"\n", &[])), "filter.quantile");
        assert_eq!(field(PipelineConfig::from_toml("[filter]\nquantile = 1.5\n", &[])), "filter.quantile");
        assert_eq!(field(PipelineConfig::from_toml("colour = 1\n", &[])), "colour");
        assert_eq!(field(PipelineConfig::from_toml("version = 2\n", &[])), "version");
        assert_eq!(field(PipelineConfig::from_toml("[geodesic]\nepsilon_c = -1.0\n", &[])), "geodesic.epsilon_c");
        assert_eq!(field(PipelineConfig::from_toml("[phantom.shape]\ndims = 8\n", &[])), "phantom.shape.dims");
        assert_eq!(field(PipelineConfig::from_toml("[dictionary]\nsupport = 4\n", &[])), "dictionary.support");
        assert_eq!(field(PipelineConfig::from_toml("workers = 0\n", &[])), "workers");
        assert_eq!(field(PipelineConfig::from_toml("[[broken", &[])), "<file>");
    }
}
