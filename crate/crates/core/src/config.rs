//! Run configuration: one TOML file plus command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::debug::DebugConfig;
use crate::error::{Error, Result};
use crate::nn::TrainConfig;
use crate::search::SearchConfig;

pub const CONFIG_FORMAT_VERSION: u32 = 1;

/// Overrides `paths.output_dir` when set.
pub const OUTPUT_DIR_ENV: &str = "QIDFAIR_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub dataset: PathBuf,
    pub schema: PathBuf,
    /// Defaults to `model.json` inside the output directory.
    pub model: Option<PathBuf>,
    pub output_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            dataset: PathBuf::from("data.csv"),
            schema: PathBuf::from("schema.toml"),
            model: None,
            output_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// 60 s searches.
    Desk,
    /// 900 s searches.
    Short,
    /// 3600 s searches.
    Long,
}

impl Preset {
    pub fn timeout_secs(self) -> f64 {
        match self {
            Preset::Desk => 60.0,
            Preset::Short => 900.0,
            Preset::Long => 3600.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub format_version: u32,
    pub seed: u64,
    /// Independent search runs, averaged in the summary.
    pub repeats: usize,
    pub workers: usize,
    pub paths: Paths,
    pub train: TrainConfig,
    pub search: SearchConfig,
    pub debug: DebugConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            format_version: CONFIG_FORMAT_VERSION,
            seed: 0,
            repeats: 1,
            workers: 1,
            paths: Paths::default(),
            train: TrainConfig::default(),
            search: SearchConfig::default(),
            debug: DebugConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::Parse {
            field: "config".into(),
            message: e.to_string(),
        })?;
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
            field: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        if cfg.format_version != CONFIG_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                what: "config file",
                found: cfg.format_version,
                expected: CONFIG_FORMAT_VERSION,
            });
        }
        Ok(cfg)
    }

    /// Loads `path`; relative paths inside are taken relative to its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(base) = path.parent() {
            cfg.paths.rebase(base);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Copies the shared seed and worker count into the stage configs.
    pub fn resolve(&mut self) {
        self.train.seed = self.seed;
        self.search.seed = self.seed;
        self.search.workers = self.workers;
        self.debug.workers = self.workers;
        self.debug.epsilon = self.search.epsilon;
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV) {
            self.paths.output_dir = PathBuf::from(dir);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 || self.workers == 0 {
            return Err(Error::Config("repeats and workers must be positive".into()));
        }
        self.train.validate()?;
        self.search.validate()?;
        self.debug.validate()
    }

    pub fn model_path(&self) -> PathBuf {
        self.paths
            .model
            .clone()
            .unwrap_or_else(|| self.paths.output_dir.join("model.json"))
    }

    pub fn search_dir(&self) -> PathBuf {
        self.paths.output_dir.join("search")
    }

    pub fn run_dir(&self, run: usize) -> PathBuf {
        self.search_dir().join(format!("run_{run:03}"))
    }
}

impl Paths {
    fn rebase(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.dataset);
        join(&mut self.schema);
        join(&mut self.output_dir);
        if let Some(m) = self.model.as_mut() {
            join(m);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        assert_eq!(cfg.search.max_global, 10);
        assert_eq!(cfg.search.max_local, 1000);
        assert_eq!(cfg.search.epsilon, 0.025);
        assert_eq!(cfg.debug.epsilon1, 1e-7);
        assert_eq!(cfg.debug.epsilon2, 0.05);
        assert_eq!(cfg.debug.top_k, 3);
        assert_eq!(cfg.train.hidden_layers, vec![64, 32, 16, 8, 4]);
    }

    #[test]
    fn partial_file_and_field_errors() {
        let cfg = RunConfig::from_toml("seed = 7\n[search]\ntimeout_secs = 5.0\n").unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.search.timeout_secs, 5.0);
        assert_eq!(cfg.search.max_local, 1000);

        match RunConfig::from_toml("[search]\nmax_local = \"many\"\n") {
            Err(Error::Parse { field, .. }) => assert_eq!(field, "search.max_local"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            RunConfig::from_toml("format_version = 2\n"),
            Err(Error::FormatVersion { found: 2, .. })
        ));
    }

    #[test]
    fn paths_are_relative_to_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(&path, "[paths]\ndataset = \"d.csv\"\noutput_dir = \"/abs/out\"\n").unwrap();
        let cfg = RunConfig::load(&path).unwrap();
        assert_eq!(cfg.paths.dataset, dir.path().join("d.csv"));
        assert_eq!(cfg.paths.output_dir, PathBuf::from("/abs/out"));
        assert_eq!(cfg.model_path(), PathBuf::from("/abs/out/model.json"));
    }

    #[test]
    fn validation() {
        let mut cfg = RunConfig::default();
        cfg.search.timeout_secs = -1.0;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        assert_eq!(Preset::Long.timeout_secs(), 3600.0);
    }
}
