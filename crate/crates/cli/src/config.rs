//! Effective configuration: flags over the TOML config file over defaults.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use crate::GlobalArgs;
use toolrag::agent::{RepeatedCallPolicy, SessionConfig};
use toolrag::retrieval::{Backend, RetrievalConfig, DEFAULT_K};

/// Everything a config file may set. Keys mirror the long flag names.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub registry: Option<PathBuf>,
    pub adapter: Option<String>,
    pub backend: Option<String>,
    pub k: Option<usize>,
    pub max_iters: Option<usize>,
    pub policy: Option<String>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub fixtures_only: Option<bool>,
    pub cache_dir: Option<PathBuf>,
    pub fixture_root: Option<PathBuf>,
    /// Bench modes.
    pub modes: Option<Vec<String>>,
    /// Bench permutation; presence enables permuted settings.
    pub permute: Option<String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: FileConfig = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        // relative paths in the file are relative to the file
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.registry, &mut cfg.out, &mut cfg.cache_dir, &mut cfg.fixture_root]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(a) = &mut cfg.adapter {
            if let Some(rest) = a.strip_prefix("scripted:") {
                if Path::new(rest).is_relative() {
                    *a = format!("scripted:{}", base.join(rest).display());
                }
            }
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AdapterSpec {
    Scripted(PathBuf),
    Http {
        url: String,
        model: String,
        key_env: Option<String>,
    },
    Oracle,
}

impl AdapterSpec {
    pub fn parse(text: &str) -> Result<Self> {
        if text == "oracle" {
            return Ok(AdapterSpec::Oracle);
        }
        if let Some(path) = text.strip_prefix("scripted:") {
            if path.is_empty() {
                bail!("scripted adapter needs a script path");
            }
            return Ok(AdapterSpec::Scripted(path.into()));
        }
        if let Some(rest) = text.strip_prefix("http:") {
            let mut parts = rest.split('#');
            let url = parts.next().unwrap_or_default();
            let model = parts.next().ok_or_else(|| anyhow!("http adapter needs `#<model>` after the URL"))?;
            let key_env = parts.next().map(str::to_string);
            if url.is_empty() || model.is_empty() {
                bail!("http adapter needs a URL and a model name");
            }
            return Ok(AdapterSpec::Http {
                url: url.into(),
                model: model.into(),
                key_env,
            });
        }
        bail!("unknown adapter `{text}`; expected scripted:<path>, http:<url>#<model> or oracle")
    }
}

/// Resolved options, echoed into reports.
#[derive(Debug, Clone, Serialize)]
pub struct Effective {
    pub registry: Option<PathBuf>,
    pub adapter: Option<String>,
    pub backend: String,
    pub k: usize,
    pub max_iters: usize,
    pub policy: RepeatedCallPolicy,
    pub out: PathBuf,
    pub seed: u64,
    pub workers: usize,
    pub fixtures_only: bool,
    pub cache_dir: PathBuf,
    pub fixture_root: PathBuf,
}

impl Effective {
    pub fn resolve(flags: &GlobalArgs, file: &FileConfig) -> Result<Self> {
        let registry = flags.registry.clone().or_else(|| file.registry.clone());
        let fixture_root = flags
            .fixture_root
            .clone()
            .or_else(|| file.fixture_root.clone())
            .or_else(|| registry.as_ref().and_then(|r| r.parent().map(Path::to_path_buf)))
            .unwrap_or_else(|| PathBuf::from("."));
        let cache_dir = flags
            .cache_dir
            .clone()
            .or_else(|| file.cache_dir.clone())
            .unwrap_or_else(|| fixture_root.join("http"));
        let policy_text = flags.policy.clone().or_else(|| file.policy.clone());
        let policy = match policy_text.as_deref() {
            None => RepeatedCallPolicy::default(),
            Some(p) => serde_json::from_value(serde_json::Value::String(p.to_string()))
                .map_err(|_| anyhow!("unknown repeated-call policy `{p}`; expected cached, reject or allow"))?,
        };
        let eff = Effective {
            registry,
            adapter: flags.adapter.clone().or_else(|| file.adapter.clone()),
            backend: flags
                .backend
                .clone()
                .or_else(|| file.backend.clone())
                .unwrap_or_else(|| "bm25".into()),
            k: flags.k.or(file.k).unwrap_or(DEFAULT_K),
            max_iters: flags.max_iters.or(file.max_iters).unwrap_or(SessionConfig::default().max_iterations),
            policy,
            out: flags.out.clone().or_else(|| file.out.clone()).unwrap_or_else(|| PathBuf::from("out")),
            seed: flags.seed.or(file.seed).unwrap_or(0),
            workers: flags.workers.or(file.workers).unwrap_or(1),
            fixtures_only: flags.fixtures_only || file.fixtures_only.unwrap_or(false),
            cache_dir,
            fixture_root,
        };
        // surface bad values before any work starts
        eff.session_config()?;
        if eff.workers == 0 {
            bail!("--workers must be at least 1");
        }
        Ok(eff)
    }

    pub fn session_config(&self) -> Result<SessionConfig> {
        let backend: Backend = self.backend.parse().map_err(|e| anyhow!("{e}"))?;
        let config = SessionConfig {
            retrieval: RetrievalConfig {
                backend,
                k: self.k,
                ..RetrievalConfig::default()
            },
            max_iterations: self.max_iters,
            repeated_call_policy: self.policy,
            ..SessionConfig::default()
        };
        config.validate().map_err(|e| anyhow!("{e}"))?;
        Ok(config)
    }

    pub fn adapter(&self) -> Result<AdapterSpec> {
        let text = self
            .adapter
            .as_deref()
            .ok_or_else(|| anyhow!("no model adapter given (use --adapter)"))?;
        AdapterSpec::parse(text)
    }
}
