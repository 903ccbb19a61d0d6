//! JSON run configuration for multi-corpus jobs. Relative paths are resolved
//! against the directory holding the config file.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;

use mslayout::corpus::{CategoryPolicy, CorpusId, LabelLevel};
use mslayout::eval::GeometryKind;
use mslayout::export::ExportFormat;
use mslayout::io::SourceFormat;
use mslayout::pipeline::{FilterRules, SplitSpec};

use crate::UsageError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusConfig {
    pub id: CorpusId,
    #[serde(default)]
    pub format: Option<SourceFormat>,
    pub inputs: Vec<PathBuf>,
    #[serde(default)]
    pub split_manifest: Option<PathBuf>,
    #[serde(default)]
    pub policy: CategoryPolicy,
    /// Replaces the top-level filters for this corpus.
    #[serde(default)]
    pub filters: Option<FilterRules>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportConfig {
    pub format: ExportFormat,
    #[serde(default = "leaf_only")]
    pub levels: Vec<String>,
    #[serde(default = "default_precision")]
    pub precision: usize,
}

fn leaf_only() -> Vec<String> {
    vec!["leaf".into()]
}

fn default_precision() -> usize {
    6
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    #[serde(default)]
    pub geometry: Option<GeometryKind>,
    #[serde(default)]
    pub level: Option<String>,
    #[serde(default)]
    pub split: Option<String>,
    #[serde(default)]
    pub max_dets: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub corpora: Vec<CorpusConfig>,
    #[serde(default)]
    pub ontology: Option<PathBuf>,
    #[serde(default)]
    pub filters: FilterRules,
    #[serde(default)]
    pub split: Option<SplitSpec>,
    #[serde(default)]
    pub exports: Vec<ExportConfig>,
    #[serde(default)]
    pub eval: Option<EvalSection>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read(path).map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_slice(&text)
            .map_err(|e| UsageError(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for c in &mut cfg.corpora {
            c.inputs.iter_mut().for_each(resolve);
            c.split_manifest.iter_mut().for_each(resolve);
        }
        cfg.ontology.iter_mut().for_each(resolve);
        cfg.output.iter_mut().for_each(resolve);
        cfg.check().with_context(|| format!("config {}", path.display()))?;
        Ok(cfg)
    }

    fn check(&self) -> Result<()> {
        let mut ids = BTreeSet::new();
        for c in &self.corpora {
            if !ids.insert(c.id) {
                return Err(UsageError(format!("corpus {} declared twice", c.id)).into());
            }
            for p in c.inputs.iter().chain(&c.split_manifest) {
                if !p.exists() {
                    return Err(UsageError(format!("{} does not exist", p.display())).into());
                }
            }
        }
        if let Some(o) = &self.ontology {
            if !o.exists() {
                return Err(UsageError(format!("{} does not exist", o.display())).into());
            }
        }
        for e in &self.exports {
            for l in &e.levels {
                l.parse::<LabelLevel>()?;
            }
        }
        Ok(())
    }
}
