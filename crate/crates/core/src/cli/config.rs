use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::dataset::Layout;
use crate::error::{Error, Result};
use crate::model::{ModelConfig, Padding, Pooling};
use crate::scattering::ScatteringConfig;
use crate::training::TrainConfig;

/// Network shape; the scattering geometry lives in its own section.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub conv_filters: Vec<usize>,
    pub kernel: usize,
    pub padding: Padding,
    pub pool_after_block: Vec<Pooling>,
    pub embedding_dim: usize,
    pub normalize_embeddings: bool,
}

impl Default for ModelSection {
    fn default() -> Self {
        let m = ModelConfig::default();
        Self {
            conv_filters: m.conv_filters,
            kernel: m.kernel,
            padding: m.padding,
            pool_after_block: m.pool_after_block,
            embedding_dim: m.embedding_dim,
            normalize_embeddings: m.normalize_embeddings,
        }
    }
}

/// Optimizer and schedule; the seed is the run-wide `seed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub margin: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub negative_mix: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub triplets_per_epoch: Option<usize>,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            epochs: t.epochs,
            margin: t.margin,
            beta1: t.beta1,
            beta2: t.beta2,
            epsilon: t.epsilon,
            negative_mix: t.negative_mix,
            triplets_per_epoch: t.triplets_per_epoch,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root: Option<PathBuf>,
    pub layout: Layout,
    /// Writers drawn for training; ignored for SigComp, which ships its own
    /// split.
    pub train_writers: usize,
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self {
            root: None,
            layout: Layout::Cedar,
            train_writers: 40,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub writers: usize,
    pub genuine: usize,
    pub forged: usize,
    /// Writers marked for training in the generated manifest.
    pub train_writers: usize,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self {
            writers: 15,
            genuine: 12,
            forged: 12,
            train_writers: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub bins: usize,
    /// Pairs kept per writer and pair kind; all when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_writer_cap: Option<usize>,
    /// Decision threshold for `verify` when no summary is found.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            bins: crate::evaluation::DEFAULT_BINS,
            per_writer_cap: None,
            threshold: None,
        }
    }
}

/// Everything a command needs, resolved from defaults, a config file and
/// command-line overrides.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; all cores when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub scattering: ScatteringConfig,
    pub model: ModelSection,
    pub train: TrainSection,
    pub dataset: DatasetSection,
    pub synth: SynthSection,
    pub eval: EvalSection,
}

impl RunConfig {
    pub fn model_config(&self) -> ModelConfig {
        let m = &self.model;
        ModelConfig {
            scattering: self.scattering.clone(),
            conv_filters: m.conv_filters.clone(),
            kernel: m.kernel,
            padding: m.padding,
            pool_after_block: m.pool_after_block.clone(),
            embedding_dim: m.embedding_dim,
            normalize_embeddings: m.normalize_embeddings,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            epochs: t.epochs,
            margin: t.margin,
            seed: self.seed,
            beta1: t.beta1,
            beta2: t.beta2,
            epsilon: t.epsilon,
            negative_mix: t.negative_mix,
            triplets_per_epoch: t.triplets_per_epoch,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model_config().plan()?;
        self.train_config().validate().map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("[train] {msg}")),
            other => other,
        })?;
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        if self.eval.bins == 0 {
            return Err(Error::Config("eval.bins must be at least 1".into()));
        }
        if let Some(t) = self.eval.threshold {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Config(format!("eval.threshold must lie in [0, 1], got {t}")));
            }
        }
        if self.synth.writers == 0 || self.synth.genuine == 0 || self.synth.forged == 0 {
            return Err(Error::Config("synth.writers, synth.genuine and synth.forged must be at least 1".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }
}

fn merge(base: &mut Table, over: Table) {
    for (key, value) in over {
        match (base.get_mut(&key), value) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

/// Sets `section.key` (or a top-level `key`) to `value`.
pub fn set_key(table: &mut Table, path: &str, value: Value) -> Result<()> {
    let mut parts: Vec<&str> = path.split('.').collect();
    let last = parts.pop().filter(|k| !k.is_empty()).ok_or_else(|| Error::Config(format!("empty key in `{path}`")))?;
    let mut cur = table;
    for part in parts {
        let entry = cur.entry(part.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("`{part}` in `{path}` is not a section")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Parses the right-hand side of `--set key=value` as a TOML value, falling
/// back to a plain string (paths, layout names).
pub fn parse_value(raw: &str) -> Value {
    toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Resolves a run configuration: built-in defaults, then `file`, then each
/// `key=value` override in order, then the typed `flags`.
pub fn parse_config(file: Option<&Path>, overrides: &[String], flags: &[(&str, Value)]) -> Result<RunConfig> {
    let mut table = Table::try_from(RunConfig::default()).map_err(|e| Error::Config(e.to_string()))?;
    if let Some(path) = file {
        let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading config {}", path.display()), e))?;
        let from_file: Table = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        merge(&mut table, from_file);
    }
    for o in overrides {
        let (key, raw) = o
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{o}` is not of the form key=value")))?;
        set_key(&mut table, key.trim(), parse_value(raw.trim()))?;
    }
    for (key, value) in flags {
        set_key(&mut table, key, value.clone())?;
    }
    // round-trip through text so errors carry the offending key and line
    let text = toml::to_string(&table).map_err(|e| Error::Config(e.to_string()))?;
    let config: RunConfig = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(text: &str) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(&path, text).unwrap();
        (dir, path)
    }

    #[test]
    fn empty_file_gives_defaults() {
        let (_d, p) = write("");
        let c = parse_config(Some(&p), &[], &[]).unwrap();
        assert_eq!(c, RunConfig::default());
        let t = c.train_config();
        assert_eq!((t.learning_rate, t.batch_size, t.epochs), (0.0005, 32, 100));
        assert_eq!((c.scattering.scales, c.scattering.orientations), (2, 8));
    }

    #[test]
    fn flags_beat_file() {
        let (_d, p) = write("[train]\nepochs = 5\n");
        assert_eq!(parse_config(Some(&p), &[], &[]).unwrap().train.epochs, 5);
        let c = parse_config(Some(&p), &["train.epochs=6".into()], &[("train.epochs", Value::Integer(7))]).unwrap();
        assert_eq!(c.train.epochs, 7);
        let c = parse_config(Some(&p), &["train.epochs=6".into()], &[]).unwrap();
        assert_eq!(c.train.epochs, 6);
    }

    #[test]
    fn unknown_keys_are_named() {
        let (_d, p) = write("[train]\nlearning_rte = 0.1\n");
        let err = parse_config(Some(&p), &[], &[]).unwrap_err();
        assert!(err.to_string().contains("learning_rte"), "{err}");
        let err = parse_config(None, &["bogus.key=1".into()], &[]).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn type_and_range_errors() {
        let err = parse_config(None, &["train.epochs=\"many\"".into()], &[]).unwrap_err();
        assert!(err.to_string().contains("epochs"), "{err}");
        let err = parse_config(None, &["train.learning_rate=-1".into()], &[]).unwrap_err();
        assert!(err.to_string().contains("learning_rate"), "{err}");
        assert!(parse_config(None, &["noequals".into()], &[]).is_err());
    }

    #[test]
    fn strings_and_paths() {
        let c = parse_config(None, &["dataset.layout=sigcomp-dutch".into(), "dataset.root=/data/x y".into()], &[]).unwrap();
        assert_eq!(c.dataset.layout, Layout::SigcompDutch);
        assert_eq!(c.dataset.root, Some(PathBuf::from("/data/x y")));
    }

    #[test]
    fn echoed_config_reparses_identically() {
        let c = parse_config(None, &["train.epochs=3".into(), "seed=9".into(), "eval.threshold=0.25".into()], &[]).unwrap();
        let (_d, p) = write(&c.to_toml().unwrap());
        assert_eq!(parse_config(Some(&p), &[], &[]).unwrap(), c);
    }
}
