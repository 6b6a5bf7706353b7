//! Experiment configuration files (TOML).
//!
//! ```toml
//! preset = "bail"          # bail | credit | pokec; defaults to bail
//! method = "fatragnn"      # fatragnn | gcn | mlp
//! seeds = [0, 1, 2, 3, 4]
//!
//! [train]                  # any TrainConfig field overrides the preset
//! epochs = 200
//! tau = 1.0
//! components = { adversarial = true, generation = true, modification = true, alignment = true }
//!
//! [data]
//! train = { manifest = "data/b0/manifest.toml" }
//! test = [{ name = "B1", manifest = "data/b1/manifest.toml" }]
//! test_suite = "suite/suite.toml"   # optional, appends a synthesized suite
//! ```
//!
//! `[synth]`, `[theory]` and `[sweep]` configure the commands of the same
//! name. Unknown keys are rejected. Relative paths are resolved against the
//! config file's directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use fatra_core::model::LearningRates;
use fatra_core::pipeline::{Components, TrainConfig};
use fatra_core::theory::{LabelRule, SyntheticSpec};
use serde::{Deserialize, Serialize};

use crate::dataset::{Column, DatasetManifest};
use crate::error::{io_err, CliError, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Fatragnn,
    Gcn,
    Mlp,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Fatragnn => "fatragnn",
            Method::Gcn => "gcn",
            Method::Mlp => "mlp",
        }
    }
}

/// Optional overrides of [`TrainConfig`] fields.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: Option<usize>,
    pub t1: Option<usize>,
    pub t2: Option<usize>,
    pub t3: Option<usize>,
    pub t4: Option<usize>,
    pub t5: Option<usize>,
    pub lr_encoder: Option<f64>,
    pub lr_discriminator: Option<f64>,
    pub lr_classifier: Option<f64>,
    pub lr_generator: Option<f64>,
    pub tau: Option<f64>,
    pub pool_size: Option<usize>,
    pub edit_ratio: Option<f64>,
    pub swap_period: Option<usize>,
    pub hidden: Option<usize>,
    pub embed: Option<usize>,
    pub classifier_hidden: Option<usize>,
    pub discriminator_hidden: Option<usize>,
    pub generator_hidden: Option<usize>,
    pub components: Option<ComponentsSection>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentsSection {
    pub adversarial: Option<bool>,
    pub generation: Option<bool>,
    pub modification: Option<bool>,
    pub alignment: Option<bool>,
}

impl TrainSection {
    pub fn apply(&self, mut c: TrainConfig) -> TrainConfig {
        macro_rules! set {
            ($($field:ident),*) => { $( if let Some(v) = self.$field { c.$field = v; } )* };
        }
        set!(epochs, t1, t2, t3, t4, t5, tau, pool_size, edit_ratio, swap_period, hidden, embed, classifier_hidden, discriminator_hidden, generator_hidden);
        let LearningRates { encoder, discriminator, classifier, generator } = c.lr;
        c.lr = LearningRates {
            encoder: self.lr_encoder.unwrap_or(encoder),
            discriminator: self.lr_discriminator.unwrap_or(discriminator),
            classifier: self.lr_classifier.unwrap_or(classifier),
            generator: self.lr_generator.unwrap_or(generator),
        };
        if let Some(s) = self.components {
            let Components { adversarial, generation, modification, alignment } = c.components;
            c.components = Components {
                adversarial: s.adversarial.unwrap_or(adversarial),
                generation: s.generation.unwrap_or(generation),
                modification: s.modification.unwrap_or(modification),
                alignment: s.alignment.unwrap_or(alignment),
            };
        }
        c
    }
}

/// A dataset given by manifest file or inline manifest fields.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub name: Option<String>,
    pub manifest: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub edges: Option<PathBuf>,
    pub sensitive: Option<Column>,
    pub label: Option<Column>,
    pub drop_sensitive: Option<bool>,
}

impl DatasetEntry {
    pub fn manifest(&self, base: &Path) -> Result<DatasetManifest> {
        if let Some(path) = &self.manifest {
            let mut m = DatasetManifest::load(&base.join(path))?;
            if let Some(d) = self.drop_sensitive {
                m.drop_sensitive = d;
            }
            return Ok(m);
        }
        match (&self.features, &self.edges, &self.sensitive, &self.label) {
            (Some(f), Some(e), Some(s), Some(l)) => Ok(DatasetManifest {
                features: f.clone(),
                edges: e.clone(),
                sensitive: s.clone(),
                label: l.clone(),
                drop_sensitive: self.drop_sensitive.unwrap_or(false),
            }
            .resolved(base)),
            _ => Err(CliError::Usage("dataset entry needs `manifest` or all of features, edges, sensitive, label".into())),
        }
    }

    pub fn display_name(&self, fallback: &str) -> String {
        self.name.clone().unwrap_or_else(|| fallback.to_string())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub train: Option<DatasetEntry>,
    #[serde(default)]
    pub test: Vec<DatasetEntry>,
    pub test_suite: Option<PathBuf>,
}

/// Suite index written by `synth`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteFile {
    pub train: Option<SuiteEntry>,
    #[serde(default)]
    pub test: Vec<SuiteEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteEntry {
    pub name: String,
    pub manifest: PathBuf,
    /// Requested mean signed balance, for rewired graphs.
    pub target: Option<f64>,
    /// Measured mean signed balance.
    pub signed_balance: f64,
}

impl SuiteFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        toml::from_str(&text).map_err(|e| config_err(path, e.message()))
    }
}

/// Parameters of a synthetic Gaussian graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecSection {
    pub nodes: usize,
    pub dim: usize,
    #[serde(default)]
    pub mu1: f64,
    #[serde(default)]
    pub mu0: f64,
    #[serde(default = "one")]
    pub sigma1: f64,
    #[serde(default = "one")]
    pub sigma0: f64,
    #[serde(default)]
    pub signed_balance: f64,
    #[serde(default = "half")]
    pub group_fraction: f64,
    #[serde(default = "ten")]
    pub mean_degree: f64,
    /// Label 1 iff `x[label_channel] > label_threshold`; without a channel
    /// labels are coin flips with `positive_rate`.
    pub label_channel: Option<usize>,
    #[serde(default)]
    pub label_threshold: f64,
    #[serde(default)]
    pub label_flip: f64,
    #[serde(default = "half")]
    pub positive_rate: f64,
}

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn ten() -> f64 {
    10.0
}

impl SpecSection {
    pub fn to_spec(&self, seed: u64) -> SyntheticSpec {
        let labels = match self.label_channel {
            Some(channel) => LabelRule::Threshold { channel, threshold: self.label_threshold, flip: self.label_flip },
            None => LabelRule::Coin { positive_rate: self.positive_rate },
        };
        SyntheticSpec {
            n: self.nodes,
            dim: self.dim,
            mu1: self.mu1,
            mu0: self.mu0,
            sigma1: self.sigma1,
            sigma0: self.sigma0,
            signed_balance: self.signed_balance,
            group_fraction: self.group_fraction,
            mean_degree: self.mean_degree,
            labels,
            seed,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    /// Training graph to emit alongside the suite.
    pub train: Option<SpecSection>,
    /// Suite base: a synthetic spec...
    pub base: Option<SpecSection>,
    /// ...or an existing dataset.
    pub base_dataset: Option<DatasetEntry>,
    #[serde(default)]
    pub targets: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheorySection {
    #[serde(default = "default_instances")]
    pub instances: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Specs for the pair-distance certificate.
    #[serde(default)]
    pub pair_specs: Vec<SpecSection>,
}

fn default_instances() -> usize {
    50
}
fn default_trials() -> usize {
    1000
}
fn default_delta() -> f64 {
    0.1
}

impl Default for TheorySection {
    fn default() -> Self {
        Self { instances: default_instances(), trials: default_trials(), delta: default_delta(), pair_specs: Vec::new() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// `[train]` key → values; the sweep runs the cartesian product.
    pub grid: BTreeMap<String, Vec<toml::Value>>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    preset: Option<String>,
    method: Option<Method>,
    seeds: Option<Vec<u64>>,
    train: Option<TrainSection>,
    data: Option<DataSection>,
    synth: Option<SynthSection>,
    theory: Option<TheorySection>,
    sweep: Option<SweepSection>,
}

/// A parsed config with paths anchored at its directory.
#[derive(Clone, Debug, PartialEq)]
pub struct Experiment {
    pub path: PathBuf,
    pub dir: PathBuf,
    pub preset: TrainConfig,
    pub overrides: TrainSection,
    pub method: Method,
    pub seeds: Vec<u64>,
    pub data: DataSection,
    pub synth: SynthSection,
    pub theory: TheorySection,
    pub sweep: SweepSection,
}

fn config_err(path: &Path, message: impl Into<String>) -> CliError {
    CliError::Config { path: path.to_path_buf(), message: message.into() }
}

impl Experiment {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| config_err(path, e.message()))?;
        let preset_name = file.preset.as_deref().unwrap_or("bail");
        let preset = TrainConfig::preset(preset_name).ok_or_else(|| config_err(path, format!("unknown preset `{preset_name}`")))?;
        let seeds = file.seeds.unwrap_or_else(|| (0..5).collect());
        if seeds.is_empty() {
            return Err(config_err(path, "`seeds` must not be empty"));
        }
        let exp = Self {
            path: path.to_path_buf(),
            dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
            preset,
            overrides: file.train.unwrap_or_default(),
            method: file.method.unwrap_or_default(),
            seeds,
            data: file.data.unwrap_or_default(),
            synth: file.synth.unwrap_or_default(),
            theory: file.theory.unwrap_or_default(),
            sweep: file.sweep.unwrap_or_default(),
        };
        exp.train_config(0).validate().map_err(|e| config_err(path, e.to_string()))?;
        for key in exp.sweep.grid.keys() {
            exp.with_override(key, &toml::Value::Integer(0)).or_else(|e| match e {
                // Only the key is checked here; value types are checked per point.
                CliError::Config { message, .. } if message.contains("invalid type") => Ok(exp.overrides.clone()),
                other => Err(other),
            })?;
        }
        Ok(exp)
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig { seed, ..self.overrides.apply(self.preset.clone()) }
    }

    /// The `[train]` section with one key replaced.
    pub fn with_override(&self, key: &str, value: &toml::Value) -> Result<TrainSection> {
        let mut table = toml::Value::try_from(&self.overrides).map_err(|e| config_err(&self.path, e.to_string()))?;
        let map = table.as_table_mut().expect("struct serializes to a table");
        match key.split_once('.') {
            Some(("components", sub)) => {
                let comp = map.entry("components").or_insert_with(|| toml::Value::Table(Default::default()));
                comp.as_table_mut().expect("components is a table").insert(sub.to_string(), value.clone());
            }
            _ => {
                map.insert(key.to_string(), value.clone());
            }
        }
        table.try_into().map_err(|e: toml::de::Error| config_err(&self.path, format!("sweep key `{key}`: {}", e.message())))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.dir.join(p)
    }

    pub fn train_manifest(&self) -> Result<DatasetManifest> {
        let entry = self.data.train.as_ref().ok_or_else(|| config_err(&self.path, "missing `data.train`"))?;
        entry.manifest(&self.dir)
    }

    /// Named testing graphs: explicit entries, then the suite.
    pub fn test_manifests(&self) -> Result<Vec<(String, DatasetManifest)>> {
        let mut out = Vec::new();
        for (i, t) in self.data.test.iter().enumerate() {
            out.push((t.display_name(&format!("test{i}")), t.manifest(&self.dir)?));
        }
        if let Some(suite) = &self.data.test_suite {
            let path = self.resolve(suite);
            let base = path.parent().unwrap_or(Path::new("."));
            for t in SuiteFile::load(&path)?.test {
                out.push((t.name, DatasetManifest::load(&base.join(&t.manifest))?));
            }
        }
        if out.is_empty() {
            return Err(config_err(&self.path, "at least one testing graph is required (`data.test` or `data.test_suite`)"));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Experiment> {
        Experiment::parse(text, Path::new("exp.toml"))
    }

    #[test]
    fn overrides_apply_on_preset() {
        let e = parse("preset = \"credit\"\n[train]\nepochs = 7\nlr_generator = 0.1\ncomponents = { alignment = false }\n").unwrap();
        let c = e.train_config(3);
        assert_eq!((c.epochs, c.t5, c.seed, c.lr.generator), (7, 2, 3, 0.1));
        assert!(!c.components.alignment && c.components.adversarial);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = parse("[train]\nepochz = 3\n").unwrap_err().to_string();
        assert!(err.contains("epochz"), "{err}");
        let err = parse("sedes = [1]\n").unwrap_err().to_string();
        assert!(err.contains("sedes"), "{err}");
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(parse("[train]\nswap_period = 0\n").is_err());
        assert!(parse("seeds = []\n").is_err());
        assert!(parse("preset = \"cora\"\n").is_err());
    }

    #[test]
    fn sweep_overrides() {
        let e = parse("[sweep]\ngrid = { tau = [0.5, 2.0], \"components.alignment\" = [true, false] }\n").unwrap();
        let s = e.with_override("components.alignment", &toml::Value::Boolean(false)).unwrap();
        assert!(!s.apply(e.preset.clone()).components.alignment);
        assert!(parse("[sweep]\ngrid = { bogus = [1] }\n").is_err());
    }
}
