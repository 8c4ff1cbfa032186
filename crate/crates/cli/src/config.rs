//! Run configuration: one declarative TOML file, with a handful of CLI flag
//! overrides. The seed recorded here drives every stochastic component of a
//! run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use semrel_core::classify::{ClassifierConfig, ClassifierKind};
use semrel_core::embed::{EmbeddingMethod, TrainConfig};
use semrel_core::graph::TripleFormat;
use semrel_core::pairrep::AggregateOp;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config `{path}`: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("referenced file does not exist: {0}")]
    MissingFile(PathBuf),
    #[error("unknown {field}: `{value}`")]
    UnknownValue { field: &'static str, value: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingSection {
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default = "default_dimension")]
    pub dimension: usize,
    #[serde(default = "default_embed_epochs")]
    pub epochs: usize,
    #[serde(default = "default_embed_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default = "default_negatives")]
    pub negatives_per_positive: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_walk_depth")]
    pub walk_depth: usize,
    #[serde(default = "default_walks_per_node")]
    pub walks_per_node: usize,
    #[serde(default = "default_window")]
    pub window_size: usize,
}

impl Default for EmbeddingSection {
    fn default() -> Self {
        toml::from_str("").expect("defaults are complete")
    }
}

fn default_method() -> String {
    "walk".into()
}
fn default_dimension() -> usize {
    64
}
fn default_embed_epochs() -> usize {
    20
}
fn default_embed_lr() -> f64 {
    0.05
}
fn default_margin() -> f64 {
    1.0
}
fn default_negatives() -> usize {
    5
}
fn default_batch() -> usize {
    32
}
fn default_walk_depth() -> usize {
    4
}
fn default_walks_per_node() -> usize {
    10
}
fn default_window() -> usize {
    5
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierSection {
    #[serde(default = "default_kind")]
    pub kind: String,
    #[serde(default = "default_hidden")]
    pub hidden_width: usize,
    #[serde(default = "default_clf_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_clf_epochs")]
    pub epochs: usize,
    #[serde(default = "default_clf_batch")]
    pub batch_size: usize,
}

impl Default for ClassifierSection {
    fn default() -> Self {
        toml::from_str("").expect("defaults are complete")
    }
}

fn default_kind() -> String {
    "mlp".into()
}
fn default_hidden() -> usize {
    64
}
fn default_clf_lr() -> f64 {
    0.1
}
fn default_clf_epochs() -> usize {
    100
}
fn default_clf_batch() -> usize {
    16
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub ontology: PathBuf,
    /// `tsv` or `ntriples`; inferred from the file extension when absent.
    #[serde(default)]
    pub triples_format: Option<String>,
    pub annotations: PathBuf,
    pub positive_pairs: PathBuf,
    /// When absent, negatives are sampled uniformly over the positive-pair
    /// entities, one per positive.
    #[serde(default)]
    pub negative_pairs: Option<PathBuf>,
    #[serde(default = "default_subclass")]
    pub subclass_relation: String,
    #[serde(default = "default_annotation_rel")]
    pub annotation_relation: String,
    #[serde(default = "default_aggregation")]
    pub aggregation: String,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub embedding: EmbeddingSection,
    #[serde(default)]
    pub classifier: ClassifierSection,
}

fn default_subclass() -> String {
    "subClassOf".into()
}
fn default_annotation_rel() -> String {
    "hasAnnotation".into()
}
fn default_aggregation() -> String {
    "average".into()
}
fn default_folds() -> usize {
    10
}
fn default_seed() -> u64 {
    42
}

/// Flag overrides applied on top of the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub folds: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub method: Option<String>,
    pub classifier: Option<String>,
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config: RunConfig = toml::from_str(&text)?;
        // Relative paths resolve against the config file's directory.
        if let Some(base) = path.parent() {
            for p in [
                &mut config.ontology,
                &mut config.annotations,
                &mut config.positive_pairs,
                &mut config.output_dir,
            ] {
                if p.is_relative() {
                    *p = base.join(&p);
                }
            }
            if let Some(neg) = &mut config.negative_pairs {
                if neg.is_relative() {
                    *neg = base.join(&neg);
                }
            }
        }
        if let Some(seed) = overrides.seed {
            config.seed = seed;
        }
        if let Some(folds) = overrides.folds {
            config.folds = folds;
        }
        if let Some(dir) = &overrides.output_dir {
            config.output_dir = dir.clone();
        }
        if let Some(method) = &overrides.method {
            config.embedding.method = method.clone();
        }
        if let Some(kind) = &overrides.classifier {
            config.classifier.kind = kind.clone();
        }
        config.validate()?;
        Ok(config)
    }

    /// Check referenced files and enumerated values; called after overrides.
    pub fn validate(&self) -> Result<(), ConfigError> {
        for path in [&self.ontology, &self.annotations, &self.positive_pairs] {
            if !path.exists() {
                return Err(ConfigError::MissingFile(path.clone()));
            }
        }
        if let Some(neg) = &self.negative_pairs {
            if !neg.exists() {
                return Err(ConfigError::MissingFile(neg.clone()));
            }
        }
        self.method()?;
        self.aggregate_op()?;
        self.classifier_kind()?;
        self.triple_format()?;
        if self.folds < 2 {
            return Err(ConfigError::Invalid("folds must be at least 2".into()));
        }
        Ok(())
    }

    pub fn method(&self) -> Result<EmbeddingMethod, ConfigError> {
        EmbeddingMethod::parse(&self.embedding.method).ok_or_else(|| ConfigError::UnknownValue {
            field: "embedding.method",
            value: self.embedding.method.clone(),
        })
    }

    pub fn aggregate_op(&self) -> Result<AggregateOp, ConfigError> {
        AggregateOp::parse(&self.aggregation).ok_or_else(|| ConfigError::UnknownValue {
            field: "aggregation",
            value: self.aggregation.clone(),
        })
    }

    pub fn classifier_kind(&self) -> Result<ClassifierKind, ConfigError> {
        ClassifierKind::parse(&self.classifier.kind).ok_or_else(|| ConfigError::UnknownValue {
            field: "classifier.kind",
            value: self.classifier.kind.clone(),
        })
    }

    pub fn triple_format(&self) -> Result<TripleFormat, ConfigError> {
        match self.triples_format.as_deref() {
            Some("tsv") => Ok(TripleFormat::Tsv),
            Some("ntriples") | Some("ntriples-subset") => Ok(TripleFormat::NTriplesSubset),
            Some(other) => Err(ConfigError::UnknownValue {
                field: "triples_format",
                value: other.to_string(),
            }),
            None => Ok(match self.ontology.extension().and_then(|e| e.to_str()) {
                Some("nt") => TripleFormat::NTriplesSubset,
                _ => TripleFormat::Tsv,
            }),
        }
    }

    /// Embedding hyperparameters with the run seed threaded through.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            dimension: self.embedding.dimension,
            epochs: self.embedding.epochs,
            learning_rate: self.embedding.learning_rate,
            margin: self.embedding.margin,
            negatives_per_positive: self.embedding.negatives_per_positive,
            batch_size: self.embedding.batch_size,
            walk_depth: self.embedding.walk_depth,
            walks_per_node: self.embedding.walks_per_node,
            window_size: self.embedding.window_size,
            seed: stage_seed(self.seed, "embed"),
        }
    }

    pub fn classifier_config(&self) -> ClassifierConfig {
        ClassifierConfig {
            hidden_width: self.classifier.hidden_width,
            learning_rate: self.classifier.learning_rate,
            epochs: self.classifier.epochs,
            batch_size: self.classifier.batch_size,
        }
    }

    /// Hash of the full effective configuration, recorded in the manifest.
    pub fn hash(&self) -> String {
        let canonical = toml::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Per-stage sub-seed derived from the run seed; FNV-1a over the tag mixed
/// into the seed so stages draw independent streams.
pub fn stage_seed(seed: u64, tag: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in tag.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    seed ^ h
}
