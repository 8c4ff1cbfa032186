//! Synthetic planted-signal dataset generator.
//!
//! The ontology is a three-branch tree plus one designated deep class (the
//! signal) and one near-root class. Positive-pair entities both carry the
//! signal class among noise annotations; negative-pair entities share only
//! the near-root class. A competent pair representation should recover the
//! signal, which makes the dataset a calibration target for the whole
//! pipeline: prediction quality, explanation content, and effectiveness
//! ablations all have known ground truth.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::formats::{write_json, write_string, FormatError};

pub const SIGNAL_CLASS: &str = "signal_function";
pub const GENERAL_CLASS: &str = "general_process";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SynthSummary {
    pub signal_class: String,
    pub general_class: String,
    pub positives: usize,
    pub negatives: usize,
    pub seed: u64,
    pub classes: usize,
    pub entities: usize,
}

pub struct SynthFiles {
    pub ontology: PathBuf,
    pub annotations: PathBuf,
    pub positive_pairs: PathBuf,
    pub negative_pairs: PathBuf,
    pub config: PathBuf,
    pub summary: SynthSummary,
}

const BRANCHES: usize = 3;
const MIDS_PER_BRANCH: usize = 3;
const LEAVES_PER_MID: usize = 3;

fn leaf_name(branch: usize, mid: usize, leaf: usize) -> String {
    format!("leaf_{branch}_{mid}_{leaf}")
}

/// Write the dataset plus a ready-to-run config into `dir`.
pub fn generate(
    dir: &Path,
    positives: usize,
    negatives: usize,
    seed: u64,
) -> Result<SynthFiles, FormatError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Ontology triples.
    let mut ontology = String::new();
    writeln!(ontology, "{GENERAL_CLASS}\tsubClassOf\troot").unwrap();
    for b in 0..BRANCHES {
        writeln!(ontology, "branch_{b}\tsubClassOf\troot").unwrap();
        for m in 0..MIDS_PER_BRANCH {
            writeln!(ontology, "mid_{b}_{m}\tsubClassOf\tbranch_{b}").unwrap();
            for l in 0..LEAVES_PER_MID {
                writeln!(ontology, "{}\tsubClassOf\tmid_{b}_{m}", leaf_name(b, m, l)).unwrap();
            }
        }
    }
    writeln!(ontology, "{SIGNAL_CLASS}\tsubClassOf\tmid_0_0").unwrap();

    // Noise annotations come from branches 1 and 2 so they never subsume or
    // neighbour the signal class.
    let noise_pool: Vec<String> = (1..BRANCHES)
        .flat_map(|b| {
            (0..MIDS_PER_BRANCH)
                .flat_map(move |m| (0..LEAVES_PER_MID).map(move |l| leaf_name(b, m, l)))
        })
        .collect();

    let mut annotations = String::new();
    let mut positive_pairs = String::new();
    let mut negative_pairs = String::new();

    let annotate = |rng: &mut ChaCha8Rng, annotations: &mut String, entity: &str, anchor: &str| {
        writeln!(annotations, "{entity}\t{anchor}").unwrap();
        let noise_count = rng.gen_range(1..=2);
        for _ in 0..noise_count {
            let pick = &noise_pool[rng.gen_range(0..noise_pool.len())];
            writeln!(annotations, "{entity}\t{pick}").unwrap();
        }
    };

    for t in 0..positives {
        let (a, b) = (format!("p{}", 2 * t), format!("p{}", 2 * t + 1));
        annotate(&mut rng, &mut annotations, &a, SIGNAL_CLASS);
        annotate(&mut rng, &mut annotations, &b, SIGNAL_CLASS);
        writeln!(positive_pairs, "{a}\t{b}").unwrap();
    }
    for t in 0..negatives {
        let (a, b) = (format!("n{}", 2 * t), format!("n{}", 2 * t + 1));
        annotate(&mut rng, &mut annotations, &a, GENERAL_CLASS);
        annotate(&mut rng, &mut annotations, &b, GENERAL_CLASS);
        writeln!(negative_pairs, "{a}\t{b}").unwrap();
    }

    let ontology_path = dir.join("ontology.tsv");
    let annotations_path = dir.join("annotations.tsv");
    let positive_path = dir.join("positive_pairs.tsv");
    let negative_path = dir.join("negative_pairs.tsv");
    write_string(&ontology_path, &ontology)?;
    write_string(&annotations_path, &annotations)?;
    write_string(&positive_path, &positive_pairs)?;
    write_string(&negative_path, &negative_pairs)?;

    let config = format!(
        r#"ontology = "ontology.tsv"
annotations = "annotations.tsv"
positive_pairs = "positive_pairs.tsv"
negative_pairs = "negative_pairs.tsv"
subclass_relation = "subClassOf"
aggregation = "average"
folds = 10
seed = {seed}
output_dir = "run"

[embedding]
method = "walk"
dimension = 32
epochs = 5
learning_rate = 0.05
walk_depth = 4
walks_per_node = 10
window_size = 5
negatives_per_positive = 5

[classifier]
kind = "mlp"
hidden_width = 32
learning_rate = 0.1
epochs = 80
batch_size = 16
"#
    );
    let config_path = dir.join("config.toml");
    write_string(&config_path, &config)?;

    let summary = SynthSummary {
        signal_class: SIGNAL_CLASS.to_string(),
        general_class: GENERAL_CLASS.to_string(),
        positives,
        negatives,
        seed,
        classes: 2 + BRANCHES * (1 + MIDS_PER_BRANCH * (1 + LEAVES_PER_MID)),
        entities: 2 * (positives + negatives),
    };
    write_json(&dir.join("dataset.json"), &summary)?;

    Ok(SynthFiles {
        ontology: ontology_path,
        annotations: annotations_path,
        positive_pairs: positive_path,
        negative_pairs: negative_path,
        config: config_path,
        summary,
    })
}
