use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use semrel_cli::config::{Overrides, RunConfig};
use semrel_cli::{chart, formats, pipeline, synth};

#[derive(Parser)]
#[command(
    name = "semrel",
    about = "Relation prediction over ontology-backed knowledge graphs, with per-pair explanations",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Run configuration file (TOML).
    #[arg(short, long)]
    config: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of cross-validation folds.
    #[arg(long)]
    folds: Option<usize>,
    /// Override the output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Override the embedding method (translational | hyperplane |
    /// bilinear-diagonal | walk).
    #[arg(long)]
    method: Option<String>,
    /// Override the classifier kind (logistic | mlp).
    #[arg(long)]
    classifier: Option<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig, Box<dyn std::error::Error>> {
        let overrides = Overrides {
            seed: self.seed,
            folds: self.folds,
            output_dir: self.output_dir.clone(),
            method: self.method.clone(),
            classifier: self.classifier.clone(),
        };
        Ok(RunConfig::load(&self.config, &overrides)?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic planted-signal dataset plus a ready config.
    Synth {
        /// Directory to write the dataset into.
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Number of positive pairs.
        #[arg(long, default_value_t = 200)]
        positives: usize,
        /// Number of negative pairs.
        #[arg(long, default_value_t = 200)]
        negatives: usize,
    },
    /// Run the whole pipeline: ingest, embed, represent, train, explain,
    /// evaluate.
    Run(ConfigArgs),
    /// Parse inputs, build the ontology and pair sets, write the interned
    /// snapshot.
    Ingest(ConfigArgs),
    /// Train node embeddings over the ingested graph.
    Embed(ConfigArgs),
    /// Compute shared aspects and pair feature matrices.
    Represent(ConfigArgs),
    /// Cross-validated classifier training and per-pair predictions.
    Train(ConfigArgs),
    /// Generate per-pair explanations from the fold models.
    Explain(ConfigArgs),
    /// Aggregate metrics, significance and effectiveness reports.
    Evaluate(ConfigArgs),
    /// Export the likelihood bar-chart rows for one explained pair.
    ExportChart {
        #[command(flatten)]
        config: ConfigArgs,
        /// The pair, as `entity1,entity2` (order-insensitive).
        #[arg(long)]
        pair: String,
        /// Output file; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn execute(command: Command) -> Result<(), Box<dyn std::error::Error>> {
    match command {
        Command::Synth { output, seed, positives, negatives } => {
            let files = synth::generate(&output, positives, negatives, seed)?;
            println!(
                "wrote {} classes, {} entities, {}+{} pairs under {}",
                files.summary.classes,
                files.summary.entities,
                files.summary.positives,
                files.summary.negatives,
                output.display()
            );
            println!("config: {}", files.config.display());
        }
        Command::Run(args) => {
            let config = args.load()?;
            let artifacts = pipeline::run_experiment(&config)?;
            println!("run complete: {}", artifacts.output_dir.display());
        }
        Command::Ingest(args) => pipeline::stage_ingest(&args.load()?)?,
        Command::Embed(args) => pipeline::stage_embed(&args.load()?)?,
        Command::Represent(args) => pipeline::stage_represent(&args.load()?)?,
        Command::Train(args) => pipeline::stage_train(&args.load()?)?,
        Command::Explain(args) => pipeline::stage_explain(&args.load()?)?,
        Command::Evaluate(args) => pipeline::stage_evaluate(&args.load()?)?,
        Command::ExportChart { config, pair, output } => {
            let config = config.load()?;
            let (e1, e2) = pair
                .split_once(',')
                .ok_or("expected --pair entity1,entity2")?;
            let explanations =
                formats::read_explanations(&config.output_dir.join("explanations.json"))?;
            let csv = chart::export_chart_data(&explanations, e1.trim(), e2.trim())?;
            match output {
                Some(path) => formats::write_string(&path, &csv)?,
                None => print!("{csv}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
