//! betascript: handwriting stroke modeling and writer identification.
//!
//! Stages read the previous stage's JSON artifact and write their own;
//! `train` runs the whole pipeline from an ink file to a model file. The
//! `synth` command generates seeded corpora with ground-truth sidecars for
//! verification experiments. Set BETASCRIPT_LOG=1 for progress logging.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use betascript_core::features::FeatureMode;
use betascript_core::identify::Protocol;
use betascript_core::ink;
use betascript_core::model::{train_model, WriterModel};
use betascript_core::par::Jobs;
use betascript_core::pipeline::{self, Artifact, PipelineConfig, ResultBody, SynthSpec};
use betascript_core::synth;
use betascript_core::taxonomy::TaxonomyConfig;

#[derive(Parser)]
#[command(name = "betascript", version, about)]
struct Cli {
    /// Pipeline configuration file (TOML). Flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Random seed for training and synthesis.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads: 0 = all cores (default), 1 = sequential.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Taxonomy rules file (TOML) overriding the built-in thresholds.
    #[arg(long, global = true)]
    rules: Option<PathBuf>,

    /// Feature mode: ebe or ebe+fepc.
    #[arg(long, global = true)]
    mode: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Filter and size-normalize an ink file.
    Preprocess {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split traces into strokes at velocity minima and double inflexions.
    Segment {
        /// Ink file or preprocessed artifact.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the velocity bells, drag terms, and arc pairs of every stroke.
    Fit {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build sliding-window segment feature vectors.
    Features {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Assign position groups and shape subgroups.
    Classify {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Full pipeline: ink file to trained model.
    Train {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Identify the writer of an ink file with a trained model.
    Identify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the evaluation protocol over a labeled corpus; writes the CMC
    /// curve as CSV and prints the Top-k table.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        /// Output CSV path for the CMC curve.
        #[arg(long)]
        out: PathBuf,
        /// Test-unit granularity: pages or bundles.
        #[arg(long)]
        protocol: Option<String>,
    },
    /// Generate a synthetic corpus from writer profiles.
    Synth {
        #[arg(long)]
        profiles: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Ground-truth sidecar path (default: <out>.truth.json).
        #[arg(long)]
        truth: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn effective_config(cli: &Cli) -> anyhow::Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)
            .with_context(|| format!("loading config {}", path.display()))?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.training.seed = seed;
    }
    if let Some(mode) = &cli.mode {
        cfg.mode = mode.parse::<FeatureMode>()?;
    }
    if let Some(rules) = &cli.rules {
        cfg.taxonomy = TaxonomyConfig::load(rules)
            .with_context(|| format!("loading rules {}", rules.display()))?;
    }
    Ok(cfg)
}

/// Loads either a raw ink file or an already-preprocessed artifact.
fn load_preprocessed(
    path: &Path,
    cfg: &PipelineConfig,
    jobs: Jobs,
) -> anyhow::Result<pipeline::PreprocessedBody> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let probe: serde_json::Value = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", path.display()))?;
    if probe.get("schema_version").is_some() {
        let artifact: Artifact<pipeline::PreprocessedBody> =
            pipeline::load_artifact(path, pipeline::PREPROCESSED_SCHEMA)?;
        Ok(artifact.body)
    } else {
        let ink = ink::parse_ink(&text, &path.display().to_string())?;
        Ok(pipeline::stage_preprocess(&ink, cfg, jobs)?)
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let jobs = Jobs::from_flag(cli.jobs);
    let cfg = effective_config(&cli)?;
    let hash = cfg.hash();

    match &cli.command {
        Command::Preprocess { input, out } => {
            let ink = ink::load_ink(input)?;
            let pre = pipeline::stage_preprocess(&ink, &cfg, jobs)?;
            pipeline::save_artifact(out, pipeline::PREPROCESSED_SCHEMA, &hash, &pre)?;
            println!(
                "preprocessed {} words ({} skipped) at {} Hz",
                pre.words.len(),
                pre.skipped_words,
                pre.sample_rate_hz
            );
        }
        Command::Segment { input, out } => {
            let pre = load_preprocessed(input, &cfg, jobs)?;
            let strokes = pipeline::stage_segment(&pre, &cfg, jobs)?;
            let n: usize = strokes
                .words
                .iter()
                .flat_map(|w| w.traces.iter().map(|t| t.slices.len()))
                .sum();
            pipeline::save_artifact(out, pipeline::STROKES_SCHEMA, &hash, &strokes)?;
            println!("segmented {} words into {} strokes", strokes.words.len(), n);
        }
        Command::Fit { input, out } => {
            let strokes: Artifact<pipeline::StrokesBody> =
                pipeline::load_artifact(input, pipeline::STROKES_SCHEMA)?;
            let params = pipeline::stage_fit(&strokes.body, &cfg, jobs)?;
            let n: usize = params
                .words
                .iter()
                .flat_map(|w| w.traces.iter().map(|t| t.strokes.len()))
                .sum();
            pipeline::save_artifact(out, pipeline::PARAMS_SCHEMA, &hash, &params)?;
            println!("fitted {n} strokes");
        }
        Command::Features { input, out } => {
            let params: Artifact<pipeline::ParamsBody> =
                pipeline::load_artifact(input, pipeline::PARAMS_SCHEMA)?;
            let segments = pipeline::stage_features(&params.body, cfg.mode, &cfg, jobs)?;
            pipeline::save_artifact(out, pipeline::SEGMENTS_SCHEMA, &hash, &segments)?;
            println!(
                "built {} segment vectors of length {} ({})",
                segments.segments.len(),
                cfg.mode.segment_len(),
                cfg.mode.as_str()
            );
        }
        Command::Classify { input, out } => {
            let segments: Artifact<pipeline::SegmentsBody> =
                pipeline::load_artifact(input, pipeline::SEGMENTS_SCHEMA)?;
            let labeled = pipeline::stage_classify(&segments.body, &cfg);
            pipeline::save_artifact(out, pipeline::LABELED_SCHEMA, &hash, &labeled)?;
            println!("classified {} segments", labeled.segments.len());
        }
        Command::Train { input, out } => {
            let ink = ink::load_ink(input)?;
            let labeled = pipeline::ink_to_labeled(&ink, &cfg, jobs)?;
            let segments = pipeline::training_segments(&labeled);
            let model = train_model(&segments, cfg.mode, &cfg.training, jobs)?;
            model.save(out, cfg.to_json_value(), &hash)?;
            println!(
                "trained {} networks over {} writers from {} segments ({})",
                model.networks.len(),
                model.writers.len(),
                segments.len(),
                cfg.mode.as_str()
            );
        }
        Command::Identify { model, input, out } => {
            let (model, embedded) = WriterModel::load(model)?;
            let run_cfg = config_for_inference(&cli, &model, embedded)?;
            let ink = ink::load_ink(input)?;
            let result = pipeline::identify_ink(&ink, &model, &run_cfg, jobs)?;
            let body = ResultBody::from_result(&result, &model);
            if let Some(out) = out {
                pipeline::save_artifact(out, pipeline::RESULT_SCHEMA, &run_cfg.hash(), &body)?;
            }
            println!(
                "identified: {} (from {} segments, {} skipped)",
                body.identified, body.segment_count, body.skipped_segments
            );
        }
        Command::Evaluate {
            model,
            input,
            out,
            protocol,
        } => {
            let (model, embedded) = WriterModel::load(model)?;
            let run_cfg = config_for_inference(&cli, &model, embedded)?;
            let protocol = match protocol {
                Some(p) => p.parse::<Protocol>()?,
                None => run_cfg.protocol,
            };
            let ink = ink::load_ink(input)?;
            let report = pipeline::evaluate_ink(&ink, &model, &run_cfg, protocol, jobs)?;
            std::fs::write(out, report.cmc.to_csv())
                .with_context(|| format!("writing {}", out.display()))?;
            print!("{}", report.table_text());
            print!("{}", report.table_csv());
        }
        Command::Synth {
            profiles,
            out,
            truth,
        } => {
            let mut spec = SynthSpec::load(profiles)?;
            if let Some(seed) = cli.seed {
                for (i, w) in spec.writers.iter_mut().enumerate() {
                    w.seed = seed.wrapping_add(i as u64);
                }
            }
            let (corpus, truth_data) =
                synth::synth_corpus(&spec.writers, spec.words_per_writer, spec.rate_hz, spec.page_words)?;
            ink::save_ink(&corpus, out)?;
            let truth_path = truth
                .clone()
                .unwrap_or_else(|| out.with_extension("truth.json"));
            let truth_text =
                serde_json::to_string(&truth_data).context("serializing ground truth")?;
            std::fs::write(&truth_path, truth_text)
                .with_context(|| format!("writing {}", truth_path.display()))?;
            println!(
                "synthesized {} words from {} writers -> {} (+ {})",
                corpus.words.len(),
                spec.writers.len(),
                out.display(),
                truth_path.display()
            );
        }
    }
    Ok(())
}

/// Inference commands run with the pipeline config embedded in the model so
/// feature extraction matches training exactly; an explicit --mode must
/// agree with the model.
fn config_for_inference(
    cli: &Cli,
    model: &WriterModel,
    embedded: serde_json::Value,
) -> anyhow::Result<PipelineConfig> {
    let cfg = PipelineConfig::from_json_value(embedded)
        .context("model file carries no usable pipeline config")?;
    if let Some(mode) = &cli.mode {
        let requested = mode.parse::<FeatureMode>()?;
        if requested != model.mode {
            bail!(
                "feature mode mismatch: model is {}, request is {}",
                model.mode.as_str(),
                requested.as_str()
            );
        }
    }
    if cli.config.is_some() || cli.rules.is_some() {
        eprintln!("note: identify/evaluate use the pipeline config embedded in the model");
    }
    Ok(cfg)
}
