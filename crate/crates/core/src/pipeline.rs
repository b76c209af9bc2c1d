//! Stage orchestration and artifact I/O.
//!
//! Every stage reads the previous stage's JSON artifact and writes its own;
//! the end-to-end `train` path chains the same stage functions in memory, so
//! stage-by-stage and end-to-end runs produce bit-identical models for the
//! same seed and config. Intermediate artifacts keep full float precision
//! (JSON round-trips f64 exactly); every artifact embeds the schema version,
//! tool version, and config hash.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::beta::{fit_velocity, BetaStroke};
use crate::ellipse::{chord_fallback, fit_arc_pair, MIN_ARC_POINTS};
use crate::error::{Error, Result};
use crate::features::{
    build_segment_features, segment_windows, FeatureMode, STROKES_PER_SEGMENT,
};
use crate::identify::{
    evaluate, identify, EvaluationReport, IdentificationResult, Protocol, TestSegment, TestUnit,
};
use crate::ink::{InkFile, InkSample, PreprocessConfig, Script, Trace};
use crate::model::{train_model, LabeledSegment, TrainingConfig, WriterModel};
use crate::par::Jobs;
use crate::segmentation::{
    compute_velocity, segment_trace, SegmentationConfig, StrokeBoundary, StrokeSlice,
};
use crate::synth::SyntheticWriterProfile;
use crate::taxonomy::{
    assign_group, assign_subgroup, compute_descriptors, SegmentClass, SegmentGroup,
    ShapeDescriptors, TaxonomyConfig,
};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const PREPROCESSED_SCHEMA: &str = "betascript/preprocessed/1";
pub const STROKES_SCHEMA: &str = "betascript/strokes/1";
pub const PARAMS_SCHEMA: &str = "betascript/params/1";
pub const SEGMENTS_SCHEMA: &str = "betascript/segments/1";
pub const LABELED_SCHEMA: &str = "betascript/labeled/1";
pub const RESULT_SCHEMA: &str = "betascript/result/1";

/// Verbose logging when BETASCRIPT_LOG is set (and not "0").
pub fn log(msg: std::fmt::Arguments<'_>) {
    let on = std::env::var("BETASCRIPT_LOG")
        .map(|v| !v.is_empty() && v != "0")
        .unwrap_or(false);
    if on {
        eprintln!("betascript: {msg}");
    }
}

#[macro_export]
macro_rules! blog {
    ($($arg:tt)*) => { $crate::pipeline::log(format_args!($($arg)*)) };
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub preprocess: PreprocessConfig,
    pub segmentation: SegmentationConfig,
    pub taxonomy: TaxonomyConfig,
    pub training: TrainingConfig,
    pub mode: FeatureMode,
    pub protocol: Protocol,
    /// Words per test bundle in the bundle protocol.
    pub bundle_words: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            preprocess: PreprocessConfig::default(),
            segmentation: SegmentationConfig::default(),
            taxonomy: TaxonomyConfig::default(),
            training: TrainingConfig::default(),
            mode: FeatureMode::EbeFepc,
            protocol: Protocol::Bundles,
            bundle_words: 10,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::parse(origin, e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_toml(&text, &path.display().to_string())
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serialization")
    }

    pub fn from_json_value(value: serde_json::Value) -> Result<Self> {
        serde_json::from_value(value).map_err(|e| Error::parse("embedded config", e.to_string()))
    }

    /// FNV-1a hash of the canonical JSON form.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serialization");
        let mut h: u64 = 0xcbf29ce484222325;
        for b in text.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }
}

// ---------------------------------------------------------------------------
// Artifact envelope
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub schema_version: String,
    pub tool_version: String,
    pub config_hash: String,
    #[serde(flatten)]
    pub body: T,
}

pub fn save_artifact<T: Serialize>(
    path: impl AsRef<Path>,
    schema: &str,
    config_hash: &str,
    body: &T,
) -> Result<()> {
    let path = path.as_ref();
    let artifact = Artifact {
        schema_version: schema.to_string(),
        tool_version: TOOL_VERSION.to_string(),
        config_hash: config_hash.to_string(),
        body,
    };
    let text = serde_json::to_string(&artifact).expect("artifact serialization");
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_artifact<T: DeserializeOwned>(
    path: impl AsRef<Path>,
    expected_schema: &str,
) -> Result<Artifact<T>> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    // Check the schema first so mismatches are reported by name, not as a
    // field-level parse failure.
    #[derive(Deserialize)]
    struct Probe {
        schema_version: Option<String>,
    }
    let probe: Probe = serde_json::from_str(&text)
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
    let found = probe.schema_version.unwrap_or_else(|| "missing".to_string());
    if found != expected_schema {
        return Err(Error::SchemaVersion {
            expected: expected_schema.to_string(),
            found,
        });
    }
    serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e.to_string()))
}

// ---------------------------------------------------------------------------
// Artifact bodies
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointRec {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

impl From<InkSample> for PointRec {
    fn from(s: InkSample) -> Self {
        PointRec {
            t: s.t,
            x: s.x,
            y: s.y,
        }
    }
}

impl From<PointRec> for InkSample {
    fn from(p: PointRec) -> Self {
        InkSample {
            t: p.t,
            x: p.x,
            y: p.y,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordMeta {
    pub writer_id: Option<String>,
    pub script: Script,
    pub page: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessedBody {
    pub sample_rate_hz: f64,
    pub skipped_words: usize,
    pub words: Vec<PreprocessedWord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessedWord {
    #[serde(flatten)]
    pub meta: WordMeta,
    pub traces: Vec<Vec<PointRec>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrokesBody {
    pub sample_rate_hz: f64,
    pub words: Vec<StrokesWord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrokesWord {
    #[serde(flatten)]
    pub meta: WordMeta,
    pub traces: Vec<TraceStrokes>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStrokes {
    pub points: Vec<PointRec>,
    pub boundaries: Vec<StrokeBoundary>,
    pub slices: Vec<StrokeSlice>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsBody {
    pub sample_rate_hz: f64,
    pub words: Vec<ParamsWord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsWord {
    #[serde(flatten)]
    pub meta: WordMeta,
    pub traces: Vec<TraceParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceParams {
    pub points: Vec<PointRec>,
    pub strokes: Vec<BetaStroke>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentsBody {
    pub mode: FeatureMode,
    /// Every preprocessed word, in order; segment records refer to this
    /// list by index. Words too short to form a segment still appear here
    /// so evaluation protocols count them.
    pub words: Vec<WordMeta>,
    pub segments: Vec<SegmentRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    #[serde(flatten)]
    pub meta: WordMeta,
    pub word_index: usize,
    pub first_stroke: usize,
    pub word_stroke_count: usize,
    pub group: SegmentGroup,
    pub descriptors: ShapeDescriptors,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledBody {
    pub mode: FeatureMode,
    pub words: Vec<WordMeta>,
    pub segments: Vec<LabeledRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRecord {
    #[serde(flatten)]
    pub segment: SegmentRecord,
    pub subgroup_id: u8,
    pub subgroup_name: String,
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

/// Preprocessing: per-trace uniform resampling and zero-phase filtering,
/// then word-height normalization. Words that cannot be preprocessed
/// (degenerate height, traces too short to filter) are skipped and counted.
pub fn stage_preprocess(
    ink: &InkFile,
    cfg: &PipelineConfig,
    jobs: Jobs,
) -> Result<PreprocessedBody> {
    let rate = cfg.preprocess.resolve_rate(ink)?;
    let pre_cfg = cfg.preprocess.clone().with_rate(rate);
    let processed: Vec<Option<PreprocessedWord>> = crate::par::map(jobs, &ink.words, |word| {
        match crate::ink::preprocess_word(word, &pre_cfg) {
            Ok(w) => Some(PreprocessedWord {
                meta: WordMeta {
                    writer_id: w.writer_id.clone(),
                    script: w.script,
                    page: w.page.clone(),
                },
                traces: w
                    .traces
                    .iter()
                    .map(|t| t.samples.iter().map(|&s| s.into()).collect())
                    .collect(),
            }),
            Err(_) => None,
        }
    });
    let total = processed.len();
    let words: Vec<PreprocessedWord> = processed.into_iter().flatten().collect();
    let skipped = total - words.len();
    if skipped > 0 {
        blog!("preprocess: skipped {skipped} of {total} words");
    }
    Ok(PreprocessedBody {
        sample_rate_hz: rate,
        skipped_words: skipped,
        words,
    })
}

fn trace_from_points(points: &[PointRec]) -> Trace {
    Trace {
        samples: points.iter().map(|&p| p.into()).collect(),
    }
}

/// Segmentation: velocity profile, boundaries, stroke slices per trace.
pub fn stage_segment(pre: &PreprocessedBody, cfg: &PipelineConfig, jobs: Jobs) -> Result<StrokesBody> {
    let seg_cfg = &cfg.segmentation;
    let words: Vec<Result<StrokesWord>> = crate::par::map(jobs, &pre.words, |word| {
        let mut traces = Vec::with_capacity(word.traces.len());
        for points in &word.traces {
            let trace = trace_from_points(points);
            let (_, boundaries, slices) = segment_trace(&trace, seg_cfg)?;
            traces.push(TraceStrokes {
                points: points.clone(),
                boundaries,
                slices,
            });
        }
        Ok(StrokesWord {
            meta: word.meta.clone(),
            traces,
        })
    });
    Ok(StrokesBody {
        sample_rate_hz: pre.sample_rate_hz,
        words: words.into_iter().collect::<Result<_>>()?,
    })
}

/// Velocity-model and arc-pair fitting of every stroke slice.
pub fn stage_fit(strokes: &StrokesBody, _cfg: &PipelineConfig, jobs: Jobs) -> Result<ParamsBody> {
    let words: Vec<Result<ParamsWord>> = crate::par::map(jobs, &strokes.words, |word| {
        let mut traces = Vec::with_capacity(word.traces.len());
        for trace_rec in &word.traces {
            let trace = trace_from_points(&trace_rec.points);
            let profile = compute_velocity(&trace)?;
            let mut fitted = Vec::with_capacity(trace_rec.slices.len());
            for slice in &trace_rec.slices {
                let times = &profile.t[slice.start..=slice.end];
                let speeds = &profile.v[slice.start..=slice.end];
                let fit = fit_velocity(times, speeds)?;

                let points: Vec<(f64, f64)> = trace_rec.points[slice.start..=slice.end]
                    .iter()
                    .map(|p| (p.x, p.y))
                    .collect();
                // Link point hint: the sample nearest the fitted velocity peak.
                let rel_peak = ((fit.pulse.peak_time - times[0])
                    / (times[times.len() - 1] - times[0])
                    * (points.len() - 1) as f64)
                    .round() as usize;
                let hint = rel_peak.min(points.len() - 1);
                let arcs = if points.len() >= MIN_ARC_POINTS {
                    fit_arc_pair(&points, hint)?
                } else {
                    chord_fallback(&points, hint)
                };
                fitted.push(BetaStroke {
                    pulse: fit.pulse,
                    drag: fit.drag,
                    arcs,
                    sample_range: (slice.start, slice.end),
                    fit_residual: fit.residual_rms,
                    degenerate_impulse: fit.degenerate_impulse,
                });
            }
            traces.push(TraceParams {
                points: trace_rec.points.clone(),
                strokes: fitted,
            });
        }
        Ok(ParamsWord {
            meta: word.meta.clone(),
            traces,
        })
    });
    Ok(ParamsBody {
        sample_rate_hz: strokes.sample_rate_hz,
        words: words.into_iter().collect::<Result<_>>()?,
    })
}

/// Sliding-window feature vectors plus shape descriptors and position group.
pub fn stage_features(
    params: &ParamsBody,
    mode: FeatureMode,
    cfg: &PipelineConfig,
    jobs: Jobs,
) -> Result<SegmentsBody> {
    // Descriptor bands divide the normalized word frame.
    let mut descriptor_cfg = cfg.taxonomy.clone();
    descriptor_cfg.word_height = cfg.preprocess.target_height;
    let per_word: Vec<Result<Vec<SegmentRecord>>> =
        crate::par::map_indexed(jobs, &params.words, |word_index, word| {
            // Word-level stroke sequence across traces.
            let mut strokes: Vec<(usize, &BetaStroke)> = Vec::new();
            for (ti, trace) in word.traces.iter().enumerate() {
                for stroke in &trace.strokes {
                    strokes.push((ti, stroke));
                }
            }
            let count = strokes.len();
            let mut records = Vec::new();
            for first in segment_windows(count) {
                let (t1, s1) = strokes[first];
                let (t2, s2) = strokes[first + 1];
                let features =
                    build_segment_features(&[s1, s2], first, count, mode);

                let mut points: Vec<(f64, f64)> = Vec::new();
                for (ti, s) in [(t1, s1), (t2, s2)] {
                    let trace = &word.traces[ti];
                    points.extend(
                        trace.points[s.sample_range.0..=s.sample_range.1]
                            .iter()
                            .map(|p| (p.x, p.y)),
                    );
                }
                let descriptors = compute_descriptors(
                    &points,
                    [s1.arcs.theta, s2.arcs.theta],
                    &descriptor_cfg,
                )?;
                records.push(SegmentRecord {
                    meta: word.meta.clone(),
                    word_index,
                    first_stroke: first,
                    word_stroke_count: count,
                    group: assign_group(first, count),
                    descriptors,
                    values: features.flat(),
                });
            }
            if count < STROKES_PER_SEGMENT {
                blog!("features: word {word_index} has {count} stroke(s), no segments");
            }
            Ok(records)
        });
    let mut segments = Vec::new();
    for r in per_word {
        segments.extend(r?);
    }
    Ok(SegmentsBody {
        mode,
        words: params.words.iter().map(|w| w.meta.clone()).collect(),
        segments,
    })
}

/// Subgroup assignment from the descriptor rules.
pub fn stage_classify(segments: &SegmentsBody, cfg: &PipelineConfig) -> LabeledBody {
    let labeled = segments
        .segments
        .iter()
        .map(|s| {
            let class = assign_subgroup(s.group, &s.descriptors, &cfg.taxonomy);
            LabeledRecord {
                segment: s.clone(),
                subgroup_id: class.subgroup_id,
                subgroup_name: class.name(s.meta.script).to_string(),
            }
        })
        .collect();
    LabeledBody {
        mode: segments.mode,
        words: segments.words.clone(),
        segments: labeled,
    }
}

/// Training rows from labeled segments; unlabeled (no writer id) segments
/// are dropped with a log line.
pub fn training_segments(labeled: &LabeledBody) -> Vec<LabeledSegment> {
    let mut out = Vec::with_capacity(labeled.segments.len());
    let mut dropped = 0usize;
    for record in &labeled.segments {
        match &record.segment.meta.writer_id {
            Some(writer) => out.push(LabeledSegment {
                writer_id: writer.clone(),
                class: SegmentClass {
                    group: record.segment.group,
                    subgroup_id: record.subgroup_id,
                },
                values: record.segment.values.clone(),
            }),
            None => dropped += 1,
        }
    }
    if dropped > 0 {
        blog!("train: dropped {dropped} segments without writer ids");
    }
    out
}

/// Front half of the pipeline: ink to labeled segments.
pub fn ink_to_labeled(ink: &InkFile, cfg: &PipelineConfig, jobs: Jobs) -> Result<LabeledBody> {
    let pre = stage_preprocess(ink, cfg, jobs)?;
    let strokes = stage_segment(&pre, cfg, jobs)?;
    let params = stage_fit(&strokes, cfg, jobs)?;
    let segments = stage_features(&params, cfg.mode, cfg, jobs)?;
    Ok(stage_classify(&segments, cfg))
}

/// End-to-end training from an ink file.
pub fn train_from_ink(ink: &InkFile, cfg: &PipelineConfig, jobs: Jobs) -> Result<WriterModel> {
    let labeled = ink_to_labeled(ink, cfg, jobs)?;
    let segments = training_segments(&labeled);
    train_model(&segments, cfg.mode, &cfg.training, jobs)
}

// ---------------------------------------------------------------------------
// Test-side assembly
// ---------------------------------------------------------------------------

fn to_test_segment(record: &LabeledRecord) -> TestSegment {
    TestSegment {
        class: SegmentClass {
            group: record.segment.group,
            subgroup_id: record.subgroup_id,
        },
        values: record.segment.values.clone(),
    }
}

/// Groups a labeled test corpus into protocol units: one per (writer, page)
/// for the page protocol, or per consecutive chunk of `bundle_words` words
/// for the bundle protocol. Every word of the corpus counts toward its
/// unit, segments or not.
pub fn build_test_units(
    labeled: &LabeledBody,
    protocol: Protocol,
    bundle_words: usize,
) -> Result<Vec<TestUnit>> {
    use std::collections::BTreeMap;

    let mut word_meta: Vec<(String, Option<String>)> = Vec::with_capacity(labeled.words.len());
    for meta in &labeled.words {
        let writer = meta.writer_id.clone().ok_or_else(|| Error::InvalidConfig {
            detail: "evaluation corpus has words without writer ids".into(),
        })?;
        word_meta.push((writer, meta.page.clone()));
    }
    let mut segments_by_word: BTreeMap<usize, Vec<TestSegment>> = BTreeMap::new();
    for record in &labeled.segments {
        segments_by_word
            .entry(record.segment.word_index)
            .or_default()
            .push(to_test_segment(record));
    }

    match protocol {
        Protocol::Pages => {
            let mut units: BTreeMap<(String, String), Vec<TestSegment>> = BTreeMap::new();
            for (word_index, (writer, page)) in word_meta.iter().enumerate() {
                let key = (writer.clone(), page.clone().unwrap_or_default());
                let entry = units.entry(key).or_default();
                if let Some(s) = segments_by_word.get(&word_index) {
                    entry.extend(s.iter().cloned());
                }
            }
            Ok(units
                .into_iter()
                .map(|((writer_id, _page), segments)| TestUnit {
                    writer_id,
                    segments,
                })
                .collect())
        }
        Protocol::Bundles => {
            let mut words_by_writer: BTreeMap<String, Vec<usize>> = BTreeMap::new();
            for (word_index, (writer, _)) in word_meta.iter().enumerate() {
                words_by_writer
                    .entry(writer.clone())
                    .or_default()
                    .push(word_index);
            }
            let size = bundle_words.max(1);
            let mut units = Vec::new();
            for (writer_id, word_indices) in words_by_writer {
                for chunk in word_indices.chunks(size) {
                    let mut segments = Vec::new();
                    for wi in chunk {
                        if let Some(s) = segments_by_word.get(wi) {
                            segments.extend(s.iter().cloned());
                        }
                    }
                    units.push(TestUnit {
                        writer_id: writer_id.clone(),
                        segments,
                    });
                }
            }
            Ok(units)
        }
    }
}

/// Identification of one ink file as a single unit.
pub fn identify_ink(
    ink: &InkFile,
    model: &WriterModel,
    cfg: &PipelineConfig,
    jobs: Jobs,
) -> Result<IdentificationResult> {
    ensure_mode(model, cfg)?;
    let labeled = ink_to_labeled(ink, cfg, jobs)?;
    let segments: Vec<TestSegment> = labeled.segments.iter().map(to_test_segment).collect();
    let result = identify(model, &segments)?;
    if result.skipped_segments > 0 {
        blog!(
            "identify: {} of {} segments had no covering network",
            result.skipped_segments,
            segments.len()
        );
    }
    Ok(result)
}

/// Full evaluation protocol over a labeled ink corpus.
pub fn evaluate_ink(
    ink: &InkFile,
    model: &WriterModel,
    cfg: &PipelineConfig,
    protocol: Protocol,
    jobs: Jobs,
) -> Result<EvaluationReport> {
    ensure_mode(model, cfg)?;
    let labeled = ink_to_labeled(ink, cfg, jobs)?;
    let units = build_test_units(&labeled, protocol, cfg.bundle_words)?;
    evaluate(&units, model, protocol, jobs)
}

fn ensure_mode(model: &WriterModel, cfg: &PipelineConfig) -> Result<()> {
    if model.mode != cfg.mode {
        return Err(Error::ModeMismatch {
            model: model.mode.as_str().to_string(),
            requested: cfg.mode.as_str().to_string(),
        });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Synthesis profiles file
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub rate_hz: f64,
    pub words_per_writer: usize,
    #[serde(default)]
    pub page_words: Option<usize>,
    pub writers: Vec<SyntheticWriterProfile>,
}

impl SynthSpec {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::parse(origin, e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_toml(&text, &path.display().to_string())
    }
}

/// Serializable identification result with writer names resolved.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultBody {
    pub identified: String,
    pub ranking: Vec<String>,
    pub scores: Vec<f64>,
    pub segment_count: usize,
    pub skipped_segments: usize,
}

impl ResultBody {
    pub fn from_result(result: &IdentificationResult, model: &WriterModel) -> Self {
        ResultBody {
            identified: model.writers[result.identified].clone(),
            ranking: result
                .ranking
                .iter()
                .map(|&i| model.writers[i].clone())
                .collect(),
            scores: result.scores.clone(),
            segment_count: result.segment_count,
            skipped_segments: result.skipped_segments,
        }
    }
}
