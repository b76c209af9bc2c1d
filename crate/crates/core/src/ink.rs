//! Ink data model, file ingestion/serialization, and preprocessing.
//!
//! The on-disk format is a small JSON schema: a file holds words, words hold
//! pen-down traces, traces hold timestamped points. `save_ink` always emits
//! the canonical form (fixed key order, 6 decimal places), so
//! `save_ink(load_ink(f))` is a canonicalizer and is byte-idempotent.

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::filter::cheby2_lowpass;

pub const INK_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InkSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

/// One continuous pen-down movement.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub samples: Vec<InkSample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Script {
    Latin,
    Arabic,
    Other,
}

impl Script {
    pub fn as_str(self) -> &'static str {
        match self {
            Script::Latin => "latin",
            Script::Arabic => "arabic",
            Script::Other => "other",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Word {
    pub writer_id: Option<String>,
    pub script: Script,
    /// Optional page tag used by the page-level evaluation protocol.
    pub page: Option<String>,
    pub traces: Vec<Trace>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InkFile {
    pub sample_rate_hz: Option<f64>,
    pub words: Vec<Word>,
}

impl Trace {
    pub fn duration(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }
}

impl Word {
    /// Bounding box as (min_x, min_y, max_x, max_y) over every sample.
    pub fn bounding_box(&self) -> Option<(f64, f64, f64, f64)> {
        let mut bb: Option<(f64, f64, f64, f64)> = None;
        for trace in &self.traces {
            for s in &trace.samples {
                bb = Some(match bb {
                    None => (s.x, s.y, s.x, s.y),
                    Some((x0, y0, x1, y1)) => {
                        (x0.min(s.x), y0.min(s.y), x1.max(s.x), y1.max(s.y))
                    }
                });
            }
        }
        bb
    }
}

// ---------------------------------------------------------------------------
// Loading
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
struct RawInkFile {
    version: u32,
    #[serde(default)]
    sample_rate_hz: Option<f64>,
    words: Vec<RawWord>,
}

#[derive(Deserialize)]
struct RawWord {
    #[serde(default)]
    writer_id: Option<String>,
    #[serde(default)]
    script: Option<Script>,
    #[serde(default)]
    page: Option<String>,
    traces: Vec<RawTrace>,
}

#[derive(Deserialize)]
struct RawTrace {
    points: Vec<RawPoint>,
}

#[derive(Deserialize)]
struct RawPoint {
    t: f64,
    x: f64,
    y: f64,
}

pub fn load_ink(path: impl AsRef<Path>) -> Result<InkFile> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_ink(&text, &path.display().to_string())
}

pub fn parse_ink(text: &str, origin: &str) -> Result<InkFile> {
    let raw: RawInkFile =
        serde_json::from_str(text).map_err(|e| Error::parse(origin, e.to_string()))?;
    if raw.version != INK_FORMAT_VERSION {
        return Err(Error::SchemaVersion {
            expected: format!("ink version {INK_FORMAT_VERSION}"),
            found: format!("ink version {}", raw.version),
        });
    }

    let mut words = Vec::with_capacity(raw.words.len());
    for (wi, rw) in raw.words.into_iter().enumerate() {
        if rw.traces.is_empty() {
            return Err(Error::EmptyWord { word: wi });
        }
        let mut traces = Vec::with_capacity(rw.traces.len());
        for (ti, rt) in rw.traces.into_iter().enumerate() {
            if rt.points.len() < 2 {
                return Err(Error::EmptyTrace { word: wi, trace: ti });
            }
            let mut samples = Vec::with_capacity(rt.points.len());
            let mut prev_t = f64::NEG_INFINITY;
            for (si, p) in rt.points.into_iter().enumerate() {
                if !(p.t.is_finite() && p.x.is_finite() && p.y.is_finite()) {
                    return Err(Error::NonFiniteCoordinate {
                        word: wi,
                        trace: ti,
                        sample: si,
                    });
                }
                if p.t <= prev_t {
                    return Err(Error::NonMonotoneTimestamps {
                        word: wi,
                        trace: ti,
                        sample: si,
                    });
                }
                prev_t = p.t;
                samples.push(InkSample {
                    t: p.t,
                    x: p.x,
                    y: p.y,
                });
            }
            traces.push(Trace { samples });
        }
        words.push(Word {
            writer_id: rw.writer_id,
            script: rw.script.unwrap_or(Script::Other),
            page: rw.page,
            traces,
        });
    }
    Ok(InkFile {
        sample_rate_hz: raw.sample_rate_hz,
        words,
    })
}

// ---------------------------------------------------------------------------
// Canonical serialization
// ---------------------------------------------------------------------------

fn fmt6(v: f64) -> String {
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}

pub fn to_canonical_json(ink: &InkFile) -> String {
    let mut out = String::with_capacity(4096);
    out.push_str(&format!("{{\"version\": {INK_FORMAT_VERSION}"));
    if let Some(rate) = ink.sample_rate_hz {
        out.push_str(&format!(", \"sample_rate_hz\": {}", fmt6(rate)));
    }
    out.push_str(", \"words\": [");
    for (wi, word) in ink.words.iter().enumerate() {
        if wi > 0 {
            out.push_str(", ");
        }
        out.push('{');
        if let Some(id) = &word.writer_id {
            out.push_str(&format!("\"writer_id\": {}, ", json_str(id)));
        }
        out.push_str(&format!("\"script\": \"{}\"", word.script.as_str()));
        if let Some(page) = &word.page {
            out.push_str(&format!(", \"page\": {}", json_str(page)));
        }
        out.push_str(", \"traces\": [");
        for (ti, trace) in word.traces.iter().enumerate() {
            if ti > 0 {
                out.push_str(", ");
            }
            out.push_str("{\"points\": [");
            for (si, s) in trace.samples.iter().enumerate() {
                if si > 0 {
                    out.push_str(", ");
                }
                out.push_str(&format!(
                    "{{\"t\": {}, \"x\": {}, \"y\": {}}}",
                    fmt6(s.t),
                    fmt6(s.x),
                    fmt6(s.y)
                ));
            }
            out.push_str("]}");
        }
        out.push_str("]}");
    }
    out.push_str("]}\n");
    out
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("string serialization")
}

pub fn save_ink(ink: &InkFile, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_canonical_json(ink))
        .map_err(|e| Error::io(path.display().to_string(), e))
}

// ---------------------------------------------------------------------------
// Preprocessing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, serde::Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub cutoff_hz: f64,
    pub target_height: f64,
    pub filter_order: usize,
    pub stopband_attenuation_db: f64,
    /// Resolved from the file header or inferred from timestamps when absent.
    pub sample_rate_hz: Option<f64>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            cutoff_hz: 12.0,
            target_height: 128.0,
            filter_order: 4,
            stopband_attenuation_db: 40.0,
            sample_rate_hz: None,
        }
    }
}

impl PreprocessConfig {
    /// Resolves the working sample rate: explicit config wins, then the file
    /// header, then the median reciprocal timestamp delta.
    pub fn resolve_rate(&self, ink: &InkFile) -> Result<f64> {
        if let Some(r) = self.sample_rate_hz {
            return Ok(r);
        }
        if let Some(r) = ink.sample_rate_hz {
            return Ok(r);
        }
        infer_sample_rate(ink)
    }

    pub fn with_rate(mut self, rate: f64) -> Self {
        self.sample_rate_hz = Some(rate);
        self
    }
}

pub fn infer_sample_rate(ink: &InkFile) -> Result<f64> {
    let mut deltas = Vec::new();
    for word in &ink.words {
        for trace in &word.traces {
            for pair in trace.samples.windows(2) {
                let dt = pair[1].t - pair[0].t;
                if dt > 0.0 {
                    deltas.push(dt);
                }
            }
        }
    }
    if deltas.is_empty() {
        return Err(Error::InvalidConfig {
            detail: "cannot infer sample rate: no timestamp deltas".into(),
        });
    }
    deltas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = deltas[deltas.len() / 2];
    Ok(1.0 / median)
}

/// Resamples a trace onto a uniform grid at `rate` by linear interpolation.
/// Traces already uniform at that rate pass through unchanged.
pub fn resample_uniform(trace: &Trace, rate: f64) -> Result<Trace> {
    if trace.samples.len() < 2 {
        return Err(Error::TraceTooShort {
            len: trace.samples.len(),
            min: 2,
        });
    }
    let step = 1.0 / rate;
    let uniform = trace
        .samples
        .windows(2)
        .all(|p| ((p[1].t - p[0].t) - step).abs() <= 1e-9 * step);
    if uniform {
        return Ok(trace.clone());
    }

    let t0 = trace.samples[0].t;
    let t_end = trace.samples.last().unwrap().t;
    let n = (((t_end - t0) * rate).round() as usize).max(1) + 1;
    let mut out = Vec::with_capacity(n);
    let mut src = 0usize;
    for i in 0..n {
        let t = (t0 + i as f64 * step).min(t_end);
        while src + 2 < trace.samples.len() && trace.samples[src + 1].t < t {
            src += 1;
        }
        let a = trace.samples[src];
        let b = trace.samples[src + 1];
        let w = ((t - a.t) / (b.t - a.t)).clamp(0.0, 1.0);
        out.push(InkSample {
            t,
            x: a.x + w * (b.x - a.x),
            y: a.y + w * (b.y - a.y),
        });
    }
    Ok(Trace { samples: out })
}

/// Zero-phase low-pass on x and y independently; timestamps unchanged.
pub fn lowpass_filter(trace: &Trace, cfg: &PreprocessConfig) -> Result<Trace> {
    let rate = cfg.sample_rate_hz.ok_or_else(|| Error::InvalidConfig {
        detail: "sample_rate_hz must be resolved before filtering".into(),
    })?;
    let filter = cheby2_lowpass(
        cfg.filter_order,
        cfg.stopband_attenuation_db,
        cfg.cutoff_hz,
        rate,
    )?;
    let xs: Vec<f64> = trace.samples.iter().map(|s| s.x).collect();
    let ys: Vec<f64> = trace.samples.iter().map(|s| s.y).collect();
    let fx = filter.filtfilt(&xs)?;
    let fy = filter.filtfilt(&ys)?;
    Ok(Trace {
        samples: trace
            .samples
            .iter()
            .zip(fx.into_iter().zip(fy))
            .map(|(s, (x, y))| InkSample { t: s.t, x, y })
            .collect(),
    })
}

/// Scales the word so its height equals `target_height`, preserving the
/// width/height ratio, and translates it to min-x = 0, min-y = 0.
pub fn normalize_height(word: &Word, cfg: &PreprocessConfig) -> Result<Word> {
    let (min_x, min_y, _max_x, max_y) = word.bounding_box().ok_or(Error::DegenerateWord)?;
    let height = max_y - min_y;
    if height <= 1e-12 {
        return Err(Error::DegenerateWord);
    }
    let scale = cfg.target_height / height;
    let mut out = word.clone();
    for trace in &mut out.traces {
        for s in &mut trace.samples {
            s.x = (s.x - min_x) * scale;
            s.y = (s.y - min_y) * scale;
        }
    }
    Ok(out)
}

/// Full preprocessing for one word: per-trace uniform resampling and
/// filtering (pen-up gaps are never filtered across), then size
/// normalization.
pub fn preprocess_word(word: &Word, cfg: &PreprocessConfig) -> Result<Word> {
    let mut filtered = word.clone();
    for trace in &mut filtered.traces {
        let rate = cfg.sample_rate_hz.ok_or_else(|| Error::InvalidConfig {
            detail: "sample_rate_hz must be resolved before preprocessing".into(),
        })?;
        let resampled = resample_uniform(trace, rate)?;
        *trace = lowpass_filter(&resampled, cfg)?;
    }
    normalize_height(&filtered, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_file_json() -> &'static str {
        r#"{"version": 1, "sample_rate_hz": 100.0, "words": [{"writer_id": "w01", "script": "latin", "traces": [{"points": [{"t": 0.00, "x": 12.5, "y": 30.1}, {"t": 0.01, "x": 13.0, "y": 31.0}, {"t": 0.02, "x": 13.5, "y": 31.5}]}]}]}"#
    }

    #[test]
    fn load_single_word() {
        let ink = parse_ink(sample_file_json(), "test").unwrap();
        assert_eq!(ink.words.len(), 1);
        assert_eq!(ink.words[0].traces.len(), 1);
        assert_eq!(ink.words[0].traces[0].samples.len(), 3);
        assert_eq!(ink.words[0].writer_id.as_deref(), Some("w01"));
        assert_eq!(ink.words[0].script, Script::Latin);
        assert_eq!(ink.sample_rate_hz, Some(100.0));
    }

    #[test]
    fn canonicalization_is_idempotent() {
        let ink = parse_ink(sample_file_json(), "test").unwrap();
        let once = to_canonical_json(&ink);
        let twice = to_canonical_json(&parse_ink(&once, "test").unwrap());
        assert_eq!(once, twice);
    }

    #[test]
    fn non_monotone_timestamps_rejected() {
        let text = r#"{"version": 1, "words": [{"traces": [{"points": [{"t": 0.0, "x": 0.0, "y": 0.0}, {"t": 0.0, "x": 1.0, "y": 0.0}, {"t": 0.1, "x": 2.0, "y": 0.0}]}]}]}"#;
        let err = parse_ink(text, "test").unwrap_err();
        assert!(matches!(err, Error::NonMonotoneTimestamps { sample: 1, .. }));
        assert!(err.to_string().contains("non-monotone timestamps"));
    }

    #[test]
    fn single_point_trace_rejected() {
        let text =
            r#"{"version": 1, "words": [{"traces": [{"points": [{"t": 0.0, "x": 0.0, "y": 0.0}]}]}]}"#;
        assert!(matches!(
            parse_ink(text, "test"),
            Err(Error::EmptyTrace { .. })
        ));
    }

    #[test]
    fn malformed_json_has_context() {
        let err = parse_ink("{\"version\": 1, \"words\": [{]}", "bad.json").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bad.json"), "{msg}");
    }

    #[test]
    fn wrong_version_is_schema_error() {
        let text = r#"{"version": 7, "words": []}"#;
        assert!(matches!(
            parse_ink(text, "test"),
            Err(Error::SchemaVersion { .. })
        ));
    }

    fn word_with_box(width: f64, height: f64) -> Word {
        let mk = |pts: Vec<(f64, f64, f64)>| Trace {
            samples: pts
                .into_iter()
                .map(|(t, x, y)| InkSample { t, x, y })
                .collect(),
        };
        Word {
            writer_id: None,
            script: Script::Other,
            page: None,
            traces: vec![
                mk(vec![(0.0, 10.0, 5.0), (0.01, 10.0 + width, 5.0 + height)]),
                mk(vec![
                    (0.2, 10.0, 5.0 + height),
                    (0.21, 10.0 + width / 2.0, 5.0),
                ]),
            ],
        }
    }

    #[test]
    fn normalize_scales_height_and_width_together() {
        let cfg = PreprocessConfig::default();
        let word = word_with_box(512.0, 256.0);
        let out = normalize_height(&word, &cfg).unwrap();
        let (min_x, min_y, max_x, max_y) = out.bounding_box().unwrap();
        assert!((max_y - min_y - 128.0).abs() < 1e-9);
        assert!((max_x - min_x - 256.0).abs() < 1e-9);
        assert!(min_x.abs() < 1e-12 && min_y.abs() < 1e-12);
    }

    #[test]
    fn normalize_is_idempotent() {
        let cfg = PreprocessConfig::default();
        let word = word_with_box(300.0, 128.0);
        let once = normalize_height(&word, &cfg).unwrap();
        let twice = normalize_height(&once, &cfg).unwrap();
        for (a, b) in once.traces.iter().zip(&twice.traces) {
            for (sa, sb) in a.samples.iter().zip(&b.samples) {
                assert!((sa.x - sb.x).abs() < 1e-12);
                assert!((sa.y - sb.y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn normalize_rejects_flat_word() {
        let cfg = PreprocessConfig::default();
        let word = word_with_box(100.0, 0.0);
        assert!(matches!(
            normalize_height(&word, &cfg),
            Err(Error::DegenerateWord)
        ));
    }

    #[test]
    fn resample_fills_uneven_gaps() {
        let trace = Trace {
            samples: vec![
                InkSample { t: 0.0, x: 0.0, y: 0.0 },
                InkSample { t: 0.03, x: 3.0, y: 6.0 },
                InkSample { t: 0.04, x: 4.0, y: 8.0 },
            ],
        };
        let out = resample_uniform(&trace, 100.0).unwrap();
        assert_eq!(out.samples.len(), 5);
        for (i, s) in out.samples.iter().enumerate() {
            assert!((s.t - 0.01 * i as f64).abs() < 1e-12);
            assert!((s.x - i as f64).abs() < 1e-9);
            assert!((s.y - 2.0 * i as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn resample_passes_through_uniform_traces() {
        let trace = Trace {
            samples: (0..10)
                .map(|i| InkSample {
                    t: i as f64 * 0.01,
                    x: i as f64,
                    y: 0.5,
                })
                .collect(),
        };
        let out = resample_uniform(&trace, 100.0).unwrap();
        assert_eq!(out, trace);
    }

    #[test]
    fn infer_rate_from_median_delta() {
        let ink = InkFile {
            sample_rate_hz: None,
            words: vec![Word {
                writer_id: None,
                script: Script::Other,
                page: None,
                traces: vec![Trace {
                    samples: (0..20)
                        .map(|i| InkSample {
                            t: i as f64 * 0.005,
                            x: i as f64,
                            y: 0.0,
                        })
                        .collect(),
                }],
            }],
        };
        let rate = infer_sample_rate(&ink).unwrap();
        assert!((rate - 200.0).abs() < 1e-6);
    }
}
