//! Writer identification by summed affectation rates, Top-k ranking, and
//! cumulative match characteristic curves.
//!
//! Each test segment is routed to its subgroup network (or the pooled group
//! fallback); the softmax outputs are summed over all segments of a test
//! unit and the writer with the largest sum wins, ties going to the lowest
//! enrolled index.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::WriterModel;
use crate::par::Jobs;
use crate::taxonomy::SegmentClass;

/// One scorable segment of a test unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSegment {
    pub class: SegmentClass,
    pub values: Vec<f64>,
}

/// Affectation rates of one segment: the routed network's per-writer output.
/// `None` when no network covers the segment's class.
pub fn affectation(model: &WriterModel, segment: &TestSegment) -> Result<Option<Vec<f64>>> {
    let Some(net) = model.network_for(segment.class) else {
        return Ok(None);
    };
    let scaled = model.scaler.transform_row(&segment.values);
    net.predict(&scaled).map(Some)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentificationResult {
    /// Per-writer summed affectation, aligned with the model's writer list.
    pub scores: Vec<f64>,
    /// Writer indices by descending score; ties break to the lower index.
    pub ranking: Vec<usize>,
    /// The identified writer: `ranking[0]`.
    pub identified: usize,
    /// Number of segments that contributed to the sum.
    pub segment_count: usize,
    /// Segments skipped because no network covered their class.
    pub skipped_segments: usize,
}

impl IdentificationResult {
    pub fn rank_of(&self, writer: usize) -> usize {
        self.ranking.iter().position(|&w| w == writer).unwrap() + 1
    }
}

pub fn identify(model: &WriterModel, segments: &[TestSegment]) -> Result<IdentificationResult> {
    let mut scores = vec![0.0; model.writers.len()];
    let mut scored = 0usize;
    let mut skipped = 0usize;
    for segment in segments {
        match affectation(model, segment)? {
            Some(rates) => {
                for (acc, r) in scores.iter_mut().zip(&rates) {
                    *acc += r;
                }
                scored += 1;
            }
            None => skipped += 1,
        }
    }
    if scored == 0 {
        return Err(Error::NoEvidence);
    }
    let ranking = rank_descending(&scores);
    Ok(IdentificationResult {
        identified: ranking[0],
        ranking,
        scores,
        segment_count: scored,
        skipped_segments: skipped,
    })
}

/// Indices sorted by descending value; equal values keep index order.
fn rank_descending(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx
}

// ---------------------------------------------------------------------------
// Evaluation protocol harness
// ---------------------------------------------------------------------------

/// Test-unit granularity: one page per test, or fixed-size word bundles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Pages,
    Bundles,
}

impl Protocol {
    /// Ranks reported in the summary table.
    pub fn table_ranks(self) -> [usize; 3] {
        match self {
            Protocol::Pages => [1, 5, 10],
            Protocol::Bundles => [1, 2, 3],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Pages => "pages",
            Protocol::Bundles => "bundles",
        }
    }
}

impl std::str::FromStr for Protocol {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pages" => Ok(Protocol::Pages),
            "bundles" => Ok(Protocol::Bundles),
            other => Err(Error::InvalidConfig {
                detail: format!("unknown protocol {other:?} (expected pages or bundles)"),
            }),
        }
    }
}

/// One labeled test unit (a page or a bundle of words).
#[derive(Debug, Clone, PartialEq)]
pub struct TestUnit {
    pub writer_id: String,
    pub segments: Vec<TestSegment>,
}

/// Cumulative match characteristic: `top_k_rate[k-1]` is the fraction of
/// tests whose true writer ranked at or above k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmcCurve {
    pub top_k_rate: Vec<f64>,
}

impl CmcCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,rate\n");
        for (i, r) in self.top_k_rate.iter().enumerate() {
            out.push_str(&format!("{},{:.6}\n", i + 1, r));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub protocol: Protocol,
    pub tests: usize,
    pub correct: usize,
    /// (k, identification rate) rows of the summary table.
    pub top_k_table: Vec<(usize, f64)>,
    pub cmc: CmcCurve,
    /// Fraction of test segments that had a covering network.
    pub segment_coverage: f64,
    /// Per-unit (true writer, identified writer, rank of true writer).
    pub unit_outcomes: Vec<(String, String, usize)>,
}

impl EvaluationReport {
    pub fn top1(&self) -> f64 {
        self.top_k_table[0].1
    }

    /// Aligned text table of the Top-k identification rates.
    pub fn table_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "tests: {}  correct: {}  coverage: {:.4}\n",
            self.tests, self.correct, self.segment_coverage
        ));
        out.push_str("rank    rate\n");
        for (k, rate) in &self.top_k_table {
            out.push_str(&format!("Top-{:<3} {:6.2}%\n", k, 100.0 * rate));
        }
        out
    }

    pub fn table_csv(&self) -> String {
        let mut out = String::from("k,rate\n");
        for (k, rate) in &self.top_k_table {
            out.push_str(&format!("{k},{rate:.6}\n"));
        }
        out
    }
}

/// Runs one identification per test unit and aggregates ranks.
pub fn evaluate(
    units: &[TestUnit],
    model: &WriterModel,
    protocol: Protocol,
    jobs: Jobs,
) -> Result<EvaluationReport> {
    if units.is_empty() {
        return Err(Error::NoEvidence);
    }
    for unit in units {
        if model.writer_index(&unit.writer_id).is_none() {
            return Err(Error::UnenrolledWriter {
                writer: unit.writer_id.clone(),
            });
        }
    }

    let n_writers = model.writers.len();
    let outcomes: Vec<Result<(usize, Option<usize>, usize, usize)>> =
        crate::par::map(jobs, units, |unit| {
            let truth = model
                .writer_index(&unit.writer_id)
                .expect("checked enrolled above");
            match identify(model, &unit.segments) {
                Ok(result) => Ok((
                    truth,
                    Some(result.identified),
                    result.rank_of(truth),
                    result.segment_count,
                )),
                // A unit with no scorable evidence counts as a miss at the
                // worst possible rank rather than aborting the protocol.
                Err(Error::NoEvidence) => Ok((truth, None, n_writers, 0)),
                Err(other) => Err(other),
            }
        });

    let mut rank_hist = vec![0usize; n_writers + 1];
    let mut correct = 0usize;
    let mut scored_segments = 0usize;
    let mut total_segments = 0usize;
    let mut unit_outcomes = Vec::with_capacity(units.len());
    for (unit, outcome) in units.iter().zip(outcomes) {
        let (truth, identified, rank, scored) = outcome?;
        if identified == Some(truth) {
            correct += 1;
        }
        rank_hist[rank] += 1;
        scored_segments += scored;
        total_segments += unit.segments.len();
        unit_outcomes.push((
            unit.writer_id.clone(),
            identified
                .map(|i| model.writers[i].clone())
                .unwrap_or_else(|| "(no evidence)".to_string()),
            rank,
        ));
    }

    let mut top_k_rate = Vec::with_capacity(n_writers);
    let mut acc = 0usize;
    for k in 1..=n_writers {
        acc += rank_hist[k];
        top_k_rate.push(acc as f64 / units.len() as f64);
    }
    let cmc = CmcCurve { top_k_rate };
    let top_k_table = protocol
        .table_ranks()
        .iter()
        .map(|&k| {
            let rate = cmc.top_k_rate[(k.min(n_writers)) - 1];
            (k, rate)
        })
        .collect();

    Ok(EvaluationReport {
        protocol,
        tests: units.len(),
        correct,
        top_k_table,
        cmc,
        segment_coverage: if total_segments > 0 {
            scored_segments as f64 / total_segments as f64
        } else {
            0.0
        },
        unit_outcomes,
    })
}
