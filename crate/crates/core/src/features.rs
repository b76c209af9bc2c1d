//! Per-stroke feature extraction and fuzzy perceptual-code memberships.
//!
//! Each fitted stroke yields 14 numbers: seven kinematic (duration, peak
//! fraction, rise exponent, amplitude, endpoint velocities, amplitude over
//! mean drag) and seven geometric (the three free arc lengths, three angles,
//! and the stroke's position code). The fuzzy coding adds four membership
//! degrees over the line-orientation classes valley / left oblique / shaft /
//! right oblique.
//!
//! Membership arithmetic runs on an integer grid of π/2²⁴ so branch decisions
//! are exact, memberships are dyadic rationals summing to exactly one, and
//! the coding is bit-deterministic and exactly π-periodic on the grid.

use serde::{Deserialize, Serialize};

use crate::beta::BetaStroke;
use crate::error::{Error, Result};

pub const EBE_FEATURES_PER_STROKE: usize = 14;
pub const FEPC_FEATURES_PER_STROKE: usize = 4;
pub const STROKES_PER_SEGMENT: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureMode {
    #[serde(rename = "ebe")]
    Ebe,
    #[serde(rename = "ebe+fepc")]
    EbeFepc,
}

impl FeatureMode {
    pub fn per_stroke(self) -> usize {
        match self {
            FeatureMode::Ebe => EBE_FEATURES_PER_STROKE,
            FeatureMode::EbeFepc => EBE_FEATURES_PER_STROKE + FEPC_FEATURES_PER_STROKE,
        }
    }

    /// Flat segment length: 28 without the fuzzy codes, 36 with them.
    pub fn segment_len(self) -> usize {
        STROKES_PER_SEGMENT * self.per_stroke()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureMode::Ebe => "ebe",
            FeatureMode::EbeFepc => "ebe+fepc",
        }
    }
}

impl std::str::FromStr for FeatureMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ebe" => Ok(FeatureMode::Ebe),
            "ebe+fepc" => Ok(FeatureMode::EbeFepc),
            other => Err(Error::InvalidConfig {
                detail: format!("unknown feature mode {other:?} (expected ebe or ebe+fepc)"),
            }),
        }
    }
}

/// Position of a stroke within its word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrokePosition {
    Beginning,
    Middle,
    End,
    Isolated,
}

impl StrokePosition {
    pub fn code(self) -> f64 {
        match self {
            StrokePosition::Beginning => 0.0,
            StrokePosition::Middle => 1.0,
            StrokePosition::End => 2.0,
            StrokePosition::Isolated => 3.0,
        }
    }
}

pub fn stroke_position(index: usize, stroke_count: usize) -> StrokePosition {
    if stroke_count <= 1 {
        StrokePosition::Isolated
    } else if index == 0 {
        StrokePosition::Beginning
    } else if index == stroke_count - 1 {
        StrokePosition::End
    } else {
        StrokePosition::Middle
    }
}

/// The 14 per-stroke features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrokeFeatures {
    pub duration: f64,
    pub peak_fraction: f64,
    pub rise_exponent: f64,
    pub amplitude: f64,
    pub start_velocity: f64,
    pub end_velocity: f64,
    pub amplitude_over_drag: f64,
    pub semi_major_1: f64,
    pub semi_minor_1: f64,
    pub semi_minor_2: f64,
    pub tangent_start: f64,
    pub theta: f64,
    pub tangent_end: f64,
    pub position_code: f64,
}

impl StrokeFeatures {
    pub fn to_array(self) -> [f64; EBE_FEATURES_PER_STROKE] {
        [
            self.duration,
            self.peak_fraction,
            self.rise_exponent,
            self.amplitude,
            self.start_velocity,
            self.end_velocity,
            self.amplitude_over_drag,
            self.semi_major_1,
            self.semi_minor_1,
            self.semi_minor_2,
            self.tangent_start,
            self.theta,
            self.tangent_end,
            self.position_code,
        ]
    }
}

pub fn extract_stroke_features(stroke: &BetaStroke, position: StrokePosition) -> StrokeFeatures {
    let arcs = &stroke.arcs;
    // Impulse-free strokes get fixed placeholder kinematics so downstream
    // vectors stay finite and the degeneracy remains visible.
    let (amplitude, peak_fraction, rise_exponent, amplitude_over_drag) =
        if stroke.degenerate_impulse {
            (0.0, 0.5, 1.0, 0.0)
        } else {
            let mean_drag = stroke.drag.mean_velocity();
            let ratio = if mean_drag > 1e-12 {
                stroke.pulse.amplitude / mean_drag
            } else {
                0.0
            };
            (
                stroke.pulse.amplitude,
                stroke.pulse.peak_fraction(),
                stroke.pulse.rise_exponent,
                ratio,
            )
        };
    StrokeFeatures {
        duration: stroke.pulse.duration(),
        peak_fraction,
        rise_exponent,
        amplitude,
        start_velocity: stroke.drag.start_velocity,
        end_velocity: stroke.drag.end_velocity,
        amplitude_over_drag,
        semi_major_1: arcs.semi_major_1,
        semi_minor_1: arcs.semi_minor_1,
        semi_minor_2: arcs.semi_minor_2,
        tangent_start: arcs.tangent_start,
        theta: arcs.theta,
        tangent_end: arcs.tangent_end,
        position_code: position.code(),
    }
}

// ---------------------------------------------------------------------------
// Fuzzy elementary perceptual codes
// ---------------------------------------------------------------------------

/// Membership degrees over the four line-orientation classes. At most two
/// are nonzero and they always sum to exactly 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FepcMembership {
    pub valley: f64,
    pub left_oblique: f64,
    pub shaft: f64,
    pub right_oblique: f64,
}

impl FepcMembership {
    pub fn to_array(self) -> [f64; FEPC_FEATURES_PER_STROKE] {
        [self.valley, self.left_oblique, self.shaft, self.right_oblique]
    }

    pub fn sum(self) -> f64 {
        self.valley + self.left_oblique + self.shaft + self.right_oblique
    }

    /// Index of the strongest class: 0 valley, 1 left oblique, 2 shaft,
    /// 3 right oblique. Ties go to the lower index.
    pub fn dominant(self) -> usize {
        let a = self.to_array();
        let mut best = 0;
        for (i, &v) in a.iter().enumerate() {
            if v > a[best] {
                best = i;
            }
        }
        best
    }
}

/// Angle grid: [0, π) divided into 2²⁴ steps.
const GRID: i64 = 1 << 24;
/// Region half-width π/8 in grid units.
const REGION_HALF: i64 = GRID / 8;
/// Crossfade half-width π/16 in grid units.
const CROSSFADE: i64 = GRID / 16;

/// Fuzzy membership of a line orientation. Region centers sit at 0 (valley),
/// π/4 (left oblique), π/2 (shaft), and 3π/4 (right oblique); across each
/// region boundary the membership crossfades linearly over ±π/16.
pub fn fepc_membership(theta: f64) -> FepcMembership {
    let u = theta.rem_euclid(std::f64::consts::PI);
    let idx = ((u / std::f64::consts::PI) * GRID as f64).round() as i64 % GRID;

    let region = (((idx + REGION_HALF) % GRID) / (2 * REGION_HALF)) as usize;
    let center = region as i64 * 2 * REGION_HALF;
    // Signed offset from the region center, wrapped for the valley region.
    let mut off = idx - center;
    if off > GRID / 2 {
        off -= GRID;
    }
    let mut m = [0.0f64; 4];
    let to_lower = REGION_HALF + off; // distance above the lower boundary
    let to_upper = REGION_HALF - off; // distance below the upper boundary
    if to_lower < CROSSFADE {
        let own = (CROSSFADE + to_lower) as f64 / (2 * CROSSFADE) as f64;
        m[region] = own;
        m[(region + 3) % 4] = 1.0 - own;
    } else if to_upper < CROSSFADE {
        let own = (CROSSFADE + to_upper) as f64 / (2 * CROSSFADE) as f64;
        m[region] = own;
        m[(region + 1) % 4] = 1.0 - own;
    } else {
        m[region] = 1.0;
    }
    FepcMembership {
        valley: m[0],
        left_oblique: m[1],
        shaft: m[2],
        right_oblique: m[3],
    }
}

// ---------------------------------------------------------------------------
// Segment vectors
// ---------------------------------------------------------------------------

/// Features of one sliding window of two consecutive strokes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentFeatures {
    pub strokes: [StrokeFeatures; STROKES_PER_SEGMENT],
    pub fepc: [FepcMembership; STROKES_PER_SEGMENT],
    pub mode: FeatureMode,
}

impl SegmentFeatures {
    /// Flat vector: [stroke1, (fepc1), stroke2, (fepc2)].
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.mode.segment_len());
        for i in 0..STROKES_PER_SEGMENT {
            out.extend_from_slice(&self.strokes[i].to_array());
            if self.mode == FeatureMode::EbeFepc {
                out.extend_from_slice(&self.fepc[i].to_array());
            }
        }
        out
    }
}

/// Builds the feature window over strokes `first` and `first + 1` of a word
/// with `stroke_count` strokes in total.
pub fn build_segment_features(
    strokes: &[&BetaStroke; STROKES_PER_SEGMENT],
    first_index: usize,
    stroke_count: usize,
    mode: FeatureMode,
) -> SegmentFeatures {
    let positions = [
        stroke_position(first_index, stroke_count),
        stroke_position(first_index + 1, stroke_count),
    ];
    let features = [
        extract_stroke_features(strokes[0], positions[0]),
        extract_stroke_features(strokes[1], positions[1]),
    ];
    let fepc = [
        fepc_membership(features[0].theta),
        fepc_membership(features[1].theta),
    ];
    SegmentFeatures {
        strokes: features,
        fepc,
        mode,
    }
}

/// Sliding stride-1 windows of two strokes: a word of n strokes yields n − 1
/// segments, and words with fewer than two strokes yield none.
pub fn segment_windows(stroke_count: usize) -> impl Iterator<Item = usize> {
    0..stroke_count.saturating_sub(1)
}
