//! Position/shape pre-classification of stroke-pair segments.
//!
//! Every segment gets one of four position groups and one subgroup inside
//! that group (10 / 12 / 10 / 8 subgroups). Subgroups are decided by an
//! ordered first-match rule list over cheap shape descriptors; the last three
//! subgroups of every group are residual fallbacks keyed on the segment's
//! vertical band, so classification is total. All numeric thresholds live in
//! one config record and can be overridden from a rules file.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::fepc_membership;
use crate::ink::Script;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentGroup {
    Beginning,
    Middle,
    End,
    Isolated,
}

impl SegmentGroup {
    pub fn subgroup_count(self) -> u8 {
        match self {
            SegmentGroup::Beginning => 10,
            SegmentGroup::Middle => 12,
            SegmentGroup::End => 10,
            SegmentGroup::Isolated => 8,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SegmentGroup::Beginning => "beginning",
            SegmentGroup::Middle => "middle",
            SegmentGroup::End => "end",
            SegmentGroup::Isolated => "isolated",
        }
    }

    pub const ALL: [SegmentGroup; 4] = [
        SegmentGroup::Beginning,
        SegmentGroup::Middle,
        SegmentGroup::End,
        SegmentGroup::Isolated,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SegmentClass {
    pub group: SegmentGroup,
    /// 1-based subgroup id within the group.
    pub subgroup_id: u8,
}

impl SegmentClass {
    pub fn name(&self, script: Script) -> &'static str {
        subgroup_name(self.group, self.subgroup_id, script)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerticalBand {
    Low,
    Median,
    Top,
}

/// Assigns the position group from the segment's first stroke index and the
/// word's stroke count. Words no longer than one window are isolated;
/// beginning takes precedence over end for longer words.
pub fn assign_group(first_stroke: usize, stroke_count: usize) -> SegmentGroup {
    if stroke_count <= crate::features::STROKES_PER_SEGMENT {
        SegmentGroup::Isolated
    } else if first_stroke == 0 {
        SegmentGroup::Beginning
    } else if first_stroke + crate::features::STROKES_PER_SEGMENT == stroke_count {
        SegmentGroup::End
    } else {
        SegmentGroup::Middle
    }
}

/// Cheap geometric summary of one segment's points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeDescriptors {
    pub start: (f64, f64),
    pub end: (f64, f64),
    pub leftmost: (f64, f64),
    pub rightmost: (f64, f64),
    pub top: (f64, f64),
    pub bottom: (f64, f64),
    /// Fraction of the path at which the lowest point occurs.
    pub bottom_at: f64,
    /// Fraction of the path at which the highest point occurs.
    pub top_at: f64,
    pub width: f64,
    pub height: f64,
    /// Vertical band of the bounding-box center within the word frame.
    pub band: VerticalBand,
    /// Unwrapped sum of tangent-angle deltas along the path.
    pub net_rotation: f64,
    /// Endpoint distance over path length, in [0, 1 + ε].
    pub closure_ratio: f64,
    /// Dominant perceptual-code class per stroke (0 valley, 1 left oblique,
    /// 2 shaft, 3 right oblique).
    pub dominant_epc: [usize; 2],
}

/// Computes descriptors from the segment's points (both strokes
/// concatenated) and the two strokes' major-axis inclinations. Tangent
/// rotation and closure are measured on a polyline resampled at
/// `rotation_min_step` so sample-level noise cannot flip them.
pub fn compute_descriptors(
    points: &[(f64, f64)],
    stroke_thetas: [f64; 2],
    cfg: &TaxonomyConfig,
) -> Result<ShapeDescriptors> {
    let word_height = cfg.word_height;
    if points.len() < 4 {
        return Err(Error::TraceTooShort {
            len: points.len(),
            min: 4,
        });
    }
    let dominant_epc = [
        fepc_membership(stroke_thetas[0]).dominant(),
        fepc_membership(stroke_thetas[1]).dominant(),
    ];

    let mut leftmost = points[0];
    let mut rightmost = points[0];
    let mut top = points[0];
    let mut bottom = points[0];
    let (mut top_i, mut bottom_i) = (0usize, 0usize);
    for (i, &p) in points.iter().enumerate() {
        if p.0 < leftmost.0 {
            leftmost = p;
        }
        if p.0 > rightmost.0 {
            rightmost = p;
        }
        if p.1 > top.1 {
            top = p;
            top_i = i;
        }
        if p.1 < bottom.1 {
            bottom = p;
            bottom_i = i;
        }
    }
    let width = rightmost.0 - leftmost.0;
    let height = top.1 - bottom.1;

    // Resample to anchors at least rotation_min_step apart.
    let min_step = cfg.rotation_min_step.max(1e-9);
    let mut anchors: Vec<(f64, f64)> = vec![points[0]];
    for &p in &points[1..] {
        let last = *anchors.last().unwrap();
        if (p.0 - last.0).hypot(p.1 - last.1) >= min_step {
            anchors.push(p);
        }
    }
    let tail = *points.last().unwrap();
    if anchors.len() == 1 || *anchors.last().unwrap() != tail {
        anchors.push(tail);
    }

    let mut path_length = 0.0;
    let mut net_rotation = 0.0;
    let mut prev_angle: Option<f64> = None;
    for w in anchors.windows(2) {
        let dx = w[1].0 - w[0].0;
        let dy = w[1].1 - w[0].1;
        let step = dx.hypot(dy);
        if step <= 1e-12 {
            continue;
        }
        path_length += step;
        let angle = dy.atan2(dx);
        if let Some(prev) = prev_angle {
            net_rotation += crate::ellipse::wrap_angle(angle - prev);
        }
        prev_angle = Some(angle);
    }

    let start = points[0];
    let end = *points.last().unwrap();
    let closure_ratio = if path_length > 1e-12 {
        (end.0 - start.0).hypot(end.1 - start.1) / path_length
    } else {
        0.0
    };

    let center_y = 0.5 * (top.1 + bottom.1);
    let band = if center_y < word_height / 3.0 {
        VerticalBand::Low
    } else if center_y < 2.0 * word_height / 3.0 {
        VerticalBand::Median
    } else {
        VerticalBand::Top
    };
    let denom = (points.len() - 1).max(1) as f64;

    Ok(ShapeDescriptors {
        start,
        end,
        leftmost,
        rightmost,
        top,
        bottom,
        bottom_at: bottom_i as f64 / denom,
        top_at: top_i as f64 / denom,
        width,
        height,
        band,
        net_rotation,
        closure_ratio,
        dominant_epc,
    })
}

/// Shape-rule thresholds. These operationalize subgroup names the source
/// taxonomy defines only by pictogram; several are provisional and exposed
/// for tuning in the rules file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaxonomyConfig {
    /// Closure ratio below this marks a closed shape.
    pub closure_closed: f64,
    /// Closure ratio at or above this marks an open stroke.
    pub closure_open: f64,
    /// |net rotation| above this marks a narrow (tight) occlusion.
    pub rotation_narrow: f64,
    /// |net rotation| at or above this marks the start of an occlusion.
    pub rotation_loop: f64,
    /// Minimum |net rotation| for an open curve.
    pub rotation_curve: f64,
    /// Width/height aspect at or above this widens an occlusion to "broad".
    pub broad_aspect: f64,
    /// Segments shorter than this (in ink units) are "half" shafts.
    pub half_shaft_height: f64,
    /// Margin (fraction of height) for interior-extremum tests.
    pub interior_margin: f64,
    /// Minimum polyline step (ink units) when accumulating tangent angles;
    /// stabilizes the net rotation against sample-level noise.
    pub rotation_min_step: f64,
    /// Height of the normalized word frame.
    pub word_height: f64,
}

impl Default for TaxonomyConfig {
    fn default() -> Self {
        TaxonomyConfig {
            closure_closed: 0.2,
            closure_open: 0.5,
            rotation_narrow: 3.0 * std::f64::consts::PI / 2.0,
            rotation_loop: std::f64::consts::PI,
            rotation_curve: std::f64::consts::PI / 3.0,
            broad_aspect: 1.0,
            half_shaft_height: 40.0,
            interior_margin: 0.15,
            rotation_min_step: 2.0,
            word_height: 128.0,
        }
    }
}

impl TaxonomyConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::parse(origin, e.to_string()))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_toml(&text, &path.display().to_string())
    }
}

struct Shape<'a> {
    d: &'a ShapeDescriptors,
    cfg: &'a TaxonomyConfig,
}

impl Shape<'_> {
    fn vertical(&self) -> bool {
        self.d.dominant_epc.contains(&2)
    }
    fn valley(&self) -> bool {
        self.d.dominant_epc[0] == 0 && self.d.dominant_epc[1] == 0
    }
    fn ascending(&self) -> bool {
        self.d.end.1 > self.d.start.1
    }
    fn tall(&self) -> bool {
        self.d.height >= self.cfg.half_shaft_height
    }
    fn closed(&self) -> bool {
        self.d.closure_ratio < self.cfg.closure_closed
    }
    fn narrow_occlusion(&self) -> bool {
        self.closed() && self.d.net_rotation.abs() > self.cfg.rotation_narrow
    }
    fn broad_occlusion(&self) -> bool {
        self.closed()
            && self.d.height > 1e-9
            && self.d.width / self.d.height >= self.cfg.broad_aspect
    }
    fn occlusion_start(&self) -> bool {
        !self.closed()
            && self.d.closure_ratio < self.cfg.closure_open
            && self.d.net_rotation.abs() >= self.cfg.rotation_loop
    }
    fn open_curve(&self) -> bool {
        self.d.closure_ratio >= self.cfg.closure_open
            && self.d.net_rotation.abs() >= self.cfg.rotation_curve
    }
    /// Positive net rotation curves open to the right, negative to the left.
    fn curve_right(&self) -> bool {
        self.open_curve() && self.d.net_rotation > 0.0
    }
    fn curve_left(&self) -> bool {
        self.open_curve() && self.d.net_rotation < 0.0
    }
    fn pocket(&self) -> bool {
        let m = self.cfg.interior_margin;
        let lift = m * self.d.height.max(1e-9);
        self.d.bottom_at > m
            && self.d.bottom_at < 1.0 - m
            && self.d.start.1 > self.d.bottom.1 + lift
            && self.d.end.1 > self.d.bottom.1 + lift
    }
    fn arch(&self) -> bool {
        let m = self.cfg.interior_margin;
        let drop = m * self.d.height.max(1e-9);
        self.d.top_at > m
            && self.d.top_at < 1.0 - m
            && self.d.start.1 < self.d.top.1 - drop
            && self.d.end.1 < self.d.top.1 - drop
    }
    fn descending_hook(&self) -> bool {
        !self.ascending()
            && self.d.closure_ratio >= self.cfg.closure_open
            && self.d.net_rotation.abs() >= self.cfg.rotation_curve
    }
    fn residual(&self, base: u8) -> u8 {
        match self.d.band {
            VerticalBand::Low => base,
            VerticalBand::Top => base + 1,
            VerticalBand::Median => base + 2,
        }
    }
}

/// First-match subgroup assignment; the residual band subgroups make it
/// total. Rule order is fixed: occlusions, then curves and specific shapes,
/// then shafts, then residuals.
pub fn assign_subgroup(
    group: SegmentGroup,
    descriptors: &ShapeDescriptors,
    cfg: &TaxonomyConfig,
) -> SegmentClass {
    let s = Shape {
        d: descriptors,
        cfg,
    };
    let subgroup_id = match group {
        SegmentGroup::Beginning => {
            if s.narrow_occlusion() {
                7
            } else if s.broad_occlusion() {
                6
            } else if s.curve_right() {
                1
            } else if s.curve_left() {
                2
            } else if s.vertical() && s.tall() && s.ascending() {
                3
            } else if s.vertical() && s.tall() {
                4
            } else if s.vertical() {
                5
            } else {
                s.residual(8)
            }
        }
        SegmentGroup::Middle => {
            if s.narrow_occlusion() {
                7
            } else if s.broad_occlusion() {
                3
            } else if s.closed() {
                5
            } else if s.occlusion_start() {
                4
            } else if s.arch() {
                8
            } else if s.valley() {
                9
            } else if s.vertical() && s.tall() && s.ascending() {
                1
            } else if s.vertical() && s.tall() {
                2
            } else if s.vertical() {
                6
            } else {
                s.residual(10)
            }
        }
        SegmentGroup::End => {
            if s.narrow_occlusion() {
                6
            } else if s.closed() {
                5
            } else if s.pocket() {
                7
            } else if s.descending_hook() {
                4
            } else if s.vertical() && s.tall() && s.ascending() {
                1
            } else if s.vertical() && s.tall() {
                2
            } else if s.vertical() {
                3
            } else {
                s.residual(8)
            }
        }
        SegmentGroup::Isolated => {
            if s.closed() {
                5
            } else if s.occlusion_start() {
                2
            } else if s.pocket() {
                3
            } else if s.descending_hook() {
                4
            } else if s.vertical() && s.tall() {
                1
            } else {
                s.residual(6)
            }
        }
    };
    SegmentClass { group, subgroup_id }
}

/// Display name for a subgroup id. Latin/Arabic rows that share an id differ
/// only in name; the script picks which to show.
pub fn subgroup_name(group: SegmentGroup, id: u8, script: Script) -> &'static str {
    let arabic = script == Script::Arabic;
    match (group, id) {
        (SegmentGroup::Beginning, 1) => "opened right curve",
        (SegmentGroup::Beginning, 2) => "opened left curve",
        (SegmentGroup::Beginning, 3) => "beginning ascending shaft",
        (SegmentGroup::Beginning, 4) => "beginning descending shaft",
        (SegmentGroup::Beginning, 5) => "half shaft in the beginning",
        (SegmentGroup::Beginning, 6) => "broad occlusion in the beginning",
        (SegmentGroup::Beginning, 7) if arabic => "nabra in the beginning",
        (SegmentGroup::Beginning, 7) => "occlusion e beginning",
        (SegmentGroup::Beginning, 8) => "residual segments in the low",
        (SegmentGroup::Beginning, 9) => "residual segments in the top",
        (SegmentGroup::Beginning, 10) => "residual segments in the median",

        (SegmentGroup::Middle, 1) => "medium ascending shaft",
        (SegmentGroup::Middle, 2) => "medium descending shaft",
        (SegmentGroup::Middle, 3) => "broad occlusion in the medium",
        (SegmentGroup::Middle, 4) => "begin of occlusion in the medium",
        (SegmentGroup::Middle, 5) => "medium occlusion",
        (SegmentGroup::Middle, 6) => "half shaft in the medium",
        (SegmentGroup::Middle, 7) if arabic => "narrow occlusion in the medium",
        (SegmentGroup::Middle, 7) => "e in the medium",
        (SegmentGroup::Middle, 8) if arabic => "middle half nabra",
        (SegmentGroup::Middle, 8) => "n in the medium",
        (SegmentGroup::Middle, 9) if arabic => "ligature madda",
        (SegmentGroup::Middle, 9) => "medium valley",
        (SegmentGroup::Middle, 10) => "residual segments in the low",
        (SegmentGroup::Middle, 11) => "residual segments in the top",
        (SegmentGroup::Middle, 12) => "residual segments in the median",

        (SegmentGroup::End, 1) => "end ascending shaft",
        (SegmentGroup::End, 2) => "end descending shaft",
        (SegmentGroup::End, 3) => "half shaft in the end",
        (SegmentGroup::End, 4) => "curvy leg end",
        (SegmentGroup::End, 5) => "end occlusion",
        (SegmentGroup::End, 6) if arabic => "narrow occlusion in the end",
        (SegmentGroup::End, 6) => "e in the end",
        (SegmentGroup::End, 7) if arabic => "nabra in the end",
        (SegmentGroup::End, 7) => "pocket leg end",
        (SegmentGroup::End, 8) => "residual segments in the low",
        (SegmentGroup::End, 9) => "residual segments in the top",
        (SegmentGroup::End, 10) => "residual segments in the median",

        (SegmentGroup::Isolated, 1) => "isolated shaft",
        (SegmentGroup::Isolated, 2) => "isolated begin of occlusion",
        (SegmentGroup::Isolated, 3) => "isolated pocket",
        (SegmentGroup::Isolated, 4) if arabic => "diacritics",
        (SegmentGroup::Isolated, 4) => "isolated j",
        (SegmentGroup::Isolated, 5) if arabic => "curvy leg isolated",
        (SegmentGroup::Isolated, 5) => "isolated O occlusion",
        (SegmentGroup::Isolated, 6) => "residual segments in the low",
        (SegmentGroup::Isolated, 7) => "residual segments in the top",
        (SegmentGroup::Isolated, 8) => "residual segments in the median",

        _ => "unknown subgroup",
    }
}
