//! Curvilinear velocity profile and stroke segmentation.
//!
//! A trace is cut into strokes at interior velocity minima (gated by a
//! prominence threshold so noise dips are ignored) and at double-inflexion
//! points of the velocity, where its second derivative changes sign on both
//! sides of a near-flat first derivative. Adjacent strokes share their
//! boundary sample.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ink::Trace;

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityProfile {
    pub t: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryKind {
    TraceStart,
    VelocityMinimum,
    DoubleInflexion,
    TraceEnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrokeBoundary {
    pub index: usize,
    pub kind: BoundaryKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentationConfig {
    /// Minimum accepted prominence of an interior velocity minimum, as a
    /// fraction of the profile's maximum velocity.
    pub min_prominence: f64,
    /// Window half-width (samples) for sign changes of the second derivative
    /// around a double-inflexion candidate.
    pub inflexion_window: usize,
    /// A double-inflexion candidate needs |v'| below this fraction of the
    /// profile's maximum |v'|.
    pub inflexion_flatness: f64,
    /// Shortest admissible stroke, in samples.
    pub min_stroke_samples: usize,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        SegmentationConfig {
            min_prominence: 0.05,
            inflexion_window: 3,
            inflexion_flatness: 0.10,
            min_stroke_samples: 5,
        }
    }
}

/// Curvilinear velocity by finite differences: central in the interior,
/// second-order one-sided at the endpoints.
pub fn compute_velocity(trace: &Trace) -> Result<VelocityProfile> {
    let n = trace.samples.len();
    if n < 3 {
        return Err(Error::TraceTooShort { len: n, min: 3 });
    }
    let s = &trace.samples;
    let mut t = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for i in 0..n {
        let (dx, dy, dt) = if i == 0 {
            let h = s[1].t - s[0].t;
            (
                -3.0 * s[0].x + 4.0 * s[1].x - s[2].x,
                -3.0 * s[0].y + 4.0 * s[1].y - s[2].y,
                2.0 * h,
            )
        } else if i == n - 1 {
            let h = s[n - 1].t - s[n - 2].t;
            (
                3.0 * s[n - 1].x - 4.0 * s[n - 2].x + s[n - 3].x,
                3.0 * s[n - 1].y - 4.0 * s[n - 2].y + s[n - 3].y,
                2.0 * h,
            )
        } else {
            (
                s[i + 1].x - s[i - 1].x,
                s[i + 1].y - s[i - 1].y,
                s[i + 1].t - s[i - 1].t,
            )
        };
        t.push(s[i].t);
        v.push((dx / dt).hypot(dy / dt));
    }
    Ok(VelocityProfile { t, v })
}

/// Interior velocity minima and double-inflexion points, between the trace
/// start and end boundaries.
pub fn detect_boundaries(
    profile: &VelocityProfile,
    cfg: &SegmentationConfig,
) -> Result<Vec<StrokeBoundary>> {
    let n = profile.v.len();
    if n < 5 {
        return Err(Error::TraceTooShort { len: n, min: 5 });
    }
    let v = &profile.v;
    let vmax = v.iter().fold(0.0f64, |m, &x| m.max(x));

    let mut interior: Vec<StrokeBoundary> = Vec::new();
    for idx in plateau_minima(v) {
        if prominence(v, idx) >= cfg.min_prominence * vmax {
            interior.push(StrokeBoundary {
                index: idx,
                kind: BoundaryKind::VelocityMinimum,
            });
        }
    }

    for idx in double_inflexions(profile, cfg) {
        // A minimum at the same index wins the tie.
        if !interior.iter().any(|b| b.index == idx) {
            interior.push(StrokeBoundary {
                index: idx,
                kind: BoundaryKind::DoubleInflexion,
            });
        }
    }
    interior.sort_by_key(|b| b.index);

    // Enforce spacing: drop the boundary with the higher velocity when two
    // are closer than a stroke, and keep clear of the trace ends.
    let mut kept: Vec<StrokeBoundary> = Vec::new();
    for b in interior {
        if b.index < cfg.min_stroke_samples || b.index + cfg.min_stroke_samples > n - 1 {
            continue;
        }
        match kept.last() {
            Some(prev) if b.index - prev.index < cfg.min_stroke_samples => {
                if v[b.index] < v[prev.index] {
                    kept.pop();
                    kept.push(b);
                }
            }
            _ => kept.push(b),
        }
    }

    let mut out = Vec::with_capacity(kept.len() + 2);
    out.push(StrokeBoundary {
        index: 0,
        kind: BoundaryKind::TraceStart,
    });
    out.extend(kept);
    out.push(StrokeBoundary {
        index: n - 1,
        kind: BoundaryKind::TraceEnd,
    });
    Ok(out)
}

/// Strict local minima, with flat valleys collapsing to their middle sample.
fn plateau_minima(v: &[f64]) -> Vec<usize> {
    let n = v.len();
    let mut out = Vec::new();
    let mut i = 1;
    while i < n - 1 {
        if v[i] < v[i - 1] {
            // Walk any plateau of equal values.
            let mut j = i;
            while j + 1 < n && v[j + 1] == v[i] {
                j += 1;
            }
            if j < n - 1 && v[j + 1] > v[i] {
                out.push((i + j) / 2);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Height of the smaller adjacent peak above the minimum at `idx`.
fn prominence(v: &[f64], idx: usize) -> f64 {
    let mut left = v[idx];
    for i in (0..idx).rev() {
        left = left.max(v[i]);
        if v[i] < v[idx] {
            break;
        }
    }
    let mut right = v[idx];
    for &x in &v[idx + 1..] {
        right = right.max(x);
        if x < v[idx] {
            break;
        }
    }
    left.min(right) - v[idx]
}

fn double_inflexions(profile: &VelocityProfile, cfg: &SegmentationConfig) -> Vec<usize> {
    let n = profile.v.len();
    let k = cfg.inflexion_window;
    if n < 2 * k + 3 {
        return Vec::new();
    }
    let v = &profile.v;
    let t = &profile.t;
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    for i in 1..n - 1 {
        let dt = 0.5 * (t[i + 1] - t[i - 1]);
        d1[i] = (v[i + 1] - v[i - 1]) / (2.0 * dt);
        d2[i] = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (dt * dt);
    }
    let d1max = d1.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    if d1max == 0.0 {
        return Vec::new();
    }

    let mut out = Vec::new();
    for i in (k + 1)..(n - k - 1) {
        if d1[i].abs() >= cfg.inflexion_flatness * d1max {
            continue;
        }
        let sign_change = |a: f64, b: f64| a * b < 0.0;
        let left = (1..=k).any(|j| sign_change(d2[i - j], d2[i - j + 1]));
        let right = (1..=k).any(|j| sign_change(d2[i + j - 1], d2[i + j]));
        if left && right {
            out.push(i);
        }
    }
    out
}

/// Half-open stroke views produced by `split_strokes`: `start..=end` sample
/// indices into the trace, adjacent strokes sharing their boundary sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrokeSlice {
    pub start: usize,
    pub end: usize,
}

impl StrokeSlice {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Cuts the trace at the boundaries; slices shorter than
/// `min_stroke_samples` merge into the neighbor across the lower-velocity
/// boundary.
pub fn split_strokes(
    profile: &VelocityProfile,
    boundaries: &[StrokeBoundary],
    cfg: &SegmentationConfig,
) -> Vec<StrokeSlice> {
    let mut slices: Vec<StrokeSlice> = boundaries
        .windows(2)
        .map(|w| StrokeSlice {
            start: w[0].index,
            end: w[1].index,
        })
        .collect();

    loop {
        let Some(pos) = slices
            .iter()
            .position(|s| s.len() < cfg.min_stroke_samples && slices.len() > 1)
        else {
            break;
        };
        let s = slices[pos];
        let merge_left = if pos == 0 {
            false
        } else if pos + 1 == slices.len() {
            true
        } else {
            // Prefer dissolving the lower-velocity boundary.
            profile.v[s.start] <= profile.v[s.end]
        };
        if merge_left {
            slices[pos - 1].end = s.end;
        } else {
            slices[pos + 1].start = s.start;
        }
        slices.remove(pos);
    }
    slices
}

/// Convenience wrapper: velocity, boundaries, slices in one call.
pub fn segment_trace(
    trace: &Trace,
    cfg: &SegmentationConfig,
) -> Result<(VelocityProfile, Vec<StrokeBoundary>, Vec<StrokeSlice>)> {
    let profile = compute_velocity(trace)?;
    if profile.v.len() < 5 {
        return Err(Error::TraceTooShort {
            len: profile.v.len(),
            min: 5,
        });
    }
    let boundaries = detect_boundaries(&profile, cfg)?;
    let slices = split_strokes(&profile, &boundaries, cfg);
    Ok((profile, boundaries, slices))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beta::{beta_pulse, superpose, BetaPulseParams};
    use crate::ink::InkSample;

    fn trace_from_fn(n: usize, dt: f64, f: impl Fn(f64) -> (f64, f64)) -> Trace {
        Trace {
            samples: (0..n)
                .map(|i| {
                    let t = i as f64 * dt;
                    let (x, y) = f(t);
                    InkSample { t, x, y }
                })
                .collect(),
        }
    }

    fn profile_from(v: Vec<f64>, dt: f64) -> VelocityProfile {
        VelocityProfile {
            t: (0..v.len()).map(|i| i as f64 * dt).collect(),
            v,
        }
    }

    #[test]
    fn straight_line_has_constant_speed() {
        let trace = trace_from_fn(50, 0.01, |t| (3.0 * t, 4.0 * t));
        let profile = compute_velocity(&trace).unwrap();
        for v in profile.v {
            assert!((v - 5.0).abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn stationary_pen_has_zero_speed() {
        let trace = trace_from_fn(20, 0.01, |_| (7.0, -2.0));
        let profile = compute_velocity(&trace).unwrap();
        assert!(profile.v.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn circle_speed_matches_analytic_derivative() {
        use std::f64::consts::PI;
        let trace = trace_from_fn(101, 0.01, |t| ((2.0 * PI * t).cos(), (2.0 * PI * t).sin()));
        let profile = compute_velocity(&trace).unwrap();
        for &v in &profile.v {
            assert!((v - 2.0 * PI).abs() / (2.0 * PI) < 0.005, "{v}");
        }
    }

    #[test]
    fn too_short_trace_is_rejected() {
        let trace = trace_from_fn(2, 0.01, |t| (t, t));
        assert!(matches!(
            compute_velocity(&trace),
            Err(Error::TraceTooShort { .. })
        ));
    }

    #[test]
    fn monotone_profile_has_no_interior_boundary() {
        let cfg = SegmentationConfig::default();
        let profile = profile_from((0..40).map(|i| i as f64).collect(), 0.01);
        let b = detect_boundaries(&profile, &cfg).unwrap();
        assert_eq!(b.len(), 2);
        assert_eq!(b[0].kind, BoundaryKind::TraceStart);
        assert_eq!(b[1].kind, BoundaryKind::TraceEnd);
    }

    #[test]
    fn gap_between_pulses_yields_one_boundary() {
        let cfg = SegmentationConfig::default();
        let first = BetaPulseParams::new(2.0, 0.0, 0.2, 0.4, 2.0).unwrap();
        let second = BetaPulseParams::new(3.0, 0.6, 0.8, 1.0, 2.0).unwrap();
        let dt = 0.01;
        let v: Vec<f64> = (0..101).map(|i| superpose(&[first, second], i as f64 * dt)).collect();
        let b = detect_boundaries(&profile_from(v, dt), &cfg).unwrap();
        let interior: Vec<_> = b
            .iter()
            .filter(|b| matches!(b.kind, BoundaryKind::VelocityMinimum))
            .collect();
        assert_eq!(interior.len(), 1, "{b:?}");
        // The zero-velocity plateau spans samples 40..=60; its middle is 50.
        assert!((interior[0].index as i64 - 50).abs() <= 1);
    }

    #[test]
    fn overlapping_pulses_boundary_matches_dense_minimum() {
        let cfg = SegmentationConfig::default();
        let first = BetaPulseParams::new(2.0, 0.0, 0.25, 0.7, 2.0).unwrap();
        let second = BetaPulseParams::new(2.5, 0.3, 0.75, 1.0, 2.0).unwrap();
        let pulses = [first, second];
        let dt = 0.01;
        let v: Vec<f64> = (0..101).map(|i| superpose(&pulses, i as f64 * dt)).collect();
        let b = detect_boundaries(&profile_from(v, dt), &cfg).unwrap();
        let interior: Vec<_> = b
            .iter()
            .filter(|b| matches!(b.kind, BoundaryKind::VelocityMinimum))
            .collect();
        assert_eq!(interior.len(), 1);

        // Independent oracle: dense numeric minimization of the summed bells
        // between the two peaks.
        let mut best = (f64::INFINITY, 0.0);
        let mut s = 0.25;
        while s <= 0.75 {
            let val = superpose(&pulses, s);
            if val < best.0 {
                best = (val, s);
            }
            s += 1e-5;
        }
        let found_t = interior[0].index as f64 * dt;
        assert!(
            (found_t - best.1).abs() <= 2.0 * dt + 1e-9,
            "boundary {found_t} vs oracle {}",
            best.1
        );
    }

    #[test]
    fn single_pulse_yields_single_stroke() {
        let cfg = SegmentationConfig::default();
        let pulse = BetaPulseParams::new(2.0, 0.0, 0.4, 1.0, 3.0).unwrap();
        let dt = 0.01;
        let v: Vec<f64> = (0..101).map(|i| beta_pulse(&pulse, i as f64 * dt)).collect();
        let profile = profile_from(v, dt);
        let b = detect_boundaries(&profile, &cfg).unwrap();
        let slices = split_strokes(&profile, &b, &cfg);
        assert_eq!(slices.len(), 1);
        assert_eq!(slices[0], StrokeSlice { start: 0, end: 100 });
    }

    #[test]
    fn three_boundaries_share_middle_sample() {
        let cfg = SegmentationConfig::default();
        let profile = profile_from(vec![1.0; 21], 0.01);
        let boundaries = vec![
            StrokeBoundary { index: 0, kind: BoundaryKind::TraceStart },
            StrokeBoundary { index: 10, kind: BoundaryKind::VelocityMinimum },
            StrokeBoundary { index: 20, kind: BoundaryKind::TraceEnd },
        ];
        let slices = split_strokes(&profile, &boundaries, &cfg);
        assert_eq!(slices.len(), 2);
        assert_eq!(slices[0].end, 10);
        assert_eq!(slices[1].start, 10);
    }

    #[test]
    fn short_slice_merges_into_lower_velocity_neighbor() {
        let cfg = SegmentationConfig::default();
        let mut v = vec![1.0; 30];
        v[10] = 0.1;
        v[12] = 0.3;
        let profile = profile_from(v, 0.01);
        let boundaries = vec![
            StrokeBoundary { index: 0, kind: BoundaryKind::TraceStart },
            StrokeBoundary { index: 10, kind: BoundaryKind::VelocityMinimum },
            StrokeBoundary { index: 12, kind: BoundaryKind::VelocityMinimum },
            StrokeBoundary { index: 29, kind: BoundaryKind::TraceEnd },
        ];
        let slices = split_strokes(&profile, &boundaries, &cfg);
        assert_eq!(slices.len(), 2, "{slices:?}");
        // The 2-sample middle slice dissolves across its lower boundary
        // velocity (index 10, v = 0.1), extending the first slice.
        assert_eq!(slices[0], StrokeSlice { start: 0, end: 12 });
        assert_eq!(slices[1], StrokeSlice { start: 12, end: 29 });
    }

    #[test]
    fn slices_cover_trace_exactly_once() {
        let cfg = SegmentationConfig::default();
        let pulses = [
            BetaPulseParams::new(2.0, 0.0, 0.15, 0.3, 2.0).unwrap(),
            BetaPulseParams::new(1.5, 0.3, 0.5, 0.65, 2.5).unwrap(),
            BetaPulseParams::new(2.5, 0.65, 0.8, 1.0, 2.0).unwrap(),
        ];
        let dt = 0.005;
        let v: Vec<f64> = (0..201).map(|i| superpose(&pulses, i as f64 * dt) + 0.05).collect();
        let profile = profile_from(v, dt);
        let b = detect_boundaries(&profile, &cfg).unwrap();
        let slices = split_strokes(&profile, &b, &cfg);
        assert_eq!(slices.first().unwrap().start, 0);
        assert_eq!(slices.last().unwrap().end, 200);
        for w in slices.windows(2) {
            assert_eq!(w[0].end, w[1].start);
        }
        // Boundary velocities sit below their immediate neighbors.
        for w in slices.windows(2) {
            let i = w[0].end;
            assert!(profile.v[i] <= profile.v[i - 1] + 1e-12);
            assert!(profile.v[i] <= profile.v[i + 1] + 1e-12);
        }
    }
}
