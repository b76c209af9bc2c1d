//! Generative inverse of the stroke model: synthesize velocity profiles,
//! trajectories, and whole seeded corpora from known parameters. Everything
//! here exists to give the analysis side a ground truth to recover.
//!
//! A synthesized stroke is the velocity bell + drag pair riding along a
//! two-arc chain. The arc chain is scaled so its geometric length equals the
//! integral of the velocity, then positions follow the chain at the
//! arc-length rate the velocity dictates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::beta::{beta_pulse, drag_velocity_unchecked, BetaPulseParams, DragComponent};
use crate::ellipse::ArcPairSpec;
use crate::error::{Error, Result};
use crate::ink::{InkFile, InkSample, Script, Trace, Word};
use crate::segmentation::VelocityProfile;

/// Position-continuity tolerance between consecutive strokes.
const CHAIN_GAP_TOLERANCE: f64 = 1e-6;
/// Dense table sizes for length and arc-length inversion.
const CHORD_TABLE: usize = 2048;
const TIME_OVERSAMPLE: usize = 8;

/// Ground truth of one synthesized stroke.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthStroke {
    pub pulse: BetaPulseParams,
    pub drag: DragComponent,
    /// Realized (already scaled) arc geometry.
    pub arcs: ArcPairSpec,
    pub start_point: (f64, f64),
}

/// Samples the summed reconstructed velocity of time-ordered strokes on a
/// uniform grid. Pulses contribute wherever their support covers the grid
/// point; the drag of the covering stroke is added on its own interval.
pub fn synth_velocity(strokes: &[(BetaPulseParams, DragComponent)], rate: f64) -> VelocityProfile {
    if strokes.is_empty() {
        return VelocityProfile {
            t: Vec::new(),
            v: Vec::new(),
        };
    }
    let t_start = strokes[0].0.start;
    let t_end = strokes.last().unwrap().0.end;
    let n = ((t_end - t_start) * rate).round() as usize + 1;
    let mut t = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for j in 0..n {
        let tj = (t_start + j as f64 / rate).min(t_end);
        t.push(tj);
        v.push(velocity_at(strokes, tj));
    }
    VelocityProfile { t, v }
}

fn velocity_at(strokes: &[(BetaPulseParams, DragComponent)], t: f64) -> f64 {
    let mut total = 0.0;
    for (i, (pulse, drag)) in strokes.iter().enumerate() {
        total += beta_pulse(pulse, t);
        let last = i + 1 == strokes.len();
        let covers = t >= pulse.start && (t < pulse.end || (last && t <= pulse.end));
        if covers {
            total += drag_velocity_unchecked(drag, pulse.start, pulse.end, t);
        }
    }
    total
}

/// Integrates positions along each stroke's arc chain with arc-length rate
/// equal to the stroke's velocity. Consecutive strokes must join within
/// `CHAIN_GAP_TOLERANCE`.
pub fn synth_trajectory(strokes: &[SynthStroke], rate: f64) -> Result<Trace> {
    if strokes.is_empty() {
        return Err(Error::InvalidConfig {
            detail: "cannot synthesize an empty stroke chain".into(),
        });
    }
    // Validate chain continuity against each stroke's declared start.
    for (i, w) in strokes.windows(2).enumerate() {
        let c1 = w[0].arcs.center_for_start(w[0].start_point);
        let end = w[0].arcs.point(c1, 1.0);
        let gap = (end.0 - w[1].start_point.0).hypot(end.1 - w[1].start_point.1);
        if gap > CHAIN_GAP_TOLERANCE {
            return Err(Error::InconsistentArcChain { stroke: i + 1, gap });
        }
    }

    let mut samples: Vec<InkSample> = Vec::new();
    for (i, stroke) in strokes.iter().enumerate() {
        let pulse = &stroke.pulse;
        let kin_len = integrate_velocity(pulse, &stroke.drag);
        if kin_len <= 1e-9 {
            return Err(Error::DegenerateGeometry {
                detail: format!("stroke {i} moves {kin_len} ink-units"),
            });
        }
        let c1 = stroke.arcs.center_for_start(stroke.start_point);
        let chords = chord_table(&stroke.arcs, c1);
        let geo_len = *chords.last().unwrap();

        // Output samples strictly inside this stroke's interval; the shared
        // boundary sample belongs to the earlier stroke.
        let j_from = (pulse.start * rate).ceil() as i64;
        let j_to = (pulse.end * rate).floor() as i64;
        let mut arc = 0.0;
        let mut t_prev = pulse.start;
        let fine_dt = 1.0 / (rate * TIME_OVERSAMPLE as f64);
        for j in j_from..=j_to {
            let tj = j as f64 / rate;
            if i > 0 && samples.last().map_or(false, |s| tj <= s.t + 1e-12) {
                continue;
            }
            // Advance the kinematic arc length to tj with a fine trapezoid.
            while t_prev + fine_dt < tj {
                let a = velocity_of(pulse, &stroke.drag, t_prev);
                let b = velocity_of(pulse, &stroke.drag, t_prev + fine_dt);
                arc += 0.5 * (a + b) * fine_dt;
                t_prev += fine_dt;
            }
            let a = velocity_of(pulse, &stroke.drag, t_prev);
            let b = velocity_of(pulse, &stroke.drag, tj);
            arc += 0.5 * (a + b) * (tj - t_prev);
            t_prev = tj;

            let u = invert_chord(&chords, arc * geo_len / kin_len);
            let p = stroke.arcs.point(c1, u);
            samples.push(InkSample {
                t: tj,
                x: p.0,
                y: p.1,
            });
        }
    }
    if samples.len() < 2 {
        return Err(Error::DegenerateGeometry {
            detail: "synthesized trace has fewer than 2 samples".into(),
        });
    }
    Ok(Trace { samples })
}

fn velocity_of(pulse: &BetaPulseParams, drag: &DragComponent, t: f64) -> f64 {
    let t = t.clamp(pulse.start, pulse.end);
    beta_pulse(pulse, t) + drag_velocity_unchecked(drag, pulse.start, pulse.end, t)
}

/// Kinematic length of one stroke by composite trapezoid.
fn integrate_velocity(pulse: &BetaPulseParams, drag: &DragComponent) -> f64 {
    let n = 4096;
    let h = pulse.duration() / n as f64;
    let mut acc = 0.0;
    let mut prev = velocity_of(pulse, drag, pulse.start);
    for k in 1..=n {
        let cur = velocity_of(pulse, drag, pulse.start + k as f64 * h);
        acc += 0.5 * (prev + cur) * h;
        prev = cur;
    }
    acc
}

/// Cumulative chord lengths of the chain at CHORD_TABLE + 1 parameters.
fn chord_table(spec: &ArcPairSpec, c1: (f64, f64)) -> Vec<f64> {
    let mut out = Vec::with_capacity(CHORD_TABLE + 1);
    out.push(0.0);
    let mut prev = spec.point(c1, 0.0);
    for k in 1..=CHORD_TABLE {
        let p = spec.point(c1, k as f64 / CHORD_TABLE as f64);
        out.push(out[k - 1] + (p.0 - prev.0).hypot(p.1 - prev.1));
        prev = p;
    }
    out
}

fn invert_chord(chords: &[f64], s: f64) -> f64 {
    let total = *chords.last().unwrap();
    let s = s.clamp(0.0, total);
    let mut lo = 0usize;
    let mut hi = chords.len() - 1;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if chords[mid] <= s {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let seg = chords[hi] - chords[lo];
    let frac = if seg > 0.0 { (s - chords[lo]) / seg } else { 0.0 };
    (lo as f64 + frac) / (chords.len() - 1) as f64
}

// ---------------------------------------------------------------------------
// Writer profiles and corpus generation
// ---------------------------------------------------------------------------

/// Closed sampling interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl From<[f64; 2]> for Interval {
    fn from(v: [f64; 2]) -> Self {
        Interval { lo: v[0], hi: v[1] }
    }
}

impl From<Interval> for [f64; 2] {
    fn from(v: Interval) -> Self {
        [v.lo, v.hi]
    }
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    fn sample(&self, rng: &mut ChaCha20Rng) -> f64 {
        self.lo + (self.hi - self.lo) * rng.gen::<f64>()
    }
}

/// Parameter distributions of one synthetic writer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticWriterProfile {
    pub writer_id: String,
    pub seed: u64,
    /// Velocity bell amplitude, ink-units/second.
    pub amplitude: Interval,
    pub rise_exponent: Interval,
    /// Peak position as a fraction of stroke duration.
    pub peak_fraction: Interval,
    /// Stroke duration, seconds.
    pub duration: Interval,
    /// Boundary velocity as a fraction of the sampled amplitude.
    pub boundary_velocity_frac: Interval,
    /// Major-axis inclination, radians.
    pub theta: Interval,
    /// First-arc minor/major ratio.
    pub minor_ratio: Interval,
    /// Second-arc minor relative to the first: b2 = ratio2 · b1.
    pub minor_ratio_2: Interval,
    /// Angular span of each arc, radians.
    pub span: Interval,
    pub strokes_per_word: [usize; 2],
    /// Std-dev of position noise added to samples, ink units. 0 = clean.
    pub noise_sigma: f64,
    #[serde(default)]
    pub script: Option<Script>,
}

impl SyntheticWriterProfile {
    /// A reasonable mid-scale profile; tests derive variants from it.
    pub fn template(writer_id: &str, seed: u64) -> Self {
        SyntheticWriterProfile {
            writer_id: writer_id.to_string(),
            seed,
            amplitude: Interval::new(80.0, 140.0),
            rise_exponent: Interval::new(1.5, 6.0),
            peak_fraction: Interval::new(0.3, 0.7),
            duration: Interval::new(0.18, 0.4),
            boundary_velocity_frac: Interval::new(0.03, 0.1),
            theta: Interval::new(0.2, 1.2),
            minor_ratio: Interval::new(0.3, 0.8),
            minor_ratio_2: Interval::new(0.7, 1.6),
            span: Interval::new(0.5, 1.3),
            strokes_per_word: [4, 7],
            noise_sigma: 0.0,
            script: None,
        }
    }

    fn word_rng(&self, word_index: u64) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(word_index + 1);
        rng
    }

    /// Synthesizes one word and its ground truth strokes.
    pub fn synth_word(&self, word_index: u64, rate: f64) -> Result<(Word, Vec<SynthStroke>)> {
        let mut rng = self.word_rng(word_index);
        let n_strokes = {
            let [lo, hi] = self.strokes_per_word;
            lo + (rng.gen::<u64>() as usize) % (hi - lo + 1)
        };

        // Boundary velocities first so consecutive strokes share them.
        let amp: Vec<f64> = (0..n_strokes).map(|_| self.amplitude.sample(&mut rng)).collect();
        let vbnd: Vec<f64> = (0..=n_strokes)
            .map(|i| {
                let k = amp[i.min(n_strokes - 1)];
                self.boundary_velocity_frac.sample(&mut rng) * k
            })
            .collect();

        let mut strokes = Vec::with_capacity(n_strokes);
        let mut t_cursor = 0.0;
        let mut point_cursor = (0.0, 0.0);
        for i in 0..n_strokes {
            let duration = self.duration.sample(&mut rng);
            let peak_frac = self.peak_fraction.sample(&mut rng);
            let pulse = BetaPulseParams {
                amplitude: amp[i],
                start: t_cursor,
                peak_time: t_cursor + peak_frac * duration,
                end: t_cursor + duration,
                rise_exponent: self.rise_exponent.sample(&mut rng),
            };
            let drag = DragComponent {
                start_velocity: vbnd[i],
                end_velocity: vbnd[i + 1],
            };

            let raw = ArcPairSpec {
                semi_major_1: 1.0,
                semi_minor_1: self.minor_ratio.sample(&mut rng).max(0.05),
                semi_minor_2: 1.0,
                theta: crate::ellipse::wrap_angle(self.theta.sample(&mut rng)),
                span1: self.span.sample(&mut rng),
                span2: self.span.sample(&mut rng),
                direction: if rng.gen::<f64>() < 0.5 { 1.0 } else { -1.0 },
            };
            let mut arcs = raw;
            arcs.semi_minor_2 = (self.minor_ratio_2.sample(&mut rng) * arcs.semi_minor_1)
                .max(0.05);

            // Scale the chain so geometric length matches kinematic length.
            let kin_len = integrate_velocity(&pulse, &drag);
            let c1 = arcs.center_for_start((0.0, 0.0));
            let geo_len = *chord_table(&arcs, c1).last().unwrap();
            let scale = kin_len / geo_len.max(1e-12);
            arcs.semi_major_1 *= scale;
            arcs.semi_minor_1 *= scale;
            arcs.semi_minor_2 *= scale;

            let stroke = SynthStroke {
                pulse,
                drag,
                arcs,
                start_point: point_cursor,
            };
            let c1 = arcs.center_for_start(point_cursor);
            point_cursor = arcs.point(c1, 1.0);
            t_cursor += duration;
            strokes.push(stroke);
        }

        let mut trace = synth_trajectory(&strokes, rate)?;
        if self.noise_sigma > 0.0 {
            for s in &mut trace.samples {
                s.x += self.noise_sigma * gaussian(&mut rng);
                s.y += self.noise_sigma * gaussian(&mut rng);
            }
        }
        let word = Word {
            writer_id: Some(self.writer_id.clone()),
            script: self.script.unwrap_or(Script::Other),
            page: None,
            traces: vec![trace],
        };
        Ok((word, strokes))
    }
}

fn gaussian(rng: &mut ChaCha20Rng) -> f64 {
    // Box-Muller; one value per call keeps the stream layout simple.
    let u1: f64 = rng.gen::<f64>().max(1e-300);
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Ground truth sidecar of a synthesized corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusTruth {
    pub schema_version: String,
    pub writers: Vec<WriterTruth>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WriterTruth {
    pub writer_id: String,
    pub words: Vec<Vec<SynthStroke>>,
}

pub const TRUTH_SCHEMA_VERSION: &str = "betascript/truth/1";

/// Deterministic corpus from writer profiles. When `page_words` is set,
/// every chunk of that many words shares a page tag, enabling the page-level
/// evaluation protocol.
pub fn synth_corpus(
    profiles: &[SyntheticWriterProfile],
    words_per_writer: usize,
    rate: f64,
    page_words: Option<usize>,
) -> Result<(InkFile, CorpusTruth)> {
    let per_writer: Vec<(Vec<(Word, Vec<SynthStroke>)>, String)> = crate::par::map(
        crate::par::Jobs::Auto,
        profiles,
        |profile| -> (Vec<(Word, Vec<SynthStroke>)>, String) {
            let words: Vec<(Word, Vec<SynthStroke>)> = (0..words_per_writer)
                .map(|w| {
                    profile
                        .synth_word(w as u64, rate)
                        .expect("profile ranges must synthesize valid strokes")
                })
                .collect();
            (words, profile.writer_id.clone())
        },
    );

    let mut ink = InkFile {
        sample_rate_hz: Some(rate),
        words: Vec::new(),
    };
    let mut truth = CorpusTruth {
        schema_version: TRUTH_SCHEMA_VERSION.to_string(),
        writers: Vec::new(),
    };
    for (words, writer_id) in per_writer {
        let mut wt = WriterTruth {
            writer_id: writer_id.clone(),
            words: Vec::new(),
        };
        for (wi, (mut word, strokes)) in words.into_iter().enumerate() {
            if let Some(page) = page_words {
                word.page = Some(format!("p{:02}", wi / page.max(1)));
            }
            ink.words.push(word);
            wt.words.push(strokes);
        }
        truth.writers.push(wt);
    }
    Ok((ink, truth))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_stroke(k: f64, vi: f64, vf: f64) -> (BetaPulseParams, DragComponent) {
        (
            BetaPulseParams {
                amplitude: k,
                start: 0.0,
                peak_time: 0.5,
                end: 1.0,
                rise_exponent: 2.0,
            },
            DragComponent {
                start_velocity: vi,
                end_velocity: vf,
            },
        )
    }

    #[test]
    fn velocity_at_peak_includes_drag() {
        let (pulse, drag) = unit_stroke(1.0, 2.0, 5.0);
        let profile = synth_velocity(&[(pulse, drag)], 100.0);
        let at_peak = profile.v[50];
        // Amplitude + drag(0.5) = 1.0 + 3.5.
        assert!((at_peak - 4.5).abs() < 1e-9, "{at_peak}");
    }

    #[test]
    fn zero_strokes_give_empty_profile() {
        let profile = synth_velocity(&[], 100.0);
        assert!(profile.v.is_empty());
    }

    #[test]
    fn circular_arc_at_constant_velocity_stays_on_circle() {
        let radius = 10.0;
        let arcs = ArcPairSpec {
            semi_major_1: radius,
            semi_minor_1: radius,
            semi_minor_2: radius,
            theta: 0.3,
            span1: 1.0,
            span2: 1.0,
            direction: 1.0,
        };
        // Nearly constant speed: vanishing bell on a flat drag.
        let speed = 2.0 * radius / 1.0; // chain length = 2 rad · radius over 1 s
        let stroke = SynthStroke {
            pulse: BetaPulseParams {
                amplitude: 1e-12,
                start: 0.0,
                peak_time: 0.5,
                end: 1.0,
                rise_exponent: 2.0,
            },
            drag: DragComponent {
                start_velocity: speed,
                end_velocity: speed,
            },
            arcs,
            start_point: (radius, 0.0),
        };
        let c1 = arcs.center_for_start(stroke.start_point);
        let trace = synth_trajectory(&[stroke], 100.0).unwrap();
        for s in &trace.samples {
            let r = (s.x - c1.0).hypot(s.y - c1.1);
            assert!((r - radius).abs() < 1e-6, "radius {r}");
        }
    }

    #[test]
    fn path_length_matches_velocity_integral() {
        let profile = SyntheticWriterProfile::template("w0", 7);
        let (word, strokes) = profile.synth_word(3, 200.0).unwrap();
        let trace = &word.traces[0];
        let mut path = 0.0;
        for w in trace.samples.windows(2) {
            path += (w[1].x - w[0].x).hypot(w[1].y - w[0].y);
        }
        let kin: f64 = strokes
            .iter()
            .map(|s| integrate_velocity(&s.pulse, &s.drag))
            .sum();
        assert!(
            (path - kin).abs() / kin < 0.005,
            "path {path} vs integral {kin}"
        );
    }

    #[test]
    fn zero_velocity_stroke_is_rejected() {
        let arcs = ArcPairSpec {
            semi_major_1: 1.0,
            semi_minor_1: 1.0,
            semi_minor_2: 1.0,
            theta: 0.0,
            span1: 1.0,
            span2: 1.0,
            direction: 1.0,
        };
        let stroke = SynthStroke {
            pulse: BetaPulseParams {
                amplitude: 1e-15,
                start: 0.0,
                peak_time: 0.5,
                end: 1.0,
                rise_exponent: 2.0,
            },
            drag: DragComponent {
                start_velocity: 0.0,
                end_velocity: 0.0,
            },
            arcs,
            start_point: (1.0, 0.0),
        };
        assert!(matches!(
            synth_trajectory(&[stroke], 100.0),
            Err(Error::DegenerateGeometry { .. })
        ));
    }

    #[test]
    fn disconnected_chain_is_rejected() {
        let profile = SyntheticWriterProfile::template("w0", 11);
        let (_, mut strokes) = profile.synth_word(0, 100.0).unwrap();
        if strokes.len() < 2 {
            panic!("template must give at least 2 strokes");
        }
        strokes[1].start_point.0 += 5.0;
        assert!(matches!(
            synth_trajectory(&strokes, 100.0),
            Err(Error::InconsistentArcChain { .. })
        ));
    }

    #[test]
    fn corpus_generation_is_deterministic() {
        let profiles = vec![
            SyntheticWriterProfile::template("w0", 1),
            SyntheticWriterProfile::template("w1", 2),
        ];
        let (a, ta) = synth_corpus(&profiles, 3, 100.0, None).unwrap();
        let (b, tb) = synth_corpus(&profiles, 3, 100.0, None).unwrap();
        assert_eq!(
            crate::ink::to_canonical_json(&a),
            crate::ink::to_canonical_json(&b)
        );
        assert_eq!(ta, tb);
    }

    #[test]
    fn corpus_counts_words() {
        let profiles: Vec<_> = (0..10)
            .map(|i| SyntheticWriterProfile::template(&format!("w{i:02}"), i as u64 + 1))
            .collect();
        let (ink, truth) = synth_corpus(&profiles, 25, 100.0, Some(5)).unwrap();
        assert_eq!(ink.words.len(), 250);
        assert_eq!(truth.writers.len(), 10);
        assert!(truth.writers.iter().all(|w| w.words.len() == 25));
        // 25 words at 5 per page: pages p00..p04.
        let first_writer_pages: std::collections::BTreeSet<_> = ink.words[..25]
            .iter()
            .map(|w| w.page.clone().unwrap())
            .collect();
        assert_eq!(first_writer_pages.len(), 5);
    }

    #[test]
    fn boundary_velocities_chain_between_strokes() {
        let profile = SyntheticWriterProfile::template("w0", 5);
        let (_, strokes) = profile.synth_word(1, 100.0).unwrap();
        for w in strokes.windows(2) {
            assert_eq!(w[0].drag.end_velocity, w[1].drag.start_velocity);
            assert!((w[0].pulse.end - w[1].pulse.start).abs() < 1e-12);
        }
    }
}
