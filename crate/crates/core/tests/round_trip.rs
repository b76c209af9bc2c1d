//! Round-trip experiments against the synthesis oracle: stroke-count
//! recovery, rule-margin stability, and writer separability.

use betascript_core::beta::{BetaPulseParams, DragComponent};
use betascript_core::features::FeatureMode;
use betascript_core::identify::Protocol;
use betascript_core::model::TrainingConfig;
use betascript_core::par::Jobs;
use betascript_core::pipeline::{evaluate_ink, ink_to_labeled, train_from_ink, PipelineConfig};
use betascript_core::segmentation::{detect_boundaries, BoundaryKind, SegmentationConfig};
use betascript_core::synth::{synth_corpus, synth_velocity, Interval, SyntheticWriterProfile};

/// Separated pulses with near-zero gaps segment back into exactly the
/// generating stroke count.
#[test]
fn segmentation_recovers_stroke_count() {
    let cfg = SegmentationConfig::default();
    for n_strokes in 2..=6 {
        // Strokes of 0.3 s separated by 0.1 s of zero velocity.
        let mut strokes = Vec::new();
        for i in 0..n_strokes {
            let start = i as f64 * 0.4;
            strokes.push((
                BetaPulseParams {
                    amplitude: 2.0 + (i % 3) as f64,
                    start,
                    peak_time: start + 0.12,
                    end: start + 0.3,
                    rise_exponent: 2.0,
                },
                DragComponent {
                    start_velocity: 0.0,
                    end_velocity: 0.0,
                },
            ));
        }
        let profile = synth_velocity(&strokes, 100.0);
        // The synthesized profile covers gaps with zeros only between pulse
        // supports; extend the grid to the last stroke's end.
        let boundaries = detect_boundaries(&profile, &cfg).unwrap();
        let interior = boundaries
            .iter()
            .filter(|b| {
                matches!(
                    b.kind,
                    BoundaryKind::VelocityMinimum | BoundaryKind::DoubleInflexion
                )
            })
            .count();
        assert_eq!(
            interior + 1,
            n_strokes,
            "expected {n_strokes} strokes, got {} boundaries: {boundaries:?}",
            interior
        );
    }
}

fn quick_config() -> PipelineConfig {
    PipelineConfig {
        training: TrainingConfig {
            hidden1: 12,
            hidden2: 8,
            epochs1: 40,
            epochs2: 25,
            softmax_epochs: 60,
            fine_tune_epochs: 30,
            min_samples_per_subgroup: 1000,
            ..TrainingConfig::default()
        },
        ..PipelineConfig::default()
    }
}

/// Rule-margin robustness: re-deriving descriptors from points perturbed by
/// up to 0.1 ink-units flips the subgroup for less than 5% of segments.
#[test]
fn subgroup_assignment_is_stable_under_jitter() {
    use betascript_core::taxonomy::{assign_subgroup, compute_descriptors};
    use rand::{Rng, SeedableRng};

    let cfg = quick_config();
    let profiles: Vec<SyntheticWriterProfile> = (0..4)
        .map(|i| SyntheticWriterProfile::template(&format!("w{i}"), 40 + i as u64))
        .collect();
    let (ink, _) = synth_corpus(&profiles, 6, 100.0, None).unwrap();
    let labeled = ink_to_labeled(&ink, &cfg, Jobs::Auto).unwrap();
    let total = labeled.segments.len();

    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(4242);
    let mut flips = 0usize;
    // Descriptors are derived from segment points, so jitter those directly.
    let params = {
        use betascript_core::pipeline::{stage_fit, stage_preprocess, stage_segment};
        let pre = stage_preprocess(&ink, &cfg, Jobs::Auto).unwrap();
        let strokes = stage_segment(&pre, &cfg, Jobs::Auto).unwrap();
        stage_fit(&strokes, &cfg, Jobs::Auto).unwrap()
    };
    let mut total_segments = 0usize;
    for word in &params.words {
        let strokes: Vec<(usize, &betascript_core::beta::BetaStroke)> = word
            .traces
            .iter()
            .enumerate()
            .flat_map(|(ti, t)| t.strokes.iter().map(move |s| (ti, s)))
            .collect();
        let count = strokes.len();
        for first in 0..count.saturating_sub(1) {
            let (t1, s1) = strokes[first];
            let (t2, s2) = strokes[first + 1];
            let mut points: Vec<(f64, f64)> = Vec::new();
            for (ti, s) in [(t1, s1), (t2, s2)] {
                points.extend(
                    word.traces[ti].points[s.sample_range.0..=s.sample_range.1]
                        .iter()
                        .map(|p| (p.x, p.y)),
                );
            }
            let thetas = [s1.arcs.theta, s2.arcs.theta];
            let group = betascript_core::taxonomy::assign_group(first, count);
            let base = assign_subgroup(
                group,
                &compute_descriptors(&points, thetas, &cfg.taxonomy).unwrap(),
                &cfg.taxonomy,
            );
            let jittered: Vec<(f64, f64)> = points
                .iter()
                .map(|&(x, y)| {
                    (
                        x + 0.2 * rng.gen::<f64>() - 0.1,
                        y + 0.2 * rng.gen::<f64>() - 0.1,
                    )
                })
                .collect();
            let moved = assign_subgroup(
                group,
                &compute_descriptors(&jittered, thetas, &cfg.taxonomy).unwrap(),
                &cfg.taxonomy,
            );
            if moved != base {
                flips += 1;
            }
            total_segments += 1;
        }
    }
    assert_eq!(total_segments, total);
    let rate = flips as f64 / total_segments.max(1) as f64;
    assert!(
        rate < 0.05,
        "{flips}/{total_segments} subgroup flips under 0.1-unit jitter"
    );
}

/// Writers with disjoint parameter ranges are perfectly separable.
#[test]
fn disjoint_writers_identify_perfectly() {
    let mk = |id: &str, seed: u64, lo: f64| {
        let mut p = SyntheticWriterProfile::template(id, seed);
        p.amplitude = Interval::new(60.0 + lo * 200.0, 90.0 + lo * 200.0);
        p.rise_exponent = Interval::new(1.2 + lo * 6.0, 2.0 + lo * 6.0);
        p.duration = Interval::new(0.18 + lo * 0.15, 0.25 + lo * 0.15);
        p.theta = Interval::new(lo * 1.3, lo * 1.3 + 0.3);
        p.peak_fraction = Interval::new(0.3 + lo * 0.3, 0.4 + lo * 0.3);
        p
    };
    let train = vec![mk("w0", 1, 0.0), mk("w1", 2, 1.0)];
    let test = vec![mk("w0", 11, 0.0), mk("w1", 12, 1.0)];
    let cfg = quick_config();
    let (train_ink, _) = synth_corpus(&train, 8, 100.0, None).unwrap();
    let (test_ink, _) = synth_corpus(&test, 6, 100.0, None).unwrap();
    let model = train_from_ink(&train_ink, &cfg, Jobs::Auto).unwrap();
    let report = evaluate_ink(&test_ink, &model, &cfg, Protocol::Bundles, Jobs::Auto).unwrap();
    assert_eq!(report.tests, 2);
    assert_eq!(
        report.correct, report.tests,
        "disjoint writers must separate perfectly"
    );
}

/// Feature mode changes the vector length but not the segment structure.
#[test]
fn modes_share_segment_structure() {
    let profiles = vec![SyntheticWriterProfile::template("w0", 7)];
    let (ink, _) = synth_corpus(&profiles, 3, 100.0, None).unwrap();
    let mut cfg = quick_config();
    cfg.mode = FeatureMode::Ebe;
    let plain = ink_to_labeled(&ink, &cfg, Jobs::Auto).unwrap();
    cfg.mode = FeatureMode::EbeFepc;
    let fuzzy = ink_to_labeled(&ink, &cfg, Jobs::Auto).unwrap();
    assert_eq!(plain.segments.len(), fuzzy.segments.len());
    for (a, b) in plain.segments.iter().zip(&fuzzy.segments) {
        assert_eq!(a.segment.values.len(), 28);
        assert_eq!(b.segment.values.len(), 36);
        assert_eq!(a.subgroup_id, b.subgroup_id);
        // The 14 base features per stroke agree across modes.
        assert_eq!(a.segment.values[..14], b.segment.values[..14]);
        assert_eq!(a.segment.values[14..28], b.segment.values[18..32]);
    }
}
