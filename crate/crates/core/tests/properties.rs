//! Property tests over the model's structural invariants.

use proptest::prelude::*;

use betascript_core::beta::{
    beta_pulse, drag_velocity, reconstruct_velocity, BetaPulseParams, DragComponent,
};
use betascript_core::features::fepc_membership;
use betascript_core::filter::cheby2_lowpass;
use betascript_core::ink::{normalize_height, InkSample, PreprocessConfig, Script, Trace, Word};

fn pulse_strategy() -> impl Strategy<Value = BetaPulseParams> {
    (
        0.1f64..10.0,   // amplitude
        -1.0f64..1.0,   // start
        0.05f64..2.0,   // duration
        0.1f64..0.9,    // peak fraction
        0.2f64..12.0,   // rise exponent
    )
        .prop_map(|(amplitude, start, duration, frac, rise)| BetaPulseParams {
            amplitude,
            start,
            peak_time: start + frac * duration,
            end: start + duration,
            rise_exponent: rise,
        })
}

proptest! {
    /// The bell attains its maximum at the peak time with value equal to the
    /// amplitude, within a grid step on a dense grid.
    #[test]
    fn pulse_peaks_at_peak_time(pulse in pulse_strategy()) {
        let n = 2000;
        let mut best = (f64::NEG_INFINITY, 0.0);
        for i in 0..=n {
            let t = pulse.start + (pulse.end - pulse.start) * (i as f64 / n as f64);
            let v = beta_pulse(&pulse, t);
            prop_assert!(v >= 0.0);
            if v > best.0 {
                best = (v, t);
            }
        }
        let step = (pulse.end - pulse.start) / n as f64;
        prop_assert!((best.1 - pulse.peak_time).abs() <= step + 1e-12);
        prop_assert!(best.0 <= pulse.amplitude + 1e-9);
        prop_assert!((beta_pulse(&pulse, pulse.peak_time) - pulse.amplitude).abs() <= 1e-9);
    }

    /// Reconstructed velocity hits the endpoint velocities exactly.
    #[test]
    fn reconstruction_endpoint_identity(
        pulse in pulse_strategy(),
        vi in 0.0f64..5.0,
        vf in 0.0f64..5.0,
    ) {
        let drag = DragComponent { start_velocity: vi, end_velocity: vf };
        let at_start = reconstruct_velocity(&pulse, &drag, pulse.start).unwrap();
        let at_end = reconstruct_velocity(&pulse, &drag, pulse.end).unwrap();
        prop_assert!((at_start - vi).abs() <= 1e-12);
        prop_assert!((at_end - vf).abs() <= 1e-12);
    }

    /// The drag cubic never leaves the band between its endpoint velocities.
    #[test]
    fn drag_stays_between_endpoints(
        vi in 0.0f64..5.0,
        vf in 0.0f64..5.0,
        t0 in -1.0f64..1.0,
        duration in 0.05f64..2.0,
    ) {
        let t1 = t0 + duration;
        let drag = DragComponent { start_velocity: vi, end_velocity: vf };
        let (lo, hi) = (vi.min(vf), vi.max(vf));
        for k in 0..=200 {
            let t = (t0 + duration * (k as f64 / 200.0)).clamp(t0, t1);
            let v = drag_velocity(&drag, t0, t1, t).unwrap();
            prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9, "v = {} outside [{}, {}]", v, lo, hi);
        }
    }

    /// Fuzzy memberships are a partition of unity with at most two active
    /// classes, for any finite angle.
    #[test]
    fn fuzzy_codes_partition_unity(theta in -50.0f64..50.0) {
        let m = fepc_membership(theta);
        prop_assert_eq!(m.sum(), 1.0);
        let active = m.to_array().iter().filter(|&&v| v > 0.0).count();
        prop_assert!(active <= 2);
        prop_assert_eq!(m, fepc_membership(theta + std::f64::consts::PI));
    }

    /// Zero-phase filtering is linear in its input.
    #[test]
    fn filtering_is_linear(
        seed in 0u64..1000,
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
        let filter = cheby2_lowpass(4, 40.0, 12.0, 100.0).unwrap();
        let u: Vec<f64> = (0..64).map(|_| rng.gen::<f64>() - 0.5).collect();
        let v: Vec<f64> = (0..64).map(|_| rng.gen::<f64>() - 0.5).collect();
        let mixed: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
        let fu = filter.filtfilt(&u).unwrap();
        let fv = filter.filtfilt(&v).unwrap();
        let fm = filter.filtfilt(&mixed).unwrap();
        for i in 0..64 {
            prop_assert!((fm[i] - (a * fu[i] + b * fv[i])).abs() <= 1e-9);
        }
    }

    /// Height normalization is idempotent and pins the box to the origin.
    #[test]
    fn normalization_idempotent(
        w in 1.0f64..500.0,
        h in 1.0f64..500.0,
        ox in -100.0f64..100.0,
        oy in -100.0f64..100.0,
    ) {
        let word = Word {
            writer_id: None,
            script: Script::Other,
            page: None,
            traces: vec![Trace {
                samples: vec![
                    InkSample { t: 0.0, x: ox, y: oy },
                    InkSample { t: 0.01, x: ox + w, y: oy + h },
                    InkSample { t: 0.02, x: ox + w / 2.0, y: oy + h / 3.0 },
                ],
            }],
        };
        let cfg = PreprocessConfig::default();
        let once = normalize_height(&word, &cfg).unwrap();
        let twice = normalize_height(&once, &cfg).unwrap();
        let (min_x, min_y, _, max_y) = once.bounding_box().unwrap();
        prop_assert!(min_x.abs() <= 1e-9 && min_y.abs() <= 1e-9);
        prop_assert!((max_y - min_y - 128.0).abs() <= 1e-9);
        for (a, b) in once.traces[0].samples.iter().zip(&twice.traces[0].samples) {
            prop_assert!((a.x - b.x).abs() <= 1e-12 * (1.0 + a.x.abs()));
            prop_assert!((a.y - b.y).abs() <= 1e-12 * (1.0 + a.y.abs()));
        }
    }
}
