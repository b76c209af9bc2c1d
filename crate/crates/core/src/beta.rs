//! Beta-pulse velocity model: each stroke's curvilinear speed is one bounded
//! asymmetric bell (the impulsive component) riding on a monotone cubic drag
//! term anchored at the endpoint velocities. The fall exponent of the bell is
//! always derived from the rise exponent and the peak time, which is what
//! makes the peak land exactly at `peak_time`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of one velocity bell with support `[start, end]` and maximum
/// `amplitude` at `peak_time`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaPulseParams {
    pub amplitude: f64,
    pub start: f64,
    pub peak_time: f64,
    pub end: f64,
    pub rise_exponent: f64,
}

impl BetaPulseParams {
    pub fn new(
        amplitude: f64,
        start: f64,
        peak_time: f64,
        end: f64,
        rise_exponent: f64,
    ) -> Result<Self> {
        if !(start < peak_time && peak_time < end) {
            return Err(Error::InvalidConfig {
                detail: format!("pulse needs start < peak < end, got {start}, {peak_time}, {end}"),
            });
        }
        if amplitude <= 0.0 || rise_exponent <= 0.0 {
            return Err(Error::InvalidConfig {
                detail: "pulse amplitude and rise exponent must be positive".into(),
            });
        }
        Ok(BetaPulseParams {
            amplitude,
            start,
            peak_time,
            end,
            rise_exponent,
        })
    }

    /// Fall exponent forced by stationarity at the peak.
    pub fn fall_exponent(&self) -> f64 {
        derive_fall_exponent(self.rise_exponent, self.start, self.peak_time, self.end)
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    /// Peak position as a fraction of the duration, in (0, 1).
    pub fn peak_fraction(&self) -> f64 {
        (self.peak_time - self.start) / self.duration()
    }
}

/// Fall exponent that puts the bell's maximum exactly at `peak_time`.
pub fn derive_fall_exponent(rise_exponent: f64, start: f64, peak_time: f64, end: f64) -> f64 {
    rise_exponent * (end - peak_time) / (peak_time - start)
}

/// Evaluates the bell; zero outside its support.
pub fn beta_pulse(params: &BetaPulseParams, t: f64) -> f64 {
    if t < params.start || t > params.end {
        return 0.0;
    }
    let rise = (t - params.start) / (params.peak_time - params.start);
    let fall = (params.end - t) / (params.end - params.peak_time);
    if rise <= 0.0 || fall <= 0.0 {
        return 0.0;
    }
    let q = params.fall_exponent();
    params.amplitude * (params.rise_exponent * rise.ln() + q * fall.ln()).exp()
}

/// Monotone cubic drag connecting the endpoint velocities of a stroke.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DragComponent {
    pub start_velocity: f64,
    pub end_velocity: f64,
}

impl DragComponent {
    /// Coefficient of the cubic term for the interval `[start, end]`.
    pub fn cubic_coefficient(&self, start: f64, end: f64) -> f64 {
        -6.0 * (self.end_velocity - self.start_velocity) / (end - start).powi(3)
    }

    /// Time average over the whole interval, which equals the endpoint mean.
    pub fn mean_velocity(&self) -> f64 {
        0.5 * (self.start_velocity + self.end_velocity)
    }
}

/// Drag velocity at `t`, defined on `[start, end]` only.
pub fn drag_velocity(drag: &DragComponent, start: f64, end: f64, t: f64) -> Result<f64> {
    if t < start || t > end {
        return Err(Error::InvalidConfig {
            detail: format!("t = {t} outside drag interval [{start}, {end}]"),
        });
    }
    Ok(drag_velocity_unchecked(drag, start, end, t))
}

#[inline]
pub(crate) fn drag_velocity_unchecked(drag: &DragComponent, start: f64, end: f64, t: f64) -> f64 {
    let a = drag.cubic_coefficient(start, end);
    let dt = t - start;
    a * (dt * dt * dt / 3.0 - (end - start) * dt * dt / 2.0) + drag.start_velocity
}

/// Reconstructed stroke velocity: impulsive bell plus drag.
pub fn reconstruct_velocity(
    pulse: &BetaPulseParams,
    drag: &DragComponent,
    t: f64,
) -> Result<f64> {
    if t < pulse.start || t > pulse.end {
        return Err(Error::InvalidConfig {
            detail: format!(
                "t = {t} outside stroke interval [{}, {}]",
                pulse.start, pulse.end
            ),
        });
    }
    Ok(beta_pulse(pulse, t) + drag_velocity_unchecked(drag, pulse.start, pulse.end, t))
}

/// Algebraic sum of bells; the generative reading of the velocity model.
pub fn superpose(pulses: &[BetaPulseParams], t: f64) -> f64 {
    pulses.iter().map(|p| beta_pulse(p, t)).sum()
}

/// One fully fitted stroke: kinematics, geometry, and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaStroke {
    pub pulse: BetaPulseParams,
    pub drag: DragComponent,
    pub arcs: crate::ellipse::EllipticArcPair,
    /// Inclusive sample range within the owning trace.
    pub sample_range: (usize, usize),
    /// RMS error of the velocity reconstruction over the slice.
    pub fit_residual: f64,
    pub degenerate_impulse: bool,
}

// ---------------------------------------------------------------------------
// Fitting
// ---------------------------------------------------------------------------

pub const MIN_FIT_SAMPLES: usize = 5;
const RISE_EXP_MIN: f64 = 0.1;
const RISE_EXP_MAX: f64 = 30.0;
const MAX_GAUSS_NEWTON_ITERS: usize = 50;
const COST_REL_TOL: f64 = 1e-8;

/// Result of fitting one velocity slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityFit {
    pub pulse: BetaPulseParams,
    pub drag: DragComponent,
    /// RMS of the reconstruction error over the slice.
    pub residual_rms: f64,
    /// Set when the slice has no positive excess over the drag; the pulse
    /// carries placeholder parameters in that case.
    pub degenerate_impulse: bool,
}

/// Fits the velocity model to one stroke slice. `times` must be the slice's
/// own timestamps (so `times[0]` and `times[last]` are the stroke limits) and
/// `speeds` the matching curvilinear velocities.
pub fn fit_velocity(times: &[f64], speeds: &[f64]) -> Result<VelocityFit> {
    if times.len() != speeds.len() {
        return Err(Error::ShapeMismatch {
            expected: times.len(),
            got: speeds.len(),
        });
    }
    if times.len() < MIN_FIT_SAMPLES {
        return Err(Error::TraceTooShort {
            len: times.len(),
            min: MIN_FIT_SAMPLES,
        });
    }
    let start = times[0];
    let end = *times.last().unwrap();
    let span = end - start;
    if span <= 0.0 {
        return Err(Error::InvalidConfig {
            detail: "velocity slice has zero duration".into(),
        });
    }

    let drag = DragComponent {
        start_velocity: speeds[0].max(0.0),
        end_velocity: speeds[speeds.len() - 1].max(0.0),
    };
    let excess: Vec<f64> = times
        .iter()
        .zip(speeds)
        .map(|(&t, &v)| v - drag_velocity_unchecked(&drag, start, end, t))
        .collect();

    // Peak seed: interior argmax of the excess.
    let mut peak_idx = 1;
    let mut peak_val = f64::NEG_INFINITY;
    for i in 1..times.len() - 1 {
        if excess[i] > peak_val {
            peak_val = excess[i];
            peak_idx = i;
        }
    }

    let vmax = speeds.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    if peak_val <= 1e-9 * vmax.max(1e-9) {
        // Impulse-free slice: drag alone explains the profile.
        let residual = rms(times, speeds, None, &drag, start, end);
        return Ok(VelocityFit {
            pulse: BetaPulseParams {
                amplitude: f64::EPSILON,
                start,
                peak_time: 0.5 * (start + end),
                end,
                rise_exponent: 1.0,
            },
            drag,
            residual_rms: residual,
            degenerate_impulse: true,
        });
    }

    let mut peak_time = times[peak_idx];
    let margin = 1e-3 * span;
    peak_time = peak_time.clamp(start + margin, end - margin);

    // Scalar refinement of the rise exponent with the amplitude eliminated
    // by linear least squares, then a golden-section polish.
    let cost_for_p = |p: f64| -> (f64, f64) {
        best_amplitude_cost(times, &excess, start, peak_time, end, p)
    };
    let mut best = (f64::INFINITY, 1.0, peak_val);
    for i in 0..64 {
        let p = RISE_EXP_MIN * (RISE_EXP_MAX / RISE_EXP_MIN).powf(i as f64 / 63.0);
        let (cost, amp) = cost_for_p(p);
        if cost < best.0 {
            best = (cost, p, amp);
        }
    }
    let (lo, hi) = (
        (best.1 / 1.6).max(RISE_EXP_MIN),
        (best.1 * 1.6).min(RISE_EXP_MAX),
    );
    let mut a = lo;
    let mut b = hi;
    let phi = 0.5 * (5.0f64.sqrt() - 1.0);
    for _ in 0..40 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if cost_for_p(c).0 <= cost_for_p(d).0 {
            b = d;
        } else {
            a = c;
        }
    }
    let p0 = 0.5 * (a + b);
    let (_, k0) = cost_for_p(p0);
    let k0 = k0.max(1e-12);

    // Joint damped Gauss-Newton over (amplitude, peak_time, rise_exponent).
    let residuals = |k: f64, tc: f64, p: f64, out: &mut [f64]| {
        let q = derive_fall_exponent(p, start, tc, end);
        for ((&t, &e), r) in times.iter().zip(&excess).zip(out.iter_mut()) {
            *r = k * shape(t, start, tc, end, p, q) - e;
        }
    };
    let n = times.len();
    let mut r = vec![0.0; n];
    let mut r_tmp = vec![0.0; n];
    let mut params = [k0, peak_time, p0];
    residuals(params[0], params[1], params[2], &mut r);
    let mut cost: f64 = r.iter().map(|v| v * v).sum();
    let mut lambda = 1e-3;

    for _ in 0..MAX_GAUSS_NEWTON_ITERS {
        // Jacobian: analytic in the amplitude, central differences in the
        // peak time and exponent.
        let mut jac = vec![[0.0f64; 3]; n];
        let q = derive_fall_exponent(params[2], start, params[1], end);
        for (i, &t) in times.iter().enumerate() {
            jac[i][0] = shape(t, start, params[1], end, params[2], q);
        }
        let h_tc = 1e-6 * span;
        let h_p = 1e-6 * params[2].max(1.0);
        for (col, h, lo, hi) in [
            (1usize, h_tc, start + margin, end - margin),
            (2usize, h_p, RISE_EXP_MIN, RISE_EXP_MAX),
        ] {
            let mut plus = params;
            let mut minus = params;
            plus[col] = (params[col] + h).min(hi);
            minus[col] = (params[col] - h).max(lo);
            let dh = plus[col] - minus[col];
            residuals(plus[0], plus[1], plus[2], &mut r_tmp);
            let rp = r_tmp.clone();
            residuals(minus[0], minus[1], minus[2], &mut r_tmp);
            for i in 0..n {
                jac[i][col] = (rp[i] - r_tmp[i]) / dh;
            }
        }

        // Normal equations with multiplicative damping.
        let mut jtj = [[0.0f64; 3]; 3];
        let mut jtr = [0.0f64; 3];
        for i in 0..n {
            for c in 0..3 {
                jtr[c] += jac[i][c] * r[i];
                for d in 0..3 {
                    jtj[c][d] += jac[i][c] * jac[i][d];
                }
            }
        }

        let mut improved = false;
        for _ in 0..8 {
            let mut m = crate::linalg::Mat::zeros(3, 3);
            for c in 0..3 {
                for d in 0..3 {
                    *m.at_mut(c, d) = jtj[c][d];
                }
                *m.at_mut(c, c) += lambda * jtj[c][c].max(1e-12);
            }
            let rhs: Vec<f64> = jtr.iter().map(|v| -v).collect();
            let Some(step) = crate::linalg::solve(&m, &rhs) else {
                lambda *= 10.0;
                continue;
            };
            let trial = [
                (params[0] + step[0]).max(1e-12),
                (params[1] + step[1]).clamp(start + margin, end - margin),
                (params[2] + step[2]).clamp(RISE_EXP_MIN, RISE_EXP_MAX),
            ];
            residuals(trial[0], trial[1], trial[2], &mut r_tmp);
            let trial_cost: f64 = r_tmp.iter().map(|v| v * v).sum();
            if trial_cost < cost {
                params = trial;
                std::mem::swap(&mut r, &mut r_tmp);
                let rel = (cost - trial_cost) / cost.max(1e-300);
                cost = trial_cost;
                lambda = (lambda / 3.0).max(1e-12);
                improved = true;
                if rel < COST_REL_TOL {
                    lambda = f64::INFINITY; // sentinel: converged
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved || lambda.is_infinite() {
            break;
        }
    }

    let pulse = BetaPulseParams {
        amplitude: params[0],
        start,
        peak_time: params[1],
        end,
        rise_exponent: params[2],
    };
    let residual_rms = rms(times, speeds, Some(&pulse), &drag, start, end);
    Ok(VelocityFit {
        pulse,
        drag,
        residual_rms,
        degenerate_impulse: false,
    })
}

/// Unit-amplitude bell value.
#[inline]
fn shape(t: f64, start: f64, peak: f64, end: f64, p: f64, q: f64) -> f64 {
    if t <= start || t >= end {
        return 0.0;
    }
    let rise = (t - start) / (peak - start);
    let fall = (end - t) / (end - peak);
    (p * rise.ln() + q * fall.ln()).exp()
}

fn best_amplitude_cost(
    times: &[f64],
    excess: &[f64],
    start: f64,
    peak: f64,
    end: f64,
    p: f64,
) -> (f64, f64) {
    let q = derive_fall_exponent(p, start, peak, end);
    let mut num = 0.0;
    let mut den = 0.0;
    for (&t, &e) in times.iter().zip(excess) {
        let s = shape(t, start, peak, end, p, q);
        num += s * e;
        den += s * s;
    }
    if den <= 0.0 {
        return (f64::INFINITY, 0.0);
    }
    let k = (num / den).max(0.0);
    let mut cost = 0.0;
    for (&t, &e) in times.iter().zip(excess) {
        let d = k * shape(t, start, peak, end, p, q) - e;
        cost += d * d;
    }
    (cost, k)
}

fn rms(
    times: &[f64],
    speeds: &[f64],
    pulse: Option<&BetaPulseParams>,
    drag: &DragComponent,
    start: f64,
    end: f64,
) -> f64 {
    let mut acc = 0.0;
    for (&t, &v) in times.iter().zip(speeds) {
        let model = pulse.map_or(0.0, |p| beta_pulse(p, t))
            + drag_velocity_unchecked(drag, start, end, t);
        let d = model - v;
        acc += d * d;
    }
    (acc / times.len() as f64).sqrt()
}
