//! Chebyshev type II low-pass design and zero-phase (forward-backward)
//! filtering.
//!
//! The design pipeline is the classic one: analog prototype normalized to the
//! stopband edge, low-pass frequency scaling with prewarping, bilinear
//! transform, then expansion of zeros/poles into transfer-function
//! coefficients. Filtering runs direct-form II transposed with steady-state
//! initial conditions and odd-extension padding so that constant signals pass
//! through untouched and symmetric pulses stay symmetric.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
struct Cx {
    re: f64,
    im: f64,
}

impl Cx {
    const fn new(re: f64, im: f64) -> Cx {
        Cx { re, im }
    }
    fn add(self, o: Cx) -> Cx {
        Cx::new(self.re + o.re, self.im + o.im)
    }
    fn sub(self, o: Cx) -> Cx {
        Cx::new(self.re - o.re, self.im - o.im)
    }
    fn mul(self, o: Cx) -> Cx {
        Cx::new(
            self.re * o.re - self.im * o.im,
            self.re * o.im + self.im * o.re,
        )
    }
    fn div(self, o: Cx) -> Cx {
        let d = o.re * o.re + o.im * o.im;
        Cx::new(
            (self.re * o.re + self.im * o.im) / d,
            (self.im * o.re - self.re * o.im) / d,
        )
    }
    fn scale(self, s: f64) -> Cx {
        Cx::new(self.re * s, self.im * s)
    }
    fn neg(self) -> Cx {
        Cx::new(-self.re, -self.im)
    }
    fn abs(self) -> f64 {
        self.re.hypot(self.im)
    }
}

/// Digital IIR filter as numerator/denominator coefficients, `a[0] = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct IirFilter {
    pub b: Vec<f64>,
    pub a: Vec<f64>,
}

/// Designs a digital Chebyshev type II low-pass filter.
///
/// `cutoff_hz` is the stopband edge: every frequency at or above it is
/// attenuated by at least `stopband_db`.
pub fn cheby2_lowpass(
    order: usize,
    stopband_db: f64,
    cutoff_hz: f64,
    sample_rate_hz: f64,
) -> Result<IirFilter> {
    let nyquist = sample_rate_hz / 2.0;
    if !(cutoff_hz > 0.0 && cutoff_hz < nyquist) {
        return Err(Error::CutoffAboveNyquist {
            cutoff_hz,
            nyquist_hz: nyquist,
        });
    }
    if order == 0 {
        return Err(Error::InvalidConfig {
            detail: "filter order must be positive".into(),
        });
    }

    let n = order;
    let (mut zeros, mut poles, mut gain) = cheb2_prototype(n, stopband_db);

    // Prewarped analog cutoff; the bilinear step below uses fs = 2.
    let wn = cutoff_hz / nyquist;
    let warped = 4.0 * (std::f64::consts::PI * wn / 2.0).tan();
    for z in &mut zeros {
        *z = z.scale(warped);
    }
    for p in &mut poles {
        *p = p.scale(warped);
    }
    gain *= warped.powi((poles.len() - zeros.len()) as i32);

    let (zd, pd, kd) = bilinear(&zeros, &poles, gain, 2.0);

    let b: Vec<f64> = poly_from_roots(&zd).iter().map(|c| c.re * kd).collect();
    let a: Vec<f64> = poly_from_roots(&pd).iter().map(|c| c.re).collect();
    Ok(IirFilter { b, a })
}

/// Analog Chebyshev II prototype normalized to stopband edge 1 rad/s.
fn cheb2_prototype(n: usize, rs: f64) -> (Vec<Cx>, Vec<Cx>, f64) {
    use std::f64::consts::PI;
    let de = 1.0 / (10f64.powf(0.1 * rs) - 1.0).sqrt();
    let mu = (1.0 / de).asinh() / n as f64;

    // Odd orders have one zero at infinity (the m = 0 slot is skipped).
    let mut zeros = Vec::with_capacity(n);
    let mut m = -(n as i64) + 1;
    while m < n as i64 {
        if m != 0 || n % 2 == 0 {
            let s = (m as f64 * PI / (2.0 * n as f64)).sin();
            zeros.push(Cx::new(0.0, 1.0 / s));
        }
        m += 2;
    }

    let mut poles = Vec::with_capacity(n);
    let mut m = -(n as i64) + 1;
    while m < n as i64 {
        let ang = PI * m as f64 / (2.0 * n as f64);
        let p = Cx::new(-mu.sinh() * ang.cos(), -mu.cosh() * ang.sin());
        poles.push(Cx::new(1.0, 0.0).div(p));
        m += 2;
    }

    let num: Cx = poles.iter().fold(Cx::new(1.0, 0.0), |acc, p| acc.mul(p.neg()));
    let den: Cx = zeros.iter().fold(Cx::new(1.0, 0.0), |acc, z| acc.mul(z.neg()));
    (zeros, poles, num.re / den.re)
}

fn bilinear(zeros: &[Cx], poles: &[Cx], gain: f64, fs: f64) -> (Vec<Cx>, Vec<Cx>, f64) {
    let fs2 = Cx::new(2.0 * fs, 0.0);
    let mut zd: Vec<Cx> = zeros.iter().map(|&z| fs2.add(z).div(fs2.sub(z))).collect();
    let pd: Vec<Cx> = poles.iter().map(|&p| fs2.add(p).div(fs2.sub(p))).collect();
    // Zeros at infinity map to z = -1.
    for _ in zeros.len()..poles.len() {
        zd.push(Cx::new(-1.0, 0.0));
    }
    let num = zeros.iter().fold(Cx::new(1.0, 0.0), |acc, &z| acc.mul(fs2.sub(z)));
    let den = poles.iter().fold(Cx::new(1.0, 0.0), |acc, &p| acc.mul(fs2.sub(p)));
    (zd, pd, gain * num.div(den).re)
}

/// Expands a monic polynomial from its roots, highest degree first.
fn poly_from_roots(roots: &[Cx]) -> Vec<Cx> {
    let mut coeffs = vec![Cx::new(1.0, 0.0)];
    for &r in roots {
        coeffs.push(Cx::new(0.0, 0.0));
        for i in (1..coeffs.len()).rev() {
            let prev = coeffs[i - 1];
            coeffs[i] = coeffs[i].sub(r.mul(prev));
        }
    }
    coeffs
}

impl IirFilter {
    /// Magnitude of the frequency response at `freq_hz` for a single pass.
    /// Forward-backward filtering squares this.
    pub fn magnitude_at(&self, freq_hz: f64, sample_rate_hz: f64) -> f64 {
        let w = 2.0 * std::f64::consts::PI * freq_hz / sample_rate_hz;
        let eval = |coeffs: &[f64]| {
            let mut acc = Cx::new(0.0, 0.0);
            for (k, &c) in coeffs.iter().enumerate() {
                let ang = -(k as f64) * w;
                acc = acc.add(Cx::new(ang.cos(), ang.sin()).scale(c));
            }
            acc
        };
        eval(&self.b).div(eval(&self.a)).abs()
    }

    fn order(&self) -> usize {
        self.a.len().max(self.b.len()) - 1
    }

    /// Single forward pass, direct form II transposed, with initial state
    /// `zi` (already scaled by the caller).
    fn lfilter(&self, x: &[f64], zi: &[f64]) -> Vec<f64> {
        let nb = self.b.len();
        let na = self.a.len();
        let nz = self.order();
        let mut z = zi.to_vec();
        z.resize(nz, 0.0);
        let mut y = Vec::with_capacity(x.len());
        for &xn in x {
            let yn = self.b[0] * xn + z[0];
            for i in 0..nz {
                let bi = if i + 1 < nb { self.b[i + 1] } else { 0.0 };
                let ai = if i + 1 < na { self.a[i + 1] } else { 0.0 };
                let znext = if i + 1 < nz { z[i + 1] } else { 0.0 };
                z[i] = bi * xn + znext - ai * yn;
            }
            y.push(yn);
        }
        y
    }

    /// Steady-state initial conditions for a unit-amplitude constant input.
    fn steady_state_zi(&self) -> Vec<f64> {
        let n = self.order();
        let mut b = self.b.clone();
        let mut a = self.a.clone();
        b.resize(n + 1, 0.0);
        a.resize(n + 1, 0.0);

        // (I - Companion(a)^T) zi = b[1:] - b[0] * a[1:]
        let mut m = crate::linalg::Mat::zeros(n, n);
        for i in 0..n {
            *m.at_mut(i, i) += 1.0;
        }
        for j in 0..n {
            *m.at_mut(j, 0) += a[j + 1];
        }
        for i in 1..n {
            *m.at_mut(i - 1, i) -= 1.0;
        }
        let rhs: Vec<f64> = (0..n).map(|i| b[i + 1] - b[0] * a[i + 1]).collect();
        crate::linalg::solve(&m, &rhs).unwrap_or_else(|| vec![0.0; n])
    }

    /// Zero-phase filtering: forward pass, backward pass, odd-extension
    /// padding on both ends to suppress edge transients.
    pub fn filtfilt(&self, x: &[f64]) -> Result<Vec<f64>> {
        let order = self.order();
        let min_len = 3 * order;
        if x.len() < min_len {
            return Err(Error::TraceTooShort {
                len: x.len(),
                min: min_len,
            });
        }
        let padlen = (3 * order).min(x.len() - 1);
        let n = x.len();

        let mut ext = Vec::with_capacity(n + 2 * padlen);
        for i in (1..=padlen).rev() {
            ext.push(2.0 * x[0] - x[i]);
        }
        ext.extend_from_slice(x);
        for i in 1..=padlen {
            ext.push(2.0 * x[n - 1] - x[n - 1 - i]);
        }

        let zi = self.steady_state_zi();
        let scaled: Vec<f64> = zi.iter().map(|v| v * ext[0]).collect();
        let mut y = self.lfilter(&ext, &scaled);
        y.reverse();
        let scaled: Vec<f64> = zi.iter().map(|v| v * y[0]).collect();
        let mut y = self.lfilter(&y, &scaled);
        y.reverse();
        Ok(y[padlen..padlen + n].to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_filter() -> IirFilter {
        cheby2_lowpass(4, 40.0, 12.0, 100.0).unwrap()
    }

    #[test]
    fn dc_gain_is_unity() {
        let f = default_filter();
        let sb: f64 = f.b.iter().sum();
        let sa: f64 = f.a.iter().sum();
        assert!((sb / sa - 1.0).abs() < 1e-9, "dc gain {}", sb / sa);
        assert!((f.magnitude_at(0.0, 100.0) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn passband_and_stopband_response() {
        let f = default_filter();
        // 2 Hz is deep inside the passband.
        let g2 = f.magnitude_at(2.0, 100.0);
        assert!((g2 - 1.0).abs() < 0.01, "gain at 2 Hz {}", g2);
        // At and beyond the 12 Hz stopband edge the floor is -40 dB.
        for freq in [12.0, 20.0, 30.0, 49.0] {
            let g = f.magnitude_at(freq, 100.0);
            let db = -20.0 * g.log10();
            assert!(db >= 40.0 - 1e-6, "attenuation at {freq} Hz is {db} dB");
        }
    }

    #[test]
    fn matches_reference_design() {
        // Cross-checked against scipy.signal.cheby2(4, 40, 12, fs=100).
        let f = default_filter();
        let b_ref = [
            0.01439059, -0.01887099, 0.02743095, -0.01887099, 0.01439059,
        ];
        let a_ref = [1.0, -2.94599184, 3.36194829, -1.74247816, 0.34499187];
        for (got, want) in f.b.iter().zip(b_ref.iter()) {
            assert!((got - want).abs() < 1e-7, "b: {got} vs {want}");
        }
        for (got, want) in f.a.iter().zip(a_ref.iter()) {
            assert!((got - want).abs() < 1e-7, "a: {got} vs {want}");
        }
    }

    #[test]
    fn filtfilt_preserves_constants() {
        let f = default_filter();
        let x = vec![3.25; 64];
        let y = f.filtfilt(&x).unwrap();
        for v in y {
            assert!((v - 3.25).abs() < 1e-9);
        }
    }

    #[test]
    fn filtfilt_attenuates_stopband_sine() {
        let f = default_filter();
        let x: Vec<f64> = (0..400)
            .map(|i| (2.0 * std::f64::consts::PI * 30.0 * i as f64 / 100.0).sin())
            .collect();
        let y = f.filtfilt(&x).unwrap();
        // Squared response of the single pass: at least 80 dB down.
        let peak = y[50..350].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(peak < 1e-2, "residual 30 Hz amplitude {peak}");
    }

    #[test]
    fn filtfilt_passes_slow_sine() {
        let f = default_filter();
        let x: Vec<f64> = (0..500)
            .map(|i| (2.0 * std::f64::consts::PI * 2.0 * i as f64 / 100.0).sin())
            .collect();
        let y = f.filtfilt(&x).unwrap();
        let peak = y[100..400].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((peak - 1.0).abs() < 0.01, "2 Hz amplitude {peak}");
    }

    #[test]
    fn filtfilt_is_linear() {
        let f = default_filter();
        let u: Vec<f64> = (0..64).map(|i| (i as f64 * 0.37).sin()).collect();
        let v: Vec<f64> = (0..64).map(|i| (i as f64 * 0.11).cos() * 2.0).collect();
        let (a, b) = (1.7, -0.4);
        let combined: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
        let fu = f.filtfilt(&u).unwrap();
        let fv = f.filtfilt(&v).unwrap();
        let fc = f.filtfilt(&combined).unwrap();
        for i in 0..64 {
            assert!((fc[i] - (a * fu[i] + b * fv[i])).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_phase_keeps_pulse_symmetric() {
        let f = default_filter();
        let n = 201;
        let x: Vec<f64> = (0..n)
            .map(|i| {
                let d = (i as f64 - 100.0) / 10.0;
                (-0.5 * d * d).exp()
            })
            .collect();
        let y = f.filtfilt(&x).unwrap();
        let peak_idx = y
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert!((peak_idx as i64 - 100).abs() <= 1, "peak moved to {peak_idx}");
        for i in 0..n {
            assert!((y[i] - y[n - 1 - i]).abs() < 1e-8);
        }
    }

    #[test]
    fn too_short_trace_is_rejected() {
        let f = default_filter();
        assert!(matches!(
            f.filtfilt(&[1.0; 5]),
            Err(Error::TraceTooShort { .. })
        ));
    }

    #[test]
    fn cutoff_must_be_below_nyquist() {
        assert!(matches!(
            cheby2_lowpass(4, 40.0, 60.0, 100.0),
            Err(Error::CutoffAboveNyquist { .. })
        ));
    }
}
