//! Paired elliptic-arc stroke geometry.
//!
//! A stroke's trajectory is modeled by two elliptic arcs sharing one
//! major-axis direction and joined at their minor-axis vertices, where both
//! have curvature b/a². Forcing that curvature to match ties the second
//! semi-major axis to the other three lengths, so the whole pair is described
//! by (a1, b1, b2, θ) plus the endpoint tangents. The fit estimates those
//! parameters by constrained least squares on the algebraic ellipse distance,
//! with the second semi-major axis eliminated rather than fitted.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_ARC_POINTS: usize = 6;
const DEGENERATE_AXIS: f64 = 1e-9;
/// Upper bound on fitted semi-axes, as a multiple of the point-set extent.
const MAX_AXIS_EXTENT_RATIO: f64 = 4.0;

/// Fitted two-arc geometry of one stroke. `semi_major_2` is always derived,
/// never stored, so the curvature-continuity constraint holds exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipticArcPair {
    pub semi_major_1: f64,
    pub semi_minor_1: f64,
    pub semi_minor_2: f64,
    /// Shared major-axis inclination, in (−π, π].
    pub theta: f64,
    /// Trajectory tangent angle at the stroke start.
    pub tangent_start: f64,
    /// Trajectory tangent angle at the stroke end.
    pub tangent_end: f64,
    /// Link point between the arcs (the velocity-peak sample).
    pub link_point: (f64, f64),
    /// Collinear or under-determined geometry; axes carry placeholders.
    pub degenerate: bool,
}

impl EllipticArcPair {
    /// Second semi-major axis from curvature continuity at the link point.
    pub fn semi_major_2(&self) -> f64 {
        self.semi_major_1 * (self.semi_minor_2 / self.semi_minor_1).sqrt()
    }
}

/// Wraps an angle to (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let twopi = 2.0 * std::f64::consts::PI;
    let mut r = a % twopi;
    if r <= -std::f64::consts::PI {
        r += twopi;
    } else if r > std::f64::consts::PI {
        r -= twopi;
    }
    r
}

/// Smallest distance between two line orientations (period π).
pub fn orientation_distance(a: f64, b: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let mut d = (a - b) % pi;
    if d < 0.0 {
        d += pi;
    }
    d.min(pi - d)
}

/// Fits the constrained arc pair to stroke points split at `split_hint`
/// (the velocity-peak sample index).
pub fn fit_arc_pair(points: &[(f64, f64)], split_hint: usize) -> Result<EllipticArcPair> {
    let n = points.len();
    if n < MIN_ARC_POINTS {
        return Err(Error::TraceTooShort {
            len: n,
            min: MIN_ARC_POINTS,
        });
    }

    let tangent_start = endpoint_tangent(points, true);
    let tangent_end = endpoint_tangent(points, false);
    // Keep at least 3 points on each side of the split.
    let hint = split_hint.clamp(2, n - 3);
    let link_point = points[hint];

    if let Some(direction) = collinear_direction(points) {
        return Ok(degenerate_pair(
            points,
            direction,
            tangent_start,
            tangent_end,
            link_point,
        ));
    }

    let first = &points[..=hint];
    let second = &points[hint..];

    let init1 = conic_init(first);
    let init2 = conic_init(second);
    let (theta0, a1_0, b1_0, b2_0, c1_0, c2_0) = combine_inits(points, hint, &init1, &init2);

    let scale = extent(points).max(1e-6);
    // A fitted axis longer than this is indistinguishable from a straight
    // segment at the stroke's own scale; bounding it keeps downstream
    // feature ranges sane.
    let axis_cap = MAX_AXIS_EXTENT_RATIO * scale;
    let mut params = [
        theta0, a1_0, b1_0, b2_0, c1_0.0, c1_0.1, c2_0.0, c2_0.1,
    ];
    for c in 1..4 {
        params[c] = params[c].clamp(DEGENERATE_AXIS, axis_cap);
    }
    let n_res = first.len() + second.len();
    let mut r = vec![0.0; n_res];
    let mut r_tmp = vec![0.0; n_res];
    arc_residuals(&params, first, second, &mut r);
    let mut cost: f64 = r.iter().map(|v| v * v).sum();
    let mut lambda = 1e-3;

    for _ in 0..60 {
        let mut jac = vec![[0.0f64; 8]; n_res];
        for col in 0..8 {
            let h = if col == 0 { 1e-7 } else { 1e-7 * scale };
            let mut plus = params;
            let mut minus = params;
            plus[col] += h;
            minus[col] -= h;
            clamp_axes(&mut plus, axis_cap);
            clamp_axes(&mut minus, axis_cap);
            let dh = plus[col] - minus[col];
            arc_residuals(&plus, first, second, &mut r_tmp);
            let rp = r_tmp.clone();
            arc_residuals(&minus, first, second, &mut r_tmp);
            for i in 0..n_res {
                jac[i][col] = (rp[i] - r_tmp[i]) / dh;
            }
        }

        let mut jtj = [[0.0f64; 8]; 8];
        let mut jtr = [0.0f64; 8];
        for i in 0..n_res {
            for c in 0..8 {
                jtr[c] += jac[i][c] * r[i];
                for d in 0..8 {
                    jtj[c][d] += jac[i][c] * jac[i][d];
                }
            }
        }

        let mut improved = false;
        for _ in 0..8 {
            let mut m = crate::linalg::Mat::zeros(8, 8);
            for c in 0..8 {
                for d in 0..8 {
                    *m.at_mut(c, d) = jtj[c][d];
                }
                *m.at_mut(c, c) += lambda * jtj[c][c].max(1e-12);
            }
            let rhs: Vec<f64> = jtr.iter().map(|v| -v).collect();
            let Some(step) = crate::linalg::solve(&m, &rhs) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = params;
            for c in 0..8 {
                trial[c] += step[c];
            }
            clamp_axes(&mut trial, axis_cap);
            arc_residuals(&trial, first, second, &mut r_tmp);
            let trial_cost: f64 = r_tmp.iter().map(|v| v * v).sum();
            if trial_cost.is_finite() && trial_cost < cost {
                let rel = (cost - trial_cost) / cost.max(1e-300);
                params = trial;
                std::mem::swap(&mut r, &mut r_tmp);
                cost = trial_cost;
                lambda = (lambda / 3.0).max(1e-12);
                improved = true;
                if rel < 1e-10 {
                    lambda = f64::INFINITY;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved || lambda.is_infinite() {
            break;
        }
    }

    Ok(EllipticArcPair {
        semi_major_1: params[1],
        semi_minor_1: params[2],
        semi_minor_2: params[3],
        theta: wrap_angle(params[0]),
        tangent_start,
        tangent_end,
        link_point,
        degenerate: false,
    })
}

/// Degenerate pair for slices too short to fit: chord direction and length,
/// flat minor axes.
pub fn chord_fallback(points: &[(f64, f64)], split_hint: usize) -> EllipticArcPair {
    let n = points.len();
    let first = points[0];
    let last = points[n - 1];
    let direction = (last.1 - first.1).atan2(last.0 - first.0);
    let tangent_start = if n >= 2 {
        endpoint_tangent(points, true)
    } else {
        direction
    };
    let tangent_end = if n >= 2 {
        endpoint_tangent(points, false)
    } else {
        direction
    };
    degenerate_pair(
        points,
        direction,
        tangent_start,
        tangent_end,
        points[split_hint.min(n - 1)],
    )
}

/// Collinear fallback: a flat pair along the line direction.
pub fn degenerate_pair(
    points: &[(f64, f64)],
    direction: f64,
    tangent_start: f64,
    tangent_end: f64,
    link_point: (f64, f64),
) -> EllipticArcPair {
    let first = points[0];
    let last = points[points.len() - 1];
    let chord = 0.5 * (last.0 - first.0).hypot(last.1 - first.1);
    EllipticArcPair {
        semi_major_1: chord.max(DEGENERATE_AXIS),
        semi_minor_1: DEGENERATE_AXIS,
        semi_minor_2: DEGENERATE_AXIS,
        theta: wrap_angle(direction),
        tangent_start,
        tangent_end,
        link_point,
        degenerate: true,
    }
}

fn clamp_axes(params: &mut [f64; 8], axis_cap: f64) {
    for c in 1..4 {
        params[c] = params[c].clamp(DEGENERATE_AXIS, axis_cap);
    }
}

fn arc_residuals(params: &[f64; 8], first: &[(f64, f64)], second: &[(f64, f64)], out: &mut [f64]) {
    let (theta, a1, b1, b2) = (params[0], params[1], params[2], params[3]);
    let c1 = (params[4], params[5]);
    let c2 = (params[6], params[7]);
    let a2 = a1 * (b2 / b1).sqrt();
    let (cos_t, sin_t) = (theta.cos(), theta.sin());
    let mut k = 0;
    for &(x, y) in first {
        out[k] = algebraic_distance(x, y, c1, a1, b1, cos_t, sin_t);
        k += 1;
    }
    for &(x, y) in second {
        out[k] = algebraic_distance(x, y, c2, a2, b2, cos_t, sin_t);
        k += 1;
    }
}

#[inline]
fn algebraic_distance(
    x: f64,
    y: f64,
    center: (f64, f64),
    a: f64,
    b: f64,
    cos_t: f64,
    sin_t: f64,
) -> f64 {
    let dx = x - center.0;
    let dy = y - center.1;
    let u = cos_t * dx + sin_t * dy;
    let w = -sin_t * dx + cos_t * dy;
    (u / a) * (u / a) + (w / b) * (w / b) - 1.0
}

fn endpoint_tangent(points: &[(f64, f64)], at_start: bool) -> f64 {
    let n = points.len();
    let (from, to) = if at_start {
        (points[0], points[2.min(n - 1)])
    } else {
        (points[n - 1 - 2.min(n - 1)], points[n - 1])
    };
    wrap_angle((to.1 - from.1).atan2(to.0 - from.0))
}

/// Principal direction when the points are collinear, `None` otherwise.
fn collinear_direction(points: &[(f64, f64)]) -> Option<f64> {
    let n = points.len() as f64;
    let (mx, my) = points
        .iter()
        .fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let (mx, my) = (mx / n, my / n);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in points {
        let dx = x - mx;
        let dy = y - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let tr = sxx + syy;
    let det = sxx * syy - sxy * sxy;
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    let l_max = tr / 2.0 + disc;
    let l_min = tr / 2.0 - disc;
    if l_max <= 0.0 {
        return Some(0.0);
    }
    if l_min / l_max < 1e-10 {
        let dir = if sxy.abs() > 1e-300 {
            (l_max - sxx).atan2(sxy)
        } else if sxx >= syy {
            0.0
        } else {
            std::f64::consts::FRAC_PI_2
        };
        Some(dir)
    } else {
        None
    }
}

fn extent(points: &[(f64, f64)]) -> f64 {
    let (mut min_x, mut min_y, mut max_x, mut max_y) =
        (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &(x, y) in points {
        min_x = min_x.min(x);
        min_y = min_y.min(y);
        max_x = max_x.max(x);
        max_y = max_y.max(y);
    }
    (max_x - min_x).hypot(max_y - min_y)
}

struct ConicInit {
    theta: f64,
    semi_major: f64,
    semi_minor: f64,
    center: (f64, f64),
    /// 0 for circles (no usable orientation), up to 1 for thin ellipses.
    orientation_weight: f64,
    ok: bool,
}

/// Unconstrained general-conic fit of one sub-arc, used only to seed the
/// joint refinement. Uses the trace normalization A + C = 1, which every
/// ellipse admits.
fn conic_init(points: &[(f64, f64)]) -> ConicInit {
    let fallback = moments_init(points);
    if points.len() < 5 {
        return fallback;
    }
    // Shift to the centroid for conditioning.
    let n = points.len() as f64;
    let (mx, my) = points
        .iter()
        .fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let (mx, my) = (mx / n, my / n);

    // A(x² − y²) + Bxy + Dx + Ey + F = −y², with C = 1 − A.
    let mut ata = crate::linalg::Mat::zeros(5, 5);
    let mut atb = vec![0.0; 5];
    for &(px, py) in points {
        let x = px - mx;
        let y = py - my;
        let row = [x * x - y * y, x * y, x, y, 1.0];
        let rhs = -y * y;
        for i in 0..5 {
            atb[i] += row[i] * rhs;
            for j in 0..5 {
                *ata.at_mut(i, j) += row[i] * row[j];
            }
        }
    }
    let Some(sol) = crate::linalg::solve(&ata, &atb) else {
        return fallback;
    };
    let (a, b, d, e, f) = (sol[0], sol[1], sol[2], sol[3], sol[4]);
    let c = 1.0 - a;

    // Ellipse test and parameter extraction.
    let det = a * c - b * b / 4.0;
    if det <= 1e-12 {
        return fallback;
    }
    // Center solves [2A B; B 2C] c = [-D; -E].
    let m = crate::linalg::Mat::from_rows(&[vec![2.0 * a, b], vec![b, 2.0 * c]]);
    let Some(center) = crate::linalg::solve(&m, &[-d, -e]) else {
        return fallback;
    };
    let (cx, cy) = (center[0], center[1]);
    let f_c = a * cx * cx + b * cx * cy + c * cy * cy + d * cx + e * cy + f;
    if f_c >= 0.0 {
        return fallback;
    }

    let half_tr = 0.5 * (a + c);
    let disc = (0.25 * (a - c) * (a - c) + 0.25 * b * b).sqrt();
    let l_small = half_tr - disc;
    let l_big = half_tr + disc;
    if l_small <= 0.0 {
        return fallback;
    }
    let semi_major = (-f_c / l_small).sqrt();
    let semi_minor = (-f_c / l_big).sqrt();
    let theta = if b.abs() < 1e-14 && (a - c).abs() < 1e-14 {
        0.0
    } else if b.abs() < 1e-14 {
        if a < c {
            0.0
        } else {
            std::f64::consts::FRAC_PI_2
        }
    } else {
        (l_small - a).atan2(0.5 * b)
    };
    let ecc = (semi_major - semi_minor) / (semi_major + semi_minor);
    ConicInit {
        theta,
        semi_major,
        semi_minor,
        center: (cx + mx, cy + my),
        orientation_weight: ecc.max(0.0),
        ok: true,
    }
}

/// Second-moment seed used when the conic fit is unusable.
fn moments_init(points: &[(f64, f64)]) -> ConicInit {
    let n = points.len() as f64;
    let (mx, my) = points
        .iter()
        .fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let (mx, my) = (mx / n, my / n);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in points {
        let dx = x - mx;
        let dy = y - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let tr = (sxx + syy) / n;
    let disc = ((sxx - syy) * (sxx - syy) / 4.0 + sxy * sxy).sqrt() / n;
    let l_big = (tr / 2.0 + disc).max(1e-12);
    let l_small = (tr / 2.0 - disc).max(1e-12);
    let theta = if sxy.abs() < 1e-14 {
        if sxx >= syy {
            0.0
        } else {
            std::f64::consts::FRAC_PI_2
        }
    } else {
        (l_big * n - sxx).atan2(sxy)
    };
    ConicInit {
        theta,
        semi_major: 2.0 * l_big.sqrt(),
        semi_minor: 2.0 * l_small.sqrt(),
        center: (mx, my),
        orientation_weight: 0.3,
        ok: false,
    }
}

fn combine_inits(
    points: &[(f64, f64)],
    hint: usize,
    init1: &ConicInit,
    init2: &ConicInit,
) -> (f64, f64, f64, f64, (f64, f64), (f64, f64)) {
    // Orientation mean with period π, weighted by arc length share and how
    // elongated each fitted ellipse is.
    let w1 = (hint as f64 + 1.0) * init1.orientation_weight.max(1e-3);
    let w2 = (points.len() - hint) as f64 * init2.orientation_weight.max(1e-3);
    let (mut sx, mut sy) = (0.0, 0.0);
    for (w, th) in [(w1, init1.theta), (w2, init2.theta)] {
        sx += w * (2.0 * th).cos();
        sy += w * (2.0 * th).sin();
    }
    let theta = 0.5 * sy.atan2(sx);

    let a1 = init1.semi_major.max(1e-6);
    let b1 = init1.semi_minor.max(1e-6);
    let b2 = if init2.ok {
        init2.semi_minor.max(1e-6)
    } else {
        b1
    };
    (theta, a1, b1, b2, init1.center, init2.center)
}

// ---------------------------------------------------------------------------
// Generative side: sampling a constrained pair, used by the synthesis oracle
// and by round-trip tests.
// ---------------------------------------------------------------------------

/// Shape of a two-arc chain for synthesis. The arcs join at their shared
/// minor-axis vertex; `span1`/`span2` are the angular extents on either side
/// and `direction` flips the traversal sense.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArcPairSpec {
    pub semi_major_1: f64,
    pub semi_minor_1: f64,
    pub semi_minor_2: f64,
    pub theta: f64,
    pub span1: f64,
    pub span2: f64,
    pub direction: f64,
}

impl ArcPairSpec {
    pub fn semi_major_2(&self) -> f64 {
        self.semi_major_1 * (self.semi_minor_2 / self.semi_minor_1).sqrt()
    }

    /// Chain parameter of the link point.
    pub fn link_fraction(&self) -> f64 {
        self.span1 / (self.span1 + self.span2)
    }

    /// Point at chain parameter `u ∈ [0, 1]` for a first-ellipse center `c1`.
    pub fn point(&self, c1: (f64, f64), u: f64) -> (f64, f64) {
        let half_pi = std::f64::consts::FRAC_PI_2;
        let (cos_t, sin_t) = (self.theta.cos(), self.theta.sin());
        let u_link = self.link_fraction();
        let (a, b, center, s) = if u <= u_link {
            let frac = if u_link > 0.0 { u / u_link } else { 1.0 };
            let s = half_pi + self.direction * self.span1 * (1.0 - frac);
            (self.semi_major_1, self.semi_minor_1, c1, s)
        } else {
            let frac = (u - u_link) / (1.0 - u_link);
            let s = half_pi - self.direction * self.span2 * frac;
            let c2 = (
                c1.0 - (self.semi_minor_1 - self.semi_minor_2) * sin_t,
                c1.1 + (self.semi_minor_1 - self.semi_minor_2) * cos_t,
            );
            (self.semi_major_2(), self.semi_minor_2, c2, s)
        };
        let (ex, ey) = (a * s.cos(), b * s.sin());
        (
            center.0 + cos_t * ex - sin_t * ey,
            center.1 + sin_t * ex + cos_t * ey,
        )
    }

    /// First-ellipse center that makes the chain start at `start`.
    pub fn center_for_start(&self, start: (f64, f64)) -> (f64, f64) {
        let half_pi = std::f64::consts::FRAC_PI_2;
        let s = half_pi + self.direction * self.span1;
        let (cos_t, sin_t) = (self.theta.cos(), self.theta.sin());
        let (ex, ey) = (self.semi_major_1 * s.cos(), self.semi_minor_1 * s.sin());
        (
            start.0 - (cos_t * ex - sin_t * ey),
            start.1 - (sin_t * ex + cos_t * ey),
        )
    }

    /// Evenly spaced (in chain parameter) sample points.
    pub fn sample(&self, c1: (f64, f64), n: usize) -> Vec<(f64, f64)> {
        (0..n)
            .map(|i| self.point(c1, i as f64 / (n - 1) as f64))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec_example() -> ArcPairSpec {
        ArcPairSpec {
            semi_major_1: 2.0,
            semi_minor_1: 1.0,
            semi_minor_2: 4.0,
            theta: std::f64::consts::PI / 6.0,
            span1: 1.2,
            span2: 1.2,
            direction: 1.0,
        }
    }

    #[test]
    fn chain_is_continuous_at_link() {
        let spec = spec_example();
        let c1 = (0.0, 0.0);
        let u = spec.link_fraction();
        let before = spec.point(c1, u - 1e-9);
        let after = spec.point(c1, u + 1e-9);
        assert!((before.0 - after.0).abs() < 1e-6);
        assert!((before.1 - after.1).abs() < 1e-6);
    }

    #[test]
    fn recovers_synthesized_pair() {
        let spec = spec_example();
        let points = spec.sample((0.0, 0.0), 80);
        let hint = (spec.link_fraction() * 79.0).round() as usize;
        let fit = fit_arc_pair(&points, hint).unwrap();
        assert!(!fit.degenerate);

        let a2 = fit.semi_major_2();
        assert!(
            (a2 - 4.0).abs() / 4.0 < 0.02,
            "derived second semi-major {a2}"
        );
        assert!((fit.semi_major_1 - 2.0).abs() / 2.0 < 0.02, "{}", fit.semi_major_1);
        assert!((fit.semi_minor_1 - 1.0).abs() < 0.02, "{}", fit.semi_minor_1);
        assert!((fit.semi_minor_2 - 4.0).abs() / 4.0 < 0.02, "{}", fit.semi_minor_2);
        assert!(
            orientation_distance(fit.theta, std::f64::consts::PI / 6.0) < 0.02,
            "theta {}",
            fit.theta
        );
    }

    #[test]
    fn equal_minors_give_equal_majors() {
        let pair = EllipticArcPair {
            semi_major_1: 3.0,
            semi_minor_1: 1.5,
            semi_minor_2: 1.5,
            theta: 0.3,
            tangent_start: 0.0,
            tangent_end: 0.0,
            link_point: (0.0, 0.0),
            degenerate: false,
        };
        assert!((pair.semi_major_2() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn collinear_points_fall_back_to_line() {
        let dir = 0.7f64;
        let points: Vec<(f64, f64)> = (0..12)
            .map(|i| (i as f64 * dir.cos(), i as f64 * dir.sin()))
            .collect();
        let fit = fit_arc_pair(&points, 6).unwrap();
        assert!(fit.degenerate);
        assert!(orientation_distance(fit.theta, dir) < 1e-6, "{}", fit.theta);
        let chord = 0.5 * 11.0;
        assert!((fit.semi_major_1 - chord).abs() < 1e-9);
        assert!(fit.semi_minor_1 <= 1e-9 && fit.semi_minor_2 <= 1e-9);
    }

    #[test]
    fn too_few_points_rejected() {
        let points = vec![(0.0, 0.0); 5];
        assert!(matches!(
            fit_arc_pair(&points, 2),
            Err(Error::TraceTooShort { .. })
        ));
    }

    #[test]
    fn tangents_follow_trajectory_ends() {
        let spec = ArcPairSpec {
            semi_major_1: 2.0,
            semi_minor_1: 1.0,
            semi_minor_2: 1.0,
            theta: 0.0,
            span1: 1.0,
            span2: 1.0,
            direction: 1.0,
        };
        let points = spec.sample((0.0, 0.0), 60);
        let fit = fit_arc_pair(&points, 30).unwrap();
        // Finite-difference tangents of the sampled chain at its ends.
        let expect_start = (points[2].1 - points[0].1).atan2(points[2].0 - points[0].0);
        let d = (fit.tangent_start - expect_start).abs();
        assert!(d < 1e-9, "{} vs {}", fit.tangent_start, expect_start);
    }
}
