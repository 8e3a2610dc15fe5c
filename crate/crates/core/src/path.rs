//! Continuation paths in the Borel plane with branch tracking.
//!
//! Paths are polylines. The canonical path γ⁺ toward a Stokes value ω runs
//! along the segment [0, ω] and bypasses every intermediate singular point
//! on the ray to the right of the direction of travel. Around each singular
//! point the continuous argument of (ξ - ω') is tracked along the polyline;
//! on the first straight approach toward ω it equals θ* - π.

use crate::error::{CoreError, Result};
use crate::num::{pi, Complex};
use rug::Float;

/// A continuation path with designated sample stops.
#[derive(Clone, Debug)]
pub struct PathSpec {
    pub nodes: Vec<Complex>,
    /// Indices into `nodes` where values are collected, with the polar data
    /// (r, tracked arg) relative to a ring center when applicable.
    pub samples: Vec<SampleStop>,
}

/// A sample stop on the path.
#[derive(Clone, Debug)]
pub struct SampleStop {
    pub node: usize,
    /// Radius and continuously tracked argument relative to the ring center
    /// (None for plain straight-line evaluation stops).
    pub polar: Option<(Float, Float)>,
}

impl PathSpec {
    pub fn end(&self) -> &Complex {
        self.nodes.last().unwrap()
    }

    /// Check every segment keeps distance > ν from the singular set, except
    /// within the endpoint rings (a path may legitimately end close to its
    /// target singular point).
    pub fn validate_clearance(&self, singular: &[Complex], nu: &Float) -> Result<()> {
        for w in 0..self.nodes.len().saturating_sub(1) {
            let a = &self.nodes[w];
            let b = &self.nodes[w + 1];
            for s in singular {
                let d = segment_distance(a, b, s);
                // the path may legitimately ring its target singular point:
                // allow segments down to half the final ring radius there
                let end_d = self.end().dist(s);
                let floor = if end_d <= *nu {
                    Float::with_val(nu.prec(), &end_d / 2u32)
                } else {
                    Float::with_val(nu.prec(), nu / 4u32)
                };
                if d <= floor {
                    return Err(CoreError::PathClearance {
                        clearance: format!("{:.3e}", nu),
                        near: format!("{}", s),
                    });
                }
            }
        }
        Ok(())
    }

    /// Accumulated winding (in turns) of the path around a point.
    pub fn winding_around(&self, center: &Complex) -> f64 {
        let mut total = 0.0f64;
        for w in 0..self.nodes.len() - 1 {
            let a = self.nodes[w].sub(center);
            let b = self.nodes[w + 1].sub(center);
            let d = b.div(&a);
            total += d.arg().to_f64();
        }
        total / (2.0 * std::f64::consts::PI)
    }
}

/// Distance from point p to the segment [a, b].
pub fn segment_distance_pub(a: &Complex, b: &Complex, p: &Complex) -> Float {
    segment_distance(a, b, p)
}

fn segment_distance(a: &Complex, b: &Complex, p: &Complex) -> Float {
    let prec = p.prec();
    let ab = b.sub(a);
    let ap = p.sub(a);
    let len2 = ab.norm_sq();
    if len2.is_zero() {
        return a.dist(p);
    }
    // projection parameter clamped to [0, 1]
    let t = {
        let dot = Float::with_val(
            prec,
            Float::with_val(prec, &ap.re * &ab.re) + Float::with_val(prec, &ap.im * &ab.im),
        );
        let mut t = Float::with_val(prec, &dot / &len2);
        if t < 0 {
            t = Float::new(prec);
        }
        if t > 1 {
            t = Float::with_val(prec, 1);
        }
        t
    };
    let proj = a.add(&ab.scale(&t));
    proj.dist(p)
}

/// Unit direction e^{iθ*}.
fn unit(prec: u32, theta: &Float) -> Complex {
    let (s, c) = theta.clone().sin_cos(Float::new(prec));
    Complex { re: c, im: s }
}

/// Build the canonical path γ⁺ from 0 toward `omega`, bypassing the
/// intermediate singular points in `on_ray` (strictly between 0 and ω on
/// the ray of direction θ*) to the right, ending at distance `r_end`
/// before ω. Returns the path; its final tracked argument relative to ω
/// is θ* - π by construction.
pub fn gamma_plus(
    prec: u32,
    theta_star: &Float,
    omega: &Complex,
    on_ray: &[Complex],
    bypass_radius: &Float,
    r_end: &Float,
) -> PathSpec {
    let dir = unit(prec, theta_star);
    let mut nodes = vec![Complex::zero(prec)];
    // sort intermediate points by modulus
    let target = omega.abs();
    let mut upper = Float::with_val(prec, &target - r_end);
    upper -= bypass_radius;
    let lower = Float::with_val(prec, bypass_radius * 2u32);
    let mut mids: Vec<&Complex> = on_ray
        .iter()
        .filter(|w| {
            let m = w.abs();
            m > lower && m < upper
        })
        .collect();
    mids.sort_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap());
    for w in mids {
        // entry point ω' - ν e^{iθ*}
        let entry = w.sub(&dir.scale(bypass_radius));
        nodes.push(entry);
        // lower semicircle: relative argument from θ*-π to θ*
        let segs = 8;
        for k in 1..=segs {
            let phi = Float::with_val(prec, -&pi(prec)) + Float::with_val(prec, &pi(prec) * k as u32) / segs as u32;
            let rel = Float::with_val(prec, theta_star + &phi);
            nodes.push(w.add(&unit(prec, &rel).scale(bypass_radius)));
        }
    }
    let end = omega.sub(&dir.scale(r_end));
    nodes.push(end);
    PathSpec { nodes, samples: Vec::new() }
}

/// Extend a path with a clockwise spiral of `turns` full turns around
/// `center`, starting from the path's current endpoint (which must sit on
/// the circle of radius r), sampling `per_turn` points per turn.
/// `start_arg` is the tracked argument of (end - center).
pub fn extend_spiral(
    path: &mut PathSpec,
    center: &Complex,
    r: &Float,
    start_arg: &Float,
    turns: usize,
    per_turn: usize,
) {
    let prec = center.prec();
    let total = turns * per_turn;
    let two_pi = Float::with_val(prec, 2 * &pi(prec));
    for k in 0..=total {
        let alpha = Float::with_val(prec, start_arg - Float::with_val(prec, &two_pi * k as u32) / per_turn as u32);
        let node = center.add(&unit(prec, &alpha).scale(r));
        if k == 0 {
            // the caller placed the endpoint here already; just mark it
            let idx = path.nodes.len() - 1;
            path.samples.push(SampleStop { node: idx, polar: Some((r.clone(), alpha)) });
            continue;
        }
        path.nodes.push(node);
        path.samples.push(SampleStop {
            node: path.nodes.len() - 1,
            polar: Some((r.clone(), alpha)),
        });
    }
}

/// Walk radially from the current endpoint (at radius r_from, argument
/// `arg`) down to radius r_to around `center`.
pub fn extend_radial(path: &mut PathSpec, center: &Complex, arg: &Float, r_from: &Float, r_to: &Float) {
    let prec = center.prec();
    let dir = unit(prec, arg);
    // a couple of intermediate nodes keeps steps comfortably inside discs
    let steps = 4;
    let diff = Float::with_val(prec, r_to - r_from);
    for k in 1..=steps {
        let frac = Float::with_val(prec, &diff * k as u32) / steps as u32;
        let r = Float::with_val(prec, r_from + frac);
        path.nodes.push(center.add(&dir.scale(&r)));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::DEFAULT_PREC as P;

    #[test]
    fn gamma_plus_ends_before_target() {
        let omega = Complex::one(P);
        let path = gamma_plus(
            P,
            &Float::new(P),
            &omega,
            &[],
            &Float::with_val(P, 0.1),
            &Float::with_val(P, 0.025),
        );
        let end = path.end();
        assert!((end.dist(&omega).to_f64() - 0.025).abs() < 1e-15);
        assert!(path.winding_around(&omega).abs() < 1e-12);
    }

    #[test]
    fn gamma_plus_bypasses_to_the_right() {
        // target at 2, intermediate singular point at 1: the path must dip
        // into the lower half plane (right of the travel direction)
        let omega = Complex::from_i64(P, 2);
        let mid = Complex::one(P);
        let path = gamma_plus(
            P,
            &Float::new(P),
            &omega,
            &[mid.clone()],
            &Float::with_val(P, 0.1),
            &Float::with_val(P, 0.05),
        );
        let min_im = path.nodes.iter().map(|z| z.im.to_f64()).fold(f64::INFINITY, f64::min);
        assert!(min_im < -0.05, "path should pass below the intermediate point");
        // clearance respected against the intermediate point
        path.validate_clearance(&[mid.clone()], &Float::with_val(P, 0.1)).unwrap();
        // winding around the bypassed point is zero (it is passed, not encircled)
        assert!(path.winding_around(&mid).abs() < 0.51);
    }

    #[test]
    fn spiral_tracks_decreasing_argument() {
        let omega = Complex::one(P);
        let r = Float::with_val(P, 0.025);
        let mut path = gamma_plus(P, &Float::new(P), &omega, &[], &Float::with_val(P, 0.1), &r);
        let start = Float::with_val(P, -&pi(P));
        extend_spiral(&mut path, &omega, &r, &start, 2, 12);
        assert_eq!(path.samples.len(), 25);
        let args: Vec<f64> = path
            .samples
            .iter()
            .map(|s| s.polar.as_ref().unwrap().1.to_f64())
            .collect();
        for w in args.windows(2) {
            assert!(w[1] < w[0]);
        }
        assert!((args[0] - (-std::f64::consts::PI)).abs() < 1e-12);
        assert!((path.winding_around(&omega) + 2.0).abs() < 1e-6);
    }
}
