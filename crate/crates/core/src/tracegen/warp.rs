//! Virtual-time modulation of traces.
//!
//! A warp `w` is a continuous, strictly increasing, piecewise-linear map from
//! real time to virtual time. Applying it to a trace relabels every timestamp
//! and leaves the request order untouched, which models a diurnal modulation
//! of all request rates by `w'(t)`.
//!
//! The asymptotic normalization `w(t)/t → 1` cannot be checked on a finite
//! knot list. We require instead that the average slope across the knots is
//! one, `(w_last − w_first)/(t_last − t_first) = 1`, and that `w(0) = 0`.
//! Outside the knots the warp continues with the slope of the end segments.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::trace::RequestTrace;
use crate::error::{Result, SnmError};

const SLOPE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct VirtualTimeWarp {
    knots: Vec<(f64, f64)>,
}

impl TryFrom<Vec<(f64, f64)>> for VirtualTimeWarp {
    type Error = SnmError;

    fn try_from(knots: Vec<(f64, f64)>) -> Result<Self> {
        VirtualTimeWarp::new(knots)
    }
}

impl From<VirtualTimeWarp> for Vec<(f64, f64)> {
    fn from(w: VirtualTimeWarp) -> Self {
        w.knots
    }
}

impl VirtualTimeWarp {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(SnmError::invalid("a warp needs at least two knots"));
        }
        if knots.iter().any(|(t, w)| !(t.is_finite() && w.is_finite())) {
            return Err(SnmError::invalid("warp knots must be finite"));
        }
        for pair in knots.windows(2) {
            if !(pair[1].0 > pair[0].0 && pair[1].1 > pair[0].1) {
                return Err(SnmError::invalid(format!(
                    "warp knots must be strictly increasing, got {:?} then {:?}",
                    pair[0], pair[1]
                )));
            }
        }
        let (t0, w0) = knots[0];
        let (t1, w1) = knots[knots.len() - 1];
        let avg = (w1 - w0) / (t1 - t0);
        if (avg - 1.0).abs() > SLOPE_TOL {
            return Err(SnmError::invalid(format!("warp average slope must be 1, got {avg}")));
        }
        let warp = VirtualTimeWarp { knots };
        let at_zero = warp.eval(0.0);
        if at_zero.abs() > SLOPE_TOL * (t1 - t0).max(1.0) {
            return Err(SnmError::invalid(format!("warp must fix the origin, w(0) = {at_zero}")));
        }
        Ok(warp)
    }

    pub fn identity() -> Self {
        VirtualTimeWarp { knots: vec![(0.0, 0.0), (1.0, 1.0)] }
    }

    /// Piecewise-linear interpolation of `w(t) = t + a·P/(2π)·(1 − cos(2πt/P))`,
    /// i.e. rates modulated by `1 + a·sin(2πt/P)`, over whole periods covering
    /// `[from, to]`.
    pub fn sinusoidal(amplitude: f64, period: f64, from: f64, to: f64, knots_per_period: usize) -> Result<Self> {
        if !(0.0..1.0).contains(&amplitude) || !(period > 0.0) || !(to > from) || knots_per_period < 2 {
            return Err(SnmError::invalid("sinusoidal warp needs 0 ≤ a < 1, P > 0, from < to, ≥ 2 knots per period"));
        }
        let first = (from / period).floor() as i64;
        let last = (to / period).ceil() as i64;
        let w = |t: f64| t + amplitude * period / (2.0 * PI) * (1.0 - (2.0 * PI * t / period).cos());
        let mut knots = Vec::new();
        for p in first..last {
            for j in 0..knots_per_period {
                let t = (p as f64 + j as f64 / knots_per_period as f64) * period;
                knots.push((t, w(t)));
            }
        }
        let t_end = last as f64 * period;
        knots.push((t_end, t_end));
        // Whole periods make the end values exact, so the average slope is 1.
        let (t0, _) = knots[0];
        knots[0].1 = t0;
        VirtualTimeWarp::new(knots)
    }

    /// A random warp over `[from, to]` with `segments` pieces whose slopes lie
    /// in `[min_slope, max_slope]` before normalization.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, from: f64, to: f64, segments: usize, min_slope: f64, max_slope: f64) -> Result<Self> {
        if !(to > from && from <= 0.0 && to >= 0.0) || segments == 0 || !(min_slope > 0.0 && max_slope >= min_slope) {
            return Err(SnmError::invalid("random warp needs from ≤ 0 ≤ to, segments ≥ 1 and positive slopes"));
        }
        let mut cuts: Vec<f64> = (1..segments).map(|_| rng.random_range(from..to)).collect();
        cuts.push(from);
        cuts.push(to);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let slopes: Vec<f64> = (1..cuts.len()).map(|_| rng.random_range(min_slope..=max_slope)).collect();
        let mut ws = vec![0.0];
        for (i, s) in slopes.iter().enumerate() {
            ws.push(ws[i] + s * (cuts[i + 1] - cuts[i]));
        }
        // Rescale so the average slope is 1, then shift so w(0) = 0.
        let factor = (to - from) / ws[ws.len() - 1];
        let mut knots: Vec<(f64, f64)> = cuts.iter().zip(&ws).map(|(&t, &w)| (t, from + w * factor)).collect();
        let shift = VirtualTimeWarp { knots: knots.clone() }.eval(0.0);
        for k in &mut knots {
            k.1 -= shift;
        }
        let n = knots.len();
        knots[n - 1].1 = knots[0].1 + (knots[n - 1].0 - knots[0].0);
        VirtualTimeWarp::new(knots)
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn eval(&self, t: f64) -> f64 {
        let k = &self.knots;
        let i = match k.partition_point(|&(tk, _)| tk <= t) {
            0 => 0,
            p if p >= k.len() => k.len() - 2,
            p => p - 1,
        };
        let (t0, w0) = k[i];
        let (t1, w1) = k[i + 1];
        w0 + (w1 - w0) / (t1 - t0) * (t - t0)
    }

    /// Relabels every timestamp through the warp; ids, ingress and flags are
    /// untouched, so the request order is preserved.
    pub fn apply(&self, trace: &RequestTrace) -> RequestTrace {
        let requests = trace.iter().map(|r| crate::tracegen::Request { time: self.eval(r.time), ..*r }).collect();
        RequestTrace::new(requests, trace.metadata.clone()).expect("an increasing warp preserves order")
    }
}

/// Free-function form of [`VirtualTimeWarp::apply`].
pub fn warp(trace: &RequestTrace, w: &VirtualTimeWarp) -> RequestTrace {
    w.apply(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_bad_knots() {
        assert!(VirtualTimeWarp::new(vec![(0.0, 0.0)]).is_err());
        assert!(VirtualTimeWarp::new(vec![(0.0, 0.0), (1.0, 1.0), (1.0, 2.0)]).is_err());
        assert!(VirtualTimeWarp::new(vec![(0.0, 0.0), (1.0, 1.5), (2.0, 1.4)]).is_err());
        assert!(VirtualTimeWarp::new(vec![(0.0, 0.0), (1.0, 3.0)]).is_err());
        assert!(VirtualTimeWarp::new(vec![(0.0, 0.5), (1.0, 1.5)]).is_err());
        assert!(VirtualTimeWarp::new(vec![(-1.0, -0.5), (0.0, 0.0), (1.0, 0.5)]).is_err());
        assert!(VirtualTimeWarp::new(vec![(-1.0, -1.5), (0.0, 0.0), (1.0, 0.5)]).is_ok());
    }

    #[test]
    fn evaluation_and_extension() {
        let w = VirtualTimeWarp::new(vec![(-1.0, -1.5), (0.0, 0.0), (1.0, 0.5)]).unwrap();
        assert_eq!(w.eval(-1.0), -1.5);
        assert_eq!(w.eval(0.5), 0.25);
        assert_eq!(w.eval(3.0), 1.5);
        assert_eq!(w.eval(-2.0), -3.0);
        assert_eq!(VirtualTimeWarp::identity().eval(17.25), 17.25);
    }

    #[test]
    fn sinusoid_and_random_are_valid() {
        let s = VirtualTimeWarp::sinusoidal(0.8, 1.0, -3.2, 30.0, 24).unwrap();
        assert!(s.eval(0.0).abs() < 1e-12);
        // rate 1 + 0.8 sin peaks a quarter period in
        let d = (s.eval(0.26) - s.eval(0.24)) / 0.02;
        assert!((d - 1.8).abs() < 0.05, "{d}");
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let w = VirtualTimeWarp::random(&mut rng, -5.0, 20.0, 12, 0.1, 5.0).unwrap();
            assert!(w.eval(0.0).abs() < 1e-9);
        }
    }
}
