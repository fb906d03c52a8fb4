//! Fast evaluation of the two volume-law functionals that the
//! characteristic-time integrals need:
//!
//! * `g₁(y) = 1 − φ_V(−y) = E[1 − e^{−yV}]` (occupancy),
//! * `g₂(y) = E[V] − φ'_V(−y) = E[V(1 − e^{−yV})]` (hits).
//!
//! For continuous laws each evaluation is itself a quadrature, far too slow
//! inside an outer integral. We tabulate `ln g` on a uniform grid in
//! `s = ln y`, where both functions are smooth and close to linear, and
//! interpolate with cubic Hermite polynomials using the exact derivatives
//! `y·g'(y)/g(y)`. Relative accuracy is preserved all the way down to
//! `y → 0`, where `g₁ ≈ yE[V]`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::Result;
use crate::model::VolumeDistribution;

const TABLE_Y_MIN: f64 = 1e-18;
const TABLE_STEP: f64 = 0.03;
/// Empirical laws with at most this many samples are summed directly.
const DIRECT_EMPIRICAL_MAX: usize = 64;

#[derive(Debug)]
pub struct VolumeKernel {
    dist: VolumeDistribution,
    mean: f64,
    second_moment: Option<f64>,
    table: Option<LogTable>,
}

#[derive(Debug)]
struct LogTable {
    s0: f64,
    y_max: f64,
    lg1: Vec<f64>,
    dlg1: Vec<f64>,
    lg2: Vec<f64>,
    dlg2: Vec<f64>,
}

impl VolumeKernel {
    /// Kernel valid for arguments `y ∈ [0, y_max]`; beyond that it falls back
    /// to direct evaluation.
    pub fn new(dist: &VolumeDistribution, y_max: f64) -> Result<Self> {
        let mean = dist.mean()?;
        let second_moment = dist.second_moment().ok();
        let direct = match dist {
            VolumeDistribution::Deterministic { .. } => true,
            VolumeDistribution::Empirical { samples } => samples.len() <= DIRECT_EMPIRICAL_MAX,
            _ => false,
        };
        let table = if direct { None } else { Some(LogTable::build(dist, y_max.max(1.0))?) };
        Ok(VolumeKernel { dist: dist.clone(), mean, second_moment, table })
    }

    /// Shared kernels for `y ∈ [0, 1]`, built once per distinct law.
    pub fn shared(dist: &VolumeDistribution) -> Result<Arc<Self>> {
        static CACHE: OnceLock<Mutex<HashMap<String, Arc<VolumeKernel>>>> = OnceLock::new();
        let key = serde_json::to_string(dist)?;
        let cache = CACHE.get_or_init(Default::default);
        if let Some(k) = cache.lock().expect("kernel cache poisoned").get(&key) {
            return Ok(Arc::clone(k));
        }
        let kernel = Arc::new(VolumeKernel::new(dist, 1.0)?);
        cache.lock().expect("kernel cache poisoned").insert(key, Arc::clone(&kernel));
        Ok(kernel)
    }

    pub fn distribution(&self) -> &VolumeDistribution {
        &self.dist
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn second_moment(&self) -> Option<f64> {
        self.second_moment
    }

    /// `E[1 − e^{−yV}]` for `y ≥ 0`.
    #[inline]
    pub fn g1(&self, y: f64) -> f64 {
        if !(y > 0.0) {
            return 0.0;
        }
        match &self.table {
            Some(t) if y <= t.y_max => t.eval(y, &t.lg1, &t.dlg1),
            _ => self.direct(y, 0),
        }
    }

    /// `E[V(1 − e^{−yV})]` for `y ≥ 0`.
    #[inline]
    pub fn g2(&self, y: f64) -> f64 {
        if !(y > 0.0) {
            return 0.0;
        }
        match &self.table {
            Some(t) if y <= t.y_max => t.eval(y, &t.lg2, &t.dlg2),
            _ => self.direct(y, 1),
        }
    }

    fn direct(&self, y: f64, order: i32) -> f64 {
        let value = match &self.dist {
            VolumeDistribution::Deterministic { value } => Ok(value.powi(order) * -(-y * value).exp_m1()),
            d if order == 0 => d.mgf_complement(-y),
            d => d.mgf_derivative_complement(-y),
        };
        value.unwrap_or(f64::NAN)
    }
}

impl LogTable {
    fn build(dist: &VolumeDistribution, y_max: f64) -> Result<Self> {
        let s0 = TABLE_Y_MIN.ln();
        let n = ((y_max.ln() - s0) / TABLE_STEP).ceil() as usize + 1;
        let mut t = LogTable {
            s0,
            y_max: (s0 + (n - 1) as f64 * TABLE_STEP).exp(),
            lg1: Vec::with_capacity(n),
            dlg1: Vec::with_capacity(n),
            lg2: Vec::with_capacity(n),
            dlg2: Vec::with_capacity(n),
        };
        for i in 0..n {
            let y = (s0 + i as f64 * TABLE_STEP).exp();
            let g1 = dist.mgf_complement(-y)?;
            let g2 = dist.mgf_derivative_complement(-y)?;
            let d1 = dist.mgf_derivative(-y)?;
            let d2 = dist.mgf_second_derivative(-y)?;
            t.lg1.push(g1.ln());
            t.dlg1.push(y * d1 / g1);
            t.lg2.push(g2.ln());
            t.dlg2.push(y * d2 / g2);
        }
        Ok(t)
    }

    #[inline]
    fn eval(&self, y: f64, lg: &[f64], dlg: &[f64]) -> f64 {
        let s = y.ln();
        let pos = (s - self.s0) / TABLE_STEP;
        if pos <= 0.0 {
            // Below the grid ln g is linear in s to within rounding.
            return (lg[0] + dlg[0] * (s - self.s0)).exp();
        }
        let i = (pos as usize).min(lg.len() - 2);
        let t = pos - i as f64;
        let h = TABLE_STEP;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        (h00 * lg[i] + h10 * h * dlg[i] + h01 * lg[i + 1] + h11 * h * dlg[i + 1]).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_matches_direct_quadrature() {
        for d in [
            VolumeDistribution::pareto_with_mean(2.1, 3.0).unwrap(),
            VolumeDistribution::pareto_with_mean(3.0, 3.0).unwrap(),
            VolumeDistribution::pareto_with_mean(1.5, 3.0).unwrap(),
            VolumeDistribution::truncated_pareto_with_mean(2.5, 10.0, 1.61).unwrap(),
            VolumeDistribution::empirical((1..500).map(|i| 1.0 + (i as f64).sqrt()).collect()).unwrap(),
        ] {
            let k = VolumeKernel::new(&d, 1.0).unwrap();
            for i in 0..200 {
                let y = 10f64.powf(-17.0 + 17.0 * i as f64 / 199.0) * 0.999_7;
                let e1 = d.mgf_complement(-y).unwrap();
                let e2 = d.mgf_derivative_complement(-y).unwrap();
                assert!((k.g1(y) / e1 - 1.0).abs() < 1e-8, "{d:?} y={y} {} {e1}", k.g1(y));
                assert!((k.g2(y) / e2 - 1.0).abs() < 1e-7, "{d:?} y={y} {} {e2}", k.g2(y));
            }
            // Below the grid the extrapolation only needs to be roughly right.
            let y = 1e-22;
            assert!((k.g2(y) / d.mgf_derivative_complement(-y).unwrap() - 1.0).abs() < 1e-2);
        }
    }

    #[test]
    fn deterministic_is_exact() {
        let k = VolumeKernel::new(&VolumeDistribution::Deterministic { value: 1.0 }, 1.0).unwrap();
        assert_eq!(k.g1(1.0), 1.0 - (-1.0f64).exp());
        assert_eq!(k.g1(0.0), 0.0);
    }
}
