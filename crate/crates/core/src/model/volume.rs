//! Laws of the per-content request volume `V` (expected number of requests a
//! content attracts over its lifetime).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SnmError};
use crate::quadrature::{geometric_breakpoints, Quadrature};

const MGF_REL_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VolumeDistribution {
    /// Density `β v_min^β / v^{1+β}` on `[v_min, ∞)`.
    Pareto { beta: f64, v_min: f64 },
    /// Pareto density restricted to `[v_min, v_max]` and renormalized.
    TruncatedPareto { beta: f64, v_min: f64, v_max: f64 },
    Deterministic { value: f64 },
    /// Raw observed volumes; every statistic is a sample average.
    Empirical { samples: Vec<f64> },
}

impl VolumeDistribution {
    pub fn pareto(beta: f64, v_min: f64) -> Result<Self> {
        Self::Pareto { beta, v_min }.validated()
    }

    /// Pareto law with `v_min = mean·(β−1)/β`.
    pub fn pareto_with_mean(beta: f64, mean: f64) -> Result<Self> {
        if !(beta > 1.0) {
            return Err(SnmError::InfiniteMoment { moment: "mean" });
        }
        Self::pareto(beta, mean * (beta - 1.0) / beta)
    }

    pub fn truncated_pareto(beta: f64, v_min: f64, v_max: f64) -> Result<Self> {
        Self::TruncatedPareto { beta, v_min, v_max }.validated()
    }

    /// Truncated Pareto on `[v_min, v_max]` whose `v_min` is solved so the
    /// mean equals `mean`.
    pub fn truncated_pareto_with_mean(beta: f64, v_max: f64, mean: f64) -> Result<Self> {
        if !(mean > 0.0 && mean < v_max) {
            return Err(SnmError::invalid(format!("mean {mean} must lie in (0, v_max = {v_max})")));
        }
        // The truncated mean is increasing in v_min, from 0 up to v_max.
        let mean_at = |v_min: f64| truncated_mean(beta, v_min, v_max);
        let (mut lo, mut hi) = (0.0f64, v_max);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if mean_at(mid) < mean {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Self::truncated_pareto(beta, 0.5 * (lo + hi), v_max)
    }

    pub fn deterministic(value: f64) -> Result<Self> {
        Self::Deterministic { value }.validated()
    }

    pub fn empirical(samples: Vec<f64>) -> Result<Self> {
        Self::Empirical { samples }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        let positive = |x: f64| x > 0.0 && x.is_finite();
        match &self {
            Self::Pareto { beta, v_min } => {
                if !(positive(*beta) && positive(*v_min)) {
                    return Err(SnmError::invalid(format!("pareto needs β > 0 and v_min > 0, got β={beta}, v_min={v_min}")));
                }
            }
            Self::TruncatedPareto { beta, v_min, v_max } => {
                if !(positive(*beta) && positive(*v_min) && *v_max > *v_min) {
                    return Err(SnmError::invalid(format!(
                        "truncated pareto needs β > 0 and 0 < v_min < v_max, got β={beta}, [{v_min}, {v_max}]"
                    )));
                }
            }
            Self::Deterministic { value } => {
                if !positive(*value) {
                    return Err(SnmError::invalid(format!("deterministic volume must be positive, got {value}")));
                }
            }
            Self::Empirical { samples } => {
                if samples.is_empty() || !samples.iter().all(|&v| positive(v)) {
                    return Err(SnmError::invalid("empirical volumes must be a non-empty list of positive values"));
                }
            }
        }
        Ok(self)
    }

    pub fn mean(&self) -> Result<f64> {
        match self {
            Self::Pareto { beta, v_min } => {
                if *beta <= 1.0 {
                    return Err(SnmError::InfiniteMoment { moment: "mean" });
                }
                Ok(beta * v_min / (beta - 1.0))
            }
            Self::TruncatedPareto { beta, v_min, v_max } => Ok(truncated_mean(*beta, *v_min, *v_max)),
            Self::Deterministic { value } => Ok(*value),
            Self::Empirical { samples } => Ok(samples.iter().sum::<f64>() / samples.len() as f64),
        }
    }

    pub fn second_moment(&self) -> Result<f64> {
        match self {
            Self::Pareto { beta, v_min } => {
                if *beta <= 2.0 {
                    return Err(SnmError::InfiniteMoment { moment: "second moment" });
                }
                Ok(beta * v_min * v_min / (beta - 2.0))
            }
            Self::TruncatedPareto { beta, v_min, v_max } => {
                let r = v_min / v_max;
                Ok(beta * v_min * v_min * power_ratio(r, beta - 2.0) / (1.0 - r.powf(*beta)))
            }
            Self::Deterministic { value } => Ok(value * value),
            Self::Empirical { samples } => Ok(samples.iter().map(|v| v * v).sum::<f64>() / samples.len() as f64),
        }
    }

    /// `φ_V(x) = E[e^{xV}]`.
    pub fn mgf(&self, x: f64) -> Result<f64> {
        self.weighted_exp_moment(0, x, false)
    }

    /// `φ'_V(x) = E[V e^{xV}]`.
    pub fn mgf_derivative(&self, x: f64) -> Result<f64> {
        self.weighted_exp_moment(1, x, false)
    }

    /// `φ''_V(x) = E[V² e^{xV}]`.
    pub fn mgf_second_derivative(&self, x: f64) -> Result<f64> {
        self.weighted_exp_moment(2, x, false)
    }

    /// `1 − φ_V(x) = E[1 − e^{xV}]`, accurate to full relative precision as
    /// `x → 0⁻`.
    pub fn mgf_complement(&self, x: f64) -> Result<f64> {
        self.weighted_exp_moment(0, x, true)
    }

    /// `E[V] − φ'_V(x) = E[V(1 − e^{xV})]`, accurate as `x → 0⁻`.
    pub fn mgf_derivative_complement(&self, x: f64) -> Result<f64> {
        self.weighted_exp_moment(1, x, true)
    }

    /// `E[V^order · e^{xV}]`, or `E[V^order · (1 − e^{xV})]` when `complement`.
    fn weighted_exp_moment(&self, order: i32, x: f64, complement: bool) -> Result<f64> {
        if x.is_nan() {
            return Err(SnmError::invalid("mgf argument is NaN"));
        }
        let kernel = |y: f64| if complement { -y.exp_m1() } else { y.exp() };
        let at_zero = || -> Result<f64> {
            if complement {
                return Ok(0.0);
            }
            match order {
                0 => Ok(1.0),
                1 => self.mean(),
                _ => self.second_moment(),
            }
        };
        match self {
            Self::Deterministic { value } => Ok(value.powi(order) * kernel(x * value)),
            Self::Empirical { samples } => {
                Ok(samples.iter().map(|v| v.powi(order) * kernel(x * v)).sum::<f64>() / samples.len() as f64)
            }
            Self::Pareto { beta, v_min } => {
                if x > 0.0 {
                    return Err(SnmError::invalid("the mgf of an untruncated pareto law diverges for x > 0"));
                }
                if x == 0.0 {
                    return at_zero();
                }
                if complement && order as f64 >= *beta {
                    return Err(SnmError::InfiniteMoment { moment: "mean" });
                }
                pareto_exp_moment(*beta, *v_min, 0.0, order, x, complement)
            }
            Self::TruncatedPareto { beta, v_min, v_max } => {
                if x == 0.0 {
                    return at_zero();
                }
                pareto_exp_moment(*beta, *v_min, v_min / v_max, order, x, complement)
            }
        }
    }

    /// Quantile function `F⁻¹(u)` for `u ∈ [0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match self {
            Self::Pareto { beta, v_min } => v_min * (-(-u).ln_1p() / beta).exp(),
            Self::TruncatedPareto { beta, v_min, v_max } => {
                let z = 1.0 - (v_min / v_max).powf(*beta);
                (v_min * (-(-u * z).ln_1p() / beta).exp()).min(*v_max)
            }
            Self::Deterministic { value } => *value,
            Self::Empirical { samples } => {
                let mut sorted = samples.clone();
                sorted.sort_by(f64::total_cmp);
                let idx = ((u * sorted.len() as f64) as usize).min(sorted.len() - 1);
                sorted[idx]
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Empirical { samples } => samples[rng.random_range(0..samples.len())],
            Self::Deterministic { value } => *value,
            _ => self.quantile(rng.random::<f64>()),
        }
    }

    /// The law of `scale·V`.
    pub fn scaled(&self, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(SnmError::invalid(format!("volume scale must be positive, got {scale}")));
        }
        Ok(match self {
            Self::Pareto { beta, v_min } => Self::Pareto { beta: *beta, v_min: v_min * scale },
            Self::TruncatedPareto { beta, v_min, v_max } => {
                Self::TruncatedPareto { beta: *beta, v_min: v_min * scale, v_max: v_max * scale }
            }
            Self::Deterministic { value } => Self::Deterministic { value: value * scale },
            Self::Empirical { samples } => Self::Empirical { samples: samples.iter().map(|v| v * scale).collect() },
        })
    }
}

/// `(1 − r^a)/a`, continuous through `a = 0` where it equals `−ln r`.
fn power_ratio(r: f64, a: f64) -> f64 {
    if a.abs() < 1e-12 {
        -r.ln()
    } else {
        -(a * r.ln()).exp_m1() / a
    }
}

fn truncated_mean(beta: f64, v_min: f64, v_max: f64) -> f64 {
    let r = v_min / v_max;
    beta * v_min * power_ratio(r, beta - 1.0) / (1.0 - r.powf(beta))
}

/// `E[V^order e^{xV}]` (or with `1 − e^{xV}` when `complement`) for a
/// (possibly truncated) Pareto law, integrated over `u = v_min/v ∈ [u_lo, 1]`
/// where the density becomes `β u^{β−1}`.
fn pareto_exp_moment(beta: f64, v_min: f64, u_lo: f64, order: i32, x: f64, complement: bool) -> Result<f64> {
    let norm = 1.0 - u_lo.powf(beta);
    let c = x * v_min;
    let scale = beta * v_min.powi(order);
    let integrand = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        let k = if complement { -(c / u).exp_m1() } else { (c / u).exp() };
        scale * u.powf(beta - 1.0 - order as f64) * k
    };
    // The integrand peaks near u ≈ |x|·v_min; geometric panels resolve it.
    let peak = c.abs().clamp(1e-12, 1.0);
    let mut bps = geometric_breakpoints(0.5, u_lo, 1.0);
    bps.extend(geometric_breakpoints(peak, u_lo, 1.0));
    let q = Quadrature { rel_tol: MGF_REL_TOL, abs_tol: 1e-300, max_panels: 20_000 };
    let r = q.integrate(integrand, u_lo, 1.0, &bps)?;
    Ok(r.value / norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop, prop_assert, prop_oneof, proptest, ProptestConfig, Strategy};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn moment_examples() {
        let p = VolumeDistribution::pareto(3.0, 2.0).unwrap();
        assert_eq!(p.mean().unwrap(), 3.0);
        let d = VolumeDistribution::deterministic(5.0).unwrap();
        assert_eq!(d.second_moment().unwrap(), 25.0);
        let p = VolumeDistribution::pareto_with_mean(2.5, 3.0).unwrap();
        assert!(matches!(p, VolumeDistribution::Pareto { v_min, .. } if (v_min - 1.8).abs() < 1e-12));
        assert!(rel(p.mean().unwrap(), 3.0) < 1e-12);
    }

    #[test]
    fn infinite_moments_are_reported() {
        let p = VolumeDistribution::pareto(1.0, 2.0).unwrap();
        assert!(matches!(p.mean(), Err(SnmError::InfiniteMoment { .. })));
        let p = VolumeDistribution::pareto(2.0, 2.0).unwrap();
        assert!(p.mean().is_ok());
        assert!(matches!(p.second_moment(), Err(SnmError::InfiniteMoment { .. })));
    }

    #[test]
    fn mgf_examples() {
        let d = VolumeDistribution::deterministic(1.0).unwrap();
        assert!((d.mgf(-1.0).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        for dist in [
            d,
            VolumeDistribution::pareto(3.0, 2.0).unwrap(),
            VolumeDistribution::truncated_pareto(2.5, 1.0, 10.0).unwrap(),
            VolumeDistribution::empirical(vec![1.0, 4.0, 9.0]).unwrap(),
        ] {
            assert_eq!(dist.mgf(0.0).unwrap(), 1.0);
        }
        assert!(VolumeDistribution::pareto(3.0, 2.0).unwrap().mgf(0.1).is_err());
        assert!(VolumeDistribution::truncated_pareto(3.0, 2.0, 5.0).unwrap().mgf(0.1).is_ok());
    }

    #[test]
    fn pareto_mgf_matches_monte_carlo() {
        // Oracle: plain Monte-Carlo average of e^{xV} over 10^7 inverse-CDF draws.
        let dist = VolumeDistribution::pareto(3.0, 2.0).unwrap();
        let x = -0.5;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 10_000_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let v = 2.0 * rng.random::<f64>().powf(-1.0 / 3.0);
            let y = (x * v).exp();
            s += y;
            s2 += y * y;
        }
        let mean = s / n as f64;
        let se = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
        let quad = dist.mgf(x).unwrap();
        assert!((quad - mean).abs() < 3.0 * se, "quad {quad} mc {mean} se {se}");
    }

    #[test]
    fn truncated_mean_solver_hits_target() {
        let d = VolumeDistribution::truncated_pareto_with_mean(2.5, 10.0, 1.61).unwrap();
        assert!(rel(d.mean().unwrap(), 1.61) < 1e-12);
        let VolumeDistribution::TruncatedPareto { v_min, .. } = d else { panic!() };
        assert!(v_min > 0.9 && v_min < 1.1, "{v_min}");
    }

    #[test]
    fn truncated_moments_match_quadrature() {
        for (beta, lo, hi) in [(2.5, 1.0, 10.0), (1.0, 1.0, 50.0), (2.0, 0.5, 20.0), (0.7, 3.0, 30.0)] {
            let d = VolumeDistribution::truncated_pareto(beta, lo, hi).unwrap();
            let z = 1.0 - (lo / hi).powf(beta);
            let q = Quadrature::new(1e-13);
            let m1 = q.integrate(|v| v * beta * lo.powf(beta) / v.powf(beta + 1.0) / z, lo, hi, &[]).unwrap().value;
            let m2 = q.integrate(|v| v * v * beta * lo.powf(beta) / v.powf(beta + 1.0) / z, lo, hi, &[]).unwrap().value;
            assert!(rel(d.mean().unwrap(), m1) < 1e-10, "β={beta}");
            assert!(rel(d.second_moment().unwrap(), m2) < 1e-10, "β={beta}");
            assert!(rel(d.mgf_derivative(-1e-300).unwrap(), m1) < 1e-8);
        }
    }

    #[test]
    fn far_truncation_agrees_with_untruncated() {
        let p = VolumeDistribution::pareto(2.5, 1.8).unwrap();
        let t = VolumeDistribution::truncated_pareto(2.5, 1.8, 1e12).unwrap();
        assert!(rel(t.mean().unwrap(), p.mean().unwrap()) < 1e-6);
        for x in [-1.0, -0.3, -1e-3] {
            assert!(rel(t.mgf(x).unwrap(), p.mgf(x).unwrap()) < 1e-6);
            assert!(rel(t.mgf_derivative(x).unwrap(), p.mgf_derivative(x).unwrap()) < 1e-6);
        }
    }

    #[test]
    fn sampling_matches_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = VolumeDistribution::truncated_pareto_with_mean(2.5, 10.0, 1.61).unwrap();
        let n = 200_000;
        let m: f64 = (0..n).map(|_| d.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!(rel(m, 1.61) < 0.01, "{m}");
    }

    #[test]
    fn complements_keep_relative_precision() {
        for d in [
            VolumeDistribution::pareto_with_mean(2.5, 3.0).unwrap(),
            VolumeDistribution::pareto_with_mean(1.5, 3.0).unwrap(),
            VolumeDistribution::truncated_pareto_with_mean(2.5, 10.0, 1.61).unwrap(),
            VolumeDistribution::Deterministic { value: 2.0 },
        ] {
            let m = d.mean().unwrap();
            for x in [-0.7, -0.05] {
                assert!(rel(d.mgf_complement(x).unwrap(), 1.0 - d.mgf(x).unwrap()) < 1e-10);
                assert!(rel(d.mgf_derivative_complement(x).unwrap(), m - d.mgf_derivative(x).unwrap()) < 1e-9);
            }
            // 1 − φ(x) ≈ −x·E[V] for tiny |x|.
            let x = -1e-14;
            assert!(rel(d.mgf_complement(x).unwrap(), -x * m) < 1e-6, "{d:?}");
            assert!(d.mgf_derivative_complement(x).unwrap() > 0.0);
        }
    }

    fn arb_dist() -> impl Strategy<Value = VolumeDistribution> {
        prop_oneof![
            (1.5f64..5.0, 0.1f64..20.0).prop_map(|(b, v)| VolumeDistribution::Pareto { beta: b, v_min: v }),
            (0.5f64..5.0, 0.1f64..5.0, 2.0f64..100.0)
                .prop_map(|(b, v, k)| VolumeDistribution::TruncatedPareto { beta: b, v_min: v, v_max: v * k }),
            (0.1f64..50.0).prop_map(|v| VolumeDistribution::Deterministic { value: v }),
            prop::collection::vec(0.1f64..100.0, 1..40).prop_map(|s| VolumeDistribution::Empirical { samples: s }),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn mgf_is_bounded_monotone_and_differentiable(d in arb_dist(), a in -1.0f64..-0.01, b in 0.0f64..1.0) {
            let x1 = a;
            let x2 = a * b;
            let m1 = d.mgf(x1).unwrap();
            let m2 = d.mgf(x2).unwrap();
            prop_assert!(m1 > 0.0 && m1 <= 1.0);
            prop_assert!(m1 <= m2 * (1.0 + 1e-12));
            prop_assert!(d.mgf_derivative(x1).unwrap() >= 0.0);
            let h = 5e-4 * x1.abs();
            let f = |x: f64| d.mgf(x).unwrap();
            let fd = (f(x1 - 2.0 * h) - 8.0 * f(x1 - h) + 8.0 * f(x1 + h) - f(x1 + 2.0 * h)) / (12.0 * h);
            let an = d.mgf_derivative(x1).unwrap();
            prop_assert!((fd - an).abs() <= 1e-6 * an, "fd {fd} analytic {an}");
        }
    }
}
