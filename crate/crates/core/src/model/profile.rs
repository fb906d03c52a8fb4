//! Popularity profiles: the normalized shape of a content's request rate as a
//! function of its age. Time is measured in days.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SnmError};

/// Smallest accepted power-law exponent. Below `1 + 1e-6` the life-span
/// `δ(2ζ−1)/(ζ−1)²` blows up.
pub const MIN_POWER_LAW_EXPONENT: f64 = 1.0 + 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    Uniform,
    Exponential,
    PowerLaw,
}

/// Normalized request-rate shape `λ(t)` with scale `delta` (days).
///
/// * Uniform: `1/δ` on `[0, δ]`, life-span `δ`
/// * Exponential: `e^{-t/δ}/δ`, life-span `2δ`
/// * PowerLaw: `(ζ−1)/δ · (t/δ + 1)^{−ζ}`, life-span `δ(2ζ−1)/(ζ−1)²`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PopularityProfile {
    Uniform { delta: f64 },
    Exponential { delta: f64 },
    PowerLaw { delta: f64, zeta: f64 },
}

impl PopularityProfile {
    pub fn uniform(delta: f64) -> Result<Self> {
        Self::Uniform { delta }.validated()
    }

    pub fn exponential(delta: f64) -> Result<Self> {
        Self::Exponential { delta }.validated()
    }

    pub fn power_law(delta: f64, zeta: f64) -> Result<Self> {
        Self::PowerLaw { delta, zeta }.validated()
    }

    /// Choose `δ` so that the profile's life-span equals `life_span`.
    pub fn for_life_span(kind: ProfileKind, life_span: f64, zeta: Option<f64>) -> Result<Self> {
        if !(life_span > 0.0 && life_span.is_finite()) {
            return Err(SnmError::invalid(format!("life-span must be positive, got {life_span}")));
        }
        match kind {
            ProfileKind::Uniform => Self::uniform(life_span),
            ProfileKind::Exponential => Self::exponential(life_span / 2.0),
            ProfileKind::PowerLaw => {
                let zeta = zeta.ok_or_else(|| SnmError::invalid("power-law profile needs an exponent"))?;
                check_zeta(zeta)?;
                let delta = life_span * (zeta - 1.0).powi(2) / (2.0 * zeta - 1.0);
                Self::power_law(delta, zeta)
            }
        }
    }

    pub fn validated(self) -> Result<Self> {
        let delta = self.delta();
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(SnmError::invalid(format!("profile scale must be positive and finite, got {delta}")));
        }
        if let Self::PowerLaw { zeta, .. } = self {
            check_zeta(zeta)?;
        }
        Ok(self)
    }

    pub fn kind(&self) -> ProfileKind {
        match self {
            Self::Uniform { .. } => ProfileKind::Uniform,
            Self::Exponential { .. } => ProfileKind::Exponential,
            Self::PowerLaw { .. } => ProfileKind::PowerLaw,
        }
    }

    pub fn delta(&self) -> f64 {
        match *self {
            Self::Uniform { delta } | Self::Exponential { delta } | Self::PowerLaw { delta, .. } => delta,
        }
    }

    /// `λ(t)` in 1/days; zero before the content is introduced.
    pub fn density(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match *self {
            Self::Uniform { delta } => {
                if t <= delta {
                    1.0 / delta
                } else {
                    0.0
                }
            }
            Self::Exponential { delta } => (-t / delta).exp() / delta,
            Self::PowerLaw { delta, zeta } => (zeta - 1.0) / delta * (t / delta + 1.0).powf(-zeta),
        }
    }

    /// `Λ(t) = ∫₀ᵗ λ`.
    pub fn cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match *self {
            Self::Uniform { delta } => (t / delta).min(1.0),
            Self::Exponential { delta } => -(-t / delta).exp_m1(),
            Self::PowerLaw { delta, zeta } => -((1.0 - zeta) * (t / delta).ln_1p()).exp_m1(),
        }
    }

    /// `1 − Λ(t)`, computed without cancellation for large ages.
    pub fn survival(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        match *self {
            Self::Uniform { delta } => (1.0 - t / delta).max(0.0),
            Self::Exponential { delta } => (-t / delta).exp(),
            Self::PowerLaw { delta, zeta } => ((1.0 - zeta) * (t / delta).ln_1p()).exp(),
        }
    }

    /// `Λ(b) − Λ(a)` for `a ≤ b`, accurate when both ages are large.
    pub fn mass_between(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let sa = self.survival(a);
        let sb = self.survival(b);
        if sa < 0.5 {
            (sa - sb).max(0.0)
        } else {
            (self.cdf(b) - self.cdf(a)).max(0.0)
        }
    }

    /// Age at which the survival function equals `s ∈ (0, 1]`.
    pub fn inverse_survival(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, 1.0);
        match *self {
            Self::Uniform { delta } => delta * (1.0 - s),
            Self::Exponential { delta } => -delta * s.ln(),
            Self::PowerLaw { delta, zeta } => delta * (s.ln() / (1.0 - zeta)).exp_m1(),
        }
    }

    /// `Λ⁻¹(u)` for `u ∈ [0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match *self {
            Self::Uniform { delta } => delta * u,
            Self::Exponential { delta } => -delta * (-u).ln_1p(),
            Self::PowerLaw { delta, zeta } => delta * ((-u).ln_1p() / (1.0 - zeta)).exp_m1(),
        }
    }

    /// Average life-span `L = 1/∫λ²` in days.
    pub fn life_span(&self) -> f64 {
        match *self {
            Self::Uniform { delta } => delta,
            Self::Exponential { delta } => 2.0 * delta,
            Self::PowerLaw { delta, zeta } => delta * (2.0 * zeta - 1.0) / (zeta - 1.0).powi(2),
        }
    }

    /// Smallest age beyond which less than `eps` of the profile's mass remains.
    pub fn tail_age(&self, eps: f64) -> f64 {
        self.inverse_survival(eps)
    }

    /// Ages where `λ` is not smooth.
    pub fn kinks(&self) -> Vec<f64> {
        match *self {
            Self::Uniform { delta } => vec![0.0, delta],
            _ => vec![0.0],
        }
    }
}

fn check_zeta(zeta: f64) -> Result<()> {
    if !(zeta >= MIN_POWER_LAW_EXPONENT && zeta.is_finite()) {
        return Err(SnmError::invalid(format!(
            "power-law exponent must exceed {MIN_POWER_LAW_EXPONENT}, got {zeta}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{geometric_breakpoints, Quadrature};
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1e-300)
    }

    #[test]
    fn density_examples() {
        let u = PopularityProfile::uniform(2.0).unwrap();
        assert_eq!(u.density(1.0), 0.5);
        assert_eq!(u.density(-0.5), 0.0);
        let e = PopularityProfile::exponential(1.0).unwrap();
        assert_eq!(e.density(0.0), 1.0);
    }

    #[test]
    fn cdf_examples() {
        let u = PopularityProfile::uniform(2.0).unwrap();
        assert_eq!(u.cdf(1.0), 0.5);
        let e = PopularityProfile::exponential(1.0).unwrap();
        assert_eq!(e.cdf(f64::INFINITY), 1.0);
        assert_eq!(e.cdf(0.0), 0.0);
        // Λ(t) = 1 − (t/δ + 1)^{1−ζ} = 1 − 2^{-2}
        let p = PopularityProfile::power_law(4.0, 3.0).unwrap();
        assert!(close(p.cdf(4.0), 0.75, 1e-15));
    }

    #[test]
    fn life_span_examples() {
        assert_eq!(PopularityProfile::uniform(3.0).unwrap().life_span(), 3.0);
        assert_eq!(PopularityProfile::exponential(3.5).unwrap().life_span(), 7.0);
        assert_eq!(PopularityProfile::power_law(4.0, 3.0).unwrap().life_span(), 5.0);
    }

    #[test]
    fn inverse_life_span() {
        let e = PopularityProfile::for_life_span(ProfileKind::Exponential, 7.0, None).unwrap();
        assert_eq!(e.delta(), 3.5);
        let u = PopularityProfile::for_life_span(ProfileKind::Uniform, 7.0, None).unwrap();
        assert_eq!(u.delta(), 7.0);
        let p = PopularityProfile::for_life_span(ProfileKind::PowerLaw, 5.0, Some(3.0)).unwrap();
        assert!(close(p.delta(), 4.0, 1e-15));
        assert!(PopularityProfile::for_life_span(ProfileKind::PowerLaw, 5.0, Some(1.0)).is_err());
        assert!(PopularityProfile::for_life_span(ProfileKind::PowerLaw, 5.0, Some(0.5)).is_err());
        assert!(PopularityProfile::for_life_span(ProfileKind::PowerLaw, 5.0, None).is_err());
        assert!(PopularityProfile::uniform(0.0).is_err());
    }

    fn arb_profile() -> impl Strategy<Value = PopularityProfile> {
        prop_oneof![
            (0.05f64..50.0).prop_map(|d| PopularityProfile::Uniform { delta: d }),
            (0.05f64..50.0).prop_map(|d| PopularityProfile::Exponential { delta: d }),
            (0.05f64..50.0, 1.2f64..6.0).prop_map(|(d, z)| PopularityProfile::PowerLaw { delta: d, zeta: z }),
        ]
    }

    fn integrate_profile(p: &PopularityProfile, f: impl Fn(f64) -> f64) -> f64 {
        let hi = p.tail_age(1e-14).min(1e15);
        let mut bps = geometric_breakpoints(p.delta(), 0.0, hi);
        bps.extend(p.kinks());
        let q = Quadrature { rel_tol: 1e-12, abs_tol: 0.0, max_panels: 20_000 };
        q.integrate(f, 0.0, hi, &bps).unwrap().value
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        #[test]
        fn normalized_and_life_span_matches_closed_form(p in arb_profile()) {
            // Heavy power-law tails are truncated; add back the closed-form remainder.
            let hi = p.tail_age(1e-14).min(1e15);
            let mass = integrate_profile(&p, |t| p.density(t)) + p.survival(hi);
            prop_assert!(close(mass, 1.0, 1e-8), "mass {mass}");
            let sq = integrate_profile(&p, |t| p.density(t).powi(2));
            prop_assert!(close(1.0 / sq, p.life_span(), 1e-6));
        }

        #[test]
        fn cdf_is_antiderivative_of_density(p in arb_profile()) {
            let h = 1e-6 * p.delta();
            let top = p.tail_age(1e-3);
            for i in 1..60 {
                let t = top * i as f64 / 60.0;
                if p.kinks().iter().any(|k| (t - k).abs() < 2.0 * h) { continue; }
                let fd = (p.cdf(t + h) - p.cdf(t - h)) / (2.0 * h);
                prop_assert!((fd - p.density(t)).abs() < 1e-6, "t={t} fd={fd} density={}", p.density(t));
            }
        }

        #[test]
        fn quantile_inverts_cdf(p in arb_profile(), u in 0.0f64..0.999) {
            let t = p.quantile(u);
            prop_assert!((p.cdf(t) - u).abs() < 1e-12);
            let s = 1.0 - u;
            prop_assert!((p.survival(p.inverse_survival(s)) - s).abs() < 1e-12);
        }

        #[test]
        fn for_life_span_round_trips(kind in 0usize..3, l in 0.01f64..1000.0, z in 1.1f64..8.0) {
            let kind = [ProfileKind::Uniform, ProfileKind::Exponential, ProfileKind::PowerLaw][kind];
            let p = PopularityProfile::for_life_span(kind, l, Some(z)).unwrap();
            prop_assert!(close(p.life_span(), l, 1e-12));
        }
    }
}
