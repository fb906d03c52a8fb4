//! Che's approximation for one LRU cache under multi-class shot-noise
//! traffic.
//!
//! A content of age `τ` is in the cache iff it was requested during the last
//! `T` days, which for a Poisson request stream of intensity `vλ(τ)` has
//! probability `1 − exp(−v[Λ(τ) − Λ(τ−T)])`. Averaging over volumes turns
//! this into `g₁` (see [`VolumeKernel`]), and integrating over ages and
//! contents gives the expected occupancy `C(T)`. The characteristic time
//! `T_C` solves `C(T_C) = C`.
//!
//! The engine works on a list of [`Term`]s. A term is a share `weight` of the
//! content arrivals whose requests reach this cache scaled by `scale` (the
//! ingress share in a tree); a plain class mix has one term per class with
//! scale 1. Terms of filtered classes keep contributing requests (all of them
//! misses) but never occupy the cache.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::kernel::VolumeKernel;
use crate::error::{Result, SnmError};
use crate::model::{PopularityProfile, TrafficConfig};
use crate::quadrature::{geometric_breakpoints, Quadrature};
use crate::sim::FilterPolicy;

/// Outer integrals stop where this much profile mass is left.
const TAIL_MASS: f64 = 1e-12;
/// Heavy power-law tails are cut at this many profile scales past `T`.
const MAX_TAIL_SCALES: f64 = 1e9;
const SOLVE_REL_TOL: f64 = 1e-10;
const MAX_DOUBLINGS: usize = 200;

/// How per-class hit probabilities are combined.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeighting {
    /// Hits over requests: each class counts in proportion to its request
    /// rate `P{W=k}·E[V(k)]`. This is what a simulator measures.
    #[default]
    RequestRate,
    /// Each class's hit probability weighted by its content share
    /// `P{W=k}` alone.
    ContentShare,
}

#[derive(Debug, Clone)]
pub struct Term {
    pub label: String,
    /// Share of content arrivals.
    pub weight: f64,
    pub profile: PopularityProfile,
    pub kernel: Arc<VolumeKernel>,
    /// Fraction of each content's requests that reach this cache.
    pub scale: f64,
    pub cacheable: bool,
}

impl Term {
    fn mean_requests(&self) -> f64 {
        self.scale * self.kernel.mean()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheSolution {
    pub capacity: f64,
    /// Characteristic time, days; infinite when the cache never fills.
    pub t_c: f64,
    pub p_hit: f64,
    /// `|C(T_C) − C|/C`.
    pub residual: f64,
    pub never_fills: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub capacity: f64,
    pub t_c: f64,
    pub p_hit: f64,
    /// NaN when a second moment is infinite.
    pub p_hit_small_approx: f64,
    pub p_hit_large_asymptote: f64,
}

impl CurveRow {
    pub const CSV_HEADER: &'static str = "capacity,T_C_days,p_hit,p_hit_small_approx,p_hit_large_asymptote";

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.capacity, self.t_c, self.p_hit, self.p_hit_small_approx, self.p_hit_large_asymptote
        )
    }
}

#[derive(Debug, Clone)]
pub struct CheModel {
    gamma: f64,
    terms: Vec<Term>,
    weighting: ClassWeighting,
    quadrature: Quadrature,
}

impl CheModel {
    pub fn new(gamma: f64, terms: Vec<Term>) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(SnmError::invalid(format!("gamma must be non-negative, got {gamma}")));
        }
        if terms.iter().any(|t| !(t.weight >= 0.0 && t.scale >= 0.0)) {
            return Err(SnmError::invalid("term weights and scales must be non-negative"));
        }
        Ok(CheModel {
            gamma,
            terms,
            weighting: ClassWeighting::default(),
            quadrature: Quadrature { rel_tol: 1e-10, abs_tol: 1e-300, max_panels: 20_000 },
        })
    }

    /// One term per class of `config`, all requests reaching the cache.
    pub fn from_config(config: &TrafficConfig) -> Result<Self> {
        config.validate()?;
        let terms = config
            .classes
            .iter()
            .map(|c| {
                Ok(Term {
                    label: c.label.clone(),
                    weight: c.weight,
                    profile: c.profile,
                    kernel: VolumeKernel::shared(&c.volumes)?,
                    scale: 1.0,
                    cacheable: c.cacheable,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(config.gamma, terms)
    }

    /// Marks the classes named in `filter` as never cached.
    pub fn with_filter(mut self, filter: &FilterPolicy) -> Result<Self> {
        for label in &filter.labels {
            if !self.terms.iter().any(|t| &t.label == label) {
                return Err(SnmError::invalid(format!("filter names unknown class {label:?}")));
            }
        }
        for t in &mut self.terms {
            if filter.labels.contains(&t.label) {
                t.cacheable = false;
            }
        }
        Ok(self)
    }

    pub fn with_weighting(mut self, weighting: ClassWeighting) -> Self {
        self.weighting = weighting;
        self
    }

    pub fn with_quadrature(mut self, quadrature: Quadrature) -> Self {
        self.quadrature = quadrature;
        self
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    fn cached(&self) -> impl Iterator<Item = &Term> {
        self.terms.iter().filter(|t| t.cacheable && t.weight > 0.0 && t.scale > 0.0)
    }

    /// Expected requests per content arrival reaching this cache.
    pub fn requests_per_content(&self) -> f64 {
        self.terms.iter().map(|t| t.weight * t.mean_requests()).sum()
    }

    /// Expected occupancy `C(T)` in contents.
    pub fn capacity_of_tc(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(SnmError::invalid(format!("characteristic time must be non-negative, got {t}")));
        }
        if t == 0.0 {
            return Ok(0.0);
        }
        if t.is_infinite() {
            return Ok(if self.cached().next().is_some() { f64::INFINITY } else { 0.0 });
        }
        let mut total = 0.0;
        for term in self.cached() {
            total += term.weight * self.occupancy(term, t)?;
        }
        Ok(self.gamma * total)
    }

    /// `∫₀^∞ g₁(s·[Λ(τ) − Λ(τ−T)]) dτ` for one term.
    fn occupancy(&self, term: &Term, t: f64) -> Result<f64> {
        let p = &term.profile;
        let k = &term.kernel;
        let s = term.scale;
        let delta = p.delta();
        let tail = p.tail_age(TAIL_MASS).min(MAX_TAIL_SCALES * delta);
        let hi = t + tail;
        let mut bps = vec![t];
        for kink in p.kinks() {
            bps.push(kink);
            bps.push(kink + t);
        }
        bps.extend(geometric_breakpoints(delta, 0.0, hi));
        bps.extend(geometric_breakpoints(delta, 0.0, tail).into_iter().map(|b| b + t));
        if t < delta {
            bps.extend(geometric_breakpoints(t, t * 1e-6, 4.0 * delta));
        }
        let f = |tau: f64| k.g1(s * p.mass_between(tau - t, tau));
        let body = self.quadrature.integrate(f, 0.0, hi, &bps)?.value;
        // Beyond `hi` the argument is tiny and g₁(y) ≈ y·E[V]; what is left
        // is ∫_{hi}^∞ [Λ(τ) − Λ(τ−T)] dτ = ∫_{tail}^{hi} S(θ) dθ.
        let rest = if p.survival(tail) > 0.0 {
            let r = self.quadrature.integrate(|th| p.survival(th), tail, hi, &geometric_breakpoints(delta, tail, hi))?;
            s * k.mean() * r.value
        } else {
            0.0
        };
        Ok(body + rest)
    }

    /// Expected hits per content arrival of one term at characteristic time `t`:
    /// `s ∫ λ(τ) g₂(s·[Λ(τ) − Λ(τ−T)]) dτ`, integrated in `u = Λ(τ)`.
    fn hits(&self, term: &Term, t: f64) -> Result<f64> {
        let p = &term.profile;
        let k = &term.kernel;
        let s = term.scale;
        if t.is_infinite() {
            // Every request after the first within the lifetime hits.
            return Ok(s * k.mean() - k.g1(s));
        }
        let mut bps: Vec<f64> = (1..=52).map(|j| 1.0 - 0.5f64.powi(j)).collect();
        bps.push(p.cdf(t));
        for kink in p.kinks() {
            bps.push(p.cdf(kink));
            bps.push(p.cdf(kink + t));
        }
        let f = |u: f64| {
            let tau = p.quantile(u);
            k.g2(s * p.mass_between(tau - t, tau))
        };
        Ok(s * self.quadrature.integrate(f, 0.0, 1.0, &bps)?.value)
    }

    fn combine(&self, per_term: impl Fn(&Term) -> Result<f64>) -> Result<f64> {
        let requests = self.requests_per_content();
        if !(requests > 0.0) {
            return Ok(0.0);
        }
        let mut p = 0.0;
        for term in self.cached() {
            let h = per_term(term)?;
            p += match self.weighting {
                ClassWeighting::RequestRate => term.weight * h / requests,
                ClassWeighting::ContentShare => term.weight * h / term.mean_requests(),
            };
        }
        Ok(p.clamp(0.0, 1.0))
    }

    /// Expected hits per content arrival at characteristic time `t`.
    pub fn hits_per_content(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Ok(0.0);
        }
        let mut h = 0.0;
        for term in self.cached() {
            h += term.weight * self.hits(term, t)?;
        }
        Ok(h)
    }

    /// Hit probability for a given characteristic time.
    pub fn hit_probability(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(SnmError::invalid(format!("characteristic time must be non-negative, got {t}")));
        }
        if t == 0.0 {
            return Ok(0.0);
        }
        self.combine(|term| self.hits(term, t))
    }

    /// Root of `C(T) = capacity` by bisection in `ln T` on a bracket grown by
    /// doubling from the linear lower bound `T ≥ C/(γ·E[requests])`.
    pub fn solve_tc(&self, capacity: f64) -> Result<CheSolution> {
        if !(capacity >= 0.0 && capacity.is_finite()) {
            return Err(SnmError::invalid(format!("capacity must be non-negative, got {capacity}")));
        }
        if capacity == 0.0 {
            return Ok(CheSolution { capacity, t_c: 0.0, p_hit: 0.0, residual: 0.0, never_fills: false });
        }
        let rate: f64 = self.cached().map(|t| t.weight * t.mean_requests()).sum::<f64>() * self.gamma;
        if !(rate > 0.0) {
            log::warn!("no cacheable traffic reaches this cache; it never fills");
            return Ok(self.never_fills(capacity));
        }
        let mut lo = capacity / rate;
        let mut hi = lo;
        let mut c_hi = self.capacity_of_tc(hi)?;
        let mut doublings = 0;
        while c_hi < capacity {
            lo = hi;
            hi *= 2.0;
            c_hi = self.capacity_of_tc(hi)?;
            doublings += 1;
            if doublings > MAX_DOUBLINGS || !hi.is_finite() {
                return Ok(self.never_fills(capacity));
            }
        }
        let (mut t, mut c_t) = (hi, c_hi);
        while (c_t - capacity).abs() > SOLVE_REL_TOL * capacity && hi / lo - 1.0 > 1e-15 {
            t = (lo * hi).sqrt();
            c_t = self.capacity_of_tc(t)?;
            if c_t < capacity {
                lo = t;
            } else {
                hi = t;
            }
        }
        let residual = (c_t - capacity).abs() / capacity;
        if residual > 1e-8 {
            return Err(SnmError::RootFinding(format!(
                "characteristic time for capacity {capacity} stalled at residual {residual:e}"
            )));
        }
        Ok(CheSolution { capacity, t_c: t, p_hit: self.hit_probability(t)?, residual, never_fills: false })
    }

    fn never_fills(&self, capacity: f64) -> CheSolution {
        CheSolution {
            capacity,
            t_c: f64::INFINITY,
            p_hit: self.large_cache_phit().unwrap_or(0.0),
            residual: 0.0,
            never_fills: true,
        }
    }

    /// Linearized model for small caches: `T_C ≈ C/(γ·E[requests])` and
    /// hits ≈ `s²·E[V²]·T_C/L` per content.
    pub fn small_cache_phit(&self, capacity: f64) -> Result<f64> {
        let rate: f64 = self.cached().map(|t| t.weight * t.mean_requests()).sum::<f64>() * self.gamma;
        if !(rate > 0.0) {
            return Ok(0.0);
        }
        let t_c = capacity / rate;
        for term in self.cached() {
            term.kernel.second_moment().ok_or(SnmError::InfiniteMoment { moment: "second moment" })?;
        }
        self.combine(|term| {
            let m2 = term.kernel.second_moment().unwrap_or(f64::INFINITY);
            Ok(term.scale * term.scale * m2 * t_c / term.profile.life_span())
        })
    }

    /// Limit of the hit probability as `T_C → ∞`. It does not depend on the
    /// popularity profiles.
    pub fn large_cache_phit(&self) -> Result<f64> {
        self.combine(|term| self.hits(term, f64::INFINITY))
    }

    /// Smallest capacity whose model hit probability reaches `target`.
    pub fn required_capacity(&self, target: f64) -> Result<f64> {
        let asymptote = self.large_cache_phit()?;
        if !(target > 0.0 && target < asymptote) {
            return Err(SnmError::UnreachableTarget { target, asymptote });
        }
        let mut lo = 0.0;
        let mut hi = self.terms.iter().map(|t| t.profile.life_span()).fold(1e-6, f64::min);
        while self.hit_probability(hi)? < target {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = if lo > 0.0 { (lo * hi).sqrt() } else { 0.5 * hi };
            if hi - lo <= 1e-12 * hi {
                break;
            }
            if self.hit_probability(mid)? < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        self.capacity_of_tc(hi)
    }

    /// `(C, T_C, p_hit, small-cache approximation, large-cache limit)` rows.
    pub fn curve(&self, capacities: &[f64]) -> Result<Vec<CurveRow>> {
        let large = self.large_cache_phit()?;
        let mut rows = Vec::with_capacity(capacities.len());
        for &c in capacities {
            let sol = self.solve_tc(c)?;
            let small = match self.small_cache_phit(c) {
                Ok(p) => p,
                Err(SnmError::InfiniteMoment { .. }) => f64::NAN,
                Err(e) => return Err(e),
            };
            rows.push(CurveRow {
                capacity: c,
                t_c: sol.t_c,
                p_hit: sol.p_hit,
                p_hit_small_approx: small,
                p_hit_large_asymptote: large,
            });
        }
        Ok(rows)
    }
}

/// Expected occupancy for characteristic time `t` under `config`.
pub fn capacity_of_tc(config: &TrafficConfig, t: f64) -> Result<f64> {
    CheModel::from_config(config)?.capacity_of_tc(t)
}

pub fn solve_tc(config: &TrafficConfig, capacity: f64) -> Result<CheSolution> {
    CheModel::from_config(config)?.solve_tc(capacity)
}

pub fn hit_probability(config: &TrafficConfig, t: f64) -> Result<f64> {
    CheModel::from_config(config)?.hit_probability(t)
}

pub fn small_cache_phit(config: &TrafficConfig, capacity: f64) -> Result<f64> {
    CheModel::from_config(config)?.small_cache_phit(capacity)
}

pub fn large_cache_phit(config: &TrafficConfig) -> Result<f64> {
    CheModel::from_config(config)?.large_cache_phit()
}

/// Hit probability of LRU that never admits the classes in `filter`.
pub fn filtered_phit(config: &TrafficConfig, capacity: f64, filter: &FilterPolicy) -> Result<f64> {
    Ok(CheModel::from_config(config)?.with_filter(filter)?.solve_tc(capacity)?.p_hit)
}

pub fn phit_vs_capacity_curve(config: &TrafficConfig, capacities: &[f64]) -> Result<Vec<CurveRow>> {
    CheModel::from_config(config)?.curve(capacities)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ContentClass, VolumeDistribution};

    fn fig6(l: f64, beta: f64) -> TrafficConfig {
        TrafficConfig::single_class(
            1e4,
            PopularityProfile::uniform(l).unwrap(),
            VolumeDistribution::pareto_with_mean(beta, 3.0).unwrap(),
            60.0,
        )
    }

    #[test]
    fn trivial_limits() {
        let m = CheModel::from_config(&fig6(7.0, 3.0)).unwrap();
        assert_eq!(m.capacity_of_tc(0.0).unwrap(), 0.0);
        assert_eq!(m.hit_probability(0.0).unwrap(), 0.0);
        let s = m.solve_tc(0.0).unwrap();
        assert_eq!((s.t_c, s.p_hit), (0.0, 0.0));
    }

    #[test]
    fn large_cache_examples() {
        for v in [1.0, 3.0] {
            let cfg = TrafficConfig::single_class(
                1e4,
                PopularityProfile::exponential(2.0).unwrap(),
                VolumeDistribution::deterministic(v).unwrap(),
                30.0,
            );
            let expected = 1.0 - (1.0 - (-v).exp()) / v;
            assert!((large_cache_phit(&cfg).unwrap() - expected).abs() < 1e-15);
        }
        // 1 − (1 − e^{−3})/3 evaluated by hand.
        assert!((0.683262 - (1.0 - (1.0 - (-3f64).exp()) / 3.0)).abs() < 1e-6);
    }

    #[test]
    fn small_cache_example_and_linearization() {
        let cfg = TrafficConfig::single_class(
            1e4,
            PopularityProfile::uniform(1.0).unwrap(),
            VolumeDistribution::deterministic(2.0).unwrap(),
            30.0,
        );
        assert!((small_cache_phit(&cfg, 100.0).unwrap() - 0.01).abs() < 1e-15);
        // C = 300 with E[V] = 3 and γ = 10⁴ gives T_C ≈ 0.01 days.
        let s = solve_tc(&fig6(7.0, 3.0), 300.0).unwrap();
        assert!((s.t_c / 0.01 - 1.0).abs() < 0.05, "{}", s.t_c);
    }

    #[test]
    fn occupancy_is_bounded_by_linear_growth() {
        let m = CheModel::from_config(&fig6(7.0, 2.1)).unwrap();
        for t in [1e-3, 0.1, 1.0, 7.0, 30.0, 500.0] {
            assert!(m.capacity_of_tc(t).unwrap() <= 1e4 * 3.0 * t * (1.0 + 1e-9));
        }
    }

    #[test]
    fn solve_round_trip() {
        let m = CheModel::from_config(&fig6(7.0, 2.1)).unwrap();
        for c in [1.0, 250.0, 1e4, 3e5, 5e6] {
            let s = m.solve_tc(c).unwrap();
            let back = m.capacity_of_tc(s.t_c).unwrap();
            assert!((back - c).abs() / c < 1e-8, "C={c} back={back}");
            assert!(s.p_hit < m.large_cache_phit().unwrap());
        }
    }

    #[test]
    fn approaches_large_cache_limit() {
        for p in [
            PopularityProfile::uniform(7.0).unwrap(),
            PopularityProfile::exponential(3.5).unwrap(),
            PopularityProfile::power_law(4.0, 3.0).unwrap(),
        ] {
            let cfg = TrafficConfig::single_class(1e4, p, VolumeDistribution::pareto_with_mean(2.5, 3.0).unwrap(), 60.0);
            let m = CheModel::from_config(&cfg).unwrap();
            let big = m.hit_probability(1e6 * p.life_span()).unwrap();
            assert!((big - m.large_cache_phit().unwrap()).abs() < 1e-4, "{p:?}: {big}");
        }
    }

    #[test]
    fn single_class_mix_is_consistent() {
        let cfg = fig6(7.0, 3.0);
        let mut two = cfg.clone();
        two.classes = vec![
            ContentClass { weight: 0.25, label: "a".into(), ..cfg.classes[0].clone() },
            ContentClass { weight: 0.75, label: "b".into(), ..cfg.classes[0].clone() },
        ];
        let a = solve_tc(&cfg, 5000.0).unwrap();
        let b = solve_tc(&two, 5000.0).unwrap();
        assert!((a.p_hit - b.p_hit).abs() < 1e-12);
        let empty = filtered_phit(&cfg, 5000.0, &FilterPolicy::default()).unwrap();
        assert_eq!(empty, a.p_hit);
        assert_eq!(filtered_phit(&two, 5000.0, &FilterPolicy::new(["a", "b"])).unwrap(), 0.0);
    }

    #[test]
    fn weighting_modes_agree_for_one_class() {
        let cfg = fig6(7.0, 3.0);
        let a = CheModel::from_config(&cfg).unwrap();
        let b = a.clone().with_weighting(ClassWeighting::ContentShare);
        let t = a.solve_tc(2000.0).unwrap().t_c;
        assert!((a.hit_probability(t).unwrap() - b.hit_probability(t).unwrap()).abs() < 1e-14);
    }
}
