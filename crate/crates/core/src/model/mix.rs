//! Content classes, ingress models and the full traffic configuration.
//!
//! A [`TrafficConfig`] is a complete, serializable description of a shot-noise
//! request process: contents appear as a Poisson process of rate `gamma`
//! (contents/day), each is marked with a class drawn by weight, draws its
//! volume from the class law, and generates requests following the class
//! popularity profile.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::profile::PopularityProfile;
use super::volume::VolumeDistribution;
use crate::error::{Result, SnmError};

/// Schema tag written into every serialized config.
pub const CONFIG_SCHEMA: &str = "snm-traffic/1";

const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContentClass {
    pub label: String,
    /// Probability that a new content belongs to this class.
    pub weight: f64,
    pub profile: PopularityProfile,
    pub volumes: VolumeDistribution,
    /// Filtered LRU variants never admit non-cacheable classes.
    #[serde(default = "default_true")]
    pub cacheable: bool,
}

fn default_true() -> bool {
    true
}

impl ContentClass {
    pub fn new(label: impl Into<String>, weight: f64, profile: PopularityProfile, volumes: VolumeDistribution) -> Self {
        ContentClass { label: label.into(), weight, profile, volumes, cacheable: true }
    }
}

/// One possible per-content split of requests across leaves, with its
/// probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitAtom {
    pub weight: f64,
    pub split: Vec<f64>,
}

/// How a content's requests are spread over the ingress leaves.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum IngressModel {
    /// One cache; every request enters there.
    #[default]
    SingleCache,
    /// Every content uses the same split `node_weights` (uniform when empty).
    Unlocalized {
        #[serde(default)]
        node_weights: Vec<f64>,
    },
    /// Every content is bound to a single leaf, picked with `node_weights`
    /// (uniform when empty).
    FullyLocalized {
        #[serde(default)]
        node_weights: Vec<f64>,
    },
    /// Per-content split drawn from a discrete law over split vectors.
    ExplicitSplit { atoms: Vec<SplitAtom> },
}

impl IngressModel {
    /// The per-content split law as weighted atoms over `leaves` leaves.
    pub fn atoms(&self, leaves: usize) -> Result<Vec<SplitAtom>> {
        if leaves == 0 {
            return Err(SnmError::Topology("topology has no leaves".into()));
        }
        let weights_or_uniform = |w: &Vec<f64>| -> Result<Vec<f64>> {
            if w.is_empty() {
                return Ok(vec![1.0 / leaves as f64; leaves]);
            }
            if w.len() != leaves {
                return Err(SnmError::DimensionMismatch { expected: leaves, got: w.len() });
            }
            check_probability_vector(w, "ingress node weights")?;
            Ok(w.clone())
        };
        match self {
            IngressModel::SingleCache => {
                if leaves != 1 {
                    return Err(SnmError::Topology(format!(
                        "single-cache ingress used with a topology of {leaves} leaves"
                    )));
                }
                Ok(vec![SplitAtom { weight: 1.0, split: vec![1.0] }])
            }
            IngressModel::Unlocalized { node_weights } => {
                Ok(vec![SplitAtom { weight: 1.0, split: weights_or_uniform(node_weights)? }])
            }
            IngressModel::FullyLocalized { node_weights } => {
                let w = weights_or_uniform(node_weights)?;
                Ok(w.iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 0.0)
                    .map(|(i, &p)| {
                        let mut split = vec![0.0; leaves];
                        split[i] = 1.0;
                        SplitAtom { weight: p, split }
                    })
                    .collect())
            }
            IngressModel::ExplicitSplit { atoms } => {
                if atoms.is_empty() {
                    return Err(SnmError::invalid("explicit split needs at least one atom"));
                }
                for atom in atoms {
                    if atom.split.len() != leaves {
                        return Err(SnmError::DimensionMismatch { expected: leaves, got: atom.split.len() });
                    }
                    check_probability_vector(&atom.split, "split vector")?;
                }
                let w: Vec<f64> = atoms.iter().map(|a| a.weight).collect();
                check_probability_vector(&w, "split atom weights")?;
                Ok(atoms.clone())
            }
        }
    }
}

fn check_probability_vector(p: &[f64], what: &str) -> Result<()> {
    if p.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
        return Err(SnmError::invalid(format!("{what} must be non-negative")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(SnmError::invalid(format!("{what} must sum to 1, got {total}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficConfig {
    #[serde(default = "schema_tag")]
    pub schema: String,
    /// Content arrival rate, contents/day.
    pub gamma: f64,
    pub classes: Vec<ContentClass>,
    /// Measurement window `[0, horizon]`, days.
    pub horizon: f64,
    /// Contents are born from `-burn_in` on so the process is stationary at 0.
    /// Defaults to three times the longest class life-span, capped at ten
    /// horizons.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<f64>,
    /// Requests in `[-warmup, 0)` are emitted as cache warm-up; older ones are
    /// not materialized. Defaults to `burn_in`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warmup: Option<f64>,
    #[serde(default)]
    pub ingress: IngressModel,
    #[serde(default)]
    pub seed: u64,
}

fn schema_tag() -> String {
    CONFIG_SCHEMA.to_string()
}

impl TrafficConfig {
    /// A single-class, single-cache configuration.
    pub fn single_class(gamma: f64, profile: PopularityProfile, volumes: VolumeDistribution, horizon: f64) -> Self {
        TrafficConfig {
            schema: schema_tag(),
            gamma,
            classes: vec![ContentClass::new("all", 1.0, profile, volumes)],
            horizon,
            burn_in: None,
            warmup: None,
            ingress: IngressModel::SingleCache,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != CONFIG_SCHEMA {
            return Err(SnmError::invalid(format!("unsupported config schema {:?}", self.schema)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(SnmError::invalid(format!("gamma must be non-negative, got {}", self.gamma)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(SnmError::invalid(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.classes.is_empty() {
            return Err(SnmError::invalid("at least one content class is required"));
        }
        for class in &self.classes {
            class.profile.validated()?;
            class.volumes.clone().validated()?;
            class.volumes.mean()?;
            if !(class.weight >= 0.0 && class.weight <= 1.0) {
                return Err(SnmError::invalid(format!("class {} weight {} outside [0, 1]", class.label, class.weight)));
            }
        }
        let total: f64 = self.classes.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(SnmError::invalid(format!("class weights sum to {total}, expected 1")));
        }
        if let Some(b) = self.burn_in {
            if !(b >= 0.0 && b.is_finite()) {
                return Err(SnmError::invalid(format!("burn-in must be non-negative, got {b}")));
            }
        }
        if let Some(w) = self.warmup {
            if !(w >= 0.0 && w <= self.burn_in()) {
                return Err(SnmError::invalid(format!("warm-up {w} must lie in [0, burn_in]")));
            }
        }
        Ok(())
    }

    pub fn max_life_span(&self) -> f64 {
        self.classes.iter().map(|c| c.profile.life_span()).fold(0.0, f64::max)
    }

    pub fn burn_in(&self) -> f64 {
        self.burn_in.unwrap_or_else(|| (3.0 * self.max_life_span()).min(10.0 * self.horizon))
    }

    pub fn warmup(&self) -> f64 {
        self.warmup.unwrap_or_else(|| self.burn_in()).min(self.burn_in())
    }

    /// `E[V]` over the class mix.
    pub fn mean_volume(&self) -> Result<f64> {
        let mut total = 0.0;
        for c in &self.classes {
            if c.weight > 0.0 {
                total += c.weight * c.volumes.mean()?;
            }
        }
        Ok(total)
    }

    /// Expected exogenous request rate, requests/day.
    pub fn request_rate(&self) -> Result<f64> {
        Ok(self.gamma * self.mean_volume()?)
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.classes.iter().position(|c| c.label == label)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: TrafficConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TrafficConfig {
        TrafficConfig::single_class(
            1e4,
            PopularityProfile::uniform(7.0).unwrap(),
            VolumeDistribution::pareto_with_mean(3.0, 3.0).unwrap(),
            30.0,
        )
    }

    #[test]
    fn json_round_trip() {
        let mut cfg = sample();
        cfg.ingress = IngressModel::Unlocalized { node_weights: vec![0.25, 0.75] };
        cfg.classes[0].cacheable = false;
        let back = TrafficConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn weights_must_sum_to_one() {
        let mut cfg = sample();
        cfg.classes[0].weight = 0.9;
        assert!(cfg.validate().is_err());
        cfg.classes.push(ContentClass::new("b", 0.1, PopularityProfile::uniform(1.0).unwrap(), VolumeDistribution::deterministic(1.0).unwrap()));
        cfg.validate().unwrap();
    }

    #[test]
    fn default_burn_in() {
        let cfg = sample();
        assert_eq!(cfg.burn_in(), 21.0);
        assert_eq!(cfg.warmup(), 21.0);
        let mut long = sample();
        long.classes[0].profile = PopularityProfile::exponential(500.0).unwrap();
        assert_eq!(long.burn_in(), 300.0);
    }

    #[test]
    fn rejects_bad_fields() {
        let text = sample().to_json().unwrap().replace("\"horizon\"", "\"horizn\"");
        assert!(TrafficConfig::from_json(&text).is_err());
        let mut cfg = sample();
        cfg.schema = "other/9".into();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn ingress_atoms() {
        let loc = IngressModel::FullyLocalized { node_weights: vec![] }.atoms(4).unwrap();
        assert_eq!(loc.len(), 4);
        assert!(loc.iter().all(|a| a.split.iter().sum::<f64>() == 1.0 && a.weight == 0.25));
        let bad = IngressModel::ExplicitSplit { atoms: vec![SplitAtom { weight: 1.0, split: vec![0.5, 0.5] }] };
        assert!(matches!(bad.atoms(3), Err(SnmError::DimensionMismatch { expected: 3, got: 2 })));
        assert!(IngressModel::SingleCache.atoms(2).is_err());
        let neg = IngressModel::ExplicitSplit { atoms: vec![SplitAtom { weight: 1.0, split: vec![1.5, -0.5] }] };
        assert!(neg.atoms(2).is_err());
    }
}
