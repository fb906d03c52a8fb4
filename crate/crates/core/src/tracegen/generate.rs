//! Exact sampling of shot-noise request traces.
//!
//! Contents are born as a Poisson process of rate `γ` on `[-burn_in, horizon]`.
//! A content born at `τ` with volume `v` emits a Poisson number of requests
//! with mean `v·(Λ(b) − Λ(a))` over the ages `[a, b]` that fall inside the
//! materialized window `[-warmup, horizon]`; the request ages are i.i.d. with
//! the profile restricted to `[a, b]`, drawn by inverting the survival
//! function. Requests older than the warm-up window are never needed by a
//! simulator, so they are not drawn at all.

use std::hash::Hasher;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp, Poisson};
use rustc_hash::FxHasher;
use serde::{Deserialize, Serialize};

use super::trace::{Request, RequestTrace, TraceMetadata};
use crate::error::{Result, SnmError};
use crate::model::{CacheTopology, NodeId, SplitAtom, TrafficConfig};

/// One content of the catalogue that emitted at least one request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContentInstance {
    pub id: u64,
    /// Catalogue insertion time, days.
    pub tau: f64,
    pub class_index: u32,
    pub volume: f64,
    /// Index into [`Catalog::atoms`].
    pub split_atom: u32,
}

/// The contents behind a generated trace. Content ids are dense, so
/// `contents[id]` is the content with that id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub contents: Vec<ContentInstance>,
    pub class_labels: Vec<String>,
    pub atoms: Vec<SplitAtom>,
}

impl Catalog {
    pub fn get(&self, id: u64) -> Option<&ContentInstance> {
        self.contents.get(usize::try_from(id).ok()?)
    }

    pub fn split(&self, content: &ContentInstance) -> &[f64] {
        &self.atoms[content.split_atom as usize].split
    }

    pub fn class_label(&self, id: u64) -> Option<&str> {
        self.get(id).map(|c| self.class_labels[c.class_index as usize].as_str())
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedTrace {
    pub trace: RequestTrace,
    pub catalog: Catalog,
}

/// Stable digest of a configuration, recorded in trace metadata.
pub fn config_hash(config: &TrafficConfig) -> String {
    let mut h = FxHasher::default();
    h.write(serde_json::to_string(config).unwrap_or_default().as_bytes());
    format!("{:016x}", h.finish())
}

/// Generates a trace using `config.seed`.
pub fn generate(config: &TrafficConfig, topology: &CacheTopology) -> Result<RequestTrace> {
    Ok(generate_with_catalog(config, topology, config.seed)?.trace)
}

pub fn generate_with_catalog(config: &TrafficConfig, topology: &CacheTopology, seed: u64) -> Result<GeneratedTrace> {
    config.validate()?;
    let leaves = topology.leaves();
    let atoms = config.ingress.atoms(leaves.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let horizon = config.horizon;
    let burn_in = config.burn_in();
    let warm_start = -config.warmup();

    let class_pick = WeightedIndex::new(config.classes.iter().map(|c| c.weight))
        .map_err(|e| SnmError::invalid(format!("class weights: {e}")))?;
    let atom_pick = WeightedIndex::new(atoms.iter().map(|a| a.weight))
        .map_err(|e| SnmError::invalid(format!("split atom weights: {e}")))?;
    let ingress_pick: Vec<IngressPick> = atoms.iter().map(|a| IngressPick::new(&a.split, leaves)).collect::<Result<_>>()?;

    let mut catalog = Catalog {
        contents: Vec::new(),
        class_labels: config.classes.iter().map(|c| c.label.clone()).collect(),
        atoms: atoms.clone(),
    };
    let mut requests: Vec<Request> = Vec::new();

    if config.gamma > 0.0 {
        let gaps = Exp::new(config.gamma).map_err(|e| SnmError::invalid(e.to_string()))?;
        let mut tau = -burn_in;
        loop {
            tau += gaps.sample(&mut rng);
            if tau > horizon {
                break;
            }
            let k = class_pick.sample(&mut rng);
            let class = &config.classes[k];
            let volume = class.volumes.sample(&mut rng);
            let atom = atom_pick.sample(&mut rng);

            let a = (warm_start - tau).max(0.0);
            let b = horizon - tau;
            let sa = class.profile.survival(a);
            let mass = class.profile.mass_between(a, b);
            let mean = volume * mass;
            if !(mean > 0.0) {
                continue;
            }
            let n = Poisson::new(mean).map_err(|e| SnmError::invalid(e.to_string()))?.sample(&mut rng) as u64;
            if n == 0 {
                continue;
            }
            let id = catalog.contents.len() as u64;
            catalog.contents.push(ContentInstance {
                id,
                tau,
                class_index: k as u32,
                volume,
                split_atom: atom as u32,
            });
            for _ in 0..n {
                let s = sa - rng.random::<f64>() * mass;
                let time = (tau + class.profile.inverse_survival(s)).clamp(tau + a, horizon);
                requests.push(Request {
                    time,
                    content_id: id,
                    ingress_id: ingress_pick[atom].sample(&mut rng),
                    pre_horizon: time < 0.0,
                });
            }
        }
    }
    log::debug!("generated {} requests for {} contents", requests.len(), catalog.contents.len());

    let metadata = TraceMetadata {
        config_hash: Some(config_hash(config)),
        seed: Some(seed),
        horizon: Some(horizon),
        burn_in: Some(burn_in),
    };
    Ok(GeneratedTrace { trace: RequestTrace::from_unsorted(requests, metadata), catalog })
}

enum IngressPick {
    Fixed(NodeId),
    Weighted(WeightedIndex<f64>, Vec<NodeId>),
}

impl IngressPick {
    fn new(split: &[f64], leaves: &[NodeId]) -> Result<Self> {
        let nonzero: Vec<usize> = (0..split.len()).filter(|&i| split[i] > 0.0).collect();
        if nonzero.len() == 1 {
            return Ok(IngressPick::Fixed(leaves[nonzero[0]]));
        }
        let w = WeightedIndex::new(split.iter().copied()).map_err(|e| SnmError::invalid(format!("split vector: {e}")))?;
        Ok(IngressPick::Weighted(w, leaves.to_vec()))
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> NodeId {
        match self {
            IngressPick::Fixed(id) => *id,
            IngressPick::Weighted(w, leaves) => leaves[w.sample(rng)],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{IngressModel, PopularityProfile, VolumeDistribution};

    fn base(gamma: f64) -> TrafficConfig {
        TrafficConfig::single_class(
            gamma,
            PopularityProfile::uniform(2.0).unwrap(),
            VolumeDistribution::deterministic(4.0).unwrap(),
            10.0,
        )
    }

    #[test]
    fn zero_rate_gives_empty_trace() {
        let t = generate(&base(0.0), &CacheTopology::single(10)).unwrap();
        assert!(t.is_empty());
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = base(200.0);
        let top = CacheTopology::single(10);
        let a = generate_with_catalog(&cfg, &top, 5).unwrap();
        let b = generate_with_catalog(&cfg, &top, 5).unwrap();
        let c = generate_with_catalog(&cfg, &top, 6).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_ne!(a.trace, c.trace);
        let mut x = Vec::new();
        let mut y = Vec::new();
        a.trace.write_csv(&mut x).unwrap();
        b.trace.write_csv(&mut y).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn requests_stay_in_window_and_after_birth() {
        let mut cfg = base(300.0);
        cfg.warmup = Some(1.0);
        let g = generate_with_catalog(&cfg, &CacheTopology::single(1), 1).unwrap();
        for r in g.trace.iter() {
            let c = g.catalog.get(r.content_id).unwrap();
            assert!(r.time >= c.tau && r.time <= c.tau + 2.0);
            assert!(r.time >= -1.0 && r.time <= 10.0);
            assert_eq!(r.pre_horizon, r.time < 0.0);
        }
        assert!(g.trace.iter().any(|r| r.pre_horizon));
    }

    #[test]
    fn explicit_split_dimension_is_checked() {
        let mut cfg = base(10.0);
        cfg.ingress = IngressModel::ExplicitSplit { atoms: vec![SplitAtom { weight: 1.0, split: vec![0.5, 0.5] }] };
        let err = generate(&cfg, &CacheTopology::two_level(3, 1, 1)).unwrap_err();
        assert!(matches!(err, SnmError::DimensionMismatch { expected: 3, got: 2 }));
    }
}
