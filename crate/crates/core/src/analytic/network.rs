//! Trees of LRU caches under shot-noise traffic with leave-copy-everywhere
//! replication.
//!
//! Leaves see Poisson request streams and are solved exactly by
//! [`CheModel`]. Their misses feed the parent. The parent's input is
//! replaced by its expected intensity conditioned on the content's class,
//! ingress split and volume `v`: a leaf forwards
//! `M(τ) = v·p·λ(τ)·exp(−v·p·[Λ(τ) − Λ(τ−T_leaf)])`. With `A(τ)` the
//! cumulative input of a parent, the content is present at age `τ` with
//! probability `p_in(τ) = 1 − exp(−[A(τ) − A(τ−T)])`, and the occupancy
//! constraint `C = γ·E[∫ p_in dτ]` fixes the parent's `T`.
//!
//! Conditioning on the volume rules out the MGF shortcuts of the single-cache
//! engine, so every stratum (class × split atom) carries a quadrature grid in
//! `v`, and every `(stratum, v)` pair a tabulated miss stream on a shared age
//! grid.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::kernel::VolumeKernel;
use super::single::{CheModel, Term};
use crate::error::{Result, SnmError};
use crate::model::{CacheTopology, NodeId, PopularityProfile, ProfileKind, TrafficConfig, VolumeDistribution};
use crate::quadrature::{gauss_legendre, Quadrature};
use crate::sim::FilterPolicy;

/// Gauss nodes of the per-class volume grid.
pub const DEFAULT_VOLUME_NODES: usize = 64;
const TAIL_MASS: f64 = 1e-11;
const MAX_TAIL_SCALES: f64 = 1e9;
const STEPS_PER_SCALE: f64 = 20.0;
const MAX_GRID_POINTS: usize = 400_000;
const MAX_DOUBLINGS: usize = 60;
const SOLVE_REL_TOL: f64 = 1e-9;
const EMPIRICAL_ATOMS: usize = 256;

/// How a parent cache turns the presence probability of a content into the
/// hit probability of a request that reaches it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkMode {
    /// Treat the parent's input as Poisson: `p_hit = p_in`.
    Poisson,
    /// A request forwarded by child `c'` proves that `c'` saw no request for
    /// the content during its own last `T_{c'}`, so those requests cannot
    /// have refreshed the parent either.
    #[default]
    Improved,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeSolution {
    pub node: NodeId,
    pub capacity: u64,
    /// Characteristic time in days; infinite when the cache never fills.
    pub t_c: f64,
    pub never_fills: bool,
    /// Requests reaching the node per day.
    pub request_rate: f64,
    pub hit_rate: f64,
    pub hit_ratio: f64,
    /// Share of all exogenous requests served by this node.
    pub global_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSolution {
    pub mode: NetworkMode,
    /// Bottom-up order.
    pub nodes: Vec<NodeSolution>,
    /// Exogenous requests per day.
    pub request_rate: f64,
    /// Fraction of requests served by any cache of the tree.
    pub global_hit_ratio: f64,
}

impl NetworkSolution {
    pub fn node(&self, id: NodeId) -> Option<&NodeSolution> {
        self.nodes.iter().find(|n| n.node == id)
    }
}

/// One line of a capacity-allocation sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationRow {
    pub alloc_label: String,
    pub leaf_capacity: u64,
    pub root_capacity: u64,
    pub global_phit_model: f64,
    pub global_phit_sim: Option<f64>,
    /// Half-width of the 95% confidence interval of the simulation.
    pub ci: Option<f64>,
}

impl AllocationRow {
    pub const CSV_HEADER: &'static str = "alloc_label,leaf_capacity,root_capacity,global_phit_model,global_phit_sim,ci";

    pub fn csv_line(&self) -> String {
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{}",
            self.alloc_label,
            self.leaf_capacity,
            self.root_capacity,
            self.global_phit_model,
            opt(self.global_phit_sim),
            opt(self.ci)
        )
    }
}

/// Quadrature nodes `(v, probability)` for the volume law: Gauss–Legendre in
/// a graded quantile variable for Pareto laws, exact atoms otherwise.
pub fn volume_grid(dist: &VolumeDistribution, nodes: usize) -> Vec<(f64, f64)> {
    match dist {
        VolumeDistribution::Deterministic { value } => vec![(*value, 1.0)],
        VolumeDistribution::Empirical { samples } => {
            let mut sorted = samples.clone();
            sorted.sort_by(f64::total_cmp);
            let n = sorted.len() as f64;
            let mut atoms: Vec<(f64, f64)> = Vec::new();
            for &x in &sorted {
                match atoms.last_mut() {
                    Some((v, c)) if *v == x => *c += 1.0,
                    _ => atoms.push((x, 1.0)),
                }
            }
            if atoms.len() <= EMPIRICAL_ATOMS {
                return atoms.into_iter().map(|(v, c)| (v, c / n)).collect();
            }
            // Equal-count bins represented by their mean keep E[V] exact.
            let bins = nodes.max(1);
            let mut out = Vec::with_capacity(bins);
            for b in 0..bins {
                let lo = b * sorted.len() / bins;
                let hi = (b + 1) * sorted.len() / bins;
                if hi > lo {
                    let chunk = &sorted[lo..hi];
                    out.push((chunk.iter().sum::<f64>() / chunk.len() as f64, chunk.len() as f64 / n));
                }
            }
            out
        }
        VolumeDistribution::Pareto { beta, .. } | VolumeDistribution::TruncatedPareto { beta, .. } => {
            // u = 1 − (1−w)^k flattens the v ~ (1−u)^{−1/β} singularity.
            let k = if *beta > 1.0 { (2.0 * beta / (beta - 1.0)).ceil().min(12.0) } else { 12.0 };
            let (x, w) = gauss_legendre(nodes.max(1));
            x.iter()
                .zip(&w)
                .map(|(&x, &w)| {
                    let s = 0.5 * (x + 1.0);
                    let u = 1.0 - (1.0 - s).powf(k);
                    (dist.quantile(u), 0.5 * w * k * (1.0 - s).powf(k - 1.0))
                })
                .collect()
        }
    }
}

struct Stratum {
    label: String,
    class: usize,
    weight: f64,
    /// Fraction of the content's requests entering at each leaf.
    split: Vec<f64>,
    profile: PopularityProfile,
    kernel: Arc<VolumeKernel>,
    cacheable: bool,
    volumes: Vec<(f64, f64)>,
}

/// Closed form of a leaf's miss stream for one `(stratum, v)`.
#[derive(Debug, Clone, Copy)]
struct LeafForm {
    rate: f64,
    t: f64,
    profile: PopularityProfile,
}

impl LeafForm {
    fn intensity(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let d = self.profile.density(x);
        if d == 0.0 {
            return 0.0;
        }
        self.rate * d * (-self.rate * self.profile.mass_between(x - self.t, x)).exp()
    }

    fn closed_cumulative(&self, x: f64) -> Option<f64> {
        if self.t == 0.0 {
            Some(self.rate * self.profile.cdf(x))
        } else if x <= self.t {
            Some(-(-self.rate * self.profile.cdf(x)).exp_m1())
        } else {
            None
        }
    }
}

/// Cumulative miss stream `F(τ) = ∫₀^τ M` of one `(stratum, v)` pair.
///
/// Between grid nodes `F` is the cubic Hermite interpolant of its values and
/// one-sided slopes, so a kink of `M` at a node costs no accuracy.
#[derive(Debug, Clone)]
struct Stream {
    f: Vec<f64>,
    slope_lo: Vec<f64>,
    slope_hi: Vec<f64>,
    leaf: Option<LeafForm>,
}

fn locate(grid: &[f64], x: f64) -> usize {
    (grid.partition_point(|&g| g <= x) - 1).min(grid.len() - 2)
}

fn nudge(a: f64, b: f64) -> (f64, f64) {
    let eps = 1e-10 * (b - a);
    (a + eps, b - eps)
}

impl Stream {
    fn end(&self) -> f64 {
        *self.f.last().expect("grid has at least two points")
    }

    fn cumulative(&self, grid: &[f64], x: f64) -> f64 {
        if !(x > 0.0) {
            return 0.0;
        }
        if let Some(closed) = self.leaf.and_then(|l| l.closed_cumulative(x)) {
            return closed;
        }
        if x >= grid[grid.len() - 1] {
            return self.end();
        }
        let i = locate(grid, x);
        let (a, b) = (grid[i], grid[i + 1]);
        let h = b - a;
        let t = (x - a) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * self.f[i]
            + (t3 - 2.0 * t2 + t) * h * self.slope_lo[i]
            + (3.0 * t2 - 2.0 * t3) * self.f[i + 1]
            + (t3 - t2) * h * self.slope_hi[i]
    }

    fn intensity(&self, grid: &[f64], x: f64) -> f64 {
        if let Some(l) = &self.leaf {
            return l.intensity(x);
        }
        if !(x >= 0.0) || x >= grid[grid.len() - 1] {
            return 0.0;
        }
        let i = locate(grid, x);
        let (a, b) = (grid[i], grid[i + 1]);
        let h = b - a;
        let t = (x - a) / h;
        let t2 = t * t;
        (6.0 * t2 - 6.0 * t) / h * self.f[i]
            + (3.0 * t2 - 4.0 * t + 1.0) * self.slope_lo[i]
            + (6.0 * t - 6.0 * t2) / h * self.f[i + 1]
            + (3.0 * t2 - 2.0 * t) * self.slope_hi[i]
    }

    fn for_leaf(grid: &[f64], form: LeafForm) -> Result<Stream> {
        let n = grid.len();
        let quad = Quadrature { rel_tol: 1e-11, abs_tol: 1e-16, max_panels: 256 };
        let mut f = vec![0.0; n];
        let mut slope_lo = vec![0.0; n - 1];
        let mut slope_hi = vec![0.0; n - 1];
        let m = |x: f64| form.intensity(x);
        for i in 1..n {
            let (a, b) = (grid[i - 1], grid[i]);
            f[i] = match form.closed_cumulative(b) {
                Some(v) => v,
                None if a < form.t => {
                    form.closed_cumulative(form.t).unwrap_or(0.0) + quad.integrate(m, form.t, b, &[])?.value
                }
                None => f[i - 1] + quad.integrate(m, a, b, &[])?.value,
            };
            let (l, r) = nudge(a, b);
            slope_lo[i - 1] = m(l);
            slope_hi[i - 1] = m(r);
        }
        Ok(Stream { f, slope_lo, slope_hi, leaf: Some(form) })
    }
}

/// What a node forwards to its parent, per stratum and volume node.
struct Outflow {
    t_c: f64,
    streams: Vec<Option<Arc<Vec<Stream>>>>,
}

/// Leaf streams keyed by class, ingress share and characteristic time.
type StreamCache = HashMap<(usize, u64, u64), Arc<Vec<Stream>>>;

/// Shared age grid: fine where any profile still has mass, refined
/// geometrically after the origin, the profile kinks and the leaf windows.
fn age_grid(profiles: &[PopularityProfile], leaf_ts: &[f64]) -> Result<Vec<f64>> {
    let t_max = leaf_ts.iter().copied().filter(|t| t.is_finite()).fold(0.0, f64::max);
    let reach: Vec<f64> = profiles
        .iter()
        .map(|p| p.tail_age(TAIL_MASS).min(MAX_TAIL_SCALES * p.delta()) + t_max)
        .collect();
    let end = reach.iter().copied().fold(0.0, f64::max);
    let delta_min = profiles.iter().map(|p| p.delta()).fold(f64::INFINITY, f64::min);
    let mut pts = vec![0.0, end];
    let mut x: f64 = 0.0;
    while x < end {
        let step = profiles
            .iter()
            .zip(&reach)
            .filter(|(_, &r)| x < r)
            .map(|(p, _)| match p.kind() {
                ProfileKind::PowerLaw => (x + p.delta()) / STEPS_PER_SCALE,
                _ => p.delta() / STEPS_PER_SCALE,
            })
            .fold(f64::INFINITY, f64::min);
        if !step.is_finite() {
            break;
        }
        x += step;
        pts.push(x.min(end));
        if pts.len() > MAX_GRID_POINTS {
            return Err(SnmError::invalid(format!(
                "age grid exceeds {MAX_GRID_POINTS} points; profile scales differ too much"
            )));
        }
    }
    let mut anchors = vec![0.0];
    for p in profiles {
        anchors.extend(p.kinks());
    }
    for &t in leaf_ts.iter().filter(|t| t.is_finite() && **t > 0.0) {
        let base = anchors.clone();
        anchors.extend(base.iter().map(|k| k + t));
        pts.extend((0..=12).map(|k| t + t * 0.5f64.powi(k)));
    }
    for a in anchors {
        pts.push(a);
        pts.extend((5..=40).map(|k| a + delta_min * 0.5f64.powi(k)));
    }
    pts.retain(|&x| (0.0..=end).contains(&x));
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|b, a| (*b - *a) <= 1e-13 * a.abs().max(1e-300));
    Ok(pts)
}

/// Sorted union of `grid + shift` over `shifts`, clipped to `[lo, hi]`.
fn partition(grid: &[f64], shifts: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let mut pts = vec![lo, hi];
    for &s in shifts.iter().filter(|s| s.is_finite()) {
        pts.extend(grid.iter().map(|g| g + s).filter(|&x| x > lo && x < hi));
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

struct Rule {
    x: Vec<f64>,
    w: Vec<f64>,
}

impl Rule {
    fn new(n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        Rule { x, w }
    }

    /// Composite rule over consecutive points of `pts`.
    fn integrate(&self, pts: &[f64], mut f: impl FnMut(f64) -> f64) -> f64 {
        let mut total = 0.0;
        for pair in pts.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            let mut s = 0.0;
            for (x, w) in self.x.iter().zip(&self.w) {
                s += w * f(mid + half * x);
            }
            total += half * s;
        }
        total
    }
}

/// Children of one parent that forward identical streams.
struct Group {
    count: f64,
    outflow: Arc<Outflow>,
}

/// Input of one `(stratum, v)` pair at a parent.
struct Input<'a> {
    weight: f64,
    parts: Vec<(f64, f64, &'a Stream)>,
}

impl Input<'_> {
    fn cumulative(&self, grid: &[f64], x: f64) -> f64 {
        self.parts.iter().map(|(n, _, s)| n * s.cumulative(grid, x)).sum()
    }

    fn end(&self) -> f64 {
        self.parts.iter().map(|(n, _, s)| n * s.end()).sum()
    }
}

pub struct NetworkModel {
    gamma: f64,
    strata: Vec<Stratum>,
    topology: CacheTopology,
    mode: NetworkMode,
    volume_nodes: usize,
}

impl NetworkModel {
    pub fn new(config: &TrafficConfig, topology: &CacheTopology) -> Result<Self> {
        Self::with_options(config, topology, NetworkMode::default(), &FilterPolicy::default(), DEFAULT_VOLUME_NODES)
    }

    pub fn with_options(
        config: &TrafficConfig,
        topology: &CacheTopology,
        mode: NetworkMode,
        filter: &FilterPolicy,
        volume_nodes: usize,
    ) -> Result<Self> {
        config.validate()?;
        for label in &filter.labels {
            if config.class_index(label).is_none() {
                return Err(SnmError::invalid(format!("filter names unknown class {label:?}")));
            }
        }
        if volume_nodes == 0 {
            return Err(SnmError::invalid("volume grid needs at least one node"));
        }
        let atoms = config.ingress.atoms(topology.leaves().len())?;
        let mut strata = Vec::new();
        for (ci, class) in config.classes.iter().enumerate() {
            let kernel = VolumeKernel::shared(&class.volumes)?;
            let volumes = volume_grid(&class.volumes, volume_nodes);
            for atom in &atoms {
                let weight = class.weight * atom.weight;
                if weight > 0.0 {
                    strata.push(Stratum {
                        label: class.label.clone(),
                        class: ci,
                        weight,
                        split: atom.split.clone(),
                        profile: class.profile,
                        kernel: kernel.clone(),
                        cacheable: class.cacheable && !filter.labels.contains(&class.label),
                        volumes: volumes.clone(),
                    });
                }
            }
        }
        Ok(NetworkModel { gamma: config.gamma, strata, topology: topology.clone(), mode, volume_nodes })
    }

    pub fn mode(&self) -> NetworkMode {
        self.mode
    }

    pub fn volume_nodes(&self) -> usize {
        self.volume_nodes
    }

    /// Exact single-cache model of one leaf.
    pub fn leaf_model(&self, leaf: NodeId) -> Result<CheModel> {
        let f = self.topology.leaf_index(leaf).ok_or(SnmError::NotALeaf(leaf))?;
        let terms = self
            .strata
            .iter()
            .filter(|s| s.split[f] > 0.0)
            .map(|s| Term {
                label: s.label.clone(),
                weight: s.weight,
                profile: s.profile,
                kernel: s.kernel.clone(),
                scale: s.split[f],
                cacheable: s.cacheable,
            })
            .collect();
        CheModel::new(self.gamma, terms)
    }

    fn total_requests_per_content(&self) -> f64 {
        self.strata.iter().map(|s| s.weight * s.kernel.mean()).sum()
    }

    pub fn solve(&self) -> Result<NetworkSolution> {
        let topo = &self.topology;
        let total = self.total_requests_per_content();
        let order = topo.bottom_up();

        // Leaves first: exact characteristic times.
        let mut leaf_t = HashMap::new();
        let mut solutions: HashMap<NodeId, NodeSolution> = HashMap::new();
        // Filtered requests per content arrival passing through each node.
        let mut filtered: HashMap<NodeId, f64> = HashMap::new();
        for &leaf in topo.leaves() {
            let model = self.leaf_model(leaf)?;
            let sol = model.solve_tc(topo.capacity(leaf) as f64)?;
            let requests = model.requests_per_content();
            let hits = model.hits_per_content(sol.t_c)?;
            let f = topo.leaf_index(leaf).expect("leaf");
            let pass: f64 =
                self.strata.iter().filter(|s| !s.cacheable).map(|s| s.weight * s.split[f] * s.kernel.mean()).sum();
            filtered.insert(leaf, pass);
            leaf_t.insert(leaf, sol.t_c);
            solutions.insert(
                leaf,
                NodeSolution {
                    node: leaf,
                    capacity: topo.capacity(leaf),
                    t_c: sol.t_c,
                    never_fills: sol.never_fills,
                    request_rate: self.gamma * requests,
                    hit_rate: self.gamma * hits,
                    hit_ratio: if requests > 0.0 { hits / requests } else { 0.0 },
                    global_share: if total > 0.0 { hits / total } else { 0.0 },
                },
            );
        }

        if topo.nodes().len() > 1 {
            let ts: Vec<f64> = leaf_t.values().copied().collect();
            let profiles: Vec<PopularityProfile> =
                self.strata.iter().filter(|s| s.cacheable).map(|s| s.profile).collect();
            let grid = if profiles.is_empty() { vec![0.0, 1.0] } else { age_grid(&profiles, &ts)? };
            let rule = Rule::new(5);

            // Identical leaves share their streams.
            let mut leaf_cache: HashMap<Vec<u64>, Arc<Outflow>> = HashMap::new();
            let mut stream_cache = StreamCache::new();
            let mut outflows: HashMap<NodeId, Arc<Outflow>> = HashMap::new();
            for &leaf in topo.leaves() {
                let f = topo.leaf_index(leaf).expect("leaf");
                let t = leaf_t[&leaf];
                let mut key = vec![t.to_bits()];
                key.extend(self.strata.iter().map(|s| s.split[f].to_bits()));
                let out = match leaf_cache.get(&key) {
                    Some(o) => o.clone(),
                    None => {
                        let o = Arc::new(self.leaf_outflow(&grid, f, t, &mut stream_cache)?);
                        leaf_cache.insert(key, o.clone());
                        o
                    }
                };
                outflows.insert(leaf, out);
            }

            for &id in order.iter().filter(|&&id| !topo.is_leaf(id)) {
                let node = topo.node(id).expect("node");
                let mut groups: Vec<Group> = Vec::new();
                let mut pass = 0.0;
                for &c in &node.children {
                    pass += filtered[&c];
                    let out = outflows[&c].clone();
                    match groups.iter_mut().find(|g| Arc::ptr_eq(&g.outflow, &out)) {
                        Some(g) => g.count += 1.0,
                        None => groups.push(Group { count: 1.0, outflow: out }),
                    }
                }
                filtered.insert(id, pass);
                let needs_outflow = topo.parent(id).is_some();
                let (sol, out) = self.solve_parent(&grid, &rule, node.id, node.capacity, &groups, needs_outflow)?;
                let requests = sol.request_rate / self.gamma + pass;
                let hits = sol.hit_rate / self.gamma;
                solutions.insert(
                    id,
                    NodeSolution {
                        request_rate: self.gamma * requests,
                        hit_ratio: if requests > 0.0 { hits / requests } else { 0.0 },
                        global_share: if total > 0.0 { hits / total } else { 0.0 },
                        ..sol
                    },
                );
                if let Some(out) = out {
                    outflows.insert(id, Arc::new(out));
                }
            }
        }

        let nodes: Vec<NodeSolution> = order.iter().map(|id| solutions[id]).collect();
        let hits: f64 = nodes.iter().map(|n| n.hit_rate).sum();
        let request_rate = self.gamma * total;
        Ok(NetworkSolution {
            mode: self.mode,
            global_hit_ratio: if request_rate > 0.0 { (hits / request_rate).clamp(0.0, 1.0) } else { 0.0 },
            request_rate,
            nodes,
        })
    }

    fn leaf_outflow(&self, grid: &[f64], f: usize, t: f64, cache: &mut StreamCache) -> Result<Outflow> {
        let mut streams = Vec::with_capacity(self.strata.len());
        for s in &self.strata {
            let p = s.split[f];
            if !s.cacheable || p == 0.0 {
                streams.push(None);
                continue;
            }
            let key = (s.class, p.to_bits(), t.to_bits());
            if let Some(shared) = cache.get(&key) {
                streams.push(Some(shared.clone()));
                continue;
            }
            let per_v = Arc::new(
                s.volumes
                    .iter()
                    .map(|&(v, _)| Stream::for_leaf(grid, LeafForm { rate: v * p, t, profile: s.profile }))
                    .collect::<Result<Vec<_>>>()?,
            );
            cache.insert(key, per_v.clone());
            streams.push(Some(per_v));
        }
        Ok(Outflow { t_c: t, streams })
    }

    /// Inputs per `(stratum, v)`, in stratum order. Strata whose input is
    /// made of the very same streams are folded into one entry; the result
    /// lists, per stratum, the position of each of its volume nodes.
    fn inputs<'a>(&'a self, groups: &'a [Group]) -> (Vec<Input<'a>>, Vec<Option<usize>>) {
        let mut inputs: Vec<Input<'a>> = Vec::new();
        let mut first = vec![None; self.strata.len()];
        let mut seen: HashMap<Vec<(u64, usize)>, usize> = HashMap::new();
        for (k, s) in self.strata.iter().enumerate() {
            let signature: Vec<(u64, usize)> = groups
                .iter()
                .filter_map(|g| g.outflow.streams[k].as_ref().map(|v| (g.count.to_bits(), Arc::as_ptr(v) as usize)))
                .collect();
            if signature.is_empty() {
                continue;
            }
            if let Some(&start) = seen.get(&signature) {
                for (j, &(_, prob)) in s.volumes.iter().enumerate() {
                    inputs[start + j].weight += s.weight * prob;
                }
                first[k] = Some(start);
                continue;
            }
            seen.insert(signature, inputs.len());
            first[k] = Some(inputs.len());
            for (j, &(_, prob)) in s.volumes.iter().enumerate() {
                let parts: Vec<(f64, f64, &Stream)> = groups
                    .iter()
                    .filter_map(|g| {
                        g.outflow.streams[k].as_ref().map(|per_v| (g.count, g.outflow.t_c, &per_v[j]))
                    })
                    .collect();
                inputs.push(Input { weight: s.weight * prob, parts });
            }
        }
        (inputs, first)
    }

    /// Expected occupancy per content arrival at characteristic time `t`.
    fn occupancy(&self, grid: &[f64], rule: &Rule, inputs: &[Input], t: f64) -> f64 {
        let end = grid[grid.len() - 1];
        let pts = partition(grid, &[0.0, t], 0.0, end + t);
        let mut total = 0.0;
        for input in inputs {
            let occ = rule.integrate(&pts, |x| {
                let d = input.cumulative(grid, x) - input.cumulative(grid, x - t);
                -(-d.max(0.0)).exp_m1()
            });
            total += input.weight * occ;
        }
        total
    }

    /// Probability that a request forwarded by a child with characteristic
    /// time `t_child` hits a parent with characteristic time `t`.
    fn conditional_hit(&self, grid: &[f64], input: &Input, stream: &Stream, t_child: f64, t: f64, x: f64) -> f64 {
        let window = input.cumulative(grid, x) - input.cumulative(grid, x - t);
        let exponent = match self.mode {
            NetworkMode::Poisson => window,
            NetworkMode::Improved => {
                let m = t_child.min(t);
                window - (stream.cumulative(grid, x) - stream.cumulative(grid, x - m))
            }
        };
        -(-exponent.max(0.0)).exp_m1()
    }

    fn solve_parent(
        &self,
        grid: &[f64],
        rule: &Rule,
        id: NodeId,
        capacity: u64,
        groups: &[Group],
        needs_outflow: bool,
    ) -> Result<(NodeSolution, Option<Outflow>)> {
        let (inputs, first) = self.inputs(groups);
        let inflow: f64 = inputs.iter().map(|i| i.weight * i.end()).sum();
        let c = capacity as f64;
        let (t, never_fills) = if capacity == 0 {
            (0.0, false)
        } else if !(inflow > 0.0) {
            (f64::INFINITY, true)
        } else {
            self.solve_parent_tc(grid, rule, &inputs, c / self.gamma, inflow)?
        };

        let end = grid[grid.len() - 1];
        let mut hits = 0.0;
        let mut miss_streams: Vec<Option<Arc<Vec<Stream>>>> = vec![None; self.strata.len()];
        let mut shifts = vec![0.0, t];
        shifts.extend(groups.iter().map(|g| g.outflow.t_c.min(t)));
        let pts = partition(grid, &shifts, 0.0, end);
        if t > 0.0 {
            for input in &inputs {
                let mut h = 0.0;
                for &(n, t_child, stream) in &input.parts {
                    h += n * rule.integrate(&pts, |x| {
                        stream.intensity(grid, x) * self.conditional_hit(grid, input, stream, t_child, t, x)
                    });
                }
                hits += input.weight * h;
            }
        }
        if needs_outflow {
            let mut built: HashMap<usize, Arc<Vec<Stream>>> = HashMap::new();
            for (k, s) in self.strata.iter().enumerate() {
                let Some(start) = first[k] else { continue };
                if let Some(shared) = built.get(&start) {
                    miss_streams[k] = Some(shared.clone());
                    continue;
                }
                let mut per_v = Vec::with_capacity(s.volumes.len());
                for j in 0..s.volumes.len() {
                    let input = &inputs[start + j];
                    let miss = |x: f64| -> f64 {
                        input
                            .parts
                            .iter()
                            .map(|&(n, t_child, stream)| {
                                let p = if t > 0.0 { self.conditional_hit(grid, input, stream, t_child, t, x) } else { 0.0 };
                                n * stream.intensity(grid, x) * (1.0 - p)
                            })
                            .sum()
                    };
                    per_v.push(tabulate(grid, &pts, rule, miss));
                }
                let per_v = Arc::new(per_v);
                built.insert(start, per_v.clone());
                miss_streams[k] = Some(per_v);
            }
        }
        let sol = NodeSolution {
            node: id,
            capacity,
            t_c: t,
            never_fills,
            request_rate: self.gamma * inflow,
            hit_rate: self.gamma * hits,
            hit_ratio: 0.0,
            global_share: 0.0,
        };
        let out = needs_outflow.then_some(Outflow { t_c: t, streams: miss_streams });
        Ok((sol, out))
    }

    /// Root of `occupancy(T) = target` (both per content arrival), by
    /// doubling from the bound `T ≥ target/inflow` and Illinois steps in
    /// `ln T`.
    fn solve_parent_tc(&self, grid: &[f64], rule: &Rule, inputs: &[Input], target: f64, inflow: f64) -> Result<(f64, bool)> {
        let g = |t: f64| self.occupancy(grid, rule, inputs, t) - target;
        let mut lo = target / inflow;
        let mut g_lo = g(lo);
        if g_lo >= 0.0 {
            return Ok((lo, false));
        }
        let mut hi = 2.0 * lo;
        let mut g_hi = g(hi);
        let mut doublings = 0;
        while g_hi < 0.0 {
            lo = hi;
            g_lo = g_hi;
            hi *= 2.0;
            g_hi = g(hi);
            doublings += 1;
            if doublings > MAX_DOUBLINGS {
                log::warn!("parent cache never fills: occupancy stays below {target} per content");
                return Ok((f64::INFINITY, true));
            }
        }
        let (mut a, mut b) = (lo.ln(), hi.ln());
        let (mut fa, mut fb) = (g_lo, g_hi);
        let mut side = 0;
        for _ in 0..200 {
            let x = (a * fb - b * fa) / (fb - fa);
            let x = if x.is_finite() && x > a && x < b { x } else { 0.5 * (a + b) };
            let fx = g(x.exp());
            if fx.abs() <= SOLVE_REL_TOL * target || (b - a) < 1e-14 {
                return Ok((x.exp(), false));
            }
            if fx < 0.0 {
                a = x;
                fa = fx;
                if side == -1 {
                    fb *= 0.5;
                }
                side = -1;
            } else {
                b = x;
                fb = fx;
                if side == 1 {
                    fa *= 0.5;
                }
                side = 1;
            }
        }
        Err(SnmError::RootFinding(format!("parent characteristic time did not converge for occupancy {target}")))
    }
}

/// Tabulates `F(τ) = ∫₀^τ M` on `grid`, integrating over the finer `pts`.
fn tabulate(grid: &[f64], pts: &[f64], rule: &Rule, m: impl Fn(f64) -> f64) -> Stream {
    let n = grid.len();
    let mut f = vec![0.0; n];
    let mut slope_lo = vec![0.0; n - 1];
    let mut slope_hi = vec![0.0; n - 1];
    let mut acc = 0.0;
    let mut j = 0;
    for i in 1..n {
        while j + 1 < pts.len() && pts[j + 1] <= grid[i] {
            acc += rule.integrate(&pts[j..j + 2], &m);
            j += 1;
        }
        f[i] = acc;
        let (l, r) = nudge(grid[i - 1], grid[i]);
        slope_lo[i - 1] = m(l);
        slope_hi[i - 1] = m(r);
    }
    Stream { f, slope_lo, slope_hi, leaf: None }
}

pub fn solve_network(config: &TrafficConfig, topology: &CacheTopology, mode: NetworkMode) -> Result<NetworkSolution> {
    NetworkModel::with_options(config, topology, mode, &FilterPolicy::default(), 64)?.solve()
}

/// Fraction of requests served anywhere in the tree.
pub fn global_hit_probability(config: &TrafficConfig, topology: &CacheTopology, mode: NetworkMode) -> Result<f64> {
    Ok(solve_network(config, topology, mode)?.global_hit_ratio)
}
