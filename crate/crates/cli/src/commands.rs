//! The single-purpose subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use snm_core::analytic::{CheModel, ClassWeighting, CurveRow, NetworkMode, NetworkModel, DEFAULT_VOLUME_NODES};
use snm_core::fit::{classify, estimate_stats, fit_config, FitOptions};
use snm_core::model::{CacheTopology, ProfileKind, TrafficConfig};
use snm_core::scenarios::{self, scale_capacity, ShuffleRow, SHUFFLE_SLICE_DAYS};
use snm_core::sim::{replicate_sim, run_seed, simulate_tree, FilterPolicy, SimOptions, SimResult};
use snm_core::tracegen::{self, RequestTrace};

use crate::output::{table, Output};
use crate::svg::{Chart, Series};
use crate::Common;

/// Capacity of the single cache used when no topology is given.
const DEFAULT_CAPACITY: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Improved,
    Poisson,
}

impl From<ModeArg> for NetworkMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Improved => NetworkMode::Improved,
            ModeArg::Poisson => NetworkMode::Poisson,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightingArg {
    RequestRate,
    ContentShare,
}

impl From<WeightingArg> for ClassWeighting {
    fn from(w: WeightingArg) -> Self {
        match w {
            WeightingArg::RequestRate => ClassWeighting::RequestRate,
            WeightingArg::ContentShare => ClassWeighting::ContentShare,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileArg {
    Uniform,
    Exponential,
    PowerLaw,
}

impl From<ProfileArg> for ProfileKind {
    fn from(p: ProfileArg) -> Self {
        match p {
            ProfileArg::Uniform => ProfileKind::Uniform,
            ProfileArg::Exponential => ProfileKind::Exponential,
            ProfileArg::PowerLaw => ProfileKind::PowerLaw,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct GenerateArgs {
    /// Traffic config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Cache topology (JSON); its leaves are the ingress points.
    #[arg(long)]
    pub topology: Option<PathBuf>,
    /// Name of the trace file; a `.gz` suffix compresses it.
    #[arg(long, default_value = "trace.csv")]
    pub name: String,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, required_unless_present = "trace")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub topology: Option<PathBuf>,
    /// Replay this trace once instead of generating traces.
    #[arg(long, conflicts_with = "config")]
    pub trace: Option<PathBuf>,
    /// Capacity of the single cache used without a topology.
    #[arg(long, default_value_t = DEFAULT_CAPACITY)]
    pub capacity: u64,
    /// Class labels never admitted to any cache.
    #[arg(long, value_delimiter = ',')]
    pub filter: Vec<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct SolveArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// A tree topology selects the network model.
    #[arg(long)]
    pub topology: Option<PathBuf>,
    /// Single-cache capacities to evaluate, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub capacities: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub filter: Vec<String>,
    #[arg(long, value_enum, default_value_t = ModeArg::Improved)]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value_t = WeightingArg::RequestRate)]
    pub weighting: WeightingArg,
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    #[arg(long)]
    pub trace: PathBuf,
    #[arg(long, value_enum, default_value_t = ProfileArg::Exponential)]
    pub profile: ProfileArg,
    /// Power-law exponent.
    #[arg(long)]
    pub zeta: Option<f64>,
    /// Trace horizon in days; read from the trace when omitted.
    #[arg(long)]
    pub horizon: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct ShuffleArgs {
    /// Traffic config; defaults to one class with a 7-day uniform profile.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = scenarios::SHUFFLE_TARGET)]
    pub target: f64,
}

fn check_scale(common: &Common) -> Result<f64> {
    let scale = common.scale.unwrap_or(1.0);
    if !(scale >= 1.0 && scale.is_finite()) {
        return Err(snm_core::SnmError::InvalidParameter(format!("scale divisor must be at least 1, got {scale}")).into());
    }
    Ok(scale)
}

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("{} is not valid JSON", path.display()))
}

/// Loads and validates a config, applies `--seed` and divides `γ` by the
/// scale. Returns the config and the file contents for the manifest.
fn load_config(path: &Path, common: &Common) -> Result<(TrafficConfig, Value)> {
    let raw = read_json(path)?;
    let mut config: TrafficConfig = serde_json::from_value(raw.clone())
        .map_err(snm_core::SnmError::from)
        .with_context(|| format!("invalid config {}", path.display()))?;
    config.validate().with_context(|| format!("invalid config {}", path.display()))?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    config.gamma /= check_scale(common)?;
    Ok((config, raw))
}

/// Loads a topology (or a single cache of `capacity`) with scaled capacities.
fn load_topology(path: Option<&Path>, capacity: u64, common: &Common) -> Result<(CacheTopology, Value)> {
    let scale = check_scale(common)?;
    let (topology, raw) = match path {
        Some(p) => {
            let raw = read_json(p)?;
            let t: CacheTopology = serde_json::from_value(raw.clone())
                .map_err(snm_core::SnmError::from)
                .with_context(|| format!("invalid topology {}", p.display()))?;
            (t, raw)
        }
        None => (CacheTopology::single(capacity), Value::Null),
    };
    Ok((scale_topology(&topology, scale)?, raw))
}

pub fn scale_topology(topology: &CacheTopology, scale: f64) -> Result<CacheTopology> {
    if scale == 1.0 {
        return Ok(topology.clone());
    }
    let nodes = topology
        .nodes()
        .iter()
        .map(|n| {
            let mut n = n.clone();
            n.capacity = scale_capacity(n.capacity as f64, scale);
            n
        })
        .collect();
    Ok(CacheTopology::new(nodes, topology.root())?)
}

fn filter_policy(labels: &[String]) -> Option<FilterPolicy> {
    (!labels.is_empty()).then(|| FilterPolicy::new(labels.iter().cloned()))
}

fn args_json<T: Serialize>(common: &Common, args: &T) -> Value {
    json!({ "common": common, "command": args })
}

pub fn generate(common: &Common, args: &GenerateArgs) -> Result<()> {
    let (config, raw_config) = load_config(&args.config, common)?;
    let (topology, raw_topology) = load_topology(args.topology.as_deref(), DEFAULT_CAPACITY, common)?;
    let trace = tracegen::generate(&config, &topology)?;
    let mut out = Output::create(&common.out, common.format)?;
    trace.save(out.path(&args.name))?;
    out.record(&args.name);
    log::info!("wrote {} requests", trace.len());
    out.finish(
        "generate",
        args_json(common, args),
        vec![config.seed],
        json!({ "config": raw_config, "topology": raw_topology }),
    )
}

const SIM_HEADER: &str = "node_id,capacity,hit_ratio,ci,runs";

pub fn simulate(common: &Common, args: &SimulateArgs) -> Result<()> {
    let (topology, raw_topology) = load_topology(args.topology.as_deref(), args.capacity, common)?;
    let mut out = Output::create(&common.out, common.format)?;
    if let Some(path) = &args.trace {
        if !args.filter.is_empty() {
            bail!(snm_core::SnmError::InvalidParameter("class filters need a config, not a trace".into()));
        }
        let trace = RequestTrace::load(path).with_context(|| format!("cannot load trace {}", path.display()))?;
        let result = simulate_tree(&trace, &topology, &SimOptions::default())?;
        out.csv("simulate.csv", &single_run_table(&result))?;
        return out.finish(
            "simulate",
            args_json(common, args),
            vec![],
            json!({ "trace": path.display().to_string(), "topology": raw_topology }),
        );
    }
    let config_path = args.config.as_ref().context("either --config or --trace is required")?;
    let (config, raw_config) = load_config(config_path, common)?;
    let filter = filter_policy(&args.filter);
    let sim = replicate_sim(&config, &topology, common.reps, filter.as_ref())?;
    let runs = sim.global.n;
    let mut lines: Vec<String> = sim
        .per_node
        .iter()
        .map(|(id, ci)| format!("{id},{},{},{},{runs}", topology.capacity(*id), ci.mean, ci.half_width))
        .collect();
    lines.push(format!("global,{},{},{},{runs}", topology.total_capacity(), sim.global.mean, sim.global.half_width));
    out.csv("simulate.csv", &table(SIM_HEADER, lines))?;
    let seeds = (0..common.reps).map(|i| run_seed(config.seed, i)).collect();
    out.finish("simulate", args_json(common, args), seeds, json!({ "config": raw_config, "topology": raw_topology }))
}

fn single_run_table(result: &SimResult) -> String {
    let mut lines: Vec<String> =
        result.nodes.iter().map(|n| format!("{},{},{},,1", n.node_id, n.capacity, n.hit_ratio)).collect();
    let total: u64 = result.nodes.iter().map(|n| n.capacity).sum();
    lines.push(format!("global,{total},{},,1", result.hit_ratio));
    table(SIM_HEADER, lines)
}

const NETWORK_HEADER: &str = "node_id,capacity,T_C_days,never_fills,request_rate,hit_rate,hit_ratio,global_share";

pub fn solve(common: &Common, args: &SolveArgs) -> Result<()> {
    let scale = check_scale(common)?;
    let (config, raw_config) = load_config(&args.config, common)?;
    let mut out = Output::create(&common.out, common.format)?;
    let filter = filter_policy(&args.filter).unwrap_or_default();
    let topology = match &args.topology {
        Some(_) => Some(load_topology(args.topology.as_deref(), 0, common)?),
        None => None,
    };
    let inputs = json!({ "config": raw_config, "topology": topology.as_ref().map(|t| t.1.clone()) });

    if let Some((topo, _)) = topology.as_ref().filter(|(t, _)| t.nodes().len() > 1) {
        let model = NetworkModel::with_options(&config, topo, args.mode.into(), &filter, DEFAULT_VOLUME_NODES)?;
        let sol = model.solve()?;
        let mut lines: Vec<String> = sol
            .nodes
            .iter()
            .map(|n| {
                format!(
                    "{},{},{},{},{},{},{},{}",
                    n.node, n.capacity, n.t_c, n.never_fills, n.request_rate, n.hit_rate, n.hit_ratio, n.global_share
                )
            })
            .collect();
        lines.push(format!(
            "global,{},,,{},,{},{}",
            topo.total_capacity(),
            sol.request_rate,
            sol.global_hit_ratio,
            sol.global_hit_ratio
        ));
        out.csv("network.csv", &table(NETWORK_HEADER, lines))?;
        return out.finish("solve", args_json(common, args), vec![], inputs);
    }

    // Capacities as the user wrote them; the model sees them divided by the
    // scale, like the arrival rate.
    let capacities: Vec<f64> = if !args.capacities.is_empty() {
        args.capacities.clone()
    } else if let Some((topo, _)) = &topology {
        vec![topo.capacity(topo.root()) as f64 * scale]
    } else {
        scenarios::single_class_capacities()
    };
    let mut model = CheModel::from_config(&config)?.with_weighting(args.weighting.into());
    if !filter.is_empty() {
        model = model.with_filter(&filter)?;
    }
    let scaled: Vec<f64> = capacities.iter().map(|c| c / scale).collect();
    let rows: Vec<CurveRow> = model
        .curve(&scaled)?
        .into_iter()
        .zip(&capacities)
        .map(|(row, &c)| CurveRow { capacity: c, ..row })
        .collect();
    out.csv("solve.csv", &table(CurveRow::CSV_HEADER, rows.iter().map(CurveRow::csv_line)))?;
    out.chart("solve.svg", &curve_chart("Hit probability against cache size", &rows))?;
    out.finish("solve", args_json(common, args), vec![], inputs)
}

fn curve_chart(title: &str, rows: &[CurveRow]) -> Chart {
    let pick = |f: fn(&CurveRow) -> f64| rows.iter().map(|r| (r.capacity, f(r))).collect::<Vec<_>>();
    Chart {
        title: title.into(),
        x_label: "cache size (contents)".into(),
        y_label: "hit probability".into(),
        log_x: true,
        log_y: false,
        series: vec![
            Series::line("model", 0, pick(|r| r.p_hit)),
            Series::line("small-cache law", 1, pick(|r| r.p_hit_small_approx.min(1.0))).dashed(),
            Series::line("large-cache limit", 2, pick(|r| r.p_hit_large_asymptote)).dashed(),
        ],
    }
}

pub fn fit(common: &Common, args: &FitArgs) -> Result<()> {
    let trace = RequestTrace::load(&args.trace).with_context(|| format!("cannot load trace {}", args.trace.display()))?;
    let options = FitOptions { profile: args.profile.into(), zeta: args.zeta, horizon: args.horizon };
    let mut config = fit_config(&trace, &options)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    let partition = classify(&estimate_stats(&trace)?);
    let mut out = Output::create(&common.out, common.format)?;
    out.artifact("fitted_config.json", &(config.to_json()? + "\n"))?;
    out.csv("classes.csv", &partition.to_csv())?;
    out.finish(
        "fit",
        args_json(common, args),
        vec![config.seed],
        json!({ "trace": args.trace.display().to_string() }),
    )
}

pub fn shuffle_study(common: &Common, args: &ShuffleArgs) -> Result<()> {
    let (config, raw) = match &args.config {
        Some(p) => load_config(p, common)?,
        None => {
            let mut c = scenarios::single_class(7.0, 3.0, check_scale(common)?)?;
            c.seed = common.seed.unwrap_or(1);
            let raw = serde_json::to_value(&c)?;
            (c, raw)
        }
    };
    let rows = scenarios::shuffle_study(&config, &SHUFFLE_SLICE_DAYS, args.target, common.reps)?;
    let mut out = Output::create(&common.out, common.format)?;
    out.csv("shuffle.csv", &table(ShuffleRow::CSV_HEADER, rows.iter().map(ShuffleRow::csv_line)))?;
    out.chart("shuffle.svg", &shuffle_chart(&rows, args.target))?;
    let seeds = (0..common.reps).map(|i| run_seed(config.seed, i)).collect();
    out.finish("shuffle-study", args_json(common, args), seeds, json!({ "config": raw }))
}

fn shuffle_chart(rows: &[ShuffleRow], target: f64) -> Chart {
    let shuffled: Vec<(f64, f64)> =
        rows.iter().filter(|r| r.slices > 0.0).map(|r| (r.slices, r.required_capacity.mean)).collect();
    let original = rows.iter().find(|r| r.slices == 0.0).map_or(f64::NAN, |r| r.required_capacity.mean);
    let span = shuffled.iter().map(|p| p.0);
    let (lo, hi) = span.fold((f64::INFINITY, 0.0f64), |(a, b), x| (a.min(x), b.max(x)));
    Chart {
        title: format!("Cache size for hit probability {target}"),
        x_label: "number of shuffled slices".into(),
        y_label: "required cache size".into(),
        log_x: true,
        log_y: true,
        series: vec![
            Series::line("shuffled", 0, shuffled),
            Series::line("original order", 1, vec![(lo, original), (hi, original)]).dashed(),
        ],
    }
}
