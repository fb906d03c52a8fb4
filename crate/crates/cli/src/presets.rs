//! Reference experiments: the single-class curves, the six-class mixes with
//! filtering, and the tree capacity-allocation sweep.

use anyhow::Result;
use rayon::prelude::*;
use serde_json::{json, Value};

use snm_core::analytic::{global_hit_probability, AllocationRow, CheModel, NetworkMode};
use snm_core::model::TrafficConfig;
use snm_core::scenarios::{
    self, allocation, class_mix, scale_capacity, simulated_curve, MixScenario, FIG6_BETAS, FIG6_LIFE_SPANS,
    TREE_BUDGETS, TREE_LEAF_FRACTIONS,
};
use snm_core::sim::{replicate_sim, run_seed, FilterPolicy};
use snm_core::stats::ConfidenceInterval;

use crate::output::{table, Output};
use crate::svg::{Chart, Series};
use crate::{Common, Preset};

const DEFAULT_SEED: u64 = 1;
/// The class mixes produce about ten times more requests per day than the
/// single-class presets.
const FIG7_DEFAULT_SCALE: f64 = 10.0;
pub const FIG7_FILTER: [&str; 2] = ["0", "5"];

impl Preset {
    fn name(self) -> &'static str {
        match self {
            Preset::Fig6 => "fig6",
            Preset::Fig7 => "fig7",
            Preset::Fig8 => "fig8",
        }
    }

    fn default_scale(self) -> f64 {
        match self {
            Preset::Fig7 => FIG7_DEFAULT_SCALE,
            Preset::Fig6 | Preset::Fig8 => 1.0,
        }
    }
}

struct Settings {
    scale: f64,
    seed: u64,
    reps: usize,
}

impl Settings {
    fn seeded(&self, mut config: TrafficConfig) -> TrafficConfig {
        config.seed = self.seed;
        config
    }

    fn seeds(&self) -> Vec<u64> {
        (0..self.reps).map(|i| run_seed(self.seed, i)).collect()
    }

    /// Simulated points, or `None` everywhere when simulation is disabled.
    fn simulate(
        &self,
        config: &TrafficConfig,
        capacities: &[u64],
        filter: Option<&FilterPolicy>,
    ) -> Result<Vec<Option<ConfidenceInterval>>> {
        if self.reps == 0 {
            return Ok(vec![None; capacities.len()]);
        }
        Ok(simulated_curve(config, capacities, self.reps, filter)?.into_iter().map(Some).collect())
    }
}

fn opt_ci(ci: &Option<ConfidenceInterval>) -> (String, String) {
    match ci {
        Some(c) => (c.mean.to_string(), c.half_width.to_string()),
        None => (String::new(), String::new()),
    }
}

pub fn run(common: &Common, preset: Preset) -> Result<()> {
    let settings = Settings {
        scale: common.scale.unwrap_or(preset.default_scale()),
        seed: common.seed.unwrap_or(DEFAULT_SEED),
        reps: common.reps,
    };
    let mut out = Output::create(&common.out, common.format)?;
    let inputs = match preset {
        Preset::Fig6 => fig6(&settings, &mut out)?,
        Preset::Fig7 => fig7(&settings, &mut out)?,
        Preset::Fig8 => fig8(&settings, &mut out)?,
    };
    let arguments = json!({ "common": common, "preset": preset.name(), "scale": settings.scale, "seed": settings.seed });
    out.finish(preset.name(), arguments, settings.seeds(), inputs)
}

/// One model-and-simulation curve at scaled capacities.
struct CurvePoints {
    capacity: f64,
    capacity_scaled: u64,
    t_c: f64,
    p_hit: f64,
    p_small: f64,
    p_large: f64,
    sim: Option<ConfidenceInterval>,
}

fn curve(
    settings: &Settings,
    config: &TrafficConfig,
    capacities: &[f64],
    filter: Option<&FilterPolicy>,
) -> Result<Vec<CurvePoints>> {
    let scaled: Vec<u64> = capacities.iter().map(|&c| scale_capacity(c, settings.scale)).collect();
    let mut model = CheModel::from_config(config)?;
    if let Some(f) = filter {
        model = model.with_filter(f)?;
    }
    let rows = model.curve(&scaled.iter().map(|&c| c as f64).collect::<Vec<_>>())?;
    let sims = settings.simulate(config, &scaled, filter)?;
    Ok(rows
        .into_iter()
        .zip(sims)
        .zip(capacities.iter().zip(&scaled))
        .map(|((row, sim), (&capacity, &capacity_scaled))| CurvePoints {
            capacity,
            capacity_scaled,
            t_c: row.t_c,
            p_hit: row.p_hit,
            p_small: row.p_hit_small_approx,
            p_large: row.p_hit_large_asymptote,
            sim,
        })
        .collect())
}

fn curve_series(name: &str, colour: usize, points: &[CurvePoints]) -> Vec<Series> {
    let mut out = vec![Series::line(format!("{name} model"), colour, points.iter().map(|p| (p.capacity, p.p_hit)).collect())];
    let sim: Vec<(f64, f64)> = points.iter().filter_map(|p| p.sim.map(|s| (p.capacity, s.mean))).collect();
    if !sim.is_empty() {
        out.push(Series::line(format!("{name} sim"), colour, sim).markers());
    }
    out
}

fn hit_chart(title: &str, series: Vec<Series>) -> Chart {
    Chart {
        title: title.into(),
        x_label: "cache size (contents)".into(),
        y_label: "hit probability".into(),
        log_x: true,
        log_y: false,
        series,
    }
}

fn fig6(settings: &Settings, out: &mut Output) -> Result<Value> {
    let capacities = scenarios::single_class_capacities();
    let cases: Vec<(f64, f64)> =
        FIG6_LIFE_SPANS.iter().flat_map(|&l| FIG6_BETAS.iter().map(move |&b| (l, b))).collect();
    let configs = cases
        .iter()
        .map(|&(l, b)| Ok(settings.seeded(scenarios::single_class(l, b, settings.scale)?)))
        .collect::<Result<Vec<_>>>()?;
    let curves = configs
        .par_iter()
        .map(|c| curve(settings, c, &capacities, None))
        .collect::<Result<Vec<_>>>()?;

    let mut lines = Vec::new();
    for (&(l, b), points) in cases.iter().zip(&curves) {
        for p in points {
            let (sim, ci) = opt_ci(&p.sim);
            lines.push(format!(
                "{l},{b},{},{},{},{},{},{},{sim},{ci}",
                p.capacity, p.capacity_scaled, p.t_c, p.p_hit, p.p_small, p.p_large
            ));
        }
    }
    out.csv(
        "fig6.csv",
        &table(
            "L_days,beta,capacity,capacity_scaled,T_C_days,p_hit,p_hit_small_approx,p_hit_large_asymptote,p_hit_sim,ci",
            lines,
        ),
    )?;

    let mut by_life_span = Vec::new();
    let mut by_beta = Vec::new();
    for (i, (&(l, b), points)) in cases.iter().zip(&curves).enumerate() {
        if b == 3.0 {
            by_life_span.extend(curve_series(&format!("L={l}"), i, points));
        }
        if l == 7.0 {
            by_beta.extend(curve_series(&format!("beta={b}"), i, points));
        }
    }
    out.chart("fig6a.svg", &hit_chart("Life-span, Pareto beta = 3", by_life_span))?;
    out.chart("fig6b.svg", &hit_chart("Volume exponent, L = 7 days", by_beta))?;
    Ok(json!({ "configs": configs, "capacities": capacities }))
}

fn fig7(settings: &Settings, out: &mut Output) -> Result<Value> {
    let capacities = scenarios::class_mix_capacities();
    let filter = FilterPolicy::new(FIG7_FILTER);
    let configs = MixScenario::ALL
        .iter()
        .map(|&s| Ok(settings.seeded(class_mix(s, settings.scale)?)))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, bool)> = (0..configs.len()).flat_map(|i| [(i, false), (i, true)]).collect();
    let curves = jobs
        .par_iter()
        .map(|&(i, filtered)| curve(settings, &configs[i], &capacities, filtered.then_some(&filter)))
        .collect::<Result<Vec<_>>>()?;

    let policy = |filtered: bool| if filtered { "lru-0+5" } else { "lru" };
    let mut lines = Vec::new();
    for (&(i, filtered), points) in jobs.iter().zip(&curves) {
        for p in points {
            let (sim, ci) = opt_ci(&p.sim);
            lines.push(format!(
                "{},{},{},{},{},{},{sim},{ci}",
                MixScenario::ALL[i].label(),
                policy(filtered),
                p.capacity,
                p.capacity_scaled,
                p.t_c,
                p.p_hit
            ));
        }
    }
    out.csv("fig7.csv", &table("scenario,policy,capacity,capacity_scaled,T_C_days,p_hit,p_hit_sim,ci", lines))?;

    let mut plain = Vec::new();
    let mut filtered_series = Vec::new();
    for (&(i, filtered), points) in jobs.iter().zip(&curves) {
        let name = MixScenario::ALL[i].label();
        if filtered {
            let mut s = curve_series(&format!("{name} filtered"), i, points);
            s[0] = s[0].clone().dashed();
            filtered_series.extend(s);
        } else {
            plain.extend(curve_series(name, i, points));
            filtered_series.push(Series::line(name, i, points.iter().map(|p| (p.capacity, p.p_hit)).collect()));
        }
    }
    out.chart("fig7a.svg", &hit_chart("Class mixes, plain LRU", plain))?;
    out.chart("fig7b.svg", &hit_chart("Class mixes, LRU with classes 0 and 5 filtered", filtered_series))?;
    Ok(json!({ "configs": configs, "capacities": capacities, "filter": FIG7_FILTER }))
}

fn fig8(settings: &Settings, out: &mut Output) -> Result<Value> {
    let mut configs = Vec::new();
    for localized in [false, true] {
        let config = settings.seeded(scenarios::tree_traffic(localized, settings.scale)?);
        let name = if localized { "localized" } else { "unlocalized" };
        let points: Vec<(u64, f64)> = TREE_BUDGETS
            .iter()
            .flat_map(|&b| TREE_LEAF_FRACTIONS.iter().map(move |&f| (b, f)))
            .collect();
        let rows = points
            .par_iter()
            .map(|&(b, f)| {
                let a = allocation(scale_capacity(b as f64, settings.scale), f)?;
                let model = global_hit_probability(&config, &a.topology, NetworkMode::Improved)?;
                let sim = if settings.reps > 0 {
                    Some(replicate_sim(&config, &a.topology, settings.reps, None)?.global)
                } else {
                    None
                };
                Ok(AllocationRow {
                    alloc_label: a.label,
                    leaf_capacity: a.leaf_capacity,
                    root_capacity: a.root_capacity,
                    global_phit_model: model,
                    global_phit_sim: sim.map(|s| s.mean),
                    ci: sim.map(|s| s.half_width),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        out.csv(&format!("fig8_{name}.csv"), &table(AllocationRow::CSV_HEADER, rows.iter().map(AllocationRow::csv_line)))?;

        let mut series = Vec::new();
        for (bi, &b) in TREE_BUDGETS.iter().enumerate() {
            let chunk = &rows[bi * TREE_LEAF_FRACTIONS.len()..(bi + 1) * TREE_LEAF_FRACTIONS.len()];
            let model = TREE_LEAF_FRACTIONS.iter().zip(chunk).map(|(&f, r)| (f, r.global_phit_model)).collect();
            series.push(Series::line(format!("C={b}"), bi, model));
            let sim: Vec<(f64, f64)> =
                TREE_LEAF_FRACTIONS.iter().zip(chunk).filter_map(|(&f, r)| r.global_phit_sim.map(|s| (f, s))).collect();
            if !sim.is_empty() {
                series.push(Series::line(format!("C={b} sim"), bi, sim).markers());
            }
        }
        let chart = Chart {
            title: format!("Eight-leaf tree, {name} traffic"),
            x_label: "share of the budget in the leaves".into(),
            y_label: "global hit probability".into(),
            log_x: false,
            log_y: false,
            series,
        };
        out.chart(&format!("fig8_{name}.svg"), &chart)?;
        configs.push(config);
    }
    Ok(json!({ "configs": configs, "budgets": TREE_BUDGETS, "leaf_fractions": TREE_LEAF_FRACTIONS }))
}
