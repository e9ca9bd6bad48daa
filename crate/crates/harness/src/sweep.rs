//! Repeated runs over an `(S, m)` grid and their aggregation.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use ntklab::RunStatus;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::report::{emit_plot_data, emit_svg, emit_table};
use crate::run::{execute, read_record, write_record, RunRecord, RunSpec};

/// Environment variable holding the worker count for sweeps.
pub const WORKERS_ENV: &str = "NTKLAB_WORKERS";

pub const CSV_HEADER: &str = "S,m,reps,T_min,T_mean,T_max,kappaH_min,kappaH_mean,kappaH_max,\
D_min,D_mean,D_max,Wdisp_min,Wdisp_mean,Wdisp_max,converged,safety_valve,max_steps";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

impl Stat {
    /// NaN everywhere for an empty sample.
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self { min: f64::NAN, mean: f64::NAN, max: f64::NAN };
        }
        Self {
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            mean: values.iter().sum::<f64>() / values.len() as f64,
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "S")]
    pub s: usize,
    pub m: usize,
    pub reps: usize,
    #[serde(rename = "T")]
    pub t: Stat,
    pub kappa_h: Stat,
    pub d_count: Stat,
    pub w_displacement: Stat,
    pub kappa_d_mean: f64,
    pub kappa_w_mean: f64,
    pub converged: usize,
    pub safety_valve: usize,
    pub max_steps: usize,
    /// Runs that errored before producing a report.
    pub failed: usize,
}

impl SweepRow {
    fn from_reports(s: usize, m: usize, reports: &[&ntklab::RunReport], failed: usize) -> Self {
        let pick = |f: &dyn Fn(&ntklab::RunReport) -> f64| -> Vec<f64> {
            reports.iter().map(|r| f(r)).collect()
        };
        let count = |st: RunStatus| reports.iter().filter(|r| r.status == st).count();
        let nan_if_none = |v: Option<f64>| v.unwrap_or(f64::NAN);
        Self {
            s,
            m,
            reps: reports.len() + failed,
            t: Stat::of(&pick(&|r| r.steps as f64)),
            kappa_h: Stat::of(&pick(&|r| r.kappa_h)),
            d_count: Stat::of(&pick(&|r| nan_if_none(r.d_count.map(|d| d as f64)))),
            w_displacement: Stat::of(&pick(&|r| r.w_displacement)),
            kappa_d_mean: Stat::of(&pick(&|r| nan_if_none(r.kappa_d))).mean,
            kappa_w_mean: Stat::of(&pick(&|r| r.kappa_w)).mean,
            converged: count(RunStatus::Converged),
            safety_valve: count(RunStatus::SafetyValve),
            max_steps: count(RunStatus::MaxSteps),
            failed,
        }
    }
}

/// Groups records by `(S, m)` and summarizes each group in repetition order.
pub fn aggregate(records: &[RunRecord]) -> Vec<SweepRow> {
    aggregate_with_failures(records, &BTreeMap::new())
}

fn aggregate_with_failures(
    records: &[RunRecord],
    failures: &BTreeMap<(usize, usize), usize>,
) -> Vec<SweepRow> {
    let mut groups: BTreeMap<(usize, usize), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.spec.s, r.spec.m)).or_default().push(r);
    }
    for key in failures.keys() {
        groups.entry(*key).or_default();
    }
    groups
        .into_iter()
        .map(|((s, m), mut recs)| {
            recs.sort_by_key(|r| r.spec.repetition);
            let reports: Vec<_> = recs.iter().map(|r| &r.report).collect();
            SweepRow::from_reports(s, m, &reports, failures.get(&(s, m)).copied().unwrap_or(0))
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let cells = [
            r.s.to_string(),
            r.m.to_string(),
            r.reps.to_string(),
            r.t.min.to_string(),
            r.t.mean.to_string(),
            r.t.max.to_string(),
            r.kappa_h.min.to_string(),
            r.kappa_h.mean.to_string(),
            r.kappa_h.max.to_string(),
            r.d_count.min.to_string(),
            r.d_count.mean.to_string(),
            r.d_count.max.to_string(),
            r.w_displacement.min.to_string(),
            r.w_displacement.mean.to_string(),
            r.w_displacement.max.to_string(),
            r.converged.to_string(),
            r.safety_valve.to_string(),
            r.max_steps.to_string(),
        ];
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn worker_count() -> Option<usize> {
    std::env::var(WORKERS_ENV).ok()?.parse().ok().filter(|&w| w > 0)
}

pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub records: Vec<RunRecord>,
}

/// Every `(S, m, repetition)` run spec in output order.
pub fn sweep_specs(cfg: &ExperimentConfig) -> Vec<RunSpec> {
    cfg.cells()
        .into_iter()
        .flat_map(|(s, m)| (0..cfg.repetitions).map(move |rep| (s, m, rep)))
        .map(|(s, m, rep)| RunSpec::from_config(cfg, s, m, rep))
        .collect()
}

/// Runs the whole grid without touching the filesystem.
pub fn execute_sweep(cfg: &ExperimentConfig) -> Result<SweepOutcome> {
    cfg.validate()?;
    let specs = sweep_specs(cfg);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = worker_count() {
        builder = builder.num_threads(w);
    }
    let pool = builder.build().context("building worker pool")?;
    let results: Vec<(RunSpec, Result<RunRecord>)> =
        pool.install(|| specs.into_par_iter().map(|s| {
            let r = execute(&s);
            (s, r)
        }).collect());

    let mut records = Vec::with_capacity(results.len());
    let mut failures: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (spec, res) in results {
        match res {
            Ok(rec) => records.push(rec),
            Err(e) => {
                log::error!("run {} failed: {e:#}", spec.file_name());
                *failures.entry((spec.s, spec.m)).or_default() += 1;
            }
        }
    }
    let rows = aggregate_with_failures(&records, &failures);
    Ok(SweepOutcome { rows, records })
}

/// Writes the derived artifacts for a set of rows: `sweep.csv`, `table.txt`
/// and `plot_S<S>.csv` / `plot_S<S>.svg` per width.
pub fn write_summaries(rows: &[SweepRow], n: usize, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let write = |name: String, text: String| -> Result<()> {
        let p = dir.join(name);
        fs::write(&p, text).with_context(|| format!("writing {}", p.display()))
    };
    write("sweep.csv".into(), sweep_csv(rows))?;
    write("table.txt".into(), emit_table(rows))?;
    for (s, csv) in emit_plot_data(rows, n) {
        write(format!("plot_S{s}.svg"), emit_svg(&csv)?)?;
        write(format!("plot_S{s}.csv"), csv)?;
    }
    Ok(())
}

/// Runs the grid and writes every run JSON plus the summaries under
/// `cfg.output_dir`.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepOutcome> {
    let outcome = execute_sweep(cfg)?;
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("config.json"), serde_json::to_string_pretty(cfg)? + "\n")?;
    for rec in &outcome.records {
        write_record(rec, &dir.join("runs"))?;
    }
    write_summaries(&outcome.rows, cfg.n, dir)?;
    Ok(outcome)
}

/// Reads every `*.json` run record in `dir`, sorted by file name.
pub fn load_records(dir: &Path) -> Result<Vec<RunRecord>> {
    let mut paths: Vec<_> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    paths.iter().map(|p| read_record(p)).collect()
}
