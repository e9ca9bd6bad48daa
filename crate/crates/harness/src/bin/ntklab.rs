use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use ntklab::quasirandom::{SubsetSampleConfig, SuiteConfig};
use ntklab::{LabelMode, ProblemDims, ZInit};
use ntklab_harness::commands::{invariant_command, kernel_grid, kernels_table, props_command};
use ntklab_harness::config::{parse_list, ExperimentConfig, MRule};
use ntklab_harness::report::emit_svg;
use ntklab_harness::run::RunSpec;
use ntklab_harness::sweep::{aggregate, load_records, run_sweep, write_summaries};

/// Two-rate gradient descent experiments for depth-2 ReLU networks.
#[derive(Parser)]
#[command(name = "ntklab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a single (S, m, repetition) cell and write its JSON report.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long = "S")]
        s: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        rep: usize,
    },
    /// Run every cell of the configured grid and aggregate.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Evaluate every quasirandom property on one sampled instance.
    Props {
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 500)]
        m: usize,
        #[arg(long = "S", default_value_t = 1000)]
        s: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "z-init", default_value = "rademacher", value_parser = parse_enum::<ZInit>)]
        z_init: ZInit,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long = "output-dir", default_value = "out")]
        output_dir: PathBuf,
    },
    /// Tabulate the limit kernels against Monte Carlo estimates.
    Kernels {
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "output-dir", default_value = "out")]
        output_dir: PathBuf,
    },
    /// Record the layer-balance invariant along one run, optionally with
    /// the rate-halving drift study.
    Invariant {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long = "S")]
        s: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        rep: usize,
        #[arg(long = "history-stride", default_value_t = 10)]
        history_stride: usize,
        #[arg(long, default_value_t = 0)]
        halvings: u32,
    },
    /// Rebuild summaries from stored run JSONs, or render one plot CSV.
    Plot {
        /// Directory of run JSONs to aggregate.
        #[arg(long = "runs-dir", conflicts_with = "csv")]
        runs_dir: Option<PathBuf>,
        /// Plot-data CSV to render as SVG.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long = "output-dir", default_value = "out")]
        output_dir: PathBuf,
    },
}

/// Config file plus per-field overrides named after the JSON fields.
#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long = "S-list")]
    s_list: Option<String>,
    #[arg(long = "m-rule")]
    m_rule: Option<String>,
    #[arg(long = "eta-w-default")]
    eta_w_default: Option<f64>,
    #[arg(long = "eta-z")]
    eta_z: Option<f64>,
    #[arg(long = "label-mode", value_parser = parse_enum::<LabelMode>)]
    label_mode: Option<LabelMode>,
    #[arg(long = "z-init", value_parser = parse_enum::<ZInit>)]
    z_init: Option<ZInit>,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long = "master-seed")]
    master_seed: Option<u64>,
    #[arg(long = "output-dir")]
    output_dir: Option<PathBuf>,
    #[arg(long = "max-steps")]
    max_steps: Option<usize>,
    #[arg(long = "eps-success")]
    eps_success: Option<f64>,
    /// Drop the default learning-rate overrides.
    #[arg(long = "no-rate-overrides")]
    no_rate_overrides: bool,
}

fn parse_enum<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.n {
            c.n = v;
        }
        if let Some(v) = &self.s_list {
            c.s_list = parse_list(v)?;
        }
        if let Some(v) = &self.m_rule {
            c.m_rule = MRule::parse(v)?;
        }
        if let Some(v) = self.eta_w_default {
            c.eta_w_default = v;
        }
        if let Some(v) = self.eta_z {
            c.eta_z = v;
        }
        if let Some(v) = self.label_mode {
            c.label_mode = v;
        }
        if let Some(v) = self.z_init {
            c.z_init = v;
        }
        if let Some(v) = self.repetitions {
            c.repetitions = v;
        }
        if let Some(v) = self.master_seed {
            c.master_seed = v;
        }
        if let Some(v) = &self.output_dir {
            c.output_dir = v.clone();
        }
        if self.max_steps.is_some() {
            c.max_steps = self.max_steps;
        }
        if self.eps_success.is_some() {
            c.eps_success = self.eps_success;
        }
        if self.no_rate_overrides {
            c.rate_overrides.clear();
        }
        c.validate()?;
        Ok(c)
    }
}

fn write(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let p = dir.join(name);
    fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?;
    Ok(p)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run { cfg, s, m, rep } => {
            let c = cfg.resolve()?;
            let spec = RunSpec::from_config(&c, s, m, rep);
            let (rec, path) = ntklab_harness::run_single(&spec, &c.output_dir)?;
            let r = &rec.report;
            println!(
                "{:?} T={} kappa_H={:.4} |D|={} ||W_T-W_0||_F={:.3} -> {}",
                r.status,
                r.steps,
                r.kappa_h,
                r.d_count.map_or("-".into(), |d| d.to_string()),
                r.w_displacement,
                path.display()
            );
        }
        Command::Sweep { cfg } => {
            let c = cfg.resolve()?;
            let out = run_sweep(&c)?;
            print!("{}", ntklab_harness::report::emit_table(&out.rows));
        }
        Command::Props { n, m, s, seed, z_init, samples, output_dir } => {
            let dims = ProblemDims::new(n, m, s)?;
            let suite = SuiteConfig {
                subsets: SubsetSampleConfig { num_samples: samples, ..Default::default() },
                ..Default::default()
            };
            let bundle = props_command(dims, seed, z_init, &suite)?;
            for r in &bundle.reports {
                println!("{r}");
            }
            println!("lambda_min(H0) = {:.6}", bundle.lambda_min_h0);
            write(&output_dir, "props.json", &(serde_json::to_string_pretty(&bundle)? + "\n"))?;
        }
        Command::Kernels { n, samples, seed, output_dir } => {
            let csv = kernels_table(&kernel_grid(), n, samples, seed)?;
            print!("{csv}");
            write(&output_dir, "kernels.csv", &csv)?;
        }
        Command::Invariant { cfg, s, m, rep, history_stride, halvings } => {
            let c = cfg.resolve()?;
            let spec = RunSpec::from_config(&c, s, m, rep);
            let out = invariant_command(&spec, history_stride, halvings)?;
            write(&c.output_dir, "invariant.csv", &out.csv)?;
            println!(
                "{:?} T={} invariant drift {:e}",
                out.report.status, out.report.steps, out.report.invariant_drift
            );
            if !out.levels.is_empty() {
                for l in &out.levels {
                    println!("eta x {:<8} drift_max={:e} steps={} {:?}", l.eta_scale, l.drift_max, l.steps, l.status);
                }
                write(&c.output_dir, "drift.json", &(serde_json::to_string_pretty(&out.levels)? + "\n"))?;
            }
        }
        Command::Plot { runs_dir, csv, n, output_dir } => match (runs_dir, csv) {
            (Some(dir), _) => {
                let rows = aggregate(&load_records(&dir)?);
                write_summaries(&rows, n, &output_dir)?;
                print!("{}", ntklab_harness::report::emit_table(&rows));
            }
            (None, Some(path)) => {
                let text = fs::read_to_string(&path)
                    .with_context(|| format!("reading {}", path.display()))?;
                let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("plot");
                let p = write(&output_dir, &format!("{stem}.svg"), &emit_svg(&text)?)?;
                println!("{}", p.display());
            }
            (None, None) => anyhow::bail!("plot needs --runs-dir or --csv"),
        },
    }
    Ok(())
}
