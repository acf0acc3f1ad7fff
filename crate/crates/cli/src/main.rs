use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use vardram::sim::{self, compare, RunReport, ScenarioConfig, PRESETS};
use vardram::trace::{generate_synthetic, write_trace_file, SyntheticKind};

#[derive(Parser)]
#[command(name = "vardram", version, about = "Trace-driven DRAM simulator with variation-aware bank gating")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate one scenario (or all built-in ones) and write reports.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Scenario name: a built-in preset or a [scenarios.NAME] table.
        #[arg(long, conflicts_with = "all")]
        scenario: Option<String>,
        /// Run every built-in scenario.
        #[arg(long)]
        all: bool,
        /// Trace file (overrides the config).
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for <label>.json and <label>.banks.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare two reports of the same trace and geometry.
    Compare {
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        candidate: PathBuf,
        /// Also write the comparison as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Generate a synthetic trace (gzip when the name ends in .gz).
    GenTrace {
        #[arg(long)]
        kind: SyntheticKind,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Config providing geometry and generator parameters.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        requests: Option<usize>,
    },
    /// Sample a variation map.
    GenMap {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load_config(path: Option<&Path>, scenario: Option<&str>) -> Result<ScenarioConfig> {
    Ok(match path {
        Some(p) => ScenarioConfig::load(p, scenario).with_context(|| format!("loading {}", p.display()))?,
        None => ScenarioConfig::preset(scenario.unwrap_or("VAR"))?,
    })
}

fn run_one(cfg: &ScenarioConfig, out: &Path) -> Result<RunReport> {
    let report = sim::run(cfg).with_context(|| format!("scenario {}", cfg.scenario))?;
    let (json, csv) = report.write_to_dir(out)?;
    println!(
        "{:<10} energy {:>14.3} nJ  latency {:>8.3} ns  refresh {:>7}  span {:>12} cycles  -> {}, {}",
        report.label,
        report.energy.total_nj,
        report.latency.mean_ns,
        report.refresh.count,
        report.span_cycles,
        json.display(),
        csv.display()
    );
    Ok(report)
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> Result<()> {
    match Cli::parse().command {
        Cmd::Run {
            config,
            scenario,
            all,
            trace,
            seed,
            out,
        } => {
            let names: Vec<Option<String>> = if all {
                PRESETS.iter().map(|p| Some(p.0.to_string())).collect()
            } else {
                vec![scenario]
            };
            for name in names {
                let mut cfg = load_config(config.as_deref(), name.as_deref())?;
                if let Some(t) = &trace {
                    cfg.trace = Some(t.clone());
                }
                if let Some(s) = seed {
                    cfg.seed = s;
                }
                cfg.validate()?;
                run_one(&cfg, &out)?;
            }
        }
        Cmd::Compare {
            baseline,
            candidate,
            json,
        } => {
            let b = RunReport::load(&baseline).with_context(|| format!("reading {}", baseline.display()))?;
            let c = RunReport::load(&candidate).with_context(|| format!("reading {}", candidate.display()))?;
            let table = compare(&b, &c)?;
            print!("{}", table.to_text());
            if let Some(p) = json {
                serde_json::to_writer_pretty(BufWriter::new(File::create(&p)?), &table)?;
            }
        }
        Cmd::GenTrace {
            kind,
            seed,
            out,
            config,
            requests,
        } => {
            let cfg = load_config(config.as_deref(), None)?;
            let mut params = sim::synthetic_params(&cfg, kind)?;
            if let Some(n) = requests {
                params.requests = n;
            }
            let trace = generate_synthetic(kind, &params, &cfg.geometry, seed)?;
            write_trace_file(&out, &trace)?;
            println!("{} requests -> {}", trace.len(), out.display());
        }
        Cmd::GenMap { out, config, seed } => {
            let mut cfg = load_config(config.as_deref(), None)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if cfg.variation_map.is_some() {
                bail!("the config already names a variation map file");
            }
            let map = sim::variation_map(&cfg)?;
            map.write_to(BufWriter::new(File::create(&out)?))?;
            println!("{}x{} map -> {}", map.dims().0, map.dims().1, out.display());
        }
    }
    Ok(())
}
