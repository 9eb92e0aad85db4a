use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use tierlab::allocator::{resolve, GroupingStrategy};
use tierlab::config::{ComparePlan, RunConfig};
use tierlab::error::{ConfigError, Error, SimError, WorkloadError};
use tierlab::experiment::{self, Execution};
use tierlab::metrics::{cdf_csv, heatmap, heatmap_csv};
use tierlab::migration::MigrationConfig;
use tierlab::sim::measured_wss_pages;
use tierlab::workload::{self, Trace, TraceFormat};

/// Trace-driven tiered-memory simulator.
#[derive(Parser)]
#[command(name = "tierlab", version)]
struct Cli {
    /// Root seed; overrides `run.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides `run.out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Multiplier for sample-denominated policy defaults; overrides `run.scale`.
    #[arg(long, global = true)]
    scale: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Input {
    /// Run configuration file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Replay this trace file instead of the configured source.
    #[arg(short, long)]
    trace: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Binary,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the configured workload and write it as a trace file.
    Generate {
        #[arg(short, long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        /// Trace path (default: <out>/trace.tlt).
        #[arg(short = 'o', long)]
        output: Option<PathBuf>,
    },
    /// Simulate one configuration; writes report.json and timeline.csv.
    Simulate(Input),
    /// Simulate every row of a comparison file; writes summary.csv.
    Compare {
        #[arg(short, long)]
        config: PathBuf,
        /// Run rows one after another instead of in parallel.
        #[arg(long)]
        sequential: bool,
    },
    /// Access counts per address and time bucket; writes heatmap.csv.
    Heatmap(Input),
    /// Cumulative access share over pages by popularity; writes cdf.csv.
    Cdf(Input),
}

impl Cli {
    fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if let Some(s) = self.scale {
            cfg.set("run", "scale", &s.to_string(), Path::new("."))?;
        }
        Ok(())
    }

    fn load(&self, path: Option<&Path>) -> Result<RunConfig> {
        let mut cfg = match path {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        self.apply(&mut cfg)?;
        cfg.sim_config(1)?;
        Ok(cfg)
    }

    fn input(&self, input: &Input) -> Result<(RunConfig, Trace)> {
        let cfg = self.load(input.config.as_deref())?;
        let trace = match &input.trace {
            Some(p) => {
                let t = workload::read_trace(p)?;
                t.validate()
                    .map_err(|(seq, msg)| WorkloadError::Invalid(format!("trace event {seq}: {msg}")))
                    .map_err(Error::from)?;
                t
            }
            None => cfg.load_trace()?,
        };
        Ok((cfg, trace))
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Generate { config, format, output } => {
            let cfg = cli.load(config.as_deref())?;
            let Some(spec) = cfg.workload() else {
                anyhow::bail!(Error::from(ConfigError::Invalid(
                    "generate needs a [workload] section, not run.trace".into()
                )));
            };
            let trace = workload::generate(&spec).map_err(Error::from)?;
            let path = match output {
                Some(p) => p.clone(),
                None => {
                    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
                    cfg.out.join("trace.tlt")
                }
            };
            let fmt = match format {
                Format::Text => TraceFormat::Text,
                Format::Binary => TraceFormat::Binary,
            };
            workload::write_trace(&trace, &path, fmt).map_err(Error::from)?;
            let resolved = resolve(&trace, GroupingStrategy::TimeBased, cfg.max_pages).map_err(Error::from)?;
            let window = MigrationConfig::scaled(cfg.scale).tick_interval_accesses;
            let wss = measured_wss_pages(&resolved, window);
            println!(
                "wrote {}: {} events, {} accesses, {} pages; working set {:.1} pages ({:.0} bytes) per {} accesses",
                path.display(),
                trace.events().len(),
                resolved.access_count,
                resolved.pages_opened,
                wss,
                wss * trace.page_size() as f64,
                window
            );
        }
        Command::Simulate(input) => {
            let (cfg, trace) = cli.input(input)?;
            let (_, report) = experiment::run_one(&cfg, &trace)?;
            write(&cfg.out, "report.json", &report.to_json())?;
            write(&cfg.out, "timeline.csv", &report.timeline_csv())?;
            println!(
                "{} / {}: hit rate {:.4}, {} promotions, {} demotions, estimated {:.3} ms",
                report.policy,
                report.strategy,
                report.hit_rate,
                report.promotions,
                report.demotions,
                report.estimated_runtime_ns / 1e6
            );
        }
        Command::Compare { config, sequential } => {
            let mut plan = ComparePlan::load(config)?;
            cli.apply(&mut plan.base)?;
            let rows = plan.rows()?;
            let trace = plan.base.load_trace()?;
            let exec = if *sequential {
                Execution::Sequential
            } else {
                Execution::default()
            };
            let results = experiment::run_rows(&rows, &trace, exec)?;
            let summary = experiment::summarize(&results);
            write(&plan.base.out, "summary.csv", &experiment::summary_csv(&summary))?;
            for r in &summary {
                println!(
                    "{:<32} {:<22} {:<8} hit {:.4}  migrations {:>8}  slowdown {:.3}",
                    r.name, r.policy, r.strategy, r.hit_rate, r.migrations, r.slowdown
                );
            }
        }
        Command::Heatmap(input) => {
            let (cfg, trace) = cli.input(input)?;
            let resolved = resolve(&trace, cfg.strategy, cfg.max_pages).map_err(Error::from)?;
            let m = heatmap(
                &resolved,
                cfg.report.heatmap_address_buckets,
                cfg.report.heatmap_time_buckets,
            )
            .map_err(|e| Error::from(ConfigError::Invalid(e)))?;
            let path = write(&cfg.out, "heatmap.csv", &heatmap_csv(&m))?;
            println!("wrote {}", path.display());
        }
        Command::Cdf(input) => {
            let (cfg, trace) = cli.input(input)?;
            let resolved = resolve(&trace, cfg.strategy, cfg.max_pages).map_err(Error::from)?;
            let path = write(&cfg.out, "cdf.csv", &cdf_csv(&resolved))?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

/// 1 for a violated simulator invariant, 2 for anything the input caused.
fn exit_code(e: &anyhow::Error) -> u8 {
    let invariant = e.downcast_ref::<Error>().is_some_and(|e| !e.is_bad_input())
        || e.downcast_ref::<SimError>()
            .is_some_and(|e| matches!(e, SimError::Invariant(_)));
    if invariant {
        1
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut msg = e.to_string();
            for cause in e.chain().skip(1) {
                let c = cause.to_string();
                if !msg.contains(&c) {
                    msg = format!("{msg}: {c}");
                }
            }
            eprintln!("tierlab: {msg}");
            ExitCode::from(exit_code(&e))
        }
    }
}
