use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use rolescope::config::RunConfig;
use rolescope::report::{cmd_report, ReportFormat};
use rolescope::synth::{write_store, SynthOptions};
use rolescope::{pipeline, Result};

#[derive(Parser)]
#[command(
    name = "rolescope",
    version,
    about = "Mine contributor roles from repository activity"
)]
struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, short, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Download contributor actions of the configured projects into the event store.
    Fetch,
    /// Compute the per-quarter action metrics and write metrics.csv.
    Metrics,
    /// Run factor analysis, clustering and role dynamics and write all artifacts.
    Analyze {
        /// Use this metrics CSV instead of recomputing it from the store.
        #[arg(long, value_name = "PATH")]
        metrics: Option<PathBuf>,
    },
    /// Summarize the artifacts of a previous `analyze` run.
    Report {
        /// Artifact directory; defaults to the configured output directory.
        #[arg(long, value_name = "DIR")]
        dir: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Write a synthetic event store with a planted role structure.
    Synth {
        /// Store directory; defaults to the configured store.
        #[arg(long, value_name = "DIR")]
        store: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        contributors: usize,
        #[arg(long, default_value_t = 10)]
        projects: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Markdown,
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Fetch => {
            let reports = pipeline::cmd_fetch(&cfg)?;
            for r in &reports {
                let name = r
                    .project
                    .as_ref()
                    .map_or_else(|| "?".to_string(), |p| p.to_string());
                println!(
                    "{name}: {} new events ({} already stored)",
                    r.new_events,
                    r.seen_events - r.new_events
                );
            }
            let total: usize = reports.iter().map(|r| r.new_events).sum();
            println!("{total} new events");
        }
        Command::Metrics => {
            let path = pipeline::cmd_metrics(&cfg)?;
            println!("wrote {}", path.display());
        }
        Command::Analyze { metrics } => {
            let manifest = pipeline::cmd_analyze(&cfg, metrics.as_deref())?;
            let s = &manifest.summary;
            println!(
                "{} rows, {} factors, {} active + {} supporting roles; artifacts in {}",
                s.rows,
                s.factors,
                s.active_roles,
                s.supporting_roles,
                cfg.output_path().display()
            );
        }
        Command::Report { dir, format } => {
            let dir = dir.unwrap_or_else(|| cfg.output_path());
            let format = match format {
                Format::Text => ReportFormat::Text,
                Format::Markdown => ReportFormat::Markdown,
            };
            print!("{}", cmd_report(&dir, format)?);
        }
        Command::Synth {
            store,
            contributors,
            projects,
            seed,
        } => {
            let dir = store.unwrap_or_else(|| cfg.store_path());
            let opts = SynthOptions {
                contributors,
                projects,
                seed,
                window: cfg.window,
                ..SynthOptions::default()
            };
            let (_, data) = write_store(&dir, &opts)?;
            println!("wrote {} events to {}", data.events.len(), dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
