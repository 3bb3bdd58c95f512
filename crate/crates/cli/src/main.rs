use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::Context;
use clap::{Parser, Subcommand};

use commit_cli::commands::{self, AnalyzeArgs, CreateGroup, ExportFormat, MemberSpec};
use commit_cli::server;
use commit_core::time::{self, Timestamp};
use commit_core::Condition;

#[derive(Parser)]
#[command(name = "commit", version, about = "Commitment-gated group chat: serve, provision, simulate, analyze, export")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the groups of a manifest over HTTP.
    Serve {
        /// Group manifest (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Directory holding the group logs; missing logs are created.
        #[arg(long)]
        log_dir: PathBuf,
        /// Run on a virtual clock moved through POST /v1/clock.
        #[arg(long)]
        virtual_clock: bool,
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
        /// Seconds between reminder sweeps on wall time.
        #[arg(long, default_value_t = 30)]
        tick_secs: u64,
    },
    /// Provision groups.
    Group {
        #[command(subcommand)]
        command: GroupCommand,
    },
    /// Run scripted-agent experiments.
    Sim {
        #[command(subcommand)]
        command: SimCommand,
    },
    /// Compute the analysis report over a directory of logs.
    Analyze {
        #[arg(long)]
        logs: PathBuf,
        /// Group manifest; defaults to <logs>/manifest.json.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "report.json")]
        out: PathBuf,
        /// Comma-separated lapse windows in days.
        #[arg(long, value_delimiter = ',')]
        lapse_windows: Option<Vec<u32>>,
        #[arg(long)]
        study_days: Option<u32>,
        /// Analysis settings as JSON; flags override it.
        #[arg(long)]
        analysis: Option<PathBuf>,
    },
    /// Write every group's records (jsonl) or messages (csv).
    Export {
        #[arg(long)]
        logs: PathBuf,
        #[arg(long, value_enum)]
        format: ExportFormat,
        /// Group manifest; defaults to <logs>/manifest.json.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output file; defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum GroupCommand {
    /// Add a group to a manifest and write its log with members joined.
    Create {
        #[arg(long)]
        name: String,
        #[arg(long, value_parser = parse_condition)]
        condition: Condition,
        #[arg(long, default_value_t = 48)]
        cycle_hours: u32,
        /// Comma-separated members, each `id` or `id=Display Name`.
        #[arg(long, value_delimiter = ',')]
        members: Vec<MemberSpec>,
        /// Group id; defaults to a slug of the name.
        #[arg(long)]
        id: Option<String>,
        /// Cycle 0 start (RFC 3339); defaults to the current hour.
        #[arg(long, value_parser = parse_time)]
        epoch: Option<Timestamp>,
        #[arg(long, default_value = "manifest.json")]
        config: PathBuf,
        /// Where the log goes; defaults to the manifest's directory.
        #[arg(long)]
        log_dir: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum SimCommand {
    /// Run an experiment plan and write its logs and manifests.
    Run {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_condition(s: &str) -> Result<Condition, String> {
    s.parse().map_err(|e: commit_core::ConfigError| e.to_string())
}

fn parse_time(s: &str) -> Result<Timestamp, String> {
    time::parse_lenient(s).map_err(|e| e.to_string())
}

fn writer(out: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Serve {
            config,
            log_dir,
            virtual_clock,
            listen,
            tick_secs,
        } => {
            let manifest = commit_core::Manifest::load(&config)
                .with_context(|| format!("reading manifest {}", config.display()))?;
            std::fs::create_dir_all(&log_dir)?;
            let state = server::load(&manifest, &log_dir, virtual_clock)?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(server::serve(state, listen, Duration::from_secs(tick_secs.max(1))))
        }
        Command::Group {
            command:
                GroupCommand::Create {
                    name,
                    condition,
                    cycle_hours,
                    members,
                    id,
                    epoch,
                    config,
                    log_dir,
                },
        } => {
            let log_dir = log_dir.unwrap_or_else(|| {
                config
                    .parent()
                    .filter(|p| !p.as_os_str().is_empty())
                    .map_or_else(|| PathBuf::from("."), Path::to_path_buf)
            });
            let cfg = commands::create_group(&CreateGroup {
                name,
                condition,
                cycle_hours,
                members,
                id,
                epoch: epoch.unwrap_or_else(commands::this_hour),
                manifest: config,
                log_dir,
            })?;
            println!("{}", serde_json::to_string_pretty(&cfg)?);
            Ok(())
        }
        Command::Sim {
            command: SimCommand::Run { plan, out },
        } => {
            let plan = commands::load_plan(&plan)?;
            let run = commands::run_sim(&plan, &out)?;
            let messages: usize = run.groups.iter().map(|g| g.state.messages().len()).sum();
            println!(
                "wrote {} groups ({messages} messages) to {}",
                run.groups.len(),
                out.display()
            );
            Ok(())
        }
        Command::Analyze {
            logs,
            config,
            out,
            lapse_windows,
            study_days,
            analysis,
        } => {
            let report = commands::run_analysis(&AnalyzeArgs {
                logs: &logs,
                config: config.as_deref(),
                analysis: analysis.as_deref(),
                lapse_windows,
                study_days,
            })?;
            let mut w = writer(Some(&out))?;
            serde_json::to_writer_pretty(&mut w, &report)?;
            writeln!(w)?;
            w.flush()?;
            println!("wrote {} ({} groups)", out.display(), report.groups.len());
            Ok(())
        }
        Command::Export {
            logs,
            format,
            config,
            out,
        } => {
            let manifest = commands::load_manifest(&logs, config.as_deref())?;
            let mut w = writer(out.as_deref())?;
            commands::export(&manifest, &logs, format, &mut w)?;
            w.flush()?;
            Ok(())
        }
    }
}

/// A closed stdout (`| head`) is not a failure.
fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        let io = c.downcast_ref::<io::Error>().or_else(|| match c.downcast_ref::<csv::Error>()?.kind() {
            csv::ErrorKind::Io(io) => Some(io),
            _ => None,
        });
        io.is_some_and(|io| io.kind() == io::ErrorKind::BrokenPipe)
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            let causes: Vec<String> = e.chain().map(|c| c.to_string()).collect();
            let body = serde_json::json!({ "error": causes.join(": ") });
            eprintln!("{body}");
            ExitCode::FAILURE
        }
    }
}
