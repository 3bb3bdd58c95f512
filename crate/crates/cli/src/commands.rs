//! The non-serving commands: provisioning, simulation, analysis, export.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Serialize;

use commit_core::metrics::{analyze, AnalysisConfig, AnalysisReport};
use commit_core::par::Exec;
use commit_core::sim::{run_experiment, ExperimentPlan, ExperimentRun};
use commit_core::store::{log_path, read_groups, MANIFEST_FILE};
use commit_core::time::{self, Timestamp};
use commit_core::{Condition, Event, GroupConfig, GroupId, GroupLog, Manifest, MemberId};

/// A provisioned member: `id` or `id=Display Name`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemberSpec {
    pub id: MemberId,
    pub display_name: String,
}

impl std::str::FromStr for MemberSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (id, name) = match s.split_once('=') {
            Some((id, name)) => (id.trim(), name.trim()),
            None => (s.trim(), s.trim()),
        };
        if id.is_empty() {
            return Err(format!("empty member id in {s:?}"));
        }
        Ok(MemberSpec {
            id: id.into(),
            display_name: name.to_string(),
        })
    }
}

/// Lowercase ASCII slug of a group name.
pub fn slug(name: &str) -> String {
    let mut out = String::new();
    for c in name.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('-') {
            out.push('-');
        }
    }
    out.trim_matches('-').to_string()
}

pub struct CreateGroup {
    pub name: String,
    pub condition: Condition,
    pub cycle_hours: u32,
    pub members: Vec<MemberSpec>,
    pub id: Option<String>,
    pub epoch: Timestamp,
    pub manifest: PathBuf,
    pub log_dir: PathBuf,
}

/// Adds a group to the manifest and writes its log with the provisioned
/// members joined at the epoch. Nothing is written if validation fails.
pub fn create_group(req: &CreateGroup) -> anyhow::Result<GroupConfig> {
    let id = req.id.clone().unwrap_or_else(|| slug(&req.name));
    if id.is_empty() {
        bail!("group id is empty; pass --id");
    }
    let config = GroupConfig {
        cycle_hours: req.cycle_hours,
        ..GroupConfig::new(GroupId(id), req.name.clone(), req.condition, req.epoch)
    };
    config.validate().context("invalid group config")?;
    let mut manifest = if req.manifest.exists() {
        Manifest::load(&req.manifest).with_context(|| format!("reading {}", req.manifest.display()))?
    } else {
        Manifest::default()
    };
    if manifest.group(&config.group_id).is_some() {
        bail!("group {} is already in {}", config.group_id, req.manifest.display());
    }
    let mut seen = std::collections::HashSet::new();
    for m in &req.members {
        if !seen.insert(&m.id) {
            bail!("member {} listed twice", m.id);
        }
    }
    let path = log_path(&req.log_dir, &config.group_id);
    if path.exists() {
        bail!("{} already exists", path.display());
    }
    std::fs::create_dir_all(&req.log_dir)?;
    let at = config.epoch;
    let mut log = GroupLog::create(config.clone(), at)?;
    for m in &req.members {
        log.execute(at, |s| s.join(&m.id, &m.display_name, at))?;
    }
    manifest.groups.push(config.clone());
    manifest.validate()?;
    std::fs::write(&path, log.to_jsonl()).with_context(|| format!("writing {}", path.display()))?;
    manifest.save(&req.manifest)?;
    Ok(config)
}

/// The current hour, used as the default epoch.
pub fn this_hour() -> Timestamp {
    let ms = time::truncate(chrono::Utc::now()).timestamp_millis();
    time::from_millis(ms - ms.rem_euclid(time::MS_PER_HOUR))
}

pub fn load_plan(path: &Path) -> anyhow::Result<ExperimentPlan> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let plan: ExperimentPlan =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(plan)
}

pub fn run_sim(plan: &ExperimentPlan, out: &Path) -> anyhow::Result<ExperimentRun> {
    let run = run_experiment(plan, Exec::Parallel)?;
    run.write(out)?;
    Ok(run)
}

/// The manifest for a log directory: `config` if given, else the
/// directory's own `manifest.json`.
pub fn load_manifest(logs: &Path, config: Option<&Path>) -> anyhow::Result<Manifest> {
    let path = config.map_or_else(|| logs.join(MANIFEST_FILE), Path::to_path_buf);
    Manifest::load(&path).with_context(|| format!("reading manifest {}", path.display()))
}

pub struct AnalyzeArgs<'a> {
    pub logs: &'a Path,
    pub config: Option<&'a Path>,
    pub analysis: Option<&'a Path>,
    pub lapse_windows: Option<Vec<u32>>,
    pub study_days: Option<u32>,
}

pub fn analysis_config(args: &AnalyzeArgs) -> anyhow::Result<AnalysisConfig> {
    let mut cfg = match args.analysis {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => AnalysisConfig::default(),
    };
    if let Some(w) = &args.lapse_windows {
        cfg.lapse_windows = w.clone();
    }
    if let Some(d) = args.study_days {
        cfg.study_days = d;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run_analysis(args: &AnalyzeArgs) -> anyhow::Result<AnalysisReport> {
    let cfg = analysis_config(args)?;
    let manifest = load_manifest(args.logs, args.config)?;
    if manifest.groups.is_empty() {
        bail!("manifest lists no groups");
    }
    let groups = read_groups(args.logs, &manifest)?;
    let states: Vec<_> = groups.iter().map(|g| &g.state).collect();
    Ok(analyze(&states, &cfg, Exec::Parallel)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ExportFormat {
    Jsonl,
    Csv,
}

/// One message, flattened for spreadsheets.
#[derive(Serialize)]
struct MessageRow<'a> {
    group_id: &'a str,
    condition: &'a str,
    seq: u64,
    sent_at: String,
    message_id: u64,
    sender_id: &'a str,
    kind: &'a str,
    body: &'a str,
}

/// JSONL: every record of every group, each line the stored record with a
/// leading `group_id`. CSV: one row per message.
pub fn export(manifest: &Manifest, logs: &Path, format: ExportFormat, out: &mut dyn Write) -> anyhow::Result<()> {
    let groups = read_groups(logs, manifest)?;
    match format {
        ExportFormat::Jsonl => {
            for (cfg, g) in manifest.groups.iter().zip(&groups) {
                let id = serde_json::to_string(cfg.group_id.as_str())?;
                for r in &g.records {
                    let line = r.to_line();
                    writeln!(out, "{{\"group_id\":{id},{}", &line[1..])?;
                }
            }
        }
        ExportFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for (cfg, g) in manifest.groups.iter().zip(&groups) {
                for r in &g.records {
                    if let Event::Message {
                        message_id,
                        sender_id,
                        kind,
                        body,
                    } = &r.event
                    {
                        w.serialize(MessageRow {
                            group_id: cfg.group_id.as_str(),
                            condition: cfg.condition.as_str(),
                            seq: r.seq,
                            sent_at: time::format(&r.at),
                            message_id: message_id.0,
                            sender_id: sender_id.as_str(),
                            kind: match kind {
                                commit_core::MessageKind::Text => "TEXT",
                                commit_core::MessageKind::Image => "IMAGE",
                            },
                            body,
                        })?;
                    }
                }
            }
            w.flush()?;
        }
    }
    Ok(())
}
