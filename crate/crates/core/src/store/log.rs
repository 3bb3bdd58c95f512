use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::{Event, EventRecord, StoreError};
use crate::config::GroupConfig;
use crate::error::CommitError;
use crate::state::{Applied, GroupState};
use crate::time::{self, Timestamp};

/// A group's log plus the state it folds to. Single writer.
#[derive(Debug)]
pub struct GroupLog {
    state: GroupState,
    records: Vec<EventRecord>,
    sink: Option<File>,
}

impl GroupLog {
    /// New in-memory log holding only the `GROUP_CREATED` record.
    pub fn create(config: GroupConfig, at: Timestamp) -> Result<GroupLog, StoreError> {
        config.validate()?;
        let mut log = GroupLog {
            state: GroupState::new(config),
            records: Vec::new(),
            sink: None,
        };
        log.execute(at, |s| s.create())?;
        Ok(log)
    }

    /// Creates the log file (which must not exist) and writes `GROUP_CREATED`.
    pub fn create_file(config: GroupConfig, at: Timestamp, path: &Path) -> Result<GroupLog, StoreError> {
        let file = OpenOptions::new().create_new(true).append(true).open(path)?;
        let mut log = GroupLog::create(config, at)?;
        log.attach(file)?;
        Ok(log)
    }

    /// Replays an existing file and keeps it open for appends. A missing
    /// file is created.
    pub fn open_file(config: GroupConfig, path: &Path) -> Result<GroupLog, StoreError> {
        config.validate()?;
        let records = if path.exists() {
            read_records(path)?
        } else {
            Vec::new()
        };
        let state = replay(&config, &records, None)?;
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(GroupLog {
            state,
            records,
            sink: Some(file),
        })
    }

    /// Starts writing to `file`, flushing everything recorded so far.
    pub fn attach(&mut self, mut file: File) -> Result<(), StoreError> {
        for r in &self.records {
            writeln!(file, "{}", r.to_line())?;
        }
        file.flush()?;
        self.sink = Some(file);
        Ok(())
    }

    pub fn state(&self) -> &GroupState {
        &self.state
    }

    pub fn config(&self) -> &GroupConfig {
        self.state.config()
    }

    pub fn records(&self) -> &[EventRecord] {
        &self.records
    }

    pub fn head_seq(&self) -> u64 {
        self.records.last().map_or(0, |r| r.seq)
    }

    pub fn head_time(&self) -> Option<Timestamp> {
        self.records.last().map(|r| r.at)
    }

    fn check_time(&self, at: Timestamp) -> Result<(), StoreError> {
        match self.head_time() {
            Some(head) if at < head => Err(StoreError::NonMonotonicTime {
                at: time::format(&at),
                head: time::format(&head),
            }),
            _ => Ok(()),
        }
    }

    fn push(&mut self, at: Timestamp, event: Event) -> Result<u64, StoreError> {
        let record = EventRecord {
            seq: self.head_seq() + 1,
            at,
            event,
        };
        if let Some(sink) = self.sink.as_mut() {
            writeln!(sink, "{}", record.to_line())?;
            sink.flush()?;
        }
        let seq = record.seq;
        self.records.push(record);
        Ok(seq)
    }

    /// Validates `event` against the replayed state and appends it.
    pub fn append(&mut self, at: Timestamp, event: Event) -> Result<u64, StoreError> {
        let at = time::truncate(at);
        self.check_time(at)?;
        self.state.apply(at, &event)?;
        self.push(at, event)
    }

    /// Runs a state-machine operation and logs the event it produces.
    /// Returns the operation's value and the assigned seq (`None` for
    /// idempotent no-ops).
    pub fn execute<T>(
        &mut self,
        at: Timestamp,
        op: impl FnOnce(&mut GroupState) -> Result<Applied<T>, CommitError>,
    ) -> Result<(T, Option<u64>), StoreError> {
        let at = time::truncate(at);
        self.check_time(at)?;
        let applied = op(&mut self.state)?;
        let seq = match applied.event {
            Some(event) => Some(self.push(at, event)?),
            None => None,
        };
        Ok((applied.value, seq))
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&r.to_line());
            out.push('\n');
        }
        out
    }
}

fn read_records(path: &Path) -> Result<Vec<EventRecord>, StoreError> {
    let reader = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(EventRecord::from_line(&line).map_err(|e| StoreError::Corrupt {
            line: i + 1,
            reason: e.to_string(),
        })?);
    }
    Ok(records)
}

/// Parses JSONL text; a bad line halts with its 1-based position.
pub fn parse_log(text: &str) -> Result<Vec<EventRecord>, StoreError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            EventRecord::from_line(l).map_err(|e| StoreError::Corrupt {
                line: i + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}

/// Folds records in order, stopping after `up_to_seq` when given. Any
/// record that breaks ordering or fails validation halts with its position.
pub fn replay(
    config: &GroupConfig,
    records: &[EventRecord],
    up_to_seq: Option<u64>,
) -> Result<GroupState, StoreError> {
    let mut state = GroupState::new(config.clone());
    let mut prev: Option<&EventRecord> = None;
    for (i, r) in records.iter().enumerate() {
        if up_to_seq.is_some_and(|s| r.seq > s) {
            break;
        }
        let corrupt = |reason: String| StoreError::Corrupt { line: i + 1, reason };
        if let Some(p) = prev {
            if r.seq <= p.seq {
                return Err(corrupt(format!("seq {} does not follow {}", r.seq, p.seq)));
            }
            if r.at < p.at {
                return Err(corrupt("timestamp goes backwards".into()));
            }
        }
        state
            .apply(r.at, &r.event)
            .map_err(|e| corrupt(format!("{} rejected: {e}", r.event.kind_name())))?;
        prev = Some(r);
    }
    Ok(state)
}
