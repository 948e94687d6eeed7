//! Append-only run journal, one JSON document per line.
//!
//! A run opens the journal at `<output>/<plan-id>/journal.jsonl`. Each trial
//! is appended as soon as it finishes, so a crash loses at most the trial in
//! flight. On reopen, a torn last line is cut off and the completed state is
//! replayed.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{AxisPoint, EngineError, ExperimentPlan, TrialResult};
use crate::platform::Violation;

pub const JOURNAL_FILE: &str = "journal.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JournalEntry {
    Plan {
        plan_id: String,
        plan_digest: String,
        plan: ExperimentPlan,
    },
    Trial(TrialResult),
    PointFailed {
        point: AxisPoint,
        reason: String,
        #[serde(default)]
        violations: Vec<Violation>,
    },
    PointComplete {
        point: AxisPoint,
    },
}

/// What an existing journal says about a plan's progress.
#[derive(Debug, Clone, Default)]
pub struct JournalState {
    pub plan_digest: Option<String>,
    pub plan: Option<ExperimentPlan>,
    pub trials: BTreeMap<AxisPoint, Vec<TrialResult>>,
    pub failed: BTreeMap<AxisPoint, (String, Vec<Violation>)>,
    pub complete: BTreeSet<AxisPoint>,
}

impl JournalState {
    pub fn trial_count(&self) -> usize {
        self.trials.values().map(Vec::len).sum()
    }

    pub fn is_done(&self, point: &AxisPoint) -> bool {
        self.complete.contains(point) || self.failed.contains_key(point)
    }
}

pub struct Journal {
    path: PathBuf,
    file: Mutex<File>,
}

impl Journal {
    /// Opens (creating if needed) the journal in `dir`, repairing a torn tail.
    pub fn open(dir: &Path) -> Result<(Self, JournalState), EngineError> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(JOURNAL_FILE);
        let mut file = OpenOptions::new()
            .read(true)
            .write(true)
            .create(true)
            .truncate(false)
            .open(&path)?;
        let state = replay(&mut file, &path)?;
        file.seek(SeekFrom::End(0))?;
        Ok((
            Self {
                path,
                file: Mutex::new(file),
            },
            state,
        ))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, entry: &JournalEntry) -> Result<(), EngineError> {
        let mut line = serde_json::to_string(entry).expect("journal entry serializes");
        line.push('\n');
        let mut f = self.file.lock().expect("journal poisoned");
        f.write_all(line.as_bytes())?;
        f.flush()?;
        Ok(())
    }

    pub fn sync(&self) -> Result<(), EngineError> {
        self.file.lock().expect("journal poisoned").sync_data()?;
        Ok(())
    }
}

/// Reads a journal without opening it for writing.
pub fn read_journal(path: &Path) -> Result<JournalState, EngineError> {
    let file = File::open(path)?;
    let mut state = JournalState::default();
    for line in BufReader::new(file).lines() {
        let line = line?;
        // A torn final line from a crash is not an error for readers.
        if let Ok(entry) = serde_json::from_str::<JournalEntry>(&line) {
            apply(&mut state, entry);
        }
    }
    Ok(state)
}

fn replay(file: &mut File, path: &Path) -> Result<JournalState, EngineError> {
    let mut state = JournalState::default();
    let mut reader = BufReader::new(&mut *file);
    let mut good_len: u64 = 0;
    let mut buf = String::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        let n = reader.read_line(&mut buf)?;
        if n == 0 {
            break;
        }
        line_no += 1;
        if !buf.ends_with('\n') {
            // Torn tail: the process died mid-write.
            break;
        }
        let entry: JournalEntry = serde_json::from_str(buf.trim_end())
            .map_err(|e| EngineError::Journal(format!("{}:{line_no}: {e}", path.display())))?;
        apply(&mut state, entry);
        good_len += n as u64;
    }
    drop(reader);
    if file.metadata()?.len() != good_len {
        file.set_len(good_len)?;
    }
    Ok(state)
}

fn apply(state: &mut JournalState, entry: JournalEntry) {
    match entry {
        JournalEntry::Plan { plan_digest, plan, .. } => {
            state.plan_digest = Some(plan_digest);
            state.plan = Some(plan);
        }
        JournalEntry::Trial(t) => {
            let trials = state.trials.entry(t.point.clone()).or_default();
            // A trial re-run after a crash replaces its earlier copy.
            trials.retain(|x| x.trial != t.trial);
            trials.push(t);
        }
        JournalEntry::PointFailed {
            point,
            reason,
            violations,
        } => {
            state.failed.insert(point, (reason, violations));
        }
        JournalEntry::PointComplete { point } => {
            state.complete.insert(point);
        }
    }
}
